//! Life-cycle cost and decision engine for roadside sensor-station rollouts.
//!
//! The pipeline runs bottom-up:
//!
//! * [`scenario`] holds cities, sensor setups and the cost catalog.
//! * [`schedule`] spreads each city's nodes over the build window.
//! * [`market`] turns price-index history into an escalation model.
//! * [`lcc`] prices the rollout month by month into a discounted NPV.
//! * [`montecarlo`] repeats the pricing under correlated escalation draws.
//! * [`ahp`] and [`effectiveness`] rank setups by effectiveness per euro.

pub mod ahp;
pub mod effectiveness;
pub mod error;
pub mod lcc;
pub mod market;
pub mod montecarlo;
pub mod scenario;
pub mod schedule;

pub use ahp::{ahp_weights, synthesize_quality, AhpResult, Hierarchy, PairwiseMatrix, QualityScores};
pub use effectiveness::{
    effectiveness, evaluate_setups, rain_exceedance, setup_availability, system_effectiveness, AvailabilityConfig,
    AvailabilityMode, EffectivenessResult, EffectivenessRow, RainfallSeries, ReferenceTable, SetupInput,
};
pub use error::{Error, Result};
pub use lcc::{run_static_lcc, CashFlowLedger, CostProgram, EscalationFactors, LedgerCategory, LedgerEntry, Prices};
pub use market::{build_escalation_model, EscalationModel, MonthStamp, PriceIndexSeries};
pub use montecarlo::{run_simulation, McSummary, SimulationConfig};
pub use scenario::{
    builtin_cities, builtin_city, CityScenario, CostCatalog, CostItem, Domain, Sensor, SensorSetup, SetupCode,
};
pub use schedule::{deployment_schedule, DeploymentPlan, DomainCounts};
