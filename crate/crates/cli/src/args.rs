use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Input selector value meaning "use the data bundled with the engine".
pub const BUILTIN: &str = "builtin";

#[derive(Debug, Parser)]
#[command(name = "itslcc", version, about = "Life-cycle cost, cost risk and effectiveness of roadside sensor-station rollouts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory that receives report files; stdout only when unset.
    #[arg(long, global = true, env = "ITSLCC_OUT")]
    pub out: Option<PathBuf>,

    /// Summary format [default: json; csv for `cities` and `schedule`].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Static life-cycle cost: ledger CSV and NPV summary.
    Lcc(LccArgs),
    /// Monte Carlo NPV distribution under correlated escalation.
    Simulate(SimulateArgs),
    /// Quality, availability, reach, effectiveness and SE per setup.
    Effect(EffectArgs),
    /// The bundled city fixtures.
    Cities,
    /// AHP weights and consistency of the pairwise matrices.
    Ahp(AhpArgs),
    /// Monthly deployment plan.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Bundled city name (case-insensitive).
    #[arg(long, conflicts_with = "scenario")]
    pub city: Option<String>,

    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// Annual real discount rate, overriding the scenario.
    #[arg(long, allow_negative_numbers = true)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Cost catalog JSON [default: bundled sample catalog].
    #[arg(long)]
    pub catalog: Option<PathBuf>,

    /// Monthly price indices CSV `month,series_id,index` [default: bundled sample].
    #[arg(long)]
    pub indices: Option<PathBuf>,

    /// Long-window indices whose endpoint growth replaces the mean escalation rates.
    #[arg(long)]
    pub long_run_indices: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LccArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub cost: CostArgs,

    /// Sensor setup code, e.g. CL.
    #[arg(long)]
    pub setup: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub lcc: LccArgs,

    #[arg(long, default_value_t = itslcc::montecarlo::DEFAULT_ITERATIONS)]
    pub iterations: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; results do not depend on this [default: available cores].
    #[arg(long)]
    pub workers: Option<usize>,

    #[arg(long, default_value_t = itslcc::montecarlo::DEFAULT_BINS)]
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AvailabilityArg {
    /// Per-setup values from the quality table (or the bundled reference).
    Table,
    /// Mean of the per-sensor availabilities from the rainfall data.
    Rule,
}

#[derive(Debug, Args)]
pub struct EffectArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub cost: CostArgs,

    /// Table with per-setup quality and availability, or `builtin`.
    #[arg(long, conflicts_with = "ahp_dir")]
    pub quality_table: Option<String>,

    /// Directory with criteria.json and one matrix per criterion, or `builtin`.
    #[arg(long)]
    pub ahp_dir: Option<String>,

    /// Accept pairwise matrices with CI >= 0.05.
    #[arg(long)]
    pub allow_inconsistent: bool,

    #[arg(long, value_enum, default_value_t = AvailabilityArg::Table)]
    pub availability: AvailabilityArg,

    /// Rainfall CSV `timestamp,precip_mm_per_h` [default: bundled fixture].
    #[arg(long)]
    pub rainfall: Option<PathBuf>,

    #[arg(long, default_value_t = itslcc::effectiveness::DEFAULT_RAIN_THRESHOLD)]
    pub rain_threshold: f64,

    /// Table with per-setup `lcc_eur`, or `builtin`; computed from the catalog when unset.
    #[arg(long)]
    pub lcc_table: Option<String>,

    /// Comma-separated setups [default: every setup with a quality value].
    #[arg(long, value_delimiter = ',')]
    pub setups: Vec<String>,

    /// Budget cap in EUR; reach shrinks where the LCC exceeds it.
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AhpArgs {
    /// Directory with criteria.json and one matrix per criterion, or `builtin`.
    #[arg(long, default_value = BUILTIN)]
    pub ahp_dir: String,

    /// Accept pairwise matrices with CI >= 0.05.
    #[arg(long)]
    pub allow_inconsistent: bool,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}
