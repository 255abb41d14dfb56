//! Deterministic life-cycle cost engine.
//!
//! A scenario is compiled once into a [`CostProgram`]: a flat list of cost
//! terms, each an unescalated base amount tied to a month, a domain, a ledger
//! category and an escalation series. Pricing the program against a matrix of
//! escalation factors yields the discounted NPV. The static model prices it
//! with mean rates; the Monte Carlo sampler prices the same program with random
//! paths, so both go through one summation.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::EscalationModel;
use crate::scenario::{bill_of_materials, Category, CityScenario, CostCatalog, CostItem, Domain, SensorSetup};
use crate::schedule::{deployment_schedule, DeploymentPlan};

/// Continuous operation: hours per month.
pub const HOURS_PER_MONTH: f64 = 730.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerCategory {
    CapexHardware,
    CapexInstall,
    OpexEnergy,
    OpexPersonnel,
    OpexBackend,
    OpexMaintenance,
    OpexRenewal,
}

impl LedgerCategory {
    pub const ALL: [LedgerCategory; 7] = [
        LedgerCategory::CapexHardware,
        LedgerCategory::CapexInstall,
        LedgerCategory::OpexEnergy,
        LedgerCategory::OpexPersonnel,
        LedgerCategory::OpexBackend,
        LedgerCategory::OpexMaintenance,
        LedgerCategory::OpexRenewal,
    ];

    pub fn is_capex(self) -> bool {
        matches!(self, LedgerCategory::CapexHardware | LedgerCategory::CapexInstall)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LedgerCategory::CapexHardware => "capex_hardware",
            LedgerCategory::CapexInstall => "capex_install",
            LedgerCategory::OpexEnergy => "opex_energy",
            LedgerCategory::OpexPersonnel => "opex_personnel",
            LedgerCategory::OpexBackend => "opex_backend",
            LedgerCategory::OpexMaintenance => "opex_maintenance",
            LedgerCategory::OpexRenewal => "opex_renewal",
        }
    }
}

impl From<Category> for LedgerCategory {
    fn from(c: Category) -> Self {
        match c {
            Category::CapexHardware => LedgerCategory::CapexHardware,
            Category::CapexInstall => LedgerCategory::CapexInstall,
            Category::OpexEnergy => LedgerCategory::OpexEnergy,
            Category::OpexPersonnel => LedgerCategory::OpexPersonnel,
            Category::OpexBackend => LedgerCategory::OpexBackend,
            Category::OpexMaintenance => LedgerCategory::OpexMaintenance,
        }
    }
}

impl fmt::Display for LedgerCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// End-of-month discounting at a real annual rate: `(1 + r)^(-month / 12)`.
pub fn discount_factor(month: u32, annual_rate: f64) -> f64 {
    (1.0 + annual_rate).powf(-(month as f64) / 12.0)
}

/// Unit price after `month` months at the series' mean monthly escalation.
pub fn escalated_price(item: &CostItem, month: u32, model: &EscalationModel) -> Result<f64> {
    if !item.escalates() {
        return Ok(item.unit_price_eur);
    }
    let s = model.index_of(&item.escalation_series).ok_or_else(|| Error::UnknownSeries {
        item: item.id.clone(),
        series: item.escalation_series.clone(),
    })?;
    Ok(item.unit_price_eur * (1.0 + model.mu[s]).powi(month as i32))
}

/// One employee per `personnel_nodes_per_employee` nodes, capped at `personnel_max`.
pub fn personnel_count(cumulative_nodes: u64, scenario: &CityScenario) -> u64 {
    let per = scenario.personnel_nodes_per_employee.max(1) as u64;
    cumulative_nodes.div_ceil(per).min(scenario.personnel_max as u64)
}

/// Cumulative escalation factors, `horizon` rows by `n` series, row 0 all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct EscalationFactors {
    n: usize,
    values: Vec<f64>,
    /// Factors that went negative and were floored to zero.
    pub floored: usize,
}

impl EscalationFactors {
    pub fn new(horizon: usize, n: usize) -> Self {
        EscalationFactors {
            n,
            values: vec![1.0; horizon * n],
            floored: 0,
        }
    }

    /// Factors for the static model: every month escalates at `mu`.
    pub fn constant(mu: &[f64], horizon: usize) -> Self {
        let mut f = Self::new(horizon, mu.len());
        f.fill_with(|_, s| mu[s]);
        f
    }

    /// Compounds monthly rates given row-major as `months x n` (row `m` applies
    /// between month `m` and `m + 1`).
    pub fn from_rates(rates: &[f64], n: usize, horizon: usize) -> Self {
        let mut f = Self::new(horizon, n);
        f.fill_from_rates(rates);
        f
    }

    pub fn fill_from_rates(&mut self, rates: &[f64]) {
        let n = self.n;
        self.fill_with(|m, s| rates[m * n + s]);
    }

    fn fill_with(&mut self, rate: impl Fn(usize, usize) -> f64) {
        let n = self.n;
        let horizon = self.horizon();
        self.floored = 0;
        let mut running = vec![1.0; n];
        for m in 0..horizon {
            for (s, r) in running.iter_mut().enumerate() {
                if m > 0 {
                    *r *= 1.0 + rate(m - 1, s);
                }
                let v = if *r < 0.0 {
                    self.floored += 1;
                    0.0
                } else {
                    *r
                };
                self.values[m * n + s] = v;
            }
        }
    }

    pub fn horizon(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.values.len() / self.n
        }
    }

    pub fn get(&self, month: u32, series: usize) -> f64 {
        self.values[month as usize * self.n + series]
    }
}

/// Prices applied when evaluating a program.
#[derive(Debug, Clone, Copy)]
pub struct Prices<'a> {
    pub factors: &'a EscalationFactors,
    /// Unit price of solid-state lidar replacements.
    pub ssl_price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basis {
    Fixed,
    Series(usize),
    Ssl,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    month: u32,
    domain: Domain,
    category: LedgerCategory,
    item: usize,
    basis: Basis,
    base: f64,
}

impl Term {
    #[inline]
    fn nominal(&self, prices: &Prices<'_>) -> f64 {
        match self.basis {
            Basis::Fixed => self.base,
            Basis::Series(s) => self.base * prices.factors.get(self.month, s),
            Basis::Ssl => self.base * prices.ssl_price,
        }
    }
}

/// A compiled scenario, ready to be priced.
#[derive(Debug, Clone)]
pub struct CostProgram {
    terms: Vec<Term>,
    /// Remaining-life value of components alive at the horizon; `month` holds
    /// the purchase month.
    residuals: Vec<Term>,
    discount: Vec<f64>,
    horizon: u32,
    item_ids: Vec<String>,
    mu: Vec<f64>,
    ssl_default: f64,
    warnings: Vec<String>,
}

struct Compiler<'a> {
    scenario: &'a CityScenario,
    plan: &'a DeploymentPlan,
    catalog: &'a CostCatalog,
    setup: &'a SensorSetup,
    series: Vec<Option<usize>>,
    ssl: Option<(usize, u32)>,
}

impl<'a> Compiler<'a> {
    fn new(
        scenario: &'a CityScenario,
        plan: &'a DeploymentPlan,
        catalog: &'a CostCatalog,
        setup: &'a SensorSetup,
        model: &EscalationModel,
    ) -> Result<Self> {
        scenario.validate()?;
        catalog.validate()?;
        catalog.check_series(&model.series_ids)?;
        if plan.horizon() != scenario.horizon_months as usize || plan.cumulative.len() != plan.horizon() {
            return Err(Error::validation(
                "plan",
                format!("plan covers {} months, scenario horizon is {}", plan.horizon(), scenario.horizon_months),
            ));
        }
        let series = catalog
            .items
            .iter()
            .map(|i| if i.escalates() { model.index_of(&i.escalation_series) } else { None })
            .collect();
        let ssl = catalog.ssl_substitution.as_ref().map(|s| {
            let idx = catalog.items.iter().position(|i| i.id == s.item_id).expect("validated");
            (idx, s.month_for(scenario.horizon_months))
        });
        Ok(Compiler {
            scenario,
            plan,
            catalog,
            setup,
            series,
            ssl,
        })
    }

    fn horizon(&self) -> u32 {
        self.scenario.horizon_months
    }

    fn index(&self, item: &CostItem) -> usize {
        self.catalog.items.iter().position(|i| std::ptr::eq(i, item)).expect("item from catalog")
    }

    fn basis(&self, item: usize) -> Basis {
        self.series[item].map_or(Basis::Fixed, Basis::Series)
    }

    fn bom(&self, domain: Domain) -> Vec<(usize, &'a CostItem, f64)> {
        bill_of_materials(self.catalog, self.setup, domain)
            .into_iter()
            .map(|(item, qty)| (self.index(item), item, qty))
            .collect()
    }

    fn priced(&self, item: usize, base_qty: f64, ssl: bool) -> (Basis, f64) {
        if ssl {
            (Basis::Ssl, base_qty)
        } else {
            (self.basis(item), base_qty * self.catalog.items[item].unit_price_eur)
        }
    }

    fn capex(&self) -> Vec<Term> {
        let mut terms = Vec::new();
        for (m, new) in self.plan.per_month.iter().enumerate() {
            for domain in Domain::ALL {
                let count = new.get(domain);
                if count == 0 {
                    continue;
                }
                for (idx, item, qty) in self.bom(domain) {
                    if !item.category.is_capex() {
                        continue;
                    }
                    let (basis, base) = self.priced(idx, count as f64 * qty, false);
                    terms.push(Term {
                        month: m as u32,
                        domain,
                        category: item.category.into(),
                        item: idx,
                        basis,
                        base,
                    });
                }
            }
        }
        terms
    }

    fn running(&self) -> Result<Vec<Term>> {
        for (category, name) in [
            (Category::OpexEnergy, "opex_energy"),
            (Category::OpexPersonnel, "opex_personnel"),
            (Category::OpexBackend, "opex_backend"),
            (Category::OpexMaintenance, "opex_maintenance"),
        ] {
            if !self.catalog.items.iter().any(|i| i.category == category) {
                return Err(Error::MissingCategory(name));
            }
        }
        let boms: Vec<_> = Domain::ALL.iter().map(|d| self.bom(*d)).collect();
        let power_kw = self.setup.power_draw_w / 1000.0;
        let mut terms = Vec::new();
        for (m, cum) in self.plan.cumulative.iter().enumerate() {
            let total = cum.total();
            if total == 0 {
                continue;
            }
            let staff = personnel_count(total, self.scenario) as f64;
            for domain in Domain::ALL {
                let nodes = cum.get(domain);
                if nodes == 0 {
                    continue;
                }
                let share = nodes as f64 / total as f64;
                for &(idx, item, qty) in &boms[domain.index()] {
                    let units = match item.category {
                        Category::OpexEnergy => nodes as f64 * qty * power_kw * HOURS_PER_MONTH,
                        Category::OpexPersonnel => staff * qty * share,
                        Category::OpexBackend | Category::OpexMaintenance => nodes as f64 * qty,
                        Category::CapexHardware | Category::CapexInstall => continue,
                    };
                    if units == 0.0 {
                        continue;
                    }
                    let (basis, base) = self.priced(idx, units, false);
                    terms.push(Term {
                        month: m as u32,
                        domain,
                        category: item.category.into(),
                        item: idx,
                        basis,
                        base,
                    });
                }
            }
        }
        Ok(terms)
    }

    fn uses_ssl(&self, item: usize, month: u32) -> bool {
        matches!(self.ssl, Some((i, from)) if i == item && month >= from)
    }

    /// Renewal terms and residual-value terms from the component cohorts.
    fn lifecycle(&self) -> (Vec<Term>, Vec<Term>) {
        let horizon = self.horizon();
        // keyed by (purchase month, domain, item, bought as a replacement)
        let mut renewals: BTreeMap<(u32, Domain, usize, bool), f64> = BTreeMap::new();
        let mut residuals: BTreeMap<(u32, Domain, usize, bool), f64> = BTreeMap::new();
        for domain in Domain::ALL {
            for (idx, item, qty) in self.bom(domain) {
                let Some(life) = item.service_life_months.months().filter(|_| item.category.is_capex()) else {
                    continue;
                };
                for (m, new) in self.plan.per_month.iter().enumerate() {
                    let count = new.get(domain);
                    if count == 0 {
                        continue;
                    }
                    let units = count as f64 * qty;
                    let mut purchase = m as u32;
                    while purchase + life < horizon {
                        purchase += life;
                        *renewals.entry((purchase, domain, idx, true)).or_default() += units;
                    }
                    let remaining = (purchase + life) - horizon;
                    if remaining > 0 {
                        let replaced = purchase != m as u32;
                        *residuals.entry((purchase, domain, idx, replaced)).or_default() +=
                            units * remaining as f64 / life as f64;
                    }
                }
            }
        }
        let to_terms = |map: BTreeMap<(u32, Domain, usize, bool), f64>| {
            map.into_iter()
                .map(|((month, domain, idx, replaced), units)| {
                    let ssl = replaced && self.uses_ssl(idx, month);
                    let (basis, base) = self.priced(idx, units, ssl);
                    Term {
                        month,
                        domain,
                        category: LedgerCategory::OpexRenewal,
                        item: idx,
                        basis,
                        base,
                    }
                })
                .collect::<Vec<_>>()
        };
        (to_terms(renewals), to_terms(residuals))
    }
}

impl CostProgram {
    pub fn compile(
        scenario: &CityScenario,
        plan: &DeploymentPlan,
        catalog: &CostCatalog,
        setup: &SensorSetup,
        model: &EscalationModel,
    ) -> Result<Self> {
        let c = Compiler::new(scenario, plan, catalog, setup, model)?;
        let mut terms = c.capex();
        terms.extend(c.running()?);
        let (renewals, residuals) = c.lifecycle();
        terms.extend(renewals);

        let rate = scenario.real_discount_rate_annual;
        let discount = (0..=scenario.horizon_months).map(|m| discount_factor(m, rate)).collect();
        let mut warnings: Vec<String> = setup.warning.iter().cloned().collect();
        warnings.extend(model.warnings.iter().cloned());
        Ok(CostProgram {
            terms,
            residuals,
            discount,
            horizon: scenario.horizon_months,
            item_ids: catalog.items.iter().map(|i| i.id.clone()).collect(),
            mu: model.mu.clone(),
            ssl_default: catalog.ssl_substitution.as_ref().map_or(0.0, |s| s.triangular.mode),
            warnings,
        })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn series_count(&self) -> usize {
        self.mu.len()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len() + self.residuals.len()
    }

    /// Mean-rate escalation factors for this program.
    pub fn static_factors(&self) -> EscalationFactors {
        EscalationFactors::constant(&self.mu, self.horizon as usize)
    }

    /// Static SSL price (triangular mode), 0 when the catalog has no substitution.
    pub fn static_ssl_price(&self) -> f64 {
        self.ssl_default
    }

    /// Discounted NPV net of discounted residual value.
    pub fn evaluate(&self, prices: &Prices<'_>) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let nominal = t.nominal(prices);
            total += nominal * self.discount[t.month as usize];
        }
        let mut residual = 0.0;
        for r in &self.residuals {
            residual += r.nominal(prices);
        }
        total - residual * self.discount[self.horizon as usize]
    }

    pub fn ledger(&self, prices: &Prices<'_>) -> CashFlowLedger {
        let mut entries = Vec::with_capacity(self.terms.len());
        let mut total = 0.0;
        let mut nominal_total = 0.0;
        let mut by_domain: BTreeMap<Domain, f64> = BTreeMap::new();
        let mut by_category: BTreeMap<LedgerCategory, f64> = BTreeMap::new();
        for t in &self.terms {
            let nominal = t.nominal(prices);
            let discounted = nominal * self.discount[t.month as usize];
            total += discounted;
            nominal_total += nominal;
            *by_domain.entry(t.domain).or_default() += discounted;
            *by_category.entry(t.category).or_default() += discounted;
            entries.push(LedgerEntry {
                month: t.month,
                domain: t.domain,
                category: t.category,
                item_id: self.item_ids[t.item].clone(),
                nominal_eur: nominal,
                discounted_eur: discounted,
            });
        }
        let df_end = self.discount[self.horizon as usize];
        let mut residual = 0.0;
        let mut residual_by_domain: BTreeMap<Domain, f64> = BTreeMap::new();
        for r in &self.residuals {
            let nominal = r.nominal(prices);
            residual += nominal;
            *residual_by_domain.entry(r.domain).or_default() += nominal * df_end;
        }
        let residual_value = residual * df_end;
        let capex: f64 = by_category.iter().filter(|(c, _)| c.is_capex()).map(|(_, v)| v).sum();
        CashFlowLedger {
            entries,
            npv_total: total - residual * df_end,
            npv_before_residual: total,
            residual_value_eur: residual_value,
            residual_nominal_eur: residual,
            nominal_total_eur: nominal_total,
            capex_eur: capex,
            opex_eur: total - capex,
            npv_by_domain: by_domain,
            residual_by_domain,
            npv_by_category: by_category,
            warnings: self.warnings.clone(),
        }
    }

    fn entries_where(&self, prices: &Prices<'_>, keep: impl Fn(LedgerCategory) -> bool) -> Vec<LedgerEntry> {
        self.ledger(prices).entries.into_iter().filter(|e| keep(e.category)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub month: u32,
    pub domain: Domain,
    pub category: LedgerCategory,
    pub item_id: String,
    pub nominal_eur: f64,
    pub discounted_eur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CashFlowLedger {
    #[serde(skip)]
    pub entries: Vec<LedgerEntry>,
    /// Discounted flows minus discounted residual value.
    pub npv_total: f64,
    pub npv_before_residual: f64,
    /// Discounted at the horizon month.
    pub residual_value_eur: f64,
    pub residual_nominal_eur: f64,
    pub nominal_total_eur: f64,
    pub capex_eur: f64,
    pub opex_eur: f64,
    /// Pre-residual discounted totals.
    pub npv_by_domain: BTreeMap<Domain, f64>,
    pub residual_by_domain: BTreeMap<Domain, f64>,
    pub npv_by_category: BTreeMap<LedgerCategory, f64>,
    pub warnings: Vec<String>,
}

impl CashFlowLedger {
    pub fn capex_share(&self) -> f64 {
        self.capex_eur / self.npv_before_residual
    }

    pub fn opex_share(&self) -> f64 {
        self.opex_eur / self.npv_before_residual
    }

    pub fn category_shares(&self) -> BTreeMap<LedgerCategory, f64> {
        self.npv_by_category
            .iter()
            .map(|(c, v)| (*c, v / self.npv_before_residual))
            .collect()
    }

    /// `month,domain,category,item_id,nominal_eur,discounted_eur` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,domain,category,item_id,nominal_eur,discounted_eur\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.month, e.domain, e.category, e.item_id, e.nominal_eur, e.discounted_eur
            ));
        }
        out
    }
}

fn static_prices<R>(program: &CostProgram, f: impl FnOnce(&Prices<'_>) -> R) -> R {
    let factors = program.static_factors();
    f(&Prices {
        factors: &factors,
        ssl_price: program.static_ssl_price(),
    })
}

/// CapEx entries for the nodes deployed each month, at static prices.
pub fn capex_stream(
    scenario: &CityScenario,
    plan: &DeploymentPlan,
    catalog: &CostCatalog,
    setup: &SensorSetup,
    model: &EscalationModel,
) -> Result<Vec<LedgerEntry>> {
    let program = CostProgram::compile(scenario, plan, catalog, setup, model)?;
    Ok(static_prices(&program, |p| program.entries_where(p, LedgerCategory::is_capex)))
}

/// Energy, personnel, back-end, maintenance and renewal entries at static prices.
pub fn opex_stream(
    scenario: &CityScenario,
    plan: &DeploymentPlan,
    catalog: &CostCatalog,
    setup: &SensorSetup,
    model: &EscalationModel,
) -> Result<Vec<LedgerEntry>> {
    let program = CostProgram::compile(scenario, plan, catalog, setup, model)?;
    Ok(static_prices(&program, |p| program.entries_where(p, |c| !c.is_capex())))
}

/// Replacement purchases of components reaching the end of their service life.
pub fn renewal_stream(
    scenario: &CityScenario,
    plan: &DeploymentPlan,
    catalog: &CostCatalog,
    setup: &SensorSetup,
    model: &EscalationModel,
) -> Result<Vec<LedgerEntry>> {
    let program = CostProgram::compile(scenario, plan, catalog, setup, model)?;
    Ok(static_prices(&program, |p| {
        program.entries_where(p, |c| c == LedgerCategory::OpexRenewal)
    }))
}

/// Discounted residual value of components still in service at the horizon.
pub fn residual_value(
    scenario: &CityScenario,
    plan: &DeploymentPlan,
    catalog: &CostCatalog,
    setup: &SensorSetup,
    model: &EscalationModel,
) -> Result<f64> {
    let program = CostProgram::compile(scenario, plan, catalog, setup, model)?;
    Ok(static_prices(&program, |p| program.ledger(p).residual_value_eur))
}

/// Full static ledger: sigmoid deployment, mean escalation, SSL at the triangular mode.
pub fn run_static_lcc(
    scenario: &CityScenario,
    setup: &SensorSetup,
    catalog: &CostCatalog,
    model: &EscalationModel,
) -> Result<CashFlowLedger> {
    let plan = deployment_schedule(scenario)?;
    let program = CostProgram::compile(scenario, &plan, catalog, setup, model)?;
    Ok(static_prices(&program, |p| program.ledger(p)))
}
