use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use itslcc::ahp::{AhpResult, Hierarchy};
use itslcc::effectiveness::{
    evaluate_setups, quality_from_scores, rain_exceedance, reference_table, sample_rainfall, scaled_reach,
    setup_availability, AvailabilityConfig, AvailabilityMode, EffectivenessRow, RainfallSeries, ReferenceTable,
    SetupInput,
};
use itslcc::lcc::{run_static_lcc, CashFlowLedger};
use itslcc::market::{build_escalation_model, parse_price_indices, sample_price_indices, EscalationModel, DEFAULT_EPS};
use itslcc::montecarlo::{run_simulation, McSummary, SimulationConfig};
use itslcc::scenario::{builtin_cities, builtin_city, CityScenario, CostCatalog, SensorSetup, SetupCode};
use itslcc::schedule::{deployment_schedule, DeploymentPlan};

use crate::args::{AhpArgs, AvailabilityArg, CostArgs, EffectArgs, LccArgs, ScenarioArgs, ScheduleArgs, SimulateArgs, BUILTIN};
use crate::error::CliError;
use crate::manifest::{ManifestBuilder, RunManifest};
use crate::output::{key_value_csv, Output};

type Result<T> = std::result::Result<T, CliError>;

fn read_input(mb: &mut ManifestBuilder, name: &str, path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    mb.input(name, &path.display().to_string(), &bytes);
    String::from_utf8(bytes).map_err(|_| itslcc::Error::Parse(format!("{} is not UTF-8", path.display())).into())
}

fn load_scenario(mb: &mut ManifestBuilder, args: &ScenarioArgs, default_city: Option<&str>) -> Result<CityScenario> {
    let mut scenario = match (&args.city, &args.scenario) {
        (Some(city), _) => {
            mb.param("city", city);
            builtin_city(city)?
        }
        (None, Some(path)) => CityScenario::from_json(&read_input(mb, "scenario", path)?)?,
        (None, None) => match default_city {
            Some(city) => {
                mb.param("city", city);
                builtin_city(city)?
            }
            None => return Err(CliError::Usage("one of --city or --scenario is required".into())),
        },
    };
    if let Some(rate) = args.rate {
        mb.param("rate", rate);
        scenario = scenario.with_rate(rate);
        scenario.validate()?;
    }
    Ok(scenario)
}

fn load_costs(mb: &mut ManifestBuilder, args: &CostArgs) -> Result<(CostCatalog, EscalationModel)> {
    let catalog = match &args.catalog {
        Some(path) => CostCatalog::from_json(&read_input(mb, "catalog", path)?)?,
        None => {
            mb.builtin("catalog");
            CostCatalog::sample()
        }
    };
    let series = match &args.indices {
        Some(path) => parse_price_indices(&read_input(mb, "indices", path)?)?,
        None => {
            mb.builtin("indices");
            sample_price_indices()
        }
    };
    let mut model = build_escalation_model(&series, DEFAULT_EPS)?;
    if let Some(path) = &args.long_run_indices {
        model = model.with_long_run_rates(&parse_price_indices(&read_input(mb, "long_run_indices", path)?)?)?;
    }
    catalog.check_series(&model.series_ids)?;
    Ok((catalog, model))
}

fn parse_setup(code: &str) -> Result<SetupCode> {
    Ok(code.parse()?)
}

fn file_stem(parts: &[&str]) -> String {
    parts.iter().map(|p| p.to_lowercase().replace(|c: char| !c.is_ascii_alphanumeric(), "-")).collect::<Vec<_>>().join("_")
}

struct Costed {
    scenario: CityScenario,
    catalog: CostCatalog,
    model: EscalationModel,
    setup: SensorSetup,
}

fn load_costed(mb: &mut ManifestBuilder, args: &LccArgs) -> Result<Costed> {
    let scenario = load_scenario(mb, &args.scenario, None)?;
    let (catalog, model) = load_costs(mb, &args.cost)?;
    let code = parse_setup(&args.setup)?;
    mb.param("setup", code);
    let setup = catalog.setup(code)?;
    Ok(Costed {
        scenario,
        catalog,
        model,
        setup,
    })
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

#[derive(Serialize)]
struct LccReport<'a> {
    manifest: RunManifest,
    city: &'a str,
    setup: SetupCode,
    total_nodes: u64,
    horizon_months: u32,
    build_months: u32,
    real_discount_rate_annual: f64,
    capex_share: f64,
    opex_share: f64,
    #[serde(flatten)]
    ledger: &'a CashFlowLedger,
}

pub fn lcc(args: &LccArgs, out: &Output) -> Result<()> {
    let mut mb = ManifestBuilder::new("lcc");
    let c = load_costed(&mut mb, args)?;
    mb.param("format", out.format.extension());
    let ledger = run_static_lcc(&c.scenario, &c.setup, &c.catalog, &c.model)?;
    warn(&ledger.warnings);
    let report = LccReport {
        manifest: mb.finish(),
        city: &c.scenario.name,
        setup: c.setup.code,
        total_nodes: c.scenario.total_nodes(),
        horizon_months: c.scenario.horizon_months,
        build_months: c.scenario.build_months,
        real_discount_rate_annual: c.scenario.real_discount_rate_annual,
        capex_share: ledger.capex_share(),
        opex_share: ledger.opex_share(),
        ledger: &ledger,
    };
    let stem = file_stem(&["lcc", &c.scenario.name, &c.setup.code.to_string()]);
    out.write_file(&format!("{stem}_ledger.csv"), &ledger.to_csv())?;
    out.emit(&stem, &report.manifest, &report, || key_value_csv(&report))
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    manifest: RunManifest,
    city: &'a str,
    setup: SetupCode,
    iterations: usize,
    seed: u64,
    histogram_bins: usize,
    #[serde(flatten)]
    summary: &'a McSummary,
}

pub fn simulate(args: &SimulateArgs, out: &Output) -> Result<()> {
    let mut mb = ManifestBuilder::new("simulate");
    let c = load_costed(&mut mb, &args.lcc)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config = SimulationConfig {
        iterations: args.iterations,
        seed: args.seed,
        workers,
        histogram_bins: args.histogram_bins,
    };
    config.validate()?;
    mb.seed(args.seed);
    mb.param("iterations", args.iterations);
    mb.param("histogram_bins", args.histogram_bins);
    mb.param("format", out.format.extension());
    warn(&c.setup.warning.iter().cloned().collect::<Vec<_>>());
    warn(&c.model.warnings);
    let summary = run_simulation(&c.scenario, &c.setup, &c.catalog, &c.model, &config)?;
    if summary.floored_prices > 0 {
        eprintln!("warning: {} escalation factors floored at zero", summary.floored_prices);
    }
    let report = SimulateReport {
        manifest: mb.finish(),
        city: &c.scenario.name,
        setup: c.setup.code,
        iterations: config.iterations,
        seed: config.seed,
        histogram_bins: config.histogram_bins,
        summary: &summary,
    };
    let stem = file_stem(&["simulate", &c.scenario.name, &c.setup.code.to_string()]);
    out.write_file(&format!("{stem}_histogram.csv"), &summary.histogram.to_csv())?;
    out.emit(&stem, &report.manifest, &report, || key_value_csv(&report))
}

fn load_table(mb: &mut ManifestBuilder, name: &str, source: &str) -> Result<ReferenceTable> {
    if source == BUILTIN {
        mb.builtin(name);
        Ok(reference_table())
    } else {
        Ok(ReferenceTable::from_json(&read_input(mb, name, Path::new(source))?)?)
    }
}

#[derive(Serialize)]
struct EffectReport<'a> {
    manifest: RunManifest,
    city: &'a str,
    nodes: u64,
    rain_threshold_mm_per_h: f64,
    rain_exceedance: f64,
    quality_source: &'static str,
    availability_mode: &'static str,
    lcc_source: &'static str,
    rows: &'a [EffectivenessRow],
    warnings: Vec<String>,
}

pub fn effect(args: &EffectArgs, out: &Output) -> Result<()> {
    let mut mb = ManifestBuilder::new("effect");
    let scenario = load_scenario(&mut mb, &args.scenario, Some("Cologne"))?;
    let mut warnings = Vec::new();

    let (quality, quality_source, table): (BTreeMap<SetupCode, f64>, _, Option<ReferenceTable>) = match &args.ahp_dir {
        Some(dir) => {
            let hierarchy = load_hierarchy(&mut mb, dir)?;
            mb.param("allow_inconsistent", args.allow_inconsistent);
            let scores = hierarchy.synthesize(args.allow_inconsistent)?;
            warnings.extend(scores.warnings.iter().cloned());
            (quality_from_scores(&scores)?, "ahp", None)
        }
        None => {
            let t = load_table(&mut mb, "quality_table", args.quality_table.as_deref().unwrap_or(BUILTIN))?;
            (t.quality(), "table", Some(t))
        }
    };

    let rain = match &args.rainfall {
        Some(path) => RainfallSeries::from_csv(&read_input(&mut mb, "rainfall", path)?)?,
        None => {
            mb.builtin("rainfall");
            sample_rainfall()
        }
    };
    mb.param("rain_threshold", args.rain_threshold);
    let exceedance = rain_exceedance(&rain, args.rain_threshold)?;
    let availability = AvailabilityConfig {
        rain_threshold_mm_per_h: args.rain_threshold,
        mode: match args.availability {
            AvailabilityArg::Table => {
                AvailabilityMode::Table(table.unwrap_or_else(reference_table).availability())
            }
            AvailabilityArg::Rule => AvailabilityMode::Rule,
        },
    };
    mb.param("availability", availability_label(args.availability));

    let setups: Vec<SetupCode> = if args.setups.is_empty() {
        SetupCode::all().into_iter().filter(|s| quality.contains_key(s)).collect()
    } else {
        args.setups.iter().map(|s| parse_setup(s)).collect::<Result<_>>()?
    };
    mb.param("setups", &setups);
    for s in &setups {
        if !quality.contains_key(s) {
            return Err(CliError::Usage(format!(
                "no quality value for setup {s}; supply one with --quality-table or --ahp-dir"
            )));
        }
    }

    let lcc_table = match &args.lcc_table {
        Some(source) => Some(load_table(&mut mb, "lcc_table", source)?.lcc()),
        None => None,
    };
    let costs = match lcc_table {
        None => Some(load_costs(&mut mb, &args.cost)?),
        Some(_) => None,
    };
    if let Some(b) = args.budget {
        mb.param("budget", b);
    }
    mb.param("format", out.format.extension());

    let mut inputs = Vec::with_capacity(setups.len());
    for &s in &setups {
        let lcc = match (&lcc_table, &costs) {
            (Some(t), _) => match t.get(&s) {
                Some(v) if *v > 0.0 => *v,
                _ => return Err(CliError::Usage(format!("LCC table has no positive lcc_eur for setup {s}"))),
            },
            (None, Some((catalog, model))) => run_static_lcc(&scenario, &catalog.setup(s)?, catalog, model)?.npv_total,
            (None, None) => unreachable!("costs are loaded when no LCC table is given"),
        };
        inputs.push(SetupInput {
            setup: s,
            quality: quality[&s],
            availability: setup_availability(s, &availability, exceedance)?,
            reach: scaled_reach(scenario.total_nodes(), args.budget, lcc),
            lcc_eur: lcc,
        });
    }
    let result = evaluate_setups(&inputs)?;
    warn(&warnings);

    let report = EffectReport {
        manifest: mb.finish(),
        city: &scenario.name,
        nodes: scenario.total_nodes(),
        rain_threshold_mm_per_h: args.rain_threshold,
        rain_exceedance: exceedance,
        quality_source,
        availability_mode: availability_label(args.availability),
        lcc_source: if args.lcc_table.is_some() { "table" } else { "catalog" },
        rows: &result.rows,
        warnings,
    };
    let stem = file_stem(&["effect", &scenario.name]);
    out.emit(&stem, &report.manifest, &report, || result.to_csv())
}

fn availability_label(a: AvailabilityArg) -> &'static str {
    match a {
        AvailabilityArg::Table => "table",
        AvailabilityArg::Rule => "rule",
    }
}

fn load_hierarchy(mb: &mut ManifestBuilder, source: &str) -> Result<Hierarchy> {
    if source == BUILTIN {
        mb.builtin("ahp_dir");
        return Ok(Hierarchy::builtin());
    }
    let dir = Path::new(source);
    if !dir.is_dir() {
        return Err(CliError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let h = Hierarchy::load_dir(dir)?;
    // hash the files actually read
    read_input(mb, "ahp_dir/criteria", &dir.join("criteria.json"))?;
    for c in h.alternatives.keys() {
        read_input(mb, &format!("ahp_dir/{c}"), &dir.join(format!("{c}.json")))?;
    }
    Ok(h)
}

#[derive(Serialize)]
struct AhpReport<'a> {
    manifest: RunManifest,
    criteria: &'a AhpResult,
    alternatives: &'a BTreeMap<String, AhpResult>,
    quality: &'a [(String, f64)],
    warnings: &'a [String],
}

pub fn ahp(args: &AhpArgs, out: &Output) -> Result<()> {
    let mut mb = ManifestBuilder::new("ahp");
    let hierarchy = load_hierarchy(&mut mb, &args.ahp_dir)?;
    mb.param("allow_inconsistent", args.allow_inconsistent);
    mb.param("format", out.format.extension());
    let scores = hierarchy.synthesize(args.allow_inconsistent)?;
    warn(&scores.warnings);
    let report = AhpReport {
        manifest: mb.finish(),
        criteria: &scores.criteria,
        alternatives: &scores.alternatives,
        quality: &scores.quality,
        warnings: &scores.warnings,
    };
    out.emit("ahp", &report.manifest, &report, || {
        let mut csv = String::from("matrix,label,weight,lambda_max,ci,cr\n");
        let matrices = std::iter::once(("criteria", &scores.criteria))
            .chain(scores.alternatives.iter().map(|(k, v)| (k.as_str(), v)));
        for (name, r) in matrices {
            for (l, w) in r.labels.iter().zip(&r.weights) {
                csv.push_str(&format!("{name},{l},{w},{},{},{}\n", r.lambda_max, r.ci, r.cr));
            }
        }
        for (l, q) in &scores.quality {
            csv.push_str(&format!("quality,{l},{q},,,\n"));
        }
        csv
    })
}

#[derive(Serialize)]
struct CityRow {
    name: String,
    urban: u64,
    rural: u64,
    highway: u64,
    total: u64,
}

#[derive(Serialize)]
struct CitiesReport {
    manifest: RunManifest,
    cities: Vec<CityRow>,
}

pub fn cities(out: &Output) -> Result<()> {
    let mut mb = ManifestBuilder::new("cities");
    mb.builtin("cities");
    let rows: Vec<CityRow> = builtin_cities()
        .into_iter()
        .map(|c| CityRow {
            total: c.total_nodes(),
            name: c.name,
            urban: c.nodes_urban,
            rural: c.nodes_rural,
            highway: c.nodes_highway,
        })
        .collect();
    let report = CitiesReport {
        manifest: mb.finish(),
        cities: rows,
    };
    out.emit("cities", &report.manifest, &report, || {
        let mut csv = String::from("name,urban,rural,highway,total\n");
        for c in &report.cities {
            csv.push_str(&format!("{},{},{},{},{}\n", c.name, c.urban, c.rural, c.highway, c.total));
        }
        csv
    })
}

#[derive(Serialize)]
struct ScheduleReport<'a> {
    manifest: RunManifest,
    city: &'a str,
    plan: &'a DeploymentPlan,
}

pub fn schedule(args: &ScheduleArgs, out: &Output) -> Result<()> {
    let mut mb = ManifestBuilder::new("schedule");
    let scenario = load_scenario(&mut mb, &args.scenario, None)?;
    let plan = deployment_schedule(&scenario)?;
    mb.param("format", out.format.extension());
    let report = ScheduleReport {
        manifest: mb.finish(),
        city: &scenario.name,
        plan: &plan,
    };
    out.emit(&file_stem(&["schedule", &scenario.name]), &report.manifest, &report, || plan.to_csv())
}
