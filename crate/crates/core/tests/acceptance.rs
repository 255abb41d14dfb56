//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use itslcc::ahp::{ahp_weights, Hierarchy, PairwiseMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use itslcc::effectiveness::{
    evaluate_setups, quality_from_scores, rain_exceedance, reference_table, sample_rainfall, sensor_availability,
    setup_availability, AvailabilityConfig, SetupInput,
};
use itslcc::lcc::{personnel_count, renewal_stream, run_static_lcc, CostProgram};
use itslcc::market::{build_escalation_model, sample_price_indices, EscalationModel};
use itslcc::montecarlo::{correlate_into, sample_escalation_paths, iteration_rng, simulate_samples, summarize, SimulationConfig};
use itslcc::scenario::{builtin_cities, builtin_city, CityScenario, CostCatalog, Sensor, SetupCode, Triangular};
use itslcc::schedule::{deployment_schedule, DeploymentPlan, DomainCounts};

/// Collects failed expectations for one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
}

impl Check {
    fn that(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn close(&mut self, got: f64, want: f64, tol: f64, what: &str) {
        self.that((got - want).abs() <= tol, || format!("{what}: got {got}, want {want} +- {tol}"));
    }
}

fn code(s: &str) -> SetupCode {
    s.parse().unwrap()
}

fn sample_model() -> EscalationModel {
    build_escalation_model(&sample_price_indices(), 1e-10).unwrap()
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).max(2)
}

fn effectiveness_reproduction(c: &mut Check) {
    let reference = reference_table();
    c.that(reference.reach == 8610.0, || format!("reach {}", reference.reach));
    let result = evaluate_setups(&reference.inputs()).unwrap();
    for (row, want) in result.rows.iter().zip(&reference.rows) {
        let rel = row.effectiveness / want.effectiveness - 1.0;
        c.that(rel.abs() <= 0.01, || {
            format!("{}: E {} vs {} ({:+.2}%)", row.setup, row.effectiveness, want.effectiveness, rel * 100.0)
        });
        c.close(row.se, want.se, 0.01, &format!("{} SE", row.setup));
    }
    let se = |s: &str| result.get(code(s)).unwrap().se;
    c.that(se("CR") == 1.0, || format!("CR SE {}", se("CR")));
    c.close(se("CL"), 0.99, 0.01, "CL SE");
    c.close(se("CRL"), 0.96, 0.01, "CRL SE");
    let ones = result.rows.iter().filter(|r| r.se == 1.0).count();
    c.that(ones == 1, || format!("{ones} setups with SE 1"));
}

fn availability_chain(c: &mut Check) {
    let exceedance = rain_exceedance(&sample_rainfall(), 0.1).unwrap();
    c.close(exceedance, 0.0688, 1e-15, "exceedance");
    c.close(sensor_availability(Sensor::Lidar, exceedance), 0.9312, 1e-12, "lidar");
    c.close(sensor_availability(Sensor::Thermal, exceedance), 0.9312, 1e-12, "thermal");
    let camera = sensor_availability(Sensor::Camera, exceedance);
    c.close(camera, 0.4656, 1e-12, "camera");
    c.close((camera * 1000.0).round() / 1000.0, 0.466, 1e-12, "camera rounded");
    c.close(sensor_availability(Sensor::Radar, exceedance), 1.0, 0.0, "radar");
    let table = AvailabilityConfig::default();
    c.close(setup_availability(code("C"), &table, exceedance).unwrap(), 0.466, 0.0, "C from table");
    c.close(setup_availability(code("L"), &table, exceedance).unwrap(), 0.931, 0.0, "L from table");
}

fn sampler_fidelity(c: &mut Check) {
    let sigma = vec![
        vec![4.0e-4, 3.0e-4, 2.0e-4],
        vec![3.0e-4, 4.0e-4, 2.5e-4],
        vec![2.0e-4, 2.5e-4, 3.0e-4],
    ];
    let mu = vec![0.002, -0.001, 0.0005];
    let ids = vec!["a".to_string(), "b".into(), "c".into()];
    let model = EscalationModel::from_moments(ids, mu.clone(), sigma.clone(), 1e-10).unwrap();

    let rows = 100_000;
    let draws = sample_escalation_paths(&model, rows, &mut iteration_rng(20_240_601, 0));
    let mean: Vec<f64> = (0..3).map(|k| draws.iter().skip(k).step_by(3).sum::<f64>() / rows as f64).collect();
    for i in 0..3 {
        for j in 0..3 {
            let cov = draws
                .chunks_exact(3)
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .sum::<f64>()
                / (rows - 1) as f64;
            let rel = cov / sigma[i][j] - 1.0;
            c.that(rel.abs() <= 0.02, || format!("cov[{i}][{j}] = {cov:e}, off by {:+.2}%", rel * 100.0));
        }
    }

    let zero = [0.0; 3];
    let mut row = [0.0; 3];
    for _ in 0..180 {
        correlate_into(&model, &zero, &mut row);
        c.that(row.to_vec() == mu, || format!("Z = 0 gave {row:?}"));
    }
}

/// Sample catalog with the lidar price risk collapsed onto its mode.
fn degenerate_catalog() -> CostCatalog {
    let mut catalog = CostCatalog::sample();
    let ssl = catalog.ssl_substitution.as_mut().unwrap();
    let mode = ssl.triangular.mode;
    ssl.triangular = Triangular::new(mode, mode, mode).unwrap();
    catalog
}

fn degenerate_identity(c: &mut Check) {
    let sample = sample_model();
    let model = EscalationModel::deterministic(sample.series_ids.clone(), sample.mu.clone());
    let catalog = degenerate_catalog();
    for city in ["Cologne", "Hildesheim"] {
        let scenario = builtin_city(city).unwrap();
        for setup in ["CL", "TRL", "R"] {
            let setup = catalog.setup(code(setup)).unwrap();
            let expected = run_static_lcc(&scenario, &setup, &catalog, &model).unwrap().npv_total;
            let plan = deployment_schedule(&scenario).unwrap();
            let program = CostProgram::compile(&scenario, &plan, &catalog, &setup, &model).unwrap();
            let config = SimulationConfig {
                iterations: 1_000,
                seed: 7,
                workers: workers(),
                histogram_bins: 100,
            };
            let ssl = catalog.ssl_substitution.as_ref().map(|s| &s.triangular);
            let samples = simulate_samples(&program, &model, ssl, &config).unwrap();
            let mismatched = samples.npv.iter().filter(|x| x.to_bits() != expected.to_bits()).count();
            c.that(mismatched == 0, || {
                format!("{city} {}: {mismatched} of 1000 iterations differ from static {expected}", setup.code)
            });
            let summary = summarize(&samples.npv, 100).unwrap();
            c.that(summary.std == 0.0 && summary.range == 0.0, || {
                format!("{city} {}: std {} range {}", setup.code, summary.std, summary.range)
            });
        }
    }
}

fn determinism(c: &mut Check) {
    let model = sample_model();
    let catalog = CostCatalog::sample();
    let scenario = builtin_city("Cologne").unwrap();
    let setup = catalog.setup(code("CL")).unwrap();
    let plan = deployment_schedule(&scenario).unwrap();
    let program = CostProgram::compile(&scenario, &plan, &catalog, &setup, &model).unwrap();
    let ssl = catalog.ssl_substitution.as_ref().map(|s| &s.triangular);
    let run = |workers| {
        let config = SimulationConfig {
            iterations: 10_000,
            seed: 2024,
            workers,
            histogram_bins: 100,
        };
        let s = simulate_samples(&program, &model, ssl, &config).unwrap();
        let mut summary = summarize(&s.npv, config.histogram_bins).unwrap();
        summary.floored_prices = s.floored_prices;
        (s, summary)
    };
    let (one, sum_one) = run(1);
    let (four, sum_four) = run(4);
    let same_bits = one.npv.iter().zip(&four.npv).all(|(a, b)| a.to_bits() == b.to_bits());
    c.that(same_bits, || "per-iteration NPVs differ between 1 and 4 workers".into());
    c.that(sum_one == sum_four, || format!("summaries differ: {sum_one:?} vs {sum_four:?}"));
    c.that(sum_one.std > 0.0, || "stochastic run has zero spread".into());
}

fn static_identities(c: &mut Check) {
    let model = sample_model();
    let catalog = CostCatalog::sample();
    let setup = catalog.setup(code("CL")).unwrap();
    let cologne = builtin_city("Cologne").unwrap();

    let flat = run_static_lcc(&cologne.clone().with_rate(0.0), &setup, &catalog, &model).unwrap();
    let identity = flat.nominal_total_eur - flat.residual_nominal_eur;
    c.that(flat.npv_total == identity, || {
        format!("zero rate: NPV {} vs nominal - residual {}", flat.npv_total, identity)
    });

    let rates = [-0.01, 0.0, 0.005, 0.0175, 0.03, 0.05, 0.1];
    let npvs: Vec<f64> = rates
        .iter()
        .map(|&r| run_static_lcc(&cologne.clone().with_rate(r), &setup, &catalog, &model).unwrap().npv_total)
        .collect();
    c.that(npvs.windows(2).all(|w| w[1] < w[0]), || format!("NPV not decreasing in rate: {npvs:?}"));

    // one node bought at month 0, one component with a 48-month life
    let life48 = CostCatalog::from_json(
        r#"{
          "items": [
            {"id": "box", "label": "", "category": "capex_hardware", "unit_price_eur": 1000,
             "escalation_series": "computers", "service_life_months": 48,
             "domains": ["urban", "rural", "highway"], "applies_to": "all", "quantity_per_node": 1},
            {"id": "energy", "label": "", "category": "opex_energy", "unit_price_eur": 0.3,
             "escalation_series": "none", "service_life_months": "not_renewable",
             "domains": ["urban", "rural", "highway"], "applies_to": "all", "quantity_per_node": 1},
            {"id": "staff", "label": "", "category": "opex_personnel", "unit_price_eur": 5500,
             "escalation_series": "none", "service_life_months": "not_renewable",
             "domains": ["urban", "rural", "highway"], "applies_to": "all", "quantity_per_node": 1},
            {"id": "backend", "label": "", "category": "opex_backend", "unit_price_eur": 25,
             "escalation_series": "none", "service_life_months": "not_renewable",
             "domains": ["urban", "rural", "highway"], "applies_to": "all", "quantity_per_node": 1},
            {"id": "maintenance", "label": "", "category": "opex_maintenance", "unit_price_eur": 60,
             "escalation_series": "none", "service_life_months": "not_renewable",
             "domains": ["urban", "rural", "highway"], "applies_to": "all", "quantity_per_node": 1}
          ]
        }"#,
    )
    .unwrap();
    let one = CityScenario::new("one", 1, 0, 0);
    let mut per_month = vec![DomainCounts::default(); 180];
    per_month[0].urban = 1;
    let plan = DeploymentPlan {
        per_month,
        cumulative: vec![DomainCounts { urban: 1, rural: 0, highway: 0 }; 180],
    };
    let months: Vec<u32> = renewal_stream(&one, &plan, &life48, &catalog.setup(code("C")).unwrap(), &model)
        .unwrap()
        .iter()
        .map(|e| e.month)
        .collect();
    c.that(months == [48, 96, 144], || format!("renewal months {months:?}"));

    let n = personnel_count(8610, &cologne);
    c.that(n == 20, || format!("personnel(8610) = {n}"));
}

/// Largest eigenvalue of a 3x3 matrix from its characteristic cubic by bisection,
/// eigenvector from the cross product of two rows of `A - lambda I`.
fn eigen_oracle(a: &[Vec<f64>]) -> (f64, [f64; 3]) {
    let trace = a[0][0] + a[1][1] + a[2][2];
    let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let p = |l: f64| l * l * l - trace * l * l + minors * l - det;
    let (mut lo, mut hi) = (3.0, 9.0 * 3.0);
    assert!(p(lo) <= 0.0 && p(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    let r0 = [a[0][0] - l, a[0][1], a[0][2]];
    let r1 = [a[1][0], a[1][1] - l, a[1][2]];
    let v = [r0[1] * r1[2] - r0[2] * r1[1], r0[2] * r1[0] - r0[0] * r1[2], r0[0] * r1[1] - r0[1] * r1[0]];
    let s: f64 = v.iter().sum();
    (l, v.map(|x| x / s))
}

fn ahp_suite(c: &mut Check) {
    let labels = |n: usize| (0..n).map(|i| format!("x{i}")).collect::<Vec<_>>();
    for n in 1..=10 {
        let r = ahp_weights(&PairwiseMatrix::uniform("u", labels(n)).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        c.that(r.weights.iter().all(|w| (w - 1.0 / n as f64).abs() <= 1e-12), || format!("uniform {n}: {:?}", r.weights));
        c.that(r.ci.abs() <= 1e-12, || format!("uniform {n}: ci {}", r.ci));
    }

    let generators: [&[f64]; 4] = [
        &[0.6, 0.3, 0.1],
        &[0.4, 0.25, 0.2, 0.1, 0.05],
        &[0.5, 0.5],
        &[0.3, 0.05, 0.15, 0.1, 0.2, 0.12, 0.08],
    ];
    for w in generators {
        let m = PairwiseMatrix::from_weights("w", labels(w.len()), w).unwrap();
        let r = ahp_weights(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let err = r.weights.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c.that(err <= 1e-9, || format!("consistent {w:?}: max error {err:e}"));
        c.that(r.ci.abs() <= 1e-9, || format!("consistent {w:?}: ci {}", r.ci));
    }

    let worked = vec![vec![1.0, 3.0, 5.0], vec![1.0 / 3.0, 1.0, 3.0], vec![0.2, 1.0 / 3.0, 1.0]];
    let (lambda, v) = eigen_oracle(&worked);
    let r = ahp_weights(&PairwiseMatrix::new("worked", labels(3), worked).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    for i in 0..3 {
        c.close(r.weights[i], v[i], 1e-9, &format!("worked w[{i}] vs oracle"));
    }
    c.close(r.lambda_max, lambda, 1e-9, "worked lambda vs oracle");
    for (w, want) in r.weights.iter().zip([0.637, 0.258, 0.105]) {
        c.close(*w, want, 5e-4, "worked weight");
    }
    c.close(r.lambda_max, 3.039, 1e-3, "worked lambda");
    c.close(r.ci, 0.019, 5e-4, "worked ci");
    c.close(r.ci, (lambda - 3.0) / 2.0, 1e-9, "worked ci vs oracle");

    let hierarchy = Hierarchy::builtin();
    for (name, m) in std::iter::once((&"criteria".to_string(), &hierarchy.criteria)).chain(&hierarchy.alternatives) {
        let r = ahp_weights(m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        c.that(r.ci < 0.05, || format!("{name}: ci {}", r.ci));
    }
    let scores = hierarchy.synthesize(false).unwrap();
    let mut ranked = scores.quality.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let top: Vec<&str> = ranked.iter().take(2).map(|(l, _)| l.as_str()).collect();
    c.that(top == ["CRL", "CL"], || format!("quality ranking {ranked:?}"));

    let reference = reference_table();
    let quality = quality_from_scores(&scores).unwrap();
    let inputs: Vec<SetupInput> = reference
        .rows
        .iter()
        .map(|r| SetupInput {
            setup: r.setup,
            quality: quality[&r.setup],
            availability: r.availability,
            reach: reference.reach,
            lcc_eur: r.lcc_eur,
        })
        .collect();
    let result = evaluate_setups(&inputs).unwrap();
    let best = result.best().unwrap().setup;
    c.that(best == code("CR"), || format!("SE winner {best}"));
}

fn desk_scale_properties(c: &mut Check) {
    let model = sample_model();
    let catalog = CostCatalog::sample();
    let cities = builtin_cities();
    let config = SimulationConfig {
        iterations: 10_000,
        seed: 99,
        workers: workers(),
        histogram_bins: 100,
    };

    for s in SetupCode::ALL {
        let setup = catalog.setup(code(s)).unwrap();
        let per_node: Vec<f64> = cities
            .iter()
            .map(|city| run_static_lcc(city, &setup, &catalog, &model).unwrap().npv_total / city.total_nodes() as f64)
            .collect();
        let spread = per_node.iter().copied().fold(f64::MIN, f64::max) / per_node.iter().copied().fold(f64::MAX, f64::min) - 1.0;
        c.that(spread < 0.10, || format!("{s}: static per-node NPV spread {:.1}%", spread * 100.0));
    }

    let setup = catalog.setup(code("CL")).unwrap();
    let per_node: Vec<f64> = cities
        .iter()
        .map(|city| {
            itslcc::run_simulation(city, &setup, &catalog, &model, &config).unwrap().mean / city.total_nodes() as f64
        })
        .collect();
    let spread = per_node.iter().copied().fold(f64::MIN, f64::max) / per_node.iter().copied().fold(f64::MAX, f64::min) - 1.0;
    c.that(spread < 0.10, || format!("CL: simulated per-node mean spread {:.1}%", spread * 100.0));

    let cologne = builtin_city("Cologne").unwrap();
    let std: Vec<f64> = ["C", "L", "CL"]
        .iter()
        .map(|s| {
            let setup = catalog.setup(code(s)).unwrap();
            itslcc::run_simulation(&cologne, &setup, &catalog, &model, &config).unwrap().std
        })
        .collect();
    c.that(std[0] < std[1] && std[1] < std[2], || format!("std C/L/CL = {std:?}"));
}

fn main() {
    let criteria: [(&str, fn(&mut Check)); 8] = [
        ("effectiveness and SE reproduce the reference table", effectiveness_reproduction),
        ("availability chain on the rainfall fixture", availability_chain),
        ("correlated sampler fidelity", sampler_fidelity),
        ("Monte Carlo degenerate identity", degenerate_identity),
        ("worker-count determinism", determinism),
        ("static engine identities", static_identities),
        ("AHP suite", ahp_suite),
        ("desk-scale cost properties", desk_scale_properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut check = Check::default();
        if let Err(panic) = catch_unwind(AssertUnwindSafe(|| run(&mut check))) {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            check.failures.push(format!("panicked: {msg}"));
        }
        let status = if check.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {} [{status}] {name} ({:.2?})", i + 1, start.elapsed());
        for f in &check.failures {
            println!("    {f}");
        }
        failed += usize::from(!check.failures.is_empty());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
