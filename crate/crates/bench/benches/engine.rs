use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use itslcc::ahp::{ahp_weights, PairwiseMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use itslcc::lcc::{run_static_lcc, CostProgram, Prices};
use itslcc::market::{build_escalation_model, sample_price_indices, DEFAULT_EPS};
use itslcc::montecarlo::{sample_escalation_paths, simulate_samples, SimulationConfig};
use itslcc::scenario::{builtin_city, CostCatalog, SetupCode};
use itslcc::schedule::deployment_schedule;
use itslcc::EscalationFactors;

fn static_lcc(c: &mut Criterion) {
    let scenario = builtin_city("Cologne").unwrap();
    let catalog = CostCatalog::sample();
    let model = build_escalation_model(&sample_price_indices(), DEFAULT_EPS).unwrap();
    let setup = catalog.setup("CRL".parse::<SetupCode>().unwrap()).unwrap();
    let plan = deployment_schedule(&scenario).unwrap();

    c.bench_function("static_lcc/full", |b| {
        b.iter(|| run_static_lcc(black_box(&scenario), &setup, &catalog, &model).unwrap())
    });
    c.bench_function("static_lcc/compile", |b| {
        b.iter(|| CostProgram::compile(black_box(&scenario), &plan, &catalog, &setup, &model).unwrap())
    });
    let program = CostProgram::compile(&scenario, &plan, &catalog, &setup, &model).unwrap();
    let factors = program.static_factors();
    let prices = Prices {
        factors: &factors,
        ssl_price: program.static_ssl_price(),
    };
    c.bench_function("static_lcc/evaluate", |b| b.iter(|| program.evaluate(black_box(&prices))));
}

fn monte_carlo(c: &mut Criterion) {
    let scenario = builtin_city("Cologne").unwrap();
    let catalog = CostCatalog::sample();
    let model = build_escalation_model(&sample_price_indices(), DEFAULT_EPS).unwrap();
    let setup = catalog.setup("CL".parse::<SetupCode>().unwrap()).unwrap();
    let plan = deployment_schedule(&scenario).unwrap();
    let program = CostProgram::compile(&scenario, &plan, &catalog, &setup, &model).unwrap();
    let months = program.horizon() as usize;

    c.bench_function("montecarlo/paths", |b| {
        b.iter_batched(
            || ChaCha8Rng::seed_from_u64(1),
            |mut rng| sample_escalation_paths(&model, months, &mut rng),
            BatchSize::SmallInput,
        )
    });
    let rates = sample_escalation_paths(&model, months, &mut ChaCha8Rng::seed_from_u64(1));
    let mut factors = EscalationFactors::new(months, model.len());
    c.bench_function("montecarlo/factors", |b| b.iter(|| factors.fill_from_rates(black_box(&rates))));

    let config = SimulationConfig {
        iterations: 1_000,
        seed: 3,
        workers: 1,
        ..SimulationConfig::default()
    };
    let ssl = catalog.ssl_substitution.as_ref().map(|s| &s.triangular);
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    group.bench_function("1k_iterations", |b| b.iter(|| simulate_samples(&program, &model, ssl, &config).unwrap()));
    group.finish();
}

fn ahp(c: &mut Criterion) {
    let labels: Vec<String> = (0..9).map(|i| format!("a{i}")).collect();
    let weights: Vec<f64> = (1..=9).map(f64::from).collect();
    let mut m = PairwiseMatrix::from_weights("bench", labels, &weights).unwrap();
    // one-step perturbation keeps the matrix reciprocal but not perfectly consistent
    m.values[0][8] = 1.0 / 8.0;
    m.values[8][0] = 8.0;
    c.bench_function("ahp/order9", |b| b.iter(|| ahp_weights(black_box(&m), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()));
}

criterion_group!(benches, static_lcc, monte_carlo, ahp);
criterion_main!(benches);
