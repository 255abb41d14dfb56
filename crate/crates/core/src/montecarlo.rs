//! Correlated Monte Carlo over escalation paths and the solid-state lidar price.
//!
//! Each iteration draws one path of monthly escalation vectors
//! `X_m = mu + C Z_m` and one triangular SSL price, prices the compiled cost
//! program with them and records the NPV. Iteration `i` draws from its own
//! ChaCha stream keyed by `(seed, i)`, so results do not depend on how
//! iterations are spread across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcc::{CostProgram, EscalationFactors, Prices};
use crate::market::EscalationModel;
use crate::scenario::{CityScenario, CostCatalog, SensorSetup, Triangular};
use crate::schedule::deployment_schedule;

pub const DEFAULT_ITERATIONS: usize = 100_000;
pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub iterations: usize,
    pub seed: u64,
    pub workers: usize,
    pub histogram_bins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            workers: 1,
            histogram_bins: DEFAULT_BINS,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::validation("iterations", "must be >= 1"));
        }
        if self.workers < 1 {
            return Err(Error::validation("workers", "must be >= 1"));
        }
        if self.histogram_bins < 1 {
            return Err(Error::validation("histogram_bins", "must be >= 1"));
        }
        Ok(())
    }
}

/// The random stream for one iteration.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Writes `mu + C z` into `out`.
pub fn correlate_into(model: &EscalationModel, z: &[f64], out: &mut [f64]) {
    let n = model.len();
    for i in 0..n {
        let mut x = model.mu[i];
        for (c, zj) in model.chol[i][..=i].iter().zip(z) {
            x += c * zj;
        }
        out[i] = x;
    }
}

/// Fills `out` (row-major, `months x n`) with independent correlated rows.
pub fn fill_escalation_paths<R: Rng + ?Sized>(model: &EscalationModel, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
    let n = model.len();
    for row in out.chunks_exact_mut(n) {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        correlate_into(model, z, row);
    }
}

/// `months` rows of monthly escalation rates, row-major `months x n`.
pub fn sample_escalation_paths<R: Rng + ?Sized>(model: &EscalationModel, months: usize, rng: &mut R) -> Vec<f64> {
    let n = model.len();
    let mut out = vec![0.0; months * n];
    let mut z = vec![0.0; n];
    fill_escalation_paths(model, rng, &mut z, &mut out);
    out
}

/// Inverse CDF of the triangular distribution at `u` in [0, 1].
pub fn triangular_inverse_cdf(t: &Triangular, u: f64) -> f64 {
    let width = t.max - t.min;
    if width <= 0.0 {
        return t.min;
    }
    let split = (t.mode - t.min) / width;
    if u < split {
        t.min + (u * width * (t.mode - t.min)).sqrt()
    } else {
        t.max - ((1.0 - u) * width * (t.max - t.mode)).sqrt()
    }
}

pub fn sample_triangular<R: Rng + ?Sized>(min: f64, mode: f64, max: f64, rng: &mut R) -> Result<f64> {
    let t = Triangular::new(min, mode, max)?;
    Ok(triangular_inverse_cdf(&t, rng.random::<f64>()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(sorted: &[f64], bins: usize) -> Self {
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        if max <= min {
            return Histogram {
                edges: vec![min, max],
                counts: vec![sorted.len() as u64],
            };
        }
        let width = (max - min) / bins as f64;
        let edges = (0..=bins)
            .map(|i| if i == bins { max } else { min + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for x in sorted {
            let i = (((x - min) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }

    /// `bin_lo,bin_hi,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub iterations: usize,
    pub mean: f64,
    /// Sample standard deviation; reported as 0 when undefined (one sample).
    pub std: f64,
    pub std_defined: bool,
    pub median: f64,
    /// Upper 5 % quantile.
    pub p95: f64,
    /// Lower 5 % quantile.
    pub p05: f64,
    pub min: f64,
    pub max: f64,
    /// max - min over all iterations.
    pub range: f64,
    pub p95_minus_p05: f64,
    /// Escalation factors that went negative and were floored at zero.
    pub floored_prices: u64,
    pub histogram: Histogram,
}

/// Linear interpolation between order statistics at `(n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(samples: &[f64], bins: usize) -> Result<McSummary> {
    if samples.is_empty() {
        return Err(Error::Empty("summarize"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("samples", "non-finite value"));
    }
    let n = samples.len();
    // shifted accumulation keeps constant inputs exact
    let shift = samples[0];
    let mean = shift + samples.iter().map(|x| x - shift).sum::<f64>() / n as f64;
    let std = if n > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (p05, p95) = (quantile(&sorted, 0.05), quantile(&sorted, 0.95));
    let (min, max) = (sorted[0], sorted[n - 1]);
    Ok(McSummary {
        iterations: n,
        mean,
        std,
        std_defined: n > 1,
        median: quantile(&sorted, 0.5),
        p95,
        p05,
        min,
        max,
        range: max - min,
        p95_minus_p05: p95 - p05,
        floored_prices: 0,
        histogram: Histogram::build(&sorted, bins.max(1)),
    })
}

/// Per-iteration NPVs in iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub npv: Vec<f64>,
    pub floored_prices: u64,
}

struct Workspace {
    z: Vec<f64>,
    rates: Vec<f64>,
    factors: EscalationFactors,
}

fn run_iteration(
    program: &CostProgram,
    model: &EscalationModel,
    ssl: Option<&Triangular>,
    seed: u64,
    iteration: usize,
    ws: &mut Workspace,
) -> Result<(f64, usize)> {
    let mut rng = iteration_rng(seed, iteration as u64);
    let ssl_price = match ssl {
        Some(t) => triangular_inverse_cdf(t, rng.random::<f64>()),
        None => program.static_ssl_price(),
    };
    fill_escalation_paths(model, &mut rng, &mut ws.z, &mut ws.rates);
    ws.factors.fill_from_rates(&ws.rates);
    let npv = program.evaluate(&Prices {
        factors: &ws.factors,
        ssl_price,
    });
    if !npv.is_finite() {
        return Err(Error::Simulation {
            iteration,
            message: format!("non-finite NPV {npv}"),
        });
    }
    Ok((npv, ws.factors.floored))
}

/// Runs the iterations of `config` against a compiled program.
pub fn simulate_samples(
    program: &CostProgram,
    model: &EscalationModel,
    ssl: Option<&Triangular>,
    config: &SimulationConfig,
) -> Result<SampleSet> {
    config.validate()?;
    if model.len() != program.series_count() {
        return Err(Error::validation(
            "model",
            format!("{} series, program compiled for {}", model.len(), program.series_count()),
        ));
    }
    let n = model.len();
    let months = program.horizon() as usize;
    let workspace = || Workspace {
        z: vec![0.0; n],
        rates: vec![0.0; months * n],
        factors: EscalationFactors::new(months, n),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::validation("workers", e.to_string()))?;
    let results: Vec<(f64, usize)> = pool.install(|| {
        (0..config.iterations)
            .into_par_iter()
            .map_init(workspace, |ws, i| run_iteration(program, model, ssl, config.seed, i, ws))
            .collect::<Result<Vec<_>>>()
    })?;
    let floored_prices = results.iter().map(|r| r.1 as u64).sum();
    Ok(SampleSet {
        npv: results.into_iter().map(|r| r.0).collect(),
        floored_prices,
    })
}

/// NPV distribution of one setup under correlated escalation and SSL price risk.
pub fn run_simulation(
    scenario: &CityScenario,
    setup: &SensorSetup,
    catalog: &CostCatalog,
    model: &EscalationModel,
    config: &SimulationConfig,
) -> Result<McSummary> {
    config.validate()?;
    let plan = deployment_schedule(scenario)?;
    let program = CostProgram::compile(scenario, &plan, catalog, setup, model)?;
    let ssl = catalog.ssl_substitution.as_ref().map(|s| &s.triangular);
    let samples = simulate_samples(&program, model, ssl, config)?;
    let mut summary = summarize(&samples.npv, config.histogram_bins)?;
    summary.floored_prices = samples.floored_prices;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model2() -> EscalationModel {
        EscalationModel::from_moments(
            vec!["a".into(), "b".into()],
            vec![0.001, -0.002],
            vec![vec![4.0, 2.0], vec![2.0, 3.0]],
            1e-10,
        )
        .unwrap()
    }

    #[test]
    fn zero_z_gives_mu() {
        let m = model2();
        let mut out = [0.0; 2];
        correlate_into(&m, &[0.0, 0.0], &mut out);
        assert_eq!(out.to_vec(), m.mu);
    }

    #[test]
    fn identity_factor_unit_vector() {
        let m = EscalationModel::from_moments(
            vec!["a".into(), "b".into()],
            vec![0.5, 0.25],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            1e-10,
        )
        .unwrap();
        let mut out = [0.0; 2];
        correlate_into(&m, &[1.0, 0.0], &mut out);
        assert_eq!(out, [1.5, 0.25]);
    }

    #[test]
    fn paths_have_requested_shape() {
        let m = model2();
        let p = sample_escalation_paths(&m, 180, &mut iteration_rng(1, 0));
        assert_eq!(p.len(), 360);
    }

    #[test]
    fn empirical_covariance_two_by_two() {
        let m = model2();
        let rows = 100_000;
        let p = sample_escalation_paths(&m, rows, &mut iteration_rng(42, 0));
        let mean = |k: usize| p.iter().skip(k).step_by(2).sum::<f64>() / rows as f64;
        let (ma, mb) = (mean(0), mean(1));
        let cov = |i: usize, j: usize, mi: f64, mj: f64| {
            p.chunks_exact(2).map(|r| (r[i] - mi) * (r[j] - mj)).sum::<f64>() / (rows - 1) as f64
        };
        let expected = [[4.0, 2.0], [2.0, 3.0]];
        let means = [ma, mb];
        for i in 0..2 {
            for j in 0..2 {
                let c = cov(i, j, means[i], means[j]);
                assert!((c - expected[i][j]).abs() <= 0.02 * expected[i][j], "{i}{j}: {c}");
            }
        }
    }

    #[test]
    fn triangular_degenerate_and_inverse() {
        let mut rng = iteration_rng(3, 0);
        for _ in 0..100 {
            assert_eq!(sample_triangular(7.0, 7.0, 7.0, &mut rng).unwrap(), 7.0);
        }
        let t = Triangular::new(0.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(triangular_inverse_cdf(&t, 0.5), 1.0 - 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(triangular_inverse_cdf(&t, 0.5), 0.29289, epsilon = 1e-5);
        let sym = Triangular::new(2.0, 4.0, 6.0).unwrap();
        assert_eq!(triangular_inverse_cdf(&sym, 0.0), 2.0);
        assert_eq!(triangular_inverse_cdf(&sym, 1.0), 6.0);
        assert_abs_diff_eq!(triangular_inverse_cdf(&sym, 0.5), 4.0, epsilon = 1e-12);
        assert!(sample_triangular(3.0, 2.0, 4.0, &mut rng).is_err());
    }

    #[test]
    fn triangular_mean_over_many_draws() {
        // mean (2000 + 4000 + 6000) / 3 = 4000, sd = sqrt((a²+b²+c²-ab-ac-bc)/18) = 816.5;
        // standard error at 100k draws is 2.6, so +-10 is ~4 SE.
        let mut rng = iteration_rng(11, 0);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_triangular(2000.0, 4000.0, 6000.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 4000.0).abs() < 10.0, "{mean}");
    }

    #[test]
    fn summary_of_one_to_five() {
        let s = summarize(&[3.0, 1.0, 5.0, 2.0, 4.0], 4).unwrap();
        assert_eq!((s.median, s.min, s.max, s.range), (3.0, 1.0, 5.0, 4.0));
        assert_eq!(s.mean, 3.0);
        assert_abs_diff_eq!(s.std, 2.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.p05, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.p95, 4.8, epsilon = 1e-12);
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 5);
        assert_eq!(s.histogram.edges.len(), 5);
    }

    #[test]
    fn summary_of_constant_samples() {
        let s = summarize(&[0.1; 7], 10).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.p05, s.mean);
        assert_eq!(s.p95, s.mean);
        assert_eq!(s.range, 0.0);
        assert_eq!(s.histogram.counts, vec![7]);
    }

    #[test]
    fn summary_single_sample_flags_std() {
        let s = summarize(&[42.0], 10).unwrap();
        assert!(!s.std_defined);
        assert_eq!(s.std, 0.0);
        assert!(matches!(summarize(&[], 10), Err(Error::Empty(_))));
    }

    #[test]
    fn standard_normal_upper_quantile() {
        let mut rng = iteration_rng(5, 0);
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let s = summarize(&x, 50).unwrap();
        assert!((s.p95 - 1.645).abs() < 0.02, "{}", s.p95);
        assert!(s.p05 <= s.median && s.median <= s.p95);
    }

    #[test]
    fn histogram_csv() {
        let s = summarize(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(s.histogram.to_csv(), "bin_lo,bin_hi,count\n0,1.5,2\n1.5,3,2\n");
    }

    #[test]
    fn iteration_streams_are_independent_of_order() {
        let a: f64 = iteration_rng(9, 17).random();
        let _ = iteration_rng(9, 3).random::<f64>();
        let b: f64 = iteration_rng(9, 17).random();
        assert_eq!(a, b);
        assert_ne!(a, iteration_rng(9, 18).random::<f64>());
        assert_ne!(a, iteration_rng(10, 17).random::<f64>());
    }

    #[test]
    fn config_validation() {
        let bad = SimulationConfig { iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SimulationConfig { workers: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(SimulationConfig::default().iterations, 100_000);
    }
}
