//! Escalation rates from price-index time series, their covariance, and the
//! Cholesky factor consumed by the correlated sampler.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::scenario::read;

/// Default starting jitter for non positive-definite covariances.
pub const DEFAULT_EPS: f64 = 1e-10;
/// Largest diagonal jitter tried before giving up.
pub const MAX_EPS: f64 = 1e-6;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// A calendar month, stored as months since year 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthStamp(i32);

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Parse(format!("month {month} outside 1..=12")));
        }
        Ok(MonthStamp(year * 12 + month as i32 - 1))
    }

    pub fn months_since(self, earlier: MonthStamp) -> i32 {
        self.0 - earlier.0
    }

    pub fn next(self) -> MonthStamp {
        MonthStamp(self.0 + 1)
    }
}

impl FromStr for MonthStamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("month stamp {s:?} is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        MonthStamp::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.0.div_euclid(12), self.0.rem_euclid(12) + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceIndexSeries {
    pub series_id: String,
    pub observations: Vec<(MonthStamp, f64)>,
}

impl PriceIndexSeries {
    pub fn new(series_id: impl Into<String>, observations: Vec<(MonthStamp, f64)>) -> Result<Self> {
        let series_id = series_id.into();
        if let Some((m, v)) = observations.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::validation(
                format!("{series_id}@{m}"),
                format!("index values must be > 0, got {v}"),
            ));
        }
        if observations.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::validation(series_id, "month stamps must be strictly increasing"));
        }
        Ok(PriceIndexSeries { series_id, observations })
    }

    /// Consecutive monthly values starting at `start`.
    pub fn monthly(series_id: impl Into<String>, start: MonthStamp, values: &[f64]) -> Result<Self> {
        let mut month = start;
        let obs = values
            .iter()
            .map(|v| {
                let o = (month, *v);
                month = month.next();
                o
            })
            .collect();
        Self::new(series_id, obs)
    }

    pub fn first_month(&self) -> Option<MonthStamp> {
        self.observations.first().map(|o| o.0)
    }

    pub fn last_month(&self) -> Option<MonthStamp> {
        self.observations.last().map(|o| o.0)
    }
}

/// Geometric mean annual growth between the first and last observation.
pub fn annual_escalation_rate(series: &PriceIndexSeries) -> Result<f64> {
    let obs = &series.observations;
    if obs.len() < 2 {
        return Err(Error::validation(&series.series_id, "need at least 2 observations"));
    }
    let (first_m, first) = obs[0];
    let (last_m, last) = obs[obs.len() - 1];
    if first <= 0.0 || last <= 0.0 {
        return Err(Error::validation(&series.series_id, "index values must be > 0"));
    }
    let months = last_m.months_since(first_m) as f64;
    Ok((last / first).powf(12.0 / months) - 1.0)
}

/// Monthly equivalent of an annual rate.
pub fn monthly_from_annual(annual: f64) -> f64 {
    (1.0 + annual).powf(1.0 / 12.0) - 1.0
}

/// Relative month-over-month changes; the months must be consecutive.
pub fn monthly_changes(series: &PriceIndexSeries) -> Result<Vec<f64>> {
    let obs = &series.observations;
    if obs.len() < 2 {
        return Err(Error::validation(&series.series_id, "need at least 2 observations"));
    }
    obs.windows(2)
        .map(|w| {
            if w[1].0 != w[0].0.next() {
                return Err(Error::MonthGap {
                    series: series.series_id.clone(),
                    after: w[0].0.to_string(),
                });
            }
            Ok(w[1].1 / w[0].1 - 1.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

/// Pearson correlation with a two-sided t-test p-value on `n - 2` degrees of freedom.
pub fn correlation_significance(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::validation("correlation", "vectors differ in length"));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::validation("correlation", "need at least 3 paired values"));
    }
    let (va, vb) = (covariance(a, a), covariance(b, b));
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let r = (covariance(a, b) / (va * vb).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if 1.0 - r.abs() < 1e-15 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Correlation { r, p })
}

/// Lower-triangular `L` with `L Lᵀ = a`, or `None` if `a` is not positive definite.
pub fn cholesky_lower(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Mean monthly escalation, its covariance, and the factor used for sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscalationModel {
    pub series_ids: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub chol: Vec<Vec<f64>>,
    pub pvalues: Vec<Vec<f64>>,
    /// Diagonal jitter added before factorization, 0 when none was needed.
    pub jitter: f64,
    /// Pairs whose correlation is not significant at the 5 % level.
    pub insignificant: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

impl EscalationModel {
    /// Builds the model from given moments, regularizing with growing diagonal
    /// jitter when `sigma` is not positive definite.
    pub fn from_moments(series_ids: Vec<String>, mu: Vec<f64>, sigma: Vec<Vec<f64>>, eps: f64) -> Result<Self> {
        let n = series_ids.len();
        if n == 0 {
            return Err(Error::Empty("escalation model"));
        }
        if mu.len() != n || sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
            return Err(Error::validation("sigma", format!("dimensions must all equal {n}")));
        }
        for i in 0..n {
            if sigma[i][i] < 0.0 {
                return Err(Error::validation("sigma", "negative variance"));
            }
            for j in 0..i {
                let scale = sigma[i][j].abs().max(sigma[j][i].abs()).max(1e-300);
                if (sigma[i][j] - sigma[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::validation("sigma", "covariance must be symmetric"));
                }
            }
        }
        let mut warnings = Vec::new();
        let mut jitter = 0.0;
        let chol = match cholesky_lower(&sigma) {
            Some(c) => c,
            None => {
                let mut e = if eps > 0.0 { eps } else { DEFAULT_EPS };
                loop {
                    let mut reg = sigma.clone();
                    for (i, row) in reg.iter_mut().enumerate() {
                        row[i] += e;
                    }
                    if let Some(c) = cholesky_lower(&reg) {
                        jitter = e;
                        warnings.push(format!("covariance not positive definite; added {e:e} to the diagonal"));
                        break c;
                    }
                    e *= 10.0;
                    if e > MAX_EPS * (1.0 + 1e-9) {
                        return Err(Error::Cholesky(MAX_EPS));
                    }
                }
            }
        };
        let mut pvalues = vec![vec![0.0; n]; n];
        for (i, row) in pvalues.iter_mut().enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                if i != j {
                    *p = f64::NAN;
                }
            }
        }
        Ok(EscalationModel {
            series_ids,
            mu,
            sigma,
            chol,
            pvalues,
            jitter,
            insignificant: Vec::new(),
            warnings,
        })
    }

    /// Model with fixed escalation and no randomness.
    pub fn deterministic(series_ids: Vec<String>, mu: Vec<f64>) -> Self {
        let n = series_ids.len();
        assert_eq!(mu.len(), n, "one rate per series");
        EscalationModel {
            series_ids,
            mu,
            sigma: vec![vec![0.0; n]; n],
            chol: vec![vec![0.0; n]; n],
            pvalues: vec![vec![0.0; n]; n],
            jitter: 0.0,
            insignificant: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.series_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series_ids.is_empty()
    }

    pub fn index_of(&self, series_id: &str) -> Option<usize> {
        self.series_ids.iter().position(|s| s == series_id)
    }

    /// Replaces `mu` by monthly equivalents of long-window endpoint growth rates.
    pub fn with_long_run_rates(mut self, long_run: &[PriceIndexSeries]) -> Result<Self> {
        for series in long_run {
            let i = self.index_of(&series.series_id).ok_or_else(|| {
                Error::validation("long-run indices", format!("series `{}` not in model", series.series_id))
            })?;
            self.mu[i] = monthly_from_annual(annual_escalation_rate(series)?);
        }
        Ok(self)
    }

    pub fn correlation(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let sd: Vec<f64> = (0..n).map(|i| self.sigma[i][i].sqrt()).collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            1.0
                        } else if sd[i] > 0.0 && sd[j] > 0.0 {
                            self.sigma[i][j] / (sd[i] * sd[j])
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Estimates mean monthly escalation, covariance, significance and the Cholesky
/// factor from index series sharing one month range.
pub fn build_escalation_model(series: &[PriceIndexSeries], eps: f64) -> Result<EscalationModel> {
    let first = series.first().ok_or(Error::Empty("price index series"))?;
    for s in series {
        if s.first_month() != first.first_month() || s.last_month() != first.last_month() {
            return Err(Error::MismatchedRange(format!(
                "`{}` spans {:?}..{:?}, `{}` spans {:?}..{:?}",
                first.series_id,
                first.first_month().map(|m| m.to_string()),
                first.last_month().map(|m| m.to_string()),
                s.series_id,
                s.first_month().map(|m| m.to_string()),
                s.last_month().map(|m| m.to_string()),
            )));
        }
    }
    let changes = series.iter().map(monthly_changes).collect::<Result<Vec<_>>>()?;
    let n = series.len();
    if changes[0].len() < 2 {
        return Err(Error::validation("price indices", "need at least 3 observations per series"));
    }
    let mu: Vec<f64> = changes.iter().map(|c| mean(c)).collect();
    let sigma: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| covariance(&changes[i], &changes[j])).collect())
        .collect();
    let ids = series.iter().map(|s| s.series_id.clone()).collect();
    let mut model = EscalationModel::from_moments(ids, mu, sigma, eps)?;

    for i in 0..n {
        model.pvalues[i][i] = 0.0;
        for j in 0..i {
            let p = match correlation_significance(&changes[i], &changes[j]) {
                Ok(c) => c.p,
                Err(Error::ZeroVariance) => 1.0,
                Err(e) => return Err(e),
            };
            model.pvalues[i][j] = p;
            model.pvalues[j][i] = p;
            if p >= SIGNIFICANCE_LEVEL {
                model.insignificant.push((j, i));
            }
        }
    }
    if !model.insignificant.is_empty() {
        model.warnings.push(format!(
            "{} correlation(s) not significant at p < {SIGNIFICANCE_LEVEL}; kept as estimated",
            model.insignificant.len()
        ));
    }
    Ok(model)
}

#[derive(Deserialize)]
struct IndexRow {
    month: String,
    series_id: String,
    index: f64,
}

/// Parses `month,series_id,index` CSV text. Series keep first-appearance order.
pub fn parse_price_indices(text: &str) -> Result<Vec<PriceIndexSeries>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(format!("price indices: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != ["month", "series_id", "index"] {
        return Err(Error::Parse("price indices: header must be `month,series_id,index`".into()));
    }
    let mut order = Vec::new();
    let mut grouped: BTreeMap<String, Vec<(MonthStamp, f64)>> = BTreeMap::new();
    for (line, row) in reader.deserialize::<IndexRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("price indices row {}: {e}", line + 2)))?;
        let month: MonthStamp = row.month.parse()?;
        if !grouped.contains_key(&row.series_id) {
            order.push(row.series_id.clone());
        }
        grouped.entry(row.series_id).or_default().push((month, row.index));
    }
    if order.is_empty() {
        return Err(Error::Empty("price indices"));
    }
    order
        .into_iter()
        .map(|id| {
            let mut obs = grouped.remove(&id).unwrap_or_default();
            obs.sort_by_key(|o| o.0);
            PriceIndexSeries::new(id, obs)
        })
        .collect()
}

pub fn load_price_indices(path: impl AsRef<Path>) -> Result<Vec<PriceIndexSeries>> {
    parse_price_indices(&read(path.as_ref())?)
}

/// The synthetic, pre-deflated monthly indices shipped with the crate
/// (nine series, 2015-01 to 2022-04).
pub fn sample_price_indices() -> Vec<PriceIndexSeries> {
    parse_price_indices(include_str!("../data/sample_indices.csv")).expect("bundled indices are valid")
}
