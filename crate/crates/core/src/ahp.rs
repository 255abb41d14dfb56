//! Analytic hierarchy process: pairwise matrices, eigenvector weights,
//! consistency, and synthesis into per-setup quality.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::read;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Largest acceptable consistency index.
pub const CI_LIMIT: f64 = 0.05;
pub const CRITERIA: [&str; 3] = ["accuracy", "latency", "reliability"];
pub const MAX_ORDER: usize = 10;

const RECIPROCAL_TOL: f64 = 1e-9;
const SCALE_MIN: f64 = 1.0 / 9.0;
const SCALE_MAX: f64 = 9.0;

/// Saaty's random consistency index for n = 1..=10.
const RANDOM_INDEX: [f64; MAX_ORDER] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

pub fn random_index(n: usize) -> Result<f64> {
    match n {
        1..=MAX_ORDER => Ok(RANDOM_INDEX[n - 1]),
        _ => Err(Error::validation("matrix order", format!("{n} outside 1..={MAX_ORDER}"))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn value(&self) -> Result<f64> {
        match self {
            Entry::Number(x) => Ok(*x),
            Entry::Text(s) => parse_ratio(s),
        }
    }
}

/// Parses `"3"`, `"1/3"` or `"0.25"`.
pub fn parse_ratio(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("bad pairwise entry `{s}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let x = match s.split_once('/') {
        Some((a, b)) => num(a)? / num(b)?,
        None => num(s)?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    #[serde(default)]
    name: Option<String>,
    labels: Vec<String>,
    values: Vec<Vec<Entry>>,
}

/// Square reciprocal comparison matrix with labelled rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseMatrix {
    pub name: String,
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn new(name: impl Into<String>, labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = PairwiseMatrix {
            name: name.into(),
            labels,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Consistent matrix `a_ij = w_i / w_j`.
    pub fn from_weights(name: impl Into<String>, labels: Vec<String>, weights: &[f64]) -> Result<Self> {
        let values = weights.iter().map(|wi| weights.iter().map(|wj| wi / wj).collect()).collect();
        Self::new(name, labels, values)
    }

    pub fn uniform(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::new(name, labels, vec![vec![1.0; n]; n])
    }

    /// Reads `{"labels": [...], "values": [[...]]}`; entries are numbers or `"a/b"`.
    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let values = file
            .values
            .iter()
            .map(|row| row.iter().map(Entry::value).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.name.unwrap_or_else(|| name.into()), file.labels, values)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::Empty("pairwise matrix"));
        }
        random_index(n)?;
        if self.values.len() != n || self.values.iter().any(|r| r.len() != n) {
            return Err(Error::validation(&self.name, format!("expected a {n}x{n} matrix")));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::LabelMismatch(format!("duplicate label `{dup}` in `{}`", self.name)));
        }
        for (i, row) in self.values.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::validation(&self.name, format!("entry ({i},{j}) must be positive")));
                }
                if a < SCALE_MIN * (1.0 - RECIPROCAL_TOL) || a > SCALE_MAX * (1.0 + RECIPROCAL_TOL) {
                    return Err(Error::validation(&self.name, format!("entry ({i},{j}) = {a} outside [1/9, 9]")));
                }
                if (a * self.values[j][i] - 1.0).abs() > RECIPROCAL_TOL {
                    return Err(Error::NonReciprocal(self.name.clone()));
                }
            }
            if (row[i] - 1.0).abs() > RECIPROCAL_TOL {
                return Err(Error::NonReciprocal(self.name.clone()));
            }
        }
        Ok(())
    }

    /// The same comparisons with rows and columns in `order` (indices into self).
    pub fn permuted(&self, order: &[usize]) -> Self {
        PairwiseMatrix {
            name: self.name.clone(),
            labels: order.iter().map(|&i| self.labels[i].clone()).collect(),
            values: order.iter().map(|&i| order.iter().map(|&j| self.values[i][j]).collect()).collect(),
        }
    }

    /// Reorders to match `labels`; fails unless both hold the same label set.
    pub fn aligned_to(&self, labels: &[String]) -> Result<Self> {
        let mismatch = || {
            Error::LabelMismatch(format!(
                "`{}` has labels {:?}, expected {:?}",
                self.name, self.labels, labels
            ))
        };
        if labels.len() != self.labels.len() {
            return Err(mismatch());
        }
        let order = labels
            .iter()
            .map(|l| self.labels.iter().position(|x| x == l).ok_or_else(mismatch))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.permuted(&order))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhpResult {
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub ci: f64,
    pub cr: f64,
    pub iterations: usize,
}

impl AhpResult {
    pub fn weight(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.weights[i])
    }
}

fn mat_vec(a: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(w).map(|(x, y)| x * y).sum()).collect()
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Principal right eigenvector by power iteration from the row geometric means.
pub fn ahp_weights(matrix: &PairwiseMatrix, tol: f64, max_iter: usize) -> Result<AhpResult> {
    matrix.validate()?;
    let a = &matrix.values;
    let n = matrix.len();
    let mut w: Vec<f64> = a
        .iter()
        .map(|row| row.iter().map(|x| x.ln()).sum::<f64>() / n as f64)
        .map(f64::exp)
        .collect();
    normalize(&mut w);

    let mut iterations = 0;
    loop {
        if iterations >= max_iter {
            return Err(Error::NonConvergence(max_iter));
        }
        iterations += 1;
        let mut next = mat_vec(a, &w);
        normalize(&mut next);
        let delta = next.iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        w = next;
        if delta < tol {
            break;
        }
    }

    let aw = mat_vec(a, &w);
    let lambda_max = aw.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() / w.iter().map(|x| x * x).sum::<f64>();
    let ci = if n > 1 { (lambda_max - n as f64) / (n - 1) as f64 } else { 0.0 };
    let ri = random_index(n)?;
    let cr = if ri > 0.0 { ci / ri } else { 0.0 };
    Ok(AhpResult {
        labels: matrix.labels.clone(),
        weights: w,
        lambda_max,
        ci,
        cr,
        iterations,
    })
}

/// Criteria matrix plus one alternatives matrix per criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub criteria: PairwiseMatrix,
    pub alternatives: BTreeMap<String, PairwiseMatrix>,
}

impl Hierarchy {
    /// The matrices shipped with the crate.
    pub fn builtin() -> Self {
        let m = |name: &str, text: &str| PairwiseMatrix::from_json(name, text).expect("shipped matrix is valid");
        let alternatives = [
            ("accuracy", include_str!("../data/ahp/accuracy.json")),
            ("latency", include_str!("../data/ahp/latency.json")),
            ("reliability", include_str!("../data/ahp/reliability.json")),
        ]
        .into_iter()
        .map(|(name, text)| (name.to_string(), m(name, text)))
        .collect();
        Hierarchy {
            criteria: m("criteria", include_str!("../data/ahp/criteria.json")),
            alternatives,
        }
    }

    /// Reads `criteria.json` and `<criterion>.json` for every criterion label.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let criteria = PairwiseMatrix::from_json("criteria", &read(&dir.join("criteria.json"))?)?;
        let alternatives = criteria
            .labels
            .iter()
            .map(|c| {
                let m = PairwiseMatrix::from_json(c.as_str(), &read(&dir.join(format!("{c}.json")))?)?;
                Ok((c.clone(), m))
            })
            .collect::<Result<_>>()?;
        Ok(Hierarchy { criteria, alternatives })
    }

    pub fn synthesize(&self, allow_inconsistent: bool) -> Result<QualityScores> {
        synthesize_quality(&self.criteria, &self.alternatives, allow_inconsistent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityScores {
    pub criteria: AhpResult,
    pub alternatives: BTreeMap<String, AhpResult>,
    /// Setup label to quality, in the label order of the first alternatives matrix.
    pub quality: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl QualityScores {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.quality.iter().find(|(l, _)| l == label).map(|(_, q)| *q)
    }
}

fn check_consistency(r: &AhpResult, name: &str, allow: bool, warnings: &mut Vec<String>) -> Result<()> {
    if r.ci < CI_LIMIT {
        return Ok(());
    }
    if allow {
        warnings.push(format!("matrix `{name}` has CI {:.4} >= {CI_LIMIT}", r.ci));
        Ok(())
    } else {
        Err(Error::Inconsistent {
            label: name.to_string(),
            ci: r.ci,
            limit: CI_LIMIT,
        })
    }
}

/// quality(s) = sum over criteria c of w(c) * w(c, s).
pub fn synthesize_quality(
    criteria: &PairwiseMatrix,
    alternatives: &BTreeMap<String, PairwiseMatrix>,
    allow_inconsistent: bool,
) -> Result<QualityScores> {
    let mut warnings = Vec::new();
    let top = ahp_weights(criteria, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    check_consistency(&top, &criteria.name, allow_inconsistent, &mut warnings)?;

    if let Some(extra) = alternatives.keys().find(|k| !criteria.labels.contains(k)) {
        return Err(Error::LabelMismatch(format!("alternatives given for unknown criterion `{extra}`")));
    }
    let mut setups: Option<Vec<String>> = None;
    let mut results = BTreeMap::new();
    let mut quality: Vec<f64> = Vec::new();
    for (c, wc) in criteria.labels.iter().zip(&top.weights) {
        let m = alternatives
            .get(c)
            .ok_or_else(|| Error::LabelMismatch(format!("no alternatives matrix for criterion `{c}`")))?;
        let labels = setups.get_or_insert_with(|| m.labels.clone());
        let m = m.aligned_to(labels)?;
        let r = ahp_weights(&m, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        check_consistency(&r, c, allow_inconsistent, &mut warnings)?;
        quality.resize(r.weights.len(), 0.0);
        for (q, w) in quality.iter_mut().zip(&r.weights) {
            *q += wc * w;
        }
        results.insert(c.clone(), r);
    }
    let setups = setups.unwrap_or_default();
    Ok(QualityScores {
        criteria: top,
        alternatives: results,
        quality: setups.into_iter().zip(quality).collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("a{i}")).collect()
    }

    #[test]
    fn uniform_gives_equal_weights() {
        for n in 1..=10 {
            let r = ahp_weights(&PairwiseMatrix::uniform("u", labels(n)).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            for w in &r.weights {
                assert_abs_diff_eq!(*w, 1.0 / n as f64, epsilon = 1e-15);
            }
            assert_abs_diff_eq!(r.ci, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn consistent_matrix_recovers_weights() {
        let m = PairwiseMatrix::from_weights("w", labels(3), &[0.6, 0.3, 0.1]).unwrap();
        let r = ahp_weights(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for (w, e) in r.weights.iter().zip([0.6, 0.3, 0.1]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.lambda_max, 3.0, epsilon = 1e-12);
        assert!(r.ci.abs() <= 1e-9);
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!(parse_ratio("3").unwrap(), 3.0);
        assert_eq!(parse_ratio("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_ratio(" 1 / 4 ").unwrap(), 0.25);
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }

    #[test]
    fn rejects_bad_matrices() {
        let l = labels(2);
        assert!(matches!(
            PairwiseMatrix::new("m", l.clone(), vec![vec![1.0, 3.0], vec![0.5, 1.0]]),
            Err(Error::NonReciprocal(_))
        ));
        assert!(PairwiseMatrix::new("m", l.clone(), vec![vec![1.0, 10.0], vec![0.1, 1.0]]).is_err());
        assert!(PairwiseMatrix::new("m", l.clone(), vec![vec![2.0, 1.0], vec![1.0, 0.5]]).is_err());
        assert!(PairwiseMatrix::new("m", l, vec![vec![1.0]]).is_err());
        assert!(PairwiseMatrix::uniform("m", labels(11)).is_err());
        assert!(random_index(11).is_err());
        assert!(random_index(0).is_err());
    }

    #[test]
    fn non_convergence_reported() {
        let m = PairwiseMatrix::new(
            "m",
            labels(3),
            vec![vec![1.0, 3.0, 5.0], vec![1.0 / 3.0, 1.0, 3.0], vec![0.2, 1.0 / 3.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(ahp_weights(&m, 0.0, 5), Err(Error::NonConvergence(5))));
    }

    #[test]
    fn criteria_default_is_consistent() {
        let h = Hierarchy::builtin();
        let r = ahp_weights(&h.criteria, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.labels, CRITERIA.map(String::from).to_vec());
        for (w, e) in r.weights.iter().zip([0.6, 0.2, 0.2]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-12);
        }
        assert!(r.ci.abs() < 1e-12);
    }

    #[test]
    fn shipped_matrices_are_consistent() {
        let h = Hierarchy::builtin();
        for (name, m) in &h.alternatives {
            let r = ahp_weights(m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(r.ci < CI_LIMIT, "{name}: {}", r.ci);
            assert!(r.ci > -1e-12);
        }
    }

    #[test]
    fn single_sensor_accuracy_order() {
        let h = Hierarchy::builtin();
        let r = ahp_weights(&h.alternatives["accuracy"], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let w = |l: &str| r.weight(l).unwrap();
        assert!(w("L") > w("C") && w("C") > w("T") && w("T") > w("R"));
    }

    #[test]
    fn synthesis_sums_to_one_with_multi_sensor_top() {
        let q = Hierarchy::builtin().synthesize(false).unwrap();
        assert_eq!(q.quality.len(), 9);
        assert_abs_diff_eq!(q.quality.iter().map(|x| x.1).sum::<f64>(), 1.0, epsilon = 1e-9);
        let mut ranked = q.quality.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let top: Vec<&str> = ranked[..2].iter().map(|x| x.0.as_str()).collect();
        assert_eq!(top, ["CRL", "CL"]);
    }

    #[test]
    fn synthesis_uniform_is_flat() {
        let setups = labels(4);
        let criteria = PairwiseMatrix::uniform("criteria", CRITERIA.map(String::from).to_vec()).unwrap();
        let alternatives = CRITERIA
            .iter()
            .map(|c| (c.to_string(), PairwiseMatrix::uniform(*c, setups.clone()).unwrap()))
            .collect();
        let q = synthesize_quality(&criteria, &alternatives, false).unwrap();
        for (_, v) in &q.quality {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn synthesis_aligns_permuted_labels_and_flags_mismatch() {
        let h = Hierarchy::builtin();
        let base = h.synthesize(false).unwrap();
        let mut shuffled = h.clone();
        let lat = &h.alternatives["latency"];
        let order: Vec<usize> = (0..lat.len()).rev().collect();
        shuffled.alternatives.insert("latency".into(), lat.permuted(&order));
        let again = shuffled.synthesize(false).unwrap();
        for (l, q) in &base.quality {
            assert_abs_diff_eq!(again.get(l).unwrap(), *q, epsilon = 1e-12);
        }

        let mut broken = h.clone();
        let mut m = broken.alternatives["latency"].clone();
        m.labels[0] = "TRL".into();
        broken.alternatives.insert("latency".into(), m);
        assert!(matches!(broken.synthesize(false), Err(Error::LabelMismatch(_))));

        let mut missing = h;
        missing.alternatives.remove("reliability");
        assert!(matches!(missing.synthesize(false), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn inconsistent_matrix_needs_override() {
        // a > b (9), b > c (9), but c > a (9): a maximal cycle
        let cyc = PairwiseMatrix::new(
            "latency",
            labels(3),
            vec![vec![1.0, 9.0, 1.0 / 9.0], vec![1.0 / 9.0, 1.0, 9.0], vec![9.0, 1.0 / 9.0, 1.0]],
        )
        .unwrap();
        let criteria = PairwiseMatrix::uniform("criteria", vec!["latency".into()]).unwrap();
        let alts: BTreeMap<_, _> = [("latency".to_string(), cyc)].into_iter().collect();
        assert!(matches!(
            synthesize_quality(&criteria, &alts, false),
            Err(Error::Inconsistent { .. })
        ));
        let q = synthesize_quality(&criteria, &alts, true).unwrap();
        assert_eq!(q.warnings.len(), 1);
    }
}
