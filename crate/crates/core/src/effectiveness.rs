//! Availability from rainfall, effectiveness `E = quality x availability x reach`,
//! and system effectiveness normalized to the best effectiveness-to-cost ratio.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::ahp::QualityScores;
use crate::error::{Error, Result};
use crate::scenario::{read, Sensor, SetupCode};

pub const DEFAULT_RAIN_THRESHOLD: f64 = 0.1;

const TIME_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

/// Precipitation observations at uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct RainfallSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub mm_per_h: Vec<f64>,
}

fn parse_time(s: &str) -> Result<NaiveDateTime> {
    TIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
        .ok_or_else(|| Error::Parse(format!("bad timestamp `{s}`")))
}

impl RainfallSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, mm_per_h: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::Empty("rainfall series"));
        }
        if timestamps.len() != mm_per_h.len() {
            return Err(Error::validation("rainfall", "timestamp and value counts differ"));
        }
        if let Some(x) = mm_per_h.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::validation("precip_mm_per_h", format!("{x} is not a non-negative number")));
        }
        if timestamps.len() > 1 {
            let step = timestamps[1] - timestamps[0];
            if step <= chrono::TimeDelta::zero() {
                return Err(Error::validation("timestamp", "must be strictly increasing"));
            }
            if let Some(w) = timestamps.windows(2).find(|w| w[1] - w[0] != step) {
                return Err(Error::validation("timestamp", format!("non-uniform spacing at {}", w[1])));
            }
        }
        Ok(RainfallSeries { timestamps, mm_per_h })
    }

    /// Parses `timestamp,precip_mm_per_h` CSV.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["timestamp", "precip_mm_per_h"] {
            return Err(Error::Parse("rainfall header must be `timestamp,precip_mm_per_h`".into()));
        }
        let (mut ts, mut vs) = (Vec::new(), Vec::new());
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            ts.push(parse_time(&record[0])?);
            vs.push(
                record[1]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad value `{}`", line + 2, &record[1])))?,
            );
        }
        Self::new(ts, vs)
    }

    pub fn len(&self) -> usize {
        self.mm_per_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mm_per_h.is_empty()
    }

    /// Hourly values; sub-hourly observations are averaged within each clock hour.
    pub fn hourly(&self) -> Result<Vec<f64>> {
        if self.len() < 2 {
            return Ok(self.mm_per_h.clone());
        }
        let step = (self.timestamps[1] - self.timestamps[0]).num_seconds();
        if step == 3600 {
            return Ok(self.mm_per_h.clone());
        }
        if step > 3600 || 3600 % step != 0 {
            return Err(Error::validation(
                "timestamp",
                format!("spacing of {step} s is neither hourly nor an even fraction of an hour"),
            ));
        }
        let hour = |t: &NaiveDateTime| t.with_minute(0).and_then(|t| t.with_second(0));
        let mut out = Vec::new();
        let (mut key, mut sum, mut count) = (hour(&self.timestamps[0]), 0.0, 0usize);
        for (t, v) in self.timestamps.iter().zip(&self.mm_per_h) {
            let k = hour(t);
            if k != key {
                out.push(sum / count as f64);
                (key, sum, count) = (k, 0.0, 0);
            }
            sum += v;
            count += 1;
        }
        out.push(sum / count as f64);
        Ok(out)
    }
}

pub fn load_rainfall(path: impl AsRef<Path>) -> Result<RainfallSeries> {
    RainfallSeries::from_csv(&read(path.as_ref())?)
}

/// 10 000 synthetic hours, 688 of them above the light-rain threshold.
pub fn sample_rainfall() -> RainfallSeries {
    RainfallSeries::from_csv(include_str!("../data/rainfall_fixture.csv")).expect("shipped rainfall is valid")
}

/// Fraction of hours with precipitation strictly above `threshold`.
pub fn rain_exceedance(series: &RainfallSeries, threshold: f64) -> Result<f64> {
    let hours = series.hourly()?;
    if hours.is_empty() {
        return Err(Error::Empty("rainfall series"));
    }
    Ok(hours.iter().filter(|&&x| x > threshold).count() as f64 / hours.len() as f64)
}

/// Radar ignores rain; lidar and thermal fail above the threshold; the camera
/// additionally loses half its time to darkness.
pub fn sensor_availability(sensor: Sensor, exceedance: f64) -> f64 {
    match sensor {
        Sensor::Radar => 1.0,
        Sensor::Lidar | Sensor::Thermal => 1.0 - exceedance,
        Sensor::Camera => (1.0 - exceedance) / 2.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum AvailabilityMode {
    /// Fixed per-setup values.
    Table(BTreeMap<SetupCode, f64>),
    /// Arithmetic mean of the component sensor availabilities. Heuristic: it
    /// does not reproduce the reference multi-sensor values.
    Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityConfig {
    pub rain_threshold_mm_per_h: f64,
    pub mode: AvailabilityMode,
}

impl Default for AvailabilityConfig {
    fn default() -> Self {
        AvailabilityConfig {
            rain_threshold_mm_per_h: DEFAULT_RAIN_THRESHOLD,
            mode: AvailabilityMode::Table(reference_table().availability()),
        }
    }
}

impl AvailabilityConfig {
    pub fn rule() -> Self {
        AvailabilityConfig {
            rain_threshold_mm_per_h: DEFAULT_RAIN_THRESHOLD,
            mode: AvailabilityMode::Rule,
        }
    }
}

pub fn setup_availability(setup: SetupCode, config: &AvailabilityConfig, exceedance: f64) -> Result<f64> {
    let a = match &config.mode {
        AvailabilityMode::Table(t) => *t.get(&setup).ok_or_else(|| Error::UnknownSetup(setup.to_string()))?,
        AvailabilityMode::Rule => {
            let total: f64 = setup.sensors().map(|s| sensor_availability(s, exceedance)).sum();
            total / setup.len() as f64
        }
    };
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::validation("availability", format!("{a} for {setup} outside [0, 1]")));
    }
    Ok(a)
}

pub fn effectiveness(quality: f64, availability: f64, reach: f64) -> f64 {
    quality * availability * reach
}

/// Reach under an optional budget cap: nodes shrink in proportion when the
/// life-cycle cost exceeds the budget.
pub fn scaled_reach(nodes: u64, budget_eur: Option<f64>, lcc_eur: f64) -> f64 {
    match budget_eur {
        Some(b) if lcc_eur > 0.0 => nodes as f64 * (b / lcc_eur).min(1.0),
        _ => nodes as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeScore {
    pub setup: SetupCode,
    pub effectiveness: f64,
    pub lcc_eur: f64,
    /// E / LCC.
    pub ratio: f64,
    pub se: f64,
}

/// `se_i = (E/LCC)_i / max_j (E/LCC)_j`; the maximizer gets exactly 1.
pub fn system_effectiveness(inputs: &[(SetupCode, f64, f64)]) -> Result<Vec<SeScore>> {
    if inputs.is_empty() {
        return Err(Error::Empty("system effectiveness"));
    }
    if let Some((s, _, l)) = inputs.iter().find(|(_, _, l)| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::validation("lcc_eur", format!("{l} for {s} must be positive")));
    }
    if let Some((s, e, _)) = inputs.iter().find(|(_, e, _)| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::validation("effectiveness", format!("{e} for {s} must be non-negative")));
    }
    let ratios: Vec<f64> = inputs.iter().map(|(_, e, l)| e / l).collect();
    let best = ratios.iter().copied().fold(0.0, f64::max);
    if best <= 0.0 {
        return Err(Error::validation("effectiveness", "all setups have zero effectiveness"));
    }
    Ok(inputs
        .iter()
        .zip(ratios)
        .map(|(&(setup, effectiveness, lcc_eur), ratio)| SeScore {
            setup,
            effectiveness,
            lcc_eur,
            ratio,
            se: ratio / best,
        })
        .collect())
}

/// Everything needed to score one setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupInput {
    pub setup: SetupCode,
    pub quality: f64,
    pub availability: f64,
    pub reach: f64,
    pub lcc_eur: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectivenessRow {
    pub setup: SetupCode,
    pub quality: f64,
    pub availability: f64,
    pub reach: f64,
    pub effectiveness: f64,
    pub lcc_eur: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivenessResult {
    pub rows: Vec<EffectivenessRow>,
}

impl EffectivenessResult {
    pub fn best(&self) -> Option<&EffectivenessRow> {
        self.rows.iter().max_by(|a, b| a.se.total_cmp(&b.se))
    }

    pub fn get(&self, setup: SetupCode) -> Option<&EffectivenessRow> {
        self.rows.iter().find(|r| r.setup == setup)
    }

    /// `setup,quality,availability,reach,effectiveness,lcc_eur,se` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setup,quality,availability,reach,effectiveness,lcc_eur,se\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.setup, r.quality, r.availability, r.reach, r.effectiveness, r.lcc_eur, r.se
            ));
        }
        out
    }
}

pub fn evaluate_setups(inputs: &[SetupInput]) -> Result<EffectivenessResult> {
    for i in inputs {
        if !(i.quality.is_finite() && i.quality >= 0.0) {
            return Err(Error::validation("quality", format!("{} for {}", i.quality, i.setup)));
        }
        if !(0.0..=1.0).contains(&i.availability) {
            return Err(Error::validation("availability", format!("{} for {}", i.availability, i.setup)));
        }
        if !(i.reach.is_finite() && i.reach >= 0.0) {
            return Err(Error::validation("reach", format!("{} for {}", i.reach, i.setup)));
        }
    }
    let scored: Vec<(SetupCode, f64, f64)> = inputs
        .iter()
        .map(|i| (i.setup, effectiveness(i.quality, i.availability, i.reach), i.lcc_eur))
        .collect();
    let se = system_effectiveness(&scored)?;
    Ok(EffectivenessResult {
        rows: inputs
            .iter()
            .zip(se)
            .map(|(i, s)| EffectivenessRow {
                setup: i.setup,
                quality: i.quality,
                availability: i.availability,
                reach: i.reach,
                effectiveness: s.effectiveness,
                lcc_eur: i.lcc_eur,
                se: s.se,
            })
            .collect(),
    })
}

/// Quality per setup from synthesized AHP scores; labels must be setup codes.
pub fn quality_from_scores(scores: &QualityScores) -> Result<BTreeMap<SetupCode, f64>> {
    scores.quality.iter().map(|(l, q)| Ok((l.parse()?, *q))).collect()
}

/// One row of the reference effectiveness table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub setup: SetupCode,
    pub quality: f64,
    pub availability: f64,
    /// Columns below are optional in user tables and read as 0 when absent.
    #[serde(default)]
    pub effectiveness: f64,
    #[serde(default)]
    pub lcc_eur: f64,
    #[serde(default)]
    pub se: f64,
}

/// Published quality, availability, effectiveness, cost and SE for one city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub city: String,
    pub reach: f64,
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: ReferenceTable = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if t.rows.is_empty() {
            return Err(Error::Empty("reference table"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &t.rows {
            if !seen.insert(r.setup) {
                return Err(Error::validation("rows", format!("setup {} listed twice", r.setup)));
            }
            if !(r.quality.is_finite() && r.quality >= 0.0) {
                return Err(Error::validation("quality", format!("{} for {}", r.quality, r.setup)));
            }
            if !(0.0..=1.0).contains(&r.availability) {
                return Err(Error::validation("availability", format!("{} for {}", r.availability, r.setup)));
            }
        }
        Ok(t)
    }

    pub fn quality(&self) -> BTreeMap<SetupCode, f64> {
        self.rows.iter().map(|r| (r.setup, r.quality)).collect()
    }

    pub fn availability(&self) -> BTreeMap<SetupCode, f64> {
        self.rows.iter().map(|r| (r.setup, r.availability)).collect()
    }

    pub fn lcc(&self) -> BTreeMap<SetupCode, f64> {
        self.rows.iter().map(|r| (r.setup, r.lcc_eur)).collect()
    }

    pub fn setups(&self) -> Vec<SetupCode> {
        self.rows.iter().map(|r| r.setup).collect()
    }

    pub fn inputs(&self) -> Vec<SetupInput> {
        self.rows
            .iter()
            .map(|r| SetupInput {
                setup: r.setup,
                quality: r.quality,
                availability: r.availability,
                reach: self.reach,
                lcc_eur: r.lcc_eur,
            })
            .collect()
    }
}

pub fn load_reference_table(path: impl AsRef<Path>) -> Result<ReferenceTable> {
    ReferenceTable::from_json(&read(path.as_ref())?)
}

/// Cologne reference values for the nine evaluated setups.
pub fn reference_table() -> ReferenceTable {
    ReferenceTable::from_json(include_str!("../data/reference_effectiveness.json")).expect("shipped table is valid")
}
