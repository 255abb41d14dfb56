//! Monthly deployment plan following a logistic build-up.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{CityScenario, Domain};

/// Node counts per road domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DomainCounts {
    pub urban: u64,
    pub rural: u64,
    pub highway: u64,
}

impl DomainCounts {
    pub fn get(&self, domain: Domain) -> u64 {
        match domain {
            Domain::Urban => self.urban,
            Domain::Rural => self.rural,
            Domain::Highway => self.highway,
        }
    }

    fn set(&mut self, domain: Domain, value: u64) {
        match domain {
            Domain::Urban => self.urban = value,
            Domain::Rural => self.rural = value,
            Domain::Highway => self.highway = value,
        }
    }

    pub fn total(&self) -> u64 {
        self.urban + self.rural + self.highway
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeploymentPlan {
    pub per_month: Vec<DomainCounts>,
    pub cumulative: Vec<DomainCounts>,
}

impl DeploymentPlan {
    pub fn horizon(&self) -> usize {
        self.per_month.len()
    }

    pub fn final_counts(&self) -> DomainCounts {
        self.cumulative.last().copied().unwrap_or_default()
    }

    /// `month,domain,new_nodes,cumulative` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,domain,new_nodes,cumulative\n");
        for (m, (new, cum)) in self.per_month.iter().zip(&self.cumulative).enumerate() {
            for d in Domain::ALL {
                out.push_str(&format!("{m},{d},{},{}\n", new.get(d), cum.get(d)));
            }
        }
        out
    }
}

/// Share of the build-out completed by the end of `month`.
///
/// Endpoint-normalized logistic with steepness `10 / build_months`, centred on
/// the middle of the build window: 0 at month 0, 1 at `build_months`.
pub fn rollout_fraction(month: u32, build_months: u32) -> Result<f64> {
    if build_months == 0 {
        return Err(Error::validation("build_months", "must be >= 1"));
    }
    if month > build_months {
        return Err(Error::MonthOutOfRange {
            month: month as i64,
            max: build_months as i64,
        });
    }
    if month == 0 {
        return Ok(0.0);
    }
    if month == build_months {
        return Ok(1.0);
    }
    let m = build_months as f64;
    let k = 10.0 / m;
    let sigma = |x: f64| 1.0 / (1.0 + (-k * (x - m / 2.0)).exp());
    let lo = sigma(0.0);
    Ok((sigma(month as f64) - lo) / (sigma(m) - lo))
}

pub fn deployment_schedule(scenario: &CityScenario) -> Result<DeploymentPlan> {
    scenario.validate()?;
    let horizon = scenario.horizon_months as usize;
    let build = scenario.build_months;

    // Round the cumulative curve, then difference, so totals are exact.
    let mut cumulative = vec![DomainCounts::default(); horizon];
    for (m, cum) in cumulative.iter_mut().enumerate() {
        let g = rollout_fraction((m as u32).min(build), build)?;
        for d in Domain::ALL {
            let total = scenario.nodes(d);
            cum.set(d, (total as f64 * g).round() as u64);
        }
    }
    let per_month = cumulative
        .iter()
        .enumerate()
        .map(|(m, cum)| {
            let prev = if m == 0 { DomainCounts::default() } else { cumulative[m - 1] };
            let mut new = DomainCounts::default();
            for d in Domain::ALL {
                new.set(d, cum.get(d) - prev.get(d));
            }
            new
        })
        .collect();
    Ok(DeploymentPlan { per_month, cumulative })
}
