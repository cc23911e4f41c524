//! Claim-development (hazard) models.
//!
//! The development rate `mu[k][j] = X[k][j] / E[k][j]` is modelled for
//! `j >= 1` with a Poisson likelihood, log link and `log E` offset:
//!
//! ```text
//! log mu[k][j] = a[j] (+ c[k + j]) (+ g[k])
//! ```
//!
//! Identification: age-cohort pins `g[0] = 0`, age-period pins `c[1] = 0`,
//! age-period-cohort uses `sum g = 0`, `sum k g[k] = 0` and `c[1] = 0`.
//! Cohort `m` has no development cell past `j = 0`, so `g` is estimated
//! for cohorts `0..m` only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{FittedCell, FittedCells};
use crate::effects::EffectPath;
use crate::error::{Error, Result};
use crate::glm::{self, Axis, Constraint, Observation, Term};
use crate::triangle::{ExposureTriangle, HazardTriangle, Mode, RunOffTriangle};

/// The four preset additive structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HazardStructure {
    #[serde(rename = "a")]
    Age,
    #[serde(rename = "ac")]
    AgeCohort,
    #[serde(rename = "ap")]
    AgePeriod,
    #[serde(rename = "apc")]
    AgePeriodCohort,
}

impl HazardStructure {
    pub const ALL: [HazardStructure; 4] = [
        HazardStructure::Age,
        HazardStructure::AgeCohort,
        HazardStructure::AgePeriod,
        HazardStructure::AgePeriodCohort,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HazardStructure::Age => "a",
            HazardStructure::AgeCohort => "ac",
            HazardStructure::AgePeriod => "ap",
            HazardStructure::AgePeriodCohort => "apc",
        }
    }

    pub fn has_cohort(self) -> bool {
        matches!(
            self,
            HazardStructure::AgeCohort | HazardStructure::AgePeriodCohort
        )
    }

    pub fn has_period(self) -> bool {
        matches!(
            self,
            HazardStructure::AgePeriod | HazardStructure::AgePeriodCohort
        )
    }

    /// Smallest triangle size `m` the structure can be fitted on.
    pub fn min_m(self) -> usize {
        match self {
            HazardStructure::Age => 1,
            HazardStructure::AgeCohort | HazardStructure::AgePeriod => 2,
            HazardStructure::AgePeriodCohort => 3,
        }
    }

    fn terms(self) -> Vec<Term> {
        let mut terms = vec![Term {
            axis: Axis::Age,
            constraint: Constraint::None,
        }];
        if self.has_period() {
            terms.push(Term {
                axis: Axis::Period,
                constraint: Constraint::FirstZero,
            });
        }
        match self {
            HazardStructure::AgeCohort => terms.push(Term {
                axis: Axis::Cohort,
                constraint: Constraint::FirstZero,
            }),
            HazardStructure::AgePeriodCohort => terms.push(Term {
                axis: Axis::Cohort,
                constraint: Constraint::ZeroLevelAndTrend,
            }),
            _ => {}
        }
        terms
    }
}

impl fmt::Display for HazardStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HazardStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(HazardStructure::Age),
            "ac" => Ok(HazardStructure::AgeCohort),
            "ap" => Ok(HazardStructure::AgePeriod),
            "apc" => Ok(HazardStructure::AgePeriodCohort),
            other => Err(Error::Parse(format!("unknown hazard structure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub structure: HazardStructure,
    pub eta: f64,
}

impl ModelSpec {
    pub fn new(structure: HazardStructure) -> Self {
        ModelSpec {
            structure,
            eta: 0.5,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }
}

/// A fitted hazard model. Effects are on the log scale; a level whose cells
/// all have zero increments carries `-inf` (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardFit {
    pub spec: ModelSpec,
    pub m: usize,
    /// `a[j]`, `j = 1..=m`
    pub age: EffectPath,
    /// `c[p]`, `p = 1..=m`
    pub period: Option<EffectPath>,
    /// `g[k]`, `k = 0..m`
    pub cohort: Option<EffectPath>,
    pub deviance: f64,
    /// number of cells in the likelihood (K)
    pub n_obs: usize,
    /// free parameters after constraints (nu)
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub deviance_trace: Vec<f64>,
    /// cells given zero weight in lenient mode
    pub excluded: Vec<(usize, usize)>,
}

impl HazardFit {
    /// `log mu` for any cell given the period and cohort effects to use.
    pub fn log_rate(&self, j: usize, period: Option<f64>, cohort: Option<f64>) -> f64 {
        let mut eta = self.age.get(j).expect("age effect in range");
        if self.spec.structure.has_period() {
            eta += period.expect("period effect required");
        }
        if self.spec.structure.has_cohort() {
            eta += cohort.expect("cohort effect required");
        }
        eta
    }

    /// Fitted rate on an upper-triangle cell.
    pub fn fitted_rate(&self, k: usize, j: usize) -> f64 {
        let period = self.period.as_ref().and_then(|p| p.get(k + j));
        let cohort = self.cohort.as_ref().and_then(|g| g.get(k));
        self.log_rate(j, period, cohort).exp()
    }

    /// Fitted rates on every upper-triangle cell with `j >= 1`.
    pub fn fitted_hazard(&self) -> HazardTriangle {
        let values = (0..=self.m)
            .map(|k| {
                (1..=self.m - k)
                    .map(|j| Some(self.fitted_rate(k, j)))
                    .collect()
            })
            .collect();
        HazardTriangle::from_values(self.spec.eta, self.m, values)
    }

    /// Observed and fitted amounts (`E * mu`) on the cells in the likelihood.
    pub fn fitted_cells(&self, tri: &RunOffTriangle) -> Result<FittedCells> {
        let exposure = tri.exposure(self.spec.eta)?;
        let mut cells = Vec::new();
        for (k, j, x) in tri.cells().filter(|c| c.1 >= 1) {
            if self.excluded.contains(&(k, j)) {
                continue;
            }
            let mu = self.fitted_rate(k, j);
            if mu == 0.0 {
                continue;
            }
            cells.push(FittedCell {
                k,
                j,
                observed: x,
                fitted: exposure.get(k, j).unwrap() * mu,
            });
        }
        Ok(FittedCells {
            cells,
            n_params: self.n_params,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("fit serializes")
    }
}

/// Column-wise ratio of sums `sum_k X[k][j] / sum_k E[k][j]`, the age-only
/// Poisson MLE on the linear scale, for `j = 1..=m`.
pub fn fit_age_closed_form(haz: &HazardTriangle, exposure: &ExposureTriangle) -> Result<Vec<f64>> {
    let m = exposure.m();
    (1..=m)
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..=m - j {
                if let (Some(mu), Some(e)) = (haz.get(k, j), exposure.get(k, j)) {
                    num += mu * e;
                    den += e;
                }
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::EmptyColumn(j))
            }
        })
        .collect()
}

/// Cells that leave the likelihood: negative increments or non-positive exposure.
fn offending_cells(tri: &RunOffTriangle, exposure: &ExposureTriangle) -> Vec<(usize, usize)> {
    tri.cells()
        .filter(|&(k, j, x)| j >= 1 && (x < 0.0 || exposure.get(k, j).unwrap() <= 0.0))
        .map(|(k, j, _)| (k, j))
        .collect()
}

pub fn fit(spec: ModelSpec, tri: &RunOffTriangle, mode: Mode) -> Result<HazardFit> {
    let structure = spec.structure;
    let m = tri.m();
    if m < structure.min_m() {
        return Err(Error::TooSmall {
            structure: structure.label().into(),
            required: structure.min_m(),
            m,
        });
    }
    let exposure = tri.exposure(spec.eta)?;
    if mode == Mode::Strict {
        let negative = tri.negative_cells();
        if !negative.is_empty() {
            return Err(Error::NonMonotone { cells: negative });
        }
        let zero = exposure.zero_cells();
        if !zero.is_empty() {
            return Err(Error::ZeroExposure { cells: zero });
        }
    }
    let excluded = offending_cells(tri, &exposure);
    let observations: Vec<Observation> = tri
        .cells()
        .filter(|&(k, j, _)| j >= 1 && !excluded.contains(&(k, j)))
        .map(|(k, j, x)| Observation {
            k,
            j,
            response: x,
            offset: exposure.get(k, j).unwrap().ln(),
        })
        .collect();

    let terms = structure.terms();
    let fitted = glm::fit(&observations, &terms)?;

    let path = |t: usize, first: usize, last: usize, what: &str| -> Result<EffectPath> {
        let values = (first..=last)
            .map(|l| {
                fitted.effects[t].get(&l).copied().ok_or_else(|| {
                    Error::NotIdentifiable(format!("{what} {l} has no informative cells"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EffectPath::new(first, values))
    };

    let age = path(0, 1, m, "age")?;
    let mut next = 1;
    let period = if structure.has_period() {
        next += 1;
        Some(path(1, 1, m, "period")?)
    } else {
        None
    };
    let cohort = if structure.has_cohort() {
        Some(path(next, 0, m - 1, "cohort")?)
    } else {
        None
    };

    Ok(HazardFit {
        spec,
        m,
        age,
        period,
        cohort,
        deviance: fitted.deviance,
        n_obs: fitted.n_obs,
        n_params: fitted.n_params,
        converged: fitted.converged,
        iterations: fitted.iterations,
        deviance_trace: fitted.deviance_trace,
        excluded,
    })
}
