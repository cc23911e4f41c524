//! Claim-amount Poisson GLMs on incremental amounts (the classical
//! cross-classified over-dispersed Poisson approach and its
//! age-period-cohort extension).
//!
//! `log E[X[k][j]] = alpha[k] + beta[j] (+ gamma[k + j])` over the whole
//! upper triangle, `j = 0` included, with `beta[0] = 0` and, for the
//! period version, `sum gamma = 0` and `sum p gamma[p] = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{FittedCell, FittedCells};
use crate::effects::EffectPath;
use crate::error::{Error, Result};
use crate::forecast::{extrapolate, ArimaMethod, Extrapolation, SeriesModel};
use crate::glm::{self, Axis, Constraint, Observation, Term};
use crate::reserving::{complete_with_increments, LowerFactors, ReserveReport};
use crate::triangle::{Mode, RunOffTriangle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmountStructure {
    #[serde(rename = "amount-ac")]
    AgeCohort,
    #[serde(rename = "amount-apc")]
    AgePeriodCohort,
}

impl AmountStructure {
    pub fn label(self) -> &'static str {
        match self {
            AmountStructure::AgeCohort => "amount-ac",
            AmountStructure::AgePeriodCohort => "amount-apc",
        }
    }

    pub fn has_period(self) -> bool {
        self == AmountStructure::AgePeriodCohort
    }

    pub fn min_m(self) -> usize {
        match self {
            AmountStructure::AgeCohort => 0,
            AmountStructure::AgePeriodCohort => 2,
        }
    }
}

impl fmt::Display for AmountStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AmountStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amount-ac" => Ok(AmountStructure::AgeCohort),
            "amount-apc" => Ok(AmountStructure::AgePeriodCohort),
            other => Err(Error::Parse(format!("unknown amount structure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmountFit {
    pub structure: AmountStructure,
    pub m: usize,
    /// `alpha[k]`, `k = 0..=m`
    pub cohort: EffectPath,
    /// `beta[j]`, `j = 0..=m`
    pub age: EffectPath,
    /// `gamma[p]`, `p = 0..=m`
    pub period: Option<EffectPath>,
    pub deviance: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub deviance_trace: Vec<f64>,
    pub excluded: Vec<(usize, usize)>,
}

impl AmountFit {
    pub fn log_mean(&self, k: usize, j: usize, period: Option<f64>) -> f64 {
        let mut eta =
            self.cohort.get(k).expect("cohort in range") + self.age.get(j).expect("age in range");
        if self.structure.has_period() {
            eta += period.expect("period effect required");
        }
        eta
    }

    pub fn fitted_value(&self, k: usize, j: usize) -> f64 {
        let period = self.period.as_ref().and_then(|g| g.get(k + j));
        self.log_mean(k, j, period).exp()
    }

    pub fn fitted_cells(&self, tri: &RunOffTriangle) -> FittedCells {
        let cells = tri
            .cells()
            .filter(|&(k, j, _)| !self.excluded.contains(&(k, j)))
            .map(|(k, j, x)| FittedCell {
                k,
                j,
                observed: x,
                fitted: self.fitted_value(k, j),
            })
            .filter(|c| c.fitted > 0.0)
            .collect();
        FittedCells {
            cells,
            n_params: self.n_params,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("fit serializes")
    }
}

pub fn fit_amount(
    structure: AmountStructure,
    tri: &RunOffTriangle,
    mode: Mode,
) -> Result<AmountFit> {
    let m = tri.m();
    if m < structure.min_m() {
        return Err(Error::TooSmall {
            structure: structure.label().into(),
            required: structure.min_m(),
            m,
        });
    }
    let excluded = tri.negative_cells();
    if mode == Mode::Strict && !excluded.is_empty() {
        return Err(Error::NonMonotone { cells: excluded });
    }
    let observations: Vec<Observation> = tri
        .cells()
        .filter(|&(_, _, x)| x >= 0.0)
        .map(|(k, j, x)| Observation {
            k,
            j,
            response: x,
            offset: 0.0,
        })
        .collect();
    let mut terms = vec![
        Term {
            axis: Axis::Cohort,
            constraint: Constraint::None,
        },
        Term {
            axis: Axis::Age,
            constraint: Constraint::FirstZero,
        },
    ];
    if structure.has_period() {
        terms.push(Term {
            axis: Axis::Period,
            constraint: Constraint::ZeroLevelAndTrend,
        });
    }
    let fitted = glm::fit(&observations, &terms)?;
    let path = |t: usize, what: &str| -> Result<EffectPath> {
        let values = (0..=m)
            .map(|l| {
                fitted.effects[t].get(&l).copied().ok_or_else(|| {
                    Error::NotIdentifiable(format!("{what} {l} has no informative cells"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EffectPath::new(0, values))
    };
    Ok(AmountFit {
        structure,
        m,
        cohort: path(0, "cohort")?,
        age: path(1, "age")?,
        period: if structure.has_period() {
            Some(path(2, "period")?)
        } else {
            None
        },
        deviance: fitted.deviance,
        n_obs: fitted.n_obs,
        n_params: fitted.n_params,
        converged: fitted.converged,
        iterations: fitted.iterations,
        deviance_trace: fitted.deviance_trace,
        excluded,
    })
}

/// Extrapolates the period effect for periods `m + 1 ..= 2m`, if the structure has one.
pub fn forecast_amount_period(
    fit: &AmountFit,
    model: SeriesModel,
) -> Result<Option<Extrapolation>> {
    fit.period
        .as_ref()
        .map(|g| extrapolate(model, ArimaMethod::default(), &g.value, 0, fit.m))
        .transpose()
}

/// Predicted increments `exp(alpha[k] + beta[j] (+ gamma-hat[k + j]))` for `k + j > m`.
pub fn predict_amount_lower(
    fit: &AmountFit,
    period: Option<&Extrapolation>,
) -> Result<LowerFactors> {
    LowerFactors::from_fn(fit.m, |k, j| {
        let gamma = if fit.structure.has_period() {
            let p = k + j;
            Some(
                period
                    .and_then(|e| e.path.get(p))
                    .ok_or_else(|| Error::MissingForecast(format!("period effect {p}")))?,
            )
        } else {
            None
        };
        Ok(fit.log_mean(k, j, gamma).exp())
    })
}

pub fn amount_reserve(
    tri: &RunOffTriangle,
    fit: &AmountFit,
    period_model: SeriesModel,
) -> Result<ReserveReport> {
    let period = forecast_amount_period(fit, period_model)?;
    let increments = predict_amount_lower(fit, period.as_ref())?;
    let warnings = period.map(|e| e.warnings).unwrap_or_default();
    Ok(complete_with_increments(
        tri,
        &increments,
        fit.structure.label(),
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::reserving::chain_ladder_reserve;

    #[test]
    fn one_cell_triangle_is_saturated() {
        let tri = RunOffTriangle::from_incremental_rows(vec![vec![42.0]], Mode::Strict).unwrap();
        let f = fit_amount(AmountStructure::AgeCohort, &tri, Mode::Strict).unwrap();
        assert!((f.fitted_value(0, 0) - 42.0).abs() < 1e-9);
        assert!(f.deviance < 1e-12);
    }

    #[test]
    fn autobi_age_cohort_replicates_chain_ladder() {
        let tri = datasets::autobi();
        let f = fit_amount(AmountStructure::AgeCohort, &tri, Mode::Strict).unwrap();
        assert_eq!(f.age.get(0), Some(0.0));
        let r = amount_reserve(&tri, &f, SeriesModel::RandomWalkDrift).unwrap();
        let cl = chain_ladder_reserve(&tri).unwrap();
        for (a, b) in r.reserves.iter().zip(&cl.reserves) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
        assert!((r.total - 31754.43).abs() < 0.01);
        assert_eq!(f.n_params, 15);
    }

    #[test]
    fn period_constraints_hold() {
        let tri = datasets::autobi();
        let f = fit_amount(AmountStructure::AgePeriodCohort, &tri, Mode::Strict).unwrap();
        let g = f.period.as_ref().unwrap();
        let sum: f64 = g.value.iter().sum();
        let trend: f64 = g
            .index
            .iter()
            .zip(&g.value)
            .map(|(&p, v)| p as f64 * v)
            .sum();
        assert!(sum.abs() < 1e-10 && trend.abs() < 1e-10);
        assert!(f.age.get(0).unwrap().abs() < 1e-10);
        let ac = fit_amount(AmountStructure::AgeCohort, &tri, Mode::Strict).unwrap();
        assert!(f.deviance <= ac.deviance);
    }

    #[test]
    fn zero_period_effect_reduces_to_age_cohort() {
        let tri = datasets::autobi();
        let mut f = fit_amount(AmountStructure::AgePeriodCohort, &tri, Mode::Strict).unwrap();
        let ac = fit_amount(AmountStructure::AgeCohort, &tri, Mode::Strict).unwrap();
        f.cohort = ac.cohort.clone();
        f.age = ac.age.clone();
        f.period = Some(EffectPath::new(0, vec![0.0; 8]));
        let fc = forecast_amount_period(&f, SeriesModel::RandomWalkDrift).unwrap();
        let with_period = predict_amount_lower(&f, fc.as_ref()).unwrap();
        let plain = predict_amount_lower(&ac, None).unwrap();
        assert_eq!(with_period, plain);
    }

    #[test]
    fn zero_effect_model_predicts_one() {
        let tri = datasets::autobi();
        let mut f = fit_amount(AmountStructure::AgeCohort, &tri, Mode::Strict).unwrap();
        f.cohort = EffectPath::new(0, vec![0.0; 8]);
        f.age = EffectPath::new(0, vec![0.0; 8]);
        let x = predict_amount_lower(&f, None).unwrap();
        assert!(x.rows.iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn apc_needs_forecast() {
        let tri = datasets::autobi();
        let f = fit_amount(AmountStructure::AgePeriodCohort, &tri, Mode::Strict).unwrap();
        assert!(matches!(
            predict_amount_lower(&f, None),
            Err(Error::MissingForecast(_))
        ));
    }
}
