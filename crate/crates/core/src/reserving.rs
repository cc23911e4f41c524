//! Development factors, lower-triangle completion and reserves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::EffectForecast;
use crate::hazard::HazardFit;
use crate::io::format_matrix;
use crate::triangle::RunOffTriangle;

/// Margin below the pole `mu = 1 / eta` used when hazards are capped.
pub const HAZARD_CAP_MARGIN: f64 = 1e-6;

/// Development factor implied by a development rate:
/// `f = (1 + (1 - eta) mu) / (1 - eta mu)`.
pub fn hazard_to_factor(mu: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidEta(eta));
    }
    if !mu.is_finite() || eta * mu >= 1.0 {
        return Err(Error::DegenerateHazard {
            cell: None,
            mu,
            eta,
        });
    }
    Ok((1.0 + (1.0 - eta) * mu) / (1.0 - eta * mu))
}

/// Inverse of [`hazard_to_factor`]: `mu = (f - 1) / (eta f + 1 - eta)`.
pub fn factor_to_hazard(f: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidEta(eta));
    }
    if f.is_nan() || f <= 0.0 || !f.is_finite() {
        return Err(Error::InvalidFactor(f));
    }
    Ok((f - 1.0) / (eta * f + 1.0 - eta))
}

/// Pooled chain-ladder factors `sum C[k][j] / sum C[k][j-1]` over
/// `k <= m - j`, for `j = 1..=m`.
pub fn chain_ladder_factors(tri: &RunOffTriangle) -> Result<Vec<f64>> {
    let m = tri.m();
    let c = tri.cumulative_rows();
    (1..=m)
        .map(|j| {
            let num: f64 = (0..=m - j).map(|k| c[k][j]).sum();
            let den: f64 = (0..=m - j).map(|k| c[k][j - 1]).sum();
            if den == 0.0 {
                Err(Error::ZeroDenominator(j))
            } else {
                Ok(num / den)
            }
        })
        .collect()
}

/// Predicted development factors on the lower triangle: row `k` holds
/// `f[k][j]` for `j = m - k + 1 ..= m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerFactors {
    pub m: usize,
    pub rows: Vec<Vec<f64>>,
}

impl LowerFactors {
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let rows = (0..=m)
            .map(|k| (m + 1 - k..=m).map(|j| f(k, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(LowerFactors { m, rows })
    }

    /// Cohort-constant factors, `factors[j - 1]` for development `j`.
    pub fn constant(m: usize, factors: &[f64]) -> Self {
        Self::from_fn(m, |_, j| Ok(factors[j - 1])).expect("infallible")
    }

    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        let first = self.m + 1 - k;
        j.checked_sub(first)
            .and_then(|i| self.rows.get(k)?.get(i))
            .copied()
    }
}

/// Options controlling conversion of extrapolated rates to factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FactorOptions {
    /// Cap rates just below the pole instead of failing.
    pub cap_hazard: bool,
}

/// `f[k][j]` from `mu[k][j] = exp(a[j] + c[k+j] + g[k])` on the lower triangle,
/// taking unobserved period and cohort effects from `forecast`.
/// Returns the factors and any capping warnings.
pub fn predicted_factors(
    fit: &HazardFit,
    forecast: &EffectForecast,
    options: FactorOptions,
) -> Result<(LowerFactors, Vec<String>)> {
    let m = fit.m;
    let eta = fit.spec.eta;
    let structure = fit.spec.structure;
    let mut warnings = Vec::new();
    let factors = LowerFactors::from_fn(m, |k, j| {
        let p = k + j;
        let period = if structure.has_period() {
            let observed = fit.period.as_ref().and_then(|c| c.get(p));
            let extrapolated = forecast.period.as_ref().and_then(|e| e.path.get(p));
            Some(
                observed
                    .or(extrapolated)
                    .ok_or_else(|| Error::MissingForecast(format!("period effect {p}")))?,
            )
        } else {
            None
        };
        let cohort = if structure.has_cohort() {
            let observed = fit.cohort.as_ref().and_then(|g| g.get(k));
            let extrapolated = forecast.cohort.as_ref().and_then(|e| e.path.get(k));
            Some(
                observed
                    .or(extrapolated)
                    .ok_or_else(|| Error::MissingForecast(format!("cohort effect {k}")))?,
            )
        } else {
            None
        };
        let mu = fit.log_rate(j, period, cohort).exp();
        match hazard_to_factor(mu, eta) {
            Ok(f) => Ok(f),
            Err(Error::DegenerateHazard { .. }) if options.cap_hazard && eta > 0.0 => {
                let capped = (1.0 - HAZARD_CAP_MARGIN) / eta;
                warnings.push(format!(
                    "rate {mu:.6} at cell ({k}, {j}) capped to {capped:.6}"
                ));
                hazard_to_factor(capped, eta)
            }
            Err(Error::DegenerateHazard { mu, eta, .. }) => Err(Error::DegenerateHazard {
                cell: Some((k, j)),
                mu,
                eta,
            }),
            Err(e) => Err(e),
        }
    })?;
    Ok((factors, warnings))
}

/// Completed triangle and reserves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveReport {
    pub model: String,
    pub origin_label: Option<String>,
    pub m: usize,
    /// `C[k][m - k]`
    pub latest: Vec<f64>,
    /// `C-hat[k][m]`
    pub ultimate: Vec<f64>,
    pub reserves: Vec<f64>,
    pub total: f64,
    /// Square cumulative matrix: observed cells for `k + j <= m`, predictions below.
    pub completed: Vec<Vec<f64>>,
    /// Factors used below the anti-diagonal; `None` on observed cells.
    pub factors: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

impl ReserveReport {
    fn from_completed(
        tri: &RunOffTriangle,
        model: &str,
        completed: Vec<Vec<f64>>,
        warnings: Vec<String>,
    ) -> Self {
        let m = tri.m();
        let latest = tri.latest_diagonal();
        let ultimate: Vec<f64> = completed.iter().map(|r| r[m]).collect();
        let reserves: Vec<f64> = ultimate.iter().zip(&latest).map(|(u, l)| u - l).collect();
        let total = reserves.iter().sum();
        let factors = (0..=m)
            .map(|k| {
                (0..=m)
                    .map(|j| {
                        (k + j > m && completed[k][j - 1] != 0.0)
                            .then(|| completed[k][j] / completed[k][j - 1])
                    })
                    .collect()
            })
            .collect();
        ReserveReport {
            model: model.to_string(),
            origin_label: tri.origin_label().map(str::to_string),
            m,
            latest,
            ultimate,
            reserves,
            total,
            completed,
            factors,
            warnings,
        }
    }

    /// Cumulative value, observed or predicted.
    pub fn cumulative(&self, k: usize, j: usize) -> f64 {
        self.completed[k][j]
    }

    /// Incremental value, observed or predicted.
    pub fn incremental(&self, k: usize, j: usize) -> f64 {
        if j == 0 {
            self.completed[k][0]
        } else {
            self.completed[k][j] - self.completed[k][j - 1]
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Completed cumulative triangle in the triangle CSV format.
    pub fn completed_csv(&self) -> String {
        let matrix: Vec<Vec<Option<f64>>> = self
            .completed
            .iter()
            .map(|r| r.iter().copied().map(Some).collect())
            .collect();
        format_matrix(&matrix)
    }
}

/// Chain principle: `C-hat[k][j] = C[k][m-k] * prod_{l = m-k+1}^{j} f[k][l]`.
pub fn complete(
    tri: &RunOffTriangle,
    factors: &LowerFactors,
    model: &str,
    warnings: Vec<String>,
) -> ReserveReport {
    let m = tri.m();
    let mut completed = tri.cumulative_rows();
    for (k, row) in completed.iter_mut().enumerate() {
        for j in m + 1 - k..=m {
            let prev = row[j - 1];
            row.push(prev * factors.get(k, j).expect("factor for lower cell"));
        }
    }
    ReserveReport::from_completed(tri, model, completed, warnings)
}

/// Completion from predicted increments `X-hat[k][j]`, `k + j > m`.
pub fn complete_with_increments(
    tri: &RunOffTriangle,
    increments: &LowerFactors,
    model: &str,
    warnings: Vec<String>,
) -> ReserveReport {
    let m = tri.m();
    let mut completed = tri.cumulative_rows();
    for (k, row) in completed.iter_mut().enumerate() {
        for j in m + 1 - k..=m {
            let prev = row[j - 1];
            row.push(prev + increments.get(k, j).expect("increment for lower cell"));
        }
    }
    ReserveReport::from_completed(tri, model, completed, warnings)
}

pub fn chain_ladder_reserve(tri: &RunOffTriangle) -> Result<ReserveReport> {
    let f = chain_ladder_factors(tri)?;
    Ok(complete(
        tri,
        &LowerFactors::constant(tri.m(), &f),
        "cl",
        Vec::new(),
    ))
}

/// Full hazard pipeline from a fit and its effect forecasts.
pub fn hazard_reserve(
    tri: &RunOffTriangle,
    fit: &HazardFit,
    forecast: &EffectForecast,
    options: FactorOptions,
) -> Result<ReserveReport> {
    let (factors, mut warnings) = predicted_factors(fit, forecast, options)?;
    for e in forecast.cohort.iter().chain(&forecast.period) {
        warnings.extend(e.warnings.iter().cloned());
    }
    Ok(complete(
        tri,
        &factors,
        fit.spec.structure.label(),
        warnings,
    ))
}
