//! Extrapolation of cohort and period effects.
//!
//! Cohort effects follow an ARIMA(1,1,0) with drift,
//! `g[k] = nu0 + g[k-1] + phi (g[k-1] - g[k-2]) + xi[k]`, estimated by
//! exact Gaussian maximum likelihood (default) or conditional sum of
//! squares. Period effects follow a random walk with
//! drift, `c[p] = nu1 + c[p-1] + xi[p]`. Forecasts are mean paths with the
//! innovations set to zero; Gaussian interval half-widths are attached for
//! plotting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::HazardFit;

/// Two-sided standard normal quantiles.
pub const Z80: f64 = 1.281_551_565_544_600_4;
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArimaDriftParams {
    pub phi: f64,
    pub nu0: f64,
    pub sigma: f64,
    /// number of `(diff[t-1], diff[t])` pairs
    pub n_pairs: usize,
}

impl ArimaDriftParams {
    /// `|phi| >= 1` makes the differenced process explosive.
    pub fn is_explosive(&self) -> bool {
        self.phi.abs() >= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwDriftParams {
    pub nu1: f64,
    pub sigma: f64,
}

fn check_series(series: &[f64], required: usize) -> Result<()> {
    if series.len() < required {
        return Err(Error::SeriesTooShort {
            required,
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSeries);
    }
    Ok(())
}

fn differences(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// CSS fit of ARIMA(1,1,0) with drift: least squares of `diff[t]` on
/// `diff[t-1]` with intercept. A constant regressor leaves `phi`
/// indeterminate; it is then set to 0.
pub fn fit_arima_110_drift(series: &[f64]) -> Result<ArimaDriftParams> {
    check_series(series, 4)?;
    let d = differences(series);
    let x = &d[..d.len() - 1];
    let y = &d[1..];
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - x_mean) * (b - y_mean))
        .sum();
    let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let (phi, nu0) = if sxx <= 1e-24 * scale {
        (0.0, y_mean)
    } else {
        let phi = sxy / sxx;
        (phi, y_mean - phi * x_mean)
    };
    let css: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - nu0 - phi * a).powi(2))
        .sum();
    let sigma = if x.len() > 2 {
        (css / (x.len() - 2) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ArimaDriftParams {
        phi,
        nu0,
        sigma,
        n_pairs: x.len(),
    })
}

/// Estimator for the ARIMA(1,1,0) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArimaMethod {
    /// exact likelihood of the stationary AR(1) on the differences
    #[default]
    Ml,
    Css,
}

impl fmt::Display for ArimaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArimaMethod::Ml => "ml",
            ArimaMethod::Css => "css",
        })
    }
}

impl FromStr for ArimaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(ArimaMethod::Ml),
            "css" => Ok(ArimaMethod::Css),
            other => Err(Error::Parse(format!("unknown ARIMA method {other:?}"))),
        }
    }
}

/// For fixed `phi`, the drift-mean `mu` minimising the exact sum of squares
/// `(1 - phi^2)(d[0] - mu)^2 + sum_t (d[t] - mu - phi (d[t-1] - mu))^2`, and that sum.
fn profile_mean(d: &[f64], phi: f64) -> (f64, f64) {
    let w0 = 1.0 - phi * phi;
    let c = 1.0 - phi;
    let rest = d.windows(2).map(|w| w[1] - phi * w[0]);
    let num = w0 * d[0] + c * rest.clone().sum::<f64>();
    let den = w0 + (d.len() - 1) as f64 * c * c;
    let mu = num / den;
    let ss = w0 * (d[0] - mu).powi(2) + rest.map(|r| (r - c * mu).powi(2)).sum::<f64>();
    (mu, ss)
}

/// Exact-likelihood fit of ARIMA(1,1,0) with drift, `|phi| < 1`. The
/// innovation variance and the mean of the differences are profiled out,
/// leaving a one-dimensional search over `phi`. Falls back to the CSS fit
/// when that fit is stationary and exact.
pub fn fit_arima_110_drift_ml(series: &[f64]) -> Result<ArimaDriftParams> {
    let css = fit_arima_110_drift(series)?;
    let d = differences(series);
    let scale = d.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if !css.is_explosive() && css.sigma * css.sigma * (d.len() as f64) <= 1e-24 * scale {
        return Ok(css);
    }
    let n = d.len() as f64;
    let objective = |phi: f64| {
        let (_, ss) = profile_mean(&d, phi);
        0.5 * n * (ss / n).max(f64::MIN_POSITIVE).ln() - 0.5 * (1.0 - phi * phi).ln()
    };
    const BOUND: f64 = 1.0 - 1e-9;
    const GRID: usize = 2000;
    let at = |i: usize| -BOUND + 2.0 * BOUND * i as f64 / GRID as f64;
    let best = (0..=GRID)
        .map(|i| (i, objective(at(i))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(GRID / 2);
    // The profile objective is smooth, so its minimiser is a root of
    // `n S'(phi) / (2 S) + phi / (1 - phi^2)`; `S'` follows from the envelope theorem.
    let slope = |phi: f64| {
        let (mu, ss) = profile_mean(&d, phi);
        let ds = -2.0 * phi * (d[0] - mu).powi(2)
            - 2.0
                * d.windows(2)
                    .map(|w| (w[1] - mu - phi * (w[0] - mu)) * (w[0] - mu))
                    .sum::<f64>();
        0.5 * n * ds / ss.max(f64::MIN_POSITIVE) + phi / (1.0 - phi * phi)
    };
    let (mut lo, mut hi) = (at(best.saturating_sub(1)), at((best + 1).min(GRID)));
    if slope(lo) < 0.0 && slope(hi) > 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        // minimum on the stationarity boundary
        let edge = at(best);
        lo = edge;
        hi = edge;
    }
    let phi = 0.5 * (lo + hi);
    let (mu, ss) = profile_mean(&d, phi);
    Ok(ArimaDriftParams {
        phi,
        nu0: mu * (1.0 - phi),
        sigma: (ss / n).sqrt(),
        n_pairs: d.len() - 1,
    })
}

/// Mean-path forecast from the last two observed values `[g[t-2], g[t-1]]`.
pub fn forecast_arima(params: &ArimaDriftParams, last_two: [f64; 2], h: usize) -> Vec<f64> {
    let [mut prev, mut last] = last_two;
    (0..h)
        .map(|_| {
            let next = params.nu0 + last + params.phi * (last - prev);
            prev = last;
            last = next;
            next
        })
        .collect()
}

/// Standard deviation of the `h`-step forecast error for ARIMA(1,1,0).
fn arima_forecast_sd(params: &ArimaDriftParams, h: usize) -> Vec<f64> {
    let mut psi = 0.0;
    let mut power = 1.0;
    let mut acc = 0.0;
    (0..h)
        .map(|_| {
            psi += power;
            power *= params.phi;
            acc += psi * psi;
            params.sigma * acc.sqrt()
        })
        .collect()
}

pub fn fit_rw_drift(series: &[f64]) -> Result<RwDriftParams> {
    check_series(series, 2)?;
    let d = differences(series);
    let n = d.len() as f64;
    let nu1 = d.iter().sum::<f64>() / n;
    let sigma = if d.len() > 1 {
        (d.iter().map(|v| (v - nu1).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(RwDriftParams { nu1, sigma })
}

pub fn forecast_rw(params: &RwDriftParams, last: f64, h: usize) -> Vec<f64> {
    (1..=h).map(|s| last + s as f64 * params.nu1).collect()
}

/// Time-series model used to extrapolate an effect path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesModel {
    /// ARIMA(1,1,0) with drift
    #[serde(rename = "arima110")]
    ArimaDrift,
    /// ARIMA(0,1,0) with drift
    #[serde(rename = "rwdrift")]
    RandomWalkDrift,
}

impl fmt::Display for SeriesModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesModel::ArimaDrift => "arima110",
            SeriesModel::RandomWalkDrift => "rwdrift",
        })
    }
}

impl FromStr for SeriesModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arima110" => Ok(SeriesModel::ArimaDrift),
            "rwdrift" => Ok(SeriesModel::RandomWalkDrift),
            other => Err(Error::Parse(format!("unknown series model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SeriesParams {
    Arima110(ArimaDriftParams),
    RwDrift(RwDriftParams),
}

/// Extrapolated points of one effect with interval half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPath {
    pub index: Vec<usize>,
    pub mean: Vec<f64>,
    pub half_width_80: Vec<f64>,
    pub half_width_95: Vec<f64>,
}

impl ForecastPath {
    pub fn get(&self, level: usize) -> Option<f64> {
        let first = *self.index.first()?;
        level
            .checked_sub(first)
            .and_then(|i| self.mean.get(i))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub params: SeriesParams,
    pub path: ForecastPath,
    /// e.g. an explosive AR coefficient
    pub warnings: Vec<String>,
}

/// Fits `model` on `series` (levels `first..`) and extrapolates `h` steps.
pub fn extrapolate(
    model: SeriesModel,
    method: ArimaMethod,
    series: &[f64],
    first: usize,
    h: usize,
) -> Result<Extrapolation> {
    let start = first + series.len();
    let index: Vec<usize> = (start..start + h).collect();
    let (params, mean, sd, warnings) = match model {
        SeriesModel::ArimaDrift => {
            let p = match method {
                ArimaMethod::Ml => fit_arima_110_drift_ml(series)?,
                ArimaMethod::Css => fit_arima_110_drift(series)?,
            };
            let n = series.len();
            let mean = forecast_arima(&p, [series[n - 2], series[n - 1]], h);
            let sd = arima_forecast_sd(&p, h);
            let warnings = if p.is_explosive() {
                vec![format!(
                    "ARIMA(1,1,0) coefficient phi = {:.6} is explosive",
                    p.phi
                )]
            } else {
                Vec::new()
            };
            (SeriesParams::Arima110(p), mean, sd, warnings)
        }
        SeriesModel::RandomWalkDrift => {
            let p = fit_rw_drift(series)?;
            let mean = forecast_rw(&p, *series.last().unwrap(), h);
            let sd = (1..=h).map(|s| p.sigma * (s as f64).sqrt()).collect();
            (SeriesParams::RwDrift(p), mean, sd, Vec::new())
        }
    };
    Ok(Extrapolation {
        params,
        path: ForecastPath {
            index,
            mean,
            half_width_80: sd.iter().map(|s| Z80 * s).collect(),
            half_width_95: sd.iter().map(|s| Z95 * s).collect(),
        },
        warnings,
    })
}

/// Extrapolated effects a hazard fit needs to predict the lower triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectForecast {
    /// `g[m]`
    pub cohort: Option<Extrapolation>,
    /// `c[m + 1] ..= c[2m]`
    pub period: Option<Extrapolation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastOptions {
    pub cohort_model: SeriesModel,
    pub period_model: SeriesModel,
    pub arima_method: ArimaMethod,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions {
            cohort_model: SeriesModel::ArimaDrift,
            period_model: SeriesModel::RandomWalkDrift,
            arima_method: ArimaMethod::Ml,
        }
    }
}

/// Extrapolates the cohort effect one step and the period effect `m` steps.
pub fn forecast_effects(fit: &HazardFit, options: ForecastOptions) -> Result<EffectForecast> {
    let cohort = fit
        .cohort
        .as_ref()
        .map(|g| {
            extrapolate(
                options.cohort_model,
                options.arima_method,
                &g.value,
                g.first_index().unwrap_or(0),
                1,
            )
        })
        .transpose()?;
    let period = fit
        .period
        .as_ref()
        .map(|c| {
            extrapolate(
                options.period_model,
                options.arima_method,
                &c.value,
                c.first_index().unwrap_or(1),
                fit.m,
            )
        })
        .transpose()?;
    Ok(EffectForecast { cohort, period })
}
