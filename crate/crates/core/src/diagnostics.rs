//! Scaled deviance residuals and dispersion.
//!
//! `r = sign(X - X-hat) sqrt(dev (K - nu) / D)` with the Poisson unit
//! deviance `dev = 2 [X log(X / X-hat) - (X - X-hat)]` and `D = sum dev`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::unit_deviance;
use crate::io::write_atomic;
use crate::plot;

/// One observed cell with its fitted amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedCell {
    pub k: usize,
    pub j: usize,
    pub observed: f64,
    pub fitted: f64,
}

/// The cells entering a likelihood together with the model's parameter count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCells {
    pub cells: Vec<FittedCell>,
    pub n_params: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub k: usize,
    pub j: usize,
    pub residual: f64,
    pub deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMatrix {
    pub residuals: Vec<Residual>,
    /// total deviance D
    pub deviance: f64,
    /// D / (K - nu)
    pub dispersion: f64,
    pub n_obs: usize,
    pub n_params: usize,
}

impl ResidualMatrix {
    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        self.residuals
            .iter()
            .find(|r| r.k == k && r.j == j)
            .map(|r| r.residual)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cohort,dev,residual\n");
        for r in &self.residuals {
            out.push_str(&format!("{},{},{:.6}\n", r.k, r.j, r.residual));
        }
        out
    }

    pub fn to_svg(&self) -> String {
        plot::residual_heatmap(&self.residuals)
    }
}

pub fn scaled_deviance_residuals(fitted: &FittedCells) -> Result<ResidualMatrix> {
    let k_obs = fitted.cells.len();
    let nu = fitted.n_params;
    if k_obs <= nu {
        return Err(Error::SaturatedModel { k: k_obs, nu });
    }
    if let Some(c) = fitted
        .cells
        .iter()
        .find(|c| c.fitted.is_nan() || c.fitted <= 0.0)
    {
        return Err(Error::NonPositiveFitted(c.k, c.j));
    }
    let devs: Vec<f64> = fitted
        .cells
        .iter()
        .map(|c| unit_deviance(c.observed, c.fitted).max(0.0))
        .collect();
    let total: f64 = devs.iter().sum();
    let df = (k_obs - nu) as f64;
    let residuals = fitted
        .cells
        .iter()
        .zip(&devs)
        .map(|(c, &d)| {
            let magnitude = if total > 0.0 {
                (d * df / total).sqrt()
            } else {
                0.0
            };
            let sign = match c.observed.partial_cmp(&c.fitted) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Less) => -1.0,
                _ => 0.0,
            };
            Residual {
                k: c.k,
                j: c.j,
                residual: sign * magnitude,
                deviance: d,
            }
        })
        .collect();
    Ok(ResidualMatrix {
        residuals,
        deviance: total,
        dispersion: total / df,
        n_obs: k_obs,
        n_params: nu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Svg,
}

pub fn residual_export(res: &ResidualMatrix, path: &Path, format: ExportFormat) -> Result<()> {
    let body = match format {
        ExportFormat::Csv => res.to_csv(),
        ExportFormat::Svg => res.to_svg(),
    };
    write_atomic(path, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(k: usize, j: usize, observed: f64, fitted: f64) -> FittedCell {
        FittedCell {
            k,
            j,
            observed,
            fitted,
        }
    }

    #[test]
    fn perfect_cell_has_zero_residual() {
        let f = FittedCells {
            cells: vec![
                cell(0, 1, 5.0, 5.0),
                cell(1, 1, 3.0, 4.0),
                cell(0, 2, 2.0, 1.0),
            ],
            n_params: 1,
        };
        let r = scaled_deviance_residuals(&f).unwrap();
        assert_eq!(r.get(0, 1), Some(0.0));
        assert!(r.get(1, 1).unwrap() < 0.0);
        assert!(r.get(0, 2).unwrap() > 0.0);
    }

    #[test]
    fn symmetric_two_cells_have_unit_residuals() {
        // unit deviances of (x=2, fit=1) and (x=1, fit=2) differ; use mirrored cells
        let f = FittedCells {
            cells: vec![cell(0, 1, 2.0, 1.0), cell(1, 1, 2.0, 1.0)],
            n_params: 0,
        };
        let r = scaled_deviance_residuals(&f).unwrap();
        for x in &r.residuals {
            assert!((x.residual.abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_observation_uses_limit() {
        let f = FittedCells {
            cells: vec![cell(0, 1, 0.0, 1.5), cell(1, 1, 3.0, 2.0)],
            n_params: 1,
        };
        let r = scaled_deviance_residuals(&f).unwrap();
        assert_eq!(r.residuals[0].deviance, 3.0);
    }

    #[test]
    fn saturated_and_non_positive() {
        let f = FittedCells {
            cells: vec![cell(0, 1, 1.0, 1.0)],
            n_params: 1,
        };
        assert_eq!(
            scaled_deviance_residuals(&f),
            Err(Error::SaturatedModel { k: 1, nu: 1 })
        );
        let g = FittedCells {
            cells: vec![cell(0, 1, 1.0, 0.0), cell(0, 2, 1.0, 1.0)],
            n_params: 0,
        };
        assert_eq!(
            scaled_deviance_residuals(&g),
            Err(Error::NonPositiveFitted(0, 1))
        );
    }

    #[test]
    fn empty_matrix_exports_header_only() {
        let r = ResidualMatrix {
            residuals: Vec::new(),
            deviance: 0.0,
            dispersion: 0.0,
            n_obs: 0,
            n_params: 0,
        };
        assert_eq!(r.to_csv(), "cohort,dev,residual\n");
    }
}
