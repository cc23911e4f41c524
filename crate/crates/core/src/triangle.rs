//! Run-off triangles, exposures and empirical claim-development rates.
//!
//! A triangle of size `m` holds incremental amounts `X[k][j]` for cohorts
//! (accident periods) `k = 0..=m` and development periods `j = 0..=m` with
//! `k + j <= m`. Row `k` therefore has `m + 1 - k` cells. Calendar periods
//! are the diagonals `k + j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validation policy for negative increments and zero exposures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Offending cells are errors.
    #[default]
    Strict,
    /// Offending cells are reported and get zero weight in likelihoods.
    Lenient,
}

/// Upper-triangular array of incremental claim amounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOffTriangle {
    m: usize,
    rows: Vec<Vec<f64>>,
    origin_label: Option<String>,
}

impl RunOffTriangle {
    /// Builds a triangle from incremental rows; row `k` must have `m + 1 - k` entries.
    pub fn from_incremental_rows(rows: Vec<Vec<f64>>, mode: Mode) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::RaggedInput("triangle has no rows".into()));
        }
        let m = n - 1;
        for (k, row) in rows.iter().enumerate() {
            if row.len() != m + 1 - k {
                return Err(Error::RaggedInput(format!(
                    "row {k} has {} cells, expected {}",
                    row.len(),
                    m + 1 - k
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(k, j));
            }
        }
        let tri = RunOffTriangle {
            m,
            rows,
            origin_label: None,
        };
        let negative = tri.negative_cells();
        if mode == Mode::Strict && !negative.is_empty() {
            return Err(Error::NonMonotone { cells: negative });
        }
        Ok(tri)
    }

    /// Builds a triangle from incremental amounts laid out in a square matrix
    /// with `None` for unobserved cells.
    pub fn from_incremental(matrix: &[Vec<Option<f64>>], mode: Mode) -> Result<Self> {
        Self::from_incremental_rows(triangular_rows(matrix)?, mode)
    }

    /// Builds a triangle from cumulative amounts laid out in a square matrix
    /// with `None` for unobserved cells. Decreasing cumulative values are
    /// errors in strict mode and are kept (as negative increments) otherwise.
    pub fn from_cumulative(matrix: &[Vec<Option<f64>>], mode: Mode) -> Result<Self> {
        let cumulative = triangular_rows(matrix)?;
        let rows = cumulative
            .iter()
            .map(|row| {
                let mut prev = 0.0;
                row.iter()
                    .map(|&c| {
                        let x = c - prev;
                        prev = c;
                        x
                    })
                    .collect()
            })
            .collect();
        Self::from_incremental_rows(rows, mode)
    }

    pub fn with_origin_label(mut self, label: impl Into<String>) -> Self {
        self.origin_label = Some(label.into());
        self
    }

    pub fn origin_label(&self) -> Option<&str> {
        self.origin_label.as_deref()
    }

    /// Largest cohort / development index.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_cohorts(&self) -> usize {
        self.m + 1
    }

    pub fn is_present(&self, k: usize, j: usize) -> bool {
        k <= self.m && j <= self.m - k
    }

    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        self.rows.get(k).and_then(|r| r.get(j)).copied()
    }

    /// Incremental amount at an observed cell.
    ///
    /// Panics if `(k, j)` lies outside the triangle.
    pub fn incremental(&self, k: usize, j: usize) -> f64 {
        self.rows[k][j]
    }

    /// Cumulative amount `C[k][j] = sum_{l <= j} X[k][l]` at an observed cell.
    pub fn cumulative(&self, k: usize, j: usize) -> f64 {
        self.rows[k][..=j].iter().sum()
    }

    pub fn incremental_rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn cumulative_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, &x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect()
    }

    /// Iterates observed cells as `(k, j, X_kj)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().enumerate().map(move |(j, &x)| (k, j, x)))
    }

    pub fn n_cells(&self) -> usize {
        (self.m + 1) * (self.m + 2) / 2
    }

    /// Sum of every observed incremental amount.
    pub fn total(&self) -> f64 {
        self.rows.iter().flatten().sum()
    }

    /// Latest observed cumulative value `C[k][m - k]` per cohort.
    pub fn latest_diagonal(&self) -> Vec<f64> {
        (0..=self.m)
            .map(|k| self.cumulative(k, self.m - k))
            .collect()
    }

    /// Cells with a negative increment.
    pub fn negative_cells(&self) -> Vec<(usize, usize)> {
        self.cells()
            .filter(|&(_, _, x)| x < 0.0)
            .map(|(k, j, _)| (k, j))
            .collect()
    }

    /// Multiplies every cell by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        RunOffTriangle {
            m: self.m,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|x| x * factor).collect())
                .collect(),
            origin_label: self.origin_label.clone(),
        }
    }

    /// The triangle made of the cells with `k + j <= new_m`.
    ///
    /// Panics if `new_m > m`.
    pub fn truncated(&self, new_m: usize) -> Self {
        assert!(new_m <= self.m, "cannot grow a triangle by truncation");
        RunOffTriangle {
            m: new_m,
            rows: (0..=new_m)
                .map(|k| self.rows[k][..=new_m - k].to_vec())
                .collect(),
            origin_label: self.origin_label.clone(),
        }
    }

    /// Square matrix of cumulative values, `None` below the anti-diagonal.
    pub fn cumulative_matrix(&self) -> Vec<Vec<Option<f64>>> {
        square(&self.cumulative_rows(), self.m)
    }

    /// Square matrix of incremental values, `None` below the anti-diagonal.
    pub fn incremental_matrix(&self) -> Vec<Vec<Option<f64>>> {
        square(&self.rows, self.m)
    }

    /// Exposures `E[k][j] = C[k][j-1] + eta * X[k][j]` for `j >= 1`.
    pub fn exposure(&self, eta: f64) -> Result<ExposureTriangle> {
        check_eta(eta)?;
        let values = self
            .rows
            .iter()
            .map(|row| {
                let mut prior = 0.0;
                let mut out = Vec::with_capacity(row.len().saturating_sub(1));
                for (j, &x) in row.iter().enumerate() {
                    if j >= 1 {
                        out.push(prior + eta * x);
                    }
                    prior += x;
                }
                out
            })
            .collect();
        Ok(ExposureTriangle {
            eta,
            m: self.m,
            values,
        })
    }

    /// Empirical claim development `X[k][j] / E[k][j]` for `j >= 1`.
    ///
    /// In strict mode a zero exposure is an error; in lenient mode the cell
    /// is left empty.
    pub fn empirical_hazard(&self, eta: f64, mode: Mode) -> Result<HazardTriangle> {
        let exposure = self.exposure(eta)?;
        let zero = exposure.zero_cells();
        if mode == Mode::Strict && !zero.is_empty() {
            return Err(Error::ZeroExposure { cells: zero });
        }
        let values = self
            .rows
            .iter()
            .zip(&exposure.values)
            .map(|(row, e_row)| {
                e_row
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| (e > 0.0).then(|| row[i + 1] / e))
                    .collect()
            })
            .collect();
        Ok(HazardTriangle {
            eta,
            m: self.m,
            values,
        })
    }

    /// Lexis re-indexing: rows are development periods, columns calendar periods.
    pub fn occurrence_view(&self) -> OccurrenceView {
        let n = self.m + 1;
        let mut cells = vec![vec![None; n]; n];
        for (k, j, x) in self.cells() {
            cells[j][k + j] = Some(x);
        }
        OccurrenceView { cells }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidEta(eta))
    }
}

fn square(rows: &[Vec<f64>], m: usize) -> Vec<Vec<Option<f64>>> {
    rows.iter()
        .map(|row| (0..=m).map(|j| row.get(j).copied()).collect())
        .collect()
}

/// Extracts the upper-left triangle of a masked matrix, rejecting any other mask.
fn triangular_rows(matrix: &[Vec<Option<f64>>]) -> Result<Vec<Vec<f64>>> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::RaggedInput("triangle has no rows".into()));
    }
    let m = n - 1;
    matrix
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let want = m + 1 - k;
            let observed = row.iter().take_while(|c| c.is_some()).count();
            if observed != want || row.iter().skip(observed).any(Option::is_some) {
                return Err(Error::RaggedInput(format!(
                    "row {k}: expected exactly the first {want} cells observed"
                )));
            }
            Ok(row.iter().take(want).map(|c| c.unwrap()).collect())
        })
        .collect()
}

/// Exposures for development periods `j >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureTriangle {
    eta: f64,
    m: usize,
    /// `values[k][j - 1]`.
    values: Vec<Vec<f64>>,
}

impl ExposureTriangle {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Exposure at `(k, j)`, `j >= 1`.
    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        if j == 0 {
            return None;
        }
        self.values.get(k).and_then(|r| r.get(j - 1)).copied()
    }

    /// Cells with `E <= 0`.
    pub fn zero_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, row) in self.values.iter().enumerate() {
            for (i, &e) in row.iter().enumerate() {
                if e <= 0.0 {
                    out.push((k, i + 1));
                }
            }
        }
        out
    }
}

/// Empirical claim development rates for `j >= 1`; `None` marks a cell with
/// no usable exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardTriangle {
    eta: f64,
    m: usize,
    values: Vec<Vec<Option<f64>>>,
}

impl HazardTriangle {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        if j == 0 {
            return None;
        }
        self.values
            .get(k)
            .and_then(|r| r.get(j - 1))
            .copied()
            .flatten()
    }

    pub(crate) fn from_values(eta: f64, m: usize, values: Vec<Vec<Option<f64>>>) -> Self {
        HazardTriangle { eta, m, values }
    }
}

/// Triangle cells arranged by development period (rows) and calendar
/// period (columns); each diagonal of this matrix is one cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceView {
    pub cells: Vec<Vec<Option<f64>>>,
}

impl OccurrenceView {
    /// Inverse of [`RunOffTriangle::occurrence_view`].
    pub fn to_triangle(&self) -> Result<RunOffTriangle> {
        let n = self.cells.len();
        let m = n
            .checked_sub(1)
            .ok_or_else(|| Error::RaggedInput("occurrence view has no rows".into()))?;
        let mut matrix = vec![vec![None; n]; n];
        for (j, row) in self.cells.iter().enumerate() {
            for (p, cell) in row.iter().enumerate() {
                if let Some(x) = cell {
                    if p < j || p > m {
                        return Err(Error::RaggedInput(format!(
                            "cell at age {j}, period {p} has no cohort"
                        )));
                    }
                    matrix[p - j][j] = Some(*x);
                }
            }
        }
        RunOffTriangle::from_incremental(&matrix, Mode::Lenient)
    }
}
