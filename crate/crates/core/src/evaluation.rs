//! Diagonal-holdout backtesting.
//!
//! The error incidence of a model on a held-out calendar diagonal `p` is
//!
//! ```text
//! EI = | sum_{k + j = p} (X-hat[k][j] - X[k][j]) | / sum_{k + j <= m_train} X[k][j]
//! ```
//!
//! Only cells the fitted model can predict are scored: cohorts present in
//! the training triangle, at development periods it has observed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_triangle, TriangleKind};
use crate::par::{self, Execution};
use crate::pipeline::{reserve, Model, PipelineOptions};
use crate::reserving::ReserveReport;
use crate::triangle::{Mode, RunOffTriangle};

/// One held-out observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldCell {
    pub k: usize,
    pub j: usize,
    pub incremental: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: RunOffTriangle,
    pub held: Vec<HeldCell>,
    pub n_diagonals: usize,
    full: RunOffTriangle,
}

impl HoldoutSplit {
    /// Held cells on calendar diagonal `p`.
    pub fn diagonal(&self, p: usize) -> Vec<HeldCell> {
        self.held
            .iter()
            .filter(|c| c.k + c.j == p)
            .copied()
            .collect()
    }

    /// Held cells a model fitted on `train` can predict.
    pub fn scorable(&self) -> Vec<HeldCell> {
        let mt = self.train.m();
        self.held
            .iter()
            .filter(|c| c.k <= mt && c.j <= mt)
            .copied()
            .collect()
    }

    /// Train and held cells put back together.
    pub fn reassemble(&self) -> Result<RunOffTriangle> {
        let m = self.full.m();
        let mut matrix = vec![vec![None; m + 1]; m + 1];
        for (k, j, x) in self.train.cells() {
            matrix[k][j] = Some(x);
        }
        for c in &self.held {
            matrix[c.k][c.j] = Some(c.incremental);
        }
        let tri = RunOffTriangle::from_incremental(&matrix, Mode::Lenient)?;
        Ok(match self.full.origin_label() {
            Some(label) => tri.with_origin_label(label),
            None => tri,
        })
    }

    pub fn full(&self) -> &RunOffTriangle {
        &self.full
    }
}

/// Removes the last `n_diagonals` calendar diagonals.
pub fn split(tri: &RunOffTriangle, n_diagonals: usize) -> Result<HoldoutSplit> {
    let m = tri.m();
    if n_diagonals == 0 || n_diagonals + 2 > m {
        return Err(Error::TooFewDiagonals {
            requested: n_diagonals,
            m,
        });
    }
    let train_m = m - n_diagonals;
    let held = tri
        .cells()
        .filter(|&(k, j, _)| k + j > train_m)
        .map(|(k, j, x)| HeldCell {
            k,
            j,
            incremental: x,
            cumulative: tri.cumulative(k, j),
        })
        .collect();
    Ok(HoldoutSplit {
        train: tri.truncated(train_m),
        held,
        n_diagonals,
        full: tri.clone(),
    })
}

/// `|sum(predicted - actual)| / sum of observed increments in the training triangle`.
pub fn error_incidence(predicted: &[f64], actual: &[f64], train: &RunOffTriangle) -> Result<f64> {
    let denominator = train.total();
    if denominator == 0.0 {
        return Err(Error::ZeroIncidenceDenominator);
    }
    let error: f64 = predicted.iter().zip(actual).map(|(p, a)| p - a).sum();
    Ok((error / denominator).abs())
}

/// Which amounts on the held diagonal enter the error incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidenceBasis {
    #[default]
    Cumulative,
    Incremental,
}

/// Scores a report fitted on `train` against the observed cells of diagonal `p`.
fn score_diagonal(
    report: &ReserveReport,
    train: &RunOffTriangle,
    full: &RunOffTriangle,
    p: usize,
    basis: IncidenceBasis,
) -> Result<f64> {
    let mt = train.m();
    let cells: Vec<(usize, usize)> = full
        .cells()
        .filter(|&(k, j, _)| k + j == p && k <= mt && j <= mt)
        .map(|(k, j, _)| (k, j))
        .collect();
    let (predicted, actual): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .map(|&(k, j)| match basis {
            IncidenceBasis::Cumulative => (report.cumulative(k, j), full.cumulative(k, j)),
            IncidenceBasis::Incremental => (report.incremental(k, j), full.incremental(k, j)),
        })
        .unzip();
    error_incidence(&predicted, &actual, train)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub pipeline: PipelineOptions,
    pub basis: IncidenceBasis,
    /// Refit the selected model on train + validation before test scoring.
    pub refit: bool,
    pub execution: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            pipeline: PipelineOptions::default(),
            basis: IncidenceBasis::Cumulative,
            refit: true,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: Model,
    pub diagonal: usize,
    pub ei: Option<f64>,
    pub rank: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub dataset: Option<String>,
    pub scores: Vec<ModelScore>,
}

impl RankingReport {
    pub fn score(&self, model: Model) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.model == model)
    }

    pub fn to_csv_rows(&self) -> Vec<String> {
        let name = self.dataset.as_deref().unwrap_or("");
        self.scores
            .iter()
            .map(|s| {
                let ei = s.ei.map(|v| format!("{v:.10}")).unwrap_or_default();
                format!("{name},{},{},{ei},{}", s.model, s.diagonal, s.rank)
            })
            .collect()
    }
}

/// EI values equal to ten decimals share a rank key, so pipelines that agree
/// up to rounding keep their list order.
fn rank_key(ei: f64) -> i64 {
    (ei * 1e10).round() as i64
}

/// Assigns ranks `1..=n`: ascending EI, ties and failures in list order,
/// failures last.
fn assign_ranks(scores: &mut [ModelScore]) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by_key(|&i| match scores[i].ei {
        Some(ei) => (0, rank_key(ei), i),
        None => (1, 0, i),
    });
    for (r, i) in order.into_iter().enumerate() {
        scores[i].rank = r + 1;
    }
}

fn evaluate(
    model: Model,
    train: &RunOffTriangle,
    full: &RunOffTriangle,
    p: usize,
    options: &EvalOptions,
) -> Result<f64> {
    let report = reserve(model, train, &options.pipeline)?;
    score_diagonal(&report, train, full, p, options.basis)
}

fn scored(model: Model, p: usize, result: Result<f64>) -> ModelScore {
    let (ei, failure) = match result {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ModelScore {
        model,
        diagonal: p,
        ei,
        rank: 0,
        failure,
    }
}

/// Fits each model without the last diagonal and ranks them by EI on it.
pub fn rank_models(
    tri: &RunOffTriangle,
    models: &[Model],
    options: &EvalOptions,
) -> Result<RankingReport> {
    let holdout = split(tri, 1)?;
    let p = tri.m();
    let mut scores = par::map(options.execution, models, |&model| {
        scored(model, p, evaluate(model, &holdout.train, tri, p, options))
    });
    assign_ranks(&mut scores);
    Ok(RankingReport {
        dataset: None,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: String,
    pub selected: Option<Model>,
    pub validation_ei: Option<f64>,
    pub test_ei: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BakeoffReport {
    pub dataset: Option<String>,
    /// every candidate's validation score (diagonal `m - 1`)
    pub validation: Vec<ModelScore>,
    pub families: Vec<FamilyResult>,
}

impl BakeoffReport {
    pub fn family(&self, name: &str) -> Option<&FamilyResult> {
        self.families.iter().find(|f| f.family == name)
    }
}

/// Train on all but the last two diagonals, select per family on diagonal
/// `m - 1`, then score the selection on diagonal `m`.
pub fn family_bakeoff(
    tri: &RunOffTriangle,
    families: &[(String, Vec<Model>)],
    options: &EvalOptions,
) -> Result<BakeoffReport> {
    let holdout = split(tri, 2)?;
    let m = tri.m();
    let mut candidates: Vec<Model> = Vec::new();
    for (_, models) in families {
        for &model in models {
            if !candidates.contains(&model) {
                candidates.push(model);
            }
        }
    }
    let mut validation = par::map(options.execution, &candidates, |&model| {
        scored(
            model,
            m - 1,
            evaluate(model, &holdout.train, tri, m - 1, options),
        )
    });
    assign_ranks(&mut validation);

    let selections: Vec<(String, Option<(Model, f64)>)> = families
        .iter()
        .map(|(name, models)| {
            let best = models
                .iter()
                .filter_map(|model| {
                    let s = validation.iter().find(|s| s.model == *model)?;
                    s.ei.map(|ei| (*model, ei))
                })
                .min_by_key(|&(_, ei)| rank_key(ei));
            (name.clone(), best)
        })
        .collect();

    let test_train = if options.refit {
        tri.truncated(m - 1)
    } else {
        holdout.train.clone()
    };
    let families = par::map(options.execution, &selections, |(name, best)| match best {
        None => FamilyResult {
            family: name.clone(),
            selected: None,
            validation_ei: None,
            test_ei: None,
            failure: Some("no model in the family could be fitted".into()),
        },
        Some((model, val)) => {
            let test = evaluate(*model, &test_train, tri, m, options);
            FamilyResult {
                family: name.clone(),
                selected: Some(*model),
                validation_ei: Some(*val),
                test_ei: test.as_ref().ok().copied(),
                failure: test.err().map(|e| e.to_string()),
            }
        }
    });
    Ok(BakeoffReport {
        dataset: None,
        validation,
        families,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRanking {
    pub dataset: String,
    pub ranking: Option<RankingReport>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRank {
    pub model: Model,
    pub mean_rank: f64,
    pub n_datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub datasets: Vec<DatasetRanking>,
    pub mean_ranks: Vec<MeanRank>,
}

impl CorpusReport {
    /// Flat CSV `dataset,model,diagonal,ei,rank`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,model,diagonal,ei,rank\n");
        for d in &self.datasets {
            if let Some(r) = &d.ranking {
                for row in r.to_csv_rows() {
                    out.push_str(&row);
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Mean rank per model, one column per model.
    pub fn mean_rank_table(&self) -> String {
        let header: Vec<&str> = self.mean_ranks.iter().map(|r| r.model.label()).collect();
        let values: Vec<String> = self
            .mean_ranks
            .iter()
            .map(|r| format!("{:.2}", r.mean_rank))
            .collect();
        format!(
            "model,{}\nmean_rank,{}\n",
            header.join(","),
            values.join(",")
        )
    }
}

/// Ranks `models` on every named triangle; failures are recorded per dataset.
pub fn rank_corpus(
    datasets: &[(String, Result<RunOffTriangle>)],
    models: &[Model],
    options: &EvalOptions,
) -> CorpusReport {
    let inner = EvalOptions {
        execution: Execution::Sequential,
        ..*options
    };
    let rankings = par::map(options.execution, datasets, |(name, tri)| {
        let result = tri
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|t| rank_models(t, models, &inner));
        match result {
            Ok(mut r) => {
                r.dataset = Some(name.clone());
                DatasetRanking {
                    dataset: name.clone(),
                    ranking: Some(r),
                    failure: None,
                }
            }
            Err(e) => DatasetRanking {
                dataset: name.clone(),
                ranking: None,
                failure: Some(e.to_string()),
            },
        }
    });
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in rankings.iter().filter_map(|d| d.ranking.as_ref()) {
        for (i, s) in r.scores.iter().enumerate() {
            let e = sums.entry(i).or_default();
            e.0 += s.rank as f64;
            e.1 += 1;
        }
    }
    let mean_ranks = models
        .iter()
        .enumerate()
        .map(|(i, &model)| {
            let (sum, n) = sums.get(&i).copied().unwrap_or((0.0, 0));
            MeanRank {
                model,
                mean_rank: if n > 0 { sum / n as f64 } else { f64::NAN },
                n_datasets: n,
            }
        })
        .collect();
    CorpusReport {
        datasets: rankings,
        mean_ranks,
    }
}

/// Triangle CSV files in `dir`, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Io(format!("no .csv triangles in {}", dir.display())));
    }
    Ok(files)
}

/// Loads every triangle in `dir` and ranks `models` on each.
pub fn run_corpus(
    dir: &Path,
    kind: TriangleKind,
    models: &[Model],
    options: &EvalOptions,
) -> Result<CorpusReport> {
    let datasets: Vec<(String, Result<RunOffTriangle>)> = corpus_files(dir)?
        .into_iter()
        .map(|path| {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (name, read_triangle(&path, kind, options.pipeline.mode))
        })
        .collect();
    Ok(rank_corpus(&datasets, models, options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;

    #[test]
    fn autobi_single_diagonal_split() {
        let tri = datasets::autobi();
        let s = split(&tri, 1).unwrap();
        assert_eq!(s.train.m(), 6);
        assert_eq!(s.train.n_cohorts(), 7);
        assert_eq!(s.held.len(), 8);
        assert_eq!(s.diagonal(7).len(), 8);
        // (0, 7) is beyond the training development range and (7, 0) is a new cohort.
        assert_eq!(s.scorable().len(), 6);
        assert_eq!(s.reassemble().unwrap(), tri);
    }

    #[test]
    fn split_preconditions() {
        let tri = datasets::autobi();
        assert!(matches!(split(&tri, 0), Err(Error::TooFewDiagonals { .. })));
        assert!(split(&tri, 5).is_ok());
        assert!(split(&tri, 6).is_err());
    }

    #[test]
    fn incidence_basics() {
        let train = datasets::autobi().truncated(3);
        let d = train.total();
        assert_eq!(
            error_incidence(&[1.0, 2.0], &[1.0, 2.0], &train).unwrap(),
            0.0
        );
        assert!((error_incidence(&[5.0 + d], &[5.0], &train).unwrap() - 1.0).abs() < 1e-15);
        let zero = RunOffTriangle::from_incremental_rows(vec![vec![0.0]], Mode::Strict).unwrap();
        assert_eq!(
            error_incidence(&[1.0], &[0.0], &zero),
            Err(Error::ZeroIncidenceDenominator)
        );
    }

    #[test]
    fn identical_models_tie_in_list_order() {
        let tri = datasets::autobi();
        let models = [Model::ChainLadder, Model::ChainLadder];
        let r = rank_models(&tri, &models, &EvalOptions::default()).unwrap();
        assert_eq!(r.scores[0].ei, r.scores[1].ei);
        assert_eq!(r.scores[0].rank, 1);
        assert_eq!(r.scores[1].rank, 2);
    }

    #[test]
    fn failures_rank_last() {
        // m = 3 training triangle cannot support the cohort ARIMA.
        let tri = datasets::autobi().truncated(4);
        let models = [
            Model::Hazard(crate::hazard::HazardStructure::AgeCohort),
            Model::ChainLadder,
        ];
        let r = rank_models(&tri, &models, &EvalOptions::default()).unwrap();
        assert!(r.scores[0].failure.is_some());
        assert_eq!(r.scores[0].rank, 2);
        assert_eq!(r.scores[1].rank, 1);
    }
}
