//! Poisson log-link GLM over additive factor effects indexed by triangle
//! coordinates, fitted by Fisher scoring (IRLS) with step-halving.
//!
//! Linear identification constraints on the effects are eliminated by
//! substitution: the full parameter vector is written as `theta = Z beta`
//! with `Z` an orthonormal basis of the constraint null space, and IRLS
//! runs on the full-rank reduced design `X Z`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) const MAX_ITERATIONS: usize = 200;
const REL_TOL: f64 = 1e-10;
const PARAM_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

/// Which triangle coordinate indexes a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    /// development period `j`
    Age,
    /// cohort `k`
    Cohort,
    /// calendar period `k + j`
    Period,
}

impl Axis {
    fn level(self, k: usize, j: usize) -> usize {
        match self {
            Axis::Age => j,
            Axis::Cohort => k,
            Axis::Period => k + j,
        }
    }
}

/// Identification constraint applied to the estimated levels of one factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Constraint {
    None,
    /// The lowest estimated level is pinned to zero.
    FirstZero,
    /// `sum_l e_l = 0` and `sum_l l * e_l = 0` over estimated levels.
    ZeroLevelAndTrend,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub axis: Axis,
    pub constraint: Constraint,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Observation {
    pub k: usize,
    pub j: usize,
    pub response: f64,
    /// log exposure, 0 for amount models
    pub offset: f64,
}

/// Fitted effects of one factor keyed by level; levels whose cells all have
/// zero response carry `-inf`.
pub(crate) type Effects = BTreeMap<usize, f64>;

#[derive(Debug, Clone)]
pub(crate) struct FactorFit {
    pub effects: Vec<Effects>,
    pub deviance: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    pub deviance_trace: Vec<f64>,
}

/// Poisson unit deviance `2 [y log(y / mu) - (y - mu)]` with the `y = 0` limit.
pub(crate) fn unit_deviance(y: f64, mu: f64) -> f64 {
    if y == 0.0 {
        2.0 * mu
    } else {
        2.0 * (y * (y / mu).ln() - (y - mu))
    }
}

/// Orthonormal basis of `{theta : A theta = 0}`.
fn null_space(constraints: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    if constraints.nrows() == 0 {
        return DMatrix::identity(p, p);
    }
    let gram = constraints.transpose() * constraints;
    let eig = SymmetricEigen::new(gram);
    let scale = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let keep: Vec<usize> = (0..p)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-9 * scale)
        .collect();
    let mut z = DMatrix::zeros(p, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        z.set_column(c, &eig.eigenvectors.column(i));
    }
    z
}

pub(crate) fn fit(observations: &[Observation], terms: &[Term]) -> Result<FactorFit> {
    // Levels with zero total response have an MLE at -inf; their cells are
    // fitted exactly by a zero mean and leave the likelihood.
    let mut null_levels: Vec<Vec<usize>> = vec![Vec::new(); terms.len()];
    for (t, term) in terms.iter().enumerate() {
        let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
        for o in observations {
            *totals.entry(term.axis.level(o.k, o.j)).or_default() += o.response;
        }
        null_levels[t] = totals
            .into_iter()
            .filter(|&(_, s)| s == 0.0)
            .map(|(l, _)| l)
            .collect();
    }
    let is_null = |o: &Observation| {
        terms
            .iter()
            .zip(&null_levels)
            .any(|(term, nulls)| nulls.contains(&term.axis.level(o.k, o.j)))
    };
    let used: Vec<Observation> = observations
        .iter()
        .filter(|o| !is_null(o))
        .copied()
        .collect();

    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(terms.len());
    for (t, term) in terms.iter().enumerate() {
        let mut ls: Vec<usize> = used.iter().map(|o| term.axis.level(o.k, o.j)).collect();
        ls.sort_unstable();
        ls.dedup();
        let mut original: Vec<usize> = observations
            .iter()
            .map(|o| term.axis.level(o.k, o.j))
            .filter(|l| !null_levels[t].contains(l))
            .collect();
        original.sort_unstable();
        original.dedup();
        if original != ls {
            return Err(Error::NotIdentifiable(format!(
                "{:?} levels lose all informative cells",
                term.axis
            )));
        }
        levels.push(ls);
    }

    let offsets: Vec<usize> = levels
        .iter()
        .scan(0, |acc, ls| {
            let start = *acc;
            *acc += ls.len();
            Some(start)
        })
        .collect();
    let p_full: usize = levels.iter().map(Vec::len).sum();
    let column = |t: usize, level: usize| -> usize {
        offsets[t] + levels[t].binary_search(&level).expect("level present")
    };

    let mut rows: Vec<DVector<f64>> = Vec::new();
    for (t, term) in terms.iter().enumerate() {
        match term.constraint {
            Constraint::None => {}
            Constraint::FirstZero => {
                let mut r = DVector::zeros(p_full);
                r[offsets[t]] = 1.0;
                rows.push(r);
            }
            Constraint::ZeroLevelAndTrend => {
                let mut sum = DVector::zeros(p_full);
                let mut trend = DVector::zeros(p_full);
                for (i, &l) in levels[t].iter().enumerate() {
                    sum[offsets[t] + i] = 1.0;
                    trend[offsets[t] + i] = l as f64;
                }
                rows.push(sum);
                rows.push(trend);
            }
        }
    }
    let constraints = if rows.is_empty() {
        DMatrix::zeros(0, p_full)
    } else {
        DMatrix::from_fn(rows.len(), p_full, |r, c| rows[r][c])
    };
    let z = null_space(&constraints, p_full);
    let q = z.ncols();
    let n = used.len();
    if n < q {
        return Err(Error::NotIdentifiable(format!(
            "{n} observations for {q} free parameters"
        )));
    }

    let mut full = DMatrix::zeros(n, p_full);
    for (i, o) in used.iter().enumerate() {
        for (t, term) in terms.iter().enumerate() {
            full[(i, column(t, term.axis.level(o.k, o.j)))] = 1.0;
        }
    }
    let design = &full * &z;
    if q > 0 {
        let sv = design.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if min.is_nan() || min <= 1e-10 * max {
            return Err(Error::NotIdentifiable("design is rank deficient".into()));
        }
    }

    let y = DVector::from_iterator(n, used.iter().map(|o| o.response));
    let off = DVector::from_iterator(n, used.iter().map(|o| o.offset));

    // Start from the marginal log-rate of the first factor, others at zero.
    let mut theta0 = DVector::zeros(p_full);
    if let Some(first) = terms.first() {
        let mut num: BTreeMap<usize, f64> = BTreeMap::new();
        let mut den: BTreeMap<usize, f64> = BTreeMap::new();
        for o in &used {
            let l = first.axis.level(o.k, o.j);
            *num.entry(l).or_default() += o.response;
            *den.entry(l).or_default() += o.offset.exp();
        }
        for (i, l) in levels[0].iter().enumerate() {
            theta0[offsets[0] + i] = (num[l] / den[l]).ln();
        }
    }
    let mut beta = z.transpose() * theta0;

    let deviance_at = |beta: &DVector<f64>| -> (f64, DVector<f64>) {
        let eta = &off + &design * beta;
        let mu = eta.map(f64::exp);
        let d = y
            .iter()
            .zip(mu.iter())
            .map(|(&yi, &mi)| unit_deviance(yi, mi))
            .sum();
        (d, mu)
    };

    // Both terms scale with the response, so the stopping rule is scale-free.
    let tolerance = |dev: f64| REL_TOL * (dev + 1e-3 * y.sum());
    // Steps that raise the deviance by summation rounding only are still taken.
    let noise = |dev: f64| 1e-12 * dev + 1e-14 * y.sum();
    let (mut dev, mut mu) = deviance_at(&beta);
    let mut trace = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta_lin = &design * &beta;
        let working =
            DVector::from_iterator(n, (0..n).map(|i| eta_lin[i] + (y[i] - mu[i]) / mu[i]));
        let mut xtw = design.transpose();
        for (c, mut col) in xtw.column_iter_mut().enumerate() {
            col *= mu[c];
        }
        let info = &xtw * &design;
        let score = &xtw * working;
        let proposal = match info.cholesky() {
            Some(ch) => ch.solve(&score),
            None => return Err(Error::NotIdentifiable("singular information matrix".into())),
        };

        let mut step = proposal;
        let (mut new_dev, mut new_mu) = deviance_at(&step);
        let mut halvings = 0;
        while !(new_dev.is_finite() && new_dev <= dev + noise(dev)) && halvings < MAX_HALVINGS {
            step = (&step + &beta) * 0.5;
            let (d, m) = deviance_at(&step);
            new_dev = d;
            new_mu = m;
            halvings += 1;
        }
        if !new_dev.is_finite() || new_dev > dev + noise(dev) {
            // No improving step exists within reach: stay at the current point.
            converged = (dev - new_dev).abs() < tolerance(dev);
            break;
        }
        let change = (dev - new_dev).abs();
        let moved = (&step - &beta).amax();
        beta = step;
        dev = new_dev;
        mu = new_mu;
        trace.push(dev);
        // Low-count cells barely move the deviance, so parameters must settle too.
        if change < tolerance(dev) && moved < PARAM_TOL * (1.0 + beta.amax()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations });
    }

    let theta = &z * &beta;
    let effects = terms
        .iter()
        .enumerate()
        .map(|(t, _)| {
            let mut e: Effects = levels[t]
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, theta[offsets[t] + i]))
                .collect();
            for &l in &null_levels[t] {
                e.insert(l, f64::NEG_INFINITY);
            }
            e
        })
        .collect();

    Ok(FactorFit {
        effects,
        deviance: dev,
        n_obs: n,
        n_params: q,
        iterations,
        converged,
        deviance_trace: trace,
    })
}
