//! One-step Newton refinement of latent position estimates.
//!
//! Each row of the refined estimate is
//!
//! ```text
//! x_i <- x_i + [ (1/n) sum_j x_j x_j^T / (p_ij (1 - p_ij)) ]^{-1}
//!             [ (1/n) sum_j (A_ij - p_ij) x_j / (p_ij (1 - p_ij)) ]
//! ```
//!
//! with `p_ij = x_i^T x_j` clipped into `[eps, 1 - eps]`. The sum runs over
//! all `j` including `j = i` (the diagonal contributes a small bias term via
//! `A_ii = 0`); excluding the diagonal is available for comparisons against
//! the single-vertex likelihood oracle, whose sum is over `j != i`.
//!
//! Row updates are independent, so the loop over `i` is data parallel and the
//! parallel schedule is bitwise identical to the sequential one.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};

use crate::embedding::{ase, column_sums, degree_scaled_lse, Embedding, EmbeddingWarning, Method};
use crate::error::{Error, Result};
use crate::linalg::solve_spd_checked;
use crate::model::Adjacency;
use crate::parallel::{map_indices, Execution};

/// Initializer for the one-step procedure. Both satisfy the approximate
/// linearization property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initializer {
    #[default]
    Ase,
    DegreeScaledLse,
}

#[derive(Debug, Clone)]
pub struct OneStepConfig {
    /// Number of Newton sweeps; re-applies the update to its own output.
    /// Multi-step refinement is meaningful for dense graphs.
    pub steps: usize,
    /// Probabilities are clipped into [clip_epsilon, 1 - clip_epsilon].
    pub clip_epsilon: f64,
    /// Condition-number limit for the per-row Fisher block.
    pub condition_limit: f64,
    /// Include the j = i term in the row sums (the displayed formula does).
    pub include_self: bool,
    pub execution: Execution,
}

impl Default for OneStepConfig {
    fn default() -> Self {
        OneStepConfig {
            steps: 1,
            clip_epsilon: 1e-6,
            condition_limit: 1e12,
            include_self: true,
            execution: Execution::default(),
        }
    }
}

impl OneStepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "clip_epsilon = {} outside (0, 0.5)",
                self.clip_epsilon
            )));
        }
        if !(self.condition_limit > 1.0) {
            return Err(Error::InvalidConfig("condition_limit must exceed 1".into()));
        }
        Ok(())
    }
}

/// Result of a one-step pass: the refined matrix and the number of inner
/// products that hit the clip bounds.
#[derive(Debug, Clone)]
pub struct OneStepUpdate {
    pub estimate: Array2<f64>,
    pub clipped: u64,
}

/// One or more Newton sweeps over all rows, reading edges from `a`.
pub fn one_step_update(
    a: &Adjacency,
    x_tilde: &Array2<f64>,
    cfg: &OneStepConfig,
) -> Result<OneStepUpdate> {
    one_step_update_dense(&a.to_dense(), x_tilde, cfg)
}

/// As [`one_step_update`] on an explicit (not necessarily binary) matrix.
///
/// Accepting real-valued `a` keeps the score-zero fixed point testable: when
/// `A_ij` equals the clipped `p_ij` for every `j`, the correction vanishes
/// and the output equals the input exactly.
pub fn one_step_update_dense(
    a: &Array2<f64>,
    x_tilde: &Array2<f64>,
    cfg: &OneStepConfig,
) -> Result<OneStepUpdate> {
    cfg.validate()?;
    let n = x_tilde.nrows();
    if a.dim() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            got: a.dim(),
        });
    }
    let mut current = x_tilde.clone();
    let mut clipped = 0u64;
    for _ in 0..cfg.steps {
        let (next, clips) = single_sweep(a, &current, cfg)?;
        current = next;
        clipped += clips;
    }
    Ok(OneStepUpdate {
        estimate: current,
        clipped,
    })
}

fn single_sweep(
    a: &Array2<f64>,
    x: &Array2<f64>,
    cfg: &OneStepConfig,
) -> Result<(Array2<f64>, u64)> {
    let n = x.nrows();
    let d = x.ncols();
    let rows: Vec<Result<(Vec<f64>, u64)>> = map_indices(cfg.execution, n, |i| {
        update_row(a, x, i, cfg).map(|(row, clips)| (row.data.as_vec().clone(), clips))
    });
    let mut out = Array2::zeros((n, d));
    let mut clipped = 0u64;
    for (i, row) in rows.into_iter().enumerate() {
        let (values, clips) = row?;
        clipped += clips;
        for (j, v) in values.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok((out, clipped))
}

fn update_row(
    a: &Array2<f64>,
    x: &Array2<f64>,
    i: usize,
    cfg: &OneStepConfig,
) -> Result<(DVector<f64>, u64)> {
    let n = x.nrows();
    let d = x.ncols();
    let eps = cfg.clip_epsilon;
    let xi = x.row(i);
    let mut fisher = DMatrix::<f64>::zeros(d, d);
    let mut score = DVector::<f64>::zeros(d);
    let mut clips = 0u64;
    for j in 0..n {
        if !cfg.include_self && j == i {
            continue;
        }
        let xj = x.row(j);
        let raw = xi.dot(&xj);
        let p = raw.clamp(eps, 1.0 - eps);
        if p != raw {
            clips += 1;
        }
        let denom = p * (1.0 - p);
        let info_w = 1.0 / denom;
        let score_w = (a[[i, j]] - p) * info_w;
        for r in 0..d {
            let xr = xj[r];
            score[r] += score_w * xr;
            for c in r..d {
                fisher[(r, c)] += info_w * xr * xj[c];
            }
        }
    }
    let scale = 1.0 / n as f64;
    for r in 0..d {
        for c in r..d {
            let v = fisher[(r, c)] * scale;
            fisher[(r, c)] = v;
            fisher[(c, r)] = v;
        }
        score[r] *= scale;
    }
    let (delta, _cond) = solve_spd_checked(&fisher, &score, cfg.condition_limit, Some(i))?;
    let mut out = DVector::<f64>::zeros(d);
    for r in 0..d {
        let v = xi[r] + delta[r];
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: format!("one-step update of row {i}"),
            });
        }
        out[r] = v;
    }
    Ok((out, clips))
}

/// One-step estimator initialized at the ASE (or at the degree-scaled LSE).
pub fn ose_a(a: &Adjacency, d: usize, cfg: &OneStepConfig, init: Initializer) -> Result<Embedding> {
    cfg.validate()?;
    let dense = a.to_dense();
    let initial = match init {
        Initializer::Ase => ase(a, d)?,
        Initializer::DegreeScaledLse => degree_scaled_lse(a, d)?,
    };
    finish_ose_a(&dense, initial, cfg)
}

/// One-step refinement of an already computed initializer embedding; the
/// dense matrix must be the one the initializer was computed from.
pub fn finish_ose_a(
    dense: &Array2<f64>,
    initial: Embedding,
    cfg: &OneStepConfig,
) -> Result<Embedding> {
    let update = one_step_update_dense(dense, &initial.estimate, cfg)?;
    let mut warnings = initial.warnings.clone();
    if update.clipped > 0 {
        warnings.push(EmbeddingWarning::ClippedProbabilities {
            count: update.clipped,
        });
    }
    if update.estimate.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "OSE-A estimate".into(),
        });
    }
    Ok(Embedding {
        estimate: update.estimate,
        method: Method::OseA,
        eigenvalues: initial.eigenvalues.clone(),
        d: initial.d,
        warnings,
    })
}

/// Row-normalizes a one-step estimate onto the population LSE scale:
/// `y_i = x_hat_i / sqrt(x_hat_i^T (sum_j x_tilde_j))`.
pub fn lse_normalize(x_hat: &Array2<f64>, x_tilde: &Array2<f64>) -> Result<Array2<f64>> {
    if x_hat.dim() != x_tilde.dim() {
        return Err(Error::ShapeMismatch {
            expected: x_hat.dim(),
            got: x_tilde.dim(),
        });
    }
    let sums = column_sums(x_tilde);
    let mut out = x_hat.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let normalizer = x_hat.row(i).dot(&sums);
        if normalizer <= 0.0 {
            return Err(Error::NonPositiveNormalizer { vertex: i });
        }
        let scale = 1.0 / normalizer.sqrt();
        row.mapv_inplace(|v| v * scale);
    }
    Ok(out)
}

/// One-step estimator for the population LSE: the OSE-A estimate normalized
/// by its inner products with the ASE initializer.
pub fn ose_l(a: &Adjacency, d: usize, cfg: &OneStepConfig) -> Result<Embedding> {
    cfg.validate()?;
    let dense = a.to_dense();
    let initial = ase(a, d)?;
    finish_ose_l(&dense, initial, cfg)
}

/// One-step population-LSE estimate from an already computed initializer.
pub fn finish_ose_l(
    dense: &Array2<f64>,
    initial: Embedding,
    cfg: &OneStepConfig,
) -> Result<Embedding> {
    let x_tilde = initial.estimate.clone();
    let refined = finish_ose_a(dense, initial, cfg)?;
    let y = lse_normalize(&refined.estimate, &x_tilde)?;
    Ok(Embedding {
        estimate: y,
        method: Method::OseL,
        eigenvalues: refined.eigenvalues,
        d: refined.d,
        warnings: refined.warnings,
    })
}

/// Maximum likelihood estimate of a single latent position with the other
/// positions known, over the delta-truncated latent space.
///
/// Damped Fisher-scoring Newton: inner products are projected into
/// `[delta, 1 - delta]` inside the likelihood, and each step is halved until
/// the log-likelihood improves. Converges when the mean score norm drops
/// below 1e-11.
pub fn mle_single_vertex(
    a: &Adjacency,
    i: usize,
    x_others: &Array2<f64>,
    delta: f64,
) -> Result<Array1<f64>> {
    let n = a.n();
    if x_others.nrows() != n - 1 {
        return Err(Error::ShapeMismatch {
            expected: (n - 1, x_others.ncols()),
            got: x_others.dim(),
        });
    }
    let mut row = vec![0.0; n];
    a.fill_row(i, &mut row);
    let others: Vec<f64> = row
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, &v)| v)
        .collect();
    mle_single_vertex_row(&Array1::from(others), x_others, delta)
}

/// As [`mle_single_vertex`] with the (possibly fractional) incidence row
/// given explicitly; used by the score-zero oracle checks.
pub fn mle_single_vertex_row(
    a_row: &Array1<f64>,
    x_others: &Array2<f64>,
    delta: f64,
) -> Result<Array1<f64>> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "delta = {delta} outside (0, 0.5)"
        )));
    }
    let m = x_others.nrows();
    if a_row.len() != m {
        return Err(Error::ShapeMismatch {
            expected: (m, 1),
            got: (a_row.len(), 1),
        });
    }
    let d = x_others.ncols();
    const MAX_ITER: usize = 200;
    const SCORE_TOL: f64 = 1e-11;

    // Least squares warm start, then damped Fisher-scoring. Far from the
    // optimum the step is halved until the log-likelihood improves; once the
    // mean score is small the ascent gate is dropped (the improvement falls
    // below f64 resolution of the log-likelihood long before the score
    // reaches its tolerance) and plain Newton finishes quadratically.
    const PURE_NEWTON_THRESHOLD: f64 = 1e-6;
    let mut x = least_squares_row(a_row, x_others)?;
    let mut ll = log_likelihood(&x, a_row, x_others, delta);
    for _ in 0..MAX_ITER {
        let (score, fisher) = score_and_fisher(&x, a_row, x_others, delta);
        let score_norm = score.norm() / (m as f64);
        if score_norm < SCORE_TOL {
            return Ok(x);
        }
        let (step, _) = solve_spd_checked(&fisher, &score, 1e14, None)?;
        if score_norm < PURE_NEWTON_THRESHOLD {
            let mut moved = false;
            for r in 0..d {
                let next = x[r] + step[r];
                if next != x[r] {
                    moved = true;
                }
                x[r] = next;
            }
            if !moved {
                // Step below representable resolution: stationary point.
                return Ok(x);
            }
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut candidate = Array1::zeros(d);
            for r in 0..d {
                candidate[r] = x[r] + t * step[r];
            }
            let cand_ll = log_likelihood(&candidate, a_row, x_others, delta);
            if cand_ll.is_finite() && cand_ll > ll {
                x = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::MleDidNotConverge {
                iterations: MAX_ITER,
            });
        }
    }
    let (score, _) = score_and_fisher(&x, a_row, x_others, delta);
    if score.norm() / (m as f64) < SCORE_TOL {
        Ok(x)
    } else {
        Err(Error::MleDidNotConverge {
            iterations: MAX_ITER,
        })
    }
}

fn least_squares_row(a_row: &Array1<f64>, x_others: &Array2<f64>) -> Result<Array1<f64>> {
    let d = x_others.ncols();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (j, xj) in x_others.rows().into_iter().enumerate() {
        for r in 0..d {
            rhs[r] += a_row[j] * xj[r];
            for c in r..d {
                gram[(r, c)] += xj[r] * xj[c];
            }
        }
    }
    for r in 0..d {
        for c in r..d {
            gram[(c, r)] = gram[(r, c)];
        }
    }
    let (sol, _) = solve_spd_checked(&gram, &rhs, 1e14, None)?;
    Ok(Array1::from_iter(sol.iter().cloned()))
}

fn clamped_dot(x: &Array1<f64>, xj: ArrayView1<'_, f64>, delta: f64) -> f64 {
    let mut p = 0.0;
    for (a, b) in x.iter().zip(xj.iter()) {
        p += a * b;
    }
    p.clamp(delta, 1.0 - delta)
}

fn log_likelihood(x: &Array1<f64>, a_row: &Array1<f64>, x_others: &Array2<f64>, delta: f64) -> f64 {
    let mut ll = 0.0;
    for (j, xj) in x_others.rows().into_iter().enumerate() {
        let p = clamped_dot(x, xj, delta);
        ll += a_row[j] * p.ln() + (1.0 - a_row[j]) * (1.0 - p).ln();
    }
    ll
}

fn score_and_fisher(
    x: &Array1<f64>,
    a_row: &Array1<f64>,
    x_others: &Array2<f64>,
    delta: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = x_others.ncols();
    let mut score = DVector::<f64>::zeros(d);
    let mut fisher = DMatrix::<f64>::zeros(d, d);
    for (j, xj) in x_others.rows().into_iter().enumerate() {
        let p = clamped_dot(x, xj, delta);
        let denom = p * (1.0 - p);
        let sw = (a_row[j] - p) / denom;
        let fw = 1.0 / denom;
        for r in 0..d {
            score[r] += sw * xj[r];
            for c in r..d {
                fisher[(r, c)] += fw * xj[r] * xj[c];
            }
        }
    }
    for r in 0..d {
        for c in r..d {
            fisher[(c, r)] = fisher[(r, c)];
        }
    }
    (score, fisher)
}
