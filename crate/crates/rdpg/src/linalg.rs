//! Symmetric eigensolver and small dense helpers.
//!
//! Two eigensolver paths share one contract: eigenpairs ordered by descending
//! eigenvalue magnitude with a deterministic sign convention. The full path
//! (faer's blocked self-adjoint decomposition) decomposes the whole matrix;
//! the iterative path runs block subspace iteration with Rayleigh-Ritz
//! extraction, which converges quickly when the sought eigenvalues are
//! separated in magnitude from the rest of the spectrum and falls back to
//! the full path when they are not. [`Auto`] selects the full path up to
//! [`FULL_DECOMPOSITION_LIMIT`] vertices.
//!
//! [`Auto`]: EigenStrategy::Auto

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::experiment_rng;

/// Largest matrix order handled by the full decomposition under
/// [`EigenStrategy::Auto`].
pub const FULL_DECOMPOSITION_LIMIT: usize = 2000;

/// Matrix order beyond which a stalled iterative solve is an error rather
/// than a silent fall back to the (then very expensive) full path.
const FALLBACK_LIMIT: usize = 4000;

const SUBSPACE_MAX_ITER: usize = 250;
const SUBSPACE_BLOCK_EXTRA: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EigenStrategy {
    /// Full decomposition up to [`FULL_DECOMPOSITION_LIMIT`], iterative above.
    #[default]
    Auto,
    Full,
    TopK,
}

/// Top-k eigenpairs of a symmetric matrix, ordered by |eigenvalue| descending.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Signed eigenvalues, |values[0]| >= |values[1]| >= ...
    pub values: Vec<f64>,
    /// Eigenvectors as columns (n x k), unit norm, deterministic signs.
    pub vectors: Array2<f64>,
    /// Whether |values[k-1]| is numerically tied with the next eigenvalue
    /// down (no spectral gap at the cut).
    pub tie_at_cutoff: bool,
}

pub(crate) fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

/// Max |a_ij - a_ji| over the matrix.
pub(crate) fn symmetry_deviation(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    dev
}

pub(crate) fn check_symmetric(m: &Array2<f64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: (m.nrows(), m.nrows()),
            got: m.dim(),
        });
    }
    let dev = symmetry_deviation(m);
    if dev > tol {
        return Err(Error::NotSymmetric { max_deviation: dev });
    }
    Ok(())
}

/// Computes the `k` eigenpairs of largest magnitude of a symmetric matrix.
pub fn top_eigenpairs(m: &Array2<f64>, k: usize, strategy: EigenStrategy) -> Result<EigenPairs> {
    let n = m.nrows();
    if k == 0 || k > n {
        return Err(Error::DimensionTooLarge { d: k, n });
    }
    match strategy {
        EigenStrategy::Full => full_eigenpairs(m, k),
        EigenStrategy::TopK => subspace_eigenpairs(m, k),
        EigenStrategy::Auto => {
            if n <= FULL_DECOMPOSITION_LIMIT {
                full_eigenpairs(m, k)
            } else {
                subspace_eigenpairs(m, k)
            }
        }
    }
}

fn full_eigenpairs(m: &Array2<f64>, k: usize) -> Result<EigenPairs> {
    let n = m.nrows();
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[[i, j]]);
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::EigenDidNotConverge)?;
    let eigenvalues = evd.S();
    let eigenvectors = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    // Descending |lambda|; magnitude ties break toward the larger signed
    // eigenvalue so the ordering is independent of the solver backend.
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .abs()
            .partial_cmp(&eigenvalues[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                eigenvalues[b]
                    .partial_cmp(&eigenvalues[a])
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order[..k].iter().map(|&i| eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenDidNotConverge);
    }
    let mut vectors = Array2::zeros((n, k));
    for (col, &src) in order[..k].iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = eigenvectors[(row, src)];
        }
    }
    apply_sign_convention(&mut vectors);
    let tie_at_cutoff = if k < n {
        magnitudes_tied(values[k - 1], eigenvalues[order[k]])
    } else {
        false
    };
    Ok(EigenPairs {
        values,
        vectors,
        tie_at_cutoff,
    })
}

/// Block subspace iteration with Rayleigh-Ritz extraction.
///
/// Iterating on the matrix itself steers the block toward the invariant
/// subspace of largest |eigenvalue|, and the Ritz values recover the signs.
fn subspace_eigenpairs(m: &Array2<f64>, k: usize) -> Result<EigenPairs> {
    let n = m.nrows();
    let block = (k + SUBSPACE_BLOCK_EXTRA).min(n);
    if block == n {
        return full_eigenpairs(m, k);
    }
    let a = to_nalgebra(m);
    // Deterministic start block: fixed internal seed, independent of callers.
    let mut rng = experiment_rng(0x5eed_e16e);
    let mut q = DMatrix::<f64>::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    q = thin_q(q);

    let scale = a.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-11 * scale;

    for _ in 0..SUBSPACE_MAX_ITER {
        let z = &a * &q; // n x block
        let h = q.transpose() * &z; // block x block, symmetric up to rounding
        let h = (&h + h.transpose()) * 0.5;
        let small = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&x, &y| {
            small.eigenvalues[y]
                .abs()
                .partial_cmp(&small.eigenvalues[x].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(
                    small.eigenvalues[y]
                        .partial_cmp(&small.eigenvalues[x])
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
                .then(x.cmp(&y))
        });
        let rot = small.eigenvectors.select_columns(&order);
        let ritz_vectors = &q * &rot; // n x block, |theta| descending
        let theta: Vec<f64> = order.iter().map(|&i| small.eigenvalues[i]).collect();

        let image = &a * &ritz_vectors;
        let converged = (0..k).all(|j| {
            let residual = image.column(j) - ritz_vectors.column(j) * theta[j];
            residual.norm() <= tol
        });
        if converged {
            let mut vectors = Array2::zeros((n, k));
            for col in 0..k {
                for row in 0..n {
                    vectors[[row, col]] = ritz_vectors[(row, col)];
                }
            }
            apply_sign_convention(&mut vectors);
            let tie_at_cutoff = magnitudes_tied(theta[k - 1], theta[k.min(block - 1)])
                && k < block;
            return Ok(EigenPairs {
                values: theta[..k].to_vec(),
                vectors,
                tie_at_cutoff,
            });
        }
        q = thin_q(image);
    }

    if n <= FALLBACK_LIMIT {
        full_eigenpairs(m, k)
    } else {
        Err(Error::EigenDidNotConverge)
    }
}

fn thin_q(m: DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    let qr = m.qr();
    let q = qr.q();
    q.columns(0, cols).into_owned()
}

fn magnitudes_tied(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale > 0.0 && (a.abs() - b.abs()).abs() <= 1e-9 * scale
}

/// Flips each column so its largest-magnitude entry is positive.
///
/// Ties on the magnitude pick the smallest row index, which keeps the
/// convention independent of the eigensolver backend.
pub(crate) fn apply_sign_convention(vectors: &mut Array2<f64>) {
    let (n, k) = vectors.dim();
    for col in 0..k {
        let mut best_row = 0usize;
        let mut best_abs = 0.0f64;
        for row in 0..n {
            let a = vectors[[row, col]].abs();
            if a > best_abs {
                best_abs = a;
                best_row = row;
            }
        }
        if best_abs > 0.0 && vectors[[best_row, col]] < 0.0 {
            for row in 0..n {
                vectors[[row, col]] = -vectors[[row, col]];
            }
        }
    }
}

/// Cholesky-based solve of an SPD system with a condition-number gate.
///
/// Returns the solution and the spectral condition number. Indefiniteness is
/// an error, not a pseudo-inverse.
pub(crate) fn solve_spd_checked(
    matrix: &DMatrix<f64>,
    rhs: &nalgebra::DVector<f64>,
    condition_limit: f64,
    vertex: Option<usize>,
) -> Result<(nalgebra::DVector<f64>, f64)> {
    let cond = spd_condition(matrix, vertex, condition_limit)?;
    let chol = matrix
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { vertex })?;
    Ok((chol.solve(rhs), cond))
}

/// Inverse of an SPD matrix with the same gate as [`solve_spd_checked`].
pub(crate) fn invert_spd_checked(
    matrix: &DMatrix<f64>,
    condition_limit: f64,
) -> Result<DMatrix<f64>> {
    spd_condition(matrix, None, condition_limit)?;
    let chol = matrix
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { vertex: None })?;
    Ok(chol.inverse())
}

fn spd_condition(
    matrix: &DMatrix<f64>,
    vertex: Option<usize>,
    condition_limit: f64,
) -> Result<f64> {
    let eig = matrix.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::NonFinite {
            context: "eigenvalues of SPD factorization".into(),
        });
    }
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite { vertex });
    }
    let cond = max / min;
    if cond > condition_limit {
        return Err(Error::IllConditioned {
            cond,
            limit: condition_limit,
            vertex,
        });
    }
    Ok(cond)
}

/// Orthogonal matrix minimizing ||source * W - target||_F over O(d),
/// via the SVD of source^T target.
pub(crate) fn procrustes_rotation(
    source: &Array2<f64>,
    target: &Array2<f64>,
) -> Result<Array2<f64>> {
    if source.dim() != target.dim() {
        return Err(Error::ShapeMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    let d = source.ncols();
    let cross = to_nalgebra(&source.t().dot(target));
    let svd = cross.svd(true, true);
    let u = svd.u.ok_or(Error::EigenDidNotConverge)?;
    let vt = svd.v_t.ok_or(Error::EigenDidNotConverge)?;
    let w = u * vt;
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            out[[i, j]] = w[(i, j)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_symmetric_lowrank(n: usize, d: usize, noise: f64, seed: u64) -> Array2<f64> {
        let mut rng = experiment_rng(seed);
        let mut x = Array2::zeros((n, d));
        for v in x.iter_mut() {
            *v = rng.random::<f64>() * 0.6 + 0.1;
        }
        let mut m = x.dot(&x.t());
        for i in 0..n {
            for j in i..n {
                let e = noise * (rng.random::<f64>() - 0.5);
                m[[i, j]] += e;
                m[[j, i]] = m[[i, j]];
            }
        }
        m
    }

    #[test]
    fn full_orders_by_magnitude_with_signs() {
        // 2-cycle adjacency: eigenvalues {1, -1}.
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        let pairs = top_eigenpairs(&m, 2, EigenStrategy::Full).unwrap();
        assert!((pairs.values[0].abs() - 1.0).abs() < 1e-12);
        assert!((pairs.values[1].abs() - 1.0).abs() < 1e-12);
        assert!(pairs.tie_at_cutoff == false); // k == n: no cut
        // sign convention: largest-|entry| coordinate positive
        for col in 0..2 {
            let c: Vec<f64> = (0..2).map(|r| pairs.vectors[[r, col]]).collect();
            let m = c.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(m > 0.0);
        }
    }

    #[test]
    fn tie_flag_raised_at_cut() {
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        let pairs = top_eigenpairs(&m, 1, EigenStrategy::Full).unwrap();
        assert!(pairs.tie_at_cutoff);
    }

    #[test]
    fn iterative_agrees_with_full_on_gapped_spectrum() {
        let m = random_symmetric_lowrank(400, 3, 0.05, 42);
        let full = top_eigenpairs(&m, 3, EigenStrategy::Full).unwrap();
        let topk = top_eigenpairs(&m, 3, EigenStrategy::TopK).unwrap();
        for j in 0..3 {
            assert!(
                (full.values[j] - topk.values[j]).abs() <= 1e-8 * full.values[0].abs(),
                "eigenvalue {j}: {} vs {}",
                full.values[j],
                topk.values[j]
            );
            for i in 0..400 {
                assert!(
                    (full.vectors[[i, j]] - topk.vectors[[i, j]]).abs() < 1e-8,
                    "vector entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn procrustes_recovers_inverse_rotation() {
        let mut rng = experiment_rng(3);
        let mut x = Array2::zeros((7, 2));
        for v in x.iter_mut() {
            *v = rng.random::<f64>();
        }
        let theta: f64 = 1.1;
        let r = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        let rotated = x.dot(&r);
        let w = procrustes_rotation(&rotated, &x).unwrap();
        let should_be_identity = w.dot(&r);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((should_be_identity[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spd_gate_rejects_indefinite_and_ill_conditioned() {
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let rhs = nalgebra::DVector::from_element(2, 1.0);
        assert!(matches!(
            solve_spd_checked(&indefinite, &rhs, 1e12, Some(5)),
            Err(Error::NotPositiveDefinite { vertex: Some(5) })
        ));
        let stiff = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-15]);
        assert!(matches!(
            solve_spd_checked(&stiff, &rhs, 1e12, None),
            Err(Error::IllConditioned { .. })
        ));
    }
}
