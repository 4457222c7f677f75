//! Asymptotic covariance evaluators and vertex-wise confidence intervals.
//!
//! All four evaluators integrate over a finitely supported distribution: a
//! block model gives the exact limit (atoms nu_k, weights pi_k), while a
//! latent matrix gives the finite-n empirical version (rows, weights 1/n).
//! In the notation of the limit theorems:
//!
//! - `sigma_ase`: ASE row covariance Sigma(x)
//! - `g_matrix`: Fisher-type precision G(x); its inverse is the efficient
//!   (one-step / single-vertex MLE) covariance
//! - `sigma_lse`: LSE row covariance Sigma~(x)
//! - `g_lse`: one-step population-LSE covariance G~(x)
//!
//! Sigma - G^{-1} and Sigma~ - G~ are positive semidefinite for every x in
//! the latent space, which is the dominance the one-step estimators achieve.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::embedding::{Embedding, Method};
use crate::error::{Error, Result};
use crate::linalg::{invert_spd_checked, to_nalgebra};
use crate::model::{LatentPositions, SbmSpec};

const CONDITION_LIMIT: f64 = 1e12;

/// Finitely supported distribution on the latent space.
#[derive(Debug, Clone)]
pub struct DiscreteSupport {
    points: Array2<f64>,
    weights: Vec<f64>,
}

impl DiscreteSupport {
    pub fn new(points: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.nrows() != weights.len() || points.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "{} support points with {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteSupport { points, weights })
    }

    /// Exact limit distribution of a block model.
    pub fn from_sbm(spec: &SbmSpec) -> Self {
        DiscreteSupport {
            points: spec.nu().clone(),
            weights: spec.pi().to_vec(),
        }
    }

    /// Empirical distribution of the rows of a latent matrix.
    pub fn from_latent(x: &LatentPositions) -> Self {
        let n = x.n();
        DiscreteSupport {
            points: x.matrix().clone(),
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    fn atoms(&self) -> impl Iterator<Item = (ArrayView1<'_, f64>, f64)> {
        self.points
            .rows()
            .into_iter()
            .zip(self.weights.iter().copied())
    }

    /// First moment of the support.
    pub fn mean(&self) -> Array1<f64> {
        let mut mu = Array1::zeros(self.d());
        for (point, w) in self.atoms() {
            mu.scaled_add(w, &point);
        }
        mu
    }
}

fn check_point(x: ArrayView1<'_, f64>, support: &DiscreteSupport) -> Result<()> {
    if x.len() != support.d() {
        return Err(Error::ShapeMismatch {
            expected: (1, support.d()),
            got: (1, x.len()),
        });
    }
    Ok(())
}

fn edge_moments(
    x: ArrayView1<'_, f64>,
    point: ArrayView1<'_, f64>,
    rho: f64,
) -> Result<(f64, f64)> {
    let t = x.dot(&point);
    if !(t > 0.0 && t < 1.0) || !(rho * t < 1.0) {
        return Err(Error::InvalidInput(format!(
            "inner product {t} (rho {rho}) leaves (0, 1) over the support"
        )));
    }
    Ok((t, 1.0 - rho * t))
}

/// Fisher-type precision G(x) = E[x1 x1^T / (x^T x1 (1 - rho x^T x1))].
pub fn g_matrix(x: ArrayView1<'_, f64>, support: &DiscreteSupport, rho: f64) -> Result<Array2<f64>> {
    check_point(x, support)?;
    let d = support.d();
    let mut g = Array2::zeros((d, d));
    for (point, w) in support.atoms() {
        let (t, q) = edge_moments(x, point, rho)?;
        let scale = w / (t * q);
        rank_one_add(&mut g, point, scale);
    }
    Ok(g)
}

/// ASE row covariance
/// Sigma(x) = Delta^{-1} E[(x1^T x)(1 - rho x1^T x) x1 x1^T] Delta^{-1}.
pub fn sigma_ase(
    x: ArrayView1<'_, f64>,
    support: &DiscreteSupport,
    rho: f64,
) -> Result<Array2<f64>> {
    check_point(x, support)?;
    let d = support.d();
    let mut second_moment = Array2::zeros((d, d));
    let mut middle = Array2::zeros((d, d));
    for (point, w) in support.atoms() {
        let (t, q) = edge_moments(x, point, rho)?;
        rank_one_add(&mut second_moment, point, w);
        rank_one_add(&mut middle, point, w * t * q);
    }
    let delta_inv = invert(&second_moment)?;
    Ok(delta_inv.dot(&middle).dot(&delta_inv))
}

/// LSE row covariance Sigma~(x) of the limit theorem for the Laplacian
/// spectral embedding.
pub fn sigma_lse(
    x: ArrayView1<'_, f64>,
    support: &DiscreteSupport,
    rho: f64,
) -> Result<Array2<f64>> {
    check_point(x, support)?;
    let d = support.d();
    let mu = support.mean();
    let mu_x = mu.dot(&x);
    if mu_x <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "mu^T x = {mu_x} must be positive"
        )));
    }
    let mut delta_tilde = Array2::zeros((d, d));
    let mut middle = Array2::zeros((d, d));
    for (point, w) in support.atoms() {
        let (t, q) = edge_moments(x, point, rho)?;
        let mu_point = mu.dot(&point);
        if mu_point <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "mu^T x1 = {mu_point} must be positive over the support"
            )));
        }
        rank_one_add(&mut delta_tilde, point, w / mu_point);
        rank_one_add(&mut middle, point, w * t * q / (mu_x * mu_point * mu_point));
    }
    let left = invert(&delta_tilde)? - &outer(x, mu.view()).mapv(|v| v / (2.0 * mu_x));
    Ok(left.dot(&middle).dot(&left.t()))
}

/// One-step population-LSE covariance
/// G~(x) = (mu^T x)^{-1} (I - x mu^T / (2 mu^T x)) G(x)^{-1} (...)^T.
pub fn g_lse(x: ArrayView1<'_, f64>, support: &DiscreteSupport, rho: f64) -> Result<Array2<f64>> {
    check_point(x, support)?;
    let d = support.d();
    let mu = support.mean();
    let mu_x = mu.dot(&x);
    if mu_x <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "mu^T x = {mu_x} must be positive"
        )));
    }
    let g_inv = invert(&g_matrix(x, support, rho)?)?;
    let mut left = Array2::eye(d);
    left -= &outer(x, mu.view()).mapv(|v| v / (2.0 * mu_x));
    Ok(left.dot(&g_inv).dot(&left.t()).mapv(|v| v / mu_x))
}

fn rank_one_add(acc: &mut Array2<f64>, v: ArrayView1<'_, f64>, scale: f64) {
    let d = v.len();
    for r in 0..d {
        let vr = v[r] * scale;
        for c in 0..d {
            acc[[r, c]] += vr * v[c];
        }
    }
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    let mut m = Array2::zeros((a.len(), b.len()));
    for r in 0..a.len() {
        for c in 0..b.len() {
            m[[r, c]] = a[r] * b[c];
        }
    }
    m
}

/// Inverse of a symmetric positive definite matrix with a condition guard.
pub(crate) fn invert(m: &Array2<f64>) -> Result<Array2<f64>> {
    let inv = invert_spd_checked(&to_nalgebra(m), CONDITION_LIMIT)?;
    Ok(Array2::from_shape_fn(m.dim(), |(i, j)| inv[(i, j)]))
}

/// All four limit matrices evaluated at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub point: Vec<f64>,
    pub rho: f64,
    /// Row-major d x d matrices.
    pub sigma_ase: Vec<Vec<f64>>,
    pub g_inverse: Vec<Vec<f64>>,
    pub sigma_lse: Vec<Vec<f64>>,
    pub g_lse: Vec<Vec<f64>>,
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn covariance_report(
    x: ArrayView1<'_, f64>,
    support: &DiscreteSupport,
    rho: f64,
) -> Result<CovarianceReport> {
    let g = g_matrix(x, support, rho)?;
    Ok(CovarianceReport {
        point: x.to_vec(),
        rho,
        sigma_ase: to_rows(&sigma_ase(x, support, rho)?),
        g_inverse: to_rows(&invert(&g)?),
        sigma_lse: to_rows(&sigma_lse(x, support, rho)?),
        g_lse: to_rows(&g_lse(x, support, rho)?),
    })
}

/// 1 - alpha/2 standard normal quantile.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    statrs::distribution::Normal::standard().inverse_cdf(p)
}

/// Empirical plug-in precision G_hat(x) over the rows of `x_hat`, with the
/// inner products clipped away from {0, 1} like the one-step update.
fn plugin_g(x: ArrayView1<'_, f64>, x_hat: &Array2<f64>) -> Array2<f64> {
    const EPS: f64 = 1e-6;
    let n = x_hat.nrows();
    let d = x_hat.ncols();
    let mut g = Array2::zeros((d, d));
    for row in x_hat.rows() {
        let t = x.dot(&row).clamp(EPS, 1.0 - EPS);
        rank_one_add(&mut g, row, 1.0 / (t * (1.0 - t)));
    }
    g.mapv(|v| v / n as f64)
}

/// Vertex-wise marginal confidence intervals, one (lo, hi) pair per
/// coordinate of the embedding's estimate.
///
/// For d = 1 the intervals are the plug-in constructions for the one-step
/// estimators: centered at |x_hat_i| with variance 1/(n G_hat(x_hat_i)) for
/// the latent positions, and at |y_hat_i| with variance
/// 1/(4 n^2 mu_hat x_hat_i G_hat(x_hat_i)) for the population LSE. For d > 1
/// the output is a marginal-interval extension using diag(G_hat^{-1})/n (the
/// limit theory pins down only the d = 1 construction; the multivariate
/// intervals ignore the orthogonal ambiguity and are centered at the raw
/// coordinates).
pub fn confidence_intervals(
    embedding: &Embedding,
    x_hat: &Array2<f64>,
    alpha: f64,
) -> Result<Vec<Vec<(f64, f64)>>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !matches!(embedding.method, Method::OseA | Method::OseL) {
        return Err(Error::InvalidInput(format!(
            "confidence intervals require a one-step embedding, got {}",
            embedding.method
        )));
    }
    let n = x_hat.nrows();
    if embedding.n() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, embedding.d),
            got: (embedding.n(), embedding.d),
        });
    }
    let q = normal_quantile(1.0 - alpha / 2.0);
    let d = embedding.d;

    if d == 1 {
        let mu_hat = x_hat.column(0).sum() / n as f64;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let xi = x_hat[[i, 0]];
            let g_hat = plugin_g(x_hat.row(i), x_hat)[[0, 0]];
            if g_hat <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "nonpositive plug-in variance at vertex {i}"
                )));
            }
            let half = match embedding.method {
                Method::OseA => q / (g_hat * n as f64).sqrt(),
                Method::OseL => {
                    let denom = 4.0 * (n as f64) * (n as f64) * mu_hat * xi * g_hat;
                    if denom <= 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "nonpositive plug-in variance at vertex {i}"
                        )));
                    }
                    q / denom.sqrt()
                }
                _ => unreachable!(),
            };
            let center = embedding.estimate[[i, 0]].abs();
            out.push(vec![(center - half, center + half)]);
        }
        return Ok(out);
    }

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let g_inv = invert(&plugin_g(x_hat.row(i), x_hat))?;
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let var = g_inv[[j, j]] / n as f64;
            if var <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "nonpositive plug-in variance at vertex {i}"
                )));
            }
            let center = embedding.estimate[[i, j]];
            let half = q * var.sqrt();
            row.push((center - half, center + half));
        }
        out.push(row);
    }
    Ok(out)
}

/// Confidence ellipsoid descriptors (center, plug-in precision, chi-square
/// quantile) for d > 1 plotting. An extension beyond the d = 1 theory, kept
/// separate from the marginal intervals.
pub fn confidence_ellipsoids(
    x_hat: &Array2<f64>,
    alpha: f64,
) -> Result<Vec<(Vec<f64>, Array2<f64>, f64)>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha = {alpha} outside (0, 1)")));
    }
    let d = x_hat.ncols();
    let chi = statrs::distribution::ChiSquared::new(d as f64)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .inverse_cdf(1.0 - alpha);
    Ok(x_hat
        .rows()
        .into_iter()
        .map(|row| (row.to_vec(), plugin_g(row, x_hat), chi))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::three_block_spec;
    use crate::rng::experiment_rng;
    use ndarray::array;
    use rand::Rng;

    fn min_eigenvalue(m: &Array2<f64>) -> f64 {
        let eig = to_nalgebra(m).symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn support_1d(points: &[f64], weights: &[f64]) -> DiscreteSupport {
        let p = Array2::from_shape_fn((points.len(), 1), |(i, _)| points[i]);
        DiscreteSupport::new(p, weights.to_vec()).unwrap()
    }

    #[test]
    fn point_mass_identities() {
        // Point mass at p with rho = 1: G(p) = 1/(1 - p^2), Sigma = G^{-1},
        // and the two Laplacian-side matrices coincide.
        let p = 0.6;
        let support = support_1d(&[p], &[1.0]);
        let x = array![p];
        let g = g_matrix(x.view(), &support, 1.0).unwrap();
        assert!((g[[0, 0]] - 1.0 / (1.0 - p * p)).abs() < 1e-14);
        let sigma = sigma_ase(x.view(), &support, 1.0).unwrap();
        assert!((sigma[[0, 0]] - (1.0 - p * p)).abs() < 1e-14);
        let st = sigma_lse(x.view(), &support, 1.0).unwrap();
        let gt = g_lse(x.view(), &support, 1.0).unwrap();
        assert!((st[[0, 0]] - gt[[0, 0]]).abs() < 1e-14);
    }

    #[test]
    fn example_one_closed_forms() {
        // Two-block rank-one model: displayed scalar formulas vs the generic
        // evaluators, to 1e-12.
        let (p, q, pi1, pi2) = (0.6, 0.4, 0.6, 0.4);
        let support = support_1d(&[p, q], &[pi1, pi2]);
        let sigma_p = (pi1 * p.powi(4) * (1.0 - p * p) + pi2 * p * q.powi(3) * (1.0 - p * q))
            / (pi1 * p * p + pi2 * q * q).powi(2);
        let sigma_q = (pi1 * p.powi(3) * q * (1.0 - p * q) + pi2 * q.powi(4) * (1.0 - q * q))
            / (pi1 * p * p + pi2 * q * q).powi(2);
        let g_p = pi1 * p * p / (p * p * (1.0 - p * p)) + pi2 * q * q / (p * q * (1.0 - p * q));
        let g_q = pi1 * p * p / (p * q * (1.0 - p * q)) + pi2 * q * q / (q * q * (1.0 - q * q));

        let xp = array![p];
        let xq = array![q];
        assert!((sigma_ase(xp.view(), &support, 1.0).unwrap()[[0, 0]] - sigma_p).abs() < 1e-12);
        assert!((sigma_ase(xq.view(), &support, 1.0).unwrap()[[0, 0]] - sigma_q).abs() < 1e-12);
        assert!((g_matrix(xp.view(), &support, 1.0).unwrap()[[0, 0]] - g_p).abs() < 1e-12);
        assert!((g_matrix(xq.view(), &support, 1.0).unwrap()[[0, 0]] - g_q).abs() < 1e-12);
    }

    #[test]
    fn equality_roots_close_the_gaps() {
        // G(p)^{-1} = Sigma(p) iff q = (1 - p^2)/p; the second root closes
        // the q-side gap. The root for p = 0.6 leaves the unit interval but
        // every denominator used stays valid.
        let p = 0.6f64;
        let q = (1.0 - p * p) / p;
        let support = support_1d(&[p, q], &[0.6, 0.4]);
        let x = array![p];
        let g = g_matrix(x.view(), &support, 1.0).unwrap()[[0, 0]];
        let sigma = sigma_ase(x.view(), &support, 1.0).unwrap()[[0, 0]];
        assert!(
            ((1.0 / g) - sigma).abs() < 1e-10,
            "gap {}",
            (1.0 / g - sigma).abs()
        );

        let q2 = 0.5 * ((p * p + 4.0).sqrt() - p);
        let support2 = support_1d(&[p, q2], &[0.6, 0.4]);
        let xq = array![q2];
        let g = g_matrix(xq.view(), &support2, 1.0).unwrap()[[0, 0]];
        let sigma = sigma_ase(xq.view(), &support2, 1.0).unwrap()[[0, 0]];
        assert!(((1.0 / g) - sigma).abs() < 1e-10);

        // Away from the roots the dominance is strict.
        let support3 = support_1d(&[0.6, 0.4], &[0.6, 0.4]);
        let x = array![0.6];
        let g = g_matrix(x.view(), &support3, 1.0).unwrap()[[0, 0]];
        let sigma = sigma_ase(x.view(), &support3, 1.0).unwrap()[[0, 0]];
        assert!(sigma - 1.0 / g > 1e-6);
    }

    #[test]
    fn table_three_and_four_limits() {
        let spec = three_block_spec(1.0);
        let support = DiscreteSupport::from_sbm(&spec);
        let g_inv_1 = invert(&g_matrix(spec.block(0), &support, 1.0).unwrap()).unwrap();
        let want = array![[3.220559, -2.898602], [-2.898602, 3.703496]];
        for (a, b) in g_inv_1.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-3);
        }
        let sigma_1 = sigma_ase(spec.block(0), &support, 1.0).unwrap();
        let want = array![[3.221615, -2.895962], [-2.895962, 3.710096]];
        for (a, b) in sigma_1.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-3);
        }
        let gt_1 = g_lse(spec.block(0), &support, 1.0).unwrap();
        let want = array![[12.40965, -12.78420], [-12.78420, 14.37281]];
        for (a, b) in gt_1.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-2);
        }
        let st_1 = sigma_lse(spec.block(0), &support, 1.0).unwrap();
        let want = array![[12.41030, -12.78353], [-12.78353, 14.37349]];
        for (a, b) in st_1.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-2);
        }
    }

    #[test]
    fn dominance_on_random_specs() {
        let mut rng = experiment_rng(21);
        for trial in 0..200 {
            let k = 1 + trial % 4;
            let d = 1 + trial % 2.min(k);
            let spec = random_spec(&mut rng, k.max(d), d);
            let rho = 0.3 + 0.7 * rng.random::<f64>();
            let support = DiscreteSupport::from_sbm(&spec);
            let pick = trial % spec.k();
            let x = spec.nu().row(pick);
            let sigma = sigma_ase(x, &support, rho).unwrap();
            let g_inv = invert(&g_matrix(x, &support, rho).unwrap()).unwrap();
            assert!(
                min_eigenvalue(&(&sigma - &g_inv)) >= -1e-8,
                "trial {trial}: ASE dominance violated"
            );
            let st = sigma_lse(x, &support, rho).unwrap();
            let gt = g_lse(x, &support, rho).unwrap();
            assert!(
                min_eigenvalue(&(&st - &gt)) >= -1e-8,
                "trial {trial}: LSE dominance violated"
            );
        }
    }

    pub(crate) fn random_spec(rng: &mut impl Rng, k: usize, d: usize) -> SbmSpec {
        loop {
            let nu = Array2::from_shape_fn((k, d), |_| {
                (0.15 + 0.5 * rng.random::<f64>()) / (d as f64).sqrt()
            });
            // Nearly collinear blocks make the second-moment matrix badly
            // conditioned and swamp the spectral comparisons below with
            // rounding noise; draw blocks with separated directions.
            if d > 1 {
                let mut too_close = false;
                for a in 0..k {
                    for b in (a + 1)..k {
                        let ra = nu.row(a);
                        let rb = nu.row(b);
                        let cos = ra.dot(&rb) / (ra.dot(&ra).sqrt() * rb.dot(&rb).sqrt());
                        if cos > 0.985 {
                            too_close = true;
                        }
                    }
                }
                if too_close {
                    continue;
                }
            }
            let mut pi: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
            let total: f64 = pi.iter().sum();
            for p in pi.iter_mut() {
                *p /= total;
            }
            let total: f64 = pi.iter().sum();
            pi[0] += 1.0 - total;
            if let Ok(spec) = SbmSpec::new(nu, pi, 1.0) {
                return spec;
            }
        }
    }

    #[test]
    fn square_block_models_make_one_step_and_ase_equal() {
        // K = d with linearly independent blocks: Sigma(nu_k) = G(nu_k)^{-1}.
        // The equality is algebraic, so the draw keeps the second-moment
        // matrix well conditioned to stay under the 1e-10 gap bound.
        let mut rng = experiment_rng(31);
        let mut done = 0;
        while done < 50 {
            let d = 1 + done % 3;
            let spec = random_spec(&mut rng, d, d);
            let support_check = DiscreteSupport::from_sbm(&spec);
            let mut delta = Array2::zeros((d, d));
            for (point, w) in support_check.atoms() {
                rank_one_add(&mut delta, point, w);
            }
            let eig = to_nalgebra(&delta).symmetric_eigen();
            let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            if lo <= 0.0 || hi / lo > 300.0 {
                continue;
            }
            let support = DiscreteSupport::from_sbm(&spec);
            for k in 0..d {
                let x = spec.nu().row(k);
                let sigma = sigma_ase(x, &support, 1.0).unwrap();
                let g_inv = invert(&g_matrix(x, &support, 1.0).unwrap()).unwrap();
                let gap: f64 = sigma
                    .iter()
                    .zip(g_inv.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(gap < 1e-10, "K=d spec {done}, block {k}: gap {gap}");
            }
            done += 1;
        }
    }

    #[test]
    fn empirical_version_converges_to_limit() {
        // G_n from i.i.d. block draws approaches the exact mixture value at
        // the 1/sqrt(n) rate; fit the constant at the smallest n.
        let spec = three_block_spec(1.0);
        let support = DiscreteSupport::from_sbm(&spec);
        let x = spec.block(0);
        let limit = g_matrix(x, &support, 1.0).unwrap();
        let mut rng = experiment_rng(55);
        let distance_at = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            let mut rows = Array2::zeros((n, 2));
            for i in 0..n {
                let u: f64 = rng.random();
                let block = if u < 0.3 {
                    0
                } else if u < 0.6 {
                    1
                } else {
                    2
                };
                rows.row_mut(i).assign(&spec.nu().row(block));
            }
            let empirical = DiscreteSupport::from_latent(&LatentPositions::new(rows));
            let g_n = g_matrix(x, &empirical, 1.0).unwrap();
            g_n.iter()
                .zip(limit.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let base: f64 = (0..8).map(|_| distance_at(200, &mut rng)).sum::<f64>() / 8.0;
        let constant = base * (200f64).sqrt();
        for &n in &[800usize, 3200] {
            let dist: f64 = (0..8).map(|_| distance_at(n, &mut rng)).sum::<f64>() / 8.0;
            assert!(
                dist < 2.0 * constant / (n as f64).sqrt(),
                "n = {n}: {dist} vs bound {}",
                2.0 * constant / (n as f64).sqrt()
            );
        }
    }

    #[test]
    fn report_is_symmetric_and_serializable() {
        let spec = three_block_spec(1.0);
        let support = DiscreteSupport::from_sbm(&spec);
        let report = covariance_report(spec.block(1), &support, 1.0).unwrap();
        for m in [
            &report.sigma_ase,
            &report.g_inverse,
            &report.sigma_lse,
            &report.g_lse,
        ] {
            for r in 0..2 {
                for c in 0..2 {
                    assert!((m[r][c] - m[c][r]).abs() < 1e-10);
                }
            }
        }
        let text = serde_json::to_string(&report).unwrap();
        let back: CovarianceReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.point, report.point);
    }

    #[test]
    fn rejects_denominators_outside_unit_interval() {
        let support = support_1d(&[0.9], &[1.0]);
        let x = array![1.2]; // x^T x1 = 1.08 > 1
        assert!(g_matrix(x.view(), &support, 1.0).is_err());
    }

    #[test]
    fn interval_width_scales_inverse_sqrt_n() {
        // Plug-in widths at n and 4n differ by a factor ~2 when the
        // estimates equal the truth exactly.
        let widths = |n: usize| -> f64 {
            let x = crate::experiment::sine_curve_latent(n);
            let x_hat = x.matrix().clone();
            let embedding = Embedding {
                estimate: x_hat.clone(),
                method: Method::OseA,
                eigenvalues: vec![1.0],
                d: 1,
                warnings: vec![],
            };
            let cis = confidence_intervals(&embedding, &x_hat, 0.05).unwrap();
            let mut w: Vec<f64> = cis.iter().map(|row| row[0].1 - row[0].0).collect();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            w[n / 2]
        };
        let ratio = widths(500) / widths(2000);
        assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn interval_degenerates_as_alpha_grows() {
        let x_hat = Array2::from_elem((20, 1), 0.5);
        let embedding = Embedding {
            estimate: x_hat.clone(),
            method: Method::OseA,
            eigenvalues: vec![1.0],
            d: 1,
            warnings: vec![],
        };
        let nearly_one = confidence_intervals(&embedding, &x_hat, 0.999999).unwrap();
        for row in &nearly_one {
            assert!((row[0].1 - row[0].0).abs() < 1e-4);
        }
        let wide = confidence_intervals(&embedding, &x_hat, 0.05).unwrap();
        let narrow = confidence_intervals(&embedding, &x_hat, 0.5).unwrap();
        for (w, n) in wide.iter().zip(narrow.iter()) {
            assert!(w[0].1 - w[0].0 > n[0].1 - n[0].0);
        }
        assert!(confidence_intervals(&embedding, &x_hat, 1.5).is_err());
    }
}
