//! Spectral embeddings: ASE, LSE, the population LSE transform, the
//! degree-scaled LSE initializer, Procrustes alignment, and profile
//! log-likelihood dimension selection.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenStrategy};
use crate::model::{Adjacency, LatentPositions};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ASE")]
    Ase,
    #[serde(rename = "LSE")]
    Lse,
    #[serde(rename = "OSE_A")]
    OseA,
    #[serde(rename = "OSE_L")]
    OseL,
    #[serde(rename = "DEGREE_SCALED_LSE")]
    DegreeScaledLse,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            Method::Ase => "ASE",
            Method::Lse => "LSE",
            Method::OseA => "OSE_A",
            Method::OseL => "OSE_L",
            Method::DegreeScaledLse => "DEGREE_SCALED_LSE",
        };
        f.write_str(tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingWarning {
    /// |lambda_d| is numerically tied with |lambda_{d+1}|: no spectral gap at
    /// the chosen dimension, solver ordering kept.
    EigenvalueTieAtCutoff,
    /// A negative eigenvalue entered the top d by magnitude; columns use
    /// |lambda|^{1/2} scaling.
    NegativeEigenvalueInTopD,
    /// Number of inner products clipped into [eps, 1 - eps] during one-step
    /// updates.
    ClippedProbabilities { count: u64 },
}

/// An n x d spectral estimate plus the eigenvalues that produced it.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub estimate: Array2<f64>,
    pub method: Method,
    /// Signed eigenvalues used, ordered by descending magnitude.
    pub eigenvalues: Vec<f64>,
    pub d: usize,
    pub warnings: Vec<EmbeddingWarning>,
}

impl Embedding {
    fn new(
        estimate: Array2<f64>,
        method: Method,
        eigenvalues: Vec<f64>,
        warnings: Vec<EmbeddingWarning>,
    ) -> Result<Self> {
        if estimate.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{method} embedding"),
            });
        }
        let d = estimate.ncols();
        Ok(Embedding {
            estimate,
            method,
            eigenvalues,
            d,
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.estimate.nrows()
    }
}

/// Adjacency spectral embedding of a symmetric matrix: the top-d scaled
/// eigenvectors ordered by eigenvalue magnitude, columns u_k |lambda_k|^{1/2}.
pub fn ase_matrix(m: &Array2<f64>, d: usize, strategy: EigenStrategy) -> Result<Embedding> {
    let n = m.nrows();
    if d == 0 || d > n {
        return Err(Error::DimensionTooLarge { d, n });
    }
    linalg::check_symmetric(m, SYMMETRY_TOL)?;
    let pairs = linalg::top_eigenpairs(m, d, strategy)?;
    let mut estimate = pairs.vectors;
    for (col, &value) in pairs.values.iter().enumerate() {
        let scale = value.abs().sqrt();
        estimate.column_mut(col).mapv_inplace(|v| v * scale);
    }
    let mut warnings = Vec::new();
    if pairs.tie_at_cutoff {
        warnings.push(EmbeddingWarning::EigenvalueTieAtCutoff);
    }
    if pairs.values.iter().any(|&v| v < 0.0) {
        warnings.push(EmbeddingWarning::NegativeEigenvalueInTopD);
    }
    Embedding::new(estimate, Method::Ase, pairs.values, warnings)
}

/// ASE of an adjacency matrix.
pub fn ase(a: &Adjacency, d: usize) -> Result<Embedding> {
    ase_matrix(&a.to_dense(), d, EigenStrategy::Auto)
}

/// Normalized Laplacian of a nonnegative symmetric matrix with positive row
/// sums: diag(M1)^{-1/2} M diag(M1)^{-1/2}.
pub fn normalized_laplacian(m: &Array2<f64>) -> Result<Array2<f64>> {
    linalg::check_symmetric(m, SYMMETRY_TOL)?;
    let n = m.nrows();
    for (i, row) in m.rows().into_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "negative entry {v} at ({i}, {j})"
                )));
            }
        }
    }
    let mut inv_sqrt = Array1::zeros(n);
    for i in 0..n {
        let sum: f64 = m.row(i).sum();
        if sum <= 0.0 {
            return Err(Error::IsolatedVertex { vertex: i });
        }
        inv_sqrt[i] = 1.0 / sum.sqrt();
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = m[[i, j]] * (inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    Ok(out)
}

/// Laplacian spectral embedding: ASE applied to the normalized Laplacian.
pub fn lse(a: &Adjacency, d: usize) -> Result<Embedding> {
    lse_matrix(&a.to_dense(), d, EigenStrategy::Auto)
}

pub fn lse_matrix(m: &Array2<f64>, d: usize, strategy: EigenStrategy) -> Result<Embedding> {
    let lap = normalized_laplacian(m)?;
    let mut embedding = ase_matrix(&lap, d, strategy)?;
    embedding.method = Method::Lse;
    Ok(embedding)
}

/// Column sums of a latent matrix; the population LSE row sums are x_i
/// dotted with this vector.
pub(crate) fn column_sums(x: &Array2<f64>) -> Array1<f64> {
    x.sum_axis(ndarray::Axis(0))
}

/// Population LSE transform: y_i = x_i (sum_j x_i^T x_j)^{-1/2}.
pub fn population_lse(x: &LatentPositions) -> Result<Array2<f64>> {
    let m = x.matrix();
    let sums = column_sums(m);
    let mut out = m.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let total = m.row(i).dot(&sums);
        if total <= 0.0 {
            return Err(Error::NonPositiveRowSum { vertex: i });
        }
        let scale = 1.0 / total.sqrt();
        row.mapv_inplace(|v| v * scale);
    }
    Ok(out)
}

/// Degree-scaled LSE initializer: row i of the LSE multiplied by
/// sqrt(degree_i). Satisfies the approximate linearization property, so it
/// can seed the one-step update like the ASE.
pub fn degree_scaled_lse(a: &Adjacency, d: usize) -> Result<Embedding> {
    let mut embedding = lse(a, d)?;
    for (i, mut row) in embedding.estimate.rows_mut().into_iter().enumerate() {
        let scale = (a.degree(i) as f64).sqrt();
        row.mapv_inplace(|v| v * scale);
    }
    embedding.method = Method::DegreeScaledLse;
    Ok(embedding)
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// Orthogonal d x d matrix minimizing ||source W - target||_F.
    pub w: Array2<f64>,
    pub aligned: Array2<f64>,
    pub residual_frobenius_sq: f64,
}

/// Orthogonal Procrustes alignment of `source` onto `target`.
pub fn procrustes_align(source: &Array2<f64>, target: &Array2<f64>) -> Result<AlignmentResult> {
    let w = linalg::procrustes_rotation(source, target)?;
    let aligned = source.dot(&w);
    let residual_frobenius_sq = aligned
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(AlignmentResult {
        w,
        aligned,
        residual_frobenius_sq,
    })
}

/// Profile log-likelihood dimension selection over a nonincreasing singular
/// value sequence (Zhu-Ghodsi).
///
/// Both segments share a pooled variance; a segment with fewer than two
/// values contributes zero to it. Splits where every segment fits exactly
/// score positive infinity, and ties resolve to the smallest dimension.
pub fn select_dimension(values: &[f64]) -> Result<usize> {
    let q = values.len();
    if q < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 singular values, got {q}"
        )));
    }
    for window in values.windows(2) {
        if window[1] > window[0] * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidInput(
                "singular values must be nonincreasing".into(),
            ));
        }
    }
    if values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "singular values must be nonnegative".into(),
        ));
    }

    let mut best_d = 1usize;
    let mut best = f64::NEG_INFINITY;
    for d in 1..=q {
        let obj = profile_log_likelihood(values, d);
        if obj > best {
            best = obj;
            best_d = d;
        }
    }
    Ok(best_d)
}

fn mean_and_ss(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, ss)
}

/// Two-normal profile log-likelihood of splitting after index `d`.
fn profile_log_likelihood(values: &[f64], d: usize) -> f64 {
    let q = values.len();
    let (head, tail) = values.split_at(d);
    let (mu1, ss1) = mean_and_ss(head);
    let (mu2, ss2) = mean_and_ss(tail);
    // Pooled variance; sums of squares already carry the (len - 1) weights.
    let numerator = ss1 + ss2;
    if numerator <= 0.0 {
        // Every segment is constant: a perfect fit.
        return f64::INFINITY;
    }
    let sigma_sq = numerator / (q as f64 - 2.0);
    let mut ll = 0.0;
    for &v in head {
        ll += normal_log_density(v, mu1, sigma_sq);
    }
    for &v in tail {
        ll += normal_log_density(v, mu2, sigma_sq);
    }
    ll
}

fn normal_log_density(x: f64, mu: f64, sigma_sq: f64) -> f64 {
    let z = x - mu;
    -0.5 * ((2.0 * std::f64::consts::PI * sigma_sq).ln() + z * z / sigma_sq)
}
