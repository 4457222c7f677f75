//! Chernoff information between multivariate normals and the minimum
//! pairwise clustering-rate criteria for block models.
//!
//! The rate criteria follow the displayed definitions: a quadratic form in
//! the pooled covariance, without the Gaussian log-determinant term (the
//! dominance comparisons rely on monotonicity of the quadratic form in the
//! pooled matrix). The full Chernoff information, log-determinant included,
//! is available separately.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::covariance::{self, DiscreteSupport};
use crate::error::{Error, Result};
use crate::linalg::to_nalgebra;
use crate::model::SbmSpec;
use crate::parallel::{map_indices, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChernoffMethod {
    ClosedForm,
    GridRefined,
}

#[derive(Debug, Clone, Copy)]
pub struct ChernoffResult {
    pub value: f64,
    /// Maximizing t in (0, 1).
    pub t_star: f64,
    pub method: ChernoffMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "ASE")]
    Ase,
    #[serde(rename = "LSE")]
    Lse,
    #[serde(rename = "OSE_A")]
    OseA,
    #[serde(rename = "OSE_L")]
    OseL,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            EstimatorKind::Ase => "ASE",
            EstimatorKind::Lse => "LSE",
            EstimatorKind::OseA => "OSE_A",
            EstimatorKind::OseL => "OSE_L",
        };
        f.write_str(tag)
    }
}

pub const ALL_ESTIMATORS: [EstimatorKind; 4] = [
    EstimatorKind::Ase,
    EstimatorKind::OseA,
    EstimatorKind::Lse,
    EstimatorKind::OseL,
];

const GRID_POINTS: usize = 1001;
const T_TOL: f64 = 1e-9;

/// Chernoff information between N(mu1, v1) and N(mu2, v2):
/// sup_t t(1-t)/2 d^T V_t^{-1} d + (1/2) log |V_t| / (|V1|^t |V2|^{1-t})
/// with V_t = t V1 + (1-t) V2.
pub fn chernoff_gaussian(
    mu1: &Array1<f64>,
    v1: &Array2<f64>,
    mu2: &Array1<f64>,
    v2: &Array2<f64>,
) -> Result<ChernoffResult> {
    let d = mu1.len();
    if mu2.len() != d || v1.dim() != (d, d) || v2.dim() != (d, d) {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            got: v2.dim(),
        });
    }
    let v1_na = to_nalgebra(v1);
    let v2_na = to_nalgebra(v2);
    let log_det_1 = spd_log_det(&v1_na)?;
    let log_det_2 = spd_log_det(&v2_na)?;
    let delta = DVector::from_iterator(d, mu1.iter().zip(mu2.iter()).map(|(a, b)| a - b));

    if v1 == v2 {
        // Equal covariances: symmetric objective, maximum at t = 1/2 with
        // the log-determinant term vanishing.
        let chol = v1_na
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { vertex: None })?;
        let value = 0.125 * delta.dot(&chol.solve(&delta));
        return Ok(ChernoffResult {
            value,
            t_star: 0.5,
            method: ChernoffMethod::ClosedForm,
        });
    }

    let objective = |t: f64| -> f64 {
        let vt = &v1_na * t + &v2_na * (1.0 - t);
        match vt.cholesky() {
            Some(chol) => {
                let quad = delta.dot(&chol.solve(&delta));
                let log_det_t = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                0.5 * t * (1.0 - t) * quad
                    + 0.5 * (log_det_t - t * log_det_1 - (1.0 - t) * log_det_2)
            }
            None => f64::NEG_INFINITY,
        }
    };
    let (t_star, value) = grid_then_golden(&objective);
    Ok(ChernoffResult {
        value,
        t_star,
        method: ChernoffMethod::GridRefined,
    })
}

fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { vertex: None })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Dense grid over (0, 1) followed by golden-section refinement around the
/// best grid point. The objective need not be concave for unequal
/// covariances, so the grid locates the basin first.
fn grid_then_golden(objective: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let step = 1.0 / (GRID_POINTS + 1) as f64;
    let mut best_idx = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for idx in 0..GRID_POINTS {
        let t = (idx + 1) as f64 * step;
        let v = objective(t);
        if v > best_val {
            best_val = v;
            best_idx = idx;
        }
    }
    let lo = ((best_idx) as f64 * step).max(step * 0.5);
    let hi = ((best_idx + 2) as f64 * step).min(1.0 - step * 0.5);
    golden_section_max(objective, lo, hi)
}

fn golden_section_max(objective: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - (hi - lo) * INV_PHI;
    let mut d = lo + (hi - lo) * INV_PHI;
    let mut fc = objective(c);
    let mut fd = objective(d);
    while hi - lo > T_TOL {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * INV_PHI;
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * INV_PHI;
            fd = objective(d);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, objective(t))
}

/// Per-block limit covariances of one estimator family, plus the centers the
/// Chernoff-style criterion separates.
struct BlockLimits {
    centers: Vec<Array1<f64>>,
    covariances: Vec<Array2<f64>>,
    /// n for the latent-scale families, n^2 for the population-LSE scale.
    prefactor: f64,
}

fn block_limits(spec: &SbmSpec, n: usize, kind: EstimatorKind) -> Result<BlockLimits> {
    let support = DiscreteSupport::from_sbm(spec);
    let rho = spec.rho();
    let k = spec.k();
    let nf = n as f64;
    let mut centers = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for block in 0..k {
        let x = spec.block(block);
        let cov = match kind {
            EstimatorKind::Ase => covariance::sigma_ase(x, &support, rho)?,
            EstimatorKind::OseA => {
                covariance::invert(&covariance::g_matrix(x, &support, rho)?)?
            }
            EstimatorKind::Lse => covariance::sigma_lse(x, &support, rho)?,
            EstimatorKind::OseL => covariance::g_lse(x, &support, rho)?,
        };
        covariances.push(cov);
        let center = match kind {
            EstimatorKind::Ase | EstimatorKind::OseA => x.to_owned(),
            EstimatorKind::Lse | EstimatorKind::OseL => {
                // y*_k = nu_k (sum_l n pi_l nu_k^T nu_l)^{-1/2}
                let mut denom = 0.0;
                for l in 0..k {
                    denom += nf * spec.pi()[l] * x.dot(&spec.block(l));
                }
                x.to_owned().mapv(|v| v / denom.sqrt())
            }
        };
        centers.push(center);
    }
    let prefactor = match kind {
        EstimatorKind::Ase | EstimatorKind::OseA => nf,
        EstimatorKind::Lse | EstimatorKind::OseL => nf * nf,
    };
    Ok(BlockLimits {
        centers,
        covariances,
        prefactor,
    })
}

/// Minimum pairwise clustering rate for one estimator family:
/// min_{k != l} sup_t prefactor * t(1-t)/2 * d_kl^T [t C_k + (1-t) C_l]^{-1} d_kl.
pub fn rho_star(spec: &SbmSpec, n: usize, kind: EstimatorKind) -> Result<f64> {
    rho_star_impl(spec, n, kind, false)
}

/// Same pair minimum with the full Gaussian Chernoff information
/// (log-determinant term included) instead of the quadratic-form display.
pub fn rho_star_full_chernoff(spec: &SbmSpec, n: usize, kind: EstimatorKind) -> Result<f64> {
    rho_star_impl(spec, n, kind, true)
}

fn rho_star_impl(spec: &SbmSpec, n: usize, kind: EstimatorKind, full: bool) -> Result<f64> {
    if spec.k() < 2 {
        return Err(Error::InvalidInput(
            "rate criterion needs at least two blocks".into(),
        ));
    }
    let limits = block_limits(spec, n, kind)?;
    let mut minimum = f64::INFINITY;
    for k in 0..spec.k() {
        for l in (k + 1)..spec.k() {
            let value = if full {
                let c = chernoff_gaussian(
                    &limits.centers[k],
                    &limits.covariances[k],
                    &limits.centers[l],
                    &limits.covariances[l],
                )?;
                limits.prefactor * c.value
            } else {
                pair_rate(
                    &limits.centers[k],
                    &limits.covariances[k],
                    &limits.centers[l],
                    &limits.covariances[l],
                    limits.prefactor,
                )?
            };
            minimum = minimum.min(value);
        }
    }
    Ok(minimum)
}

fn pair_rate(
    mu1: &Array1<f64>,
    c1: &Array2<f64>,
    mu2: &Array1<f64>,
    c2: &Array2<f64>,
    prefactor: f64,
) -> Result<f64> {
    let d = mu1.len();
    let c1_na = to_nalgebra(c1);
    let c2_na = to_nalgebra(c2);
    let delta = DVector::from_iterator(d, mu1.iter().zip(mu2.iter()).map(|(a, b)| a - b));
    let mut any_valid = false;
    let objective = |t: f64| -> f64 {
        let pooled = &c1_na * t + &c2_na * (1.0 - t);
        match pooled.cholesky() {
            Some(chol) => 0.5 * prefactor * t * (1.0 - t) * delta.dot(&chol.solve(&delta)),
            None => f64::NEG_INFINITY,
        }
    };
    // Probe validity once; a pooled matrix singular across the whole range
    // is an error rather than a silent zero.
    for &t in &[0.25, 0.5, 0.75] {
        if objective(t).is_finite() {
            any_valid = true;
            break;
        }
    }
    if !any_valid {
        return Err(Error::NotPositiveDefinite { vertex: None });
    }
    let (_, value) = grid_then_golden(&objective);
    Ok(value)
}

/// Parameterized block model families swept by the ratio grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecFamily {
    /// Rank-one two-block model: latent positions p and q = p + r,
    /// pi = (0.6, 0.4).
    TwoBlockRankOne,
    /// Rank-two three-block model with blocks (q, q), (q, p), (p, q) for
    /// q = p - r, pi = (0.8, 0.1, 0.1).
    ThreeBlockRankTwo,
}

impl SpecFamily {
    pub fn build(&self, p: f64, r: f64) -> Result<SbmSpec> {
        match self {
            SpecFamily::TwoBlockRankOne => {
                let q = p + r;
                SbmSpec::new(
                    Array2::from_shape_vec((2, 1), vec![p, q])
                        .expect("static shape"),
                    vec![0.6, 0.4],
                    1.0,
                )
            }
            SpecFamily::ThreeBlockRankTwo => {
                let q = p - r;
                SbmSpec::new(
                    Array2::from_shape_vec((3, 2), vec![q, q, q, p, p, q])
                        .expect("static shape"),
                    vec![0.8, 0.1, 0.1],
                    1.0,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RatioCell {
    pub p: f64,
    pub r: f64,
    pub ratio: f64,
}

/// Sweeps rho*_num / rho*_den over a (p, r) grid; cells evaluate in parallel
/// and the output order is row-major in (p, r) regardless of the schedule.
pub fn chernoff_ratio_grid(
    family: SpecFamily,
    p_values: &[f64],
    r_values: &[f64],
    n: usize,
    numerator: EstimatorKind,
    denominator: EstimatorKind,
    execution: Execution,
) -> Result<Vec<RatioCell>> {
    let cells: Vec<(f64, f64)> = p_values
        .iter()
        .flat_map(|&p| r_values.iter().map(move |&r| (p, r)))
        .collect();
    let results = map_indices(execution, cells.len(), |idx| {
        let (p, r) = cells[idx];
        let spec = family.build(p, r)?;
        let num = rho_star(&spec, n, numerator)?;
        let den = rho_star(&spec, n, denominator)?;
        Ok::<RatioCell, Error>(RatioCell {
            p,
            r,
            ratio: num / den,
        })
    });
    results.into_iter().collect()
}
