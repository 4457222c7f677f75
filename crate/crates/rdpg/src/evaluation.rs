//! Clustering evaluation: Rand index, a full-covariance EM Gaussian mixture
//! clusterer, and Procrustes-aligned sum-of-squares error.

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::Array2;

use crate::embedding::procrustes_align;
use crate::error::{Error, Result};
use crate::parallel::{map_indices, Execution};
use crate::rng::replicate_rng;
use rand::Rng;

/// Cluster labels for n items; labels are arbitrary ids, compared up to
/// relabeling by the metrics below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty partition".into()));
        }
        Ok(Partition { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct labels used.
    pub fn cluster_count(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Rand index: the fraction of item pairs on which the two partitions agree
/// (together in both or separated in both). Computed from the contingency
/// table in exact integer arithmetic.
pub fn rand_index(c1: &Partition, c2: &Partition) -> Result<f64> {
    let n = c1.len();
    if n != c2.len() {
        return Err(Error::ShapeMismatch {
            expected: (n, 1),
            got: (c2.len(), 1),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput("need at least two items".into()));
    }
    let compact = |labels: &[usize]| -> Vec<usize> {
        let mut seen: Vec<usize> = labels.to_vec();
        seen.sort_unstable();
        seen.dedup();
        labels
            .iter()
            .map(|l| seen.binary_search(l).expect("label present"))
            .collect()
    };
    let a = compact(c1.labels());
    let b = compact(c2.labels());
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b.iter()) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let choose2 = |m: u64| m * m.saturating_sub(1) / 2;
    let together_both: u64 = table.iter().map(|&m| choose2(m)).sum();
    let together_first: u64 = rows.iter().map(|&m| choose2(m)).sum();
    let together_second: u64 = cols.iter().map(|&m| choose2(m)).sum();
    let total = choose2(n as u64);
    let agreements = total + 2 * together_both - together_first - together_second;
    Ok(agreements as f64 / total as f64)
}

/// Sum of squared errors after the optimal orthogonal alignment:
/// min over W in O(d) of ||estimate W - target||_F^2.
pub fn aligned_sse(estimate: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    Ok(procrustes_align(estimate, target)?.residual_frobenius_sq)
}

const GMM_RESTARTS: usize = 20;
const GMM_MAX_ITER: usize = 500;
const GMM_REL_TOL: f64 = 1e-8;
const COVARIANCE_FLOOR: f64 = 1e-8;

/// Full-covariance Gaussian mixture clustering via EM.
///
/// Twenty k-means++-seeded restarts run (in parallel when enabled) and the
/// highest log-likelihood wins, ties resolved by restart index, so the
/// result is deterministic given the seed.
pub fn gmm_cluster(points: &Array2<f64>, k: usize, seed: u64) -> Result<Partition> {
    gmm_cluster_with_execution(points, k, seed, Execution::default())
}

pub fn gmm_cluster_with_execution(
    points: &Array2<f64>,
    k: usize,
    seed: u64,
    execution: Execution,
) -> Result<Partition> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!(
            "need n >= k >= 1, got n = {n}, k = {k}"
        )));
    }
    if k == 1 {
        return Partition::new(vec![0; n]);
    }
    let first = points.row(0);
    if points.rows().into_iter().all(|r| r == first) {
        return Err(Error::DegenerateData(
            "all points identical with k > 1".into(),
        ));
    }

    let fits: Vec<Result<EmFit>> = map_indices(execution, GMM_RESTARTS, |restart| {
        em_fit(points, k, seed, restart as u64)
    });
    let mut best: Option<(f64, usize, EmFit)> = None;
    for (idx, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        let replace = match &best {
            None => true,
            Some((ll, _, _)) => fit.log_likelihood > *ll,
        };
        if replace {
            best = Some((fit.log_likelihood, idx, fit));
        }
    }
    let (_, _, fit) = best.expect("at least one restart");
    Partition::new(fit.labels)
}

pub(crate) struct EmFit {
    pub labels: Vec<usize>,
    pub log_likelihood: f64,
    /// Log-likelihood after each EM iteration; nondecreasing except across
    /// an empty-cluster rescue.
    #[allow(dead_code)]
    pub trace: Vec<f64>,
}

struct Component {
    weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_norm: f64,
}

fn component_from_moments(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Component> {
    let d = mean.len();
    let mut cov = cov;
    for i in 0..d {
        cov[(i, i)] += COVARIANCE_FLOOR;
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::DegenerateData("singular mixture covariance".into()))?;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    Ok(Component {
        weight,
        mean,
        chol,
        log_norm,
    })
}

impl Component {
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let solved = self.chol.solve(&diff);
        self.log_norm - 0.5 * diff.dot(&solved)
    }
}

pub(crate) fn em_fit(points: &Array2<f64>, k: usize, seed: u64, restart: u64) -> Result<EmFit> {
    let n = points.nrows();
    let d = points.ncols();
    let mut rng = replicate_rng(seed ^ 0x6d6d_6721, restart);
    let rows: Vec<DVector<f64>> = points
        .rows()
        .into_iter()
        .map(|r| DVector::from_iterator(d, r.iter().cloned()))
        .collect();

    let global_cov = covariance_of(&rows);
    let mut components: Vec<Component> = kmeans_pp_centers(&rows, k, &mut rng)
        .into_iter()
        .map(|mean| component_from_moments(1.0 / k as f64, mean, global_cov.clone()))
        .collect::<Result<_>>()?;

    let mut log_resp = vec![vec![0.0f64; k]; n];
    let mut previous_ll = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut last_labels = vec![0usize; n];

    for _iter in 0..GMM_MAX_ITER {
        // E step
        let mut ll = 0.0;
        for (j, x) in rows.iter().enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (c, comp) in components.iter().enumerate() {
                let v = comp.weight.ln() + comp.log_density(x);
                log_resp[j][c] = v;
                max = max.max(v);
            }
            let sum: f64 = log_resp[j].iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            ll += lse;
            for c in 0..k {
                log_resp[j][c] -= lse;
            }
        }
        trace.push(ll);

        // M step
        let mut rescued = false;
        let mut masses = vec![0.0f64; k];
        for resp in log_resp.iter() {
            for (c, &lr) in resp.iter().enumerate() {
                masses[c] += lr.exp();
            }
        }
        for c in 0..k {
            if masses[c] < 1e-8 {
                // Reseed the empty component at the worst-explained point.
                let worst = (0..n)
                    .min_by(|&a, &b| {
                        let da = mixture_log_density(&components, &rows[a]);
                        let db = mixture_log_density(&components, &rows[b]);
                        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                    })
                    .expect("nonempty data");
                components[c] = component_from_moments(
                    1.0 / n as f64,
                    rows[worst].clone(),
                    global_cov.clone(),
                )?;
                rescued = true;
            }
        }
        if rescued {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            for comp in components.iter_mut() {
                comp.weight /= total;
            }
            previous_ll = f64::NEG_INFINITY;
            continue;
        }

        for c in 0..k {
            let mass = masses[c];
            let mut mean = DVector::zeros(d);
            for (j, x) in rows.iter().enumerate() {
                mean += x * log_resp[j][c].exp();
            }
            mean /= mass;
            let mut cov = DMatrix::zeros(d, d);
            for (j, x) in rows.iter().enumerate() {
                let diff = x - &mean;
                cov += (&diff * diff.transpose()) * log_resp[j][c].exp();
            }
            cov /= mass;
            components[c] = component_from_moments(mass / n as f64, mean, cov)?;
        }

        // Exact EM monotonicity is perturbed by the covariance floor added
        // each M-step; allow slack of that order.
        debug_assert!(
            previous_ll == f64::NEG_INFINITY || ll >= previous_ll - 1e-7 * (1.0 + ll.abs()),
            "EM log-likelihood decreased: {previous_ll} -> {ll}"
        );
        let converged =
            previous_ll.is_finite() && (ll - previous_ll).abs() < GMM_REL_TOL * (1.0 + ll.abs());
        previous_ll = ll;
        if converged {
            break;
        }
    }

    for (j, resp) in log_resp.iter().enumerate() {
        last_labels[j] = resp
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .map(|(c, _)| c)
            .unwrap_or(0);
    }
    Ok(EmFit {
        labels: last_labels,
        log_likelihood: previous_ll,
        trace,
    })
}

fn mixture_log_density(components: &[Component], x: &DVector<f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let vals: Vec<f64> = components
        .iter()
        .map(|c| {
            let v = c.weight.ln() + c.log_density(x);
            max = max.max(v);
            v
        })
        .collect();
    max + vals.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

fn covariance_of(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = DVector::zeros(d);
    for x in rows {
        mean += x;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for x in rows {
        let diff = x - &mean;
        cov += &diff * diff.transpose();
    }
    cov / n as f64
}

/// k-means++ seeding: uniform first center, then distance-squared sampling.
fn kmeans_pp_centers(
    rows: &[DVector<f64>],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<DVector<f64>> {
    let n = rows.len();
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(k);
    centers.push(rows[rng.random_range(0..n)].clone());
    let mut dist_sq: Vec<f64> = rows
        .iter()
        .map(|x| (x - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass at existing centers; pick uniformly.
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (j, &w) in dist_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = j;
                    break;
                }
            }
            chosen
        };
        centers.push(rows[next].clone());
        for (j, x) in rows.iter().enumerate() {
            dist_sq[j] = dist_sq[j].min((x - centers.last().unwrap()).norm_squared());
        }
    }
    centers
}
