//! Random dot product graph model: latent positions, stochastic block model
//! specifications, and adjacency sampling with a sparsity factor.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::replicate_rng;

/// An n x d matrix whose rows are latent vectors.
///
/// The type itself is permissive: estimates produced by the embedding and
/// one-step routines may leave the latent space, so membership in the space
/// (all coordinates strictly positive, Euclidean norm below one) is a
/// separate check via [`LatentPositions::validate_latent_space`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositions {
    data: Array2<f64>,
}

impl LatentPositions {
    pub fn new(data: Array2<f64>) -> Self {
        LatentPositions { data }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.data
    }

    /// Checks membership of every row in the latent space: strictly positive
    /// coordinates and Euclidean norm < 1. Pairwise inner products of valid
    /// rows then lie in (0, 1) by Cauchy-Schwarz.
    pub fn validate_latent_space(&self) -> Result<()> {
        for (i, row) in self.data.rows().into_iter().enumerate() {
            let mut norm_sq = 0.0;
            for &v in row.iter() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "row {i} has a nonpositive or non-finite coordinate ({v})"
                    )));
                }
                norm_sq += v * v;
            }
            if norm_sq >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "row {i} has Euclidean norm {} >= 1",
                    norm_sq.sqrt()
                )));
            }
        }
        Ok(())
    }
}

/// Stochastic block model specification: block latent vectors (rows of `nu`),
/// block probabilities `pi`, and a sparsity factor `rho`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "RawSbmSpec", into = "RawSbmSpec")]
pub struct SbmSpec {
    nu: Array2<f64>,
    pi: Vec<f64>,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSbmSpec {
    nu: Vec<Vec<f64>>,
    pi: Vec<f64>,
    rho: f64,
}

impl TryFrom<RawSbmSpec> for SbmSpec {
    type Error = Error;

    fn try_from(raw: RawSbmSpec) -> Result<Self> {
        let k = raw.nu.len();
        if k == 0 {
            return Err(Error::InvalidSbmSpec("nu must be nonempty".into()));
        }
        let d = raw.nu[0].len();
        if raw.nu.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidSbmSpec("ragged nu matrix".into()));
        }
        let mut nu = Array2::zeros((k, d));
        for (i, row) in raw.nu.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                nu[[i, j]] = v;
            }
        }
        SbmSpec::new(nu, raw.pi, raw.rho)
    }
}

impl From<SbmSpec> for RawSbmSpec {
    fn from(spec: SbmSpec) -> Self {
        RawSbmSpec {
            nu: spec
                .nu
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            pi: spec.pi,
            rho: spec.rho,
        }
    }
}

impl SbmSpec {
    /// Validates and builds a specification.
    ///
    /// Requires all pi_k > 0 summing to 1 within 1e-12, rho in (0, 1], and
    /// every entry of rho * nu nu^T inside (0, 1).
    pub fn new(nu: Array2<f64>, pi: Vec<f64>, rho: f64) -> Result<Self> {
        if nu.nrows() == 0 || nu.ncols() == 0 {
            return Err(Error::InvalidSbmSpec("nu must be nonempty".into()));
        }
        if pi.len() != nu.nrows() {
            return Err(Error::InvalidSbmSpec(format!(
                "pi has {} entries but nu has {} rows",
                pi.len(),
                nu.nrows()
            )));
        }
        if pi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidSbmSpec("all pi_k must be positive".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSbmSpec(format!(
                "pi sums to {total}, expected 1 within 1e-12"
            )));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidSbmSpec(format!("rho = {rho} outside (0, 1]")));
        }
        let b = nu.dot(&nu.t());
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                let p = rho * b[[i, j]];
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidSbmSpec(format!(
                        "block probability rho * B[{i}][{j}] = {p} outside (0, 1)"
                    )));
                }
            }
        }
        Ok(SbmSpec { nu, pi, rho })
    }

    pub fn k(&self) -> usize {
        self.nu.nrows()
    }

    pub fn d(&self) -> usize {
        self.nu.ncols()
    }

    pub fn nu(&self) -> &Array2<f64> {
        &self.nu
    }

    pub fn block(&self, k: usize) -> ArrayView1<'_, f64> {
        self.nu.row(k)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Block probability matrix B = nu nu^T (before scaling by rho).
    pub fn block_probabilities(&self) -> Array2<f64> {
        self.nu.dot(&self.nu.t())
    }
}

/// Deterministic block assignment rounding n*pi_k by largest remainder.
///
/// Vertices are ordered by block, so the empirical block proportions match pi
/// to within 1/n at every n.
pub fn sbm_assignment(spec: &SbmSpec, n: usize) -> Result<Vec<usize>> {
    let k = spec.k();
    if n < k {
        return Err(Error::TooFewVertices { n, k });
    }
    let counts = largest_remainder_counts(spec.pi(), n);
    let mut labels = Vec::with_capacity(n);
    for (block, &count) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat(block).take(count));
    }
    Ok(labels)
}

fn largest_remainder_counts(pi: &[f64], n: usize) -> Vec<usize> {
    let quotas: Vec<f64> = pi.iter().map(|&p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|&q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    // Largest fractional part first; ties go to the lower block index.
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &block in order.iter().take(n - assigned) {
        counts[block] += 1;
    }
    counts
}

/// Materializes latent positions from a block assignment: row i = nu_{tau(i)}.
pub fn sbm_to_latent(spec: &SbmSpec, assignment: &[usize]) -> Result<LatentPositions> {
    let k = spec.k();
    let mut data = Array2::zeros((assignment.len(), spec.d()));
    for (i, &label) in assignment.iter().enumerate() {
        if label >= k {
            return Err(Error::AssignmentOutOfRange {
                vertex: i,
                label,
                k,
            });
        }
        data.row_mut(i).assign(&spec.nu.row(label));
    }
    Ok(LatentPositions::new(data))
}

/// Symmetric, hollow, binary adjacency matrix.
///
/// Dense byte storage by default; sparse neighbor lists are selected
/// automatically by the sampler when the expected density is below 5%. The
/// two layouts hold identical matrices and produce identical results
/// downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    n: usize,
    storage: Storage,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<u8>),
    Sparse(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Dense,
    Sparse,
}

pub(crate) const SPARSE_DENSITY_THRESHOLD: f64 = 0.05;

impl Adjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn storage_kind(&self) -> StorageKind {
        match self.storage {
            Storage::Dense(_) => StorageKind::Dense,
            Storage::Sparse(_) => StorageKind::Sparse,
        }
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        match &self.storage {
            Storage::Dense(bytes) => bytes[i * self.n + j] != 0,
            Storage::Sparse(rows) => rows[i].binary_search(&(j as u32)).is_ok(),
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        match &self.storage {
            Storage::Dense(bytes) => bytes[i * self.n..(i + 1) * self.n]
                .iter()
                .map(|&b| b as usize)
                .sum(),
            Storage::Sparse(rows) => rows[i].len(),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn edge_count(&self) -> usize {
        let twice: usize = (0..self.n).map(|i| self.degree(i)).sum();
        twice / 2
    }

    /// Writes row `i` into `buf` as 0.0/1.0 values.
    pub fn fill_row(&self, i: usize, buf: &mut [f64]) {
        assert_eq!(buf.len(), self.n);
        match &self.storage {
            Storage::Dense(bytes) => {
                for (dst, &b) in buf.iter_mut().zip(&bytes[i * self.n..(i + 1) * self.n]) {
                    *dst = b as f64;
                }
            }
            Storage::Sparse(rows) => {
                buf.fill(0.0);
                for &j in &rows[i] {
                    buf[j as usize] = 1.0;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        match &self.storage {
            Storage::Dense(bytes) => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        m[[i, j]] = bytes[i * self.n + j] as f64;
                    }
                }
            }
            Storage::Sparse(rows) => {
                for (i, neighbors) in rows.iter().enumerate() {
                    for &j in neighbors {
                        m[[i, j as usize]] = 1.0;
                    }
                }
            }
        }
        m
    }

    /// Builds an adjacency matrix from undirected edges.
    ///
    /// Self-loops are dropped and duplicate edges collapsed; the counts of
    /// both are reported alongside the matrix.
    pub fn from_edges<I>(n: usize, edges: I, kind: StorageKind) -> Result<(Self, EdgeStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut stats = EdgeStats::default();
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) outside vertex range 0..{n}"
                )));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            rows[u].push(v as u32);
            rows[v].push(u as u32);
        }
        for row in rows.iter_mut() {
            row.sort_unstable();
            let before = row.len();
            row.dedup();
            stats.duplicates_dropped += before - row.len();
        }
        stats.duplicates_dropped /= 2;
        let adj = match kind {
            StorageKind::Sparse => Adjacency {
                n,
                storage: Storage::Sparse(rows),
            },
            StorageKind::Dense => {
                let mut bytes = vec![0u8; n * n];
                for (i, neighbors) in rows.iter().enumerate() {
                    for &j in neighbors {
                        bytes[i * n + j as usize] = 1;
                    }
                }
                Adjacency {
                    n,
                    storage: Storage::Dense(bytes),
                }
            }
        };
        Ok((adj, stats))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Expected edge density rho * mean_{i<j} x_i^T x_j, computed in O(nd) from
/// column sums.
pub(crate) fn expected_density(x: &LatentPositions, rho: f64) -> f64 {
    let n = x.n();
    if n < 2 {
        return 0.0;
    }
    let col_sums: Array1<f64> = x.matrix().sum_axis(ndarray::Axis(0));
    let total = col_sums.dot(&col_sums);
    let diagonal: f64 = x.matrix().rows().into_iter().map(|r| r.dot(&r)).sum();
    rho * (total - diagonal) / (n as f64 * (n - 1) as f64)
}

/// Samples an adjacency matrix with A_ij ~ Bernoulli(rho * x_i^T x_j)
/// independently for i < j, mirrored, hollow diagonal.
///
/// The same seed yields the same matrix regardless of the storage layout
/// chosen for the result.
pub fn sample_rdpg(x: &LatentPositions, rho: f64, seed: u64) -> Result<Adjacency> {
    let kind = if expected_density(x, rho) < SPARSE_DENSITY_THRESHOLD {
        StorageKind::Sparse
    } else {
        StorageKind::Dense
    };
    sample_rdpg_with_storage(x, rho, seed, kind)
}

/// As [`sample_rdpg`] with an explicit storage layout.
pub fn sample_rdpg_with_storage(
    x: &LatentPositions,
    rho: f64,
    seed: u64,
    kind: StorageKind,
) -> Result<Adjacency> {
    let mut rng = replicate_rng(seed, 0);
    sample_rdpg_from_rng(x, rho, &mut rng, kind)
}

/// Core sampler drawing from a caller-owned stream; the Monte Carlo harness
/// hands each replicate its own counter-based stream through here.
pub fn sample_rdpg_from_rng(
    x: &LatentPositions,
    rho: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
    kind: StorageKind,
) -> Result<Adjacency> {
    let n = x.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidInput(format!("rho = {rho} outside (0, 1]")));
    }
    let m = x.matrix();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for i in 0..n {
        let xi = m.row(i);
        for j in (i + 1)..n {
            let p = rho * xi.dot(&m.row(j));
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::EdgeProbabilityOutOfRange { i, j, value: p });
            }
            if rng.random::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    match kind {
        StorageKind::Dense => {
            let mut bytes = vec![0u8; n * n];
            for &(i, j) in &edges {
                bytes[i as usize * n + j as usize] = 1;
                bytes[j as usize * n + i as usize] = 1;
            }
            Ok(Adjacency {
                n,
                storage: Storage::Dense(bytes),
            })
        }
        StorageKind::Sparse => {
            let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
            for &(i, j) in &edges {
                rows[i as usize].push(j);
                rows[j as usize].push(i);
            }
            for row in rows.iter_mut() {
                row.sort_unstable();
            }
            Ok(Adjacency {
                n,
                storage: Storage::Sparse(rows),
            })
        }
    }
}

/// The three-block specification used throughout the numerical experiments:
/// nu_1 = (0.3, 0.3), nu_2 = (0.3, 0.6), nu_3 = (0.6, 0.3),
/// pi = (0.3, 0.3, 0.4).
pub fn three_block_spec(rho: f64) -> SbmSpec {
    let nu = ndarray::array![[0.3, 0.3], [0.3, 0.6], [0.6, 0.3]];
    SbmSpec::new(nu, vec![0.3, 0.3, 0.4], rho).expect("reference spec is valid")
}
