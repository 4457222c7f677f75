//! Monte Carlo experiment runner.
//!
//! One configuration drives sampling, embedding, one-step refinement,
//! clustering, error metrics, covariance summaries, and confidence-interval
//! coverage. Replicates are pure functions of `(seed, n, replicate)`, run in
//! parallel, and gathered in replicate order, so reruns are byte-identical
//! and the first R' replicates of an R-replicate run match a standalone
//! R'-replicate run exactly.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::chernoff::EstimatorKind;
use crate::covariance::confidence_intervals;
use crate::embedding::{ase_matrix, lse_matrix, population_lse, select_dimension, Embedding};
use crate::error::{Error, Result};
use crate::evaluation::{gmm_cluster_with_execution, rand_index, Partition};
use crate::linalg::EigenStrategy;
use crate::model::{
    expected_density, sample_rdpg_from_rng, sbm_assignment, sbm_to_latent, LatentPositions,
    SbmSpec, StorageKind, SPARSE_DENSITY_THRESHOLD,
};
use crate::one_step::{finish_ose_a, finish_ose_l, OneStepConfig};
use crate::parallel::{map_indices, Execution};
use crate::rng::{derive_seed, labeled_rng};

/// Ground truth generating the simulated graphs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GroundTruth {
    /// Block model: latent positions from the deterministic assignment.
    Sbm(SbmSpec),
    /// Fixed latent matrix (n is pinned by the matrix).
    Latent { rows: Vec<Vec<f64>>, rho: f64 },
    /// The scalar sine-curve latent positions
    /// x_i = 0.8 sin(pi (i-1)/(n-1)) + 0.1.
    SineCurve { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DimensionChoice {
    #[serde(rename = "fixed")]
    Fixed(usize),
    /// Zhu-Ghodsi selection on the top `qmax` singular values of a pilot
    /// replicate, resolved once per n.
    #[serde(rename = "auto")]
    Auto { qmax: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "RI")]
    RandIndex,
    #[serde(rename = "SSE")]
    Sse,
    #[serde(rename = "COV")]
    Covariance,
    #[serde(rename = "CI")]
    CoverageCi,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input: GroundTruth,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub d: DimensionChoice,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_clip")]
    pub clip_epsilon: f64,
    /// Eigensolver path for the per-replicate decompositions; `Auto` keeps
    /// the full decomposition up to its size limit.
    #[serde(skip, default)]
    pub eigen_strategy: EigenStrategy,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_steps() -> usize {
    1
}
fn default_clip() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("estimators must be nonempty".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidConfig("n_values must be nonempty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        if let DimensionChoice::Auto { qmax } = self.d {
            if qmax < 2 {
                return Err(Error::InvalidConfig(
                    "auto dimension selection needs qmax >= 2".into(),
                ));
            }
        }
        if self.metrics.contains(&Metric::RandIndex)
            && !matches!(self.input, GroundTruth::Sbm(_))
        {
            return Err(Error::InvalidConfig(
                "Rand index needs block-model ground truth".into(),
            ));
        }
        if self.metrics.contains(&Metric::CoverageCi) {
            match self.d {
                DimensionChoice::Fixed(1) => {}
                _ => {
                    return Err(Error::InvalidConfig(
                        "confidence-interval coverage requires d = 1".into(),
                    ))
                }
            }
        }
        self.one_step_config(Execution::Sequential).validate()
    }

    fn one_step_config(&self, execution: Execution) -> OneStepConfig {
        OneStepConfig {
            steps: self.steps,
            clip_epsilon: self.clip_epsilon,
            execution,
            ..OneStepConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub rand_index: Option<f64>,
    pub sse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockCovarianceRecord {
    pub n: usize,
    pub estimator: EstimatorKind,
    pub block: usize,
    /// Sample covariance of the scaled aligned row errors, pooled over
    /// replicates and vertices of the block.
    pub covariance: Array2<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRecord {
    pub n: usize,
    pub estimator: EstimatorKind,
    pub replicates_ok: usize,
    pub mean_rand_index: Option<f64>,
    pub se_rand_index: Option<f64>,
    pub mean_sse: Option<f64>,
    pub se_sse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageRecord {
    pub n: usize,
    pub vertex: usize,
    pub trials: usize,
    pub x_hits: usize,
    pub y_hits: usize,
    pub mean_x_width: f64,
    pub mean_y_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub n: usize,
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationResults {
    pub records: Vec<ReplicateRecord>,
    pub block_covariances: Vec<BlockCovarianceRecord>,
    pub summaries: Vec<SummaryRecord>,
    pub coverage: Vec<CoverageRecord>,
    pub failures: Vec<FailureRecord>,
    /// Dimension actually used per n (after AUTO resolution).
    pub dimensions: Vec<(usize, usize)>,
}

/// The sine-curve latent positions of the scalar beyond-block-model example.
pub fn sine_curve_latent(n: usize) -> LatentPositions {
    let mut data = Array2::zeros((n, 1));
    for i in 0..n {
        let t = if n > 1 {
            i as f64 / (n as f64 - 1.0)
        } else {
            0.0
        };
        data[[i, 0]] = 0.8 * (std::f64::consts::PI * t).sin() + 0.1;
    }
    LatentPositions::new(data)
}

struct ResolvedTruth {
    x0: LatentPositions,
    rho: f64,
    assignment: Option<Vec<usize>>,
    k: Option<usize>,
}

fn resolve_truth(input: &GroundTruth, n: usize) -> Result<ResolvedTruth> {
    match input {
        GroundTruth::Sbm(spec) => {
            let assignment = sbm_assignment(spec, n)?;
            let x0 = sbm_to_latent(spec, &assignment)?;
            Ok(ResolvedTruth {
                x0,
                rho: spec.rho(),
                assignment: Some(assignment),
                k: Some(spec.k()),
            })
        }
        GroundTruth::Latent { rows, rho } => {
            if rows.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "latent input has {} rows but n = {n} requested",
                    rows.len()
                )));
            }
            let d = rows.first().map(|r| r.len()).unwrap_or(0);
            if d == 0 || rows.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidConfig("ragged latent input".into()));
            }
            let mut data = Array2::zeros((n, d));
            for (i, row) in rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    data[[i, j]] = v;
                }
            }
            Ok(ResolvedTruth {
                x0: LatentPositions::new(data),
                rho: *rho,
                assignment: None,
                k: None,
            })
        }
        GroundTruth::SineCurve { rho } => Ok(ResolvedTruth {
            x0: sine_curve_latent(n),
            rho: *rho,
            assignment: None,
            k: None,
        }),
    }
}

struct ReplicateOutcome {
    per_estimator: Vec<(EstimatorKind, Option<f64>, Option<f64>)>,
    covariance_errors: Vec<(EstimatorKind, usize, Vec<f64>)>,
    ci: Option<CiOutcome>,
}

struct CiOutcome {
    x_hits: Vec<bool>,
    y_hits: Vec<bool>,
    x_widths: Vec<f64>,
    y_widths: Vec<f64>,
}

/// Runs the full experiment described by `config`.
///
/// Per-replicate failures do not abort the run: the successful rows are
/// kept and each failure is reported with its replicate index.
pub fn run_simulation(config: &ExperimentConfig) -> Result<SimulationResults> {
    run_simulation_with_execution(config, Execution::default())
}

pub fn run_simulation_with_execution(
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<SimulationResults> {
    config.validate()?;
    let mut results = SimulationResults::default();

    for (n_index, &n) in config.n_values.iter().enumerate() {
        let truth = resolve_truth(&config.input, n)?;
        let targets = Targets::from_truth(&truth)?;
        let d = match config.d {
            DimensionChoice::Fixed(d) => d,
            DimensionChoice::Auto { qmax } => {
                resolve_dimension_from_pilot(config, &truth, n_index as u32, qmax)?
            }
        };
        results.dimensions.push((n, d));

        let storage = if expected_density(&truth.x0, truth.rho) < SPARSE_DENSITY_THRESHOLD {
            StorageKind::Sparse
        } else {
            StorageKind::Dense
        };

        let outcomes: Vec<(usize, std::result::Result<ReplicateOutcome, String>)> =
            map_indices(execution, config.replicates, |r| {
                let outcome =
                    run_replicate(config, &truth, &targets, n_index as u32, r, d, storage)
                        .map_err(|e| e.to_string());
                (r, outcome)
            });

        aggregate(config, &truth, n, d, outcomes, &mut results)?;
    }
    Ok(results)
}

fn resolve_dimension_from_pilot(
    config: &ExperimentConfig,
    truth: &ResolvedTruth,
    n_label: u32,
    qmax: usize,
) -> Result<usize> {
    let mut rng = labeled_rng(config.seed, n_label, u32::MAX as u64);
    let pilot = sample_rdpg_from_rng(&truth.x0, truth.rho, &mut rng, StorageKind::Dense)?;
    let dense = pilot.to_dense();
    let n = dense.nrows();
    let q = qmax.min(n);
    let pairs = crate::linalg::top_eigenpairs(&dense, q, config.eigen_strategy)?;
    let singular: Vec<f64> = pairs.values.iter().map(|v| v.abs()).collect();
    select_dimension(&singular)
}

/// Alignment targets shared by every replicate at one n.
struct Targets {
    /// rho^{1/2} X_0: what the adjacency-side estimators converge to.
    latent_scaled: Array2<f64>,
    /// Population LSE Y_0 (invariant to rho).
    population_lse: Array2<f64>,
}

impl Targets {
    fn from_truth(truth: &ResolvedTruth) -> Result<Self> {
        let latent_scaled = truth.x0.matrix().mapv(|v| v * truth.rho.sqrt());
        let population_lse = population_lse(&truth.x0)?;
        Ok(Targets {
            latent_scaled,
            population_lse,
        })
    }
}

fn estimator_target<'a>(kind: EstimatorKind, targets: &'a Targets) -> &'a Array2<f64> {
    match kind {
        EstimatorKind::Ase | EstimatorKind::OseA => &targets.latent_scaled,
        EstimatorKind::Lse | EstimatorKind::OseL => &targets.population_lse,
    }
}

/// Scaling of the aligned row errors whose limit is the per-block
/// covariance: sqrt(n) on the latent scale, n rho^{1/2} on the
/// population-LSE scale.
fn error_scale(kind: EstimatorKind, n: usize, rho: f64) -> f64 {
    match kind {
        EstimatorKind::Ase | EstimatorKind::OseA => (n as f64).sqrt(),
        EstimatorKind::Lse | EstimatorKind::OseL => n as f64 * rho.sqrt(),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_replicate(
    config: &ExperimentConfig,
    truth: &ResolvedTruth,
    targets: &Targets,
    n_label: u32,
    replicate: usize,
    d: usize,
    storage: StorageKind,
) -> Result<ReplicateOutcome> {
    let n = truth.x0.n();
    let mut rng = labeled_rng(config.seed, n_label, replicate as u64);
    let adjacency = sample_rdpg_from_rng(&truth.x0, truth.rho, &mut rng, storage)?;
    let dense = adjacency.to_dense();
    let one_step_cfg = config.one_step_config(Execution::Sequential);

    let wants = |kind: EstimatorKind| config.estimators.contains(&kind);
    let needs_ci = config.metrics.contains(&Metric::CoverageCi);
    let needs_ase = wants(EstimatorKind::Ase)
        || wants(EstimatorKind::OseA)
        || wants(EstimatorKind::OseL)
        || needs_ci;

    let ase_emb = if needs_ase {
        Some(ase_matrix(&dense, d, config.eigen_strategy)?)
    } else {
        None
    };
    let lse_emb = if wants(EstimatorKind::Lse) {
        Some(lse_matrix(&dense, d, config.eigen_strategy)?)
    } else {
        None
    };
    let ose_a_emb = if wants(EstimatorKind::OseA) || wants(EstimatorKind::OseL) || needs_ci {
        Some(finish_ose_a(
            &dense,
            ase_emb.clone().expect("ASE computed"),
            &one_step_cfg,
        )?)
    } else {
        None
    };
    let ose_l_emb = if wants(EstimatorKind::OseL) || needs_ci {
        Some(finish_ose_l(
            &dense,
            ase_emb.clone().expect("ASE computed"),
            &one_step_cfg,
        )?)
    } else {
        None
    };

    let embedding_for = |kind: EstimatorKind| -> &Embedding {
        match kind {
            EstimatorKind::Ase => ase_emb.as_ref().expect("requested"),
            EstimatorKind::Lse => lse_emb.as_ref().expect("requested"),
            EstimatorKind::OseA => ose_a_emb.as_ref().expect("requested"),
            EstimatorKind::OseL => ose_l_emb.as_ref().expect("requested"),
        }
    };

    let mut per_estimator = Vec::new();
    let mut covariance_errors = Vec::new();
    for (est_index, &kind) in config.estimators.iter().enumerate() {
        let embedding = embedding_for(kind);
        let target = estimator_target(kind, targets);

        let mut sse = None;
        if config.metrics.contains(&Metric::Sse) {
            sse = Some(crate::evaluation::aligned_sse(&embedding.estimate, target)?);
        }

        let mut ri = None;
        if config.metrics.contains(&Metric::RandIndex) {
            let assignment = truth.assignment.as_ref().expect("validated: SBM input");
            let k = truth.k.expect("validated: SBM input");
            let gmm_seed = derive_seed(
                config.seed,
                &[n_label as u64, replicate as u64, est_index as u64],
            );
            let clusters = gmm_cluster_with_execution(
                &embedding.estimate,
                k,
                gmm_seed,
                Execution::Sequential,
            )?;
            let truth_partition = Partition::new(assignment.clone())?;
            ri = Some(rand_index(&clusters, &truth_partition)?);
        }

        if config.metrics.contains(&Metric::Covariance) {
            let assignment = truth
                .assignment
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("covariance summaries need block-model ground truth".into()))?;
            let aligned = crate::embedding::procrustes_align(&embedding.estimate, target)?;
            let scale = error_scale(kind, n, truth.rho);
            for (i, &block) in assignment.iter().enumerate() {
                let err: Vec<f64> = (0..d)
                    .map(|j| scale * (aligned.aligned[[i, j]] - target[[i, j]]))
                    .collect();
                covariance_errors.push((kind, block, err));
            }
        }
        per_estimator.push((kind, ri, sse));
    }

    let ci = if needs_ci {
        let x_hat = &ose_a_emb.as_ref().expect("computed").estimate;
        let x_cis = confidence_intervals(ose_a_emb.as_ref().unwrap(), x_hat, config.alpha)?;
        let y_cis = confidence_intervals(ose_l_emb.as_ref().unwrap(), x_hat, config.alpha)?;
        let x0 = truth.x0.matrix();
        let y0 = &targets.population_lse;
        let mut out = CiOutcome {
            x_hits: Vec::with_capacity(n),
            y_hits: Vec::with_capacity(n),
            x_widths: Vec::with_capacity(n),
            y_widths: Vec::with_capacity(n),
        };
        for i in 0..n {
            let (lo, hi) = x_cis[i][0];
            // The d = 1 intervals target the rho-scaled latent position.
            let x_true = truth.rho.sqrt() * x0[[i, 0]];
            out.x_hits.push(lo <= x_true && x_true <= hi);
            out.x_widths.push(hi - lo);
            let (lo, hi) = y_cis[i][0];
            let y_true = y0[[i, 0]];
            out.y_hits.push(lo <= y_true && y_true <= hi);
            out.y_widths.push(hi - lo);
        }
        Some(out)
    } else {
        None
    };

    Ok(ReplicateOutcome {
        per_estimator,
        covariance_errors,
        ci,
    })
}

fn aggregate(
    config: &ExperimentConfig,
    truth: &ResolvedTruth,
    n: usize,
    d: usize,
    outcomes: Vec<(usize, std::result::Result<ReplicateOutcome, String>)>,
    results: &mut SimulationResults,
) -> Result<()> {
    let mut ok_outcomes: Vec<(usize, ReplicateOutcome)> = Vec::new();
    for (replicate, outcome) in outcomes {
        match outcome {
            Ok(o) => ok_outcomes.push((replicate, o)),
            Err(message) => results.failures.push(FailureRecord {
                n,
                replicate,
                message,
            }),
        }
    }

    for (replicate, outcome) in &ok_outcomes {
        for &(kind, ri, sse) in &outcome.per_estimator {
            results.records.push(ReplicateRecord {
                n,
                replicate: *replicate,
                estimator: kind,
                rand_index: ri,
                sse,
            });
        }
    }

    // Per-estimator summaries.
    for &kind in &config.estimators {
        let rows: Vec<&ReplicateRecord> = results
            .records
            .iter()
            .filter(|r| r.n == n && r.estimator == kind)
            .collect();
        let mean_se = |values: Vec<f64>| -> (Option<f64>, Option<f64>) {
            if values.is_empty() {
                return (None, None);
            }
            let m = values.iter().sum::<f64>() / values.len() as f64;
            if values.len() < 2 {
                return (Some(m), None);
            }
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                / (values.len() - 1) as f64;
            (Some(m), Some((var / values.len() as f64).sqrt()))
        };
        let (mean_ri, se_ri) = mean_se(rows.iter().filter_map(|r| r.rand_index).collect());
        let (mean_sse, se_sse) = mean_se(rows.iter().filter_map(|r| r.sse).collect());
        results.summaries.push(SummaryRecord {
            n,
            estimator: kind,
            replicates_ok: rows.len(),
            mean_rand_index: mean_ri,
            se_rand_index: se_ri,
            mean_sse,
            se_sse,
        });
    }

    // Pooled per-block covariance of the scaled aligned errors.
    if config.metrics.contains(&Metric::Covariance) {
        let k = truth.k.unwrap_or(1);
        for &kind in &config.estimators {
            for block in 0..k {
                let mut samples: Vec<&Vec<f64>> = Vec::new();
                for (_, outcome) in &ok_outcomes {
                    for (err_kind, err_block, err) in &outcome.covariance_errors {
                        if *err_kind == kind && *err_block == block {
                            samples.push(err);
                        }
                    }
                }
                if samples.len() < 2 {
                    continue;
                }
                let count = samples.len() as f64;
                let mut mean = vec![0.0; d];
                for err in &samples {
                    for (m, v) in mean.iter_mut().zip(err.iter()) {
                        *m += v;
                    }
                }
                for m in mean.iter_mut() {
                    *m /= count;
                }
                let mut cov = Array2::zeros((d, d));
                for err in &samples {
                    for r in 0..d {
                        for c in 0..d {
                            cov[[r, c]] += (err[r] - mean[r]) * (err[c] - mean[c]);
                        }
                    }
                }
                cov.mapv_inplace(|v| v / (count - 1.0));
                results.block_covariances.push(BlockCovarianceRecord {
                    n,
                    estimator: kind,
                    block,
                    covariance: cov,
                    samples: samples.len(),
                });
            }
        }
    }

    // Per-vertex coverage.
    if config.metrics.contains(&Metric::CoverageCi) {
        let mut x_hits = vec![0usize; n];
        let mut y_hits = vec![0usize; n];
        let mut x_width = vec![0.0f64; n];
        let mut y_width = vec![0.0f64; n];
        let mut trials = 0usize;
        for (_, outcome) in &ok_outcomes {
            if let Some(ci) = &outcome.ci {
                trials += 1;
                for i in 0..n {
                    if ci.x_hits[i] {
                        x_hits[i] += 1;
                    }
                    if ci.y_hits[i] {
                        y_hits[i] += 1;
                    }
                    x_width[i] += ci.x_widths[i];
                    y_width[i] += ci.y_widths[i];
                }
            }
        }
        if trials > 0 {
            for i in 0..n {
                results.coverage.push(CoverageRecord {
                    n,
                    vertex: i,
                    trials,
                    x_hits: x_hits[i],
                    y_hits: y_hits[i],
                    mean_x_width: x_width[i] / trials as f64,
                    mean_y_width: y_width[i] / trials as f64,
                });
            }
        }
    }

    Ok(())
}

/// Mean vector of a column of per-replicate values, used by reporting code.
pub fn column_mean(values: &Array1<f64>) -> f64 {
    values.sum() / values.len() as f64
}
