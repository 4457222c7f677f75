//! Command implementations behind the `rdpg` binary.
//!
//! Every subcommand is a pure function of its inputs, flags, and seed:
//! rerunning a command writes byte-identical outputs. Each run directory
//! gets a `manifest.json` recording the resolved configuration.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use rdpg::chernoff::{chernoff_ratio_grid, rho_star, rho_star_full_chernoff, EstimatorKind, SpecFamily};
use rdpg::covariance::{confidence_intervals, covariance_report, DiscreteSupport};
use rdpg::embedding::{ase_matrix, lse_matrix, select_dimension, Embedding};
use rdpg::experiment::{run_simulation, ExperimentConfig, SimulationResults};
use rdpg::io::{format_full, read_edge_list, read_matrix_csv, write_intervals_csv, EmbeddingSidecar};
use rdpg::linalg::EigenStrategy;
use rdpg::model::{sbm_assignment, sbm_to_latent, Adjacency, SbmSpec, StorageKind};
use rdpg::one_step::{finish_ose_a, finish_ose_l, OneStepConfig};
use rdpg::Execution;

#[derive(Parser)]
#[command(
    name = "rdpg",
    about = "Random dot product graphs: spectral and one-step latent position estimation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Sample an adjacency matrix from a block model specification.
    Sample(SampleArgs),
    /// Embed a graph with one of the estimators.
    Embed(EmbedArgs),
    /// Evaluate the limit covariance matrices of a block model.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment from a JSON configuration.
    Simulate(SimulateArgs),
    /// Vertex-wise confidence intervals (real graph or simulated coverage).
    Ci(CiArgs),
    /// Clustering-rate criteria: per-estimator values or ratio grids.
    Chernoff(ChernoffArgs),
    /// Select an embedding dimension from the spectrum of a graph.
    Dimselect(DimselectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Edgelist,
    Matrix,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ase,
    Lse,
    Dslse,
    OseA,
    OseL,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Ase,
    Lse,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ase,
    Lse,
    OseA,
    OseL,
}

impl From<KindArg> for EstimatorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ase => EstimatorKind::Ase,
            KindArg::Lse => EstimatorKind::Lse,
            KindArg::OseA => EstimatorKind::OseA,
            KindArg::OseL => EstimatorKind::OseL,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    TwoBlock,
    ThreeBlock,
}

#[derive(Args)]
pub struct GraphInput {
    /// Input graph file.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format: whitespace edge list or dense CSV matrix.
    #[arg(long, value_enum, default_value = "edgelist")]
    pub format: GraphFormat,
    /// Treat edge-list vertex ids as one-indexed.
    #[arg(long)]
    pub one_indexed: bool,
}

impl GraphInput {
    fn load(&self) -> Result<Array2<f64>> {
        let file = File::open(&self.input)
            .with_context(|| format!("opening {}", self.input.display()))?;
        let reader = BufReader::new(file);
        match self.format {
            GraphFormat::Edgelist => {
                let graph = read_edge_list(reader, self.one_indexed, StorageKind::Dense)?;
                if graph.stats.self_loops_dropped > 0 {
                    eprintln!(
                        "warning: dropped {} self-loop(s)",
                        graph.stats.self_loops_dropped
                    );
                }
                Ok(graph.adjacency.to_dense())
            }
            GraphFormat::Matrix => Ok(read_matrix_csv(reader)?),
        }
    }
}

#[derive(Args)]
pub struct SampleArgs {
    /// Block model specification JSON: {"nu": [[...]], "pi": [...], "rho": 1.0}.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the sparsity factor from the specification.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Embedding dimension; omit with --auto to select it from the spectrum.
    #[arg(long)]
    pub d: Option<usize>,
    /// Select the dimension by profile log-likelihood over the top --qmax
    /// singular values.
    #[arg(long)]
    pub auto: bool,
    #[arg(long, default_value_t = 50)]
    pub qmax: usize,
    /// Newton sweeps for the one-step methods.
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    /// Initializer for OSE-A: the ASE or the degree-scaled LSE.
    #[arg(long, value_enum, default_value = "ase")]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Evaluation point "x1,x2,..."; defaults to every block vector.
    #[arg(long)]
    pub point: Option<String>,
    /// Override the sparsity factor from the specification.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Experiment configuration JSON (see README for the schema).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CiArgs {
    /// Real-graph mode: input graph to embed and band.
    #[command(flatten)]
    pub graph: Option<CiGraphInput>,
    /// Simulation mode: coverage experiment configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CiGraphInput {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "edgelist")]
    pub format: GraphFormat,
    #[arg(long)]
    pub one_indexed: bool,
}

#[derive(Args)]
pub struct ChernoffArgs {
    /// Single-model mode: block specification JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Grid mode: parameterized family swept over (p, r).
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub p_min: f64,
    #[arg(long, default_value_t = 0.8)]
    pub p_max: f64,
    #[arg(long, default_value_t = 20)]
    pub p_steps: usize,
    #[arg(long, default_value_t = -0.15)]
    pub r_min: f64,
    #[arg(long, default_value_t = 0.15)]
    pub r_max: f64,
    #[arg(long, default_value_t = 20)]
    pub r_steps: usize,
    /// Numerator estimator for the ratio grid.
    #[arg(long, value_enum, default_value = "ose-a")]
    pub num: KindArg,
    /// Denominator estimator for the ratio grid.
    #[arg(long, value_enum, default_value = "ase")]
    pub den: KindArg,
    /// Use full Gaussian Chernoff information (with the log-determinant
    /// term) instead of the quadratic-form displays.
    #[arg(long)]
    pub full_chernoff: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DimselectArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long, default_value_t = 50)]
    pub qmax: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Ci(args) => cmd_ci(args),
        Command::Chernoff(args) => cmd_chernoff(args),
        Command::Dimselect(args) => cmd_dimselect(args),
    }
}

fn load_spec(path: &Path, rho_override: Option<f64>) -> Result<SbmSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: SbmSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing block specification {}", path.display()))?;
    match rho_override {
        Some(rho) => {
            Ok(SbmSpec::new(spec.nu().clone(), spec.pi().to_vec(), rho)?)
        }
        None => Ok(spec),
    }
}

fn write_manifest(out: &Path, command: &str, details: serde_json::Value) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "details": details,
    });
    let mut file = BufWriter::new(File::create(out.join("manifest.json"))?);
    writeln!(file, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn ensure_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let spec = load_spec(&args.spec, args.rho)?;
    let assignment = sbm_assignment(&spec, args.n)?;
    let latent = sbm_to_latent(&spec, &assignment)?;
    let adjacency = rdpg::sample_rdpg(&latent, spec.rho(), args.seed)?;

    let mut edges = BufWriter::new(File::create(args.out.join("edges.txt"))?);
    writeln!(edges, "# sampled graph: n = {}, seed = {}", args.n, args.seed)?;
    for i in 0..args.n {
        for j in (i + 1)..args.n {
            if adjacency.is_edge(i, j) {
                writeln!(edges, "{i} {j}")?;
            }
        }
    }
    let mut labels = BufWriter::new(File::create(args.out.join("assignment.txt"))?);
    for label in &assignment {
        writeln!(labels, "{label}")?;
    }
    let mut latent_csv = BufWriter::new(File::create(args.out.join("latent.csv"))?);
    rdpg::io::write_matrix_csv(&mut latent_csv, latent.matrix())?;

    write_manifest(
        &args.out,
        "sample",
        serde_json::json!({
            "spec": spec,
            "n": args.n,
            "seed": args.seed,
            "edges": adjacency.edge_count(),
        }),
    )?;
    println!(
        "sampled n = {} graph with {} edges into {}",
        args.n,
        adjacency.edge_count(),
        args.out.display()
    );
    Ok(())
}

fn auto_dimension(dense: &Array2<f64>, qmax: usize) -> Result<(usize, Vec<f64>)> {
    let q = qmax.min(dense.nrows());
    if q < 2 {
        bail!("need qmax >= 2 for dimension selection");
    }
    let pairs = rdpg::linalg::top_eigenpairs(dense, q, EigenStrategy::Auto)?;
    let singular: Vec<f64> = pairs.values.iter().map(|v| v.abs()).collect();
    let d = select_dimension(&singular)?;
    Ok((d, singular))
}

fn embed_with_method(
    dense: &Array2<f64>,
    method: MethodArg,
    d: usize,
    steps: usize,
    init: InitArg,
) -> Result<Embedding> {
    let cfg = OneStepConfig {
        steps,
        execution: Execution::default(),
        ..OneStepConfig::default()
    };
    let embedding = match method {
        MethodArg::Ase => ase_matrix(dense, d, EigenStrategy::Auto)?,
        MethodArg::Lse => lse_matrix(dense, d, EigenStrategy::Auto)?,
        MethodArg::Dslse => {
            let (adjacency, _) = adjacency_from_dense(dense)?;
            rdpg::degree_scaled_lse(&adjacency, d)?
        }
        MethodArg::OseA => {
            let initial = match init {
                InitArg::Ase => ase_matrix(dense, d, EigenStrategy::Auto)?,
                InitArg::Lse => {
                    let (adjacency, _) = adjacency_from_dense(dense)?;
                    rdpg::degree_scaled_lse(&adjacency, d)?
                }
            };
            finish_ose_a(dense, initial, &cfg)?
        }
        MethodArg::OseL => {
            let initial = ase_matrix(dense, d, EigenStrategy::Auto)?;
            finish_ose_l(dense, initial, &cfg)?
        }
    };
    Ok(embedding)
}

fn adjacency_from_dense(dense: &Array2<f64>) -> Result<(Adjacency, usize)> {
    let n = dense.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if dense[[i, j]] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    let count = edges.len();
    let (adjacency, _) = Adjacency::from_edges(n, edges, StorageKind::Dense)?;
    Ok((adjacency, count))
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let dense = args.graph.load()?;
    let (d, spectrum) = match (args.d, args.auto) {
        (Some(d), false) => (d, None),
        (None, true) => {
            let (d, sv) = auto_dimension(&dense, args.qmax)?;
            (d, Some(sv))
        }
        (Some(_), true) => bail!("pass either --d or --auto, not both"),
        (None, false) => bail!("pass --d <dim> or --auto"),
    };
    let embedding = embed_with_method(&dense, args.method, d, args.steps, args.init)?;

    let mut csv = BufWriter::new(File::create(args.out.join("embedding.csv"))?);
    let sidecar = rdpg::io::write_embedding(&mut csv, &embedding)?;
    fs::write(args.out.join("embedding.json"), &sidecar)?;

    write_manifest(
        &args.out,
        "embed",
        serde_json::json!({
            "input": args.graph.input.display().to_string(),
            "method": embedding.method.to_string(),
            "d": d,
            "auto": args.auto,
            "qmax": args.qmax,
            "steps": args.steps,
            "seed": args.seed,
            "spectrum": spectrum,
        }),
    )?;
    println!(
        "embedded {} vertices with {} at d = {} into {}",
        embedding.n(),
        embedding.method,
        d,
        args.out.display()
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let spec = load_spec(&args.spec, args.rho)?;
    let support = DiscreteSupport::from_sbm(&spec);
    let points: Vec<(String, Vec<f64>)> = match &args.point {
        Some(text) => {
            let coords: Vec<f64> = text
                .split(',')
                .map(|tok| tok.trim().parse::<f64>().context("parsing --point"))
                .collect::<Result<_>>()?;
            vec![("point".to_string(), coords)]
        }
        None => (0..spec.k())
            .map(|k| (format!("block_{}", k + 1), spec.block(k).to_vec()))
            .collect(),
    };
    let mut reports = Vec::new();
    for (name, coords) in &points {
        let x = ndarray::Array1::from(coords.clone());
        let report = covariance_report(x.view(), &support, spec.rho())?;
        reports.push(serde_json::json!({ "name": name, "report": report }));
    }
    fs::write(
        args.out.join("covariance_reports.json"),
        serde_json::to_string_pretty(&reports)?,
    )?;
    write_manifest(
        &args.out,
        "estimate",
        serde_json::json!({ "spec": spec, "points": points.len() }),
    )?;
    println!(
        "wrote {} covariance report(s) to {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}

fn write_simulation_outputs(out: &Path, results: &SimulationResults) -> Result<()> {
    let mut replicates = BufWriter::new(File::create(out.join("replicates.csv"))?);
    writeln!(replicates, "n,replicate,estimator,rand_index,sse")?;
    for r in &results.records {
        let ri = r.rand_index.map(format_full).unwrap_or_default();
        let sse = r.sse.map(format_full).unwrap_or_default();
        writeln!(replicates, "{},{},{},{},{}", r.n, r.replicate, r.estimator, ri, sse)?;
    }

    let mut summary = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(
        summary,
        "n,estimator,replicates_ok,mean_rand_index,se_rand_index,mean_sse,se_sse"
    )?;
    for s in &results.summaries {
        writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            s.n,
            s.estimator,
            s.replicates_ok,
            s.mean_rand_index.map(format_full).unwrap_or_default(),
            s.se_rand_index.map(format_full).unwrap_or_default(),
            s.mean_sse.map(format_full).unwrap_or_default(),
            s.se_sse.map(format_full).unwrap_or_default(),
        )?;
    }

    if !results.block_covariances.is_empty() {
        let mut cov = BufWriter::new(File::create(out.join("covariance.csv"))?);
        writeln!(cov, "n,estimator,block,row,col,value,samples")?;
        for record in &results.block_covariances {
            let d = record.covariance.nrows();
            for r in 0..d {
                for c in 0..d {
                    writeln!(
                        cov,
                        "{},{},{},{},{},{},{}",
                        record.n,
                        record.estimator,
                        record.block + 1,
                        r,
                        c,
                        format_full(record.covariance[[r, c]]),
                        record.samples
                    )?;
                }
            }
        }
    }

    if !results.coverage.is_empty() {
        let mut coverage = BufWriter::new(File::create(out.join("coverage.csv"))?);
        writeln!(
            coverage,
            "n,vertex,trials,x_hits,y_hits,x_coverage,y_coverage,mean_x_width,mean_y_width"
        )?;
        for c in &results.coverage {
            writeln!(
                coverage,
                "{},{},{},{},{},{},{},{},{}",
                c.n,
                c.vertex,
                c.trials,
                c.x_hits,
                c.y_hits,
                format_full(c.x_hits as f64 / c.trials as f64),
                format_full(c.y_hits as f64 / c.trials as f64),
                format_full(c.mean_x_width),
                format_full(c.mean_y_width),
            )?;
        }
    }

    if !results.failures.is_empty() {
        let mut failures = BufWriter::new(File::create(out.join("failures.csv"))?);
        writeln!(failures, "n,replicate,message")?;
        for f in &results.failures {
            writeln!(failures, "{},{},\"{}\"", f.n, f.replicate, f.message)?;
        }
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let results = run_simulation(&config)?;
    write_simulation_outputs(&args.out, &results)?;
    write_manifest(
        &args.out,
        "simulate",
        serde_json::json!({
            "config": config,
            "failures": results.failures.len(),
            "dimensions": results.dimensions,
        }),
    )?;
    println!(
        "simulation complete: {} replicate rows, {} failures, outputs in {}",
        results.records.len(),
        results.failures.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_ci(args: CiArgs) -> Result<()> {
    ensure_out(&args.out)?;
    match (&args.graph, &args.config) {
        (Some(graph), None) => {
            let dense = GraphInput {
                input: graph.input.clone(),
                format: graph.format,
                one_indexed: graph.one_indexed,
            }
            .load()?;
            let cfg = OneStepConfig {
                steps: args.steps,
                ..OneStepConfig::default()
            };
            let initial = ase_matrix(&dense, args.d, EigenStrategy::Auto)?;
            let ose_a = finish_ose_a(&dense, initial.clone(), &cfg)?;
            let ose_l = finish_ose_l(&dense, initial, &cfg)?;
            let x_hat = ose_a.estimate.clone();
            let x_intervals = confidence_intervals(&ose_a, &x_hat, args.alpha)?;
            let mut file = BufWriter::new(File::create(args.out.join("x_intervals.csv"))?);
            write_intervals_csv(&mut file, &ose_a.estimate, &x_intervals)?;
            if args.d == 1 {
                let y_intervals = confidence_intervals(&ose_l, &x_hat, args.alpha)?;
                let mut file = BufWriter::new(File::create(args.out.join("y_intervals.csv"))?);
                write_intervals_csv(&mut file, &ose_l.estimate, &y_intervals)?;
            }
            write_manifest(
                &args.out,
                "ci",
                serde_json::json!({
                    "mode": "graph",
                    "input": graph.input.display().to_string(),
                    "alpha": args.alpha,
                    "d": args.d,
                }),
            )?;
            println!("wrote vertex-wise intervals to {}", args.out.display());
        }
        (None, Some(config_path)) => {
            let text = fs::read_to_string(config_path)
                .with_context(|| format!("reading {}", config_path.display()))?;
            let mut config: ExperimentConfig = serde_json::from_str(&text)?;
            config.alpha = args.alpha;
            let results = run_simulation(&config)?;
            write_simulation_outputs(&args.out, &results)?;
            write_manifest(
                &args.out,
                "ci",
                serde_json::json!({ "mode": "simulation", "config": config }),
            )?;
            println!(
                "coverage simulation complete: {} vertices, outputs in {}",
                results.coverage.len(),
                args.out.display()
            );
        }
        _ => bail!("pass exactly one of --input (graph mode) or --config (simulation mode)"),
    }
    Ok(())
}

fn cmd_chernoff(args: ChernoffArgs) -> Result<()> {
    ensure_out(&args.out)?;
    match (&args.spec, args.family) {
        (Some(spec_path), None) => {
            let spec = load_spec(spec_path, None)?;
            let mut file = BufWriter::new(File::create(args.out.join("rho_star.csv"))?);
            writeln!(file, "estimator,n,value")?;
            for kind in rdpg::chernoff::ALL_ESTIMATORS {
                let value = if args.full_chernoff {
                    rho_star_full_chernoff(&spec, args.n, kind)?
                } else {
                    rho_star(&spec, args.n, kind)?
                };
                writeln!(file, "{},{},{}", kind, args.n, format_full(value))?;
            }
            write_manifest(
                &args.out,
                "chernoff",
                serde_json::json!({
                    "mode": "spec",
                    "n": args.n,
                    "full_chernoff": args.full_chernoff,
                }),
            )?;
            println!("wrote rate criteria to {}", args.out.display());
        }
        (None, Some(family)) => {
            let family = match family {
                FamilyArg::TwoBlock => SpecFamily::TwoBlockRankOne,
                FamilyArg::ThreeBlock => SpecFamily::ThreeBlockRankTwo,
            };
            let grid = |lo: f64, hi: f64, steps: usize| -> Vec<f64> {
                (0..steps)
                    .map(|i| lo + (hi - lo) * i as f64 / (steps.max(2) - 1) as f64)
                    .collect()
            };
            let p_values = grid(args.p_min, args.p_max, args.p_steps);
            let r_values = grid(args.r_min, args.r_max, args.r_steps);
            // Grid corners where the family leaves the valid probability
            // range are reported as empty ratios.
            let mut file = BufWriter::new(File::create(args.out.join("ratio.csv"))?);
            writeln!(file, "p,r,ratio")?;
            let mut valid = 0usize;
            for &p in &p_values {
                for &r in &r_values {
                    match family.build(p, r) {
                        Ok(_) => {
                            let cells = chernoff_ratio_grid(
                                family,
                                &[p],
                                &[r],
                                args.n,
                                args.num.into(),
                                args.den.into(),
                                Execution::default(),
                            )?;
                            writeln!(
                                file,
                                "{},{},{}",
                                format_full(p),
                                format_full(r),
                                format_full(cells[0].ratio)
                            )?;
                            valid += 1;
                        }
                        Err(_) => {
                            writeln!(file, "{},{},", format_full(p), format_full(r))?;
                        }
                    }
                }
            }
            write_manifest(
                &args.out,
                "chernoff",
                serde_json::json!({
                    "mode": "grid",
                    "n": args.n,
                    "valid_cells": valid,
                    "p_steps": args.p_steps,
                    "r_steps": args.r_steps,
                }),
            )?;
            println!(
                "wrote {} valid ratio cells to {}",
                valid,
                args.out.display()
            );
        }
        _ => bail!("pass exactly one of --spec or --family"),
    }
    Ok(())
}

fn cmd_dimselect(args: DimselectArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let dense = args.graph.load()?;
    let (d, spectrum) = auto_dimension(&dense, args.qmax)?;
    let mut file = BufWriter::new(File::create(args.out.join("spectrum.csv"))?);
    writeln!(file, "rank,singular_value")?;
    for (i, v) in spectrum.iter().enumerate() {
        writeln!(file, "{},{}", i + 1, format_full(*v))?;
    }
    write_manifest(
        &args.out,
        "dimselect",
        serde_json::json!({
            "input": args.graph.input.display().to_string(),
            "qmax": args.qmax,
            "selected": d,
        }),
    )?;
    println!("selected d = {d}");
    Ok(())
}

/// `EmbeddingSidecar` is re-exported so integration tests can parse the
/// sidecar JSON this binary writes.
pub type Sidecar = EmbeddingSidecar;
