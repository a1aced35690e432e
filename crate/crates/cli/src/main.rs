//! `isingdp`: batch front end for bounds, simulation, fitting and diagnostics.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use isingdp::diagnostics::{rank_heatmap_slices, roc_curve, PosteriorSummary};
use isingdp::io;
use isingdp::model::AlphaUpdate;
use isingdp::pipeline::{
    diagnose_run, fit_run, pipeline_run, simulate_to, BoundsRequest, RunConfig, RunManifest, SimulateSection,
};
use isingdp::sampler::ClusterUpdate;
use isingdp::{BoundsMode, Error, PriorKind, Result};

#[derive(Parser)]
#[command(name = "isingdp", version, about = "Spatial variable selection with an Ising / Dirichlet-process prior")]
struct Cli {
    /// Worker threads for parallel chains (default: all cores).
    #[arg(long, global = true, env = "ISINGDP_THREADS")]
    threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase-transition region for (a, b) and a recommended interior point.
    Bounds(BoundsArgs),
    /// Generate one of the simulation scenarios.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write per-chain traces.
    Fit(RunArgs),
    /// Summaries, convergence, ROC and heatmaps from the traces of a fit.
    Diagnose(DiagnoseArgs),
    /// ROC curve and AUC of a summary against a truth vector.
    Roc(RocArgs),
    /// Rank heatmap slices of a 3D summary.
    Heatmap(HeatmapArgs),
    /// bounds → fit → diagnose in one run.
    Pipeline(RunArgs),
}

fn kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => Ok([
            x.trim().parse().map_err(|e| format!("{x}: {e}"))?,
            y.trim().parse().map_err(|e| format!("{y}: {e}"))?,
        ]),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

#[derive(Args)]
struct BoundsArgs {
    /// TOML file with keys n, p, dim, pi, r2 | r2_mode, margin, y, x.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    /// expected-r2, data-r2 or relaxed.
    #[arg(long, value_parser = kebab::<BoundsMode>)]
    mode: Option<BoundsMode>,
    #[arg(long)]
    margin: Option<f64>,
    /// Response file, for data-derived n or R².
    #[arg(long)]
    y: Option<PathBuf>,
    /// Design file, for data-derived p or R².
    #[arg(long)]
    x: Option<PathBuf>,
    /// Solve in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    /// Also report where this "a,b" pair lies.
    #[arg(long, value_parser = pair)]
    check: Option<[f64; 2]>,
    /// Write the machine-readable record here as well.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    scenario: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lattice side length; 10 gives the full-size scenario.
    #[arg(long, default_value_t = 10)]
    side: usize,
    #[arg(long, default_value_t = 104)]
    n: usize,
    /// Target Var(Xη)/σ² instead of the scenario's noise setting.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, env = "ISINGDP_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Default)]
struct DataArgs {
    #[arg(long)]
    y: Option<PathBuf>,
    /// `.csv` (n rows × p columns) or `.bin` with a `.json` sidecar.
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long)]
    coords: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
}

impl DataArgs {
    fn apply(&self, config: &mut RunConfig) {
        let d = &mut config.data;
        let given = self.y.is_some() || self.x.is_some();
        for (dst, src) in [(&mut d.y, &self.y), (&mut d.x, &self.x), (&mut d.coords, &self.coords), (&mut d.truth, &self.truth)] {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        if given {
            config.simulate = None;
        }
    }
}

#[derive(Args, Default)]
struct SamplerArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ising-dp, ising-gaussian, iid-dp or iid-gaussian.
    #[arg(long, value_parser = kebab::<PriorKind>)]
    prior: Option<PriorKind>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Truncation level of the stick-breaking weights.
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Standard deviation of the Gaussian base measure.
    #[arg(long)]
    v: Option<f64>,
    /// fixed or gibbs.
    #[arg(long, value_parser = kebab::<AlphaUpdate>)]
    alpha_update: Option<AlphaUpdate>,
    /// Gamma shape,rate prior on α.
    #[arg(long, value_parser = pair)]
    alpha_prior: Option<[f64; 2]>,
    #[arg(long)]
    thin: Option<usize>,
    /// Sweeps between full residual recomputations.
    #[arg(long)]
    recompute_interval: Option<usize>,
    /// sequential or jacobi.
    #[arg(long, value_parser = kebab::<ClusterUpdate>)]
    cluster_update: Option<ClusterUpdate>,
    #[arg(long)]
    prior_only: bool,
    /// Inverse-gamma shape,rate prior on σ² (0,0 is the Jeffreys prior).
    #[arg(long, value_parser = pair)]
    sigma2_prior: Option<[f64; 2]>,
    #[arg(long)]
    record_states: bool,
    /// Batches per chain for the inclusion-probability convergence series.
    #[arg(long)]
    inclusion_batches: Option<usize>,
    /// Check state invariants after every sweep (slow).
    #[arg(long)]
    check_invariants: bool,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl SamplerArgs {
    fn apply(&self, config: &mut RunConfig) {
        let s = &mut config.sampler;
        set!(s.iterations, self.iterations);
        set!(s.burn_in, self.burn_in);
        set!(s.n_chains, self.chains);
        set!(s.seed, self.seed);
        set!(s.prior, self.prior);
        if self.a.is_some() {
            s.a = self.a;
        }
        if self.b.is_some() {
            s.b = self.b;
        }
        set!(s.h, self.h);
        set!(s.alpha, self.alpha);
        set!(s.v, self.v);
        set!(s.alpha_update, self.alpha_update);
        set!(s.alpha_prior, self.alpha_prior);
        set!(s.thin, self.thin);
        set!(s.recompute_interval, self.recompute_interval);
        set!(s.cluster_update, self.cluster_update);
        s.prior_only |= self.prior_only;
        set!(s.sigma2_prior, self.sigma2_prior);
        s.record_states |= self.record_states;
        set!(s.inclusion_batches, self.inclusion_batches);
        s.check_invariants |= self.check_invariants;
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Simulate this scenario instead of reading data.
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    sim_side: Option<usize>,
    #[arg(long)]
    sim_n: Option<usize>,
    #[arg(long)]
    sim_seed: Option<u64>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long, value_parser = kebab::<BoundsMode>)]
    bounds_mode: Option<BoundsMode>,
    #[arg(long)]
    margin: Option<f64>,
    /// Run (a, b) even when it lies outside the phase-transition region.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    top_k: Option<usize>,
    /// Heatmap slices (1-based) along --heatmap-axis.
    #[arg(long, value_delimiter = ',')]
    heatmap_slices: Option<Vec<usize>>,
    #[arg(long)]
    heatmap_axis: Option<usize>,
    #[arg(long, env = "ISINGDP_OUT_DIR")]
    out: Option<PathBuf>,
    /// Print the merged configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn merged(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if self.scenario.is_some() || self.sim_side.is_some() || self.sim_n.is_some() || self.sim_seed.is_some() {
            let sim = config.simulate.get_or_insert_with(SimulateSection::default);
            set!(sim.scenario, self.scenario);
            set!(sim.side, self.sim_side);
            set!(sim.n, self.sim_n);
            set!(sim.seed, self.sim_seed);
            config.data = Default::default();
        }
        self.data.apply(&mut config);
        self.sampler.apply(&mut config);
        let b = &mut config.bounds;
        set!(b.pi, self.pi);
        if self.r2.is_some() {
            b.r2 = self.r2;
        }
        set!(b.mode, self.bounds_mode);
        set!(b.margin, self.margin);
        b.force |= self.force;
        let o = &mut config.output;
        set!(o.top_k, self.top_k);
        set!(o.heatmap_slices, self.heatmap_slices.clone());
        set!(o.heatmap_axis, self.heatmap_axis);
        set!(o.dir, self.out.clone());
        Ok(config)
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Output directory of an earlier `fit`.
    #[arg(long)]
    run: PathBuf,
    /// Where to write the diagnostics (default: the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    heatmap_slices: Option<Vec<usize>>,
    #[arg(long)]
    heatmap_axis: Option<usize>,
    /// RMSE of E[β | γ = 1] instead of E[η].
    #[arg(long)]
    conditional_rmse: bool,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Default: roc.csv next to the summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    coords: PathBuf,
    #[arg(long, default_value_t = 3)]
    axis: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    slices: Vec<usize>,
    #[arg(long, env = "ISINGDP_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Bounds(args) => bounds(args),
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit_or_pipeline(args, false),
        Command::Pipeline(args) => fit_or_pipeline(args, true),
        Command::Diagnose(args) => diagnose(args),
        Command::Roc(args) => roc(args),
        Command::Heatmap(args) => heatmap(args),
    }
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let mut req = match &args.config {
        Some(path) => BoundsRequest::from_toml_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?,
        None => BoundsRequest::default(),
    };
    if args.n.is_some() {
        req.n = args.n;
    }
    if args.p.is_some() {
        req.p = args.p;
    }
    set!(req.dim, args.dim);
    set!(req.pi, args.pi);
    if args.r2.is_some() {
        req.r2 = args.r2;
    }
    set!(req.mode, args.mode);
    set!(req.margin, args.margin);
    if args.y.is_some() {
        req.y = args.y;
    }
    if args.x.is_some() {
        req.x = args.x;
    }
    let report = req.solve(args.exact, args.check.map(|[a, b]| (a, b)))?;
    for line in &report.lines {
        println!("{line}");
    }
    if let Some(check) = &report.check {
        println!("(a, b) check: {check}");
    }
    println!("{}", serde_json::to_string(&report.record).map_err(|e| Error::json("<stdout>", e))?);
    if let Some(path) = &args.json {
        io::write_json(path, &report.record)?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let section = SimulateSection { scenario: args.scenario, side: args.side, n: args.n, seed: args.seed, snr: args.snr };
    let (_, data, record) = simulate_to(&args.out, &section)?;
    println!(
        "scenario {} written to {}: n = {}, p = {}, |support| = {}, realized SNR = {}",
        args.scenario,
        args.out.display(),
        data.n(),
        data.p(),
        record.support_size,
        record.realized_snr.map_or("inf".into(), |s| format!("{s:.5}")),
    );
    Ok(())
}

fn fit_or_pipeline(args: RunArgs, diagnose: bool) -> Result<()> {
    let config = args.merged()?;
    if args.print_config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }
    let manifest = if diagnose { pipeline_run(&config)? } else { fit_run(&config)? };
    print_manifest(&manifest, &config.output.dir);
    Ok(())
}

fn print_manifest(m: &RunManifest, dir: &Path) {
    if let Some(hp) = &m.hyperparameters {
        println!("(a, b) = ({}, {}) [{}; {}]", hp.a, hp.b, hp.source, hp.membership);
    }
    for c in &m.chains {
        println!("chain {}: {:?}, {:.3} s / 1000 sweeps", c.chain_id, c.status, c.seconds_per_1000_sweeps);
    }
    for (k, v) in &m.metrics {
        println!("{k} = {v:.6}");
    }
    println!("outputs in {} ({:.2} s)", dir.display(), m.total_seconds);
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let path = RunManifest::path(&args.run);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    let mut config = manifest.config;
    args.data.apply(&mut config);
    let o = &mut config.output;
    o.dir = args.out.clone().unwrap_or_else(|| args.run.clone());
    set!(o.top_k, args.top_k);
    set!(o.heatmap_slices, args.heatmap_slices.clone());
    set!(o.heatmap_axis, args.heatmap_axis);
    o.conditional_rmse |= args.conditional_rmse;
    let (summary, metrics) = diagnose_run(&args.run, &config)?;
    println!("summary of {} voxels from {} kept sweeps", summary.inclusion_prob.len(), summary.n_kept);
    for (k, v) in &metrics {
        println!("{k} = {v:.6}");
    }
    Ok(())
}

fn summary_from_file(path: &Path) -> Result<PosteriorSummary<f64>> {
    let rows = io::read_summary(path)?;
    Ok(PosteriorSummary {
        inclusion_prob: rows.iter().map(|r| r.inclusion_prob).collect(),
        eta_hat: rows.iter().map(|r| r.eta_hat).collect(),
        beta_given_selected: rows.iter().map(|r| r.eta_hat).collect(),
        rank: rows.iter().map(|r| r.rank).collect(),
        n_kept: 0,
    })
}

fn roc(args: RocArgs) -> Result<()> {
    let summary = summary_from_file(&args.summary)?;
    let truth: Vec<bool> = io::read_vector(&args.truth)?.iter().map(|&t| t != 0.0).collect();
    let curve = roc_curve(&summary.inclusion_prob, &truth)?;
    let out = args.out.unwrap_or_else(|| args.summary.with_file_name("roc.csv"));
    io::write_roc(&out, &curve)?;
    println!("AUC = {:.6}", curve.auc);
    Ok(())
}

fn heatmap(args: HeatmapArgs) -> Result<()> {
    let summary = summary_from_file(&args.summary)?;
    let graph = io::read_coords(&args.coords)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for s in rank_heatmap_slices(&summary, &graph, args.axis, &args.slices)? {
        let path = args.out.join(format!("heatmap_axis{}_slice{}.csv", s.axis, s.index));
        io::write_heatmap(&path, &s)?;
        println!("{}", path.display());
    }
    Ok(())
}
