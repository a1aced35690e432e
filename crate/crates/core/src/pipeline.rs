//! Run configuration, manifests and the bounds → fit → diagnose workflow.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    convergence_report, inclusion_probabilities, rank_heatmap_slices, rmse_per_variable, roc_curve,
    PosteriorSummary,
};
use crate::error::{Error, Result};
use crate::hyperbounds::{bounds, max_simple_r2, recommend_ab, BoundsInput, BoundsMode, HyperRegion, Membership, RegionRecord};
use crate::scalar::{parse_decimal, BoundScalar};
use crate::io::{self, DatasetPaths};
use crate::model::{AlphaUpdate, Dataset, DpConfig, IsingParams, PriorKind};
use crate::sampler::{chain_rng, run_parallel, ChainStatus, ChainTrace, ClusterUpdate, SamplerConfig};
use crate::simgen::{generate_scenario, Noise, Scenario, ScenarioSpec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
}

impl DataSection {
    pub fn paths(&self) -> Result<DatasetPaths> {
        match (&self.y, &self.x) {
            (Some(y), Some(x)) => Ok(DatasetPaths {
                y: y.clone(),
                x: x.clone(),
                coords: self.coords.clone(),
                truth: self.truth.clone(),
            }),
            _ => Err(Error::Config("[data] needs both `y` and `x`, or a [simulate] section".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub scenario: u8,
    /// Cube side; 10 reproduces the published layout.
    pub side: usize,
    pub n: usize,
    pub seed: u64,
    /// Overrides the scenario's noise with an exact target SNR.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { scenario: 1, side: 10, n: 104, seed: 0, snr: None }
    }
}

impl SimulateSection {
    pub fn spec(&self) -> Result<ScenarioSpec<f64>> {
        let scenario = Scenario::from_number(self.scenario)?;
        let mut spec = if self.side == 10 {
            ScenarioSpec::standard(scenario)
        } else {
            ScenarioSpec::scaled(scenario, self.side)
        };
        spec.n = self.n;
        if let Some(snr) = self.snr {
            spec.noise = Noise::TargetSnr(snr);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub pi: f64,
    /// Expected R²; when absent the best single-voxel R² of the data is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    pub mode: BoundsMode,
    pub margin: f64,
    /// Run with (a, b) outside or on the boundary of the region.
    pub force: bool,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection { pi: 0.05, r2: None, mode: BoundsMode::ExpectedR2, margin: 0.1, force: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub prior: PriorKind,
    /// When `a` and `b` are absent they are recommended from the bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub h: usize,
    pub alpha: f64,
    pub v: f64,
    pub alpha_update: AlphaUpdate,
    pub alpha_prior: [f64; 2],
    pub thin: usize,
    pub recompute_interval: usize,
    pub cluster_update: ClusterUpdate,
    pub prior_only: bool,
    pub sigma2_prior: [f64; 2],
    pub record_states: bool,
    pub inclusion_batches: usize,
    pub check_invariants: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let c = SamplerConfig::<f64>::default();
        SamplerSection {
            iterations: c.iterations,
            burn_in: c.burn_in,
            n_chains: c.n_chains,
            seed: c.seed,
            prior: c.prior,
            a: None,
            b: None,
            h: c.dp.h,
            alpha: c.dp.alpha,
            v: c.dp.v,
            alpha_update: c.dp.alpha_update,
            alpha_prior: [c.dp.alpha_prior.0, c.dp.alpha_prior.1],
            thin: c.thin,
            recompute_interval: c.recompute_interval,
            cluster_update: c.cluster_update,
            prior_only: c.prior_only,
            sigma2_prior: [c.sigma2_prior.0, c.sigma2_prior.1],
            record_states: c.record_states,
            inclusion_batches: c.inclusion_batches,
            check_invariants: c.check_invariants,
        }
    }
}

impl SamplerSection {
    /// Sampler configuration for the given (a, b); i.i.d. priors force b = 0.
    pub fn to_config(&self, a: f64, b: f64) -> SamplerConfig<f64> {
        let config = SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            n_chains: self.n_chains,
            seed: self.seed,
            prior: self.prior,
            ising: IsingParams { a, b },
            dp: DpConfig {
                h: self.h,
                alpha: self.alpha,
                v: self.v,
                alpha_update: self.alpha_update,
                alpha_prior: (self.alpha_prior[0], self.alpha_prior[1]),
            },
            thin: self.thin,
            recompute_interval: self.recompute_interval,
            prior_only: self.prior_only,
            cluster_update: self.cluster_update,
            sigma2_prior: (self.sigma2_prior[0], self.sigma2_prior[1]),
            record_states: self.record_states,
            inclusion_batches: self.inclusion_batches,
            check_invariants: self.check_invariants,
        };
        config.for_prior(self.prior)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Number of top voxels whose inclusion series enter `convergence.csv`.
    pub top_k: usize,
    pub heatmap_axis: usize,
    pub heatmap_slices: Vec<usize>,
    /// Score RMSE with the conditional mean of β given selection instead of η̂.
    pub conditional_rmse: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            top_k: 20,
            heatmap_axis: 3,
            heatmap_slices: Vec::new(),
            conditional_rmse: false,
        }
    }
}

/// The merged configuration of one run: file values overridden by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    pub bounds: BoundsSection,
    pub sampler: SamplerSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed { stage: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub a: f64,
    pub b: f64,
    /// `config` or `recommended`.
    pub source: String,
    /// `interior`, `not-checked`, or the violated inequality.
    pub membership: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain_id: usize,
    pub seed: u64,
    pub stream: u64,
    pub status: ChainStatus,
    pub seconds_per_1000_sweeps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub status: RunStatus,
    pub config: RunConfig,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<Hyperparameters>,
    pub chains: Vec<ChainRecord>,
    /// SHA-256 of every output file, relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    pub total_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status: RunStatus::Running,
            config: config.clone(),
            inputs: BTreeMap::new(),
            region: None,
            hyperparameters: None,
            chains: Vec::new(),
            outputs: BTreeMap::new(),
            metrics: BTreeMap::new(),
            total_seconds: 0.0,
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_json(&Self::path(dir), self)
    }

    pub fn record_inputs(&mut self, paths: &DatasetPaths) -> Result<()> {
        let mut add = |key: &str, p: &Path| -> Result<()> {
            self.inputs.insert(key.to_string(), io::sha256_file(p)?);
            let side = io::sidecar_path(p);
            if side.exists() {
                self.inputs.insert(format!("{key}.sidecar"), io::sha256_file(&side)?);
            }
            Ok(())
        };
        add("y", &paths.y)?;
        add("x", &paths.x)?;
        if let Some(c) = &paths.coords {
            add("coords", c)?;
        }
        if let Some(t) = &paths.truth {
            add("truth", t)?;
        }
        Ok(())
    }

    /// Hashes every file under `dir` except the manifest itself.
    pub fn record_outputs(&mut self, dir: &Path) -> Result<()> {
        self.outputs.clear();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
                let path = entry.map_err(|e| Error::io(&d, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path != Self::path(dir) {
                    let rel = path.strip_prefix(dir).unwrap_or(&path).to_string_lossy().replace('\\', "/");
                    self.outputs.insert(rel, io::sha256_file(&path)?);
                }
            }
        }
        Ok(())
    }

    pub fn record_chains(&mut self, traces: &[ChainTrace<f64>]) {
        self.chains = traces
            .iter()
            .map(|t| ChainRecord {
                chain_id: t.chain_id,
                seed: t.seed,
                stream: t.chain_id as u64,
                status: t.status.clone(),
                seconds_per_1000_sweeps: t.seconds_per_1000(),
            })
            .collect();
    }
}

/// Bounds input from the configuration and the data's dimensions.
pub fn bounds_input(section: &BoundsSection, data: &Dataset<f64>) -> Result<BoundsInput<f64>> {
    let r2 = match (section.mode, section.r2) {
        (BoundsMode::DataR2, _) | (_, None) => {
            let best = max_simple_r2(&data.x, &data.y)?;
            log::info!("best single-voxel R² = {:.4} (voxel {})", best.r2, best.column + 1);
            best.r2
        }
        (_, Some(r2)) => r2,
    };
    Ok(BoundsInput {
        n: data.n() as u64,
        p: data.p() as u64,
        dim: data.graph.dim(),
        pi: section.pi,
        r2,
        mode: section.mode,
    })
}

/// Standalone input of the `bounds` command: flat keys, with the data
/// consulted only for missing dimensions or a data-derived R².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsRequest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    pub dim: usize,
    pub pi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(alias = "r2_mode")]
    pub mode: BoundsMode,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
}

impl Default for BoundsRequest {
    fn default() -> Self {
        let b = BoundsSection::default();
        BoundsRequest { n: None, p: None, dim: 3, pi: b.pi, r2: None, mode: b.mode, margin: b.margin, y: None, x: None }
    }
}

/// Region, recommendation and readable inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub lines: Vec<String>,
    pub record: RegionRecord,
    /// Membership of a queried (a, b), if any.
    pub check: Option<String>,
}

impl BoundsRequest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills n, p and R² from the data files when they are needed.
    fn resolved(&self) -> Result<(u64, u64, f64)> {
        let needs_data = self.n.is_none() || self.p.is_none() || self.r2.is_none() || self.mode == BoundsMode::DataR2;
        let data = match (needs_data, &self.y, &self.x) {
            (false, _, _) => None,
            (true, Some(y), Some(x)) => {
                let y = io::read_vector(y)?;
                let x = io::read_design(x)?;
                if x.n_rows() != y.len() {
                    return Err(Error::DimensionMismatch(format!("Y has {} rows, X has {}", y.len(), x.n_rows())));
                }
                Some((y, x))
            }
            (true, _, _) => {
                return Err(Error::Config("set n, p and r2, or give y and x data files".into()));
            }
        };
        let n = self.n.or(data.as_ref().map(|(y, _)| y.len() as u64)).unwrap_or_default();
        let p = self.p.or(data.as_ref().map(|(_, x)| x.n_cols() as u64)).unwrap_or_default();
        let r2 = match (self.mode, self.r2, &data) {
            (BoundsMode::DataR2, _, Some((y, x))) | (_, None, Some((y, x))) => max_simple_r2(x, y)?.r2,
            (_, Some(r2), _) => r2,
            (_, None, None) => unreachable!("data is loaded whenever r2 is absent"),
        };
        Ok((n, p, r2))
    }

    /// Solves in `f64`, or in exact rationals built from the shortest decimal
    /// form of each input.
    pub fn solve(&self, exact: bool, check: Option<(f64, f64)>) -> Result<BoundsReport> {
        let (n, p, r2) = self.resolved()?;
        if exact {
            let q = |v: f64| {
                parse_decimal(&format!("{v}")).ok_or_else(|| Error::InvalidArgument(format!("not a finite decimal: {v}")))
            };
            let input = BoundsInput { n, p, dim: self.dim, pi: q(self.pi)?, r2: q(r2)?, mode: self.mode };
            let check = match check {
                Some((a, b)) => Some((q(a)?, q(b)?)),
                None => None,
            };
            report(&input, &q(self.margin)?, check)
        } else {
            let input = BoundsInput { n, p, dim: self.dim, pi: self.pi, r2, mode: self.mode };
            report(&input, &self.margin, check)
        }
    }
}

fn report<S: BoundScalar>(input: &BoundsInput<S>, margin: &S, check: Option<(S, S)>) -> Result<BoundsReport> {
    let region = bounds(input)?;
    let rec = match region.b_max {
        Some(_) => Some(recommend_ab(&region, margin)?),
        None => None,
    };
    let mut lines = region.describe();
    if let Some(r) = &rec {
        lines.push(format!("recommended (a, b) = ({:.6}, {:.6})", r.a.approx(), r.b.approx()));
    }
    let check = check.map(|(a, b)| match region.membership(&a, &b) {
        Membership::Interior => "interior".to_string(),
        Membership::Boundary(why) => format!("boundary: {why}"),
        Membership::Outside(why) => format!("outside: {why}"),
    });
    Ok(BoundsReport { lines, record: region.record(rec.as_ref()), check })
}

/// Chooses (a, b): the configured pair when given, else the recommendation.
/// Configured pairs outside or on the boundary of the region are refused
/// unless `force` is set. i.i.d. priors skip the region entirely.
pub fn choose_hyperparameters(
    config: &RunConfig,
    data: &Dataset<f64>,
) -> Result<(Option<HyperRegion<f64>>, Hyperparameters)> {
    let s = &config.sampler;
    if !s.prior.is_ising() {
        let a = s.a.ok_or_else(|| Error::Config(format!("prior {} needs `a`", s.prior)))?;
        let hp = Hyperparameters { a, b: 0.0, source: "config".into(), membership: "not-checked".into() };
        return Ok((None, hp));
    }
    let input = bounds_input(&config.bounds, data)?;
    let region = bounds(&input)?;
    let (a, b, source) = match (s.a, s.b) {
        (Some(a), Some(b)) => (a, b, "config"),
        (None, None) => {
            let rec = recommend_ab(&region, &config.bounds.margin)?;
            (rec.a, rec.b, "recommended")
        }
        _ => return Err(Error::Config("set both `a` and `b`, or neither".into())),
    };
    let membership = match region.membership(&a, &b) {
        Membership::Interior => "interior".to_string(),
        Membership::Boundary(why) | Membership::Outside(why) if config.bounds.force => {
            log::warn!("running (a, b) = ({a}, {b}) against `{why}` because of --force");
            format!("forced: {why}")
        }
        Membership::Boundary(why) => {
            return Err(Error::OutsideRegion(format!("(a, b) = ({a}, {b}) lies on the boundary `{why}`")))
        }
        Membership::Outside(why) => {
            return Err(Error::OutsideRegion(format!("(a, b) = ({a}, {b}) violates `{why}`")))
        }
    };
    Ok((Some(region), Hyperparameters { a, b, source: source.into(), membership }))
}

/// Realized generating quantities of a simulated dataset, written as
/// `simulation.json` next to the data files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub seed: u64,
    pub spec: ScenarioSpec<f64>,
    pub noise_sd: f64,
    /// Var(Xη) / σ² of the realized data; null when noise-free.
    pub realized_snr: Option<f64>,
    pub support_size: usize,
    pub files: BTreeMap<String, String>,
}

/// Simulates a scenario into `dir`; returns the written paths, the data and
/// the record also stored as `simulation.json`.
pub fn simulate_to(dir: &Path, section: &SimulateSection) -> Result<(DatasetPaths, Dataset<f64>, SimulationRecord)> {
    let spec = section.spec()?;
    let sim = generate_scenario(&spec, &mut chain_rng(section.seed, 0))?;
    let paths = io::write_dataset(dir, &sim.data)?;
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.file_name().is_some_and(|f| f != "simulation.json") {
            files.insert(path.file_name().unwrap_or_default().to_string_lossy().into_owned(), io::sha256_file(&path)?);
        }
    }
    let record = SimulationRecord {
        seed: section.seed,
        support_size: sim.data.truth.as_ref().map_or(0, |t| t.iter().filter(|&&e| e != 0.0).count()),
        spec,
        noise_sd: sim.noise_sd,
        realized_snr: sim.snr.is_finite().then_some(sim.snr),
        files,
    };
    io::write_json(&dir.join("simulation.json"), &record)?;
    Ok((paths, sim.data, record))
}

/// Fits all chains and writes `traces/chain_k` directories under `out`.
pub fn fit_stage(data: &Dataset<f64>, config: &SamplerConfig<f64>, out: &Path) -> Result<Vec<ChainTrace<f64>>> {
    let traces = run_parallel(data, config)?;
    for t in &traces {
        io::write_trace(&io::chain_dir(&out.join("traces"), t.chain_id), t)?;
    }
    let failed: Vec<String> = traces
        .iter()
        .filter_map(|t| match &t.status {
            ChainStatus::Failed { iteration, message } => {
                Some(format!("chain {} at sweep {iteration}: {message}", t.chain_id))
            }
            ChainStatus::Completed => None,
        })
        .collect();
    if failed.len() == traces.len() {
        return Err(Error::NumericalFailure { voxel: 0, message: failed.join("; ") });
    }
    for f in &failed {
        log::warn!("{f}");
    }
    Ok(traces)
}

/// Writes `summary.csv`, `convergence.csv`, heatmap slices and, with a
/// truth vector, `roc.csv`. Returns AUC/RMSE metrics when truth is present.
pub fn diagnose_stage(
    traces: &[ChainTrace<f64>],
    data: &Dataset<f64>,
    output: &OutputSection,
    out: &Path,
) -> Result<(PosteriorSummary<f64>, BTreeMap<String, f64>)> {
    let completed: Vec<ChainTrace<f64>> = traces.iter().filter(|t| t.is_complete()).cloned().collect();
    let summary = inclusion_probabilities(&completed)?;
    io::write_summary(&out.join("summary.csv"), &summary, &data.graph)?;
    let conv = if completed.len() >= 2 { convergence_report(&completed, &summary, output.top_k)? } else { Vec::new() };
    io::write_convergence(&out.join("convergence.csv"), &conv)?;
    if !output.heatmap_slices.is_empty() && data.graph.dim() == 3 {
        for s in rank_heatmap_slices(&summary, &data.graph, output.heatmap_axis, &output.heatmap_slices)? {
            io::write_heatmap(&out.join(format!("heatmap_axis{}_slice{}.csv", s.axis, s.index)), &s)?;
        }
    }
    let mut metrics = BTreeMap::new();
    if let Some(truth) = &data.truth {
        let support: Vec<bool> = truth.iter().map(|&t| t != 0.0).collect();
        let roc = roc_curve(&summary.inclusion_prob, &support)?;
        io::write_roc(&out.join("roc.csv"), &roc)?;
        metrics.insert("auc".into(), roc.auc);
        metrics.insert("rmse".into(), rmse_per_variable(summary.estimate(output.conditional_rmse), truth)?);
    }
    let max_r_hat = conv.iter().map(|r| r.r_hat).filter(|r| r.is_finite()).fold(f64::NAN, f64::max);
    if max_r_hat.is_finite() {
        metrics.insert("max_r_hat".into(), max_r_hat);
    }
    Ok((summary, metrics))
}

/// bounds → fit → diagnose. The manifest is written before sampling and
/// finalized afterwards, also on failure; artifacts already written are kept.
pub fn pipeline_run(config: &RunConfig) -> Result<RunManifest> {
    run_with_manifest("pipeline", config, true)
}

/// bounds → fit without the diagnose stage.
pub fn fit_run(config: &RunConfig) -> Result<RunManifest> {
    run_with_manifest("fit", config, false)
}

/// Diagnoses the traces of an earlier `fit` run in `run_dir`, using the data
/// recorded in its manifest. Outputs go to `config.output.dir`.
pub fn diagnose_run(run_dir: &Path, config: &RunConfig) -> Result<(PosteriorSummary<f64>, BTreeMap<String, f64>)> {
    let out = &config.output.dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (_, data) = load_stage(config, run_dir)?;
    let traces = io::read_traces(&run_dir.join("traces")).map_err(|e| e.in_stage("load"))?;
    diagnose_stage(&traces, &data, &config.output, out).map_err(|e| e.in_stage("diagnose"))
}

/// Data paths of a run: configured files, else the simulated data under `out/data`.
fn load_stage(config: &RunConfig, out: &Path) -> Result<(DatasetPaths, Dataset<f64>)> {
    let paths = match (&config.simulate, &config.data.y) {
        (Some(_), None) => DatasetPaths {
            y: out.join("data/y.csv"),
            x: out.join("data/x.bin"),
            coords: Some(out.join("data/coords.csv")),
            truth: Some(out.join("data/truth.csv")),
        },
        _ => config.data.paths().map_err(|e| e.in_stage("load"))?,
    };
    let data = io::load_dataset(&paths, config.sampler.prior.is_ising()).map_err(|e| e.in_stage("load"))?;
    Ok((paths, data))
}

fn run_with_manifest(command: &str, config: &RunConfig, diagnose: bool) -> Result<RunManifest> {
    let out = config.output.dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let started = Instant::now();
    let mut manifest = RunManifest::new(command, config);
    let result = run_stages(config, &out, &mut manifest, diagnose);
    manifest.total_seconds = started.elapsed().as_secs_f64();
    manifest.status = match &result {
        Ok(()) => RunStatus::Completed,
        Err(Error::Stage { stage, source }) => RunStatus::Failed { stage: stage.to_string(), message: source.to_string() },
        Err(e) => RunStatus::Failed { stage: command.into(), message: e.to_string() },
    };
    manifest.record_outputs(&out)?;
    manifest.write(&out)?;
    result.map(|()| manifest)
}

fn run_stages(config: &RunConfig, out: &Path, manifest: &mut RunManifest, diagnose: bool) -> Result<()> {
    let (paths, data) = match &config.simulate {
        Some(sim) if config.data.y.is_none() => {
            let (paths, data, record) = simulate_to(&out.join("data"), sim).map_err(|e| e.in_stage("simulate"))?;
            if let Some(snr) = record.realized_snr {
                manifest.metrics.insert("realized_snr".into(), snr);
            }
            (paths, data)
        }
        _ => load_stage(config, out)?,
    };
    manifest.record_inputs(&paths).map_err(|e| e.in_stage("load"))?;

    let (region, hp) = choose_hyperparameters(config, &data).map_err(|e| e.in_stage("bounds"))?;
    manifest.region = region.as_ref().map(|r| r.record(None));
    let sampler = config.sampler.to_config(hp.a, hp.b);
    manifest.hyperparameters = Some(hp);
    manifest.write(out).map_err(|e| e.in_stage("fit"))?;

    let traces = fit_stage(&data, &sampler, out).map_err(|e| e.in_stage("fit"))?;
    manifest.record_chains(&traces);

    if diagnose {
        let (_, metrics) = diagnose_stage(&traces, &data, &config.output, out).map_err(|e| e.in_stage("diagnose"))?;
        manifest.metrics.extend(metrics);
    }
    Ok(())
}
