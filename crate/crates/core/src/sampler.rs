//! Blocked Gibbs sampler for spike-and-slab regression with Ising and
//! Dirichlet-process components.
//!
//! One sweep for the DP priors is
//!
//! 1. `γ_j | rest` for every voxel in a fresh random order,
//! 2. `z_j | rest` for every voxel,
//! 3. `θ_h | rest` for every cluster,
//! 4. stick fractions and weights `w | z` (and optionally `α`),
//! 5. `σ² | rest`.
//!
//! The Gaussian-slab priors replace steps 2–4 with conjugate per-voxel
//! coefficient draws. Every step works against a cached residual
//! `r = Y − X(β·γ)` and touches it with rank-one updates, so a sweep costs
//! O(n·p) plus O(n·p_sel) for the cluster sums. The cache is rebuilt from
//! scratch every `recompute_interval` sweeps.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    axpy, dot, population_variance, stick_breaking_weights, ChainState, Dataset, DpConfig,
    IsingParams, PriorKind,
};
use crate::scalar::Real;

/// How the cluster atoms are refreshed within a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterUpdate {
    /// Exact Gibbs: clusters in turn, each conditioning on the others' new values.
    #[default]
    Sequential,
    /// All clusters from the same residual snapshot. Not an exact Gibbs step.
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig<F = f64> {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub prior: PriorKind,
    pub ising: IsingParams<F>,
    pub dp: DpConfig<F>,
    /// Keep every `thin`-th post-burn-in state when `record_states` is set.
    pub thin: usize,
    pub recompute_interval: usize,
    /// Drop the likelihood from every conditional, so the chain targets the prior.
    pub prior_only: bool,
    pub cluster_update: ClusterUpdate,
    /// Inv-Gamma(shape, rate) prior on σ². `(0, 0)` is the 1/σ² reference prior.
    pub sigma2_prior: (F, F),
    pub record_states: bool,
    /// Number of batches of the post-burn-in inclusion series kept for convergence checks.
    pub inclusion_batches: usize,
    /// Validate the full state after every sweep (slow).
    pub check_invariants: bool,
}

impl<F: Real> Default for SamplerConfig<F> {
    fn default() -> Self {
        SamplerConfig {
            iterations: 20_000,
            burn_in: 10_000,
            n_chains: 10,
            seed: 0,
            prior: PriorKind::IsingDp,
            ising: IsingParams { a: F::lit(-5.0), b: F::lit(0.25) },
            dp: DpConfig::default(),
            thin: 1,
            recompute_interval: 1000,
            prior_only: false,
            cluster_update: ClusterUpdate::Sequential,
            sigma2_prior: (F::zero(), F::zero()),
            record_states: false,
            inclusion_batches: 50,
            check_invariants: false,
        }
    }
}

impl<F: Real> SamplerConfig<F> {
    /// Copy of `self` for another prior; i.i.d. priors get `b = 0`.
    pub fn for_prior(&self, prior: PriorKind) -> Self {
        let mut c = self.clone();
        c.prior = prior;
        if !prior.is_ising() {
            c.ising.b = F::zero();
        }
        c
    }

    pub fn kept_sweeps(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in > self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) exceeds iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.n_chains == 0 || self.thin == 0 || self.recompute_interval == 0 {
            return Err(Error::Config("n_chains, thin and recompute_interval must be >= 1".into()));
        }
        self.ising.validate()?;
        if !self.prior.is_ising() && self.ising.b != F::zero() {
            return Err(Error::Config(format!(
                "prior {} is i.i.d. but b = {}; use b = 0",
                self.prior, self.ising.b
            )));
        }
        self.dp.validate()?;
        let (s, r) = self.sigma2_prior;
        if s < F::zero() || r < F::zero() || (s == F::zero()) != (r == F::zero()) {
            return Err(Error::Config("sigma2 prior must be (0, 0) or two positive numbers".into()));
        }
        Ok(())
    }
}

/// Reusable buffers and the last computed conditional quantities.
#[derive(Clone, Debug, Default)]
pub struct SamplerScratch<F> {
    order: Vec<u32>,
    /// Selected-neighbour count of every voxel during an indicator sweep.
    neighbours_on: Vec<u32>,
    /// H cluster design sums `X^h`, each of length n.
    cluster_sums: Vec<F>,
    cluster_count: Vec<usize>,
    label_count: Vec<usize>,
    log_w: Vec<F>,
    cdf: Vec<F>,
    log_p: Vec<F>,
    stick_fractions: Vec<F>,
    /// ln(1 − w'_h), kept separately since w'_h can round to 1.
    log_stick_rest: Vec<F>,
    cross: Vec<F>,
    /// Inv-Gamma rate of the last σ² draw.
    pub mu_sigma: F,
    /// Posterior precision S^h of each cluster in the last atom update.
    pub s_h: Vec<F>,
    /// Posterior mean μ^h of each cluster in the last atom update.
    pub mu_h: Vec<F>,
    /// log F(j | γ₋ⱼ) from the last indicator update of each voxel.
    pub log_f: Vec<F>,
}

/// Logistic function in a form that does not overflow.
#[inline]
pub fn logistic<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// log F(j | γ₋ⱼ) from the cached residual.
///
/// `residual` must include voxel j's contribution when `selected` is true and
/// exclude it otherwise. `dot_rx` is ⟨residual, X_j⟩ and `col_sq` is ‖X_j‖².
#[inline]
pub fn log_bayes_factor<F: Real>(beta: F, dot_rx: F, col_sq: F, selected: bool, sigma2: F) -> F {
    let quad = beta * beta * col_sq;
    let cross = (beta + beta) * dot_rx;
    let delta = if selected { cross + quad } else { cross - quad };
    delta / (sigma2 + sigma2)
}

/// Conjugate posterior of one atom: precision S = ‖x‖²/σ² + 1/v² and
/// mean μ = ⟨partial, x⟩ / (σ² S), where `partial` excludes the atom's own fit.
pub fn cluster_posterior<F: Real>(x_sum: &[F], partial_residual: &[F], sigma2: F, v: F) -> (F, F) {
    let xx = dot(x_sum, x_sum);
    let xr = dot(x_sum, partial_residual);
    posterior_from_moments(xx, xr, sigma2, v)
}

#[inline]
fn posterior_from_moments<F: Real>(xx: F, xr: F, sigma2: F, v: F) -> (F, F) {
    let s = xx / sigma2 + F::one() / (v * v);
    (s, xr / sigma2 / s)
}

/// σ² ~ Inv-Gamma(n/2 + shape₀, rss/2 + rate₀); the rate is floored at 1e-300.
pub fn draw_sigma2<F: Real, R: Rng + ?Sized>(rss: F, n: usize, prior: (F, F), rng: &mut R) -> (F, F) {
    let floor = F::lit(1e-300).max(F::min_positive_value());
    let shape = F::from_count(n) / F::lit(2.0) + prior.0;
    let rate = (rss / F::lit(2.0) + prior.1).max(floor);
    (rate / F::gamma(shape, rng), rate)
}

/// Index drawn from unnormalized cumulative weights by inversion.
#[inline]
fn invert_cdf<F: Real, R: Rng + ?Sized>(cdf: &[F], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let u = F::open01(rng) * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// The per-chain RNG: ChaCha8 keyed by the seed, one stream per chain.
pub fn chain_rng(seed: u64, chain_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id as u64);
    rng
}

/// Gibbs updates bound to one dataset and configuration.
pub struct Gibbs<'a, F: Real> {
    data: &'a Dataset<F>,
    config: &'a SamplerConfig<F>,
    pub scratch: SamplerScratch<F>,
}

impl<'a, F: Real> Gibbs<'a, F> {
    pub fn new(data: &'a Dataset<F>, config: &'a SamplerConfig<F>) -> Self {
        let p = data.p();
        let h = config.dp.h;
        let scratch = SamplerScratch {
            order: (0..p as u32).collect(),
            neighbours_on: vec![0; p],
            cluster_sums: Vec::new(),
            cluster_count: vec![0; h],
            label_count: vec![0; h],
            log_w: vec![F::zero(); h],
            cdf: vec![F::zero(); h],
            log_p: vec![F::zero(); h],
            stick_fractions: vec![F::zero(); h],
            log_stick_rest: vec![F::zero(); h],
            cross: vec![F::zero(); h],
            mu_sigma: F::zero(),
            s_h: vec![F::zero(); h],
            mu_h: vec![F::zero(); h],
            log_f: vec![F::zero(); p],
        };
        Gibbs { data, config, scratch }
    }

    fn likelihood_on(&self) -> bool {
        !self.config.prior_only
    }

    /// Prior-consistent random start.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState<F> {
        let (data, cfg) = (self.data, self.config);
        let p = data.p();
        let include = logistic(cfg.ising.a);
        let gamma: Vec<bool> = (0..p).map(|_| F::open01(rng) < include).collect();
        let v = cfg.dp.v;
        let (theta, z, w) = if cfg.prior.is_dp() {
            let h = cfg.dp.h;
            let mut fractions: Vec<F> = (0..h - 1).map(|_| F::beta(F::one(), cfg.dp.alpha, rng)).collect();
            fractions.push(F::one());
            let w = stick_breaking_weights(&fractions).expect("valid stick fractions");
            let theta: Vec<F> = (0..h).map(|_| v * F::std_normal(rng)).collect();
            let mut cdf = Vec::with_capacity(h);
            let mut acc = F::zero();
            for &wh in &w {
                acc = acc + wh;
                cdf.push(acc);
            }
            let z = (0..p).map(|_| invert_cdf(&cdf, rng) as u32).collect();
            (theta, z, w)
        } else {
            let theta = (0..p).map(|_| v * F::std_normal(rng)).collect();
            (theta, (0..p as u32).collect(), Vec::new())
        };
        let var_y = population_variance(&data.y);
        let sigma2 = if var_y > F::zero() && var_y.is_finite() { var_y } else { F::one() };
        let mut state = ChainState {
            gamma,
            z,
            theta,
            w,
            sigma2,
            alpha: cfg.dp.alpha,
            residual: Vec::new(),
        };
        state.residual = state.fresh_residual(data);
        state
    }

    /// One pass of single-site indicator updates in a fresh random order.
    pub fn update_gamma_sweep<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let params = self.config.ising;
        let likelihood = self.likelihood_on();
        let coupled = params.b != F::zero();
        let graph = &data.graph;
        let sc = &mut self.scratch;
        sc.order.shuffle(rng);
        if coupled {
            sc.neighbours_on.iter_mut().for_each(|c| *c = 0);
            for j in (0..graph.len()).filter(|&j| state.gamma[j]) {
                for &k in graph.neighbors(j) {
                    sc.neighbours_on[k as usize] += 1;
                }
            }
        }
        for k in 0..sc.order.len() {
            let j = sc.order[k] as usize;
            let beta = state.beta(j);
            let col_sq = data.x.column_sq_norm(j);
            let selected = state.gamma[j];
            let xj = data.x.column(j);
            let log_f = if !likelihood || beta == F::zero() || col_sq == F::zero() {
                F::zero()
            } else {
                log_bayes_factor(beta, dot(&state.residual, xj), col_sq, selected, state.sigma2)
            };
            let field = if coupled {
                params.local_field(sc.neighbours_on[j] as usize)
            } else {
                params.a
            };
            let log_odds = field + log_f;
            if log_odds.is_nan() {
                return Err(Error::NumericalFailure {
                    voxel: j + 1,
                    message: format!("log Bayes factor is {log_f}"),
                });
            }
            sc.log_f[j] = log_f;
            let now = F::open01(rng) < logistic(log_odds);
            if now != selected {
                state.gamma[j] = now;
                if coupled {
                    for &k in graph.neighbors(j) {
                        let c = &mut sc.neighbours_on[k as usize];
                        *c = if now { *c + 1 } else { *c - 1 };
                    }
                }
                let sign = if now { -beta } else { beta };
                if beta != F::zero() {
                    axpy(sign, xj, &mut state.residual);
                }
            }
        }
        Ok(())
    }

    /// Cluster labels: from `w` for unselected voxels, likelihood-weighted otherwise.
    pub fn update_z<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let h = state.theta.len();
        let likelihood = self.likelihood_on();
        let sc = &mut self.scratch;
        let mut acc = F::zero();
        for k in 0..h {
            let wk = state.w[k];
            sc.log_w[k] = if wk > F::zero() { wk.ln() } else { F::neg_infinity() };
            acc = acc + wk;
            sc.cdf[k] = acc;
        }
        let two_s2 = state.sigma2 + state.sigma2;
        for j in 0..data.p() {
            if !state.gamma[j] || !likelihood {
                state.z[j] = invert_cdf(&sc.cdf[..h], rng) as u32;
                continue;
            }
            let xj = data.x.column(j);
            let col_sq = data.x.column_sq_norm(j);
            let current = state.z[j] as usize;
            let theta_c = state.theta[current];
            let d = dot(&state.residual, xj);
            let mut max = F::neg_infinity();
            for k in 0..h {
                let delta = state.theta[k] - theta_c;
                let lp = sc.log_w[k] + ((delta + delta) * d - delta * delta * col_sq) / two_s2;
                sc.log_p[k] = lp;
                if lp > max {
                    max = lp;
                }
            }
            if !max.is_finite() {
                return Err(Error::NumericalFailure {
                    voxel: j + 1,
                    message: "every cluster has zero probability".into(),
                });
            }
            let mut run = F::zero();
            for k in 0..h {
                run = run + (sc.log_p[k] - max).exp();
                sc.log_p[k] = run;
            }
            let next = invert_cdf(&sc.log_p[..h], rng);
            if next != current {
                state.z[j] = next as u32;
                axpy(theta_c - state.theta[next], xj, &mut state.residual);
            }
        }
        Ok(())
    }

    /// Conjugate normal draw of every cluster atom.
    pub fn update_beta_clusters<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let n = data.n();
        let h = state.theta.len();
        let v = self.config.dp.v;
        let likelihood = self.likelihood_on();
        let sc = &mut self.scratch;
        sc.cluster_sums.resize(h * n, F::zero());
        sc.cluster_count.iter_mut().for_each(|c| *c = 0);
        for j in 0..data.p() {
            if state.gamma[j] {
                let k = state.z[j] as usize;
                let sum = &mut sc.cluster_sums[k * n..(k + 1) * n];
                if sc.cluster_count[k] == 0 {
                    sum.copy_from_slice(data.x.column(j));
                } else {
                    axpy(F::one(), data.x.column(j), sum);
                }
                sc.cluster_count[k] += 1;
            }
        }
        let jacobi = self.config.cluster_update == ClusterUpdate::Jacobi;
        if jacobi {
            for k in 0..h {
                if sc.cluster_count[k] > 0 {
                    sc.cross[k] = dot(&state.residual, &sc.cluster_sums[k * n..(k + 1) * n]);
                }
            }
        }
        for k in 0..h {
            if sc.cluster_count[k] == 0 || !likelihood {
                sc.s_h[k] = F::one() / (v * v);
                sc.mu_h[k] = F::zero();
                let fresh = v * F::std_normal(rng);
                if sc.cluster_count[k] > 0 {
                    let old = state.theta[k];
                    axpy(old - fresh, &sc.cluster_sums[k * n..(k + 1) * n], &mut state.residual);
                }
                state.theta[k] = fresh;
                continue;
            }
            let xh = &sc.cluster_sums[k * n..(k + 1) * n];
            let xx = dot(xh, xh);
            let old = state.theta[k];
            let r_dot = if jacobi { sc.cross[k] } else { dot(&state.residual, xh) };
            let (s, mu) = posterior_from_moments(xx, r_dot + old * xx, state.sigma2, v);
            if !(s > F::zero()) || !mu.is_finite() {
                return Err(Error::NumericalFailure {
                    voxel: 0,
                    message: format!("cluster {} posterior precision {s}, mean {mu}", k + 1),
                });
            }
            sc.s_h[k] = s;
            sc.mu_h[k] = mu;
            let fresh = mu + F::std_normal(rng) / s.sqrt();
            state.theta[k] = fresh;
            axpy(old - fresh, xh, &mut state.residual);
        }
        Ok(())
    }

    /// Gaussian slab: conjugate draw of each voxel's own coefficient.
    pub fn update_beta_voxels<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let v = self.config.dp.v;
        let likelihood = self.likelihood_on();
        for j in 0..data.p() {
            let k = state.z[j] as usize;
            if !state.gamma[j] || !likelihood {
                state.theta[k] = v * F::std_normal(rng);
                continue;
            }
            let xj = data.x.column(j);
            let xx = data.x.column_sq_norm(j);
            let old = state.theta[k];
            let r_dot = dot(&state.residual, xj);
            let (s, mu) = posterior_from_moments(xx, r_dot + old * xx, state.sigma2, v);
            if !mu.is_finite() {
                return Err(Error::NumericalFailure {
                    voxel: j + 1,
                    message: format!("coefficient posterior mean {mu}"),
                });
            }
            let fresh = mu + F::std_normal(rng) / s.sqrt();
            state.theta[k] = fresh;
            axpy(old - fresh, xj, &mut state.residual);
        }
        Ok(())
    }

    /// Stick fractions w'_h ~ Beta(1 + c_h, α + Σ_{k>h} c_k), w'_H = 1.
    pub fn update_weights<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let h = state.theta.len();
        let sc = &mut self.scratch;
        sc.label_count.iter_mut().for_each(|c| *c = 0);
        for &z in &state.z {
            sc.label_count[z as usize] += 1;
        }
        let mut tail: usize = sc.label_count.iter().sum();
        for k in 0..h - 1 {
            tail -= sc.label_count[k];
            let a = F::one() + F::from_count(sc.label_count[k]);
            let b = state.alpha + F::from_count(tail);
            let (ln_w, ln_rest) = F::ln_beta_draw(a, b, rng);
            sc.stick_fractions[k] = ln_w.exp();
            sc.log_stick_rest[k] = ln_rest;
        }
        sc.stick_fractions[h - 1] = F::one();
        state.w = stick_breaking_weights(&sc.stick_fractions[..h])?;
        Ok(())
    }

    /// α | w' ~ Gamma(a₀ + H − 1, b₀ − Σ_{h<H} ln(1 − w'_h)).
    pub fn update_alpha<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) {
        let h = state.theta.len();
        let (a0, b0) = self.config.dp.alpha_prior;
        let log_sum: F = self.scratch.log_stick_rest[..h - 1].iter().copied().sum();
        let shape = a0 + F::from_count(h - 1);
        let rate = b0 - log_sum;
        state.alpha = F::gamma(shape, rng) / rate;
    }

    /// σ² ~ Inv-Gamma(n/2, ‖r‖²/2), shifted by the configured prior.
    pub fn update_sigma2<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) {
        let prior = self.config.sigma2_prior;
        if !self.likelihood_on() {
            if prior.0 > F::zero() {
                state.sigma2 = prior.1 / F::gamma(prior.0, rng);
            }
            return;
        }
        let rss = dot(&state.residual, &state.residual);
        let (draw, rate) = draw_sigma2(rss, self.data.n(), prior, rng);
        self.scratch.mu_sigma = rate;
        state.sigma2 = draw;
    }

    /// One full sweep in the order documented at module level.
    pub fn sweep<R: Rng + ?Sized>(&mut self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        self.update_gamma_sweep(state, rng)?;
        if self.config.prior.is_dp() {
            self.update_z(state, rng)?;
            self.update_beta_clusters(state, rng)?;
            self.update_weights(state, rng)?;
            if self.config.dp.alpha_update == crate::model::AlphaUpdate::Gibbs {
                self.update_alpha(state, rng);
            }
        } else {
            self.update_beta_voxels(state, rng)?;
        }
        self.update_sigma2(state, rng);
        if self.config.check_invariants {
            state.validate(self.data)?;
        }
        Ok(())
    }
}

/// Per-sweep scalar record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord<F = f64> {
    pub iteration: usize,
    pub r2: F,
    pub model_size: usize,
    pub n_clusters: usize,
    pub sigma2: F,
}

/// Thinned post-burn-in state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSnapshot<F = f64> {
    pub iteration: usize,
    pub gamma: Vec<bool>,
    pub eta: Vec<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ChainStatus {
    Completed,
    Failed { iteration: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct ChainTrace<F = f64> {
    pub chain_id: usize,
    pub seed: u64,
    pub prior: PriorKind,
    pub iterations_run: usize,
    pub burn_in: usize,
    /// Post-burn-in sweeps recorded.
    pub kept: usize,
    /// Per-voxel count of kept sweeps with γ_j = 1.
    pub inclusion_counts: Vec<u64>,
    /// Per-voxel sum over kept sweeps of η_j = γ_j β_j.
    pub eta_sum: Vec<F>,
    pub scalars: Vec<SweepRecord<F>>,
    /// Batch size of `inclusion_batches`.
    pub batch_size: usize,
    /// Per-batch, per-voxel inclusion counts over consecutive kept sweeps.
    pub inclusion_batches: Vec<Vec<u32>>,
    pub states: Vec<StateSnapshot<F>>,
    pub status: ChainStatus,
    pub elapsed: Duration,
}

impl<F: Real> ChainTrace<F> {
    pub fn is_complete(&self) -> bool {
        self.status == ChainStatus::Completed
    }

    /// Wall seconds per 1000 sweeps.
    pub fn seconds_per_1000(&self) -> f64 {
        if self.iterations_run == 0 {
            0.0
        } else {
            self.elapsed.as_secs_f64() * 1000.0 / self.iterations_run as f64
        }
    }

    /// Per-batch inclusion fractions of one voxel.
    pub fn inclusion_series(&self, j: usize) -> Vec<F> {
        let size = F::from_count(self.batch_size.max(1));
        self.inclusion_batches.iter().map(|b| F::from_count(b[j] as usize) / size).collect()
    }
}

/// Runs one chain. Configuration problems are errors; a numerical failure
/// mid-run ends the chain and is reported in the trace status.
pub fn run_chain<F: Real>(data: &Dataset<F>, config: &SamplerConfig<F>, chain_id: usize) -> Result<ChainTrace<F>> {
    config.validate()?;
    data.validate()?;
    if config.prior.is_ising() && data.graph.n_edges() == 0 && data.p() > 1 {
        log::warn!("Ising prior on a lattice without edges behaves as the i.i.d. prior");
    }
    let started = Instant::now();
    let mut rng = chain_rng(config.seed, chain_id);
    let mut gibbs = Gibbs::new(data, config);
    let mut state = gibbs.initial_state(&mut rng);
    let p = data.p();
    let kept_total = config.kept_sweeps();
    let batch_size = kept_total.checked_div(config.inclusion_batches).map_or(0, |b| b.max(1));
    let var_y = population_variance(&data.y);
    let mut trace = ChainTrace {
        chain_id,
        seed: config.seed,
        prior: config.prior,
        iterations_run: 0,
        burn_in: config.burn_in,
        kept: 0,
        inclusion_counts: vec![0; p],
        eta_sum: vec![F::zero(); p],
        scalars: Vec::with_capacity(kept_total),
        batch_size,
        inclusion_batches: Vec::new(),
        states: Vec::new(),
        status: ChainStatus::Completed,
        elapsed: Duration::ZERO,
    };
    let mut batch = vec![0u32; p];
    let mut in_batch = 0;
    for t in 1..=config.iterations {
        if let Err(e) = gibbs.sweep(&mut state, &mut rng) {
            log::error!("chain {chain_id} failed at sweep {t}: {e}");
            trace.status = ChainStatus::Failed { iteration: t, message: e.to_string() };
            break;
        }
        if t % config.recompute_interval == 0 {
            state.residual = state.fresh_residual(data);
        }
        trace.iterations_run = t;
        if t <= config.burn_in {
            continue;
        }
        trace.kept += 1;
        for (j, _) in state.gamma.iter().enumerate().filter(|(_, &g)| g) {
            trace.inclusion_counts[j] += 1;
            trace.eta_sum[j] = trace.eta_sum[j] + state.beta(j);
            batch[j] += 1;
        }
        let r2 = if var_y > F::zero() {
            F::one() - population_variance(&state.residual) / var_y
        } else {
            F::nan()
        };
        trace.scalars.push(SweepRecord {
            iteration: t,
            r2,
            model_size: state.model_size(),
            n_clusters: state.occupied_clusters(),
            sigma2: state.sigma2,
        });
        if batch_size > 0 {
            in_batch += 1;
            if in_batch == batch_size {
                trace.inclusion_batches.push(std::mem::replace(&mut batch, vec![0; p]));
                in_batch = 0;
            }
        }
        if config.record_states && (t - config.burn_in).is_multiple_of(config.thin) {
            trace.states.push(StateSnapshot { iteration: t, gamma: state.gamma.clone(), eta: state.eta() });
        }
    }
    trace.elapsed = started.elapsed();
    Ok(trace)
}

/// Runs `config.n_chains` chains concurrently; output is ordered by chain id.
pub fn run_parallel<F: Real>(data: &Dataset<F>, config: &SamplerConfig<F>) -> Result<Vec<ChainTrace<F>>> {
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(data, config, c))
        .collect()
}
