//! The regression model and its priors.
//!
//! `Y = Xη + ε` with `ε ~ N(0, σ² I)` and `η_j = γ_j β_j`. The indicators `γ`
//! carry an Ising prior
//!
//! ```text
//!   log Pr(γ) = a·Σγ_j + γ'Bγ − ψ(a, B)
//! ```
//!
//! where `B` is symmetric with `b` in both the `(j1, j2)` and `(j2, j1)` slots
//! of every neighbor pair. `γ'Bγ` therefore counts each selected edge twice,
//! i.e. `2b·#{selected edges}`. This is the convention under which the lattice
//! closed forms in [`crate::lattice`] hold; the local field used by the
//! sampler is accordingly `a + 2b·(selected neighbors)`. The normalizer ψ is
//! never needed and never computed.
//!
//! Coefficients are drawn from a truncated stick-breaking Dirichlet process:
//! every voxel carries a cluster label `z_j` and `β_j` is the shared atom
//! `θ[z_j]`. Gaussian-slab priors reuse the same layout with one atom per
//! voxel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGraph;
use crate::scalar::Real;

/// Dense n×p design stored column-major, so each predictor is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix<F> {
    n: usize,
    p: usize,
    data: Vec<F>,
    col_sq: Vec<F>,
}

impl<F: Real> DesignMatrix<F> {
    pub fn from_column_major(n: usize, p: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "design buffer has {} values, expected {n} x {p}",
                data.len()
            )));
        }
        let col_sq = data.chunks_exact(n.max(1)).take(p).map(|c| dot(c, c)).collect();
        Ok(DesignMatrix { n, p, data, col_sq })
    }

    pub fn from_row_major(n: usize, p: usize, rows: &[F]) -> Result<Self> {
        if rows.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "design buffer has {} values, expected {n} x {p}",
                rows.len()
            )));
        }
        let mut data = vec![F::zero(); n * p];
        for i in 0..n {
            for j in 0..p {
                data[j * n + i] = rows[i * p + j];
            }
        }
        Self::from_column_major(n, p, data)
    }

    pub fn from_columns(n: usize, columns: Vec<Vec<F>>) -> Result<Self> {
        let p = columns.len();
        let mut data = Vec::with_capacity(n * p);
        for (j, c) in columns.into_iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column {} has {} rows, expected {n}",
                    j + 1,
                    c.len()
                )));
            }
            data.extend(c);
        }
        Self::from_column_major(n, p, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[F] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    /// ‖X_j‖², cached at construction.
    #[inline]
    pub fn column_sq_norm(&self, j: usize) -> F {
        self.col_sq[j]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[j * self.n + i]
    }

    pub fn as_column_major(&self) -> &[F] {
        &self.data
    }

    /// `X·η`.
    pub fn mul_vec(&self, eta: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.n];
        for (j, &e) in eta.iter().enumerate() {
            if e != F::zero() {
                axpy(e, self.column(j), &mut out);
            }
        }
        out
    }

    /// Position of the first non-finite entry as 1-based (row, column).
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k % self.n + 1, k / self.n + 1))
    }
}

#[inline]
pub(crate) fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [F::zero(); 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = F::zero();
    for i in 4 * chunks..n {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
#[inline]
pub(crate) fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Population variance (divides by the length).
pub fn population_variance<F: Real>(v: &[F]) -> F {
    let n = F::from_count(v.len());
    let mean = v.iter().copied().sum::<F>() / n;
    v.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n
}

/// Response, design and lattice, plus the true coefficients for simulations.
#[derive(Clone, Debug)]
pub struct Dataset<F = f64> {
    pub y: Vec<F>,
    pub x: DesignMatrix<F>,
    pub graph: LatticeGraph,
    pub truth: Option<Vec<F>>,
}

impl<F: Real> Dataset<F> {
    pub fn new(y: Vec<F>, x: DesignMatrix<F>, graph: LatticeGraph, truth: Option<Vec<F>>) -> Result<Self> {
        let ds = Dataset { y, x, graph, truth };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() < 2 {
            return Err(Error::DimensionMismatch(format!("need n >= 2, got {}", self.y.len())));
        }
        if self.x.n_cols() == 0 {
            return Err(Error::DimensionMismatch("design has no columns".into()));
        }
        if self.y.len() != self.x.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries but the design has {} rows",
                self.y.len(),
                self.x.n_rows()
            )));
        }
        if self.graph.len() != self.x.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "lattice has {} voxels but the design has {} columns",
                self.graph.len(),
                self.x.n_cols()
            )));
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "response".into(), row: i + 1, column: 1 });
        }
        if let Some((row, column)) = self.x.first_non_finite() {
            return Err(Error::NonFinite { what: "design".into(), row, column });
        }
        if let Some(t) = &self.truth {
            if t.len() != self.p() {
                return Err(Error::DimensionMismatch(format!(
                    "truth has {} entries, expected {}",
                    t.len(),
                    self.p()
                )));
            }
            if let Some(j) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "truth".into(), row: j + 1, column: 1 });
            }
        }
        Ok(())
    }
}

/// Ising hyperparameters: `a` on the diagonal, `b` on every neighbor pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams<F = f64> {
    pub a: F,
    pub b: F,
}

impl<F: Real> IsingParams<F> {
    pub fn new(a: F, b: F) -> Result<Self> {
        let p = IsingParams { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.b.is_finite() || self.b < F::zero() {
            return Err(Error::InvalidArgument(format!(
                "Ising parameters need finite a and b >= 0, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// Conditional log-odds of γ_j = 1 given `selected_neighbors` selected neighbors.
    #[inline]
    pub fn local_field(&self, selected_neighbors: usize) -> F {
        self.a + (self.b + self.b) * F::from_count(selected_neighbors)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaUpdate {
    #[default]
    Fixed,
    /// Conjugate Gamma update given the stick fractions.
    Gibbs,
}

/// Truncated stick-breaking DP settings. `v` is also the slab sd of the Gaussian priors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpConfig<F = f64> {
    /// Truncation level H.
    pub h: usize,
    pub alpha: F,
    /// Base-measure standard deviation: G₀ = N(0, v²).
    pub v: F,
    pub alpha_update: AlphaUpdate,
    /// Gamma(shape, rate) hyperprior on α, used by [`AlphaUpdate::Gibbs`].
    pub alpha_prior: (F, F),
}

impl<F: Real> Default for DpConfig<F> {
    fn default() -> Self {
        DpConfig {
            h: 20,
            alpha: F::one(),
            v: F::lit(10.0),
            alpha_update: AlphaUpdate::Fixed,
            alpha_prior: (F::one(), F::one()),
        }
    }
}

impl<F: Real> DpConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.h < 2 {
            return Err(Error::InvalidArgument(format!("truncation level H must be >= 2, got {}", self.h)));
        }
        if !(self.alpha > F::zero()) || !(self.v > F::zero()) {
            return Err(Error::InvalidArgument(format!(
                "need alpha > 0 and v > 0, got alpha = {}, v = {}",
                self.alpha, self.v
            )));
        }
        if !(self.alpha_prior.0 > F::zero()) || !(self.alpha_prior.1 > F::zero()) {
            return Err(Error::InvalidArgument("alpha hyperprior parameters must be positive".into()));
        }
        Ok(())
    }
}

/// The four priors compared in the simulation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    IidGaussian,
    IsingGaussian,
    IidDp,
    IsingDp,
}

impl PriorKind {
    pub const ALL: [PriorKind; 4] = [
        PriorKind::IidGaussian,
        PriorKind::IsingGaussian,
        PriorKind::IidDp,
        PriorKind::IsingDp,
    ];

    pub fn is_ising(self) -> bool {
        matches!(self, PriorKind::IsingGaussian | PriorKind::IsingDp)
    }

    pub fn is_dp(self) -> bool {
        matches!(self, PriorKind::IidDp | PriorKind::IsingDp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PriorKind::IidGaussian => "iid-gaussian",
            PriorKind::IsingGaussian => "ising-gaussian",
            PriorKind::IidDp => "iid-dp",
            PriorKind::IsingDp => "ising-dp",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown prior '{s}'")))
    }
}

/// Full Gibbs state of one chain.
///
/// `β_j` is never stored: it is `theta[z[j]]`. For DP priors `theta` holds
/// the H cluster atoms; for Gaussian slabs it holds one atom per voxel and
/// `z` is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<F = f64> {
    pub gamma: Vec<bool>,
    pub z: Vec<u32>,
    pub theta: Vec<F>,
    /// Stick-breaking weights (empty for Gaussian slabs).
    pub w: Vec<F>,
    pub sigma2: F,
    pub alpha: F,
    /// Cached `Y − X(β·γ)`.
    pub residual: Vec<F>,
}

impl<F: Real> ChainState<F> {
    #[inline]
    pub fn beta(&self, j: usize) -> F {
        self.theta[self.z[j] as usize]
    }

    /// `η_j = γ_j β_j`.
    pub fn eta(&self) -> Vec<F> {
        (0..self.gamma.len())
            .map(|j| if self.gamma[j] { self.beta(j) } else { F::zero() })
            .collect()
    }

    pub fn model_size(&self) -> usize {
        self.gamma.iter().filter(|&&g| g).count()
    }

    /// Number of distinct atoms used by selected voxels.
    pub fn occupied_clusters(&self) -> usize {
        let mut used = vec![false; self.theta.len()];
        for (j, &g) in self.gamma.iter().enumerate() {
            if g {
                used[self.z[j] as usize] = true;
            }
        }
        used.into_iter().filter(|&u| u).count()
    }

    /// `Y − Xη` from scratch.
    pub fn fresh_residual(&self, data: &Dataset<F>) -> Vec<F> {
        let fit = data.x.mul_vec(&self.eta());
        data.y.iter().zip(fit).map(|(&y, f)| y - f).collect()
    }

    /// Largest relative deviation of the cached residual from a fresh one.
    pub fn residual_drift(&self, data: &Dataset<F>) -> F {
        let fresh = self.fresh_residual(data);
        let scale = fresh.iter().fold(F::one(), |m, v| m.max(v.abs()));
        self.residual
            .iter()
            .zip(&fresh)
            .fold(F::zero(), |m, (&c, &f)| m.max((c - f).abs()))
            / scale
    }

    pub fn validate(&self, data: &Dataset<F>) -> Result<()> {
        let p = data.p();
        if self.gamma.len() != p || self.z.len() != p || self.residual.len() != data.n() {
            return Err(Error::InvalidState("vector lengths disagree with the dataset".into()));
        }
        if !(self.sigma2 > F::zero()) || !self.sigma2.is_finite() {
            return Err(Error::InvalidState(format!("sigma2 = {}", self.sigma2)));
        }
        if let Some(j) = self.z.iter().position(|&z| z as usize >= self.theta.len()) {
            return Err(Error::InvalidState(format!("voxel {} has label {} out of range", j + 1, self.z[j])));
        }
        if !self.w.is_empty() {
            let total: F = self.w.iter().copied().sum();
            if self.w.iter().any(|&w| w < F::zero()) || (total - F::one()).abs() > F::lit(1e-9) {
                return Err(Error::InvalidState(format!("weights sum to {total}")));
            }
        }
        let drift = self.residual_drift(data);
        if drift > F::lit(1e-6) {
            return Err(Error::InvalidState(format!("residual cache drifted by {drift}")));
        }
        Ok(())
    }
}

/// `a·Σγ + γ'Bγ = a·|γ| + 2b·#{edges with both ends selected}`, without ψ.
pub fn ising_log_prior_unnorm<F: Real>(gamma: &[bool], params: &IsingParams<F>, graph: &LatticeGraph) -> F {
    assert_eq!(gamma.len(), graph.len(), "indicator vector must cover every voxel");
    let selected = gamma.iter().filter(|&&g| g).count();
    let both = graph.edges().filter(|&(i, j)| gamma[i] && gamma[j]).count();
    params.a * F::from_count(selected) + (params.b + params.b) * F::from_count(both)
}

/// Number of selected neighbors of `j`.
#[inline]
pub fn selected_neighbors(gamma: &[bool], graph: &LatticeGraph, j: usize) -> usize {
    graph.neighbors(j).iter().filter(|&&l| gamma[l as usize]).count()
}

/// `w_h = w'_h ∏_{k<h} (1 − w'_k)`; requires the last fraction to be exactly 1.
pub fn stick_breaking_weights<F: Real>(w_prime: &[F]) -> Result<Vec<F>> {
    let last = *w_prime
        .last()
        .ok_or_else(|| Error::InvalidArgument("no stick fractions".into()))?;
    if last != F::one() {
        return Err(Error::TruncationViolation(last.to_f64_lossy()));
    }
    if let Some(bad) = w_prime.iter().find(|&&v| !(v >= F::zero() && v <= F::one())) {
        return Err(Error::InvalidArgument(format!("stick fraction {bad} outside [0, 1]")));
    }
    let mut remaining = F::one();
    let mut w = Vec::with_capacity(w_prime.len());
    for &f in &w_prime[..w_prime.len() - 1] {
        w.push(f * remaining);
        remaining = remaining * (F::one() - f);
    }
    // The last stick takes whatever is left, so the weights sum to one exactly
    // up to the rounding of the running sum.
    let used: F = w.iter().copied().sum();
    w.push((F::one() - used).max(F::zero()));
    Ok(w)
}

/// Gaussian log-likelihood of the cached residual.
pub fn log_likelihood<F: Real>(state: &ChainState<F>, data: &Dataset<F>) -> Result<F> {
    if !(state.sigma2 > F::zero()) {
        return Err(Error::InvalidState(format!("sigma2 must be positive, got {}", state.sigma2)));
    }
    let _ = data;
    let n = F::from_count(state.residual.len());
    let rss = dot(&state.residual, &state.residual);
    let two = F::lit(2.0);
    Ok(-(n / two) * (two * F::PI() * state.sigma2).ln() - rss / (two * state.sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ising_quadratic_cube, ising_quadratic_square};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(n: usize, p: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..p)
            .map(|_| (0..n).map(|_| f64::std_normal(&mut rng)).collect())
            .collect();
        let x = DesignMatrix::from_columns(n, cols).unwrap();
        let y = (0..n).map(|_| f64::std_normal(&mut rng)).collect();
        let graph = LatticeGraph::grid(&[p, 1]).unwrap();
        Dataset::new(y, x, graph, None).unwrap()
    }

    fn state_for(data: &Dataset<f64>, gamma: Vec<bool>, theta: Vec<f64>, z: Vec<u32>, sigma2: f64) -> ChainState<f64> {
        let mut s = ChainState {
            gamma,
            z,
            theta,
            w: vec![],
            sigma2,
            alpha: 1.0,
            residual: vec![],
        };
        s.residual = s.fresh_residual(data);
        s
    }

    #[test]
    fn prior_examples() {
        let g = LatticeGraph::grid(&[4, 4]).unwrap();
        let params = IsingParams::new(-1.5, 0.4).unwrap();
        assert_eq!(ising_log_prior_unnorm(&[false; 16], &params, &g), 0.0);
        let mut one = vec![false; 16];
        one[5] = true;
        assert_eq!(ising_log_prior_unnorm(&one, &params, &g), -1.5);
    }

    #[test]
    fn full_blocks_match_closed_forms() {
        let params = IsingParams::new(-2.0, 0.25).unwrap();
        for v in 1..=6usize {
            let g = LatticeGraph::grid(&[v, v]).unwrap();
            let got = ising_log_prior_unnorm(&vec![true; v * v], &params, &g);
            assert_eq!(got, ising_quadratic_square(v as u64, &params.a, &params.b));
        }
        for v in 1..=5usize {
            let g = LatticeGraph::grid(&[v, v, v]).unwrap();
            let got = ising_log_prior_unnorm(&vec![true; v * v * v], &params, &g);
            assert_eq!(got, ising_quadratic_cube(v as u64, &params.a, &params.b));
        }
    }

    #[test]
    fn zero_coupling_is_bernoulli_log_odds() {
        let g = LatticeGraph::grid(&[3, 3, 3]).unwrap();
        let params = IsingParams::<f64>::new(-0.7, 0.0).unwrap();
        let gamma: Vec<bool> = (0..27).map(|j| j % 3 == 0).collect();
        assert!((ising_log_prior_unnorm(&gamma, &params, &g) - (-0.7 * 9.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn flip_changes_prior_by_local_field(bits in proptest::collection::vec(any::<bool>(), 27), j in 0usize..27) {
            let g = LatticeGraph::grid(&[3, 3, 3]).unwrap();
            let params = IsingParams::<f64>::new(-1.1, 0.35).unwrap();
            let mut off = bits.clone();
            off[j] = false;
            let mut on = bits;
            on[j] = true;
            let delta = ising_log_prior_unnorm(&on, &params, &g) - ising_log_prior_unnorm(&off, &params, &g);
            let field = params.local_field(selected_neighbors(&on, &g, j));
            prop_assert!((delta - field).abs() < 1e-12);
        }

        #[test]
        fn stick_weights_sum_to_one(raw in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let mut fractions = raw;
            fractions.push(1.0);
            let w = stick_breaking_weights(&fractions).unwrap();
            let total: f64 = w.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn appending_sticks_keeps_prefix(raw in proptest::collection::vec(0.0f64..1.0, 2..10), extra in 0.0f64..1.0) {
            let mut short = raw.clone();
            short.push(1.0);
            let mut long = raw.clone();
            long.push(extra);
            long.push(1.0);
            let ws = stick_breaking_weights(&short).unwrap();
            let wl = stick_breaking_weights(&long).unwrap();
            for h in 0..raw.len() {
                prop_assert!((ws[h] - wl[h]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stick_examples() {
        assert_eq!(stick_breaking_weights(&[0.5, 0.5, 1.0]).unwrap(), vec![0.5, 0.25, 0.25]);
        assert_eq!(stick_breaking_weights(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(stick_breaking_weights(&[0.5, 0.9]), Err(Error::TruncationViolation(_))));
    }

    #[test]
    fn beta_draws_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut f: Vec<f64> = (0..19).map(|_| f64::beta(1.0, 1.0, &mut rng)).collect();
            f.push(1.0);
            let total: f64 = stick_breaking_weights(&f).unwrap().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn likelihood_examples() {
        let data = toy_dataset(2, 1, 1);
        let mut s = state_for(&data, vec![false], vec![0.0], vec![0], 1.0);
        s.residual = vec![0.0, 0.0];
        let ll = log_likelihood(&s, &data).unwrap();
        assert!((ll + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);

        // Doubling σ with a fixed residual: Δ = −n·ln 2 + (3/8)·rss/σ².
        s.residual = vec![1.0, -2.0];
        let l1 = log_likelihood(&s, &data).unwrap();
        s.sigma2 = 4.0;
        let l2 = log_likelihood(&s, &data).unwrap();
        assert!((l2 - l1 - (-2.0 * 2f64.ln() + 0.375 * 5.0)).abs() < 1e-12);

        s.sigma2 = 0.0;
        assert!(log_likelihood(&s, &data).is_err());
    }

    #[test]
    fn likelihood_matches_density_sum() {
        let data = toy_dataset(7, 4, 3);
        let s = state_for(&data, vec![true, false, true, true], vec![0.3, -1.2], vec![0, 1, 1, 0], 0.7);
        // Independent oracle: sum of per-observation normal log-densities.
        let eta = [0.3, 0.0, -1.2, 0.3];
        let mut oracle = 0.0;
        for i in 0..7 {
            let mean: f64 = (0..4).map(|j| data.x.get(i, j) * eta[j]).sum();
            let z = data.y[i] - mean;
            oracle += -0.5 * (2.0 * std::f64::consts::PI * 0.7).ln() - z * z / (2.0 * 0.7);
        }
        assert!((log_likelihood(&s, &data).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn dataset_validation_reports_position() {
        let mut data = toy_dataset(5, 3, 2);
        let mut cols: Vec<Vec<f64>> = (0..3).map(|j| data.x.column(j).to_vec()).collect();
        cols[1][2] = f64::NAN;
        data.x = DesignMatrix::from_columns(5, cols).unwrap();
        match data.validate() {
            Err(Error::NonFinite { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn design_layouts_agree() {
        let rows = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let a = DesignMatrix::from_row_major(2, 3, &rows).unwrap();
        assert_eq!(a.column(1), &[2.0, 5.0]);
        assert_eq!(a.get(1, 2), 6.0);
        assert_eq!(a.column_sq_norm(0), 17.0);
        assert_eq!(a.mul_vec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    }

    #[test]
    fn beta_is_a_view_of_atoms() {
        let data = toy_dataset(4, 3, 9);
        let s = state_for(&data, vec![true, true, false], vec![2.0, -1.0], vec![1, 1, 0], 1.0);
        assert_eq!(s.beta(0), s.beta(1));
        assert_eq!(s.eta(), vec![-1.0, -1.0, 0.0]);
        assert_eq!(s.occupied_clusters(), 1);
        assert!(s.validate(&data).is_ok());
    }
}
