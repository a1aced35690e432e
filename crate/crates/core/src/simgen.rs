//! Synthetic scalar-on-image data: correlated voxel designs, clustered true
//! effects and noise calibrated to a target signal-to-noise ratio.
//!
//! Design rows are MVN(μ, Σ) with Σ_{jk} = ρ^{‖d_j − d_k‖₁}. On a full box the
//! L1 exponent separates by axis, so Σ = A₃ ⊗ A₂ ⊗ A₁ with AR(1) factors and
//! its Cholesky factor is L₃ ⊗ L₂ ⊗ L₁. Applying an AR(1) factor is the
//! recursion x_t = ρ x_{t−1} + √(1−ρ²) e_t, so a row costs O(p) per axis.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGraph, VoxelCoord};
use crate::model::{population_variance, Dataset, DesignMatrix};
use crate::scalar::Real;

/// Largest p for which a dense p×p Cholesky is attempted.
pub const DENSE_DESIGN_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// One cluster, identical coefficients.
    One,
    /// One cluster, correlated varying coefficients.
    Two,
    /// Two clusters, identical coefficients within each.
    Three,
    /// Two clusters, correlated varying coefficients.
    Four,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::One, Scenario::Two, Scenario::Three, Scenario::Four];

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            3 => Ok(Scenario::Three),
            4 => Ok(Scenario::Four),
            _ => Err(Error::InvalidArgument(format!("scenario must be 1..4, got {k}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
            Scenario::Three => 3,
            Scenario::Four => 4,
        }
    }

    pub fn varying(self) -> bool {
        matches!(self, Scenario::Two | Scenario::Four)
    }
}

/// Axis-aligned block of true predictors, inclusive 1-based bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueCluster<F = f64> {
    pub lo: [u32; 3],
    pub hi: [u32; 3],
    pub level: F,
}

impl<F> TrueCluster<F> {
    pub fn contains(&self, c: &VoxelCoord) -> bool {
        (0..3).all(|a| self.lo[a] <= c.axis(a) && c.axis(a) <= self.hi[a])
    }

    pub fn shape(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| (self.hi[a] - self.lo[a] + 1) as usize)
    }

    pub fn voxel_count(&self) -> usize {
        self.shape().iter().product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise<F = f64> {
    /// ε ~ N(0, sd²).
    Sd(F),
    /// ε rescaled so that Var(Xη)/Var(ε) equals the target exactly.
    TargetSnr(F),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec<F = f64> {
    pub scenario: Scenario,
    pub n: usize,
    pub extents: [usize; 3],
    pub rho_x: F,
    pub mu_range: (F, F),
    pub clusters: Vec<TrueCluster<F>>,
    pub beta_cov_scale: F,
    pub beta_cov_rho: F,
    pub noise: Noise<F>,
}

impl<F: Real> ScenarioSpec<F> {
    /// The published setting: 104 subjects on a 10×10×10 grid.
    pub fn standard(scenario: Scenario) -> Self {
        let noise = match scenario {
            Scenario::One => Noise::Sd(F::lit(200.0)),
            _ => Noise::TargetSnr(F::lit(0.05)),
        };
        ScenarioSpec {
            scenario,
            n: 104,
            extents: [10, 10, 10],
            rho_x: F::lit(0.8),
            mu_range: (F::lit(3.0), F::lit(6.0)),
            clusters: Self::standard_clusters(scenario),
            beta_cov_scale: F::lit(0.1),
            beta_cov_rho: F::lit(0.95),
            noise,
        }
    }

    /// The same scenario on a `side`³ cube, with the blocks' voxel-centre
    /// positions rescaled from the 10³ layout and the SNR held at 5%.
    pub fn scaled(scenario: Scenario, side: usize) -> Self {
        let scale = |d: u32| -> u32 {
            let x = (d as f64 - 0.5) * side as f64 / 10.0 + 0.5;
            (x.round() as u32).clamp(1, side.max(1) as u32)
        };
        let clusters = Self::standard_clusters(scenario)
            .into_iter()
            .map(|c| TrueCluster { lo: c.lo.map(scale), hi: c.hi.map(scale), level: c.level })
            .collect();
        ScenarioSpec {
            extents: [side; 3],
            clusters,
            noise: Noise::TargetSnr(F::lit(0.05)),
            ..Self::standard(scenario)
        }
    }

    fn standard_clusters(scenario: Scenario) -> Vec<TrueCluster<F>> {
        let block = |lo: u32, hi: u32, level: f64| TrueCluster { lo: [lo; 3], hi: [hi; 3], level: F::lit(level) };
        match scenario {
            Scenario::One | Scenario::Two => vec![block(4, 8, 0.6)],
            Scenario::Three | Scenario::Four => vec![block(3, 4, 0.4), block(6, 9, 1.0)],
        }
    }

    pub fn p(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 subjects, got {}", self.n)));
        }
        if self.extents.contains(&0) {
            return Err(Error::InvalidDimension(format!("extents {:?}", self.extents)));
        }
        let unit = |x: F| x >= F::zero() && x < F::one();
        if !unit(self.rho_x) || !unit(self.beta_cov_rho) {
            return Err(Error::InvalidArgument("correlations must lie in [0, 1)".into()));
        }
        if !(self.mu_range.0 <= self.mu_range.1) || !(self.beta_cov_scale >= F::zero()) {
            return Err(Error::InvalidArgument("invalid mean range or coefficient scale".into()));
        }
        for c in &self.clusters {
            for a in 0..3 {
                if c.lo[a] == 0 || c.lo[a] > c.hi[a] || c.hi[a] as usize > self.extents[a] {
                    return Err(Error::InvalidArgument(format!(
                        "cluster {:?}..{:?} does not fit extents {:?}",
                        c.lo, c.hi, self.extents
                    )));
                }
            }
        }
        match self.noise {
            Noise::Sd(s) if !(s >= F::zero()) => Err(Error::InvalidArgument(format!("noise sd {s}"))),
            Noise::TargetSnr(t) if !(t > F::zero()) => Err(Error::InvalidArgument(format!("target SNR {t}"))),
            _ => Ok(()),
        }
    }
}

/// Applies the lower Cholesky factor of an AR(1) correlation matrix along one
/// axis of a d1-fastest box array, in place.
pub fn ar1_along_axis<F: Real>(values: &mut [F], shape: [usize; 3], axis: usize, rho: F) {
    let stride = match axis {
        0 => 1,
        1 => shape[0],
        _ => shape[0] * shape[1],
    };
    let len = shape[axis];
    let innov = (F::one() - rho * rho).sqrt();
    let total: usize = shape.iter().product();
    for start in 0..total {
        // `start` is the first element of a line along `axis`.
        if (start / stride) % len != 0 {
            continue;
        }
        for t in 1..len {
            let k = start + t * stride;
            values[k] = rho * values[k - stride] + innov * values[k];
        }
    }
}

/// Maps i.i.d. N(0,1) values to N(0, Σ) on a box with Σ = ρ^{L1 distance}.
pub fn kronecker_transform<F: Real>(values: &mut [F], shape: [usize; 3], rho: F) {
    for axis in 0..3 {
        if shape[axis] > 1 {
            ar1_along_axis(values, shape, axis, rho);
        }
    }
}

/// Dense lower Cholesky factor (row-major) of Σ_{jk} = ρ^{‖d_j − d_k‖₁}.
pub fn dense_cholesky<F: Real>(coords: &[VoxelCoord], rho: F) -> Result<Vec<F>> {
    let p = coords.len();
    if p > DENSE_DESIGN_CAP {
        return Err(Error::InvalidArgument(format!(
            "dense factorization limited to p <= {DENSE_DESIGN_CAP}, got {p}"
        )));
    }
    let mut l = vec![F::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let sigma = rho.powi(coords[i].manhattan(&coords[j]) as i32);
            let mut s = sigma;
            for k in 0..j {
                s = s - l[i * p + k] * l[j * p + k];
            }
            if i == j {
                assert!(s > F::zero(), "correlation matrix is not positive definite");
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(l)
}

fn apply_lower<F: Real>(l: &[F], e: &[F], out: &mut [F]) {
    let p = e.len();
    for i in 0..p {
        let row = &l[i * p..i * p + i + 1];
        out[i] = row.iter().zip(e).map(|(&a, &b)| a * b).sum();
    }
}

fn uniform<F: Real, R: Rng + ?Sized>(lo: F, hi: F, rng: &mut R) -> F {
    lo + (hi - lo) * F::open01(rng)
}

/// n rows of MVN(μ, Σ) over the voxels of `graph`, column-major.
///
/// Full boxes use the Kronecker route; irregular masks fall back to a dense
/// Cholesky factor.
pub fn correlated_design<F: Real, R: Rng + ?Sized>(
    n: usize,
    graph: &LatticeGraph,
    rho: F,
    mu: &[F],
    rng: &mut R,
) -> Result<DesignMatrix<F>> {
    let p = graph.len();
    if mu.len() != p {
        return Err(Error::DimensionMismatch(format!("{} means for {p} voxels", mu.len())));
    }
    let dense = if graph.is_full_box() { None } else { Some(dense_cholesky(graph.coords(), rho)?) };
    let shape = graph.extents();
    let mut data = vec![F::zero(); n * p];
    let mut e = vec![F::zero(); p];
    let mut row = vec![F::zero(); p];
    for i in 0..n {
        e.iter_mut().for_each(|v| *v = F::std_normal(rng));
        match &dense {
            None => {
                kronecker_transform(&mut e, shape, rho);
                row.copy_from_slice(&e);
            }
            Some(l) => apply_lower(l, &e, &mut row),
        }
        for j in 0..p {
            data[j * n + i] = row[j] + mu[j];
        }
    }
    DesignMatrix::from_column_major(n, p, data)
}

/// Design matrix for a scenario: μ_j ~ Unif(mu_range) once, then correlated rows.
pub fn generate_design<F: Real, R: Rng + ?Sized>(spec: &ScenarioSpec<F>, rng: &mut R) -> Result<DesignMatrix<F>> {
    Ok(generate_design_with_means(spec, rng)?.0)
}

fn generate_design_with_means<F: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<F>,
    rng: &mut R,
) -> Result<(DesignMatrix<F>, Vec<F>)> {
    spec.validate()?;
    let graph = LatticeGraph::grid(&spec.extents)?;
    let mu: Vec<F> = (0..graph.len()).map(|_| uniform(spec.mu_range.0, spec.mu_range.1, rng)).collect();
    let x = correlated_design(spec.n, &graph, spec.rho_x, &mu, rng)?;
    Ok((x, mu))
}

/// Truth coefficients: constant per cluster, or MVN(level, s·ρ^{L1}) within
/// each cluster for the varying scenarios. Zero off the clusters.
pub fn true_coefficients<F: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<F>,
    graph: &LatticeGraph,
    rng: &mut R,
) -> Vec<F> {
    let mut eta = vec![F::zero(); graph.len()];
    for cluster in &spec.clusters {
        let shape = cluster.shape();
        let mut field: Vec<F> = vec![F::zero(); cluster.voxel_count()];
        if spec.scenario.varying() {
            field.iter_mut().for_each(|v| *v = F::std_normal(rng));
            kronecker_transform(&mut field, shape, spec.beta_cov_rho);
            let sd = spec.beta_cov_scale.sqrt();
            field.iter_mut().for_each(|v| *v = *v * sd);
        }
        let mut k = 0;
        for d3 in cluster.lo[2]..=cluster.hi[2] {
            for d2 in cluster.lo[1]..=cluster.hi[1] {
                for d1 in cluster.lo[0]..=cluster.hi[0] {
                    let j = graph
                        .index_of(VoxelCoord::new(d1, d2, d3))
                        .expect("validated cluster lies inside the grid");
                    eta[j] = cluster.level + field[k];
                    k += 1;
                }
            }
        }
    }
    eta
}

/// A generated dataset with the realized generating quantities.
#[derive(Clone, Debug)]
pub struct Simulated<F = f64> {
    pub data: Dataset<F>,
    pub mu: Vec<F>,
    pub noise_sd: F,
    pub snr: F,
}

pub fn generate_scenario<F: Real, R: Rng + ?Sized>(spec: &ScenarioSpec<F>, rng: &mut R) -> Result<Simulated<F>> {
    let (x, mu) = generate_design_with_means(spec, rng)?;
    let graph = LatticeGraph::grid(&spec.extents)?;
    let eta = true_coefficients(spec, &graph, rng);
    let fit = x.mul_vec(&eta);
    let mut eps: Vec<F> = (0..spec.n).map(|_| F::std_normal(rng)).collect();
    let noise_sd = match spec.noise {
        Noise::Sd(sd) => {
            eps.iter_mut().for_each(|e| *e = *e * sd);
            sd
        }
        Noise::TargetSnr(target) => {
            let signal = population_variance(&fit);
            if !(signal > F::zero()) {
                return Err(Error::InvalidArgument("target SNR needs a nonzero signal".into()));
            }
            let scale = (signal / target / population_variance(&eps)).sqrt();
            eps.iter_mut().for_each(|e| *e = *e * scale);
            (signal / target).sqrt()
        }
    };
    let y: Vec<F> = fit.iter().zip(&eps).map(|(&f, &e)| f + e).collect();
    let data = Dataset::new(y, x, graph, Some(eta))?;
    let snr = if noise_sd > F::zero() { realized_snr(&data)? } else { F::infinity() };
    Ok(Simulated { data, mu, noise_sd, snr })
}

/// Var(Xη) / Var(Y − Xη), population variances.
pub fn realized_snr<F: Real>(data: &Dataset<F>) -> Result<F> {
    let eta = data.truth.as_ref().ok_or(Error::MissingTruth)?;
    let fit = data.x.mul_vec(eta);
    let eps: Vec<F> = data.y.iter().zip(&fit).map(|(&y, &f)| y - f).collect();
    let noise = population_variance(&eps);
    if !(noise > F::zero()) {
        return Err(Error::DegenerateResponse("noise variance is zero".into()));
    }
    Ok(population_variance(&fit) / noise)
}

/// Response independent of X, normal with the mean and variance of `data.y`.
pub fn generate_null_response<F: Real, R: Rng + ?Sized>(data: &Dataset<F>, rng: &mut R) -> Vec<F> {
    let n = data.y.len();
    let mean = data.y.iter().copied().sum::<F>() / F::from_count(n.max(1));
    let sd = population_variance(&data.y).sqrt();
    (0..n).map(|_| mean + sd * F::std_normal(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::chain_rng;

    #[test]
    fn kronecker_factor_equals_dense_cholesky() {
        for (shape, rho) in [([4, 3, 2], 0.8), ([8, 8, 8], 0.8), ([5, 1, 3], 0.3)] {
            let g = LatticeGraph::grid(&shape).unwrap();
            let l = dense_cholesky(g.coords(), rho).unwrap();
            let mut rng = chain_rng(11, 0);
            let e: Vec<f64> = (0..g.len()).map(|_| f64::std_normal(&mut rng)).collect();
            let mut dense = vec![0.0; g.len()];
            apply_lower(&l, &e, &mut dense);
            let mut kron = e.clone();
            kronecker_transform(&mut kron, shape, rho);
            for (a, b) in dense.iter().zip(&kron) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn neighbour_correlation_approaches_rho() {
        let spec = ScenarioSpec::<f64> { n: 20_000, extents: [2, 1, 1], ..ScenarioSpec::standard(Scenario::One) };
        let g = LatticeGraph::grid(&spec.extents).unwrap();
        let mu = vec![0.0, 0.0];
        let x = correlated_design(spec.n, &g, 0.8, &mu, &mut chain_rng(1, 0)).unwrap();
        let r = correlation(x.column(0), x.column(1));
        assert!((r - 0.8).abs() < 0.01, "{r}");
    }

    #[test]
    fn zero_rho_gives_uncorrelated_columns() {
        let g = LatticeGraph::grid(&[3, 1, 1]).unwrap();
        let x = correlated_design(20_000, &g, 0.0, &[0.0; 3], &mut chain_rng(2, 0)).unwrap();
        assert!(correlation(x.column(0), x.column(1)).abs() < 0.03);
        assert!(correlation(x.column(0), x.column(2)).abs() < 0.03);
    }

    #[test]
    fn irregular_mask_uses_dense_route() {
        let coords = vec![VoxelCoord::new(1, 1, 1), VoxelCoord::new(2, 1, 1), VoxelCoord::new(1, 3, 1)];
        let g = LatticeGraph::from_coords(3, coords).unwrap();
        assert!(!g.is_full_box());
        let x = correlated_design(40_000, &g, 0.8, &[1.0, 2.0, 3.0], &mut chain_rng(3, 0)).unwrap();
        assert!((correlation(x.column(0), x.column(1)) - 0.8).abs() < 0.01);
        assert!((correlation(x.column(0), x.column(2)) - 0.64).abs() < 0.012);
        let mean2 = x.column(2).iter().sum::<f64>() / 40_000.0;
        assert!((mean2 - 3.0).abs() < 0.02);
    }

    #[test]
    fn scenario_one_support_and_levels() {
        let sim = generate_scenario(&ScenarioSpec::<f64>::standard(Scenario::One), &mut chain_rng(4, 0)).unwrap();
        let eta = sim.data.truth.as_ref().unwrap();
        let support: Vec<usize> = (0..1000).filter(|&j| eta[j] != 0.0).collect();
        assert_eq!(support.len(), 125);
        assert!(support.iter().all(|&j| eta[j] == 0.6));
        for &j in &support {
            let c = sim.data.graph.coord(j);
            assert!((4..=8).contains(&c.d1) && (4..=8).contains(&c.d2) && (4..=8).contains(&c.d3));
        }
        assert!((sim.snr - 0.05).abs() < 0.03, "{}", sim.snr);
    }

    #[test]
    fn scenario_three_two_levels() {
        let sim = generate_scenario(&ScenarioSpec::<f64>::standard(Scenario::Three), &mut chain_rng(5, 0)).unwrap();
        let eta = sim.data.truth.as_ref().unwrap();
        assert_eq!(eta.iter().filter(|&&v| v == 0.4).count(), 8);
        assert_eq!(eta.iter().filter(|&&v| v == 1.0).count(), 64);
        assert_eq!(eta.iter().filter(|&&v| v != 0.0).count(), 72);
        assert!((sim.snr - 0.05).abs() < 1e-9);
    }

    #[test]
    fn varying_coefficients_have_target_covariance() {
        let spec = ScenarioSpec::<f64> {
            extents: [3, 1, 1],
            clusters: vec![TrueCluster { lo: [1, 1, 1], hi: [3, 1, 1], level: 0.6 }],
            ..ScenarioSpec::standard(Scenario::Two)
        };
        let g = LatticeGraph::grid(&spec.extents).unwrap();
        let mut rng = chain_rng(6, 0);
        let reps = 40_000;
        let draws: Vec<Vec<f64>> = (0..reps).map(|_| true_coefficients(&spec, &g, &mut rng)).collect();
        let col = |j: usize| draws.iter().map(|d| d[j]).collect::<Vec<_>>();
        let (c0, c2) = (col(0), col(2));
        let m0 = c0.iter().sum::<f64>() / reps as f64;
        assert!((m0 - 0.6).abs() < 4.0 * (0.1f64 / reps as f64).sqrt());
        let cov = c0.iter().zip(&c2).map(|(a, b)| (a - m0) * (b - 0.6)).sum::<f64>() / reps as f64;
        assert!((cov - 0.1 * 0.95f64.powi(2)).abs() < 0.004, "{cov}");
    }

    #[test]
    fn target_snr_is_exact_and_zero_noise_is_exact_fit() {
        let mut spec = ScenarioSpec::<f64>::scaled(Scenario::Two, 6);
        spec.noise = Noise::TargetSnr(0.05);
        let sim = generate_scenario(&spec, &mut chain_rng(7, 0)).unwrap();
        assert!((realized_snr(&sim.data).unwrap() - 0.05).abs() < 1e-9);
        spec.noise = Noise::Sd(0.0);
        let sim = generate_scenario(&spec, &mut chain_rng(7, 0)).unwrap();
        let fit = sim.data.x.mul_vec(sim.data.truth.as_ref().unwrap());
        assert_eq!(sim.data.y, fit);
        assert!(sim.snr.is_infinite());
        assert!(matches!(realized_snr(&sim.data), Err(Error::DegenerateResponse(_))));
    }

    #[test]
    fn scaled_blocks() {
        let s1 = ScenarioSpec::<f64>::scaled(Scenario::One, 6);
        assert_eq!((s1.clusters[0].lo, s1.clusters[0].hi), ([3; 3], [5; 3]));
        let s3 = ScenarioSpec::<f64>::scaled(Scenario::Three, 6);
        assert_eq!(s3.clusters[0].voxel_count(), 8);
        assert_eq!(s3.clusters[1].voxel_count(), 27);
        let same = ScenarioSpec::<f64>::scaled(Scenario::Three, 10);
        assert_eq!(same.clusters, ScenarioSpec::<f64>::standard(Scenario::Three).clusters);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let spec = ScenarioSpec::<f64>::scaled(Scenario::Four, 5);
        let a = generate_scenario(&spec, &mut chain_rng(8, 0)).unwrap();
        let b = generate_scenario(&spec, &mut chain_rng(8, 0)).unwrap();
        assert_eq!(a.data.y, b.data.y);
        assert_eq!(a.data.x, b.data.x);
        assert_eq!(a.data.truth, b.data.truth);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = ScenarioSpec::<f64>::standard(Scenario::One);
        spec.extents = [6, 6, 6];
        assert!(spec.validate().is_err());
        let mut spec = ScenarioSpec::<f64>::standard(Scenario::One);
        spec.rho_x = 1.0;
        assert!(spec.validate().is_err());
        assert!(Scenario::from_number(5).is_err());
    }

    #[test]
    fn null_response_moments() {
        let sim = generate_scenario(&ScenarioSpec::<f64>::scaled(Scenario::One, 4), &mut chain_rng(9, 0)).unwrap();
        let mut data = sim.data.clone();
        data.y = (0..5000).map(|i| 100.0 + (i % 7) as f64).collect();
        let mut rng = chain_rng(10, 0);
        let yn = generate_null_response(&data, &mut rng);
        let m = yn.iter().sum::<f64>() / 5000.0;
        let ref_var = population_variance(&data.y);
        assert!((m - 103.0).abs() < 3.0 * (ref_var / 5000.0).sqrt());
        let v = population_variance(&yn);
        assert!((v - ref_var).abs() < 3.0 * ref_var * (2.0 / 5000.0f64).sqrt());
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
