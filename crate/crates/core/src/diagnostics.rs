//! Posterior summaries and evaluation of fitted chains.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGraph;
use crate::model::{population_variance, Dataset};
use crate::sampler::{ChainTrace, StateSnapshot};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary<F = f64> {
    /// Pr(γ_j = 1 | Y), pooled over chains.
    pub inclusion_prob: Vec<F>,
    /// Posterior mean of η_j = γ_j β_j (zero when never selected).
    pub eta_hat: Vec<F>,
    /// Posterior mean of β_j given γ_j = 1 (zero when never selected).
    pub beta_given_selected: Vec<F>,
    /// 1 = lowest inclusion probability; ties broken by ascending voxel index.
    pub rank: Vec<usize>,
    pub n_kept: usize,
}

impl<F: Real> PosteriorSummary<F> {
    /// Point estimate used for RMSE: η̂, or the conditional mean when asked.
    pub fn estimate(&self, conditional: bool) -> &[F] {
        if conditional {
            &self.beta_given_selected
        } else {
            &self.eta_hat
        }
    }
}

fn cmp_f<F: Real>(a: &F, b: &F) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Ranks 1..p by ascending score, ties in ascending index order.
pub fn ranks<F: Real>(scores: &[F]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| cmp_f(&scores[i], &scores[j]).then(i.cmp(&j)));
    let mut rank = vec![0; scores.len()];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos + 1;
    }
    rank
}

/// Pools inclusion counts and η sums over every trace with kept sweeps.
pub fn inclusion_probabilities<F: Real>(traces: &[ChainTrace<F>]) -> Result<PosteriorSummary<F>> {
    let used: Vec<&ChainTrace<F>> = traces.iter().filter(|t| t.kept > 0).collect();
    let first = used.first().ok_or(Error::EmptyTraces)?;
    let p = first.inclusion_counts.len();
    if used.iter().any(|t| t.inclusion_counts.len() != p) {
        return Err(Error::DimensionMismatch("traces cover different numbers of voxels".into()));
    }
    let kept: usize = used.iter().map(|t| t.kept).sum();
    let mut counts = vec![0u64; p];
    let mut eta = vec![F::zero(); p];
    for t in &used {
        for j in 0..p {
            counts[j] += t.inclusion_counts[j];
            eta[j] = eta[j] + t.eta_sum[j];
        }
    }
    let total = F::from_count(kept);
    let inclusion_prob: Vec<F> = counts.iter().map(|&c| F::from_count(c as usize) / total).collect();
    let beta_given_selected = counts
        .iter()
        .zip(&eta)
        .map(|(&c, &e)| if c == 0 { F::zero() } else { e / F::from_count(c as usize) })
        .collect();
    let eta_hat = eta.iter().map(|&e| e / total).collect();
    let rank = ranks(&inclusion_prob);
    Ok(PosteriorSummary { inclusion_prob, eta_hat, beta_given_selected, rank, n_kept: kept })
}

/// Potential scale reduction √(((N−1)/N·W + B/N)/W) for m ≥ 2 chains of
/// common length N, with W the mean within-chain variance and B/N the
/// variance of the chain means.
pub fn gelman_rubin<F: Real>(series: &[Vec<F>]) -> Result<F> {
    let m = series.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 chains, got {m}")));
    }
    let len = series[0].len();
    if len < 2 || series.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidArgument("chains need a common length of at least 2".into()));
    }
    let nf = F::from_count(len);
    let means: Vec<F> = series.iter().map(|s| s.iter().copied().sum::<F>() / nf).collect();
    let w = series
        .iter()
        .zip(&means)
        .map(|(s, &mu)| s.iter().map(|&x| (x - mu) * (x - mu)).sum::<F>() / (nf - F::one()))
        .sum::<F>()
        / F::from_count(m);
    if !(w > F::zero()) {
        return Err(Error::DegenerateSeries("zero within-chain variance in every chain".into()));
    }
    let grand = means.iter().copied().sum::<F>() / F::from_count(m);
    let b_over_n = means.iter().map(|&mu| (mu - grand) * (mu - grand)).sum::<F>() / F::from_count(m - 1);
    let v_hat = (nf - F::one()) / nf * w + b_over_n;
    Ok((v_hat / w).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub statistic: String,
    pub r_hat: f64,
}

/// R̂ for the per-sweep R² and for the batch inclusion series of the top-k
/// voxels by pooled probability. Series that are constant in every chain
/// (a voxel always or never selected) get NaN.
pub fn convergence_report<F: Real>(
    traces: &[ChainTrace<F>],
    summary: &PosteriorSummary<F>,
    top_k: usize,
) -> Result<Vec<ConvergenceRow>> {
    let used: Vec<&ChainTrace<F>> = traces.iter().filter(|t| t.is_complete() && t.kept > 0).collect();
    let mut rows = Vec::new();
    let r_hat = |series: Vec<Vec<F>>| match gelman_rubin(&series) {
        Ok(r) => Ok(r.to_f64_lossy()),
        Err(Error::DegenerateSeries(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    };
    rows.push(ConvergenceRow {
        statistic: "r2".into(),
        r_hat: r_hat(used.iter().map(|t| t.scalars.iter().map(|s| s.r2).collect()).collect())?,
    });
    let mut top: Vec<usize> = (0..summary.rank.len()).collect();
    top.sort_by_key(|&j| std::cmp::Reverse(summary.rank[j]));
    for &j in top.iter().take(top_k) {
        rows.push(ConvergenceRow {
            statistic: format!("inclusion_{}", j + 1),
            r_hat: r_hat(used.iter().map(|t| t.inclusion_series(j)).collect())?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Roc<F = f64> {
    /// (false positive rate, true positive rate), from (0,0) to (1,1).
    pub points: Vec<(F, F)>,
    pub auc: F,
}

/// ROC curve over the distinct score values, ties grouped. The AUC is an
/// exact integer trapezoid sum divided once by 2·P·N, so it coincides with
/// the Mann–Whitney statistic with half credit for ties.
pub fn roc_curve<F: Real>(scores: &[F], truth: &[bool]) -> Result<Roc<F>> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!("{} scores, {} labels", scores.len(), truth.len())));
    }
    let pos = truth.iter().filter(|&&t| t).count() as u128;
    let neg = truth.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateTruth(format!("{pos} true and {neg} null voxels")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| cmp_f(&scores[j], &scores[i]));
    let (pf, nf) = (F::from_count(pos as usize), F::from_count(neg as usize));
    let mut points = vec![(F::zero(), F::zero())];
    let (mut tp, mut fp, mut twice_area) = (0u128, 0u128, 0u128);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut dtp, mut dfp) = (0u128, 0u128);
        while k < order.len() && scores[order[k]] == s {
            if truth[order[k]] {
                dtp += 1;
            } else {
                dfp += 1;
            }
            k += 1;
        }
        twice_area += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        points.push((F::from_count(fp as usize) / nf, F::from_count(tp as usize) / pf));
    }
    let auc = F::lit(twice_area as f64 / (2 * pos * neg) as f64);
    Ok(Roc { points, auc })
}

/// √(Σ_j (η̂_j − η_j)² / p).
pub fn rmse_per_variable<F: Real>(estimate: &[F], truth: &[F]) -> Result<F> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} estimates, {} truths", estimate.len(), truth.len())));
    }
    let ss: F = estimate.iter().zip(truth).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((ss / F::from_count(truth.len())).sqrt())
}

/// Per-kept-sweep R²_t recorded during sampling.
pub fn r2_trace<F: Real>(trace: &ChainTrace<F>) -> Result<Vec<F>> {
    let r2: Vec<F> = trace.scalars.iter().map(|s| s.r2).collect();
    if r2.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateResponse("Var(Y) = 0".into()));
    }
    Ok(r2)
}

/// R²_t = 1 − Var(Y − Xη_t)/Var(Y) recomputed from a stored state.
pub fn r2_from_state<F: Real>(state: &StateSnapshot<F>, data: &Dataset<F>) -> Result<F> {
    let var_y = population_variance(&data.y);
    if !(var_y > F::zero()) {
        return Err(Error::DegenerateResponse("Var(Y) = 0".into()));
    }
    let fit = data.x.mul_vec(&state.eta);
    let r: Vec<F> = data.y.iter().zip(&fit).map(|(&y, &f)| y - f).collect();
    Ok(F::one() - population_variance(&r) / var_y)
}

/// One slice of the rank map. `cells[r * cols + c]` holds the rank at row
/// `r`, column `c`, or `None` where the mask has no voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapSlice {
    /// 1-based axis the slice is orthogonal to.
    pub axis: usize,
    /// 1-based coordinate along `axis`.
    pub index: usize,
    /// 1-based axes spanning rows and columns.
    pub row_axis: usize,
    pub col_axis: usize,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Option<usize>>,
}

pub fn rank_heatmap_slices<F: Real>(
    summary: &PosteriorSummary<F>,
    graph: &LatticeGraph,
    axis: usize,
    slices: &[usize],
) -> Result<Vec<HeatmapSlice>> {
    if graph.dim() != 3 {
        return Err(Error::InvalidDimension(format!("heatmaps need a 3D lattice, got {}D", graph.dim())));
    }
    if !(1..=3).contains(&axis) {
        return Err(Error::InvalidArgument(format!("axis must be 1, 2 or 3, got {axis}")));
    }
    if summary.rank.len() != graph.len() {
        return Err(Error::DimensionMismatch("summary and lattice sizes differ".into()));
    }
    let ext = graph.extents();
    let others: Vec<usize> = (1..=3).filter(|&a| a != axis).collect();
    let (col_axis, row_axis) = (others[0], others[1]);
    let (cols, rows) = (ext[col_axis - 1], ext[row_axis - 1]);
    let mut out = Vec::with_capacity(slices.len());
    for &index in slices {
        if index == 0 || index > ext[axis - 1] {
            return Err(Error::SliceOutOfRange { axis, index, extent: ext[axis - 1] });
        }
        let mut cells = vec![None; rows * cols];
        for (j, c) in graph.coords().iter().enumerate() {
            if c.axis(axis - 1) as usize == index {
                let r = c.axis(row_axis - 1) as usize - 1;
                let col = c.axis(col_axis - 1) as usize - 1;
                cells[r * cols + col] = Some(summary.rank[j]);
            }
        }
        out.push(HeatmapSlice { axis, index, row_axis, col_axis, rows, cols, cells });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²), λ = (√m_e + 0.12 + 0.11/√m_e)·D.
pub fn ks_two_sample<F: Real>(a: &[F], b: &[F]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs two non-empty samples".into()));
    }
    let sorted = |v: &[F]| {
        let mut s: Vec<f64> = v.iter().map(|x| x.to_f64_lossy()).collect();
        s.sort_by(|x, y| x.total_cmp(y));
        s
    };
    let (x, y) = (sorted(a), sorted(b));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(KsTest { statistic: d, p_value: kolmogorov_q(lambda) })
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Monte Carlo standard error of the mean by non-overlapping batch means.
pub fn batch_means_se<F: Real>(series: &[F], batches: usize) -> Result<F> {
    if batches < 2 || series.len() < batches {
        return Err(Error::InvalidArgument(format!(
            "{} values cannot form {batches} batches",
            series.len()
        )));
    }
    let size = series.len() / batches;
    let means: Vec<F> = (0..batches)
        .map(|b| series[b * size..(b + 1) * size].iter().copied().sum::<F>() / F::from_count(size))
        .collect();
    let grand = means.iter().copied().sum::<F>() / F::from_count(batches);
    let var = means.iter().map(|&m| (m - grand) * (m - grand)).sum::<F>() / F::from_count(batches - 1);
    Ok((var / F::from_count(batches)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriorKind;
    use crate::sampler::{chain_rng, ChainStatus, SweepRecord};
    use proptest::prelude::*;
    use std::time::Duration;

    fn trace(counts: Vec<u64>, eta_sum: Vec<f64>, kept: usize) -> ChainTrace<f64> {
        ChainTrace {
            chain_id: 0,
            seed: 0,
            prior: PriorKind::IsingDp,
            iterations_run: kept,
            burn_in: 0,
            kept,
            inclusion_counts: counts,
            eta_sum,
            scalars: Vec::new(),
            batch_size: 1,
            inclusion_batches: Vec::new(),
            states: Vec::new(),
            status: ChainStatus::Completed,
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn probabilities_and_estimates() {
        let t = trace(vec![500, 0, 1000], vec![250.0, 0.0, -1000.0], 1000);
        let s = inclusion_probabilities(&[t]).unwrap();
        assert_eq!(s.inclusion_prob, vec![0.5, 0.0, 1.0]);
        assert_eq!(s.eta_hat, vec![0.25, 0.0, -1.0]);
        assert_eq!(s.beta_given_selected, vec![0.5, 0.0, -1.0]);
        assert_eq!(s.rank, vec![2, 1, 3]);
    }

    #[test]
    fn pooling_equal_chains_averages() {
        let a = trace(vec![10, 40], vec![0.0, 0.0], 100);
        let b = trace(vec![30, 20], vec![0.0, 0.0], 100);
        let pooled = inclusion_probabilities(&[a.clone(), b.clone()]).unwrap();
        let pa = inclusion_probabilities(std::slice::from_ref(&a)).unwrap();
        let pb = inclusion_probabilities(std::slice::from_ref(&b)).unwrap();
        for j in 0..2 {
            assert!((pooled.inclusion_prob[j] - (pa.inclusion_prob[j] + pb.inclusion_prob[j]) / 2.0).abs() < 1e-15);
        }
        assert_eq!(pooled.inclusion_prob, inclusion_probabilities(&[b, a]).unwrap().inclusion_prob);
    }

    #[test]
    fn empty_traces_rejected() {
        assert!(matches!(inclusion_probabilities::<f64>(&[]), Err(Error::EmptyTraces)));
        assert!(matches!(inclusion_probabilities(&[trace(vec![0], vec![0.0], 0)]), Err(Error::EmptyTraces)));
    }

    #[test]
    fn ties_ranked_by_index() {
        assert_eq!(ranks(&[0.3, 0.3, 0.3]), vec![1, 2, 3]);
        assert_eq!(ranks(&[0.9, 0.1, 0.1, 0.5]), vec![4, 1, 2, 3]);
    }

    #[test]
    fn gelman_rubin_edge_cases() {
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let r = gelman_rubin(&[s.clone(), s.clone(), s.clone()]).unwrap();
        assert!((r - (9.0f64 / 10.0).sqrt()).abs() < 1e-14);
        let mut shifted = s.clone();
        shifted.iter_mut().for_each(|x| *x += 10.0);
        assert!(gelman_rubin(&[s.clone(), shifted]).unwrap() > 1.1);
        assert!(matches!(gelman_rubin(&[vec![1.0; 5], vec![1.0; 5]]), Err(Error::DegenerateSeries(_))));
        assert!(gelman_rubin(&[s]).is_err());
    }

    #[test]
    fn gelman_rubin_iid_normal_chains() {
        let mut rng = chain_rng(1, 0);
        let chains: Vec<Vec<f64>> =
            (0..4).map(|_| (0..10_000).map(|_| f64::std_normal(&mut rng)).collect()).collect();
        let r = gelman_rubin(&chains).unwrap();
        assert!((0.99..=1.02).contains(&r), "{r}");
    }

    fn mann_whitney(scores: &[f64], truth: &[bool]) -> f64 {
        let (mut twice, mut pos, mut neg) = (0u128, 0u128, 0u128);
        for (i, &ti) in truth.iter().enumerate() {
            if ti {
                pos += 1;
            } else {
                neg += 1;
            }
            if !ti {
                continue;
            }
            for (k, &tk) in truth.iter().enumerate() {
                if !tk {
                    twice += match scores[i].partial_cmp(&scores[k]).unwrap() {
                        Ordering::Greater => 2,
                        Ordering::Equal => 1,
                        Ordering::Less => 0,
                    };
                }
            }
        }
        twice as f64 / (2 * pos * neg) as f64
    }

    #[test]
    fn auc_extremes() {
        let truth = [true, true, false, false];
        assert_eq!(roc_curve(&[0.9, 0.8, 0.1, 0.0], &truth).unwrap().auc, 1.0);
        let flat = roc_curve(&[0.5; 4], &truth).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(Error::DegenerateTruth(_))));
    }

    proptest! {
        #[test]
        fn auc_equals_mann_whitney(
            data in proptest::collection::vec((0u8..6, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s as f64 / 5.0).collect();
            let truth: Vec<bool> = data.iter().map(|&(_, t)| t).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let roc = roc_curve(&scores, &truth).unwrap();
            prop_assert_eq!(roc.auc, mann_whitney(&scores, &truth));
            prop_assert!(roc.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        }
    }

    #[test]
    fn rmse_examples() {
        let truth: Vec<f64> = (0..1000).map(|j| if j < 125 { 0.6 } else { 0.0 }).collect();
        let r = rmse_per_variable(&vec![0.0; 1000], &truth).unwrap();
        assert!((r - 0.2121).abs() < 5e-5);
        assert_eq!(rmse_per_variable(&truth, &truth).unwrap(), 0.0);
        let mut est = vec![0.0; 16];
        est[3] = -2.0;
        assert_eq!(rmse_per_variable(&est, &[0.0; 16]).unwrap(), 0.5);
        assert!(rmse_per_variable(&est, &[0.0; 3]).is_err());
    }

    #[test]
    fn r2_trace_rejects_degenerate_response() {
        let mut t = trace(vec![0], vec![0.0], 1);
        t.scalars.push(SweepRecord { iteration: 1, r2: f64::NAN, model_size: 0, n_clusters: 0, sigma2: 1.0 });
        assert!(matches!(r2_trace(&t), Err(Error::DegenerateResponse(_))));
    }

    #[test]
    fn heatmap_layout() {
        let g = LatticeGraph::grid(&[3, 2, 2]).unwrap();
        let mut probs = vec![0.1; 12];
        probs[g.index_of(crate::lattice::VoxelCoord::new(2, 1, 2)).unwrap()] = 0.9;
        let rank = ranks(&probs);
        let summary = PosteriorSummary {
            inclusion_prob: probs,
            eta_hat: vec![0.0; 12],
            beta_given_selected: vec![0.0; 12],
            rank,
            n_kept: 1,
        };
        let slices = rank_heatmap_slices(&summary, &g, 3, &[2]).unwrap();
        let s = &slices[0];
        assert_eq!((s.rows, s.cols, s.row_axis, s.col_axis), (2, 3, 2, 1));
        assert_eq!(s.cells[1], Some(12));
        assert!(matches!(
            rank_heatmap_slices(&summary, &g, 3, &[3]),
            Err(Error::SliceOutOfRange { axis: 3, index: 3, extent: 2 })
        ));
        let flat = PosteriorSummary { rank: ranks(&[0.5; 12]), ..summary };
        let mut seen: Vec<usize> = rank_heatmap_slices(&flat, &g, 1, &[1, 2, 3])
            .unwrap()
            .iter()
            .flat_map(|s| s.cells.iter().map(|c| c.unwrap()))
            .collect();
        seen.sort();
        assert_eq!(seen, (1..=12).collect::<Vec<_>>());
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = chain_rng(2, 0);
        let a: Vec<f64> = (0..2000).map(|_| f64::std_normal(&mut rng)).collect();
        let b: Vec<f64> = (0..2000).map(|_| f64::std_normal(&mut rng)).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        let shifted = ks_two_sample(&a, &c).unwrap();
        assert!(shifted.p_value < 1e-6 && shifted.statistic > 0.08);
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
    }

    #[test]
    fn batch_means_of_iid_series() {
        let mut rng = chain_rng(3, 0);
        let s: Vec<f64> = (0..40_000).map(|_| f64::std_normal(&mut rng)).collect();
        let se = batch_means_se(&s, 40).unwrap();
        assert!((se / (1.0 / 200.0) - 1.0).abs() < 0.35, "{se}");
    }
}
