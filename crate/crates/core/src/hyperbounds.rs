//! Admissible Ising hyperparameters.
//!
//! The region keeps the sampler away from both degenerate ends of the Ising
//! prior. An upper bound on `a` makes the quadratic form `a'γ + γ'Bγ` of a
//! large selected block negative, so it does not select everything. A lower
//! bound makes a block of roughly `π·p` voxels beat the empty model by the
//! expected log-likelihood gain `n·R²/(2(1−R²))`.
//!
//! Both bounds are affine in `b`:
//!
//! ```text
//!   a_lower(b) = lower.intercept + lower.slope * b
//!   a_upper(b) = upper.intercept + upper.slope * b
//! ```
//!
//! and `b_max` is where they meet. Everything is generic over
//! [`BoundScalar`], so with `BigRational` inputs every boundary decision is
//! exact. Floating inputs apply [`BoundScalar::strict_slack`] on each side.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ising_quadratic_cube, ising_quadratic_square, pair_count_cube, pair_count_square};
use crate::model::DesignMatrix;
use crate::scalar::{integer_root_floor, BoundScalar, Real};

/// Where the expected R² comes from, and whether the relaxed lower bound is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsMode {
    /// R² is a user expectation.
    ExpectedR2,
    /// R² is the best single-predictor R² of the data (see [`max_simple_r2`]).
    DataR2,
    /// 3D only: the lower bound only asks one voxel to beat the null model.
    Relaxed,
}

impl fmt::Display for BoundsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundsMode::ExpectedR2 => "expected-r2",
            BoundsMode::DataR2 => "data-r2",
            BoundsMode::Relaxed => "relaxed",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BoundsInput<S> {
    pub n: u64,
    pub p: u64,
    pub dim: usize,
    /// Target fraction of selected voxels, in (0, 1).
    pub pi: S,
    /// Expected or data-derived R², in (0, 1).
    pub r2: S,
    pub mode: BoundsMode,
}

impl<S: BoundScalar> BoundsInput<S> {
    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (S::zero(), S::one());
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidDimension(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if self.n < 2 || self.p < 2 {
            return Err(Error::InvalidArgument(format!(
                "need n >= 2 and p >= 2, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if !(self.pi > zero && self.pi < one) {
            return Err(Error::InvalidArgument(format!("pi must lie in (0, 1), got {:?}", self.pi)));
        }
        if !(self.r2 > zero && self.r2 < one) {
            return Err(Error::InvalidArgument(format!("R² must lie in (0, 1), got {:?}", self.r2)));
        }
        if self.mode == BoundsMode::Relaxed && self.dim != 3 {
            return Err(Error::InvalidArgument("the relaxed bound is defined for 3D lattices only".into()));
        }
        Ok(())
    }

    /// −n·R² / (2(1 − R²)), the log-likelihood gain a selected block must overcome.
    pub fn null_model_rhs(&self) -> S {
        let n = S::count(self.n);
        let two = S::count(2);
        -(n * self.r2.clone()) / (two * (S::one() - self.r2.clone()))
    }
}

/// `intercept + slope * b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine<S> {
    pub intercept: S,
    pub slope: S,
}

impl<S: BoundScalar> Affine<S> {
    pub fn at(&self, b: &S) -> S {
        self.intercept.clone() + self.slope.clone() * b.clone()
    }
}

#[derive(Clone, Debug)]
pub struct HyperRegion<S> {
    pub dim: usize,
    pub mode: BoundsMode,
    /// Side length of the block standing in for the selected voxels.
    pub v: u64,
    /// Side length of the largest block used for the upper bound (3D only).
    pub v_max: Option<u64>,
    /// −n·R² / (2(1 − R²)).
    pub rhs: S,
    pub a_lower: Affine<S>,
    pub a_upper: Affine<S>,
    /// Where the two boundaries cross; `None` if they are parallel and the
    /// region is unbounded in `b`.
    pub b_max: Option<S>,
}

/// Result of testing a point against a region.
#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    Interior,
    /// Within the numerical slack of at least one boundary.
    Boundary(String),
    Outside(String),
}

impl Membership {
    pub fn is_interior(&self) -> bool {
        matches!(self, Membership::Interior)
    }
}

#[derive(Clone, Debug)]
pub struct Recommendation<S> {
    pub a: S,
    pub b: S,
    pub membership: Membership,
}

/// V = floor((π·p)^{1/d}).
pub fn sparsity_side_length<S: BoundScalar>(pi: &S, p: u64, dim: usize) -> Result<u64> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidDimension(format!("dim must be 2 or 3, got {dim}")));
    }
    let target = pi.clone() * S::count(p);
    if target < S::one() {
        return Err(Error::TooSparse(target.approx()));
    }
    Ok(integer_root_floor(&target, dim as u32))
}

/// Best R² over all single-predictor regressions with intercept.
#[derive(Clone, Copy, Debug)]
pub struct SimpleR2<F> {
    pub r2: F,
    /// 0-based column achieving it.
    pub column: usize,
    pub skipped_constant_columns: usize,
}

pub fn max_simple_r2<F: Real>(x: &DesignMatrix<F>, y: &[F]) -> Result<SimpleR2<F>> {
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "response has {} entries but the design has {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    let n = F::from_count(y.len());
    let y_mean = y.iter().copied().sum::<F>() / n;
    let syy: F = y.iter().map(|&v| (v - y_mean) * (v - y_mean)).sum();
    if syy <= F::zero() {
        return Err(Error::DegenerateResponse("response has zero variance".into()));
    }
    let mut best: Option<(F, usize)> = None;
    let mut skipped = 0;
    for j in 0..x.n_cols() {
        let col = x.column(j);
        let x_mean = col.iter().copied().sum::<F>() / n;
        let (mut sxx, mut sxy) = (F::zero(), F::zero());
        for (&xi, &yi) in col.iter().zip(y) {
            let dx = xi - x_mean;
            sxx = sxx + dx * dx;
            sxy = sxy + dx * (yi - y_mean);
        }
        if sxx <= F::zero() {
            log::warn!("column {} is constant; skipped in the simple-regression R² scan", j + 1);
            skipped += 1;
            continue;
        }
        let r2 = (sxy * sxy / (sxx * syy)).min(F::one());
        if best.is_none_or(|(b, _)| r2 > b) {
            best = Some((r2, j));
        }
    }
    let (r2, column) = best.ok_or_else(|| Error::DegenerateResponse("every predictor column is constant".into()))?;
    Ok(SimpleR2 {
        r2,
        column,
        skipped_constant_columns: skipped,
    })
}

/// Dispatches on `input.dim` and `input.mode`.
pub fn bounds<S: BoundScalar>(input: &BoundsInput<S>) -> Result<HyperRegion<S>> {
    match (input.dim, input.mode) {
        (3, BoundsMode::Relaxed) => bounds_3d_relaxed(input),
        (3, _) => bounds_3d(input),
        _ => bounds_2d(input),
    }
}

/// 2D region: a + 8b < 0 and (a+8b)V² − 12bV + 4b > rhs.
pub fn bounds_2d<S: BoundScalar>(input: &BoundsInput<S>) -> Result<HyperRegion<S>> {
    input.validate()?;
    if input.dim != 2 {
        return Err(Error::InvalidDimension("bounds_2d needs dim = 2".into()));
    }
    let v = sparsity_side_length(&input.pi, input.p, 2)?;
    let rhs = input.null_model_rhs();
    let block = S::count(v * v);
    let pairs = S::count(pair_count_square(v)?);
    let a_lower = Affine {
        intercept: rhs.clone() / block.clone(),
        slope: -(S::count(2) * pairs) / block,
    };
    let a_upper = Affine {
        intercept: S::zero(),
        slope: -S::count(8),
    };
    finish(input, v, None, rhs, a_lower, a_upper)
}

/// 3D region: the largest cube (V_max = floor(p^{1/3})) has a negative
/// quadratic form, and the V-cube clears the null model.
pub fn bounds_3d<S: BoundScalar>(input: &BoundsInput<S>) -> Result<HyperRegion<S>> {
    input.validate()?;
    if input.dim != 3 {
        return Err(Error::InvalidDimension("bounds_3d needs dim = 3".into()));
    }
    let v = sparsity_side_length(&input.pi, input.p, 3)?;
    let v_max = integer_root_floor(&S::count(input.p), 3);
    let rhs = input.null_model_rhs();
    let block = S::count(v * v * v);
    let a_lower = Affine {
        intercept: rhs.clone() / block.clone(),
        slope: -(S::count(2) * S::count(pair_count_cube(v)?)) / block,
    };
    let a_upper = upper_from_vmax(v_max)?;
    finish(input, v, Some(v_max), rhs, a_lower, a_upper)
}

/// Relaxed 3D region: a ≥ rhs, upper bound as in [`bounds_3d`].
pub fn bounds_3d_relaxed<S: BoundScalar>(input: &BoundsInput<S>) -> Result<HyperRegion<S>> {
    input.validate()?;
    if input.dim != 3 {
        return Err(Error::InvalidDimension("the relaxed bound needs dim = 3".into()));
    }
    let v = sparsity_side_length(&input.pi, input.p, 3)?;
    let v_max = integer_root_floor(&S::count(input.p), 3);
    let rhs = input.null_model_rhs();
    let a_lower = Affine {
        intercept: rhs.clone(),
        slope: S::zero(),
    };
    let a_upper = upper_from_vmax(v_max)?;
    let mut region = finish(input, v, Some(v_max), rhs, a_lower, a_upper)?;
    region.mode = BoundsMode::Relaxed;
    Ok(region)
}

fn upper_from_vmax<S: BoundScalar>(v_max: u64) -> Result<Affine<S>> {
    if v_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "p is too small for a 3D upper bound (V_max = {v_max})"
        )));
    }
    let block = S::count(v_max * v_max * v_max);
    Ok(Affine {
        intercept: S::zero(),
        slope: -(S::count(2) * S::count(pair_count_cube(v_max)?)) / block,
    })
}

fn finish<S: BoundScalar>(
    input: &BoundsInput<S>,
    v: u64,
    v_max: Option<u64>,
    rhs: S,
    a_lower: Affine<S>,
    a_upper: Affine<S>,
) -> Result<HyperRegion<S>> {
    let gap0 = a_upper.intercept.clone() - a_lower.intercept.clone();
    let closing = a_lower.slope.clone() - a_upper.slope.clone();
    let b_max = if closing > S::zero() {
        let b = gap0.clone() / closing;
        if b <= S::strict_slack() {
            return Err(Error::NoFeasibleRegion(format!(
                "the boundaries cross at b = {:.6} <= 0 (V = {v}, rhs = {:.6})",
                b.approx(),
                rhs.approx()
            )));
        }
        Some(b)
    } else if gap0 > S::strict_slack() {
        None
    } else {
        return Err(Error::NoFeasibleRegion(format!(
            "lower bound {:.6} + {:.6} b never falls below upper bound {:.6} b",
            a_lower.intercept.approx(),
            a_lower.slope.approx(),
            a_upper.slope.approx()
        )));
    };
    Ok(HyperRegion {
        dim: input.dim,
        mode: input.mode,
        v,
        v_max,
        rhs,
        a_lower,
        a_upper,
        b_max,
    })
}

struct Constraint<S> {
    text: String,
    /// Positive when satisfied.
    margin: S,
    strict: bool,
}

impl<S: BoundScalar> HyperRegion<S> {
    /// Tests `(a, b)` by re-evaluating the lattice quadratic forms directly,
    /// not the solved affine bounds.
    pub fn membership(&self, a: &S, b: &S) -> Membership {
        let slack = S::strict_slack();
        let mut boundary = Vec::new();
        for c in self.constraints(a, b) {
            if c.margin > slack || (!c.strict && c.margin >= S::zero() && slack == S::zero()) {
                continue;
            }
            if c.margin >= -slack.clone() {
                boundary.push(c.text);
            } else {
                return Membership::Outside(c.text);
            }
        }
        if boundary.is_empty() {
            Membership::Interior
        } else {
            Membership::Boundary(boundary.join("; "))
        }
    }

    fn constraints(&self, a: &S, b: &S) -> Vec<Constraint<S>> {
        let mut out = vec![Constraint {
            text: "b >= 0".into(),
            margin: b.clone(),
            strict: false,
        }];
        match (self.dim, self.mode) {
            (2, _) => {
                out.push(Constraint {
                    text: "a + 8b < 0".into(),
                    margin: -(a.clone() + S::count(8) * b.clone()),
                    strict: true,
                });
                out.push(Constraint {
                    text: format!(
                        "(a+8b)V^2 - 12bV + 4b > {:.6} with V = {}",
                        self.rhs.approx(),
                        self.v
                    ),
                    margin: ising_quadratic_square(self.v, a, b) - self.rhs.clone(),
                    strict: true,
                });
            }
            (_, mode) => {
                let v_max = self.v_max.unwrap_or(self.v);
                out.push(Constraint {
                    text: format!("quadratic form of the {v_max}-cube < 0"),
                    margin: -ising_quadratic_cube(v_max, a, b),
                    strict: true,
                });
                if mode == BoundsMode::Relaxed {
                    out.push(Constraint {
                        text: format!("a >= {:.6}", self.rhs.approx()),
                        margin: a.clone() - self.rhs.clone(),
                        strict: false,
                    });
                } else {
                    out.push(Constraint {
                        text: format!(
                            "quadratic form of the {}-cube >= {:.6}",
                            self.v,
                            self.rhs.approx()
                        ),
                        margin: ising_quadratic_cube(self.v, a, b) - self.rhs.clone(),
                        strict: false,
                    });
                }
            }
        }
        out
    }

    /// The inequalities in readable form, one per line.
    pub fn describe(&self) -> Vec<String> {
        let f = |s: &S| s.approx();
        let mut lines = Vec::new();
        match (self.dim, self.mode) {
            (2, _) => {
                let pairs = pair_count_square(self.v).unwrap_or(0);
                lines.push("a + 8b < 0".to_string());
                lines.push(format!(
                    "{}a + {}b > {}   (V = {})",
                    self.v * self.v,
                    2 * pairs,
                    fmt_num(f(&self.rhs)),
                    self.v
                ));
            }
            (_, mode) => {
                let v_max = self.v_max.unwrap_or(self.v);
                let pv = pair_count_cube(v_max).unwrap_or(0);
                lines.push(format!(
                    "{}a + {}b < 0   (V_max = {v_max})",
                    v_max * v_max * v_max,
                    2 * pv
                ));
                // the relaxed lower bound needs no raw form: it is already `a > rhs`
                if mode != BoundsMode::Relaxed {
                    let pairs = pair_count_cube(self.v).unwrap_or(0);
                    lines.push(format!(
                        "{}a + {}b >= {}   (V = {})",
                        self.v * self.v * self.v,
                        2 * pairs,
                        fmt_num(f(&self.rhs)),
                        self.v
                    ));
                }
            }
        }
        lines.push(format!(
            "a < {}b",
            fmt_num(f(&self.a_upper.slope))
        ));
        lines.push(format!("a > {}", fmt_affine(f(&self.a_lower.slope), f(&self.a_lower.intercept))));
        match &self.b_max {
            Some(b) => lines.push(format!("0 <= b < {}", fmt_num(f(b)))),
            None => lines.push("b >= 0 (unbounded)".into()),
        }
        lines
    }

    pub fn record(&self, rec: Option<&Recommendation<S>>) -> RegionRecord {
        RegionRecord {
            dim: self.dim,
            mode: self.mode,
            v: self.v,
            v_max: self.v_max,
            rhs: self.rhs.approx(),
            b_max: self.b_max.as_ref().map(|b| b.approx()),
            a_lower_intercept: self.a_lower.intercept.approx(),
            a_lower_slope: self.a_lower.slope.approx(),
            a_upper_intercept: self.a_upper.intercept.approx(),
            a_upper_slope: self.a_upper.slope.approx(),
            recommended_a: rec.map(|r| r.a.approx()),
            recommended_b: rec.map(|r| r.b.approx()),
        }
    }
}

/// `slope·b + intercept` without zero terms or "+ -".
fn fmt_affine(slope: f64, intercept: f64) -> String {
    match (fmt_num(slope).as_str(), fmt_num(intercept)) {
        ("0", c) => c,
        (m, c) if c == "0" => format!("{m}b"),
        (m, c) => match c.strip_prefix('-') {
            Some(abs) => format!("{m}b - {abs}"),
            None => format!("{m}b + {c}"),
        },
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Largest-b-first policy: b = (1 − margin)·b_max, then
/// a = a_lower(b) + margin·(a_upper(b) − a_lower(b)).
pub fn recommend_ab<S: BoundScalar>(region: &HyperRegion<S>, margin: &S) -> Result<Recommendation<S>> {
    let half = S::one() / S::count(2);
    if *margin < S::zero() || *margin >= half {
        return Err(Error::InvalidArgument(format!(
            "margin must lie in [0, 0.5), got {:?}",
            margin
        )));
    }
    let b_max = region.b_max.clone().ok_or_else(|| {
        Error::NoFeasibleRegion("region is unbounded in b; fix b explicitly".into())
    })?;
    if b_max <= S::zero() {
        return Err(Error::NoFeasibleRegion(format!("b_max = {:?}", b_max)));
    }
    let b = (S::one() - margin.clone()) * b_max;
    let lo = region.a_lower.at(&b);
    let hi = region.a_upper.at(&b);
    let a = lo.clone() + margin.clone() * (hi - lo);
    let membership = region.membership(&a, &b);
    Ok(Recommendation { a, b, membership })
}

/// Machine-readable summary of a region and its recommended point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub dim: usize,
    pub mode: BoundsMode,
    pub v: u64,
    pub v_max: Option<u64>,
    pub rhs: f64,
    pub b_max: Option<f64>,
    pub a_lower_intercept: f64,
    pub a_lower_slope: f64,
    pub a_upper_intercept: f64,
    pub a_upper_slope: f64,
    pub recommended_a: Option<f64>,
    pub recommended_b: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn input_f(n: u64, p: u64, dim: usize, pi: f64, r2: f64, mode: BoundsMode) -> BoundsInput<f64> {
        BoundsInput { n, p, dim, pi, r2, mode }
    }

    #[test]
    fn side_lengths() {
        assert_eq!(sparsity_side_length(&0.05f64, 1000, 2).unwrap(), 7);
        assert_eq!(sparsity_side_length(&q(1, 100), 6670, 3).unwrap(), 4);
        assert_eq!(sparsity_side_length(&q(1, 100), 100, 3).unwrap(), 1);
        assert!(matches!(sparsity_side_length(&q(1, 1000), 100, 3), Err(Error::TooSparse(_))));
    }

    #[test]
    fn two_d_matches_hand_algebra() {
        // 49a + 312b > -n/2 and a < -8b, so b < n/160, exactly.
        for n in [2u64, 50, 104, 160, 1001] {
            let input = BoundsInput { n, p: 1000, dim: 2, pi: q(1, 20), r2: q(1, 2), mode: BoundsMode::ExpectedR2 };
            let region = bounds_2d(&input).unwrap();
            assert_eq!(region.v, 7);
            assert_eq!(region.rhs, q(-(n as i64), 2));
            assert_eq!(region.a_lower.slope, q(-312, 49));
            assert_eq!(region.a_lower.intercept, q(-(n as i64), 98));
            assert_eq!(region.a_upper.slope, q(-8, 1));
            assert_eq!(region.b_max, Some(q(n as i64, 160)));
        }
    }

    #[test]
    fn three_d_reference_numbers() {
        let region = bounds_3d(&input_f(104, 6600, 3, 0.01, 0.5, BoundsMode::ExpectedR2)).unwrap();
        assert_eq!(region.v_max, Some(18));
        assert_eq!(region.v, 4);
        assert!((region.a_upper.slope + 134776.0 / 5832.0).abs() < 1e-12);
        assert!((region.a_lower.slope + 14.625).abs() < 1e-12);
        assert!((region.a_lower.intercept + 0.8125).abs() < 1e-12);
        let b_max = region.b_max.unwrap();
        assert!(b_max < 0.1 && b_max > 0.09);
    }

    #[test]
    fn relaxed_reference_numbers() {
        let region = bounds_3d_relaxed(&input_f(104, 6600, 3, 0.01, 0.10, BoundsMode::Relaxed)).unwrap();
        assert!((region.a_lower.intercept + 104.0 * 0.1 / 1.8).abs() < 1e-12);
        assert_eq!(region.a_lower.slope, 0.0);
        let b = region.b_max.unwrap();
        assert!(b < 0.251 && b > 0.249, "b_max = {b}");
    }

    #[test]
    fn relaxed_recommendation_near_hand_picked_pair() {
        let region = bounds_3d_relaxed(&input_f(104, 6600, 3, 0.01, 0.10, BoundsMode::Relaxed)).unwrap();
        let rec = recommend_ab(&region, &0.2).unwrap();
        assert!((rec.b - 0.2).abs() < 1e-3, "b = {}", rec.b);
        // a_lower(0.2) + 0.2·(a_upper(0.2) − a_lower(0.2)) with a_lower = −52/9
        let (lo, hi) = (-52.0 / 9.0, region.a_upper.at(&rec.b));
        assert!((rec.a - (lo + 0.2 * (hi - lo))).abs() < 1e-12);
        assert!(rec.membership.is_interior());
        // (−4.5, 0.2) itself sits just above a < −23.11b
        assert!(matches!(region.membership(&-4.5, &0.2), Membership::Outside(_)));
    }

    #[test]
    fn relaxed_lower_bound_at_half() {
        let region = bounds_3d_relaxed(&input_f(104, 6600, 3, 0.01, 0.5, BoundsMode::Relaxed)).unwrap();
        assert!((region.a_lower.intercept + 52.0).abs() < 1e-12);
    }

    #[test]
    fn relaxed_requires_3d() {
        assert!(bounds(&input_f(104, 1000, 2, 0.05, 0.5, BoundsMode::Relaxed)).is_err());
    }

    #[test]
    fn vanishing_signal_closes_region() {
        let mut last = f64::INFINITY;
        for r2 in [0.5, 0.1, 1e-3, 1e-6] {
            let b = bounds_2d(&input_f(104, 1000, 2, 0.05, r2, BoundsMode::ExpectedR2)).unwrap().b_max.unwrap();
            assert!(b < last);
            last = b;
        }
        assert!(last < 1e-3);
        let tiny = input_f(104, 1000, 2, 0.05, 1e-14, BoundsMode::ExpectedR2);
        assert!(matches!(bounds_2d(&tiny), Err(Error::NoFeasibleRegion(_))));
    }

    #[test]
    fn recommendation_is_interior_round_trip() {
        for (dim, mode) in [(2, BoundsMode::ExpectedR2), (3, BoundsMode::ExpectedR2), (3, BoundsMode::Relaxed)] {
            let p = if dim == 2 { 1000 } else { 6600 };
            let region = bounds(&input_f(104, p, dim, 0.01, 0.3, mode)).unwrap();
            let rec = recommend_ab(&region, &0.1).unwrap();
            assert_eq!(rec.membership, Membership::Interior, "{dim} {mode}");
        }
    }

    #[test]
    fn zero_margin_lands_on_boundary() {
        let region = HyperRegion {
            dim: 2,
            mode: BoundsMode::ExpectedR2,
            v: 7,
            v_max: None,
            rhs: q(-80, 1),
            a_lower: Affine { intercept: q(-80, 49), slope: q(-312, 49) },
            a_upper: Affine { intercept: q(0, 1), slope: q(-8, 1) },
            b_max: Some(q(1, 1)),
        };
        let rec = recommend_ab(&region, &q(0, 1)).unwrap();
        assert_eq!(rec.b, q(1, 1));
        assert_eq!(rec.a, q(-8, 1));
        assert!(matches!(rec.membership, Membership::Boundary(_)));
    }

    #[test]
    fn margin_validation_and_outside_points() {
        let region = bounds_2d(&input_f(160, 1000, 2, 0.05, 0.5, BoundsMode::ExpectedR2)).unwrap();
        assert!((region.b_max.unwrap() - 1.0).abs() < 1e-12);
        assert!(recommend_ab(&region, &0.5).is_err());
        assert!(recommend_ab(&region, &-0.1).is_err());
        assert!(matches!(region.membership(&0.0, &0.5), Membership::Outside(_)));
        assert!(matches!(region.membership(&-100.0, &0.5), Membership::Outside(_)));
        assert!(matches!(region.membership(&-5.0, &-0.1), Membership::Outside(_)));
    }

    #[test]
    fn b_max_monotone_in_n_and_signal() {
        let b = |n: u64, r2: f64| bounds_3d(&input_f(n, 6600, 3, 0.01, r2, BoundsMode::ExpectedR2)).unwrap().b_max.unwrap();
        assert!(b(104, 0.5) <= b(208, 0.5));
        assert!(b(104, 0.3) <= b(104, 0.5));
        let slope = |p: u64| bounds_3d(&input_f(104, p, 3, 0.01, 0.5, BoundsMode::ExpectedR2)).unwrap().a_upper.slope;
        assert!(slope(1000).abs() <= slope(6600).abs());
    }

    #[test]
    fn simple_r2_examples() {
        let n = 20;
        let x1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let x = DesignMatrix::from_columns(n, vec![x1.clone()]).unwrap();
        assert!((max_simple_r2(&x, &y).unwrap().r2 - 1.0).abs() < 1e-12);
        let constant = vec![1.0; n];
        let x = DesignMatrix::from_columns(n, vec![constant.clone(), x1]).unwrap();
        let r = max_simple_r2(&x, &y).unwrap();
        assert_eq!((r.column, r.skipped_constant_columns), (1, 1));
        assert!(matches!(max_simple_r2(&x, &constant), Err(Error::DegenerateResponse(_))));
    }
}
