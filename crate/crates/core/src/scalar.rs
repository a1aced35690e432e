//! Scalar abstractions.
//!
//! Two families of numbers flow through the crate:
//!
//! * [`Real`] is the floating-point type used by the sampler, the simulators
//!   and the diagnostics. It is sealed and implemented for `f32` and `f64`.
//! * [`BoundScalar`] is what the hyperparameter-bound algebra and the lattice
//!   closed forms are written against. Besides the two floats it is
//!   implemented for [`BigRational`], so boundary membership can be decided
//!   exactly when the inputs are exact decimals.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Open01, StandardNormal};

mod private {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// Floating-point scalar used by every stochastic part of the crate.
pub trait Real:
    private::Sealed
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn to_f64_lossy(self) -> f64;

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma(shape, 1) draw. Panics if `shape` is not positive and finite.
    fn gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;

    /// Beta(a, b) draw. Panics if either parameter is not positive and finite.
    fn beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self;

    /// ln of a Gamma(shape, 1) draw, accurate when the draw itself underflows.
    fn ln_gamma_draw<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
        if shape < Self::one() {
            // Ga(s) = Ga(s + 1) · U^{1/s}
            Self::gamma(shape + Self::one(), rng).ln() + Self::open01(rng).ln() / shape
        } else {
            Self::gamma(shape, rng).ln()
        }
    }

    /// `(ln X, ln(1 − X))` for X ~ Beta(a, b), both finite even when X rounds to 0 or 1.
    fn ln_beta_draw<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> (Self, Self) {
        let ga = Self::ln_gamma_draw(a, rng);
        let gb = Self::ln_gamma_draw(b, rng);
        let m = ga.max(gb);
        let total = m + ((ga - m).exp() + (gb - m).exp()).ln();
        (ga - total, gb - total)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0)
                    .expect("gamma shape must be positive")
                    .sample(rng)
            }

            fn beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self {
                Beta::new(a, b)
                    .expect("beta parameters must be positive")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Scalar type for the closed-form lattice sums and the hyperparameter region.
pub trait BoundScalar:
    Clone + PartialOrd + Num + Neg<Output = Self> + Signed + FromPrimitive + ToPrimitive + Debug
{
    /// Tolerance applied to strict inequalities: zero for exact types.
    fn strict_slack() -> Self;

    fn count(n: u64) -> Self {
        <Self as FromPrimitive>::from_u64(n).expect("integer fits the scalar type")
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl BoundScalar for f64 {
    fn strict_slack() -> Self {
        1e-9
    }
}

impl BoundScalar for f32 {
    fn strict_slack() -> Self {
        1e-5
    }
}

impl BoundScalar for BigRational {
    fn strict_slack() -> Self {
        BigRational::zero()
    }
}

/// Parses a plain decimal literal (`"0.05"`, `"-12"`, `"1e-3"`) into an exact rational.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().ok()?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Largest integer `v` with `v^d <= x`, for `x >= 0`.
pub(crate) fn integer_root_floor<S: BoundScalar>(x: &S, d: u32) -> u64 {
    if *x < S::one() {
        return 0;
    }
    // Floating-point guess, then exact correction in `S`.
    let guess = x.approx().powf(1.0 / f64::from(d)).floor().max(0.0) as u64;
    let pow = |v: u64| -> S { num_traits::pow(S::count(v), d as usize) };
    let mut v = guess;
    while v > 0 && pow(v) > *x {
        v -= 1;
    }
    while pow(v + 1) <= *x {
        v += 1;
    }
    v
}
