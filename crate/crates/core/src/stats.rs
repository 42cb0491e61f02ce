//! Scalar-generic statistics shared by the bot harness and survey analytics.
//!
//! Means and tallies only need field arithmetic, so they work over any
//! [`Scalar`] including exact rationals. Anything needing a square root or
//! rounding is bounded on [`Real`].

use num_traits::{Float, FromPrimitive, Num};
use serde::{Deserialize, Serialize};

/// Field-like scalar usable for means: `f32`, `f64`, `Ratio<i64>`, ...
pub trait Scalar: Num + FromPrimitive + Copy + PartialOrd + std::fmt::Debug {}

impl<T> Scalar for T where T: Num + FromPrimitive + Copy + PartialOrd + std::fmt::Debug {}

/// Floating-point scalar.
pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}

/// Converts an integer count into the scalar type.
pub fn scalar_from_u64<S: Scalar>(n: u64) -> S {
    S::from_u64(n).expect("count representable in scalar type")
}

/// Arithmetic mean, `None` for an empty input.
pub fn mean<S: Scalar>(values: &[S]) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(S::zero(), |acc, v| acc + *v);
    Some(sum / scalar_from_u64(values.len() as u64))
}

/// How a value is cut to two decimals for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    HalfUp,
    Truncate,
}

/// Rounds `x` to `decimals` places.
///
/// Decimal inputs such as 5.246 are not exactly representable, so values
/// within a few ulps of a half-step are snapped onto it first.
/// 27.87 / 5 lands on 5.5739999... and still rounds to 5.57, while
/// 0.125 rounds half-up to 0.13.
pub fn round_to<F: Real>(x: F, decimals: u32, mode: Rounding) -> F {
    let scale = F::from_u32(10u32.pow(decimals)).expect("scale fits");
    let scaled = x * scale;
    let tol = F::epsilon() * F::from_u32(64).unwrap() * scaled.abs().max(F::one());
    let two = F::from_u8(2).unwrap();
    let nearest_half = (scaled * two).round() / two;
    let snapped = if (scaled - nearest_half).abs() <= tol {
        nearest_half
    } else {
        scaled
    };
    // `round` already sends exact ties away from zero.
    let cut = match mode {
        Rounding::HalfUp => snapped.round(),
        Rounding::Truncate => snapped.trunc(),
    };
    cut / scale
}

/// Wilson score interval for `k` successes out of `n` trials.
///
/// # Panics
/// If `n == 0` or `k > n`.
pub fn wilson_interval<F: Real>(k: u64, n: u64, z: F) -> (F, F) {
    assert!(n >= 1 && k <= n, "wilson interval needs 0 <= k <= n, n >= 1");
    let nf: F = scalar_from_u64(n);
    let p: F = scalar_from_u64::<F>(k) / nf;
    let two = F::from_u8(2).unwrap();
    let four = F::from_u8(4).unwrap();
    let z2 = z * z;
    let denom = F::one() + z2 / nf;
    let center = p + z2 / (two * nf);
    let spread = z * (p * (F::one() - p) / nf + z2 / (four * nf * nf)).sqrt();
    let lo = ((center - spread) / denom).max(F::zero());
    let hi = ((center + spread) / denom).min(F::one());
    // Clamp the boundaries exactly; rounding could otherwise leave p just
    // outside [lo, hi] at k = 0 or k = n.
    let lo = if k == 0 { F::zero() } else { lo.min(p) };
    let hi = if k == n { F::one() } else { hi.max(p) };
    (lo, hi)
}
