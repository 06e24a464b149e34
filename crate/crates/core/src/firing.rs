//! Membership evaluation and the firing-strength operators.
//!
//! Three operators are provided. The product T-norm and the fixed-exponent
//! softmin are the classical choices and both break down in high dimension:
//! the product underflows to machine zero, and the fixed softmin either
//! underflows as well or returns a value above the second-smallest input
//! (a fake minimum). The adaptive softmin re-chooses its exponent per call
//! from the smallest membership so that no intermediate power can leave the
//! representable range.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Negative integer exponent chosen by the adaptive softmin.
///
/// Always lies in `[-1000, -1]`. The lower clamp bounds the work done per
/// evaluation; the upper clamp keeps the exponent a valid (negative) softmin
/// parameter when the smallest membership sits at the representable floor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdaptiveExponent(i32);

impl AdaptiveExponent {
    pub const MIN: i32 = -1000;
    pub const MAX: i32 = -1;

    pub fn get(self) -> i32 {
        self.0
    }
}

/// Gaussian membership with unit spread: `exp(-(x - m)^2)`, floor-clamped so
/// the result stays strictly positive and its logarithm finite.
pub fn gaussian_membership<F: Real>(x: F, m: F) -> Result<F> {
    if !x.is_finite() || !m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite membership input: x={x:?}, m={m:?}"
        )));
    }
    let d = x - m;
    Ok((-d * d).exp().max(F::membership_floor()))
}

/// Product T-norm over a rule's membership vector.
///
/// Underflows to exactly zero for long vectors; it is kept as the baseline
/// that demonstrates precisely that failure. A subnormal result is flushed
/// to zero: a running product that has left the normal range only avoids
/// zero through rounding artifacts (multiplying a subnormal by factors near
/// one can stall at the same subnormal forever), and every bit of it is
/// noise by then.
pub fn product_firing<F: Real>(mu: &[F]) -> Result<F> {
    if mu.is_empty() {
        return Err(Error::InvalidArgument(
            "product firing of an empty membership vector".into(),
        ));
    }
    let p = mu.iter().fold(F::one(), |acc, &v| acc * v);
    Ok(if p < F::min_positive_value() { F::zero() } else { p })
}

/// Softmin with a fixed negative exponent, `((v_1^q + ... + v_D^q)/D)^(1/q)`,
/// evaluated exactly as written with no rescaling.
///
/// Both failure modes are observable through this function: with very small
/// inputs the powers overflow and the result collapses to zero, and with a
/// small `|q|` the result can exceed the second-smallest input.
pub fn fixed_softmin<F: Real>(values: &[F], q: i32) -> Result<F> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "softmin of an empty vector".into(),
        ));
    }
    if q >= 0 {
        return Err(Error::InvalidArgument(format!(
            "softmin exponent must be a negative integer, got {q}"
        )));
    }
    let mut sum = F::zero();
    for &v in values {
        sum = sum + v.powi(q);
    }
    let d = F::from(values.len()).expect("vector length fits the scalar");
    let inv_q = F::one() / F::from(q).expect("exponent fits the scalar");
    Ok((sum / d).powf(inv_q))
}

/// Chooses the softmin exponent from the smallest membership so that no
/// power taken during the evaluation exceeds the scalar's budget.
///
/// Returns `ceil(B / ln(min(mu)))` clamped to `[-1000, -1]`, with `B` the
/// type's exponent budget. An all-ones vector has `ln(min) = 0`; every
/// exponent then yields 1, so the clamp bound -1000 is returned directly.
pub fn adaptive_exponent<F: Real>(mu: &[F]) -> Result<AdaptiveExponent> {
    if mu.is_empty() {
        return Err(Error::InvalidArgument(
            "adaptive exponent of an empty membership vector".into(),
        ));
    }
    let mut min = mu[0];
    for &v in &mu[1..] {
        if v < min {
            min = v;
        }
    }
    debug_assert!(
        min >= F::membership_floor() && min <= F::one(),
        "membership outside [floor, 1]"
    );
    if min >= F::one() {
        return Ok(AdaptiveExponent(AdaptiveExponent::MIN));
    }
    let raw = (F::exponent_budget_ln() / min.ln()).ceil();
    let lo = F::from(AdaptiveExponent::MIN).unwrap();
    let hi = F::from(AdaptiveExponent::MAX).unwrap();
    let clamped = raw.max(lo).min(hi);
    Ok(AdaptiveExponent(
        clamped.to_i32().expect("clamped exponent fits i32"),
    ))
}

/// Firing strength by the adaptive softmin: the power mean of the memberships
/// with the exponent from [`adaptive_exponent`].
///
/// The result is finite, strictly positive, and lies in
/// `[min(mu), max(mu)]` for every valid membership vector.
pub fn ada_softmin_firing<F: Real>(mu: &[F]) -> Result<F> {
    let q = adaptive_exponent(mu)?;
    softmin_firing_with_exponent(mu, q.get())
}

/// The power mean used by the adaptive softmin once an exponent has been
/// fixed.
///
/// Powered terms are summed in ascending value order, which makes the result
/// both deterministic and exactly invariant under permutations of `mu`, and
/// the final value is clamped into `[min(mu), max(mu)]` so rounding can never
/// push it outside the mathematical range of a power mean.
pub fn softmin_firing_with_exponent<F: Real>(mu: &[F], q: i32) -> Result<F> {
    if mu.is_empty() {
        return Err(Error::InvalidArgument(
            "softmin of an empty vector".into(),
        ));
    }
    if q >= 0 {
        return Err(Error::InvalidArgument(format!(
            "softmin exponent must be a negative integer, got {q}"
        )));
    }
    let mut lo = mu[0];
    let mut hi = mu[0];
    for &v in &mu[1..] {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    if lo == hi {
        return Ok(lo);
    }
    let mut powers: Vec<F> = mu.iter().map(|&v| v.powi(q)).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).expect("powers are comparable"));
    let mut sum = F::zero();
    for p in powers {
        sum = sum + p;
    }
    let d = F::from(mu.len()).expect("vector length fits the scalar");
    let inv_q = F::one() / F::from(q).expect("exponent fits the scalar");
    let f = (sum / d).powf(inv_q);
    Ok(f.max(lo).min(hi))
}
