//! Scalar abstraction so the engine works with `f32` or `f64`.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar plus the two range constants the firing operators
/// depend on.
///
/// `membership_floor` keeps Gaussian memberships strictly positive so their
/// logarithm stays finite. `exponent_budget_ln` is the natural log of the
/// largest value a membership may be raised to without overflowing the type;
/// the adaptive softmin derives its exponent from it.
pub trait Real:
    Float + FromPrimitive + core::iter::Sum + core::fmt::Debug + core::fmt::Display + 'static
{
    fn membership_floor() -> Self;
    fn exponent_budget_ln() -> Self;
}

impl Real for f64 {
    fn membership_floor() -> f64 {
        1e-300
    }

    // ln(1e300), truncated to a round figure.
    fn exponent_budget_ln() -> f64 {
        690.0
    }
}

impl Real for f32 {
    fn membership_floor() -> f32 {
        1e-30
    }

    // ln(1e30); f32 overflows near 3.4e38, so the budget is 1e30.
    fn exponent_budget_ln() -> f32 {
        69.0
    }
}
