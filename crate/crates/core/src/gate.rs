//! Consequent-side gate functions.
//!
//! A gate multiplies consequent terms; the learned magnitude of its value
//! measures how useful a feature or rule is. The bidirectional gate
//! `M(l) = l * sqrt(exp(1 - l^2))` has a large derivative near l = 0, where
//! gates are initialized, so it opens much faster than the legacy choices it
//! is compared against.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// `M(l) = l * sqrt(exp(1 - l^2))`. Odd, with range [-1, 1] and extrema at
/// l = +-1. The magnitude |M(l)| is the opening degree of the gate.
pub fn gate_value<F: Real>(lambda: F) -> F {
    let one = F::one();
    let half = (one - lambda * lambda) / (one + one);
    lambda * half.exp()
}

/// Derivative of [`gate_value`]: `(1 - l^2) * sqrt(exp(1 - l^2))`.
pub fn gate_derivative<F: Real>(lambda: F) -> F {
    let one = F::one();
    let sq = lambda * lambda;
    (one - sq) * ((one - sq) / (one + one)).exp()
}

/// The three commonly used gate functions kept as comparison baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegacyGate {
    /// `1 / (1 + exp(-l))`
    Sigmoid,
    /// `1 - exp(-l^2)`
    OneMinusExp,
    /// `exp(-l^2)`
    ExpSq,
}

pub fn legacy_gate_value<F: Real>(kind: LegacyGate, lambda: F) -> F {
    let one = F::one();
    match kind {
        LegacyGate::Sigmoid => one / (one + (-lambda).exp()),
        LegacyGate::OneMinusExp => one - (-lambda * lambda).exp(),
        LegacyGate::ExpSq => (-lambda * lambda).exp(),
    }
}

pub fn legacy_gate_derivative<F: Real>(kind: LegacyGate, lambda: F) -> F {
    let one = F::one();
    let two = one + one;
    match kind {
        LegacyGate::Sigmoid => {
            let s = one / (one + (-lambda).exp());
            s * (one - s)
        }
        LegacyGate::OneMinusExp => two * lambda * (-lambda * lambda).exp(),
        LegacyGate::ExpSq => -two * lambda * (-lambda * lambda).exp(),
    }
}

/// Which gate function a gated training phase uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateFunction {
    Proposed,
    Legacy(LegacyGate),
}

impl GateFunction {
    pub fn value<F: Real>(self, param: F) -> F {
        match self {
            GateFunction::Proposed => gate_value(param),
            GateFunction::Legacy(kind) => legacy_gate_value(kind, param),
        }
    }

    pub fn derivative<F: Real>(self, param: F) -> F {
        match self {
            GateFunction::Proposed => gate_derivative(param),
            GateFunction::Legacy(kind) => legacy_gate_derivative(kind, param),
        }
    }

    /// Parameter value at which this gate starts almost closed. For the
    /// proposed gate that is 0.01 (gate value 0.0165); the legacy gates close
    /// in different parameter regions.
    pub fn initial_parameter<F: Real>(self) -> F {
        let raw = match self {
            GateFunction::Proposed => 0.01,
            GateFunction::Legacy(LegacyGate::Sigmoid) => -5.0,
            GateFunction::Legacy(LegacyGate::OneMinusExp) => 0.001,
            GateFunction::Legacy(LegacyGate::ExpSq) => 3.0,
        };
        F::from(raw).expect("initial parameter fits the scalar")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_gate_is_zero() {
        assert_eq!(gate_value(0.0f64), 0.0);
    }

    #[test]
    fn extrema_are_exactly_plus_minus_one() {
        assert_eq!(gate_value(1.0f64), 1.0);
        assert_eq!(gate_value(-1.0f64), -1.0);
    }

    #[test]
    fn initial_gate_value_three_significant_digits() {
        let v = gate_value(0.01f64);
        assert_relative_eq!(v, 0.016_486_388_367, max_relative = 1e-9);
        // Rounds to 0.0165 at three significant figures.
        assert_relative_eq!((v * 1e4).round() / 1e4, 0.0165, max_relative = 1e-12);
    }

    #[test]
    fn derivative_vanishes_at_extrema() {
        assert_eq!(gate_derivative(1.0f64), 0.0);
        assert_eq!(gate_derivative(-1.0f64), 0.0);
    }

    #[test]
    fn derivative_at_zero() {
        // Central finite difference of gate_value at 0 gives e^0.5.
        assert_relative_eq!(
            gate_derivative(0.0f64),
            1.648_721_270_700_128_1,
            max_relative = 1e-15
        );
    }

    #[test]
    fn derivative_outside_unit_interval() {
        // -3 * exp(-1.5)
        assert_relative_eq!(
            gate_derivative(2.0f64),
            -0.669_390_480_445_289_5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn legacy_gates_at_zero() {
        assert_eq!(legacy_gate_value(LegacyGate::Sigmoid, 0.0f64), 0.5);
        assert_eq!(legacy_gate_value(LegacyGate::OneMinusExp, 0.0f64), 0.0);
        assert_eq!(legacy_gate_value(LegacyGate::ExpSq, 0.0f64), 1.0);
    }

    #[test]
    fn initial_parameters_start_almost_closed() {
        for kind in [
            GateFunction::Proposed,
            GateFunction::Legacy(LegacyGate::Sigmoid),
            GateFunction::Legacy(LegacyGate::OneMinusExp),
            GateFunction::Legacy(LegacyGate::ExpSq),
        ] {
            let opening = kind.value(kind.initial_parameter::<f64>()).abs();
            assert!(opening < 0.02, "{kind:?} starts at opening {opening}");
        }
    }

    #[test]
    fn legacy_derivatives_match_finite_differences() {
        let h = 1e-6f64;
        for kind in [LegacyGate::Sigmoid, LegacyGate::OneMinusExp, LegacyGate::ExpSq] {
            for i in -8..=8 {
                let l = i as f64 * 0.5;
                let fd = (legacy_gate_value(kind, l + h) - legacy_gate_value(kind, l - h)) / (2.0 * h);
                let an = legacy_gate_derivative(kind, l);
                assert!((an - fd).abs() <= 1e-6 * an.abs().max(fd.abs()).max(1e-4));
            }
        }
    }
}
