//! Analytic gradients for every trainable parameter family, the
//! gradient-descent update, and ridge least-squares estimation of the
//! consequents.
//!
//! All gradients are exact derivatives of the batch mean square error, so
//! every family can be (and is) checked against central finite differences.
//! Reductions run in a fixed left-to-right order; identical inputs produce
//! bit-identical gradients.

use crate::error::{Error, Result};
use crate::gate::GateFunction;
use crate::model::{AntecedentTrace, GateBank, GateMode, RuleOutputs};
use crate::rulebase::{ConsequentBank, FuzzyPartition, IndexMatrix};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FineTuneMode {
    GradientDescent,
    LeastSquares,
}

/// Gradient-descent iteration counts for the three phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseIterations {
    pub feature_selection: usize,
    pub rule_extraction: usize,
    pub fine_tune: usize,
}

impl PhaseIterations {
    pub fn uniform(n: usize) -> Self {
        PhaseIterations {
            feature_selection: n,
            rule_extraction: n,
            fine_tune: n,
        }
    }
}

/// Training configuration for the full pipeline.
///
/// Defaults follow the dimensionality of the data: past
/// `high_dim_threshold` features the centers are frozen at their initial
/// placement, the iteration budget shrinks, and the threshold coefficients
/// switch to the high-dimensional settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub eta: F,
    pub iterations: PhaseIterations,
    /// Instances per update; `None` means full batch, which is the default
    /// and the setting everything here was tuned for.
    pub batch_size: Option<usize>,
    /// Fuzzy sets per feature during feature selection.
    pub sets_feature_selection: usize,
    /// Fuzzy sets per feature during rule extraction.
    pub sets_rule_extraction: usize,
    pub zeta_lambda: F,
    pub zeta_theta: F,
    /// Feature count above which data is treated as high-dimensional.
    pub high_dim_threshold: usize,
    pub fine_tune_mode: FineTuneMode,
    pub seed: u64,
    pub gate: GateFunction,
    /// Compare |M| against the selection thresholds (default). The raw-value
    /// variant is exposed for comparison only.
    pub threshold_on_abs: bool,
}

impl<F: Real> TrainConfig<F> {
    pub fn for_dimension(features: usize) -> Self {
        let high = features > 1000;
        TrainConfig {
            eta: F::from(0.01).unwrap(),
            iterations: PhaseIterations::uniform(if high { 200 } else { 1000 }),
            batch_size: None,
            sets_feature_selection: 10,
            sets_rule_extraction: 5,
            zeta_lambda: F::from(if high { 0.4 } else { 0.5 }).unwrap(),
            zeta_theta: F::from(if high { 0.5 } else { 0.3 }).unwrap(),
            high_dim_threshold: 1000,
            fine_tune_mode: FineTuneMode::GradientDescent,
            seed: 0,
            gate: GateFunction::Proposed,
            threshold_on_abs: true,
        }
    }

    pub fn is_high_dim(&self, features: usize) -> bool {
        features > self.high_dim_threshold
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > F::zero()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        for (name, z) in [("zeta_lambda", self.zeta_lambda), ("zeta_theta", self.zeta_theta)] {
            if !(z > F::zero() && z < F::one()) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.sets_feature_selection == 0 || self.sets_rule_extraction == 0 {
            return Err(Error::InvalidArgument("set counts must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Gradients for one batch; shapes mirror the parameter containers.
#[derive(Clone, Debug)]
pub struct GradientSet<F> {
    /// D x S flat center gradients; `None` when the centers are frozen.
    pub d_centers: Option<Vec<F>>,
    /// R x (D + 1) x C flat consequent gradients.
    pub d_consequents: Vec<F>,
    /// Per-feature gate gradients; empty unless feature-gated.
    pub d_lambda: Vec<F>,
    /// Per-rule gate gradients; empty unless rule-gated.
    pub d_theta: Vec<F>,
}

fn check_batch<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
) -> Result<()> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if targets.len() != n || antecedents.len() != n || outputs.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "batch slices disagree: {n} instances, {} targets, {} antecedent traces, {} output traces",
            targets.len(),
            antecedents.len(),
            outputs.len()
        )));
    }
    Ok(())
}

/// Gradient of the batch MSE with respect to every consequent coefficient.
///
/// Feature gating multiplies the per-feature term by its gate and leaves the
/// bias column ungated; rule gating multiplies everything, bias included.
pub fn grad_consequents<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
    consequents: &ConsequentBank<F>,
    gates: &GateBank<F>,
) -> Result<Vec<F>> {
    check_batch(x, targets, antecedents, outputs)?;
    let (r, d, c) = (
        consequents.rules(),
        consequents.features(),
        consequents.classes(),
    );
    let mode = gates.mode();
    let mult = gates.multipliers();
    match mode {
        GateMode::Ungated => {}
        GateMode::FeatureGated if mult.len() == d => {}
        GateMode::RuleGated if mult.len() == r => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{} gate parameters do not fit {mode:?} with R={r}, D={d}",
                mult.len()
            )))
        }
    }
    let n = x.len();
    let inv_n = F::one() / F::from(n).unwrap();
    let mut grad = vec![F::zero(); consequents.values().len()];
    for i in 0..n {
        let xi = &x[i];
        if xi.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "instance {i} has {} features, expected {d}",
                xi.len()
            )));
        }
        let fbar = &antecedents[i].normalized;
        let sys = &outputs[i].system;
        for rule in 0..r {
            let rule_gate = match mode {
                GateMode::RuleGated => mult[rule],
                _ => F::one(),
            };
            let w = fbar[rule] * rule_gate;
            for class in 0..c {
                let base = (sys[class] - targets[i][class]) * w;
                let row = (rule * (d + 1)) * c + class;
                grad[row] = grad[row] + base;
                if let GateMode::FeatureGated = mode {
                    for feat in 0..d {
                        let j = row + (feat + 1) * c;
                        grad[j] = grad[j] + base * mult[feat] * xi[feat];
                    }
                } else {
                    for feat in 0..d {
                        let j = row + (feat + 1) * c;
                        grad[j] = grad[j] + base * xi[feat];
                    }
                }
            }
        }
    }
    for g in &mut grad {
        *g = *g * inv_n;
    }
    Ok(grad)
}

/// Residual-weighted output deviation `sum_c e_c * (y_r^c - y^c)` for one
/// rule of one instance.
#[inline]
fn rule_residual<F: Real>(outputs: &RuleOutputs<F>, target: &[F], rule: usize) -> F {
    let c = outputs.system.len();
    let mut acc = F::zero();
    for class in 0..c {
        let e = outputs.system[class] - target[class];
        acc = acc + e * (outputs.per_rule[rule * c + class] - outputs.system[class]);
    }
    acc
}

/// Center gradients under a softmin-family firing operator (adaptive or
/// fixed exponent), with the per-rule exponent treated as locally constant.
///
/// Contributions from rules sharing a (feature, set) slot accumulate onto
/// that slot.
pub fn grad_centers_softmin<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
    partition: &FuzzyPartition<F>,
    rules: &IndexMatrix,
) -> Result<Vec<F>> {
    check_batch(x, targets, antecedents, outputs)?;
    if antecedents[0].exponents.is_empty() {
        return Err(Error::InvalidState(
            "softmin center gradients need a softmin-family trace; this one was produced by the product T-norm".into(),
        ));
    }
    let (r, d) = (rules.rules(), rules.features());
    let s = partition.num_sets();
    let n = x.len();
    let two = F::one() + F::one();
    let inv_n = F::one() / F::from(n).unwrap();
    let mut grad = vec![F::zero(); d * s];
    for i in 0..n {
        let ante = &antecedents[i];
        for rule in 0..r {
            let rw = rule_residual(&outputs[i], &targets[i], rule);
            let q = ante.exponents[rule];
            let mrow = &ante.memberships[rule * d..(rule + 1) * d];
            let mut denom = F::zero();
            for &m in mrow {
                denom = denom + m.powi(q);
            }
            let common = two * ante.normalized[rule] * rw / denom;
            for feat in 0..d {
                let set = rules.get(rule, feat);
                let center = partition.center(feat, set);
                let slot = feat * s + set as usize - 1;
                grad[slot] =
                    grad[slot] + common * (x[i][feat] - center) * mrow[feat].powi(q);
            }
        }
    }
    for g in &mut grad {
        *g = *g * inv_n;
    }
    Ok(grad)
}

/// Center gradients under the product T-norm.
pub fn grad_centers_product<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
    partition: &FuzzyPartition<F>,
    rules: &IndexMatrix,
) -> Result<Vec<F>> {
    check_batch(x, targets, antecedents, outputs)?;
    if !antecedents[0].exponents.is_empty() {
        return Err(Error::InvalidState(
            "product center gradients called on a softmin-family trace".into(),
        ));
    }
    let (r, d) = (rules.rules(), rules.features());
    let s = partition.num_sets();
    let n = x.len();
    let two = F::one() + F::one();
    let inv_n = F::one() / F::from(n).unwrap();
    let mut grad = vec![F::zero(); d * s];
    for i in 0..n {
        let ante = &antecedents[i];
        for rule in 0..r {
            let rw = rule_residual(&outputs[i], &targets[i], rule);
            let common = two * ante.normalized[rule] * rw;
            for feat in 0..d {
                let set = rules.get(rule, feat);
                let center = partition.center(feat, set);
                let slot = feat * s + set as usize - 1;
                grad[slot] = grad[slot] + common * (x[i][feat] - center);
            }
        }
    }
    for g in &mut grad {
        *g = *g * inv_n;
    }
    Ok(grad)
}

/// Gradient of the batch MSE with respect to the feature-gate parameters.
pub fn grad_lambda<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
    consequents: &ConsequentBank<F>,
    gates: &GateBank<F>,
) -> Result<Vec<F>> {
    check_batch(x, targets, antecedents, outputs)?;
    let GateBank::FeatureGates { kind, lambda } = gates else {
        return Err(Error::InvalidState(
            "feature-gate gradients need active feature gates".into(),
        ));
    };
    let (r, d, c) = (
        consequents.rules(),
        consequents.features(),
        consequents.classes(),
    );
    if lambda.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "{} feature gates for {d} features",
            lambda.len()
        )));
    }
    let n = x.len();
    let inv_n = F::one() / F::from(n).unwrap();
    let mut grad = vec![F::zero(); d];
    for i in 0..n {
        let fbar = &antecedents[i].normalized;
        let sys = &outputs[i].system;
        for feat in 0..d {
            let mut acc = F::zero();
            for class in 0..c {
                let mut w = F::zero();
                for rule in 0..r {
                    w = w + fbar[rule] * consequents.get(rule, feat + 1, class);
                }
                acc = acc + (sys[class] - targets[i][class]) * w;
            }
            grad[feat] = grad[feat] + x[i][feat] * acc;
        }
    }
    for (feat, g) in grad.iter_mut().enumerate() {
        *g = kind.derivative(lambda[feat]) * *g * inv_n;
    }
    Ok(grad)
}

/// Gradient of the batch MSE with respect to the rule-gate parameters.
///
/// The inner consequent form is evaluated at the instance,
/// `p_{r,0} + sum_d p_{r,d} * x_d`, i.e. the exact chain rule through the
/// gated rule output.
pub fn grad_theta<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
    consequents: &ConsequentBank<F>,
    gates: &GateBank<F>,
) -> Result<Vec<F>> {
    check_batch(x, targets, antecedents, outputs)?;
    let GateBank::RuleGates { kind, theta } = gates else {
        return Err(Error::InvalidState(
            "rule-gate gradients need active rule gates".into(),
        ));
    };
    let (r, d, c) = (
        consequents.rules(),
        consequents.features(),
        consequents.classes(),
    );
    if theta.len() != r {
        return Err(Error::ShapeMismatch(format!(
            "{} rule gates for {r} rules",
            theta.len()
        )));
    }
    let n = x.len();
    let inv_n = F::one() / F::from(n).unwrap();
    let mut grad = vec![F::zero(); r];
    for i in 0..n {
        let xi = &x[i];
        let fbar = &antecedents[i].normalized;
        let sys = &outputs[i].system;
        for rule in 0..r {
            let mut acc = F::zero();
            for class in 0..c {
                let mut lin = consequents.get(rule, 0, class);
                for feat in 0..d {
                    lin = lin + consequents.get(rule, feat + 1, class) * xi[feat];
                }
                acc = acc + (sys[class] - targets[i][class]) * lin;
            }
            grad[rule] = grad[rule] + fbar[rule] * acc;
        }
    }
    for (rule, g) in grad.iter_mut().enumerate() {
        *g = kind.derivative(theta[rule]) * *g * inv_n;
    }
    Ok(grad)
}

/// All gradients for one batch at the current iterate, computed before any
/// family is updated so the step is a proper simultaneous one.
#[allow(clippy::too_many_arguments)]
pub fn compute_gradients<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
    outputs: &[RuleOutputs<F>],
    partition: &FuzzyPartition<F>,
    rules: &IndexMatrix,
    consequents: &ConsequentBank<F>,
    gates: &GateBank<F>,
    tnorm: crate::model::TNorm,
    train_centers: bool,
) -> Result<GradientSet<F>> {
    let d_consequents = grad_consequents(x, targets, antecedents, outputs, consequents, gates)?;
    let (d_lambda, d_theta) = match gates {
        GateBank::FeatureGates { .. } => (
            grad_lambda(x, targets, antecedents, outputs, consequents, gates)?,
            Vec::new(),
        ),
        GateBank::RuleGates { .. } => (
            Vec::new(),
            grad_theta(x, targets, antecedents, outputs, consequents, gates)?,
        ),
        GateBank::Ungated => (Vec::new(), Vec::new()),
    };
    let d_centers = if train_centers {
        Some(match tnorm {
            crate::model::TNorm::Product => {
                grad_centers_product(x, targets, antecedents, outputs, partition, rules)?
            }
            _ => grad_centers_softmin(x, targets, antecedents, outputs, partition, rules)?,
        })
    } else {
        None
    };
    Ok(GradientSet {
        d_centers,
        d_consequents,
        d_lambda,
        d_theta,
    })
}

/// Applies one gradient-descent step to every family present in the set.
pub fn apply_gradients<F: Real>(
    grads: &GradientSet<F>,
    partition: &mut FuzzyPartition<F>,
    consequents: &mut ConsequentBank<F>,
    gates: &mut GateBank<F>,
    eta: F,
) -> Result<()> {
    gd_step(consequents.values_mut(), &grads.d_consequents, eta)?;
    if !grads.d_lambda.is_empty() {
        gd_step(gates.parameters_mut(), &grads.d_lambda, eta)?;
    }
    if !grads.d_theta.is_empty() {
        gd_step(gates.parameters_mut(), &grads.d_theta, eta)?;
    }
    if let Some(dc) = &grads.d_centers {
        gd_step(partition.centers_mut(), dc, eta)?;
    }
    Ok(())
}

/// One gradient-descent update, `w <- w - eta * g`, applied elementwise.
pub fn gd_step<F: Real>(params: &mut [F], grads: &[F], eta: F) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters vs {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if !(eta > F::zero()) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    for (p, &g) in params.iter_mut().zip(grads) {
        *p = *p - eta * g;
    }
    Ok(())
}

/// Ridge coefficient added to the diagonal of the least-squares normal
/// equations; keeps them solvable when there are fewer instances than
/// unknowns.
pub const LSE_RIDGE: f64 = 1e-8;

/// Least-squares estimate of all consequents with the antecedents frozen.
///
/// The design row of instance n concatenates, over rules,
/// `fbar_r(x_n) * (1, x_n1, ..., x_nD)`. One ridge-regularized normal
/// system is factored once and solved per class against the one-hot targets.
pub fn lse_consequents<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    antecedents: &[AntecedentTrace<F>],
) -> Result<ConsequentBank<F>> {
    let n = x.len();
    if n == 0 || targets.len() != n || antecedents.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "batch slices disagree: {n} instances, {} targets, {} traces",
            targets.len(),
            antecedents.len()
        )));
    }
    let r = antecedents[0].normalized.len();
    let d = x[0].len();
    let c = targets[0].len();
    let k = r * (d + 1);
    let mut phi = vec![F::zero(); n * k];
    for i in 0..n {
        if x[i].len() != d || antecedents[i].normalized.len() != r {
            return Err(Error::ShapeMismatch(format!("ragged batch at instance {i}")));
        }
        for rule in 0..r {
            let w = antecedents[i].normalized[rule];
            let base = i * k + rule * (d + 1);
            phi[base] = w;
            for feat in 0..d {
                phi[base + 1 + feat] = w * x[i][feat];
            }
        }
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "least-squares design matrix has non-finite entries".into(),
        ));
    }
    // Normal equations, upper triangle first.
    let mut a = vec![F::zero(); k * k];
    for i in 0..n {
        let row = &phi[i * k..(i + 1) * k];
        for p in 0..k {
            let rp = row[p];
            for q in p..k {
                a[p * k + q] = a[p * k + q] + rp * row[q];
            }
        }
    }
    let ridge = F::from(LSE_RIDGE).unwrap();
    for p in 0..k {
        a[p * k + p] = a[p * k + p] + ridge;
        for q in 0..p {
            a[p * k + q] = a[q * k + p];
        }
    }
    let l = cholesky(a, k)?;
    let mut bank = crate::rulebase::init_consequents(r, d, c);
    let mut rhs = vec![F::zero(); k];
    for class in 0..c {
        for v in rhs.iter_mut() {
            *v = F::zero();
        }
        for i in 0..n {
            let t = targets[i][class];
            if t != F::zero() {
                let row = &phi[i * k..(i + 1) * k];
                for p in 0..k {
                    rhs[p] = rhs[p] + row[p] * t;
                }
            }
        }
        cholesky_solve(&l, k, &mut rhs);
        for rule in 0..r {
            for feat in 0..=d {
                bank.set(rule, feat, class, rhs[rule * (d + 1) + feat]);
            }
        }
    }
    Ok(bank)
}

/// In-place lower-triangular Cholesky factor of a symmetric positive
/// definite matrix in row-major order.
fn cholesky<F: Real>(mut a: Vec<F>, k: usize) -> Result<Vec<F>> {
    for j in 0..k {
        let mut diag = a[j * k + j];
        for m in 0..j {
            diag = diag - a[j * k + m] * a[j * k + m];
        }
        if !(diag > F::zero()) {
            return Err(Error::InvalidArgument(
                "least-squares normal equations are not positive definite".into(),
            ));
        }
        let l = diag.sqrt();
        a[j * k + j] = l;
        for i in j + 1..k {
            let mut v = a[i * k + j];
            for m in 0..j {
                v = v - a[i * k + m] * a[j * k + m];
            }
            a[i * k + j] = v / l;
        }
    }
    Ok(a)
}

fn cholesky_solve<F: Real>(l: &[F], k: usize, rhs: &mut [F]) {
    for i in 0..k {
        let mut v = rhs[i];
        for m in 0..i {
            v = v - l[i * k + m] * rhs[m];
        }
        rhs[i] = v / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut v = rhs[i];
        for m in i + 1..k {
            v = v - l[m * k + i] * rhs[m];
        }
        rhs[i] = v / l[i * k + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{antecedent_batch, consequent_batch, batch_mse, GateBank, TNorm};
    use crate::rulebase::{build_coco, init_consequents, place_centers};

    #[test]
    fn gd_step_examples() {
        let mut p = vec![1.0f64];
        gd_step(&mut p, &[0.5], 0.1).unwrap();
        assert_eq!(p, vec![0.95]);
        gd_step(&mut p, &[0.0], 0.1).unwrap();
        assert_eq!(p, vec![0.95]);
        let mut q = vec![1.0f64];
        gd_step(&mut q, &[0.5], 0.1).unwrap();
        gd_step(&mut q, &[0.5], 0.1).unwrap();
        assert!((q[0] - (1.0 - 2.0 * 0.1 * 0.5)).abs() < 1e-15);
        assert!(gd_step(&mut q, &[0.5, 0.5], 0.1).is_err());
        assert!(gd_step(&mut q, &[0.5], 0.0).is_err());
    }

    fn lse_fixture(n: usize, sets: usize, features: usize, classes: usize) -> (
        Vec<Vec<f64>>,
        Vec<AntecedentTrace<f64>>,
        crate::rulebase::FuzzyPartition<f64>,
        crate::rulebase::IndexMatrix,
    ) {
        // Low-discrepancy points keep the design matrix well conditioned.
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..features)
                    .map(|d| ((i + 1) as f64 * 0.754_877_666 + d as f64 * 0.569_840_291).fract())
                    .collect()
            })
            .collect();
        let partition = place_centers(&x, sets).unwrap();
        let rules = build_coco(sets, features).unwrap();
        let antecedents = antecedent_batch(&x, &partition, &rules, TNorm::AdaSoftmin).unwrap();
        let _ = classes;
        (x, antecedents, partition, rules)
    }

    #[test]
    fn lse_recovers_exactly_representable_targets() {
        // A wide domain makes the normalized firings switch sharply between
        // rules, which keeps the design matrix well conditioned; on a narrow
        // domain the columns are near-collinear and the ridge perturbs the
        // recovery above the tolerance.
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                (0..2)
                    .map(|d| {
                        6.0 * ((i + 1) as f64 * 0.754_877_666 + d as f64 * 0.569_840_291).fract()
                    })
                    .collect()
            })
            .collect();
        let partition = place_centers(&x, 2).unwrap();
        let rules = build_coco(2, 2).unwrap();
        let antecedents = antecedent_batch(&x, &partition, &rules, TNorm::AdaSoftmin).unwrap();
        let mut truth = init_consequents::<f64>(2, 2, 2);
        for (i, v) in truth.values_mut().iter_mut().enumerate() {
            *v = ((i * 7 % 11) as f64 - 5.0) / 3.0;
        }
        let outputs =
            consequent_batch(&x, &truth, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let targets: Vec<Vec<f64>> = outputs.iter().map(|o| o.system.clone()).collect();
        let solved = lse_consequents(&x, &targets, &antecedents).unwrap();
        for (a, b) in solved.values().iter().zip(truth.values()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn lse_zero_targets_give_zero_bank() {
        let (x, antecedents, _p, _r) = lse_fixture(10, 2, 2, 2);
        let targets = vec![vec![0.0f64; 2]; 10];
        let solved = lse_consequents(&x, &targets, &antecedents).unwrap();
        assert!(solved.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lse_underdetermined_still_beats_the_zero_bank() {
        // 3 rules x 5 slots x 2 classes = 30 unknowns, 6 instances.
        let (x, antecedents, _p, _r) = lse_fixture(6, 3, 4, 2);
        let targets: Vec<Vec<f64>> = (0..6).map(|i| vec![(i % 2) as f64, 1.0 - (i % 2) as f64]).collect();
        let solved = lse_consequents(&x, &targets, &antecedents).unwrap();
        let outputs =
            consequent_batch(&x, &solved, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let mse = batch_mse(&outputs, &targets).unwrap();
        let zero = init_consequents::<f64>(3, 4, 2);
        let zero_outputs =
            consequent_batch(&x, &zero, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let zero_mse = batch_mse(&zero_outputs, &targets).unwrap();
        assert!(mse <= zero_mse);
    }

    #[test]
    fn descent_property_small_step() {
        // One small-eta step on a fixed batch must not increase the loss.
        let (x, antecedents, partition, rules) = lse_fixture(8, 3, 3, 2);
        let mut consequents = init_consequents::<f64>(3, 3, 2);
        for (i, v) in consequents.values_mut().iter_mut().enumerate() {
            *v = ((i * 13 % 17) as f64 - 8.0) / 10.0;
        }
        let targets: Vec<Vec<f64>> = (0..8).map(|i| vec![(i % 2) as f64, 1.0 - (i % 2) as f64]).collect();
        let gates = GateBank::Ungated;
        let outputs =
            consequent_batch(&x, &consequents, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let before = batch_mse(&outputs, &targets).unwrap();
        let grad =
            grad_consequents(&x, &targets, &antecedents, &outputs, &consequents, &gates).unwrap();
        gd_step(consequents.values_mut(), &grad, 1e-4).unwrap();
        let _ = (&partition, &rules);
        let outputs =
            consequent_batch(&x, &consequents, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let after = batch_mse(&outputs, &targets).unwrap();
        assert!(after <= before);
    }

    #[test]
    fn gradients_are_bit_deterministic() {
        let (x, antecedents, partition, rules) = lse_fixture(8, 3, 3, 2);
        let mut consequents = init_consequents::<f64>(3, 3, 2);
        for (i, v) in consequents.values_mut().iter_mut().enumerate() {
            *v = ((i * 29 % 23) as f64 - 11.0) / 7.0;
        }
        let targets: Vec<Vec<f64>> =
            (0..8).map(|i| vec![(i % 2) as f64, 1.0 - (i % 2) as f64]).collect();
        let outputs =
            consequent_batch(&x, &consequents, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let g1 = grad_centers_softmin(&x, &targets, &antecedents, &outputs, &partition, &rules)
            .unwrap();
        let g2 = grad_centers_softmin(&x, &targets, &antecedents, &outputs, &partition, &rules)
            .unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn gate_gradients_require_matching_mode() {
        let (x, antecedents, _p, _r) = lse_fixture(4, 2, 2, 2);
        let consequents = init_consequents::<f64>(2, 2, 2);
        let targets = vec![vec![1.0f64, 0.0]; 4];
        let outputs =
            consequent_batch(&x, &consequents, crate::model::GateMode::Ungated, &[], &antecedents)
                .unwrap();
        let gates = GateBank::Ungated;
        assert!(matches!(
            grad_lambda(&x, &targets, &antecedents, &outputs, &consequents, &gates),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            grad_theta(&x, &targets, &antecedents, &outputs, &consequents, &gates),
            Err(Error::InvalidState(_))
        ));
    }
}
