//! Forward inference: memberships, firing strengths, normalization, gated
//! consequent outputs, loss, and prediction.

use crate::error::{Error, Result};
use crate::firing;
use crate::gate::GateFunction;
use crate::rulebase::{ConsequentBank, FuzzyPartition, IndexMatrix};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Firing-strength operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TNorm {
    Product,
    /// Softmin with a fixed negative exponent.
    FixedSoftmin(i32),
    AdaSoftmin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateMode {
    Ungated,
    FeatureGated,
    RuleGated,
}

/// Gate parameters for a training phase. Exactly one family is active at a
/// time: per-feature gates during feature selection, per-rule gates during
/// rule extraction, none during fine tuning.
#[derive(Clone, Debug)]
pub enum GateBank<F> {
    Ungated,
    FeatureGates { kind: GateFunction, lambda: Vec<F> },
    RuleGates { kind: GateFunction, theta: Vec<F> },
}

impl<F: Real> GateBank<F> {
    /// All feature gates at the gate function's almost-closed initial value.
    pub fn feature_gates(kind: GateFunction, features: usize) -> Self {
        GateBank::FeatureGates {
            kind,
            lambda: vec![kind.initial_parameter(); features],
        }
    }

    /// All rule gates at the gate function's almost-closed initial value.
    pub fn rule_gates(kind: GateFunction, rules: usize) -> Self {
        GateBank::RuleGates {
            kind,
            theta: vec![kind.initial_parameter(); rules],
        }
    }

    pub fn mode(&self) -> GateMode {
        match self {
            GateBank::Ungated => GateMode::Ungated,
            GateBank::FeatureGates { .. } => GateMode::FeatureGated,
            GateBank::RuleGates { .. } => GateMode::RuleGated,
        }
    }

    pub fn kind(&self) -> Option<GateFunction> {
        match self {
            GateBank::Ungated => None,
            GateBank::FeatureGates { kind, .. } | GateBank::RuleGates { kind, .. } => Some(*kind),
        }
    }

    pub fn parameters(&self) -> &[F] {
        match self {
            GateBank::Ungated => &[],
            GateBank::FeatureGates { lambda, .. } => lambda,
            GateBank::RuleGates { theta, .. } => theta,
        }
    }

    pub fn parameters_mut(&mut self) -> &mut [F] {
        match self {
            GateBank::Ungated => &mut [],
            GateBank::FeatureGates { lambda, .. } => lambda,
            GateBank::RuleGates { theta, .. } => theta,
        }
    }

    /// Gate function applied to the active parameters; empty when ungated.
    pub fn multipliers(&self) -> Vec<F> {
        match self {
            GateBank::Ungated => Vec::new(),
            GateBank::FeatureGates { kind, lambda } => {
                lambda.iter().map(|&l| kind.value(l)).collect()
            }
            GateBank::RuleGates { kind, theta } => theta.iter().map(|&t| kind.value(t)).collect(),
        }
    }
}

/// Antecedent half of a forward pass for one instance.
#[derive(Clone, Debug)]
pub struct AntecedentTrace<F> {
    /// R x D row-major membership values.
    pub memberships: Vec<F>,
    /// Softmin exponent per rule; empty under the product T-norm.
    pub exponents: Vec<i32>,
    /// Firing strength per rule.
    pub firings: Vec<F>,
    /// Normalized firing strengths; sums to 1.
    pub normalized: Vec<F>,
}

/// Consequent half of a forward pass for one instance.
#[derive(Clone, Debug)]
pub struct RuleOutputs<F> {
    /// R x C row-major rule outputs (gated values in gated modes).
    pub per_rule: Vec<F>,
    /// Length-C system output.
    pub system: Vec<F>,
}

/// Full forward trace for one instance.
#[derive(Clone, Debug)]
pub struct ForwardTrace<F> {
    pub antecedent: AntecedentTrace<F>,
    pub outputs: RuleOutputs<F>,
}

/// Divides the firing strengths by their sum.
pub fn normalize_firing<F: Real>(firings: &[F]) -> Result<Vec<F>> {
    if firings.is_empty() {
        return Err(Error::InvalidArgument("no firing strengths".into()));
    }
    let mut sum = F::zero();
    for &f in firings {
        if !f.is_finite() || f < F::zero() {
            return Err(Error::InvalidArgument(format!(
                "firing strengths must be finite and non-negative, got {f:?}"
            )));
        }
        sum = sum + f;
    }
    if sum == F::zero() {
        return Err(Error::DegenerateFiring);
    }
    Ok(firings.iter().map(|&f| f / sum).collect())
}

/// Memberships, firing strengths, and normalized firings for one instance.
pub fn antecedent_pass<F: Real>(
    x: &[F],
    partition: &FuzzyPartition<F>,
    rules: &IndexMatrix,
    tnorm: TNorm,
) -> Result<AntecedentTrace<F>> {
    let features = rules.features();
    if x.len() != features {
        return Err(Error::ShapeMismatch(format!(
            "instance has {} features, rule base expects {features}",
            x.len()
        )));
    }
    if partition.num_features() != features {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} features, rule base expects {features}",
            partition.num_features()
        )));
    }
    let r = rules.rules();
    let floor = F::membership_floor();
    let mut memberships = Vec::with_capacity(r * features);
    for rule in 0..r {
        for d in 0..features {
            let m = partition.center(d, rules.get(rule, d));
            if !x[d].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite feature value at position {d}"
                )));
            }
            let diff = x[d] - m;
            memberships.push((-diff * diff).exp().max(floor));
        }
    }
    let mut firings = Vec::with_capacity(r);
    let mut exponents = Vec::new();
    match tnorm {
        TNorm::Product => {
            for rule in 0..r {
                firings.push(firing::product_firing(
                    &memberships[rule * features..(rule + 1) * features],
                )?);
            }
        }
        TNorm::FixedSoftmin(q) => {
            exponents = vec![q; r];
            for rule in 0..r {
                firings.push(firing::fixed_softmin(
                    &memberships[rule * features..(rule + 1) * features],
                    q,
                )?);
            }
        }
        TNorm::AdaSoftmin => {
            exponents.reserve(r);
            for rule in 0..r {
                let row = &memberships[rule * features..(rule + 1) * features];
                let q = firing::adaptive_exponent(row)?.get();
                exponents.push(q);
                firings.push(firing::softmin_firing_with_exponent(row, q)?);
            }
        }
    }
    let normalized = normalize_firing(&firings)?;
    Ok(AntecedentTrace {
        memberships,
        exponents,
        firings,
        normalized,
    })
}

/// Rule outputs and system output given normalized firings and gate
/// multipliers (gate function already applied).
///
/// Feature gating multiplies each per-feature consequent term and leaves the
/// bias alone; rule gating multiplies the whole consequent, bias included.
pub fn consequent_pass<F: Real>(
    x: &[F],
    consequents: &ConsequentBank<F>,
    mode: GateMode,
    multipliers: &[F],
    normalized: &[F],
) -> Result<RuleOutputs<F>> {
    let (r, d, c) = (
        consequents.rules(),
        consequents.features(),
        consequents.classes(),
    );
    if x.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "instance has {} features, consequents expect {d}",
            x.len()
        )));
    }
    if normalized.len() != r {
        return Err(Error::ShapeMismatch(format!(
            "{} normalized firings for {r} rules",
            normalized.len()
        )));
    }
    match mode {
        GateMode::Ungated => {}
        GateMode::FeatureGated if multipliers.len() == d => {}
        GateMode::RuleGated if multipliers.len() == r => {}
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "{} gate multipliers do not match mode {mode:?} (R={r}, D={d})",
                multipliers.len()
            )))
        }
    }
    let mut per_rule = Vec::with_capacity(r * c);
    let mut system = vec![F::zero(); c];
    for rule in 0..r {
        for class in 0..c {
            let mut y = consequents.get(rule, 0, class);
            match mode {
                GateMode::FeatureGated => {
                    for (feat, &g) in multipliers.iter().enumerate() {
                        y = y + g * consequents.get(rule, feat + 1, class) * x[feat];
                    }
                }
                _ => {
                    for feat in 0..d {
                        y = y + consequents.get(rule, feat + 1, class) * x[feat];
                    }
                }
            }
            if let GateMode::RuleGated = mode {
                y = multipliers[rule] * y;
            }
            per_rule.push(y);
            system[class] = system[class] + normalized[rule] * y;
        }
    }
    Ok(RuleOutputs { per_rule, system })
}

/// Full forward pass for one instance.
pub fn forward<F: Real>(
    x: &[F],
    partition: &FuzzyPartition<F>,
    rules: &IndexMatrix,
    consequents: &ConsequentBank<F>,
    gates: &GateBank<F>,
    tnorm: TNorm,
) -> Result<ForwardTrace<F>> {
    let antecedent = antecedent_pass(x, partition, rules, tnorm)?;
    let multipliers = gates.multipliers();
    let outputs = consequent_pass(x, consequents, gates.mode(), &multipliers, &antecedent.normalized)?;
    Ok(ForwardTrace {
        antecedent,
        outputs,
    })
}

/// Antecedent traces for every instance of a batch.
///
/// When the centers are frozen this is computed once per phase and reused
/// across iterations; the exponents chosen here are then fixed for the whole
/// phase along with the memberships.
pub fn antecedent_batch<F: Real>(
    x: &[Vec<F>],
    partition: &FuzzyPartition<F>,
    rules: &IndexMatrix,
    tnorm: TNorm,
) -> Result<Vec<AntecedentTrace<F>>> {
    x.iter()
        .map(|xi| antecedent_pass(xi, partition, rules, tnorm))
        .collect()
}

/// Consequent outputs for every instance given precomputed antecedents.
pub fn consequent_batch<F: Real>(
    x: &[Vec<F>],
    consequents: &ConsequentBank<F>,
    mode: GateMode,
    multipliers: &[F],
    antecedents: &[AntecedentTrace<F>],
) -> Result<Vec<RuleOutputs<F>>> {
    if x.len() != antecedents.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} instances vs {} antecedent traces",
            x.len(),
            antecedents.len()
        )));
    }
    x.iter()
        .zip(antecedents)
        .map(|(xi, a)| consequent_pass(xi, consequents, mode, multipliers, &a.normalized))
        .collect()
}

/// Batch MSE straight from consequent outputs, without copying the system
/// outputs into an intermediate table.
pub fn batch_mse<F: Real>(outputs: &[RuleOutputs<F>], targets: &[Vec<F>]) -> Result<F> {
    if outputs.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} outputs vs {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut acc = F::zero();
    for (o, t) in outputs.iter().zip(targets) {
        if o.system.len() != t.len() {
            return Err(Error::ShapeMismatch(format!(
                "output width {} vs target width {}",
                o.system.len(),
                t.len()
            )));
        }
        for (&a, &b) in o.system.iter().zip(t) {
            let e = a - b;
            acc = acc + e * e;
        }
    }
    let two_n = F::from(2 * outputs.len()).unwrap();
    Ok(acc / two_n)
}

/// Mean square error `(1/2N) * sum_n sum_c (out - target)^2`.
pub fn mse_loss<F: Real>(outputs: &[Vec<F>], targets: &[Vec<F>]) -> Result<F> {
    if outputs.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} outputs vs {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut acc = F::zero();
    for (o, t) in outputs.iter().zip(targets) {
        if o.len() != t.len() {
            return Err(Error::ShapeMismatch(format!(
                "output width {} vs target width {}",
                o.len(),
                t.len()
            )));
        }
        for (&a, &b) in o.iter().zip(t) {
            let e = a - b;
            acc = acc + e * e;
        }
    }
    let two_n = F::from(2 * outputs.len()).unwrap();
    Ok(acc / two_n)
}

/// Index of the largest system output; ties break toward the smallest class.
pub fn argmax_class<F: Real>(system_output: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in system_output.iter().enumerate().skip(1) {
        if v > system_output[best] {
            best = i;
        }
    }
    best
}

/// A trained TSK system: partition, rule base, consequents, and the firing
/// operator it was trained with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TskModel<F> {
    pub partition: FuzzyPartition<F>,
    pub rules: IndexMatrix,
    pub consequents: ConsequentBank<F>,
    pub tnorm: TNorm,
}

impl<F: Real> TskModel<F> {
    pub fn new(
        partition: FuzzyPartition<F>,
        rules: IndexMatrix,
        consequents: ConsequentBank<F>,
        tnorm: TNorm,
    ) -> Result<Self> {
        if partition.num_features() != rules.features()
            || consequents.features() != rules.features()
            || consequents.rules() != rules.rules()
        {
            return Err(Error::ShapeMismatch(format!(
                "partition {}f, rules {}x{}, consequents {}r/{}f disagree",
                partition.num_features(),
                rules.rules(),
                rules.features(),
                consequents.rules(),
                consequents.features()
            )));
        }
        Ok(TskModel {
            partition,
            rules,
            consequents,
            tnorm,
        })
    }

    pub fn num_features(&self) -> usize {
        self.rules.features()
    }

    pub fn num_rules(&self) -> usize {
        self.rules.rules()
    }

    pub fn num_classes(&self) -> usize {
        self.consequents.classes()
    }

    pub fn forward(&self, x: &[F], gates: &GateBank<F>) -> Result<ForwardTrace<F>> {
        forward(x, &self.partition, &self.rules, &self.consequents, gates, self.tnorm)
    }

    /// Predicted class for one (normalized) instance.
    pub fn predict(&self, x: &[F]) -> Result<usize> {
        let trace = self.forward(x, &GateBank::Ungated)?;
        Ok(argmax_class(&trace.outputs.system))
    }
}
