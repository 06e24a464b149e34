//! The three-phase training pipeline and its evaluation protocols.
//!
//! Phase (i) selects features on a compact rule base via per-feature
//! consequent gates; phase (ii) extracts rules on an enhanced rule base over
//! the reduced feature space via per-rule gates; phase (iii) fine-tunes the
//! pruned system with the gates removed, by gradient descent or least
//! squares. Parameters and gates are reinitialized from scratch between
//! phases (i) and (ii); phase (iii) continues from the pruned phase-(ii)
//! parameters.
//!
//! Whether the dataset counts as high-dimensional is decided once, on the
//! original feature count. High-dimensional runs freeze the membership
//! centers at their initial placement in every phase, which also fixes the
//! adaptive softmin exponents, so the whole antecedent side is computed once
//! per phase and reused across iterations.

use crate::data::{kfold_split, one_hot, Dataset, NormalizationMode, NormalizationStats};
use crate::error::{Error, Result};
use crate::gate::GateFunction;
use crate::model::{
    antecedent_batch, batch_mse, consequent_batch, AntecedentTrace, GateBank, TNorm, TskModel,
};
use crate::rulebase::{
    build_coco, build_enfrb, init_consequents, place_centers, ConsequentBank, FuzzyPartition,
    IndexMatrix,
};
use crate::scalar::Real;
use crate::training::{
    apply_gradients, compute_gradients, lse_consequents, FineTuneMode, TrainConfig,
};
use std::time::Instant;

fn threshold_over<F: Real>(values: &[F], zeta: F, on_abs: bool) -> F {
    assert!(!values.is_empty(), "threshold of an empty gate vector");
    let mut lo = if on_abs { values[0].abs() } else { values[0] };
    let mut hi = lo;
    for &v in &values[1..] {
        let g = if on_abs { v.abs() } else { v };
        if g < lo {
            lo = g;
        }
        if g > hi {
            hi = g;
        }
    }
    hi - zeta * (hi - lo)
}

/// Feature-selection threshold over the absolute gate values:
/// `tau = max - zeta * (max - min)`.
pub fn threshold_lambda<F: Real>(gate_values: &[F], zeta_lambda: F) -> F {
    threshold_over(gate_values, zeta_lambda, true)
}

/// Rule-extraction threshold, same formula over the absolute rule-gate
/// values.
pub fn threshold_theta<F: Real>(gate_values: &[F], zeta_theta: F) -> F {
    threshold_over(gate_values, zeta_theta, true)
}

/// Outcome of one training phase.
#[derive(Clone, Debug)]
pub struct PhaseResult<F> {
    /// Loss trajectory: initial loss followed by the loss after each update.
    pub losses: Vec<F>,
    /// Gate values at termination; empty for the ungated fine-tune phase.
    pub gate_values: Vec<F>,
    /// Post-update gate values per iteration (one row per iteration).
    pub gate_trajectory: Vec<Vec<F>>,
    /// Selected feature indices (feature-selection phase only).
    pub selected_features: Option<Vec<usize>>,
    /// Retained rule indices into the full enhanced base (rule-extraction
    /// phase only).
    pub retained_rules: Option<Vec<usize>>,
    /// Wall-clock duration; excluded from deterministic artifacts.
    pub millis: u128,
}

impl<F: Real> PhaseResult<F> {
    pub fn final_loss(&self) -> F {
        *self.losses.last().expect("phase records at least one loss")
    }
}

/// Gradient-descent training loop shared by all phases.
///
/// Iterations are epochs over the batch; with the default full batch each
/// epoch is exactly one update. When the centers are frozen the antecedent
/// traces (memberships, exponents, firings) are computed once and reused.
#[allow(clippy::too_many_arguments)]
fn run_gd<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    partition: &mut FuzzyPartition<F>,
    rules: &IndexMatrix,
    consequents: &mut ConsequentBank<F>,
    gates: &mut GateBank<F>,
    tnorm: TNorm,
    train_centers: bool,
    iterations: usize,
    eta: F,
    batch_size: Option<usize>,
    phase: &'static str,
) -> Result<(Vec<F>, Vec<Vec<F>>)> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let nb = batch_size.unwrap_or(n).min(n);
    let record_gates = !matches!(gates, GateBank::Ungated);
    let mut losses = Vec::with_capacity(iterations + 1);
    let mut trajectory = Vec::new();
    let mut cached: Option<Vec<AntecedentTrace<F>>> = None;

    for iteration in 0..=iterations {
        if cached.is_none() {
            cached = Some(antecedent_batch(x, partition, rules, tnorm)?);
        }
        let antecedents = cached.as_ref().expect("antecedents just cached");
        let multipliers = gates.multipliers();
        let outputs = consequent_batch(x, consequents, gates.mode(), &multipliers, antecedents)?;
        let loss = batch_mse(&outputs, targets)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { phase, iteration });
        }
        losses.push(loss);
        if iteration == iterations {
            break;
        }
        if nb == n {
            let grads = compute_gradients(
                x, targets, antecedents, &outputs, partition, rules, consequents, gates, tnorm,
                train_centers,
            )?;
            apply_gradients(&grads, partition, consequents, gates, eta)?;
        } else {
            let mut start = 0;
            while start < n {
                let end = (start + nb).min(n);
                let xc = &x[start..end];
                let tc = &targets[start..end];
                // Earlier chunks already moved the parameters, so the chunk
                // state is recomputed; frozen centers still allow reusing the
                // cached antecedents.
                let ante: Vec<AntecedentTrace<F>> = if train_centers {
                    antecedent_batch(xc, partition, rules, tnorm)?
                } else {
                    cached.as_ref().expect("cached antecedents")[start..end].to_vec()
                };
                let mult = gates.multipliers();
                let out = consequent_batch(xc, consequents, gates.mode(), &mult, &ante)?;
                let grads = compute_gradients(
                    xc, tc, &ante, &out, partition, rules, consequents, gates, tnorm,
                    train_centers,
                )?;
                apply_gradients(&grads, partition, consequents, gates, eta)?;
                start = end;
            }
        }
        if train_centers {
            cached = None;
        }
        if record_gates {
            trajectory.push(gates.multipliers());
        }
    }
    Ok((losses, trajectory))
}

/// Feature-selection phase output: the phase diagnostics plus the trained
/// state, kept around so consistency properties can be checked on it.
#[derive(Clone, Debug)]
pub struct FsPhase<F> {
    pub result: PhaseResult<F>,
    pub partition: FuzzyPartition<F>,
    pub rules: IndexMatrix,
    pub consequents: ConsequentBank<F>,
    pub gates: GateBank<F>,
    /// Gate values before the first update.
    pub initial_gate_values: Vec<F>,
}

/// Phase (i): feature selection on a compact rule base.
///
/// Builds a compact base with `sets_feature_selection` sets per feature,
/// zero consequents and almost-closed feature gates, trains consequents,
/// gates, and (when `train_centers`) centers by gradient descent, then keeps
/// the features whose gate value clears the threshold. Selection compares
/// strictly above the threshold; if nothing clears it (all gates equal, for
/// instance), the single best-gated feature is kept.
pub fn run_phase_fs<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    cfg: &TrainConfig<F>,
    train_centers: bool,
) -> Result<FsPhase<F>> {
    cfg.validate()?;
    let start = Instant::now();
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let c = targets.first().map(|t| t.len()).unwrap_or(0);
    let s = cfg.sets_feature_selection;
    let mut partition = place_centers(x, s)?;
    let rules = build_coco(s, d)?;
    let mut consequents = init_consequents(s, d, c);
    let mut gates = GateBank::feature_gates(cfg.gate, d);
    let initial_gate_values = gates.multipliers();
    let (losses, trajectory) = run_gd(
        x,
        targets,
        &mut partition,
        &rules,
        &mut consequents,
        &mut gates,
        TNorm::AdaSoftmin,
        train_centers,
        cfg.iterations.feature_selection,
        cfg.eta,
        cfg.batch_size,
        "feature selection",
    )?;
    let gate_values = gates.multipliers();
    let compared: Vec<F> = if cfg.threshold_on_abs {
        gate_values.iter().map(|v| v.abs()).collect()
    } else {
        gate_values.clone()
    };
    let tau = threshold_over(&gate_values, cfg.zeta_lambda, cfg.threshold_on_abs);
    let mut selected: Vec<usize> = (0..d).filter(|&j| compared[j] > tau).collect();
    if selected.is_empty() {
        let mut best = 0;
        for j in 1..d {
            if compared[j] > compared[best] {
                best = j;
            }
        }
        selected.push(best);
    }
    Ok(FsPhase {
        result: PhaseResult {
            losses,
            gate_values,
            gate_trajectory: trajectory,
            selected_features: Some(selected),
            retained_rules: None,
            millis: start.elapsed().as_millis(),
        },
        partition,
        rules,
        consequents,
        gates,
        initial_gate_values,
    })
}

/// Rule-extraction phase output: diagnostics plus the pruned model.
#[derive(Clone, Debug)]
pub struct RePhase<F> {
    pub result: PhaseResult<F>,
    /// The enhanced-base model restricted to the retained rules.
    pub model: TskModel<F>,
}

/// Phase (ii): rule extraction on an enhanced rule base over the reduced
/// feature space.
///
/// Everything is reinitialized from scratch: fresh centers with
/// `sets_rule_extraction` sets, zero consequents, almost-closed rule gates.
/// Rules whose gate value reaches the threshold are retained; if fewer than
/// C rules pass, the C highest-gated rules are kept instead.
pub fn run_phase_re<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    cfg: &TrainConfig<F>,
    train_centers: bool,
) -> Result<RePhase<F>> {
    cfg.validate()?;
    let start = Instant::now();
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let c = targets.first().map(|t| t.len()).unwrap_or(0);
    let s = cfg.sets_rule_extraction;
    let mut partition = place_centers(x, s)?;
    let rules = build_enfrb(s, d)?;
    let r = rules.rules();
    let mut consequents = init_consequents(r, d, c);
    let mut gates = GateBank::rule_gates(cfg.gate, r);
    let (losses, trajectory) = run_gd(
        x,
        targets,
        &mut partition,
        &rules,
        &mut consequents,
        &mut gates,
        TNorm::AdaSoftmin,
        train_centers,
        cfg.iterations.rule_extraction,
        cfg.eta,
        cfg.batch_size,
        "rule extraction",
    )?;
    let gate_values = gates.multipliers();
    let compared: Vec<F> = if cfg.threshold_on_abs {
        gate_values.iter().map(|v| v.abs()).collect()
    } else {
        gate_values.clone()
    };
    let tau = threshold_over(&gate_values, cfg.zeta_theta, cfg.threshold_on_abs);
    let mut retained: Vec<usize> = (0..r).filter(|&i| compared[i] >= tau).collect();
    let floor = c.min(r);
    if retained.len() < floor {
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| {
            compared[b]
                .partial_cmp(&compared[a])
                .expect("gate values are comparable")
                .then(a.cmp(&b))
        });
        retained = order[..floor].to_vec();
        retained.sort_unstable();
    }
    let model = TskModel::new(
        partition,
        rules.retain_rows(&retained),
        consequents.retain_rules(&retained),
        TNorm::AdaSoftmin,
    )?;
    Ok(RePhase {
        result: PhaseResult {
            losses,
            gate_values,
            gate_trajectory: trajectory,
            selected_features: None,
            retained_rules: Some(retained),
            millis: start.elapsed().as_millis(),
        },
        model,
    })
}

/// Phase (iii): fine tuning of the pruned system with all gates removed.
///
/// Continues from the phase-(ii) parameters. In gradient-descent mode the
/// consequents (and centers, when `train_centers`) are trained further; in
/// least-squares mode the antecedents stay fixed and the consequents are
/// replaced by the ridge least-squares estimate.
pub fn run_phase_ft<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    mut model: TskModel<F>,
    cfg: &TrainConfig<F>,
    train_centers: bool,
) -> Result<(PhaseResult<F>, TskModel<F>)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut gates = GateBank::Ungated;
    let losses = match cfg.fine_tune_mode {
        FineTuneMode::GradientDescent => {
            let (losses, _) = run_gd(
                x,
                targets,
                &mut model.partition,
                &model.rules,
                &mut model.consequents,
                &mut gates,
                model.tnorm,
                train_centers,
                cfg.iterations.fine_tune,
                cfg.eta,
                cfg.batch_size,
                "fine tuning",
            )?;
            losses
        }
        FineTuneMode::LeastSquares => {
            let antecedents = antecedent_batch(x, &model.partition, &model.rules, model.tnorm)?;
            let before = batch_mse(
                &consequent_batch(
                    x,
                    &model.consequents,
                    crate::model::GateMode::Ungated,
                    &[],
                    &antecedents,
                )?,
                targets,
            )?;
            if !before.is_finite() {
                return Err(Error::TrainingDiverged {
                    phase: "fine tuning",
                    iteration: 0,
                });
            }
            model.consequents = lse_consequents(x, targets, &antecedents)?;
            let after = batch_mse(
                &consequent_batch(
                    x,
                    &model.consequents,
                    crate::model::GateMode::Ungated,
                    &[],
                    &antecedents,
                )?,
                targets,
            )?;
            vec![before, after]
        }
    };
    Ok((
        PhaseResult {
            losses,
            gate_values: Vec::new(),
            gate_trajectory: Vec::new(),
            selected_features: None,
            retained_rules: None,
            millis: start.elapsed().as_millis(),
        },
        model,
    ))
}

/// A complete pipeline run on one training set.
#[derive(Clone, Debug)]
pub struct PipelineRun<F> {
    /// Final model over the reduced feature space.
    pub model: TskModel<F>,
    /// Original indices of the selected features.
    pub selected_features: Vec<usize>,
    pub fs: PhaseResult<F>,
    pub re: PhaseResult<F>,
    pub ft: PhaseResult<F>,
}

impl<F: Real> PipelineRun<F> {
    /// Predicts from a full-width normalized instance by projecting it onto
    /// the selected features first.
    pub fn predict(&self, x_normalized: &[F]) -> Result<usize> {
        let projected = select_columns_row(x_normalized, &self.selected_features);
        self.model.predict(&projected)
    }
}

/// Keeps the listed columns of a row, in the given order.
pub fn select_columns_row<F: Copy>(row: &[F], keep: &[usize]) -> Vec<F> {
    keep.iter().map(|&j| row[j]).collect()
}

/// Keeps the listed columns of every row.
pub fn select_columns<F: Copy>(rows: &[Vec<F>], keep: &[usize]) -> Vec<Vec<F>> {
    rows.iter().map(|r| select_columns_row(r, keep)).collect()
}

/// Runs phases (i) to (iii) on one normalized training set.
///
/// The high-dimensional regime (frozen centers) is decided once from the
/// original feature count and applied to all three phases.
pub fn run_pipeline<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    cfg: &TrainConfig<F>,
) -> Result<PipelineRun<F>> {
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let train_centers = !cfg.is_high_dim(d);
    let fs = run_phase_fs(x, targets, cfg, train_centers)?;
    let selected = fs
        .result
        .selected_features
        .clone()
        .expect("feature-selection phase records its selection");
    let x_reduced = select_columns(x, &selected);
    let re = run_phase_re(&x_reduced, targets, cfg, train_centers)?;
    let (ft, model) = run_phase_ft(&x_reduced, targets, re.model, cfg, train_centers)?;
    Ok(PipelineRun {
        model,
        selected_features: selected,
        fs: fs.result,
        re: re.result,
        ft,
    })
}

/// Plain ungated training of a compact-base model: centers (when
/// `train_centers`) and consequents by gradient descent under the given
/// firing operator, `iterations.fine_tune` updates.
pub fn train_plain<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    sets: usize,
    tnorm: TNorm,
    cfg: &TrainConfig<F>,
    train_centers: bool,
) -> Result<(TskModel<F>, PhaseResult<F>)> {
    cfg.validate()?;
    let start = Instant::now();
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let c = targets.first().map(|t| t.len()).unwrap_or(0);
    let mut partition = place_centers(x, sets)?;
    let rules = build_coco(sets, d)?;
    let mut consequents = init_consequents(sets, d, c);
    let mut gates = GateBank::Ungated;
    let (losses, _) = run_gd(
        x,
        targets,
        &mut partition,
        &rules,
        &mut consequents,
        &mut gates,
        tnorm,
        train_centers,
        cfg.iterations.fine_tune,
        cfg.eta,
        cfg.batch_size,
        "plain training",
    )?;
    let model = TskModel::new(partition, rules, consequents, tnorm)?;
    Ok((
        model,
        PhaseResult {
            losses,
            gate_values: Vec::new(),
            gate_trajectory: Vec::new(),
            selected_features: None,
            retained_rules: None,
            millis: start.elapsed().as_millis(),
        },
    ))
}

/// Fraction of instances whose prediction matches the label.
pub fn accuracy<F: Real>(
    model: &TskModel<F>,
    selected_features: &[usize],
    x_normalized: &[Vec<F>],
    labels: &[usize],
) -> Result<F> {
    if x_normalized.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} instances vs {} labels",
            x_normalized.len(),
            labels.len()
        )));
    }
    if x_normalized.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let mut correct = 0usize;
    for (row, &label) in x_normalized.iter().zip(labels) {
        let projected = select_columns_row(row, selected_features);
        if model.predict(&projected)? == label {
            correct += 1;
        }
    }
    Ok(F::from(correct).unwrap() / F::from(labels.len()).unwrap())
}

/// One cross-validation run.
#[derive(Clone, Debug)]
pub struct CvRun<F> {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: F,
    pub selected_features: usize,
    pub extracted_rules: usize,
}

/// Aggregated cross-validation report.
#[derive(Clone, Debug)]
pub struct PipelineReport<F> {
    pub runs: Vec<CvRun<F>>,
    pub mean_accuracy: F,
    pub mean_selected_features: F,
    pub mean_extracted_rules: F,
    /// Mean wall-clock milliseconds per phase across runs; excluded from
    /// deterministic artifacts.
    pub mean_phase_millis: [f64; 3],
}

struct FoldOutcome<F> {
    model: TskModel<F>,
    selected: Vec<usize>,
    rules: usize,
    phase_millis: [u128; 3],
}

/// Shared stratified-CV driver: `folds` splits, rotated test fold, the whole
/// protocol repeated `repeats` times with per-repeat reshuffles derived from
/// the config seed.
fn cross_validate_with<F, T>(
    dataset: &Dataset<F>,
    seed: u64,
    folds: usize,
    repeats: usize,
    norm: NormalizationMode,
    trainer: T,
) -> Result<PipelineReport<F>>
where
    F: Real,
    T: Fn(&[Vec<F>], &[Vec<F>]) -> Result<FoldOutcome<F>>,
{
    if repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    let c = dataset.num_classes();
    let mut runs = Vec::with_capacity(folds * repeats);
    let mut millis = [0u128; 3];
    for repeat in 0..repeats {
        let assignment = kfold_split(dataset, folds, seed.wrapping_add(repeat as u64))?;
        for fold in 0..folds {
            let test_idx = &assignment[fold];
            let train_idx: Vec<usize> = (0..folds)
                .filter(|&f| f != fold)
                .flat_map(|f| assignment[f].iter().copied())
                .collect();
            let (train_raw, train_labels) = dataset.subset(&train_idx);
            let stats = NormalizationStats::fit(&train_raw, norm)?;
            let train_x = stats.apply(&train_raw);
            let targets = one_hot(&train_labels, c)?;
            let outcome = trainer(&train_x, &targets)?;
            let (test_raw, test_labels) = dataset.subset(test_idx);
            let test_x = stats.apply(&test_raw);
            let acc = accuracy(&outcome.model, &outcome.selected, &test_x, &test_labels)?;
            for (slot, m) in millis.iter_mut().zip(outcome.phase_millis) {
                *slot += m;
            }
            runs.push(CvRun {
                repeat,
                fold,
                accuracy: acc,
                selected_features: outcome.selected.len(),
                extracted_rules: outcome.rules,
            });
        }
    }
    let count = F::from(runs.len()).unwrap();
    let mean_accuracy = runs.iter().map(|r| r.accuracy).fold(F::zero(), |a, b| a + b) / count;
    let mean_selected_features = runs
        .iter()
        .map(|r| F::from(r.selected_features).unwrap())
        .fold(F::zero(), |a, b| a + b)
        / count;
    let mean_extracted_rules = runs
        .iter()
        .map(|r| F::from(r.extracted_rules).unwrap())
        .fold(F::zero(), |a, b| a + b)
        / count;
    let n_runs = runs.len() as f64;
    Ok(PipelineReport {
        runs,
        mean_accuracy,
        mean_selected_features,
        mean_extracted_rules,
        mean_phase_millis: [
            millis[0] as f64 / n_runs,
            millis[1] as f64 / n_runs,
            millis[2] as f64 / n_runs,
        ],
    })
}

/// Stratified k-fold cross-validation of the full three-phase pipeline.
pub fn cross_validate<F: Real>(
    dataset: &Dataset<F>,
    cfg: &TrainConfig<F>,
    folds: usize,
    repeats: usize,
    norm: NormalizationMode,
) -> Result<PipelineReport<F>> {
    cross_validate_with(dataset, cfg.seed, folds, repeats, norm, |x, t| {
        let run = run_pipeline(x, t, cfg)?;
        Ok(FoldOutcome {
            rules: run.model.num_rules(),
            phase_millis: [run.fs.millis, run.re.millis, run.ft.millis],
            selected: run.selected_features,
            model: run.model,
        })
    })
}

/// Cross-validation of the plain (ungated, compact-base) model under a given
/// firing operator; the protocol behind the T-norm comparison.
pub fn cross_validate_plain<F: Real>(
    dataset: &Dataset<F>,
    sets: usize,
    tnorm: TNorm,
    cfg: &TrainConfig<F>,
    folds: usize,
    repeats: usize,
    norm: NormalizationMode,
) -> Result<PipelineReport<F>> {
    let d = dataset.num_features();
    let train_centers = !cfg.is_high_dim(d);
    let selected: Vec<usize> = (0..d).collect();
    cross_validate_with(dataset, cfg.seed, folds, repeats, norm, |x, t| {
        let (model, result) = train_plain(x, t, sets, tnorm, cfg, train_centers)?;
        Ok(FoldOutcome {
            rules: model.num_rules(),
            phase_millis: [result.millis, 0, 0],
            selected: selected.clone(),
            model,
        })
    })
}

/// Result of training the plain model under one firing operator: either a
/// mean cross-validation accuracy or the failure that stopped it. Failures
/// of the product and fixed-softmin operators are data here, not process
/// errors.
#[derive(Clone, Debug)]
pub struct OperatorOutcome<F> {
    pub tnorm: TNorm,
    pub mean_accuracy: Option<F>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct TnormComparison<F> {
    pub outcomes: Vec<OperatorOutcome<F>>,
    /// `softmin((0.5, 0.55, 0.49, 0.48), -12)`: the fake-minimum
    /// demonstration value, recorded alongside every comparison.
    pub fake_minimum_probe: F,
}

/// Trains the plain compact-base model under the product T-norm, a fixed
/// softmin, and the adaptive softmin, recording accuracy or failure kind per
/// operator.
pub fn compare_tnorms<F: Real>(
    dataset: &Dataset<F>,
    sets: usize,
    fixed_q: i32,
    cfg: &TrainConfig<F>,
    folds: usize,
    repeats: usize,
    norm: NormalizationMode,
) -> Result<TnormComparison<F>> {
    let probe = [
        F::from(0.5).unwrap(),
        F::from(0.55).unwrap(),
        F::from(0.49).unwrap(),
        F::from(0.48).unwrap(),
    ];
    let fake_minimum_probe = crate::firing::fixed_softmin(&probe, -12)?;
    let mut outcomes = Vec::with_capacity(3);
    for tnorm in [TNorm::Product, TNorm::FixedSoftmin(fixed_q), TNorm::AdaSoftmin] {
        let outcome = match cross_validate_plain(dataset, sets, tnorm, cfg, folds, repeats, norm) {
            Ok(report) => OperatorOutcome {
                tnorm,
                mean_accuracy: Some(report.mean_accuracy),
                failure: None,
            },
            Err(err @ (Error::DegenerateFiring | Error::TrainingDiverged { .. })) => {
                OperatorOutcome {
                    tnorm,
                    mean_accuracy: None,
                    failure: Some(err.to_string()),
                }
            }
            Err(other) => return Err(other),
        };
        outcomes.push(outcome);
    }
    Ok(TnormComparison {
        outcomes,
        fake_minimum_probe,
    })
}

/// One gate-demo trajectory: the feature-selection phase run with a
/// particular gate function and learning rate.
#[derive(Clone, Debug)]
pub struct GateDemoRun<F> {
    pub gate: GateFunction,
    pub eta: F,
    pub result: PhaseResult<F>,
}

/// Runs the feature-selection phase with the proposed gate at the configured
/// learning rate, and with the legacy `exp(-l^2)` gate at the same rate and
/// at five times that rate, recording the gate-value trajectories.
pub fn gate_demo<F: Real>(
    x: &[Vec<F>],
    targets: &[Vec<F>],
    cfg: &TrainConfig<F>,
) -> Result<Vec<GateDemoRun<F>>> {
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let train_centers = !cfg.is_high_dim(d);
    let five = F::from(5.0).unwrap();
    let variants = [
        (GateFunction::Proposed, cfg.eta),
        (GateFunction::Legacy(crate::gate::LegacyGate::ExpSq), cfg.eta),
        (GateFunction::Legacy(crate::gate::LegacyGate::ExpSq), cfg.eta * five),
    ];
    let mut runs = Vec::with_capacity(variants.len());
    for (gate, eta) in variants {
        let mut variant = cfg.clone();
        variant.gate = gate;
        variant.eta = eta;
        let fs = run_phase_fs(x, targets, &variant, train_centers)?;
        runs.push(GateDemoRun {
            gate,
            eta,
            result: fs.result,
        });
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_classification;
    use crate::training::PhaseIterations;

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_lambda(&[0.9f64, 0.1], 0.5), 0.5);
        assert_eq!(threshold_lambda(&[0.7f64, 0.7, 0.7], 0.5), 0.7);
        let tau = threshold_lambda(&[1.0f64, 0.6, 0.2], 0.4);
        assert!((tau - 0.68).abs() < 1e-12);
        let tau = threshold_theta(&[0.8f64, 0.0], 0.3);
        assert!((tau - 0.56).abs() < 1e-12);
        assert_eq!(threshold_theta(&[0.4f64], 0.3), 0.4);
        assert_eq!(threshold_theta(&[0.5f64, 0.5, 0.5], 0.9), 0.5);
        // the absolute value is what gets thresholded
        assert_eq!(threshold_lambda(&[-0.9f64, 0.1], 0.5), 0.5);
    }

    /// Small two-class set where only feature 0 carries signal; the other
    /// columns are deterministic noise.
    fn signal_plus_noise(n: usize, noise: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let f0 = (i as f64 + 0.5) / n as f64;
            let mut row = vec![f0];
            for j in 0..noise {
                row.push((((i * 37 + j * 101 + 13) % 83) as f64) / 82.0);
            }
            x.push(row);
            labels.push(usize::from(f0 > 0.5));
        }
        let targets = crate::data::one_hot(&labels, 2).unwrap();
        (x, targets, labels)
    }

    fn quick_config(d: usize, iterations: usize) -> TrainConfig<f64> {
        let mut cfg = TrainConfig::for_dimension(d);
        cfg.eta = 0.05;
        cfg.iterations = PhaseIterations::uniform(iterations);
        cfg
    }

    #[test]
    fn feature_gates_start_at_the_documented_opening() {
        let (x, t, _) = signal_plus_noise(20, 3);
        let cfg = quick_config(4, 0);
        let fs = run_phase_fs(&x, &t, &cfg, true).unwrap();
        for &v in &fs.initial_gate_values {
            assert!(((v * 1e4).round() / 1e4 - 0.0165).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn signal_feature_is_selected() {
        let (x, t, _) = signal_plus_noise(80, 9);
        let cfg = quick_config(10, 400);
        let fs = run_phase_fs(&x, &t, &cfg, true).unwrap();
        let selected = fs.result.selected_features.unwrap();
        assert!(
            selected.contains(&0),
            "feature 0 missing from selection {selected:?}; gates {:?}",
            fs.result.gate_values
        );
    }

    #[test]
    fn constant_features_fall_back_to_a_single_selection() {
        let x = vec![vec![0.0f64; 4]; 12];
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let t = crate::data::one_hot(&labels, 2).unwrap();
        let cfg = quick_config(4, 20);
        let fs = run_phase_fs(&x, &t, &cfg, true).unwrap();
        assert_eq!(fs.result.selected_features.unwrap().len(), 1);
    }

    #[test]
    fn untrained_rule_gates_all_pass_the_threshold() {
        // Zero iterations leave every gate at its initial value; equal gates
        // give a zero range, so every rule passes.
        let (x, t, _) = signal_plus_noise(20, 2);
        let cfg = quick_config(3, 0);
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        let r = (2 * 3 + 1) * cfg.sets_rule_extraction;
        assert_eq!(re.result.retained_rules.unwrap().len(), r);
    }

    #[test]
    fn rule_extraction_reinitializes_consequents_to_zero() {
        let (x, t, _) = signal_plus_noise(20, 2);
        let cfg = quick_config(3, 0);
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        assert!(re.model.consequents.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn enhanced_base_dimensions_after_selection() {
        let (x, t, _) = signal_plus_noise(30, 8);
        let cfg = quick_config(9, 0);
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        // (2 * 9 + 1) * 5 = 95 rules before pruning; zero iterations retain all.
        assert_eq!(re.result.gate_values.len(), 95);
        assert_eq!(re.model.num_rules(), 95);
    }

    #[test]
    fn rule_floor_keeps_the_class_count() {
        let (x, t, _) = signal_plus_noise(40, 2);
        let mut cfg = quick_config(3, 300);
        cfg.zeta_theta = 0.999;
        // An extreme threshold coefficient retains almost nothing; the floor
        // must keep at least C = 2 rules.
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        let kept = re.result.retained_rules.unwrap().len();
        assert!(kept >= 2, "only {kept} rules retained");
    }

    #[test]
    fn zero_iteration_fine_tune_changes_nothing() {
        let (x, t, _) = signal_plus_noise(25, 2);
        let cfg = quick_config(3, 60);
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        let before = re.model.clone();
        let mut cfg0 = cfg.clone();
        cfg0.iterations.fine_tune = 0;
        let (result, after) = run_phase_ft(&x, &t, re.model, &cfg0, true).unwrap();
        assert_eq!(result.losses.len(), 1);
        assert!(result.final_loss().is_finite());
        for (row, want) in x.iter().zip(before.clone().consequents.values()) {
            let _ = want;
            assert_eq!(after.predict(row).unwrap(), before.predict(row).unwrap());
        }
        assert_eq!(after.consequents.values(), before.consequents.values());
    }

    #[test]
    fn fine_tune_does_not_worsen_the_training_loss() {
        let (x, t, _) = signal_plus_noise(25, 3);
        let cfg = quick_config(4, 120);
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        let (result, _) = run_phase_ft(&x, &t, re.model, &cfg, true).unwrap();
        assert!(result.final_loss() <= result.losses[0]);
    }

    #[test]
    fn least_squares_fine_tune_beats_gradient_descent() {
        let (x, t, _) = signal_plus_noise(30, 3);
        let cfg = quick_config(4, 150);
        let re = run_phase_re(&x, &t, &cfg, true).unwrap();
        let (gd_result, _) = run_phase_ft(&x, &t, re.model.clone(), &cfg, false).unwrap();
        let mut lse_cfg = cfg.clone();
        lse_cfg.fine_tune_mode = FineTuneMode::LeastSquares;
        let (lse_result, _) = run_phase_ft(&x, &t, re.model, &lse_cfg, false).unwrap();
        assert!(lse_result.final_loss() <= gd_result.final_loss() + 1e-6);
    }

    #[test]
    fn pruning_is_consistent_with_the_closed_gates() {
        // Predictions of the phase-(i) model must not depend on consequents
        // of unselected features once their gates are forced shut.
        let (x, t, _) = signal_plus_noise(60, 5);
        let cfg = quick_config(6, 200);
        let mut fs = run_phase_fs(&x, &t, &cfg, true).unwrap();
        let selected = fs.result.selected_features.clone().unwrap();
        if let GateBank::FeatureGates { lambda, .. } = &mut fs.gates {
            for j in 0..lambda.len() {
                if !selected.contains(&j) {
                    lambda[j] = 0.0;
                }
            }
        }
        let model = TskModel::new(
            fs.partition.clone(),
            fs.rules.clone(),
            fs.consequents.clone(),
            TNorm::AdaSoftmin,
        )
        .unwrap();
        let before: Vec<Vec<f64>> = x
            .iter()
            .map(|row| model.forward(row, &fs.gates).unwrap().outputs.system)
            .collect();
        let mut scrambled = model.clone();
        for r in 0..scrambled.consequents.rules() {
            for &j in (0..6).collect::<Vec<_>>().iter().filter(|j| !selected.contains(j)) {
                for c in 0..2 {
                    scrambled.consequents.set(r, j + 1, c, 1e6);
                }
            }
        }
        let after: Vec<Vec<f64>> = x
            .iter()
            .map(|row| scrambled.forward(row, &fs.gates).unwrap().outputs.system)
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn pipeline_respects_count_bounds_and_loss_monotonicity() {
        let (x, t, _) = signal_plus_noise(50, 4);
        let cfg = quick_config(5, 150);
        let run = run_pipeline(&x, &t, &cfg).unwrap();
        let d = 5;
        let f = run.selected_features.len();
        assert!((1..=d).contains(&f));
        let r = run.model.num_rules();
        let upper = (2 * f + 1) * cfg.sets_rule_extraction;
        assert!((2..=upper).contains(&r), "rules {r} outside [2, {upper}]");
        for phase in [&run.fs, &run.re, &run.ft] {
            assert!(phase.final_loss() <= phase.losses[0]);
            assert!(phase.losses.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn cross_validation_is_deterministic_and_aggregates_means() {
        let ds: crate::data::Dataset<f64> = synthetic_classification(40, 6, 3, 2, 11).unwrap();
        let mut cfg = quick_config(6, 60);
        cfg.seed = 5;
        let a = cross_validate(&ds, &cfg, 5, 2, NormalizationMode::MinMax).unwrap();
        let b = cross_validate(&ds, &cfg, 5, 2, NormalizationMode::MinMax).unwrap();
        assert_eq!(a.runs.len(), 10);
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.accuracy, rb.accuracy);
            assert_eq!(ra.selected_features, rb.selected_features);
            assert_eq!(ra.extracted_rules, rb.extracted_rules);
        }
        let mean: f64 = a.runs.iter().map(|r| r.accuracy).sum::<f64>() / 10.0;
        assert!((a.mean_accuracy - mean).abs() < 1e-15);
    }

    #[test]
    fn tnorm_comparison_records_underflow_as_data() {
        // At this dimension the product of memberships underflows for every
        // rule, including the ones whose centers sit mid-domain. (On [0, 1]
        // normalized data that takes roughly D > 3700; the adaptive softmin
        // is unaffected at any D.)
        let ds: crate::data::Dataset<f64> = synthetic_classification(40, 4500, 20, 2, 3).unwrap();
        let mut cfg = TrainConfig::for_dimension(4500);
        // Ungated consequent descent at this width needs a small step: the
        // design Gram norm grows with the squared feature norm, here ~2e3.
        cfg.eta = 0.001;
        cfg.iterations = PhaseIterations::uniform(200);
        let cmp = compare_tnorms(&ds, 3, -12, &cfg, 5, 1, NormalizationMode::MinMax).unwrap();
        assert!((cmp.fake_minimum_probe - 0.4977).abs() < 5e-4);
        let product = &cmp.outcomes[0];
        assert!(product.mean_accuracy.is_none());
        assert!(product.failure.as_ref().unwrap().contains("zero"));
        let ada = &cmp.outcomes[2];
        assert!(ada.failure.is_none());
        assert!(ada.mean_accuracy.unwrap() > 0.5, "ada accuracy {:?}", ada.mean_accuracy);
    }

    #[test]
    fn gate_demo_produces_three_trajectory_sets() {
        let (x, t, _) = signal_plus_noise(30, 3);
        let mut cfg = quick_config(4, 40);
        cfg.eta = 0.01;
        let runs = gate_demo(&x, &t, &cfg).unwrap();
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[0].gate, GateFunction::Proposed);
        assert_eq!(runs[1].eta, 0.01);
        assert!((runs[2].eta - 0.05).abs() < 1e-15);
        for run in &runs {
            assert_eq!(run.result.gate_trajectory.len(), 40);
            assert!(run.result.gate_trajectory.iter().all(|row| row.len() == 4));
        }
    }
}
