// Temporary tuning probe; deleted before shipping.
use adatsk::data::{load_csv, NormalizationMode};
use adatsk::model::TNorm;
use adatsk::pipeline::{compare_tnorms, cross_validate, cross_validate_plain};
use adatsk::training::{PhaseIterations, TrainConfig};
use std::time::Instant;

fn main() {
    let iris = load_csv::<f64>("data/iris.csv", "class").unwrap();
    let wine = load_csv::<f64>("data/wine.csv", "class").unwrap();
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("plain");

    match which {
        "plain" => {
            for (name, ds) in [("iris", &iris), ("wine", &wine)] {
                for iters in [200usize, 500, 1000] {
                    for eta in [0.01, 0.05] {
                        let mut cfg = TrainConfig::<f64>::for_dimension(ds.num_features());
                        cfg.eta = eta;
                        cfg.iterations = PhaseIterations::uniform(iters);
                        cfg.seed = 7;
                        let t = Instant::now();
                        let rep = cross_validate_plain(
                            ds,
                            3,
                            TNorm::AdaSoftmin,
                            &cfg,
                            10,
                            3,
                            NormalizationMode::MinMax,
                        )
                        .unwrap();
                        println!(
                            "plain {name} iters={iters} eta={eta}: acc={:.4} ({:?})",
                            rep.mean_accuracy,
                            t.elapsed()
                        );
                    }
                }
            }
        }
        "tnorms" => {
            let mut cfg = TrainConfig::<f64>::for_dimension(4);
            cfg.seed = 7;
            let cmp = compare_tnorms(&iris, 3, -12, &cfg, 10, 1, NormalizationMode::MinMax).unwrap();
            for o in &cmp.outcomes {
                println!("iris {:?}: acc={:?} failure={:?}", o.tnorm, o.mean_accuracy, o.failure);
            }
        }
        "fsre" => {
            for iters in [500usize, 1000] {
                for eta in [0.01, 0.05] {
                    let mut cfg = TrainConfig::<f64>::for_dimension(wine.num_features());
                    cfg.eta = eta;
                    cfg.iterations = PhaseIterations::uniform(iters);
                    cfg.seed = 7;
                    let t = Instant::now();
                    let rep =
                        cross_validate(&wine, &cfg, 10, 3, NormalizationMode::MinMax).unwrap();
                    println!(
                        "fsre wine iters={iters} eta={eta}: acc={:.4} #F={:.2} #R={:.2} ({:?})",
                        rep.mean_accuracy,
                        rep.mean_selected_features,
                        rep.mean_extracted_rules,
                        t.elapsed()
                    );
                }
            }
        }
        "fd" => fd_check(),
        "sweep2" => sweep2_probe(),
        "sweep" => sweep_probe(),
        "gates" => gates_probe(),
        _ => panic!("unknown probe"),
    }
}


#[allow(dead_code)]
fn gates_probe() {
    use adatsk::data::{load_csv, one_hot, NormalizationMode, NormalizationStats};
    use adatsk::pipeline::run_phase_fs;
    let wine = load_csv::<f64>("data/wine.csv", "class").unwrap();
    let stats = NormalizationStats::fit(&wine.features, NormalizationMode::MinMax).unwrap();
    let x = stats.apply(&wine.features);
    let t = one_hot::<f64>(&wine.labels, 3).unwrap();
    for (eta, iters) in [(0.01, 1000usize), (0.05, 1000), (0.01, 3000), (0.05, 3000)] {
        let mut cfg = TrainConfig::<f64>::for_dimension(13);
        cfg.eta = eta;
        cfg.iterations = PhaseIterations::uniform(iters);
        let fs = run_phase_fs(&x, &t, &cfg, true).unwrap();
        let mut g: Vec<f64> = fs.result.gate_values.iter().map(|v| v.abs()).collect();
        let tau = adatsk::pipeline::threshold_lambda(&fs.result.gate_values, cfg.zeta_lambda);
        g.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sel = fs.result.selected_features.as_ref().unwrap().len();
        println!("eta={eta} iters={iters}: tau={tau:.4} selected={sel} loss={:.5}", fs.result.final_loss());
        println!("  sorted |M|: {:?}", g.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }
}


#[allow(dead_code)]
fn sweep_probe() {
    let wine = load_csv::<f64>("data/wine.csv", "class").unwrap();
    let cases: [(f64, usize, usize, usize); 5] = [
        (0.05, 2000, 2000, 1000),
        (0.1, 1000, 1000, 1000),
        (0.1, 2000, 1000, 1000),
        (0.2, 1000, 1000, 1000),
        (0.3, 1000, 1000, 1000),
    ];
    for (eta, fs, re, ft) in cases {
        let mut cfg = TrainConfig::<f64>::for_dimension(13);
        cfg.eta = eta;
        cfg.iterations = PhaseIterations { feature_selection: fs, rule_extraction: re, fine_tune: ft };
        cfg.seed = 7;
        let t = Instant::now();
        match cross_validate(&wine, &cfg, 10, 1, NormalizationMode::MinMax) {
            Ok(rep) => println!(
                "eta={eta} iters=({fs},{re},{ft}): acc={:.4} #F={:.2} #R={:.2} ({:?})",
                rep.mean_accuracy, rep.mean_selected_features, rep.mean_extracted_rules, t.elapsed()
            ),
            Err(e) => println!("eta={eta} iters=({fs},{re},{ft}): FAILED {e}"),
        }
    }
}


#[allow(dead_code)]
fn sweep2_probe() {
    use adatsk::training::FineTuneMode;
    let wine = load_csv::<f64>("data/wine.csv", "class").unwrap();
    let iris = load_csv::<f64>("data/iris.csv", "class").unwrap();
    // refinement around eta=0.05 (2000,2000,1000)
    let cases: [(f64, usize, usize, usize, FineTuneMode); 4] = [
        (0.05, 2000, 2000, 1000, FineTuneMode::LeastSquares),
        (0.05, 2500, 2000, 1500, FineTuneMode::GradientDescent),
        (0.07, 1500, 1500, 1000, FineTuneMode::GradientDescent),
        (0.05, 1500, 1500, 1000, FineTuneMode::GradientDescent),
    ];
    for (eta, fs, re, ft, mode) in cases {
        let mut cfg = TrainConfig::<f64>::for_dimension(13);
        cfg.eta = eta;
        cfg.iterations = PhaseIterations { feature_selection: fs, rule_extraction: re, fine_tune: ft };
        cfg.fine_tune_mode = mode;
        cfg.seed = 7;
        let t = Instant::now();
        match cross_validate(&wine, &cfg, 10, 1, NormalizationMode::MinMax) {
            Ok(rep) => println!(
                "eta={eta} iters=({fs},{re},{ft}) {mode:?}: acc={:.4} #F={:.2} #R={:.2} ({:?})",
                rep.mean_accuracy, rep.mean_selected_features, rep.mean_extracted_rules, t.elapsed()
            ),
            Err(e) => println!("eta={eta} iters=({fs},{re},{ft}): FAILED {e}"),
        }
    }
    // compare-tnorms setting check on iris and wine at eta=0.05/1000
    for (name, ds) in [("iris", &iris), ("wine", &wine)] {
        let mut cfg = TrainConfig::<f64>::for_dimension(ds.num_features());
        cfg.eta = 0.05;
        cfg.iterations = PhaseIterations::uniform(1000);
        cfg.seed = 7;
        let t = Instant::now();
        let cmp = compare_tnorms(ds, 3, -12, &cfg, 10, 1, NormalizationMode::MinMax).unwrap();
        for o in &cmp.outcomes {
            println!("{name} {:?}: acc={:?} failure={:?}", o.tnorm, o.mean_accuracy, o.failure);
        }
        println!("  ({:?})", t.elapsed());
    }
}

#[allow(dead_code)]
fn fd_check() {
    use adatsk::gate::GateFunction;
    use adatsk::model::*;
    use adatsk::rulebase::*;
    use adatsk::training::*;

    let n = 4;
    let d = 3;
    let s = 2;
    let c = 2;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|j| (((i * 13 + j * 7) % 10) as f64) / 9.0).collect())
        .collect();
    let targets: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 2) as f64, 1.0 - (i % 2) as f64]).collect();
    let partition = place_centers(&x, s).unwrap();
    let rules = build_coco(s, d).unwrap();
    let mut cons = init_consequents::<f64>(s, d, c);
    for (i, v) in cons.values_mut().iter_mut().enumerate() {
        *v = ((i * 17 % 13) as f64 - 6.0) / 5.0;
    }
    let lambda: Vec<f64> = (0..d).map(|j| 0.3 + 0.1 * j as f64).collect();
    let gates = GateBank::FeatureGates { kind: GateFunction::Proposed, lambda };

    let loss = |partition: &FuzzyPartition<f64>, cons: &ConsequentBank<f64>, gates: &GateBank<f64>| -> f64 {
        let ante = antecedent_batch(&x, partition, &rules, TNorm::AdaSoftmin).unwrap();
        let mult = gates.multipliers();
        let out = consequent_batch(&x, cons, gates.mode(), &mult, &ante).unwrap();
        batch_mse(&out, &targets).unwrap()
    };

    let ante = antecedent_batch(&x, &partition, &rules, TNorm::AdaSoftmin).unwrap();
    let mult = gates.multipliers();
    let out = consequent_batch(&x, &cons, gates.mode(), &mult, &ante).unwrap();

    let h = 1e-6;
    // consequents
    let g = grad_consequents(&x, &targets, &ante, &out, &cons, &gates).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..cons.values().len() {
        let mut cp = cons.clone();
        cp.values_mut()[i] += h;
        let mut cm = cons.clone();
        cm.values_mut()[i] -= h;
        let fd = (loss(&partition, &cp, &gates) - loss(&partition, &cm, &gates)) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / fd.abs().max(g[i].abs()).max(1e-8));
    }
    println!("consequents worst rel err: {worst:.2e}");
    // lambda
    let g = grad_lambda(&x, &targets, &ante, &out, &cons, &gates).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let perturb = |delta: f64| {
            let GateBank::FeatureGates { kind, lambda } = &gates else { unreachable!() };
            let mut l2 = lambda.clone();
            l2[j] += delta;
            loss(&partition, &cons, &GateBank::FeatureGates { kind: *kind, lambda: l2 })
        };
        let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
        worst = worst.max((g[j] - fd).abs() / fd.abs().max(g[j].abs()).max(1e-8));
    }
    println!("lambda worst rel err: {worst:.2e}");
    // theta (rule-gated)
    let theta: Vec<f64> = (0..s).map(|r| 0.2 + 0.3 * r as f64).collect();
    let rgates = GateBank::RuleGates { kind: GateFunction::Proposed, theta };
    let rmult = rgates.multipliers();
    let rout = consequent_batch(&x, &cons, rgates.mode(), &rmult, &ante).unwrap();
    let g = grad_theta(&x, &targets, &ante, &rout, &cons, &rgates).unwrap();
    let mut worst: f64 = 0.0;
    for r in 0..s {
        let perturb = |delta: f64| {
            let GateBank::RuleGates { kind, theta } = &rgates else { unreachable!() };
            let mut t2 = theta.clone();
            t2[r] += delta;
            loss(&partition, &cons, &GateBank::RuleGates { kind: *kind, theta: t2 })
        };
        let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
        worst = worst.max((g[r] - fd).abs() / fd.abs().max(g[r].abs()).max(1e-8));
    }
    println!("theta worst rel err: {worst:.2e}");
    // centers (ada, pinned exponents via the same trace since perturbation is tiny)
    let g = grad_centers_softmin(&x, &targets, &ante, &rout, &partition, &rules).unwrap();
    let mut worst: f64 = 0.0;
    for slot in 0..partition.centers().len() {
        let perturb = |delta: f64| {
            let mut p2 = partition.clone();
            p2.centers_mut()[slot] += delta;
            loss(&p2, &cons, &rgates)
        };
        let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
        let err = (g[slot] - fd).abs() / fd.abs().max(g[slot].abs()).max(1e-6);
        println!("  slot {slot}: analytic={:+.6e} fd={:+.6e} rel={err:.2e}", g[slot], fd);
        worst = worst.max(err);
    }
    println!("centers(ada) worst rel err: {worst:.2e}  (fd may cross qhat switches)");
}
