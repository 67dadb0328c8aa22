//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Set `MALDET_CORPUS` to the Kaggle malware CSV to run the corpus criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use maldet::bench::ModelBundle;
use maldet::data::SynthPattern;
use maldet::metrics::scalar_metrics;
use maldet::models::logreg::{self, LinearParams};
use maldet::models::neural::{bce, flat_gradients, Mode, Network};
use maldet::models::{svm, FeaturesPerSplit, ForestConfig, TreeConfig};
use maldet::{
    holdout, kappa, kfold_cv, mcc, render_json, roc_auc, run_benchmark, seed, stratified_folds,
    synth_generate, BenchmarkPlan, Classifier, ConfusionMatrix, DataSource, Dataset, Family,
    Matrix, ModelConfig, RosterEntry, SynthSpec,
};
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> std::result::Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || {
        format!("took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs())
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_matrix(rng: &mut seed::Rng, n: usize, d: usize, scale: f64) -> Matrix {
    Matrix::from_vec(
        n,
        d,
        (0..n * d)
            .map(|_| rng.random_range(-scale..scale))
            .collect(),
    )
    .unwrap()
}

fn net_gradient_error(hidden: &[usize], s: u64) -> f64 {
    let d = 5;
    let n = 6;
    let mut rng = seed::rng(seed::derive(s, "gradcheck"));
    // inputs are redrawn until no hidden unit sits within 1e-4 of the ReLU kink
    let (net, x, y) = loop {
        let net = Network::he_uniform(d, hidden, &mut rng);
        let x = random_matrix(&mut rng, n, d, 2.0);
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let mut a = x.clone();
        let mut clear = true;
        for layer in &net.layers[..net.layers.len() - 1] {
            let mut next = Matrix::zeros(a.rows(), layer.fan_out());
            for i in 0..a.rows() {
                for j in 0..layer.fan_out() {
                    let z: f64 = layer.b[j]
                        + (0..layer.fan_in())
                            .map(|k| a.get(i, k) * layer.w.get(k, j))
                            .sum::<f64>();
                    clear &= z.abs() > 1e-4;
                    next.set(i, j, z.max(0.0));
                }
            }
            a = next;
        }
        if clear {
            break (net, x, y);
        }
    };
    let (_, g, _) = net.backward(&x, &y, Mode::Infer).unwrap();
    let analytic = flat_gradients(&g);
    let mut probe = net.clone();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, theta) in net.flat_params().into_iter().enumerate() {
        probe.set_flat_param(i, theta + eps);
        let hi = bce(&probe.forward(&x, Mode::Infer).unwrap(), &y);
        probe.set_flat_param(i, theta - eps);
        let lo = bce(&probe.forward(&x, Mode::Infer).unwrap(), &y);
        probe.set_flat_param(i, theta);
        worst = worst.max(rel_err(analytic[i], (hi - lo) / (2.0 * eps)));
    }
    worst
}

fn linear_gradient_error(
    s: u64,
    objective: impl Fn(&LinearParams, &Matrix, &[u8]) -> f64,
    gradient: impl Fn(&LinearParams, &Matrix, &[u8]) -> LinearParams,
    avoid_hinge: bool,
) -> f64 {
    let (n, d) = (12, 4);
    let mut rng = seed::rng(seed::derive(s, "linear"));
    let (p, x, y) = loop {
        let x = random_matrix(&mut rng, n, d, 2.0);
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let p = LinearParams {
            weights: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: rng.random_range(-0.5..0.5),
        };
        let clear = !avoid_hinge
            || x.row_iter().zip(&y).all(|(r, &yi)| {
                let sign = if yi == 1 { 1.0 } else { -1.0 };
                (sign * p.decision(r) - 1.0).abs() > 1e-3
            });
        if clear {
            break (p, x, y);
        }
    };
    let g = gradient(&p, &x, &y);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..=d {
        let (mut hi, mut lo) = (p.clone(), p.clone());
        let an = if j < d {
            hi.weights[j] += eps;
            lo.weights[j] -= eps;
            g.weights[j]
        } else {
            hi.bias += eps;
            lo.bias -= eps;
            g.bias
        };
        let fd = (objective(&hi, &x, &y) - objective(&lo, &x, &y)) / (2.0 * eps);
        worst = worst.max(rel_err(an, fd));
    }
    worst
}

fn c1_gradients() -> Check {
    let start = Instant::now();
    let mut worst = [0.0f64; 4];
    for s in 0..20u64 {
        let l2 = 0.01;
        worst[0] = worst[0].max(linear_gradient_error(
            s,
            |p, x, y| logreg::loss(p, x, y, l2),
            |p, x, y| logreg::loss_and_gradient(p, x, y, l2).1,
            false,
        ));
        let lambda = 0.05;
        worst[1] = worst[1].max(linear_gradient_error(
            s,
            |p, x, y| svm::objective(p, x, y, lambda),
            |p, x, y| svm::subgradient(p, x, y, lambda),
            true,
        ));
        worst[2] = worst[2].max(net_gradient_error(&[8, 4], s));
        worst[3] = worst[3].max(net_gradient_error(&[128, 64], s));
    }
    let names = ["logreg", "svm", "mlp[8,4]", "dnn[128,64]"];
    for (name, w) in names.iter().zip(worst) {
        ensure(w < 1e-4, || format!("{name}: max relative error {w:e}"))?;
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "max rel err logreg {:.1e}, svm {:.1e}, mlp {:.1e}, dnn {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

/// Straight-line formulas on f64 counts.
fn oracle_metrics(tp: f64, fp: f64, fn_: f64, tn: f64) -> [f64; 5] {
    let n = tp + fp + fn_ + tn;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = if den > 0.0 {
        (tp * tn - fp * fn_) / den
    } else {
        0.0
    };
    let po = (tp + tn) / n;
    let pe = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
    let kappa = if pe < 1.0 {
        (po - pe) / (1.0 - pe)
    } else {
        0.0
    };
    [precision, recall, f1, mcc, kappa]
}

fn random_scored(rng: &mut seed::Rng) -> (Vec<u8>, Vec<f64>) {
    let n = rng.random_range(2..60);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let levels = rng.random_range(1..25);
    let scores = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
    (labels, scores)
}

fn random_cm(rng: &mut seed::Rng) -> ConfusionMatrix {
    let mut c = [0u64; 4];
    for v in &mut c {
        *v = match rng.random_range(0..4) {
            0 => 0,
            1 => rng.random_range(0..5),
            2 => rng.random_range(0..1000),
            _ => rng.random_range(0..1_000_000),
        };
    }
    if c.iter().sum::<u64>() == 0 {
        c[0] = 1;
    }
    ConfusionMatrix::new(c[0], c[1], c[2], c[3])
}

fn c2_metric_oracles() -> Check {
    let auc = roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8])
        .map_err(|e| e.to_string())?
        .auc;
    ensure((auc - 0.75).abs() < 1e-12, || format!("fixed AUC {auc}"))?;
    let cm = ConfusionMatrix::new(2, 1, 1, 2);
    let (m, k) = (mcc(&cm).value, kappa(&cm).value);
    ensure(
        (m - 1.0 / 3.0).abs() < 1e-12 && (k - 1.0 / 3.0).abs() < 1e-12,
        || format!("fixed MCC {m}, kappa {k}"),
    )?;

    let mut rng = seed::rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let (labels, scores) = random_scored(&mut rng);
        let fast = roc_auc(&labels, &scores).map_err(|e| e.to_string())?.auc;
        let slow = pairwise_auc(&labels, &scores);
        ensure((fast - slow).abs() <= 1e-12, || {
            format!("case {case}: auc {fast} vs {slow}")
        })?;

        let cm = random_cm(&mut rng);
        let s = scalar_metrics(&cm);
        let ours = [
            s.precision,
            s.recall,
            s.f1,
            mcc(&cm).value,
            kappa(&cm).value,
        ];
        let oracle = oracle_metrics(cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
        for (a, b) in ours.iter().zip(oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max scalar deviation {worst:e}"))?;
    Ok(format!(
        "1000 fuzzed cases, max scalar deviation {worst:.1e}"
    ))
}

fn c3_invariants() -> Check {
    let mut rng = seed::rng(3);
    let mut violations = Vec::new();
    for case in 0..10_000 {
        let cm = random_cm(&mut rng);
        let s = scalar_metrics(&cm);
        let m = mcc(&cm).value;
        let k = kappa(&cm).value;
        let sw = cm.swap_classes();
        let in01 = |v: f64| (0.0..=1.0).contains(&v);
        let checks = [
            ("kappa <= accuracy", k <= s.accuracy + 1e-12),
            ("mcc range", (-1.0..=1.0).contains(&m)),
            ("kappa range", (-1.0..=1.0).contains(&k)),
            (
                "unit ranges",
                in01(s.accuracy) && in01(s.precision) && in01(s.recall) && in01(s.f1),
            ),
            ("mcc swap", (mcc(&sw).value - m).abs() <= 1e-12),
            ("kappa swap", (kappa(&sw).value - k).abs() <= 1e-12),
        ];
        for (name, ok) in checks {
            if !ok {
                violations.push(format!("case {case}: {name}"));
            }
        }

        let (labels, scores) = random_scored(&mut rng);
        let base = roc_auc(&labels, &scores).map_err(|e| e.to_string())?.auc;
        let cubic: Vec<f64> = scores.iter().map(|s| s * s * s + s - 40.0).collect();
        let expo: Vec<f64> = scores.iter().map(|s| (s / 10.0).exp()).collect();
        for t in [cubic, expo] {
            let a = roc_auc(&labels, &t).map_err(|e| e.to_string())?.auc;
            if (a - base).abs() > 1e-12 {
                violations.push(format!("case {case}: auc transform"));
            }
        }
        if !(0.0..=1.0).contains(&base) {
            violations.push(format!("case {case}: auc range"));
        }
    }
    ensure(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    Ok("10000 cases, zero violations".into())
}

fn six_models() -> Vec<RosterEntry> {
    [
        Family::Logreg,
        Family::Knn,
        Family::Forest,
        Family::Svm,
        Family::Mlp,
        Family::Dnn,
    ]
    .into_iter()
    .map(RosterEntry::default_for)
    .collect()
}

fn c4_determinism() -> Check {
    let start = Instant::now();
    let mut plan = BenchmarkPlan::new(
        DataSource::Synth(SynthSpec {
            n_rows: 1500,
            n_features: 12,
            n_informative: 4,
            class_separation: 2.0,
            label_flip_rate: 0.02,
            seed: 44,
            pattern: SynthPattern::Clusters,
        }),
        six_models(),
    );
    plan.rfe_k = Some(8);
    plan.cv_folds = 5;
    plan.master_seed = 2024;
    plan.record_timings = false;
    let a = render_json(&run_benchmark(&plan).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let b = render_json(&run_benchmark(&plan).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(a == b, || "reports differ".into())?;

    plan.record_timings = true;
    let zeroed = |mut r: maldet::BenchmarkReport| {
        for m in &mut r.models {
            m.train_time_seconds = 0.0;
            m.test.train_time_seconds = 0.0;
            m.cv.mean.train_time_seconds = 0.0;
            m.cv.std.train_time_seconds = 0.0;
            m.cv.folds
                .iter_mut()
                .for_each(|f| f.train_time_seconds = 0.0);
        }
        r.plan.record_timings = false;
        r.notes.retain(|n| !n.starts_with("timings"));
        r
    };
    let timed = run_benchmark(&plan).map_err(|e| e.to_string())?;
    ensure(
        timed.models.iter().all(|m| m.train_time_seconds > 0.0),
        || "non-positive timing".into(),
    )?;
    let mut untimed: maldet::BenchmarkReport =
        serde_json::from_str(&a).map_err(|e| e.to_string())?;
    untimed.notes.retain(|n| !n.starts_with("timings"));
    ensure(zeroed(timed) == untimed, || {
        "timed run differs beyond timings".into()
    })?;
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "{} identical bytes; timed run equal up to timings",
        a.len()
    ))
}

fn c5_nonlinear_ordering() -> Check {
    let start = Instant::now();
    let mut holds = 0;
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let data = synth_generate(&SynthSpec {
            n_rows: 10_000,
            n_features: 10,
            n_informative: 2,
            class_separation: 6.0,
            label_flip_rate: 0.0,
            seed: 500 + s,
            pattern: SynthPattern::Parity,
        })
        .map_err(|e| e.to_string())?;
        let parts =
            maldet::split(&data, 0.8, seed::derive(s, "split"), true).map_err(|e| e.to_string())?;
        let acc = |f: Family| -> std::result::Result<f64, String> {
            let h = holdout(
                &parts.train,
                &parts.test,
                f.as_str(),
                &f.default_config(),
                seed::derive(s, f.as_str()),
            )
            .map_err(|e| e.to_string())?;
            Ok(h.report.accuracy)
        };
        let lr = acc(Family::Logreg)?;
        let others = [acc(Family::Dnn)?, acc(Family::Mlp)?, acc(Family::Forest)?];
        let ok = others.iter().all(|&a| a > 0.95 && a >= lr + 0.05) && (lr - 0.5).abs() < 0.05;
        holds += usize::from(ok);
        lines.push(format!(
            "seed {s}: lr {lr:.3} dnn {:.3} mlp {:.3} rf {:.3}",
            others[0], others[1], others[2]
        ));
    }
    ensure(holds >= 4, || {
        format!("ordering held on {holds}/5: {}", lines.join("; "))
    })?;
    within(start, Duration::from_secs(300))?;
    Ok(format!("ordering held on {holds}/5 seeds ({})", lines[0]))
}

fn separable(seed: u64) -> SynthSpec {
    SynthSpec {
        n_rows: 10_000,
        n_features: 10,
        n_informative: 5,
        class_separation: 8.0,
        label_flip_rate: 0.0,
        seed,
        pattern: SynthPattern::Clusters,
    }
}

fn c6_separable() -> Check {
    let start = Instant::now();
    let mut plan = BenchmarkPlan::new(DataSource::Synth(separable(6)), six_models());
    plan.cv_folds = 2;
    plan.master_seed = 6;
    let report = run_benchmark(&plan).map_err(|e| e.to_string())?;
    let mut worst = (1.0f64, 1.0f64);
    for m in &report.models {
        ensure(m.test.accuracy >= 0.99 && m.test.auc >= 0.995, || {
            format!(
                "{}: accuracy {:.4}, auc {:.4}",
                m.model_id, m.test.accuracy, m.test.auc
            )
        })?;
        worst = (worst.0.min(m.test.accuracy), worst.1.min(m.test.auc));
    }
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "6 models, min accuracy {:.4}, min auc {:.4}",
        worst.0, worst.1
    ))
}

fn c7_corpus() -> Outcome {
    let Ok(path) = std::env::var("MALDET_CORPUS") else {
        return Outcome::Skip("MALDET_CORPUS not set".into());
    };
    let mut plan = BenchmarkPlan::new(
        DataSource::Csv {
            path: path.into(),
            label_column: "classification".into(),
            positive_label: "malware".into(),
        },
        six_models(),
    );
    plan.rfe_k = Some(25);
    let report = match run_benchmark(&plan) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let get = |id: &str| report.models.iter().find(|m| m.model_id == id).unwrap();
    let (rf, mlp, dnn) = (get("forest"), get("mlp"), get("dnn"));
    let msg = format!(
        "rf test {:.4}, mlp test {:.4}, dnn cv {:.4}",
        rf.test.accuracy, mlp.test.accuracy, dnn.cv.mean.accuracy
    );
    if rf.test.accuracy >= 0.99 && mlp.test.accuracy >= 0.99 && dnn.cv.mean.accuracy >= 0.99 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn c8_folds() -> Check {
    let mut rng = seed::rng(8);
    for case in 0..500 {
        let k = rng.random_range(2..12);
        let n = rng.random_range(2 * k..400);
        let n_pos = rng.random_range(k..=n - k);
        let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
        labels.rotate_left(rng.random_range(0..n));
        let folds = stratified_folds(&labels, k, rng.random()).map_err(|e| e.to_string())?;
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        ensure(all == (0..n).collect::<Vec<_>>(), || {
            format!("case {case}: not a partition")
        })?;
        for class in 0..2u8 {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
            ensure(spread <= 1, || {
                format!("case {case}: class {class} spread {spread}")
            })?;
        }
    }

    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let n = rng.random_range(100..600);
        let prevalence = rng.random_range(0.1..0.45);
        let labels: Vec<u8> = (0..n)
            .map(|i| u8::from((i as f64) < prevalence * n as f64))
            .collect();
        let x = random_matrix(&mut rng, n, 3, 1.0);
        let data = Dataset::from_matrix(x, labels).map_err(|e| e.to_string())?;
        let k = 10;
        let cv = kfold_cv(
            &data,
            "majority",
            &Family::Majority.default_config(),
            k,
            case,
        )
        .map_err(|e| e.to_string())?;
        let negatives = (n - data.positives()) as f64 / n as f64;
        let tolerance = k as f64 / n as f64;
        let gap = (cv.mean.accuracy - negatives).abs();
        worst = worst.max(gap);
        ensure(gap <= tolerance, || {
            format!(
                "case {case}: cv {} vs prevalence {negatives}",
                cv.mean.accuracy
            )
        })?;
    }
    Ok(format!(
        "500 fuzzed partitions; constant predictor max gap {worst:.4}"
    ))
}

fn c9_forest_equals_tree() -> Check {
    let mut rng = seed::rng(9);
    for case in 0..100 {
        let n = rng.random_range(10..200);
        let d = rng.random_range(1..6);
        let levels = rng.random_range(2..8);
        let x = Matrix::from_vec(
            n,
            d,
            (0..n * d)
                .map(|_| rng.random_range(0..levels) as f64)
                .collect(),
        )
        .unwrap();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let data = Dataset::from_matrix(x, labels).map_err(|e| e.to_string())?;
        let max_depth = if rng.random() {
            Some(rng.random_range(1..6))
        } else {
            None
        };
        let tree_cfg = TreeConfig {
            max_depth,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::All,
        };
        let forest_cfg = ForestConfig {
            n_trees: 1,
            max_depth,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::All,
            bootstrap: false,
            seed: rng.random(),
        };
        let tree = ModelConfig::Tree(tree_cfg)
            .fit(&data, 1)
            .map_err(|e| e.to_string())?
            .model;
        let forest = ModelConfig::Forest(forest_cfg)
            .fit(&data, 2)
            .map_err(|e| e.to_string())?
            .model;
        let probe = random_matrix(&mut rng, 50, d, levels as f64);
        for m in [data.rows(), &probe] {
            let a = tree.predict_scores(m).map_err(|e| e.to_string())?;
            let b = forest.predict_scores(m).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("case {case}: predictions differ"))?;
        }
    }
    Ok("100 fuzzed datasets, identical predictions".into())
}

fn c10_dnn_trace() -> Check {
    let start = Instant::now();
    let data = synth_generate(&separable(10)).map_err(|e| e.to_string())?;
    let parts = maldet::split(&data, 0.8, 10, true).map_err(|e| e.to_string())?;
    let bundle = ModelBundle::fit("dnn", &parts.train, &Family::Dnn.default_config(), 10)
        .map_err(|e| e.to_string())?;
    let trace = bundle.trace.ok_or("no trace")?;
    ensure(trace.len() == 10, || {
        format!("{} trace entries", trace.len())
    })?;
    for e in &trace.epochs {
        let finite = e.train_loss.is_finite() && e.val_loss.is_some_and(f64::is_finite);
        ensure(finite, || {
            format!("epoch {} has a non-finite loss", e.epoch)
        })?;
    }
    let last = trace.epochs.last().unwrap();
    ensure(last.train_acc >= 0.99, || {
        format!("final training accuracy {}", last.train_acc)
    })?;
    within(start, Duration::from_secs(180))?;
    Ok(format!(
        "10 epochs, final train accuracy {:.4}, val accuracy {:.4}",
        last.train_acc,
        last.val_acc.unwrap_or(f64::NAN)
    ))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Outcome::Fail(format!("panic: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, msg, ok) = match outcome {
        Outcome::Pass(m) => ("PASS", m, true),
        Outcome::Fail(m) => ("FAIL", m, false),
        Outcome::Skip(m) => ("SKIP", m, true),
    };
    println!("{tag} {name} ({secs:.1}s): {msg}");
    ok
}

fn check(f: fn() -> Check) -> impl FnOnce() -> Outcome {
    move || match f() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

type Criterion = Box<dyn FnOnce() -> Outcome>;

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("C1 gradient correctness", Box::new(check(c1_gradients))),
        (
            "C2 metric oracle equivalence",
            Box::new(check(c2_metric_oracles)),
        ),
        (
            "C3 range and convention invariants",
            Box::new(check(c3_invariants)),
        ),
        ("C4 pipeline determinism", Box::new(check(c4_determinism))),
        (
            "C5 nonlinear model ordering",
            Box::new(check(c5_nonlinear_ordering)),
        ),
        ("C6 separable-data sanity", Box::new(check(c6_separable))),
        ("C7 corpus reproduction", Box::new(c7_corpus)),
        ("C8 CV partition contract", Box::new(check(c8_folds))),
        (
            "C9 forest/tree equivalence",
            Box::new(check(c9_forest_equals_tree)),
        ),
        ("C10 DNN training trace", Box::new(check(c10_dnn_trace))),
    ];
    let mut all_ok = true;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        all_ok &= run(name, f);
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
