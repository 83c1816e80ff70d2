//! End-to-end acceptance checks, one line of output per criterion.
//!
//! `PILLAR_ACCEPTANCE_TRIALS` lowers the trial count of the synthetic
//! directional check; `PILLAR_REAL_DATA` points at a field-data CSV for the
//! threshold check, which is skipped otherwise.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;

use pillar::data::{
    class_counts, compute_thresholds, expand_label, label_records, safety_factor, smote, Label,
    Outcome, PillarRecord, RawRecord, ThresholdOptions, Thresholds, DEFAULT_K,
};
use pillar::ensemble::majority_vote;
use pillar::experiment::{
    generate_synthetic, run_experiment, run_matrix, ExperimentConfig, ModelKey, SyntheticSpec,
};
use pillar::nn::{
    activate, activate_derivative, fit, Activation, LabeledView, Mlp, MlpConfig, Monitor,
    StopReason, TrainConfig,
};
use pillar::{par, seed};

type Verdict = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_vote() -> Verdict {
    for (triple, want) in [
        ([1, 1, 1], 1),
        ([2, 2, 1], 2),
        ([1, 0, 2], 0),
        ([0, 3, 1], 0),
    ] {
        let got = majority_vote(triple);
        ensure(got == want, || format!("{triple:?} -> {got}, want {want}"))?;
    }
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let t = [a, b, c];
                let want = if a == b || a == c {
                    a
                } else if b == c {
                    b
                } else {
                    a.min(b).min(c)
                };
                ensure(majority_vote(t) == want, || format!("{t:?} mis-voted"))?;
            }
        }
    }
    Ok("4 printed rows and all 64 triples".into())
}

fn raw(depth: f64, height: f64, bord: f64, width: f64) -> RawRecord {
    RawRecord {
        depth_m: depth,
        mining_height_m: height,
        bord_width_m: bord,
        pillar_width_m: width,
        outcome: Outcome::Intact,
    }
}

fn c2_safety_factor() -> Verdict {
    let a = safety_factor(&raw(100.0, 3.0, 6.0, 6.0)).map_err(|e| e.to_string())?;
    ensure((a - 0.76452).abs() <= 1e-4, || {
        format!("worked example SF = {a}")
    })?;
    let b = safety_factor(&raw(40.0, 1.0, 0.0, 1.0)).map_err(|e| e.to_string())?;
    ensure((b - 5.47).abs() <= 1e-9, || {
        format!("unit geometry SF = {b}")
    })?;
    Ok(format!("SF = {a:.5} and {b}"))
}

fn c3_labels() -> Verdict {
    let t = Thresholds::PUBLISHED;
    for (outcome, sf, want) in [
        (Outcome::Failed, 2.48, Label::F0),
        (Outcome::Failed, 2.4801, Label::F1),
        (Outcome::Intact, 1.42, Label::I0),
        (Outcome::Intact, 1.4199, Label::I1),
    ] {
        let got = expand_label(outcome, sf, &t);
        ensure(got == want, || {
            format!("({outcome:?}, {sf}) -> {got:?}, want {want:?}")
        })?;
    }
    Ok("boundaries F0/F1/I0/I1 exact".into())
}

#[allow(clippy::excessive_precision)]
fn c4_activations() -> Verdict {
    // x, ELU, ELU', GELU, GELU' (high-precision references)
    const REF: [(f64, f64, f64, f64, f64); 5] = [
        (
            -3.0,
            -0.950_212_931_632_136_06,
            0.049_787_068_367_863_943,
            -0.004_049_694_094_890_283_6,
            -0.011_945_647_204_183_927,
        ),
        (
            -1.0,
            -0.632_120_558_828_557_68,
            0.367_879_441_171_442_32,
            -0.158_655_253_931_457_05,
            -0.083_315_470_587_686_298,
        ),
        (0.0, 0.0, 1.0, 0.0, 0.5),
        (
            1.0,
            1.0,
            1.0,
            0.841_344_746_068_542_95,
            1.083_315_470_587_686_3,
        ),
        (
            3.0,
            3.0,
            1.0,
            2.995_950_305_905_109_7,
            1.011_945_647_204_183_9,
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, x: f64, got: f64, want: f64, tol: f64| -> Result<(), String> {
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure(err <= tol, || format!("{name}({x}) = {got}, want {want}"))
    };
    for (x, elu, d_elu, gelu, d_gelu) in REF {
        let relu = x.max(0.0);
        let d_relu = if x > 0.0 { 1.0 } else { 0.0 };
        check("relu", x, activate(Activation::Relu, 1.0, x), relu, 1e-5)?;
        check(
            "relu'",
            x,
            activate_derivative(Activation::Relu, 1.0, x),
            d_relu,
            1e-5,
        )?;
        check("elu", x, activate(Activation::Elu, 1.0, x), elu, 1e-5)?;
        check(
            "elu'",
            x,
            activate_derivative(Activation::Elu, 1.0, x),
            d_elu,
            1e-5,
        )?;
        check("gelu", x, activate(Activation::Gelu, 1.0, x), gelu, 1e-5)?;
        check(
            "gelu'",
            x,
            activate_derivative(Activation::Gelu, 1.0, x),
            d_gelu,
            1e-5,
        )?;
    }
    let mut worst_fd: f64 = 0.0;
    for x in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let h = 1e-5;
        let fd = (activate(Activation::Gelu, 1.0, x + h) - activate(Activation::Gelu, 1.0, x - h))
            / (2.0 * h);
        let err = (fd - activate_derivative(Activation::Gelu, 1.0, x)).abs();
        worst_fd = worst_fd.max(err);
        ensure(err <= 1e-6, || {
            format!("gelu' finite difference at {x} off by {err:e}")
        })?;
    }
    Ok(format!(
        "max ref error {worst:.1e}, GELU' vs finite difference {worst_fd:.1e}"
    ))
}

fn c5_gradient_check() -> Verdict {
    let mut rng = seed::rng(2024);
    let x = Array2::from_shape_fn((6, 5), |_| rng.gen_range(-2.0..2.0));
    let y: Vec<usize> = (0..6).map(|i| i % 4).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for act in Activation::ALL {
        let mut net = Mlp::init(&MlpConfig {
            input_dim: 5,
            hidden_dims: vec![8],
            output_dim: 4,
            activation: act,
            elu_alpha: 1.0,
            init_seed: 77,
        })
        .map_err(|e| e.to_string())?;
        // non-zero biases so every bias gradient path is exercised
        for layer in &mut net.layers {
            layer.bias.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        }
        let grads = net.backward(x.view(), &y).map_err(|e| e.to_string())?;
        for l in 0..net.layers.len() {
            let params = net.layers[l].weights.len() + net.layers[l].bias.len();
            for p in 0..params {
                let analytic = {
                    let g = &grads.layers[l];
                    if p < g.weights.len() {
                        g.weights.as_slice().unwrap()[p]
                    } else {
                        g.bias[p - g.weights.len()]
                    }
                };
                let probe = |delta: f64| -> Result<f64, String> {
                    let mut n = net.clone();
                    let layer = &mut n.layers[l];
                    let nw = layer.weights.len();
                    if p < nw {
                        layer.weights.as_slice_mut().unwrap()[p] += delta;
                    } else {
                        layer.bias[p - nw] += delta;
                    }
                    n.loss(x.view(), &y).map_err(|e| e.to_string())
                };
                let numeric = (probe(h)? - probe(-h)?) / (2.0 * h);
                let denom = analytic.abs().max(numeric.abs());
                let rel = if denom < 1e-8 {
                    0.0
                } else {
                    (analytic - numeric).abs() / denom
                };
                worst = worst.max(rel);
                checked += 1;
                ensure(rel < 1e-4, || {
                    format!("{act} layer {l} param {p}: analytic {analytic:e} numeric {numeric:e} rel {rel:e}")
                })?;
            }
        }
    }
    Ok(format!(
        "{checked} parameters, max relative error {worst:.1e}"
    ))
}

fn c6_smote() -> Verdict {
    let raws = generate_synthetic(&SyntheticSpec::default()).map_err(|e| e.to_string())?;
    let labeled = label_records(&raws, &Thresholds::PUBLISHED).map_err(|e| e.to_string())?;
    let before = class_counts(&labeled);
    ensure(before == [70, 16, 312, 25], || {
        format!("pre-SMOTE counts {before:?}")
    })?;
    let pool = smote(&labeled, DEFAULT_K, 7).map_err(|e| e.to_string())?;
    let after = class_counts(&pool);
    ensure(after == [312; 4], || format!("post-SMOTE counts {after:?}"))?;

    let originals: Vec<&PillarRecord> = pool.iter().filter(|r| !r.synthetic).collect();
    let synthetic: Vec<&PillarRecord> = pool.iter().filter(|r| r.synthetic).collect();
    for s in &synthetic {
        let same: Vec<&&PillarRecord> = originals.iter().filter(|o| o.label == s.label).collect();
        let on_segment = same.iter().any(|a| {
            same.iter()
                .any(|b| on_segment(&a.features, &b.features, &s.features))
        });
        ensure(on_segment, || {
            format!(
                "synthetic record {} is not between two {:?} originals",
                s.id, s.label
            )
        })?;
    }
    Ok(format!(
        "{before:?} -> {after:?}, {} synthetic points convex",
        synthetic.len()
    ))
}

fn on_segment(a: &[f64; 5], b: &[f64; 5], s: &[f64; 5]) -> bool {
    let (k, span) = (0..5)
        .map(|i| (i, b[i] - a[i]))
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .unwrap();
    if span.abs() < 1e-12 {
        return (0..5).all(|i| (s[i] - a[i]).abs() <= 1e-9);
    }
    let u = (s[k] - a[k]) / span;
    (-1e-9..=1.0 + 1e-9).contains(&u)
        && (0..5).all(|i| (a[i] + u * (b[i] - a[i]) - s[i]).abs() <= 1e-9)
}

/// Four quadrant clusters in the first two features, separated by a margin.
fn separable_toy(n: usize, seed_value: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = seed::rng(seed_value);
    let mut x = Array2::zeros((n, 5));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 4;
        let sx = if c & 1 == 1 { 1.0 } else { -1.0 };
        let sy = if c & 2 == 2 { 1.0 } else { -1.0 };
        x[[i, 0]] = sx * rng.gen_range(0.5..2.0);
        x[[i, 1]] = sy * rng.gen_range(0.5..2.0);
        for j in 2..5 {
            x[[i, j]] = rng.gen_range(-1.0..1.0);
        }
        y.push(c);
    }
    (x, y)
}

fn c7_early_stopping() -> Verdict {
    let (x, y) = separable_toy(64, 5);
    let view = LabeledView { x: x.view(), y: &y };
    let mut lines = Vec::new();
    for monitor in [Monitor::TrainAccuracy, Monitor::ValLoss] {
        let model =
            Mlp::init(&MlpConfig::standard(Activation::Relu, 1)).map_err(|e| e.to_string())?;
        let tc = TrainConfig {
            learning_rate: 0.0,
            patience: 10,
            monitor,
            ..TrainConfig::default()
        };
        let val = (monitor == Monitor::ValLoss).then_some(view);
        let r = fit(model, view, val, &tc).map_err(|e| e.to_string())?;
        ensure(
            r.epochs_run == 11 && r.stop_reason == StopReason::EarlyStopped,
            || {
                format!(
                    "{monitor:?}: stopped after {} epochs ({:?})",
                    r.epochs_run, r.stop_reason
                )
            },
        )?;
        lines.push(format!("{monitor:?} stops at {}", r.epochs_run));
    }
    Ok(lines.join(", "))
}

fn c8_trainability() -> Verdict {
    let (x, y) = separable_toy(200, 11);
    let view = LabeledView { x: x.view(), y: &y };
    let mut parts = Vec::new();
    for act in Activation::ALL {
        let model = Mlp::init(&MlpConfig::standard(act, 3)).map_err(|e| e.to_string())?;
        let tc = TrainConfig {
            shuffle_seed: 4,
            ..TrainConfig::default()
        };
        let r = fit(model, view, None, &tc).map_err(|e| e.to_string())?;
        ensure(r.model.is_finite(), || {
            format!("{act}: non-finite parameters")
        })?;
        let preds = r.model.predict_batch(x.view()).map_err(|e| e.to_string())?;
        let acc = preds.iter().zip(&y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64;
        ensure(acc >= 0.99 && r.epochs_run <= 400, || {
            format!("{act}: train accuracy {acc} after {} epochs", r.epochs_run)
        })?;
        parts.push(format!(
            "{act} {:.1}% in {} epochs",
            acc * 100.0,
            r.epochs_run
        ));
    }
    Ok(parts.join(", "))
}

fn c9_directional() -> Verdict {
    let trials = std::env::var("PILLAR_ACCEPTANCE_TRIALS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10);
    let cfg = ExperimentConfig {
        proportions: vec![2],
        trials,
        bootstrap_fracs: vec![0.7],
        ..ExperimentConfig::default()
    };
    let outcome = run_matrix(&cfg).map_err(|e| e.to_string())?;
    ensure(outcome.failures.is_empty(), || {
        format!("{} diverged runs", outcome.failures.len())
    })?;
    let cells = pillar::experiment::aggregate_rows(&outcome.rows).map_err(|e| e.to_string())?;
    let get = |key: ModelKey| {
        cells
            .iter()
            .find(|c| c.model == key)
            .ok_or(format!("missing {key}"))
    };
    let ens = get(ModelKey::Ensemble(0.7))?;
    let singles = Activation::ALL
        .iter()
        .map(|&a| get(ModelKey::Single(a)))
        .collect::<Result<Vec<_>, _>>()?;
    let sd = |c: &pillar::experiment::CellAggregate| c.accuracy.std.unwrap_or(0.0);

    let summary = format!(
        "acc mean/std % {}; ensemble {:.2}/{:.2}; F2(F1) % {} vs ensemble {:.2}",
        singles
            .iter()
            .map(|c| format!(
                "{} {:.2}/{:.2}",
                c.model,
                c.accuracy.mean * 100.0,
                sd(c) * 100.0
            ))
            .collect::<Vec<_>>()
            .join(", "),
        ens.accuracy.mean * 100.0,
        sd(ens) * 100.0,
        singles
            .iter()
            .map(|c| format!("{:.2}", c.f2_f1.mean * 100.0))
            .collect::<Vec<_>>()
            .join("/"),
        ens.f2_f1.mean * 100.0,
    );
    let mut broken = Vec::new();
    if singles
        .iter()
        .any(|s| ens.accuracy.mean < s.accuracy.mean - 0.01)
    {
        broken.push("(a) ensemble accuracy");
    }
    if trials > 1 && singles.iter().all(|s| sd(ens) > sd(s)) {
        broken.push("(b) ensemble std");
    }
    if singles.iter().any(|s| ens.f2_f1.mean < s.f2_f1.mean - 0.02) {
        broken.push("(c) ensemble F2");
    }
    if broken.is_empty() {
        Ok(format!("{trials} trials: {summary}"))
    } else {
        Err(format!(
            "{} failed; {trials} trials: {summary}",
            broken.join(", ")
        ))
    }
}

enum Outcome10 {
    Ran(Verdict),
    Skipped(String),
}

fn c10_real_data() -> Outcome10 {
    let Some(path) = std::env::var_os("PILLAR_REAL_DATA").map(PathBuf::from) else {
        return Outcome10::Skipped("PILLAR_REAL_DATA not set".into());
    };
    if !path.exists() {
        return Outcome10::Skipped(format!("{} not found", path.display()));
    }
    Outcome10::Ran((|| {
        let raws = pillar::data::read_csv_file(&path).map_err(|e| e.to_string())?;
        let pairs = raws
            .iter()
            .map(|r| safety_factor(r).map(|sf| (r.outcome, sf)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let t =
            compute_thresholds(&pairs, &ThresholdOptions::default()).map_err(|e| e.to_string())?;
        let counts = class_counts(&label_records(&raws, &t).map_err(|e| e.to_string())?);
        let msg = format!(
            "t_failed {:.4}, t_intact {:.4}, counts {counts:?}",
            t.t_failed, t.t_intact
        );
        ensure(
            (t.t_failed - 2.48).abs() <= 0.01
                && (t.t_intact - 1.42).abs() <= 0.01
                && counts == [70, 16, 312, 25],
            || msg.clone(),
        )?;
        Ok(msg)
    })())
}

fn c11_determinism() -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = ExperimentConfig {
        proportions: vec![1, 3],
        trials: 2,
        bootstrap_fracs: vec![0.7, 0.9],
        ..ExperimentConfig::default()
    };
    let small = |name: &str| {
        let mut cfg = base.clone();
        cfg.training.hidden_dims = vec![32, 16];
        cfg.training.max_epochs = 25;
        cfg.output_dir = root.path().join(name);
        cfg
    };
    let files = [
        "results.csv",
        "failures.csv",
        "aggregates.csv",
        "f2_comparison.csv",
    ];
    let run = |cfg: &ExperimentConfig| -> Result<Vec<Vec<u8>>, String> {
        run_experiment(cfg).map_err(|e| e.to_string())?;
        files
            .iter()
            .map(|f| std::fs::read(cfg.output_dir.join(f)).map_err(|e| e.to_string()))
            .collect()
    };
    let a = run(&small("a"))?;
    let b = run(&small("b"))?;
    let c = par::with_threads(1, || run(&small("c")))?;
    ensure(a == b, || "repeat run differs".into())?;
    ensure(a == c, || {
        "single-thread run differs from pooled run".into()
    })?;
    Ok(format!(
        "{} CSV files byte-identical across 3 runs (parallel={})",
        files.len(),
        par::is_parallel()
    ))
}

fn guarded(f: fn() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "majority vote table", c1_vote),
        (2, "safety factor", c2_safety_factor),
        (3, "label boundaries", c3_labels),
        (4, "activation oracle", c4_activations),
        (5, "gradient check", c5_gradient_check),
        (6, "SMOTE balance", c6_smote),
        (7, "early stopping", c7_early_stopping),
        (8, "trainability", c8_trainability),
        (9, "synthetic directional checks", c9_directional),
        (11, "determinism", c11_determinism),
    ];
    let mut failed = 0;
    let mut report = |n: u8, name: &str, verdict: Option<Verdict>, secs: f64| {
        let line = match verdict {
            Some(Ok(msg)) => format!("PASS criterion {n:>2} {name}: {msg}"),
            Some(Err(msg)) => {
                failed += 1;
                format!("FAIL criterion {n:>2} {name}: {msg}")
            }
            None => return,
        };
        println!("{line} [{secs:.1}s]");
    };
    for (n, name, f) in criteria {
        if n == 11 {
            match c10_real_data() {
                Outcome10::Ran(v) => report(10, "real-data thresholds", Some(v), 0.0),
                Outcome10::Skipped(why) => {
                    println!("SKIP criterion 10 real-data thresholds: {why}")
                }
            }
        }
        let start = Instant::now();
        let verdict = guarded(f);
        report(n, name, Some(verdict), start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
