use std::collections::HashSet;
use std::fs;

use regex::Regex;

use pillar::ensemble::{bootstrap_sample, member_seeds, MEMBERS};
use pillar::experiment::runner::{cell_seed, ensemble_config, model_keys};
use pillar::experiment::{
    aggregate_rows, build_bundle, emit_f2_chart, prepare_data, read_results_csv, run_experiment,
    run_matrix, ChartGroup, ExperimentConfig, SmoteStage,
};
use pillar::par;

fn tiny(proportions: Vec<u8>, trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        proportions,
        trials,
        ..ExperimentConfig::default()
    };
    cfg.training.hidden_dims = vec![8];
    cfg.training.max_epochs = 4;
    cfg
}

#[test]
fn full_matrix_row_count() {
    let cfg = tiny(vec![1, 2, 3, 4], 10);
    let out = run_matrix(&cfg).unwrap();
    assert_eq!(out.rows.len() + out.failures.len(), 4 * 10 * 6);
    assert_eq!(model_keys(&cfg).len(), 6);
}

#[test]
fn sequential_and_pooled_runs_agree() {
    let cfg = tiny(vec![2, 4], 2);
    let pooled = run_matrix(&cfg).unwrap();
    let single = par::with_threads(1, || run_matrix(&cfg)).unwrap();
    assert_eq!(pooled.rows, single.rows);
}

#[test]
fn train_only_keeps_test_out_of_bootstrap() {
    let mut cfg = tiny(vec![1, 3], 3);
    cfg.smote_stage = SmoteStage::TrainOnly;
    let data = prepare_data(&cfg).unwrap();
    assert!(data.pool.iter().all(|r| !r.synthetic));
    for &p in &cfg.proportions {
        for t in 1..=cfg.trials {
            let bundle = build_bundle(&cfg, &data, p, t).unwrap();
            let held_out: HashSet<u64> = bundle
                .test
                .iter()
                .chain(bundle.validation.iter().flatten())
                .map(|r| r.id)
                .collect();
            let train_ids: HashSet<u64> = bundle.train.iter().map(|r| r.id).collect();
            assert_eq!(
                train_ids.len(),
                bundle.train.len(),
                "duplicate ids in train"
            );
            assert!(train_ids.is_disjoint(&held_out));
            assert!(bundle.test.iter().all(|r| !r.synthetic));

            for &frac in &cfg.bootstrap_fracs {
                let ec = ensemble_config(
                    &cfg,
                    bundle.validation.is_some(),
                    frac,
                    cell_seed(&cfg, p, t),
                );
                for m in 0..MEMBERS {
                    let sample = bootstrap_sample(
                        &bundle.train,
                        frac,
                        member_seeds(ec.master_seed, m).bootstrap,
                    )
                    .unwrap();
                    assert!(sample.iter().all(|r| !held_out.contains(&r.id)));
                }
            }
        }
    }
}

#[test]
fn reports_are_consistent_with_trial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(vec![1, 3], 3);
    cfg.output_dir = dir.path().to_path_buf();
    let summary = run_experiment(&cfg).unwrap();

    let (header, rows) = read_results_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows, summary.outcome.rows);
    assert!(header[0].contains("master_seed=0"));
    assert!(header[0].contains(pillar::VERSION));

    // recompute mean and std from the CSV rows and compare with aggregates.csv
    let text = fs::read_to_string(dir.path().join("aggregates.csv")).unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut checked = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[3] != "accuracy" {
            continue;
        }
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| {
                r.proportion.to_string() == rec[0]
                    && r.model.csv_model() == &rec[1]
                    && r.model.csv_bootstrap() == rec[2]
            })
            .map(|r| r.metrics.accuracy)
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((rec[4].parse::<f64>().unwrap() - mean).abs() < 1e-12);
        assert!((rec[5].parse::<f64>().unwrap() - sd).abs() < 1e-12);
        checked += 1;
    }
    assert_eq!(checked, 2 * 6);

    let table = fs::read_to_string(dir.path().join("accuracy_mean.md")).unwrap();
    assert!(table.starts_with("<!-- pillar "));
    let cells = aggregate_rows(&rows).unwrap();
    let first = &cells[0];
    assert!(table.contains(&format!("{:.2}%", first.accuracy.mean * 100.0)));
}

#[test]
fn chart_bars_parse_back() {
    let groups: Vec<ChartGroup> = (1..=4)
        .map(|p| ChartGroup {
            label: p.to_string(),
            bars: (0..6)
                .map(|m| (format!("model {m}"), (p * 6 + m) as f64 / 40.0))
                .collect(),
        })
        .collect();
    let svg = emit_f2_chart(&groups, &["run header".into()]).unwrap();
    let bar = Regex::new(r#"<rect class="bar" data-group="([^"]*)" data-model="([^"]*)" data-value="([^"]*)"[^>]*height="([^"]*)""#).unwrap();
    let parsed: Vec<_> = bar.captures_iter(&svg).collect();
    assert_eq!(parsed.len(), 24);
    for (cap, (g, (model, value))) in parsed.iter().zip(
        groups
            .iter()
            .flat_map(|g| g.bars.iter().map(move |b| (g, b))),
    ) {
        assert_eq!(&cap[1], g.label);
        assert_eq!(&cap[2], model);
        assert_eq!(cap[3].parse::<f64>().unwrap(), *value);
        assert!((cap[4].parse::<f64>().unwrap() - value * 300.0).abs() < 1e-3);
    }

    let single = emit_f2_chart(&groups[..1], &[]).unwrap();
    assert_eq!(bar.captures_iter(&single).count(), 6);
    assert!(single.trim_end().ends_with("</svg>"));
    assert!(emit_f2_chart(&[], &[]).is_err());
}
