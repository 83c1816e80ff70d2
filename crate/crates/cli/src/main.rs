//! `pillar`: label, synthesize, train and evaluate pillar stability models.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pillar::data::{class_counts, write_labeled_csv, write_raw_csv, Label};
use pillar::experiment::report::{read_results_csv, render_reports};
use pillar::experiment::runner::{
    cell_seed, load_raw, resolve_thresholds, train_cell_ensemble, train_single,
};
use pillar::experiment::{
    build_bundle, generate_synthetic, prepare_data, run_experiment, DataSource, ExperimentConfig,
    SmoteStage, SyntheticSpec, ThresholdsMode, TrialMetrics,
};
use pillar::nn::{Activation, SavedModel};
use pillar::{Error, NUM_CLASSES};

#[derive(Parser)]
#[command(name = "pillar", version, about = "Coal pillar stability classification", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute safety factors and four-class labels for a dataset
    Label(LabelArgs),
    /// Generate a synthetic dataset
    Synth(SynthArgs),
    /// Train one single-activation model
    Train(ModelArgs),
    /// Train and save a three-member bagging ensemble
    Ensemble(ModelArgs),
    /// Run the full experiment matrix and write reports
    Experiment(ExperimentArgs),
    /// Re-render tables and chart from a per-trial results CSV
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config file (TOML); flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Use the built-in synthetic generator
    #[arg(long)]
    synthetic: bool,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_smote_stage)]
    smote_stage: Option<SmoteStage>,
    #[arg(long, value_parser = parse_thresholds)]
    thresholds: Option<ThresholdsMode>,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    common: Common,
    /// Labeled CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-class counts F0,F1,I0,I1
    #[arg(long, value_delimiter = ',', num_args = NUM_CLASSES)]
    counts: Option<Vec<usize>>,
    /// CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    proportion: u8,
    /// Trial index whose split and seeds are used
    #[arg(long, default_value_t = 1)]
    trial: usize,
    /// Single-model activation (train only)
    #[arg(long, default_value = "relu")]
    activation: Activation,
    /// Bootstrap fraction (ensemble only)
    #[arg(long, default_value_t = 0.7)]
    bootstrap: f64,
    /// Output directory for the saved model
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Data proportion(s), repeatable or comma separated
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=4))]
    proportion: Vec<u8>,
    /// Bootstrap fraction(s), repeatable or comma separated
    #[arg(long, value_delimiter = ',')]
    bootstrap: Vec<f64>,
    /// Report directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-trial results CSV written by `experiment`
    results: PathBuf,
    /// Report directory (defaults to the CSV's directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_smote_stage(s: &str) -> Result<SmoteStage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_thresholds(s: &str) -> Result<ThresholdsMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.data {
            cfg.data_source = DataSource::Csv(path.clone());
        } else if self.synthetic {
            cfg.data_source = DataSource::Synthetic;
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(stage) = self.smote_stage {
            cfg.smote_stage = stage;
        }
        if let Some(mode) = self.thresholds {
            cfg.thresholds_mode = mode;
        }
        Ok(cfg)
    }
}

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let file = File::create(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_counts(to: &mut dyn Write, title: &str, counts: &[usize; NUM_CLASSES]) -> io::Result<()> {
    let parts: Vec<String> = Label::ALL
        .iter()
        .zip(counts)
        .map(|(l, c)| format!("{}={c}", l.as_str()))
        .collect();
    writeln!(
        to,
        "{title}: {} (total {})",
        parts.join(" "),
        counts.iter().sum::<usize>()
    )
}

fn print_metrics(m: &TrialMetrics) {
    println!("test accuracy: {:.2}%", m.accuracy * 100.0);
    for (label, f1) in Label::ALL.iter().zip(m.f1) {
        println!("  F1 {}: {:.2}%", label.as_str(), f1 * 100.0);
    }
    println!("  F2 F1: {:.2}%", m.f2_f1 * 100.0);
}

fn label(args: LabelArgs) -> anyhow::Result<()> {
    let cfg = args.common.config()?;
    let raws = load_raw(&cfg)?;
    let thresholds = resolve_thresholds(&cfg, &raws)?;
    let labeled = pillar::data::label_records(&raws, &thresholds)?;

    // keep stdout clean for CSV when no output file is given
    let mut info: Box<dyn Write> = if args.out.is_some() {
        Box::new(io::stdout().lock())
    } else {
        Box::new(io::stderr().lock())
    };
    writeln!(
        info,
        "thresholds ({}): t_failed={:.4} t_intact={:.4}",
        cfg.thresholds_mode.as_str(),
        thresholds.t_failed,
        thresholds.t_intact
    )?;
    print_counts(&mut *info, "class counts", &class_counts(&labeled))?;
    drop(info);

    let mut out = sink(args.out.as_deref())?;
    write_labeled_csv(&raws, &labeled, &mut out)?;
    out.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut spec = SyntheticSpec {
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    if let Some(counts) = args.counts {
        spec.counts = counts
            .try_into()
            .map_err(|_| Error::Config(format!("--counts needs {NUM_CLASSES} values")))?;
    }
    let raws = generate_synthetic(&spec)?;
    let mut out = sink(args.out.as_deref())?;
    write_raw_csv(&raws, &mut out)?;
    out.flush()?;
    Ok(())
}

fn model_config(args: &ModelArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = args.common.config()?;
    cfg.proportions = vec![args.proportion];
    cfg.trials = cfg.trials.max(args.trial);
    cfg.validate()?;
    Ok(cfg)
}

fn train(args: ModelArgs) -> anyhow::Result<()> {
    let cfg = model_config(&args)?;
    let data = prepare_data(&cfg)?;
    let bundle = build_bundle(&cfg, &data, args.proportion, args.trial)?;
    let result = train_single(
        &cfg,
        &bundle,
        args.activation,
        cell_seed(&cfg, args.proportion, args.trial),
    )?;
    println!(
        "ANN-BP {}: {} epochs ({:?})",
        args.activation.display_name(),
        result.epochs_run,
        result.stop_reason
    );

    let (x, y) = bundle.design(&bundle.test);
    print_metrics(&TrialMetrics::from_predictions(
        &y,
        &result.model.predict_batch(x.view())?,
    )?);

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(format!("model_{}.json", args.activation));
    SavedModel {
        mlp: result.model,
        standardizer: bundle.standardizer.clone(),
    }
    .save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}

fn ensemble(args: ModelArgs) -> anyhow::Result<()> {
    let cfg = model_config(&args)?;
    if !(args.bootstrap > 0.0 && args.bootstrap <= 1.0) {
        return Err(Error::Config(format!(
            "bootstrap fraction must be in (0, 1], got {}",
            args.bootstrap
        ))
        .into());
    }
    let data = prepare_data(&cfg)?;
    let bundle = build_bundle(&cfg, &data, args.proportion, args.trial)?;
    let model = train_cell_ensemble(
        &cfg,
        &bundle,
        args.bootstrap,
        cell_seed(&cfg, args.proportion, args.trial),
    )?;
    for p in &model.provenance {
        println!(
            "member {}: {} bootstrap draws, {} epochs ({:?})",
            p.activation, p.sample_size, p.epochs_run, p.stop_reason
        );
    }

    let (x, y) = bundle.design(&bundle.test);
    print_metrics(&TrialMetrics::from_predictions(
        &y,
        &model.predict_batch(x.view())?,
    )?);

    model.save(&args.out)?;
    println!("saved {}", args.out.display());
    Ok(())
}

/// Returns true when every training run diverged.
fn experiment(args: ExperimentArgs) -> anyhow::Result<bool> {
    let mut cfg = args.common.config()?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if !args.proportion.is_empty() {
        cfg.proportions = args.proportion;
    }
    if !args.bootstrap.is_empty() {
        cfg.bootstrap_fracs = args.bootstrap;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;

    let summary = run_experiment(&cfg)?;
    let outcome = &summary.outcome;
    let mut stdout = io::stdout().lock();
    print_counts(&mut stdout, "class counts", &outcome.class_counts)?;
    print_counts(&mut stdout, "after SMOTE", &outcome.pool_counts)?;
    writeln!(stdout, "{} result rows", outcome.rows.len())?;
    if !outcome.failures.is_empty() {
        eprintln!(
            "warning: {} diverged training run(s) excluded from aggregates",
            outcome.failures.len()
        );
    }
    for f in &summary.files {
        writeln!(stdout, "wrote {}", f.display())?;
    }
    Ok(summary.all_failed())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let (header, rows) = read_results_csv(&args.results)?;
    if rows.is_empty() {
        bail!(Error::InsufficientData(format!(
            "{} has no result rows",
            args.results.display()
        )));
    }
    let dir = args
        .out
        .or_else(|| args.results.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    for f in render_reports(&dir, &header, &rows, 0)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::Divergence { .. }) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Label(a) => label(a).map(|_| false),
        Command::Synth(a) => synth(a).map(|_| false),
        Command::Train(a) => train(a).map(|_| false),
        Command::Ensemble(a) => ensemble(a).map(|_| false),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a).map(|_| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: every training run diverged");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
