//! CSV and markdown report files.
//!
//! Every file starts with the run header (`#` lines for CSV, HTML comments
//! for markdown/SVG). Floats in CSV use shortest round-trip formatting so
//! aggregates can be recomputed exactly from the per-trial rows.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::chart::{emit_f2_chart, ChartGroup};
use super::runner::{FailureRow, ModelKey, ResultRow, TrialMetrics};
use crate::data::Label;
use crate::metrics::{aggregate, TrialAggregate};
use crate::{Error, Result, NUM_CLASSES};

pub const RESULTS_FILE: &str = "results.csv";
pub const RESULTS_COLUMNS: [&str; 10] = [
    "model",
    "proportion",
    "bootstrap",
    "trial",
    "accuracy",
    "f1_F0",
    "f1_F1",
    "f1_I0",
    "f1_I1",
    "f2_F1",
];

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn write_csv_header(sink: &mut impl Write, header: &[String], path: &Path) -> Result<()> {
    for line in header {
        writeln!(sink, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn md_header(header: &[String]) -> String {
    header
        .iter()
        .map(|l| format!("<!-- {} -->\n", l.replace("--", "- -")))
        .collect()
}

pub fn write_results_csv(dir: &Path, header: &[String], rows: &[ResultRow]) -> Result<PathBuf> {
    let path = dir.join(RESULTS_FILE);
    let mut file = create(&path)?;
    write_csv_header(&mut file, header, &path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RESULTS_COLUMNS)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.model.csv_model().to_string(),
            r.proportion.to_string(),
            r.model.csv_bootstrap(),
            r.trial.to_string(),
            m.accuracy.to_string(),
            m.f1[0].to_string(),
            m.f1[1].to_string(),
            m.f1[2].to_string(),
            m.f1[3].to_string(),
            m.f2_f1.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_failures_csv(
    dir: &Path,
    header: &[String],
    failures: &[FailureRow],
) -> Result<PathBuf> {
    let path = dir.join("failures.csv");
    let mut file = create(&path)?;
    write_csv_header(&mut file, header, &path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["model", "proportion", "bootstrap", "trial", "error"])?;
    for f in failures {
        w.write_record([
            f.model.csv_model().to_string(),
            f.proportion.to_string(),
            f.model.csv_bootstrap(),
            f.trial.to_string(),
            f.error.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Read a results CSV back: the `#` header lines and the trial rows.
pub fn read_results_csv(path: &Path) -> Result<(Vec<String>, Vec<ResultRow>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        match line.strip_prefix('#') {
            Some(rest) => header.push(rest.trim_start().to_string()),
            None => break,
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let cols = reader.headers()?.clone();
    if cols.iter().collect::<Vec<_>>() != RESULTS_COLUMNS {
        return Err(Error::parse(
            0,
            "header",
            format!("expected columns {}", RESULTS_COLUMNS.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row_no = i + 1;
        let num = |col: usize| -> Result<f64> {
            rec[col].parse().map_err(|_| {
                Error::parse(
                    row_no,
                    RESULTS_COLUMNS[col],
                    format!("has malformed number `{}`", &rec[col]),
                )
            })
        };
        let int = |col: usize| -> Result<usize> {
            rec[col].parse().map_err(|_| {
                Error::parse(
                    row_no,
                    RESULTS_COLUMNS[col],
                    format!("has malformed integer `{}`", &rec[col]),
                )
            })
        };
        rows.push(ResultRow {
            model: ModelKey::from_csv(&rec[0], &rec[2])?,
            proportion: int(1)? as u8,
            trial: int(3)?,
            metrics: TrialMetrics {
                accuracy: num(4)?,
                f1: [num(5)?, num(6)?, num(7)?, num(8)?],
                f2_f1: num(9)?,
            },
        });
    }
    Ok((header, rows))
}

/// Trial aggregates of one (proportion, model) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub proportion: u8,
    pub model: ModelKey,
    pub accuracy: TrialAggregate,
    pub f1: [TrialAggregate; NUM_CLASSES],
    pub f2_f1: TrialAggregate,
}

/// Group rows by (proportion, model) in display order.
pub fn aggregate_rows(rows: &[ResultRow]) -> Result<Vec<CellAggregate>> {
    let mut keys: Vec<(u8, ModelKey)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.proportion, r.model)) {
            keys.push((r.proportion, r.model));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.rank().cmp(&b.1.rank())));
    keys.into_iter()
        .map(|(proportion, model)| {
            let cell: Vec<&TrialMetrics> = rows
                .iter()
                .filter(|r| r.proportion == proportion && r.model == model)
                .map(|r| &r.metrics)
                .collect();
            let of = |f: &dyn Fn(&TrialMetrics) -> f64| {
                aggregate(&cell.iter().map(|m| f(m)).collect::<Vec<_>>())
            };
            Ok(CellAggregate {
                proportion,
                model,
                accuracy: of(&|m| m.accuracy)?,
                f1: [
                    of(&|m| m.f1[0])?,
                    of(&|m| m.f1[1])?,
                    of(&|m| m.f1[2])?,
                    of(&|m| m.f1[3])?,
                ],
                f2_f1: of(&|m| m.f2_f1)?,
            })
        })
        .collect()
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

fn std_text(a: &TrialAggregate) -> String {
    a.std.map_or_else(|| "n/a".to_string(), pct)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Layout {
    proportions: Vec<u8>,
    models: Vec<ModelKey>,
}

impl Layout {
    fn of(cells: &[CellAggregate]) -> Self {
        let mut proportions: Vec<u8> = cells.iter().map(|c| c.proportion).collect();
        proportions.dedup();
        let mut models: Vec<ModelKey> = Vec::new();
        for c in cells {
            if !models.contains(&c.model) {
                models.push(c.model);
            }
        }
        models.sort_by_key(|m| m.rank());
        Layout {
            proportions,
            models,
        }
    }

    fn find<'a>(
        &self,
        cells: &'a [CellAggregate],
        p: u8,
        m: ModelKey,
    ) -> Option<&'a CellAggregate> {
        cells.iter().find(|c| c.proportion == p && c.model == m)
    }

    fn table_head(&self, first: &str) -> String {
        let mut s = format!("| {first} |");
        for m in &self.models {
            s.push_str(&format!(" {m} |"));
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(self.models.len()));
        s.push('\n');
        s
    }
}

fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write aggregate tables, the F2 comparison CSV and the F2 chart.
pub fn render_reports(
    dir: &Path,
    header: &[String],
    rows: &[ResultRow],
    failures: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cells = aggregate_rows(rows)?;
    let layout = Layout::of(&cells);
    let head = md_header(header);
    let note = if failures > 0 {
        format!("\n{failures} diverged training run(s) excluded from these aggregates.\n")
    } else {
        String::new()
    };
    let mut files = Vec::new();

    // aggregates.csv
    let path = dir.join("aggregates.csv");
    let mut file = create(&path)?;
    write_csv_header(&mut file, header, &path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "proportion",
        "model",
        "bootstrap",
        "metric",
        "mean",
        "std",
        "trials",
    ])?;
    for c in &cells {
        let mut metrics: Vec<(String, &TrialAggregate)> = vec![("accuracy".into(), &c.accuracy)];
        for (label, a) in Label::ALL.iter().zip(&c.f1) {
            metrics.push((format!("f1_{}", label.as_str()), a));
        }
        metrics.push(("f2_F1".into(), &c.f2_f1));
        for (name, a) in metrics {
            w.write_record([
                c.proportion.to_string(),
                c.model.csv_model().to_string(),
                c.model.csv_bootstrap(),
                name,
                a.mean.to_string(),
                opt_num(a.std),
                a.count.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(path);

    // accuracy tables
    for (name, title, render) in [
        (
            "accuracy_mean.md",
            "Average accuracy",
            &(|a: &TrialAggregate| pct(a.mean)) as &dyn Fn(&TrialAggregate) -> String,
        ),
        (
            "accuracy_std.md",
            "Standard deviation of accuracy",
            &std_text,
        ),
    ] {
        let mut s = format!("{head}\n# {title}\n\n");
        s.push_str(&layout.table_head("Data Proportion"));
        for &p in &layout.proportions {
            s.push_str(&format!("| {p} |"));
            for &m in &layout.models {
                let cell = layout
                    .find(&cells, p, m)
                    .map_or_else(|| "n/a".to_string(), |c| render(&c.accuracy));
                s.push_str(&format!(" {cell} |"));
            }
            s.push('\n');
        }
        s.push_str(&note);
        files.push(write_text(dir.join(name), &s)?);
    }

    // per-proportion F1 tables
    for &p in &layout.proportions {
        let mut s = format!("{head}\n# F1 score, data proportion {p}\n\n");
        s.push_str(&layout.table_head("Label"));
        for (code, label) in Label::ALL.iter().enumerate() {
            s.push_str(&format!("| {} |", label.as_str()));
            for &m in &layout.models {
                let cell = layout
                    .find(&cells, p, m)
                    .map_or_else(|| "n/a".to_string(), |c| pct(c.f1[code].mean));
                s.push_str(&format!(" {cell} |"));
            }
            s.push('\n');
        }
        s.push_str(&note);
        files.push(write_text(dir.join(format!("f1_prop{p}.md")), &s)?);
    }

    // F2 comparison
    let path = dir.join("f2_comparison.csv");
    let mut file = create(&path)?;
    write_csv_header(&mut file, header, &path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "proportion",
        "model",
        "bootstrap",
        "f2_F1_mean",
        "f2_F1_std",
        "trials",
    ])?;
    for c in &cells {
        w.write_record([
            c.proportion.to_string(),
            c.model.csv_model().to_string(),
            c.model.csv_bootstrap(),
            c.f2_f1.mean.to_string(),
            opt_num(c.f2_f1.std),
            c.f2_f1.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(path);

    let groups: Vec<ChartGroup> = layout
        .proportions
        .iter()
        .map(|&p| ChartGroup {
            label: p.to_string(),
            bars: layout
                .models
                .iter()
                .filter_map(|&m| {
                    layout
                        .find(&cells, p, m)
                        .map(|c| (m.to_string(), c.f2_f1.mean))
                })
                .collect(),
        })
        .collect();
    if !groups.is_empty() {
        files.push(write_text(
            dir.join("f2_comparison.svg"),
            &emit_f2_chart(&groups, header)?,
        )?);
    }
    Ok(files)
}
