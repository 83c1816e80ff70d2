use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Outcome, PillarRecord, RawRecord};
use crate::{Error, Result};

const COLUMNS: [&str; 5] = [
    "depth_m",
    "mining_height_m",
    "bord_width_m",
    "pillar_width_m",
    "outcome",
];

fn parse_outcome(token: &str) -> Option<Outcome> {
    match token.trim().to_ascii_lowercase().as_str() {
        "intact" => Some(Outcome::Intact),
        "failed" => Some(Outcome::Failed),
        _ => None,
    }
}

/// Parse case histories. Columns are located by header name; data rows are
/// numbered from 1 in error messages.
pub fn parse_csv<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(0, name, "column missing from header"))?;
    }

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |col: usize| -> Result<&str> {
            row.get(index[col])
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::parse(row_no, COLUMNS[col], "is missing"))
        };
        let number = |col: usize| -> Result<f64> {
            let text = field(col)?;
            text.parse::<f64>().map_err(|_| {
                Error::parse(
                    row_no,
                    COLUMNS[col],
                    format!("has malformed number `{text}`"),
                )
            })
        };
        let depth_m = number(0)?;
        let mining_height_m = number(1)?;
        let bord_width_m = number(2)?;
        let pillar_width_m = number(3)?;
        let outcome_text = field(4)?;
        let outcome = parse_outcome(outcome_text).ok_or_else(|| {
            Error::parse(
                row_no,
                "outcome",
                format!("has unknown outcome `{outcome_text}` (expected intact or failed)"),
            )
        })?;
        let record = RawRecord {
            depth_m,
            mining_height_m,
            bord_width_m,
            pillar_width_m,
            outcome,
        };
        record
            .validate()
            .map_err(|(column, message)| Error::parse(row_no, column, message))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file))
}

pub fn write_raw_csv<W: Write>(records: &[RawRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.depth_m.to_string(),
            r.mining_height_m.to_string(),
            r.bord_width_m.to_string(),
            r.pillar_width_m.to_string(),
            r.outcome.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv sink>", e))?;
    Ok(())
}

/// Input columns followed by `ratio,sf,label,class_code`.
pub fn write_labeled_csv<W: Write>(
    raws: &[RawRecord],
    labeled: &[PillarRecord],
    sink: W,
) -> Result<()> {
    if raws.len() != labeled.len() {
        return Err(Error::Dimension(format!(
            "{} raw records but {} labeled records",
            raws.len(),
            labeled.len()
        )));
    }
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    header.extend(["ratio", "sf", "label", "class_code"]);
    w.write_record(&header)?;
    for (r, l) in raws.iter().zip(labeled) {
        w.write_record([
            r.depth_m.to_string(),
            r.mining_height_m.to_string(),
            r.bord_width_m.to_string(),
            r.pillar_width_m.to_string(),
            r.outcome.as_str().to_string(),
            r.ratio().to_string(),
            format_sig(l.sf, 6),
            l.label.as_str().to_string(),
            l.class_code().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv sink>", e))?;
    Ok(())
}

/// Fixed-point rendering with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // Rounding can carry into a new leading digit (9.999995 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && rounded.abs().log10().floor() as i64 > magnitude && decimals > 0 {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}
