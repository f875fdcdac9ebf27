//! File formats: dataset CSV, grid JSON, summary tables, run manifests and
//! SVG figures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{CellEstimator, ExperimentGrid, ExperimentSummary};
use crate::model::{AnnotationCondition, Dataset, LabeledRecord, Label};
use crate::scalar::Scalar;

const ID: &str = "id";
const Y: &str = "y";
const LLM: &str = "llm_label";
const GOLD: &str = "gold_label";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Alphabet {
    Digits,
    YesNo,
    TrueFalse,
}

impl Alphabet {
    fn name(self) -> &'static str {
        match self {
            Alphabet::Digits => "0/1",
            Alphabet::YesNo => "yes/no",
            Alphabet::TrueFalse => "true/false",
        }
    }
}

fn parse_label(token: &str) -> Option<(Label, Alphabet)> {
    let t = token.trim().to_ascii_lowercase();
    Some(match t.as_str() {
        "0" => (Label::ZERO, Alphabet::Digits),
        "1" => (Label::ONE, Alphabet::Digits),
        "no" => (Label::ZERO, Alphabet::YesNo),
        "yes" => (Label::ONE, Alphabet::YesNo),
        "false" => (Label::ZERO, Alphabet::TrueFalse),
        "true" => (Label::ONE, Alphabet::TrueFalse),
        _ => return None,
    })
}

/// Reads a dataset with header `id,y,<covariates…>,llm_label,gold_label`.
///
/// Labels may be written as `0/1`, `yes/no` or `true/false`, but one file
/// must use a single alphabet. Empty label cells mean "not collected"; a
/// record is in the expert subsample iff its gold label is present.
pub fn read_dataset<T: Scalar, R: Read>(reader: R) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let k = cols.len();
    if k < 4 || cols[0] != ID || cols[1] != Y || cols[k - 2] != LLM || cols[k - 1] != GOLD {
        return Err(Error::Parse {
            line: 1,
            reason: format!("header must be id,y,<covariates…>,llm_label,gold_label; got {}", cols.join(",")),
        });
    }
    let covariates: Vec<String> = cols[2..k - 2].iter().map(|s| s.to_string()).collect();

    let mut alphabet: Option<Alphabet> = None;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::Parse { line, reason };
        let num = |idx: usize| -> Result<T> {
            row[idx]
                .trim()
                .parse::<T>()
                .map_err(|_| bad(format!("column '{}': '{}' is not a number", cols[idx], &row[idx])))
        };
        let mut label = |idx: usize| -> Result<Option<Label>> {
            let cell = row[idx].trim();
            if cell.is_empty() {
                return Ok(None);
            }
            let (l, a) = parse_label(cell)
                .ok_or_else(|| bad(format!("column '{}': '{cell}' is not a label", cols[idx])))?;
            match alphabet {
                None => alphabet = Some(a),
                Some(prev) if prev != a => {
                    return Err(bad(format!(
                        "mixed label alphabet: '{cell}' is {} but earlier labels are {}",
                        a.name(),
                        prev.name()
                    )))
                }
                _ => {}
            }
            Ok(Some(l))
        };
        let llm = label(k - 2)?;
        let gold = label(k - 1)?;
        let y = num(1)?;
        let x = (2..k - 2).map(&num).collect::<Result<Vec<T>>>()?;
        records.push(LabeledRecord::new(row[0].to_string(), y, x, llm, gold));
    }
    Ok(Dataset::new(covariates, records))
}

pub fn read_dataset_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    read_dataset(fs::File::open(path)?)
}

fn label_cell(l: Option<Label>) -> String {
    l.map(|l| l.to_string()).unwrap_or_default()
}

pub fn write_dataset<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec![ID.to_string(), Y.to_string()];
    header.extend(ds.covariates.iter().cloned());
    header.push(LLM.into());
    header.push(GOLD.into());
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![r.id.clone(), r.y.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.push(label_cell(r.llm_label));
        row.push(label_cell(r.gold_label));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, fs::File::create(path)?)
}

pub fn read_grid_json(path: impl AsRef<Path>) -> Result<ExperimentGrid> {
    let grid: ExperimentGrid = serde_json::from_slice(&fs::read(path)?)?;
    grid.validate()?;
    Ok(grid)
}

/// Formats `v` with 6 significant digits in the style of C's `%g`.
pub fn fmt_sig6(v: f64) -> String {
    const P: i32 = 6;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryFormat {
    Csv,
    Json,
}

impl SummaryFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SummaryFormat::Csv => "csv",
            SummaryFormat::Json => "json",
        }
    }
}

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "condition",
    "row",
    "delta",
    "estimator",
    "mean_estimate",
    "p2_5",
    "p97_5",
    "covers_truth",
    "truth",
    "manifest",
];

#[derive(Serialize)]
struct SummaryJson<'a> {
    manifest: &'a str,
    summaries: Vec<BTreeMap<&'static str, serde_json::Value>>,
}

fn summary_cells(s: &ExperimentSummary) -> [String; 9] {
    [
        s.condition.key(),
        s.condition.row_name().to_string(),
        fmt_sig6(s.delta),
        s.estimator.name().to_string(),
        fmt_sig6(s.mean_estimate),
        fmt_sig6(s.p2_5),
        fmt_sig6(s.p97_5),
        s.covers_truth.to_string(),
        fmt_sig6(s.truth),
    ]
}

/// Renders summaries as CSV (fixed column order) or JSON (sorted keys),
/// numbers at 6 significant digits, each row tagged with `manifest`.
pub fn render_summary(
    summaries: &[ExperimentSummary],
    format: SummaryFormat,
    manifest: &str,
) -> Result<Vec<u8>> {
    if summaries.is_empty() {
        return Err(Error::Format("no summaries to write".into()));
    }
    match format {
        SummaryFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(SUMMARY_COLUMNS)?;
            for s in summaries {
                let cells = summary_cells(s);
                w.write_record(cells.iter().map(String::as_str).chain([manifest]))?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        SummaryFormat::Json => {
            use serde_json::Value;
            // Numbers are emitted as the 6-significant-digit decimal values.
            let num = |v: f64| -> Value {
                fmt_sig6(v)
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map_or(Value::Null, Value::Number)
            };
            let rows = summaries
                .iter()
                .map(|s| {
                    BTreeMap::from([
                        ("condition", Value::from(s.condition.key())),
                        ("row", Value::from(s.condition.row_name())),
                        ("delta", num(s.delta)),
                        ("estimator", Value::from(s.estimator.name())),
                        ("mean_estimate", num(s.mean_estimate)),
                        ("p2_5", num(s.p2_5)),
                        ("p97_5", num(s.p97_5)),
                        ("covers_truth", Value::from(s.covers_truth)),
                        ("truth", num(s.truth)),
                    ])
                })
                .collect();
            let mut out = serde_json::to_vec_pretty(&SummaryJson {
                manifest,
                summaries: rows,
            })?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn write_summary(
    summaries: &[ExperimentSummary],
    path: impl AsRef<Path>,
    format: SummaryFormat,
    manifest: &str,
) -> Result<()> {
    let bytes = render_summary(summaries, format, manifest)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a summary table written by [`write_summary`] (CSV or JSON, chosen
/// by extension). Values come back at the written precision.
pub fn read_summaries(path: impl AsRef<Path>) -> Result<(Vec<ExperimentSummary>, String)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        #[derive(Deserialize)]
        struct Row {
            condition: String,
            delta: f64,
            estimator: String,
            mean_estimate: f64,
            p2_5: f64,
            p97_5: f64,
            covers_truth: bool,
            truth: f64,
        }
        #[derive(Deserialize)]
        struct Doc {
            manifest: String,
            summaries: Vec<Row>,
        }
        let doc: Doc = serde_json::from_slice(&bytes)?;
        let rows = doc
            .summaries
            .into_iter()
            .map(|r| {
                Ok(ExperimentSummary {
                    condition: AnnotationCondition::parse_key(&r.condition)?,
                    delta: r.delta,
                    estimator: CellEstimator::parse(&r.estimator)?,
                    mean_estimate: r.mean_estimate,
                    p2_5: r.p2_5,
                    p97_5: r.p97_5,
                    covers_truth: r.covers_truth,
                    truth: r.truth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((rows, doc.manifest));
    }

    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            reason: format!("unexpected summary header {}", header.join(",")),
        });
    }
    let mut out = Vec::new();
    let mut manifest = String::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let f = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| Error::Parse {
                line,
                reason: format!("'{}' is not a number", &row[i]),
            })
        };
        out.push(ExperimentSummary {
            condition: AnnotationCondition::parse_key(&row[0])?,
            delta: f(2)?,
            estimator: CellEstimator::parse(&row[3])?,
            mean_estimate: f(4)?,
            p2_5: f(5)?,
            p97_5: f(6)?,
            covers_truth: row[7] == *"true",
            truth: f(8)?,
        });
        manifest = row[9].to_string();
    }
    Ok((out, manifest))
}

/// Provenance record written next to every simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical grid JSON.
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    pub seed_base: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn start(grid: &ExperimentGrid) -> Result<Self> {
        Ok(Self {
            config_hash: config_hash(grid)?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: unix_now(),
            finished_at: 0,
            seed_base: grid.seed_base,
            outputs: Vec::new(),
        })
    }

    pub fn finish(&mut self) {
        self.finished_at = unix_now();
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes)?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn config_hash(grid: &ExperimentGrid) -> Result<String> {
    let canonical = serde_json::to_vec(grid)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

const PALETTE: [&str; 6] = ["#F8766D", "#00BFC4", "#7CAE00", "#C77CFF", "#E69F00", "#555555"];

/// Renders an SVG with one dot at each mean, a vertical bar over each
/// empirical band, and a dashed horizontal line at the truth. Cells are
/// grouped by condition, ordered by δ within a group.
pub fn render_figure(summaries: &[ExperimentSummary], manifest: &str) -> Result<String> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Format("no summaries to plot".into()))?;
    if let Some(other) = summaries.iter().find(|s| s.estimator != first.estimator) {
        return Err(Error::Format(format!(
            "figure needs a single estimator, found {} and {}",
            first.estimator, other.estimator
        )));
    }

    let mut groups: Vec<(AnnotationCondition, Vec<&ExperimentSummary>)> = Vec::new();
    for s in summaries {
        match groups.iter_mut().find(|(c, _)| *c == s.condition) {
            Some((_, v)) => v.push(s),
            None => groups.push((s.condition, vec![s])),
        }
    }
    for (_, v) in &mut groups {
        v.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    }
    let mut truths: Vec<f64> = summaries.iter().map(|s| s.truth).collect();
    truths.sort_by(f64::total_cmp);
    truths.dedup();

    let lo = summaries
        .iter()
        .map(|s| s.p2_5)
        .chain(truths.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let hi = summaries
        .iter()
        .map(|s| s.p97_5)
        .chain(truths.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.08).max(1e-6);
    let (lo, hi) = (lo - pad, hi + pad);

    let (width, height) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 30.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let y_px = |v: f64| top + (hi - v) / (hi - lo) * plot_h;
    let slots = summaries.len() + groups.len().saturating_sub(1);
    let step = plot_w / slots as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, "<!-- manifest: {manifest} -->");
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        width / 2.0,
        first.estimator
    );
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="#000"/>"##,
        top + plot_h
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = y_px(v);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 3.0,
            fmt_sig6((v * 1000.0).round() / 1000.0)
        );
    }
    for t in &truths {
        let y = y_px(*t);
        let _ = writeln!(
            svg,
            r##"<line class="truth" x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333" stroke-dasharray="6,4"/>"##,
            left + plot_w
        );
    }

    let mut slot = 0usize;
    for (gi, (cond, cells)) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let group_start = left + step * slot as f64;
        let _ = writeln!(svg, r#"<g class="group" data-condition="{}">"#, cond.key());
        for s in cells {
            let x = left + step * (slot as f64 + 0.5);
            let _ = writeln!(
                svg,
                r#"<line class="band" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                y_px(s.p97_5),
                y_px(s.p2_5)
            );
            let _ = writeln!(
                svg,
                r#"<circle class="mean" cx="{x:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                y_px(s.mean_estimate)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
                top + plot_h + 14.0,
                fmt_sig6(s.delta)
            );
            slot += 1;
        }
        let group_end = left + step * slot as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle" fill="{color}">{}</text>"#,
            (group_start + group_end) / 2.0,
            top + plot_h + 32.0,
            cond.row_name()
        );
        let _ = writeln!(svg, "</g>");
        slot += 1;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">LLM error rate (delta)</text>"#,
        left + plot_w / 2.0,
        height - 8.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_figure(
    summaries: &[ExperimentSummary],
    path: impl AsRef<Path>,
    manifest: &str,
) -> Result<()> {
    let svg = render_figure(summaries, manifest)?;
    fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (-0.5416993, "-0.541699"),
            (1.2922412, "1.29224"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (0.144460800, "0.144461"),
            (999999.5, "1e+06"),
            (-2.5, "-2.5"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_sig6(v), s, "{v}");
        }
    }

    #[test]
    fn alphabet_detection() {
        assert_eq!(parse_label("Yes").unwrap(), (Label::ONE, Alphabet::YesNo));
        assert_eq!(parse_label(" 0 ").unwrap(), (Label::ZERO, Alphabet::Digits));
        assert!(parse_label("2").is_none());
    }
}
