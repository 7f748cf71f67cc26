//! Report schema and its JSON-lines, CSV and SVG renderings.
//!
//! A JSON report is two lines: the results payload, then a metadata object
//! holding everything that may differ between identical runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed CSV column order of the results table.
pub const RESULT_COLUMNS: [&str; 7] = ["id", "lhs", "lhs_se", "rhs", "rhs_se", "margin", "pass"];

/// Non-finite numbers are stored as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: String,
    pub lhs: Option<f64>,
    pub lhs_se: Option<f64>,
    pub rhs: Option<f64>,
    pub rhs_se: Option<f64>,
    pub margin: Option<f64>,
    pub pass: bool,
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ResultRow {
    /// A value with no comparison side.
    pub fn value(id: impl Into<String>, value: f64, se: f64) -> Self {
        ResultRow {
            id: id.into(),
            lhs: finite(value),
            lhs_se: finite(se),
            rhs: None,
            rhs_se: None,
            margin: None,
            pass: value.is_finite(),
        }
    }

    /// `lhs ≤ rhs` style check with an explicit margin and verdict.
    pub fn check(id: impl Into<String>, lhs: (f64, f64), rhs: (f64, f64), margin: f64, pass: bool) -> Self {
        ResultRow {
            id: id.into(),
            lhs: finite(lhs.0),
            lhs_se: finite(lhs.1),
            rhs: finite(rhs.0),
            rhs_se: finite(rhs.1),
            margin: finite(margin),
            pass,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Plot the remaining columns against the first one in SVG output.
    pub plot: bool,
    pub log_x: bool,
    pub log_y: bool,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Table::default()
        }
    }

    pub fn plotted(mut self, log_x: bool, log_y: bool) -> Self {
        self.plot = true;
        self.log_x = log_x;
        self.log_y = log_y;
        self
    }

    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().copied().map(finite).collect());
    }

    pub fn push_opt(&mut self, row: Vec<Option<f64>>) {
        self.rows.push(row.into_iter().map(|v| v.and_then(finite)).collect());
    }
}

/// The deterministic part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub results: Vec<ResultRow>,
    pub tables: BTreeMap<String, Table>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub workers: usize,
    pub version: String,
}

impl Metadata {
    pub fn now(workers: usize) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Metadata {
            timestamp,
            workers,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub payload: Payload,
    pub metadata: Metadata,
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Output(format!("serialisation failed: {e}"))
}

impl Report {
    pub fn passed(&self) -> bool {
        self.payload.results.iter().all(|r| r.pass)
    }

    /// The payload line that identical runs reproduce byte for byte.
    pub fn payload_json(&self) -> Result<String, CliError> {
        serde_json::to_string(&self.payload).map_err(json_err)
    }

    pub fn to_json_lines(&self) -> Result<String, CliError> {
        let meta = serde_json::to_string(&self.metadata).map_err(json_err)?;
        Ok(format!("{}\n{meta}\n", self.payload_json()?))
    }

    pub fn parse_json_lines(text: &str) -> Result<Report, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |what: &str| CliError::Config(format!("malformed report: {what}"));
        let payload = serde_json::from_str(lines.next().ok_or_else(|| bad("missing payload line"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let metadata = serde_json::from_str(lines.next().ok_or_else(|| bad("missing metadata line"))?)
            .map_err(|e| bad(&e.to_string()))?;
        Ok(Report { payload, metadata })
    }

    pub fn results_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(RESULT_COLUMNS).map_err(csv_err)?;
        for r in &self.payload.results {
            let cell = |v: Option<f64>| v.map(number).unwrap_or_default();
            w.write_record([
                r.id.clone(),
                cell(r.lhs),
                cell(r.lhs_se),
                cell(r.rhs),
                cell(r.rhs_se),
                cell(r.margin),
                r.pass.to_string(),
            ])
            .map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn svg(&self) -> String {
        let plots: Vec<(&String, &Table)> = self.payload.tables.iter().filter(|(_, t)| t.plot).collect();
        render_svg(&self.payload.command, &plots)
    }
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
fn number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

pub fn table_csv(table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.map(number).unwrap_or_default()))
            .map_err(csv_err)?;
    }
    into_string(w)
}

/// Reads a results CSV written by [`Report::results_csv`].
pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |m: String| CliError::Config(format!("malformed results csv: {m}"));
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let opt = |s: &str| -> Result<Option<f64>, CliError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("bad number {s:?}")))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        out.push(ResultRow {
            id: rec[0].to_string(),
            lhs: opt(&rec[1])?,
            lhs_se: opt(&rec[2])?,
            rhs: opt(&rec[3])?,
            rhs_se: opt(&rec[4])?,
            margin: opt(&rec[5])?,
            pass: rec[6].parse().map_err(|_| bad(format!("bad flag {:?}", &rec[6])))?,
        });
    }
    Ok(out)
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 360.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn render_svg(title: &str, plots: &[(&String, &Table)]) -> String {
    let height = PANEL_H * plots.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    for (i, (name, table)) in plots.iter().enumerate() {
        panel(&mut s, name, table, i as f64 * PANEL_H);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel(s: &mut String, name: &str, table: &Table, top: f64) {
    let tx = |v: f64| if table.log_x { v.log10() } else { v };
    let ty = |v: f64| if table.log_y { v.log10() } else { v };
    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
    let mut series: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for c in 1..table.columns.len() {
        let pts: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter_map(|row| match (row.first().copied().flatten(), row.get(c).copied().flatten()) {
                (Some(x), Some(y)) if usable(x, table.log_x) && usable(y, table.log_y) => Some((tx(x), ty(y))),
                _ => None,
            })
            .collect();
        if !pts.is_empty() {
            series.push((c, pts));
        }
    }
    let _ = writeln!(s, r#"<g transform="translate(0,{top})">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, PANEL_W / 2.0, escape(name));
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if series.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text></g>"#, PANEL_W / 2.0, PANEL_H / 2.0);
        return;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let (w, h) = (PANEL_W - 2.0 * PAD, PANEL_H - 2.0 * PAD);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| PAD + (1.0 - (y - y0) / (y1 - y0)) * h;
    let _ = writeln!(s, r##"<rect x="{PAD}" y="{PAD}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##);
    let label = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for (v, anchor, x, y) in [
        (x0, "start", PAD, PAD + h + 16.0),
        (x1, "end", PAD + w, PAD + h + 16.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, label(v, table.log_x));
    }
    for (v, y) in [(y0, PAD + h), (y1, PAD + 10.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, PAD - 4.0, label(v, table.log_y));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        PANEL_W / 2.0,
        PANEL_H - 12.0,
        escape(&table.columns[0])
    );
    for (i, (c, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            PAD + 8.0,
            PAD + 16.0 + 14.0 * i as f64,
            escape(&table.columns[*c])
        );
    }
    s.push_str("</g>\n");
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| CliError::Output(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.flush().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// `report.csv` → `report.<table>.csv`.
fn sibling(path: &Path, table: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{table}.{ext}"))
}

/// Renders `report`, writing to `out` (plus per-table CSV siblings) or returning the text for stdout.
pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<Option<String>, CliError> {
    let main = match format {
        Format::Json => report.to_json_lines()?,
        Format::Csv => report.results_csv()?,
        Format::Svg => report.svg(),
    };
    let Some(path) = out else {
        return Ok(Some(main));
    };
    // render everything before touching the filesystem
    let mut files = vec![(path.to_path_buf(), main)];
    if format == Format::Csv {
        for (name, table) in &report.payload.tables {
            files.push((sibling(path, name, "csv"), table_csv(table)?));
        }
    }
    for (p, text) in &files {
        write_atomic(p, text)?;
    }
    Ok(None)
}
