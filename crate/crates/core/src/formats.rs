//! Hub submission file schemas: parsing, validation, and serialization.
//!
//! Three comma-separated submission schemas share the leading columns
//! `location,target,type,unit`; rows with the same (location, target, unit)
//! triple form one forecast:
//!
//! * bin: `...,bin,value` — `bin` is either an interval literal `[a,b)` or
//!   a numeric left edge (the final bin then reuses the preceding width);
//!   `value` is the bin probability;
//! * quantile: `...,quantile,value` — nominal level and quantile value;
//! * mixture: `...,family,param1,param2[,param3],weight[,lowerlim,upperlim]`
//!   — one component distribution per row, `NA`/empty cells meaning absent
//!   optional parameters.
//!
//! Truth files carry `location,target,unit,value` with one observed value
//! per key. Serialization renders reals with enough digits to round-trip
//! exactly and always writes bins as interval literals, so parse ∘ serialize
//! is the identity on valid tables.
//!
//! Structural problems (I/O, missing columns) fail the parse outright;
//! semantic problems are collected per row with their (row, column, key)
//! context so a validator can report all of them at once.

use crate::distributions::{Component, Family, Mixture};
use crate::fitting::{fit_bins_sweep, fit_quantiles_sweep, FitConfig, FitReport};
use crate::representations::{BinForecast, QuantileForecast};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("missing column `{column}` for {kind} schema")]
    MissingColumn { column: String, kind: ForecastKind },
    #[error("{count} invalid row(s):\n{summary}")]
    Invalid { count: usize, summary: String },
    #[error("table kind is {got}, expected {expected}")]
    WrongKind {
        got: ForecastKind,
        expected: ForecastKind,
    },
    #[error(transparent)]
    Fit(#[from] crate::fitting::FitError),
}

impl FormatError {
    /// Structural errors mean the file could not be interpreted at all;
    /// the rest are semantic validation failures.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            FormatError::Io { .. } | FormatError::Csv { .. } | FormatError::MissingColumn { .. }
        )
    }
}

/// One semantic problem found while parsing, with enough context to locate
/// the offending row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub column: String,
    pub key: Option<ForecastKey>,
    pub message: String,
}

impl fmt::Display for RowIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(
                f,
                "row {} column `{}` ({}): {}",
                self.row, self.column, k, self.message
            ),
            None => write!(f, "row {} column `{}`: {}", self.row, self.column, self.message),
        }
    }
}

/// The (location, target, unit) triple identifying one forecast inside a
/// submission.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForecastKey {
    pub location: String,
    pub target: String,
    pub unit: String,
}

impl ForecastKey {
    pub fn new(
        location: impl Into<String>,
        target: impl Into<String>,
        unit: impl Into<String>,
    ) -> Self {
        ForecastKey {
            location: location.into(),
            target: target.into(),
            unit: unit.into(),
        }
    }
}

impl fmt::Display for ForecastKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.location, self.target, self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastKind {
    Bin,
    Quantile,
    Mixture,
}

impl ForecastKind {
    /// The value carried by the `type` column for this schema.
    pub fn type_value(&self) -> &'static str {
        match self {
            ForecastKind::Bin => "bin",
            ForecastKind::Quantile => "quantile",
            ForecastKind::Mixture => "dist",
        }
    }

    pub fn parse(s: &str) -> Option<ForecastKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bin" => Some(ForecastKind::Bin),
            "quantile" => Some(ForecastKind::Quantile),
            "mixture" | "dist" => Some(ForecastKind::Mixture),
            _ => None,
        }
    }
}

impl fmt::Display for ForecastKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ForecastKind::Bin => "bin",
            ForecastKind::Quantile => "quantile",
            ForecastKind::Mixture => "mixture",
        };
        f.write_str(s)
    }
}

/// One forecast in a submission.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastData {
    Bin(BinForecast),
    Quantile(QuantileForecast),
    Mixture(Mixture),
}

/// A parsed submission: every valid forecast keyed by its
/// (location, target, unit) triple. Iteration order is sorted by key.
///
/// Equality compares kind and forecasts only, not provenance.
#[derive(Debug, Clone)]
pub struct SubmissionTable {
    pub kind: ForecastKind,
    entries: BTreeMap<ForecastKey, ForecastData>,
    /// Where the table came from, when parsed from a file.
    pub source: Option<PathBuf>,
    /// 1-based data row span of each forecast in the source file.
    pub row_spans: BTreeMap<ForecastKey, (usize, usize)>,
}

impl PartialEq for SubmissionTable {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.entries == other.entries
    }
}

impl SubmissionTable {
    pub fn new(kind: ForecastKind) -> Self {
        SubmissionTable {
            kind,
            entries: BTreeMap::new(),
            source: None,
            row_spans: BTreeMap::new(),
        }
    }

    /// Inserts a forecast; its variant must match the table kind.
    pub fn insert(&mut self, key: ForecastKey, data: ForecastData) -> Result<(), FormatError> {
        let got = match &data {
            ForecastData::Bin(_) => ForecastKind::Bin,
            ForecastData::Quantile(_) => ForecastKind::Quantile,
            ForecastData::Mixture(_) => ForecastKind::Mixture,
        };
        if got != self.kind {
            return Err(FormatError::WrongKind {
                got,
                expected: self.kind,
            });
        }
        self.entries.insert(key, data);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &ForecastKey) -> Option<&ForecastData> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &ForecastKey> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ForecastKey, &ForecastData)> {
        self.entries.iter()
    }
}

/// Result of parsing a submission file: the table of valid forecasts,
/// semantic issues for the invalid ones (excluded from the table), and
/// non-fatal warnings such as skipped point rows.
#[derive(Debug)]
pub struct Parsed {
    pub table: SubmissionTable,
    pub issues: Vec<RowIssue>,
    pub warnings: Vec<String>,
}

impl Parsed {
    /// The table if every row validated, otherwise an error summarizing all
    /// collected issues.
    pub fn into_valid(self) -> Result<SubmissionTable, FormatError> {
        if self.issues.is_empty() {
            Ok(self.table)
        } else {
            let summary = self
                .issues
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join("\n");
            Err(FormatError::Invalid {
                count: self.issues.len(),
                summary,
            })
        }
    }
}

/// Observed outcomes keyed by forecast key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthTable {
    entries: BTreeMap<ForecastKey, f64>,
}

impl TruthTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: ForecastKey, value: f64) {
        self.entries.insert(key, value);
    }

    pub fn get(&self, key: &ForecastKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// --- parsing -------------------------------------------------------------

struct Columns {
    idx: BTreeMap<String, usize>,
}

impl Columns {
    fn from_headers(headers: &csv::StringRecord) -> Self {
        let idx = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
            .collect();
        Columns { idx }
    }

    fn require(&self, name: &str, kind: ForecastKind) -> Result<usize, FormatError> {
        self.idx
            .get(name)
            .copied()
            .ok_or_else(|| FormatError::MissingColumn {
                column: name.to_string(),
                kind,
            })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.idx.get(name).copied()
    }
}

fn cell(record: &csv::StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("").trim()
}

/// `NA`, `NaN` and empty cells denote an absent optional value.
fn parse_optional_real(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("not a number: `{s}`"))
}

fn parse_real(s: &str) -> Result<f64, String> {
    parse_optional_real(s)?.ok_or_else(|| "value is missing".to_string())
}

/// A raw row shared by all schemas, before grouping.
struct RawRow {
    row: usize,
    key: ForecastKey,
    fields: Vec<String>,
}

/// The `bin` column accepts `[a,b)` interval literals or bare left edges.
#[derive(Debug, Clone, Copy, PartialEq)]
enum BinSpec {
    Interval(f64, f64),
    LeftEdge(f64),
}

fn parse_bin_spec(s: &str) -> Result<BinSpec, String> {
    let t = s.trim();
    if let Some(inner) = t.strip_prefix('[').and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("malformed bin interval `{t}`"));
        }
        let a = parse_real(parts[0].trim())?;
        let b = parse_real(parts[1].trim())?;
        if !(a < b) {
            return Err(format!("bin interval `{t}` is empty"));
        }
        Ok(BinSpec::Interval(a, b))
    } else {
        Ok(BinSpec::LeftEdge(parse_real(t)?))
    }
}

/// Parses a submission file of the given kind. Structural failures (I/O,
/// CSV, missing columns) are errors; semantic problems come back as
/// [`RowIssue`]s with the offending forecasts left out of the table.
pub fn parse_submission(path: &Path, kind: ForecastKind) -> Result<Parsed, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut parsed = parse_submission_str(&text, kind)?;
    parsed.table.source = Some(path.to_path_buf());
    Ok(parsed)
}

/// [`parse_submission`] over in-memory text.
pub fn parse_submission_str(text: &str, kind: ForecastKind) -> Result<Parsed, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|source| FormatError::Csv {
            path: PathBuf::new(),
            source,
        })?
        .clone();
    let cols = Columns::from_headers(&headers);

    let loc = cols.require("location", kind)?;
    let target = cols.require("target", kind)?;
    let typ = cols.require("type", kind)?;
    let unit = cols.require("unit", kind)?;
    let field_cols: Vec<(String, Option<usize>)> = match kind {
        ForecastKind::Bin => vec![
            ("bin".into(), Some(cols.require("bin", kind)?)),
            ("value".into(), Some(cols.require("value", kind)?)),
        ],
        ForecastKind::Quantile => vec![
            ("quantile".into(), Some(cols.require("quantile", kind)?)),
            ("value".into(), Some(cols.require("value", kind)?)),
        ],
        ForecastKind::Mixture => vec![
            ("family".into(), Some(cols.require("family", kind)?)),
            ("param1".into(), Some(cols.require("param1", kind)?)),
            ("param2".into(), Some(cols.require("param2", kind)?)),
            ("param3".into(), cols.optional("param3")),
            ("weight".into(), Some(cols.require("weight", kind)?)),
            ("lowerlim".into(), cols.optional("lowerlim")),
            ("upperlim".into(), cols.optional("upperlim")),
        ],
    };

    let mut issues: Vec<RowIssue> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut groups: BTreeMap<ForecastKey, Vec<RawRow>> = BTreeMap::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| FormatError::Csv {
            path: PathBuf::new(),
            source,
        })?;
        let key = ForecastKey::new(cell(&record, loc), cell(&record, target), cell(&record, unit));
        if key.location.is_empty() || key.target.is_empty() || key.unit.is_empty() {
            issues.push(RowIssue {
                row,
                column: "location/target/unit".into(),
                key: None,
                message: "key fields must be nonempty".into(),
            });
            continue;
        }
        let type_cell = cell(&record, typ);
        if type_cell.eq_ignore_ascii_case("point") {
            warnings.push(format!("row {row}: point forecast row ignored"));
            continue;
        }
        if !type_cell.eq_ignore_ascii_case(kind.type_value()) {
            issues.push(RowIssue {
                row,
                column: "type".into(),
                key: Some(key),
                message: format!(
                    "expected type `{}`, got `{type_cell}`",
                    kind.type_value()
                ),
            });
            continue;
        }
        let fields = field_cols
            .iter()
            .map(|(_, idx)| idx.map(|i| cell(&record, i).to_string()).unwrap_or_default())
            .collect();
        groups.entry(key.clone()).or_default().push(RawRow { row, key, fields });
    }

    let mut table = SubmissionTable::new(kind);
    for (key, rows) in groups {
        let span = (
            rows.iter().map(|r| r.row).min().unwrap_or(0),
            rows.iter().map(|r| r.row).max().unwrap_or(0),
        );
        match build_forecast(kind, &rows, &mut issues) {
            Some(data) => {
                table.row_spans.insert(key.clone(), span);
                table.insert(key, data)?;
            }
            None => { /* issues already recorded */ }
        }
    }
    Ok(Parsed {
        table,
        issues,
        warnings,
    })
}

fn issue(issues: &mut Vec<RowIssue>, row: usize, column: &str, key: &ForecastKey, message: String) {
    issues.push(RowIssue {
        row,
        column: column.to_string(),
        key: Some(key.clone()),
        message,
    });
}

fn build_forecast(
    kind: ForecastKind,
    rows: &[RawRow],
    issues: &mut Vec<RowIssue>,
) -> Option<ForecastData> {
    match kind {
        ForecastKind::Bin => build_bin(rows, issues).map(ForecastData::Bin),
        ForecastKind::Quantile => build_quantile(rows, issues).map(ForecastData::Quantile),
        ForecastKind::Mixture => build_mixture(rows, issues).map(ForecastData::Mixture),
    }
}

fn build_bin(rows: &[RawRow], issues: &mut Vec<RowIssue>) -> Option<BinForecast> {
    let key = &rows[0].key;
    let mut parsed: Vec<(usize, BinSpec, f64)> = Vec::with_capacity(rows.len());
    for r in rows {
        let spec = match parse_bin_spec(&r.fields[0]) {
            Ok(s) => s,
            Err(e) => {
                issue(issues, r.row, "bin", key, e);
                return None;
            }
        };
        let value = match parse_real(&r.fields[1]) {
            Ok(v) => v,
            Err(e) => {
                issue(issues, r.row, "value", key, e);
                return None;
            }
        };
        parsed.push((r.row, spec, value));
    }
    parsed.sort_by(|a, b| {
        let ka = match a.1 {
            BinSpec::Interval(lo, _) | BinSpec::LeftEdge(lo) => lo,
        };
        let kb = match b.1 {
            BinSpec::Interval(lo, _) | BinSpec::LeftEdge(lo) => lo,
        };
        ka.partial_cmp(&kb).unwrap()
    });

    let all_intervals = parsed.iter().all(|(_, s, _)| matches!(s, BinSpec::Interval(..)));
    let all_edges = parsed.iter().all(|(_, s, _)| matches!(s, BinSpec::LeftEdge(..)));
    if !all_intervals && !all_edges {
        issue(
            issues,
            parsed[0].0,
            "bin",
            key,
            "mixed interval and left-edge bin labels in one forecast".into(),
        );
        return None;
    }

    let mut edges: Vec<f64> = Vec::with_capacity(parsed.len() + 1);
    let probs: Vec<f64> = parsed.iter().map(|&(_, _, v)| v).collect();
    if all_intervals {
        for (i, &(row, spec, _)) in parsed.iter().enumerate() {
            let BinSpec::Interval(lo, hi) = spec else { unreachable!() };
            if i == 0 {
                edges.push(lo);
            } else {
                let prev_hi = edges[edges.len() - 1];
                let tol = 1e-9 * prev_hi.abs().max(1.0);
                if (lo - prev_hi).abs() > tol {
                    issue(
                        issues,
                        row,
                        "bin",
                        key,
                        format!("bins not contiguous: previous ends at {prev_hi}, next starts at {lo}"),
                    );
                    return None;
                }
            }
            edges.push(hi);
        }
    } else {
        if parsed.len() < 2 {
            issue(
                issues,
                parsed[0].0,
                "bin",
                key,
                "single bare-edge bin: width is undefined, use an `[a,b)` interval".into(),
            );
            return None;
        }
        for &(_, spec, _) in &parsed {
            let BinSpec::LeftEdge(lo) = spec else { unreachable!() };
            edges.push(lo);
        }
        // the final bin reuses the preceding width
        let last_width = edges[edges.len() - 1] - edges[edges.len() - 2];
        edges.push(edges[edges.len() - 1] + last_width);
    }

    match BinForecast::new(edges, probs) {
        Ok(f) => Some(f),
        Err(e) => {
            issue(issues, parsed[0].0, "bin/value", key, e.to_string());
            None
        }
    }
}

fn build_quantile(rows: &[RawRow], issues: &mut Vec<RowIssue>) -> Option<QuantileForecast> {
    let key = &rows[0].key;
    let mut parsed: Vec<(usize, f64, f64)> = Vec::with_capacity(rows.len());
    for r in rows {
        let level = match parse_real(&r.fields[0]) {
            Ok(v) => v,
            Err(e) => {
                issue(issues, r.row, "quantile", key, e);
                return None;
            }
        };
        let value = match parse_real(&r.fields[1]) {
            Ok(v) => v,
            Err(e) => {
                issue(issues, r.row, "value", key, e);
                return None;
            }
        };
        parsed.push((r.row, level, value));
    }
    parsed.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    for w in parsed.windows(2) {
        if w[0].1 == w[1].1 {
            issue(
                issues,
                w[1].0,
                "quantile",
                key,
                format!("duplicate quantile level {}", w[1].1),
            );
            return None;
        }
        if w[1].2 < w[0].2 {
            issue(
                issues,
                w[1].0,
                "value",
                key,
                format!(
                    "quantile values must be nondecreasing: {} at level {} after {} at level {}",
                    w[1].2, w[1].1, w[0].2, w[0].1
                ),
            );
            return None;
        }
    }
    let levels: Vec<f64> = parsed.iter().map(|&(_, l, _)| l).collect();
    let values: Vec<f64> = parsed.iter().map(|&(_, _, v)| v).collect();
    match QuantileForecast::new(levels, values) {
        Ok(q) => Some(q),
        Err(e) => {
            issue(issues, parsed[0].0, "quantile/value", key, e.to_string());
            None
        }
    }
}

fn build_mixture(rows: &[RawRow], issues: &mut Vec<RowIssue>) -> Option<Mixture> {
    let key = &rows[0].key;
    let mut components = Vec::with_capacity(rows.len());
    let mut weight_sum = 0.0;
    for r in rows {
        let family = match Family::parse(&r.fields[0]) {
            Ok(f) => f,
            Err(e) => {
                issue(issues, r.row, "family", key, e.to_string());
                return None;
            }
        };
        let mut params: Vec<f64> = Vec::with_capacity(3);
        for (slot, col) in ["param1", "param2", "param3"].iter().enumerate() {
            match parse_optional_real(&r.fields[1 + slot]) {
                Ok(Some(v)) => params.push(v),
                Ok(None) => {}
                Err(e) => {
                    issue(issues, r.row, col, key, e);
                    return None;
                }
            }
        }
        let weight = match parse_real(&r.fields[4]) {
            Ok(v) => v,
            Err(e) => {
                issue(issues, r.row, "weight", key, e);
                return None;
            }
        };
        let lower = match parse_optional_real(&r.fields[5]) {
            Ok(v) => v,
            Err(e) => {
                issue(issues, r.row, "lowerlim", key, e);
                return None;
            }
        };
        let upper = match parse_optional_real(&r.fields[6]) {
            Ok(v) => v,
            Err(e) => {
                issue(issues, r.row, "upperlim", key, e);
                return None;
            }
        };
        weight_sum += weight;
        match Component::new_truncated(family, &params, lower, upper, weight) {
            Ok(c) => components.push(c),
            Err(e) => {
                issue(issues, r.row, "family/params", key, e.to_string());
                return None;
            }
        }
    }
    if (weight_sum - 1.0).abs() > 1e-6 {
        issue(
            issues,
            rows[0].row,
            "weight",
            key,
            format!("component weights sum to {weight_sum}, expected 1"),
        );
        return None;
    }
    // parsed text weights carry rounding; normalize the residue away
    match Mixture::new_normalized(components) {
        Ok(m) => Some(m),
        Err(e) => {
            issue(issues, rows[0].row, "weight", key, e.to_string());
            None
        }
    }
}

/// Parses a truth file with columns `location,target,unit,value` and one
/// value per key.
pub fn parse_truth(path: &Path) -> Result<TruthTable, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_truth_str(&text)
}

pub fn parse_truth_str(text: &str) -> Result<TruthTable, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|source| FormatError::Csv {
            path: PathBuf::new(),
            source,
        })?
        .clone();
    let cols = Columns::from_headers(&headers);
    let kind = ForecastKind::Bin; // only for error labels
    let loc = cols.require("location", kind)?;
    let target = cols.require("target", kind)?;
    let unit = cols.require("unit", kind)?;
    let value = cols.require("value", kind)?;

    let mut issues: Vec<RowIssue> = Vec::new();
    let mut truth = TruthTable::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| FormatError::Csv {
            path: PathBuf::new(),
            source,
        })?;
        let key = ForecastKey::new(cell(&record, loc), cell(&record, target), cell(&record, unit));
        match parse_real(cell(&record, value)) {
            Ok(v) if truth.get(&key).is_none() => truth.insert(key, v),
            Ok(_) => issue(&mut issues, row, "location/target/unit", &key, "duplicate truth key".into()),
            Err(e) => issue(&mut issues, row, "value", &key, e),
        }
    }
    if issues.is_empty() {
        Ok(truth)
    } else {
        Err(FormatError::Invalid {
            count: issues.len(),
            summary: issues
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join("\n"),
        })
    }
}

// --- serialization -------------------------------------------------------

/// Shortest decimal rendering that parses back to the identical `f64`.
fn render_real(v: f64) -> String {
    format!("{v}")
}

fn render_optional(v: Option<f64>) -> String {
    v.map(render_real).unwrap_or_else(|| "NA".to_string())
}

/// Serializes a table to CSV text in the canonical column order for its
/// schema. Mixture tables include the `param3` column only when some
/// component uses it, and the truncation columns only when some component
/// is truncated; bins are always written as `[a,b)` interval literals.
pub fn serialize_submission_str(t: &SubmissionTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    match t.kind {
        ForecastKind::Bin => {
            w.write_record(["location", "target", "type", "unit", "bin", "value"])
                .expect("in-memory write");
            for (key, data) in t.iter() {
                let ForecastData::Bin(f) = data else { unreachable!() };
                for (i, &p) in f.probs().iter().enumerate() {
                    w.write_record([
                        key.location.as_str(),
                        key.target.as_str(),
                        "bin",
                        key.unit.as_str(),
                        &format!(
                            "[{},{})",
                            render_real(f.edges()[i]),
                            render_real(f.edges()[i + 1])
                        ),
                        &render_real(p),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        ForecastKind::Quantile => {
            w.write_record(["location", "target", "type", "unit", "quantile", "value"])
                .expect("in-memory write");
            for (key, data) in t.iter() {
                let ForecastData::Quantile(q) = data else { unreachable!() };
                for (&l, &v) in q.levels().iter().zip(q.values()) {
                    w.write_record([
                        key.location.as_str(),
                        key.target.as_str(),
                        "quantile",
                        key.unit.as_str(),
                        &render_real(l),
                        &render_real(v),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        ForecastKind::Mixture => {
            let any_param3 = t.iter().any(|(_, d)| {
                let ForecastData::Mixture(m) = d else { unreachable!() };
                m.components().iter().any(|c| c.params().len() > 2)
            });
            let any_trunc = t.iter().any(|(_, d)| {
                let ForecastData::Mixture(m) = d else { unreachable!() };
                m.components()
                    .iter()
                    .any(|c| c.lower().is_some() || c.upper().is_some())
            });
            let mut header = vec!["location", "target", "type", "unit", "family", "param1", "param2"];
            if any_param3 {
                header.push("param3");
            }
            header.push("weight");
            if any_trunc {
                header.push("lowerlim");
                header.push("upperlim");
            }
            w.write_record(&header).expect("in-memory write");
            for (key, data) in t.iter() {
                let ForecastData::Mixture(m) = data else { unreachable!() };
                for c in m.components() {
                    let p = c.params();
                    let mut record = vec![
                        key.location.clone(),
                        key.target.clone(),
                        "dist".to_string(),
                        key.unit.clone(),
                        c.family().to_string(),
                        render_real(p[0]),
                        render_optional(p.get(1).copied()),
                    ];
                    if any_param3 {
                        record.push(render_optional(p.get(2).copied()));
                    }
                    record.push(render_real(c.weight()));
                    if any_trunc {
                        record.push(render_optional(c.lower()));
                        record.push(render_optional(c.upper()));
                    }
                    w.write_record(&record).expect("in-memory write");
                }
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 output")
}

/// Writes a submission table to a file. See [`serialize_submission_str`].
pub fn serialize_submission(t: &SubmissionTable, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, serialize_submission_str(t)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Serializes a truth table (`location,target,unit,value`).
pub fn serialize_truth_str(t: &TruthTable) -> String {
    let mut out = String::from("location,target,unit,value\n");
    for (key, value) in &t.entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            key.location,
            key.target,
            key.unit,
            render_real(*value)
        ));
    }
    out
}

// --- conversion ----------------------------------------------------------

/// Per-key outcome of [`convert_to_mixture`].
#[derive(Debug)]
pub struct ConvertRecord {
    pub key: ForecastKey,
    /// Final objective (KLD for bins, SS for quantiles) when the fit ran.
    pub objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

/// Replaces every bin or quantile forecast with a fitted normal mixture.
///
/// Each fit is warm-started through component counts `1..=C`. Failures and
/// non-converged fits are reported per key; failures are excluded from the
/// output table while non-converged fits are kept.
pub fn convert_to_mixture(
    t: &SubmissionTable,
    cfg: &FitConfig,
) -> Result<(SubmissionTable, Vec<ConvertRecord>), FormatError> {
    if t.kind == ForecastKind::Mixture {
        return Err(FormatError::WrongKind {
            got: t.kind,
            expected: ForecastKind::Bin,
        });
    }
    let mut out = SubmissionTable::new(ForecastKind::Mixture);
    let mut records = Vec::with_capacity(t.len());
    for (key, data) in t.iter() {
        let result: Result<Vec<FitReport>, crate::fitting::FitError> = match data {
            ForecastData::Bin(f) => fit_bins_sweep(f, cfg),
            ForecastData::Quantile(q) => fit_quantiles_sweep(q, cfg),
            ForecastData::Mixture(_) => unreachable!("kind checked above"),
        };
        match result {
            Ok(reports) => {
                let last = reports.last().expect("components >= 1");
                records.push(ConvertRecord {
                    key: key.clone(),
                    objective: Some(last.final_objective()),
                    iterations: last.iterations,
                    converged: last.converged,
                    error: None,
                });
                out.insert(key.clone(), ForecastData::Mixture(last.fitted.clone()))?;
            }
            Err(e) => records.push(ConvertRecord {
                key: key.clone(),
                objective: None,
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok((out, records))
}
