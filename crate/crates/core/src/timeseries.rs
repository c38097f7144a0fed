//! Ingestion and preprocessing of raw multivariate series.
//!
//! Raw data arrive as CSV with one timestamp column and one column per node.
//! Missing cells become gaps (absent day indices), which can be filled by a
//! natural cubic spline before the series are turned into log returns and
//! stacked into a zero-mean [`TimeSeriesSet`].

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One node's samples on an integer day grid. Missing days are gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub node_id: String,
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl RawSeries {
    pub fn new(node_id: impl Into<String>, timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        let node_id = node_id.into();
        if timestamps.len() != values.len() {
            return Err(Error::Dimension(format!(
                "series `{node_id}` has {} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(Error::Dimension(format!(
                "series `{node_id}` needs at least 2 samples, got {}",
                timestamps.len()
            )));
        }
        if let Some(k) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Domain {
                index: k + 1,
                message: format!("timestamps of `{node_id}` are not strictly increasing"),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                index: k,
                message: format!("non-finite value in `{node_id}`"),
            });
        }
        Ok(Self {
            node_id,
            timestamps,
            values,
        })
    }

    /// A gap-free series on `0..values.len()`.
    pub fn contiguous(node_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let timestamps = (0..values.len() as i64).collect();
        Self::new(node_id, timestamps, values)
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Day indices between the first and last timestamp that carry no sample.
    pub fn gaps(&self) -> Vec<i64> {
        let mut out = Vec::new();
        for w in self.timestamps.windows(2) {
            out.extend(w[0] + 1..w[1]);
        }
        out
    }

    pub fn has_gaps(&self) -> bool {
        self.timestamps.windows(2).any(|w| w[1] != w[0] + 1)
    }
}

/// Which column holds the timestamps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimestampColumn {
    /// Column at this zero-based position.
    Index(usize),
    /// Column with this header name.
    Named(String),
    /// No timestamp column; the row number is the day index.
    RowNumber,
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub delimiter: u8,
    pub timestamp: TimestampColumn,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            timestamp: TimestampColumn::Index(0),
        }
    }
}

fn parse_timestamp(cell: &str) -> Option<i64> {
    let cell = cell.trim();
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let date = NaiveDate::parse_from_str(cell, "%Y-%m-%d").ok()?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)?;
    Some((date - epoch).num_days())
}

fn parse_value(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads one [`RawSeries`] per value column. Empty, `NaN` or unparseable
/// cells are recorded as gaps. ISO dates (`YYYY-MM-DD`) are mapped to days
/// since 1970-01-01; integer timestamps pass through unchanged.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<RawSeries>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

/// [`load_csv`] over in-memory text.
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Vec<RawSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            column: "<header>".into(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut seen = HashSet::new();
    for (k, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::Parse {
                column: format!("#{k}"),
                message: "empty column name".into(),
            });
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::Parse {
                column: h.clone(),
                message: "duplicate column name".into(),
            });
        }
    }

    let ts_col = match &schema.timestamp {
        TimestampColumn::Index(k) => {
            if *k >= headers.len() {
                return Err(Error::Parse {
                    column: format!("#{k}"),
                    message: format!("timestamp column index out of range ({} columns)", headers.len()),
                });
            }
            Some(*k)
        }
        TimestampColumn::Named(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse {
                column: name.clone(),
                message: "timestamp column not found in header".into(),
            }
        })?),
        TimestampColumn::RowNumber => None,
    };
    let value_cols: Vec<usize> = (0..headers.len()).filter(|&k| Some(k) != ts_col).collect();
    if value_cols.is_empty() {
        return Err(Error::Dimension("CSV has no value columns".into()));
    }

    let mut stamps: Vec<Vec<i64>> = vec![Vec::new(); value_cols.len()];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
    let mut last_ts: Option<i64> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            column: "<row>".into(),
            message: format!("row {}: {e}", row + 1),
        })?;
        let ts = match ts_col {
            Some(k) => parse_timestamp(&record[k]).ok_or_else(|| Error::Parse {
                column: headers[k].clone(),
                message: format!("row {}: unparseable timestamp `{}`", row + 1, &record[k]),
            })?,
            None => row as i64,
        };
        if let Some(prev) = last_ts {
            if ts <= prev {
                return Err(Error::Parse {
                    column: ts_col.map_or("<row>".to_string(), |k| headers[k].clone()),
                    message: format!("row {}: timestamps must be strictly increasing", row + 1),
                });
            }
        }
        last_ts = Some(ts);
        for (s, &k) in value_cols.iter().enumerate() {
            if let Some(v) = parse_value(&record[k]) {
                stamps[s].push(ts);
                values[s].push(v);
            }
        }
    }

    value_cols
        .iter()
        .zip(stamps.into_iter().zip(values))
        .map(|(&k, (t, v))| RawSeries::new(headers[k].clone(), t, v))
        .collect()
}

/// Fills `series` onto `grid` with a natural cubic spline through the known
/// samples. Known samples are reproduced exactly.
pub fn spline_fill(series: &RawSeries, grid: &[i64]) -> Result<RawSeries> {
    let ts = series.timestamps();
    let ys = series.values();
    if ts.len() < 4 {
        return Err(Error::Config(format!(
            "spline fill of `{}` needs at least 4 known points, got {}",
            series.node_id,
            ts.len()
        )));
    }
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    if let Some(&p) = grid.iter().find(|&&p| p < lo || p > hi) {
        return Err(Error::Extrapolation { point: p, min: lo, max: hi });
    }
    let spline = NaturalSpline::fit(ts, ys);
    let values = grid
        .iter()
        .map(|&p| match ts.binary_search(&p) {
            Ok(k) => ys[k],
            Err(_) => spline.eval(p as f64),
        })
        .collect();
    RawSeries::new(series.node_id.clone(), grid.to_vec(), values)
}

struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    fn fit(ts: &[i64], ys: &[f64]) -> Self {
        let x: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();

        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let inner = n - 2;
        let mut m = vec![0.0; n];
        if inner > 0 {
            let mut diag = vec![0.0; inner];
            let mut rhs = vec![0.0; inner];
            let mut upper = vec![0.0; inner];
            for k in 0..inner {
                diag[k] = 2.0 * (h[k] + h[k + 1]);
                upper[k] = h[k + 1];
                rhs[k] = 6.0 * (slope[k + 1] - slope[k]);
            }
            for k in 1..inner {
                let w = h[k] / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                rhs[k] -= w * rhs[k - 1];
            }
            m[inner] = rhs[inner - 1] / diag[inner - 1];
            for k in (0..inner - 1).rev() {
                m[k + 1] = (rhs[k] - upper[k] * m[k + 2]) / diag[k];
            }
        }
        Self { x, y: ys.to_vec(), m }
    }

    fn eval(&self, p: f64) -> f64 {
        let k = match self.x.partition_point(|&v| v <= p) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - p) / h;
        let b = (p - self.x[k]) / h;
        a * self.y[k]
            + b * self.y[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }
}

/// `out[t] = ln(in[t+1] / in[t])`, stamped with the later timestamp.
pub fn log_returns(series: &RawSeries) -> Result<RawSeries> {
    if series.has_gaps() {
        return Err(Error::Domain {
            index: series
                .timestamps()
                .windows(2)
                .position(|w| w[1] != w[0] + 1)
                .map_or(0, |k| k + 1),
            message: format!("series `{}` has gaps; fill them before taking returns", series.node_id),
        });
    }
    let v = series.values();
    if let Some(k) = v.iter().position(|&x| x <= 0.0) {
        return Err(Error::Domain {
            index: k,
            message: format!("nonpositive value {} in `{}`", v[k], series.node_id),
        });
    }
    let out = v.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    RawSeries::new(series.node_id.clone(), series.timestamps()[1..].to_vec(), out)
}

/// N aligned scalar sequences of equal length, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    node_ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    mean_removed: bool,
}

impl TimeSeriesSet {
    /// Builds a set without centering. Use [`TimeSeriesSet::centered`] for
    /// the zero-mean form the estimators expect.
    pub fn from_rows(node_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if node_ids.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} node ids for {} rows",
                node_ids.len(),
                rows.len()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::Dimension(format!("need at least 2 series, got {}", rows.len())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = node_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Dimension(format!("duplicate node id `{dup}`")));
        }
        let t = rows[0].len();
        let bad: Vec<&str> = node_ids
            .iter()
            .zip(&rows)
            .filter(|(_, r)| r.len() != t)
            .map(|(id, _)| id.as_str())
            .collect();
        if !bad.is_empty() {
            return Err(Error::Dimension(format!(
                "rows differ in length from `{}` ({t} samples): {}",
                node_ids[0],
                bad.join(", ")
            )));
        }
        if t < 2 {
            return Err(Error::Dimension(format!("need at least 2 samples, got {t}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("series contain non-finite values".into()));
        }
        let mean_removed = rows.iter().all(|r| is_centered(r));
        Ok(Self {
            node_ids,
            rows,
            mean_removed,
        })
    }

    /// Subtracts each row's sample mean.
    pub fn centered(mut self) -> Self {
        for row in &mut self.rows {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        self.mean_removed = true;
        self
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Number of samples per node.
    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mean_removed(&self) -> bool {
        self.mean_removed
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TimeSeriesJson {
            node_ids: self.node_ids.clone(),
            t: self.len(),
            rows: self.rows.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TimeSeriesJson = serde_json::from_str(text)?;
        let set = Self::from_rows(raw.node_ids, raw.rows)?;
        if set.len() != raw.t {
            return Err(Error::Dimension(format!(
                "declared T = {} but rows hold {} samples",
                raw.t,
                set.len()
            )));
        }
        Ok(set)
    }

    /// Writes a header `t,<node ids>` followed by one row per time step.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t");
        for id in &self.node_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&t.to_string());
            for row in &self.rows {
                out.push(',');
                out.push_str(&row[t].to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn is_centered(row: &[f64]) -> bool {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    mean.abs() <= 1e-9 * (sd + 1.0)
}

#[derive(Serialize, Deserialize)]
struct TimeSeriesJson {
    node_ids: Vec<String>,
    #[serde(rename = "T")]
    t: usize,
    rows: Vec<Vec<f64>>,
}

/// Stacks gap-free series sharing one grid and removes each row's mean.
pub fn assemble(series: &[RawSeries]) -> Result<TimeSeriesSet> {
    if series.len() < 2 {
        return Err(Error::Dimension(format!("need at least 2 series, got {}", series.len())));
    }
    let t = series[0].len();
    let bad: Vec<&str> = series
        .iter()
        .filter(|s| s.len() != t)
        .map(|s| s.node_id.as_str())
        .collect();
    if !bad.is_empty() {
        return Err(Error::Dimension(format!(
            "length mismatch against `{}` ({t} samples): {}",
            series[0].node_id,
            bad.join(", ")
        )));
    }
    if let Some(s) = series.iter().find(|s| s.has_gaps()) {
        return Err(Error::Dimension(format!("series `{}` has gaps", s.node_id)));
    }
    let grid = series[0].timestamps();
    if let Some(s) = series.iter().find(|s| s.timestamps() != grid) {
        return Err(Error::Dimension(format!(
            "series `{}` is not on the grid of `{}`",
            s.node_id, series[0].node_id
        )));
    }
    let ids = series.iter().map(|s| s.node_id.clone()).collect();
    let rows = series.iter().map(|s| s.values().to_vec()).collect();
    Ok(TimeSeriesSet::from_rows(ids, rows)?.centered())
}
