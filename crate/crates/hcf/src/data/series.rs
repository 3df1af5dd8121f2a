//! Raw series and event containers plus delimited-text I/O.
//!
//! Series files: header `timestamp,<var1>,...,<varD>`, one row per sampling
//! instant, ISO-8601 timestamps on a strict fixed-interval grid. Event files:
//! header `timestamp,type` with the type given as a 1-based integer or a
//! registered name. Lines starting with `#` are comments in both formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};

/// Evenly-sampled multivariate series. Timestamps are implicit: the i-th row
/// (0-based) is at `start_epoch + i * step_seconds`.
#[derive(Clone, Debug)]
pub struct RawSeries {
    pub start_epoch: i64,
    pub step_seconds: i64,
    /// Row-major T×D values.
    values: Vec<f64>,
    pub variable_names: Vec<String>,
}

impl RawSeries {
    pub fn new(
        start_epoch: i64,
        step_seconds: i64,
        values: Vec<f64>,
        variable_names: Vec<String>,
    ) -> Result<Self> {
        if step_seconds <= 0 {
            return Err(Error::Data("sampling interval must be positive".into()));
        }
        if variable_names.is_empty() || !values.len().is_multiple_of(variable_names.len()) {
            return Err(Error::Data(format!(
                "value buffer of length {} does not divide into {} variables",
                values.len(),
                variable_names.len()
            )));
        }
        Ok(RawSeries {
            start_epoch,
            step_seconds,
            values,
            variable_names,
        })
    }

    /// Number of time points T.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of variables D.
    pub fn dim(&self) -> usize {
        self.variable_names.len()
    }

    pub fn value(&self, t: usize, d: usize) -> f64 {
        self.values[t * self.dim() + d]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.values[t * d..(t + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamp_at(&self, t: usize) -> i64 {
        self.start_epoch + t as i64 * self.step_seconds
    }

    pub fn timestamps(&self) -> Vec<i64> {
        (0..self.len()).map(|t| self.timestamp_at(t)).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|n| n == name)
    }
}

/// Typed events at irregular instants, strictly increasing in time.
#[derive(Clone, Debug)]
pub struct RawEvents {
    /// (epoch seconds, 1-based type id)
    pub records: Vec<(i64, usize)>,
    pub type_names: Vec<String>,
}

impl RawEvents {
    pub fn empty() -> Self {
        RawEvents {
            records: Vec::new(),
            type_names: Vec::new(),
        }
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_of_type(&self, type_id: usize) -> usize {
        self.records.iter().filter(|(_, c)| *c == type_id).count()
    }
}

pub fn parse_timestamp(s: &str) -> Option<i64> {
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

pub fn format_timestamp(epoch: i64) -> String {
    DateTime::from_timestamp(epoch, 0)
        .expect("epoch in representable range")
        .naive_utc()
        .format("%Y-%m-%dT%H:%M:%S")
        .to_string()
}

fn load_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Load {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Load and validate a series file: sorted rows, strict fixed-interval grid,
/// no missing or non-numeric cells.
pub fn load_series(path: &Path) -> Result<RawSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| load_error(path, 1, "missing header"))?;
    let mut cols = header.split(',').map(str::trim);
    if cols.next() != Some("timestamp") {
        return Err(load_error(
            path,
            hline,
            "header must start with `timestamp`",
        ));
    }
    let variable_names: Vec<String> = cols.map(String::from).collect();
    if variable_names.is_empty() {
        return Err(load_error(path, hline, "no variable columns in header"));
    }
    let dim = variable_names.len();

    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for (ln, line) in lines {
        let mut fields = line.split(',').map(str::trim);
        let ts_str = fields
            .next()
            .ok_or_else(|| load_error(path, ln, "empty row"))?;
        let ts = parse_timestamp(ts_str)
            .ok_or_else(|| load_error(path, ln, format!("unparseable timestamp {ts_str:?}")))?;
        let mut vals = Vec::with_capacity(dim);
        for name in &variable_names {
            let cell = fields.next().ok_or_else(|| {
                load_error(path, ln, format!("missing value for column {name:?}"))
            })?;
            let v: f64 = cell.parse().map_err(|_| {
                load_error(
                    path,
                    ln,
                    format!("non-numeric cell {cell:?} in column {name:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(load_error(
                    path,
                    ln,
                    format!("non-finite value in column {name:?}"),
                ));
            }
            vals.push(v);
        }
        if fields.next().is_some() {
            return Err(load_error(path, ln, "too many columns"));
        }
        rows.push((ts, vals));
    }
    if rows.len() < 2 {
        return Err(load_error(
            path,
            1,
            format!(
                "need at least 2 rows to establish the sampling interval, got {}",
                rows.len()
            ),
        ));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    let step = rows[1].0 - rows[0].0;
    if step == 0 {
        return Err(load_error(
            path,
            1,
            format!("duplicate timestamp {}", format_timestamp(rows[0].0)),
        ));
    }
    for (i, pair) in rows.windows(2).enumerate() {
        let gap = pair[1].0 - pair[0].0;
        if gap == 0 {
            return Err(load_error(
                path,
                i + 2,
                format!("duplicate timestamp {}", format_timestamp(pair[1].0)),
            ));
        }
        if gap != step {
            return Err(load_error(
                path,
                i + 2,
                format!(
                    "sampling gap after {}: expected {}s, found {}s",
                    format_timestamp(pair[0].0),
                    step,
                    gap
                ),
            ));
        }
    }
    let start = rows[0].0;
    let values = rows.into_iter().flat_map(|(_, v)| v).collect();
    RawSeries::new(start, step, values, variable_names)
}

/// Load an event file. Types may be integers (1-based) or names; names get
/// ids in order of first appearance. A file with no data rows is valid and
/// yields zero records.
pub fn load_events(path: &Path) -> Result<RawEvents> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text).peekable();
    let Some(&(hline, header)) = lines.peek() else {
        return Ok(RawEvents::empty());
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["timestamp", "type"] {
        return Err(load_error(path, hline, "header must be `timestamp,type`"));
    }
    lines.next();

    let mut names: Vec<String> = Vec::new();
    let mut numeric_max = 0usize;
    let mut saw_numeric = false;
    let mut saw_named = false;
    let mut records: Vec<(i64, usize)> = Vec::new();
    for (ln, line) in lines {
        let mut fields = line.split(',').map(str::trim);
        let ts_str = fields.next().unwrap_or("");
        let ts = parse_timestamp(ts_str)
            .ok_or_else(|| load_error(path, ln, format!("unparseable timestamp {ts_str:?}")))?;
        let ty = fields
            .next()
            .ok_or_else(|| load_error(path, ln, "missing type column"))?;
        let id = if let Ok(n) = ty.parse::<usize>() {
            saw_numeric = true;
            if n == 0 {
                return Err(load_error(path, ln, "type ids are 1-based; got 0"));
            }
            numeric_max = numeric_max.max(n);
            n
        } else {
            saw_named = true;
            match names.iter().position(|n| n == ty) {
                Some(i) => i + 1,
                None => {
                    names.push(ty.to_string());
                    names.len()
                }
            }
        };
        if saw_numeric && saw_named {
            return Err(load_error(
                path,
                ln,
                "cannot mix integer and named event types",
            ));
        }
        if let Some(&(prev, _)) = records.last() {
            if ts <= prev {
                return Err(load_error(
                    path,
                    ln,
                    format!(
                        "event timestamps must be strictly increasing ({} after {})",
                        format_timestamp(ts),
                        format_timestamp(prev)
                    ),
                ));
            }
        }
        records.push((ts, id));
    }
    let type_names = if saw_numeric {
        (1..=numeric_max).map(|i| format!("type{i}")).collect()
    } else {
        names
    };
    Ok(RawEvents {
        records,
        type_names,
    })
}

/// Derive up/down events from first differences of one variable: a step of
/// strictly more than `threshold` up (down) emits an event stamped at the
/// later point. Type 1 is "up", type 2 is "down".
pub fn extract_events(series: &RawSeries, variable: usize, threshold: f64) -> Result<RawEvents> {
    if variable >= series.dim() {
        return Err(Error::Data(format!(
            "variable index {variable} out of range for {} columns",
            series.dim()
        )));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Data("threshold must be positive".into()));
    }
    let mut records = Vec::new();
    for t in 1..series.len() {
        let d = series.value(t, variable) - series.value(t - 1, variable);
        if d > threshold {
            records.push((series.timestamp_at(t), 1));
        } else if d < -threshold {
            records.push((series.timestamp_at(t), 2));
        }
    }
    Ok(RawEvents {
        records,
        type_names: vec!["up".into(), "down".into()],
    })
}

/// Write a series file; `comments` become leading `#` lines.
pub fn write_series(series: &RawSeries, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    writeln!(out, "timestamp,{}", series.variable_names.join(",")).unwrap();
    for t in 0..series.len() {
        write!(out, "{}", format_timestamp(series.timestamp_at(t))).unwrap();
        for d in 0..series.dim() {
            write!(out, ",{}", series.value(t, d)).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write an event file with named types.
pub fn write_events(events: &RawEvents, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str("timestamp,type\n");
    for &(ts, id) in &events.records {
        writeln!(
            out,
            "{},{}",
            format_timestamp(ts),
            events.type_names[id - 1]
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_row_hourly_file_loads() {
        let f = tmp_file(
            "timestamp,load\n\
             2014-01-06T00:00:00,1.0\n\
             2014-01-06T01:00:00,2.0\n\
             2014-01-06T02:00:00,3.0\n",
        );
        let s = load_series(f.path()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 1);
        assert_eq!(s.step_seconds, 3600);
        assert_eq!(s.value(2, 0), 3.0);
    }

    #[test]
    fn missing_hour_names_the_gap() {
        let f = tmp_file(
            "timestamp,load\n\
             2014-01-06T00:00:00,1.0\n\
             2014-01-06T01:00:00,2.0\n\
             2014-01-06T03:00:00,3.0\n",
        );
        let err = load_series(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("gap") && msg.contains("2014-01-06T01:00:00"),
            "{msg}"
        );
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let f = tmp_file(
            "timestamp,load\n\
             2014-01-06T00:00:00,1.0\n\
             2014-01-06T00:00:00,2.0\n",
        );
        assert!(load_series(f.path())
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let f = tmp_file(
            "timestamp,load\n\
             2014-01-06T00:00:00,1.0\n\
             2014-01-06T01:00:00,oops\n",
        );
        let msg = load_series(f.path()).unwrap_err().to_string();
        assert!(msg.contains(":3:") && msg.contains("oops"), "{msg}");
    }

    #[test]
    fn long_univariate_file_round_trips() {
        let mut content = String::from("timestamp,usage\n");
        let start = parse_timestamp("2012-01-01T00:00:00").unwrap();
        for i in 0..21044i64 {
            content.push_str(&format_timestamp(start + i * 3600));
            content.push_str(&format!(",{}\n", (i % 24) as f64));
        }
        let f = tmp_file(&content);
        let s = load_series(f.path()).unwrap();
        assert_eq!(s.len(), 21044);
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn events_infer_type_count_from_two_records() {
        let f = tmp_file(
            "timestamp,type\n\
             2014-01-06T00:10:00,1\n\
             2014-01-06T02:30:00,2\n",
        );
        let e = load_events(f.path()).unwrap();
        assert_eq!(e.num_types(), 2);
        assert_eq!(e.records.len(), 2);
    }

    #[test]
    fn equal_event_timestamps_rejected() {
        let f = tmp_file(
            "timestamp,type\n\
             2014-01-06T00:10:00,up\n\
             2014-01-06T00:10:00,down\n",
        );
        assert!(load_events(f.path()).is_err());
    }

    #[test]
    fn empty_event_file_is_valid() {
        let f = tmp_file("");
        let e = load_events(f.path()).unwrap();
        assert!(e.is_empty());
        let f2 = tmp_file("timestamp,type\n");
        assert!(load_events(f2.path()).unwrap().is_empty());
    }

    #[test]
    fn extract_events_brute_force_case() {
        // diffs: +5, +35, +1, -31 → UP at index 2, DOWN at index 4
        let s =
            RawSeries::new(0, 3600, vec![0.0, 5.0, 40.0, 41.0, 10.0], vec!["v".into()]).unwrap();
        let e = extract_events(&s, 0, 30.0).unwrap();
        assert_eq!(e.records, vec![(2 * 3600, 1), (4 * 3600, 2)]);
        assert_eq!(e.type_names, vec!["up", "down"]);
    }

    #[test]
    fn constant_series_has_no_events() {
        let s = RawSeries::new(0, 3600, vec![2.0; 10], vec!["v".into()]).unwrap();
        assert!(extract_events(&s, 0, 30.0).unwrap().is_empty());
    }

    #[test]
    fn difference_equal_to_threshold_is_not_an_event() {
        let s = RawSeries::new(0, 3600, vec![0.0, 30.0, 0.0], vec!["v".into()]).unwrap();
        assert!(extract_events(&s, 0, 30.0).unwrap().is_empty());
        let s2 = RawSeries::new(0, 3600, vec![0.0, 30.0 + 1e-9], vec!["v".into()]).unwrap();
        assert_eq!(extract_events(&s2, 0, 30.0).unwrap().len(), 1);
    }

    #[test]
    fn series_write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = RawSeries::new(
            parse_timestamp("2014-01-06T00:00:00").unwrap(),
            3600,
            vec![1.5, -0.25, 3.125, 7.0, 0.0625, -2.0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        write_series(&s, &p, &["config: deadbeef".into()]).unwrap();
        let l = load_series(&p).unwrap();
        assert_eq!(l.len(), 3);
        assert_eq!(l.values(), s.values());
        assert_eq!(l.variable_names, s.variable_names);
    }
}
