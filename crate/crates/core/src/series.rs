//! Loading, validating and preprocessing univariate series.
//!
//! Dates are carried as opaque labels. All analysis is index based.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::jitter_stream;

/// An ordered sequence of observations.
///
/// Freshly loaded series may contain `NaN` entries that mark missing cells;
/// [`preprocess`] removes them. Analysis routines reject non-finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub labels: Option<Vec<String>>,
    pub name: String,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            labels: None,
            name: String::new(),
        }
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::InvalidSpec(format!(
                "{} labels for {} values",
                labels.len(),
                values.len()
            )));
        }
        Ok(Self {
            values,
            labels: Some(labels),
            name: String::new(),
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels
            .as_ref()
            .and_then(|l| l.get(index))
            .map(String::as_str)
    }

    /// Errors with the first position holding a non-finite value.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Sub-series over `range` (0-based, half open), labels included.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            values: self.values[range.clone()].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
            name: self.name.clone(),
        }
    }

    /// Index range of rows whose label lies between the two prefixes, inclusive.
    ///
    /// `"2015"` to `"2019"` selects every label starting with 2015, 2016, ..., 2019.
    /// Returns `None` when the series has no labels or nothing matches.
    pub fn label_range(&self, start: &str, end: &str) -> Option<std::ops::Range<usize>> {
        let labels = self.labels.as_ref()?;
        let prefix = |s: &str, n: usize| -> String { s.chars().take(n).collect() };
        let start_n = start.chars().count();
        let end_n = end.chars().count();
        let inside = |l: &String| {
            (start.is_empty() || prefix(l, start_n).as_str() >= start)
                && (end.is_empty() || prefix(l, end_n).as_str() <= end)
        };
        let first = labels.iter().position(inside)?;
        let last = labels.iter().rposition(inside)?;
        Some(first..last + 1)
    }

    pub fn reversed(&self) -> TimeSeries {
        let mut out = self.clone();
        out.values.reverse();
        if let Some(l) = out.labels.as_mut() {
            l.reverse();
        }
        out
    }

    pub fn negated(&self) -> TimeSeries {
        self.map(|v| -v)
    }

    /// Pointwise transform, keeping labels.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            values: self.values.iter().map(|&v| f(v)).collect(),
            labels: self.labels.clone(),
            name: self.name.clone(),
        }
    }
}

/// How missing cells are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Remove the position and close the gap.
    #[default]
    Drop,
    Fail,
}

/// Which CSV column to read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    Name(String),
    /// 0-based position.
    Index(usize),
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    /// Pure digits select by position, anything else by header name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// `None` detects a header by checking whether the first value cell parses.
    pub has_header: Option<bool>,
    pub missing_policy: MissingPolicy,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: None,
            missing_policy: MissingPolicy::Drop,
        }
    }
}

const MISSING_TOKENS: [&str; 6] = ["", ".", "NA", "N/A", "NaN", "null"];

/// Reads one numeric column (and optionally a label column) from a CSV file.
///
/// Missing cells become `NaN` markers under [`MissingPolicy::Drop`] and are
/// removed later by [`preprocess`]; under [`MissingPolicy::Fail`] they abort.
pub fn load_csv(
    path: impl AsRef<Path>,
    column: &Column,
    label_column: Option<&Column>,
    options: &CsvOptions,
) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(read_csv(file, column, label_column, options)?.named(name))
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    column: &Column,
    label_column: Option<&Column>,
    options: &CsvOptions,
) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records().peekable();

    let first = match records.peek() {
        Some(Ok(r)) => Some(r.clone()),
        Some(Err(_)) => return Err(records.next().unwrap().unwrap_err().into()),
        None => None,
    };
    let has_header = match (options.has_header, &first) {
        (Some(h), _) => h,
        (None, None) => false,
        (None, Some(row)) => match column {
            Column::Name(_) => true,
            Column::Index(i) => row.get(*i).is_some_and(|c| c.parse::<f64>().is_err()),
        },
    };
    let header = if has_header {
        records.next().transpose()?
    } else {
        None
    };
    let resolve = |c: &Column| -> Result<usize> {
        match c {
            Column::Index(i) => Ok(*i),
            Column::Name(n) => header
                .as_ref()
                .and_then(|h| h.iter().position(|f| f == n))
                .ok_or_else(|| Error::ColumnNotFound(n.clone())),
        }
    };
    let value_col = resolve(column)?;
    let label_col = label_column.map(resolve).transpose()?;

    let mut values = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (i, record) in records.enumerate() {
        let record = record?;
        let row = i + usize::from(has_header) + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cell = record
            .get(value_col)
            .ok_or_else(|| Error::ColumnNotFound(format!("{column:?} in row {row}")))?;
        let value = match cell.parse::<f64>() {
            Ok(v) => v,
            Err(_) => match options.missing_policy {
                MissingPolicy::Drop => f64::NAN,
                MissingPolicy::Fail if MISSING_TOKENS.contains(&cell) => {
                    return Err(Error::Missing(values.len()))
                }
                MissingPolicy::Fail => {
                    return Err(Error::Parse {
                        row,
                        cell: cell.to_string(),
                    })
                }
            },
        };
        values.push(value);
        if let (Some(labels), Some(lc)) = (labels.as_mut(), label_col) {
            labels.push(record.get(lc).unwrap_or_default().to_string());
        }
    }
    Ok(TimeSeries {
        values,
        labels,
        name: String::new(),
    })
}

/// Size of the tie-breaking noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum JitterAmplitude {
    /// Fixed amplitude; `0` disables jitter.
    Absolute(f64),
    /// Factor times the interquartile range of the (log-transformed) series.
    /// Falls back to the bare factor when the range is zero.
    IqrScaled(f64),
}

impl JitterAmplitude {
    fn resolve(self, values: &[f64]) -> f64 {
        match self {
            JitterAmplitude::Absolute(a) => a,
            JitterAmplitude::IqrScaled(f) => {
                let iqr = interquartile_range(values);
                if iqr > 0.0 {
                    f * iqr
                } else {
                    f
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub apply_log: bool,
    pub jitter: JitterAmplitude,
    pub jitter_seed: u64,
    pub missing_policy: MissingPolicy,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self {
            apply_log: false,
            jitter: JitterAmplitude::IqrScaled(1e-7),
            jitter_seed: 0,
            missing_policy: MissingPolicy::Drop,
        }
    }
}

impl PreprocessSpec {
    /// Neither log nor jitter; missing values dropped.
    pub fn identity() -> Self {
        Self {
            jitter: JitterAmplitude::Absolute(0.0),
            ..Self::default()
        }
    }
}

const JITTER_ATTEMPTS: u64 = 16;

/// Missing-value handling, then optional log, then optional jitter.
///
/// Jitter adds independent `U[0, amplitude)` noise per value from a stream
/// fixed by `jitter_seed`, so the output is deterministic. If ties survive,
/// the draw is repeated on a derived stream.
pub fn preprocess(ts: &TimeSeries, spec: &PreprocessSpec) -> Result<TimeSeries> {
    let mut values = Vec::with_capacity(ts.len());
    let mut labels = ts.labels.as_ref().map(|_| Vec::with_capacity(ts.len()));
    for (i, &v) in ts.values.iter().enumerate() {
        if v.is_nan() {
            match spec.missing_policy {
                MissingPolicy::Drop => continue,
                MissingPolicy::Fail => return Err(Error::Missing(i)),
            }
        }
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        values.push(v);
        if let (Some(out), Some(src)) = (labels.as_mut(), ts.labels.as_ref()) {
            out.push(src[i].clone());
        }
    }

    if spec.apply_log {
        for (i, v) in values.iter_mut().enumerate() {
            if *v <= 0.0 {
                return Err(Error::NonPositiveLog {
                    position: i,
                    value: *v,
                });
            }
            *v = v.ln();
        }
    }

    let amplitude = spec.jitter.resolve(&values);
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "jitter amplitude {amplitude} must be finite and nonnegative"
        )));
    }
    if amplitude > 0.0 {
        let base = values;
        let mut attempt = 0;
        values = loop {
            if attempt == JITTER_ATTEMPTS {
                return Err(Error::UnresolvedTies(JITTER_ATTEMPTS as usize));
            }
            let mut rng = jitter_stream(spec.jitter_seed, attempt);
            let candidate: Vec<f64> = base
                .iter()
                .map(|&v| v + amplitude * rng.random::<f64>())
                .collect();
            if find_tie(&candidate).is_none() {
                break candidate;
            }
            attempt += 1;
        };
    }

    Ok(TimeSeries {
        values,
        labels,
        name: ts.name.clone(),
    })
}

/// Positions of some pair of equal values, if any.
pub fn find_tie(values: &[f64]) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.windows(2)
        .find(|w| values[w[0]] == values[w[1]])
        .map(|w| (w[0], w[1]))
}

fn interquartile_range(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile(&sorted, 0.75) - quantile(&sorted, 0.25)
}

// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
