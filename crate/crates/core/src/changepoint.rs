//! Change-point curves, global and local search, binary segmentation and
//! simulation-based significance.
//!
//! A split point `k` cuts the series into the first `k` values and the
//! remaining `T - k`. Global curves are weighted by `c_k = 2 sqrt(k(T-k)) / T`,
//! which equals 1 at the midpoint.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotest::{exceedance_fraction, median, TestResult};
use crate::models::ModelSpec;
use crate::ordstats::{conditional_entropy_from, shannon_entropy};
use crate::patterns::{check_order, euclidean, factorial, pattern_codes, LagSet};
use crate::series::TimeSeries;

/// Statistic compared before and after a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `|mean before - mean after|`
    Mean,
    /// Euclidean distance of lag-averaged pattern distributions.
    OrderDistance,
    Beta,
    Alpha,
    Entropy,
    CondEntropy,
}

impl Method {
    /// True for methods whose curve is a signed difference.
    pub fn is_signed(self) -> bool {
        !matches!(self, Method::Mean | Method::OrderDistance)
    }

    fn as_str(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::OrderDistance => "order_distance",
            Method::Beta => "beta",
            Method::Alpha => "alpha",
            Method::Entropy => "entropy",
            Method::CondEntropy => "cond_entropy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "mean" => Method::Mean,
            "order_distance" | "order" => Method::OrderDistance,
            "beta" => Method::Beta,
            "alpha" => Method::Alpha,
            "entropy" => Method::Entropy,
            "cond_entropy" => Method::CondEntropy,
            _ => return Err(Error::InvalidSpec(format!("unknown method {s:?}"))),
        })
    }
}

/// Parameters shared by every curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    pub method: Method,
    /// Pattern order for `OrderDistance` and `Entropy`; other methods fix their own.
    pub order: usize,
    pub lags: LagSet,
    /// Split points with `min(k, T-k)` below this are excluded from the search.
    /// `None` selects [`default_margin`].
    pub margin: Option<usize>,
}

impl CurveOptions {
    pub fn new(method: Method, lags: LagSet) -> Self {
        let order = match method {
            Method::OrderDistance => 4,
            _ => 3,
        };
        Self {
            method,
            order,
            lags,
            margin: None,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = Some(margin);
        self
    }

    /// Pattern order that determines the window span.
    fn span_order(&self) -> usize {
        match self.method {
            Method::Mean => 1,
            Method::Beta => 2,
            Method::Alpha | Method::CondEntropy => 3,
            Method::OrderDistance | Method::Entropy => self.order,
        }
    }

    /// Values covered by one pattern window at the largest lag, minus one.
    pub fn window_span(&self) -> usize {
        (self.span_order() - 1) * self.lags.max()
    }

    pub fn margin_for(&self, len: usize) -> usize {
        self.margin
            .unwrap_or_else(|| default_margin(len, self.window_span()))
    }
}

/// `max(250, 5 * span)`, capped at a quarter of the series.
pub fn default_margin(len: usize, window_span: usize) -> usize {
    250.max(5 * window_span).min(len / 4)
}

/// `c_k = 2 sqrt(k (T - k)) / T`.
pub fn split_weight(k: usize, len: usize) -> f64 {
    let (k, t) = (k as f64, len as f64);
    2.0 * (k * (t - k)).sqrt() / t
}

/// A statistic evaluated at consecutive split points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeCurve {
    pub method: Method,
    pub order: Option<usize>,
    pub lag_set: Option<LagSet>,
    /// Length of the analysed series.
    pub len: usize,
    /// Split point of `values[0]`.
    pub first_k: usize,
    pub values: Vec<f64>,
    /// `c_k` for global curves, 1 for local ones.
    pub weights: Vec<f64>,
    pub margin: usize,
    /// Window length of a local curve.
    pub window: Option<usize>,
}

impl ChangeCurve {
    pub fn last_k(&self) -> usize {
        self.first_k + self.values.len() - 1
    }

    pub fn value_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.first_k)
            .and_then(|i| self.values.get(i))
            .copied()
    }

    /// `(k, value, weight)` triples.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(i, (&v, &w))| (self.first_k + i, v, w))
    }

    /// Split points the search may select.
    pub fn admissible(&self) -> Option<std::ops::RangeInclusive<usize>> {
        let lo = self.first_k.max(self.margin);
        let hi = self.last_k().min(self.len.saturating_sub(self.margin));
        (!self.values.is_empty() && lo <= hi).then_some(lo..=hi)
    }

    /// Largest `|value|` over the admissible range.
    pub fn max_abs(&self) -> Option<f64> {
        let range = self.admissible()?;
        range
            .map(|k| self.value_at(k).unwrap().abs())
            .max_by(f64::total_cmp)
    }

    /// Rows `k,label,value,c_k`; the label is that of the last value before the split.
    pub fn to_csv(&self, ts: Option<&TimeSeries>) -> String {
        let mut out = String::from("k,label,value,c_k\n");
        for (k, v, w) in self.points() {
            let label = ts.and_then(|t| t.label(k - 1)).unwrap_or("");
            out.push_str(&format!("{k},{label},{v},{w}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Number of values before the split.
    pub index: usize,
    pub label: Option<String>,
    pub value: f64,
    pub sign: Sign,
}

impl ChangePoint {
    /// Attaches the label of the last value before the split.
    pub fn labelled(mut self, ts: &TimeSeries) -> Self {
        self.label = ts.label(self.index - 1).map(str::to_string);
        self
    }
}

/// Pattern counts with prefix sums over window start positions.
struct CumulativeCounts {
    patterns: usize,
    span: usize,
    cum: Vec<u32>,
}

impl CumulativeCounts {
    fn new(values: &[f64], order: usize, lag: usize) -> Result<Self> {
        let codes = pattern_codes(values, order, lag)?;
        let patterns = factorial(order);
        let mut cum = vec![0u32; (codes.len() + 1) * patterns];
        for (t, &c) in codes.iter().enumerate() {
            let (head, tail) = cum.split_at_mut((t + 1) * patterns);
            tail[..patterns].copy_from_slice(&head[t * patterns..]);
            tail[c as usize] += 1;
        }
        Ok(Self {
            patterns,
            span: (order - 1) * lag,
            cum,
        })
    }

    /// Counts of windows lying inside values `[lo, hi)`; returns the total.
    fn segment(&self, lo: usize, hi: usize, out: &mut [f64]) -> u32 {
        let end = hi.saturating_sub(self.span).max(lo);
        let (a, b) = (lo * self.patterns, end * self.patterns);
        let mut total = 0;
        for (j, o) in out.iter_mut().enumerate().take(self.patterns) {
            let c = self.cum[b + j] - self.cum[a + j];
            *o = c as f64;
            total += c;
        }
        total
    }
}

/// Evaluates the chosen statistic on arbitrary segments of one series.
struct SegmentStats {
    method: Method,
    prefix_sum: Vec<f64>,
    // per lag: (order-2 counts, order-3 or order-n counts)
    tables: Vec<(Option<CumulativeCounts>, Option<CumulativeCounts>)>,
    scratch2: Vec<f64>,
    scratch: Vec<f64>,
}

impl SegmentStats {
    fn new(ts: &TimeSeries, opts: &CurveOptions) -> Result<Self> {
        ts.check_finite()?;
        let values = &ts.values;
        let mut prefix_sum = Vec::new();
        let mut tables = Vec::new();
        match opts.method {
            Method::Mean => {
                prefix_sum.reserve(values.len() + 1);
                prefix_sum.push(0.0);
                let mut acc = 0.0;
                for v in values {
                    acc += v;
                    prefix_sum.push(acc);
                }
            }
            method => {
                let (need2, need_n) = match method {
                    Method::Beta => (true, None),
                    Method::Alpha => (false, Some(3)),
                    Method::CondEntropy => (true, Some(3)),
                    _ => (false, Some(opts.order)),
                };
                if let Some(n) = need_n {
                    check_order(n)?;
                }
                for d in opts.lags.iter() {
                    let two = need2
                        .then(|| CumulativeCounts::new(values, 2, d))
                        .transpose()?;
                    let many = need_n
                        .map(|n| CumulativeCounts::new(values, n, d))
                        .transpose()?;
                    tables.push((two, many));
                }
            }
        }
        let width = match opts.method {
            Method::Alpha | Method::CondEntropy => 6,
            Method::OrderDistance | Method::Entropy => factorial(opts.order),
            _ => 0,
        };
        Ok(Self {
            method: opts.method,
            prefix_sum,
            tables,
            scratch2: vec![0.0; 2],
            scratch: vec![0.0; width],
        })
    }

    /// Scalar statistic on values `[lo, hi)`, averaged over lags.
    fn scalar(&mut self, lo: usize, hi: usize) -> f64 {
        if self.method == Method::Mean {
            return (self.prefix_sum[hi] - self.prefix_sum[lo]) / (hi - lo) as f64;
        }
        let mut acc = 0.0;
        for (two, many) in &self.tables {
            let p12 = two.as_ref().map(|c| {
                let n = c.segment(lo, hi, &mut self.scratch2);
                self.scratch2[0] / f64::from(n)
            });
            if let Some(c) = many {
                let n = f64::from(c.segment(lo, hi, &mut self.scratch));
                self.scratch.iter_mut().for_each(|x| *x /= n);
            }
            acc += match self.method {
                Method::Beta => 2.0 * p12.unwrap() - 1.0,
                Method::Alpha => 1.0 - self.scratch[0] - self.scratch[5],
                Method::Entropy => shannon_entropy(&self.scratch),
                Method::CondEntropy => conditional_entropy_from(p12.unwrap(), &self.scratch),
                Method::Mean | Method::OrderDistance => unreachable!(),
            };
        }
        acc / self.tables.len() as f64
    }

    /// Lag-averaged pattern distribution on values `[lo, hi)`.
    fn distribution(&mut self, lo: usize, hi: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let m = self.tables.len() as f64;
        for (_, many) in &self.tables {
            let c = many.as_ref().unwrap();
            let n = f64::from(c.segment(lo, hi, &mut self.scratch));
            for (o, s) in out.iter_mut().zip(&self.scratch) {
                *o += s / n / m;
            }
        }
    }

    /// Signed (or absolute, for distances) difference between two segments.
    fn compare(&mut self, before: (usize, usize), after: (usize, usize)) -> f64 {
        match self.method {
            Method::OrderDistance => {
                let width = self.scratch.len();
                let mut p = vec![0.0; width];
                let mut q = vec![0.0; width];
                self.distribution(before.0, before.1, &mut p);
                self.distribution(after.0, after.1, &mut q);
                euclidean(&p, &q)
            }
            Method::Mean => (self.scalar(before.0, before.1) - self.scalar(after.0, after.1)).abs(),
            _ => self.scalar(before.0, before.1) - self.scalar(after.0, after.1),
        }
    }
}

fn require_len(len: usize, needed: usize) -> Result<()> {
    if len < needed {
        Err(Error::TooShort { needed, got: len })
    } else {
        Ok(())
    }
}

/// Global curve for any method: `c_k` times the before/after comparison.
pub fn change_curve(ts: &TimeSeries, opts: &CurveOptions) -> Result<ChangeCurve> {
    let len = ts.len();
    let min_side = opts.window_span() + 1;
    require_len(len, (2 * min_side).max(4))?;
    let mut stats = SegmentStats::new(ts, opts)?;
    let first_k = min_side;
    let last_k = len - min_side;
    let mut values = Vec::with_capacity(last_k - first_k + 1);
    let mut weights = Vec::with_capacity(last_k - first_k + 1);
    for k in first_k..=last_k {
        let c = split_weight(k, len);
        values.push(c * stats.compare((0, k), (k, len)));
        weights.push(c);
    }
    let patterned = opts.method != Method::Mean;
    Ok(ChangeCurve {
        method: opts.method,
        order: patterned.then_some(opts.span_order()),
        lag_set: patterned.then(|| opts.lags.clone()),
        len,
        first_k,
        values,
        weights,
        margin: opts.margin_for(len),
        window: None,
    })
}

/// `f(k) = c_k |m_k - m~_k|` with the default margin.
pub fn mean_change_curve(ts: &TimeSeries) -> Result<ChangeCurve> {
    change_curve(ts, &CurveOptions::new(Method::Mean, LagSet::single(1)?))
}

/// `g(k) = c_k ||q^k - q~^k||` over lag-averaged order-`n` distributions.
pub fn order_change_curve(ts: &TimeSeries, n: usize, lags: &LagSet) -> Result<ChangeCurve> {
    check_order(n)?;
    change_curve(
        ts,
        &CurveOptions::new(Method::OrderDistance, lags.clone()).with_order(n),
    )
}

/// `h(k) = c_k (s_k - s~_k)` for a scalar statistic `s`, signed.
pub fn scalar_change_curve(ts: &TimeSeries, method: Method, lags: &LagSet) -> Result<ChangeCurve> {
    if !method.is_signed() {
        return Err(Error::InvalidSpec(format!(
            "{method} is not a scalar statistic"
        )));
    }
    change_curve(ts, &CurveOptions::new(method, lags.clone()))
}

/// Compares windows `[k-m+1, k]` and `[k+1, k+m]` without weighting.
pub fn local_change_curve(
    ts: &TimeSeries,
    opts: &CurveOptions,
    window: usize,
) -> Result<ChangeCurve> {
    let len = ts.len();
    require_len(len, 2 * window)?;
    let span = opts.window_span();
    if window < span + 1 {
        return Err(Error::InvalidSpec(format!(
            "local window {window} is shorter than one pattern window ({})",
            span + 1
        )));
    }
    let mut stats = SegmentStats::new(ts, opts)?;
    let values: Vec<f64> = (window..=len - window)
        .map(|k| match opts.method {
            // local mean differences keep their sign
            Method::Mean => stats.scalar(k - window, k) - stats.scalar(k, k + window),
            _ => stats.compare((k - window, k), (k, k + window)),
        })
        .collect();
    let patterned = opts.method != Method::Mean;
    Ok(ChangeCurve {
        method: opts.method,
        order: patterned.then_some(opts.span_order()),
        lag_set: patterned.then(|| opts.lags.clone()),
        len,
        first_k: window,
        weights: vec![1.0; values.len()],
        values,
        margin: window,
        window: Some(window),
    })
}

/// Split point with the largest `|value|` in the admissible range; ties go to
/// the smallest index.
pub fn find_change_point(curve: &ChangeCurve) -> Result<ChangePoint> {
    let range = curve.admissible().ok_or(Error::EmptyRange)?;
    let mut best: Option<(usize, f64)> = None;
    for k in range {
        let v = curve.value_at(k).unwrap();
        if best.is_none_or(|(_, b)| v.abs() > b.abs()) {
            best = Some((k, v));
        }
    }
    let (index, value) = best.ok_or(Error::EmptyRange)?;
    Ok(ChangePoint {
        index,
        label: None,
        value,
        sign: if value >= 0.0 { Sign::Max } else { Sign::Min },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationOptions {
    pub curve: CurveOptions,
    pub max_points: usize,
    /// No segment shorter than this is produced; raised to one pattern window if smaller.
    pub min_segment: usize,
}

impl SegmentationOptions {
    /// Up-down balance over lags 1 to 3.
    pub fn beta_default(max_points: usize) -> Self {
        Self {
            curve: CurveOptions::new(Method::Beta, LagSet::up_to(3).expect("nonempty")),
            max_points,
            min_segment: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// In discovery order.
    pub points: Vec<ChangePoint>,
    /// Segments that were searched but whose curve was identically zero.
    pub flat_segments: usize,
}

/// Binary segmentation that always splits the longest remaining segment.
pub fn recursive_segmentation(ts: &TimeSeries, opts: &SegmentationOptions) -> Result<Segmentation> {
    ts.check_finite()?;
    let min_segment = opts.min_segment.max(opts.curve.window_span() + 1);
    // (lo, hi, exhausted)
    let mut segments = vec![(0usize, ts.len(), false)];
    let mut points = Vec::new();
    let mut flat_segments = 0;
    while points.len() < opts.max_points {
        let Some(pos) = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.2)
            .max_by(|(_, a), (_, b)| (a.1 - a.0).cmp(&(b.1 - b.0)).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
        else {
            break;
        };
        let (lo, hi, _) = segments[pos];
        let sub = ts.slice(lo..hi);
        let mut curve = match change_curve(&sub, &opts.curve) {
            Ok(c) => c,
            Err(Error::TooShort { .. }) => {
                segments[pos].2 = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        curve.margin = curve.margin.max(min_segment);
        match find_change_point(&curve) {
            Ok(cp) if cp.value != 0.0 => {
                let k = lo + cp.index;
                points.push(ChangePoint { index: k, ..cp }.labelled(ts));
                segments[pos] = (lo, k, false);
                segments.push((k, hi, false));
            }
            Ok(_) => {
                flat_segments += 1;
                segments[pos].2 = true;
            }
            Err(Error::EmptyRange) => segments[pos].2 = true,
            Err(e) => return Err(e),
        }
    }
    Ok(Segmentation {
        points,
        flat_segments,
    })
}

/// Share of null trajectories whose curve maximum `max |value|` exceeds `observed_max`.
pub fn changepoint_significance(
    observed_max: f64,
    null: &ModelSpec,
    len: usize,
    opts: &CurveOptions,
    simulations: usize,
    seed: u64,
) -> Result<TestResult> {
    if simulations < 100 {
        return Err(Error::InvalidSpec(format!(
            "need at least 100 simulations, got {simulations}"
        )));
    }
    let spec = null.with(len, seed);
    spec.validate()?;
    let maxima = (0..simulations as u64)
        .into_par_iter()
        .map(|i| {
            let path = TimeSeries::new(spec.trajectory(i)?);
            change_curve(&path, opts)?
                .max_abs()
                .ok_or(Error::EmptyRange)
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceed = maxima.iter().filter(|&&m| m > observed_max).count();
    let mut extra = BTreeMap::new();
    extra.insert("exceedances".into(), exceed as f64);
    extra.insert("T".into(), len as f64);
    extra.insert("margin".into(), opts.margin_for(len) as f64);
    Ok(TestResult {
        statistic_name: format!("max_abs_{}_curve", opts.method),
        observed: observed_max,
        null_median: median(&maxima),
        p_value: exceedance_fraction(&maxima, observed_max),
        n_simulations: simulations,
        seed: Some(seed),
        extra,
    })
}
