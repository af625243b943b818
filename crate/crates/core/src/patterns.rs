//! Order patterns: encoding, per-lag frequencies and lag averaging.
//!
//! A window of `n` values realizes the permutation whose entry `j` is the rank
//! of the `j`-th value. Permutations are numbered from 1 in lexicographic
//! order, so for `n = 4` pattern 1 is `1234`, pattern 2 is `1243` and pattern
//! 24 is `4321`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 6;

const FACTORIAL: [usize; MAX_ORDER + 1] = [1, 1, 2, 6, 24, 120, 720];

/// `n!` for `n <= 6`.
pub fn factorial(n: usize) -> usize {
    FACTORIAL[n]
}

pub(crate) fn check_order(n: usize) -> Result<()> {
    if (MIN_ORDER..=MAX_ORDER).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidOrder(n))
    }
}

/// A pattern of order `n`, numbered `1..=n!`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternIndex {
    order: usize,
    index: usize,
}

impl PatternIndex {
    pub fn new(order: usize, index: usize) -> Result<Self> {
        check_order(order)?;
        if index == 0 || index > factorial(order) {
            return Err(Error::InvalidIndex {
                index,
                max: factorial(order),
            });
        }
        Ok(Self { order, index })
    }

    pub(crate) fn from_code(order: usize, code: usize) -> Self {
        debug_assert!(code < factorial(order));
        Self {
            order,
            index: code + 1,
        }
    }

    pub fn order(self) -> usize {
        self.order
    }

    /// 1-based number.
    pub fn index(self) -> usize {
        self.index
    }

    pub(crate) fn code(self) -> usize {
        self.index - 1
    }

    pub fn permutation(self) -> Vec<usize> {
        index_to_permutation(self)
    }
}

impl fmt::Display for PatternIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.permutation() {
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Lexicographic code (0-based) of the window `values[start], values[start+lag], ...`.
///
/// Ties are reported with absolute positions.
pub(crate) fn window_code(values: &[f64], start: usize, n: usize, lag: usize) -> Result<usize> {
    let mut code = 0;
    for i in 0..n {
        let vi = values[start + i * lag];
        let mut smaller = 0;
        for j in i + 1..n {
            let vj = values[start + j * lag];
            if vj < vi {
                smaller += 1;
            } else if vj == vi {
                return Err(Error::Tie {
                    first: start + i * lag,
                    second: start + j * lag,
                });
            }
        }
        code += smaller * FACTORIAL[n - 1 - i];
    }
    Ok(code)
}

/// Pattern realized by a window of pairwise distinct values.
pub fn encode_pattern(window: &[f64]) -> Result<PatternIndex> {
    check_order(window.len())?;
    let code = window_code(window, 0, window.len(), 1)?;
    Ok(PatternIndex::from_code(window.len(), code))
}

/// Rank sequence of a pattern, e.g. `(4, 2)` gives `[1, 2, 4, 3]`.
pub fn index_to_permutation(p: PatternIndex) -> Vec<usize> {
    let n = p.order;
    let mut rest = p.code();
    let mut available: Vec<usize> = (1..=n).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = FACTORIAL[n - 1 - i];
        out.push(available.remove(rest / f));
        rest %= f;
    }
    out
}

fn permutation_to_index(order: usize, ranks: &[usize]) -> PatternIndex {
    let values: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    PatternIndex::from_code(
        order,
        window_code(&values, 0, order, 1).expect("ranks are distinct"),
    )
}

/// The pattern with every order relation reversed; its number is `n! + 1 - index`.
pub fn negate_index(p: PatternIndex) -> PatternIndex {
    PatternIndex {
        order: p.order,
        index: factorial(p.order) + 1 - p.index,
    }
}

/// The pattern of the same window read backwards in time.
pub fn reverse_index(p: PatternIndex) -> PatternIndex {
    let mut ranks = p.permutation();
    ranks.reverse();
    permutation_to_index(p.order, &ranks)
}

/// Nonempty, sorted set of distinct positive lags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LagSet(Vec<usize>);

impl LagSet {
    pub fn new(mut lags: Vec<usize>) -> Result<Self> {
        lags.sort_unstable();
        lags.dedup();
        if lags.is_empty() {
            return Err(Error::InvalidLags("empty".into()));
        }
        if lags[0] == 0 {
            return Err(Error::InvalidLags("lags must be positive".into()));
        }
        Ok(Self(lags))
    }

    pub fn single(lag: usize) -> Result<Self> {
        Self::new(vec![lag])
    }

    /// `1..=max`.
    pub fn up_to(max: usize) -> Result<Self> {
        Self::new((1..=max).collect())
    }

    pub fn max(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for LagSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LagSet> for Vec<usize> {
    fn from(l: LagSet) -> Self {
        l.0
    }
}

impl FromStr for LagSet {
    type Err = Error;

    /// Accepts `"3"`, `"1,2,3"`, and inclusive ranges `"1..3"`, mixed by commas.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidLags(s.to_string());
        let mut lags = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b
                    .trim_start_matches('=')
                    .trim()
                    .parse()
                    .map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                lags.extend(a..=b);
            } else {
                lags.push(part.parse().map_err(|_| bad())?);
            }
        }
        Self::new(lags)
    }
}

impl fmt::Display for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Relative pattern frequencies of one order, for one lag or averaged over lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDistribution {
    pub order: usize,
    pub lags: LagSet,
    /// Entry `i` belongs to pattern number `i + 1`.
    pub probabilities: Vec<f64>,
    pub window_count: usize,
}

impl PatternDistribution {
    /// Probability of pattern number `index` (1-based).
    pub fn get(&self, index: usize) -> f64 {
        self.probabilities[index - 1]
    }

    pub fn prob(&self, pattern: PatternIndex) -> f64 {
        self.probabilities[pattern.code()]
    }

    /// Probability of the pattern written as a rank string like `"132"`.
    pub fn prob_of(&self, ranks: &str) -> Option<f64> {
        let ranks: Vec<usize> = ranks
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<_>>()?;
        if ranks.len() != self.order {
            return None;
        }
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        if sorted != (1..=self.order).collect::<Vec<_>>() {
            return None;
        }
        Some(self.prob(permutation_to_index(self.order, &ranks)))
    }

    pub fn patterns(&self) -> impl Iterator<Item = PatternIndex> {
        let n = self.order;
        (0..factorial(n)).map(move |c| PatternIndex::from_code(n, c))
    }

    /// Euclidean distance between two distributions of the same order.
    pub fn distance(&self, other: &[f64]) -> f64 {
        euclidean(&self.probabilities, other)
    }

    /// Rows `index,pattern,probability` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,pattern,probability\n");
        for (p, prob) in self.patterns().zip(&self.probabilities) {
            out.push_str(&format!("{},{},{}\n", p.index(), p, prob));
        }
        out
    }

    /// Object keyed by pattern string, in lexicographic order.
    pub fn to_json_map(&self) -> BTreeMap<String, f64> {
        self.patterns()
            .zip(&self.probabilities)
            .map(|(p, &prob)| (p.to_string(), prob))
            .collect()
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Number of lag-`d` windows of order `n` in a series of length `len`.
pub fn window_count(len: usize, n: usize, d: usize) -> usize {
    (len + d).saturating_sub(n * d)
}

/// Pattern code (0-based) of every window, indexed by start position.
pub fn pattern_codes(values: &[f64], n: usize, d: usize) -> Result<Vec<u16>> {
    check_order(n)?;
    if d == 0 {
        return Err(Error::InvalidLags("lags must be positive".into()));
    }
    let needed = (n - 1) * d + 1;
    if values.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: values.len(),
        });
    }
    (0..window_count(values.len(), n, d))
        .map(|t| window_code(values, t, n, d).map(|c| c as u16))
        .collect()
}

/// Raw pattern counts at lag `d`.
pub fn pattern_counts(values: &[f64], n: usize, d: usize) -> Result<Vec<u64>> {
    let codes = pattern_codes(values, n, d)?;
    let mut counts = vec![0u64; factorial(n)];
    for code in codes {
        counts[code as usize] += 1;
    }
    Ok(counts)
}

/// Relative frequencies `p_pi(d)` over all `T - (n-1)d` windows.
pub fn pattern_frequencies(ts: &TimeSeries, n: usize, d: usize) -> Result<PatternDistribution> {
    ts.check_finite()?;
    let counts = pattern_counts(&ts.values, n, d)?;
    let total = window_count(ts.len(), n, d);
    Ok(PatternDistribution {
        order: n,
        lags: LagSet::single(d)?,
        probabilities: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        window_count: total,
    })
}

/// Mean of the per-lag distributions.
pub fn lag_averaged_frequencies(
    ts: &TimeSeries,
    n: usize,
    lags: &LagSet,
) -> Result<PatternDistribution> {
    check_order(n)?;
    let needed = (n - 1) * lags.max() + 1;
    if ts.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: ts.len(),
        });
    }
    let mut probabilities = vec![0.0; factorial(n)];
    let mut window_total = 0;
    for d in lags.iter() {
        let dist = pattern_frequencies(ts, n, d)?;
        for (acc, p) in probabilities.iter_mut().zip(&dist.probabilities) {
            *acc += p;
        }
        window_total += dist.window_count;
    }
    let m = lags.len() as f64;
    probabilities.iter_mut().for_each(|p| *p /= m);
    Ok(PatternDistribution {
        order: n,
        lags: lags.clone(),
        probabilities,
        window_count: window_total,
    })
}
