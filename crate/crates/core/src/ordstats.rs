//! Scalar order statistics: up-down balance, turning rate, persistence,
//! permutation entropy and conditional permutation entropy.
//!
//! All entropies use the natural logarithm with `0 ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::{self, LagSet, PatternDistribution};
use crate::series::TimeSeries;

fn require_len(len: usize, needed: usize) -> Result<()> {
    if len < needed {
        Err(Error::TooShort { needed, got: len })
    } else {
        Ok(())
    }
}

/// Number of `t` with `x_t < x_{t+d}`, and the number of pairs compared.
pub fn up_step_count(values: &[f64], d: usize) -> Result<(u64, u64)> {
    if d == 0 {
        return Err(Error::InvalidLags("lags must be positive".into()));
    }
    require_len(values.len(), d + 1)?;
    let mut up = 0;
    for t in 0..values.len() - d {
        let (a, b) = (values[t], values[t + d]);
        if a == b {
            return Err(Error::Tie {
                first: t,
                second: t + d,
            });
        }
        up += u64::from(a < b);
    }
    Ok((up, (values.len() - d) as u64))
}

/// Number of turning points `x_{t+d}` among windows `(x_t, x_{t+d}, x_{t+2d})`,
/// and the number of windows.
pub fn turning_point_count(values: &[f64], d: usize) -> Result<(u64, u64)> {
    if d == 0 {
        return Err(Error::InvalidLags("lags must be positive".into()));
    }
    require_len(values.len(), 2 * d + 1)?;
    let mut turning = 0;
    for t in 0..values.len() - 2 * d {
        let (a, b, c) = (values[t], values[t + d], values[t + 2 * d]);
        if a == b || b == c {
            let first = if a == b { t } else { t + d };
            return Err(Error::Tie {
                first,
                second: first + d,
            });
        }
        turning += u64::from((b > a) == (b > c));
    }
    Ok((turning, (values.len() - 2 * d) as u64))
}

/// `beta(d) = 2 p_12(d) - 1`.
pub fn up_down_balance(ts: &TimeSeries, d: usize) -> Result<f64> {
    ts.check_finite()?;
    let (up, total) = up_step_count(&ts.values, d)?;
    Ok(2.0 * up as f64 / total as f64 - 1.0)
}

/// `alpha(d) = p_132 + p_231 + p_213 + p_312`, the share of turning points.
pub fn turning_rate(ts: &TimeSeries, d: usize) -> Result<f64> {
    ts.check_finite()?;
    let (turning, total) = turning_point_count(&ts.values, d)?;
    Ok(turning as f64 / total as f64)
}

/// `tau(d) = 2/3 - alpha(d)`.
pub fn persistence(ts: &TimeSeries, d: usize) -> Result<f64> {
    Ok(2.0 / 3.0 - turning_rate(ts, d)?)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector.
pub fn shannon_entropy(probabilities: &[f64]) -> f64 {
    -probabilities.iter().map(|&p| plogp(p)).sum::<f64>()
}

pub fn permutation_entropy(dist: &PatternDistribution) -> f64 {
    shannon_entropy(&dist.probabilities)
}

/// Conditional entropy from the order-2 and order-3 frequencies.
///
/// `p12` is `p_12`; `p3` holds the six order-3 frequencies in lexicographic
/// order (123, 132, 213, 231, 312, 321).
pub fn conditional_entropy_from(p12: f64, p3: &[f64]) -> f64 {
    let grouped = [p3[0], p3[1] + p3[3], p3[2] + p3[4], p3[5]];
    shannon_entropy(&grouped) + plogp(p12) + plogp(1.0 - p12)
}

/// Entropy of the order-3 pattern given the order-2 pattern, at lag `d`.
pub fn conditional_entropy(ts: &TimeSeries, d: usize) -> Result<f64> {
    ts.check_finite()?;
    require_len(ts.len(), 2 * d + 1)?;
    let (up, total) = up_step_count(&ts.values, d)?;
    let p3 = patterns::pattern_frequencies(ts, 3, d)?;
    Ok(conditional_entropy_from(
        up as f64 / total as f64,
        &p3.probabilities,
    ))
}

/// Lag-1 z-scores against Brownian motion: `(alpha - 1/2) 2 sqrt(T-2)` and `beta sqrt(T-1)`.
pub fn z_scores(alpha: f64, beta: f64, len: usize) -> Result<(f64, f64)> {
    require_len(len, 3)?;
    let t = len as f64;
    Ok((
        (alpha - 0.5) * 2.0 * (t - 2.0).sqrt(),
        beta * (t - 1.0).sqrt(),
    ))
}

/// Scalar statistics averaged over a lag set.
///
/// The z-scores always use the lag-1 values, whatever the lag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    pub lag_set: LagSet,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub entropy: f64,
    pub entropy_order: usize,
    pub cond_entropy: f64,
    #[serde(rename = "T")]
    pub len: usize,
    pub z_alpha: f64,
    pub z_beta: f64,
}

pub const DEFAULT_ENTROPY_ORDER: usize = 3;

pub fn summarize(ts: &TimeSeries, lag_set: &LagSet) -> Result<OrderSummary> {
    summarize_with_order(ts, lag_set, DEFAULT_ENTROPY_ORDER)
}

/// [`summarize`] with a chosen order for the permutation entropy.
pub fn summarize_with_order(
    ts: &TimeSeries,
    lag_set: &LagSet,
    entropy_order: usize,
) -> Result<OrderSummary> {
    ts.check_finite()?;
    patterns::check_order(entropy_order)?;
    let needed = ((entropy_order - 1) * lag_set.max()).max(2 * lag_set.max()) + 1;
    require_len(ts.len(), needed.max(3))?;

    let m = lag_set.len() as f64;
    let (mut alpha, mut beta, mut entropy, mut cond) = (0.0, 0.0, 0.0, 0.0);
    for d in lag_set.iter() {
        alpha += turning_rate(ts, d)?;
        beta += up_down_balance(ts, d)?;
        entropy += permutation_entropy(&patterns::pattern_frequencies(ts, entropy_order, d)?);
        cond += conditional_entropy(ts, d)?;
    }
    let (alpha, beta) = (alpha / m, beta / m);
    let (z_alpha, z_beta) = z_scores(turning_rate(ts, 1)?, up_down_balance(ts, 1)?, ts.len())?;
    Ok(OrderSummary {
        lag_set: lag_set.clone(),
        alpha,
        beta,
        tau: 2.0 / 3.0 - alpha,
        entropy: entropy / m,
        entropy_order,
        cond_entropy: cond / m,
        len: ts.len(),
        z_alpha,
        z_beta,
    })
}
