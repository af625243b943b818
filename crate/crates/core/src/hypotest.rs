//! Hypothesis tests against Brownian-motion and i.i.d. nulls.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::models::{bm_pattern_probabilities, ModelSpec};
use crate::ordstats::{turning_point_count, up_step_count};
use crate::patterns::{euclidean, lag_averaged_frequencies, LagSet, PatternDistribution};
use crate::series::TimeSeries;

/// Outcome of a test. Analytic tests report `n_simulations = 1`, no seed, and
/// the null mean as `null_median` (the null is symmetric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic_name: String,
    pub observed: f64,
    pub null_median: f64,
    pub p_value: f64,
    pub n_simulations: usize,
    pub seed: Option<u64>,
    pub extra: BTreeMap<String, f64>,
}

/// Two-sided p-value of a standard normal z-score.
pub fn two_sided_normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Share of null distances strictly greater than `observed`.
pub fn exceedance_fraction(null: &[f64], observed: f64) -> f64 {
    null.iter().filter(|&&d| d > observed).count() as f64 / null.len() as f64
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(sample: &[f64]) -> f64 {
    quantile(sample, 0.5)
}

fn quantile(sample: &[f64], q: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    s[lo] + (h - lo as f64) * (s[h.ceil() as usize] - s[lo])
}

/// Distance test result together with the simulated null distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTest {
    pub result: TestResult,
    pub null_distances: Vec<f64>,
}

/// Monte Carlo goodness-of-fit of a pattern distribution to Brownian motion.
///
/// Each of the `simulations` Brownian paths of length `len` is summarized with
/// the same order and lag averaging as `q`; the p-value is the share of null
/// distances `||b_k - b||` strictly above `||q - b||`.
pub fn mc_distance_test(
    q: &PatternDistribution,
    len: usize,
    simulations: usize,
    seed: u64,
) -> Result<DistanceTest> {
    if len < 10 {
        return Err(Error::TooShort {
            needed: 10,
            got: len,
        });
    }
    if simulations < 100 {
        return Err(Error::InvalidSpec(format!(
            "need at least 100 simulations, got {simulations}"
        )));
    }
    let b = bm_pattern_probabilities(q.order)?.probabilities;
    let observed = euclidean(&q.probabilities, &b);
    let template = ModelSpec::bm(len, seed);
    let null_distances = (0..simulations as u64)
        .into_par_iter()
        .map(|i| {
            let path = TimeSeries::new(template.trajectory(i)?);
            let dist = lag_averaged_frequencies(&path, q.order, &q.lags)?;
            Ok(euclidean(&dist.probabilities, &b))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut extra = BTreeMap::new();
    extra.insert("null_q05".into(), quantile(&null_distances, 0.05));
    extra.insert("null_q95".into(), quantile(&null_distances, 0.95));
    extra.insert(
        "null_mean".into(),
        null_distances.iter().sum::<f64>() / simulations as f64,
    );
    extra.insert("T".into(), len as f64);
    Ok(DistanceTest {
        result: TestResult {
            statistic_name: "bm_pattern_distance".into(),
            observed,
            null_median: median(&null_distances),
            p_value: exceedance_fraction(&null_distances, observed),
            n_simulations: simulations,
            seed: Some(seed),
            extra,
        },
        null_distances,
    })
}

fn count_test(
    name: &str,
    observed: u64,
    mean: f64,
    variance: f64,
    exact: Option<(u64, f64)>,
) -> TestResult {
    let z = (observed as f64 - mean) / variance.sqrt();
    let p_value = match exact {
        Some((trials, p)) => exact_binomial_two_sided(observed, trials, p),
        None => two_sided_normal_p(z),
    };
    let mut extra = BTreeMap::new();
    extra.insert("z".into(), z);
    extra.insert("null_mean".into(), mean);
    extra.insert("null_variance".into(), variance);
    TestResult {
        statistic_name: name.into(),
        observed: observed as f64,
        null_median: mean,
        p_value,
        n_simulations: 1,
        seed: None,
        extra,
    }
}

fn exact_binomial_two_sided(k: u64, n: u64, p: f64) -> f64 {
    let dist = Binomial::new(p, n).expect("valid binomial");
    let lower = dist.cdf(k);
    let upper = if k == 0 { 1.0 } else { dist.sf(k - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

/// Prop.-3 style tests: under Brownian motion the lag-1 turning points are
/// Binomial(T-2, 1/2) and the up-steps Binomial(T-1, 1/2).
///
/// Returns `(turning points, up-steps)`. With `exact` the p-values come from
/// the binomial distribution instead of the normal approximation.
pub fn coin_toss_test(ts: &TimeSeries, exact: bool) -> Result<(TestResult, TestResult)> {
    ts.check_finite()?;
    if ts.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: ts.len(),
        });
    }
    let (v, nv) = turning_point_count(&ts.values, 1)?;
    let (u, nu) = up_step_count(&ts.values, 1)?;
    let turning = count_test(
        "turning_points_bm",
        v,
        nv as f64 / 2.0,
        nv as f64 / 4.0,
        exact.then_some((nv, 0.5)),
    );
    let up = count_test(
        "up_steps_bm",
        u,
        nu as f64 / 2.0,
        nu as f64 / 4.0,
        exact.then_some((nu, 0.5)),
    );
    Ok((turning, up))
}

/// Mean and variance of the number of turning points in an i.i.d. sequence of length `len`.
pub fn turning_point_moments(len: usize) -> (f64, f64) {
    let t = len as f64;
    (2.0 / 3.0 * (t - 2.0), 8.0 / 45.0 * (t - 2.0) + 1.0 / 30.0)
}

/// Mean and variance of the number of up-steps in an i.i.d. sequence of length `len`.
pub fn up_step_moments(len: usize) -> (f64, f64) {
    let t = len as f64;
    (0.5 * (t - 1.0), (t - 1.0) / 12.0 + 1.0 / 6.0)
}

/// Bienaymé's test of the i.i.d. hypothesis from turning points and up-steps.
///
/// Returns `(turning points, up-steps)` with normal-approximation p-values.
pub fn bienayme_test(ts: &TimeSeries) -> Result<(TestResult, TestResult)> {
    ts.check_finite()?;
    if ts.len() < 5 {
        return Err(Error::TooShort {
            needed: 5,
            got: ts.len(),
        });
    }
    let (v, _) = turning_point_count(&ts.values, 1)?;
    let (u, _) = up_step_count(&ts.values, 1)?;
    let (mv, vv) = turning_point_moments(ts.len());
    let (mu, vu) = up_step_moments(ts.len());
    Ok((
        count_test("turning_points_iid", v, mv, vv, None),
        count_test("up_steps_iid", u, mu, vu, None),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagVarianceRow {
    pub lag: usize,
    pub mean_alpha: f64,
    pub var_alpha: f64,
    pub mean_beta: f64,
    pub var_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceLagTable {
    pub model: ModelSpec,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<LagVarianceRow>,
    /// Least-squares slope of `Var(alpha(d))` against `d`.
    pub slope_alpha: f64,
    pub slope_beta: f64,
    /// Set when fewer than 1000 trials were run; with one trial all variances are 0.
    pub warning: Option<String>,
}

impl VarianceLagTable {
    /// Slope divided by the variance at the smallest lag.
    pub fn relative_slopes(&self) -> (f64, f64) {
        let first = &self.rows[0];
        (
            self.slope_alpha / first.var_alpha,
            self.slope_beta / first.var_beta,
        )
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, _) = mean_var(xs);
    let (my, _) = mean_var(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Empirical variance of `alpha(d)` and `beta(d)` across simulated trajectories.
pub fn variance_vs_lag(
    model: &ModelSpec,
    len: usize,
    trials: usize,
    lags: &LagSet,
    seed: u64,
) -> Result<VarianceLagTable> {
    if trials == 0 {
        return Err(Error::InvalidSpec("need at least one trial".into()));
    }
    let needed = 2 * lags.max() + 1;
    if len < needed {
        return Err(Error::TooShort { needed, got: len });
    }
    let spec = model.with(len, seed);
    spec.validate()?;
    // per trial: [alpha(d1), beta(d1), alpha(d2), ...]
    let samples = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let x = spec.trajectory(i)?;
            let mut row = Vec::with_capacity(2 * lags.len());
            for d in lags.iter() {
                let (v, nv) = turning_point_count(&x, d)?;
                let (u, nu) = up_step_count(&x, d)?;
                row.push(v as f64 / nv as f64);
                row.push(2.0 * u as f64 / nu as f64 - 1.0);
            }
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let rows: Vec<LagVarianceRow> = lags
        .iter()
        .enumerate()
        .map(|(j, lag)| {
            let a: Vec<f64> = samples.iter().map(|r| r[2 * j]).collect();
            let b: Vec<f64> = samples.iter().map(|r| r[2 * j + 1]).collect();
            let (mean_alpha, var_alpha) = mean_var(&a);
            let (mean_beta, var_beta) = mean_var(&b);
            LagVarianceRow {
                lag,
                mean_alpha,
                var_alpha,
                mean_beta,
                var_beta,
            }
        })
        .collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.lag as f64).collect();
    let va: Vec<f64> = rows.iter().map(|r| r.var_alpha).collect();
    let vb: Vec<f64> = rows.iter().map(|r| r.var_beta).collect();
    let warning = (trials < 1000)
        .then(|| format!("only {trials} trials; variance estimates are unreliable below 1000"));
    Ok(VarianceLagTable {
        model: spec,
        trials,
        seed,
        slope_alpha: ls_slope(&ds, &va),
        slope_beta: ls_slope(&ds, &vb),
        rows,
        warning,
    })
}

/// Which positions of a permutation must be turning points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurningPredicate {
    /// Positions 2 and 3 are both turning points.
    TwoInteriorTurningPoints,
    /// Positions 2 and `n-1` are both turning points.
    TurningAtSecondAndSecondLast,
}

fn is_turning(p: &[usize], i: usize) -> bool {
    (p[i] > p[i - 1]) == (p[i] > p[i + 1])
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Counts permutations of length `n` satisfying `predicate`, by enumeration.
pub fn permutation_count_oracle(n: usize, predicate: TurningPredicate) -> Result<u64> {
    if !(1..=10).contains(&n) {
        return Err(Error::InvalidOrder(n));
    }
    // 0-based positions to check
    let positions: Vec<usize> = match predicate {
        TurningPredicate::TwoInteriorTurningPoints if n >= 4 => vec![1, 2],
        TurningPredicate::TurningAtSecondAndSecondLast if n >= 3 => vec![1, n - 2],
        _ => return Ok(0),
    };
    let mut p: Vec<usize> = (1..=n).collect();
    let mut count = 0;
    loop {
        count += u64::from(positions.iter().all(|&i| is_turning(&p, i)));
        if !next_permutation(&mut p) {
            return Ok(count);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn combinatorial_counts() {
        use TurningPredicate::*;
        assert_eq!(
            permutation_count_oracle(4, TwoInteriorTurningPoints).unwrap(),
            10
        );
        assert_eq!(
            permutation_count_oracle(5, TurningAtSecondAndSecondLast).unwrap(),
            54
        );
        assert_eq!(
            permutation_count_oracle(3, TwoInteriorTurningPoints).unwrap(),
            0
        );
        assert_eq!(
            permutation_count_oracle(3, TurningAtSecondAndSecondLast).unwrap(),
            4
        );
    }

    #[test]
    fn next_permutation_enumerates_all() {
        let mut p = vec![1, 2, 3, 4];
        let mut n = 1;
        while next_permutation(&mut p) {
            n += 1;
        }
        assert_eq!(n, 24);
        assert_eq!(p, vec![4, 3, 2, 1]);
    }

    #[test]
    fn bienayme_moments_at_100() {
        let (m, v) = turning_point_moments(100);
        assert_abs_diff_eq!(m, 65.333, epsilon = 1e-3);
        assert_abs_diff_eq!(v, 17.4556, epsilon = 1e-4);
        let (mu, vu) = up_step_moments(100);
        assert_eq!(mu, 49.5);
        assert_abs_diff_eq!(vu, 101.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn coin_toss_on_monotone_series() {
        let ts = TimeSeries::new((0..100).map(f64::from).collect());
        let (turn, up) = coin_toss_test(&ts, false).unwrap();
        assert_eq!(up.observed, 99.0);
        assert!(up.extra["z"] > 9.0);
        assert!(up.p_value < 1e-15);
        assert_eq!(turn.observed, 0.0);
        let (_, up_exact) = coin_toss_test(&ts, true).unwrap();
        assert_abs_diff_eq!(up_exact.p_value, 2.0 * 0.5f64.powi(99), epsilon = 1e-40);
    }

    #[test]
    fn z_matches_prop3_formula() {
        let x: Vec<f64> = [0.0, 1.0, 0.5, 2.0, 3.0, 1.0, 4.0, 5.0, 4.5].to_vec();
        let ts = TimeSeries::new(x);
        let (turn, up) = coin_toss_test(&ts, false).unwrap();
        let alpha = crate::ordstats::turning_rate(&ts, 1).unwrap();
        let beta = crate::ordstats::up_down_balance(&ts, 1).unwrap();
        let (za, zb) = crate::ordstats::z_scores(alpha, beta, ts.len()).unwrap();
        assert_abs_diff_eq!(turn.extra["z"], za, epsilon = 1e-12);
        assert_abs_diff_eq!(up.extra["z"], zb, epsilon = 1e-12);
    }

    #[test]
    fn exact_binomial_is_symmetric() {
        assert_abs_diff_eq!(exact_binomial_two_sided(5, 10, 0.5), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            exact_binomial_two_sided(2, 10, 0.5),
            exact_binomial_two_sided(8, 10, 0.5),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            exact_binomial_two_sided(0, 10, 0.5),
            2.0 / 1024.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn distance_test_extremes() {
        let b = bm_pattern_probabilities(4).unwrap().probabilities;
        let lags: LagSet = "1..3".parse().unwrap();
        let q = PatternDistribution {
            order: 4,
            lags: lags.clone(),
            probabilities: b.clone(),
            window_count: 1,
        };
        let exact = mc_distance_test(&q, 200, 200, 3).unwrap();
        assert_eq!(exact.result.observed, 0.0);
        assert_eq!(exact.result.p_value, 1.0);

        let mut point = vec![0.0; 24];
        point[0] = 1.0;
        let q = PatternDistribution {
            probabilities: point.clone(),
            ..q
        };
        let far = mc_distance_test(&q, 200, 200, 3).unwrap();
        assert_abs_diff_eq!(far.result.observed, euclidean(&point, &b), epsilon = 1e-15);
        assert_abs_diff_eq!(far.result.observed, 0.90, epsilon = 0.005);
        assert_eq!(far.result.p_value, 0.0);
        assert_eq!(far.null_distances, exact.null_distances);
    }

    #[test]
    fn distance_test_input_checks() {
        let q = PatternDistribution {
            order: 4,
            lags: LagSet::single(1).unwrap(),
            probabilities: vec![1.0 / 24.0; 24],
            window_count: 1,
        };
        assert!(mc_distance_test(&q, 5, 200, 1).is_err());
        assert!(mc_distance_test(&q, 100, 99, 1).is_err());
    }

    #[test]
    fn single_trial_variance_warns() {
        let t = variance_vs_lag(&ModelSpec::bm(1, 0), 100, 1, &"1..3".parse().unwrap(), 4).unwrap();
        assert!(t.warning.is_some());
        assert!(t
            .rows
            .iter()
            .all(|r| r.var_alpha == 0.0 && r.var_beta == 0.0));
        assert!(
            variance_vs_lag(&ModelSpec::bm(1, 0), 100, 0, &LagSet::single(1).unwrap(), 4).is_err()
        );
    }

    #[test]
    fn slope_of_line() {
        assert_abs_diff_eq!(
            ls_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]),
            2.0,
            epsilon = 1e-12
        );
    }
}
