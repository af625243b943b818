//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criterion 7 needs daily WTI closes: set `ORDPAT_WTI_CSV` to a CSV with a
//! date column and a price column (`ORDPAT_WTI_COLUMN`, default `1`).

mod common;

use std::time::Instant;

use ordpat::changepoint::{
    change_curve, changepoint_significance, recursive_segmentation, CurveOptions, Method,
    SegmentationOptions,
};
use ordpat::hypotest::{
    bienayme_test, mc_distance_test, permutation_count_oracle, turning_point_moments,
    variance_vs_lag, TurningPredicate,
};
use ordpat::models::{bm_pattern_probabilities, simulate, ModelSpec, Noise};
use ordpat::ordstats::{summarize, turning_point_count, turning_rate};
use ordpat::patterns::{
    lag_averaged_frequencies, negate_index, pattern_counts, pattern_frequencies, reverse_index,
};
use ordpat::rng::substream;
use ordpat::series::{load_csv, preprocess, Column, CsvOptions, PreprocessSpec};
use ordpat::{LagSet, TimeSeries};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    use TurningPredicate::*;
    let start = Instant::now();
    let a = permutation_count_oracle(4, TwoInteriorTurningPoints).map_err(|e| e.to_string())?;
    let b = permutation_count_oracle(5, TurningAtSecondAndSecondLast).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        a == 10 && b == 54 && secs < 1.0,
        format!("n=4: {a}, n=5: {b}, {secs:.4} s"),
    )
}

fn criterion_2() -> Outcome {
    let trials = 100_000;
    let len = 2500;
    let table = variance_vs_lag(
        &ModelSpec::bm(len, 0),
        len,
        trials,
        &LagSet::single(1).unwrap(),
        1002,
    )
    .map_err(|e| e.to_string())?;
    let row = &table.rows[0];
    let want_va = 1.0 / (4.0 * (len - 2) as f64);
    let want_vb = 1.0 / (len - 1) as f64;
    let mc_sigma = (row.var_alpha / trials as f64).sqrt();
    let z = (row.mean_alpha - 0.5) / mc_sigma;
    let ra = row.var_alpha / want_va - 1.0;
    let rb = row.var_beta / want_vb - 1.0;
    check(
        z.abs() < 3.0 && ra.abs() < 0.05 && rb.abs() < 0.05,
        format!(
            "mean alpha z = {z:.2}, Var alpha rel. err {:+.2}%, Var beta rel. err {:+.2}%",
            100.0 * ra,
            100.0 * rb
        ),
    )
}

fn criterion_3() -> Outcome {
    let series = 10_000u64;
    let len = 10_000;
    let model = ModelSpec::ar1(0.0, Noise::Gaussian, len, 1003);
    let results: Vec<(f64, f64)> = (0..series)
        .into_par_iter()
        .map(|i| {
            let ts = TimeSeries::new(model.trajectory(i).unwrap());
            let (v, _) = bienayme_test(&ts).unwrap();
            (v.observed, v.p_value)
        })
        .collect();
    let n = series as f64;
    let mean = results.iter().map(|r| r.0).sum::<f64>() / n;
    let var = results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let rejections = results.iter().filter(|r| r.1 < 0.05).count() as f64 / n;
    let (want_mean, want_var) = turning_point_moments(len);
    let rm = mean / want_mean - 1.0;
    let rv = var / want_var - 1.0;
    check(
        rm.abs() < 0.02 && rv.abs() < 0.02 && (rejections - 0.05).abs() <= 0.01,
        format!(
            "mean rel. err {:+.3}%, variance rel. err {:+.2}%, rejection rate {:.4}",
            100.0 * rm,
            100.0 * rv,
            rejections
        ),
    )
}

/// `||p(d1) - p(d2)||` for all lag pairs from 1 to 6.
fn lag_pair_distances(values: Vec<f64>) -> Vec<f64> {
    let ts = TimeSeries::new(values);
    let dists: Vec<Vec<f64>> = (1..=6)
        .map(|d| pattern_frequencies(&ts, 4, d).unwrap().probabilities)
        .collect();
    let mut out = Vec::with_capacity(15);
    for i in 0..6 {
        for j in i + 1..6 {
            let sq: f64 = dists[i]
                .iter()
                .zip(&dists[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            out.push(sq.sqrt());
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let len = 1_000_000;
    let ts = simulate(&ModelSpec::bm(len, 1004)).map_err(|e| e.to_string())?;
    let exact = bm_pattern_probabilities(4).unwrap().probabilities;
    let lag1 = pattern_frequencies(&ts, 4, 1).unwrap().probabilities;
    let windows = (len - 3) as f64;
    let worst_table = (0..24)
        .map(|k| (lag1[k] - exact[k]).abs() / (exact[k] * (1.0 - exact[k]) / windows).sqrt())
        .fold(0.0, f64::max);

    // Overlapping windows make the spread of p(d) grow with d, so the band for
    // each lag pair comes from independent paths of the same length.
    let observed = lag_pair_distances(ts.values);
    let reference = ModelSpec::bm(len, 2004);
    let replicates: Vec<Vec<f64>> = (0..200u64)
        .into_par_iter()
        .map(|i| lag_pair_distances(reference.trajectory(i).unwrap()))
        .collect();
    let n = replicates.len() as f64;
    let worst_pair = (0..observed.len())
        .map(|p| {
            let mean = replicates.iter().map(|r| r[p]).sum::<f64>() / n;
            let sd = (replicates
                .iter()
                .map(|r| (r[p] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt();
            (observed[p] - mean) / sd
        })
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        worst_table < 3.0 && worst_pair < 3.0,
        format!(
            "largest |z| vs table {worst_table:.2}, largest lag-pair distance z {worst_pair:.2}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let lags = LagSet::up_to(10).unwrap();
    let table = variance_vs_lag(&ModelSpec::bm(2500, 0), 2500, 20_000, &lags, 1005)
        .map_err(|e| e.to_string())?;
    let (ra, rb) = table.relative_slopes();
    let ea = ra / (1.0 / 3.0) - 1.0;
    let eb = rb / 0.8 - 1.0;
    check(
        ea.abs() <= 0.2 && eb.abs() <= 0.2,
        format!(
            "alpha slope / Var alpha(1) = {ra:.3} ({:+.1}%), beta slope / Var beta(1) = {rb:.3} ({:+.1}%)",
            100.0 * ea,
            100.0 * eb
        ),
    )
}

fn criterion_6() -> Outcome {
    let threshold = 0.548;
    let len = 8497;
    let opts = CurveOptions::new(Method::Beta, LagSet::up_to(3).unwrap());
    let nulls = [
        ("BM", ModelSpec::bm(len, 0), 0.37..=0.47),
        (
            "AR(1) 0.99 gaussian",
            ModelSpec::ar1(0.99, Noise::Gaussian, len, 0),
            0.0..=0.01,
        ),
        (
            "AR(1) 0.998 exponential",
            ModelSpec::ar1(0.998, Noise::ExponentialCentered, len, 0),
            0.06..=0.12,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model, band) in nulls {
        let r = changepoint_significance(threshold, &model, len, &opts, 1000, 1006)
            .map_err(|e| e.to_string())?;
        ok &= band.contains(&r.p_value);
        parts.push(format!(
            "{name}: {:.3} (median max {:.4})",
            r.p_value, r.null_median
        ));
    }
    check(ok, parts.join(", "))
}

/// Row range of labels between two date prefixes, inclusive.
fn rows(ts: &TimeSeries, from: &str, to: &str) -> Result<std::ops::Range<usize>, String> {
    ts.label_range(from, to)
        .ok_or_else(|| format!("no rows between {from} and {to}"))
}

fn month_hit(ts: &TimeSeries, index: usize, month: &str, slack: usize) -> bool {
    let Some(range) = ts.label_range(month, month) else {
        return false;
    };
    let k = index - 1;
    k + slack >= range.start && k < range.end + slack
}

fn criterion_7(path: &str) -> Outcome {
    let column: Column = std::env::var("ORDPAT_WTI_COLUMN")
        .unwrap_or_else(|_| "1".into())
        .parse()
        .unwrap();
    let raw = load_csv(
        path,
        &column,
        Some(&Column::Index(0)),
        &CsvOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let ts = preprocess(&raw, &PreprocessSpec::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();

    let s = summarize(&ts, &LagSet::single(1).unwrap()).map_err(|e| e.to_string())?;
    let table5 = format!(
        "{:.3}/{:.3}/{:.2}/{:.2}",
        s.alpha, s.beta, s.z_alpha, s.z_beta
    );
    ok &= table5 == "0.510/0.032/1.84/2.95";
    parts.push(format!("T = {}, alpha/beta/z = {table5}", ts.len()));

    let segments = [
        ("1986-2019", rows(&ts, "1986", "2019")?, 0.0004),
        ("1986-2001", rows(&ts, "1986-01-02", "2001-10-16")?, 0.038),
        ("2001-08", rows(&ts, "2001-10-17", "2008-07-07")?, 0.0),
        ("2009-14", rows(&ts, "2008-12-26", "2014-07-22")?, 0.136),
        ("2015-19", rows(&ts, "2014-07-23", "2019-09-03")?, 0.889),
    ];
    let lags = LagSet::up_to(3).unwrap();
    for (name, range, want) in segments {
        let seg = ts.slice(range);
        let q = lag_averaged_frequencies(&seg, 4, &lags).map_err(|e| e.to_string())?;
        let t = mc_distance_test(&q, seg.len(), 100_000, 1007).map_err(|e| e.to_string())?;
        ok &= (t.result.p_value - want).abs() <= 0.05;
        parts.push(format!("p[{name}] = {:.4}", t.result.p_value));
    }

    let seg = recursive_segmentation(&ts, &SegmentationOptions::beta_default(3))
        .map_err(|e| e.to_string())?;
    let months = ["2013-08", "1999-02", "2008-07"];
    let found: Vec<String> = seg
        .points
        .iter()
        .map(|p| p.label.clone().unwrap_or_default())
        .collect();
    ok &= seg.points.len() == 3
        && seg
            .points
            .iter()
            .zip(months)
            .all(|(p, m)| month_hit(&ts, p.index, m, 10));
    parts.push(format!("change points {found:?}"));
    check(ok, parts.join(", "))
}

fn random_ranked(rng: &mut impl Rng, max_len: usize) -> Vec<f64> {
    let len = rng.random_range(1..=max_len);
    let mut v: Vec<f64> = (1..=len).map(|x| x as f64).collect();
    v.shuffle(rng);
    v
}

fn exact_properties() -> Result<(), String> {
    let mut rng = substream(1008, 0);
    for case in 0..1000 {
        let v = random_ranked(&mut rng, 50);
        let n = rng.random_range(2..=5);
        let d = rng.random_range(1..=3);
        let naive = common::naive_counts(&v, n, d);
        let Ok(fast) = pattern_counts(&v, n, d) else {
            if v.len() > (n - 1) * d {
                return Err(format!(
                    "case {case}: counting failed on a long enough series"
                ));
            }
            continue;
        };
        if fast != naive {
            return Err(format!("case {case}: optimized and naive counts differ"));
        }
        let ts = TimeSeries::new(v);
        let f = pattern_frequencies(&ts, n, d).unwrap();
        if (f.probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(format!("case {case}: frequencies do not sum to 1"));
        }
        let cubed = pattern_frequencies(&ts.map(|x| x.powi(3)), n, d).unwrap();
        let logged = pattern_frequencies(&ts.map(f64::ln), n, d).unwrap();
        if cubed.probabilities != f.probabilities || logged.probabilities != f.probabilities {
            return Err(format!(
                "case {case}: monotone transform changed frequencies"
            ));
        }
        let neg = pattern_frequencies(&ts.negated(), n, d).unwrap();
        let rev = pattern_frequencies(&ts.reversed(), n, d).unwrap();
        for p in f.patterns() {
            if neg.prob(negate_index(p)) != f.prob(p) {
                return Err(format!("case {case}: negation mapping fails at {p}"));
            }
            if rev.prob(reverse_index(p)) != f.prob(p) {
                return Err(format!("case {case}: reversal mapping fails at {p}"));
            }
        }
        if ts.len() > 2 * d {
            let f3 = pattern_frequencies(&ts, 3, d).unwrap();
            let (turning, windows) = turning_point_count(&ts.values, d).unwrap();
            let alpha = turning_rate(&ts, d).unwrap();
            if alpha != turning as f64 / windows as f64
                || (alpha + f3.get(1) + f3.get(6) - 1.0).abs() > 1e-12
            {
                return Err(format!("case {case}: alpha + p123 + p321 != 1"));
            }
            let s = summarize(&ts, &LagSet::single(d).unwrap()).unwrap();
            if s.tau != 2.0 / 3.0 - s.alpha {
                return Err(format!("case {case}: tau != 2/3 - alpha"));
            }
        }
    }
    Ok(())
}

/// JSON of a small end-to-end pipeline using every source of randomness.
fn pipeline_artifact() -> String {
    let model = ModelSpec::ar1(0.9, Noise::ExponentialCentered, 3000, 1008);
    let ts = simulate(&model).unwrap();
    let jittered = preprocess(&ts.map(|x| (x * 10.0).round()), &PreprocessSpec::default()).unwrap();
    let lags = LagSet::up_to(3).unwrap();
    let summary = summarize(&jittered, &lags).unwrap();
    let q = lag_averaged_frequencies(&jittered, 4, &lags).unwrap();
    let distance = mc_distance_test(&q, jittered.len(), 200, 1008).unwrap();
    let opts = CurveOptions::new(Method::Beta, lags.clone());
    let curve = change_curve(&jittered, &opts).unwrap();
    let significance = changepoint_significance(
        curve.max_abs().unwrap(),
        &ModelSpec::bm(0, 0),
        3000,
        &opts,
        200,
        1008,
    )
    .unwrap();
    let variance = variance_vs_lag(&ModelSpec::bm(0, 0), 500, 300, &lags, 1008).unwrap();
    serde_json::to_string(&(
        &jittered.values,
        summary,
        distance.result,
        curve.to_csv(None),
        significance,
        variance,
    ))
    .unwrap()
}

fn criterion_8() -> Outcome {
    exact_properties()?;
    let runs: Vec<String> = [1, 4, 1]
        .into_iter()
        .map(|threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(pipeline_artifact)
        })
        .collect();
    check(
        runs.windows(2).all(|w| w[0] == w[1]),
        format!(
            "1000 random series pass all identities; {} reruns ({} bytes) identical across thread counts",
            runs.len(),
            runs[0].len()
        ),
    )
}

fn main() {
    let wti = std::env::var("ORDPAT_WTI_CSV").ok();
    let criteria: [Criterion; 7] = [
        (1, "exact turning-point counts", criterion_1),
        (2, "BM lag-1 moments of alpha and beta", criterion_2),
        (3, "turning-point test calibration", criterion_3),
        (4, "BM order-4 table and lag invariance", criterion_4),
        (5, "variance-vs-lag slopes", criterion_5),
        (6, "change-point significance fractions", criterion_6),
        (8, "exact properties and reproducibility", criterion_8),
    ];
    let mut failed = 0;
    for (id, name, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} ({name}): PASS [{secs:.1} s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{secs:.1} s] {detail}");
            }
        }
    }
    match wti {
        Some(path) => match criterion_7(&path) {
            Ok(detail) => println!("criterion 7 (WTI reproduction): PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion 7 (WTI reproduction): FAIL {detail}");
            }
        },
        None => println!("criterion 7 (WTI reproduction): SKIPPED (ORDPAT_WTI_CSV not set)"),
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
