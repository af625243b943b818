use ordpat::changepoint::{
    change_curve, changepoint_significance, find_change_point, local_change_curve,
    recursive_segmentation, ChangeCurve, ChangePoint, CurveOptions, Method, SegmentationOptions,
    Sign,
};
use ordpat::hypotest::{bienayme_test, coin_toss_test, mc_distance_test, variance_vs_lag};
use ordpat::models::{bm_pattern_probabilities, ModelSpec, Noise};
use ordpat::ordstats::summarize_with_order;
use ordpat::patterns::{lag_averaged_frequencies, pattern_frequencies, PatternIndex};
use ordpat::series::{
    load_csv, preprocess, Column, CsvOptions, JitterAmplitude, MissingPolicy, PreprocessSpec,
};
use ordpat::{Error, LagSet, TimeSeries};
use serde_json::{json, Value};

use crate::args::*;

/// What a command produced, in both output formats.
pub struct Artifact {
    pub seed: Option<u64>,
    pub result: Value,
    pub csv: String,
}

pub fn execute(command: &Command) -> ordpat::Result<Artifact> {
    match command {
        Command::Patterns(a) => patterns(a),
        Command::Summary(a) => summary(a),
        Command::TestBm(a) => test_bm(a),
        Command::Bienayme(a) => bienayme(a),
        Command::Changepoint(a) => changepoint(a),
        Command::Segment(a) => segment(a),
        Command::Local(a) => local(a),
        Command::Simulate(a) => simulate(a),
        Command::VarianceLag(a) => variance_lag(a),
    }
}

/// Shortest round-trip form, with an exponent for very large or small values.
fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("floats serialize")
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn parse_rows(spec: &str, len: usize) -> ordpat::Result<std::ops::Range<usize>> {
    let bad = || Error::InvalidSpec(format!("--rows expects start:end, got {spec:?}"));
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    let start = if a.is_empty() {
        0
    } else {
        a.parse().map_err(|_| bad())?
    };
    let end = if b.is_empty() {
        len
    } else {
        b.parse().map_err(|_| bad())?
    };
    if start >= end || end > len {
        return Err(Error::InvalidSpec(format!(
            "--rows {spec} does not fit a series of {len} rows"
        )));
    }
    Ok(start..end)
}

/// Loads, selects rows, then drops missing values, logs and jitters.
fn load(args: &InputArgs) -> ordpat::Result<TimeSeries> {
    let column: Column = args.column.parse().expect("infallible");
    let label_column = match &args.label_column {
        Some(c) => Some(c.parse::<Column>().expect("infallible")),
        None if column != Column::Index(0) => Some(Column::Index(0)),
        None => None,
    };
    if !args.delimiter.is_ascii() {
        return Err(Error::InvalidSpec(
            "delimiter must be a single ASCII character".into(),
        ));
    }
    let missing_policy = match args.missing {
        MissingArg::Drop => MissingPolicy::Drop,
        MissingArg::Fail => MissingPolicy::Fail,
    };
    let options = CsvOptions {
        delimiter: args.delimiter as u8,
        has_header: args.no_header.then_some(false),
        missing_policy,
    };
    let raw = load_csv(&args.input, &column, label_column.as_ref(), &options)?;

    let label_range = match (&args.range, args.preset) {
        (Some(r), _) => Some(
            r.split_once(':')
                .ok_or_else(|| Error::InvalidSpec(format!("--range expects from:to, got {r:?}")))?,
        ),
        (None, Some(p)) => Some(p.label_range()),
        (None, None) => None,
    };
    let selected = if let Some((from, to)) = label_range {
        if raw.labels.is_none() {
            return Err(Error::InvalidSpec(
                "--range and --preset need a label column".into(),
            ));
        }
        let range = raw.label_range(from, to).ok_or(Error::EmptyRange)?;
        raw.slice(range)
    } else if let Some(rows) = &args.rows {
        let range = parse_rows(rows, raw.len())?;
        raw.slice(range)
    } else {
        raw
    };

    preprocess(
        &selected,
        &PreprocessSpec {
            apply_log: args.log,
            jitter: JitterAmplitude::IqrScaled(args.jitter),
            jitter_seed: args.jitter_seed,
            missing_policy,
        },
    )
}

fn patterns(a: &PatternsArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let per_lag = a
        .lags
        .iter()
        .map(|d| pattern_frequencies(&ts, a.order, d))
        .collect::<ordpat::Result<Vec<_>>>()?;
    let mean = lag_averaged_frequencies(&ts, a.order, &a.lags)?;
    let names: Vec<String> = mean.patterns().map(|p| p.to_string()).collect();

    let mut csv = String::from("index,pattern");
    for d in a.lags.iter() {
        csv.push_str(&format!(",lag_{d}"));
    }
    csv.push_str(",mean\n");
    for (k, name) in names.iter().enumerate() {
        csv.push_str(&format!("{},{}", k + 1, name));
        for dist in &per_lag {
            csv.push_str(&format!(",{}", num(dist.probabilities[k])));
        }
        csv.push_str(&format!(",{}\n", num(mean.probabilities[k])));
    }

    let result = json!({
        "T": ts.len(),
        "order": a.order,
        "lags": a.lags,
        "patterns": names,
        "per_lag": per_lag.iter().map(|d| json!({
            "lag": d.lags.as_slice()[0],
            "windows": d.window_count,
            "probabilities": d.probabilities,
        })).collect::<Vec<_>>(),
        "mean": mean.probabilities,
    });
    Ok(Artifact {
        seed: None,
        result,
        csv,
    })
}

fn key_value_csv(value: &Value) -> String {
    let mut csv = String::from("key,value\n");
    if let Value::Object(map) = value {
        for (k, v) in map {
            csv.push_str(&format!("{k},{v}\n"));
        }
    }
    csv
}

fn summary(a: &SummaryArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let s = summarize_with_order(&ts, &a.lags, a.entropy_order)?;
    let mut result = to_value(&s);
    let csv = {
        let mut flat = result.clone();
        flat["lag_set"] = Value::String(a.lags.to_string());
        key_value_csv(&flat)
    };
    result["lag_set"] = to_value(&a.lags);
    Ok(Artifact {
        seed: None,
        result,
        csv,
    })
}

fn test_bm(a: &TestBmArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let q = lag_averaged_frequencies(&ts, a.order, &a.lags)?;
    let test = mc_distance_test(&q, ts.len(), a.simulations, a.seed)?;
    let b = bm_pattern_probabilities(a.order)?;
    let result = json!({
        "test": test.result,
        "order": a.order,
        "lags": a.lags,
        "empirical": q.probabilities,
        "bm": b.probabilities,
    });
    let mut csv = String::from("index,pattern,empirical,bm\n");
    for (k, (e, m)) in q.probabilities.iter().zip(&b.probabilities).enumerate() {
        let p = PatternIndex::new(a.order, k + 1)?;
        csv.push_str(&format!("{},{},{},{}\n", k + 1, p, num(*e), num(*m)));
    }
    Ok(Artifact {
        seed: Some(a.seed),
        result,
        csv,
    })
}

fn bienayme(a: &BienaymeArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let (iid_turning, iid_up) = bienayme_test(&ts)?;
    let (bm_turning, bm_up) = coin_toss_test(&ts, a.exact)?;
    let rows = [
        ("iid", &iid_turning),
        ("iid", &iid_up),
        ("bm", &bm_turning),
        ("bm", &bm_up),
    ];
    let mut csv = String::from("null,statistic,observed,expected,z,p_value\n");
    for (null, t) in rows {
        csv.push_str(&format!(
            "{null},{},{},{},{},{}\n",
            t.statistic_name,
            num(t.observed),
            num(t.null_median),
            num(t.extra["z"]),
            num(t.p_value)
        ));
    }
    let result = json!({
        "T": ts.len(),
        "iid": { "turning_points": iid_turning, "up_steps": iid_up },
        "bm": { "turning_points": bm_turning, "up_steps": bm_up },
    });
    Ok(Artifact {
        seed: None,
        result,
        csv,
    })
}

fn model_spec(
    model: ModelArg,
    p: &ProcessArgs,
    len: usize,
    seed: u64,
) -> ordpat::Result<ModelSpec> {
    let mut spec = match model {
        ModelArg::Bm => {
            if p.phi.is_some() {
                return Err(Error::InvalidSpec("--phi applies to ar1 only".into()));
            }
            ModelSpec::bm(len, seed)
        }
        ModelArg::Ar1 => {
            let phi = p
                .phi
                .ok_or_else(|| Error::InvalidSpec("ar1 needs --phi".into()))?;
            let noise = match p.noise {
                NoiseArg::Gaussian => Noise::Gaussian,
                NoiseArg::Exponential => Noise::ExponentialCentered,
            };
            ModelSpec::ar1(phi, noise, len, seed)
        }
    };
    spec.burn_in = p.burn_in;
    spec.validate()?;
    Ok(spec)
}

fn curve_options(
    method: Method,
    order: Option<usize>,
    lags: &LagSet,
    margin: Option<usize>,
) -> CurveOptions {
    let mut opts = CurveOptions::new(method, lags.clone());
    if let Some(n) = order {
        opts = opts.with_order(n);
    }
    if let Some(m) = margin {
        opts = opts.with_margin(m);
    }
    opts
}

fn curve_json(curve: &ChangeCurve, ts: &TimeSeries) -> Value {
    json!({
        "method": curve.method,
        "order": curve.order,
        "lags": curve.lag_set,
        "T": curve.len,
        "margin": curve.margin,
        "window": curve.window,
        "first_k": curve.first_k,
        "last_k": curve.last_k(),
        "max_abs": curve.max_abs(),
        "labels": curve.points().map(|(k, _, _)| ts.label(k - 1)).collect::<Vec<_>>(),
        "values": curve.values,
    })
}

fn changepoint(a: &ChangepointArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let c = &a.curve;
    let opts = curve_options(c.method, c.order, &c.lags, c.margin);
    let curve = change_curve(&ts, &opts)?;
    let point = find_change_point(&curve)?.labelled(&ts);
    let significance = match a.null {
        Some(model) => {
            let null = model_spec(model, &a.process, ts.len(), a.seed)?;
            let observed = point.value.abs();
            Some((
                null.clone(),
                changepoint_significance(observed, &null, ts.len(), &opts, a.simulations, a.seed)?,
            ))
        }
        None => None,
    };
    let result = json!({
        "change_point": point,
        "curve": curve_json(&curve, &ts),
        "null": significance.as_ref().map(|s| to_value(&s.0)),
        "significance": significance.as_ref().map(|s| to_value(&s.1)),
    });
    Ok(Artifact {
        seed: a.null.map(|_| a.seed),
        result,
        csv: curve.to_csv(Some(&ts)),
    })
}

fn segment(a: &SegmentArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let c = &a.curve;
    let opts = SegmentationOptions {
        curve: curve_options(c.method, c.order, &c.lags, c.margin),
        max_points: a.max_points,
        min_segment: a.min_segment,
    };
    let seg = recursive_segmentation(&ts, &opts)?;
    let mut csv = String::from("rank,k,label,value,sign\n");
    for (i, p) in seg.points.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            p.index,
            p.label.as_deref().unwrap_or(""),
            num(p.value),
            sign_str(p.sign)
        ));
    }
    let result = json!({
        "T": ts.len(),
        "method": c.method,
        "lags": c.lags,
        "points": seg.points,
        "flat_segments": seg.flat_segments,
    });
    Ok(Artifact {
        seed: None,
        result,
        csv,
    })
}

fn sign_str(sign: Sign) -> &'static str {
    match sign {
        Sign::Max => "max",
        Sign::Min => "min",
    }
}

/// Extreme point of a curve by `key`, smallest index on ties.
fn extreme(curve: &ChangeCurve, ts: &TimeSeries, key: impl Fn(f64) -> f64) -> Option<ChangePoint> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v, _) in curve.points() {
        if best.is_none_or(|(_, b)| key(v) > key(b)) {
            best = Some((k, v));
        }
    }
    best.map(|(index, value)| {
        ChangePoint {
            index,
            label: None,
            value,
            sign: if value >= 0.0 { Sign::Max } else { Sign::Min },
        }
        .labelled(ts)
    })
}

fn local(a: &LocalArgs) -> ordpat::Result<Artifact> {
    let ts = load(&a.input)?;
    let opts = curve_options(a.method, a.order, &a.lags, None);
    let curve = local_change_curve(&ts, &opts, a.window)?;
    let result = json!({
        "largest": extreme(&curve, &ts, |v| v),
        "smallest": extreme(&curve, &ts, |v| -v),
        "curve": curve_json(&curve, &ts),
    });
    Ok(Artifact {
        seed: None,
        result,
        csv: curve.to_csv(Some(&ts)),
    })
}

fn simulate(a: &SimulateArgs) -> ordpat::Result<Artifact> {
    let spec = model_spec(a.model, &a.process, a.len, a.seed)?;
    let ts = ordpat::models::simulate(&spec)?;
    let mut csv = String::from("t,value\n");
    for (t, v) in ts.values.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", t + 1, num(*v)));
    }
    let result = json!({ "model": spec, "values": ts.values });
    Ok(Artifact {
        seed: Some(a.seed),
        result,
        csv,
    })
}

fn variance_lag(a: &VarianceLagArgs) -> ordpat::Result<Artifact> {
    let spec = model_spec(a.model, &a.process, a.len, a.seed)?;
    let table = variance_vs_lag(&spec, a.len, a.trials, &a.lags, a.seed)?;
    let mut csv = String::from("lag,mean_alpha,var_alpha,mean_beta,var_beta\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lag,
            num(r.mean_alpha),
            num(r.var_alpha),
            num(r.mean_beta),
            num(r.var_beta)
        ));
    }
    let (rel_alpha, rel_beta) = table.relative_slopes();
    let mut result = to_value(&table);
    result["relative_slope_alpha"] = json!(rel_alpha);
    result["relative_slope_beta"] = json!(rel_beta);
    if let Some(w) = &table.warning {
        eprintln!("warning: {w}");
    }
    Ok(Artifact {
        seed: Some(a.seed),
        result,
        csv,
    })
}
