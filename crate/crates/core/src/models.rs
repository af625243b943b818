//! Null-model simulation and the exact Brownian-motion pattern distribution.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::{factorial, index_to_permutation, window_code, PatternIndex};
use crate::rng::{substream, StreamRng};
use crate::series::TimeSeries;

/// Innovation distribution of an AR(1) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Standard normal.
    Gaussian,
    /// `1 - e` with `e ~ Exp(1)`: zero mean, heavy left tail.
    ExponentialCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    /// Cumulative sum of standard normal draws.
    Bm,
    /// `x_1 = z_1`, `x_t = phi x_{t-1} + z_t`.
    Ar1 { phi: f64, noise: Noise },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub len: usize,
    pub seed: u64,
    /// AR(1) only: steps simulated and discarded before `x_1`.
    #[serde(default)]
    pub burn_in: usize,
}

impl ModelSpec {
    pub fn bm(len: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Bm,
            len,
            seed,
            burn_in: 0,
        }
    }

    pub fn ar1(phi: f64, noise: Noise, len: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Ar1 { phi, noise },
            len,
            seed,
            burn_in: 0,
        }
    }

    /// Same model with a different length and seed.
    pub fn with(&self, len: usize, seed: u64) -> Self {
        Self {
            len,
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::InvalidSpec("model length must be at least 1".into()));
        }
        if let ModelKind::Ar1 { phi, .. } = self.kind {
            if phi.is_nan() || phi.abs() >= 1.0 {
                return Err(Error::InvalidSpec(format!(
                    "AR(1) needs |phi| < 1, got {phi}"
                )));
            }
        }
        if self.burn_in > 0 && self.kind == ModelKind::Bm {
            return Err(Error::InvalidSpec("burn-in applies to AR(1) only".into()));
        }
        Ok(())
    }

    /// Values of trajectory `index`, drawn from substream `(seed, index)`.
    pub fn trajectory(&self, index: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = substream(self.seed, index);
        Ok(self.draw(&mut rng))
    }

    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        match self.kind {
            ModelKind::Bm => {
                let mut x = 0.0;
                for _ in 0..self.len {
                    x += rng.sample::<f64, _>(StandardNormal);
                    out.push(x);
                }
            }
            ModelKind::Ar1 { phi, noise } => {
                let mut innovation = || match noise {
                    Noise::Gaussian => rng.sample::<f64, _>(StandardNormal),
                    Noise::ExponentialCentered => 1.0 - rng.sample::<f64, _>(Exp1),
                };
                let mut x = innovation();
                for _ in 0..self.burn_in {
                    x = phi * x + innovation();
                }
                out.push(x);
                for _ in 1..self.len {
                    x = phi * x + innovation();
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Simulates trajectory 0 of the model as a named series.
pub fn simulate(spec: &ModelSpec) -> Result<TimeSeries> {
    let name = match spec.kind {
        ModelKind::Bm => "bm".to_string(),
        ModelKind::Ar1 { phi, .. } => format!("ar1({phi})"),
    };
    Ok(TimeSeries::new(spec.trajectory(0)?).named(name))
}

/// Exact pattern probabilities of Brownian motion (any lag).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmPatternTable {
    pub order: usize,
    pub probabilities: Vec<f64>,
}

impl BmPatternTable {
    pub fn get(&self, index: usize) -> f64 {
        self.probabilities[index - 1]
    }
}

/// Pattern probabilities of Brownian motion for orders 2 to 4.
///
/// A pattern of order `n` is the event that `n-1` linear forms in the
/// independent Gaussian increments are all positive. For up to three forms the
/// orthant probability has a closed form in the pairwise correlations:
/// `1/2`, `1/4 + asin(r)/(2 pi)`, and `1/8 + (asin r12 + asin r13 + asin r23)/(4 pi)`.
pub fn bm_pattern_probabilities(n: usize) -> Result<BmPatternTable> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidOrder(n));
    }
    let probabilities = (0..factorial(n))
        .map(|code| pattern_orthant_probability(PatternIndex::from_code(n, code)))
        .collect();
    Ok(BmPatternTable {
        order: n,
        probabilities,
    })
}

fn pattern_orthant_probability(p: PatternIndex) -> f64 {
    let n = p.order();
    let ranks = index_to_permutation(p);
    // positions sorted by rank: x[pos[0]] < x[pos[1]] < ...
    let mut pos: Vec<usize> = (0..n).collect();
    pos.sort_by_key(|&j| ranks[j]);
    // x_j = Z_0 + ... + Z_{j-1}; form r is x[pos[r+1]] - x[pos[r]].
    let forms: Vec<Vec<f64>> = (0..n - 1)
        .map(|r| {
            let (a, b) = (pos[r], pos[r + 1]);
            (0..n - 1)
                .map(|i| f64::from(u8::from(i < b)) - f64::from(u8::from(i < a)))
                .collect()
        })
        .collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let corr = |i: usize, j: usize| {
        dot(&forms[i], &forms[j]) / (dot(&forms[i], &forms[i]) * dot(&forms[j], &forms[j])).sqrt()
    };
    let pi = std::f64::consts::PI;
    match n - 1 {
        1 => 0.5,
        2 => 0.25 + corr(0, 1).asin() / (2.0 * pi),
        3 => 0.125 + (corr(0, 1).asin() + corr(0, 2).asin() + corr(1, 2).asin()) / (4.0 * pi),
        _ => unreachable!("order checked by caller"),
    }
}

/// Pattern frequencies of one long simulated path, with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPatternEstimate {
    pub order: usize,
    pub windows: u64,
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Lag-1 pattern frequencies over `samples` windows of one Brownian path.
///
/// The path is generated and counted in a single streaming pass, so very long
/// paths do not need to be held in memory.
pub fn mc_bm_pattern_oracle(n: usize, samples: u64, seed: u64) -> Result<McPatternEstimate> {
    crate::patterns::check_order(n)?;
    if samples == 0 {
        return Err(Error::InvalidSpec("need at least one sample".into()));
    }
    let mut rng = substream(seed, 0);
    let mut counts = vec![0u64; factorial(n)];
    let mut window = vec![0.0; n];
    let mut x = 0.0;
    for slot in window.iter_mut().skip(1) {
        x += rng.sample::<f64, _>(StandardNormal);
        *slot = x;
    }
    for _ in 0..samples {
        window.rotate_left(1);
        x += rng.sample::<f64, _>(StandardNormal);
        window[n - 1] = x;
        let code = window_code(&window, 0, n, 1)?;
        counts[code] += 1;
    }
    let total = samples as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let std_errors = probabilities
        .iter()
        .map(|p| (p * (1.0 - p) / total).sqrt())
        .collect();
    Ok(McPatternEstimate {
        order: n,
        windows: samples,
        probabilities,
        std_errors,
    })
}
