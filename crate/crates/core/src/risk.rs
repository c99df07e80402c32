//! Upside/downside TVaR, Lorenz and Gini curves: population values, point
//! estimates, plug-in and bootstrap variances, and normal-theory intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::normal::std_normal_quantile;
use crate::dist::{default_eps_grid, quantile_continuity_check, Distribution, Sample};
use crate::error::{check_prob_open, Error, Result};
use crate::layers::{empirical_lower, empirical_upper};
use crate::rng::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    TvarUp,
    TvarDown,
    Lorenz,
    Gini,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::TvarUp => "tvar-up",
            Measure::TvarDown => "tvar-down",
            Measure::Lorenz => "lorenz",
            Measure::Gini => "gini",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tvar-up" => Ok(Measure::TvarUp),
            "tvar-down" => Ok(Measure::TvarDown),
            "lorenz" => Ok(Measure::Lorenz),
            "gini" => Ok(Measure::Gini),
            _ => Err(Error::Parse(format!(
                "unknown measure {s:?} (expected tvar-up, tvar-down, lorenz or gini)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Plugin,
    Bootstrap,
}

/// A point estimate with its standard error and confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub measure: Measure,
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub method: VarianceMethod,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub confidence: f64,
    pub method: VarianceMethod,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            confidence: 0.95,
            method: VarianceMethod::Plugin,
            bootstrap_reps: 1000,
            seed: 0,
        }
    }
}

fn nonzero_mean(mu: f64, scale: f64) -> Result<f64> {
    if mu == 0.0 || mu.abs() < 1e-12 * scale {
        Err(Error::DegenerateMean(mu))
    } else {
        Ok(mu)
    }
}

fn population_mean(d: &dyn Distribution) -> Result<f64> {
    let mu = d.mean()?;
    let abs_mean = d.lower_partial(0.0)? + d.upper_partial(0.0)?;
    nonzero_mean(mu, abs_mean)
}

fn sample_mean(sample: &Sample) -> Result<f64> {
    let scale = sample.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    nonzero_mean(sample.mean(), scale)
}

/// Population value of a measure.
pub fn population(d: &dyn Distribution, measure: Measure, p: f64) -> Result<f64> {
    check_prob_open("p", p)?;
    match measure {
        Measure::TvarUp => Ok(d.quantile_integral(p, 1.0)? / (1.0 - p)),
        Measure::TvarDown => Ok(d.quantile_integral(0.0, p)? / p),
        Measure::Lorenz => Ok(d.quantile_integral(0.0, p)? / population_mean(d)?),
        Measure::Gini => {
            let mu = population_mean(d)?;
            Ok((d.quantile_integral(1.0 - p, 1.0)? - d.quantile_integral(0.0, p)?) / mu)
        }
    }
}

/// Diagnostics for a population: Lorenz/Gini assume X ≥ 0, and the Gini
/// CLT needs a continuous quantile at p and 1 − p.
pub fn population_warnings(d: &dyn Distribution, measure: Measure, p: f64) -> Vec<String> {
    let mut w = Vec::new();
    if matches!(measure, Measure::Lorenz | Measure::Gini) && d.support().0 < 0.0 {
        w.push(
            "distribution takes negative values; the curve is usually interpreted for X >= 0"
                .into(),
        );
    }
    let levels: &[f64] = match measure {
        Measure::Gini => &[p, 1.0 - p],
        _ => &[p],
    };
    for &u in levels {
        if let Ok(false) = quantile_continuity_check(d, u, &default_eps_grid()) {
            w.push(format!(
                "quantile function looks discontinuous at {u}; normal intervals may be invalid"
            ));
        }
    }
    w
}

/// Point estimate from the empirical cdf.
pub fn point_estimate(sample: &Sample, measure: Measure, p: f64) -> Result<f64> {
    check_prob_open("p", p)?;
    match measure {
        Measure::TvarUp => Ok(empirical_upper(sample, p)? / (1.0 - p)),
        Measure::TvarDown => Ok(empirical_lower(sample, p)? / p),
        Measure::Lorenz => Ok(empirical_lower(sample, p)? / sample_mean(sample)?),
        Measure::Gini => {
            let mu = sample_mean(sample)?;
            Ok((empirical_upper(sample, 1.0 - p)? - empirical_lower(sample, p)?) / mu)
        }
    }
}

fn centered(v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|x| x - m).collect()
}

// (q̂ − X_i)^+ − mean, i.e. ∫_{−∞}^{q̂} (1{X_i ≤ x} − F_n(x)) dx
fn lower_part(sample: &Sample, u: f64) -> Result<Vec<f64>> {
    let q = sample.ecdf_quantile(u)?;
    Ok(centered(
        sample.values().iter().map(|x| (q - x).max(0.0)).collect(),
    ))
}

/// Per-observation influence values whose second moment is the asymptotic
/// variance of √n (estimate − value).
///
/// * TVaR up:   ((X − q̂_p)^+ − mean) / (1 − p)
/// * TVaR down: ((q̂_p − X)^+ − mean) / p
/// * Lorenz:    Y_LC(p) = ((q̂_p − X)^+ − mean)/μ̂ + LC(p)(X − μ̂)/μ̂
/// * Gini:      Y_LC(1 − p) + Y_LC(p)
pub fn influence_values(sample: &Sample, measure: Measure, p: f64) -> Result<Vec<f64>> {
    check_prob_open("p", p)?;
    let xs = sample.values();
    match measure {
        Measure::TvarUp => {
            let q = sample.ecdf_quantile(p)?;
            let v = centered(xs.iter().map(|x| (x - q).max(0.0)).collect());
            Ok(v.into_iter().map(|y| y / (1.0 - p)).collect())
        }
        Measure::TvarDown => Ok(lower_part(sample, p)?.into_iter().map(|y| y / p).collect()),
        Measure::Lorenz => {
            let mu = sample_mean(sample)?;
            let lc = point_estimate(sample, Measure::Lorenz, p)?;
            let a = lower_part(sample, p)?;
            Ok(a.iter()
                .zip(xs)
                .map(|(a, x)| (a + lc * (x - mu)) / mu)
                .collect())
        }
        Measure::Gini => {
            let mu = sample_mean(sample)?;
            let gc = point_estimate(sample, Measure::Gini, p)?;
            let a = lower_part(sample, 1.0 - p)?;
            let b = lower_part(sample, p)?;
            Ok(a.iter()
                .zip(&b)
                .zip(xs)
                .map(|((a, b), x)| (a + b + (1.0 - gc) * (x - mu)) / mu)
                .collect())
        }
    }
}

/// Sample variance of (X − q̂_p)^+, the plug-in estimate of σ²₁(p).
pub fn sigma2_upper(sample: &Sample, p: f64) -> Result<f64> {
    check_prob_open("p", p)?;
    let q = sample.ecdf_quantile(p)?;
    let v: Vec<f64> = sample.values().iter().map(|x| (x - q).max(0.0)).collect();
    Ok(unbiased_variance(&v))
}

fn unbiased_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Plug-in asymptotic variance: the sample variance of the influence values.
pub fn plugin_variance(sample: &Sample, measure: Measure, p: f64) -> Result<f64> {
    Ok(unbiased_variance(&influence_values(sample, measure, p)?))
}

/// n times the variance of `reps` nonparametric bootstrap replicates.
///
/// Replicate r draws from its own stream keyed by (seed, r), so the result
/// does not depend on the thread count.
pub fn bootstrap_variance(
    sample: &Sample,
    measure: Measure,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps < 100 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least 100 replicates, got {reps}"
        )));
    }
    check_prob_open("p", p)?;
    let xs = sample.values();
    let n = xs.len();
    let estimates: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, tags::BOOTSTRAP, r as u32);
            let draw: Vec<f64> = (0..n).map(|_| xs[rng.gen_range(0..n)]).collect();
            point_estimate(&Sample::new(draw)?, measure, p)
        })
        .collect::<Result<_>>()?;
    Ok(n as f64 * unbiased_variance(&estimates))
}

/// Point estimate, standard error and a two-sided normal interval.
pub fn estimate(
    sample: &Sample,
    measure: Measure,
    p: f64,
    opts: &EstimateOptions,
) -> Result<MeasureEstimate> {
    check_prob_open("confidence", opts.confidence)?;
    let est = point_estimate(sample, measure, p)?;
    let n = sample.len();
    let var = match opts.method {
        VarianceMethod::Plugin => plugin_variance(sample, measure, p)?,
        VarianceMethod::Bootstrap => {
            bootstrap_variance(sample, measure, p, opts.bootstrap_reps, opts.seed)?
        }
    };
    let stderr = (var / n as f64).sqrt();
    let z = std_normal_quantile(0.5 + 0.5 * opts.confidence);
    let mut warnings = Vec::new();
    if matches!(measure, Measure::Lorenz | Measure::Gini) && sample.sorted()[0] < 0.0 {
        warnings
            .push("sample has negative values; the curve is usually interpreted for X >= 0".into());
    }
    Ok(MeasureEstimate {
        measure,
        p,
        estimate: est,
        stderr,
        ci_lo: est - z * stderr,
        ci_hi: est + z * stderr,
        n,
        method: opts.method,
        warnings,
    })
}
