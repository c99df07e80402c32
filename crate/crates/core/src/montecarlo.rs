//! Seeded experiment engine: estimator bias, asymptotic normality of the
//! upper-layer estimator, the gapped-uniform variance, median-gap
//! probabilities and Vervaat process paths.
//!
//! Replicate `r` of row `j` draws from its own stream, so reports depend only
//! on the configuration and never on thread scheduling.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::normal::std_normal_cdf;
use crate::dist::{ceil_rank, Distribution, ParametricDist};
use crate::error::{check_prob_closed, Error, Result};
use crate::layers::{empirical_upper_unsorted, layer_integral, LayerSpec};
use crate::rng::{self, tags, StreamRng};

const MAX_REPLICATES: usize = 1 << 24;

/// 1.63/√m, the asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

/// sup_x |F_m(x) − Φ(x)| for the empirical cdf F_m of `values`.
pub fn ks_vs_standard_normal(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("KS statistic of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let phi = std_normal_cdf(x);
        d.max((i + 1) as f64 / m - phi).max(phi - i as f64 / m)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bias,
    Normality,
    MedianGap,
    Vervaat,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(Self::Bias),
            "normality" => Ok(Self::Normality),
            "median-gap" => Ok(Self::MedianGap),
            "vervaat" => Ok(Self::Vervaat),
            _ => Err(Error::Parse(format!(
                "unknown experiment {s:?} (expected bias, normality, median-gap or vervaat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dist: ParametricDist,
    pub p: f64,
    pub n: Vec<usize>,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    /// Keep every replicate value in the report.
    #[serde(default)]
    pub keep_raw: bool,
    /// Grid size for Vervaat paths (points i/(grid−1)).
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    101
}

pub const PRESETS: [&str; 4] = ["table1-desk", "sim2-desk", "sim3-desk", "vervaat"];

impl ExperimentConfig {
    /// Named configurations. `full` swaps the desk sizes for
    /// n = 100 000, m = 10 000 where those differ.
    pub fn preset(name: &str, full: bool) -> Result<Self> {
        let u02 = ParametricDist::uniform(0.0, 2.0)?;
        let (norm_n, norm_m) = if full {
            (100_000, 10_000)
        } else {
            (20_000, 2000)
        };
        let cfg = match name {
            "table1-desk" => Self {
                experiment: ExperimentKind::Bias,
                dist: u02,
                p: 0.75,
                n: vec![40, 100, 200, 500, 1000],
                m: 10_000,
                seed: 0,
                keep_raw: false,
                grid: default_grid(),
            },
            "sim2-desk" => Self {
                experiment: ExperimentKind::Normality,
                dist: u02,
                p: 0.5,
                n: vec![norm_n],
                m: norm_m,
                seed: 0,
                keep_raw: false,
                grid: default_grid(),
            },
            "sim3-desk" => Self {
                dist: ParametricDist::gapped_uniform(0.5)?,
                ..Self::preset("sim2-desk", full)?
            },
            "vervaat" => Self {
                experiment: ExperimentKind::Vervaat,
                dist: ParametricDist::uniform(0.0, 1.0)?,
                p: 0.5,
                n: vec![10_000],
                m: 2000,
                seed: 0,
                keep_raw: false,
                grid: default_grid(),
            },
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset {name:?} (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m >= MAX_REPLICATES {
            return Err(Error::InvalidParameter(format!(
                "replications must be in 1..{MAX_REPLICATES}, got {}",
                self.m
            )));
        }
        if self.n.is_empty() || self.n.len() > 255 {
            return Err(Error::InvalidParameter(
                "need between 1 and 255 sample sizes".into(),
            ));
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidParameter(format!(
                "sample sizes must be at least 2, got {n}"
            )));
        }
        check_prob_closed("p", self.p)?;
        match self.experiment {
            ExperimentKind::Normality => {
                if let Some(n) = self.n.iter().find(|&&n| n % 2 == 1) {
                    return Err(Error::Domain(format!(
                        "normality experiment needs even n, got {n}"
                    )));
                }
                normality_sigma(&self.dist, self.p)?;
            }
            ExperimentKind::Vervaat if self.grid < 2 => {
                return Err(Error::InvalidParameter(
                    "Vervaat grid needs at least 2 points".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    fn stream(&self, tag: u32, row: usize, rep: usize) -> StreamRng {
        rng::stream(self.seed, tag, ((row as u32) << 24) | rep as u32)
    }
}

/// One line of a report: summary of the m replicate values at sample size n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// sd/√m
    pub se: f64,
    /// Value the mean is compared with (asymptotic bias, 0, p(1−p)/2, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_critical: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_gt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_lt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_gt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_lt: Option<f64>,
}

impl SummaryRow {
    fn from_values(n: usize, values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        Self {
            n,
            mean,
            median,
            sd: var.sqrt(),
            se: (var / m).sqrt(),
            reference: None,
            ks: None,
            ks_critical: None,
            exact_gt: None,
            exact_lt: None,
            mc_gt: None,
            mc_lt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VervaatSummary {
    pub grid: Vec<f64>,
    /// Pointwise mean of n·V_n over paths.
    pub mean_path: Vec<f64>,
    /// Smallest n·V_n value seen anywhere.
    pub min_value: f64,
    /// Largest |n·V_n| at p = 0 or p = 1.
    pub max_boundary_abs: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Population value of the estimated functional, where one applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<f64>,
    pub rows: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vervaat: Option<VervaatSummary>,
    /// Replicate values per row when `keep_raw` is set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw: Vec<Vec<f64>>,
}

fn fill<R: Rng>(buf: &mut Vec<f64>, d: &ParametricDist, n: usize, rng: &mut R) {
    buf.clear();
    buf.extend((0..n).map(|_| d.sample(rng)));
}

/// Leading bias term −p(1−p)/(2 n f(F^{-1}(p))) of the upper-layer
/// estimator, with the density from a central difference of the quantile.
pub fn asymptotic_bias(d: &ParametricDist, p: f64, n: usize) -> Result<f64> {
    let h = 1e-6_f64.min(0.5 * p).min(0.5 * (1.0 - p));
    if !(h > 0.0) {
        return Err(Error::Domain(format!(
            "asymptotic bias needs p in (0, 1), got {p}"
        )));
    }
    let dq = (d.quantile(p + h)? - d.quantile(p - h)?) / (2.0 * h);
    Ok(-p * (1.0 - p) * dq / (2.0 * n as f64))
}

/// Per-n summary of empirical_upper(sample, p) − population value.
pub fn run_bias_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pop = layer_integral(&cfg.dist, LayerSpec::upper(cfg.p)?)?;
    let mut rows = Vec::with_capacity(cfg.n.len());
    let mut raw = Vec::new();
    for (j, &n) in cfg.n.iter().enumerate() {
        let values: Vec<f64> = (0..cfg.m)
            .into_par_iter()
            .map_init(Vec::new, |buf, r| {
                let mut rng = cfg.stream(tags::BIAS, j, r);
                fill(buf, &cfg.dist, n, &mut rng);
                empirical_upper_unsorted(buf, cfg.p) - pop
            })
            .collect();
        let mut row = SummaryRow::from_values(n, &values);
        row.reference = asymptotic_bias(&cfg.dist, cfg.p, n).ok();
        rows.push(row);
        if cfg.keep_raw {
            raw.push(values);
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        population: Some(pop),
        rows,
        vervaat: None,
        raw,
    })
}

/// σ²₁(1/2) = Var((X − F^{-1}(1/2))^+) for the gapped uniform:
/// (29a² + 14a + 5)/48.
pub fn gapped_sigma2(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "gap parameter must lie in [0, 1], got {a}"
        )));
    }
    Ok((29.0 * a * a + 14.0 * a + 5.0) / 48.0)
}

/// Sample variance of (H^{-1}(U) − (1 − a))^+ over m uniform draws.
pub fn gapped_sigma2_mc(a: f64, m: usize, seed: u64) -> Result<f64> {
    let d = ParametricDist::gapped_uniform(a)?;
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    let mut rng = rng::stream(seed, tags::NORMALITY, u32::MAX);
    let q = 1.0 - a;
    let ys: Vec<f64> = (0..m).map(|_| (d.sample(&mut rng) - q).max(0.0)).collect();
    let mean = ys.iter().sum::<f64>() / m as f64;
    Ok(ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (m - 1) as f64)
}

/// Analytic σ₁(p) for the laws the normality experiment supports.
fn normality_sigma(d: &ParametricDist, p: f64) -> Result<f64> {
    match *d {
        ParametricDist::Uniform { a, b } => {
            // (X − q)^+ is 0 w.p. p and U(0, c) otherwise
            let c = (1.0 - p) * (b - a);
            let m1 = (1.0 - p) * c / 2.0;
            let m2 = (1.0 - p) * c * c / 3.0;
            Ok((m2 - m1 * m1).sqrt())
        }
        ParametricDist::GappedUniform { a } if p == 0.5 => Ok(gapped_sigma2(a)?.sqrt()),
        _ => Err(Error::InvalidParameter(format!(
            "normality experiment supports uniform laws, or the gapped uniform at p = 1/2; got {} at p = {p}",
            d.label()
        ))),
    }
}

/// Standardized Δ_n = √n (empirical upper − population)/σ₁(p) per replicate,
/// with KS distance to N(0, 1).
pub fn run_normality_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sigma = normality_sigma(&cfg.dist, cfg.p)?;
    let pop = layer_integral(&cfg.dist, LayerSpec::upper(cfg.p)?)?;
    let mut rows = Vec::with_capacity(cfg.n.len());
    let mut raw = Vec::new();
    for (j, &n) in cfg.n.iter().enumerate() {
        let scale = (n as f64).sqrt() / sigma;
        let values: Vec<f64> = (0..cfg.m)
            .into_par_iter()
            .map_init(Vec::new, |buf, r| {
                let mut rng = cfg.stream(tags::NORMALITY, j, r);
                fill(buf, &cfg.dist, n, &mut rng);
                scale * (empirical_upper_unsorted(buf, cfg.p) - pop)
            })
            .collect();
        let mut row = SummaryRow::from_values(n, &values);
        row.reference = Some(0.0);
        row.ks = Some(ks_vs_standard_normal(&values)?);
        row.ks_critical = Some(ks_critical_1pct(cfg.m));
        rows.push(row);
        if cfg.keep_raw {
            raw.push(values);
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        population: Some(pop),
        rows,
        vervaat: None,
        raw,
    })
}

/// (P(Z_{⌈n/2⌉:n} > 3/2), P(Z_{⌈n/2⌉:n} < 1/2)) for Z gapped uniform with
/// a = 1/2. Even n gives 1/2 ∓ C(n, n/2)/2^{n+1}; odd n gives (1/2, 1/2).
pub fn median_gap_probability(n: usize) -> Result<(f64, f64)> {
    if n == 0 || n > 1000 {
        return Err(Error::Domain(format!(
            "median gap probability needs 1 <= n <= 1000, got {n}"
        )));
    }
    if n % 2 == 1 {
        return Ok((0.5, 0.5));
    }
    // C(2m, m)/4^m = Π_{i=1}^{m} (m + i)/(4i), every factor below 1/2 + ε
    let m = n / 2;
    let ratio = (1..=m).fold(1.0, |acc, i| acc * (m + i) as f64 / (4 * i) as f64);
    let half_c = 0.5 * ratio;
    Ok((0.5 - half_c, 0.5 + half_c))
}

/// Monte Carlo frequencies of the two median-gap events over m samples.
pub fn median_gap_mc(n: usize, m: usize, seed: u64) -> Result<(f64, f64)> {
    if n == 0 || m == 0 || m >= MAX_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and 1 <= m < {MAX_REPLICATES}"
        )));
    }
    let z = ParametricDist::gapped_uniform(0.5)?;
    let k = ceil_rank(n, 0.5);
    let (gt, lt) = (0..m)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            let mut rng = rng::stream(seed, tags::MEDIAN_GAP, r as u32);
            fill(buf, &z, n, &mut rng);
            let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            ((*kth > 1.5) as usize, (*kth < 0.5) as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((gt as f64 / m as f64, lt as f64 / m as f64))
}

fn run_median_gap_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n.len());
    for (j, &n) in cfg.n.iter().enumerate() {
        let (exact_gt, exact_lt) = median_gap_probability(n)?;
        let seed = cfg.seed.wrapping_add(j as u64);
        let (mc_gt, mc_lt) = median_gap_mc(n, cfg.m, seed)?;
        let mf = cfg.m as f64;
        rows.push(SummaryRow {
            n,
            mean: mc_gt,
            median: mc_gt,
            sd: (mc_gt * (1.0 - mc_gt)).sqrt(),
            se: (exact_gt * (1.0 - exact_gt) / mf).sqrt(),
            reference: Some(exact_gt),
            ks: None,
            ks_critical: None,
            exact_gt: Some(exact_gt),
            exact_lt: Some(exact_lt),
            mc_gt: Some(mc_gt),
            mc_lt: Some(mc_lt),
        });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        population: None,
        rows,
        vervaat: None,
        raw: Vec::new(),
    })
}

/// n·V_n(p) on `grid` for sorted uniforms, where
/// V_n(p) = (1/n) Σ_{i≤k} U_{i:n} − (k/n − p) U_{k:n} + (1/n) Σ (p − U_i)^+ − p²
/// and k = ⌈np⌉.
///
/// The same quantity is ∫_{U_{k:n}}^{p} (G_n(x) − p) dx, evaluated here as a
/// sum of non-negative terms so that no cancellation occurs.
pub fn vervaat_path(sorted_u: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = sorted_u.len();
    let nf = n as f64;
    grid.iter()
        .map(|&p| {
            let np = nf * p;
            let k = ceil_rank(n, p);
            let uk = sorted_u[k - 1];
            let mut acc = 0.0;
            if uk <= p {
                // G_n ≥ k/n ≥ p on [U_{k:n}, p]
                let (mut x, mut j) = (uk, k);
                for &u in sorted_u[k..].iter().take_while(|&&u| u <= p) {
                    acc += (j as f64 - np).max(0.0) * (u - x);
                    x = u;
                    j += 1;
                }
                acc += (j as f64 - np).max(0.0) * (p - x);
            } else {
                // G_n ≤ (k − 1)/n < p on [p, U_{k:n})
                let below = sorted_u.partition_point(|&u| u <= p);
                let (mut x, mut j) = (p, below);
                for &u in &sorted_u[below..k - 1] {
                    acc += (np - j as f64).max(0.0) * (u - x);
                    x = u;
                    j += 1;
                }
                acc += (np - j as f64).max(0.0) * (uk - x);
            }
            acc
        })
        .collect()
}

/// n·V_n(p) straight from the order-statistic formula (prone to rounding
/// of order n·ε).
pub fn vervaat_direct(sorted_u: &[f64], p: f64) -> f64 {
    let n = sorted_u.len();
    let nf = n as f64;
    let k = ceil_rank(n, p);
    let head: f64 = sorted_u[..k].iter().sum();
    let below = sorted_u.partition_point(|&u| u <= p);
    let low: f64 = sorted_u[..below].iter().sum();
    head - (k as f64 - nf * p) * sorted_u[k - 1] + (below as f64 * p - low) - nf * p * p
}

/// Uniform grid i/(points − 1), i = 0, …, points − 1.
pub fn unit_grid(points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|i| i as f64 / last).collect()
}

/// `paths` independent n·V_n paths of uniform samples of size n.
pub fn vervaat_paths(
    n: usize,
    grid: &[f64],
    seed: u64,
    paths: usize,
    keep: bool,
) -> Result<VervaatSummary> {
    if n == 0 || paths == 0 || paths >= MAX_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and 1 <= paths < {MAX_REPLICATES}"
        )));
    }
    for &p in grid {
        check_prob_closed("grid point", p)?;
    }
    let all: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map_init(Vec::new, |buf: &mut Vec<f64>, r| {
            let mut rng = rng::stream(seed, tags::VERVAAT, r as u32);
            buf.clear();
            buf.extend((0..n).map(|_| rng.gen::<f64>()));
            buf.sort_unstable_by(f64::total_cmp);
            vervaat_path(buf, grid)
        })
        .collect();
    let mut mean_path = vec![0.0; grid.len()];
    let mut min_value = f64::INFINITY;
    let mut max_boundary_abs = 0.0f64;
    for path in &all {
        for (i, (&v, &p)) in path.iter().zip(grid).enumerate() {
            mean_path[i] += v;
            min_value = min_value.min(v);
            if p == 0.0 || p == 1.0 {
                max_boundary_abs = max_boundary_abs.max(v.abs());
            }
        }
    }
    mean_path.iter_mut().for_each(|v| *v /= paths as f64);
    Ok(VervaatSummary {
        grid: grid.to_vec(),
        mean_path,
        min_value,
        max_boundary_abs,
        paths: if keep { all } else { Vec::new() },
    })
}

fn run_vervaat_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = unit_grid(cfg.grid);
    let mut rows = Vec::with_capacity(cfg.n.len());
    let mut last = None;
    for (j, &n) in cfg.n.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(j as u64);
        let summary = vervaat_paths(n, &grid, seed, cfg.m, true)?;
        // row statistics at the configured level p
        let at_p: Vec<f64> = summary
            .paths
            .iter()
            .map(|path| vervaat_path_at(path, &grid, cfg.p))
            .collect();
        let mut row = SummaryRow::from_values(n, &at_p);
        row.reference = Some(cfg.p * (1.0 - cfg.p) / 2.0);
        rows.push(row);
        let mut summary = summary;
        if !cfg.keep_raw {
            summary.paths.clear();
        }
        last = Some(summary);
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        population: None,
        rows,
        vervaat: last,
        raw: Vec::new(),
    })
}

fn vervaat_path_at(path: &[f64], grid: &[f64], p: f64) -> f64 {
    let i = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - p).abs().total_cmp(&(b.1 - p).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    path[i]
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        ExperimentKind::Bias => run_bias_experiment(cfg),
        ExperimentKind::Normality => run_normality_experiment(cfg),
        ExperimentKind::MedianGap => run_median_gap_experiment(cfg),
        ExperimentKind::Vervaat => run_vervaat_experiment(cfg),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl ExperimentReport {
    /// One line per sample size.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,mean,median,sd,se,reference,ks,ks_critical,exact_gt,exact_lt,mc_gt,mc_lt\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{},{},{},{},{},{}",
                r.n,
                r.mean,
                r.median,
                r.sd,
                r.se,
                opt(r.reference),
                opt(r.ks),
                opt(r.ks_critical),
                opt(r.exact_gt),
                opt(r.exact_lt),
                opt(r.mc_gt),
                opt(r.mc_lt)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two-column plot data: the Vervaat paths (blank-line separated blocks,
    /// mean path first), or a histogram of the first row's raw values.
    pub fn to_dat(&self, bins: usize) -> Result<String> {
        if let Some(v) = &self.vervaat {
            let mut out = pairs_dat(&v.grid, &v.mean_path);
            for path in &v.paths {
                out.push('\n');
                out.push_str(&pairs_dat(&v.grid, path));
            }
            return Ok(out);
        }
        match self.raw.first() {
            Some(values) => {
                let (centres, density) = histogram(values, bins)?;
                Ok(pairs_dat(&centres, &density))
            }
            None => Err(Error::Domain(
                "histogram output needs replicate values (enable keep_raw)".into(),
            )),
        }
    }
}

pub fn pairs_dat(x: &[f64], y: &[f64]) -> String {
    let mut out = String::new();
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(out, "{a:e} {b:e}");
    }
    out
}

/// Bin centres and density-normalized counts over the data range.
pub fn histogram(values: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Domain(
            "histogram needs data and at least one bin".into(),
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let total = values.len() as f64 * width;
    Ok((
        (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        counts.iter().map(|&c| c as f64 / total).collect(),
    ))
}
