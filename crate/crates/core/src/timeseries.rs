//! Causal AR(1) series, layer h-transforms, Bartlett long-run variance,
//! coupling bounds for S-/M-mixing, and a CLT harness for layer integrals of
//! dependent data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::normal::std_normal_quantile;
use crate::dist::{Distribution, ParametricDist, Sample};
use crate::error::{Error, Result};
use crate::layers::{empirical_layer, layer_integral, LayerSpec};
use crate::montecarlo::ks_vs_standard_normal;
use crate::quad::{self, Tolerance};
use crate::rng::{self, tags};

fn default_burn_in() -> usize {
    1000
}

/// X_t = φ X_{t−1} + ε_t with iid innovations centred at their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Config {
    pub phi: f64,
    pub innovation: ParametricDist,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Ar1Config {
    pub fn new(phi: f64, innovation: ParametricDist, seed: u64) -> Result<Self> {
        Self {
            phi,
            innovation,
            burn_in: default_burn_in(),
            seed,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "AR(1) needs |phi| < 1 for a causal stationary solution, got {}",
                self.phi
            )));
        }
        self.innovation.mean()?;
        Ok(self)
    }

    /// Innovation variance σ_ε².
    pub fn innovation_variance(&self) -> Result<f64> {
        Ok(self.innovation.std_dev()?.powi(2))
    }

    /// The stationary marginal when it has a closed form: normal innovations,
    /// or φ = 0 with mean-zero innovations.
    pub fn stationary_marginal(&self) -> Option<ParametricDist> {
        match self.innovation {
            ParametricDist::Normal { sigma, .. } => {
                ParametricDist::normal(0.0, sigma / (1.0 - self.phi * self.phi).sqrt()).ok()
            }
            ref d if self.phi == 0.0 && d.mean().ok() == Some(0.0) => Some(d.clone()),
            _ => None,
        }
    }
}

/// One stationary path of length n after `burn_in` steps, from replicate
/// stream `replicate`.
pub fn simulate_ar1_path(cfg: &Ar1Config, n: usize, replicate: u32) -> Result<Vec<f64>> {
    let mu = cfg.innovation.mean()?;
    let mut rng = rng::stream(cfg.seed, tags::AR1, replicate);
    let mut x = 0.0;
    for _ in 0..cfg.burn_in {
        x = cfg.phi * x + cfg.innovation.sample(&mut rng) - mu;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        x = cfg.phi * x + cfg.innovation.sample(&mut rng) - mu;
        out.push(x);
    }
    Ok(out)
}

pub fn simulate_ar1(cfg: &Ar1Config, n: usize) -> Result<Sample> {
    Sample::new(simulate_ar1_path(&cfg.clone().validate()?, n, 0)?)
}

/// The functions whose sample means drive the layer-integral CLTs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HTransform {
    Identity,
    /// (x − q)^+
    Upper {
        q: f64,
    },
    /// (q − x)^+
    Lower {
        q: f64,
    },
    /// (q2 − x)^+ − (q1 − x)^+
    Middle {
        q1: f64,
        q2: f64,
    },
}

impl HTransform {
    /// Reference quantiles taken from a population cdf.
    pub fn for_layer(spec: LayerSpec, d: &dyn Distribution) -> Result<Self> {
        Ok(match spec.validate()? {
            LayerSpec::Upper { p } => Self::Upper { q: d.quantile(p)? },
            LayerSpec::Lower { p } => Self::Lower { q: d.quantile(p)? },
            LayerSpec::Middle { p1, p2 } => Self::Middle {
                q1: d.quantile(p1)?,
                q2: d.quantile(p2)?,
            },
            LayerSpec::Full => Self::Identity,
        })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::Identity => x,
            Self::Upper { q } => (x - q).max(0.0),
            Self::Lower { q } => (q - x).max(0.0),
            Self::Middle { q1, q2 } => (q2 - x).max(0.0) - (q1 - x).max(0.0),
        }
    }
}

/// ⌊n^{1/3}⌋ computed exactly.
pub fn default_bandwidth(n: usize) -> usize {
    let mut l = (n as f64).cbrt().floor() as usize;
    while (l + 1).pow(3) <= n {
        l += 1;
    }
    while l > 0 && l.pow(3) > n {
        l -= 1;
    }
    l
}

/// Bartlett estimate γ̂_0 + 2 Σ_{h=1}^{L} (1 − h/(L+1)) γ̂_h of the
/// transformed series, with γ̂_h normalized by n.
pub fn long_run_variance(series: &[f64], transform: &HTransform, bandwidth: usize) -> Result<f64> {
    let n = series.len();
    if bandwidth >= n {
        return Err(Error::Domain(format!(
            "bandwidth {bandwidth} must be below the series length {n}"
        )));
    }
    if n < 10 * bandwidth.max(1) {
        return Err(Error::Domain(format!(
            "series length {n} is below 10 x bandwidth {bandwidth}"
        )));
    }
    let y: Vec<f64> = series.iter().map(|&x| transform.apply(x)).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let gamma = |h: usize| {
        d[..n - h]
            .iter()
            .zip(&d[h..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut acc = gamma(0);
    for h in 1..=bandwidth {
        acc += 2.0 * (1.0 - h as f64 / (bandwidth + 1) as f64) * gamma(h);
    }
    Ok(acc.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingKind {
    /// δ_m with γ_m = m^{−a}
    SMixing { a: f64 },
    /// ρ_m for the p-th moment
    MMixing { p: f64 },
}

/// E|ε − Eε|^p for the innovation law.
pub fn innovation_abs_moment(d: &ParametricDist, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "moment order must be positive, got {p}"
        )));
    }
    match *d {
        ParametricDist::Normal { sigma, .. } => Ok(sigma.powf(p)
            * 2f64.powf(p / 2.0)
            * libm::tgamma((p + 1.0) / 2.0)
            / std::f64::consts::PI.sqrt()),
        ParametricDist::Uniform { a, b } => Ok((0.5 * (b - a)).powf(p) / (p + 1.0)),
        ParametricDist::ParetoI { alpha, .. } if p >= alpha => Err(Error::Divergent(format!(
            "pareto innovations have no moment of order {p} (alpha = {alpha})"
        ))),
        _ => {
            let mu = d.mean()?;
            quad::integrate_unit(
                |u| (d.quantile(u).unwrap_or(f64::NAN) - mu).abs().powf(p),
                &d.quantile_jumps(),
                Tolerance::new(1e-13, 1e-10),
            )
        }
    }
}

/// Coupling bound for m ≥ 1:
/// δ_m = φ^{2(m+1)} σ_ε² / (γ_m² (1 − φ²)) with γ_m = m^{−a}, or
/// ρ_m = |φ|^{m+1} (E|ε|^p)^{1/p} / (1 − |φ|).
pub fn mixing_bound(cfg: &Ar1Config, m: usize, kind: MixingKind) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let phi = cfg.phi;
    match kind {
        MixingKind::SMixing { a } => {
            if !(a > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponent a must be positive, got {a}"
                )));
            }
            let s2 = cfg.innovation_variance()?;
            let gamma2 = (m as f64).powf(-2.0 * a);
            Ok(phi.powi(2 * (m as i32 + 1)) * s2 / (gamma2 * (1.0 - phi * phi)))
        }
        MixingKind::MMixing { p } => {
            let moment = innovation_abs_moment(&cfg.innovation, p)?;
            Ok(phi.abs().powi(m as i32 + 1) * moment.powf(1.0 / p) / (1.0 - phi.abs()))
        }
    }
}

/// Smallest m from which δ_m decreases: the ratio δ_{m+1}/δ_m =
/// φ² ((m+1)/m)^{2a} drops below one.
pub fn s_mixing_decreasing_from(phi: f64, a: f64) -> usize {
    let mut m = 1usize;
    while phi * phi * ((m + 1) as f64 / m as f64).powf(2.0 * a) >= 1.0 {
        m += 1;
    }
    m
}

/// Whether (A, η, p) meet the M-mixing CLT constraints
/// A > max{1, (p − 2)/(2η) (1 − (1 + η)/p)} and (1 + η)/p < 1/2, and
/// whether A > 4 as the S-mixing step needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub a_threshold: f64,
    pub a_ok: bool,
    pub moment_ok: bool,
    pub s_mixing_ok: bool,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.a_ok && self.moment_ok && self.s_mixing_ok
    }
}

pub fn check_mixing_conditions(a: f64, eta: f64, p: f64) -> Result<ConditionReport> {
    if !(eta > 0.0) || !(p > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "need eta > 0 and p > 2, got eta={eta}, p={p}"
        )));
    }
    let ratio = (1.0 + eta) / p;
    let a_threshold = 1f64.max((p - 2.0) / (2.0 * eta) * (1.0 - ratio));
    Ok(ConditionReport {
        a_threshold,
        a_ok: a > a_threshold,
        moment_ok: ratio < 0.5,
        s_mixing_ok: a > 4.0,
    })
}

/// Summary of standardized layer-integral statistics over replicate paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsCltReport {
    pub spec: LayerSpec,
    pub phi: f64,
    pub n: usize,
    pub m_reps: usize,
    pub bandwidth: usize,
    pub population_value: f64,
    /// True when the stationary marginal came from a simulated pilot table.
    pub approximate_marginal: bool,
    pub mean: f64,
    pub variance: f64,
    pub ks: f64,
    pub coverage: f64,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stats: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsCltOptions {
    pub confidence: f64,
    /// Bartlett bandwidth; ⌊n^{1/3}⌋ when `None`.
    pub bandwidth: Option<usize>,
    /// Path length for the tabulated marginal when no closed form exists.
    pub pilot_size: usize,
    pub keep_stats: bool,
}

impl Default for TsCltOptions {
    fn default() -> Self {
        Self {
            confidence: 0.95,
            bandwidth: None,
            pilot_size: 10_000_000,
            keep_stats: false,
        }
    }
}

/// √n (empirical layer − population layer) / ν̂ per replicate path, with ν̂²
/// the Bartlett long-run variance of the matching h-transform.
pub fn ts_layer_clt_report(
    cfg: &Ar1Config,
    n: usize,
    spec: LayerSpec,
    m_reps: usize,
    opts: &TsCltOptions,
) -> Result<TsCltReport> {
    let cfg = cfg.clone().validate()?;
    let spec = spec.validate()?;
    if m_reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    let bandwidth = opts.bandwidth.unwrap_or_else(|| default_bandwidth(n));
    let (marginal, approximate): (Box<dyn Distribution>, bool) = match cfg.stationary_marginal() {
        Some(d) => (Box::new(d), false),
        None => {
            let mut pilot = cfg.clone();
            pilot.seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
            let path = {
                let mu = pilot.innovation.mean()?;
                let mut rng = rng::stream(pilot.seed, tags::PILOT, 0);
                let mut x = 0.0;
                let mut out = Vec::with_capacity(opts.pilot_size);
                for t in 0..pilot.burn_in + opts.pilot_size {
                    x = pilot.phi * x + pilot.innovation.sample(&mut rng) - mu;
                    if t >= pilot.burn_in {
                        out.push(x);
                    }
                }
                out
            };
            (Box::new(Sample::new(path)?.ecdf()), true)
        }
    };
    let population_value = layer_integral(marginal.as_ref(), spec)?;
    let h = HTransform::for_layer(spec, marginal.as_ref())?;
    let sqrt_n = (n as f64).sqrt();
    let stats: Vec<f64> = (0..m_reps)
        .into_par_iter()
        .map(|r| {
            let path = simulate_ar1_path(&cfg, n, r as u32)?;
            let nu2 = long_run_variance(&path, &h, bandwidth)?;
            let est = empirical_layer(&Sample::new(path)?, spec)?;
            Ok(sqrt_n * (est - population_value) / nu2.sqrt())
        })
        .collect::<Result<_>>()?;
    let m = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / m;
    let variance = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let z = std_normal_quantile(0.5 + 0.5 * opts.confidence);
    let coverage = stats.iter().filter(|s| s.abs() <= z).count() as f64 / m;
    let ks = ks_vs_standard_normal(&stats)?;
    Ok(TsCltReport {
        spec,
        phi: cfg.phi,
        n,
        m_reps,
        bandwidth,
        population_value,
        approximate_marginal: approximate,
        mean,
        variance,
        ks,
        coverage,
        confidence: opts.confidence,
        stats: if opts.keep_stats { stats } else { Vec::new() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_cfg(phi: f64) -> Ar1Config {
        Ar1Config::new(phi, ParametricDist::normal(0.0, 1.0).unwrap(), 11).unwrap()
    }

    #[test]
    fn rejects_noncausal() {
        assert!(Ar1Config::new(1.0, ParametricDist::normal(0.0, 1.0).unwrap(), 0).is_err());
        assert!(Ar1Config::new(-1.2, ParametricDist::normal(0.0, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn bandwidth_is_exact_cube_root_floor() {
        assert_eq!(default_bandwidth(8), 2);
        assert_eq!(default_bandwidth(26), 2);
        assert_eq!(default_bandwidth(27), 3);
        assert_eq!(default_bandwidth(200_000), 58);
        assert_eq!(default_bandwidth(1_000_000), 100);
    }

    #[test]
    fn lrv_domain_checks() {
        let xs = vec![1.0; 50];
        assert!(long_run_variance(&xs, &HTransform::Identity, 50).is_err());
        assert!(long_run_variance(&xs, &HTransform::Identity, 6).is_err());
        assert_eq!(
            long_run_variance(&xs, &HTransform::Identity, 4).unwrap(),
            0.0
        );
    }

    #[test]
    fn s_mixing_example_values() {
        let cfg = normal_cfg(0.5);
        for m in 1..10 {
            let d = mixing_bound(&cfg, m, MixingKind::SMixing { a: 1.0 }).unwrap();
            let expect = (m * m) as f64 * 0.25f64.powi(m as i32 + 1) / 0.75;
            assert!((d - expect).abs() < 1e-15 * expect.max(1.0), "m={m}");
        }
    }

    #[test]
    fn m_mixing_ratio_is_geometric() {
        let cfg = normal_cfg(-0.6);
        for m in 1..20 {
            let r0 = mixing_bound(&cfg, m, MixingKind::MMixing { p: 3.0 }).unwrap();
            let r1 = mixing_bound(&cfg, m + 1, MixingKind::MMixing { p: 3.0 }).unwrap();
            assert!((r0 / r1 - 1.0 / 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn abs_moments() {
        let n = ParametricDist::normal(3.0, 2.0).unwrap();
        // E|Z|^2 = σ²
        assert!((innovation_abs_moment(&n, 2.0).unwrap() - 4.0).abs() < 1e-12);
        let u = ParametricDist::uniform(-1.0, 1.0).unwrap();
        assert!((innovation_abs_moment(&u, 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let l = ParametricDist::logistic(0.0, 1.0).unwrap();
        let v = innovation_abs_moment(&l, 2.0).unwrap();
        assert!((v - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-8, "{v}");
        let p = ParametricDist::pareto1(1.0, 3.0).unwrap();
        assert!(innovation_abs_moment(&p, 3.0).is_err());
    }

    #[test]
    fn conditions() {
        let r = check_mixing_conditions(5.0, 0.5, 4.0).unwrap();
        assert!(r.moment_ok && r.a_ok && r.s_mixing_ok);
        // (4 − 2)/(2·0.5) · (1 − 1.5/4) = 1.25
        assert!((r.a_threshold - 1.25).abs() < 1e-15);
        let r = check_mixing_conditions(5.0, 1.5, 4.0).unwrap();
        assert!(!r.moment_ok);
    }

    #[test]
    fn h_transforms() {
        let h = HTransform::Middle { q1: -1.0, q2: 2.0 };
        assert_eq!(h.apply(-5.0), 3.0);
        assert_eq!(h.apply(0.0), 2.0);
        assert_eq!(h.apply(5.0), 0.0);
    }

    #[test]
    fn deterministic_paths() {
        let cfg = normal_cfg(0.5);
        assert_eq!(
            simulate_ar1(&cfg, 100).unwrap(),
            simulate_ar1(&cfg, 100).unwrap()
        );
    }
}
