//! Layer integrals of quantile functions, their empirical estimators, and the
//! remainder-term identities linking quantile-side and cdf-side differences.

use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::dist::{ceil_rank, sup_distance, Distribution, Sample, StepCdf};
use crate::error::{check_prob_open, Error, Result};

/// Which part of (0,1) a layer integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    /// ∫_p^1 F^{-1}
    Upper { p: f64 },
    /// ∫_0^p F^{-1}
    Lower { p: f64 },
    /// ∫_{p1}^{p2} F^{-1}
    Middle { p1: f64, p2: f64 },
    /// ∫_0^1 F^{-1}, the mean
    Full,
}

impl LayerSpec {
    pub fn upper(p: f64) -> Result<Self> {
        check_prob_open("p", p)?;
        Ok(Self::Upper { p })
    }

    pub fn lower(p: f64) -> Result<Self> {
        check_prob_open("p", p)?;
        Ok(Self::Lower { p })
    }

    pub fn middle(p1: f64, p2: f64) -> Result<Self> {
        if p1 <= 0.0 || p2 >= 1.0 {
            return Err(Error::Domain(format!(
                "middle layer needs 0 < p1 < p2 < 1, got ({p1}, {p2}); \
                 use the lower layer for p1 = 0, the upper for p2 = 1, or full"
            )));
        }
        check_prob_open("p1", p1)?;
        check_prob_open("p2", p2)?;
        if p1 >= p2 {
            return Err(Error::Domain(format!(
                "middle layer needs p1 < p2, got ({p1}, {p2})"
            )));
        }
        Ok(Self::Middle { p1, p2 })
    }

    /// Re-checks a value that may have been built directly or deserialized.
    pub fn validate(self) -> Result<Self> {
        match self {
            Self::Upper { p } => Self::upper(p),
            Self::Lower { p } => Self::lower(p),
            Self::Middle { p1, p2 } => Self::middle(p1, p2),
            Self::Full => Ok(Self::Full),
        }
    }

    /// The probability interval [s, t] integrated over.
    pub fn range(self) -> (f64, f64) {
        match self {
            Self::Upper { p } => (p, 1.0),
            Self::Lower { p } => (0.0, p),
            Self::Middle { p1, p2 } => (p1, p2),
            Self::Full => (0.0, 1.0),
        }
    }
}

/// Population layer integral.
pub fn layer_integral(d: &dyn Distribution, spec: LayerSpec) -> Result<f64> {
    let (s, t) = spec.validate()?.range();
    d.quantile_integral(s, t)
}

/// (1/n) Σ_{i>k} X_{i:n} + (k/n − p) X_{k:n} with k = ⌈np⌉.
pub fn empirical_upper(sample: &Sample, p: f64) -> Result<f64> {
    check_prob_open("p", p)?;
    let xs = sample.sorted();
    let n = xs.len();
    let k = ceil_rank(n, p);
    let nf = n as f64;
    let tail: f64 = xs[k..].iter().sum();
    Ok(tail / nf + (k as f64 / nf - p) * xs[k - 1])
}

/// (1/n) Σ_{i≤k} X_{i:n} − (k/n − p) X_{k:n} with k = ⌈np⌉.
pub fn empirical_lower(sample: &Sample, p: f64) -> Result<f64> {
    check_prob_open("p", p)?;
    let xs = sample.sorted();
    let n = xs.len();
    let k = ceil_rank(n, p);
    let nf = n as f64;
    let head: f64 = xs[..k].iter().sum();
    Ok(head / nf - (k as f64 / nf - p) * xs[k - 1])
}

pub fn empirical_middle(sample: &Sample, p1: f64, p2: f64) -> Result<f64> {
    LayerSpec::middle(p1, p2)?;
    Ok(empirical_lower(sample, p2)? - empirical_lower(sample, p1)?)
}

/// The middle layer written through the (k1, k2]-trimmed mean:
/// ((k2 − k1)/n)·mean(X_{k1+1:n}, …, X_{k2:n}) − (k2/n − p2) X_{k2:n} + (k1/n − p1) X_{k1:n}.
pub fn empirical_middle_trimmed(sample: &Sample, p1: f64, p2: f64) -> Result<f64> {
    LayerSpec::middle(p1, p2)?;
    let xs = sample.sorted();
    let n = xs.len();
    let nf = n as f64;
    let (k1, k2) = (ceil_rank(n, p1), ceil_rank(n, p2));
    let trimmed = if k2 > k1 {
        let kept = &xs[k1..k2];
        kept.iter().sum::<f64>() / kept.len() as f64
    } else {
        0.0
    };
    Ok(
        (k2 - k1) as f64 / nf * trimmed - (k2 as f64 / nf - p2) * xs[k2 - 1]
            + (k1 as f64 / nf - p1) * xs[k1 - 1],
    )
}

/// Empirical layer integral by kind.
pub fn empirical_layer(sample: &Sample, spec: LayerSpec) -> Result<f64> {
    match spec.validate()? {
        LayerSpec::Upper { p } => empirical_upper(sample, p),
        LayerSpec::Lower { p } => empirical_lower(sample, p),
        LayerSpec::Middle { p1, p2 } => empirical_middle(sample, p1, p2),
        LayerSpec::Full => Ok(sample.mean()),
    }
}

/// Same value as [`empirical_upper`] on unsorted scratch data, in O(n).
/// The buffer is reordered.
pub fn empirical_upper_unsorted(buf: &mut [f64], p: f64) -> f64 {
    let n = buf.len();
    let k = ceil_rank(n, p);
    let (_, kth, above) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    let kth = *kth;
    let nf = n as f64;
    above.iter().sum::<f64>() / nf + (k as f64 / nf - p) * kth
}

/// Same value as [`empirical_lower`] on unsorted scratch data, in O(n).
pub fn empirical_lower_unsorted(buf: &mut [f64], p: f64) -> f64 {
    let n = buf.len();
    let k = ceil_rank(n, p);
    let (below, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    let kth = *kth;
    let nf = n as f64;
    (below.iter().sum::<f64>() + kth) / nf - (k as f64 / nf - p) * kth
}

/// ∫_a^b G(x) dx (signed).
fn cdf_integral(g: &dyn Distribution, a: f64, b: f64) -> Result<f64> {
    Ok(g.lower_partial(b)? - g.lower_partial(a)?)
}

/// Rem(p; F, G) = ∫_{G^{-1}(p)}^{F^{-1}(p)} (G(x) − p) dx.
///
/// Exact piecewise sum when G is discrete, which keeps every summand
/// non-negative. Otherwise computed from partial expectations of G with
/// rounding below zero clamped.
pub fn remainder(p: f64, f: &dyn Distribution, g: &dyn Distribution) -> Result<f64> {
    check_prob_open("p", p)?;
    let b = f.quantile(p)?;
    let a = g.quantile(p)?;
    if a == b {
        return Ok(0.0);
    }
    if let Some(atoms) = g.atoms() {
        let (lo, hi, sign) = if b > a { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut pts = vec![lo];
        pts.extend(atoms.iter().copied().filter(|&x| x > lo && x < hi));
        pts.push(hi);
        return Ok(pts
            .windows(2)
            .map(|w| sign * (g.cdf(w[0]) - p) * (w[1] - w[0]))
            .sum());
    }
    Ok((cdf_integral(g, a, b)? - p * (b - a)).max(0.0))
}

/// Both sides of the applicable decomposition identity and its residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub spec: LayerSpec,
    /// Quantile-side difference ∫(G^{-1} − F^{-1}) over the layer.
    pub lhs: f64,
    /// Cdf-side integral of F − G over the matching x-range.
    pub cdf_side: f64,
    /// Rem(p1) for middle layers, Rem(p) for upper/lower, 0 for full.
    pub rem_p1: f64,
    /// Rem(p2) for middle layers, otherwise 0.
    pub rem_p2: f64,
    pub residual: f64,
}

/// Evaluates the layer decomposition of ∫(G^{-1} − F^{-1}):
///
/// * upper:  ∫_{F^{-1}(p)}^∞ (F − G) − Rem(p)
/// * lower:  ∫_{−∞}^{F^{-1}(p)} (F − G) + Rem(p)
/// * middle: ∫_{F^{-1}(p1)}^{F^{-1}(p2)} (F − G) + Rem(p2) − Rem(p1)
/// * full:   ∫_ℝ (F − G)
pub fn verify_decomposition(
    spec: LayerSpec,
    f: &dyn Distribution,
    g: &dyn Distribution,
) -> Result<DecompositionReport> {
    let spec = spec.validate()?;
    let (s, t) = spec.range();
    let lhs = g.quantile_integral(s, t)? - f.quantile_integral(s, t)?;
    let (cdf_side, rem_p1, rem_p2, rhs) = match spec {
        LayerSpec::Upper { p } => {
            let c = f.quantile(p)?;
            let side = g.upper_partial(c)? - f.upper_partial(c)?;
            let r = remainder(p, f, g)?;
            (side, r, 0.0, side - r)
        }
        LayerSpec::Lower { p } => {
            let c = f.quantile(p)?;
            let side = f.lower_partial(c)? - g.lower_partial(c)?;
            let r = remainder(p, f, g)?;
            (side, r, 0.0, side + r)
        }
        LayerSpec::Middle { p1, p2 } => {
            let (c1, c2) = (f.quantile(p1)?, f.quantile(p2)?);
            let side = cdf_integral(f, c1, c2)? - cdf_integral(g, c1, c2)?;
            let (r1, r2) = (remainder(p1, f, g)?, remainder(p2, f, g)?);
            (side, r1, r2, side + r2 - r1)
        }
        LayerSpec::Full => {
            let side = full_cdf_side(f, g)?;
            (side, 0.0, 0.0, side)
        }
    };
    Ok(DecompositionReport {
        spec,
        lhs,
        cdf_side,
        rem_p1,
        rem_p2,
        residual: lhs - rhs,
    })
}

/// ∫_ℝ (F − G), split at a median of F into two absolutely convergent halves.
pub fn full_cdf_side(f: &dyn Distribution, g: &dyn Distribution) -> Result<f64> {
    let c = f.quantile(0.5)?;
    Ok(f.lower_partial(c)? - g.lower_partial(c)? + g.upper_partial(c)? - f.upper_partial(c)?)
}

/// ∫_{F^{-1}(0)}^{F^{-1}(1)} (F − G): the full-range cdf side with the limits
/// wrongly taken from the quantile range of F. Differs from the full identity
/// whenever G puts mass outside the support of F.
pub fn truncated_cdf_side(f: &dyn Distribution, g: &dyn Distribution) -> Result<f64> {
    let (a, b) = (f.quantile(0.0)?, f.quantile(1.0)?);
    Ok(cdf_integral(f, a, b)? - cdf_integral(g, a, b)?)
}

/// The three quantities of the remainder bound chain
/// Rem(p;F,G) ≤ ∫_{G^{-1}(p)}^{F^{-1}(p)} (G − F) ≤ |G^{-1}(p) − F^{-1}(p)|·sup|F − G|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundChain {
    pub rem: f64,
    pub symmetric: f64,
    pub outer: f64,
}

impl BoundChain {
    pub fn holds(&self, tol: f64) -> bool {
        self.rem >= 0.0 && self.rem <= self.symmetric + tol && self.symmetric <= self.outer + tol
    }
}

pub fn bound_chain(p: f64, f: &dyn Distribution, g: &dyn Distribution) -> Result<BoundChain> {
    let rem = remainder(p, f, g)?;
    let (a, b) = (g.quantile(p)?, f.quantile(p)?);
    let symmetric = cdf_integral(g, a, b)? - cdf_integral(f, a, b)?;
    let outer = (b - a).abs() * sup_distance(f, g);
    Ok(BoundChain {
        rem,
        symmetric,
        outer,
    })
}

/// Both sides of ∫_{F^{-1}(p)}^∞ (1 − F) = ∫_p^1 F^{-1} − (1 − p) F^{-1}(p).
pub fn upper_moment_identity(d: &dyn Distribution, p: f64) -> Result<(f64, f64)> {
    check_prob_open("p", p)?;
    let q = d.quantile(p)?;
    Ok((
        d.upper_partial(q)?,
        d.quantile_integral(p, 1.0)? - (1.0 - p) * q,
    ))
}

/// Both sides of ∫_{−∞}^{F^{-1}(p)} F = p F^{-1}(p) − ∫_0^p F^{-1}.
pub fn lower_moment_identity(d: &dyn Distribution, p: f64) -> Result<(f64, f64)> {
    check_prob_open("p", p)?;
    let q = d.quantile(p)?;
    Ok((d.lower_partial(q)?, p * q - d.quantile_integral(0.0, p)?))
}

/// A random step cdf: 1 to `max_atoms` atoms uniform on [−range, range] with
/// flat-Dirichlet masses.
pub fn random_step_cdf<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize, range: f64) -> StepCdf {
    let k = rng.gen_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..k).map(|_| rng.gen_range(-range..=range)).collect();
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e + 1e-9
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let masses = raw.iter().map(|w| w / total).collect();
    StepCdf::new(atoms, masses).expect("generated step cdf is valid")
}

/// Worst-case results of a fuzz run over random step-cdf pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub pairs: usize,
    pub checks: usize,
    pub max_residual_upper: f64,
    pub max_residual_lower: f64,
    pub max_residual_middle: f64,
    pub max_residual_full: f64,
    pub min_remainder: f64,
    pub bound_chain_violations: usize,
}

impl FuzzSummary {
    pub fn max_residual(&self) -> f64 {
        self.max_residual_upper
            .max(self.max_residual_lower)
            .max(self.max_residual_middle)
            .max(self.max_residual_full)
    }
}

/// Probability levels used per pair: a fixed grid plus every jump level of
/// both quantile functions, so flats of the cdfs are exercised.
fn fuzz_levels(f: &StepCdf, g: &StepCdf) -> Vec<f64> {
    let mut ps: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    ps.extend(f.quantile_jumps());
    ps.extend(g.quantile_jumps());
    ps.retain(|&p| p > 0.0 && p < 1.0);
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    ps
}

/// Checks the upper, lower, middle and full identities, remainder
/// non-negativity and the bound chain over `pairs` random step-cdf pairs.
pub fn fuzz_identities<R: Rng + ?Sized>(rng: &mut R, pairs: usize) -> Result<FuzzSummary> {
    let mut s = FuzzSummary {
        pairs,
        checks: 0,
        max_residual_upper: 0.0,
        max_residual_lower: 0.0,
        max_residual_middle: 0.0,
        max_residual_full: 0.0,
        min_remainder: f64::INFINITY,
        bound_chain_violations: 0,
    };
    for _ in 0..pairs {
        let f = random_step_cdf(rng, 20, 5.0);
        let g = random_step_cdf(rng, 20, 5.0);
        let full = verify_decomposition(LayerSpec::Full, &f, &g)?;
        s.max_residual_full = s.max_residual_full.max(full.residual.abs());
        let ps = fuzz_levels(&f, &g);
        for &p in &ps {
            let up = verify_decomposition(LayerSpec::Upper { p }, &f, &g)?;
            let lo = verify_decomposition(LayerSpec::Lower { p }, &f, &g)?;
            s.max_residual_upper = s.max_residual_upper.max(up.residual.abs());
            s.max_residual_lower = s.max_residual_lower.max(lo.residual.abs());
            s.min_remainder = s.min_remainder.min(up.rem_p1);
            if !bound_chain(p, &f, &g)?.holds(1e-12) {
                s.bound_chain_violations += 1;
            }
            s.checks += 3;
        }
        for w in ps.windows(2).step_by(2) {
            let mid = verify_decomposition(LayerSpec::Middle { p1: w[0], p2: w[1] }, &f, &g)?;
            s.max_residual_middle = s.max_residual_middle.max(mid.residual.abs());
            s.checks += 1;
        }
        if let (Some(&p1), Some(&p2)) = (ps.first(), ps.last()) {
            if p1 < p2 {
                let mid = verify_decomposition(LayerSpec::Middle { p1, p2 }, &f, &g)?;
                s.max_residual_middle = s.max_residual_middle.max(mid.residual.abs());
                s.checks += 1;
            }
        }
    }
    Ok(s)
}
