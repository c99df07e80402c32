//! L-functionals ∫ F^{-1}(u) w(u) du.
//!
//! A weight is stored as a partition 0 = a_0 < … < a_K = 1 with a pair of
//! non-decreasing right-continuous functions (w_k1, w_k2) on each piece, so
//! that w = w_k1 − w_k2 on [a_{k−1}, a_k). Each monotone piece turns the
//! L-integral into an outer integral of layer integrals.

use serde::{Deserialize, Serialize};

use crate::dist::normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// A non-decreasing, right-continuous function of u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum MonotoneFn {
    /// Σ c_i u^i
    Poly { coeffs: Vec<f64> },
    /// Φ^{-1}(u) + shift
    NormalQuantile { shift: f64 },
    /// `parts[j]` on `[breaks[j], breaks[j+1])`, extended flat-wise beyond.
    Piecewise {
        breaks: Vec<f64>,
        parts: Vec<MonotoneFn>,
    },
}

impl MonotoneFn {
    pub fn zero() -> Self {
        Self::Poly { coeffs: vec![] }
    }

    pub fn constant(c: f64) -> Self {
        Self::Poly { coeffs: vec![c] }
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Self::Poly {
            coeffs: vec![c0, c1],
        }
    }

    pub fn poly(coeffs: Vec<f64>) -> Self {
        Self::Poly { coeffs }
    }

    fn part_index(breaks: &[f64], u: f64) -> usize {
        let j = breaks.partition_point(|&b| b <= u);
        j.saturating_sub(1).min(breaks.len() - 2)
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
            Self::NormalQuantile { shift } => std_normal_quantile(u) + shift,
            Self::Piecewise { breaks, parts } => parts[Self::part_index(breaks, u)].eval(u),
        }
    }

    /// Value at the left end `a` of a piece; −∞ for the normal quantile at 0.
    pub fn value_at_left(&self, a: f64) -> f64 {
        match self {
            Self::NormalQuantile { .. } if a <= 0.0 => f64::NEG_INFINITY,
            _ => self.eval(a),
        }
    }

    /// Left limit g(b−); +∞ for the normal quantile at 1.
    pub fn left_limit(&self, b: f64) -> f64 {
        match self {
            Self::Poly { .. } => self.eval(b),
            Self::NormalQuantile { .. } if b >= 1.0 => f64::INFINITY,
            Self::NormalQuantile { .. } => self.eval(b),
            Self::Piecewise { breaks, parts } => {
                let j = breaks.partition_point(|&x| x < b);
                let j = j.saturating_sub(1).min(parts.len() - 1);
                parts[j].left_limit(b)
            }
        }
    }

    /// The function plus a constant.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            Self::Poly { coeffs } => {
                let mut coeffs = coeffs.clone();
                if coeffs.is_empty() {
                    coeffs.push(0.0);
                }
                coeffs[0] += c;
                Self::Poly { coeffs }
            }
            Self::NormalQuantile { shift } => Self::NormalQuantile { shift: shift + c },
            Self::Piecewise { breaks, parts } => Self::Piecewise {
                breaks: breaks.clone(),
                parts: parts.iter().map(|p| p.shifted(c)).collect(),
            },
        }
    }

    /// ∫_s^t g(u) du in closed form.
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        if s >= t {
            return if s == t { 0.0 } else { -self.integral(t, s) };
        }
        match self {
            Self::Poly { coeffs } => {
                let prim = |u: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (i, c)| acc * u + c / (i + 1) as f64)
                        * u
                };
                prim(t) - prim(s)
            }
            Self::NormalQuantile { shift } => {
                let phi_at = |u: f64| std_normal_pdf(std_normal_quantile(u));
                phi_at(s) - phi_at(t) + shift * (t - s)
            }
            Self::Piecewise { breaks, parts } => {
                let last = parts.len() - 1;
                let mut acc = 0.0;
                for (j, part) in parts.iter().enumerate() {
                    let lo = if j == 0 { f64::NEG_INFINITY } else { breaks[j] };
                    let hi = if j == last {
                        f64::INFINITY
                    } else {
                        breaks[j + 1]
                    };
                    let (a, b) = (s.max(lo), t.min(hi));
                    if a < b {
                        acc += part.integral(a, b);
                    }
                }
                acc
            }
        }
    }

    /// Left-continuous inverse on [a, b): inf{u ∈ [a, b) : g(u) ≥ x}, or b
    /// when the set is empty.
    pub fn inverse(&self, x: f64, a: f64, b: f64) -> f64 {
        match self {
            Self::Poly { coeffs } if coeffs.len() <= 2 => {
                let c0 = coeffs.first().copied().unwrap_or(0.0);
                let c1 = coeffs.get(1).copied().unwrap_or(0.0);
                if c1 == 0.0 {
                    if c0 >= x {
                        a
                    } else {
                        b
                    }
                } else {
                    ((x - c0) / c1).clamp(a, b)
                }
            }
            Self::NormalQuantile { shift } => std_normal_cdf(x - shift).clamp(a, b),
            _ => self.bisect_inverse(x, a, b),
        }
    }

    fn bisect_inverse(&self, x: f64, a: f64, b: f64) -> f64 {
        if self.eval(a) >= x {
            return a;
        }
        if self.left_limit(b) < x {
            return b;
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) >= x {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// A weight function in piecewise-monotone form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRaw", into = "WeightRaw")]
pub struct WeightFunction {
    breaks: Vec<f64>,
    pieces: Vec<(MonotoneFn, MonotoneFn)>,
}

#[derive(Serialize, Deserialize)]
struct WeightRaw {
    breaks: Vec<f64>,
    pieces: Vec<(MonotoneFn, MonotoneFn)>,
}

impl TryFrom<WeightRaw> for WeightFunction {
    type Error = Error;
    fn try_from(r: WeightRaw) -> Result<Self> {
        WeightFunction::new(r.breaks, r.pieces)
    }
}

impl From<WeightFunction> for WeightRaw {
    fn from(w: WeightFunction) -> Self {
        WeightRaw {
            breaks: w.breaks,
            pieces: w.pieces,
        }
    }
}

impl WeightFunction {
    /// `breaks` must run 0 = a_0 < a_1 < … < a_K = 1 with one pair per piece.
    pub fn new(breaks: Vec<f64>, pieces: Vec<(MonotoneFn, MonotoneFn)>) -> Result<Self> {
        if pieces.is_empty() || breaks.len() != pieces.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints for {} pieces",
                breaks.len(),
                pieces.len()
            )));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(
                "partition must start at 0 and end at 1".into(),
            ));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "partition must be strictly increasing".into(),
            ));
        }
        Ok(Self { breaks, pieces })
    }

    /// K = 1 from a single non-decreasing pair.
    pub fn monotone(w1: MonotoneFn, w2: MonotoneFn) -> Self {
        Self {
            breaks: vec![0.0, 1.0],
            pieces: vec![(w1, w2)],
        }
    }

    pub fn k(&self) -> usize {
        self.pieces.len()
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[(MonotoneFn, MonotoneFn)] {
        &self.pieces
    }

    fn piece_index(&self, u: f64) -> usize {
        self.breaks
            .partition_point(|&b| b <= u)
            .saturating_sub(1)
            .min(self.pieces.len() - 1)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (w1, w2) = &self.pieces[self.piece_index(u)];
        w1.eval(u) - w2.eval(u)
    }

    /// K_w(t) = ∫_0^t w(u) du.
    pub fn primitive(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, (w1, w2)) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breaks[k], self.breaks[k + 1].min(t));
            if a >= b {
                break;
            }
            acc += w1.integral(a, b) - w2.integral(a, b);
        }
        acc
    }

    /// Whether every w_kj is non-decreasing on a grid of `n` points per piece.
    pub fn is_monotone_on_grid(&self, n: usize) -> bool {
        self.pieces.iter().enumerate().all(|(k, (w1, w2))| {
            let (a, b) = (self.breaks[k], self.breaks[k + 1]);
            let grid: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
            [w1, w2].iter().all(|g| {
                let vals: Vec<f64> = grid
                    .iter()
                    .filter(|&&u| u > 0.0)
                    .map(|&u| g.eval(u))
                    .collect();
                vals.windows(2).all(|v| v[0] <= v[1])
            })
        })
    }

    /// Largest ratio (|w_11| ∨ |w_12|)/|w| on (0, 1e-3] and of the K-th
    /// pair on [1 − 1e-3, 1); `None` if a piece is non-zero where w vanishes.
    pub fn domination_ratio(&self) -> Option<f64> {
        const M: usize = 1000;
        let mut worst: f64 = 0.0;
        let k = self.pieces.len() - 1;
        let near0 = (1..=M).map(|i| 1e-3 * i as f64 / M as f64);
        let near1 = (0..M).map(|i| 1.0 - 1e-3 + 1e-3 * i as f64 / M as f64);
        for (u, (w1, w2)) in near0
            .map(|u| (u, &self.pieces[0]))
            .chain(near1.map(|u| (u, &self.pieces[k])))
        {
            let w = self.eval(u).abs();
            let m = w1.eval(u).abs().max(w2.eval(u).abs());
            if w == 0.0 {
                if m > 0.0 {
                    return None;
                }
            } else {
                worst = worst.max(m / w);
            }
        }
        Some(worst)
    }
}

/// Weights with hand-written decompositions (K ≤ 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "weight", rename_all = "snake_case")]
pub enum BuiltinWeight {
    Constant {
        c: f64,
    },
    /// Φ^{-1}(u)
    NormalScale,
    /// 6u(1 − u)
    Logistic,
    /// 4u − 2
    Gmd,
    /// 1{p ≤ u < 1}(4u − 2(1 + p))/(1 − p)²
    TailGini {
        p: f64,
    },
    /// 1{p ≤ u < 1}(1 − p + 4λ(u − (1 + p)/2))/(1 − p)²
    GiniShortfall {
        p: f64,
        lambda: f64,
    },
}

impl BuiltinWeight {
    pub fn validate(self) -> Result<Self> {
        match self {
            Self::Constant { c } if !c.is_finite() => Err(Error::InvalidParameter(format!(
                "constant weight {c} is not finite"
            ))),
            Self::TailGini { p } | Self::GiniShortfall { p, .. } if !(0.0..1.0).contains(&p) => {
                Err(Error::InvalidParameter(format!(
                    "p must lie in [0,1), got {p}"
                )))
            }
            Self::GiniShortfall { lambda, .. } if !(lambda >= 0.0 && lambda.is_finite()) => Err(
                Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")),
            ),
            _ => Ok(self),
        }
    }

    /// w(u) from its defining formula.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Self::Constant { c } => c,
            Self::NormalScale => std_normal_quantile(u),
            Self::Logistic => 6.0 * u * (1.0 - u),
            Self::Gmd => 4.0 * u - 2.0,
            Self::TailGini { p } => {
                if u < p {
                    0.0
                } else {
                    (4.0 * u - 2.0 * (1.0 + p)) / ((1.0 - p) * (1.0 - p))
                }
            }
            Self::GiniShortfall { p, lambda } => {
                if u < p {
                    0.0
                } else {
                    (1.0 - p + 4.0 * lambda * (u - 0.5 * (1.0 + p))) / ((1.0 - p) * (1.0 - p))
                }
            }
        }
    }

    /// K_w(t) = ∫_0^t w from its closed form.
    pub fn kw(self, t: f64) -> f64 {
        match self {
            Self::Constant { c } => c * t,
            Self::NormalScale => -std_normal_pdf(std_normal_quantile(t)),
            Self::Logistic => 3.0 * t * t - 2.0 * t * t * t,
            Self::Gmd => 2.0 * t * t - 2.0 * t,
            Self::TailGini { p } => {
                if t <= p {
                    0.0
                } else {
                    (2.0 * (t * t - p * p) - 2.0 * (1.0 + p) * (t - p)) / ((1.0 - p) * (1.0 - p))
                }
            }
            Self::GiniShortfall { p, lambda } => {
                if t <= p {
                    0.0
                } else {
                    let m = 0.5 * (1.0 + p);
                    ((1.0 - p) * (t - p) + 2.0 * lambda * ((t - m).powi(2) - (p - m).powi(2)))
                        / ((1.0 - p) * (1.0 - p))
                }
            }
        }
    }

    /// Domination constant c of the built-in decomposition.
    pub fn domination_constant(self) -> f64 {
        match self {
            Self::Logistic => 2.0,
            _ => 1.0,
        }
    }

    /// The piecewise-monotone decomposition.
    pub fn weight(self) -> WeightFunction {
        use MonotoneFn as M;
        let z = M::zero;
        let indicator_piece = |p: f64, w: M| {
            if p == 0.0 {
                WeightFunction::monotone(w, z())
            } else {
                WeightFunction {
                    breaks: vec![0.0, p, 1.0],
                    pieces: vec![(z(), z()), (w, z())],
                }
            }
        };
        match self {
            Self::Constant { c } => WeightFunction::monotone(M::constant(c), z()),
            Self::NormalScale => WeightFunction::monotone(M::NormalQuantile { shift: 0.0 }, z()),
            Self::Gmd => WeightFunction::monotone(M::linear(-2.0, 4.0), z()),
            // 6u − 6u² on [0, 1/2); −6(1 − u)² − (−6(1 − u)) on [1/2, 1)
            Self::Logistic => WeightFunction {
                breaks: vec![0.0, 0.5, 1.0],
                pieces: vec![
                    (M::linear(0.0, 6.0), M::poly(vec![0.0, 0.0, 6.0])),
                    (M::poly(vec![-6.0, 12.0, -6.0]), M::linear(-6.0, 6.0)),
                ],
            },
            Self::TailGini { p } => {
                let d = (1.0 - p) * (1.0 - p);
                indicator_piece(p, M::linear(-2.0 * (1.0 + p) / d, 4.0 / d))
            }
            Self::GiniShortfall { p, lambda } => {
                let d = (1.0 - p) * (1.0 - p);
                let c0 = (1.0 - p - 2.0 * lambda * (1.0 + p)) / d;
                indicator_piece(p, M::linear(c0, 4.0 * lambda / d))
            }
        }
    }
}

impl std::str::FromStr for BuiltinWeight {
    type Err = Error;
    /// Names without parameters; parameterized weights get placeholders the
    /// caller overwrites.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmd" => Ok(Self::Gmd),
            "logistic" => Ok(Self::Logistic),
            "normal-scale" => Ok(Self::NormalScale),
            "constant" => Ok(Self::Constant { c: 1.0 }),
            "tail-gini" => Ok(Self::TailGini { p: 0.0 }),
            "gini-shortfall" => Ok(Self::GiniShortfall { p: 0.0, lambda: 0.0 }),
            _ => Err(Error::Parse(format!(
                "unknown weight {s:?} (expected gmd, tail-gini, gini-shortfall, logistic, normal-scale or constant)"
            ))),
        }
    }
}

fn l_tol() -> Tolerance {
    Tolerance::new(1e-13, 1e-11)
}

/// ∫_0^1 F^{-1}(u) w(u) du.
///
/// Exact for discrete F (Σ_j x_j (K_w(F(x_j)) − K_w(F(x_j−)))); otherwise
/// adaptive quadrature with dyadic refinement toward 0 and 1.
pub fn l_integral_direct(d: &dyn Distribution, w: &WeightFunction) -> Result<f64> {
    if let Some(atoms) = d.atoms() {
        return Ok(atoms
            .iter()
            .map(|&x| x * (w.primitive(d.cdf(x)) - w.primitive(d.cdf_left(x))))
            .sum());
    }
    let mut breaks = w.breaks[1..w.breaks.len() - 1].to_vec();
    breaks.extend(d.quantile_jumps());
    quad::integrate_unit(
        |u| d.quantile(u).unwrap_or(f64::NAN) * w.eval(u),
        &breaks,
        l_tol(),
    )
}

/// ∫_a^b F^{-1}(u) g(u) du for non-decreasing g via
/// −∫_{−∞}^0 1{g(a) < x} ∫_a^{b∧g^{-1}(x)} F^{-1} dx + ∫_0^∞ 1{x ≤ g(b)} ∫_{a∨g^{-1}(x)}^b F^{-1} dx.
pub fn monotone_piece_integral(
    d: &dyn Distribution,
    g: &MonotoneFn,
    a: f64,
    b: f64,
) -> Result<f64> {
    let ga = g.value_at_left(a);
    let gb = g.left_limit(b);
    let total = d.quantile_integral(a, b)?;
    // kinks of the outer integrand sit where g^{-1}(x) crosses a jump of F^{-1}
    let kinks: Vec<f64> = d
        .quantile_jumps()
        .into_iter()
        .filter(|&u| u > a && u < b)
        .map(|u| g.eval(u))
        .collect();
    let tol = l_tol();

    let mut neg = 0.0;
    if ga < 0.0 {
        let hi = gb.min(0.0);
        let inner = |x: f64| {
            d.quantile_integral(a, g.inverse(x, a, b))
                .unwrap_or(f64::NAN)
        };
        neg += quad::integrate_line(inner, ga, hi, &kinks, tol)?;
        // beyond g(b−) the inner integral is the whole layer
        if gb < 0.0 {
            neg += -gb * total;
        }
    }

    let mut pos = 0.0;
    if gb > 0.0 {
        let lo = ga.max(0.0);
        let inner = |x: f64| {
            d.quantile_integral(g.inverse(x, a, b), b)
                .unwrap_or(f64::NAN)
        };
        pos += quad::integrate_line(inner, lo, gb, &kinks, tol)?;
        if ga > 0.0 {
            pos += ga * total;
        }
    }
    Ok(pos - neg)
}

/// The L-integral as a signed sum of monotone-piece layer representations.
pub fn l_integral_layered(d: &dyn Distribution, w: &WeightFunction) -> Result<f64> {
    let mut acc = 0.0;
    for (k, (w1, w2)) in w.pieces.iter().enumerate() {
        let (a, b) = (w.breaks[k], w.breaks[k + 1]);
        acc += monotone_piece_integral(d, w1, a, b)? - monotone_piece_integral(d, w2, a, b)?;
    }
    Ok(acc)
}

/// Merges pieces 1..K−1 into one by adding cumulative constants c_k, each
/// the smallest value keeping both merged functions non-decreasing across
/// a_{k−1}. Inputs with K ≤ 2 are returned unchanged.
pub fn reduce_partition(w: &WeightFunction) -> WeightFunction {
    let k = w.pieces.len();
    if k <= 2 {
        return w.clone();
    }
    let mut parts1 = vec![w.pieces[0].0.clone()];
    let mut parts2 = vec![w.pieces[0].1.clone()];
    let mut shift = 0.0;
    for j in 1..k - 1 {
        let a = w.breaks[j];
        let (prev1, prev2) = &w.pieces[j - 1];
        let (cur1, cur2) = &w.pieces[j];
        let c = (prev1.left_limit(a) - cur1.eval(a)).max(prev2.left_limit(a) - cur2.eval(a));
        shift += c;
        parts1.push(cur1.shifted(shift));
        parts2.push(cur2.shifted(shift));
    }
    let inner_breaks = w.breaks[..k].to_vec();
    let merged = |parts: Vec<MonotoneFn>| MonotoneFn::Piecewise {
        breaks: inner_breaks.clone(),
        parts,
    };
    WeightFunction {
        breaks: vec![0.0, w.breaks[k - 1], 1.0],
        pieces: vec![(merged(parts1), merged(parts2)), w.pieces[k - 1].clone()],
    }
}

/// Both sides of ∫(G^{-1} − F^{-1}) w = ∫_ℝ (K_w(F(x)) − K_w(G(x))) dx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KwCheck {
    pub quantile_side: f64,
    pub cdf_side: f64,
    pub residual: f64,
}

pub fn kw_identity_check(
    f: &dyn Distribution,
    g: &dyn Distribution,
    w: &WeightFunction,
) -> Result<KwCheck> {
    let quantile_side = l_integral_direct(g, w)? - l_integral_direct(f, w)?;
    let integrand = |x: f64| w.primitive(f.cdf(x)) - w.primitive(g.cdf(x));
    let cdf_side = match (f.atoms(), g.atoms()) {
        (Some(fa), Some(ga)) => {
            let mut xs: Vec<f64> = fa.iter().chain(ga).copied().collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs.windows(2).map(|v| integrand(v[0]) * (v[1] - v[0])).sum()
        }
        _ => {
            let mut breaks = Vec::new();
            for d in [f, g] {
                if let Some(a) = d.atoms() {
                    breaks.extend_from_slice(a);
                }
                let (lo, hi) = d.support();
                breaks.extend([lo, hi].into_iter().filter(|x| x.is_finite()));
                breaks.extend(d.quantile(0.5).ok());
            }
            let lo = f.support().0.min(g.support().0);
            let hi = f.support().1.max(g.support().1);
            quad::integrate_line(integrand, lo, hi, &breaks, l_tol())?
        }
    };
    Ok(KwCheck {
        quantile_side,
        cdf_side,
        residual: quantile_side - cdf_side,
    })
}
