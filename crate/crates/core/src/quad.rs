//! Adaptive Gauss–Kronrod quadrature with dyadic endpoint refinement.
//!
//! Quantile functions of heavy-tailed laws blow up at `u -> 1` (and at
//! `u -> 0` for laws unbounded below), so integrals over probability
//! intervals are split into dyadic shells `[1 - 2^-j, 1 - 2^-(j+1)]`. The
//! contributions of successive shells decay geometrically for power-law
//! and logarithmic singularities; the tail beyond the last representable
//! shell is extrapolated from the observed ratio, and a non-decaying ratio
//! is reported as divergence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

/// One 15-point Kronrod rule with its embedded 7-point Gauss estimate.
/// Returns (kronrod estimate, |kronrod - gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
///
/// Subdivides the segment with the largest error estimate until the total
/// error is within tolerance or the interval budget is spent. Non-finite
/// integrand values are reported as divergence.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "finite interval required, got [{a}, {b}]"
        )));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a: lo,
        b: hi,
        value: v,
        err: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut count = 1;
    while total_err > tol.abs.max(tol.rel * total.abs()) && count < tol.max_intervals {
        let seg = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval exhausted at machine resolution
            heap.push(Segment { err: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.err).sum();
            if total_err == 0.0 {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
        count += 1;
    }
    // re-sum to shed accumulated rounding from the running updates
    let total: f64 = heap.iter().map(|s| s.value).sum();
    if !total.is_finite() {
        return Err(Error::Divergent(format!(
            "integrand not finite on [{lo}, {hi}]"
        )));
    }
    Ok(sign * total)
}

/// Sum of dyadic shells approaching an endpoint. `shell(j)` integrates the
/// j-th shell; shells are requested until they are negligible or
/// `max_shells` is reached, after which a geometric tail is added.
fn dyadic_tail<S: FnMut(i32) -> Result<f64>>(
    mut shell: S,
    max_shells: i32,
    tol: Tolerance,
    scale: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut small_run = 0;
    for j in 0..max_shells {
        let c = shell(j)?;
        sum += c;
        let negligible = c.abs() <= tol.abs.max(tol.rel * 1e-2 * (scale.abs() + sum.abs()));
        if negligible {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
        if j == max_shells - 1 {
            // extrapolate the remaining shells from the last ratio
            let p = prev.unwrap_or(0.0);
            let ratio = if p != 0.0 { c / p } else { 0.0 };
            if !(ratio.abs() < 0.99) {
                return Err(Error::Divergent(
                    "endpoint contributions do not decay".into(),
                ));
            }
            let tail = c * ratio / (1.0 - ratio);
            if tail.abs() > 1e-3 * (scale.abs() + sum.abs()).max(1e-300) {
                return Err(Error::Divergent(
                    "endpoint contributions decay too slowly".into(),
                ));
            }
            sum += tail;
        }
        prev = Some(c);
    }
    Ok(sum)
}

/// Integrates `f` over `[0, 1]` where `f` may have integrable singularities
/// at 0 and 1 and jump discontinuities at `breaks`.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    integrate_singular(f, 0.0, 1.0, breaks, tol)
}

/// Integrates `f` over `[a, b]`, refining dyadically toward both endpoints.
pub fn integrate_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    if a >= b {
        return if a == b {
            Ok(0.0)
        } else {
            integrate_singular(f, b, a, breaks, tol).map(|v| -v)
        };
    }
    let mut pts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);

    // interior segments
    let k = pts.len() - 1;
    let mut body = 0.0;
    // first and last segment are split at their midpoint; the halves that
    // touch a and b get dyadic treatment
    let left_mid = 0.5 * (pts[0] + pts[1]);
    let right_mid = 0.5 * (pts[k - 1] + pts[k]);
    if k == 1 {
        let m = 0.5 * (a + b);
        let left = dyadic_toward_left(&f, a, m, tol)?;
        let right = dyadic_toward_right(&f, m, b, tol)?;
        return Ok(left + right);
    }
    body += integrate(&f, left_mid, pts[1], tol)?;
    for w in pts[1..k].windows(2) {
        body += integrate(&f, w[0], w[1], tol)?;
    }
    body += integrate(&f, pts[k - 1], right_mid, tol)?;
    let left = dyadic_toward_left(&f, a, left_mid, tol)?;
    let right = dyadic_toward_right(&f, right_mid, b, tol)?;
    Ok(body + left + right)
}

/// ∫_a^m f with shells [a + h 2^-(j+1), a + h 2^-j], h = m - a.
fn dyadic_toward_left<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, tol: Tolerance) -> Result<f64> {
    let h = m - a;
    let scale = gk15(f, a + 0.25 * h, m).0;
    let max_shells = shells_until_resolution(a, h);
    dyadic_tail(
        |j| {
            let hi = a + h * 0.5f64.powi(j);
            let lo = a + h * 0.5f64.powi(j + 1);
            integrate(f, lo, hi, tol)
        },
        max_shells,
        tol,
        scale,
    )
}

/// ∫_m^b f with shells [b - h 2^-j, b - h 2^-(j+1)], h = b - m.
fn dyadic_toward_right<F: Fn(f64) -> f64>(f: &F, m: f64, b: f64, tol: Tolerance) -> Result<f64> {
    let h = b - m;
    let scale = gk15(f, m, b - 0.25 * h).0;
    let max_shells = shells_until_resolution(b, h);
    dyadic_tail(
        |j| {
            let lo = b - h * 0.5f64.powi(j);
            let hi = b - h * 0.5f64.powi(j + 1);
            integrate(f, lo, hi, tol)
        },
        max_shells,
        tol,
        scale,
    )
}

/// Number of dyadic shells that stay distinguishable from `endpoint` in
/// double precision.
fn shells_until_resolution(endpoint: f64, h: f64) -> i32 {
    let ulp_scale = endpoint.abs().max(f64::MIN_POSITIVE);
    let mut j = 0;
    while j < 1000 {
        let step = h * 0.5f64.powi(j + 1);
        if endpoint.abs() > 0.0 && step < ulp_scale * 4.0 * f64::EPSILON {
            break;
        }
        if step < 1e-300 {
            break;
        }
        j += 1;
    }
    j.max(2)
}

/// ∫_a^∞ f via x = a + t / (1 - t).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<f64> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_singular(g, 0.0, 1.0, &[], tol)
}

/// ∫_{-∞}^b f via x = b - t / (1 - t).
pub fn integrate_from_neg_infinity<F: Fn(f64) -> f64>(f: F, b: f64, tol: Tolerance) -> Result<f64> {
    integrate_to_infinity(|y| f(2.0 * b - y), b, tol)
}

/// ∫ f over `[a, b]` where either limit may be infinite.
pub fn integrate_line<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_singular(f, a, b, breaks, tol),
        (true, false) => {
            let m = breaks
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(a, f64::max);
            Ok(integrate_singular(&f, a, m, breaks, tol)? + integrate_to_infinity(&f, m, tol)?)
        }
        (false, true) => {
            let m = breaks
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(b, f64::min);
            Ok(integrate_from_neg_infinity(&f, m, tol)?
                + integrate_singular(&f, m, b, breaks, tol)?)
        }
        (false, false) => {
            let finite: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
            Ok(integrate_from_neg_infinity(&f, lo, tol)?
                + integrate_singular(&f, lo, hi, breaks, tol)?
                + integrate_to_infinity(&f, hi, tol)?)
        }
    }
}
