//! Adaptive Gauss–Legendre quadrature and the kernel integrals
//! `∫₀¹ e^{ζ(s−1)} s^k ds` used by the partial-sum evaluators.
//!
//! The kernel integrals are computed in the variable δ = 1 − s so that the
//! factor `s^k = exp(k·log1p(−δ))` keeps full relative accuracy for very
//! large `k`, and the integrand is scaled by its peak so the result is
//! returned as a logarithm.

use crate::numeric::ComplexKahanSum;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

const GL_ORDER: usize = 20;

/// Below `e^{-TAIL_CUT}` of the peak, integrand mass is dropped.
const TAIL_CUT: f64 = 46.0;

struct GaussRule {
    nodes: [f64; GL_ORDER],
    weights: [f64; GL_ORDER],
}

fn gauss_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussRule { nodes, weights }
    })
}

/// Values that can be integrated: real or complex.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn to_complex(self) -> Complex64;
    fn from_complex(z: Complex64) -> Self;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    /// Estimated absolute error (sum of accepted panel discrepancies).
    pub error: f64,
    /// ∫|f|, for judging cancellation.
    pub abs_integral: f64,
    pub evaluations: usize,
}

fn gl_panel<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let rule = gauss_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = T::zero();
    let mut abs = 0.0;
    for i in 0..GL_ORDER {
        let v = f(mid + half * rule.nodes[i]);
        acc = acc + v * (rule.weights[i] * half);
        abs += v.magnitude() * rule.weights[i] * half.abs();
    }
    (acc, abs)
}

/// Adaptive Gauss–Legendre integration over the consecutive panels given by
/// sorted `breakpoints`. Each panel is bisected until the 20-point rule and
/// the sum over its two halves agree within the locally allotted tolerance.
pub fn integrate_adaptive<T, F>(f: F, breakpoints: &[f64], rel_tol: f64, abs_tol: f64) -> Integral<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    const MAX_DEPTH: u32 = 40;
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let total_width = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    let mut panels = Vec::new();
    let mut first_pass = ComplexKahanSum::new();
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            let (v, a) = gl_panel(&f, w[0], w[1]);
            evaluations += GL_ORDER;
            first_pass.add(v.to_complex());
            panels.push((w[0], w[1], v, a, 0u32));
        }
    }
    let scale = first_pass.value().norm();
    let target = (rel_tol * scale).max(abs_tol);
    let mut total = ComplexKahanSum::new();
    let mut abs_total = 0.0;
    let mut error = 0.0;
    while let Some((a, b, whole, whole_abs, depth)) = panels.pop() {
        let m = 0.5 * (a + b);
        let (left, la) = gl_panel(&f, a, m);
        let (right, ra) = gl_panel(&f, m, b);
        evaluations += 2 * GL_ORDER;
        let halves = left + right;
        let diff = (halves - whole).magnitude();
        let allowed = target * ((b - a) / total_width).max(1e-4);
        let noise = 64.0 * f64::EPSILON * (la + ra).max(whole_abs);
        if diff <= allowed.max(noise) || depth >= MAX_DEPTH {
            total.add(halves.to_complex());
            abs_total += la + ra;
            error += diff;
        } else {
            panels.push((a, m, left, la, depth + 1));
            panels.push((m, b, right, ra, depth + 1));
        }
    }
    Integral {
        value: T::from_complex(total.value()),
        error,
        abs_integral: abs_total,
        evaluations,
    }
}

/// Geometric breakpoints `lo, lo+w, lo+2w, lo+4w, …` up to `hi`, refined so
/// no panel is longer than `max_panel`.
fn geometric_breaks(lo: f64, hi: f64, w: f64, max_panel: f64) -> Vec<f64> {
    let mut raw = vec![lo];
    let mut step = w.max((hi - lo) * 1e-12);
    let mut x = lo + step;
    while x < hi {
        raw.push(x);
        step *= 2.0;
        x = lo + step;
    }
    raw.push(hi);
    let mut out = vec![raw[0]];
    for seg in raw.windows(2) {
        let len = seg[1] - seg[0];
        let pieces = (len / max_panel).ceil().clamp(1.0, 1e6) as usize;
        for j in 1..=pieces {
            out.push(seg[0] + len * j as f64 / pieces as f64);
        }
    }
    out
}

/// `ln ∫₀¹ e^{y(s−1)} s^k ds` for real `y ≥ 0`, `k ≥ 0`.
pub fn ln_kernel_real(y: f64, k: f64) -> f64 {
    debug_assert!(y >= 0.0 && k >= 0.0);
    if k == 0.0 {
        return if y == 0.0 {
            0.0
        } else if y < 1e-8 {
            (1.0 - y / 2.0 + y * y / 6.0).ln()
        } else {
            (-(-y).exp_m1()).ln() - y.ln()
        };
    }
    if y == 0.0 {
        return -(k + 1.0).ln();
    }
    // φ(δ) = −yδ + k·log1p(−δ) is concave with its peak φ(0) = 0, and
    // φ(δ) ≤ −(y+k)δ, so the mass beyond TAIL_CUT/(y+k) is negligible.
    let slope = y + k;
    let hi = (TAIL_CUT / slope).min(1.0);
    let breaks = geometric_breaks(0.0, hi, 1.0 / slope, f64::INFINITY);
    let integrand = |d: f64| (-y * d + k * (-d).ln_1p()).exp();
    let r = integrate_adaptive(integrand, &breaks, 1e-15, 0.0);
    r.value.ln()
}

/// A kernel integral returned as a logarithm with a relative error estimate.
#[derive(Debug, Clone, Copy)]
pub struct LnKernel {
    pub ln_value: Complex64,
    pub rel_error: f64,
}

/// `ln ∫₀¹ e^{ζ(s−1)} s^k ds` for complex ζ and `k ≥ 0` (principal branch
/// of the log of the scaled integral).
pub fn ln_kernel_complex(zeta: Complex64, k: f64) -> LnKernel {
    let a = zeta.re;
    let b = zeta.im;
    let re_phi = |d: f64| -a * d + if k > 0.0 { k * (-d).ln_1p() } else { 0.0 };
    // Peak of the (concave) modulus exponent.
    let peak = if k == 0.0 {
        if a < 0.0 {
            1.0
        } else {
            0.0
        }
    } else if a < -k {
        1.0 + k / a
    } else {
        0.0
    };
    let phi_star = re_phi(peak);
    let cut = phi_star - TAIL_CUT;
    // Level-set endpoints by bisection (concavity makes the set an interval).
    let lo = if peak == 0.0 || re_phi(0.0) >= cut {
        0.0
    } else {
        let (mut l, mut h) = (0.0, peak);
        for _ in 0..80 {
            let m = 0.5 * (l + h);
            if re_phi(m) < cut {
                l = m;
            } else {
                h = m;
            }
        }
        l
    };
    let hi = if peak >= 1.0 || (k == 0.0 && re_phi(1.0) >= cut) {
        1.0
    } else {
        let upper = if k > 0.0 { 1.0 - 1e-300 } else { 1.0 };
        if re_phi(upper) >= cut {
            1.0
        } else {
            let (mut l, mut h) = (peak, upper);
            for _ in 0..80 {
                let m = 0.5 * (l + h);
                if re_phi(m) >= cut {
                    l = m;
                } else {
                    h = m;
                }
            }
            h
        }
    };
    let curvature = if k > 0.0 {
        k / ((1.0 - peak) * (1.0 - peak)).max(1e-300)
    } else {
        0.0
    };
    let slope = (a + k).abs();
    let w = 1.0 / slope.max(curvature.sqrt()).max(1.0);
    let max_panel = if b.abs() > 0.0 { 2.0 * PI / b.abs() } else { f64::INFINITY };
    let integrand = |d: f64| Complex64::new(re_phi(d) - phi_star, -b * d).exp();
    let mut breaks = Vec::new();
    if peak > lo {
        let left = geometric_breaks(0.0, peak - lo, w, max_panel);
        breaks.extend(left.iter().rev().map(|t| peak - t));
    } else {
        breaks.push(lo);
    }
    if hi > peak {
        let right = geometric_breaks(0.0, hi - peak, w, max_panel);
        breaks.extend(right.iter().skip(1).map(|t| peak + t));
    }
    breaks.dedup();
    if breaks.len() < 2 {
        breaks = vec![lo, hi.max(lo + f64::EPSILON)];
    }
    let r = integrate_adaptive(integrand, &breaks, 1e-14, 0.0);
    let mag = r.value.norm();
    let phase_noise = (b.abs() + 1.0) * f64::EPSILON;
    let rel_error = (r.error + (64.0 * f64::EPSILON + phase_noise) * r.abs_integral) / mag;
    LnKernel {
        ln_value: Complex64::new(phi_star, 0.0) + r.value.ln(),
        rel_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let r = integrate_adaptive(|x: f64| x.powi(7) - 3.0 * x * x, &[0.0, 2.0], 1e-15, 0.0);
        assert!((r.value - (32.0 - 8.0)).abs() < 1e-12);
        let w: f64 = gauss_rule().weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let r = integrate_adaptive(|x: f64| 1.0 / (1e-4 + x * x), &[-1.0, 0.0, 1.0], 1e-13, 0.0);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn kernel_real_closed_forms() {
        // k = 1: ∫ e^{y(s−1)} s ds = 1/y − (1 − e^{−y})/y².
        for &y in &[0.5f64, 3.0, 40.0, 1e3] {
            let exact: f64 = 1.0 / y - (1.0 - (-y).exp()) / (y * y);
            assert!((ln_kernel_real(y, 1.0) - exact.ln()).abs() < 1e-13, "y={y}");
        }
        assert!((ln_kernel_real(0.0, 9.0) + 10f64.ln()).abs() < 1e-15);
        let y = 2.5f64;
        assert!((ln_kernel_real(y, 0.0) - ((1.0 - (-y).exp()) / y).ln()).abs() < 1e-15);
    }

    #[test]
    fn kernel_complex_agrees_with_real_on_axis() {
        for &(y, k) in &[(1.0, 4.0), (30.0, 24.0), (500.0, 100.0)] {
            let c = ln_kernel_complex(Complex64::new(y, 0.0), k);
            assert!((c.ln_value.re - ln_kernel_real(y, k)).abs() < 1e-12);
            assert!(c.ln_value.im.abs() < 1e-14);
            assert!(c.rel_error < 1e-10);
        }
    }

    #[test]
    fn kernel_complex_k_one_closed_form() {
        // ∫₀¹ e^{ζ(s−1)} s ds = 1/ζ − (1 − e^{−ζ})/ζ².
        for &z in &[Complex64::new(2.0, 7.0), Complex64::new(-30.0, 12.0), Complex64::new(5.0, -40.0)] {
            let exact = 1.0 / z - (1.0 - (-z).exp()) / (z * z);
            let got = ln_kernel_complex(z, 1.0).ln_value.exp();
            assert!((got - exact).norm() / exact.norm() < 1e-11, "{z}");
        }
    }
}
