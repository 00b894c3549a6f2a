//! Zeros of the partial sums `P_m` and of the glued maps.
//!
//! Zeros of `g_m` are the points `log y + 2πiℤ` for roots `y` of `P_m`, so
//! every zero of `U`, `V` (and hence of `G`) is found by inverting the strip
//! argument, `Q` and the sector power at one root.

use crate::error::{Error, Result};
use crate::expsum::{ExpPartialSum, MapValue};
use crate::glue::{GlueConfig, Variant};
use crate::numeric::{bracket_increasing, fit_loglog, ln_gamma, newton_bracketed, principal_pow, wrap_angle};
use crate::oscillation::Rect;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Largest level whose roots are computed (degree 1024).
pub const MAX_ROOT_LEVEL: u64 = 512;

/// The `2m` roots of `P_m`.
#[derive(Debug, Clone, Serialize)]
pub struct RootSet {
    pub m: u64,
    pub roots: Vec<Complex64>,
    /// Largest final Aberth correction relative to the root's modulus.
    pub residual_bound: f64,
}

/// Starting points from `N(log w + 1 − w) + log w − log(√(2πN)(1 − w)) = 2πij`,
/// the zero condition of the leading tail term, with roots `z = −N w`.
fn asymptotic_guesses(big_n: usize) -> Vec<Complex64> {
    let nf = big_n as f64;
    let c = (TWO_PI * nf).sqrt().ln();
    let mut out = Vec::with_capacity(big_n);
    let mut w = Complex64::new(1.0, 0.0);
    for j in 1..=big_n / 2 {
        let phi = TWO_PI * (j as f64 - 0.5) / nf;
        if j == 1 {
            w = 1.0 - phi.sqrt() * Complex64::new(1.0, -1.0);
        }
        let target = Complex64::new(0.0, TWO_PI * (j as f64 - 0.5));
        for _ in 0..60 {
            let h = nf * (w.ln() + 1.0 - w) + w.ln() - (c + (1.0 - w).ln()) - target;
            let d = nf * (1.0 / w - 1.0) + 1.0 / w + 1.0 / (1.0 - w);
            let step = h / d;
            w -= step;
            if step.norm() < 1e-14 {
                break;
            }
        }
        let z = -nf * w;
        out.push(z);
        out.push(z.conj());
    }
    out
}

/// `P_m/P_m′` at `y` from `h_m = P_m e^y` and `h_m′ = e^y y^{2m}/(2m)!`.
fn newton_ratio(e: &ExpPartialSum, y: Complex64) -> Complex64 {
    let k = (2 * e.m()) as f64;
    let log_h = match e.complex_log_gm(y.ln()) {
        Ok(MapValue::Log(l)) => l,
        _ => return Complex64::new(0.0, 0.0),
    };
    let log_hp = y + k * y.ln() - ln_gamma(k + 1.0);
    let q = (log_hp - log_h).exp();
    (q - 1.0).inv()
}

/// All `2m` roots of `P_m(z) = Σ_{k≤2m} (−z)^k/k!` by Aberth–Ehrlich iteration.
pub fn roots_of_pm(m: u64) -> Result<RootSet> {
    if m == 0 {
        return Ok(RootSet { m, roots: Vec::new(), residual_bound: 0.0 });
    }
    if m > MAX_ROOT_LEVEL {
        return Err(Error::RangeExhausted { what: "root level", needed: m as f64, limit: MAX_ROOT_LEVEL as f64 });
    }
    let e = ExpPartialSum::new(m);
    let big_n = (2 * m) as usize;
    let mut z = asymptotic_guesses(big_n);
    let mut done = vec![false; big_n];
    let mut last = vec![f64::INFINITY; big_n];
    for _ in 0..200 {
        let ratios: Vec<Complex64> =
            (0..big_n).map(|i| if done[i] { Complex64::new(0.0, 0.0) } else { newton_ratio(&e, z[i]) }).collect();
        let mut moved = false;
        for i in 0..big_n {
            if done[i] {
                continue;
            }
            let s: Complex64 = (0..big_n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let r = ratios[i];
            let step = r / (1.0 - r * s);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
            }
            last[i] = step.norm() / z[i].norm().max(1.0);
            if last[i] < 1e-14 {
                done[i] = true;
            } else {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let worst = last.iter().cloned().fold(0.0, f64::max);
    if !(worst < 1e-8) {
        return Err(Error::NonConvergence { degree: big_n, residual: worst });
    }
    // Restore exact conjugate pairing: keep the lower-half roots, mirror them.
    let mut lower: Vec<Complex64> = z.iter().filter(|r| r.im < 0.0).cloned().collect();
    if lower.len() * 2 != big_n {
        return Err(Error::NonConvergence { degree: big_n, residual: worst });
    }
    lower.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut roots = lower.clone();
    roots.extend(lower.iter().map(|r| r.conj()));
    Ok(RootSet { m, roots, residual_bound: worst })
}

/// Invert `Q` (or `Q₁`) at `q` with `Im q ≥ 0`.
fn invert_q(c: &GlueConfig, q: Complex64, variant: Variant) -> Result<Complex64> {
    let (x, v) = (q.re, q.im);
    if x >= 1.0 {
        return Ok(q);
    }
    if q.norm() <= 1.0 {
        let r = q.norm();
        return Ok(if r == 0.0 { q } else { q * r.powf(1.0 / c.gamma() - 1.0) });
    }
    if v <= 1.0 {
        return Ok(q);
    }
    // (1 − x)·g(y) + x·y = v is increasing in y ≥ 1 and equals 1 at y = 1.
    let f = |y: f64| -> (f64, f64) {
        let g = c.boundary_profile(y, variant).unwrap_or(f64::INFINITY);
        let gp = c.boundary_profile_prime(y, variant).unwrap_or(1.0);
        ((1.0 - x) * g + x * y - v, (1.0 - x) * gp + x)
    };
    let (mut lo, mut hi) = (1.0, 2.0);
    while f(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RangeExhausted { what: "Q inverse", needed: v, limit: hi });
        }
    }
    let y = newton_bracketed(f, lo, hi, 0.5 * (lo + hi), 1e-14);
    Ok(Complex64::new(x, y))
}

/// Root of the increasing `x ↦ x + t·dψ(x) − target`, with `(dψ, ψ′)` supplied.
fn solve_strip_real<F>(psi: F, t: f64, target: f64, guess: f64) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let f = |x: f64| {
        let (d, p) = psi(x);
        (x + t * d - target, 1.0 + t * (p - 1.0))
    };
    let (lo, hi) = bracket_increasing(|x| f(x).0, guess, 1.0 + guess.abs() * 0.1);
    newton_bracketed(f, lo, hi, guess.clamp(lo, hi), 1e-14)
}

/// Zeros of `G₀` or `G₁` with `|z| ≤ r_max`, sorted by modulus (conjugates included).
pub fn structural_zeros(c: &GlueConfig, variant: Variant, r_max: f64) -> Result<Vec<Complex64>> {
    let limit = c.max_radius(variant);
    if !(r_max <= limit) {
        return Err(Error::RangeExhausted { what: "zero count radius", needed: r_max, limit });
    }
    let shift = if variant == Variant::G1 { PI } else { 0.0 };
    let big_r = r_max.powf(c.sigma());
    let right_height = big_r.max(c.boundary_profile(big_r, variant)?) - shift;
    let k_right = if right_height < 0.0 { 0 } else { ((right_height / TWO_PI).floor() as usize + 1).min(c.k_max() - 1) };
    let left_height = r_max.powf(c.rho()) - shift;
    let k_left = if left_height < 0.0 { 0 } else { c.left_strip(left_height)?.0 };
    let k_top = k_right.max(k_left);

    let mut levels: Vec<u64> = (1..=k_top).map(|k| c.m(k)).filter(|&m| m > 0).collect();
    levels.sort_unstable();
    levels.dedup();
    let sets: Vec<Result<RootSet>> = levels.par_iter().map(|&m| roots_of_pm(m)).collect();
    let mut roots = BTreeMap::new();
    for s in sets {
        let s = s?;
        roots.insert(s.m, s);
    }

    let mut upper = Vec::new();
    for k in 1..=k_top {
        let m = c.m(k);
        if m == 0 {
            continue;
        }
        let sm = c.level(k).s_m();
        for y in &roots[&m].roots {
            let theta = y.im.atan2(y.re).rem_euclid(TWO_PI);
            let t = theta / TWO_PI;
            let target = y.norm().ln() - sm;
            if k <= k_right {
                let psi = |x: f64| c.psi_right(k, x);
                if t * psi(0.0).0 <= target {
                    let x = solve_strip_real(psi, t, target, target.max(0.0));
                    let q = Complex64::new(x.max(0.0), TWO_PI * (k as f64 - 1.0 + t) + shift);
                    let w = invert_q(c, q, variant)?;
                    let z = principal_pow(w, 1.0 / c.sigma());
                    if z.norm() <= r_max {
                        upper.push(z);
                    }
                }
            }
            if k <= k_left {
                let n = c.n(k) as f64;
                let psi = |x: f64| c.psi_left(k, x);
                let target = n * target;
                if t * psi(0.0).0 > target {
                    let x = solve_strip_real(psi, t, target, target.min(0.0));
                    let w = Complex64::new(x.min(0.0), TWO_PI * (c.partial_sum_n(k - 1) as f64 + t * n) + shift);
                    let z = -principal_pow(-w, 1.0 / c.rho());
                    if z.norm() <= r_max {
                        upper.push(z);
                    }
                }
            }
        }
    }
    let mut all: Vec<Complex64> = upper.iter().flat_map(|z| [*z, z.conj()]).collect();
    all.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    Ok(all)
}

/// Number of zeros of `G₀`/`G₁` in `|z| ≤ r`.
pub fn count_zeros_g(c: &GlueConfig, variant: Variant, r: f64) -> Result<usize> {
    Ok(structural_zeros(c, variant, r)?.len())
}

/// `4·Σ_{j≤k} m_j` for the largest strip index `k` met by `|z| ≤ r` in either sector.
pub fn zero_bound(c: &GlueConfig, variant: Variant, r: f64) -> Result<u64> {
    let shift = if variant == Variant::G1 { PI } else { 0.0 };
    let big_r = r.powf(c.sigma());
    let right_height = (big_r.max(c.boundary_profile(big_r, variant)?) - shift).max(0.0);
    let k_right = (right_height / TWO_PI).floor() as usize + 1;
    let k_left = c.left_strip((r.powf(c.rho()) - shift).max(0.0))?.0;
    let k = k_right.max(k_left).min(c.k_max() - 1);
    Ok(4 * (1..=k).map(|j| c.m(j)).sum::<u64>())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountRow {
    pub r: f64,
    pub count: usize,
    pub bound_4sum: u64,
}

/// Counting function on a grid of radii, from a single zero enumeration.
pub fn counting_table(c: &GlueConfig, variant: Variant, radii: &[f64]) -> Result<Vec<CountRow>> {
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let zeros = structural_zeros(c, variant, r_max)?;
    radii
        .iter()
        .map(|&r| {
            let count = zeros.partition_point(|z| z.norm() <= r);
            Ok(CountRow { r, count, bound_4sum: zero_bound(c, variant, r)? })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub pairs: usize,
}

/// Least-squares slope of `log n` against `log r` over pairs with `n > 0`.
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<ExponentFit> {
    let used: Vec<(f64, f64)> = pairs.iter().cloned().filter(|&(r, n)| r > 0.0 && n > 0.0).collect();
    if used.len() < 8 {
        return Err(Error::InsufficientData(format!("{} usable pairs, need 8", used.len())));
    }
    let lo = used.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|p| p.0).fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 {
        return Err(Error::InsufficientData(format!("radii span {:.3} decades, need 1.5", (hi / lo).log10())));
    }
    let (slope, intercept, stderr) =
        fit_loglog(&used).ok_or_else(|| Error::InsufficientData("degenerate fit".into()))?;
    Ok(ExponentFit { slope, stderr, intercept, pairs: used.len() })
}

const MIN_DEPTH: u32 = 6;

/// Winding number of `G` around 0 along the boundary of `rect`, from log
/// values with adaptive refinement of each edge.
pub fn winding_count(c: &GlueConfig, variant: Variant, rect: &Rect) -> Result<i64> {
    let corners = [
        Complex64::new(rect.x0, rect.y0),
        Complex64::new(rect.x1, rect.y0),
        Complex64::new(rect.x1, rect.y1),
        Complex64::new(rect.x0, rect.y1),
    ];
    let log_g = |z: Complex64| -> Result<Complex64> { c.eval_g(z, variant)?.log_value().ok_or(Error::ZeroValue) };
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let mut stack = vec![(a, b, 0u32)];
        while let Some((p, q, depth)) = stack.pop() {
            let d = log_g(q)? - log_g(p)?;
            let mid = log_g(0.5 * (p + q))?;
            let d1 = wrap_angle((mid - log_g(p)?).im);
            let d2 = wrap_angle((log_g(q)? - mid).im);
            if depth >= MIN_DEPTH && d1.abs() < PI / 8.0 && d2.abs() < PI / 8.0 && (wrap_angle(d.im) - d1 - d2).abs() < 1e-9 {
                total += d1 + d2;
            } else if depth > 40 {
                return Err(Error::SeamProximity);
            } else {
                stack.push((0.5 * (p + q), q, depth + 1));
                stack.push((p, 0.5 * (p + q), depth + 1));
            }
        }
    }
    Ok((total / TWO_PI).round() as i64)
}

/// Structural zeros inside `rect`.
pub fn zeros_in_rect(zeros: &[Complex64], rect: &Rect) -> usize {
    zeros.iter().filter(|z| z.re > rect.x0 && z.re < rect.x1 && z.im > rect.y0 && z.im < rect.y1).count()
}
