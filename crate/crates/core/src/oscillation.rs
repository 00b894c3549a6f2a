//! Schwarzian derivative, the Bank–Laine operator and related utilities.
//!
//! Derivatives of analytic callables are taken from Cauchy integrals on a
//! small circle (trapezoid rule, which is spectrally accurate for periodic
//! integrands).

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Value and first three derivatives of an analytic function at `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JetSample {
    pub z: Complex64,
    pub f: Complex64,
    pub f1: Complex64,
    pub f2: Complex64,
    pub f3: Complex64,
}

/// A Möbius map `w ↦ (a w + b)/(c w + d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        if (a * d - b * c).norm() == 0.0 {
            return Err(Error::InvalidArgument("degenerate Möbius map".into()));
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn apply(&self, w: Complex64) -> Complex64 {
        (self.a * w + self.b) / (self.c * w + self.d)
    }

    /// Jet of `L ∘ F` from the jet of `F`.
    pub fn compose(&self, j: &JetSample) -> Result<JetSample> {
        let den = self.c * j.f + self.d;
        if den.norm() == 0.0 {
            return Err(Error::ZeroValue);
        }
        let det = self.a * self.d - self.b * self.c;
        let l1 = det / (den * den);
        let l2 = -2.0 * self.c * l1 / den;
        let l3 = -3.0 * self.c * l2 / den;
        Ok(JetSample {
            z: j.z,
            f: self.apply(j.f),
            f1: l1 * j.f1,
            f2: l2 * j.f1 * j.f1 + l1 * j.f2,
            f3: l3 * j.f1 * j.f1 * j.f1 + 3.0 * l2 * j.f1 * j.f2 + l1 * j.f3,
        })
    }
}

/// `S = f‴/f′ − (3/2)(f″/f′)²`.
pub fn schwarzian(j: &JetSample) -> Result<Complex64> {
    if j.f1.norm() == 0.0 {
        return Err(Error::CriticalPoint);
    }
    let r = j.f2 / j.f1;
    Ok(j.f3 / j.f1 - 1.5 * r * r)
}

/// `B(E) = −2E″/E + (E′/E)² − 1/E²`; only `f`, `f1`, `f2` of the jet are used.
pub fn bank_laine_b(e: &JetSample) -> Result<Complex64> {
    if e.f.norm() == 0.0 {
        return Err(Error::ZeroValue);
    }
    let inv = e.f.inv();
    let r = e.f1 * inv;
    Ok(-2.0 * e.f2 * inv + r * r - inv * inv)
}

/// Value and first two derivatives of `E = F/F′`, from the jet of `F`.
pub fn quotient_jet(j: &JetSample) -> Result<(Complex64, Complex64, Complex64)> {
    if j.f1.norm() == 0.0 {
        return Err(Error::CriticalPoint);
    }
    let inv = j.f1.inv();
    let e = j.f * inv;
    let e1 = 1.0 - j.f * j.f2 * inv * inv;
    let e2 = -j.f2 * inv - j.f * j.f3 * inv * inv + 2.0 * j.f * j.f2 * j.f2 * inv * inv * inv;
    Ok((e, e1, e2))
}

/// `B(F/F′)` from the jet of `F`.
pub fn bank_laine_b_of_quotient(j: &JetSample) -> Result<Complex64> {
    let (f, f1, f2) = quotient_jet(j)?;
    bank_laine_b(&JetSample { z: j.z, f, f1, f2, f3: Complex64::new(f64::NAN, f64::NAN) })
}

/// `A(z) = −e^{2z}/4 − (d/2)e^z − (d+1)²/4`, half the Schwarzian of
/// `P(e^z)e^{e^z}` with `P` the degree-`d` partial sum of `e^{−w}`.
pub fn example2_coefficient(d: u32, z: Complex64) -> Complex64 {
    let ez = z.exp();
    let d = d as f64;
    -ez * ez / 4.0 - d / 2.0 * ez - (d + 1.0) * (d + 1.0) / 4.0
}

/// `M(Θ) = (2/π)·arcsin((1−Θ)/(1+Θ))`.
pub fn two_constants_m(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
    }
    Ok(2.0 / PI * ((1.0 - theta) / (1.0 + theta)).asin())
}

/// Jet of `f` at `z` from `points` samples on the circle of the given radius.
pub fn cauchy_jet<F>(f: F, z: Complex64, radius: f64, points: usize) -> Result<JetSample>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(radius > 0.0) || points < 8 {
        return Err(Error::InvalidArgument("need radius > 0 and at least 8 points".into()));
    }
    let mut c = [Complex64::new(0.0, 0.0); 4];
    for j in 0..points {
        let u = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / points as f64);
        let v = f(z + radius * u);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at {}", z + radius * u)));
        }
        let mut w = Complex64::new(1.0, 0.0);
        for ck in c.iter_mut() {
            *ck += v * w;
            w *= u.conj();
        }
    }
    let scale = |k: usize, fact: f64| c[k] / points as f64 * fact / radius.powi(k as i32);
    Ok(JetSample { z, f: scale(0, 1.0), f1: scale(1, 1.0), f2: scale(2, 2.0), f3: scale(3, 6.0) })
}

/// Default Cauchy jet: radius 0.25, 64 points.
pub fn jet<F>(f: F, z: Complex64) -> Result<JetSample>
where
    F: Fn(Complex64) -> Complex64,
{
    cauchy_jet(f, z, 0.25, 64)
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x0, self.y0),
            Complex64::new(self.x1, self.y0),
            Complex64::new(self.x1, self.y1),
            Complex64::new(self.x0, self.y1),
        ]
    }

    fn centre(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn split(&self) -> [Rect; 2] {
        if self.x1 - self.x0 >= self.y1 - self.y0 {
            let m = 0.5 * (self.x0 + self.x1);
            [Rect { x1: m, ..*self }, Rect { x0: m, ..*self }]
        } else {
            let m = 0.5 * (self.y0 + self.y1);
            [Rect { y1: m, ..*self }, Rect { y0: m, ..*self }]
        }
    }

    fn diameter(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }
}

/// Winding number of `f` around 0 along the boundary of `r`.
///
/// Each edge is refined until consecutive argument increments stay below
/// π/4, so no turn is missed.
pub fn winding_number<F>(f: F, r: &Rect, samples_per_edge: usize) -> Result<i64>
where
    F: Fn(Complex64) -> Complex64,
{
    let corners = r.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        total += edge_turn(&f, a, b, samples_per_edge.max(4), 0)?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn edge_turn<F>(f: &F, a: Complex64, b: Complex64, n: usize, depth: u32) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut prev = f(a);
    let mut total = 0.0;
    for i in 1..=n {
        let p = a + (b - a) * (i as f64 / n as f64);
        let v = f(p);
        if v.norm() == 0.0 || prev.norm() == 0.0 {
            return Err(Error::ZeroValue);
        }
        let d = (v / prev).arg();
        if d.abs() > PI / 4.0 {
            if depth > 30 {
                return Err(Error::ArgumentUnresolved { re: p.re, im: p.im });
            }
            let q = a + (b - a) * ((i - 1) as f64 / n as f64);
            total += edge_turn(f, q, p, 8, depth + 1)?;
        } else {
            total += d;
        }
        prev = v;
    }
    Ok(total)
}

/// A located zero of a test function, with the derivative there.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroReport {
    pub z: Complex64,
    pub derivative: Complex64,
    /// Whether the derivative is `±1` to the requested tolerance.
    pub bank_laine: bool,
}

/// Locate the zeros of `e` inside `rect` by argument-principle bisection and
/// Newton polishing, and test `e′ ∈ {−1, 1}` at each.
pub fn bank_laine_zeros<F>(e: F, rect: Rect, tol: f64) -> Result<Vec<ZeroReport>>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut out = Vec::new();
    let mut stack = vec![rect];
    while let Some(r) = stack.pop() {
        let count = winding_number(&e, &r, 64)?;
        if count < 0 {
            return Err(Error::InvalidArgument("function has poles in the rectangle".into()));
        }
        if count == 0 {
            continue;
        }
        if count == 1 && r.diameter() < 0.5 {
            let mut z = r.centre();
            for _ in 0..50 {
                let j = cauchy_jet(&e, z, 1e-2 * r.diameter().max(1e-3), 32)?;
                let step = j.f / j.f1;
                z -= step;
                if step.norm() < 1e-15 * z.norm().max(1.0) {
                    break;
                }
            }
            let j = cauchy_jet(&e, z, 1e-2, 32)?;
            let bl = (j.f1 - 1.0).norm() < tol || (j.f1 + 1.0).norm() < tol;
            out.push(ZeroReport { z, derivative: j.f1, bank_laine: bl });
            continue;
        }
        if r.diameter() < 1e-10 {
            return Err(Error::ZerosUnresolved { count: count as usize, diameter: r.diameter() });
        }
        stack.extend(r.split());
    }
    out.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn schwarzian_of_exponential() {
        let z = c(0.3, -0.4);
        let e = z.exp();
        let j = JetSample { z, f: e, f1: e, f2: e, f3: e };
        assert!((schwarzian(&j).unwrap() + 0.5).norm() < 1e-15);
        let jj = jet(|w| w.exp(), z).unwrap();
        assert!((schwarzian(&jj).unwrap() + 0.5).norm() < 1e-12);
    }

    #[test]
    fn schwarzian_vanishes_on_mobius() {
        let l = Mobius::new(c(1.0, 2.0), c(-0.5, 0.0), c(0.3, 0.1), c(2.0, -1.0)).unwrap();
        let z = c(0.2, 0.7);
        let j = jet(|w| l.apply(w), z).unwrap();
        assert!(schwarzian(&j).unwrap().norm() < 1e-10);
        assert_eq!(schwarzian(&JetSample { z, f: c(1.0, 0.0), f1: c(0.0, 0.0), f2: z, f3: z }), Err(Error::CriticalPoint));
    }

    #[test]
    fn bank_laine_of_exponential() {
        for &z in &[c(0.0, 0.0), c(0.5, 1.0), c(-1.0, 0.3)] {
            let e = z.exp();
            let b = bank_laine_b(&JetSample { z, f: e, f1: e, f2: e, f3: e }).unwrap();
            assert!((b - (-1.0 - (-2.0 * z).exp())).norm() < 1e-13);
        }
    }

    #[test]
    fn quotient_of_double_exponential() {
        // F = e^{e^z}: F/F′ = e^{−z}, and 4A = B(e^{−z}) with A from d = 0.
        let z = c(0.4, -0.9);
        let j = jet(|w| w.exp().exp(), z).unwrap();
        let (e, e1, e2) = quotient_jet(&j).unwrap();
        let m = (-z).exp();
        assert!((e - m).norm() < 1e-12 && (e1 + m).norm() < 1e-12 && (e2 - m).norm() < 1e-10);
        let b = bank_laine_b_of_quotient(&j).unwrap();
        assert!((b - 4.0 * example2_coefficient(0, z)).norm() < 1e-9);
    }

    #[test]
    fn example2_spot_values() {
        assert!((example2_coefficient(0, c(0.0, 0.0)) + 0.5).norm() < 1e-15);
        assert!((example2_coefficient(1, c(0.0, 0.0)) + 1.75).norm() < 1e-15);
    }

    #[test]
    fn example2_matches_schwarzian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 0..4u32 {
            let f = move |z: Complex64| {
                let w = z.exp();
                let mut p = c(0.0, 0.0);
                let mut t = c(1.0, 0.0);
                for k in 0..=d {
                    p += t;
                    t *= -w / (k + 1) as f64;
                }
                p * w.exp()
            };
            for _ in 0..10 {
                let z = Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(-PI..PI));
                let s = schwarzian(&jet(f, z).unwrap()).unwrap();
                let a = example2_coefficient(d, z);
                assert!((s - 2.0 * a).norm() <= 1e-6 * a.norm().max(1.0), "d={d} z={z}");
            }
        }
    }

    #[test]
    fn mobius_invariance_and_factorisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let j = JetSample { z: c(0.0, 0.0), f: rand_c(&mut rng), f1: rand_c(&mut rng), f2: rand_c(&mut rng), f3: rand_c(&mut rng) };
            let l = Mobius::new(rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)).unwrap();
            let s = schwarzian(&j).unwrap();
            let sl = schwarzian(&l.compose(&j).unwrap()).unwrap();
            assert!((s - sl).norm() <= 1e-9 * s.norm().max(1.0));
            if j.f.norm() > 1e-3 {
                let b = bank_laine_b_of_quotient(&j).unwrap();
                assert!((s - b / 2.0).norm() <= 1e-9 * s.norm().max(1.0));
            }
        }
    }

    #[test]
    fn two_constants_values() {
        assert!((two_constants_m(1.0 / 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((two_constants_m(1e-12).unwrap() - 1.0).abs() < 1e-5);
        for &t in &[1e-4, 1e-2, 0.1] {
            assert!(two_constants_m(t).unwrap() >= 1.0 - 4.0 / PI * t.sqrt());
        }
        let mut prev = 1.0;
        for i in 1..1000 {
            let m = two_constants_m(i as f64 / 1000.0).unwrap();
            assert!(m < prev);
            prev = m;
        }
        assert!(two_constants_m(0.0).is_err() && two_constants_m(1.0).is_err());
    }

    #[test]
    fn winding_counts_roots() {
        let f = |z: Complex64| (z - c(0.3, 0.2)) * (z + c(0.5, 0.0)) * (z - c(2.0, 2.0));
        let r = Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };
        assert_eq!(winding_number(f, &r, 32).unwrap(), 2);
    }

    #[test]
    fn sine_is_bank_laine_and_twice_sine_is_not() {
        let r = Rect { x0: -7.0, x1: 7.1, y0: -1.0, y1: 1.3 };
        let zs = bank_laine_zeros(|z: Complex64| z.sin(), r, 1e-8).unwrap();
        assert_eq!(zs.len(), 5);
        for (i, z) in zs.iter().enumerate() {
            assert!((z.z - (i as f64 - 2.0) * PI).norm() < 1e-10);
            assert!(z.bank_laine);
        }
        let zs = bank_laine_zeros(|z: Complex64| 2.0 * z.sin(), r, 1e-8).unwrap();
        assert_eq!(zs.len(), 5);
        assert!(zs.iter().all(|z| !z.bank_laine));
        let zs = bank_laine_zeros(|z: Complex64| (-z).exp(), r, 1e-8).unwrap();
        assert!(zs.is_empty());
    }
}
