//! Beltrami coefficients `μ = f_z̄/f_z` and dilatations `K = (1+|μ|)/(1−|μ|)`
//! of the glued maps, the finite-difference oracle, and the integral of
//! `(K − 1)/|z|²` over annuli and strips.

use crate::error::{Error, Result};
use crate::expsum::{MapValue, PHI_IDENTITY_ABOVE};
use crate::glue::{log_difference, GlueConfig, QPiece, RegionTag, Variant};
use crate::numeric::{pairwise_sum, wrap_angle};
use crate::quadrature::integrate_adaptive;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BeltramiSample {
    pub z: Complex64,
    pub mu: Complex64,
    #[serde(rename = "K")]
    pub k: f64,
    pub region: RegionTag,
    pub method: Method,
}

impl BeltramiSample {
    pub fn new(z: Complex64, mu: Complex64, region: RegionTag, method: Method) -> Self {
        BeltramiSample { z, mu, k: dilatation(mu), region, method }
    }
}

/// `K = (1+|μ|)/(1−|μ|)`.
pub fn dilatation(mu: Complex64) -> f64 {
    let a = mu.norm();
    (1.0 + a) / (1.0 - a)
}

/// `μ = (a + ib)/(1 + a − ib)` for the strip interpolations.
fn strip_mu(a: f64, b: f64) -> Complex64 {
    Complex64::new(a, b) / Complex64::new(1.0 + a, -b)
}

fn reflect(mu: Complex64, flip: bool) -> Complex64 {
    if flip {
        mu.conj()
    } else {
        mu
    }
}

/// Analytic `μ_U` at `w` (`Re w ≥ 0`).
pub fn mu_u_analytic(c: &GlueConfig, w: Complex64) -> Result<BeltramiSample> {
    let y = w.im.abs();
    let (k, t) = c.right_strip(y)?;
    let (dpsi, dprime) = c.psi_right(k, w.re.max(0.0));
    let a = 0.5 * t * (dprime - 1.0);
    let b = dpsi / (2.0 * TWO_PI);
    let mu = reflect(strip_mu(a, b), w.im < 0.0);
    Ok(BeltramiSample::new(w, mu, RegionTag::RightStrip { k, t }, Method::Analytic))
}

/// Analytic `μ_V` at `w` (`Re w ≤ 0`).
pub fn mu_v_analytic(c: &GlueConfig, w: Complex64) -> Result<BeltramiSample> {
    let y = w.im.abs();
    let (k, t) = c.left_strip(y)?;
    let (dpsi, dprime) = c.psi_left(k, w.re.min(0.0));
    let a = 0.5 * t * (dprime - 1.0);
    let b = dpsi / (2.0 * TWO_PI * c.n(k) as f64);
    let mu = reflect(strip_mu(a, b), w.im < 0.0);
    Ok(BeltramiSample::new(w, mu, RegionTag::LeftStrip { k, t }, Method::Analytic))
}

/// Analytic `μ_Q` (or `μ_{Q₁}`) at `w` (`Re w ≥ 0`).
pub fn mu_q_analytic(c: &GlueConfig, w: Complex64, variant: Variant) -> Result<BeltramiSample> {
    let (x, y) = (w.re, w.im.abs());
    let piece = c.q_piece(w);
    let (mu, region) = match piece {
        QPiece::Identity => (Complex64::new(0.0, 0.0), c.classify_region(w)),
        QPiece::Power => {
            let g = c.gamma();
            let e = if w.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { w / w.norm() };
            (e * e * ((g - 1.0) / (g + 1.0)), RegionTag::QDiskPower)
        }
        QPiece::Interp => {
            let g = c.boundary_profile(y, variant)?;
            let gp = c.boundary_profile_prime(y, variant)?;
            let a = 0.5 * (1.0 - x) * (gp - 1.0);
            let b = 0.5 * (g - y);
            let mu = Complex64::new(-a, -b) / Complex64::new(1.0 + a, -b);
            (reflect(mu, w.im < 0.0), RegionTag::QStripInterp)
        }
    };
    Ok(BeltramiSample::new(w, mu, region, Method::Analytic))
}

/// `μ = f_z̄/f_z` from central differences on the 4-point stencil
/// `z ± h`, `z ± ih`. With `unwrap`, `f` is a logarithm and the imaginary
/// parts of the differences are reduced mod 2π.
pub fn mu_finite_difference<F>(f: F, z: Complex64, h: f64, unwrap: bool) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let diff = |a: Complex64, b: Complex64| {
        let d = a - b;
        if unwrap {
            Complex64::new(d.re, wrap_angle(d.im))
        } else {
            d
        }
    };
    let fx = diff(f(z + h)?, f(z - h)?) / (2.0 * h);
    let fy = diff(f(z + I * h)?, f(z - I * h)?) / (2.0 * h);
    let fz = (fx - I * fy) * 0.5;
    let fzb = (fx + I * fy) * 0.5;
    if fz.norm() == 0.0 {
        return Err(Error::CriticalPoint);
    }
    Ok(fzb / fz)
}

/// Above this modulus of `log f`, differences are taken on `log log f`.
const LOGLOG_ABOVE: f64 = 1e7;

/// Finite-difference Beltrami sample of a map given in log-value form.
///
/// `log f` carries a branch that may jump by `2πi`. Where `|log f|` is
/// moderate the step is shrunk until wrapped differences of `log f` are
/// unambiguous, confirmed by halving the step. Where it is huge, `log log f`
/// is differenced instead; a branch jump then moves it by at most `2π/|log f|`.
pub fn k_finite_difference<F>(map: F, z: Complex64, h: Option<f64>, region: RegionTag) -> Result<BeltramiSample>
where
    F: Fn(Complex64) -> Result<MapValue>,
{
    let scale = z.norm().max(1.0);
    let log_of = |p: Complex64| -> Result<Complex64> { map(p)?.log_value().ok_or(Error::ZeroValue) };
    let centre = log_of(z)?;
    if centre.norm() > LOGLOG_ABOVE {
        let mut h = h.unwrap_or(1e-3 * scale);
        let lc = centre.ln();
        let loglog = |p: Complex64| -> Result<Complex64> { Ok(log_of(p)?.ln()) };
        for _ in 0..12 {
            let small = [z + h, z - h, z + I * h, z - I * h].iter().try_fold(true, |acc, &p| -> Result<bool> {
                let d = loglog(p)? - lc;
                Ok(acc && Complex64::new(d.re, wrap_angle(d.im)).norm() < 0.05)
            })?;
            if small {
                let mu = mu_finite_difference(loglog, z, h, true)?;
                return Ok(BeltramiSample::new(z, mu, region, Method::FiniteDifference));
            }
            h *= 0.25;
        }
        return Err(Error::SeamProximity);
    }
    let stencil = |h: f64| -> Result<[Complex64; 4]> {
        let mut d = [Complex64::new(0.0, 0.0); 4];
        for (v, p) in d.iter_mut().zip([z + h, z - h, z + I * h, z - I * h]) {
            *v = log_difference(log_of(p)?, centre);
        }
        Ok(d)
    };
    let mut h = h.unwrap_or(1e-5 * scale).min(0.3 / centre.norm().max(1e-300));
    while h > 1e-13 * scale {
        let full = stencil(h)?;
        if full.iter().all(|d| d.norm() < 0.5) {
            let half = stencil(0.5 * h)?;
            if full.iter().zip(&half).all(|(a, b)| (a - 2.0 * b).norm() <= 0.05 * a.norm() + 1e-12 * centre.norm().max(1.0)) {
                let fx = (full[0] - full[1]) / (2.0 * h);
                let fy = (full[2] - full[3]) / (2.0 * h);
                let fz = (fx - I * fy) * 0.5;
                if fz.norm() == 0.0 {
                    return Err(Error::CriticalPoint);
                }
                let mu = (fx + I * fy) * 0.5 / fz;
                return Ok(BeltramiSample::new(z, mu, region, Method::FiniteDifference));
            }
        }
        h *= 0.25;
    }
    Err(Error::SeamProximity)
}

/// `μ` of `U₁` at `q` (`Re q ≥ 0`).
fn mu_u1(c: &GlueConfig, q: Complex64) -> Result<Complex64> {
    let flip = q.im < 0.0;
    let qa = Complex64::new(q.re, q.im.abs());
    if qa.im < PI {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(reflect(mu_u_analytic(c, qa - I * PI)?.mu, flip))
}

fn mu_outer_right(c: &GlueConfig, q: Complex64, variant: Variant) -> Result<Complex64> {
    match variant {
        Variant::G0 => Ok(mu_u_analytic(c, q)?.mu),
        Variant::G1 => mu_u1(c, q),
    }
}

/// `(1 + t(ψ′ − 1), (ψ − x)/2π)` of the outer strip map at `q`, i.e. the
/// partials of its lifted argument in `Re q` and (minus `i`) in `Im q`.
/// The band `|Im q| < π` of `U₁` is conformal: `(1, 0)`.
fn outer_partials(c: &GlueConfig, q: Complex64, variant: Variant) -> Result<(f64, f64)> {
    let mut y = q.im.abs();
    if variant == Variant::G1 {
        if y < PI {
            return Ok((1.0, 0.0));
        }
        y -= PI;
    }
    let (k, t) = c.right_strip(y)?;
    let (dpsi, dprime) = c.psi_right(k, q.re.max(0.0));
    Ok((1.0 + t * (dprime - 1.0), dpsi / TWO_PI))
}

/// `μ` of `W = U∘Q` (or `U₁∘Q₁`) at `w` with `Re w ≥ 0`.
///
/// In the interpolation strip both layers distort; the chain rule on the
/// lifted argument gives `f_x = A + Y_x(B + i)`, `f_y = D(B + i)` with
/// `Y_x = y − g(y)`, `D = (1 − x)g′(y) + x`.
pub fn mu_w(c: &GlueConfig, w: Complex64, variant: Variant) -> Result<Complex64> {
    if w.im < 0.0 {
        return mu_w(c, w.conj(), variant).map(|m| m.conj());
    }
    match c.q_piece(w) {
        QPiece::Identity => mu_outer_right(c, w, variant),
        QPiece::Power => Ok(mu_q_analytic(c, w, variant)?.mu),
        QPiece::Interp => {
            let (x, y) = (w.re, w.im);
            let q = c.eval_q(w, variant)?;
            let (a, b) = outer_partials(c, q, variant)?;
            let g = c.boundary_profile(y, variant)?;
            let gp = c.boundary_profile_prime(y, variant)?;
            let d = (1.0 - x) * gp + x;
            let fx = a + (y - g) * Complex64::new(b, 1.0);
            let fy = d * Complex64::new(b, 1.0);
            Ok((fx + I * fy) / (fx - I * fy))
        }
    }
}

/// `μ` of the left-half-plane map (`V` or `V₁`) at `w`.
pub fn mu_left(c: &GlueConfig, w: Complex64, variant: Variant) -> Result<Complex64> {
    let flip = w.im < 0.0;
    let wa = Complex64::new(w.re, w.im.abs());
    let mu = match variant {
        Variant::G0 => mu_v_analytic(c, wa)?.mu,
        Variant::G1 if wa.im < PI => Complex64::new(0.0, 0.0),
        Variant::G1 => mu_v_analytic(c, wa - I * PI)?.mu,
    };
    Ok(reflect(mu, flip))
}

/// `μ_G` at `z`: the lifted coefficient rotated by `conj(p′)/p′` for the
/// sector power `p`.
pub fn mu_g(c: &GlueConfig, z: Complex64, variant: Variant) -> Result<BeltramiSample> {
    if z.im < 0.0 {
        let mut s = mu_g(c, z.conj(), variant)?;
        s.z = z;
        s.mu = s.mu.conj();
        return Ok(s);
    }
    let w = c.lift(z);
    let region = c.classify_point(z, variant);
    let (mu_lift, rot) = if c.in_right_sector(z) {
        let theta = z.im.atan2(z.re);
        (mu_w(c, w, variant)?, 2.0 * (1.0 - c.sigma()) * theta)
    } else {
        let theta = (-z).im.atan2(-z.re);
        (mu_left(c, w, variant)?, -2.0 * (c.rho() - 1.0) * theta)
    };
    let mu = mu_lift * Complex64::from_polar(1.0, rot);
    Ok(BeltramiSample::new(z, mu, region, Method::Analytic))
}

/// Finite-difference `μ_G` at `z` (`Im z ≥ 0`) from the chart `z ↦ a` with
/// `G(z) = g_m(a)`, the strip and the piece of `Q` being those of `z`.
///
/// Dropping the holomorphic outer layer leaves `μ` unchanged and keeps the
/// differences meaningful where `G` is 1 to within rounding.
pub fn chart_finite_difference(c: &GlueConfig, z: Complex64, variant: Variant, h: f64) -> Result<BeltramiSample> {
    if z.im < 0.0 {
        let mut s = chart_finite_difference(c, z.conj(), variant, h)?;
        s.z = z;
        s.mu = s.mu.conj();
        return Ok(s);
    }
    let shift = if variant == Variant::G1 { PI } else { 0.0 };
    let region = c.classify_point(z, variant);
    let mu = if c.in_right_sector(z) {
        let piece = c.q_piece(c.lift(z));
        let q = c.eval_q_piece(c.lift(z), piece, variant)?;
        let chart = |p: Complex64| -> Result<Complex64> { c.eval_q_piece(crate::numeric::principal_pow(p, c.sigma()), piece, variant) };
        if q.im < shift {
            mu_finite_difference(chart, z, h, false)?
        } else {
            let (k, _) = c.right_strip(q.im - shift)?;
            mu_finite_difference(|p| c.u_argument_in_strip(chart(p)? - I * shift, k), z, h, false)?
        }
    } else {
        let chart = |p: Complex64| -> Complex64 { -crate::numeric::principal_pow(-p, c.rho()) };
        let w = chart(z);
        if w.im < shift {
            mu_finite_difference(|p| Ok(chart(p)), z, h, false)?
        } else {
            let (k, _) = c.left_strip(w.im - shift)?;
            mu_finite_difference(|p| c.v_argument_in_strip(chart(p) - I * shift, k), z, h, false)?
        }
    };
    Ok(BeltramiSample::new(z, mu, region, Method::FiniteDifference))
}

fn dist_to_lattice(v: f64, step: f64) -> f64 {
    let r = v.rem_euclid(step);
    r.min(step - r)
}

/// Whether `z` lies within `tol` of a seam of the piecewise definition of `G`.
pub fn near_seam(c: &GlueConfig, z: Complex64, variant: Variant, tol: f64) -> bool {
    let za = Complex64::new(z.re, z.im.abs());
    let r = za.norm();
    if r == 0.0 {
        return true;
    }
    let arg = za.im.atan2(za.re);
    if (arg - PI / (2.0 * c.sigma())).abs() * r < tol {
        return true;
    }
    let w = c.lift(za);
    let y = w.im.abs();
    let g = c.gamma();
    if c.in_right_sector(za) {
        let tw = tol * c.sigma() * r.powf(c.sigma() - 1.0);
        if w.re < tw || (w.re - 1.0).abs() < tw || (w.norm() - 1.0).abs() < tw {
            return true;
        }
        if w.re < 1.0 && (y - 1.0).abs() < tw {
            return true;
        }
        let Ok(q) = c.eval_q(w, variant) else { return true };
        let tq = tw * 4.0 * g.max(1.0);
        let mut qy = q.im.abs();
        if variant == Variant::G1 {
            if (qy - PI).abs() < tq {
                return true;
            }
            qy -= PI;
        }
        if qy >= 0.0 && dist_to_lattice(qy, TWO_PI) < tq {
            return true;
        }
        if c.q_piece(w) == QPiece::Interp {
            let s = c.schedule();
            let yg = y.powf(g);
            let base = if variant == Variant::G1 {
                if (yg - PI).abs() < tw * g * y.powf(g - 1.0) {
                    return true;
                }
                PI
            } else {
                0.0
            };
            if yg > base {
                if let Ok(k) = s.range_strip_of(yg - base) {
                    for b in [s.p(k - 1), s.p(k)] {
                        let yb = (base + TWO_PI * b as f64).powf(1.0 / g);
                        if (y - yb).abs() < tw {
                            return true;
                        }
                    }
                }
            }
        }
        false
    } else {
        let tw = tol * c.rho() * r.powf(c.rho() - 1.0);
        if w.re.abs() < tw {
            return true;
        }
        let mut yy = y;
        if variant == Variant::G1 {
            if (yy - PI).abs() < tw {
                return true;
            }
            if yy < PI {
                return false;
            }
            yy -= PI;
        }
        match c.left_strip(yy) {
            Ok((k, _)) => {
                let lo = TWO_PI * c.partial_sum_n(k - 1) as f64;
                let hi = TWO_PI * c.partial_sum_n(k) as f64;
                yy - lo < tw || hi - yy < tw
            }
            Err(_) => true,
        }
    }
}

/// Result of integrating `(K − 1)/|z|²` over an annulus.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnulusIntegral {
    pub annulus_lo: f64,
    pub annulus_hi: f64,
    pub integral: f64,
    pub richardson_err: f64,
    #[serde(rename = "sup_K")]
    pub sup_k: f64,
    pub samples: usize,
}

fn annulus_midpoint(c: &GlueConfig, variant: Variant, r_lo: f64, r_hi: f64, n_r: usize, n_theta: usize) -> Result<(f64, f64, usize)> {
    let (u0, u1) = (r_lo.ln(), r_hi.ln());
    let du = (u1 - u0) / n_r as f64;
    // Upper half only; conjugate symmetry doubles it.
    let half = (n_theta / 2).max(1);
    let dt = PI / half as f64;
    let cells: Vec<(usize, usize)> = (0..n_r).flat_map(|i| (0..half).map(move |j| (i, j))).collect();
    let vals: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let r = (u0 + (i as f64 + 0.5) * du).exp();
            let th = (j as f64 + 0.5) * dt;
            let s = mu_g(c, Complex64::from_polar(r, th), variant)?;
            Ok(s.k)
        })
        .collect();
    let mut ks = Vec::with_capacity(vals.len());
    for v in vals {
        ks.push(v?);
    }
    let sup = ks.iter().cloned().fold(1.0, f64::max);
    let terms: Vec<f64> = ks.iter().map(|k| (k - 1.0) * du * dt * 2.0).collect();
    Ok((pairwise_sum(&terms), sup, ks.len()))
}

/// Midpoint rule in `(log r, θ)` for `∬ (K_G − 1)/|z|² dA` over
/// `r_lo < |z| < r_hi`, with a half-resolution Richardson estimate.
pub fn twb_annulus_integral(
    c: &GlueConfig,
    variant: Variant,
    r_lo: f64,
    r_hi: f64,
    n_r: usize,
    n_theta: usize,
) -> Result<AnnulusIntegral> {
    if !(r_lo >= 1.0 && r_hi > r_lo) {
        return Err(Error::InvalidArgument(format!("annulus needs 1 <= r_lo < r_hi, got [{r_lo}, {r_hi}]")));
    }
    let limit = c.max_radius(variant);
    if r_hi > limit {
        return Err(Error::RangeExhausted { what: "annulus", needed: r_hi, limit });
    }
    let (fine, sup, count) = annulus_midpoint(c, variant, r_lo, r_hi, n_r, n_theta)?;
    let (coarse, sup2, count2) = annulus_midpoint(c, variant, r_lo, r_hi, (n_r / 2).max(1), (n_theta / 2).max(2))?;
    Ok(AnnulusIntegral {
        annulus_lo: r_lo,
        annulus_hi: r_hi,
        integral: fine,
        richardson_err: (fine - coarse).abs() / 3.0,
        sup_k: sup.max(sup2),
        samples: count + count2,
    })
}

/// `∫_{S_k} (K_U − 1)/|w|² dA` over the half-strip
/// `S_k = {2π(k−1) < Im w < 2πk, Re w > max(1, 8 log n_k)}`.
pub fn strip_contribution(c: &GlueConfig, k: usize) -> Result<f64> {
    if k == 0 || k + 1 >= c.k_max() {
        return Err(Error::RangeExhausted { what: "strip", needed: k as f64, limit: (c.k_max() - 2) as f64 });
    }
    if c.phi(k).is_identity() {
        return Ok(0.0);
    }
    let x0 = (8.0 * (c.n(k) as f64).ln()).max(1.0);
    let x_id = PHI_IDENTITY_ABOVE - c.level(k + 1).s_m();
    let (y0, y1) = (TWO_PI * (k as f64 - 1.0), TWO_PI * k as f64);
    let gl = gauss_nodes_unit();
    let inner = |x: f64, tail: bool| -> f64 {
        let (dpsi, dprime) = c.psi_right(k, x);
        let b = dpsi / (2.0 * TWO_PI);
        gl.iter()
            .map(|&(s, wt)| {
                let y = y0 + (y1 - y0) * s;
                let t = s;
                let a = 0.5 * t * (dprime - 1.0);
                let km1 = dilatation(strip_mu(a, b)) - 1.0;
                let weight = if tail { (PI / 2.0 - (x / y).atan()) / y } else { 1.0 / (x * x + y * y) };
                wt * (y1 - y0) * km1 * weight
            })
            .sum()
    };
    let mut breaks = vec![x0];
    let mut b = x0;
    while b * 2.0 < x_id {
        b *= 2.0;
        breaks.push(b);
    }
    breaks.push(x_id);
    let body = integrate_adaptive(|x| inner(x, false), &breaks, 1e-7, 0.0).value;
    Ok(body + inner(x_id, true))
}

/// Gauss–Legendre nodes and weights on [0, 1].
fn gauss_nodes_unit() -> Vec<(f64, f64)> {
    let n = 24;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
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
        out.push((0.5 * (1.0 + x), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn cfg() -> &'static GlueConfig {
        static C: OnceLock<GlueConfig> = OnceLock::new();
        C.get_or_init(|| GlueConfig::with_k_max(0.75, 400).unwrap())
    }

    #[test]
    fn fd_of_holomorphic_and_affine_maps() {
        let z = Complex64::new(0.3, -0.8);
        let mu = mu_finite_difference(|p| Ok(p.exp()), z, 1e-5, false).unwrap();
        assert!(mu.norm() < 1e-8);
        let mu = mu_finite_difference(|p| Ok(p + 0.3 * p.conj()), z, 1e-3, false).unwrap();
        assert!((mu - 0.3).norm() < 1e-10);
    }

    #[test]
    fn dilatation_relation() {
        let mu = Complex64::new(0.3, 0.4);
        assert!((dilatation(mu) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_transition_is_conformal() {
        let c = cfg();
        // n_1 = n_2, so the first strip carries no distortion.
        let s = mu_u_analytic(c, Complex64::new(3.0, 2.0)).unwrap();
        assert_eq!(s.k, 1.0);
        let s = mu_v_analytic(c, Complex64::new(-3.0, 2.0)).unwrap();
        assert_eq!(s.k, 1.0);
    }

    #[test]
    fn lower_edge_has_pure_imaginary_numerator() {
        let c = cfg();
        let k = 10;
        let w = Complex64::new(4.0, TWO_PI * (k - 1) as f64);
        let s = mu_u_analytic(c, w).unwrap();
        let (dpsi, _) = c.psi_right(k, 4.0);
        let b = dpsi / (2.0 * TWO_PI);
        assert!((s.mu.norm() - b.abs() / (1.0 + b * b).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn power_region_dilatation_is_gamma() {
        let c = cfg();
        for &w in &[Complex64::new(0.3, 0.2), Complex64::new(0.1, -0.9)] {
            let s = mu_q_analytic(c, w, Variant::G0).unwrap();
            assert!((s.k - c.gamma()).abs() < 1e-12);
        }
        let s = mu_q_analytic(c, Complex64::new(1.5, 4.0), Variant::G0).unwrap();
        assert_eq!(s.k, 1.0);
    }

    #[test]
    fn analytic_u_matches_finite_differences() {
        let c = cfg();
        for i in 0..40 {
            let w = Complex64::new(0.5 + 0.37 * i as f64, 0.9 + 3.3 * i as f64);
            let a = mu_u_analytic(c, w).unwrap();
            let f = k_finite_difference(|p| c.eval_u(p), w, None, a.region).unwrap();
            assert!((a.mu - f.mu).norm() < 1e-3, "w={w}: {} vs {}", a.mu, f.mu);
        }
    }

    #[test]
    fn analytic_v_matches_finite_differences() {
        let c = cfg();
        let mut on_values = 0;
        for i in 1..40 {
            let w = Complex64::new(-0.3 - 2.1 * i as f64, 7.7 * (i * i) as f64 + 0.5);
            let a = mu_v_analytic(c, w).unwrap();
            let RegionTag::LeftStrip { k, .. } = a.region else { panic!() };
            let f = mu_finite_difference(|p| c.v_argument_in_strip(p, k), w, 1e-4, false).unwrap();
            assert!((a.mu - f).norm() < 1e-6, "w={w}: {} vs {f}", a.mu);
        }
        // Far into a wide strip V is 1 to within rounding; near the lower
        // edge it is not, and log V can be differenced directly.
        for k in 2..40 {
            let y = TWO_PI * (c.partial_sum_n(k - 1) as f64 + 0.02);
            let w = Complex64::new(-0.4 - 0.7 * k as f64, y);
            let a = mu_v_analytic(c, w).unwrap();
            let l = c.eval_v(w).unwrap().log_value().unwrap();
            if Complex64::new(l.re, wrap_angle(l.im)).norm() > 1e-4 {
                let f = k_finite_difference(|p| c.eval_v(p), w, None, a.region).unwrap();
                assert!((a.mu - f.mu).norm() < 1e-3, "w={w}: {} vs {}", a.mu, f.mu);
                on_values += 1;
            }
        }
        assert!(on_values > 5);
    }

    #[test]
    fn analytic_q_matches_finite_differences() {
        let c = cfg();
        for i in 0..30 {
            let w = Complex64::new(0.05 + 0.03 * i as f64, 1.3 + 2.9 * i as f64);
            let a = mu_q_analytic(c, w, Variant::G0).unwrap();
            let f = mu_finite_difference(|p| c.eval_q_piece(p, QPiece::Interp, Variant::G0), w, 1e-7, false).unwrap();
            assert!((a.mu - f).norm() < 1e-5, "w={w}");
        }
    }

    #[test]
    fn composite_interp_matches_lifted_differences() {
        let c = cfg();
        for v in [Variant::G0, Variant::G1] {
            for i in 0..60 {
                let w = Complex64::new(0.02 + 0.016 * i as f64, 1.1 + 0.9 * i as f64);
                let q0 = c.eval_q(w, v).unwrap();
                let shift = if v == Variant::G1 { PI } else { 0.0 };
                if q0.im - shift < 0.0 || near_seam(c, crate::numeric::principal_pow(w, 1.0 / c.sigma()), v, 1e-4) {
                    continue;
                }
                let (k, _) = c.right_strip(q0.im - shift).unwrap();
                let lifted = |p: Complex64| {
                    let q = c.eval_q_piece(p, QPiece::Interp, v)?;
                    c.u_argument_in_strip(q - I * shift, k)
                };
                let f = mu_finite_difference(lifted, w, 1e-6, false).unwrap();
                let a = mu_w(c, w, v).unwrap();
                assert!((a - f).norm() < 1e-4, "w={w} {v}: {a} vs {f}");
            }
        }
    }

    #[test]
    fn u_dilatation_bound() {
        let c = cfg();
        for k in 3..60 {
            for &x in &[0.5, 3.0, 10.0, 40.0] {
                let w = Complex64::new(x, TWO_PI * (k as f64 - 0.3));
                let s = mu_u_analytic(c, w).unwrap();
                let (dpsi, dprime) = c.psi_right(k, x);
                let r = (dprime - 1.0).abs() + dpsi.abs();
                assert!(s.k - 1.0 <= 4.0 * (1.0 + r) * r / dprime.min(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn composite_keeps_layer_modulus() {
        let c = cfg();
        for i in 1..30 {
            let z = Complex64::from_polar(3.0 + 4.0 * i as f64, 0.1 + 0.03 * i as f64);
            let w = c.lift(z);
            if w.re >= 1.0 {
                let g = mu_g(c, z, Variant::G0).unwrap();
                let u = mu_u_analytic(c, w).unwrap();
                assert!((g.mu.norm() - u.mu.norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn composite_matches_finite_differences_on_g() {
        let c = cfg();
        let mut checked = 0;
        for i in 0..80 {
            let z = Complex64::from_polar(2.0 + 1.7 * i as f64, -2.0 + 0.05 * i as f64);
            for v in [Variant::G0, Variant::G1] {
                if near_seam(c, z, v, 1e-3 * z.norm()) {
                    continue;
                }
                let a = mu_g(c, z, v).unwrap();
                let f = k_finite_difference(|p| c.eval_g(p, v), z, None, a.region).unwrap();
                assert!((a.mu - f.mu).norm() < 1e-3, "z={z} {v}: {} vs {}", a.mu, f.mu);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn composite_matches_chart_differences() {
        let c = cfg();
        let mut checked = 0;
        for i in 0..120 {
            let z = Complex64::from_polar(1.5 + 7.3 * i as f64, -3.1 + 0.052 * i as f64);
            for v in [Variant::G0, Variant::G1] {
                if near_seam(c, z, v, 1e-3 * z.norm()) {
                    continue;
                }
                let a = mu_g(c, z, v).unwrap();
                let f = chart_finite_difference(c, z, v, 1e-6 * z.norm()).unwrap();
                assert!((a.mu - f.mu).norm() < 1e-4, "z={z} {v}: {} vs {}", a.mu, f.mu);
                checked += 1;
            }
        }
        assert!(checked > 150);
    }

    #[test]
    fn conformal_annulus_integrates_to_zero() {
        // The first strips are conformal for both the lifted right and left maps.
        let c = cfg();
        let a = twb_annulus_integral(c, Variant::G0, 1.0, 1.2, 8, 32).unwrap();
        assert!(a.sup_k >= 1.0);
        let s = strip_contribution(c, 1).unwrap();
        assert!(s.abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mu_is_strictly_inside_unit_disk(r in 1.0f64..900.0, th in -3.14f64..3.14) {
            let c = cfg();
            for v in [Variant::G0, Variant::G1] {
                let s = mu_g(c, Complex64::from_polar(r, th), v).unwrap();
                prop_assert!(s.mu.norm() < 1.0);
                prop_assert!((s.k - (1.0 + s.mu.norm()) / (1.0 - s.mu.norm())).abs() <= 1e-12 * s.k);
            }
        }

        #[test]
        fn mu_conjugate_symmetric(r in 1.0f64..500.0, th in 0.01f64..3.1) {
            let c = cfg();
            let z = Complex64::from_polar(r, th);
            let a = mu_g(c, z, Variant::G0).unwrap().mu;
            let b = mu_g(c, z.conj(), Variant::G0).unwrap().mu;
            prop_assert_eq!(a, b.conj());
        }
    }
}
