//! Partial sums `P_m(z) = Σ_{j≤2m} (−z)^j/j!`, the maps `h_m(z) = P_m(z)e^z`
//! and `g_m(z) = h_m(e^z)`, their normalisation points `s_m`, and the
//! transition maps `φ` between two levels.
//!
//! All real evaluators work with `L_m(x) = log(g_m(x) − 1)`, written as
//!
//! ```text
//! L_m(x) = e^x + n·x − log Γ(n) + log I(e^x, n − 1),   n = 2m + 1,
//! I(y, k) = ∫₀¹ e^{y(s−1)} s^k ds,
//! ```
//!
//! which follows from `h_m(y) − 1 = (1/(2m)!)∫₀^y e^u u^{2m} du` and has no
//! cancellation. Its derivative is simply `L_m′(x) = 1/I(e^x, n − 1)`.

use crate::error::{Error, Result};
use crate::numeric::{
    bracket_increasing, ln_1p_exp, ln_gamma, newton_bracketed, wrap_angle, ComplexKahanSum,
};
use crate::quadrature::{ln_kernel_complex, ln_kernel_real};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Beyond this, `φ(x) − x` is far below the resolution of `x` and `e^x` is
/// close to overflow, so the transition maps are taken to be the identity.
pub const PHI_IDENTITY_ABOVE: f64 = 700.0;

/// Largest level summed term by term.
const DIRECT_MAX_M: u64 = 4096;

/// Relative error accepted from the series evaluators before falling back to
/// the integral representation.
const SERIES_REL_TOL: f64 = 1e-8;

/// The root of `e^r + r + 1 = 0`.
pub fn r0() -> f64 {
    static R0: OnceLock<f64> = OnceLock::new();
    *R0.get_or_init(|| {
        newton_bracketed(|r| (r.exp() + r + 1.0, r.exp() + 1.0), -2.0, -1.0, -1.28, 1e-16)
    })
}

/// A complex map value stored through its logarithm, so that values like
/// `exp(exp(500))` remain representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MapValue {
    Zero,
    Log(Complex64),
}

impl MapValue {
    pub fn from_log(l: Complex64) -> Self {
        MapValue::Log(l)
    }

    pub fn zero_flag(&self) -> bool {
        matches!(self, MapValue::Zero)
    }

    pub fn log_value(&self) -> Option<Complex64> {
        match self {
            MapValue::Zero => None,
            MapValue::Log(l) => Some(*l),
        }
    }

    /// `log|w|`, which is `−∞` for the zero value.
    pub fn log_modulus(&self) -> f64 {
        match self {
            MapValue::Zero => f64::NEG_INFINITY,
            MapValue::Log(l) => l.re,
        }
    }

    /// The plain value `exp(log_value)`; may overflow.
    pub fn value(&self) -> Complex64 {
        match self {
            MapValue::Zero => Complex64::new(0.0, 0.0),
            MapValue::Log(l) => l.exp(),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            MapValue::Zero => MapValue::Zero,
            MapValue::Log(l) => MapValue::Log(l.conj()),
        }
    }

    pub fn recip(&self) -> Result<Self> {
        match self {
            MapValue::Zero => Err(Error::ZeroValue),
            MapValue::Log(l) => Ok(MapValue::Log(-l)),
        }
    }
}

/// One level `m` of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpPartialSum {
    m: u64,
    n: u64,
    log_n_factorial: f64,
    s_m: f64,
}

impl ExpPartialSum {
    pub fn new(m: u64) -> Self {
        let n = 2 * m + 1;
        let mut e = ExpPartialSum { m, n, log_n_factorial: ln_gamma(n as f64 + 1.0), s_m: f64::NAN };
        e.s_m = e.solve_s();
        e
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn log_n_factorial(&self) -> f64 {
        self.log_n_factorial
    }

    /// The root of `g_m(s) = 2`.
    pub fn s_m(&self) -> f64 {
        self.s_m
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `log Γ(n) = log (2m)!`.
    fn ln_gamma_n(&self) -> f64 {
        self.log_n_factorial - self.nf().ln()
    }

    /// `log I(e^x, n − 1)`, using `log y = x` directly.
    fn ln_kernel(&self, x: f64) -> f64 {
        let y = x.exp();
        if y == 0.0 {
            return -(self.nf()).ln();
        }
        ln_kernel_real(y, self.nf() - 1.0)
    }

    /// `log(g_m(x) − 1)` for real `x`.
    pub fn log_gm_minus_1(&self, x: f64) -> f64 {
        x.exp() + self.nf() * x - self.ln_gamma_n() + self.ln_kernel(x)
    }

    /// `L_m(x)` together with `L_m′(x) = 1/I`.
    pub fn log_gm_minus_1_with_derivative(&self, x: f64) -> (f64, f64) {
        let lk = self.ln_kernel(x);
        (x.exp() + self.nf() * x - self.ln_gamma_n() + lk, (-lk).exp())
    }

    /// `log g_m′(x) = e^x + n·x − log (2m)!`.
    pub fn log_g_prime(&self, x: f64) -> f64 {
        x.exp() + self.nf() * x - self.ln_gamma_n()
    }

    /// Real value `g_m(x)` (overflows for large x).
    pub fn g(&self, x: f64) -> f64 {
        1.0 + self.log_gm_minus_1(x).exp()
    }

    fn solve_s(&self) -> f64 {
        let guess = if self.m == 0 { 2f64.ln().ln() } else { self.nf().ln() + r0() };
        let (lo, hi) = bracket_increasing(|s| self.log_gm_minus_1(s), guess, 0.5);
        newton_bracketed(|s| self.log_gm_minus_1_with_derivative(s), lo, hi, guess, 1e-15)
    }

    /// `log g_m(z)` for complex `z`, with the estimated relative error of the
    /// underlying value `g_m(z)`.
    pub fn complex_log_gm_with_error(&self, z: Complex64) -> Result<(MapValue, f64)> {
        let zeta = z.exp();
        if self.m == 0 {
            return Ok((MapValue::Log(zeta), f64::EPSILON));
        }
        let a = z.re.exp();
        if a >= 2.5 * self.m as f64 {
            if let Some((l, err)) = self.reversed_series(z) {
                return Ok((MapValue::Log(l + zeta), err));
            }
        }
        if self.m <= DIRECT_MAX_M {
            if let Some((l, err)) = self.direct_series(z) {
                return Ok((MapValue::Log(l + zeta), err));
            }
        }
        self.integral_form(z, zeta)
    }

    /// `log g_m(z)`; reports an indeterminate value when the error radius
    /// of `g_m(z)` contains 0.
    pub fn complex_log_gm(&self, z: Complex64) -> Result<MapValue> {
        self.complex_log_gm_with_error(z).map(|(v, _)| v)
    }

    /// `log P_m(ζ)` from `P_m(ζ) = ζ^{2m}/(2m)! · Σ_i t_i`,
    /// `t_i = t_{i−1}·(−(2m−i+1)/ζ)`.
    fn reversed_series(&self, z: Complex64) -> Option<(Complex64, f64)> {
        let k = 2 * self.m;
        let inv = (-z).exp();
        let mut t = Complex64::new(1.0, 0.0);
        let mut sum = ComplexKahanSum::new();
        sum.add(t);
        let mut abs = 1.0;
        let mut terms = 1.0;
        for i in 1..=k {
            t *= -inv * (k - i + 1) as f64;
            sum.add(t);
            let tn = t.norm();
            abs += tn;
            terms += 1.0;
            if tn <= 1e-18 * abs {
                break;
            }
        }
        let s = sum.value();
        let err = f64::EPSILON * (4.0 + 2.0 * terms + z.norm()) * abs / s.norm();
        if !(err <= SERIES_REL_TOL) {
            return None;
        }
        Some((s.ln() + z * k as f64 - ln_gamma(k as f64 + 1.0), err))
    }

    /// `log P_m(ζ)` by summing all `2m+1` terms scaled by the largest one.
    fn direct_series(&self, z: Complex64) -> Option<(Complex64, f64)> {
        let k = 2 * self.m;
        let theta = wrap_angle(z.im + PI);
        let log_mag = |j: u64| j as f64 * z.re - ln_gamma(j as f64 + 1.0);
        let a = z.re.exp();
        let j_peak = (a.floor() as u64).min(k);
        let mut l_star = log_mag(j_peak);
        if j_peak < k {
            l_star = l_star.max(log_mag(j_peak + 1));
        }
        let mut sum = ComplexKahanSum::new();
        let mut err = 0.0;
        for j in 0..=k {
            let jf = j as f64;
            let mag = (log_mag(j) - l_star).exp();
            if mag == 0.0 && jf > a {
                break;
            }
            sum.add(Complex64::from_polar(mag, wrap_angle(jf * theta)));
            err += mag * (4.0 + jf * (z.re.abs() + (jf + 1.0).ln() + PI));
        }
        let s = sum.value();
        let rel = f64::EPSILON * err / s.norm();
        if !(rel <= SERIES_REL_TOL) {
            return None;
        }
        Some((s.ln() + l_star, rel))
    }

    /// `log h_m(ζ) = log(1 + J)`, `log J = n·z + ζ − log (2m)! + log ∫₀¹ e^{ζ(s−1)} s^{2m} ds`.
    fn integral_form(&self, z: Complex64, zeta: Complex64) -> Result<(MapValue, f64)> {
        let kernel = ln_kernel_complex(zeta, (2 * self.m) as f64);
        let log_j = z * self.nf() + zeta - self.ln_gamma_n() + kernel.ln_value;
        let log_h = ln_1p_exp(log_j);
        // Relative error of h = 1 + J given the relative error of J.
        let amplification = (log_j.re - log_h.re).exp();
        let rel = kernel.rel_error * amplification;
        if !(rel < 1.0) {
            return Err(Error::Indeterminate { re: z.re, im: z.im });
        }
        Ok((MapValue::Log(log_h), rel))
    }
}

/// Remainder `R(y, n) = log((n + y)·I(y, n − 1))`, i.e. the defect of
/// `log(h_m(y) − 1)` against `−log n! + y + n log y − log(1 + y/n)`.
pub fn remainder_r(n: u64, y: f64) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::InvalidArgument(format!("n must be odd, got {n}")));
    }
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!("y must be non-negative, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok((nf + y).ln() + ln_kernel_real(y, nf - 1.0))
}

/// `s_m`, the root of `g_m(s) = 2`.
pub fn solve_s_m(m: u64) -> f64 {
    ExpPartialSum::new(m).s_m()
}

/// The transition homeomorphism `φ` defined by `g_M(x) = g_m(φ(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiMap {
    lower: ExpPartialSum,
    upper: ExpPartialSum,
    q: f64,
    p: f64,
}

impl PhiMap {
    /// `lower` is the target level `m`, `upper` the source level `M`.
    /// Levels may coincide (φ is then the identity) or be in either order.
    pub fn new(lower: ExpPartialSum, upper: ExpPartialSum) -> Self {
        let mut f = PhiMap { lower, upper, q: f64::NAN, p: f64::NAN };
        if lower.n != upper.n {
            let (nn, n) = (upper.nf(), lower.nf());
            f.q = (upper.ln_gamma_n() - lower.ln_gamma_n()) / (nn - n);
            f.p = f.solve_fixed_point();
        }
        f
    }

    pub fn lower(&self) -> &ExpPartialSum {
        &self.lower
    }

    pub fn upper(&self) -> &ExpPartialSum {
        &self.upper
    }

    pub fn is_identity(&self) -> bool {
        self.lower.n == self.upper.n
    }

    /// Point where `g_M′ = g_m′`, i.e. `(1/(2(M−m)))·log((2M)!/(2m)!)`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Unique fixed point `p > q`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `d(x) = L_M(x) − L_m(x) = (N − n)(x − q) + log I_M − log I_m`.
    pub fn level_difference(&self, x: f64) -> f64 {
        let dn = self.upper.nf() - self.lower.nf();
        dn * (x - self.q) + self.upper.ln_kernel(x) - self.lower.ln_kernel(x)
    }

    fn solve_fixed_point(&self) -> f64 {
        let dn = self.upper.nf() - self.lower.nf();
        let sign = dn.signum();
        let f = |x: f64| {
            let a = self.upper.ln_kernel(x);
            let b = self.lower.ln_kernel(x);
            let v = sign * (dn * (x - self.q) + a - b);
            let d = sign * ((-a).exp() - (-b).exp());
            (v, d)
        };
        let mut width = 1.0;
        while f(self.q + width).0 <= 0.0 {
            width *= 2.0;
        }
        let (nn, n) = (self.upper.nf(), self.lower.nf());
        let guess = n.min(nn).ln() + nn.max(n) * (nn / n).ln().abs() / (nn - n).abs() - 1.0;
        newton_bracketed(f, self.q, self.q + width, guess, 1e-15)
    }

    /// `φ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        solve_transition(&self.upper, &self.lower, self.q, self.p, x).0
    }

    /// `φ′(x) = g_M′(x)/g_m′(φ(x))`.
    pub fn prime(&self, x: f64) -> f64 {
        self.eval_with_prime(x).1
    }

    pub fn eval_with_prime(&self, x: f64) -> (f64, f64) {
        solve_transition(&self.upper, &self.lower, self.q, self.p, x)
    }

    /// `φ(x) − x`, resolved below the spacing of floating-point numbers near `x`.
    pub fn offset(&self, x: f64) -> f64 {
        transition_offset(&self.upper, &self.lower, self.q, self.p, x).0
    }

    /// `(φ(x) − x, φ′(x))`.
    pub fn offset_with_prime(&self, x: f64) -> (f64, f64) {
        transition_offset(&self.upper, &self.lower, self.q, self.p, x)
    }

    /// `φ⁻¹(y)`, solving `g_M(x) = g_m(y)`.
    pub fn inverse(&self, y: f64) -> f64 {
        solve_transition(&self.lower, &self.upper, self.q, self.p, y).0
    }
}

/// Solve `g_src(x) = g_tgt(x + δ)`, returning `(x + δ, d(x+δ)/dx)`.
fn solve_transition(src: &ExpPartialSum, tgt: &ExpPartialSum, q: f64, p: f64, x: f64) -> (f64, f64) {
    let (d, prime) = transition_offset(src, tgt, q, p, x);
    (x + d, prime)
}

/// The offset δ with `g_src(x) = g_tgt(x + δ)`, and `d(x+δ)/dx`.
fn transition_offset(src: &ExpPartialSum, tgt: &ExpPartialSum, q: f64, p: f64, x: f64) -> (f64, f64) {
    if src.n == tgt.n || x > PHI_IDENTITY_ABOVE {
        return (0.0, 1.0);
    }
    let (nn, n) = (src.nf(), tgt.nf());
    let ex = x.exp();
    let lk_src = src.ln_kernel(x);
    let base = (nn - n) * (q - x) - lk_src;
    let f = |d: f64| {
        if x + d > PHI_IDENTITY_ABOVE + 8.0 {
            return (f64::MAX.sqrt(), 1.0);
        }
        let lk = tgt.ln_kernel(x + d);
        (ex * d.exp_m1() + base + n * d + lk, (-lk).exp())
    };
    let d0 = if x >= p {
        0.0
    } else {
        (nn / n) * x - (src.log_n_factorial - tgt.log_n_factorial) / n - x
    };
    let (lo, hi) = bracket_increasing(|d| f(d).0, d0, 1e-3 + 1e-3 * d0.abs());
    let d = newton_bracketed(f, lo, hi, d0, 1e-16);
    // Equal to −eˣ·expm1(δ) + (N−n)(x−q) − nδ by the defining equation, without the cancellation.
    let log_prime = tgt.ln_kernel(x + d) - lk_src;
    (d, log_prime.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_space;
    use proptest::prelude::*;

    /// log I(y,k) from e^{−y} Σ_i y^i/(i!(k+i+1)), summed in the log domain.
    fn ln_kernel_series(y: f64, k: f64) -> f64 {
        let mut logs = Vec::new();
        let mut i = 0.0;
        loop {
            let l = if i == 0.0 { 0.0 } else { i * y.ln() } - ln_gamma(i + 1.0) - (k + i + 1.0).ln();
            logs.push(l);
            if i > y && l < logs.iter().cloned().fold(f64::MIN, f64::max) - 50.0 {
                break;
            }
            i += 1.0;
        }
        let top = logs.iter().cloned().fold(f64::MIN, f64::max);
        let s: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        -y + top + s.ln()
    }

    #[test]
    fn r0_value() {
        assert!((r0() + 1.278_464_54).abs() < 1e-8);
    }

    #[test]
    fn level_zero_closed_forms() {
        let e = ExpPartialSum::new(0);
        assert!((e.s_m() - 2f64.ln().ln()).abs() < 1e-15);
        assert!(e.log_gm_minus_1(2f64.ln().ln()).abs() < 1e-15);
        assert!((e.log_gm_minus_1(0.0) - (1f64.exp() - 1.0).ln()).abs() < 1e-15);
        assert!((e.log_gm_minus_1(0.0) - 0.54132).abs() < 1e-5);
    }

    #[test]
    fn remainder_matches_series_oracle() {
        for &n in &[25u64, 51, 101] {
            for y in log_space(1e-2, 1e3, 15) {
                let r = remainder_r(n, y).unwrap();
                let oracle = (n as f64 + y).ln() + ln_kernel_series(y, n as f64 - 1.0);
                assert!((r - oracle).abs() < 1e-11, "n={n} y={y}: {r} vs {oracle}");
                assert!(r.abs() <= 24.0 * y / (n as f64 * (n as f64 + y)));
            }
        }
        assert_eq!(remainder_r(25, 0.0).unwrap(), 0.0);
        assert!(remainder_r(24, 1.0).is_err());
        assert!(remainder_r(25, -1.0).is_err());
    }

    #[test]
    fn remainder_spot_values_respect_bound() {
        let r = remainder_r(25, 10.0).unwrap();
        assert!(r.abs() <= 24.0 * 10.0 / (25.0 * 35.0));
        let r = remainder_r(101, 1000.0).unwrap();
        assert!(r.abs() <= 0.21584);
    }

    #[test]
    fn s_m_solves_normalisation() {
        for m in [1u64, 5, 12, 100, 500, 5000, 1_000_000] {
            let e = ExpPartialSum::new(m);
            // The residual cannot beat L′(s)·ulp(s) ≈ n·|s|·ε.
            let floor = 4.0 * f64::EPSILON * e.n() as f64 * e.s_m().abs();
            assert!(e.log_gm_minus_1(e.s_m()).abs() < 1e-12 + floor, "m={m}");
            let n = e.n() as f64;
            let dev = n * (e.s_m() - n.ln() - r0() + n.ln() / (2.0 * r0() * n)).abs();
            if m >= 10 {
                assert!(dev < 5.0, "m={m} dev={dev}");
            }
        }
    }

    #[test]
    fn log_gm_matches_tail_series() {
        // h_m(y) − 1 = −e^y Σ_{j>2m} (−y)^j/j!
        for m in 1..8u64 {
            let e = ExpPartialSum::new(m);
            for &x in &[-3.0, -0.5, 0.0, 0.7, 1.5] {
                let y: f64 = f64::exp(x);
                let n = 2 * m + 1;
                let mut term = 1.0;
                for j in 1..=n {
                    term *= -y / j as f64;
                }
                let mut tail = 0.0;
                for j in n..n + 80 {
                    tail += term;
                    term *= -y / (j + 1) as f64;
                }
                let want = y + (-tail).ln();
                let got = e.log_gm_minus_1(x);
                assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "m={m} x={x}");
            }
        }
    }

    #[test]
    fn derivative_identity() {
        // d/dx log(g − 1) = g′/(g − 1) with log g′ = e^x + n·x − log (2m)!.
        let e = ExpPartialSum::new(7);
        for &x in &[-1.0, 0.5, 2.0, 3.5] {
            let h = 1e-5;
            let fd = (e.log_gm_minus_1(x + h) - e.log_gm_minus_1(x - h)) / (2.0 * h);
            let exact = (e.log_g_prime(x) - e.log_gm_minus_1(x)).exp();
            assert!((fd - exact).abs() < 1e-6 * exact, "x={x}");
            assert!((e.log_gm_minus_1_with_derivative(x).1 - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn complex_agrees_with_real_axis() {
        for m in [1u64, 3, 20, 200, 3000, 10_000] {
            let e = ExpPartialSum::new(m);
            for &dx in &[-20.0, -2.0, 0.0, 0.5, 2.0, 5.0] {
                let x = e.s_m() + dx;
                let l = e.complex_log_gm(Complex64::new(x, 0.0)).unwrap().log_value().unwrap();
                let want = ln_1p_exp(Complex64::new(e.log_gm_minus_1(x), 0.0)).re;
                assert!((l.re - want).abs() < 1e-9 * want.abs().max(1.0), "m={m} x={x}: {l} vs {want}");
            }
        }
    }

    #[test]
    fn complex_level_zero_is_exponential() {
        let e = ExpPartialSum::new(0);
        let z = Complex64::new(1.3, 2.1);
        assert_eq!(e.complex_log_gm(z).unwrap(), MapValue::Log(z.exp()));
    }

    #[test]
    fn complex_matches_direct_polynomial() {
        for m in 1..5u64 {
            let e = ExpPartialSum::new(m);
            for &(re, im) in &[(0.3, 1.0), (-1.0, 2.5), (1.2, -0.4), (0.9, 3.0)] {
                let z = Complex64::new(re, im);
                let zeta = z.exp();
                let mut p = Complex64::new(0.0, 0.0);
                let mut term = Complex64::new(1.0, 0.0);
                for j in 0..=2 * m {
                    if j > 0 {
                        term *= -zeta / j as f64;
                    }
                    p += term;
                }
                let want = p * zeta.exp();
                let got = e.complex_log_gm(z).unwrap().value();
                assert!((got - want).norm() < 1e-10 * want.norm(), "m={m} z={z}");
            }
        }
    }

    #[test]
    fn regimes_agree_where_they_overlap() {
        let e = ExpPartialSum::new(300);
        for &(re, im) in &[(7.0, 0.3), (6.6, 1.0), (6.5, 2.2), (7.5, -1.0)] {
            let z = Complex64::new(re, im);
            let zeta = z.exp();
            let (a, _) = e.integral_form(z, zeta).unwrap();
            let (b, _) = e.complex_log_gm_with_error(z).unwrap();
            let (la, lb) = (a.log_value().unwrap(), b.log_value().unwrap());
            let d = la - lb;
            let d = Complex64::new(d.re, wrap_angle(d.im));
            assert!(d.norm() < 1e-8 * la.norm().max(1.0), "z={z}: {la} vs {lb}");
        }
    }

    #[test]
    fn phi_basics_levels_zero_one() {
        let f = PhiMap::new(ExpPartialSum::new(0), ExpPartialSum::new(1));
        assert!((f.q() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(f.p() > f.q());
        assert!(f.level_difference(f.p()).abs() < 1e-12);
        assert!((f.eval(f.p()) - f.p()).abs() < 1e-12);
        assert!(f.eval(f.p() - 1.0) < f.p() - 1.0);
        assert!(f.eval(f.p() + 1.0) > f.p() + 1.0);
    }

    #[test]
    fn phi_is_increasing_with_consistent_derivative() {
        let f = PhiMap::new(ExpPartialSum::new(20), ExpPartialSum::new(23));
        let mut prev = f64::NEG_INFINITY;
        for i in 0..60 {
            let x = -20.0 + i as f64 * 0.5;
            let (y, d) = f.eval_with_prime(x);
            assert!(y > prev);
            prev = y;
            let h = 1e-5;
            let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            assert!((fd - d).abs() < 1e-5 * d.max(1.0), "x={x}: {fd} vs {d}");
        }
    }

    #[test]
    fn phi_large_x_decay() {
        let f = PhiMap::new(ExpPartialSum::new(30), ExpPartialSum::new(32));
        let n = f.lower().n() as f64;
        let start = 8.0 * n.ln();
        let mut c1: f64 = 0.0;
        for i in 0..20 {
            let x = start + i as f64;
            let d = f.offset(x);
            assert!(d > 0.0, "x={x}");
            c1 = c1.max(d * (x / 2.0).exp());
        }
        assert!(c1.is_finite());
    }

    #[test]
    fn identity_when_levels_coincide() {
        let e = ExpPartialSum::new(4);
        let f = PhiMap::new(e, e);
        assert!(f.is_identity());
        assert_eq!(f.eval_with_prime(1.25), (1.25, 1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn log_gm_strictly_increasing(m in 0u64..400, a in -30.0f64..30.0, b in -30.0f64..30.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let e = ExpPartialSum::new(m);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(e.log_gm_minus_1(lo) < e.log_gm_minus_1(hi));
        }

        #[test]
        fn phi_round_trip(m in 0u64..300, dm in 1u64..20, x in -15.0f64..25.0) {
            let f = PhiMap::new(ExpPartialSum::new(m), ExpPartialSum::new(m + dm));
            let y = f.eval(x);
            prop_assert!((f.inverse(y) - x).abs() < 1e-9 * x.abs().max(1.0));
            let lm = f.lower().log_gm_minus_1(y);
            let lmm = f.upper().log_gm_minus_1(x);
            prop_assert!((lm - lmm).abs() <= 1e-12 * lm.abs().max(1.0) + 1e-12);
        }

        #[test]
        fn modulus_bounded_by_real_part(m in 0u64..40, re in -3.0f64..4.0, im in -3.0f64..3.0) {
            // |h_m(ζ)| ≤ h_m(|ζ|) as the Taylor coefficients of h_m are non-negative.
            let e = ExpPartialSum::new(m);
            let z = Complex64::new(re, im);
            if let Ok(v) = e.complex_log_gm(z) {
                let bound = ln_1p_exp(Complex64::new(e.log_gm_minus_1(re), 0.0)).re;
                prop_assert!(v.log_modulus() <= bound + 1e-9 * bound.abs().max(1.0));
            }
        }
    }
}
