//! Small numerical helpers shared by the evaluators.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Natural log of Γ(x) for x > 0.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// log(k!) for a non-negative integer given as f64.
#[inline]
pub fn ln_factorial(k: f64) -> f64 {
    libm::lgamma(k + 1.0)
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Componentwise Neumaier accumulator for complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexKahanSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexKahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Pairwise summation; the result depends only on the order of `xs`,
/// so reductions over parallel maps stay deterministic.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut acc = KahanSum::new();
        for &x in xs {
            acc.add(x);
        }
        return acc.value();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Reduce an angle to (-π, π].
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// log(1 + w) for complex w, accurate for small |w|.
pub fn ln_1p(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        // w - w²/2 + w³/3 - w⁴/4
        let w2 = w * w;
        w - w2 * 0.5 + w2 * w / 3.0 - w2 * w2 * 0.25
    } else {
        (Complex64::new(1.0, 0.0) + w).ln()
    }
}

/// log(1 + exp(l)) for complex l without overflow.
pub fn ln_1p_exp(l: Complex64) -> Complex64 {
    if l.re > 0.0 {
        l + ln_1p((-l).exp())
    } else {
        ln_1p(l.exp())
    }
}

/// Principal power z^η for η > 0, computed from |Im z| and reflected so that
/// conj(z)^η == conj(z^η) holds bit-for-bit.
pub fn principal_pow(z: Complex64, eta: f64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let theta = z.im.abs().atan2(z.re);
    let w = Complex64::from_polar(r.powf(eta), eta * theta);
    if z.im < 0.0 {
        w.conj()
    } else {
        w
    }
}

/// Evenly log-spaced grid of `count` points on [lo, hi].
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Safeguarded Newton iteration for an increasing function on a bracket.
///
/// `f` returns `(value, derivative)`. The bracket `[lo, hi]` must satisfy
/// `f(lo) <= 0 <= f(hi)`.
pub fn newton_bracketed<F>(mut f: F, mut lo: f64, mut hi: f64, x0: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let (v, d) = f(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / d;
        let next = if d > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= tol * x.abs().max(1.0) || hi - lo <= tol * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Expand `[lo, hi]` around a starting guess until an increasing function
/// changes sign, returning the bracket.
pub fn bracket_increasing<F>(mut f: F, guess: f64, initial_width: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut w = initial_width.max(1e-3);
    let mut lo = guess - w;
    let mut hi = guess + w;
    while f(lo) > 0.0 {
        hi = lo;
        w *= 2.0;
        lo = guess - w;
    }
    while f(hi) < 0.0 {
        lo = hi;
        w *= 2.0;
        hi = guess + w;
    }
    (lo, hi)
}

/// Ordinary least squares of `ln y` on `ln x` over pairs with positive
/// entries. Returns `(slope, intercept, slope standard error)`.
pub fn fit_loglog(pairs: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if pts.len() > 2 {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, intercept, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-13).abs() < 1e-20);
    }

    #[test]
    fn pairwise_matches_exact_sum() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let t = wrap_angle(0.3 + k as f64 * 2.0 * PI);
            assert!((t - 0.3).abs() < 1e-12);
        }
        assert!((wrap_angle(PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn principal_pow_is_conjugate_symmetric() {
        let z = Complex64::new(-3.0, 0.7);
        let a = principal_pow(z, 0.75);
        let b = principal_pow(z.conj(), 0.75);
        assert_eq!(a, b.conj());
        let direct = z.powf(0.75);
        assert!((a - direct).norm() < 1e-12);
    }

    #[test]
    fn ln_1p_exp_large_and_small() {
        let l = Complex64::new(800.0, 0.3);
        assert!((ln_1p_exp(l) - l).norm() < 1e-12);
        let s = Complex64::new(-40.0, 0.0);
        assert!((ln_1p_exp(s).re - (-40.0f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn loglog_recovers_power_law() {
        let pairs: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, 3.0 * (i as f64).powf(1.5))).collect();
        let (s, c, e) = fit_loglog(&pairs).unwrap();
        assert!((s - 1.5).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-12 && e < 1e-10);
        assert!(fit_loglog(&[(1.0, 1.0)]).is_none());
    }

    #[test]
    fn newton_finds_cube_root() {
        let r = newton_bracketed(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1.0, 1e-15);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
