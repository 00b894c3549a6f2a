//! The odd-slope schedule `(n_k)` and the piecewise-linear map `h` with
//! `h(2πk) = 2π·p_k`, together with `g = h⁻¹(x^γ)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Largest integer that binary64 represents exactly along with all smaller ones.
const EXACT_LIMIT: u64 = 1 << 53;

pub const DEFAULT_K_MAX: usize = 4096;

/// Which one-sided derivative to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScheduleDoc {
    gamma: f64,
    k0: usize,
    k_max: usize,
    p: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScheduleDoc", try_from = "ScheduleDoc")]
pub struct SlopeSchedule {
    gamma: f64,
    k0: usize,
    k_max: usize,
    /// `p[k] = h(2πk)/(2π)`, `p[0] = 0`.
    p: Vec<u64>,
    /// `n[k] = p[k] − p[k−1]`; `n[0]` is unused and set to 0.
    n: Vec<u64>,
}

impl From<SlopeSchedule> for ScheduleDoc {
    fn from(s: SlopeSchedule) -> Self {
        ScheduleDoc { gamma: s.gamma, k0: s.k0, k_max: s.k_max, p: s.p }
    }
}

impl TryFrom<ScheduleDoc> for SlopeSchedule {
    type Error = Error;
    fn try_from(d: ScheduleDoc) -> Result<Self> {
        if !(d.gamma > 1.0) {
            return Err(Error::InvalidGamma(d.gamma));
        }
        if d.p.len() != d.k_max + 1 || d.p.first() != Some(&0) {
            return Err(Error::InvalidArgument("p must have k_max + 1 entries starting at 0".into()));
        }
        let mut n = vec![0u64; d.k_max + 1];
        for k in 1..=d.k_max {
            if d.p[k] <= d.p[k - 1] || (d.p[k] - d.p[k - 1]) % 2 == 0 {
                return Err(Error::InvalidArgument(format!("p is not an odd-step sequence at k = {k}")));
            }
            n[k] = d.p[k] - d.p[k - 1];
        }
        Ok(SlopeSchedule { gamma: d.gamma, k0: d.k0, k_max: d.k_max, p: d.p, n })
    }
}

fn target(gamma: f64, k: usize) -> f64 {
    (TWO_PI * k as f64).powf(gamma) / TWO_PI
}

fn increment(gamma: f64, k: usize) -> f64 {
    let a = TWO_PI * k as f64;
    if k == 1 {
        return a.powf(gamma);
    }
    // a^γ − (a − 2π)^γ = −a^γ·expm1(γ·ln(1 − 1/k))
    -a.powf(gamma) * (gamma * (-1.0 / k as f64).ln_1p()).exp_m1()
}

/// Smallest index from which every later increment of `(2πk)^γ` is at least 4π.
pub fn threshold_index(gamma: f64) -> usize {
    // Increments grow with k for γ > 1, so the first success persists.
    let ok = |j: usize| increment(gamma, j + 1) >= 4.0 * PI;
    if ok(0) {
        return 0;
    }
    let (mut lo, mut hi) = (0usize, 1usize);
    while !ok(hi) {
        lo = hi;
        if hi >= usize::MAX / 4 {
            return usize::MAX / 2;
        }
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest `k_max` whose schedule stays within the exact-integer range.
pub fn max_feasible_k(gamma: f64) -> usize {
    let limit = (EXACT_LIMIT as f64) / 2.0;
    let k = ((limit * TWO_PI).powf(1.0 / gamma) / TWO_PI).floor();
    (k as usize).max(1)
}

/// Build the schedule with the smallest admissible threshold (at least 1).
pub fn build_schedule(gamma: f64, k_max: usize) -> Result<SlopeSchedule> {
    build_schedule_with(gamma, k_max, 1)
}

/// Build the schedule with threshold `k0 ≥ min_k0`.
pub fn build_schedule_with(gamma: f64, k_max: usize, min_k0: usize) -> Result<SlopeSchedule> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidGamma(gamma));
    }
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be positive".into()));
    }
    let k0 = threshold_index(gamma).max(min_k0).max(1);
    let mut p = vec![0u64; k_max + 1];
    let mut n = vec![0u64; k_max + 1];
    for k in 1..=k_max {
        if k <= k0 {
            p[k] = k as u64;
        } else {
            let t = target(gamma, k);
            if !(t < (EXACT_LIMIT / 2) as f64) {
                return Err(Error::ScheduleOverflow(k));
            }
            let prev = p[k - 1];
            let c = t.floor() as u64;
            let lo = if (c + prev) % 2 == 1 { c } else { c - 1 };
            let hi = lo + 2;
            let d_lo = t - lo as f64;
            let d_hi = hi as f64 - t;
            let tie = f64::EPSILON * t.max(1.0);
            p[k] = if d_hi <= d_lo + tie { hi } else { lo };
        }
        n[k] = p[k] - p[k - 1];
    }
    Ok(SlopeSchedule { gamma, k0, k_max, p, n })
}

impl SlopeSchedule {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `p[k]`, equal to the partial sum `N_k = n_1 + … + n_k`.
    pub fn p(&self, k: usize) -> u64 {
        self.p[k]
    }

    /// The slope `n_k` for `1 ≤ k ≤ k_max`.
    pub fn n(&self, k: usize) -> u64 {
        self.n[k]
    }

    /// `m_k = (n_k − 1)/2`.
    pub fn m(&self, k: usize) -> u64 {
        (self.n[k] - 1) / 2
    }

    pub fn p_values(&self) -> &[u64] {
        &self.p
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Largest `x` where `h` is defined.
    pub fn h_domain_end(&self) -> f64 {
        TWO_PI * self.k_max as f64
    }

    /// Largest value of `h`, which bounds the range of `h⁻¹`.
    pub fn h_range_end(&self) -> f64 {
        TWO_PI * self.p[self.k_max] as f64
    }

    /// Largest `x` where `g` is defined.
    pub fn g_domain_end(&self) -> f64 {
        self.h_range_end().powf(1.0 / self.gamma)
    }

    /// Index `k` with `2π(k−1) ≤ x < 2πk`, clamped to `k_max` at the end.
    pub fn strip_of(&self, x: f64) -> Result<usize> {
        if x < 0.0 || x > self.h_domain_end() {
            return Err(Error::RangeExhausted { what: "h", needed: x, limit: self.h_domain_end() });
        }
        Ok(((x / TWO_PI).floor() as usize + 1).min(self.k_max))
    }

    /// Index `k` with `2π·p[k−1] ≤ y < 2π·p[k]` (clamped to `k_max`).
    pub fn range_strip_of(&self, y: f64) -> Result<usize> {
        if y < 0.0 || y > self.h_range_end() {
            return Err(Error::RangeExhausted { what: "h inverse", needed: y, limit: self.h_range_end() });
        }
        let scaled = y / TWO_PI;
        let idx = self.p.partition_point(|&pk| pk as f64 <= scaled);
        Ok(idx.clamp(1, self.k_max))
    }

    pub fn eval_h(&self, x: f64) -> Result<f64> {
        let k = self.strip_of(x)?;
        let x0 = TWO_PI * (k as f64 - 1.0);
        Ok(TWO_PI * self.p[k - 1] as f64 + self.n[k] as f64 * (x - x0))
    }

    pub fn eval_h_inverse(&self, y: f64) -> Result<f64> {
        let k = self.range_strip_of(y)?;
        let y0 = TWO_PI * self.p[k - 1] as f64;
        Ok(TWO_PI * (k as f64 - 1.0) + (y - y0) / self.n[k] as f64)
    }

    pub fn eval_g(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::InvalidArgument(format!("g needs x >= 0, got {x}")));
        }
        self.eval_h_inverse(x.powf(self.gamma))
            .map_err(|_| Error::RangeExhausted { what: "g", needed: x, limit: self.g_domain_end() })
    }

    /// Slope of `h` on the segment containing `y` from the given side.
    fn slope_at_range(&self, y: f64, side: Side) -> Result<u64> {
        let mut k = self.range_strip_of(y)?;
        if side == Side::Left && k > 1 && y == TWO_PI * self.p[k - 1] as f64 {
            k -= 1;
        }
        Ok(self.n[k])
    }

    /// One-sided derivative `g′(x) = γx^{γ−1}/n_k`.
    pub fn eval_g_prime(&self, x: f64, side: Side) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::InvalidArgument(format!("g needs x >= 0, got {x}")));
        }
        let y = x.powf(self.gamma);
        let n = self
            .slope_at_range(y, side)
            .map_err(|_| Error::RangeExhausted { what: "g", needed: x, limit: self.g_domain_end() })?;
        Ok(self.gamma * x.powf(self.gamma - 1.0) / n as f64)
    }

    /// Boundary profile of the shifted construction: `y^γ` up to `y^γ = π`,
    /// then `π + h⁻¹(y^γ − π)`.
    pub fn eval_g1(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::InvalidArgument(format!("g1 needs x >= 0, got {x}")));
        }
        let y = x.powf(self.gamma);
        if y <= PI {
            Ok(y)
        } else {
            Ok(PI + self.eval_h_inverse(y - PI)?)
        }
    }

    pub fn eval_g1_prime(&self, x: f64, side: Side) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::InvalidArgument(format!("g1 needs x >= 0, got {x}")));
        }
        let y = x.powf(self.gamma);
        let dy = self.gamma * x.powf(self.gamma - 1.0);
        if y < PI || (y == PI && side == Side::Left) {
            Ok(dy)
        } else {
            Ok(dy / self.slope_at_range(y - PI, side)? as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_slope_is_one_and_h_starts_at_zero() {
        for &g in &[1.05, 1.25, 1.5, 2.0, 3.0, 5.0] {
            let s = build_schedule(g, 200).unwrap();
            assert_eq!(s.n(1), 1);
            assert_eq!(s.eval_h(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_gamma_at_most_one() {
        assert_eq!(build_schedule(1.0, 10), Err(Error::InvalidGamma(1.0)));
        assert!(build_schedule(0.5, 10).is_err());
        assert!(build_schedule(f64::NAN, 10).is_err());
    }

    #[test]
    fn gamma_two_slopes_track_derivative() {
        let s = build_schedule(2.0, 10_000).unwrap();
        let mut worst: f64 = 0.0;
        for k in 10..=10_000 {
            let dev = s.n(k) as f64 - 2.0 * TWO_PI * k as f64;
            worst = worst.max(dev.abs());
        }
        assert!(worst < 10.0, "worst deviation {worst}");
    }

    #[test]
    fn h_is_identity_on_first_segment() {
        let s = build_schedule(2.0, 50).unwrap();
        for i in 0..=20 {
            let x = TWO_PI * i as f64 / 20.0;
            assert_eq!(s.eval_h(x).unwrap(), x);
        }
    }

    #[test]
    fn h_hits_breakpoints_exactly() {
        let s = build_schedule(1.7, 300).unwrap();
        for k in 0..=300 {
            let x = TWO_PI * k as f64;
            let h = s.eval_h(x).unwrap();
            assert!((h - TWO_PI * s.p(k) as f64).abs() <= 1e-12 * h.max(1.0), "k={k}");
        }
    }

    #[test]
    fn h_close_to_power_beyond_threshold() {
        let s = build_schedule(2.0, 200).unwrap();
        let x = TWO_PI * 100.0;
        assert!((s.eval_h(x).unwrap() - x * x).abs() <= TWO_PI);
        for k in s.k0() + 1..=200 {
            let x = TWO_PI * k as f64;
            assert!((TWO_PI * s.p(k) as f64 - x.powf(2.0)).abs() <= TWO_PI + 1e-9 * x * x);
        }
    }

    #[test]
    fn g_is_power_on_unit_interval() {
        let s = build_schedule(2.5, 100).unwrap();
        assert_eq!(s.eval_g(1.0).unwrap(), 1.0);
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((s.eval_g(x).unwrap() - x.powf(2.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn g_approaches_identity_for_gamma_two() {
        let s = build_schedule(2.0, 2000).unwrap();
        let g = s.eval_g(50.0).unwrap();
        assert!((g - 50.0).abs() * 50.0 < 10.0);
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let x = 10.0 * (100.0f64).powf(i as f64 / 199.0);
            worst = worst.max(x * (s.eval_g(x).unwrap() - x).abs());
        }
        assert!(worst < 10.0, "{worst}");
    }

    #[test]
    fn one_sided_derivatives_differ_at_breakpoints() {
        let s = build_schedule(2.0, 200).unwrap();
        let k = 20;
        let x = (TWO_PI * s.p(k) as f64).sqrt();
        let l = s.eval_g_prime(x, Side::Left).unwrap();
        let r = s.eval_g_prime(x, Side::Right).unwrap();
        assert!((l * s.n(k) as f64 - r * s.n(k + 1) as f64).abs() < 1e-9 * l * s.n(k) as f64);
    }

    #[test]
    fn g1_matches_power_then_shifts() {
        let s = build_schedule_with(2.0, 200, 2).unwrap();
        let y = PI.sqrt() * 0.9;
        assert!((s.eval_g1(y).unwrap() - y * y).abs() < 1e-14);
        let y = 30.0;
        let want = PI + s.eval_h_inverse(900.0 - PI).unwrap();
        assert!((s.eval_g1(y).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = build_schedule(1.5, 64).unwrap();
        let text = s.to_json();
        let back = SlopeSchedule::from_json(&text).unwrap();
        assert_eq!(s, back);
        assert!(text.contains("\"k0\""));
        assert!(!text.contains("\"n\""));
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(build_schedule(5.0, 1000), Err(Error::ScheduleOverflow(_))));
        let k = max_feasible_k(5.0);
        assert!(build_schedule(5.0, k).is_ok());
    }

    #[test]
    fn out_of_range_fails_loudly() {
        let s = build_schedule(2.0, 10).unwrap();
        assert!(s.eval_h(TWO_PI * 10.5).is_err());
        assert!(s.eval_g(1e6).is_err());
    }

    #[test]
    fn threshold_matches_scan() {
        for &g in &[1.3, 1.5, 2.0, 3.0, 5.0] {
            let mut j = 0;
            while (TWO_PI * (j + 1) as f64).powf(g) - (TWO_PI * j as f64).powf(g) < 4.0 * PI {
                j += 1;
            }
            assert_eq!(threshold_index(g), j, "gamma={g}");
        }
        // Close to 1 the threshold is astronomically large but still found quickly.
        assert!(threshold_index(1.001) > 1_000_000);
    }

    proptest! {
        #[test]
        fn slopes_odd_and_parity_alternates(gamma in 1.02f64..4.0) {
            let k_max = max_feasible_k(gamma).min(600);
            let s = build_schedule(gamma, k_max).unwrap();
            for k in 1..=k_max {
                prop_assert_eq!(s.n(k) % 2, 1);
                prop_assert!(s.p(k) > s.p(k - 1));
            }
            for k in s.k0() + 1..=k_max {
                let x = TWO_PI * k as f64;
                prop_assert!((TWO_PI * s.p(k) as f64 - x.powf(gamma)).abs() <= TWO_PI * (1.0 + 1e-12 * s.p(k) as f64));
            }
        }

        #[test]
        fn g_inverts_h(gamma in 1.05f64..3.0, u in 0.0f64..1.0) {
            let s = build_schedule(gamma, 400).unwrap();
            let x = u * s.g_domain_end();
            let g = s.eval_g(x).unwrap();
            let back = s.eval_h(g).unwrap();
            let y = x.powf(gamma);
            prop_assert!((back - y).abs() <= 1e-10 * y.max(1.0));
        }

        #[test]
        fn h_and_g_strictly_increase(gamma in 1.05f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = build_schedule(gamma, 200).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            let e = s.h_domain_end();
            prop_assert!(s.eval_h(lo * e).unwrap() < s.eval_h(hi * e).unwrap());
            let e = s.g_domain_end();
            prop_assert!(s.eval_g(lo * e).unwrap() < s.eval_g(hi * e).unwrap());
        }
    }
}
