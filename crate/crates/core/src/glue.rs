//! The glued maps: `U` on the right half-plane, `V` on the left half-plane,
//! the boundary correction `Q`, and the assembled `G₀`, `G₁`.
//!
//! Strip indices are always computed from `|Im w|` and the result reflected,
//! so conjugate symmetry holds exactly.

use crate::error::{Error, Result};
use crate::expsum::{ExpPartialSum, MapValue, PhiMap};
use crate::numeric::principal_pow;
use crate::schedule::{build_schedule_with, max_feasible_k, Side, SlopeSchedule, DEFAULT_K_MAX};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

const TWO_PI: f64 = 2.0 * PI;

/// Largest real part of a lifted point we evaluate; beyond it `e^{e^w}`
/// leaves binary64 even in log form.
pub const MAX_LIFTED_RE: f64 = 650.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    G0,
    G1,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::G0 => "g0",
            Variant::G1 => "g1",
        })
    }
}

/// Which case of the piecewise definitions applies at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegionTag {
    RightStrip { k: usize, t: f64 },
    LeftStrip { k: usize, t: f64 },
    /// The band `|Im w| < π` where the shifted maps are `exp(−exp(w + s₀))`.
    CentralBand,
    QStripInterp,
    QDiskPower,
    QIdentity,
    RightSector,
    LeftSector,
    OutsideSectors,
}

impl RegionTag {
    pub fn name(&self) -> String {
        match self {
            RegionTag::RightStrip { k, .. } => format!("right_strip_{k}"),
            RegionTag::LeftStrip { k, .. } => format!("left_strip_{k}"),
            RegionTag::CentralBand => "central_band".into(),
            RegionTag::QStripInterp => "q_interp".into(),
            RegionTag::QDiskPower => "q_power".into(),
            RegionTag::QIdentity => "q_identity".into(),
            RegionTag::RightSector => "right_sector".into(),
            RegionTag::LeftSector => "left_sector".into(),
            RegionTag::OutsideSectors => "outside".into(),
        }
    }
}

/// Pieces of `Q` on the closed right half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QPiece {
    Identity,
    Power,
    Interp,
}

/// One evaluation, flattened for CSV output.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub z_re: f64,
    pub z_im: f64,
    pub region: String,
    pub log_g_re: Option<f64>,
    pub log_g_im: Option<f64>,
    pub zero_flag: bool,
}

/// Everything needed to evaluate the glued maps for one `σ`.
#[derive(Debug)]
pub struct GlueConfig {
    sigma: f64,
    gamma: f64,
    rho: f64,
    s0: f64,
    schedule: SlopeSchedule,
    levels: Vec<OnceLock<ExpPartialSum>>,
    phis: Vec<OnceLock<PhiMap>>,
}

impl GlueConfig {
    /// Configuration with the default truncation.
    pub fn new(sigma: f64) -> Result<Self> {
        let gamma = gamma_of(sigma)?;
        Self::with_k_max(sigma, DEFAULT_K_MAX.min(max_feasible_k(gamma)))
    }

    pub fn with_k_max(sigma: f64, k_max: usize) -> Result<Self> {
        let gamma = gamma_of(sigma)?;
        // n_1 = n_2 = 1 keeps the first strip conformal, which the shifted
        // variant relies on.
        let schedule = build_schedule_with(gamma, k_max, 2)?;
        Self::from_schedule(sigma, schedule)
    }

    pub fn from_schedule(sigma: f64, schedule: SlopeSchedule) -> Result<Self> {
        let gamma = gamma_of(sigma)?;
        if (schedule.gamma() - gamma).abs() > 1e-12 * gamma {
            return Err(Error::InvalidArgument(format!(
                "schedule exponent {} does not match 1/(2σ−1) = {gamma}",
                schedule.gamma()
            )));
        }
        if schedule.k_max() < 3 || schedule.n(1) != 1 || schedule.n(2) != 1 {
            return Err(Error::InvalidArgument("schedule needs k_max >= 3 and n_1 = n_2 = 1".into()));
        }
        let k_max = schedule.k_max();
        Ok(GlueConfig {
            sigma,
            gamma,
            rho: sigma * gamma,
            s0: 2f64.ln().ln(),
            schedule,
            levels: (0..=k_max).map(|_| OnceLock::new()).collect(),
            phis: (0..=k_max).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn schedule(&self) -> &SlopeSchedule {
        &self.schedule
    }

    pub fn k_max(&self) -> usize {
        self.schedule.k_max()
    }

    /// `n_k`.
    pub fn n(&self, k: usize) -> u64 {
        self.schedule.n(k)
    }

    /// `m_k = (n_k − 1)/2`.
    pub fn m(&self, k: usize) -> u64 {
        self.schedule.m(k)
    }

    /// `N_k = n_1 + … + n_k`.
    pub fn partial_sum_n(&self, k: usize) -> u64 {
        self.schedule.p(k)
    }

    /// Level `m_k`, built on first use.
    pub fn level(&self, k: usize) -> &ExpPartialSum {
        self.levels[k].get_or_init(|| ExpPartialSum::new(self.schedule.m(k)))
    }

    /// Transition between levels `k` (target) and `k + 1` (source).
    pub fn phi(&self, k: usize) -> &PhiMap {
        self.phis[k].get_or_init(|| PhiMap::new(*self.level(k), *self.level(k + 1)))
    }

    /// `(ψ_k(x) − x, ψ_k′(x))` for the right half-plane, `ψ_k(x) = φ_k(x + s_{m_{k+1}}) − s_{m_k}`.
    pub fn psi_right(&self, k: usize, x: f64) -> (f64, f64) {
        let f = self.phi(k);
        let (sm, s_up) = (self.level(k).s_m(), self.level(k + 1).s_m());
        let (d, prime) = f.offset_with_prime(x + s_up);
        (d + (s_up - sm), prime)
    }

    /// `(ψ_k(x) − x, ψ_k′(x))` for the left half-plane,
    /// `ψ_k(x) = n_k·φ_k(x/n_{k+1} + s_{m_{k+1}}) − n_k·s_{m_k}`.
    pub fn psi_left(&self, k: usize, x: f64) -> (f64, f64) {
        let f = self.phi(k);
        let (n, nn) = (self.n(k) as f64, self.n(k + 1) as f64);
        let (sm, s_up) = (self.level(k).s_m(), self.level(k + 1).s_m());
        let xi = x / nn + s_up;
        let (d, prime) = f.offset_with_prime(xi);
        (n * d + (n / nn - 1.0) * x + n * (s_up - sm), n / nn * prime)
    }

    fn right_limit(&self) -> f64 {
        TWO_PI * (self.k_max() - 1) as f64
    }

    fn left_limit(&self) -> f64 {
        TWO_PI * self.partial_sum_n(self.k_max() - 1) as f64
    }

    /// Strip `k` and parameter `t` for `U` at height `y ≥ 0`.
    pub fn right_strip(&self, y: f64) -> Result<(usize, f64)> {
        if !(y < self.right_limit()) {
            return Err(Error::RangeExhausted { what: "U strip", needed: y, limit: self.right_limit() });
        }
        let k = (y / TWO_PI).floor() as usize + 1;
        Ok((k, y / TWO_PI - (k - 1) as f64))
    }

    /// Strip `k` and parameter `t` for `V` at height `y ≥ 0`.
    pub fn left_strip(&self, y: f64) -> Result<(usize, f64)> {
        if !(y < self.left_limit()) {
            return Err(Error::RangeExhausted { what: "V strip", needed: y, limit: self.left_limit() });
        }
        let k = self.schedule.range_strip_of(y)?;
        let t = (y / TWO_PI - self.partial_sum_n(k - 1) as f64) / self.n(k) as f64;
        Ok((k, t))
    }

    /// Argument of `g_{m_k}` representing `U(w)` in strip `k`, for `Im w ≥ 0`.
    /// `t` is not clamped, so this also extends the strip formula across its edges.
    pub fn u_argument_in_strip(&self, w: Complex64, k: usize) -> Result<Complex64> {
        if k == 0 || k >= self.k_max() {
            return Err(Error::RangeExhausted { what: "U strip", needed: k as f64, limit: (self.k_max() - 1) as f64 });
        }
        if w.re > MAX_LIFTED_RE {
            return Err(Error::RangeExhausted { what: "U real part", needed: w.re, limit: MAX_LIFTED_RE });
        }
        let t = w.im / TWO_PI - (k - 1) as f64;
        let x = w.re.max(0.0);
        let (dpsi, _) = self.psi_right(k, x);
        Ok(Complex64::new(x + t * dpsi + self.level(k).s_m(), TWO_PI * t))
    }

    /// Argument of `g_{m_k}` representing `V(w)` in strip `k`, for `Im w ≥ 0`.
    pub fn v_argument_in_strip(&self, w: Complex64, k: usize) -> Result<Complex64> {
        if k == 0 || k >= self.k_max() {
            return Err(Error::RangeExhausted { what: "V strip", needed: k as f64, limit: (self.k_max() - 1) as f64 });
        }
        let n = self.n(k) as f64;
        let t = (w.im / TWO_PI - self.partial_sum_n(k - 1) as f64) / n;
        let x = w.re.min(0.0);
        let (dpsi, _) = self.psi_left(k, x);
        Ok(Complex64::new((x + t * dpsi) / n + self.level(k).s_m(), TWO_PI * t))
    }

    /// `U(w)` evaluated with the strip-`k` formula.
    pub fn eval_u_in_strip(&self, w: Complex64, k: usize) -> Result<MapValue> {
        let a = self.u_argument_in_strip(w, k)?;
        self.level(k).complex_log_gm(a)
    }

    /// `V(w)` evaluated with the strip-`k` formula.
    pub fn eval_v_in_strip(&self, w: Complex64, k: usize) -> Result<MapValue> {
        let a = self.v_argument_in_strip(w, k)?;
        self.level(k).complex_log_gm(a)
    }

    /// `U(w)` for `Re w ≥ 0`.
    pub fn eval_u(&self, w: Complex64) -> Result<MapValue> {
        check_half_plane(w, true)?;
        let flip = w.im < 0.0;
        let wa = Complex64::new(w.re, w.im.abs());
        let (k, _) = self.right_strip(wa.im)?;
        let v = self.eval_u_in_strip(wa, k)?;
        Ok(if flip { v.conj() } else { v })
    }

    /// `V(w)` for `Re w ≤ 0`.
    pub fn eval_v(&self, w: Complex64) -> Result<MapValue> {
        check_half_plane(w, false)?;
        let flip = w.im < 0.0;
        let wa = Complex64::new(w.re, w.im.abs());
        let (k, _) = self.left_strip(wa.im)?;
        let v = self.eval_v_in_strip(wa, k)?;
        Ok(if flip { v.conj() } else { v })
    }

    fn central_band(&self, w: Complex64) -> MapValue {
        MapValue::Log(-(w + self.s0).exp())
    }

    /// `U₁`: `U(w − πi)` above the band `|Im w| < π`, `exp(−exp(w + s₀))` inside it.
    pub fn eval_u1(&self, w: Complex64) -> Result<MapValue> {
        check_half_plane(w, true)?;
        let flip = w.im < 0.0;
        let wa = Complex64::new(w.re, w.im.abs());
        let v = if wa.im >= PI {
            self.eval_u(wa - Complex64::new(0.0, PI))?
        } else {
            self.central_band(wa)
        };
        Ok(if flip { v.conj() } else { v })
    }

    /// `V₁`, the left-half-plane counterpart of `U₁`.
    pub fn eval_v1(&self, w: Complex64) -> Result<MapValue> {
        check_half_plane(w, false)?;
        let flip = w.im < 0.0;
        let wa = Complex64::new(w.re, w.im.abs());
        let v = if wa.im >= PI {
            self.eval_v(wa - Complex64::new(0.0, PI))?
        } else {
            self.central_band(wa)
        };
        Ok(if flip { v.conj() } else { v })
    }

    /// Boundary profile used by `Q` (variant `G0`) or `Q₁` (variant `G1`).
    pub fn boundary_profile(&self, y: f64, variant: Variant) -> Result<f64> {
        match variant {
            Variant::G0 => self.schedule.eval_g(y),
            Variant::G1 => self.schedule.eval_g1(y),
        }
    }

    pub fn boundary_profile_prime(&self, y: f64, variant: Variant) -> Result<f64> {
        match variant {
            Variant::G0 => self.schedule.eval_g_prime(y, Side::Right),
            Variant::G1 => self.schedule.eval_g1_prime(y, Side::Right),
        }
    }

    /// Which piece of `Q` applies at `w` (`Re w ≥ 0`).
    pub fn q_piece(&self, w: Complex64) -> QPiece {
        let (x, y) = (w.re, w.im.abs());
        if x >= 1.0 {
            QPiece::Identity
        } else if w.norm() <= 1.0 {
            QPiece::Power
        } else if y <= 1.0 {
            QPiece::Identity
        } else {
            QPiece::Interp
        }
    }

    /// Evaluate one piece of `Q` regardless of where `w` lies.
    pub fn eval_q_piece(&self, w: Complex64, piece: QPiece, variant: Variant) -> Result<Complex64> {
        let (x, y) = (w.re, w.im.abs());
        let out = match piece {
            QPiece::Identity => Complex64::new(x, y),
            QPiece::Power => {
                let r = w.norm();
                if r == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(x, y) * r.powf(self.gamma - 1.0)
                }
            }
            QPiece::Interp => {
                let g = self.boundary_profile(y, variant)?;
                Complex64::new(x, (1.0 - x) * g + x * y)
            }
        };
        Ok(if w.im < 0.0 { out.conj() } else { out })
    }

    /// `Q(w)` (variant `G0`) or `Q₁(w)` (variant `G1`) for `Re w ≥ 0`.
    pub fn eval_q(&self, w: Complex64, variant: Variant) -> Result<Complex64> {
        check_half_plane(w, true)?;
        self.eval_q_piece(w, self.q_piece(w), variant)
    }

    /// `W = U∘Q` or `U₁∘Q₁` on the right half-plane.
    pub fn eval_w(&self, w: Complex64, variant: Variant) -> Result<MapValue> {
        let q = self.eval_q(w, variant)?;
        match variant {
            Variant::G0 => self.eval_u(q),
            Variant::G1 => self.eval_u1(q),
        }
    }

    /// Whether `z` lies in the closed right sector `|arg z| ≤ π/(2σ)`.
    pub fn in_right_sector(&self, z: Complex64) -> bool {
        z == Complex64::new(0.0, 0.0) || z.im.abs().atan2(z.re) <= PI / (2.0 * self.sigma)
    }

    /// The right-sector formula `W(z^σ)`, usable on the closed sector.
    pub fn eval_right_formula(&self, z: Complex64, variant: Variant) -> Result<MapValue> {
        let w = principal_pow(z, self.sigma);
        self.eval_w(Complex64::new(w.re.max(0.0), w.im), variant)
    }

    /// The left-sector formula `V(−(−z)^ρ)`, usable on the closed sector.
    pub fn eval_left_formula(&self, z: Complex64, variant: Variant) -> Result<MapValue> {
        let w = -principal_pow(-z, self.rho);
        let w = Complex64::new(w.re.min(0.0), w.im);
        match variant {
            Variant::G0 => self.eval_v(w),
            Variant::G1 => self.eval_v1(w),
        }
    }

    /// `G₀(z)` or `G₁(z)`.
    pub fn eval_g(&self, z: Complex64, variant: Variant) -> Result<MapValue> {
        if z.im < 0.0 {
            return self.eval_g(z.conj(), variant).map(|v| v.conj());
        }
        if self.in_right_sector(z) {
            self.eval_right_formula(z, variant)
        } else {
            self.eval_left_formula(z, variant)
        }
    }

    pub fn eval_g0(&self, z: Complex64) -> Result<MapValue> {
        self.eval_g(z, Variant::G0)
    }

    pub fn eval_g1(&self, z: Complex64) -> Result<MapValue> {
        self.eval_g(z, Variant::G1)
    }

    /// `G(z^N)`; this configuration's `σ` plays the role of `σ₀ = σ/N`.
    pub fn eval_sector_power(&self, z: Complex64, big_n: u32, variant: Variant) -> Result<MapValue> {
        if big_n == 0 {
            return Err(Error::InvalidArgument("sector count must be positive".into()));
        }
        let zn = if big_n == 1 { z } else { z.powu(big_n) };
        let limit = self.max_radius(variant);
        if zn.norm() > limit {
            return Err(Error::RangeExhausted { what: "sector power", needed: zn.norm(), limit });
        }
        self.eval_g(zn, variant)
    }

    /// Piecewise case in the lifted coordinate `w` (the argument of `W` or `V`).
    pub fn classify_region(&self, w: Complex64) -> RegionTag {
        let y = w.im.abs();
        if w.re < 0.0 {
            return match self.left_strip(y) {
                Ok((k, t)) => RegionTag::LeftStrip { k, t },
                Err(_) => RegionTag::OutsideSectors,
            };
        }
        match self.q_piece(w) {
            QPiece::Power => RegionTag::QDiskPower,
            QPiece::Interp => RegionTag::QStripInterp,
            QPiece::Identity if w.re < 1.0 => RegionTag::QIdentity,
            QPiece::Identity => match self.right_strip(y) {
                Ok((k, t)) => RegionTag::RightStrip { k, t },
                Err(_) => RegionTag::OutsideSectors,
            },
        }
    }

    /// The sector containing `z`.
    pub fn sector_of(&self, z: Complex64) -> RegionTag {
        if !z.re.is_finite() || !z.im.is_finite() {
            RegionTag::OutsideSectors
        } else if self.in_right_sector(z) {
            RegionTag::RightSector
        } else {
            RegionTag::LeftSector
        }
    }

    /// The lifted coordinate of `z`: `z^σ` in the right sector, `−(−z)^ρ` in the left.
    pub fn lift(&self, z: Complex64) -> Complex64 {
        if self.in_right_sector(z) {
            let w = principal_pow(z, self.sigma);
            Complex64::new(w.re.max(0.0), w.im)
        } else {
            let w = -principal_pow(-z, self.rho);
            Complex64::new(w.re.min(0.0), w.im)
        }
    }

    /// Region tag for `z` itself, resolved through its lifted coordinate.
    pub fn classify_point(&self, z: Complex64, variant: Variant) -> RegionTag {
        let w = self.lift(z);
        if variant == Variant::G1 {
            let q = if w.re >= 0.0 { self.eval_q(w, variant).unwrap_or(w) } else { w };
            if q.im.abs() < PI {
                return RegionTag::CentralBand;
            }
        }
        self.classify_region(w)
    }

    /// Largest radius such that every `|z| ≤ r` is evaluable.
    pub fn max_radius(&self, variant: Variant) -> f64 {
        let right_ok = |r: f64| {
            let big_r = r.powf(self.sigma);
            let lim = self.right_limit();
            big_r <= MAX_LIFTED_RE
                && big_r < lim
                && self.boundary_profile(big_r, variant).map(|g| g < lim - PI).unwrap_or(false)
        };
        let left_ok = |r: f64| r.powf(self.rho) < self.left_limit() - PI;
        let ok = |r: f64| right_ok(r) && left_ok(r);
        let (mut lo, mut hi) = (0.0, 1.0);
        while ok(hi) {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// One CSV row for `G(z^N)`; the region is that of `z^N`.
    pub fn eval_row(&self, z: Complex64, big_n: u32, variant: Variant) -> Result<EvalRow> {
        let v = self.eval_sector_power(z, big_n, variant)?;
        let zn = if big_n == 1 { z } else { z.powu(big_n) };
        let l = v.log_value();
        Ok(EvalRow {
            z_re: z.re,
            z_im: z.im,
            region: self.classify_point(zn, variant).name(),
            log_g_re: l.map(|l| l.re),
            log_g_im: l.map(|l| l.im),
            zero_flag: v.zero_flag(),
        })
    }
}

fn gamma_of(sigma: f64) -> Result<f64> {
    if !(sigma > 0.5 && sigma < 1.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    Ok(1.0 / (2.0 * sigma - 1.0))
}

fn check_half_plane(w: Complex64, right: bool) -> Result<()> {
    let ok = if right { w.re >= 0.0 } else { w.re <= 0.0 };
    if ok && w.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{w} is outside the {} half-plane",
            if right { "right" } else { "left" }
        )))
    }
}

/// Difference of two log values with the imaginary part reduced to (−π, π].
pub fn log_difference(a: Complex64, b: Complex64) -> Complex64 {
    let d = a - b;
    Complex64::new(d.re, crate::numeric::wrap_angle(d.im))
}
