//! Verification suites. Each produces a table, a list of checks with signed
//! margins (non-negative means satisfied) and optionally a plot.

use crate::svg::{Plot, Series};
use num_complex::Complex64;
use qcglue::beltrami::{strip_contribution, twb_annulus_integral};
use qcglue::glue::{log_difference, QPiece};
use qcglue::numeric::{fit_loglog, log_space};
use qcglue::oscillation::{bank_laine_b_of_quotient, example2_coefficient, jet, schwarzian, two_constants_m, JetSample, Mobius};
use qcglue::schedule::{max_feasible_k, Side};
use qcglue::zeros::{counting_table, fit_exponent};
use qcglue::{r0, remainder_r, solve_s_m, ExpPartialSum, GlueConfig, MapValue, PhiMap, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        Check { name: name.into(), value, bound }
    }

    /// Slack relative to the bound; negative when violated, NaN counts as violated.
    pub fn margin(&self) -> f64 {
        let m = match self.bound {
            Bound::AtMost(b) => (b - self.value) / b.abs().max(f64::MIN_POSITIVE),
            Bound::AtLeast(b) => (self.value - b) / b.abs().max(1e-300),
            Bound::Within(lo, hi) => (self.value - lo).min(hi - self.value) / (hi - lo),
        };
        if m.is_nan() {
            f64::NEG_INFINITY
        } else {
            m
        }
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct SuiteOutput {
    pub checks: Vec<Check>,
    pub table: Table,
    pub extra: Map<String, Value>,
    pub plot: Option<Plot>,
}

pub struct Context {
    pub glue: GlueConfig,
    pub sectors: u32,
    pub grid: Vec<f64>,
    pub seed: u64,
}

impl Context {
    pub fn new(sigma: f64, k_max: usize, sectors: u32, grid: Vec<f64>, seed: u64) -> qcglue::Result<Self> {
        let gamma = 1.0 / (2.0 * sigma - 1.0);
        let glue = GlueConfig::with_k_max(sigma, k_max.min(max_feasible_k(gamma)))?;
        Ok(Context { glue, sectors, grid, seed })
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn run_suite(name: &str, ctx: &Context) -> qcglue::Result<SuiteOutput> {
    match name {
        "lemma1" => schedule_suite(ctx),
        "lemma1a" => remainder_suite(),
        "lemma2" => normalisation_suite(),
        "lemma1c" => fixed_point_suite(ctx),
        "lemma1d" => transition_suite(ctx),
        "seams" => seams_suite(ctx),
        "twb" => twb_suite(ctx),
        "zeros" => zeros_suite(ctx),
        "growth" => growth_suite(ctx),
        "operators" => operators_suite(ctx),
        other => Err(qcglue::Error::InvalidArgument(format!("unknown suite {other}"))),
    }
}

fn schedule_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let s = ctx.glue.schedule();
    let gamma = s.gamma();
    let mut table = Table::new(&["k", "p", "n", "ratio"]);
    let mut even = 0;
    let mut ratios = Vec::new();
    for k in 1..=s.k_max() {
        let ratio = s.n(k) as f64 / (gamma * (TWO_PI * k as f64).powf(gamma - 1.0));
        if k >= 2 && (s.p(k) - s.p(k - 1)) % 2 == 0 {
            even += 1;
        }
        ratios.push(ratio);
        table.push(vec![k.to_string(), s.p(k).to_string(), s.n(k).to_string(), f(ratio)]);
    }
    let k_fit = (0..ratios.len()).rev().take_while(|&i| (0.9..=1.1).contains(&ratios[i])).last().map(|i| i + 1).unwrap_or(s.k_max() + 1);

    let x_end = s.g_domain_end();
    let mut inverse_err: f64 = 0.0;
    let mut non_increasing = 0;
    let mut prev = f64::NEG_INFINITY;
    for i in 1..=2000 {
        let x = x_end * i as f64 / 2001.0;
        let g = s.eval_g(x)?;
        if g <= prev {
            non_increasing += 1;
        }
        prev = g;
        let target = x.powf(gamma);
        inverse_err = inverse_err.max((s.eval_h(g)? - target).abs() / target.max(1.0));
    }
    let mut g_slope_err: f64 = 0.0;
    for x in log_space(10.0, x_end * 0.99, 200) {
        g_slope_err = g_slope_err.max((s.eval_g_prime(x, Side::Right)? - 1.0).abs());
    }
    let mut extra = Map::new();
    extra.insert("k0".into(), json!(s.k0()));
    extra.insert("k_fit".into(), json!(k_fit));
    extra.insert("max_abs_g_prime_minus_1".into(), json!(g_slope_err));
    Ok(SuiteOutput {
        checks: vec![
            Check::new("even increments", even as f64, Bound::AtMost(0.0)),
            Check::new("relative error of h(g(x)) against x^gamma", inverse_err, Bound::AtMost(1e-10)),
            Check::new("non-increasing samples of g", non_increasing as f64, Bound::AtMost(0.0)),
        ],
        table,
        extra,
        plot: None,
    })
}

/// log(h_m(y) − 1) from the positive series Σ_j y^{n+j}/((n−1)! j! (n+j)).
fn series_log_hm_minus_1(n: u64, y: f64) -> f64 {
    let nf = n as f64;
    let ly = y.ln();
    let terms = (y + 40.0 * y.sqrt() + 200.0) as usize;
    let lt: Vec<f64> = (0..terms)
        .map(|j| {
            let j = j as f64;
            (nf + j) * ly - libm::lgamma(nf) - libm::lgamma(j + 1.0) - (nf + j).ln()
        })
        .collect();
    let top = lt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + lt.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

fn remainder_suite() -> qcglue::Result<SuiteOutput> {
    let mut table = Table::new(&["n", "y", "R", "bound", "oracle_residual"]);
    let (mut worst, mut residual): (f64, f64) = (0.0, 0.0);
    for &n in &[25u64, 51, 101, 201, 401] {
        let nf = n as f64;
        for y in log_space(1e-2, 1e4, 40) {
            let r = remainder_r(n, y)?;
            let bound = 24.0 * y / (nf * (nf + y));
            let oracle = series_log_hm_minus_1(n, y) + libm::lgamma(nf + 1.0) - y - nf * y.ln() + (y / nf).ln_1p();
            worst = worst.max(r.abs() / bound);
            residual = residual.max((r - oracle).abs());
            table.push(vec![n.to_string(), f(y), f(r), f(bound), f((r - oracle).abs())]);
        }
    }
    Ok(SuiteOutput {
        checks: vec![
            Check::new("max |R|/bound", worst, Bound::AtMost(1.0)),
            Check::new("series oracle residual", residual, Bound::AtMost(1e-10)),
        ],
        table,
        extra: Map::new(),
        plot: None,
    })
}

fn normalisation_suite() -> qcglue::Result<SuiteOutput> {
    let mut table = Table::new(&["m", "s_m", "scaled_defect", "residual"]);
    let r = r0();
    let (mut sup, mut residual): (f64, f64) = (0.0, 0.0);
    let mut ms: Vec<u64> = log_space(10.0, 1000.0, 20).iter().map(|m| m.round() as u64).collect();
    ms.dedup();
    for m in ms {
        let n = (2 * m + 1) as f64;
        let s = solve_s_m(m);
        let scaled = n * (s - n.ln() - r + n.ln() / (2.0 * r * n)).abs();
        let res = series_log_hm_minus_1(2 * m + 1, s.exp()).exp_m1().abs();
        sup = sup.max(scaled);
        residual = residual.max(res);
        table.push(vec![m.to_string(), f(s), f(scaled), f(res)]);
    }
    let mut extra = Map::new();
    extra.insert("r0".into(), json!(r));
    Ok(SuiteOutput {
        checks: vec![
            Check::new("sup n*|expansion defect|", sup, Bound::AtMost(5.0)),
            Check::new("max |g_m(s_m) - 2|", residual, Bound::AtMost(1e-10)),
        ],
        table,
        extra,
        plot: None,
    })
}

fn transitions(ctx: &Context) -> Vec<(usize, PhiMap)> {
    let c = &ctx.glue;
    (1..=200.min(c.k_max() - 1))
        .filter_map(|k| {
            let (a, b) = (c.m(k), c.m(k + 1));
            (a != b).then(|| (k, PhiMap::new(ExpPartialSum::new(a.min(b)), ExpPartialSum::new(a.max(b)))))
        })
        .collect()
}

fn fixed_point_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let mut table = Table::new(&["k", "m", "M", "p", "asymptotic", "scaled_error"]);
    let (mut worst, mut below, mut above): (f64, f64, f64) = (0.0, f64::INFINITY, f64::INFINITY);
    for (k, phi) in transitions(ctx) {
        let n = phi.lower().n() as f64;
        let nn = phi.upper().n() as f64;
        let ratio = nn / n;
        let p = phi.p();
        let predicted = n.ln() + nn * ratio.ln() / (nn - n) - 1.0;
        let cap = ratio * ratio.ln() / (ratio - 1.0) - 1.0;
        let scaled = n * (p - predicted).abs();
        worst = worst.max(scaled);
        below = below.min(n * (p - n.ln()) + 10.0);
        above = above.min(n * (n.ln() + cap - p) + 10.0);
        table.push(vec![k.to_string(), phi.lower().m().to_string(), phi.upper().m().to_string(), f(p), f(predicted), f(scaled)]);
    }
    Ok(SuiteOutput {
        checks: vec![
            Check::new("max n*|p - asymptotic|", worst, Bound::AtMost(10.0)),
            Check::new("min n*(p - log n) + 10", below, Bound::AtLeast(0.0)),
            Check::new("min n*(log n + C log C/(C-1) - 1 - p) + 10", above, Bound::AtLeast(0.0)),
        ],
        table,
        extra: Map::new(),
        plot: None,
    })
}

fn transition_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let mut table = Table::new(&["k", "m", "M", "c1", "c3", "inf_phi_prime", "sup_phi_prime", "decay_checked"]);
    let mut nonpositive = 0;
    let (mut c1_all, mut c3_all, mut inf_all, mut sup_all) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for (k, phi) in transitions(ctx) {
        let n = phi.lower().n() as f64;
        let start = 8.0 * n.ln();
        let decay = start > phi.p();
        let (mut c1, mut c3, mut inf_p, mut sup_p) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
        if decay {
            for j in 1..=30 {
                let x = start + 0.5 * j as f64;
                let d = phi.offset(x);
                if !(d > 0.0) {
                    nonpositive += 1;
                }
                c1 = c1.max(d * (x / 2.0).exp());
            }
        }
        let s = phi.lower().s_m();
        for j in 1..=120 {
            c3 = c3.max(phi.offset(s + 0.5 * j as f64).abs());
        }
        for j in 0..=360 {
            let p = phi.prime(-60.0 + 0.5 * j as f64);
            inf_p = inf_p.min(p);
            sup_p = sup_p.max(p);
        }
        c1_all = c1_all.max(c1);
        c3_all = c3_all.max(c3);
        inf_all = inf_all.min(inf_p);
        sup_all = sup_all.max(sup_p);
        table.push(vec![
            k.to_string(),
            phi.lower().m().to_string(),
            phi.upper().m().to_string(),
            f(c1),
            f(c3),
            f(inf_p),
            f(sup_p),
            decay.to_string(),
        ]);
    }
    let mut extra = Map::new();
    extra.insert("c1".into(), json!(c1_all));
    extra.insert("c3".into(), json!(c3_all));
    Ok(SuiteOutput {
        checks: vec![
            Check::new("non-positive offsets beyond 8 log n", nonpositive as f64, Bound::AtMost(0.0)),
            Check::new("inf phi'", inf_all, Bound::AtLeast(0.01)),
            Check::new("sup phi'", sup_all, Bound::AtMost(100.0)),
        ],
        table,
        extra,
        plot: None,
    })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    log_difference(a, b).norm() / a.norm().max(1.0)
}

fn lv(v: qcglue::Result<MapValue>) -> qcglue::Result<Complex64> {
    v?.log_value().ok_or(qcglue::Error::ZeroValue)
}

fn seams_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let c = &ctx.glue;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let count = 1000;
    let right_k = (c.k_max() - 2).min(300);
    let left_k = (c.k_max() - 2).min(60);
    let r_max = c.max_radius(Variant::G0).min(c.max_radius(Variant::G1)).min(900.0);
    let mut table = Table::new(&["family", "points", "max_discrepancy"]);
    let mut checks = Vec::new();
    let mut family = |name: &str, worst: f64, table: &mut Table| {
        table.push(vec![name.to_string(), count.to_string(), f(worst)]);
        checks.push(Check::new(name, worst, Bound::AtMost(1e-8)));
    };

    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let k = rng.gen_range(1..=right_k);
        let w = Complex64::new(rng.gen_range(0.0..60.0), TWO_PI * k as f64);
        worst = worst.max(rel(lv(c.eval_u_in_strip(w, k))?, lv(c.eval_u_in_strip(w, k + 1))?));
    }
    family("right strip edges", worst, &mut table);

    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let k = rng.gen_range(1..=left_k);
        let w = Complex64::new(-rng.gen_range(0.0..2000.0), TWO_PI * c.partial_sum_n(k) as f64);
        worst = worst.max(rel(lv(c.eval_v_in_strip(w, k))?, lv(c.eval_v_in_strip(w, k + 1))?));
    }
    family("left strip edges", worst, &mut table);

    for v in [Variant::G0, Variant::G1] {
        let outer = |q: Complex64| match v {
            Variant::G0 => c.eval_u(q),
            Variant::G1 => c.eval_u1(q),
        };
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let w = Complex64::new(rng.gen_range(0.0..1.0), 1.0);
            let a = c.eval_q_piece(w, QPiece::Identity, v)?;
            let b = c.eval_q_piece(w, QPiece::Interp, v)?;
            worst = worst.max(rel(lv(outer(a))?, lv(outer(b))?));
        }
        family(&format!("{v} unit height of Q"), worst, &mut table);

        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let w = Complex64::from_polar(1.0, rng.gen_range(0.0..PI / 2.0));
            let a = c.eval_q_piece(w, QPiece::Power, v)?;
            let b = c.eval_q_piece(w, QPiece::Identity, v)?;
            worst = worst.max(rel(lv(outer(a))?, lv(outer(b))?));
        }
        family(&format!("{v} unit circle of Q"), worst, &mut table);

        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let z = Complex64::from_polar(rng.gen_range(0.0..r_max), PI / (2.0 * c.sigma()));
            worst = worst.max(rel(lv(c.eval_right_formula(z, v))?, lv(c.eval_left_formula(z, v))?));
        }
        family(&format!("{v} sector ray"), worst, &mut table);
    }

    for right in [true, false] {
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let x = rng.gen_range(0.0..30.0);
            let w = Complex64::new(if right { x } else { -x }, PI);
            let band = -(w + c.s0()).exp();
            let shifted = w - Complex64::new(0.0, PI);
            let outer = if right { lv(c.eval_u(shifted))? } else { lv(c.eval_v(shifted))? };
            worst = worst.max(rel(outer, band));
        }
        family(if right { "right band edge" } else { "left band edge" }, worst, &mut table);
    }

    let mut sym: f64 = 0.0;
    for _ in 0..count {
        let z = Complex64::from_polar(rng.gen_range(0.0..r_max), rng.gen_range(0.0..PI));
        for v in [Variant::G0, Variant::G1] {
            let a = lv(c.eval_g(z, v))?;
            let b = lv(c.eval_g(z.conj(), v))?;
            sym = sym.max((a.conj() - b).norm() / a.norm().max(1.0));
        }
    }
    table.push(vec!["conjugate symmetry".into(), count.to_string(), f(sym)]);
    checks.push(Check::new("conjugate symmetry", sym, Bound::AtMost(1e-12)));

    if ctx.sectors > 1 {
        let n = ctx.sectors;
        let r_top = r_max.powf(1.0 / n as f64);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let z = Complex64::from_polar(rng.gen_range(0.0..r_top), rng.gen_range(-PI..PI));
            let a = lv(c.eval_sector_power(z, n, Variant::G0))?;
            let b = lv(c.eval_g0(z.powu(n)))?;
            worst = worst.max(rel(a, b));
        }
        table.push(vec![format!("sector power N={n}"), count.to_string(), f(worst)]);
        checks.push(Check::new(format!("sector power N={n}"), worst, Bound::AtMost(1e-12)));
    }
    Ok(SuiteOutput { checks, table, extra: Map::new(), plot: None })
}

fn twb_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let c = &ctx.glue;
    let limit = c.max_radius(Variant::G0);
    let mut table = Table::new(&["annulus_lo", "annulus_hi", "integral", "richardson_err", "sup_K"]);
    let mut inc = Vec::new();
    for j in 0..10 {
        let lo = 2f64.powi(j);
        if 2.0 * lo > limit {
            break;
        }
        let a = twb_annulus_integral(c, Variant::G0, lo, 2.0 * lo, 64, 256)?;
        table.push(vec![f(a.annulus_lo), f(a.annulus_hi), f(a.integral), f(a.richardson_err), f(a.sup_k)]);
        inc.push(a.integral);
    }
    let positive = inc.iter().filter(|&&v| !(v > 0.0)).count();
    let tail = (inc.len().max(3) - 3..inc.len()).filter(|&j| j >= 3).map(|j| 0.5 * inc[j - 3] - inc[j]).fold(f64::INFINITY, f64::min);

    let delta = (c.gamma() - 1.0).min(1.0);
    let k_hi = (c.k_max() - 2).min(2048);
    let sk = (1..=k_hi).map(|k| strip_contribution(c, k)).collect::<qcglue::Result<Vec<f64>>>()?;
    let mut blocks = Vec::new();
    let mut lo = 8;
    while 2 * lo <= k_hi + 1 {
        blocks.push((lo as f64 * 2f64.sqrt(), sk[lo - 1..2 * lo - 1].iter().sum::<f64>() / lo as f64));
        lo *= 2;
    }
    let decay = fit_loglog(&blocks).map(|fit| -fit.0).unwrap_or(f64::NAN);
    let need = 1.0 + delta / 2.0;
    let mut extra = Map::new();
    extra.insert("decay_exponent".into(), json!(decay));
    extra.insert("required_exponent".into(), json!(need));
    extra.insert("s_k".into(), json!(sk));
    let plot = Plot {
        title: format!("dyadic increments, sigma = {}", c.sigma()),
        x_label: "annulus inner radius".into(),
        y_label: "integral of (K-1)/|z|^2".into(),
        log_x: true,
        log_y: true,
        series: vec![Series { name: "increment".into(), points: inc.iter().enumerate().map(|(j, &v)| (2f64.powi(j as i32), v)).collect() }],
    };
    Ok(SuiteOutput {
        checks: vec![
            Check::new("non-positive increments", positive as f64, Bound::AtMost(0.0)),
            Check::new("min over last three of half the increment three annuli earlier minus the increment", tail, Bound::AtLeast(0.0)),
            Check::new("S_k decay exponent", decay, Bound::AtLeast(need)),
        ],
        table,
        extra,
        plot: Some(plot),
    })
}

fn zeros_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let c = &ctx.glue;
    let rows = counting_table(c, Variant::G0, &ctx.grid)?;
    let mut table = Table::new(&["r", "count", "bound_4sum"]);
    let mut over = 0;
    for r in &rows {
        if r.count as u64 > r.bound_4sum {
            over += 1;
        }
        table.push(vec![f(r.r), r.count.to_string(), r.bound_4sum.to_string()]);
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.r, r.count as f64)).collect();
    let fit = fit_exponent(&pairs)?;
    let rho = c.rho();
    let mut extra = Map::new();
    extra.insert("slope".into(), json!(fit.slope));
    extra.insert("stderr".into(), json!(fit.stderr));
    extra.insert("target_rho".into(), json!(rho));
    let fitted: Vec<(f64, f64)> = ctx.grid.iter().map(|&r| (r, (fit.intercept + fit.slope * r.ln()).exp())).collect();
    let plot = Plot {
        title: format!("zero counting, sigma = {}", c.sigma()),
        x_label: "r".into(),
        y_label: "n(r)".into(),
        log_x: true,
        log_y: true,
        series: vec![Series { name: "count".into(), points: pairs }, Series { name: format!("fit, slope {:.3}", fit.slope), points: fitted }],
    };
    Ok(SuiteOutput {
        checks: vec![
            Check::new("fitted slope", fit.slope, Bound::Within(0.9 * rho, 1.1 * rho)),
            Check::new("counts above the level-sum bound", over as f64, Bound::AtMost(0.0)),
        ],
        table,
        extra,
        plot: Some(plot),
    })
}

fn growth_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let c = &ctx.glue;
    let (s, rho) = (c.sigma(), c.rho());
    let half = 0.5 * PI / (2.0 * s);
    let mut table = Table::new(&["r", "theta", "ratio"]);
    let mut series: Vec<Series> = ["theta = 0", "theta = +pi/(4 sigma)", "theta = -pi/(4 sigma)", "theta = pi"]
        .iter()
        .map(|n| Series { name: n.to_string(), points: Vec::new() })
        .collect();
    let mut last = Vec::new();
    for &r in &ctx.grid {
        let mut ratios = Vec::new();
        for th in [0.0, half, -half] {
            let l = lv(c.eval_g0(Complex64::from_polar(r, th)))?;
            ratios.push((th, l.norm().ln() / (r.powf(s) * (s * th).cos())));
        }
        // G0 − 1 underflows on the negative axis; read log(G0 − 1) off the real level function.
        let w = Complex64::new(-r.powf(rho), 0.0);
        let (k, _) = c.left_strip(0.0)?;
        let arg = c.v_argument_in_strip(w, k)?;
        ratios.push((PI, c.level(k).log_gm_minus_1(arg.re) / w.re));
        for (i, &(th, q)) in ratios.iter().enumerate() {
            table.push(vec![f(r), f(th), f(q)]);
            series[i].points.push((r, q));
        }
        last = ratios;
    }
    let r_top = ctx.grid.last().copied().unwrap_or(f64::NAN);
    let checks = last.iter().map(|&(th, q)| Check::new(format!("ratio at r = {r_top}, theta = {th:.6}"), q, Bound::Within(0.8, 1.2))).collect();
    let plot = Plot {
        title: format!("growth ratios, sigma = {s}"),
        x_label: "r".into(),
        y_label: "ratio".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(SuiteOutput { checks, table, extra: Map::new(), plot: Some(plot) })
}

fn operators_suite(ctx: &Context) -> qcglue::Result<SuiteOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x5eed);
    let mut table = Table::new(&["check", "case", "residual"]);
    let (mut mob, mut fact): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let j = JetSample { z: c(), f: c(), f1: c() + 1.5, f2: c(), f3: c() };
        let l = Mobius::new(c() + 2.0, c(), c() * 0.2, c() + 2.0)?;
        let s = schwarzian(&j)?;
        let a = (schwarzian(&l.compose(&j)?)? - s).norm();
        let b = (s - bank_laine_b_of_quotient(&j)? * 0.5).norm();
        mob = mob.max(a);
        fact = fact.max(b);
        table.push(vec!["mobius invariance".into(), i.to_string(), f(a)]);
        table.push(vec!["factorisation".into(), i.to_string(), f(b)]);
    }
    let mut ex2: f64 = 0.0;
    for d in 0..=3u32 {
        let func = move |z: Complex64| {
            let w = z.exp();
            let mut p = Complex64::new(1.0, 0.0);
            let mut term = Complex64::new(1.0, 0.0);
            for i in 1..=d {
                term *= -w / i as f64;
                p += term;
            }
            p * w.exp()
        };
        for i in 0..20 {
            let z = Complex64::from_polar(0.1 * i as f64, 0.7 * i as f64);
            let e = (schwarzian(&jet(func, z)?)? * 0.5 - example2_coefficient(d, z)).norm();
            ex2 = ex2.max(e);
            table.push(vec![format!("coefficient d={d}"), i.to_string(), f(e)]);
        }
    }
    let mut margin = f64::INFINITY;
    for th in log_space(1e-8, 0.99, 200) {
        margin = margin.min(two_constants_m(th)? - (1.0 - 4.0 / PI * th.sqrt()));
    }
    table.push(vec!["two constants".into(), "min margin".into(), f(margin)]);
    Ok(SuiteOutput {
        checks: vec![
            Check::new("Mobius invariance", mob, Bound::AtMost(1e-7)),
            Check::new("factorisation S(F) = B(F/F')/2", fact, Bound::AtMost(1e-7)),
            Check::new("coefficient against 2A = S(F)", ex2, Bound::AtMost(1e-6)),
            Check::new("two-constants lower bound margin", margin, Bound::AtLeast(0.0)),
        ],
        table,
        extra: Map::new(),
        plot: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_have_the_right_sign() {
        assert!(Check::new("a", 0.5, Bound::AtMost(1.0)).margin() > 0.0);
        assert!(Check::new("a", 2.0, Bound::AtMost(1.0)).margin() < 0.0);
        assert!(Check::new("a", 0.0, Bound::AtMost(0.0)).margin() >= 0.0);
        assert!(Check::new("a", 1.0, Bound::AtMost(0.0)).margin() < 0.0);
        assert!(Check::new("a", 1.5, Bound::Within(1.35, 1.65)).margin() > 0.0);
        assert!(Check::new("a", 1.7, Bound::Within(1.35, 1.65)).margin() < 0.0);
        assert!(Check::new("a", f64::NAN, Bound::AtLeast(0.0)).margin() < 0.0);
    }

    #[test]
    fn series_oracle_level_zero() {
        // h_0(y) − 1 = e^y − 1.
        for &y in &[0.1, 1.0, 7.0] {
            assert!((series_log_hm_minus_1(1, y) - (y as f64).exp_m1().ln()).abs() < 1e-13);
        }
    }
}
