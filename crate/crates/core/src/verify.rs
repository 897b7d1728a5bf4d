//! Acceptance suite A1-A15: closed-form cross-checks, deterministic
//! quadrature oracles for the Monte Carlo estimators, and property sweeps.
//!
//! Each criterion records its sub-checks with the measured quantity and the
//! limit it was held to, plus the wall time against its budget.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics::{limit_coefficient, oracle_limit, series_growth_limit, stirling_companion, AsymMode, Oracle};
use crate::bounds::{best_gaussian_lower_bound, lower_bound_pth_moment, optimal_rate_constants, TrialH};
use crate::chaos::{c_mu, chaos_norms, doubleexp_check, fn_norm_sq, p_moment_upper, t_n, StepFunction};
use crate::classify::{classify_noise, critical_time, GridNoise, Regime};
use crate::error::Result;
use crate::kernel::{fourier_green, fourier_green_integral, laplace_quadrature, laplace_symbol, mittag_leffler};
use crate::mc::{McConfig, DEFAULT_SEED};
use crate::model::{EquationParams, NoiseSpec};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};
use crate::special::ln_gamma;
use crate::variational::{estimate_m_direct, m_white_1d, OptConfig, TrialFamily, VariationalNoise};

/// One measured quantity and the bound it must respect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCheck {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<SubCheck>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionReport {
    /// Names of the failed sub-checks (including the time budget).
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        if self.seconds > self.budget_seconds {
            out.push("time budget".into());
        }
        out
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{} {status} {} ({} checks, {:.2}s of {:.0}s)",
            self.id,
            self.title,
            self.checks.len(),
            self.seconds,
            self.budget_seconds
        );
        for f in self.failures() {
            match self.checks.iter().find(|c| c.name == f) {
                Some(c) => s.push_str(&format!("; failed {}: {:.6e} vs limit {:.6e}", c.name, c.measured, c.limit)),
                None => s.push_str(&format!("; failed {f}")),
            }
        }
        s
    }
}

/// Collects sub-checks for one criterion.
pub struct Checks {
    pub seed: u64,
    items: Vec<SubCheck>,
}

impl Checks {
    fn new(seed: u64) -> Self {
        Checks { seed, items: Vec::new() }
    }

    fn at_most(&mut self, name: impl Into<String>, measured: f64, limit: f64) {
        self.items.push(SubCheck { name: name.into(), passed: measured <= limit, measured, limit });
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool, measured: f64) {
        self.items.push(SubCheck { name: name.into(), passed: ok, measured, limit: f64::NAN });
    }

    /// Largest relative error over a sweep, recorded as one sub-check.
    fn worst_relative(&mut self, name: impl Into<String>, pairs: &[(f64, f64)], limit: f64) {
        let worst = pairs.iter().map(|&(x, y)| rel(x, y)).fold(0.0, f64::max);
        self.at_most(name, worst, limit);
    }

    fn error(&mut self, name: &str, e: crate::error::Error) {
        self.items.push(SubCheck { name: format!("{name}: {e}"), passed: false, measured: f64::NAN, limit: f64::NAN });
    }
}

fn rel(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
    }
}

pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    pub budget_seconds: f64,
    run: fn(&mut Checks) -> Result<()>,
}

pub const CRITERIA: [Criterion; 15] = [
    Criterion { id: "A1", title: "heat 1-d white limit coefficient", budget_seconds: 1.0, run: a1 },
    Criterion { id: "A2", title: "wave 1-d and 2-d limit coefficients", budget_seconds: 1.0, run: a2 },
    Criterion { id: "A3", title: "critical time, b = 2/3 white", budget_seconds: 1.0, run: a3 },
    Criterion { id: "A4", title: "Mittag-Leffler elementary identities", budget_seconds: 5.0, run: a4 },
    Criterion { id: "A5", title: "Laplace identity of the kernel", budget_seconds: 30.0, run: a5 },
    Criterion { id: "A6", title: "kernel scaling and Gamma identity", budget_seconds: 60.0, run: a6 },
    Criterion { id: "A7", title: "chaos estimators vs quadrature", budget_seconds: 60.0, run: a7 },
    Criterion { id: "A8", title: "variational optimizer, a = 2, d = 1 white", budget_seconds: 60.0, run: a8 },
    Criterion { id: "A9", title: "critical time bracket, d = 2 white", budget_seconds: 120.0, run: a9 },
    Criterion { id: "A10", title: "phase diagram sample points", budget_seconds: 1.0, run: a10 },
    Criterion { id: "A11", title: "series growth limits", budget_seconds: 10.0, run: a11 },
    Criterion { id: "A12", title: "growth trend of T_n", budget_seconds: 180.0, run: a12 },
    Criterion { id: "A13", title: "noise conventions", budget_seconds: 30.0, run: a13 },
    Criterion { id: "A14", title: "lower and upper moment bounds", budget_seconds: 120.0, run: a14 },
    Criterion { id: "A15", title: "double-exponential inequality", budget_seconds: 5.0, run: a15 },
];

pub fn find_criterion(id: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id.eq_ignore_ascii_case(id))
}

pub fn run_criterion(c: &Criterion, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut checks = Checks::new(seed);
    if let Err(e) = (c.run)(&mut checks) {
        checks.error("aborted", e);
    }
    let seconds = start.elapsed().as_secs_f64();
    let passed = checks.items.iter().all(|s| s.passed) && !checks.items.is_empty() && seconds <= c.budget_seconds;
    CriterionReport { id: c.id, title: c.title, passed, checks: checks.items, seconds, budget_seconds: c.budget_seconds }
}

pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|c| run_criterion(c, seed)).collect()
}

pub fn default_seed() -> u64 {
    DEFAULT_SEED
}

const GRID3: [f64; 3] = [0.5, 1.0, 2.0];

fn a1(ck: &mut Checks) -> Result<()> {
    let m = m_white_1d();
    let mut pairs = Vec::new();
    for p in [2.0, 3.0, 5.0] {
        for theta in GRID3 {
            for nu in GRID3 {
                let params = EquationParams::new(2.0, 1.0, 0.0, nu, theta, 1)?;
                let got = limit_coefficient(&params, 1.0, m, AsymMode::FixedP(p))?;
                pairs.push((got, p * (p - 1.0).powi(2) * theta * theta / (24.0 * nu)));
            }
        }
    }
    ck.worst_relative("fixed-p coefficient vs p(p-1)^2 theta^2/(24 nu)", &pairs, 1e-12);
    Ok(())
}

fn a2(ck: &mut Checks) -> Result<()> {
    let m = m_white_1d();
    let mut pairs = Vec::new();
    let mut pairs2 = Vec::new();
    for p in [2.0, 3.0, 5.0] {
        for theta in GRID3 {
            for nu in GRID3 {
                let params = EquationParams::wave_limit(2.0, 0.0, nu, theta, 1)?;
                let got = limit_coefficient(&params, 1.0, m, AsymMode::FixedP(p))?;
                pairs.push((got, p * (p - 1.0).sqrt() * theta.sqrt() / (3.0 * (2.0 * nu).powf(0.25))));
                let plane = EquationParams::wave_limit(2.0, 0.0, nu, theta, 2)?;
                for m_hat in [0.05, 0.0852, 0.3, 1.7] {
                    let got = limit_coefficient(&plane, 2.0, m_hat, AsymMode::FixedP(p))?;
                    pairs2.push((got, oracle_limit(Oracle::SWE2d, &plane, 2.0, m_hat, AsymMode::FixedP(p))?));
                }
            }
        }
    }
    ck.worst_relative("1-d fixed-p coefficient vs closed form", &pairs, 1e-12);
    ck.worst_relative("2-d fixed-p coefficient vs closed form in M", &pairs2, 1e-12);
    Ok(())
}

fn a3(ck: &mut Checks) -> Result<()> {
    let m = m_white_1d();
    let mut pairs = Vec::new();
    for p in [2.0, 3.0, 5.0] {
        for theta in GRID3 {
            for nu in GRID3 {
                let params = EquationParams::new(2.0, 2.0 / 3.0, 0.0, nu, theta, 1)?;
                let got = critical_time(&params, &GridNoise::Spec(NoiseSpec::white_1d()), p, m)?;
                pairs.push((got, 2f64.powf(2.5) * nu.sqrt() / (3.0 * (p - 1.0) * theta)));
            }
        }
    }
    ck.worst_relative("critical time vs 2^{5/2} sqrt(nu)/(3(p-1)theta)", &pairs, 1e-12);
    Ok(())
}

fn a4(ck: &mut Checks) -> Result<()> {
    // step 0.1 keeps every sample away from exact zeros of cos and sin
    let xs: Vec<f64> = (0..=300).map(|k| 0.1 * k as f64).collect();
    let mut exp1 = Vec::new();
    let mut cos1 = Vec::new();
    let mut exp2 = Vec::new();
    let mut sinc = Vec::new();
    for &x in &xs {
        exp1.push((mittag_leffler(1.0, 1.0, -x)?, (-x).exp()));
        cos1.push((mittag_leffler(2.0, 1.0, -x * x)?, x.cos()));
        let e12 = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
        exp2.push((mittag_leffler(1.0, 2.0, -x)?, e12));
        sinc.push((mittag_leffler(2.0, 2.0, -x * x)?, if x == 0.0 { 1.0 } else { x.sin() / x }));
    }
    ck.worst_relative("E_{1,1}(-x) vs exp(-x)", &exp1, 1e-10);
    ck.worst_relative("E_{2,1}(-x^2) vs cos x", &cos1, 1e-10);
    ck.worst_relative("E_{1,2}(-x) vs (1-exp(-x))/x", &exp2, 1e-10);
    ck.worst_relative("E_{2,2}(-x^2) vs sin x / x", &sinc, 1e-10);
    Ok(())
}

fn a5(ck: &mut Checks) -> Result<()> {
    let mut pairs = Vec::new();
    for a in [1.0, 1.5, 2.0] {
        for (b, r) in [(0.4, 0.1), (0.7, 0.3), (1.2, 0.3)] {
            let params = EquationParams::new(a, b, r, 2.0, 1.0, 1)?;
            for rho in [0.5, 1.0, 2.0] {
                pairs.push((laplace_quadrature(&params, rho)?, laplace_symbol(&params, rho)));
            }
        }
    }
    ck.worst_relative("Laplace transform at 1 vs 1/(1+(nu/2)rho^a), 27 points", &pairs, 1e-6);
    Ok(())
}

/// ‖f̃_1(·,0,t)‖² = ∫ (∫_0^t FG(s,|ξ|) ds)² μ(dξ), by radial quadrature.
pub fn first_norm_quadrature(params: &EquationParams, spec: &NoiseSpec, t: f64) -> Result<f64> {
    let alpha = spec.alpha();
    let knee = (params.lambda() * t.powf(params.b)).powf(-1.0 / params.a);
    let f = |v: f64| {
        // R = v^{1/α} absorbs R^{α-1}
        let rr = v.powf(1.0 / alpha);
        let g = fourier_green_integral(params, t, rr).unwrap_or(f64::NAN);
        g * g / alpha
    };
    let kv = knee.powf(alpha);
    let res = integrate_to_infinity(f, 0.0, &[kv, 10.0 * kv], Tolerance::rel(1e-12))?;
    Ok(spec.radial_mass() * res.value)
}

fn a6(ck: &mut Checks) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ck.seed);
    let mut freq = Vec::new();
    let mut time = Vec::new();
    for _ in 0..100 {
        let a = rng.gen_range(0.6..2.0);
        let b = rng.gen_range(0.3..1.9);
        let r = rng.gen_range(0.0..1.0);
        let nu = rng.gen_range(0.5..3.0);
        let t = rng.gen_range(0.05..3.0);
        let rho = rng.gen_range(0.05..3.0);
        let c: f64 = rng.gen_range(0.3..3.0);
        let params = EquationParams::new(a, b, r, nu, 1.0, 1)?;
        freq.push((
            fourier_green(&params, t, c * rho)?,
            c.powf(-(a / b) * (b + r - 1.0)) * fourier_green(&params, c.powf(a / b) * t, rho)?,
        ));
        time.push((fourier_green(&params, c * t, rho)?, c.powf(b + r - 1.0) * fourier_green(&params, t, c.powf(b / a) * rho)?));
    }
    ck.worst_relative("frequency scaling, 100 random points", &freq, 1e-9);
    ck.worst_relative("time scaling, 100 random points", &time, 1e-9);

    let cases = [
        (EquationParams::heat(2.0, 1.0, 1)?, NoiseSpec::white_1d()),
        (EquationParams::new(1.5, 0.8, 0.1, 1.0, 1.0, 1)?, NoiseSpec::riesz_isotropic(1, 0.5)?),
    ];
    for (i, (params, spec)) in cases.iter().enumerate() {
        let kappa = params.kappa(spec.alpha());
        let at_one = first_norm_quadrature(params, spec, 1.0)?;
        let inner = |t: f64| if t == 0.0 { 0.0 } else { (-t).exp() * first_norm_quadrature(params, spec, t).unwrap_or(f64::NAN) };
        let lhs = integrate_to_infinity(inner, 0.0, &[1.0, 5.0, 20.0], Tolerance::rel(1e-9))?.value;
        let rhs = ln_gamma(kappa + 1.0).exp() * at_one;
        ck.at_most(format!("case {i}: Laplace of first norm vs Gamma(kappa+1) norm at 1"), rel(lhs, rhs), 1e-4);
        let mc = fn_norm_sq(params, spec, 1, &McConfig::with_samples(40_000, ck.seed))?;
        ck.at_most(format!("case {i}: Monte Carlo first norm within 3 std errors"), mc.z_distance(at_one, 0.0), 3.0);
    }
    Ok(())
}

fn white_pair_integral<F: Fn(f64, f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    // μ⊗μ for 1-d white noise; the integrand is even under (ξ1, ξ2) ↦ -(ξ1, ξ2)
    let outer = |x1: f64| {
        let inner = |x2: f64| f(x1, x2);
        let lo = integrate_to_infinity(|u| inner(-u), 0.0, &[x1, 1.0], Tolerance::rel(tol * 0.01));
        let hi = integrate_to_infinity(&inner, 0.0, &[1.0], Tolerance::rel(tol * 0.01));
        match (lo, hi) {
            (Ok(l), Ok(h)) => l.value + h.value,
            _ => f64::NAN,
        }
    };
    let res = integrate_to_infinity(outer, 0.0, &[1.0], Tolerance::rel(tol))?;
    Ok(2.0 * res.value / (4.0 * PI * PI))
}

/// T_2 for 1-d white noise by two-dimensional quadrature.
pub fn t2_white_quadrature(params: &EquationParams) -> Result<f64> {
    let g = |x: f64| laplace_symbol(params, x.abs());
    white_pair_integral(|x1, x2| (g(x1 + x2) * (g(x1) + g(x2))).powi(2), 1e-8)
}

/// ‖f̃_2(·,0,1)‖² for 1-d white noise: the time integral of each ordering
/// is ∫_0^1 FG(1-u, |ξ1+ξ2|) ∫_0^u FG(s, |ξ_first|) ds du.
pub fn second_norm_white_quadrature(params: &EquationParams) -> Result<f64> {
    let ordered = |first: f64, total: f64| {
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            fourier_green(params, 1.0 - u, total).unwrap_or(f64::NAN) * fourier_green_integral(params, u, first).unwrap_or(f64::NAN)
        };
        integrate(f, 0.0, 1.0, &[], Tolerance::rel(1e-11)).map(|r| r.value).unwrap_or(f64::NAN)
    };
    white_pair_integral(
        |x1, x2| {
            let total = (x1 + x2).abs();
            let h = ordered(x1.abs(), total) + ordered(x2.abs(), total);
            0.25 * h * h
        },
        1e-7,
    )
}

fn a7(ck: &mut Checks) -> Result<()> {
    let params = EquationParams::heat(2.0, 1.0, 1)?;
    let spec = NoiseSpec::white_1d();
    let mc = McConfig::with_samples(40_000, ck.seed);
    let cmu = c_mu(&params, &spec)?;

    let t1 = t_n(&params, &spec, 1, &mc)?;
    ck.at_most("T_1 equals C_mu", rel(t1.value, cmu), 1e-15);
    let t2 = t_n(&params, &spec, 2, &mc)?;
    let t2q = t2_white_quadrature(&params)?;
    ck.at_most("T_2 Monte Carlo vs quadrature (std errors)", t2.z_distance(t2q, 0.0), 3.0);

    let f1 = fn_norm_sq(&params, &spec, 1, &mc)?;
    let f1q = first_norm_quadrature(&params, &spec, 1.0)?;
    let closed = integrate_to_infinity(|x: f64| if x == 0.0 { 1.0 } else { (-(-x * x).exp_m1() / (x * x)).powi(2) }, 0.0, &[1.0], Tolerance::rel(1e-12))?.value / PI;
    ck.at_most("first norm quadrature vs direct heat integral", rel(f1q, closed), 1e-9);
    ck.at_most("first norm Monte Carlo vs quadrature (std errors)", f1.z_distance(f1q, 0.0), 3.0);
    let f2 = fn_norm_sq(&params, &spec, 2, &mc)?;
    let f2q = second_norm_white_quadrature(&params)?;
    ck.at_most("second norm Monte Carlo vs quadrature (std errors)", f2.z_distance(f2q, 0.0), 3.0);

    let mut worst = f64::NEG_INFINITY;
    for n in 1..=5 {
        let e = t_n(&params, &spec, n, &McConfig { seed: ck.seed.wrapping_add(n as u64), samples: 10_000, ..mc })?;
        let cap = (2.0 * ln_gamma(n as f64 + 1.0) + n as f64 * cmu.ln()).exp();
        worst = worst.max(e.value / cap);
    }
    ck.at_most("max_n T_n / ((n!)^2 C_mu^n)", worst, 1.0);
    Ok(())
}

fn spline() -> TrialFamily {
    TrialFamily::RadialSpline { q_min: 1.0, q_max: 4.0, knots: 4 }
}

fn a8(ck: &mut Checks) -> Result<()> {
    let est = estimate_m_direct(2.0, &VariationalNoise::White { d: 1 }, &spline(), &OptConfig::default())?;
    let target = 0.412_740_9;
    ck.at_most("M lower end (0.995 of the exact value)", 0.995 * target - est.value.value, 0.0);
    ck.at_most("M upper end (exact value + 1e-3)", est.value.value - (target + 1e-3), 0.0);
    ck.holds("estimated M", true, est.value.value);
    Ok(())
}

fn a9(ck: &mut Checks) -> Result<()> {
    let est = estimate_m_direct(2.0, &VariationalNoise::White { d: 2 }, &spline(), &OptConfig::default())?;
    let params = EquationParams::heat(1.0, 1.0, 2)?;
    let t2 = critical_time(&params, &GridNoise::WhiteLimit { d: 2 }, 2.0, est.value.value)?;
    ck.at_most("T_2 - 2pi", t2 - 2.0 * PI, 0.0);
    ck.at_most("2 - T_2", 2.0 - t2, 0.0);
    ck.holds("T_2 = 1/(2M)", rel(t2, 0.5 / est.value.value) < 1e-12, t2);
    Ok(())
}

fn a10(ck: &mut Checks) -> Result<()> {
    let heat = |d: usize| EquationParams::new(2.0, 1.0, 0.0, 1.0, 1.0, d);
    let stable = |a: f64, d: usize| EquationParams::new(a, 1.0, 0.0, 1.0, 1.0, d);
    let riesz = |d: usize, alpha: f64| NoiseSpec::riesz_isotropic(d, alpha).map(GridNoise::Spec);
    let white = GridNoise::Spec(NoiseSpec::white_1d());
    let points: Vec<(&str, EquationParams, GridNoise, Regime)> = vec![
        ("heat (0.5, 1)", heat(1)?, riesz(1, 0.5)?, Regime::GlobalLp),
        ("heat (1, 1) white", heat(1)?, white.clone(), Regime::GlobalBoundaryWhite1D),
        ("heat (1.5, 2)", heat(2)?, riesz(2, 1.5)?, Regime::GlobalLp),
        ("heat (2, 2) white", heat(2)?, GridNoise::WhiteLimit { d: 2 }, Regime::LocalLp),
        ("heat (1.9, 4)", heat(4)?, riesz(4, 1.9)?, Regime::GlobalLp),
        ("heat (2, 3)", heat(3)?, riesz(3, 2.0)?, Regime::LocalLp),
        ("heat (2.5, 3)", heat(3)?, riesz(3, 2.5)?, Regime::NoL2PerFigures),
        ("heat (3, 5)", heat(5)?, riesz(5, 3.0)?, Regime::NoL2PerFigures),
        ("stable a=1/2 (0.5, 1)", stable(0.5, 1)?, riesz(1, 0.5)?, Regime::LocalLp),
        ("stable a=1 (1, 1) white", stable(1.0, 1)?, white, Regime::LocalLp),
        ("stable a=1 (0.5, 2)", stable(1.0, 2)?, riesz(2, 0.5)?, Regime::GlobalLp),
        ("stable a=3/2 (2.5, 3)", stable(1.5, 3)?, riesz(3, 2.5)?, Regime::NoL2PerFigures),
    ];
    for (name, params, noise, want) in points {
        let got = classify_noise(&params, &noise)?.regime;
        ck.holds(format!("{name}: {} (expected {})", got.name(), want.name()), got == want, f64::NAN);
    }
    Ok(())
}

/// Sub-checks of A11 that cannot be met at the stated tolerance; see the
/// error analysis in the README.
pub const KNOWN_UNATTAINABLE: [&str; 1] = ["Stirling companion at n = 200, a = 1.5 (relative)"];

fn a11(ck: &mut Checks) -> Result<()> {
    let mut worst = 0.0f64;
    for t in [10.0, 1e3, 1e6] {
        worst = worst.max((series_growth_limit(1.0, t)? - 1.0).abs());
    }
    ck.at_most("gamma = 1 growth limit equals 1 (floating-point rounding)", worst, 1e-12);
    for g in [0.5, 2.0] {
        let v = series_growth_limit(g, 1e6)?;
        ck.at_most(format!("gamma = {g} growth limit at t = 1e6 (relative)"), rel(v, g), 0.02);
    }
    let a: f64 = 1.5;
    let v = stirling_companion(a, 200)?;
    ck.at_most(KNOWN_UNATTAINABLE[0], rel(v, a * a.ln()), 0.01);
    Ok(())
}

fn a12(ck: &mut Checks) -> Result<()> {
    let params = EquationParams::heat(2.0, 1.0, 1)?;
    let spec = NoiseSpec::white_1d();
    let ln_cmu = c_mu(&params, &spec)?.ln();
    ck.at_most("log C_mu vs log(1/4)", (ln_cmu - 0.25f64.ln()).abs(), 1e-12);
    let mut excess = f64::NEG_INFINITY;
    let mut last = f64::NAN;
    for n in 1..=6usize {
        let cfg = McConfig { seed: ck.seed.wrapping_add(n as u64), ..McConfig::with_samples(40_000, ck.seed) };
        let e = t_n(&params, &spec, n, &cfg)?;
        let nf = n as f64;
        let a_n = (e.value.ln() - 2.0 * ln_gamma(nf + 1.0)) / nf;
        let sigma = e.std_err / (nf * e.value);
        excess = excess.max((a_n - ln_cmu) / sigma.max(f64::MIN_POSITIVE));
        last = a_n;
    }
    ck.at_most("|a_6 - log(3/16)|", (last - (3.0f64 / 16.0).ln()).abs(), 0.4);
    ck.at_most("max_n (a_n - log C_mu) in std errors", excess, 3.0);
    Ok(())
}

/// ∫∫ f(x) f(y) γ(x - y) dx dy for f(x) = exp(-x²/(2s²)) in d = 1, from the
/// real-space side: ∫ γ(z) √π s exp(-z²/(4s²)) dz.
pub fn gaussian_covariance_real(spec: &NoiseSpec, s: f64) -> Result<f64> {
    if spec.is_white() {
        return Ok(PI.sqrt() * s);
    }
    let alpha = spec.alpha();
    // z = v^{1/(1-α)} turns z^{-α} dz into dv/(1-α)
    let e = 1.0 / (1.0 - alpha);
    let f = |v: f64| {
        if v == 0.0 {
            return e * PI.sqrt() * s * spec.gamma_eval(&[1.0]).unwrap_or(f64::NAN);
        }
        let z = v.powf(e);
        let gz = spec.gamma_eval(&[z]).unwrap_or(f64::NAN);
        e * v.powf(e * alpha) * gz * PI.sqrt() * s * (-z * z / (4.0 * s * s)).exp()
    };
    Ok(2.0 * integrate_to_infinity(f, 0.0, &[(2.0 * s).powf(1.0 / e)], Tolerance::rel(1e-12))?.value)
}

/// The same quantity from the spectral side, ∫ |Ff(ξ)|² φ(ξ) dξ.
pub fn gaussian_covariance_spectral(spec: &NoiseSpec, s: f64) -> Result<f64> {
    let alpha = spec.alpha();
    // ξ = v^{1/α} turns ξ^{α-1} dξ into dv/α
    let f = |v: f64| {
        if v == 0.0 {
            return 0.0;
        }
        let xi = v.powf(1.0 / alpha);
        let phi = spec.phi_eval(&[xi]).unwrap_or(f64::NAN);
        2.0 * PI * s * s * (-s * s * xi * xi).exp() * phi * xi.powf(1.0 - alpha) / alpha
    };
    Ok(2.0 * integrate_to_infinity(f, 0.0, &[(1.0 / s).powf(alpha)], Tolerance::rel(1e-12))?.value)
}

/// (K * K)(x) at x = 1 in d = 1, with the endpoint singularities removed by
/// y = u⁴ substitutions.
pub fn kernel_self_convolution_at_one(spec: &NoiseSpec) -> Result<f64> {
    let k = |y: f64| spec.k_kernel_eval(&[y]).unwrap_or(f64::NAN);
    let near = |u: f64| if u == 0.0 { 0.0 } else { 4.0 * u.powi(3) * k(u.powi(4)) * k(1.0 - u.powi(4)) };
    let middle = integrate(near, 0.0, 0.5f64.powf(0.25), &[], Tolerance::rel(1e-10))?.value;
    let far = |u: f64| if u == 0.0 { 0.0 } else { 4.0 * u.powi(3) * k(1.0 + u.powi(4)) * k(-u.powi(4)) };
    let outside = integrate_to_infinity(far, 0.0, &[1.0], Tolerance::rel(1e-10))?.value;
    Ok(2.0 * (middle + outside))
}

fn a13(ck: &mut Checks) -> Result<()> {
    let mut specs = vec![NoiseSpec::white_1d()];
    for alpha in [0.3, 0.5, 0.7] {
        specs.push(NoiseSpec::riesz_isotropic(1, alpha)?);
    }
    let mut pairs = Vec::new();
    for spec in &specs {
        for s in [0.4, 1.0, 2.5] {
            pairs.push((gaussian_covariance_spectral(spec, s)?, gaussian_covariance_real(spec, s)?));
            let trial = TrialH::gaussian(spec, 1.0, s)?;
            pairs.push((trial.h_norm_sq, gaussian_covariance_real(spec, s)?));
        }
    }
    ck.worst_relative("Gaussian covariance, spectral vs real side", &pairs, 1e-6);
    let spec = NoiseSpec::riesz_isotropic(1, 0.5)?;
    let kk = kernel_self_convolution_at_one(&spec)?;
    ck.at_most("(K*K)(1) vs gamma(1), alpha = 0.5", rel(kk, spec.gamma_eval(&[1.0])?), 1e-2);
    let mut weak = Vec::new();
    for spec in [NoiseSpec::riesz_isotropic(1, 0.5)?, NoiseSpec::riesz_isotropic(2, 1.2)?, NoiseSpec::riesz(&[(1, 0.3), (2, 0.8)])?] {
        let k = spec.weak_norm_phi()?;
        for radius in [0.01, 0.5, 1.0, 7.0, 300.0] {
            weak.push((spec.weak_norm_at_radius(radius)?, k));
        }
    }
    ck.worst_relative("weak-norm ratio independent of radius", &weak, 1e-10);
    Ok(())
}

fn a14(ck: &mut Checks) -> Result<()> {
    let cases = [
        (EquationParams::heat(2.0, 1.0, 1)?, NoiseSpec::white_1d(), 2.0, 1.0),
        (EquationParams::heat(2.0, 1.0, 1)?, NoiseSpec::white_1d(), 3.0, 0.5),
        (EquationParams::new(1.5, 1.0, 0.0, 1.0, 1.0, 1)?, NoiseSpec::riesz_isotropic(1, 0.5)?, 2.0, 1.0),
        (EquationParams::new(2.0, 1.0, 0.0, 2.0, 1.0, 2)?, NoiseSpec::riesz_isotropic(2, 1.0)?, 2.0, 0.5),
        (EquationParams::new(2.0, 0.8, 0.2, 1.0, 1.0, 1)?, NoiseSpec::white_1d(), 2.0, 0.7),
    ];
    for (i, (params, spec, p, t)) in cases.iter().enumerate() {
        let low = best_gaussian_lower_bound(params, spec, *p, *t, 4, &McConfig::with_samples(4_000, ck.seed))?;
        let norms = chaos_norms(params, spec, 5, &McConfig::with_samples(6_000, ck.seed.wrapping_add(97)))?;
        let up = p_moment_upper(params, spec, *p, *t, &norms)?;
        // the upper bound uses the norm estimates at face value; allow three
        // combined standard errors of the lower bound
        ck.at_most(
            format!("case {i}: (lower - upper) / std error of lower (p = {p}, t = {t})"),
            (low.value - up.value) / low.std_err.max(f64::MIN_POSITIVE),
            3.0,
        );
        ck.holds(format!("case {i}: lower bound >= 1"), low.value >= 1.0 - 3.0 * low.std_err, low.value);
    }
    let spec = NoiseSpec::white_1d();
    let zero = lower_bound_pth_moment(&cases[0].0, &spec, 2.0, 1.0, &TrialH::zero(&spec), 4, &McConfig::default())?;
    ck.holds("zero trial gives exactly 1", zero.value == 1.0, zero.value);
    let mut worst = 0.0f64;
    for (params, alpha) in [
        (EquationParams::heat(1.0, 1.0, 1)?, 1.0),
        (EquationParams::new(1.5, 0.8, 0.3, 2.0, 1.0, 2)?, 1.2),
        (EquationParams::wave_limit(2.0, 0.0, 0.7, 1.0, 1)?, 1.0),
    ] {
        for (m, theta) in [(m_white_1d(), 1.0), (0.2, 3.0), (1.3, 0.4)] {
            let rc = optimal_rate_constants(&params, alpha, m, theta)?;
            let direct = limit_coefficient(&params.clone().with_theta(theta), alpha, m, AsymMode::General)?;
            worst = worst.max(rel(rc.h_value, direct));
        }
    }
    ck.at_most("h(k*) vs general limit coefficient", worst, 1e-12);
    Ok(())
}

fn a15(ck: &mut Checks) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ck.seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.gen_range(1..12);
        let mut breaks = vec![0.0];
        let mut values = vec![rng.gen_range(0.0..2.0)];
        for _ in 1..k {
            breaks.push(breaks.last().unwrap() + rng.gen_range(0.01..2.0));
            values.push(values.last().unwrap() + rng.gen_range(0.0..3.0));
        }
        let (lhs, rhs) = doubleexp_check(&StepFunction { breaks, values })?;
        worst = worst.max((lhs - rhs) / rhs.max(f64::MIN_POSITIVE));
    }
    ck.at_most("max (lhs - rhs)/rhs over 1000 staircases", worst, 1e-14);
    let mut gap = 0.0f64;
    for c in [0.0, 0.3, 1.0, 17.0] {
        let (lhs, rhs) = doubleexp_check(&StepFunction { breaks: vec![0.0], values: vec![c] })?;
        gap = gap.max((lhs - rhs).abs() / rhs.max(1.0));
    }
    ck.at_most("equality for constant H", gap, 1e-14);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        for id in ["A1", "A2", "A3", "A4", "A10", "A15"] {
            let r = run_criterion(find_criterion(id).unwrap(), default_seed());
            assert!(r.passed, "{}", r.line());
        }
    }

    #[test]
    fn report_line_names_failures() {
        let r = CriterionReport {
            id: "X",
            title: "demo",
            passed: false,
            checks: vec![SubCheck { name: "gap".into(), passed: false, measured: 2.0, limit: 1.0 }],
            seconds: 0.1,
            budget_seconds: 1.0,
        };
        assert!(r.line().starts_with("X FAIL demo"));
        assert!(r.line().contains("failed gap"));
    }
}
