//! Exact moment-asymptotics coefficients, their white-noise specializations
//! coded as independent oracles, and numeric growth limits.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::chaos::{second_moment_from_norms, ChaosNormSeq};
use crate::error::{Error, Result};
use crate::model::{EquationParams, NoiseSpec};
use crate::quad::{integrate, Tolerance};
use crate::special::{ln_gamma, log_sum_exp};
use crate::variational::rho_from_m;

/// Which limit the coefficient describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AsymMode {
    /// lim t_p^{-β} log ‖u(t,x)‖_p
    General,
    /// lim_{t→∞} t^{-β} log E|u|^p at fixed p
    FixedP(f64),
    /// lim_{p→∞} p^{-β} log E|u|^p at fixed t
    FixedT(f64),
}

impl AsymMode {
    pub fn name(&self) -> &'static str {
        match self {
            AsymMode::General => "general",
            AsymMode::FixedP(_) => "fixed_p",
            AsymMode::FixedT(_) => "fixed_t",
        }
    }
}

fn subcritical_kappa(params: &EquationParams, alpha: f64) -> Result<f64> {
    let kappa = params.kappa(alpha);
    if !(kappa > 1.0) {
        return Err(Error::CriticalOrSupercritical(kappa - 1.0));
    }
    Ok(kappa)
}

/// (β, t_p) with β = κ/(κ-1) and t_p = (p-1)^{1-1/β} t.
pub fn beta_and_tp(params: &EquationParams, alpha: f64, p: f64, t: f64) -> Result<(f64, f64)> {
    let kappa = subcritical_kappa(params, alpha)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidParams(format!("moment order p = {p} must be >= 1")));
    }
    let beta = kappa / (kappa - 1.0);
    Ok((beta, (p - 1.0).powf(1.0 - 1.0 / beta) * t))
}

/// Limit coefficient from the general formula, evaluated in log space.
pub fn limit_coefficient(params: &EquationParams, alpha: f64, m: f64, mode: AsymMode) -> Result<f64> {
    let kappa = subcritical_kappa(params, alpha)?;
    if !(m > 0.0) {
        return Err(Error::InvalidParams(format!("variational constant M = {m} must be > 0")));
    }
    let (a, b, r) = (params.a, params.b, params.r);
    let beta = kappa / (kappa - 1.0);
    let lead = 2.0 * a * (b + r) - b * alpha;
    let ln_base = params.theta.ln() - (alpha / a) * params.nu.ln() + ((2.0 * a - alpha) / a) * m.ln();
    let mut ln_c = -(2f64.ln()) + beta * (2.0 * a / lead).ln() + (a / (lead - a)) * ln_base + (kappa - 1.0).ln();
    match mode {
        AsymMode::General => {}
        AsymMode::FixedP(p) => {
            if !(p >= 2.0) {
                return Err(Error::InvalidParams(format!("p = {p} must be >= 2")));
            }
            ln_c += p.ln() + (p - 1.0).ln() / (kappa - 1.0);
        }
        AsymMode::FixedT(t) => {
            if !(t > 0.0) {
                return Err(Error::InvalidParams(format!("t = {t} must be > 0")));
            }
            ln_c += beta * t.ln();
        }
    }
    Ok(ln_c.exp())
}

/// Closed-form special cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Oracle {
    /// wave, white noise, d = 1
    SWE1d,
    /// wave, white noise, d = 2, M_{2,2}(δ₀) supplied
    SWE2d,
    /// heat, white noise, d = 1
    SHE1d,
    /// b = 1, r = 0, general a and α < d (or 1-d white)
    Stable,
    /// a = 2, white 1-d, r = ⌈b⌉ - b
    FracCeil,
    /// a = 2, white 1-d, r = 0, b in (2/3, 2)
    FracR0,
}

pub const ALL_ORACLES: [Oracle; 6] = [Oracle::SWE1d, Oracle::SWE2d, Oracle::SHE1d, Oracle::Stable, Oracle::FracCeil, Oracle::FracR0];

impl Oracle {
    pub fn name(&self) -> &'static str {
        match self {
            Oracle::SWE1d => "swe_1d",
            Oracle::SWE2d => "swe_2d",
            Oracle::SHE1d => "she_1d",
            Oracle::Stable => "stable",
            Oracle::FracCeil => "frac_ceil",
            Oracle::FracR0 => "frac_r0",
        }
    }
}

fn same(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * y.abs().max(1.0)
}

fn oracle_applies(which: Oracle, p: &EquationParams, alpha: f64) -> bool {
    let (a, b, r) = (p.a, p.b, p.r);
    match which {
        Oracle::SWE1d => same(a, 2.0) && same(b, 2.0) && r == 0.0 && same(alpha, 1.0),
        Oracle::SWE2d => same(a, 2.0) && same(b, 2.0) && r == 0.0 && same(alpha, 2.0),
        Oracle::SHE1d => same(a, 2.0) && same(b, 1.0) && r == 0.0 && same(alpha, 1.0),
        Oracle::Stable => same(b, 1.0) && r == 0.0 && alpha < a,
        Oracle::FracCeil => same(a, 2.0) && same(alpha, 1.0) && same(r, b.ceil() - b),
        Oracle::FracR0 => same(a, 2.0) && same(alpha, 1.0) && r == 0.0 && b > 2.0 / 3.0 && b < 2.0,
    }
}

/// Evaluates one special-case closed form in mode `FixedP(p)` or `FixedT(t)`.
///
/// The 1-d white-noise forms have M_{2,1}(δ₀) built in and ignore `m`.
pub fn oracle_limit(which: Oracle, params: &EquationParams, alpha: f64, m: f64, mode: AsymMode) -> Result<f64> {
    if !oracle_applies(which, params, alpha) {
        return Err(Error::OracleDomain(format!(
            "{} does not cover a = {}, b = {}, r = {}, alpha = {alpha}",
            which.name(),
            params.a,
            params.b,
            params.r
        )));
    }
    let (theta, nu, a, b) = (params.theta, params.nu, params.a, params.b);
    // (leading factor, exponent of p-1) at fixed p; (exponent of t) at fixed t
    let (core, p_exp, t_exp) = match which {
        Oracle::SHE1d => (theta * theta / (24.0 * nu), 2.0, 3.0),
        Oracle::SWE1d => (theta.sqrt() / (3.0 * (2.0 * nu).powf(0.25)), 0.5, 1.5),
        Oracle::SWE2d => (theta * m / (2.0 * nu), 1.0, 2.0),
        Oracle::Stable => {
            let e = a / (a - alpha);
            let w = (2.0 * a - alpha) / (a - alpha);
            let bracket = theta * nu.powf(-alpha / a) * m.powf((2.0 * a - alpha) / a);
            (0.5 * (2.0 * a / (2.0 * a - alpha)).powf(w) * bracket.powf(e) * ((a - alpha) / a), e, w)
        }
        Oracle::FracCeil => {
            let c = b.ceil();
            let s = 4.0 * c - b;
            let core = (9.0 * theta * theta / (8.0 * nu)).powf(1.0 / (s - 2.0)) * (s - 2.0) * s.powf(-s / (s - 2.0));
            (core, 2.0 / (s - 2.0), s / (s - 2.0))
        }
        Oracle::FracR0 => {
            let s = 3.0 * b - 2.0;
            let core = (b - 2.0 / 3.0) * b.powf(-3.0 * b / s) * (theta * theta / (8.0 * nu)).powf(1.0 / s);
            (core, 2.0 / s, 3.0 * b / s)
        }
    };
    match mode {
        AsymMode::FixedP(p) => Ok(p * (p - 1.0).powf(p_exp) * core),
        AsymMode::FixedT(t) => Ok(t.powf(t_exp) * core),
        AsymMode::General => Err(Error::OracleDomain("oracles are stated at fixed p or fixed t".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub beta: f64,
    /// (p-1)^{1-1/β}; t_p = t_p_factor · t.
    pub t_p_factor: f64,
    pub coefficient: f64,
    pub mode: AsymMode,
    /// Relative difference of each applicable oracle from `coefficient`.
    pub oracle_residuals: BTreeMap<String, f64>,
}

/// Coefficient together with every applicable oracle's relative residual.
pub fn asymptotics_report(params: &EquationParams, alpha: f64, m: f64, mode: AsymMode, p: f64) -> Result<AsymptoticsReport> {
    let (beta, _) = beta_and_tp(params, alpha, p, 1.0)?;
    let coefficient = limit_coefficient(params, alpha, m, mode)?;
    let mut oracle_residuals = BTreeMap::new();
    if !matches!(mode, AsymMode::General) {
        for o in ALL_ORACLES {
            if let Ok(v) = oracle_limit(o, params, alpha, m, mode) {
                oracle_residuals.insert(o.name().to_string(), (v - coefficient).abs() / coefficient);
            }
        }
    }
    Ok(AsymptoticsReport { beta, t_p_factor: (p - 1.0).powf(1.0 - 1.0 / beta), coefficient, mode, oracle_residuals })
}

/// Largest peak index summed term by term; beyond it the sum is replaced by
/// the integral of its smooth log-interpolant.
const DIRECT_PEAK_LIMIT: f64 = 2e6;

/// t^{-1/γ} log Σ_{n≥0} (n!)^{-γ} tⁿ, computed in log space.
pub fn series_growth_limit(gamma_exp: f64, t: f64) -> Result<f64> {
    if !(gamma_exp > 0.0) || !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("needs gamma > 0 and finite t > 0 (gamma = {gamma_exp}, t = {t})")));
    }
    let lt = t.ln();
    let ln_term = |x: f64| x * lt - gamma_exp * ln_gamma(x + 1.0);
    let peak = t.powf(1.0 / gamma_exp);
    let ln_sum = if peak <= DIRECT_PEAK_LIMIT {
        let mut logs = Vec::new();
        let mut largest = f64::NEG_INFINITY;
        let mut n = 0usize;
        loop {
            let l = ln_term(n as f64);
            logs.push(l);
            largest = largest.max(l);
            // past the peak the terms fall monotonically; stop once below 1e-16 of the largest
            if n as f64 > peak + 1.0 && l < largest + (1e-16f64).ln() {
                break;
            }
            n += 1;
            if n > 50_000_000 {
                return Err(Error::Overflow("series needs more than 5e7 terms".into()));
            }
        }
        log_sum_exp(&logs)
    } else {
        // Euler-Maclaurin: the sum equals the integral up to relative terms
        // of order 1/width, negligible after taking logs.
        let centre = peak;
        let width = (peak / gamma_exp).sqrt();
        let lo = (centre - 60.0 * width).max(0.0);
        let hi = centre + 60.0 * width;
        let top = ln_term(centre);
        // l(centre + y) - l(centre) without cancellation
        let z = centre + 1.0;
        let drift = lt - gamma_exp * centre.ln();
        let shift = |y: f64| -> f64 {
            let u = y / z;
            // lnΓ(z+y) - lnΓ(z) - y ln(centre)
            let lg_diff = z * entropy_like(u) - 0.5 * u.ln_1p() + y * (1.0 / centre).ln_1p() + (1.0 / (z + y) - 1.0 / z) / 12.0;
            y * drift - gamma_exp * lg_diff
        };
        let res = integrate(
            |x| shift(x - centre).exp(),
            lo,
            hi,
            &[centre - width, centre, centre + width],
            Tolerance::rel(1e-10),
        )?;
        top + res.value.ln()
    };
    if !ln_sum.is_finite() {
        return Err(Error::Overflow(format!("log-sum is not finite at t = {t}")));
    }
    Ok(ln_sum / peak)
}

/// (1+u) ln(1+u) - u, accurate for small u.
fn entropy_like(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let mut sum = 0.0;
        let mut pow = u * u;
        for k in 2..40 {
            let kf = k as f64;
            let term = pow / (kf * (kf - 1.0));
            sum += if k % 2 == 0 { term } else { -term };
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pow *= u;
        }
        sum
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// (1/n) log(Γ(an+1)/(n!)^a), which tends to a log a.
pub fn stirling_companion(a: f64, n: usize) -> Result<f64> {
    if !(a > 0.0) || n == 0 {
        return Err(Error::InvalidParams(format!("needs a > 0 and n >= 1 (a = {a}, n = {n})")));
    }
    let nf = n as f64;
    Ok((ln_gamma(a * nf + 1.0) - a * ln_gamma(nf + 1.0)) / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGap {
    pub t: f64,
    /// t^{-β} log E[u(t,0)²] from the truncated series.
    pub value: f64,
    pub gap: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderGap {
    pub n: usize,
    /// (1/n) log((n!)^κ ‖f̃_n(·,0,1)‖²)
    pub value: f64,
    pub std_err: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub time_target: f64,
    pub time_rows: Vec<TimeGap>,
    pub order_target: f64,
    pub order_rows: Vec<OrderGap>,
}

/// Compares chaos-series computations with the closed-form limits (a
/// diagnostic: convergence is logarithmically slow).
pub fn chaos_vs_closed_form(
    params: &EquationParams,
    spec: &NoiseSpec,
    m: f64,
    t_grid: &[f64],
    norms: &[ChaosNormSeq],
) -> Result<ClosedFormReport> {
    let alpha = spec.alpha();
    let kappa = subcritical_kappa(params, alpha)?;
    let beta = kappa / (kappa - 1.0);
    let time_target = limit_coefficient(params, alpha, m, AsymMode::FixedP(2.0))?;
    let mut time_rows = Vec::new();
    for &t in t_grid {
        let sm = second_moment_from_norms(params, spec, t, norms, None)?;
        let value = sm.value.ln() / t.powf(beta);
        time_rows.push(TimeGap { t, value, gap: value - time_target, tail_bound: sm.tail_bound });
    }
    let rho = rho_from_m(m, params.a, alpha, params.nu);
    let order_target = kappa * (2.0 / kappa).ln() + rho.ln();
    let order_rows = norms
        .iter()
        .filter(|s| s.n >= 1 && s.norm_sq_at_1.value > 0.0)
        .map(|s| {
            let nf = s.n as f64;
            let e = s.norm_sq_at_1;
            let value = (kappa * ln_gamma(nf + 1.0) + e.value.ln()) / nf;
            OrderGap { n: s.n, value, std_err: e.std_err / (nf * e.value), gap: value - order_target }
        })
        .collect();
    Ok(ClosedFormReport { time_target, time_rows, order_target, order_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::m_white_1d;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn she(nu: f64, theta: f64) -> EquationParams {
        EquationParams::new(2.0, 1.0, 0.0, nu, theta, 1).unwrap()
    }

    #[test]
    fn beta_examples() {
        assert_relative_eq!(beta_and_tp(&she(1.0, 1.0), 1.0, 2.0, 3.0).unwrap().0, 3.0, max_relative = 1e-15);
        assert_eq!(beta_and_tp(&she(1.0, 1.0), 1.0, 2.0, 3.0).unwrap().1, 3.0);
        let swe = EquationParams::wave_limit(2.0, 0.0, 1.0, 1.0, 3).unwrap();
        for al in [0.5, 1.0, 2.5] {
            assert_relative_eq!(beta_and_tp(&swe, al, 3.0, 1.0).unwrap().0, (4.0 - al) / (3.0 - al), max_relative = 1e-14);
        }
        let crit = EquationParams::new(2.0, 2.0 / 3.0, 0.0, 1.0, 1.0, 1).unwrap();
        assert!(matches!(beta_and_tp(&crit, 1.0, 2.0, 1.0), Err(Error::CriticalOrSupercritical(_))));
    }

    #[test]
    fn white_noise_examples() {
        let c = limit_coefficient(&she(1.0, 1.0), 1.0, m_white_1d(), AsymMode::FixedP(2.0)).unwrap();
        assert_relative_eq!(c, 1.0 / 12.0, max_relative = 1e-13);
        let swe = EquationParams::wave_limit(2.0, 0.0, 2.0, 1.0, 1).unwrap();
        let c = limit_coefficient(&swe, 1.0, m_white_1d(), AsymMode::FixedP(2.0)).unwrap();
        assert_relative_eq!(c, 2.0 / (3.0 * 2f64.sqrt()), max_relative = 1e-13);
        let o = oracle_limit(Oracle::SHE1d, &she(1.0, 2.0), 1.0, 0.0, AsymMode::FixedP(3.0)).unwrap();
        assert_relative_eq!(o, 2.0, max_relative = 1e-15);
        assert!(limit_coefficient(&she(1.0, 1e-12), 1.0, m_white_1d(), AsymMode::General).unwrap() < 1e-20);
    }

    #[test]
    fn r0_reduces_to_heat_at_b_one() {
        let p = she(0.7, 1.3);
        for mode in [AsymMode::FixedP(4.0), AsymMode::FixedT(2.5)] {
            let a = oracle_limit(Oracle::FracR0, &p, 1.0, 0.0, mode).unwrap();
            let b = oracle_limit(Oracle::SHE1d, &p, 1.0, 0.0, mode).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn oracle_domains() {
        let p = she(1.0, 1.0);
        assert!(matches!(oracle_limit(Oracle::SWE1d, &p, 1.0, 0.4, AsymMode::FixedP(2.0)), Err(Error::OracleDomain(_))));
        assert!(matches!(oracle_limit(Oracle::SHE1d, &p, 1.0, 0.4, AsymMode::General), Err(Error::OracleDomain(_))));
    }

    #[test]
    fn report_lists_applicable_oracles() {
        let r = asymptotics_report(&she(1.0, 1.0), 1.0, m_white_1d(), AsymMode::FixedP(3.0), 3.0).unwrap();
        let names: Vec<&str> = r.oracle_residuals.keys().map(|s| s.as_str()).collect();
        assert_eq!(names, vec!["frac_ceil", "frac_r0", "she_1d", "stable"]);
        assert!(r.oracle_residuals.values().all(|&v| v < 1e-12));
    }

    #[test]
    fn growth_limits() {
        for t in [1.0, 10.0, 1e3, 1e6] {
            assert!((series_growth_limit(1.0, t).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((series_growth_limit(2.0, 1e6).unwrap() / 2.0 - 1.0).abs() < 0.02);
        assert!((series_growth_limit(0.5, 1e6).unwrap() / 0.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn growth_limit_integral_matches_direct_sum() {
        // just above and below the switch the two evaluations agree
        let g = 1.0;
        let below = series_growth_limit(g, DIRECT_PEAK_LIMIT * 0.999).unwrap();
        let above = series_growth_limit(g, DIRECT_PEAK_LIMIT * 1.001).unwrap();
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn stirling_companion_trend() {
        let a: f64 = 1.5;
        let target = a * a.ln();
        let e200 = (stirling_companion(a, 200).unwrap() - target).abs();
        let e20000 = (stirling_companion(a, 20_000).unwrap() - target).abs();
        assert!(e20000 < e200 && e20000 / target < 1e-3);
    }

    fn params_strategy() -> impl Strategy<Value = (EquationParams, f64)> {
        (0.5f64..2.0, 0.3f64..1.9, 0.0f64..1.0, 0.2f64..3.0, 0.2f64..3.0, 0.05f64..0.95).prop_filter_map(
            "subcritical",
            |(a, b, r, nu, th, frac)| {
                let p = EquationParams::new(a, b, r, nu, th, 3).ok()?;
                let alpha = frac * (2.0 * a).min(3.0);
                (p.kappa(alpha) > 1.05).then_some((p, alpha))
            },
        )
    }

    proptest! {
        #[test]
        fn mode_ratios((p, al) in params_strategy(), m in 0.05f64..2.0, pp in 2.0f64..6.0, t in 0.1f64..10.0) {
            let g = limit_coefficient(&p, al, m, AsymMode::General).unwrap();
            let fp = limit_coefficient(&p, al, m, AsymMode::FixedP(pp)).unwrap();
            let ft = limit_coefficient(&p, al, m, AsymMode::FixedT(t)).unwrap();
            let (beta, _) = beta_and_tp(&p, al, pp, t).unwrap();
            let kappa = p.kappa(al);
            prop_assert!((fp / g / (pp * (pp - 1.0).powf(1.0 / (kappa - 1.0))) - 1.0).abs() < 1e-12);
            prop_assert!((ft / g / t.powf(beta) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn stable_oracle_agrees(a in 0.6f64..2.0, frac in 0.05f64..0.9, nu in 0.2f64..3.0, th in 0.2f64..3.0, m in 0.05f64..2.0, pp in 2.0f64..6.0) {
            let al = frac * a;
            let p = EquationParams::new(a, 1.0, 0.0, nu, th, 2).unwrap();
            let c = limit_coefficient(&p, al, m, AsymMode::FixedP(pp)).unwrap();
            let o = oracle_limit(Oracle::Stable, &p, al, m, AsymMode::FixedP(pp)).unwrap();
            prop_assert!((c / o - 1.0).abs() < 1e-12);
        }

        #[test]
        fn frac_oracles_agree(b in 0.7f64..1.99, nu in 0.2f64..3.0, th in 0.2f64..3.0, t in 0.5f64..4.0) {
            let m = m_white_1d();
            let ceil = EquationParams::new(2.0, b, b.ceil() - b, nu, th, 1).unwrap();
            let c = limit_coefficient(&ceil, 1.0, m, AsymMode::FixedT(t)).unwrap();
            let o = oracle_limit(Oracle::FracCeil, &ceil, 1.0, m, AsymMode::FixedT(t)).unwrap();
            prop_assert!((c / o - 1.0).abs() < 1e-12);
            let zero = EquationParams::new(2.0, b, 0.0, nu, th, 1).unwrap();
            let c = limit_coefficient(&zero, 1.0, m, AsymMode::FixedP(3.0)).unwrap();
            let o = oracle_limit(Oracle::FracR0, &zero, 1.0, m, AsymMode::FixedP(3.0)).unwrap();
            prop_assert!((c / o - 1.0).abs() < 1e-12);
        }
    }
}
