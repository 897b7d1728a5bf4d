//! Fourier symbol of the fundamental solution through the two-parameter
//! Mittag-Leffler function E_{β,γ}(z) on the negative real axis.
//!
//! Small |z| uses the power series. Large |z| collapses the Hankel contour of
//! the Laplace inversion of s^{β-γ}/(s^β + x) onto the negative real axis:
//!
//!   E_{β,γ}(-x) = (1/π) ∫_0^∞ e^{-r} r^{β-γ} [r^β sin πγ + x sin π(γ-β)] / D(r) dr + P,
//!   D(r) = r^{2β} + 2 x r^β cos πβ + x²,
//!
//! where P = (2/β) Re[e^s s^{1-γ}], s = x^{1/β} e^{iπ/β}, is present for β > 1.
//! The order-one case uses a separate exponential integral.

use crate::error::{Error, Result};
use crate::model::EquationParams;
use crate::quad::{integrate, Tolerance};
use crate::special::{cos_pi, ln_gamma, rgamma, sin_pi};

/// |z| at or below which the power series is tried first.
pub const SERIES_SWITCH: f64 = 10.0;
const ASYMPTOTIC_SWITCH: f64 = 1e9;
const TARGET_REL: f64 = 1e-10;

/// Two-parameter Mittag-Leffler function E_{β,γ}(z) for z ≤ 0.
pub fn mittag_leffler(beta: f64, gamma_: f64, z: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidParams(format!("Mittag-Leffler order beta = {beta} outside (0, 2]")));
    }
    if !(gamma_ > 0.0 && gamma_.is_finite()) {
        return Err(Error::InvalidParams(format!("Mittag-Leffler parameter gamma = {gamma_} must be > 0")));
    }
    if !(z <= 0.0) || !z.is_finite() {
        return Err(Error::InvalidParams(format!("Mittag-Leffler argument z = {z} must be finite and <= 0")));
    }
    if z == 0.0 {
        return Ok(rgamma(gamma_));
    }
    if beta == 1.0 && gamma_ == 1.0 {
        return Ok(z.exp());
    }
    if -z <= SERIES_SWITCH {
        if let Some(v) = series(beta, gamma_, z) {
            return Ok(v);
        }
    }
    if beta == 1.0 {
        return order_one(gamma_, -z);
    }
    large_argument(beta, gamma_, -z)
}

/// Power series; `None` when cancellation would spoil the target accuracy.
fn series(beta: f64, gamma_: f64, z: f64) -> Option<f64> {
    let az = z.abs();
    let (mut sum, mut comp, mut abs_sum) = (0.0f64, 0.0f64, 0.0f64);
    let lz = az.ln();
    for k in 0..20_000usize {
        let arg = beta * k as f64 + gamma_;
        let mag = if arg < 160.0 && k < 300 {
            az.powi(k as i32) * rgamma(arg)
        } else {
            (k as f64 * lz - ln_gamma(arg)).exp()
        };
        let term = if k % 2 == 0 { mag } else { -mag };
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        abs_sum += mag;
        if k > 2 && mag <= 1e-17 * abs_sum && arg > 1.0 && (k as f64) * beta > lz {
            let cancel = abs_sum * 4e-16 / sum.abs().max(f64::MIN_POSITIVE);
            return if cancel < 1e-2 * TARGET_REL { Some(sum) } else { None };
        }
    }
    None
}

/// E_{1,γ}(-x) for large x.
fn order_one(gamma_: f64, x: f64) -> Result<f64> {
    if gamma_ > 2.0 {
        // E_{1,γ}(-x) = (1/Γ(γ-1) - E_{1,γ-1}(-x)) / x
        return Ok((rgamma(gamma_ - 1.0) - order_one(gamma_ - 1.0, x)?) / x);
    }
    if gamma_ < 1.0 {
        // forward recurrence; loses about log10(x) digits
        return Ok(rgamma(gamma_) - x * order_one(gamma_ + 1.0, x)?);
    }
    if gamma_ == 1.0 {
        return Ok((-x).exp());
    }
    // E_{1,γ}(-x) = (1/Γ(γ)) ∫_0^1 exp(-x (1 - (1-v)^{1/(γ-1)})) dv
    let p = 1.0 / (gamma_ - 1.0);
    let f = |v: f64| (-x * (1.0 - (1.0 - v).powf(p))).exp();
    let scale = 1.0 / (x * p.max(1.0));
    let breaks = [scale, 10.0 * scale, 40.0 * scale];
    let r = integrate(f, 0.0, 1.0, &breaks, Tolerance::rel(1e-13))?;
    Ok(r.value * rgamma(gamma_))
}

fn large_argument(beta: f64, gamma_: f64, x: f64) -> Result<f64> {
    if gamma_ >= 1.0 + beta {
        // E_{β,γ}(-x) = (1/Γ(γ-β) - E_{β,γ-β}(-x)) / x
        return Ok((rgamma(gamma_ - beta) - large_argument(beta, gamma_ - beta, x)?) / x);
    }
    let poles = pole_contribution(beta, gamma_, x);
    if x > ASYMPTOTIC_SWITCH {
        // -Σ_{k≥1} (-x)^{-k}/Γ(γ-βk)
        let mut s = 0.0;
        let mut xp = 1.0;
        for k in 1..=12 {
            xp /= -x;
            s -= xp * rgamma(gamma_ - beta * k as f64);
        }
        return Ok(s + poles);
    }
    Ok(cut_integral(beta, gamma_, x)? + poles)
}

fn pole_contribution(beta: f64, gamma_: f64, x: f64) -> f64 {
    if beta <= 1.0 {
        return 0.0;
    }
    let rho = x.powf(1.0 / beta);
    let re = rho * cos_pi(1.0 / beta);
    let im = rho * sin_pi(1.0 / beta);
    let phase = im + (1.0 - gamma_) * std::f64::consts::PI / beta;
    2.0 / beta * re.exp() * rho.powf(1.0 - gamma_) * phase.cos()
}

/// Branch-cut integral for 1 + β > γ, in the variable u = r^q, q = 1 + β - γ.
fn cut_integral(beta: f64, gamma_: f64, x: f64) -> Result<f64> {
    let q = 1.0 + beta - gamma_;
    let sg = sin_pi(gamma_);
    let sgb = sin_pi(gamma_ - beta);
    let cb = cos_pi(beta);
    let f = |u: f64| {
        if u == 0.0 {
            // r^β term vanishes; D = x²
            return x * sgb / (x * x);
        }
        let r = u.powf(1.0 / q);
        let rb = r.powf(beta);
        let dd = rb * rb + 2.0 * x * rb * cb + x * x;
        (-r).exp() * (rb * sg + x * sgb) / dd
    };
    let r_max: f64 = 60.0;
    let mut breaks = vec![1.0];
    if cb < 0.0 {
        // near-vanishing denominator at r^β = -x cos πβ
        let rs = (-x * cb).powf(1.0 / beta);
        if rs < r_max {
            let width = (x * sin_pi(beta).abs() / (beta * rs.powf(beta - 1.0))).max(1e-300);
            for m in [-10.0, -1.0, 0.0, 1.0, 10.0] {
                let rr = rs + m * width;
                if rr > 0.0 && rr < r_max {
                    breaks.push(rr.powf(q));
                }
            }
        }
    }
    for rr in [5.0f64, 15.0, 30.0] {
        breaks.push(rr.powf(q));
    }
    let tol = Tolerance { rel: 1e-13, abs: 1e-300, max_panels: 20_000 };
    let res = integrate(f, 0.0, r_max.powf(q), &breaks, tol)?;
    let v = res.value / (std::f64::consts::PI * q);
    Ok(v)
}

/// FG(t, ρ) = t^{b+r-1} E_{b,b+r}(-(ν/2) ρ^a t^b), the Fourier symbol of the
/// fundamental solution at frequency modulus ρ.
pub fn fourier_green(params: &EquationParams, t: f64, rho: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("time t = {t} must be > 0")));
    }
    if !(rho >= 0.0) {
        return Err(Error::InvalidParams(format!("frequency modulus {rho} must be >= 0")));
    }
    let (a, b, r) = (params.a, params.b, params.r);
    let g = b + r;
    if rho == 0.0 {
        return Ok(t.powf(g - 1.0) * rgamma(g));
    }
    let z = -params.lambda() * rho.powf(a) * t.powf(b);
    if b == 1.0 && r == 0.0 {
        return Ok(z.exp());
    }
    Ok(t.powf(g - 1.0) * mittag_leffler(b, g, z)?)
}

/// ∫_0^t FG(s, ρ) ds = t^{b+r} E_{b,b+r+1}(-(ν/2) ρ^a t^b).
pub fn fourier_green_integral(params: &EquationParams, t: f64, rho: f64) -> Result<f64> {
    let (a, b, r) = (params.a, params.b, params.r);
    let g = b + r;
    let z = -params.lambda() * rho.powf(a) * t.powf(b);
    if b == 1.0 && r == 0.0 {
        // (1 - e^z)/(-z) · t
        if z == 0.0 {
            return Ok(t);
        }
        return Ok(t * (-z.exp_m1()) / (-z));
    }
    Ok(t.powf(g) * mittag_leffler(b, g + 1.0, z)?)
}

/// Laplace transform at s = 1 of FG(·, ρ): 1/(1 + (ν/2) ρ^a).
pub fn laplace_symbol(params: &EquationParams, rho: f64) -> f64 {
    1.0 / (1.0 + params.lambda() * rho.powf(params.a))
}

/// Numerical ∫_0^∞ e^{-t} FG(t, ρ) dt, for checking against [`laplace_symbol`].
pub fn laplace_quadrature(params: &EquationParams, rho: f64) -> Result<f64> {
    let g = params.b + params.r;
    // t = u^{1/g} turns t^{g-1} dt into du/g
    let f = |u: f64| -> f64 {
        if u == 0.0 {
            return rgamma(g);
        }
        let t = u.powf(1.0 / g);
        let z = -params.lambda() * rho.powf(params.a) * t.powf(params.b);
        let e = if params.b == 1.0 && params.r == 0.0 {
            z.exp()
        } else {
            mittag_leffler(params.b, g, z).unwrap_or(f64::NAN)
        };
        (-t).exp() * e
    };
    let top = 60f64.powf(g);
    let breaks: Vec<f64> = [1.0, 5.0, 15.0, 30.0].iter().map(|t: &f64| t.powf(g)).collect();
    let v = integrate(f, 0.0, top, &breaks, Tolerance::rel(1e-11))?;
    if !v.value.is_finite() {
        return Err(Error::ConvergenceFailure { what: "Laplace quadrature".into(), achieved: f64::NAN });
    }
    Ok(v.value / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn integral_branch(beta: f64, gamma_: f64, z: f64) -> f64 {
        if beta == 1.0 {
            order_one(gamma_, -z).unwrap()
        } else {
            large_argument(beta, gamma_, -z).unwrap()
        }
    }

    #[test]
    fn series_and_contour_agree_on_overlap() {
        let mut worst: f64 = 0.0;
        for &beta in &[0.4, 0.6, 0.8, 0.95, 1.0, 1.05, 1.3, 1.6, 1.9, 2.0] {
            for &g in &[beta, beta + 0.25, 1.0, 1.7, beta + 0.9] {
                for &x in &[5.0, 7.5, 10.0, 14.0, 20.0] {
                    if let Some(s) = series(beta, g, -x) {
                        let c = integral_branch(beta, g, -x);
                        let rel = ((s - c) / s).abs();
                        worst = worst.max(rel);
                        assert!(rel < 1e-10, "beta={beta} gamma={g} x={x}: {s} vs {c}");
                    }
                }
            }
        }
        eprintln!("overlap worst relative gap {worst:e}");
    }

    #[test]
    fn frozen_high_precision_values() {
        // (β, γ, z, E_{β,γ}(z)) from 40-digit series / exponentially accurate expansions
        let table = [
            (0.5, 1.0, -1.0, 0.427_583_576_155_807_004_4),
            (0.3, 0.3, -10.1, 0.002_013_755_859_050_144_038),
            (0.7, 1.0, -50.0, 0.006_793_665_670_383_093_871_8),
            (0.9, 0.9, -1e4, 9.463_370_807_762_259_582_9e-10),
            (0.99, 1.5, -200.0, 0.002_883_269_927_267_180_029),
            (1.0, 2.7, -20.0, 0.053_070_382_796_926_259_464),
            (1.01, 1.01, -50.0, -4.375_798_757_111_293_833_8e-6),
            (1.4, 1.7, -200.0, 0.001_668_657_041_879_208_891_2),
            (1.5, 1.5, -50.0, -0.000_283_311_065_622_730_914_5),
            (1.8, 1.8, -1000.0, 0.000_015_092_516_281_766_023_147),
            (1.99, 3.5, -1e4, 0.000_110_516_060_181_165_346_46),
            (2.0, 2.3, -1e4, -0.002_083_242_079_073_191_518_5),
            (0.3, 1.0, -1e6, 7.703_827_330_424_718_765_7e-7),
            (0.5, 0.8, -1e6, 3.342_729_243_513_604_597_7e-7),
            (1.2, 2.0, -3.0, 0.336_228_626_023_653_618_34),
        ];
        for (b, g, z, v) in table {
            let got = mittag_leffler(b, g, z).unwrap();
            assert_relative_eq!(got, v, max_relative = 1e-10);
        }
    }

    #[test]
    fn elementary_cases() {
        assert_relative_eq!(mittag_leffler(1.0, 1.0, -1.0).unwrap(), 0.367_879_441_171_442_33, max_relative = 1e-15);
        assert!(mittag_leffler(2.0, 1.0, -(std::f64::consts::FRAC_PI_2).powi(2)).unwrap().abs() < 1e-15);
        assert_relative_eq!(mittag_leffler(1.0, 2.0, -1.0).unwrap(), 0.632_120_558_828_557_7, max_relative = 1e-14);
        assert_relative_eq!(mittag_leffler(2.0, 2.0, -1.0).unwrap(), 0.841_470_984_807_896_5, max_relative = 1e-14);
        assert_eq!(mittag_leffler(0.7, 1.3, 0.0).unwrap(), rgamma(1.3));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(mittag_leffler(0.0, 1.0, -1.0).is_err());
        assert!(mittag_leffler(2.5, 1.0, -1.0).is_err());
        assert!(mittag_leffler(1.0, 0.0, -1.0).is_err());
        assert!(mittag_leffler(1.0, 1.0, 0.5).is_err());
        assert!(mittag_leffler(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn heat_and_wave_symbols() {
        let heat = EquationParams::new(2.0, 1.0, 0.0, 2.0, 1.0, 1).unwrap();
        assert_relative_eq!(fourier_green(&heat, 1.0, 1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        let wave = EquationParams::wave_limit(2.0, 0.0, 2.0, 1.0, 1).unwrap();
        for &(t, rho) in &[(0.5f64, 1.0f64), (2.0, 3.0), (7.0, 4.5), (0.1, 0.2)] {
            let exact = (rho * t).sin() / rho;
            let got = fourier_green(&wave, t, rho).unwrap();
            assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{t} {rho}: {got} vs {exact}");
        }
        let frac = EquationParams::new(1.5, 0.7, 0.3, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(fourier_green(&frac, 2.0, 0.0).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn laplace_identity_examples() {
        for &(a, b, r) in &[(1.5, 0.7, 0.3), (2.0, 1.4, 0.6)] {
            let p = EquationParams::new(a, b, r, 2.0, 1.0, 1).unwrap();
            for &rho in &[0.5, 1.0, 2.0] {
                let q = laplace_quadrature(&p, rho).unwrap();
                assert_relative_eq!(q, laplace_symbol(&p, rho), max_relative = 1e-8);
            }
            assert_eq!(laplace_symbol(&p, 1.0), 0.5);
        }
    }

    #[test]
    fn time_integral_matches_quadrature() {
        let p = EquationParams::new(1.8, 0.6, 0.2, 1.3, 1.0, 1).unwrap();
        let (t, rho) = (1.7f64, 1.1f64);
        let g = p.b + p.r;
        // s = u^{1/g} removes the s^{g-1} endpoint singularity
        let f = |u: f64| {
            if u == 0.0 {
                return rgamma(g) / g;
            }
            let s = u.powf(1.0 / g);
            fourier_green(&p, s, rho).unwrap() / s.powf(g - 1.0) / g
        };
        let q = integrate(f, 0.0, t.powf(g), &[], Tolerance::rel(1e-12)).unwrap().value;
        assert_relative_eq!(fourier_green_integral(&p, t, rho).unwrap(), q, max_relative = 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn scaling_in_frequency(a in 0.6f64..2.0, b in 0.3f64..1.9, r in 0.0f64..1.0,
                                t in 0.05f64..3.0, rho in 0.05f64..3.0, c in 0.3f64..3.0) {
            let p = EquationParams::new(a, b, r, 1.7, 1.0, 1).unwrap();
            let lhs = fourier_green(&p, t, c * rho).unwrap();
            let rhs = c.powf(-(a / b) * (b + r - 1.0)) * fourier_green(&p, c.powf(a / b) * t, rho).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1e-300), "{lhs} vs {rhs}");
            let lhs2 = fourier_green(&p, c * t, rho).unwrap();
            let rhs2 = c.powf(b + r - 1.0) * fourier_green(&p, t, c.powf(b / a) * rho).unwrap();
            prop_assert!((lhs2 - rhs2).abs() <= 1e-9 * lhs2.abs().max(1e-300), "{lhs2} vs {rhs2}");
        }

        #[test]
        fn nonincreasing_in_frequency_for_slow_orders(a in 0.5f64..2.0, b in 0.2f64..1.0, r in 0.0f64..1.0,
                                                     t in 0.1f64..5.0) {
            let p = EquationParams::new(a, b, r, 1.0, 1.0, 1).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let v = fourier_green(&p, t, 0.25 * k as f64).unwrap();
                prop_assert!(v <= prev * (1.0 + 1e-12) && v >= -1e-14);
                prev = v;
            }
        }
    }
}
