//! Gamma-type special functions and small geometric constants.

use std::f64::consts::PI;

/// Gamma function (Lanczos approximation with reflection for x < 0.5).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Natural log of |Γ(x)| for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// 1/Γ(x), returning exactly zero at the poles x = 0, -1, -2, ...
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 171.0 {
        return (-ln_gamma(x)).exp();
    }
    1.0 / gamma(x)
}

/// sin(πx), exact at integers and half-integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).floor(); // r in [0, 2)
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r == 0.5 {
        return 1.0;
    }
    if r == 1.5 {
        return -1.0;
    }
    if r < 1.0 {
        (PI * r.min(1.0 - r)).sin()
    } else {
        -(PI * (r - 1.0).min(2.0 - r)).sin()
    }
}

/// cos(πx), exact at integers and half-integers.
pub fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

/// Surface area |S^{n-1}| of the unit sphere in ℝ^n; |S^0| = 2.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Log-sum-exp of a slice, robust to -inf entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Bessel function J₀: power series up to x = 12, Hankel asymptotic series beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 12.0 {
        let q = -0.25 * x * x;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..200 {
            term *= q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 4 {
                break;
            }
        }
        return sum;
    }
    // a_k = ∏_{j≤k} (2j-1)² / (k! 8^k), summed while the terms shrink
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= odd * odd / (k as f64 * 8.0 * x);
        if term.abs() >= last || term.abs() < 1e-17 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q -= term,
            2 => p -= term,
            3 => q += term,
            _ => p += term,
        }
    }
    let chi = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reference_values() {
        // (x, Γ(x)) to 20 digits
        let table = [
            (0.25, 3.625_609_908_221_908_3),
            (0.5, 1.772_453_850_905_516),
            (1.0, 1.0),
            (1.5, 0.886_226_925_452_758),
            (3.7, 4.170_651_783_796_603),
            (9.9, 289_867.703_840_109_64),
        ];
        for (x, g) in table {
            assert_relative_eq!(gamma(x), g, max_relative = 1e-13);
        }
    }

    #[test]
    fn rgamma_vanishes_at_poles() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        assert_relative_eq!(rgamma(-0.5), 1.0 / (-2.0 * PI.sqrt()), max_relative = 1e-13);
    }

    #[test]
    fn trig_pi_exact_points() {
        assert_eq!(sin_pi(1.0), 0.0);
        assert_eq!(sin_pi(-2.0), 0.0);
        assert_eq!(cos_pi(0.5), 0.0);
        assert_eq!(cos_pi(1.0), -1.0);
        assert_relative_eq!(sin_pi(0.3), (0.3 * PI).sin(), max_relative = 1e-15);
        assert_relative_eq!(sin_pi(1.7), (1.7 * PI).sin(), max_relative = 1e-14);
        assert_relative_eq!(cos_pi(-0.2), (0.2 * PI).cos(), max_relative = 1e-15);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
    }
    #[test]
    fn bessel_j0_reference_values() {
        let table = [
            (0.0, 1.0),
            (0.5, 0.938469807240813),
            (1.0, 0.7651976865579665),
            (3.0, -0.2600519549019335),
            (7.9, 0.1943618448412782),
            (11.99, 0.045451560352858814),
            (12.0, 0.04768931079683335),
            (12.01, 0.04992043031982556),
            (20.0, 0.16702466434058322),
            (50.0, 0.055812327669252086),
            (123.4, -0.07152553671926014),
            (1000.0, 0.02478668615242003),
        ];
        for (x, v) in table {
            assert!((bessel_j0(x) - v).abs() < 1e-11, "J0({x}) = {} vs {v}", bessel_j0(x));
        }
    }
}
