//! Gauss-Legendre rules and a globally adaptive panel integrator.
//!
//! Each panel is integrated with a 15-point Gauss-Legendre rule on the
//! whole panel and on its two halves; the difference is the error estimate.
//! Panels with the largest estimate are bisected first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn rule15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

/// Fixed Gauss-Legendre sum on [a, b].
pub fn fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut s = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        s += w * f(c + h * x);
    }
    s * h
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-12, abs: 1e-300, max_panels: 4000 }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance { rel, ..Default::default() }
    }
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

fn make_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Panel {
    let m = 0.5 * (a + b);
    let rule = rule15();
    let left = fixed(f, a, m, rule);
    let right = fixed(f, m, b, rule);
    let err = (left + right - whole).abs();
    Panel { a, b, left, right, err }
}

/// Adaptive integral of `f` over [a, b] with optional interior breakpoints.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().cloned().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.extend(inner);
    pts.push(hi);
    pts.dedup();

    let rule = rule15();
    let mut heap = BinaryHeap::new();
    for w in pts.windows(2) {
        let whole = fixed(&f, w[0], w[1], rule);
        heap.push(make_panel(&f, w[0], w[1], whole));
    }
    let mut npanels = heap.len();
    loop {
        let (mut total, mut err) = (0.0, 0.0);
        for p in heap.iter() {
            total += p.left + p.right;
            err += p.err;
        }
        if !total.is_finite() {
            return Err(Error::ConvergenceFailure { what: "quadrature".into(), achieved: f64::NAN });
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(QuadResult { value: sign * total, error: err });
        }
        if npanels >= tol.max_panels {
            return Err(Error::ConvergenceFailure {
                what: "quadrature".into(),
                achieved: err / total.abs().max(f64::MIN_POSITIVE),
            });
        }
        let p = heap.pop().expect("nonempty panel heap");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // Panel cannot be split further; accept what we have.
            let mut acc = p;
            acc.err = 0.0;
            heap.push(acc);
            continue;
        }
        heap.push(make_panel(&f, p.a, m, p.left));
        heap.push(make_panel(&f, m, p.b, p.right));
        npanels += 1;
    }
}

/// Adaptive integral over [a, ∞) through x = a + u/(1-u).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - u;
        let x = a + u / s;
        let v = f(x) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let ub: Vec<f64> = breaks.iter().filter(|&&x| x > a).map(|&x| (x - a) / (1.0 + x - a)).collect();
    integrate(g, 0.0, 1.0, &ub, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let rule = gauss_legendre(10);
        let s: f64 = rule.1.iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        // degree 18 monomial is exact for 10 points
        let v = fixed(&|x: f64| x.powi(18), -1.0, 1.0, &rule);
        assert_relative_eq!(v, 2.0 / 19.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_peaks_and_tails() {
        let v = integrate(|x: f64| 1.0 / (1e-6 + x * x), -1.0, 1.0, &[0.0], Tolerance::rel(1e-12)).unwrap();
        let exact = 2.0 / 1e-3 * (1.0f64 / 1e-3).atan();
        assert_relative_eq!(v.value, exact, max_relative = 1e-11);
        let g = integrate_to_infinity(|x: f64| (-x).exp() * x.sqrt(), 0.0, &[], Tolerance::rel(1e-12)).unwrap();
        assert_relative_eq!(g.value, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-10);
        let c = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x).powi(2), 0.0, &[], Tolerance::default()).unwrap();
        assert_relative_eq!(c.value, std::f64::consts::PI / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x: f64| x.exp(), 0.0, 1.0, &[], Tolerance::default()).unwrap().value;
        let b = integrate(|x: f64| x.exp(), 1.0, 0.0, &[], Tolerance::default()).unwrap().value;
        assert_eq!(a, -b);
    }
}
