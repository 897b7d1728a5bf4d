//! Variational constants M, E, σ, ρ and 𝐌: closed-form conversions, a
//! trial-family optimizer giving lower bounds on M, and the ρ estimator
//! from the T_n sequence.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mc::MCEstimate;
use crate::model::{NoiseKind, NoiseSpec};
use crate::optimize::{golden_max, nelder_mead_max};
use crate::quad::{gauss_legendre, integrate, Tolerance};
use crate::special::{bessel_j0, ln_gamma, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VariationalKind {
    M,
    E,
    Sigma,
    Rho,
    BoldM,
}

/// A variational constant for the noise Θγ and energy weight θ.
///
/// `Sigma` values are the best constant of the Sobolev-type inequality for γ
/// itself; Θ and θ are carried along. `Rho` additionally depends on ν.
/// `BoldM` is 𝐌 = E(Θγ/2, 2) and ignores θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalValue {
    pub kind: VariationalKind,
    pub a: f64,
    pub d: usize,
    pub alpha: f64,
    pub noise_scale: f64,
    pub theta_scale: f64,
    pub nu: f64,
    pub value: f64,
    /// α = d: white noise used as a formal limit.
    pub formal: bool,
}

impl VariationalValue {
    pub fn new(kind: VariationalKind, a: f64, d: usize, alpha: f64, value: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 2.0) || d == 0 || !(alpha > 0.0 && alpha <= d as f64) {
            return Err(Error::InvalidParams(format!("a = {a}, d = {d}, alpha = {alpha}")));
        }
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParams(format!("variational value {value} must be > 0")));
        }
        Ok(VariationalValue {
            kind,
            a,
            d,
            alpha,
            noise_scale: 1.0,
            theta_scale: 1.0,
            nu: 1.0,
            value,
            formal: alpha == d as f64,
        })
    }

    pub fn with_scales(mut self, noise_scale: f64, theta_scale: f64) -> Result<Self> {
        if !(noise_scale > 0.0 && theta_scale > 0.0) {
            return Err(Error::InvalidParams("scales must be > 0".into()));
        }
        self.noise_scale = noise_scale;
        self.theta_scale = theta_scale;
        Ok(self)
    }

    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParams(format!("nu = {nu} must be > 0")));
        }
        self.nu = nu;
        Ok(self)
    }
}

fn need_m_domain(a: f64, alpha: f64) -> Result<()> {
    if alpha >= 2.0 * a {
        return Err(Error::ExponentDomain(format!("needs alpha < 2a (a = {a}, alpha = {alpha})")));
    }
    Ok(())
}

fn need_e_domain(a: f64, alpha: f64) -> Result<()> {
    if alpha >= a {
        return Err(Error::ExponentDomain(format!("needs alpha < a (a = {a}, alpha = {alpha})")));
    }
    Ok(())
}

/// M(Θγ,θ) = Θ^{a/(2a-α)} θ^{-α/(2a-α)} M(γ,1).
pub fn scale_m(m1: f64, a: f64, alpha: f64, noise_scale: f64, theta_scale: f64) -> f64 {
    let e = 2.0 * a - alpha;
    m1 * noise_scale.powf(a / e) * theta_scale.powf(-alpha / e)
}

/// E(Θγ,θ) = Θ^{a/(a-α)} θ^{-α/(a-α)} E(γ,1).
pub fn scale_e(e1: f64, a: f64, alpha: f64, noise_scale: f64, theta_scale: f64) -> f64 {
    let e = a - alpha;
    e1 * noise_scale.powf(a / e) * theta_scale.powf(-alpha / e)
}

/// M(γ,1) from the Sobolev best constant σ.
pub fn m_from_sigma(sigma: f64, a: f64, alpha: f64) -> Result<f64> {
    need_m_domain(a, alpha)?;
    let e = 2.0 * a - alpha;
    Ok((alpha / a).powf(alpha / e) * (e / (2.0 * a)) * sigma.powf(a / e))
}

/// E(γ,1) from σ.
pub fn e_from_sigma(sigma: f64, a: f64, alpha: f64) -> Result<f64> {
    need_e_domain(a, alpha)?;
    let e = a - alpha;
    Ok((2.0 * alpha / a).powf(alpha / e) * (e / a) * sigma.powf(a / e))
}

fn sigma_from_m(m1: f64, a: f64, alpha: f64) -> Result<f64> {
    need_m_domain(a, alpha)?;
    let e = 2.0 * a - alpha;
    Ok((m1 / ((alpha / a).powf(alpha / e) * (e / (2.0 * a)))).powf(e / a))
}

fn sigma_from_e(e1: f64, a: f64, alpha: f64) -> Result<f64> {
    need_e_domain(a, alpha)?;
    let e = a - alpha;
    Ok((e1 / ((2.0 * alpha / a).powf(alpha / e) * (e / a))).powf(e / a))
}

/// E from M at the same (Θ, θ), exponent (2a-α)/(a-α) throughout.
pub fn e_from_m(m: f64, a: f64, alpha: f64) -> Result<f64> {
    need_e_domain(a, alpha)?;
    let p = (2.0 * a - alpha) / (a - alpha);
    Ok(((a - alpha) / a) * 2f64.powf(alpha / (a - alpha)) * ((2.0 * a - alpha) / (2.0 * a)).powf(-p) * m.powf(p))
}

/// 𝐌 from M(Θγ,1).
pub fn bold_m_from_m(m: f64, a: f64, alpha: f64) -> Result<f64> {
    need_e_domain(a, alpha)?;
    let p = (2.0 * a - alpha) / (a - alpha);
    Ok(2f64.powf(-a / (a - alpha)) * ((a - alpha) / a) * (2.0 * a / (2.0 * a - alpha)).powf(p) * m.powf(p))
}

/// ρ_ν(Θγ) from M(Θγ,1).
pub fn rho_from_m(m: f64, a: f64, alpha: f64, nu: f64) -> f64 {
    nu.powf(-alpha / a) * m.powf(2.0 - alpha / a)
}

/// Unscaled M(γ,1) underlying any variational value.
fn canonical_m(v: &VariationalValue) -> Result<f64> {
    let (a, al) = (v.a, v.alpha);
    need_m_domain(a, al)?;
    let unscale = |m: f64| m / scale_m(1.0, a, al, v.noise_scale, v.theta_scale);
    match v.kind {
        VariationalKind::M => Ok(unscale(v.value)),
        VariationalKind::Sigma => m_from_sigma(v.value, a, al),
        VariationalKind::E => {
            let e1 = v.value / scale_e(1.0, a, al, v.noise_scale, v.theta_scale);
            m_from_sigma(sigma_from_e(e1, a, al)?, a, al)
        }
        VariationalKind::Rho => {
            let m_theta = (v.value * v.nu.powf(al / a)).powf(a / (2.0 * a - al));
            Ok(m_theta / scale_m(1.0, a, al, v.noise_scale, 1.0))
        }
        VariationalKind::BoldM => {
            need_e_domain(a, al)?;
            let unit = bold_m_from_m(1.0, a, al)?;
            let p = (2.0 * a - al) / (a - al);
            let m_theta = (v.value / unit).powf(1.0 / p);
            Ok(m_theta / scale_m(1.0, a, al, v.noise_scale, 1.0))
        }
    }
}

/// Converts between the constants using the closed-form relations and the
/// Θ/θ power laws.
pub fn variational_convert(from: &VariationalValue, to: VariationalKind) -> Result<VariationalValue> {
    let (a, al) = (from.a, from.alpha);
    let value = if to == from.kind {
        from.value
    } else {
        let m1 = canonical_m(from)?;
        match to {
            VariationalKind::M => scale_m(m1, a, al, from.noise_scale, from.theta_scale),
            VariationalKind::Sigma => sigma_from_m(m1, a, al)?,
            VariationalKind::E => {
                let m = scale_m(m1, a, al, from.noise_scale, from.theta_scale);
                e_from_m(m, a, al)?
            }
            VariationalKind::Rho => rho_from_m(scale_m(m1, a, al, from.noise_scale, 1.0), a, al, from.nu),
            VariationalKind::BoldM => bold_m_from_m(scale_m(m1, a, al, from.noise_scale, 1.0), a, al)?,
        }
    };
    Ok(VariationalValue { kind: to, value, ..*from })
}

/// Moves a value to new (Θ, θ) keeping the underlying noise shape.
pub fn rescale(v: &VariationalValue, noise_scale: f64, theta_scale: f64) -> Result<VariationalValue> {
    let m1 = canonical_m(v)?;
    let unit = VariationalValue { kind: VariationalKind::M, value: m1, noise_scale: 1.0, theta_scale: 1.0, ..*v };
    let target = VariationalValue { kind: VariationalKind::M, ..unit }.with_scales(noise_scale, theta_scale)?;
    let m = scale_m(m1, v.a, v.alpha, noise_scale, theta_scale);
    variational_convert(&VariationalValue { value: m, ..target }, v.kind)
}

/// M_{2,1}(δ₀).
pub fn m_white_1d() -> f64 {
    0.75 * (1.0f64 / 6.0).cbrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownConstant {
    pub a: f64,
    pub d: usize,
    pub noise: &'static str,
    pub value: Option<f64>,
    pub note: &'static str,
}

/// Table of known values of M_{a,d}.
pub fn known_constants() -> Vec<KnownConstant> {
    vec![
        KnownConstant { a: 2.0, d: 1, noise: "white", value: Some(m_white_1d()), note: "closed form (3/4)(1/6)^(1/3)" },
        KnownConstant {
            a: 2.0,
            d: 2,
            noise: "white",
            value: None,
            note: "optimizer required: given by the Gagliardo-Nirenberg best constant",
        },
        KnownConstant {
            a: 2.0,
            d: 3,
            noise: "white",
            value: None,
            note: "optimizer required: given by the Gagliardo-Nirenberg best constant",
        },
    ]
}

/// Looks up a tabulated constant; `None` when absent.
pub fn lookup_constant(a: f64, d: usize, white: bool) -> Option<KnownConstant> {
    let tag = if white { "white" } else { "riesz" };
    known_constants().into_iter().find(|k| k.a == a && k.d == d && k.noise == tag)
}

/// Noise for the direct optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum VariationalNoise {
    /// γ = δ₀ in d ∈ {1, 2}.
    White { d: usize },
    Riesz(NoiseSpec),
}

impl VariationalNoise {
    pub fn alpha(&self) -> f64 {
        match self {
            VariationalNoise::White { d } => *d as f64,
            VariationalNoise::Riesz(s) => s.alpha(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VariationalNoise::White { d } => *d,
            VariationalNoise::Riesz(s) => s.dim(),
        }
    }
}

impl From<NoiseSpec> for VariationalNoise {
    fn from(s: NoiseSpec) -> Self {
        match s.kind() {
            NoiseKind::White1D => VariationalNoise::White { d: 1 },
            NoiseKind::RieszProduct => VariationalNoise::Riesz(s),
        }
    }
}

/// Radial trial profile g(r) = exp(-r^q + Σ_k c_k (1-x_k²)³₊), x_k = (r - spacing·(k+1))/spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub q: f64,
    pub bumps: Vec<f64>,
    pub spacing: f64,
}

impl RadialProfile {
    pub fn generalized_gaussian(q: f64) -> Self {
        RadialProfile { q, bumps: Vec::new(), spacing: 0.5 }
    }

    fn knots(&self) -> Vec<f64> {
        (0..=self.bumps.len() + 1).map(|k| k as f64 * self.spacing).filter(|&x| x > 0.0).collect()
    }

    /// (log g, d log g / dr).
    fn log_and_slope(&self, r: f64) -> (f64, f64) {
        let mut lg = -r.powf(self.q);
        let mut sl = if r > 0.0 { -self.q * r.powf(self.q - 1.0) } else { 0.0 };
        for (k, c) in self.bumps.iter().enumerate() {
            let center = self.spacing * (k + 1) as f64;
            let dist = (r - center) / self.spacing;
            if dist.abs() < 1.0 {
                let w = 1.0 - dist * dist;
                lg += c * w * w * w;
                sl -= c * 6.0 * dist * w * w / self.spacing;
            }
        }
        (lg, sl)
    }

    fn value(&self, r: f64) -> f64 {
        self.log_and_slope(r).0.exp()
    }

    fn support(&self) -> f64 {
        let tail = 46f64.powf(1.0 / self.q);
        let bump_end = self.spacing * (self.bumps.len() + 1) as f64;
        let bump_max = self.bumps.iter().cloned().fold(0.0, f64::max);
        tail.max(bump_end + (46.0 + bump_max).powf(1.0 / self.q).min(50.0))
    }
}

/// Trial families for [`estimate_m_direct`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TrialFamily {
    /// The single member exp(-(r/scale)^q).
    Fixed { q: f64, scale: f64 },
    /// exp(-(r/s)^q), q in [q_min, q_max], s optimized in closed form.
    GeneralizedGaussian { q_min: f64, q_max: f64 },
    /// Generalized Gaussian with `knots` hat-function corrections to log g.
    RadialSpline { q_min: f64, q_max: f64, knots: usize },
}

impl Default for TrialFamily {
    fn default() -> Self {
        TrialFamily::GeneralizedGaussian { q_min: 1.0, q_max: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptConfig {
    pub max_iter: usize,
    pub ftol: f64,
    /// Number of q sub-brackets searched in parallel.
    pub restarts: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig { max_iter: 400, ftol: 1e-10, restarts: 4 }
    }
}

/// Interaction and energy of a unit-scale profile after L² normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTerms {
    /// ⟨g²*g², γ⟩^{1/2}
    pub interaction: f64,
    /// E_a(g, g)
    pub energy: f64,
}

impl ProfileTerms {
    /// Functional at dilation g(·/s): interaction·s^{-α/2} - energy·s^{-a}/2.
    pub fn at_scale(&self, a: f64, alpha: f64, s: f64) -> f64 {
        self.interaction * s.powf(-alpha / 2.0) - 0.5 * self.energy * s.powf(-a)
    }

    /// sup over dilations, in closed form.
    pub fn best_scale(&self, a: f64, alpha: f64) -> (f64, f64) {
        let u = (alpha * self.interaction / (a * self.energy)).powf(1.0 / (a - alpha / 2.0));
        let value = self.interaction * u.powf(alpha / 2.0) * (1.0 - alpha / (2.0 * a));
        (1.0 / u, value)
    }
}

fn radial_integral<F: Fn(f64) -> f64 + Copy>(f: F, top: f64, knots: &[f64]) -> Result<f64> {
    let mut br: Vec<f64> = knots.iter().cloned().filter(|&k| k < top).collect();
    br.extend([1e-3 * top, 1e-2 * top, 0.1 * top, 0.3 * top]);
    br.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(integrate(f, 0.0, top, &br, Tolerance::rel(1e-11))?.value)
}

/// Composite Gauss-Legendre nodes on graded panels of [0, top].
fn graded_nodes(top: f64, uniform: usize, knots: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(15);
    let mut edges: Vec<f64> = (0..=uniform).map(|k| top * k as f64 / uniform as f64).collect();
    let first = top / uniform as f64;
    for k in 1..30 {
        edges.push(first * 0.5f64.powi(k));
    }
    edges.extend(knots.iter().cloned().filter(|&k| k < top));
    edges.sort_by(|p, q| p.partial_cmp(q).unwrap());
    edges.dedup_by(|p, q| (*p - *q).abs() < 1e-14 * top);
    let (mut nodes, mut weights) = (Vec::new(), Vec::new());
    for e in edges.windows(2) {
        let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(c + h * xi);
            weights.push(h * wi);
        }
    }
    (nodes, weights)
}

/// Radial Fourier transform ∫ h(|x|) e^{-ixξ} dx at |ξ| = rho, d ∈ {1,2,3},
/// from precomputed h on the nodes.
fn radial_fourier(d: usize, nodes: &[f64], weights: &[f64], h: &[f64], rho: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..nodes.len() {
        let r = nodes[i];
        let k = match d {
            1 => 2.0 * (rho * r).cos(),
            2 => 2.0 * PI * r * bessel_j0(rho * r),
            _ => {
                if rho * r < 1e-8 {
                    4.0 * PI * r * r
                } else {
                    4.0 * PI * r * (rho * r).sin() / rho
                }
            }
        };
        s += weights[i] * h[i] * k;
    }
    s
}

const FREQ_TOP: f64 = 300.0;

/// Spectral-side terms: returns (∫R^{α-1}|F(g²)|² dR, ∫R^{a+d-1}|Fg|² dR).
fn spectral_terms(profile: &RadialProfile, d: usize, a: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParams(format!("spectral trial functionals support d <= 3, got d = {d}")));
    }
    let top = profile.support();
    let uniform = ((FREQ_TOP * top / 5.0).ceil() as usize).max(64);
    let (nodes, weights) = graded_nodes(top, uniform, &profile.knots());
    let g: Vec<f64> = nodes.iter().map(|&r| profile.value(r)).collect();
    let g2: Vec<f64> = g.iter().map(|v| v * v).collect();
    let mut edges = vec![0.0];
    for k in (1..40).rev() {
        edges.push(0.05 * 0.5f64.powi(k));
    }
    let mut e = 0.05;
    while e < FREQ_TOP / 4.0 {
        edges.push(e);
        e *= 1.3;
    }
    for k in 0..=24 {
        edges.push(FREQ_TOP / 4.0 * (1.0 + 3.0 * k as f64 / 24.0));
    }
    let (x, w) = gauss_legendre(15);
    let mut freq = Vec::new();
    for p in edges.windows(2) {
        let (c, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        for (xi, wi) in x.iter().zip(&w) {
            freq.push((c + h * xi, h * wi));
        }
    }
    let parts: Vec<(f64, f64, f64)> = freq
        .par_iter()
        .map(|&(rho, wt)| {
            let fg = radial_fourier(d, &nodes, &weights, &g, rho);
            let fg2 = radial_fourier(d, &nodes, &weights, &g2, rho);
            (rho, wt * rho.powf(alpha - 1.0) * fg2 * fg2, wt * rho.powf(a + d as f64 - 1.0) * fg * fg)
        })
        .collect();
    let total = |pick: fn(&(f64, f64, f64)) -> f64| -> f64 {
        let body: f64 = parts.iter().map(pick).sum();
        body + geometric_tail(&parts, pick)
    };
    Ok((total(|p| p.1), total(|p| p.2)))
}

/// Continues the last two octaves [T/4, T/2], [T/2, T] as a geometric series.
fn geometric_tail(parts: &[(f64, f64, f64)], pick: fn(&(f64, f64, f64)) -> f64) -> f64 {
    let octave = |lo: f64, hi: f64| -> f64 { parts.iter().filter(|p| p.0 > lo && p.0 <= hi).map(pick).sum() };
    let near = octave(FREQ_TOP / 2.0, FREQ_TOP);
    let far = octave(FREQ_TOP / 4.0, FREQ_TOP / 2.0);
    let ratio = near / far;
    if far > 0.0 && ratio > 0.0 && ratio < 0.9 {
        near * ratio / (1.0 - ratio)
    } else {
        0.0
    }
}

/// Interaction and energy of the L²-normalized unit-scale profile.
///
/// The white interaction and the a = 2 energy are computed in real space;
/// everything else through radial Fourier transforms.
pub fn profile_terms(a: f64, noise: &VariationalNoise, profile: &RadialProfile) -> Result<ProfileTerms> {
    profile_terms_with(a, noise, profile, false)
}

fn profile_terms_with(a: f64, noise: &VariationalNoise, profile: &RadialProfile, spectral_only: bool) -> Result<ProfileTerms> {
    let d = noise.dim();
    let alpha = noise.alpha();
    let sphere = sphere_area(d);
    let knots = profile.knots();
    let top = profile.support();
    let dm1 = (d - 1) as i32;
    let norm = sphere * radial_integral(|r| profile.value(r).powi(2) * r.powi(dm1), top, &knots)?;
    let need_spectral = spectral_only || a != 2.0 || matches!(noise, VariationalNoise::Riesz(_));
    let spectral = if need_spectral { Some(spectral_terms(profile, d, a, alpha)?) } else { None };
    let interaction_sq = match noise {
        VariationalNoise::White { .. } if !spectral_only => {
            sphere * radial_integral(|r| profile.value(r).powi(4) * r.powi(dm1), top, &knots)?
        }
        VariationalNoise::White { .. } => sphere * spectral.unwrap().0 / (2.0 * PI).powi(d as i32),
        VariationalNoise::Riesz(spec) => spec.radial_mass() * spectral.unwrap().0,
    };
    let energy = if a == 2.0 && !spectral_only {
        sphere
            * radial_integral(
                |r| {
                    let (lg, sl) = profile.log_and_slope(r);
                    let gp = lg.exp() * sl;
                    gp * gp * r.powi(dm1)
                },
                top,
                &knots,
            )?
    } else {
        sphere * spectral.unwrap().1 / (2.0 * PI).powi(d as i32)
    };
    Ok(ProfileTerms { interaction: interaction_sq.sqrt() / norm, energy: energy / norm })
}

/// Result of the direct optimizer: a lower bound on M_{a,d}(γ, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectEstimate {
    pub value: VariationalValue,
    pub profile: RadialProfile,
    pub scale: f64,
    /// Optimizer stopped on its iteration budget.
    pub stalled: bool,
    pub evaluations: usize,
}

fn check_direct(a: f64, noise: &VariationalNoise) -> Result<()> {
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::InvalidParams(format!("a = {a} must lie in (0, 2]")));
    }
    match noise {
        VariationalNoise::White { d } if !(1..=2).contains(d) => {
            Err(Error::InvalidNoise(format!("white noise supported for d in {{1, 2}}, got {d}")))
        }
        VariationalNoise::White { d } if (*d as f64) >= 2.0 * a => {
            Err(Error::ExponentDomain(format!("needs d < 2a for white noise (a = {a})")))
        }
        VariationalNoise::Riesz(s) if s.alpha() >= 2.0 * a => {
            Err(Error::ExponentDomain(format!("needs alpha < 2a (a = {a}, alpha = {})", s.alpha())))
        }
        _ => Ok(()),
    }
}

/// Maximizes ⟨g²*g², γ⟩^{1/2} - E_a(g,g)/2 over a trial family.
///
/// The supremum over a subfamily never exceeds M, so the result is a lower
/// bound up to quadrature error.
pub fn estimate_m_direct(a: f64, noise: &VariationalNoise, family: &TrialFamily, opt: &OptConfig) -> Result<DirectEstimate> {
    check_direct(a, noise)?;
    let alpha = noise.alpha();
    let d = noise.dim();
    let wrap = |value: f64, profile: RadialProfile, scale: f64, stalled: bool, evaluations: usize| -> Result<DirectEstimate> {
        let mut v = VariationalValue::new(VariationalKind::M, a, d, alpha, value.max(f64::MIN_POSITIVE))?;
        v.value = value;
        Ok(DirectEstimate { value: v, profile, scale, stalled, evaluations })
    };
    let best_q = |q_min: f64, q_max: f64| -> Result<(f64, f64, usize)> {
        if !(q_min > 0.0 && q_max >= q_min) {
            return Err(Error::InvalidParams(format!("bad shape range [{q_min}, {q_max}]")));
        }
        let k = opt.restarts.max(1);
        let width = (q_max - q_min) / k as f64;
        let runs: Vec<(f64, f64, usize)> = (0..k)
            .into_par_iter()
            .map(|i| {
                let lo = q_min + width * i as f64;
                let mut count = 0;
                let (q, v) = golden_max(
                    |q| {
                        count += 1;
                        profile_terms(a, noise, &RadialProfile::generalized_gaussian(q))
                            .map(|t| t.best_scale(a, alpha).1)
                            .unwrap_or(f64::NEG_INFINITY)
                    },
                    lo,
                    lo + width,
                    1e-5,
                );
                (q, v, count)
            })
            .collect();
        let evals = runs.iter().map(|r| r.2).sum();
        let best = runs.into_iter().fold((q_min, f64::NEG_INFINITY, 0), |b, r| if r.1 > b.1 { r } else { b });
        Ok((best.0, best.1, evals))
    };
    match family {
        TrialFamily::Fixed { q, scale } => {
            let prof = RadialProfile::generalized_gaussian(*q);
            let t = profile_terms(a, noise, &prof)?;
            wrap(t.at_scale(a, alpha, *scale), prof, *scale, false, 1)
        }
        TrialFamily::GeneralizedGaussian { q_min, q_max } => {
            let (q, _, evals) = best_q(*q_min, *q_max)?;
            let prof = RadialProfile::generalized_gaussian(q);
            let (s, v) = profile_terms(a, noise, &prof)?.best_scale(a, alpha);
            wrap(v, prof, s, false, evals)
        }
        TrialFamily::RadialSpline { q_min, q_max, knots } => {
            let (q0, v0, evals) = best_q(*q_min, *q_max)?;
            let spacing = 46f64.powf(1.0 / q0) / (*knots as f64 + 1.0) / 2.0;
            let objective = |x: &[f64]| -> f64 {
                if !(x[0] > 0.5 && x[0] < 8.0) {
                    return f64::NEG_INFINITY;
                }
                let prof = RadialProfile { q: x[0], bumps: x[1..].to_vec(), spacing };
                profile_terms(a, noise, &prof).map(|t| t.best_scale(a, alpha).1).unwrap_or(f64::NEG_INFINITY)
            };
            let mut x0 = vec![q0];
            x0.extend(std::iter::repeat(0.0).take(*knots));
            let res = nelder_mead_max(objective, &x0, 0.1, opt.ftol, opt.max_iter);
            let (x, stalled) = if res.value >= v0 { (res.x, !res.converged) } else { (x0, !res.converged) };
            let prof = RadialProfile { q: x[0], bumps: x[1..].to_vec(), spacing };
            let (s, v) = profile_terms(a, noise, &prof)?.best_scale(a, alpha);
            wrap(v.max(v0), prof, s, stalled, evals + res.iterations)
        }
    }
}

/// a_n = (1/n) log(T_n/(n!)²) with its propagated standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthTerm {
    pub n: usize,
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub terms: Vec<GrowthTerm>,
    /// Extrapolated limit of a_n, an estimate of log ρ.
    pub log_rho: f64,
    pub rho: f64,
}

/// Least-squares fit a_n = L + c/n + e/n² over the supplied orders (two-term
/// fit with three points, three-term fit otherwise).
pub fn rho_from_tn(tn: &[MCEstimate], orders: &[usize]) -> Result<RhoEstimate> {
    if tn.len() != orders.len() {
        return Err(Error::InvalidParams("T_n values and orders differ in length".into()));
    }
    if orders.len() < 3 {
        return Err(Error::InsufficientTerms { needed: 3, got: orders.len() });
    }
    for w in orders.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::InvalidParams("orders must be consecutive".into()));
        }
    }
    let mut terms = Vec::new();
    for (e, &n) in tn.iter().zip(orders) {
        if n == 0 || !(e.value > 0.0) {
            return Err(Error::InvalidParams(format!("T_{n} must be positive with n >= 1")));
        }
        let nf = n as f64;
        let value = (e.value.ln() - 2.0 * ln_gamma(nf + 1.0)) / nf;
        terms.push(GrowthTerm { n, value, std_err: e.std_err / (nf * e.value) });
    }
    let ncoef = if terms.len() >= 4 { 3 } else { 2 };
    let log_rho = least_squares_intercept(&terms, ncoef);
    Ok(RhoEstimate { terms, log_rho, rho: log_rho.exp() })
}

/// Intercept of the fit value ~ Σ_{j<ncoef} c_j n^{-j}.
fn least_squares_intercept(terms: &[GrowthTerm], ncoef: usize) -> f64 {
    let mut ata = vec![vec![0.0; ncoef]; ncoef];
    let mut atb = vec![0.0; ncoef];
    for t in terms {
        let basis: Vec<f64> = (0..ncoef).map(|j| (t.n as f64).powi(-(j as i32))).collect();
        for i in 0..ncoef {
            atb[i] += basis[i] * t.value;
            for j in 0..ncoef {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting
    for c in 0..ncoef {
        let p = (c..ncoef).max_by(|&i, &j| ata[i][c].abs().partial_cmp(&ata[j][c].abs()).unwrap()).unwrap();
        ata.swap(c, p);
        atb.swap(c, p);
        for r in c + 1..ncoef {
            let f = ata[r][c] / ata[c][c];
            for k in c..ncoef {
                ata[r][k] -= f * ata[c][k];
            }
            atb[r] -= f * atb[c];
        }
    }
    let mut x = vec![0.0; ncoef];
    for c in (0..ncoef).rev() {
        let s: f64 = (c + 1..ncoef).map(|k| ata[c][k] * x[k]).sum();
        x[c] = (atb[c] - s) / ata[c][c];
    }
    x[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn white_m(nu: f64) -> VariationalValue {
        VariationalValue::new(VariationalKind::M, 2.0, 1, 1.0, m_white_1d()).unwrap().with_nu(nu).unwrap()
    }

    #[test]
    fn rho_from_known_m() {
        let r1 = variational_convert(&white_m(1.0), VariationalKind::Rho).unwrap();
        assert_relative_eq!(r1.value, 3.0 / (8.0 * 2f64.sqrt()), max_relative = 1e-14);
        let r2 = variational_convert(&white_m(2.0), VariationalKind::Rho).unwrap();
        assert_relative_eq!(r2.value, 0.1875, max_relative = 1e-14);
        let back = variational_convert(&r2, VariationalKind::M).unwrap();
        assert_relative_eq!(back.value, m_white_1d(), max_relative = 1e-13);
    }

    #[test]
    fn scale_round_trip() {
        let base = VariationalValue::new(VariationalKind::M, 1.5, 2, 0.7, 0.31).unwrap();
        let there = rescale(&base, 2.0, 3.0).unwrap();
        assert_relative_eq!(there.value, 0.31 * 2f64.powf(1.5 / 2.3) * 3f64.powf(-0.7 / 2.3), max_relative = 1e-14);
        let back = rescale(&there, 1.0, 1.0).unwrap();
        assert_relative_eq!(back.value, 0.31, max_relative = 1e-12);
    }

    #[test]
    fn bold_m_matches_scaled_e() {
        let (a, al, m) = (1.6, 0.5, 0.27);
        let direct = bold_m_from_m(m, a, al).unwrap();
        let via_e = scale_e(e_from_m(m, a, al).unwrap(), a, al, 0.5, 2.0);
        assert_relative_eq!(direct, via_e, max_relative = 1e-13);
        let v = VariationalValue::new(VariationalKind::M, a, 1, al, m).unwrap();
        let b = variational_convert(&v, VariationalKind::BoldM).unwrap();
        assert_relative_eq!(b.value, direct, max_relative = 1e-14);
        assert_relative_eq!(variational_convert(&b, VariationalKind::M).unwrap().value, m, max_relative = 1e-12);
    }

    #[test]
    fn e_needs_alpha_below_a() {
        let v = VariationalValue::new(VariationalKind::M, 1.0, 2, 1.2, 0.3).unwrap();
        assert!(matches!(variational_convert(&v, VariationalKind::E), Err(Error::ExponentDomain(_))));
        assert!(variational_convert(&v, VariationalKind::Rho).is_ok());
    }

    #[test]
    fn known_table() {
        let k = lookup_constant(2.0, 1, true).unwrap();
        assert_relative_eq!(k.value.unwrap(), 0.4127409, max_relative = 1e-7);
        assert!(lookup_constant(2.0, 2, true).unwrap().value.is_none());
        assert!(lookup_constant(1.5, 1, false).is_none());
    }

    #[test]
    fn fixed_member_value() {
        // g = e^{-r²} in d = 2: interaction 1/√π, energy 2
        let e = estimate_m_direct(2.0, &VariationalNoise::White { d: 2 }, &TrialFamily::Fixed { q: 2.0, scale: 1.0 }, &OptConfig::default())
            .unwrap();
        assert_relative_eq!(e.value.value, 1.0 / PI.sqrt() - 1.0, max_relative = 1e-10);
        // Gaussian with the best dilation gives 1/(4π)
        let t = profile_terms(2.0, &VariationalNoise::White { d: 2 }, &RadialProfile::generalized_gaussian(2.0)).unwrap();
        assert_relative_eq!(t.best_scale(2.0, 2.0).1, 1.0 / (4.0 * PI), max_relative = 1e-10);
    }

    #[test]
    fn riesz_interaction_closed_form() {
        // g = e^{-x²}: ⟨g²*g², |x|^{-α}⟩ = (√π/2) Γ((1-α)/2), ‖g‖² = √(π/2)
        let al = 0.4;
        let spec = NoiseSpec::riesz_isotropic(1, al).unwrap();
        let t = profile_terms(2.0, &VariationalNoise::Riesz(spec), &RadialProfile::generalized_gaussian(2.0)).unwrap();
        let exact = (PI.sqrt() / 2.0 * crate::special::gamma((1.0 - al) / 2.0)).sqrt() / (PI / 2.0).sqrt();
        assert_relative_eq!(t.interaction, exact, max_relative = 1e-6);
        assert_relative_eq!(t.energy, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn spectral_route_matches_real_space() {
        for d in [1usize, 2] {
            let noise = VariationalNoise::White { d };
            for q in [1.5, 2.0, 2.7] {
                let prof = RadialProfile { q, bumps: vec![0.2, -0.1], spacing: 0.6 };
                let real = profile_terms_with(2.0, &noise, &prof, false).unwrap();
                let spec = profile_terms_with(2.0, &noise, &prof, true).unwrap();
                assert_relative_eq!(real.interaction, spec.interaction, max_relative = 1e-7);
                assert_relative_eq!(real.energy, spec.energy, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn white_1d_optimizer_brackets_known_value() {
        let e = estimate_m_direct(2.0, &VariationalNoise::White { d: 1 }, &TrialFamily::default(), &OptConfig::default()).unwrap();
        let m = m_white_1d();
        assert!(e.value.value >= 0.995 * m && e.value.value <= m + 1e-3, "{}", e.value.value);
    }

    #[test]
    fn richer_family_never_worse() {
        let noise = VariationalNoise::White { d: 1 };
        let opt = OptConfig { max_iter: 150, ..Default::default() };
        let gg = estimate_m_direct(2.0, &noise, &TrialFamily::default(), &opt).unwrap();
        let sp = estimate_m_direct(2.0, &noise, &TrialFamily::RadialSpline { q_min: 1.0, q_max: 4.0, knots: 3 }, &opt).unwrap();
        assert!(sp.value.value >= gg.value.value);
        assert!(sp.value.value <= m_white_1d() + 1e-6);
    }

    #[test]
    fn rho_fit() {
        let mk = |n: usize, a: f64| MCEstimate {
            value: (n as f64 * a + 2.0 * ln_gamma(n as f64 + 1.0)).exp(),
            std_err: 0.0,
            samples: 1,
            seed: 0,
        };
        let orders = [2usize, 3, 4, 5];
        let flat: Vec<MCEstimate> = orders.iter().map(|&n| mk(n, -1.2)).collect();
        assert_relative_eq!(rho_from_tn(&flat, &orders).unwrap().log_rho, -1.2, max_relative = 1e-10);
        let curved: Vec<MCEstimate> = orders.iter().map(|&n| mk(n, -1.7 + 0.4 / n as f64 - 0.1 / (n * n) as f64)).collect();
        assert_relative_eq!(rho_from_tn(&curved, &orders).unwrap().log_rho, -1.7, max_relative = 1e-9);
        assert_eq!(rho_from_tn(&flat[..2], &orders[..2]), Err(Error::InsufficientTerms { needed: 3, got: 2 }));
        // a_1 = log C_μ for T_1 = 1/4
        let one = rho_from_tn(&[MCEstimate::exact(0.25, 1, 0), mk(2, -1.4), mk(3, -1.45)], &[1, 2, 3]).unwrap();
        assert_relative_eq!(one.terms[0].value, 0.25f64.ln(), max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn sigma_round_trips(a in 0.5f64..2.0, frac in 0.05f64..0.95, sigma in 0.1f64..5.0) {
            let al = frac * a;
            let s = VariationalValue::new(VariationalKind::Sigma, a, 3, al.min(2.9), sigma).unwrap();
            for kind in [VariationalKind::M, VariationalKind::E] {
                let there = variational_convert(&s, kind).unwrap();
                let back = variational_convert(&there, VariationalKind::Sigma).unwrap();
                prop_assert!((back.value / sigma - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn closed_form_relations_agree(a in 0.5f64..2.0, frac in 0.05f64..0.95, sigma in 0.1f64..5.0) {
            let al = frac * a;
            let e1 = e_from_sigma(sigma, a, al).unwrap();
            let e2 = e_from_m(m_from_sigma(sigma, a, al).unwrap(), a, al).unwrap();
            prop_assert!((e1 / e2 - 1.0).abs() < 1e-10);
        }

        #[test]
        fn scaling_laws_compose(big in 0.2f64..5.0, small in 0.2f64..5.0, m in 0.05f64..2.0) {
            let v = VariationalValue::new(VariationalKind::M, 1.8, 2, 0.9, m).unwrap();
            let w = rescale(&v, big, small).unwrap();
            let e_direct = variational_convert(&w, VariationalKind::E).unwrap().value;
            let e_scaled = scale_e(e_from_m(m, 1.8, 0.9).unwrap(), 1.8, 0.9, big, small);
            prop_assert!((e_direct / e_scaled - 1.0).abs() < 1e-11);
        }
    }
}
