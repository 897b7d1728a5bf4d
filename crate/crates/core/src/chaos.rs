//! Wiener-chaos moment machinery: C_μ, the permutation integrals T_n, the
//! kernel norms ‖f̃_n(·,0,1)‖², second-moment series with tail bounds,
//! p-moment upper bounds and the T₂ root test.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::classify::{classify_solvability, critical_time, Regime};
use crate::error::{Error, Result};
use crate::kernel::fourier_green;
use crate::mc::{estimate, McConfig, MCEstimate};
use crate::model::{EquationParams, NoiseSpec};
use crate::quad::{integrate_to_infinity, Tolerance};
use crate::special::{ln_gamma, log_sum_exp};

fn check_integrable(params: &EquationParams, spec: &NoiseSpec) -> Result<()> {
    spec.check_against(params)?;
    if 2.0 * params.a <= spec.alpha() {
        return Err(Error::Divergent(format!(
            "C_mu needs 2a > alpha (a = {}, alpha = {})",
            params.a,
            spec.alpha()
        )));
    }
    Ok(())
}

/// C_μ = ∫ (1 + (ν/2)|ξ|^a)^{-2} μ(dξ), reduced to one radial integral.
pub fn c_mu(params: &EquationParams, spec: &NoiseSpec) -> Result<f64> {
    check_integrable(params, spec)?;
    symbol_power_mass(params, spec, 2.0)
}

/// ∫ (1 + (ν/2)|ξ|^a)^{-power} μ(dξ), finite for power > α/a.
fn symbol_power_mass(params: &EquationParams, spec: &NoiseSpec, power: f64) -> Result<f64> {
    let (alpha, a, lam) = (spec.alpha(), params.a, params.lambda());
    if !(power * a > alpha) {
        return Err(Error::Divergent(format!("symbol power {power} needs power * a > alpha")));
    }
    // R = v^{1/α}: ∫ R^{α-1} g(R) dR = (1/α) ∫ g(v^{1/α}) dv
    let g = |v: f64| {
        let rr = v.powf(1.0 / alpha);
        (1.0 + lam * rr.powf(a)).powf(-power)
    };
    let knee = lam.powf(-alpha / a);
    let res = integrate_to_infinity(g, 0.0, &[knee, 10.0 * knee], Tolerance::rel(1e-12))?;
    Ok(spec.radial_mass() * res.value / alpha)
}

/// Tail power e of the proposal density ∝ (1 + (ν/2)|ξ|^a)^{-e} φ(ξ).
///
/// Frequencies that nearly cancel (ξ_i ≈ -ξ_j, both large) keep the chaos
/// integrands at size |ξ|^{-a}, and the importance weights then have finite
/// variance only for e < 2 - α/a + d/(2a). Integrability needs e > α/a. The
/// power sits three quarters of the way up that window (capped at 2).
pub fn proposal_power(a: f64, alpha: f64, d: usize) -> f64 {
    let lower = alpha / a;
    let upper = (2.0 - alpha / a + d as f64 / (2.0 * a)).min(2.0);
    0.25 * lower + 0.75 * upper
}

/// Sampler for ξ with density (1 + (ν/2)|ξ|^a)^{-e} φ(ξ) / Z_e, where e is
/// [`proposal_power`].
///
/// In polar form the radius has density ∝ R^{α-1}(1+λR^a)^{-e}, so
/// λR^a is Beta-prime(α/a, e-α/a). The split of R across blocks has density
/// ∝ ∏ w_i^{α_i-1} on the positive unit sphere (w_i² ~ Dirichlet(α_i/2)),
/// and each block direction is uniform.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    lambda: f64,
    a: f64,
    radial: Beta<f64>,
    splits: Vec<Gamma<f64>>,
    dims: Vec<usize>,
    dim: usize,
    power: f64,
    proposal_mass: f64,
    pub c_mu: f64,
}

impl SpectralSampler {
    pub fn new(params: &EquationParams, spec: &NoiseSpec) -> Result<Self> {
        let c = c_mu(params, spec)?;
        let s = spec.alpha() / params.a;
        let power = proposal_power(params.a, spec.alpha(), spec.dim());
        let proposal_mass = symbol_power_mass(params, spec, power)?;
        let radial = Beta::new(s, power - s).map_err(|e| Error::InvalidParams(e.to_string()))?;
        let splits = spec
            .blocks()
            .iter()
            .map(|b| Gamma::new(b.alpha / 2.0, 1.0).map_err(|e| Error::InvalidParams(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralSampler {
            lambda: params.lambda(),
            a: params.a,
            radial,
            splits,
            dims: spec.blocks().iter().map(|b| b.dim).collect(),
            dim: spec.dim(),
            power,
            proposal_mass,
            c_mu: c,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// (1 + λ|ξ|^a)^{-1}, the Laplace-transformed symbol.
    pub fn symbol(&self, rho: f64) -> f64 {
        1.0 / (1.0 + self.lambda * rho.powf(self.a))
    }

    /// dμ/dq at |ξ| = rho for the proposal density q.
    pub fn inverse_density(&self, rho: f64) -> f64 {
        self.proposal_mass * (1.0 + self.lambda * rho.powf(self.a)).powf(self.power)
    }

    /// Draws one frequency vector into `out`; returns |ξ|.
    pub fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> f64 {
        let x: f64 = self.radial.sample(rng);
        let u = x / (1.0 - x);
        let radius = (u / self.lambda).powf(1.0 / self.a);
        let g: Vec<f64> = self.splits.iter().map(|d| d.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        let mut off = 0;
        for (k, &dk) in self.dims.iter().enumerate() {
            let w = if self.splits.len() == 1 { 1.0 } else { (g[k] / total).sqrt() };
            let block = &mut out[off..off + dk];
            if dk == 1 {
                block[0] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            } else {
                let mut n2 = 0.0;
                for v in block.iter_mut() {
                    *v = StandardNormal.sample(rng);
                    n2 += *v * *v;
                }
                let n = n2.sqrt();
                for v in block.iter_mut() {
                    *v /= n;
                }
            }
            for v in block.iter_mut() {
                *v *= radius * w;
            }
            off += dk;
        }
        radius
    }
}

/// Sorts the n frequency vectors (stored row-wise) lexicographically so that
/// estimators do not depend on the labelling of the draws.
pub fn canonicalize(xi: &mut [f64], dim: usize) {
    let mut rows: Vec<Vec<f64>> = xi.chunks(dim).map(|c| c.to_vec()).collect();
    rows.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    for (k, r) in rows.iter().enumerate() {
        xi[k * dim..(k + 1) * dim].copy_from_slice(r);
    }
}

/// Norms of all subset sums of the n vectors, indexed by bitmask.
pub fn subset_norms(xi: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let size = 1usize << n;
    let mut sums = vec![0.0; size * dim];
    let mut norms = vec![0.0; size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        let prev = mask & (mask - 1);
        let mut n2 = 0.0;
        for c in 0..dim {
            let v = sums[prev * dim + c] + xi[low * dim + c];
            sums[mask * dim + c] = v;
            n2 += v * v;
        }
        norms[mask] = n2.sqrt();
    }
    norms
}

/// Σ over orderings σ of all n indices of ∏_{k=1}^{n} g(k, |ξ_σ(1) + … + ξ_σ(k)|),
/// by dynamic programming over subsets.
pub fn ordered_product_sum<G: Fn(usize, f64) -> f64>(norms: &[f64], n: usize, g: G) -> f64 {
    let size = 1usize << n;
    let mut f = vec![0.0; size];
    f[0] = 1.0;
    for mask in 1..size {
        let k = mask.count_ones() as usize;
        let mut s = 0.0;
        let mut m = mask;
        while m != 0 {
            let bit = m & m.wrapping_neg();
            s += f[mask ^ bit];
            m ^= bit;
        }
        f[mask] = g(k, norms[mask]) * s;
    }
    f[size - 1]
}

fn check_order(n: usize, mc: &McConfig) -> Result<()> {
    if n > mc.n_max {
        return Err(Error::BudgetExceeded(format!("chaos order {n} exceeds n_max = {}", mc.n_max)));
    }
    if n > 20 {
        return Err(Error::BudgetExceeded("chaos orders above 20 are not supported".into()));
    }
    Ok(())
}

/// Importance-weighted integrand of T_n for one draw (already canonicalized).
pub fn t_n_integrand(sampler: &SpectralSampler, xi: &[f64], n: usize) -> f64 {
    let dim = sampler.dim();
    let norms = subset_norms(xi, n, dim);
    let h = ordered_product_sum(&norms, n, |_, rho| sampler.symbol(rho));
    let mut w = h * h;
    for i in 0..n {
        w *= sampler.inverse_density(norms[1 << i]);
    }
    w
}

/// Monte Carlo estimate of T_n = ∫ [Σ_σ ∏_k (1+(ν/2)|Σ_{j≥k} ξ_σ(j)|^a)^{-1}]² μ^{⊗n}(dξ).
pub fn t_n(params: &EquationParams, spec: &NoiseSpec, n: usize, mc: &McConfig) -> Result<MCEstimate> {
    if n == 0 {
        return Err(Error::InvalidParams("T_n is defined for n >= 1".into()));
    }
    check_order(n, mc)?;
    let sampler = SpectralSampler::new(params, spec)?;
    if n == 1 {
        return Ok(MCEstimate::exact(sampler.c_mu, mc.samples, mc.seed));
    }
    let dim = sampler.dim();
    estimate(mc, |rng| {
        let mut xi = vec![0.0; n * dim];
        for k in 0..n {
            sampler.draw(rng, &mut xi[k * dim..(k + 1) * dim]);
        }
        canonicalize(&mut xi, dim);
        t_n_integrand(&sampler, &xi, n)
    })
}

/// Sum over orderings of ∏_k FG(gap_k, |prefix_k|) for one time draw.
fn kernel_product_sum(params: &EquationParams, norms: &[f64], n: usize, gaps: &[f64]) -> f64 {
    ordered_product_sum(norms, n, |k, rho| fourier_green(params, gaps[k - 1], rho).unwrap_or(f64::NAN))
}

/// Ordered uniform times on the unit simplex, returned as the gaps
/// t_{k+1} - t_k, k = 1..n, with t_{n+1} = 1.
fn simplex_gaps(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    u.sort_by(|p, q| p.partial_cmp(q).unwrap());
    (0..n).map(|k| if k + 1 < n { u[k + 1] - u[k] } else { 1.0 - u[k] }).collect()
}

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Importance-weighted integrand of ‖f̃_n(·,0,1)‖² for one canonicalized
/// frequency draw and a set of independent time draws (unbiased U-statistic
/// for the square of the time integral).
pub fn fn_norm_integrand(
    params: &EquationParams,
    sampler: &SpectralSampler,
    xi: &[f64],
    n: usize,
    gap_draws: &[Vec<f64>],
) -> f64 {
    let norms = subset_norms(xi, n, sampler.dim());
    let hs: Vec<f64> = gap_draws.iter().map(|g| kernel_product_sum(params, &norms, n, g)).collect();
    let m = hs.len() as f64;
    let s: f64 = hs.iter().sum();
    let s2: f64 = hs.iter().map(|h| h * h).sum();
    let mean_sq = (s * s - s2) / (m * (m - 1.0));
    // simplex volume 1/n! and symmetrization 1/n!, each squared
    let scale = (-4.0 * ln_factorial(n)).exp();
    let mut w = mean_sq * scale;
    for i in 0..n {
        w *= sampler.inverse_density(norms[1 << i]);
    }
    w
}

/// Monte Carlo estimate of ‖f̃_n(·,0,1)‖²_{H^{⊗n}}.
pub fn fn_norm_sq(params: &EquationParams, spec: &NoiseSpec, n: usize, mc: &McConfig) -> Result<MCEstimate> {
    if n == 0 {
        return Ok(MCEstimate::exact(1.0, mc.samples, mc.seed));
    }
    check_order(n, mc)?;
    let sampler = SpectralSampler::new(params, spec)?;
    let dim = sampler.dim();
    let draws = mc.time_draws.max(2);
    estimate(mc, |rng| {
        let mut xi = vec![0.0; n * dim];
        for k in 0..n {
            sampler.draw(rng, &mut xi[k * dim..(k + 1) * dim]);
        }
        canonicalize(&mut xi, dim);
        let gaps: Vec<Vec<f64>> = (0..draws).map(|_| simplex_gaps(rng, n)).collect();
        fn_norm_integrand(params, &sampler, &xi, n, &gaps)
    })
}

/// ‖f̃_n(·,0,1)‖² together with its order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosNormSeq {
    pub n: usize,
    pub norm_sq_at_1: MCEstimate,
}

impl ChaosNormSeq {
    /// ‖f̃_n(·,0,t)‖² = t^{κn} ‖f̃_n(·,0,1)‖².
    pub fn at_time(&self, t: f64, kappa: f64) -> f64 {
        t.powf(kappa * self.n as f64) * self.norm_sq_at_1.value
    }
}

/// Norms for n = 0..=n_terms, each with its own substream seed offset.
pub fn chaos_norms(params: &EquationParams, spec: &NoiseSpec, n_terms: usize, mc: &McConfig) -> Result<Vec<ChaosNormSeq>> {
    (0..=n_terms)
        .map(|n| {
            let cfg = McConfig { seed: mc.seed.wrapping_add(n as u64), ..*mc };
            let mut e = fn_norm_sq(params, spec, n, &cfg)?;
            e.seed = mc.seed;
            Ok(ChaosNormSeq { n, norm_sq_at_1: e })
        })
        .collect()
}

/// Partial sum of the second-moment series with its statistical error and a
/// bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMoment {
    pub value: f64,
    pub std_err: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// ln of the bound θⁿ n! t^{κn} (2^κ C_μ)ⁿ / Γ(κn+1) on the n-th term.
fn ln_term_bound(n: usize, theta: f64, t: f64, kappa: f64, cmu: f64) -> f64 {
    let nf = n as f64;
    nf * (theta.ln() + kappa * t.ln() + kappa * 2f64.ln() + cmu.ln()) + ln_factorial(n) - ln_gamma(kappa * nf + 1.0)
}

/// Σ_{n>N} of a positive series given by its log-terms, or +∞ when the terms
/// do not decay.
fn tail_sum<F: Fn(usize) -> f64>(from: usize, ln_term: F) -> f64 {
    let mut logs = Vec::new();
    let mut prev = f64::INFINITY;
    let mut n = from;
    loop {
        let l = ln_term(n);
        if l == f64::NEG_INFINITY {
            break;
        }
        logs.push(l);
        let acc = log_sum_exp(&logs);
        if l < prev && l < acc + (1e-17f64).ln() {
            break;
        }
        if n > from + 200_000 {
            return f64::INFINITY;
        }
        if n > from + 50 && l >= prev {
            // non-decreasing terms far out: divergent
            return f64::INFINITY;
        }
        prev = l;
        n += 1;
    }
    if logs.is_empty() {
        0.0
    } else {
        log_sum_exp(&logs).exp()
    }
}

pub(crate) fn is_global(r: Regime) -> bool {
    matches!(r, Regime::GlobalLp | Regime::GlobalBoundaryWhite1D)
}

/// Second moment E[u(t,0)²] ≈ Σ_{n≤N} θⁿ n! t^{κn} ‖f̃_n(·,0,1)‖² from
/// precomputed norms (n = 0..=N in order).
///
/// In the local regime `t_limit` must be supplied and exceed t.
pub fn second_moment_from_norms(
    params: &EquationParams,
    spec: &NoiseSpec,
    t: f64,
    norms: &[ChaosNormSeq],
    t_limit: Option<f64>,
) -> Result<SecondMoment> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("time t = {t} must be > 0")));
    }
    if params.theta == 0.0 {
        return Ok(SecondMoment { value: 1.0, std_err: 0.0, tail_bound: 0.0, terms: norms.len() });
    }
    let v = classify_solvability(params, spec)?;
    if v.regime == Regime::LocalLp {
        let lim = t_limit.unwrap_or(0.0);
        if t >= lim {
            return Err(Error::OutsideConvergence { t, limit: lim });
        }
    } else if !is_global(v.regime) {
        return Err(Error::OutsideConvergence { t, limit: 0.0 });
    }
    let kappa = params.kappa(spec.alpha());
    let cmu = c_mu(params, spec)?;
    let (mut value, mut var) = (0.0, 0.0);
    for s in norms {
        let nf = s.n as f64;
        let ln_c = nf * params.theta.ln() + ln_factorial(s.n) + kappa * nf * t.ln();
        let c = ln_c.exp();
        value += c * s.norm_sq_at_1.value;
        var += (c * s.norm_sq_at_1.std_err).powi(2);
    }
    let next = norms.last().map(|s| s.n + 1).unwrap_or(0);
    let tail = tail_sum(next, |n| ln_term_bound(n, params.theta, t, kappa, cmu));
    Ok(SecondMoment { value, std_err: var.sqrt(), tail_bound: tail, terms: norms.len() })
}

/// Second moment with norms estimated on the fly for n = 0..=n_terms.
pub fn second_moment(
    params: &EquationParams,
    spec: &NoiseSpec,
    t: f64,
    n_terms: usize,
    mc: &McConfig,
) -> Result<SecondMoment> {
    if params.theta == 0.0 {
        return Ok(SecondMoment { value: 1.0, std_err: 0.0, tail_bound: 0.0, terms: n_terms + 1 });
    }
    let norms = chaos_norms(params, spec, n_terms, mc)?;
    let limit = match classify_solvability(params, spec)?.regime {
        Regime::LocalLp => Some(estimate_t2(params, spec, &norms, None)?.lower),
        _ => None,
    };
    second_moment_from_norms(params, spec, t, &norms, limit)
}

/// Upper bounds on ‖u(t,0)‖_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PMomentBound {
    /// min of the two routes.
    pub value: f64,
    /// Σ θ^{n/2}(p-1)^{n/2} √(n!) ‖f̃_n(·,0,t)‖ plus tail.
    pub direct: f64,
    /// ‖u(t(p-1)^{1/κ},0)‖₂ plus tail.
    pub rescaled: f64,
}

/// Upper bound on ‖u(t,0)‖_p from chaos norms (n = 0..=N) in the global regime.
pub fn p_moment_upper(
    params: &EquationParams,
    spec: &NoiseSpec,
    p: f64,
    t: f64,
    norms: &[ChaosNormSeq],
) -> Result<PMomentBound> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParams(format!("moment order p = {p} must be >= 2")));
    }
    let v = classify_solvability(params, spec)?;
    if !is_global(v.regime) {
        return Err(Error::OutsideConvergence { t, limit: 0.0 });
    }
    let kappa = params.kappa(spec.alpha());
    let cmu = c_mu(params, spec)?;
    let theta = params.theta;
    let mut direct = 0.0;
    for s in norms {
        let nf = s.n as f64;
        let ln_c = 0.5 * (nf * (theta * (p - 1.0)).ln() + ln_factorial(s.n)) + 0.5 * kappa * nf * t.ln();
        direct += ln_c.exp() * s.norm_sq_at_1.value.max(0.0).sqrt();
    }
    let next = norms.last().map(|s| s.n + 1).unwrap_or(0);
    direct += tail_sum(next, |n| 0.5 * ln_term_bound(n, theta * (p - 1.0), t, kappa, cmu));
    let tp = t * (p - 1.0).powf(1.0 / kappa);
    let sm = second_moment_from_norms(params, spec, tp, norms, None)?;
    let rescaled = (sm.value + sm.tail_bound).max(0.0).sqrt();
    Ok(PMomentBound { value: direct.min(rescaled), direct, rescaled })
}

/// Root-test estimate of the critical time T₂.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct T2Estimate {
    pub lower: f64,
    pub upper: f64,
    /// 1/(θ R_N^{1/N}) at the largest available order.
    pub point: f64,
    pub low_confidence: bool,
    /// ν^{α/a}/(2θ M^{(2a-α)/a}) when M is supplied.
    pub closed_form: Option<f64>,
}

/// 1/(θ limsup R_n^{1/n}), R_n = n! ‖f̃_n(·,0,1)‖², from the last three
/// available orders with ±2 standard errors.
pub fn estimate_t2(
    params: &EquationParams,
    spec: &NoiseSpec,
    norms: &[ChaosNormSeq],
    m: Option<f64>,
) -> Result<T2Estimate> {
    let v = classify_solvability(params, spec)?;
    if v.regime != Regime::LocalLp {
        return Err(Error::NotLocalRegime);
    }
    let usable: Vec<&ChaosNormSeq> = norms.iter().filter(|s| s.n >= 1 && s.norm_sq_at_1.value > 0.0).collect();
    if usable.is_empty() {
        return Err(Error::InsufficientTerms { needed: 1, got: 0 });
    }
    let radius = |n: usize, r: f64| -> f64 {
        let ln_r = ln_factorial(n) + r.ln();
        (-ln_r / n as f64).exp() / params.theta
    };
    let tail = &usable[usable.len().saturating_sub(3)..];
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    for s in tail {
        let e = s.norm_sq_at_1;
        let hi = e.value + 2.0 * e.std_err;
        let lo = (e.value - 2.0 * e.std_err).max(e.value * 1e-3);
        lower = lower.min(radius(s.n, hi));
        upper = upper.max(radius(s.n, lo));
    }
    let last = usable[usable.len() - 1];
    let point = radius(last.n, last.norm_sq_at_1.value);
    let closed_form = match m {
        Some(mv) => Some(critical_time(params, &spec.clone().into(), 2.0, mv)?),
        None => None,
    };
    Ok(T2Estimate { lower, upper, point, low_confidence: last.n < 3, closed_form })
}

/// Monotone step function on [0, ∞): `values[i]` on [breaks[i], breaks[i+1]),
/// the last value extending to infinity; breaks[0] = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

/// (2∫e^{-2t}H², (∫e^{-t}H)²) for a nondecreasing nonnegative step function.
pub fn doubleexp_check(h: &StepFunction) -> Result<(f64, f64)> {
    if h.breaks.len() != h.values.len() || h.breaks.is_empty() || h.breaks[0] != 0.0 {
        return Err(Error::InvalidParams("step function needs matching breaks/values starting at 0".into()));
    }
    for i in 0..h.values.len() {
        if h.values[i] < 0.0 || (i > 0 && (h.values[i] < h.values[i - 1] || h.breaks[i] <= h.breaks[i - 1])) {
            return Err(Error::NotMonotone(i));
        }
    }
    let (mut lhs, mut first) = (0.0, 0.0);
    for i in 0..h.values.len() {
        let t0 = h.breaks[i];
        let (e1, e2) = match h.breaks.get(i + 1) {
            Some(&t1) => ((-t0).exp() - (-t1).exp(), (-2.0 * t0).exp() - (-2.0 * t1).exp()),
            None => ((-t0).exp(), (-2.0 * t0).exp()),
        };
        lhs += h.values[i] * h.values[i] * e2;
        first += h.values[i] * e1;
    }
    Ok((lhs, first * first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn heat_white() -> (EquationParams, NoiseSpec) {
        (EquationParams::heat(2.0, 1.0, 1).unwrap(), NoiseSpec::white_1d())
    }

    fn all_orderings(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_orderings(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn c_mu_values() {
        let (p, s) = heat_white();
        assert_relative_eq!(c_mu(&p, &s).unwrap(), 0.25, max_relative = 1e-11);
        // closed form A λ^{-α/a} B(α/a, 2-α/a)/a for several blocks
        let p3 = EquationParams::new(1.5, 1.0, 0.0, 0.8, 1.0, 3).unwrap();
        let s3 = NoiseSpec::riesz(&[(2, 0.9), (1, 0.4)]).unwrap();
        let (al, a, lam): (f64, f64, f64) = (s3.alpha(), 1.5, 0.4);
        let q = al / a;
        let beta_fn = crate::special::gamma(q) * crate::special::gamma(2.0 - q);
        let closed = s3.radial_mass() * lam.powf(-q) * beta_fn / a;
        assert_relative_eq!(c_mu(&p3, &s3).unwrap(), closed, max_relative = 1e-10);
        let bad = EquationParams::new(0.4, 1.0, 0.0, 1.0, 1.0, 2).unwrap();
        let sb = NoiseSpec::riesz_isotropic(2, 1.0).unwrap();
        assert!(matches!(c_mu(&bad, &sb), Err(Error::Divergent(_))));
    }

    #[test]
    fn subset_dp_matches_explicit_orderings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 2;
        for n in 1..=5 {
            let xi: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let gaps: Vec<f64> = (0..n).map(|k| 0.1 + 0.2 * k as f64).collect();
            let g = |k: usize, rho: f64| (-(gaps[k - 1] * rho)).exp() / (1.0 + rho);
            let norms = subset_norms(&xi, n, dim);
            let dp = ordered_product_sum(&norms, n, g);
            let mut brute = 0.0;
            for perm in all_orderings(n) {
                let mut acc = vec![0.0; dim];
                let mut prod = 1.0;
                for (k, &i) in perm.iter().enumerate() {
                    for c in 0..dim {
                        acc[c] += xi[i * dim + c];
                    }
                    let rho = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
                    prod *= g(k + 1, rho);
                }
                brute += prod;
            }
            assert_relative_eq!(dp, brute, max_relative = 1e-12);
        }
    }

    #[test]
    fn sampler_reproduces_radial_law() {
        // E_q[(1+λ|ξ|^a)^{-1}] = ∫ (1+λ|ξ|^a)^{-e-1} φ / Z_e
        let p = EquationParams::new(1.6, 1.0, 0.0, 1.2, 1.0, 3).unwrap();
        let s = NoiseSpec::riesz(&[(2, 1.1), (1, 0.3)]).unwrap();
        let sampler = SpectralSampler::new(&p, &s).unwrap();
        let cfg = McConfig::with_samples(200_000, 11);
        let est = estimate(&cfg, |rng| {
            let mut x = vec![0.0; 3];
            let r = sampler.draw(rng, &mut x);
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - r).abs() < 1e-12 * r.max(1.0));
            sampler.symbol(r)
        })
        .unwrap();
        let (al, a, lam): (f64, f64, f64) = (s.alpha(), 1.6, 0.6);
        let e = proposal_power(a, al, 3);
        let g = |v: f64| {
            let rr = v.powf(1.0 / al);
            (1.0 + lam * rr.powf(a)).powf(-e - 1.0)
        };
        let num = s.radial_mass() * integrate_to_infinity(g, 0.0, &[], Tolerance::rel(1e-12)).unwrap().value / al;
        let exact = num / symbol_power_mass(&p, &s, e).unwrap();
        assert!(est.z_distance(exact, 0.0) < 4.0, "{est:?} vs {exact}");
    }

    #[test]
    fn sampler_block_split_law() {
        // E[|ξ_(1)|²/|ξ|²] = (α_1/2)/(α/2) under the Dirichlet split
        let p = EquationParams::new(2.0, 1.0, 0.0, 1.0, 1.0, 3).unwrap();
        let s = NoiseSpec::riesz(&[(2, 1.5), (1, 0.5)]).unwrap();
        let sampler = SpectralSampler::new(&p, &s).unwrap();
        let est = estimate(&McConfig::with_samples(100_000, 5), |rng| {
            let mut x = vec![0.0; 3];
            let r = sampler.draw(rng, &mut x);
            (x[0] * x[0] + x[1] * x[1]) / (r * r)
        })
        .unwrap();
        assert!(est.z_distance(0.75, 0.0) < 4.0, "{est:?}");
    }

    #[test]
    fn t_n_first_order_is_c_mu() {
        let (p, s) = heat_white();
        let e = t_n(&p, &s, 1, &McConfig::default()).unwrap();
        assert_eq!(e.value, c_mu(&p, &s).unwrap());
        assert_eq!(e.std_err, 0.0);
        assert!(t_n(&p, &s, 8, &McConfig::default()).is_err());
    }

    #[test]
    fn t_n_respects_factorial_bound() {
        let (p, s) = heat_white();
        let cfg = McConfig::with_samples(20_000, 1);
        let cm = c_mu(&p, &s).unwrap();
        for n in 2..=5 {
            let e = t_n(&p, &s, n, &cfg).unwrap();
            let bound = (ln_factorial(n) * 2.0 + n as f64 * cm.ln()).exp();
            assert!(e.value - 3.0 * e.std_err <= bound, "n={n}: {e:?} vs {bound}");
        }
    }

    #[test]
    fn fn_norm_zero_and_determinism() {
        let (p, s) = heat_white();
        let cfg = McConfig::with_samples(2_000, 9);
        assert_eq!(fn_norm_sq(&p, &s, 0, &cfg).unwrap().value, 1.0);
        let a = fn_norm_sq(&p, &s, 3, &cfg).unwrap();
        let b = fn_norm_sq(&p, &s, 3, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn second_moment_trivial_cases() {
        let (p, s) = heat_white();
        let cfg = McConfig::with_samples(4_000, 2);
        let zero = second_moment(&p.with_theta(0.0), &s, 1.0, 4, &cfg).unwrap();
        assert_eq!(zero.value, 1.0);
        let small = second_moment(&p, &s, 1e-6, 4, &cfg).unwrap();
        assert!((small.value - 1.0).abs() < 1e-6 && small.tail_bound < 1e-20);
    }

    #[test]
    fn local_regime_needs_time_limit() {
        let p = EquationParams::new(2.0, 2.0 / 3.0, 0.0, 1.0, 1.0, 1).unwrap();
        let s = NoiseSpec::white_1d();
        let norms = vec![ChaosNormSeq { n: 0, norm_sq_at_1: MCEstimate::exact(1.0, 1, 0) }];
        assert!(matches!(
            second_moment_from_norms(&p, &s, 0.5, &norms, None),
            Err(Error::OutsideConvergence { .. })
        ));
        assert!(second_moment_from_norms(&p, &s, 0.5, &norms, Some(1.0)).is_ok());
        let (hp, hs) = heat_white();
        assert_eq!(estimate_t2(&hp, &hs, &norms, None), Err(Error::NotLocalRegime));
    }

    #[test]
    fn t2_single_term_is_low_confidence() {
        let p = EquationParams::new(2.0, 2.0 / 3.0, 0.0, 1.0, 1.0, 1).unwrap();
        let s = NoiseSpec::white_1d();
        let norms = vec![
            ChaosNormSeq { n: 0, norm_sq_at_1: MCEstimate::exact(1.0, 1, 0) },
            ChaosNormSeq { n: 1, norm_sq_at_1: MCEstimate { value: 0.2, std_err: 0.01, samples: 10, seed: 0 } },
        ];
        let m = 0.75 * (1.0f64 / 6.0).cbrt();
        let e = estimate_t2(&p, &s, &norms, Some(m)).unwrap();
        assert!(e.low_confidence);
        assert!(e.lower <= e.point && e.point <= e.upper);
        assert_relative_eq!(e.closed_form.unwrap(), 2f64.powf(2.5) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn doubleexp_constant_and_zero() {
        let one = StepFunction { breaks: vec![0.0], values: vec![1.0] };
        assert_eq!(doubleexp_check(&one).unwrap(), (1.0, 1.0));
        let zero = StepFunction { breaks: vec![0.0, 1.0], values: vec![0.0, 0.0] };
        assert_eq!(doubleexp_check(&zero).unwrap(), (0.0, 0.0));
        let bad = StepFunction { breaks: vec![0.0, 1.0], values: vec![2.0, 1.0] };
        assert_eq!(doubleexp_check(&bad), Err(Error::NotMonotone(1)));
    }

    proptest! {
        #[test]
        fn doubleexp_inequality(jumps in proptest::collection::vec((0.01f64..2.0, 0.0f64..3.0), 1..12)) {
            let mut breaks = vec![0.0];
            let mut values = vec![jumps[0].1];
            for (dt, dv) in jumps.iter().skip(1) {
                breaks.push(breaks.last().unwrap() + dt);
                values.push(values.last().unwrap() + dv);
            }
            let (l, r) = doubleexp_check(&StepFunction { breaks, values }).unwrap();
            prop_assert!(l <= r * (1.0 + 1e-12));
        }

        #[test]
        fn estimators_ignore_labelling(seed in 0u64..1000, n in 2usize..5) {
            let p = EquationParams::new(1.7, 0.8, 0.1, 1.3, 1.0, 2).unwrap();
            let s = NoiseSpec::riesz(&[(1, 0.5), (1, 0.4)]).unwrap();
            let sampler = SpectralSampler::new(&p, &s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = 2;
            let mut xi = vec![0.0; n * dim];
            for k in 0..n {
                sampler.draw(&mut rng, &mut xi[k * dim..(k + 1) * dim]);
            }
            let mut rev: Vec<f64> = xi.chunks(dim).rev().flatten().cloned().collect();
            canonicalize(&mut xi, dim);
            canonicalize(&mut rev, dim);
            prop_assert_eq!(t_n_integrand(&sampler, &xi, n), t_n_integrand(&sampler, &rev, n));
            let gaps = vec![simplex_gaps(&mut rng, n), simplex_gaps(&mut rng, n)];
            prop_assert_eq!(
                fn_norm_integrand(&p, &sampler, &xi, n, &gaps),
                fn_norm_integrand(&p, &sampler, &rev, n, &gaps)
            );
        }
    }
}
