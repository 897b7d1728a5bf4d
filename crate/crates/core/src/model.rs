//! Equation parameters and the product-Riesz / white noise model.
//!
//! Fourier convention: Fφ(ξ) = ∫ e^{-ixξ} φ(x) dx. With this convention the
//! covariance of the noise is (2π)^{-d} ∫ Fφ conj(Fψ) Fγ dξ, so the spectral
//! density carries the (2π)^{-d} factor and white noise has density (2π)^{-d}.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{gamma, sphere_area};

/// Operator parameters of the fractional equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct EquationParams {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub nu: f64,
    pub theta: f64,
    pub d: usize,
    /// Set only for b = 2 (formal wave limit).
    pub formal_wave: bool,
}

#[derive(Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    #[serde(default)]
    r: f64,
    nu: f64,
    theta: f64,
    d: usize,
    #[serde(default)]
    formal_wave: bool,
}

impl TryFrom<RawParams> for EquationParams {
    type Error = Error;
    fn try_from(p: RawParams) -> Result<Self> {
        EquationParams::with_flag(p.a, p.b, p.r, p.nu, p.theta, p.d, p.formal_wave)
    }
}

impl EquationParams {
    /// Validated constructor; rejects b = 2 (see [`EquationParams::wave_limit`]).
    pub fn new(a: f64, b: f64, r: f64, nu: f64, theta: f64, d: usize) -> Result<Self> {
        Self::with_flag(a, b, r, nu, theta, d, false)
    }

    /// b = 2 with the formal wave-limit flag set.
    pub fn wave_limit(a: f64, r: f64, nu: f64, theta: f64, d: usize) -> Result<Self> {
        Self::with_flag(a, 2.0, r, nu, theta, d, true)
    }

    pub fn with_flag(a: f64, b: f64, r: f64, nu: f64, theta: f64, d: usize, formal_wave: bool) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(a > 0.0 && a <= 2.0) {
            return bad("a must lie in (0, 2]");
        }
        if formal_wave {
            if b != 2.0 {
                return bad("the formal wave-limit flag requires b = 2");
            }
        } else if !(b > 0.0 && b < 2.0) {
            return bad("b must lie in (0, 2); b = 2 needs the formal wave-limit flag");
        }
        if !(r >= 0.0 && r.is_finite()) {
            return bad("r must be finite and >= 0");
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return bad("nu must be > 0");
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return bad("theta must be > 0");
        }
        if d == 0 {
            return bad("d must be >= 1");
        }
        Ok(EquationParams { a, b, r, nu, theta, d, formal_wave })
    }

    /// Heat-type parameters a = 2, b = 1, r = 0.
    pub fn heat(nu: f64, theta: f64, d: usize) -> Result<Self> {
        Self::new(2.0, 1.0, 0.0, nu, theta, d)
    }

    /// Coefficient ν/2 of the fractional Laplacian symbol.
    pub fn lambda(&self) -> f64 {
        self.nu / 2.0
    }

    /// Time-scaling exponent 2(b+r) - bα/a of the chaos kernels.
    pub fn kappa(&self, alpha: f64) -> f64 {
        2.0 * (self.b + self.r) - self.b * alpha / self.a
    }

    /// Critical noise exponent (a/b)(2(b+r) - 1).
    pub fn critical_alpha(&self) -> f64 {
        self.a / self.b * (2.0 * (self.b + self.r) - 1.0)
    }

    /// Copy with a different θ (θ = 0 is allowed here for the deterministic case).
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    RieszProduct,
    White1D,
}

/// One coordinate block of a product-Riesz covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBlock {
    pub dim: usize,
    pub alpha: f64,
}

/// Spatial covariance of the noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSpec {
    kind: NoiseKind,
    blocks: Vec<NoiseBlock>,
    alpha_total: f64,
}

impl NoiseSpec {
    /// γ(x) = ∏ |x_(i)|^{-α_i} over the given (d_i, α_i) blocks.
    pub fn riesz(blocks: &[(usize, f64)]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidNoise("at least one block is required".into()));
        }
        let mut out = Vec::with_capacity(blocks.len());
        for (i, &(dim, alpha)) in blocks.iter().enumerate() {
            if dim == 0 {
                return Err(Error::InvalidNoise(format!("block {i}: d_i must be >= 1")));
            }
            if !(alpha > 0.0 && alpha < dim as f64) {
                return Err(Error::InvalidNoise(format!(
                    "block {i}: alpha_i = {alpha} must lie in (0, d_i = {dim})"
                )));
            }
            out.push(NoiseBlock { dim, alpha });
        }
        let alpha_total = out.iter().map(|b| b.alpha).sum();
        Ok(NoiseSpec { kind: NoiseKind::RieszProduct, blocks: out, alpha_total })
    }

    /// Single isotropic Riesz block |x|^{-α} on ℝ^d.
    pub fn riesz_isotropic(d: usize, alpha: f64) -> Result<Self> {
        Self::riesz(&[(d, alpha)])
    }

    /// Space-time white noise in one dimension (γ = δ₀, α = 1).
    pub fn white_1d() -> Self {
        NoiseSpec { kind: NoiseKind::White1D, blocks: vec![NoiseBlock { dim: 1, alpha: 1.0 }], alpha_total: 1.0 }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn blocks(&self) -> &[NoiseBlock] {
        &self.blocks
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_total
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn is_white(&self) -> bool {
        self.kind == NoiseKind::White1D
    }

    /// Checks that the blocks cover exactly the spatial dimension of `params`.
    pub fn check_against(&self, params: &EquationParams) -> Result<()> {
        if self.dim() != params.d {
            return Err(Error::InvalidNoise(format!(
                "noise blocks cover {} coordinates but d = {}",
                self.dim(),
                params.d
            )));
        }
        Ok(())
    }

    fn block_norms(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::InvalidNoise(format!("expected a {}-vector, got {}", self.dim(), x.len())));
        }
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            let n = x[off..off + b.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(Error::BlockAtOrigin { block: i });
            }
            out.push(n);
            off += b.dim;
        }
        Ok(out)
    }

    /// Correlation function γ(x).
    pub fn gamma_eval(&self, x: &[f64]) -> Result<f64> {
        if self.is_white() {
            return Err(Error::WhiteNoisePointwise);
        }
        let norms = self.block_norms(x)?;
        Ok(self.blocks.iter().zip(norms).map(|(b, n)| n.powf(-b.alpha)).product())
    }

    /// Spectral density φ(ξ).
    pub fn phi_eval(&self, xi: &[f64]) -> Result<f64> {
        if self.is_white() {
            if xi.len() != 1 {
                return Err(Error::InvalidNoise("white noise lives in d = 1".into()));
            }
            return Ok(1.0 / (2.0 * PI));
        }
        let norms = self.block_norms(xi)?;
        Ok(self
            .blocks
            .iter()
            .zip(norms)
            .map(|(b, n)| riesz_constant(b.alpha, b.dim) * n.powf(-(b.dim as f64 - b.alpha)))
            .product())
    }

    /// Square-root kernel K with K * K = γ.
    pub fn k_kernel_eval(&self, x: &[f64]) -> Result<f64> {
        if self.is_white() {
            return Err(Error::WhiteNoisePointwise);
        }
        let norms = self.block_norms(x)?;
        Ok(self
            .blocks
            .iter()
            .zip(norms)
            .map(|(b, n)| kernel_constant(b.alpha, b.dim) * n.powf(-(b.dim as f64 + b.alpha) / 2.0))
            .product())
    }

    /// Weak-L^q norm constant ∏ C_{α_i,d_i} α_i^{-1} |S^{d_i-1}|^{1-α/d} d_i^{α/d}.
    pub fn weak_norm_phi(&self) -> Result<f64> {
        if self.is_white() {
            return Err(Error::WhiteNoisePointwise);
        }
        let ratio = self.alpha_total / self.dim() as f64;
        Ok(self
            .blocks
            .iter()
            .map(|b| {
                riesz_constant(b.alpha, b.dim) / b.alpha
                    * sphere_area(b.dim).powf(1.0 - ratio)
                    * (b.dim as f64).powf(ratio)
            })
            .product())
    }

    /// |A_R|^{-α/d} ∫_{A_R} φ for the product of radius-R balls A_R, from the
    /// closed forms of both integrals; independent of R.
    pub fn weak_norm_at_radius(&self, radius: f64) -> Result<f64> {
        if self.is_white() {
            return Err(Error::WhiteNoisePointwise);
        }
        let ratio = self.alpha_total / self.dim() as f64;
        let mut mass = 1.0;
        let mut volume = 1.0;
        for b in &self.blocks {
            let s = sphere_area(b.dim);
            mass *= riesz_constant(b.alpha, b.dim) * s * radius.powf(b.alpha) / b.alpha;
            volume *= s * radius.powi(b.dim as i32) / b.dim as f64;
        }
        Ok(volume.powf(-ratio) * mass)
    }

    /// Constant A with ∫ F(|ξ|) φ(ξ) dξ = A ∫_0^∞ R^{α-1} F(R) dR for radial F.
    pub fn radial_mass(&self) -> f64 {
        if self.is_white() {
            return 1.0 / PI;
        }
        let k = self.blocks.len() as i32;
        let mut c = 1.0;
        for b in &self.blocks {
            c *= sphere_area(b.dim) * riesz_constant(b.alpha, b.dim) * gamma(b.alpha / 2.0);
        }
        c / (2f64.powi(k - 1) * gamma(self.alpha_total / 2.0))
    }
}

impl<'de> Deserialize<'de> for NoiseSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        enum Raw {
            Riesz { blocks: Vec<NoiseBlock> },
            White1d,
        }
        match Raw::deserialize(de)? {
            Raw::White1d => Ok(NoiseSpec::white_1d()),
            Raw::Riesz { blocks } => {
                let pairs: Vec<(usize, f64)> = blocks.iter().map(|b| (b.dim, b.alpha)).collect();
                NoiseSpec::riesz(&pairs).map_err(serde::de::Error::custom)
            }
        }
    }
}

/// C_{α,d} = π^{-d/2} 2^{-α} Γ((d-α)/2) / Γ(α/2).
pub fn riesz_constant(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    PI.powf(-df / 2.0) * 2f64.powf(-alpha) * gamma((df - alpha) / 2.0) / gamma(alpha / 2.0)
}

/// β_{α,d} = π^{-d/4} Γ((d+α)/4)/Γ((d-α)/4) · sqrt(Γ((d-α)/2)/Γ(α/2)).
pub fn kernel_constant(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    PI.powf(-df / 4.0) * gamma((df + alpha) / 4.0) / gamma((df - alpha) / 4.0)
        * (gamma((df - alpha) / 2.0) / gamma(alpha / 2.0)).sqrt()
}
