//! Versioned JSON run configuration.

use serde::Deserialize;
use spde_moments::classify::GridNoise;
use spde_moments::mc::{McConfig, DEFAULT_SEED};
use spde_moments::model::{EquationParams, NoiseSpec};
use spde_moments::variational::{VariationalKind, VariationalNoise};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Classify,
    Sweep,
    Kernel,
    Chaos,
    Variational,
    Asymptotics,
    Bounds,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Sweep => "sweep",
            Command::Kernel => "kernel",
            Command::Chaos => "chaos",
            Command::Variational => "variational",
            Command::Asymptotics => "asymptotics",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseConfig {
    Riesz { blocks: Vec<BlockConfig> },
    /// White noise in d = 1 (a constructible spec).
    White1d,
    /// White noise in any d; d ≥ 2 is only a formal endpoint.
    White { d: usize },
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct BlockConfig {
    pub dim: usize,
    pub alpha: f64,
}

impl NoiseConfig {
    pub fn spec(&self) -> Result<NoiseSpec, CliError> {
        match self {
            NoiseConfig::Riesz { blocks } => {
                let pairs: Vec<(usize, f64)> = blocks.iter().map(|b| (b.dim, b.alpha)).collect();
                NoiseSpec::riesz(&pairs).map_err(CliError::from)
            }
            NoiseConfig::White1d | NoiseConfig::White { d: 1 } => Ok(NoiseSpec::white_1d()),
            NoiseConfig::White { d } => {
                Err(CliError::Invalid(format!("white noise in d = {d} is not a constructible noise for this command")))
            }
        }
    }

    pub fn grid(&self) -> Result<GridNoise, CliError> {
        match self {
            NoiseConfig::White { d } if *d >= 2 => Ok(GridNoise::WhiteLimit { d: *d }),
            NoiseConfig::White { d: 0 } => Err(CliError::Invalid("white noise needs d >= 1".into())),
            _ => Ok(GridNoise::Spec(self.spec()?)),
        }
    }

    pub fn variational(&self) -> Result<VariationalNoise, CliError> {
        match self {
            NoiseConfig::White { d } => Ok(VariationalNoise::White { d: *d }),
            _ => Ok(self.spec()?.into()),
        }
    }

    pub fn is_white(&self) -> bool {
        matches!(self, NoiseConfig::White1d | NoiseConfig::White { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub n_max: Option<usize>,
    pub batches: Option<usize>,
}

impl McSection {
    pub fn resolve(&self, seed: u64) -> Result<McConfig, CliError> {
        let mut mc = McConfig { seed, ..McConfig::default() };
        if let Some(s) = self.samples {
            mc.samples = s;
        }
        if let Some(n) = self.n_max {
            mc.n_max = n;
        }
        if let Some(b) = self.batches {
            mc.batches = b;
        }
        if mc.samples == 0 || mc.batches == 0 {
            return Err(CliError::Invalid("mc.samples and mc.batches must be >= 1".into()));
        }
        Ok(mc)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub params: EquationParams,
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub points: Vec<SweepPoint>,
    /// Isotropic Riesz exponents in d = params.d, crossed with `params`.
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub times: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { times: vec![0.5, 1.0, 2.0], rhos: vec![0.0, 0.5, 1.0, 2.0, 4.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosSection {
    /// Highest chaos order estimated.
    pub terms: usize,
}

impl Default for ChaosSection {
    fn default() -> Self {
        ChaosSection { terms: 4 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GivenConstant {
    pub kind: KindName,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum KindName {
    M,
    E,
    Sigma,
    Rho,
    BoldM,
}

impl From<KindName> for VariationalKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::M => VariationalKind::M,
            KindName::E => VariationalKind::E,
            KindName::Sigma => VariationalKind::Sigma,
            KindName::Rho => VariationalKind::Rho,
            KindName::BoldM => VariationalKind::BoldM,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationalSection {
    /// Starting value; otherwise the table, then the direct optimizer.
    pub given: Option<GivenConstant>,
    /// Also run the direct optimizer.
    pub direct: bool,
    /// Spline knots for the direct optimizer (0 = generalized Gaussians).
    pub knots: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSection {
    /// M for the noise; looked up or optimized when absent.
    pub m: Option<f64>,
    pub p: f64,
    pub fixed_p: Vec<f64>,
    pub fixed_t: Vec<f64>,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        AsymptoticsSection { m: None, p: 2.0, fixed_p: vec![2.0], fixed_t: vec![1.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub p: f64,
    pub times: Vec<f64>,
    pub terms: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection { p: 2.0, times: vec![0.5, 1.0], terms: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub command: Option<Command>,
    pub params: Option<EquationParams>,
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub chaos: ChaosSection,
    #[serde(default)]
    pub variational: VariationalSection,
    #[serde(default)]
    pub asymptotics: AsymptoticsSection,
    #[serde(default)]
    pub bounds: BoundsSection,
}

impl RunConfig {
    pub fn empty() -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            command: None,
            params: None,
            noise: None,
            mc: McSection::default(),
            output: OutputSection::default(),
            sweep: SweepSection::default(),
            kernel: KernelSection::default(),
            chaos: ChaosSection::default(),
            variational: VariationalSection::default(),
            asymptotics: AsymptoticsSection::default(),
            bounds: BoundsSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::Invalid(format!(
                "config schema {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<EquationParams, CliError> {
        self.params.ok_or_else(|| CliError::Invalid("config has no `params` section".into()))
    }

    pub fn noise(&self) -> Result<&NoiseConfig, CliError> {
        self.noise.as_ref().ok_or_else(|| CliError::Invalid("config has no `noise` section".into()))
    }

    pub fn seed_or_default(&self) -> u64 {
        self.mc.seed.unwrap_or(DEFAULT_SEED)
    }
}
