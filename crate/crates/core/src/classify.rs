//! Nonnegativity of the fundamental solution and solvability regimes.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EquationParams, NoiseKind, NoiseSpec};

/// Which sufficient condition for G ≥ 0 holds, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NonnegativityStatus {
    Nonnegative { group: u8 },
    Unknown { note: Option<String> },
}

impl NonnegativityStatus {
    pub fn group(&self) -> Option<u8> {
        match self {
            NonnegativityStatus::Nonnegative { group } => Some(*group),
            NonnegativityStatus::Unknown { .. } => None,
        }
    }
}

/// First satisfied sufficient-condition group, by ascending index.
pub fn check_nonnegativity(p: &EquationParams) -> NonnegativityStatus {
    let (a, b, r, d) = (p.a, p.b, p.r, p.d);
    if p.formal_wave {
        let note = if d <= 3 {
            "wave kernel (b = 2) is nonnegative by classical theory for d <= 3"
        } else {
            "wave kernel (b = 2) changes sign for d > 3"
        };
        return NonnegativityStatus::Unknown { note: Some(note.into()) };
    }
    if b > 0.0 && b <= 1.0 && a > 0.0 && a <= 2.0 && r >= 0.0 {
        return NonnegativityStatus::Nonnegative { group: 1 };
    }
    let low_dim = (1..=3).contains(&d);
    if low_dim && 1.0 < b && b < a && a <= 2.0 && r > 0.0 {
        return NonnegativityStatus::Nonnegative { group: 2 };
    }
    if low_dim && 1.0 < b && b == a && a < 2.0 && r > (d as f64 + 3.0) / 2.0 - b {
        return NonnegativityStatus::Nonnegative { group: 3 };
    }
    NonnegativityStatus::Unknown { note: None }
}

/// Noise as seen by the classifier: a constructible spec, or white noise in
/// d ≥ 1 treated as the formal endpoint α = d.
#[derive(Debug, Clone, PartialEq)]
pub enum GridNoise {
    Spec(NoiseSpec),
    WhiteLimit { d: usize },
}

impl GridNoise {
    pub fn alpha(&self) -> f64 {
        match self {
            GridNoise::Spec(s) => s.alpha(),
            GridNoise::WhiteLimit { d } => *d as f64,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GridNoise::Spec(s) => s.dim(),
            GridNoise::WhiteLimit { d } => *d,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GridNoise::Spec(s) if s.kind() == NoiseKind::White1D => "white1d",
            GridNoise::Spec(_) => "riesz",
            GridNoise::WhiteLimit { .. } => "white_limit",
        }
    }

    fn is_white_1d(&self) -> bool {
        match self {
            GridNoise::Spec(s) => s.is_white(),
            GridNoise::WhiteLimit { d } => *d == 1,
        }
    }
}

impl From<NoiseSpec> for GridNoise {
    fn from(s: NoiseSpec) -> Self {
        GridNoise::Spec(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    GlobalLp,
    GlobalBoundaryWhite1D,
    LocalLp,
    NoL2PerFigures,
    NotCovered,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::GlobalLp => "GlobalLp",
            Regime::GlobalBoundaryWhite1D => "GlobalBoundaryWhite1D",
            Regime::LocalLp => "LocalLp",
            Regime::NoL2PerFigures => "NoL2PerFigures",
            Regime::NotCovered => "NotCovered",
        }
    }
}

/// Whether a verdict follows from the solvability conditions or only from the
/// sampled phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Theorem,
    FigureLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityVerdict {
    pub regime: Regime,
    pub critical_alpha: f64,
    pub condition_trace: Vec<(String, bool)>,
    pub provenance: Provenance,
    pub nonnegativity: NonnegativityStatus,
    /// Set when no nonnegativity group applies.
    pub warning: Option<String>,
}

fn same(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0)
}

/// Solvability regime for a constructible noise.
pub fn classify_solvability(p: &EquationParams, spec: &NoiseSpec) -> Result<SolvabilityVerdict> {
    classify_noise(p, &GridNoise::Spec(spec.clone()))
}

/// Solvability regime for a spec or a white-limit grid point.
pub fn classify_noise(p: &EquationParams, noise: &GridNoise) -> Result<SolvabilityVerdict> {
    if noise.dim() != p.d {
        return Err(Error::InvalidNoise(format!("noise dimension {} differs from d = {}", noise.dim(), p.d)));
    }
    let alpha = noise.alpha();
    let d = p.d as f64;
    if let GridNoise::Spec(s) = noise {
        if s.kind() == NoiseKind::RieszProduct && alpha >= d {
            return Err(Error::InvalidNoise("alpha >= d for a Riesz product".into()));
        }
    }
    let crit = p.critical_alpha();
    let on_line = same(alpha, crit);
    let below = alpha < crit && !on_line;
    let below_2a = alpha < 2.0 * p.a;
    let below_d = alpha < d;
    let r_small = p.r >= 0.0 && p.r <= 0.5;
    let mut trace = vec![
        ("alpha < critical_alpha".to_string(), below),
        ("alpha < 2a".to_string(), below_2a),
        ("alpha < d".to_string(), below_d),
        ("r in [0, 1/2]".to_string(), r_small),
        ("alpha == critical_alpha".to_string(), on_line),
        ("alpha <= d".to_string(), alpha <= d || same(alpha, d)),
    ];
    let (regime, provenance) = if noise.is_white_1d() && crit > 1.0 && !on_line && 2.0 * p.a > 1.0 {
        trace.push(("white noise in d = 1 with critical_alpha > 1 and 2a > 1".into(), true));
        (Regime::GlobalBoundaryWhite1D, Provenance::Theorem)
    } else if below && below_2a && below_d {
        (Regime::GlobalLp, Provenance::Theorem)
    } else if r_small && on_line && (alpha <= d || same(alpha, d)) {
        (Regime::LocalLp, Provenance::Theorem)
    } else if alpha > crit && !on_line && r_small {
        (Regime::NoL2PerFigures, Provenance::FigureLevel)
    } else {
        (Regime::NotCovered, Provenance::FigureLevel)
    };
    let nonnegativity = check_nonnegativity(p);
    let warning = match &nonnegativity {
        NonnegativityStatus::Nonnegative { .. } => None,
        NonnegativityStatus::Unknown { note } => Some(match note {
            Some(n) => format!("no nonnegativity group applies ({n}); verdict assumes G >= 0"),
            None => "no nonnegativity group applies; verdict assumes G >= 0".to_string(),
        }),
    };
    trace.push(("nonnegativity group satisfied".into(), nonnegativity.group().is_some()));
    Ok(SolvabilityVerdict { regime, critical_alpha: crit, condition_trace: trace, provenance, nonnegativity, warning })
}

/// Critical time ν^{α/a} / (2θ(p-1) M^{(2a-α)/a}) of the local regime.
pub fn critical_time(params: &EquationParams, noise: &GridNoise, p: f64, m: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParams(format!("moment order p = {p} must be >= 2")));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParams(format!("variational constant M = {m} must be > 0")));
    }
    let v = classify_noise(params, noise)?;
    if v.regime != Regime::LocalLp {
        return Err(Error::NotLocalRegime);
    }
    let (a, alpha) = (params.a, noise.alpha());
    Ok(params.nu.powf(alpha / a) / (2.0 * params.theta * (p - 1.0) * m.powf((2.0 * a - alpha) / a)))
}

/// One row of a phase-diagram sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub nu: f64,
    pub theta: f64,
    pub d: usize,
    pub alpha: f64,
    pub kind: String,
    pub nonneg_group: Option<u8>,
    pub regime: Regime,
    pub critical_alpha: f64,
}

/// Classifies every grid point, in order.
pub fn sweep_phase_diagram(grid: &[(EquationParams, GridNoise)]) -> Result<Vec<PhaseRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty sweep grid".into()));
    }
    grid.par_iter()
        .map(|(p, n)| {
            let v = classify_noise(p, n)?;
            Ok(PhaseRow {
                a: p.a,
                b: p.b,
                r: p.r,
                nu: p.nu,
                theta: p.theta,
                d: p.d,
                alpha: n.alpha(),
                kind: n.label().to_string(),
                nonneg_group: v.nonnegativity.group(),
                regime: v.regime,
                critical_alpha: v.critical_alpha,
            })
        })
        .collect()
}
