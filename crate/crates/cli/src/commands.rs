//! One function per subcommand, each producing a table.

use spde_moments::asymptotics::{asymptotics_report, AsymMode};
use spde_moments::bounds::best_gaussian_lower_bound;
use spde_moments::chaos::{chaos_norms, p_moment_upper, t_n};
use spde_moments::classify::{classify_noise, sweep_phase_diagram, GridNoise, PhaseRow};
use spde_moments::kernel::{fourier_green, fourier_green_integral, laplace_symbol};
use spde_moments::mc::McConfig;
use spde_moments::model::{EquationParams, NoiseSpec};
use spde_moments::variational::{
    estimate_m_direct, lookup_constant, rescale, variational_convert, OptConfig, TrialFamily, VariationalKind,
    VariationalNoise, VariationalValue,
};
use spde_moments::verify::{run_all, KNOWN_UNATTAINABLE};

use crate::config::{NoiseConfig, RunConfig};
use crate::table::{Cell, Table};
use crate::CliError;

/// Result of a command: its table and the sample count behind it.
pub struct Outcome {
    pub table: Table,
    pub samples: usize,
    /// Acceptance failures (verify only).
    pub failures: Vec<String>,
}

impl Outcome {
    fn exact(table: Table) -> Self {
        Outcome { table, samples: 0, failures: Vec::new() }
    }
}

const PHASE_COLUMNS: [&str; 13] =
    ["a", "b", "r", "nu", "theta", "d", "alpha", "kind", "nonneg_group", "regime", "critical_alpha", "seed", "samples"];

fn phase_row(row: &PhaseRow, seed: u64) -> Vec<Cell> {
    vec![
        row.a.into(),
        row.b.into(),
        row.r.into(),
        row.nu.into(),
        row.theta.into(),
        row.d.into(),
        row.alpha.into(),
        row.kind.clone().into(),
        row.nonneg_group.map(|g| g as u64).into(),
        row.regime.name().into(),
        row.critical_alpha.into(),
        seed.into(),
        0usize.into(),
    ]
}

pub fn classify(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let noise = cfg.noise()?.grid()?;
    let verdict = classify_noise(&params, &noise)?;
    if let Some(w) = &verdict.warning {
        eprintln!("warning: {w}");
    }
    let rows = sweep_phase_diagram(&[(params, noise)])?;
    let mut t = Table::new(&PHASE_COLUMNS);
    t.push(phase_row(&rows[0], seed));
    Ok(Outcome::exact(t))
}

pub fn sweep(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut grid: Vec<(EquationParams, GridNoise)> = Vec::new();
    for p in &cfg.sweep.points {
        grid.push((p.params, p.noise.grid()?));
    }
    if !cfg.sweep.alphas.is_empty() {
        let params = cfg.params()?;
        for &alpha in &cfg.sweep.alphas {
            grid.push((params, GridNoise::Spec(NoiseSpec::riesz_isotropic(params.d, alpha)?)));
        }
    }
    if grid.is_empty() {
        return Err(CliError::Invalid("sweep needs `sweep.points` or `sweep.alphas`".into()));
    }
    let rows = sweep_phase_diagram(&grid)?;
    let mut t = Table::new(&PHASE_COLUMNS);
    for r in &rows {
        t.push(phase_row(r, seed));
    }
    Ok(Outcome::exact(t))
}

pub fn kernel(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let mut t = Table::new(&["t", "rho", "fourier_green", "fourier_green_integral", "laplace_symbol", "seed", "samples"]);
    for &time in &cfg.kernel.times {
        for &rho in &cfg.kernel.rhos {
            t.push(vec![
                time.into(),
                rho.into(),
                fourier_green(&params, time, rho)?.into(),
                fourier_green_integral(&params, time, rho)?.into(),
                laplace_symbol(&params, rho).into(),
                seed.into(),
                0usize.into(),
            ]);
        }
    }
    Ok(Outcome::exact(t))
}

pub fn chaos(cfg: &RunConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let spec = cfg.noise()?.spec()?;
    let terms = cfg.chaos.terms;
    if terms == 0 {
        return Err(CliError::Invalid("chaos.terms must be >= 1".into()));
    }
    let mut t = Table::new(&["sequence", "n", "estimate", "std_err", "samples", "seed"]);
    for n in 1..=terms {
        let cfg_n = McConfig { seed: mc.seed.wrapping_add(n as u64), ..*mc };
        let e = t_n(&params, &spec, n, &cfg_n)?;
        t.push(vec!["t_n".into(), n.into(), e.value.into(), e.std_err.into(), e.samples.into(), cfg_n.seed.into()]);
    }
    for s in chaos_norms(&params, &spec, terms, mc)? {
        let e = s.norm_sq_at_1;
        t.push(vec!["fn_norm_sq".into(), s.n.into(), e.value.into(), e.std_err.into(), e.samples.into(), e.seed.into()]);
    }
    Ok(Outcome { table: t, samples: mc.samples, failures: Vec::new() })
}

const KINDS: [(VariationalKind, &str); 5] = [
    (VariationalKind::M, "M"),
    (VariationalKind::E, "E"),
    (VariationalKind::Sigma, "Sigma"),
    (VariationalKind::Rho, "Rho"),
    (VariationalKind::BoldM, "BoldM"),
];

fn direct_m(a: f64, noise: &VariationalNoise, knots: usize) -> Result<(f64, String), CliError> {
    let family = if knots == 0 {
        TrialFamily::default()
    } else {
        TrialFamily::RadialSpline { q_min: 1.0, q_max: 4.0, knots }
    };
    let est = estimate_m_direct(a, noise, &family, &OptConfig::default())?;
    let note = format!(
        "direct optimizer: q = {:.6}, scale = {:.6}, {} evaluations{}",
        est.profile.q,
        est.scale,
        est.evaluations,
        if est.stalled { ", stalled" } else { "" }
    );
    Ok((est.value.value, note))
}

/// M(γ, 1) from the table, falling back to the direct optimizer.
fn unit_m(cfg: &RunConfig, params: &EquationParams, noise: &NoiseConfig) -> Result<(f64, String), CliError> {
    let vn = noise.variational()?;
    if let Some(k) = lookup_constant(params.a, vn.dim(), noise.is_white()) {
        if let Some(v) = k.value {
            return Ok((v, format!("table: {}", k.note)));
        }
    }
    direct_m(params.a, &vn, cfg.variational.knots)
}

pub fn variational(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let noise = cfg.noise()?;
    let vn = noise.variational()?;
    let (a, d, alpha) = (params.a, vn.dim(), vn.alpha());
    let mut starts: Vec<(&str, VariationalValue, String)> = Vec::new();
    if let Some(g) = cfg.variational.given {
        let v = VariationalValue::new(g.kind.into(), a, d, alpha, g.value)?
            .with_scales(1.0, params.theta)?
            .with_nu(params.nu)?;
        starts.push(("given", v, String::new()));
    } else if !cfg.variational.direct {
        let (m, note) = unit_m(cfg, &params, noise)?;
        let v = VariationalValue::new(VariationalKind::M, a, d, alpha, m)?.with_nu(params.nu)?;
        starts.push(("table_or_direct", rescale(&v, 1.0, params.theta)?, note));
    }
    if cfg.variational.direct {
        let (m, note) = direct_m(a, &vn, cfg.variational.knots)?;
        let v = VariationalValue::new(VariationalKind::M, a, d, alpha, m)?.with_nu(params.nu)?;
        starts.push(("direct", rescale(&v, 1.0, params.theta)?, note));
    }
    let mut t =
        Table::new(&["source", "kind", "a", "d", "alpha", "nu", "theta", "value", "note", "seed", "samples"]);
    for (source, v, note) in &starts {
        for (kind, name) in KINDS {
            let (value, why) = match variational_convert(v, kind) {
                Ok(c) => (Some(c.value), note.clone()),
                Err(e) => (None, e.to_string()),
            };
            t.push(vec![
                (*source).into(),
                name.into(),
                a.into(),
                d.into(),
                alpha.into(),
                params.nu.into(),
                params.theta.into(),
                value.into(),
                why.into(),
                seed.into(),
                0usize.into(),
            ]);
        }
    }
    Ok(Outcome::exact(t))
}

pub fn asymptotics(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let noise = cfg.noise()?;
    let alpha = noise.grid()?.alpha();
    let sec = &cfg.asymptotics;
    let m = match sec.m {
        Some(m) => m,
        None => unit_m(cfg, &params, noise)?.0,
    };
    let mut modes = vec![AsymMode::General];
    modes.extend(sec.fixed_p.iter().map(|&p| AsymMode::FixedP(p)));
    modes.extend(sec.fixed_t.iter().map(|&t| AsymMode::FixedT(t)));
    let mut t = Table::new(&[
        "mode",
        "mode_arg",
        "a",
        "b",
        "r",
        "nu",
        "theta",
        "d",
        "alpha",
        "m",
        "beta",
        "t_p_factor",
        "coefficient",
        "oracle_residuals",
        "seed",
        "samples",
    ]);
    for mode in modes {
        let rep = asymptotics_report(&params, alpha, m, mode, sec.p)?;
        let arg = match mode {
            AsymMode::General => Some(sec.p),
            AsymMode::FixedP(p) => Some(p),
            AsymMode::FixedT(x) => Some(x),
        };
        let residuals: Vec<String> =
            rep.oracle_residuals.iter().map(|(k, v)| format!("{k}={}", crate::table::float_17(*v))).collect();
        t.push(vec![
            mode.name().into(),
            arg.into(),
            params.a.into(),
            params.b.into(),
            params.r.into(),
            params.nu.into(),
            params.theta.into(),
            params.d.into(),
            alpha.into(),
            m.into(),
            rep.beta.into(),
            rep.t_p_factor.into(),
            rep.coefficient.into(),
            residuals.join(";").into(),
            seed.into(),
            0usize.into(),
        ]);
    }
    Ok(Outcome::exact(t))
}

pub fn bounds(cfg: &RunConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let spec = cfg.noise()?.spec()?;
    let sec = &cfg.bounds;
    if sec.terms == 0 {
        return Err(CliError::Invalid("bounds.terms must be >= 1".into()));
    }
    let norms = chaos_norms(&params, &spec, sec.terms, mc)?;
    let mut t = Table::new(&[
        "t",
        "p",
        "lower",
        "lower_std_err",
        "trial_amplitude",
        "trial_width",
        "upper",
        "upper_direct",
        "upper_rescaled",
        "terms",
        "seed",
        "samples",
    ]);
    for &time in &sec.times {
        let low = best_gaussian_lower_bound(&params, &spec, sec.p, time, sec.terms, mc)?;
        let up = p_moment_upper(&params, &spec, sec.p, time, &norms)?;
        t.push(vec![
            time.into(),
            sec.p.into(),
            low.value.into(),
            low.std_err.into(),
            low.trial.amplitude.into(),
            low.trial.width.into(),
            up.value.into(),
            up.direct.into(),
            up.rescaled.into(),
            sec.terms.into(),
            mc.seed.into(),
            mc.samples.into(),
        ]);
    }
    Ok(Outcome { table: t, samples: mc.samples, failures: Vec::new() })
}

pub fn verify(seed: u64) -> Result<Outcome, CliError> {
    let mut t = Table::new(&["id", "title", "passed", "checks", "failed", "seconds", "budget_seconds", "seed", "samples"]);
    let mut failures = Vec::new();
    for rep in run_all(seed) {
        eprintln!("{}", rep.line());
        let failed = rep.failures();
        for f in &failed {
            if !KNOWN_UNATTAINABLE.contains(&f.as_str()) {
                failures.push(format!("{}: {f}", rep.id));
            }
        }
        t.push(vec![
            rep.id.into(),
            rep.title.into(),
            rep.passed.into(),
            rep.checks.len().into(),
            failed.join("; ").into(),
            rep.seconds.into(),
            rep.budget_seconds.into(),
            seed.into(),
            0usize.into(),
        ]);
    }
    Ok(Outcome { table: t, samples: 0, failures })
}
