//! The acceptance criteria as runnable checks. Each returns one [`Verdict`];
//! the `acceptance` test target prints them one per line.

use std::path::Path;
use std::time::Instant;

use homog_core::dual::solve_dual_correctors;
use homog_core::harness::{run_experiment, write_report, ExperimentConfig, ExperimentId, RateReport};
use homog_core::kernels::{gamma_eps_column, EvalSpec, HeatKernelClosedForm, ResolutionPolicy};
use homog_core::oracle::harmonic_mean_1d;
use homog_core::{
    flux_identity_residual, solve_corrector, CellSolveOptions, CoefficientFamily, CoefficientField, Result, Scheme,
    SpaceTimeTorusGrid,
};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub number: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    /// Wall-clock limit in seconds.
    pub limit: Option<f64>,
}

impl Verdict {
    pub fn line(&self) -> String {
        let limit = self.limit.map(|l| format!(" / limit {l:.0} s")).unwrap_or_default();
        format!(
            "criterion {:>2} {} {}: {} [{:.1} s{}]",
            self.number,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds,
            limit
        )
    }
}

pub const CRITERIA: [(&str, Option<f64>); 11] = [
    ("constant-coefficient collapse", Some(10.0)),
    ("1D homogenized coefficient", Some(5.0)),
    ("dual-corrector identities", Some(30.0)),
    ("kernel rate (thm1)", Some(1200.0)),
    ("gradient rate (thm2)", Some(1800.0)),
    ("mixed-derivative rate (thm3)", Some(2700.0)),
    ("equistabilization (cor)", Some(900.0)),
    ("Gaussian tails", None),
    ("adjoint identity", None),
    ("weak residual refinement", None),
    ("smoothing rate", None),
];

fn field(family: CoefficientFamily) -> Result<CoefficientField> {
    CoefficientField::make_builtin(family)
}

fn collapse() -> Result<(bool, String)> {
    let f = field(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None })?;
    let set = solve_corrector(&f, SpaceTimeTorusGrid::new(1, 64, 64)?, &CellSolveOptions::default())?;
    let dual = solve_dual_correctors(&set.b_flux, Scheme::Spectral)?;
    let a_hat = set.a_hat.scalar().unwrap_or(f64::NAN);
    let s = gamma_eps_column(
        &f,
        0.125,
        (0.0, 0.0),
        &EvalSpec::new(vec![1.0], -4.0, 4.0),
        &ResolutionPolicy::default(),
    )?;
    let hk = HeatKernelClosedForm::from_scalar(1.0)?;
    let mut err = 0.0f64;
    for (&x, v) in s.x.iter().zip(&s.values) {
        err = err.max((v - hk.value(&[x], 1.0, &[0.0], 0.0)?).abs());
    }
    let (chi, phi) = (set.chi.max_abs(), dual.phi_sup());
    let pass = chi <= 1e-12 && phi <= 1e-12 && a_hat == 1.0 && err <= 1e-4;
    Ok((
        pass,
        format!("|chi| {chi:.1e}, |phi| {phi:.1e}, a_hat {a_hat}, sup|G_eps - G_0| {err:.2e} (<= 1e-4)"),
    ))
}

fn harmonic() -> Result<(bool, String)> {
    let f = field(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 })?;
    let set = solve_corrector(&f, SpaceTimeTorusGrid::new(1, 256, 256)?, &CellSolveOptions::default())?;
    let a_hat = set.a_hat.scalar().unwrap_or(f64::NAN);
    let oracle = harmonic_mean_1d(&f)?;
    let gap = (a_hat - oracle).abs();
    Ok((gap <= 1e-6, format!("a_hat {a_hat:.10}, oracle harmonic-mean-b0.5 {oracle:.10}, gap {gap:.1e}")))
}

fn duals() -> Result<(bool, String)> {
    let f = field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 })?;
    let set = solve_corrector(&f, SpaceTimeTorusGrid::new(1, 64, 64)?, &CellSolveOptions::default())?;
    let dual = solve_dual_correctors(&set.b_flux, Scheme::Spectral)?;
    let r = flux_identity_residual(&dual, &set.b_flux)?;
    Ok((
        r.flux <= 1e-8 && r.antisymmetry == 0.0,
        format!("flux residual {:.2e} (<= 1e-8), antisymmetry {:.1e}", r.flux, r.antisymmetry),
    ))
}

fn describe(r: &RateReport) -> String {
    let mut parts = Vec::new();
    if let Some(f) = &r.fit {
        parts.push(format!("slope {:.3}, R2 {:.4}", f.slope, f.r2));
    }
    if let Some(n) = &r.fit_note {
        parts.push(n.clone());
    }
    for c in &r.checks {
        let bounds = match (c.lower, c.upper) {
            (Some(l), Some(u)) => format!(" in [{l}, {u}]"),
            (Some(l), None) => format!(" >= {l}"),
            (None, Some(u)) => format!(" <= {u}"),
            (None, None) => String::new(),
        };
        parts.push(format!("{} {:.4}{}{}", c.name, c.value, bounds, if c.pass { "" } else { " violated" }));
    }
    for (k, v) in &r.diagnostics {
        parts.push(format!("{k} {v:.4}"));
    }
    if !r.oracle_ids.is_empty() {
        parts.push(format!("oracles {}", r.oracle_ids.join(",")));
    }
    parts.join("; ")
}

fn experiment(id: ExperimentId, reports: Option<&Path>) -> Result<(bool, String)> {
    let r = run_experiment(&ExperimentConfig::new(id))?;
    if let Some(dir) = reports {
        write_report(&r, dir)?;
    }
    Ok((r.pass, describe(&r)))
}

/// Evaluate criterion `number` (1-based); reports of rate experiments go to
/// `reports` when given.
pub fn evaluate(number: usize, reports: Option<&Path>) -> Verdict {
    let (name, limit) = CRITERIA[number - 1];
    let clock = Instant::now();
    let outcome = match number {
        1 => collapse(),
        2 => harmonic(),
        3 => duals(),
        4 => experiment(ExperimentId::Thm1, reports),
        5 => experiment(ExperimentId::Thm2, reports),
        6 => experiment(ExperimentId::Thm3, reports),
        7 => experiment(ExperimentId::Cor, reports),
        8 => experiment(ExperimentId::Tail, reports),
        9 => experiment(ExperimentId::Adjoint, reports),
        10 => experiment(ExperimentId::Weak, reports),
        _ => experiment(ExperimentId::Smoothing, reports),
    };
    let seconds = clock.elapsed().as_secs_f64();
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    let in_time = limit.is_none_or(|l| seconds <= l);
    Verdict {
        number,
        name,
        pass: pass && in_time,
        detail: if in_time { detail } else { format!("{detail}; over the time limit") },
        seconds,
        limit,
    }
}
