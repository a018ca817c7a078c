//! Convergence-rate experiments.
//!
//! Each experiment sweeps a ladder (ε, or t for the fixed-ε bound), measures
//! an error against the homogenized reference, fits `log error` against
//! `log scale` and checks the slope against a window. Points whose error is
//! indistinguishable from the discretization floor of the homogenized
//! problem are flagged and left out of the fit.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{solve_corrector, CellSolveOptions, CorrectorSet};
use crate::coefficients::{CoefficientFamily, CoefficientField};
use crate::dual::solve_dual_correctors;
use crate::error::{HomogError, Result};
use crate::expansion::{
    build_expansion, smooth, weak_residual, CellFactors, HomogenizedJets, SampledField, SmoothingKernel, TestFunction,
};
use crate::fft::{is_nyquist, wavenumber, NdFft};
use crate::grid::{Scheme, SpaceTimeTorusGrid};
use crate::interp::PeriodicInterpolator;
use crate::kernels::{
    adjoint_column, column_domain, evolve_periodic, gamma_eps_column, gamma_eps_gradients, gamma_eps_pole_derivative,
    source_data, step_schedule, EvalSpec, HeatKernelClosedForm, PeriodicDomain, ResolutionPolicy, SourceKind,
};
use crate::oracle;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `Q_r(x₀, t₀) = B(x₀, r) × (t₀ − r², t₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub r: f64,
}

impl ParabolicCylinder {
    pub fn new(x0: Vec<f64>, t0: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(HomogError::InvalidParameter(format!("cylinder radius {r} must be positive")));
        }
        if x0.is_empty() || x0.len() > 2 {
            return Err(HomogError::UnsupportedDimension(x0.len()));
        }
        Ok(Self { x0, t0, r })
    }

    /// Open ball in space, half-open interval `(t₀ − r², t₀]` in time.
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        let d2: f64 = x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 < self.r * self.r && t > self.t0 - self.r * self.r && t <= self.t0
    }

    pub fn time_interval(&self) -> (f64, f64) {
        (self.t0 - self.r * self.r, self.t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Sup-norm error of `Γ_ε − Γ₀`, rate ε.
    #[default]
    Thm1,
    /// `∇_x Γ_ε − (1 + ∇χ^ε)∇_x Γ₀`, rate ε log(1/ε).
    Thm2,
    /// Same in the pole variable, through the adjoint column.
    Thm2Adj,
    /// `∇_x∇_y Γ_ε` against the doubly corrected `∇²Γ₀`.
    Thm3,
    /// Fixed ε, growing t: `‖u₁ − u₀‖ ≲ t^{-1/2}` for bounded data.
    Cor,
    /// Gaussian tail of `Γ_ε`.
    Tail,
    /// Direct columns against the adjoint column at spot points.
    Adjoint,
    /// Weak residual of the corrected expansion under grid refinement.
    Weak,
    /// `‖S_ε(∇f) − ∇f‖ / (‖∇²f‖ + ‖∂_t f‖)` against ε.
    Smoothing,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        ExperimentId::Thm1,
        ExperimentId::Thm2,
        ExperimentId::Thm2Adj,
        ExperimentId::Thm3,
        ExperimentId::Cor,
        ExperimentId::Tail,
        ExperimentId::Adjoint,
        ExperimentId::Weak,
        ExperimentId::Smoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Thm1 => "thm1",
            ExperimentId::Thm2 => "thm2",
            ExperimentId::Thm2Adj => "thm2-adj",
            ExperimentId::Thm3 => "thm3",
            ExperimentId::Cor => "cor",
            ExperimentId::Tail => "tail",
            ExperimentId::Adjoint => "adjoint",
            ExperimentId::Weak => "weak",
            ExperimentId::Smoothing => "smoothing",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = HomogError;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| HomogError::Unknown {
                kind: "experiment",
                name: s.to_string(),
            })
    }
}

/// Experiment parameters. Empty ladders and `None` fields take the
/// experiment's defaults in [`ExperimentConfig::resolved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub coefficient: Option<CoefficientFamily>,
    pub eps: Vec<f64>,
    /// Evaluation time for the ε ladders.
    pub t: f64,
    /// Time ladder of `cor`.
    pub t_ladder: Vec<f64>,
    pub pole: (f64, f64),
    /// Half width of the error window around the pole.
    pub half_width: Option<f64>,
    pub scheme: Scheme,
    pub cell_n: usize,
    pub cell_nt: usize,
    pub cell_tol: f64,
    pub policy: ResolutionPolicy,
    /// Accepted slope interval.
    pub window: Option<(f64, f64)>,
    pub min_r2: Option<f64>,
    /// A point is at the floor when its error is within this factor of it.
    pub floor_factor: f64,
    /// Refinement factor of the reference run bounding the thm1
    /// discretization error at the smallest ε (0 skips it).
    pub reference_factor: Option<usize>,
    /// `cor`: data `min(1, exp(r² − x²))` on a periodic domain of this length.
    pub data_radius: f64,
    pub domain_length: f64,
    /// `[x_lo, x_hi, t_lo, t_hi]` for `weak` and `smoothing`.
    pub region: Option<[f64; 4]>,
    pub refinements: Vec<usize>,
    /// First-moment tilt of the smoothing kernel in `smoothing`.
    pub tilt: f64,
    /// `(y, s)` pole points of the `adjoint` check.
    pub spot_points: Vec<(f64, f64)>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentId::Thm1,
            coefficient: None,
            eps: Vec::new(),
            t: 1.0,
            t_ladder: Vec::new(),
            pole: (0.0, 0.0),
            half_width: None,
            scheme: Scheme::Spectral,
            cell_n: 64,
            cell_nt: 64,
            cell_tol: 1e-12,
            policy: ResolutionPolicy::default(),
            window: None,
            min_r2: None,
            floor_factor: 3.0,
            reference_factor: None,
            data_radius: 12.0,
            domain_length: 128.0,
            region: None,
            refinements: Vec::new(),
            tilt: 0.9,
            spot_points: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            ..Default::default()
        }
    }

    /// Fill experiment defaults and validate.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        let id = c.experiment;
        let span = c.t - c.pole.1;
        if c.coefficient.is_none() {
            c.coefficient = Some(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
        }
        if c.eps.is_empty() {
            c.eps = match id {
                ExperimentId::Thm1 | ExperimentId::Thm2 | ExperimentId::Thm2Adj => vec![0.25, 0.125, 0.0625, 0.03125],
                ExperimentId::Thm3 => vec![0.25, 0.125, 0.0625],
                ExperimentId::Cor => vec![1.0],
                ExperimentId::Tail => vec![0.25, 0.125],
                ExperimentId::Adjoint | ExperimentId::Weak => vec![0.125],
                ExperimentId::Smoothing => vec![0.125, 0.0625, 0.03125],
            };
        }
        if c.t_ladder.is_empty() && id == ExperimentId::Cor {
            c.t_ladder = vec![1.0, 4.0, 16.0];
        }
        if c.half_width.is_none() {
            c.half_width = match id {
                ExperimentId::Thm1 => Some(4.0),
                ExperimentId::Thm2 | ExperimentId::Thm2Adj | ExperimentId::Thm3 => Some(3.0 * span.max(0.0).sqrt()),
                ExperimentId::Tail => Some(5.0),
                _ => None,
            };
        }
        if c.window.is_none() {
            c.window = match id {
                ExperimentId::Thm1 => Some((0.85, 1.30)),
                ExperimentId::Thm2 | ExperimentId::Thm2Adj => Some((0.80, 1.30)),
                ExperimentId::Thm3 => Some((0.75, 1.35)),
                ExperimentId::Smoothing => Some((0.9, 1.1)),
                _ => None,
            };
        }
        if c.min_r2.is_none() {
            c.min_r2 = match id {
                ExperimentId::Thm1 => Some(0.97),
                ExperimentId::Tail => Some(0.99),
                _ => None,
            };
        }
        if c.reference_factor.is_none() {
            c.reference_factor = Some(if id == ExperimentId::Thm1 { 2 } else { 0 });
        }
        if c.region.is_none() {
            c.region = match id {
                ExperimentId::Weak => Some([-1.0, 1.0, 0.75, 1.0]),
                ExperimentId::Smoothing => Some([0.0, 1.0, 0.0, 0.5]),
                _ => None,
            };
        }
        if c.refinements.is_empty() && id == ExperimentId::Weak {
            c.refinements = vec![1, 2];
        }
        if c.spot_points.is_empty() && id == ExperimentId::Adjoint {
            c.spot_points = vec![(0.0, 0.0), (0.25, 0.0), (-0.5, 0.25), (0.5, 0.5), (1.0, 0.125)];
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HomogError::InvalidParameter(m));
        if let Some((i, &e)) = self.eps.iter().enumerate().find(|(_, e)| !(**e > 0.0 && e.is_finite())) {
            return Err(HomogError::NonPositive { index: i, value: e });
        }
        let needs_time = !matches!(self.experiment, ExperimentId::Cor | ExperimentId::Smoothing | ExperimentId::Weak);
        if needs_time && self.t <= self.pole.1 {
            return Err(HomogError::TimeOrdering { t: self.t, s: self.pole.1 });
        }
        if let Some((i, &t)) = self.t_ladder.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
            return Err(HomogError::NonPositive { index: i, value: t });
        }
        if let Some([x0, x1, t0, t1]) = self.region {
            if !(x1 > x0 && t1 > t0) {
                return bad(format!("empty region [{x0}, {x1}] x [{t0}, {t1}]"));
            }
            if self.experiment == ExperimentId::Weak && t0 <= self.pole.1 {
                return Err(HomogError::TimeOrdering { t: t0, s: self.pole.1 });
            }
        }
        if let Some(&(_, s)) = self.spot_points.iter().find(|p| p.1 >= self.t) {
            return Err(HomogError::TimeOrdering { t: self.t, s });
        }
        if self.refinements.contains(&0) {
            return bad("refinement factors must be ≥ 1".into());
        }
        if !(self.floor_factor >= 1.0) {
            return bad(format!("floor factor {} must be ≥ 1", self.floor_factor));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<CoefficientField> {
        let family = self
            .coefficient
            .clone()
            .unwrap_or(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
        CoefficientField::make_builtin(family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub scale: f64,
    pub sup_error: f64,
    pub weighted_error: Option<f64>,
    /// Same error measure for the constant-`â` discrete scheme.
    pub floor: Option<f64>,
    pub floor_flag: bool,
    pub extras: BTreeMap<String, f64>,
}

/// Raw per-point error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub scale: f64,
    pub x: f64,
    pub t: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub experiment: ExperimentId,
    pub coefficient: CoefficientFamily,
    pub a_hat: Option<f64>,
    /// Ladder variable: `eps`, `t` or `h`.
    pub scale_name: String,
    /// Row quantity entering the fit: `sup_error` or an extras key.
    pub fit_quantity: String,
    pub rows: Vec<RateRow>,
    #[serde(skip)]
    pub points: Vec<PointError>,
    pub fit: Option<RateFit>,
    pub fit_note: Option<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub oracle_ids: Vec<String>,
    pub config: ExperimentConfig,
    pub row_seconds: Vec<f64>,
    pub runtime_seconds: f64,
    pub version: String,
}

impl RateReport {
    fn fit_values(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match self.fit_quantity.as_str() {
                "sup_error" => r.sup_error,
                key => r.extras.get(key).copied().unwrap_or(f64::NAN),
            })
            .collect()
    }
}

/// Least-squares line `y = slope·x + intercept` with its R².
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Fit `log error = slope · log scale + intercept`.
pub fn fit_rate(errors: &[f64], scales: &[f64]) -> Result<RateFit> {
    if errors.len() != scales.len() {
        return Err(HomogError::LatticeMismatch(format!(
            "{} errors for {} scales",
            errors.len(),
            scales.len()
        )));
    }
    if errors.len() < 3 {
        return Err(HomogError::InsufficientPoints {
            needed: 3,
            got: errors.len(),
        });
    }
    for (i, &v) in errors.iter().chain(scales).enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(HomogError::NonPositive {
                index: i % errors.len(),
                value: v,
            });
        }
    }
    let lx: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&lx, &ly);
    Ok(RateFit {
        slope,
        intercept,
        r2,
        n_points: errors.len(),
    })
}

/// The production column scheme with constant coefficient `â`, solved mode
/// by mode. Its distance to the closed-form `Γ₀` is the floor below which
/// `Γ_ε − Γ₀` cannot be resolved.
pub fn homogenized_discrete_column(
    a_hat: f64,
    eps: f64,
    pole: (f64, f64),
    t: f64,
    policy: &ResolutionPolicy,
    source: SourceKind,
) -> Result<(PeriodicDomain, Vec<f64>)> {
    let (y, s) = pole;
    if t <= s {
        return Err(HomogError::TimeOrdering { t, s });
    }
    let domain = column_domain(eps, y, t - s, policy, source);
    let u0 = source_data(&domain, y, policy, source);
    let k0 = eps * eps / policy.steps_per_period.max(1) as f64;
    let mut groups: Vec<(f64, f64, i32)> = Vec::new();
    for st in step_schedule(s, &[t], k0, policy.startup_steps) {
        match groups.last_mut() {
            Some(g) if g.0 == st.dt && g.1 == st.theta => g.2 += 1,
            _ => groups.push((st.dt, st.theta, 1)),
        }
    }
    let (n, h) = (domain.n, domain.h);
    let fft = NdFft::new(&[n]);
    let mut spec = fft.forward_real(&u0);
    for (j, c) in spec.iter_mut().enumerate() {
        let lam = -4.0 * a_hat / (h * h) * (PI * j as f64 / n as f64).sin().powi(2);
        let amp: f64 = groups
            .iter()
            .map(|&(dt, th, m)| ((1.0 + (1.0 - th) * dt * lam) / (1.0 - th * dt * lam)).powi(m))
            .product();
        *c *= amp;
    }
    Ok((domain, fft.inverse_real(spec)))
}

fn window_indices(domain: &PeriodicDomain, lo: f64, hi: f64) -> Vec<usize> {
    (0..domain.n)
        .filter(|&i| {
            let x = domain.x(i);
            x >= lo - 1e-12 && x <= hi + 1e-12
        })
        .collect()
}

fn variation(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / max
}

fn solve_cell(field: &CoefficientField, cfg: &ExperimentConfig) -> Result<CorrectorSet> {
    let grid = SpaceTimeTorusGrid::new(field.d(), cfg.cell_n, cfg.cell_nt)?;
    solve_corrector(field, grid, &CellSolveOptions::new(cfg.scheme).with_tol(cfg.cell_tol))
}

/// Table refinement putting fine-grid nodes and half nodes on table nodes.
fn table_upsample(policy: &ResolutionPolicy, n: usize, nt: usize) -> usize {
    (2 * policy.points_per_period)
        .div_ceil(n)
        .max(policy.steps_per_period.div_ceil(nt))
        .max(1)
}

fn scalar_a_hat(set: &CorrectorSet) -> Result<f64> {
    set.a_hat
        .scalar()
        .ok_or_else(|| HomogError::Unsupported("rate experiments need a scalar one-dimensional field".into()))
}

fn gradient_interpolator(set: &CorrectorSet, policy: &ResolutionPolicy) -> Result<PeriodicInterpolator> {
    let g = set.grid();
    PeriodicInterpolator::new(
        g,
        set.grad_chi.component(0),
        table_upsample(policy, g.n_space(), g.n_time()),
    )
}

struct LadderPoint {
    row: RateRow,
    points: Vec<PointError>,
    seconds: f64,
}

struct Outcome {
    a_hat: Option<f64>,
    scale_name: &'static str,
    fit_quantity: &'static str,
    points: Vec<LadderPoint>,
    fit_rows: bool,
    checks: Vec<Check>,
    diagnostics: BTreeMap<String, f64>,
    notes: Vec<String>,
    oracle_ids: Vec<String>,
}

impl Outcome {
    fn new(scale_name: &'static str, points: Vec<LadderPoint>) -> Self {
        Self {
            a_hat: None,
            scale_name,
            fit_quantity: "sup_error",
            points,
            fit_rows: true,
            checks: Vec::new(),
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
            oracle_ids: Vec::new(),
        }
    }
}

/// Run one experiment from a configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    let start = Instant::now();
    let cfg = config.resolved()?;
    let field = cfg.field()?;
    if field.d() != 1 || field.m() != 1 {
        return Err(HomogError::Unsupported(format!(
            "rate experiments run for d = 1, m = 1 (got d = {}, m = {})",
            field.d(),
            field.m()
        )));
    }
    let out = match cfg.experiment {
        ExperimentId::Thm1 => thm1(&cfg, &field)?,
        ExperimentId::Thm2 | ExperimentId::Thm2Adj | ExperimentId::Thm3 => gradients(&cfg, &field)?,
        ExperimentId::Cor => equistabilization(&cfg, &field)?,
        ExperimentId::Tail => tail(&cfg, &field)?,
        ExperimentId::Adjoint => adjoint(&cfg, &field)?,
        ExperimentId::Weak => weak(&cfg, &field)?,
        ExperimentId::Smoothing => smoothing(&cfg)?,
    };
    let mut report = RateReport {
        experiment: cfg.experiment,
        coefficient: field.family().clone(),
        a_hat: out.a_hat,
        scale_name: out.scale_name.into(),
        fit_quantity: out.fit_quantity.into(),
        rows: out.points.iter().map(|p| p.row.clone()).collect(),
        points: out.points.iter().flat_map(|p| p.points.iter().copied()).collect(),
        fit: None,
        fit_note: None,
        checks: Vec::new(),
        pass: false,
        diagnostics: out.diagnostics,
        notes: out.notes,
        oracle_ids: out.oracle_ids,
        config: cfg.clone(),
        row_seconds: out.points.iter().map(|p| p.seconds).collect(),
        runtime_seconds: 0.0,
        version: VERSION.into(),
    };
    if out.fit_rows {
        apply_fit(&mut report, &cfg);
    }
    report.checks.extend(out.checks);
    report.pass = !report.checks.is_empty() && report.checks.iter().all(|c| c.pass);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn apply_fit(report: &mut RateReport, cfg: &ExperimentConfig) {
    let values = report.fit_values();
    let (errs, scales): (Vec<f64>, Vec<f64>) = report
        .rows
        .iter()
        .zip(&values)
        .filter(|(r, _)| !r.floor_flag)
        .map(|(r, v)| (*v, r.scale))
        .unzip();
    let flagged = report.rows.iter().filter(|r| r.floor_flag).count();
    if flagged > 0 && errs.len() < 3 {
        report.fit_note = Some("degenerate: errors at floor".into());
        let worst = report
            .rows
            .iter()
            .filter_map(|r| r.floor.map(|f| r.sup_error / f.max(f64::MIN_POSITIVE)))
            .fold(0.0, f64::max);
        report
            .checks
            .push(Check::new("errors_at_floor", worst, None, Some(cfg.floor_factor)));
        return;
    }
    match fit_rate(&errs, &scales) {
        Ok(fit) => {
            if let Some((lo, hi)) = cfg.window {
                report.checks.push(Check::new("slope", fit.slope, Some(lo), Some(hi)));
            }
            if let Some(r2) = cfg.min_r2 {
                report.checks.push(Check::new("r2", fit.r2, Some(r2), None));
            }
            if flagged > 0 {
                report.notes.push(format!("{flagged} ladder point(s) at the floor left out of the fit"));
            }
            report.fit = Some(fit);
        }
        Err(e) => {
            report.fit_note = Some(format!("no rate fit: {e}"));
            if cfg.window.is_some() {
                report.checks.push(Check::new("slope", f64::NAN, None, None));
            }
        }
    }
}

fn thm1(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Outcome> {
    let set = solve_cell(field, cfg)?;
    let a_hat = scalar_a_hat(&set)?;
    let hk = HeatKernelClosedForm::from_scalar(a_hat)?;
    let (y, s) = cfg.pole;
    let t = cfg.t;
    let w = cfg.half_width.unwrap_or(4.0);
    let mu = field.declared_mu();
    let factor = cfg.reference_factor.unwrap_or(0);
    let eps_min = cfg.eps.iter().cloned().fold(f64::INFINITY, f64::min);

    let ladder = || -> Result<Vec<LadderPoint>> {
        cfg.eps
            .par_iter()
            .map(|&eps| {
                let clock = Instant::now();
                let spec = EvalSpec::new(vec![t], y - w, y + w);
                let col = gamma_eps_column(field, eps, cfg.pole, &spec, &cfg.policy)?;
                let (domain, disc) = homogenized_discrete_column(a_hat, eps, cfg.pole, t, &cfg.policy, SourceKind::Dirac)?;
                let idx = window_indices(&domain, y - w, y + w);
                if idx.len() != col.n_x() {
                    return Err(HomogError::LatticeMismatch("floor lattice differs from the column".into()));
                }
                let (mut sup, mut weighted, mut floor) = (0.0f64, 0.0f64, 0.0f64);
                let mut points = Vec::with_capacity(col.n_x());
                for (p, &x) in col.x.iter().enumerate() {
                    let g0 = hk.value(&[x], t, &[y], s)?;
                    let e = (col.values[p] - g0).abs();
                    sup = sup.max(e);
                    weighted = weighted.max(e * (mu * (x - y).powi(2) / (8.0 * (t - s))).exp());
                    floor = floor.max((disc[idx[p]] - g0).abs());
                    points.push(PointError { scale: eps, x, t, error: e });
                }
                Ok(LadderPoint {
                    row: RateRow {
                        scale: eps,
                        sup_error: sup,
                        weighted_error: Some(weighted),
                        floor: Some(floor),
                        floor_flag: sup <= cfg.floor_factor * floor,
                        extras: BTreeMap::new(),
                    },
                    points,
                    seconds: clock.elapsed().as_secs_f64(),
                })
            })
            .collect()
    };
    let gap = || -> Result<Option<(f64, f64)>> {
        if factor < 2 || field.is_constant() {
            return Ok(None);
        }
        let spec = EvalSpec::new(vec![t], y - w, y + w);
        let prod = gamma_eps_column(field, eps_min, cfg.pole, &spec, &cfg.policy)?;
        let r = oracle::reference_kernel(field, eps_min, cfg.pole, t, y - w, y + w, &cfg.policy, &[factor])?;
        let refined = &r.levels[0];
        if refined.n_x() != prod.n_x() {
            return Err(HomogError::LatticeMismatch("reference lattice differs from the column".into()));
        }
        let diff = prod
            .values
            .iter()
            .zip(&refined.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let f2 = (factor * factor) as f64;
        Ok(Some((diff, diff * f2 / (f2 - 1.0))))
    };
    let (points, gap) = rayon::join(ladder, gap);
    let points = points?;
    let mut out = Outcome::new("eps", points);
    out.a_hat = Some(a_hat);
    if let Some((diff, bound)) = gap? {
        let err = out
            .points
            .iter()
            .find(|p| p.row.scale == eps_min)
            .map(|p| p.row.sup_error)
            .unwrap_or(f64::NAN);
        out.diagnostics.insert("reference_gap".into(), diff);
        out.diagnostics.insert("discretization_bound".into(), bound);
        out.checks
            .push(Check::new("discretization_bound_over_error", bound / err, None, Some(0.1)));
        out.oracle_ids.push(format!("reference-kernel-x{factor}"));
    }
    let weighted: Vec<f64> = out.points.iter().filter_map(|p| p.row.weighted_error).collect();
    let scales: Vec<f64> = out.points.iter().map(|p| p.row.scale).collect();
    if let Ok(f) = fit_rate(&weighted, &scales) {
        out.diagnostics.insert("weighted_slope".into(), f.slope);
    }
    Ok(out)
}

/// thm2, thm2-adj and thm3: corrected gradients, errors divided by
/// `log(2 + ε⁻¹√(t − s))` before fitting.
fn gradients(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Outcome> {
    let id = cfg.experiment;
    let set = solve_cell(field, cfg)?;
    let a_hat = scalar_a_hat(&set)?;
    let hk = HeatKernelClosedForm::from_scalar(a_hat)?;
    let gchi = gradient_interpolator(&set, &cfg.policy)?;
    let gchi_adj = if id == ExperimentId::Thm2 {
        None
    } else {
        let adj = solve_cell(&field.adjoint_coefficient(), cfg)?;
        Some(gradient_interpolator(&adj, &cfg.policy)?)
    };
    let (y, s) = cfg.pole;
    let t = cfg.t;
    let span = t - s;
    let w = cfg.half_width.unwrap_or(3.0 * span.sqrt());
    let wide = (cfg.policy.half_width_for(span) - 1.0).max(w);
    let mu = field.declared_mu();

    let points: Vec<LadderPoint> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let e2 = eps * eps;
            let (col, centre) = match id {
                ExperimentId::Thm2 => {
                    let spec = EvalSpec::new(vec![t], y - wide, y + wide);
                    (gamma_eps_gradients(field, eps, cfg.pole, &spec, &cfg.policy)?, y)
                }
                ExperimentId::Thm2Adj => {
                    let spec = EvalSpec::new(vec![s], y - wide, y + wide).with_gradients();
                    (adjoint_column(field, eps, (y, t), &spec, &cfg.policy)?, y)
                }
                _ => {
                    let spec = EvalSpec::new(vec![t], y - wide, y + wide);
                    (gamma_eps_pole_derivative(field, eps, cfg.pole, &spec, &cfg.policy)?, y)
                }
            };
            let grad = col
                .grad_row(0)
                .ok_or_else(|| HomogError::MissingInput("column gradients".into()))?;
            let source = if id == ExperimentId::Thm3 {
                SourceKind::Dipole
            } else {
                SourceKind::Dirac
            };
            let (domain, disc) = homogenized_discrete_column(a_hat, eps, (y, s), t, &cfg.policy, source)?;
            let idx = window_indices(&domain, y - wide, y + wide);
            if idx.len() != col.n_x() {
                return Err(HomogError::LatticeMismatch("floor lattice differs from the column".into()));
            }
            let n = domain.n;
            let pole_factor = match (&gchi_adj, id) {
                (Some(g), ExperimentId::Thm3) => 1.0 + g.eval(&[y / eps], -s / e2),
                _ => 1.0,
            };
            let (mut sup, mut weighted, mut floor) = (0.0f64, 0.0f64, 0.0f64);
            let mut points = Vec::new();
            for (p, &xs) in col.x.iter().enumerate() {
                let xg = xs + col.grad_offset;
                let (expected, plain) = match id {
                    ExperimentId::Thm2 => {
                        let g0 = hk.jet(&[xg], t, &[y], s)?.grad[0];
                        ((1.0 + gchi.eval(&[xg / eps], t / e2)) * g0, g0)
                    }
                    ExperimentId::Thm2Adj => {
                        // ∂_y Γ₀(x₀, t₀; y, s) = ∂_z G(y − x₀, t₀ − s)
                        let g0 = hk.jet(&[xg], t, &[y], s)?.grad[0];
                        let corr = gchi_adj.as_ref().map_or(0.0, |g| g.eval(&[xg / eps], -s / e2));
                        ((1.0 + corr) * g0, g0)
                    }
                    _ => {
                        let g0 = -hk.jet(&[xg], t, &[y], s)?.hess[0];
                        ((1.0 + gchi.eval(&[xg / eps], t / e2)) * pole_factor * g0, g0)
                    }
                };
                let i = idx[p];
                let dg = (disc[(i + 1) % n] - disc[i]) / domain.h;
                let e = (grad[p] - expected).abs();
                weighted = weighted.max(e * (mu * (xg - centre).powi(2) / (8.0 * span)).exp());
                if (xg - centre).abs() <= w {
                    sup = sup.max(e);
                    floor = floor.max((dg - plain).abs());
                    points.push(PointError { scale: eps, x: xg, t, error: e });
                }
            }
            let log = (2.0 + span.sqrt() / eps).ln();
            let mut extras = BTreeMap::new();
            extras.insert("log_divided".into(), sup / log);
            Ok(LadderPoint {
                row: RateRow {
                    scale: eps,
                    sup_error: sup,
                    weighted_error: Some(weighted),
                    floor: Some(floor),
                    floor_flag: sup <= cfg.floor_factor * floor,
                    extras,
                },
                points,
                seconds: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::new("eps", points);
    out.a_hat = Some(a_hat);
    out.fit_quantity = "log_divided";
    let live: Vec<&LadderPoint> = out.points.iter().filter(|p| !p.row.floor_flag).collect();
    let raw: Vec<f64> = live.iter().map(|p| p.row.sup_error).collect();
    let scales: Vec<f64> = live.iter().map(|p| p.row.scale).collect();
    if let Ok(f) = fit_rate(&raw, &scales) {
        out.diagnostics.insert("raw_slope".into(), f.slope);
    }
    Ok(out)
}

fn equistabilization(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Outcome> {
    let set = solve_cell(field, cfg)?;
    let a_hat = scalar_a_hat(&set)?;
    let gchi = gradient_interpolator(&set, &cfg.policy)?;
    let eps = cfg.eps[0];
    let len = cfg.domain_length;
    let h = eps / cfg.policy.points_per_period as f64;
    let n = (len / h).round() as usize;
    let domain = PeriodicDomain {
        origin: -len / 2.0,
        h,
        n,
    };
    let r = cfg.data_radius;
    let data: Vec<f64> = (0..n).map(|i| (r * r - domain.x(i).powi(2)).exp().min(1.0)).collect();
    let mut times = cfg.t_ladder.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let clock = Instant::now();
    let evo = evolve_periodic(field, eps, domain, data.clone(), 0.0, &times, &cfg.policy)?;
    let fft = NdFft::new(&[n]);
    let fh = fft.forward_real(&data);
    let mut points = Vec::new();
    for (ti, &t) in times.iter().enumerate() {
        let mut spec = fh.clone();
        let mut gspec = fh.clone();
        for i in 0..n {
            let k = TAU * wavenumber(i, n) as f64 / len;
            let damp = (-a_hat * k * k * t).exp();
            spec[i] *= damp;
            // derivative sampled at the half node x + h/2
            gspec[i] = if is_nyquist(i, n) {
                Complex64::new(0.0, 0.0)
            } else {
                fh[i] * damp * Complex64::new(0.0, k) * Complex64::new(0.0, 0.5 * k * h).exp()
            };
        }
        let u0 = fft.inverse_real(spec);
        let gu0 = fft.inverse_real(gspec);
        let u1 = &evo.fields[ti];
        let (mut e, mut eg) = (0.0f64, 0.0f64);
        let mut pts = Vec::with_capacity(n);
        for i in 0..n {
            let d = (u1[i] - u0[i]).abs();
            e = e.max(d);
            let xg = domain.x(i) + 0.5 * h;
            let g1 = (u1[(i + 1) % n] - u1[i]) / h;
            eg = eg.max((g1 - (1.0 + gchi.eval(&[xg / eps], t / (eps * eps))) * gu0[i]).abs());
            pts.push(PointError {
                scale: t,
                x: domain.x(i),
                t,
                error: d,
            });
        }
        let mut extras = BTreeMap::new();
        extras.insert("value_stat".into(), e * t.sqrt());
        extras.insert("grad_error".into(), eg);
        extras.insert("grad_stat".into(), eg * t / (2.0 + t).ln());
        extras.insert("grad_t".into(), eg * t);
        points.push(LadderPoint {
            row: RateRow {
                scale: t,
                sup_error: e,
                weighted_error: None,
                floor: None,
                floor_flag: false,
                extras,
            },
            points: pts,
            seconds: if ti == 0 { clock.elapsed().as_secs_f64() } else { 0.0 },
        });
    }
    let stat = |key: &str| -> Vec<f64> { points.iter().map(|p| p.row.extras[key]).collect() };
    let (vs, gs, gt) = (stat("value_stat"), stat("grad_stat"), stat("grad_t"));
    let mut out = Outcome::new("t", points);
    out.a_hat = Some(a_hat);
    out.fit_rows = false;
    out.checks.push(Check::new("value_stat_variation", variation(&vs), None, Some(0.20)));
    out.checks.push(Check::new("grad_stat_variation", variation(&gs), None, Some(0.35)));
    out.diagnostics.insert("grad_t_variation".into(), variation(&gt));
    let sups: Vec<f64> = out.points.iter().map(|p| p.row.sup_error).collect();
    if let Ok(f) = fit_rate(&sups, &times) {
        out.diagnostics.insert("sup_error_t_slope".into(), f.slope);
    }
    Ok(out)
}

fn tail(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Outcome> {
    let set = solve_cell(field, cfg)?;
    let a_hat = scalar_a_hat(&set)?;
    let hk = HeatKernelClosedForm::from_scalar(a_hat)?;
    let (y, s) = cfg.pole;
    let t = cfg.t;
    let w = cfg.half_width.unwrap_or(5.0);
    let points: Vec<LadderPoint> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let col = gamma_eps_column(field, eps, cfg.pole, &EvalSpec::new(vec![t], y - w, y + w), &cfg.policy)?;
            let mut sup = 0.0f64;
            let (mut zs, mut logs) = (Vec::new(), Vec::new());
            let mut points = Vec::with_capacity(col.n_x());
            for (p, &x) in col.x.iter().enumerate() {
                let v = col.values[p];
                let e = (v - hk.value(&[x], t, &[y], s)?).abs();
                sup = sup.max(e);
                points.push(PointError { scale: eps, x, t, error: e });
                if v >= 1e-8 {
                    zs.push((x - y).powi(2) / (t - s));
                    logs.push(v.ln());
                }
            }
            let mut extras = BTreeMap::new();
            if zs.len() >= 3 {
                let (slope, _, r2) = linear_fit(&zs, &logs);
                extras.insert("log_slope".into(), slope);
                extras.insert("r2".into(), r2);
            }
            extras.insert("fit_points".into(), zs.len() as f64);
            Ok(LadderPoint {
                row: RateRow {
                    scale: eps,
                    sup_error: sup,
                    weighted_error: None,
                    floor: None,
                    floor_flag: false,
                    extras,
                },
                points,
                seconds: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::new("eps", points);
    out.a_hat = Some(a_hat);
    out.fit_rows = false;
    let min_r2 = cfg.min_r2.unwrap_or(0.99);
    for p in &out.points {
        let ex = &p.row.extras;
        let tag = p.row.scale;
        out.checks.push(Check::new(
            format!("r2_eps_{tag}"),
            ex.get("r2").copied().unwrap_or(f64::NAN),
            Some(min_r2),
            None,
        ));
        out.checks.push(Check::new(
            format!("log_slope_eps_{tag}"),
            ex.get("log_slope").copied().unwrap_or(f64::NAN),
            None,
            Some(0.0),
        ));
    }
    out.diagnostics.insert("homogenized_log_slope".into(), -1.0 / (4.0 * a_hat));
    Ok(out)
}

fn adjoint(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Outcome> {
    let eps = cfg.eps[0];
    let x0 = cfg.pole.0;
    let t0 = cfg.t;
    let h = eps / cfg.policy.points_per_period as f64;
    let clock = Instant::now();
    let direct: Vec<f64> = cfg
        .spot_points
        .par_iter()
        .map(|&(y, s)| {
            let col = gamma_eps_column(field, eps, (y, s), &EvalSpec::new(vec![t0], x0 - h, x0 + h), &cfg.policy)?;
            Ok(col.values[col.nearest(x0)])
        })
        .collect::<Result<_>>()?;
    let lo = cfg.spot_points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = cfg.spot_points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let times: Vec<f64> = cfg.spot_points.iter().map(|p| p.1).collect();
    let adj = adjoint_column(field, eps, (x0, t0), &EvalSpec::new(times, lo - h, hi + h), &cfg.policy)?;
    let mut worst = 0.0f64;
    let mut points = Vec::new();
    for (ti, (&(y, s), &d)) in cfg.spot_points.iter().zip(&direct).enumerate() {
        let a = adj.row(ti)[adj.nearest(y)];
        let rel = (d - a).abs() / d.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        points.push(PointError {
            scale: eps,
            x: y,
            t: s,
            error: rel,
        });
    }
    let row = LadderPoint {
        row: RateRow {
            scale: eps,
            sup_error: worst,
            weighted_error: None,
            floor: None,
            floor_flag: false,
            extras: BTreeMap::new(),
        },
        points,
        seconds: clock.elapsed().as_secs_f64(),
    };
    let mut out = Outcome::new("eps", vec![row]);
    out.fit_rows = false;
    out.checks.push(Check::new("max_relative_discrepancy", worst, None, Some(1e-3)));
    Ok(out)
}

fn weak(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Outcome> {
    let eps = cfg.eps[0];
    let [xl, xh, tl, th] = cfg.region.unwrap_or([-1.0, 1.0, 0.75, 1.0]);
    let pole = cfg.pole;
    let set = solve_cell(field, cfg)?;
    let dual = solve_dual_correctors(&set.b_flux, cfg.scheme)?;
    let a_hat = scalar_a_hat(&set)?;
    let hk = HeatKernelClosedForm::from_scalar(a_hat)?;
    let kern = SmoothingKernel::new(eps)?;
    let tests = TestFunction::family(xl, xh, tl, th, eps);
    let g = set.grid();
    let mut points = Vec::new();
    for &f in &cfg.refinements {
        let clock = Instant::now();
        let pol = cfg.policy.refined(f);
        let cell = CellFactors::new(&set, &dual, table_upsample(&pol, g.n_space(), g.n_time()))?;
        let h = eps / pol.points_per_period as f64;
        let k = eps * eps / pol.steps_per_period as f64;
        let nx = ((xh - xl) / h).round() as usize + 1;
        let nt = ((th - tl) / k).round() as usize + 1;
        let dk = kern.discrete(h, k)?;
        let jets = HomogenizedJets::from_kernel(
            &hk,
            pole,
            xl - dk.px as f64 * h,
            h,
            nx + 2 * dk.px,
            tl - dk.pt as f64 * k,
            k,
            nt + 2 * dk.pt,
        )?;
        let times: Vec<f64> = (0..nt).map(|j| tl + j as f64 * k).collect();
        let col = gamma_eps_column(field, eps, pole, &EvalSpec::new(times, xl, xh), &pol)?;
        let u = SampledField::new(col.x[0], h, col.n_x(), tl, k, nt, col.values)?;
        let ex = build_expansion(&u, &jets, &cell, &kern)?;
        let r = weak_residual(&ex.w_eps, &ex.f_eps, field, eps, &tests)?;
        let t = &ex.forcing.terms;
        let printed = SampledField {
            values: (0..ex.f_eps.values.len())
                .map(|i| t[0].values[i] + t[1].values[i] + t[2].values[i] + t[3].values[i] - t[4].values[i] - t[5].values[i])
                .collect(),
            ..ex.f_eps.clone()
        };
        let rp = weak_residual(&ex.w_eps, &printed, field, eps, &tests)?;
        let mut extras = BTreeMap::new();
        extras.insert("printed_signs_residual".into(), rp.max);
        extras.insert("w_sup".into(), ex.w_eps.max_abs());
        extras.insert("f_sup".into(), ex.f_eps.max_abs());
        let pts = tests
            .iter()
            .zip(&r.per_test)
            .map(|(v, &e)| PointError {
                scale: h,
                x: v.cx,
                t: v.ct,
                error: e,
            })
            .collect();
        points.push(LadderPoint {
            row: RateRow {
                scale: h,
                sup_error: r.max,
                weighted_error: None,
                floor: None,
                floor_flag: false,
                extras,
            },
            points: pts,
            seconds: clock.elapsed().as_secs_f64(),
        });
    }
    let mut out = Outcome::new("h", points);
    out.a_hat = Some(a_hat);
    out.fit_rows = false;
    if let (Some(first), Some(last)) = (out.points.first(), out.points.last()) {
        if out.points.len() >= 2 {
            let ratio = first.row.sup_error / last.row.sup_error;
            out.checks.push(Check::new("refinement_ratio", ratio, Some(3.0), None));
            out.diagnostics.insert(
                "printed_signs_ratio".into(),
                first.row.extras["printed_signs_residual"] / last.row.extras["printed_signs_residual"],
            );
        }
    }
    Ok(out)
}

fn smoothing(cfg: &ExperimentConfig) -> Result<Outcome> {
    let [xl, xh, tl, th] = cfg.region.unwrap_or([0.0, 1.0, 0.0, 0.5]);
    // f = sin 2πx cos 2πt
    let fx = |x: f64, t: f64| TAU * (TAU * x).cos() * (TAU * t).cos();
    let fxx = |x: f64, t: f64| -TAU * TAU * (TAU * x).sin() * (TAU * t).cos();
    let ft = |x: f64, t: f64| -TAU * (TAU * x).sin() * (TAU * t).sin();
    let ratio = |kernel: &SmoothingKernel, eps: f64| -> Result<(f64, f64, f64)> {
        let h = eps / 16.0;
        let k = eps * eps / 16.0;
        let nx = ((xh - xl) / h).round() as usize + 1;
        let nt = ((th - tl) / k).round() as usize + 1;
        let dk = kernel.discrete(h, k)?;
        let padded = SampledField::from_fn(
            xl - dk.px as f64 * h,
            h,
            nx + 2 * dk.px,
            tl - dk.pt as f64 * k,
            k,
            nt + 2 * dk.pt,
            fx,
        );
        let sm = smooth(kernel, &padded)?;
        let exact = SampledField::from_fn(xl, h, nx, tl, k, nt, fx);
        let defect = sm.sub(&exact)?.l2();
        let norm = SampledField::from_fn(xl, h, nx, tl, k, nt, fxx).l2() + SampledField::from_fn(xl, h, nx, tl, k, nt, ft).l2();
        Ok((defect / norm, defect, norm))
    };
    let points: Vec<LadderPoint> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let (r, defect, norm) = ratio(&SmoothingKernel::tilted(eps, cfg.tilt)?, eps)?;
            let (even, _, _) = ratio(&SmoothingKernel::new(eps)?, eps)?;
            let mut extras = BTreeMap::new();
            extras.insert("defect_l2".into(), defect);
            extras.insert("norm_l2".into(), norm);
            extras.insert("even_kernel_ratio".into(), even);
            Ok(LadderPoint {
                row: RateRow {
                    scale: eps,
                    sup_error: r,
                    weighted_error: None,
                    floor: None,
                    floor_flag: false,
                    extras,
                },
                points: Vec::new(),
                seconds: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;
    let constant = points.iter().map(|p| p.row.sup_error / p.row.scale).fold(0.0, f64::max);
    let even: Vec<f64> = points.iter().map(|p| p.row.extras["even_kernel_ratio"]).collect();
    let scales: Vec<f64> = points.iter().map(|p| p.row.scale).collect();
    let mut out = Outcome::new("eps", points);
    out.checks.push(Check::new("constant", constant, None, Some(5.0)));
    if let Ok(f) = fit_rate(&even, &scales) {
        out.diagnostics.insert("even_kernel_slope".into(), f.slope);
    }
    out.diagnostics.insert("tilt".into(), cfg.tilt);
    Ok(out)
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub points_csv: PathBuf,
    pub json: PathBuf,
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

/// Write `<id>.csv` (one row per ladder point), `<id>_points.csv` and
/// `<id>.json` into `dir`. The CSV files depend only on the measured values,
/// so rerunning a configuration reproduces them byte for byte.
pub fn write_report(report: &RateReport, dir: &Path) -> Result<ReportFiles> {
    if report.rows.is_empty() {
        return Err(HomogError::InvalidParameter("report has an empty ladder".into()));
    }
    std::fs::create_dir_all(dir)?;
    let id = report.experiment.name();
    let files = ReportFiles {
        csv: dir.join(format!("{id}.csv")),
        points_csv: dir.join(format!("{id}_points.csv")),
        json: dir.join(format!("{id}.json")),
    };
    let keys: Vec<&String> = {
        let mut k: Vec<&String> = report.rows.iter().flat_map(|r| r.extras.keys()).collect();
        k.sort();
        k.dedup();
        k
    };
    let mut csv = String::new();
    csv.push_str(&format!("# homog {} experiment {}\n", report.version, id));
    csv.push_str(&format!("{},sup_error,weighted_error,floor_flag", report.scale_name));
    for k in &keys {
        csv.push(',');
        csv.push_str(k);
    }
    csv.push('\n');
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{}",
            num(r.scale),
            num(r.sup_error),
            r.weighted_error.map(num).unwrap_or_default(),
            r.floor_flag
        ));
        for k in &keys {
            csv.push(',');
            if let Some(v) = r.extras.get(*k) {
                csv.push_str(&num(*v));
            }
        }
        csv.push('\n');
    }
    std::fs::write(&files.csv, csv)?;

    let mut pts = std::io::BufWriter::new(std::fs::File::create(&files.points_csv)?);
    writeln!(pts, "{},x,t,error", report.scale_name)?;
    for p in &report.points {
        writeln!(pts, "{},{},{},{}", num(p.scale), num(p.x), num(p.t), num(p.error))?;
    }
    pts.flush()?;

    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(&files.json, json)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_laws() {
        let scales = [0.25, 0.125, 0.0625, 0.03125];
        let errs: Vec<f64> = scales.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
        let f = fit_rate(&errs, &scales).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_short_or_non_positive_input() {
        assert!(matches!(
            fit_rate(&[1.0, 0.5], &[1.0, 0.5]),
            Err(HomogError::InsufficientPoints { needed: 3, got: 2 })
        ));
        assert!(matches!(
            fit_rate(&[1.0, 0.0, 0.2], &[1.0, 0.5, 0.25]),
            Err(HomogError::NonPositive { index: 1, .. })
        ));
        assert!(matches!(
            fit_rate(&[1.0, 0.5, 0.2], &[1.0, -0.5, 0.25]),
            Err(HomogError::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn experiment_ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
            let j = serde_json::to_string(&id).unwrap();
            assert_eq!(j, format!("\"{}\"", id.name()));
        }
        assert!("thm4".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn config_defaults_depend_on_the_experiment() {
        let c = ExperimentConfig::new(ExperimentId::Thm3).resolved().unwrap();
        assert_eq!(c.eps, vec![0.25, 0.125, 0.0625]);
        assert_eq!(c.window, Some((0.75, 1.35)));
        let c: ExperimentConfig = serde_json::from_str(r#"{"experiment": "cor"}"#).unwrap();
        let c = c.resolved().unwrap();
        assert_eq!(c.t_ladder, vec![1.0, 4.0, 16.0]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experimnt": "cor"}"#).is_err());
        let bad = ExperimentConfig {
            t: 0.0,
            ..ExperimentConfig::new(ExperimentId::Thm1)
        };
        assert!(matches!(bad.resolved(), Err(HomogError::TimeOrdering { .. })));
    }

    #[test]
    fn cylinder_membership() {
        let q = ParabolicCylinder::new(vec![0.0], 1.0, 0.5).unwrap();
        assert!(q.contains(&[0.1], 0.9));
        assert!(!q.contains(&[0.1], 0.7));
        assert!(!q.contains(&[0.6], 0.9));
        assert_eq!(q.time_interval(), (0.75, 1.0));
        assert!(ParabolicCylinder::new(vec![0.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn discrete_floor_tracks_the_heat_kernel() {
        let pol = ResolutionPolicy::default();
        let (dom, u) = homogenized_discrete_column(1.0, 0.25, (0.0, 0.0), 1.0, &pol, SourceKind::Dirac).unwrap();
        let hk = HeatKernelClosedForm::from_scalar(1.0).unwrap();
        let err = window_indices(&dom, -4.0, 4.0)
            .into_iter()
            .map(|i| (u[i] - hk.value(&[dom.x(i)], 1.0, &[0.0], 0.0).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn empty_report_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        let report = RateReport {
            experiment: ExperimentId::Thm1,
            coefficient: CoefficientFamily::Constant {
                d: 1,
                a: 1.0,
                matrix: None,
            },
            a_hat: None,
            scale_name: "eps".into(),
            fit_quantity: "sup_error".into(),
            rows: Vec::new(),
            points: Vec::new(),
            fit: None,
            fit_note: None,
            checks: Vec::new(),
            pass: false,
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
            oracle_ids: Vec::new(),
            config: ExperimentConfig::default(),
            row_seconds: Vec::new(),
            runtime_seconds: 0.0,
            version: VERSION.into(),
        };
        assert!(write_report(&report, &target).is_err());
        assert!(!target.exists());
    }
}
