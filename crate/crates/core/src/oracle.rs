//! Brute-force references used to certify numbers elsewhere in the crate.
//!
//! Nothing here calls the production cell solver or the production time
//! stepper. The kernel reference has its own Crank–Nicolson loop and its own
//! cyclic tridiagonal solve, so agreement between the two paths is evidence
//! rather than tautology.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::{solve_corrector, CellSolveOptions};
use crate::coefficients::{CoefficientFamily, CoefficientField};
use crate::error::{HomogError, Result};
use crate::grid::{GridFunction, SpaceTimeTorusGrid};
use crate::kernels::{gamma_eps_column, EvalSpec, HeatKernelClosedForm, KernelSample, ResolutionPolicy, SourceKind};

const TAU: f64 = 2.0 * PI;

/// One certified quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub id: String,
    pub values: BTreeMap<String, f64>,
    pub method: String,
    pub resolution: String,
    /// Estimated absolute accuracy of the headline value.
    pub accuracy: f64,
}

impl OracleResult {
    pub fn value(&self, key: &str) -> Result<f64> {
        self.values.get(key).copied().ok_or_else(|| HomogError::Unknown {
            kind: "oracle value",
            name: format!("{}/{key}", self.id),
        })
    }
}

/// `(⨍ 1/a)^{-1}` by the trapezoid rule on `n` points, which is spectrally
/// accurate for smooth periodic `a`.
pub fn harmonic_mean_fn<F: Fn(f64) -> f64>(a: F, n: usize) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..n {
        let v = a(i as f64 / n as f64);
        if !(v > 0.0) {
            return Err(HomogError::EllipticityViolated(format!("a({}) = {v}", i as f64 / n as f64)));
        }
        acc += 1.0 / v;
    }
    Ok(n as f64 / acc)
}

/// Harmonic mean of a time-independent scalar one-dimensional field.
pub fn harmonic_mean_1d(field: &CoefficientField) -> Result<f64> {
    if field.d() != 1 || field.m() != 1 {
        return Err(HomogError::Unsupported("harmonic mean needs d = 1, m = 1".into()));
    }
    if !field.is_time_independent() {
        return Err(HomogError::InvalidParameter(
            "harmonic mean is only the homogenized coefficient for time-independent fields".into(),
        ));
    }
    harmonic_mean_fn(|y| field.evaluate_scalar(y, 0.0), 4096)
}

/// Fourier–Galerkin corrector on modes `|k| ≤ kx`, `|m| ≤ kt`.
#[derive(Debug, Clone)]
pub struct ReferenceCell {
    pub a_hat: f64,
    pub kx: usize,
    pub kt: usize,
    /// `χ̂(k, m)` at `[(m + kt) * (2kx + 1) + (k + kx)]`.
    pub coeffs: Vec<Complex64>,
    /// Largest modulus among the outermost retained modes.
    pub tail: f64,
}

impl ReferenceCell {
    fn coeff(&self, k: i64, m: i64) -> Complex64 {
        let w = 2 * self.kx as i64 + 1;
        self.coeffs[((m + self.kt as i64) * w + k + self.kx as i64) as usize]
    }

    /// `(χ, ∂_y χ)` at `(y, s)`.
    pub fn eval(&self, y: f64, s: f64) -> (f64, f64) {
        let (kx, kt) = (self.kx as i64, self.kt as i64);
        let mut v = Complex64::new(0.0, 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        for m in -kt..=kt {
            for k in -kx..=kx {
                let c = self.coeff(k, m) * Complex64::from_polar(1.0, TAU * (k as f64 * y + m as f64 * s));
                v += c;
                dv += c * Complex64::new(0.0, TAU * k as f64);
            }
        }
        (v.re, dv.re)
    }

    /// `χ` sampled on the nodes of `grid`.
    pub fn sample(&self, grid: SpaceTimeTorusGrid) -> Result<GridFunction> {
        GridFunction::scalar_from_fn(grid, |y, s| self.eval(y[0], s).0)
    }
}

/// Solve `∂_s χ − ∂_y(a ∂_y χ) = ∂_y a` as one dense complex system in the
/// Fourier basis, with periodicity in both axes built in.
pub fn reference_cell_solve(field: &CoefficientField, kx: usize, kt: usize) -> Result<ReferenceCell> {
    if field.d() != 1 || field.m() != 1 {
        return Err(HomogError::Unsupported("reference cell solve is scalar one-dimensional".into()));
    }
    let w = 2 * kx + 1;
    let unknowns = w * (2 * kt + 1);
    const MAX_UNKNOWNS: usize = 4096;
    if unknowns > MAX_UNKNOWNS {
        return Err(HomogError::ResolutionBudgetExceeded {
            required_nodes: unknowns,
            required_steps: 1,
            max_nodes: MAX_UNKNOWNS,
            max_node_steps: MAX_UNKNOWNS,
        });
    }
    // coefficients of a on |p| ≤ 2kx, |q| ≤ 2kt by a direct sum; exact for
    // trigonometric polynomials of that degree
    let (px, pt) = (2 * kx as i64, 2 * kt as i64);
    let (nx, nt) = (4 * kx + 4, 4 * kt + 4);
    let samples: Vec<f64> = (0..nt * nx)
        .map(|i| field.evaluate_scalar((i % nx) as f64 / nx as f64, (i / nx) as f64 / nt as f64))
        .collect();
    let aw = (2 * px + 1) as usize;
    let mut a_hat_modes = vec![Complex64::new(0.0, 0.0); aw * (2 * pt + 1) as usize];
    for q in -pt..=pt {
        for p in -px..=px {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nt {
                for i in 0..nx {
                    let phase = -TAU * (p as f64 * i as f64 / nx as f64 + q as f64 * j as f64 / nt as f64);
                    acc += samples[j * nx + i] * Complex64::from_polar(1.0, phase);
                }
            }
            a_hat_modes[((q + pt) as usize) * aw + (p + px) as usize] = acc / (nx * nt) as f64;
        }
    }
    let amode = |p: i64, q: i64| a_hat_modes[((q + pt) as usize) * aw + (p + px) as usize];

    // unknown index for (k, m), skipping the mean mode
    let modes: Vec<(i64, i64)> = (-(kt as i64)..=kt as i64)
        .flat_map(|m| (-(kx as i64)..=kx as i64).map(move |k| (k, m)))
        .filter(|&(k, m)| (k, m) != (0, 0))
        .collect();
    let n = modes.len();
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    let mut rhs = DVector::<Complex64>::zeros(n);
    for (r, &(k, m)) in modes.iter().enumerate() {
        rhs[r] = Complex64::new(0.0, TAU * k as f64) * amode(k, m);
        for (c, &(k2, m2)) in modes.iter().enumerate() {
            let mut v = amode(k - k2, m - m2) * (TAU * k as f64) * (TAU * k2 as f64);
            if r == c {
                v += Complex64::new(0.0, TAU * m as f64);
            }
            mat[(r, c)] = v;
        }
    }
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| HomogError::LinearSolverFailed { iterations: 0, residual: f64::INFINITY })?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); unknowns];
    for (r, &(k, m)) in modes.iter().enumerate() {
        coeffs[((m + kt as i64) as usize) * w + (k + kx as i64) as usize] = sol[r];
    }
    let mut a_hat = amode(0, 0);
    let mut tail: f64 = 0.0;
    for (r, &(k, m)) in modes.iter().enumerate() {
        a_hat += amode(-k, -m) * Complex64::new(0.0, TAU * k as f64) * sol[r];
        if k.unsigned_abs() as usize == kx || m.unsigned_abs() as usize == kt {
            tail = tail.max(sol[r].norm());
        }
    }
    Ok(ReferenceCell {
        a_hat: a_hat.re,
        kx,
        kt,
        coeffs,
        tail,
    })
}

/// Sherman–Morrison on top of a plain Thomas sweep.
struct PeriodicTridiagonal {
    c: Vec<f64>,
    z: Vec<f64>,
    rhs_u: Vec<f64>,
}

impl PeriodicTridiagonal {
    fn new(n: usize) -> Self {
        Self {
            c: vec![0.0; n],
            z: vec![0.0; n],
            rhs_u: vec![0.0; n],
        }
    }

    fn thomas(a: &[f64], b: &[f64], c: &[f64], x: &mut [f64], cp: &mut [f64]) {
        let n = x.len();
        cp[0] = c[0] / b[0];
        x[0] /= b[0];
        for i in 1..n {
            let m = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / m;
            let v = (x[i] - a[i] * x[i - 1]) / m;
            x[i] = if v.abs() < 1e-280 { 0.0 } else { v };
        }
        for i in (0..n - 1).rev() {
            let v = x[i] - cp[i] * x[i + 1];
            x[i] = if v.abs() < 1e-280 { 0.0 } else { v };
        }
    }

    /// Solve `a_i x_{i−1} + b_i x_i + c_i x_{i+1} = r_i` with wrap-around.
    fn solve(&mut self, a: &[f64], b: &[f64], c: &[f64], r: &mut [f64]) {
        let n = r.len();
        let gamma = -b[0];
        let mut bb = b.to_vec();
        bb[0] -= gamma;
        bb[n - 1] -= c[n - 1] * a[0] / gamma;
        let mut cp = std::mem::take(&mut self.c);
        Self::thomas(a, &bb, c, r, &mut cp);
        self.rhs_u.iter_mut().for_each(|v| *v = 0.0);
        self.rhs_u[0] = gamma;
        self.rhs_u[n - 1] = c[n - 1];
        self.z.copy_from_slice(&self.rhs_u);
        Self::thomas(a, &bb, c, &mut self.z, &mut cp);
        let fact = (r[0] + a[0] * r[n - 1] / gamma) / (1.0 + self.z[0] + a[0] * self.z[n - 1] / gamma);
        for i in 0..n {
            r[i] -= fact * self.z[i];
        }
        self.c = cp;
    }
}

/// Settings for one reference run.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceRun {
    pub points_per_period: usize,
    pub steps_per_period: usize,
    pub mollifier_factor: f64,
    pub startup_steps: usize,
    pub half_width: f64,
}

impl ReferenceRun {
    pub fn from_policy(policy: &ResolutionPolicy, span: f64, factor: usize) -> Self {
        Self {
            points_per_period: policy.points_per_period * factor,
            steps_per_period: policy.steps_per_period * factor,
            mollifier_factor: policy.mollifier_factor * factor as f64,
            startup_steps: policy.startup_steps,
            half_width: policy.half_width_for(span),
        }
    }
}

/// `Γ_ε(·, t; y, s)` from the reference stepper, on the nodes of the run's
/// own grid that fall in `[x_lo, x_hi]` and sit on every `stride`-th node.
/// `t − s` must be a whole number of steps.
#[allow(clippy::too_many_arguments)]
pub fn reference_column(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    t: f64,
    x_lo: f64,
    x_hi: f64,
    stride: usize,
    run: &ReferenceRun,
) -> Result<KernelSample> {
    if field.d() != 1 || field.m() != 1 {
        return Err(HomogError::Unsupported("reference kernel is scalar one-dimensional".into()));
    }
    let (y, s) = pole;
    if t <= s {
        return Err(HomogError::TimeOrdering { t, s });
    }
    let pps = run.points_per_period;
    let spp = run.steps_per_period;
    let h = eps / pps as f64;
    let k = eps * eps / spp as f64;
    let steps_f = (t - s) / k;
    let cn_steps = steps_f.round() as usize;
    if (steps_f - cn_steps as f64).abs() > 1e-9 || cn_steps * 2 < run.startup_steps {
        return Err(HomogError::InvalidParameter(format!(
            "reference run needs t − s to be a whole number of steps k = {k}"
        )));
    }
    let periods = (run.half_width / eps).ceil() as usize * 2;
    let n = periods * pps;
    let origin = y - (periods / 2) as f64 * eps;
    let x = |i: usize| origin + i as f64 * h;

    // coefficient at half nodes on one spatial period and one time period,
    // time sampled every half step
    let half_slots = 2 * spp;
    let s0 = s / (eps * eps);
    let mut table = vec![0.0; half_slots * pps];
    for j in 0..half_slots {
        let sc = s0 + j as f64 / half_slots as f64;
        for i in 0..pps {
            table[j * pps + i] = field.evaluate_scalar((x(i) + 0.5 * h) / eps, sc);
        }
    }
    let coef = |half_step: usize, out: &mut [f64]| {
        let row = &table[(half_step % half_slots) * pps..(half_step % half_slots + 1) * pps];
        for (i, o) in out.iter_mut().enumerate() {
            *o = row[i % pps];
        }
    };

    let width = run.mollifier_factor * h;
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            let r = (x(i) - y) / width;
            if r.abs() < 1.0 {
                (1.0 - r * r).powi(4)
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = u.iter().sum::<f64>() * h;
    u.iter_mut().for_each(|v| *v /= mass);

    let mut a_now = vec![0.0; n];
    let mut a_next = vec![0.0; n];
    let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut rhs = vec![0.0; n];
    let mut solver = PeriodicTridiagonal::new(n);
    let mut half_step = 0usize;
    coef(0, &mut a_now);
    // backward Euler half steps, then Crank–Nicolson to the end
    let be = run.startup_steps;
    let mut plan: Vec<(usize, f64)> = vec![(1, 1.0); be];
    if be % 2 == 1 {
        plan.push((1, 0.5));
    }
    plan.extend(std::iter::repeat_n((2, 0.5), cn_steps - be.div_ceil(2)));
    for (halves, theta) in plan {
        let dt = halves as f64 * 0.5 * k;
        half_step += halves;
        coef(half_step, &mut a_next);
        let ex = (1.0 - theta) * dt / (h * h);
        let im = theta * dt / (h * h);
        for i in 0..n {
            let ip = (i + 1) % n;
            let il = (i + n - 1) % n;
            rhs[i] = u[i] + ex * (a_now[i] * (u[ip] - u[i]) - a_now[il] * (u[i] - u[il]));
            lo[i] = -im * a_next[il];
            up[i] = -im * a_next[i];
            di[i] = 1.0 + im * (a_next[i] + a_next[il]);
        }
        solver.solve(&lo, &di, &up, &mut rhs);
        std::mem::swap(&mut u, &mut rhs);
        std::mem::swap(&mut a_now, &mut a_next);
    }

    let idx: Vec<usize> = (0..n)
        .filter(|&i| x(i) >= x_lo - 1e-12 && x(i) <= x_hi + 1e-12)
        .filter(|&i| i % stride.max(1) == 0)
        .collect();
    Ok(KernelSample {
        epsilon: eps,
        pole,
        adjoint: false,
        source: SourceKind::Dirac,
        times: vec![t],
        x: idx.iter().map(|&i| x(i)).collect(),
        values: idx.iter().map(|&i| u[i]).collect(),
        grad: None,
        grad_offset: 0.5 * h,
        mass: vec![u.iter().sum::<f64>() * h],
        half_width: n as f64 * h / 2.0,
        h,
        k,
        mollifier_width: width,
    })
}

/// Reference columns at several refinements, all sampled on the coarse
/// lattice of the production policy.
#[derive(Debug, Clone)]
pub struct ReferenceKernel {
    pub factors: Vec<usize>,
    pub levels: Vec<KernelSample>,
    /// Richardson extrapolation of the two finest levels (second order).
    pub extrapolated: Vec<f64>,
    /// `sup |finest − extrapolated|`: error estimate for the finest level.
    pub error_estimate: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn reference_kernel(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    t: f64,
    x_lo: f64,
    x_hi: f64,
    policy: &ResolutionPolicy,
    factors: &[usize],
) -> Result<ReferenceKernel> {
    if factors.is_empty() {
        return Err(HomogError::InvalidParameter("no refinement factors".into()));
    }
    let mut levels = Vec::with_capacity(factors.len());
    for &f in factors {
        // the mollifier keeps its physical width under refinement
        let run = ReferenceRun::from_policy(policy, t - pole.1, f);
        levels.push(reference_column(field, eps, pole, t, x_lo, x_hi, f, &run)?);
    }
    let finest = levels.last().unwrap();
    let (extrapolated, error_estimate) = if levels.len() >= 2 {
        let prev = &levels[levels.len() - 2];
        let ratio = (factors[factors.len() - 1] as f64 / factors[factors.len() - 2] as f64).powi(2);
        let ex: Vec<f64> = finest
            .values
            .iter()
            .zip(&prev.values)
            .map(|(f, c)| f + (f - c) / (ratio - 1.0))
            .collect();
        let err = finest.values.iter().zip(&ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (ex, err)
    } else {
        (finest.values.clone(), f64::NAN)
    };
    Ok(ReferenceKernel {
        factors: factors.to_vec(),
        levels,
        extrapolated,
        error_estimate,
    })
}

/// Sup of `|a(p) − a(q)| / (|y_p − y_q| + |s_p − s_q|^{1/2})^λ` over all pairs of an
/// `n × n` lattice with periodic distances (scalar one-dimensional fields).
pub fn holder_seminorm_dense(field: &CoefficientField, lambda: f64, n: usize) -> Result<f64> {
    if field.d() != 1 || field.m() != 1 {
        return Err(HomogError::Unsupported("dense Hölder oracle is scalar one-dimensional".into()));
    }
    let vals: Vec<f64> = (0..n * n)
        .map(|i| field.evaluate_scalar((i % n) as f64 / n as f64, (i / n) as f64 / n as f64))
        .collect();
    let wrap = |d: usize| d.min(n - d) as f64 / n as f64;
    let mut best: f64 = 0.0;
    for dj in 0..n {
        for di in 0..n {
            if di == 0 && dj == 0 {
                continue;
            }
            let dist = (wrap(di) + wrap(dj).sqrt()).powf(lambda);
            for j in 0..n {
                for i in 0..n {
                    let a = vals[j * n + i];
                    let b = vals[((j + dj) % n) * n + (i + di) % n];
                    best = best.max((a - b).abs() / dist);
                }
            }
        }
    }
    Ok(best)
}

/// Registered oracle ids with one-line descriptions.
pub const ORACLES: &[(&str, &str)] = &[
    ("harmonic-mean-b0.5", "harmonic mean of 1 + 0.5 sin 2πy (closed form √0.75)"),
    ("harmonic-mean-b0.9", "harmonic mean of 1 + 0.9 sin 2πy (closed form √0.19)"),
    ("cell-separable-b0.5", "dense Fourier–Galerkin cell solve, separable_space b = 0.5"),
    ("cell-space-time-b0.5", "dense Fourier–Galerkin cell solve, space_time b = 0.5"),
    ("gamma0-separable-b0.5", "Γ₀(0, 1; 0, 0) with the certified separable â"),
    ("kernel-constant-eps0.125", "reference stepper against the heat kernel, a ≡ 1"),
    ("kernel-gap-eps0.125", "production vs extrapolated reference Γ_ε, space_time b = 0.5"),
    ("kernel-mollifier-eps0.125", "reference Γ_ε under a halved mollifier width"),
    ("holder-space-time-b0.5", "dense all-pairs Hölder seminorm, λ = 1/2"),
];

fn builtin(family: CoefficientFamily) -> Result<CoefficientField> {
    CoefficientField::make_builtin(family)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn result(id: &str, values: &[(&str, f64)], method: &str, resolution: String, accuracy: f64) -> OracleResult {
    OracleResult {
        id: id.into(),
        values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        method: method.into(),
        resolution,
        accuracy,
    }
}

/// Run a registered oracle.
pub fn run(id: &str) -> Result<OracleResult> {
    let separable = || builtin(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 });
    let space_time = || builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
    let policy = ResolutionPolicy::default();
    let eps = 0.125;
    match id {
        "harmonic-mean-b0.5" | "harmonic-mean-b0.9" => {
            let b = if id.ends_with("0.5") { 0.5 } else { 0.9 };
            let v = harmonic_mean_1d(&builtin(CoefficientFamily::SeparableSpace { b, d: 1 })?)?;
            Ok(result(
                id,
                &[("a_hat", v), ("closed_form", (1.0 - b * b as f64).sqrt())],
                "trapezoid rule for the mean of 1/a, inverted",
                "4096 points".into(),
                1e-13,
            ))
        }
        "cell-separable-b0.5" | "cell-space-time-b0.5" => {
            let field = if id.contains("separable") { separable()? } else { space_time()? };
            let r = reference_cell_solve(&field, 16, 16)?;
            Ok(result(
                id,
                &[("a_hat", r.a_hat), ("mode_tail", r.tail)],
                "dense complex LU on the Fourier–Galerkin space-time system",
                "|k| ≤ 16, |m| ≤ 16".into(),
                1e-12,
            ))
        }
        "gamma0-separable-b0.5" => {
            let a_hat = harmonic_mean_1d(&separable()?)?;
            let v = HeatKernelClosedForm::from_scalar(a_hat)?.value(&[0.0], 1.0, &[0.0], 0.0)?;
            Ok(result(
                id,
                &[("a_hat", a_hat), ("gamma0_at_origin", v)],
                "closed-form Gaussian with the quadrature â",
                "exact".into(),
                1e-13,
            ))
        }
        "kernel-constant-eps0.125" => {
            let field = builtin(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None })?;
            let r = reference_kernel(&field, eps, (0.0, 0.0), 1.0, -4.0, 4.0, &policy, &[1])?;
            let hk = HeatKernelClosedForm::from_scalar(1.0)?;
            let s = &r.levels[0];
            let exact: Vec<f64> = s.x.iter().map(|&x| hk.value(&[x], 1.0, &[0.0], 0.0)).collect::<Result<_>>()?;
            let gap = sup_diff(&s.values, &exact);
            Ok(result(
                id,
                &[("sup_error", gap), ("mass", s.mass[0])],
                "reference stepper with a ≡ 1 against the closed-form heat kernel",
                format!("h = ε/{}, k = ε²/{}", policy.points_per_period, policy.steps_per_period),
                1e-12,
            ))
        }
        "kernel-gap-eps0.125" => {
            let field = space_time()?;
            let grid = SpaceTimeTorusGrid::new(1, 64, 64)?;
            let set = solve_corrector(&field, grid, &CellSolveOptions::default().with_tol(1e-12))?;
            let a_hat = set.a_hat.scalar().unwrap_or(f64::NAN);
            let prod = gamma_eps_column(&field, eps, (0.0, 0.0), &EvalSpec::new(vec![1.0], -4.0, 4.0), &policy)?;
            let r = reference_kernel(&field, eps, (0.0, 0.0), 1.0, -4.0, 4.0, &policy, &[2, 4])?;
            let gap = sup_diff(prod.row(0), &r.extrapolated);
            let hk = HeatKernelClosedForm::from_scalar(a_hat)?;
            let exact: Vec<f64> = prod.x.iter().map(|&x| hk.value(&[x], 1.0, &[0.0], 0.0)).collect::<Result<_>>()?;
            let err = sup_diff(prod.row(0), &exact);
            Ok(result(
                id,
                &[
                    ("gap", gap),
                    ("thm1_error", err),
                    ("relative_gap", gap / err),
                    ("richardson_estimate", r.error_estimate),
                ],
                "production column against the Richardson extrapolation of 2× and 4× reference runs",
                "reference at h = ε/64, ε/128".into(),
                r.error_estimate,
            ))
        }
        "kernel-mollifier-eps0.125" => {
            let field = space_time()?;
            let base = ReferenceRun::from_policy(&policy, 1.0, 1);
            let half = ReferenceRun {
                mollifier_factor: base.mollifier_factor / 2.0,
                ..base
            };
            let a = reference_column(&field, eps, (0.0, 0.0), 1.0, -4.0, 4.0, 1, &base)?;
            let b = reference_column(&field, eps, (0.0, 0.0), 1.0, -4.0, 4.0, 1, &half)?;
            Ok(result(
                id,
                &[("sup_change", sup_diff(&a.values, &b.values))],
                "reference stepper with mollifier width 2h and h",
                format!("h = ε/{}", policy.points_per_period),
                1e-12,
            ))
        }
        "holder-space-time-b0.5" => {
            let v = holder_seminorm_dense(&space_time()?, 0.5, 64)?;
            Ok(result(
                id,
                &[("tau", v)],
                "maximum over all lattice pairs with periodic distances",
                "64 × 64 lattice".into(),
                0.0,
            ))
        }
        other => Err(HomogError::Unknown {
            kind: "oracle",
            name: other.into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_mean_examples() {
        assert!((harmonic_mean_fn(|_| 2.5, 16).unwrap() - 2.5).abs() < 1e-15);
        let f = builtin(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 }).unwrap();
        assert!((harmonic_mean_1d(&f).unwrap() - 0.75f64.sqrt()).abs() < 1e-13);
        let f = builtin(CoefficientFamily::SeparableSpace { b: 0.9, d: 1 }).unwrap();
        assert!((harmonic_mean_1d(&f).unwrap() - 0.19f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_mean_rejects_time_dependence() {
        let f = builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }).unwrap();
        assert!(matches!(harmonic_mean_1d(&f), Err(HomogError::InvalidParameter(_))));
    }

    #[test]
    fn reference_cell_on_constant_and_separable_fields() {
        let c = builtin(CoefficientFamily::Constant { d: 1, a: 1.7, matrix: None }).unwrap();
        let r = reference_cell_solve(&c, 4, 4).unwrap();
        assert!((r.a_hat - 1.7).abs() < 1e-14);
        assert!(r.coeffs.iter().all(|c| c.norm() < 1e-15));
        let f = builtin(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 }).unwrap();
        let r = reference_cell_solve(&f, 16, 2).unwrap();
        assert!((r.a_hat - 0.75f64.sqrt()).abs() < 1e-8);
        // ∂_y χ = â/a − 1 pointwise
        for y in [0.1, 0.37, 0.8] {
            let (_, dchi) = r.eval(y, 0.3);
            assert!((dchi - (r.a_hat / f.evaluate_scalar(y, 0.0) - 1.0)).abs() < 1e-7);
        }
    }

    #[test]
    fn reference_cell_budget() {
        let c = builtin(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None }).unwrap();
        assert!(matches!(
            reference_cell_solve(&c, 40, 40),
            Err(HomogError::ResolutionBudgetExceeded { .. })
        ));
    }

    #[test]
    fn periodic_tridiagonal_matches_dense_solve() {
        let n = 7;
        let a: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let r: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = b[i];
            dense[(i, (i + n - 1) % n)] = a[i];
            dense[(i, (i + 1) % n)] = c[i];
        }
        let want = dense.lu().solve(&DVector::from_vec(r.clone())).unwrap();
        let mut got = r;
        PeriodicTridiagonal::new(n).solve(&a, &b, &c, &mut got);
        for i in 0..n {
            assert!((got[i] - want[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn reference_column_conserves_mass_and_rejects_misaligned_times() {
        let f = builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }).unwrap();
        let policy = ResolutionPolicy::default();
        let run = ReferenceRun::from_policy(&policy, 0.25, 1);
        let s = reference_column(&f, 0.25, (0.0, 0.0), 0.25, -1.0, 1.0, 1, &run).unwrap();
        assert!((s.mass[0] - 1.0).abs() < 1e-12);
        let bad = reference_column(&f, 0.25, (0.0, 0.0), 0.25 + 1e-4, -1.0, 1.0, 1, &run);
        assert!(matches!(bad, Err(HomogError::InvalidParameter(_))));
    }

    #[test]
    fn unknown_oracle_id() {
        assert!(matches!(run("nope"), Err(HomogError::Unknown { .. })));
    }
}
