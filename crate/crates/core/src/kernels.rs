//! Fundamental solutions: the homogenized kernel `Γ_0` in closed form (or by
//! Fourier synthesis for systems) and `Γ_ε` by Crank–Nicolson time stepping of
//! a mollified point source on a periodic truncated domain.
//!
//! Only the scalar one-dimensional operator is time-stepped. The spatial
//! operator is the conservative three-point flux form with the coefficient
//! sampled at half nodes, so the discrete mass `Σ u_i h` is conserved to
//! round-off.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedTensor;
use crate::coefficients::{CoefficientField, ScalarProfile};
use crate::error::{HomogError, Result};
use crate::linalg::CyclicTridiagonal;

/// `Γ_0` and its derivatives at one point (scalar operators).
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma0Jet {
    pub value: f64,
    /// `∂_i Γ_0`.
    pub grad: Vec<f64>,
    /// `∂_i ∂_j Γ_0`, row-major `d × d`.
    pub hess: Vec<f64>,
    /// `∂_i ∂_j ∂_k Γ_0`, row-major `d × d × d`.
    pub third: Vec<f64>,
    /// `∂_t Γ_0`.
    pub dt: f64,
    /// `∂_t ∂_i Γ_0`.
    pub dt_grad: Vec<f64>,
}

/// Closed-form heat kernel of `∂_t − div(Â∇)` for scalar `Â`.
#[derive(Debug, Clone)]
pub struct HeatKernelClosedForm {
    d: usize,
    a: Vec<f64>,
    /// Inverse of the symmetric part.
    inv: Vec<f64>,
    det: f64,
}

impl HeatKernelClosedForm {
    pub fn new(a_hat: &HomogenizedTensor) -> Result<Self> {
        if a_hat.m() != 1 {
            return Err(HomogError::Unsupported(
                "closed-form Γ_0 is scalar; use gamma0_system for m ≥ 2".into(),
            ));
        }
        let d = a_hat.d();
        let a: Vec<f64> = (0..d * d).map(|p| a_hat.a_hat.get(p / d, p % d, 0, 0)).collect();
        let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (a[i * d + j] + a[j * d + i]));
        let det = sym.determinant();
        if !(det > 0.0 && a_hat.mu_check > 0.0) {
            return Err(HomogError::EllipticityViolated("homogenized tensor is not elliptic".into()));
        }
        let inv_m = sym.try_inverse().ok_or_else(|| {
            HomogError::EllipticityViolated("homogenized tensor is singular".into())
        })?;
        let inv = (0..d * d).map(|p| inv_m[(p / d, p % d)]).collect();
        Ok(Self { d, a, inv, det })
    }

    /// Scalar `â` in one dimension.
    pub fn from_scalar(a_hat: f64) -> Result<Self> {
        if !(a_hat > 0.0) {
            return Err(HomogError::EllipticityViolated(format!("â = {a_hat} must be > 0")));
        }
        Ok(Self {
            d: 1,
            a: vec![a_hat],
            inv: vec![1.0 / a_hat],
            det: a_hat,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value(&self, x: &[f64], t: f64, y: &[f64], s: f64) -> Result<f64> {
        Ok(self.jet(x, t, y, s)?.value)
    }

    /// Value and derivatives up to third order in `x` at `(x, t; y, s)`.
    pub fn jet(&self, x: &[f64], t: f64, y: &[f64], s: f64) -> Result<Gamma0Jet> {
        if t <= s {
            return Err(HomogError::TimeOrdering { t, s });
        }
        let d = self.d;
        let tau = t - s;
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        // v = B z / (2τ), C = B / (2τ) with B the inverse symmetric part
        let mut v = vec![0.0; d];
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                v[i] += self.inv[i * d + j] * z[j];
            }
            q += v[i] * z[i];
            v[i] /= 2.0 * tau;
        }
        let c: Vec<f64> = self.inv.iter().map(|b| b / (2.0 * tau)).collect();
        let value = (4.0 * PI * tau).powf(-(d as f64) / 2.0) / self.det.sqrt() * (-q / (4.0 * tau)).exp();
        let grad: Vec<f64> = v.iter().map(|vi| -vi * value).collect();
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = (v[i] * v[j] - c[i * d + j]) * value;
            }
        }
        let mut third = vec![0.0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    third[(i * d + j) * d + k] = (c[i * d + k] * v[j] + c[j * d + k] * v[i] + c[i * d + j] * v[k]
                        - v[i] * v[j] * v[k])
                        * value;
                }
            }
        }
        let mut dt = 0.0;
        let mut dt_grad = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                let aij = self.a[i * d + j];
                dt += aij * hess[i * d + j];
                for k in 0..d {
                    dt_grad[k] += aij * third[(i * d + j) * d + k];
                }
            }
        }
        Ok(Gamma0Jet {
            value,
            grad,
            hess,
            third,
            dt,
            dt_grad,
        })
    }
}

/// Scalar `Γ_0(x, t; y, s)` with derivatives; see [`HeatKernelClosedForm::jet`].
pub fn gamma0(a_hat: &HomogenizedTensor, x: &[f64], t: f64, y: &[f64], s: f64) -> Result<Gamma0Jet> {
    HeatKernelClosedForm::new(a_hat)?.jet(x, t, y, s)
}

/// `∂_x^order Γ_0` for one-dimensional systems, by cosine synthesis of
/// `exp(−(t−s) ξ² Â)` on a fixed trapezoid rule.
pub fn gamma0_system(a_hat: &HomogenizedTensor, x: f64, t: f64, y: f64, s: f64, order: usize) -> Result<DMatrix<f64>> {
    if t <= s {
        return Err(HomogError::TimeOrdering { t, s });
    }
    if a_hat.d() != 1 {
        return Err(HomogError::Unsupported("system kernels are one-dimensional only".into()));
    }
    if order > 3 {
        return Err(HomogError::InvalidParameter("derivative order must be ≤ 3".into()));
    }
    let m = a_hat.m();
    let a = DMatrix::from_fn(m, m, |i, j| a_hat.a_hat.get(0, 0, i, j));
    let tau = t - s;
    let z = x - y;
    let mu = a_hat.mu_check.max(1e-12);
    let xi_max = (60.0 / (tau * mu)).sqrt();
    const NQ: usize = 4096;
    let dxi = xi_max / NQ as f64;
    let mut acc = DMatrix::zeros(m, m);
    for q in 0..=NQ {
        let xi = q as f64 * dxi;
        let w = if q == 0 || q == NQ { 0.5 } else { 1.0 };
        // ∂_z^order cos(ξz) = ξ^order cos(ξz + order π/2)
        let phase = (xi * z + order as f64 * PI / 2.0).cos() * xi.powi(order as i32);
        let e = (&a * (-tau * xi * xi)).exp();
        acc += e * (w * phase * dxi);
    }
    Ok(acc / PI)
}

/// Fine-grid resolution and budget for `Γ_ε` solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionPolicy {
    /// Spatial nodes per ε-period: `h = ε / points_per_period`.
    pub points_per_period: usize,
    /// Time steps per ε²-period: `k = ε² / steps_per_period`.
    pub steps_per_period: usize,
    /// Mollifier width in units of `h`.
    pub mollifier_factor: f64,
    /// Override for the truncation half width `L`.
    pub half_width: Option<f64>,
    /// Backward-Euler half steps taken before Crank–Nicolson.
    pub startup_steps: usize,
    pub max_nodes: usize,
    pub max_node_steps: u64,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        Self {
            points_per_period: 32,
            steps_per_period: 64,
            mollifier_factor: 2.0,
            half_width: None,
            startup_steps: 4,
            max_nodes: 1 << 23,
            max_node_steps: 400_000_000_000,
        }
    }
}

impl ResolutionPolicy {
    /// Same policy with `h` and `k` divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points_per_period: self.points_per_period * factor,
            steps_per_period: self.steps_per_period * factor,
            ..*self
        }
    }

    /// Default truncation half width for a run of length `span`.
    pub fn half_width_for(&self, span: f64) -> f64 {
        self.half_width.unwrap_or_else(|| (6.0 * span.sqrt()).max(1.0) + 1.0)
    }
}

/// Which lattice nodes and times to record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub times: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    /// Keep every `stride`-th fine node.
    pub stride: usize,
    pub gradients: bool,
}

impl EvalSpec {
    pub fn new(times: Vec<f64>, x_min: f64, x_max: f64) -> Self {
        Self {
            times,
            x_min,
            x_max,
            stride: 1,
            gradients: false,
        }
    }

    pub fn with_gradients(mut self) -> Self {
        self.gradients = true;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Unit-mass quartic bump: `Γ_ε(·, t; y, s)`.
    Dirac,
    /// Two-point dipole on the half-shifted grid: `∂_y Γ_ε(·, t; y, s)`.
    Dipole,
}

/// Values of a kernel column on a space-time lattice.
///
/// For direct columns `x` and `times` are the first two kernel arguments and
/// the pole is `(y, s)`. For adjoint columns (`adjoint = true`) the pole is
/// `(x₀, t₀)` and `x`, `times` hold the pole variables `y`, `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub epsilon: f64,
    pub pole: (f64, f64),
    pub adjoint: bool,
    pub source: SourceKind,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Row-major `times × x`.
    pub values: Vec<f64>,
    /// One-sided differences `(u_{i+1} − u_i)/h`, located at `x + grad_offset`.
    pub grad: Option<Vec<f64>>,
    pub grad_offset: f64,
    /// `Σ u_i h` over the whole truncated domain, per time.
    pub mass: Vec<f64>,
    pub half_width: f64,
    pub h: f64,
    pub k: f64,
    pub mollifier_width: f64,
}

impl KernelSample {
    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn row(&self, ti: usize) -> &[f64] {
        &self.values[ti * self.x.len()..(ti + 1) * self.x.len()]
    }

    pub fn grad_row(&self, ti: usize) -> Option<&[f64]> {
        self.grad
            .as_ref()
            .map(|g| &g[ti * self.x.len()..(ti + 1) * self.x.len()])
    }

    /// Metadata view under `(t, s) ↦ (−t, −s)`; applying it twice is the identity.
    pub fn time_reversed(&self) -> KernelSample {
        let mut out = self.clone();
        out.pole.1 = -self.pole.1;
        out.times = self.times.iter().map(|t| -t).collect();
        out.adjoint = !self.adjoint;
        out
    }

    /// Index of the lattice point closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        self.x
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().partial_cmp(&(b.1 - x).abs()).unwrap())
            .map(|p| p.0)
            .unwrap_or(0)
    }
}

/// Uniform periodic domain `x_i = origin + i h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicDomain {
    pub origin: f64,
    pub h: f64,
    pub n: usize,
}

impl PeriodicDomain {
    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.h
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.h
    }
}

/// Snapshots of one evolution at the requested times.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub k: f64,
}

enum CoefSource {
    Profile(ScalarProfile),
    Pointwise(Vec<f64>),
}

/// One time step: length and implicitness (`1` backward Euler, `½` Crank–Nicolson).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub dt: f64,
    pub theta: f64,
    /// Index into the requested times when the step lands on one.
    pub lands_on: Option<usize>,
}

/// Step sequence from `t_start` through ascending `times`: `startup` backward
/// Euler half steps, then Crank–Nicolson steps of `k0`, shortened to land on
/// every requested time.
pub fn step_schedule(t_start: f64, times: &[f64], k0: f64, startup: usize) -> Vec<Step> {
    let mut out = Vec::new();
    let mut t = t_start;
    let mut startup_left = startup;
    for (ti, &target) in times.iter().enumerate() {
        while target - t > 1e-12 * k0 {
            let (dt, theta) = if startup_left > 0 {
                startup_left -= 1;
                ((0.5 * k0).min(target - t), 1.0)
            } else {
                (k0.min(target - t), 0.5)
            };
            let lands = target - t - dt <= 1e-12 * k0;
            let dt = if lands { target - t } else { dt };
            out.push(Step {
                dt,
                theta,
                lands_on: lands.then_some(ti),
            });
            t = if lands { target } else { t + dt };
        }
    }
    out
}

/// Evolve `∂_t u − ∂_x(a(x/ε, t/ε²) ∂_x u) = 0` from `u(t_start) = u0` and
/// return `u` at each of `times` (ascending, all `> t_start`).
pub fn evolve_periodic(
    field: &CoefficientField,
    eps: f64,
    domain: PeriodicDomain,
    u0: Vec<f64>,
    t_start: f64,
    times: &[f64],
    policy: &ResolutionPolicy,
) -> Result<Evolution> {
    let mut fields = Vec::with_capacity(times.len());
    let k = evolve_periodic_with(field, eps, domain, u0, t_start, times, policy, |_, u| {
        fields.push(u.to_vec())
    })?;
    Ok(Evolution {
        times: times.to_vec(),
        fields,
        k,
    })
}

/// Streaming form of [`evolve_periodic`]: `observe(i, u)` is called when the
/// solution reaches `times[i]`. Returns the nominal step `k`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_periodic_with<F>(
    field: &CoefficientField,
    eps: f64,
    domain: PeriodicDomain,
    u0: Vec<f64>,
    t_start: f64,
    times: &[f64],
    policy: &ResolutionPolicy,
    mut observe: F,
) -> Result<f64>
where
    F: FnMut(usize, &[f64]),
{
    if field.d() != 1 || field.m() != 1 {
        return Err(HomogError::Unsupported(
            "Γ_ε time stepping is implemented for scalar one-dimensional fields".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(HomogError::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    if u0.len() != domain.n || domain.n < 3 {
        return Err(HomogError::InvalidParameter("initial data does not match the domain".into()));
    }
    if let Some(&t) = times.iter().find(|&&t| t <= t_start) {
        return Err(HomogError::TimeOrdering { t, s: t_start });
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HomogError::InvalidParameter("evaluation times must increase".into()));
    }
    let n = domain.n;
    let h = domain.h;
    let k0 = eps * eps / policy.steps_per_period as f64;
    if let Some(&t) = times.first().filter(|&&t| t - t_start <= 1e-12 * k0) {
        return Err(HomogError::TimeOrdering { t, s: t_start });
    }
    let t_end = *times.last().unwrap_or(&t_start);
    let steps = ((t_end - t_start) / k0).ceil() as u64 + policy.startup_steps as u64;
    if n > policy.max_nodes || (n as u64).saturating_mul(steps) > policy.max_node_steps {
        return Err(HomogError::ResolutionBudgetExceeded {
            required_nodes: n,
            required_steps: steps as usize,
            max_nodes: policy.max_nodes,
            max_node_steps: policy.max_node_steps as usize,
        });
    }

    // half node i+1/2 sits between nodes i and i+1
    let half_cells: Vec<f64> = (0..n).map(|i| (domain.x(i) + 0.5 * h) / eps).collect();
    let source = match field.scalar_profile(&half_cells) {
        Ok(p) => CoefSource::Profile(p),
        Err(_) => CoefSource::Pointwise(half_cells),
    };
    let fill = |t: f64, out: &mut [f64]| match &source {
        CoefSource::Profile(p) => p.fill(t / (eps * eps), out),
        CoefSource::Pointwise(cells) => {
            for (o, y) in out.iter_mut().zip(cells) {
                *o = field.evaluate_scalar(*y, t / (eps * eps));
            }
        }
    };

    let mut u = u0;
    let mut a_now = vec![0.0; n];
    let mut a_next = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut solver = CyclicTridiagonal::new(n);
    let inv_h2 = 1.0 / (h * h);

    fill(t_start, &mut a_now);
    let mut t = t_start;
    for step in step_schedule(t_start, times, k0, policy.startup_steps) {
        let t_next = match step.lands_on {
            Some(ti) => times[ti],
            None => t + step.dt,
        };
        fill(t_next, &mut a_next);
        let explicit = (1.0 - step.theta) * step.dt * inv_h2;
        let implicit = step.theta * step.dt * inv_h2;
        for i in 0..n {
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let im = if i == 0 { n - 1 } else { i - 1 };
            rhs[i] = if explicit > 0.0 {
                u[i] + explicit * (a_now[i] * (u[ip] - u[i]) - a_now[im] * (u[i] - u[im]))
            } else {
                u[i]
            };
            lower[i] = -implicit * a_next[im];
            upper[i] = -implicit * a_next[i];
            diag[i] = 1.0 + implicit * (a_next[i] + a_next[im]);
        }
        solver.solve(&lower, &diag, &upper, &mut rhs);
        std::mem::swap(&mut u, &mut rhs);
        std::mem::swap(&mut a_now, &mut a_next);
        t = t_next;
        if let Some(ti) = step.lands_on {
            observe(ti, &u);
        }
    }
    Ok(k0)
}

/// Quartic bump `(1 − (z/w)²)⁴` normalized to unit discrete mass.
pub fn mollified_dirac(domain: &PeriodicDomain, center: f64, width: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..domain.n)
        .map(|i| {
            let r = (domain.x(i) - center) / width;
            if r.abs() < 1.0 {
                (1.0 - r * r).powi(4)
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = g.iter().sum::<f64>() * domain.h;
    g.iter_mut().for_each(|v| *v /= mass);
    g
}

/// Initial data of a column on a domain built by [`column_domain`].
pub fn source_data(domain: &PeriodicDomain, y: f64, policy: &ResolutionPolicy, source: SourceKind) -> Vec<f64> {
    let (n, h) = (domain.n, domain.h);
    match source {
        SourceKind::Dirac => mollified_dirac(domain, y, policy.mollifier_factor * h),
        SourceKind::Dipole => {
            // nodes y ± h/2 carry ±1/h², so Σ g (x − y) h = 1
            let mut g = vec![0.0; n];
            g[n / 2] = 1.0 / (h * h);
            g[n / 2 - 1] = -1.0 / (h * h);
            g
        }
    }
}

/// Truncated periodic domain for a column poled at `y` running for `span`:
/// an even number of ε-periods covering `[y − L, y + L]`, with the pole on a
/// node (Dirac) or midway between two nodes (dipole).
pub fn column_domain(eps: f64, y: f64, span: f64, policy: &ResolutionPolicy, source: SourceKind) -> PeriodicDomain {
    let pps = policy.points_per_period.max(2);
    let h = eps / pps as f64;
    let l0 = policy.half_width_for(span);
    let periods = ((2.0 * l0 / eps) / 2.0).ceil() as usize * 2;
    let n = periods * pps;
    let shift = match source {
        SourceKind::Dirac => 0.0,
        SourceKind::Dipole => 0.5,
    };
    PeriodicDomain {
        origin: y - n as f64 * h / 2.0 + shift * h,
        h,
        n,
    }
}

/// Run one column: pole `(y, s)`, times ascending after `s`.
fn column(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    times: &[f64],
    spec: &EvalSpec,
    policy: &ResolutionPolicy,
    source: SourceKind,
) -> Result<KernelSample> {
    let (y, s) = pole;
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if times.is_empty() {
        return Err(HomogError::InvalidParameter("no evaluation times".into()));
    }
    if t_max <= s || times.iter().any(|&t| t <= s) {
        let t = times.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(HomogError::TimeOrdering { t, s });
    }
    let domain = column_domain(eps, y, t_max - s, policy, source);
    let (h, n) = (domain.h, domain.n);
    let half_width = domain.length() / 2.0;
    let mollifier_width = policy.mollifier_factor * h;
    let u0 = source_data(&domain, y, policy, source);
    let mut dedup: Vec<f64> = times.to_vec();
    dedup.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dedup.dedup();

    let stride = spec.stride.max(1);
    let idx: Vec<usize> = (0..n)
        .filter(|&i| {
            let x = domain.x(i);
            x >= spec.x_min - 1e-12 && x <= spec.x_max + 1e-12
        })
        .step_by(stride)
        .collect();
    let nx = idx.len();
    let mut values = vec![0.0; times.len() * nx];
    let mut grad = spec.gradients.then(|| vec![0.0; times.len() * nx]);
    let mut mass = vec![0.0; times.len()];
    let k = evolve_periodic_with(field, eps, domain, u0, s, &dedup, policy, |slot, u| {
        for (ti, _) in times.iter().enumerate().filter(|(_, &t)| t == dedup[slot]) {
            mass[ti] = u.iter().sum::<f64>() * h;
            for (p, &i) in idx.iter().enumerate() {
                values[ti * nx + p] = u[i];
                if let Some(g) = grad.as_mut() {
                    g[ti * nx + p] = (u[(i + 1) % n] - u[i]) / h;
                }
            }
        }
    })?;
    Ok(KernelSample {
        epsilon: eps,
        pole,
        adjoint: false,
        source,
        times: times.to_vec(),
        x: idx.iter().map(|&i| domain.x(i)).collect(),
        values,
        grad,
        grad_offset: 0.5 * h,
        mass,
        half_width,
        h,
        k,
        mollifier_width: match source {
            SourceKind::Dirac => mollifier_width,
            SourceKind::Dipole => h,
        },
    })
}

/// `Γ_ε(x, t; y, s)` on the lattice of `spec` for the pole `(y, s)`.
pub fn gamma_eps_column(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    spec: &EvalSpec,
    policy: &ResolutionPolicy,
) -> Result<KernelSample> {
    column(field, eps, pole, &spec.times, spec, policy, SourceKind::Dirac)
}

/// Same as [`gamma_eps_column`] with `∇_x Γ_ε` recorded.
pub fn gamma_eps_gradients(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    spec: &EvalSpec,
    policy: &ResolutionPolicy,
) -> Result<KernelSample> {
    let spec = spec.clone().with_gradients();
    column(field, eps, pole, &spec.times, &spec, policy, SourceKind::Dirac)
}

/// `∂_y Γ_ε(x, t; y, s)` as a function of `x` (values) with its `x`-gradient,
/// from a dipole source at the pole.
pub fn gamma_eps_pole_derivative(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    spec: &EvalSpec,
    policy: &ResolutionPolicy,
) -> Result<KernelSample> {
    let spec = spec.clone().with_gradients();
    column(field, eps, pole, &spec.times, &spec, policy, SourceKind::Dipole)
}

/// `Γ_ε(x₀, t₀; y, s)` as a function of the pole variables, through
/// `Γ_ε(x₀, t₀; y, s) = Γ̃_ε(y, −s; x₀, −t₀)`. `spec.times` lists `s < t₀`
/// and the lattice runs over `y`.
pub fn adjoint_column(
    field: &CoefficientField,
    eps: f64,
    pole: (f64, f64),
    spec: &EvalSpec,
    policy: &ResolutionPolicy,
) -> Result<KernelSample> {
    let (x0, t0) = pole;
    if let Some(&s) = spec.times.iter().find(|&&s| s >= t0) {
        return Err(HomogError::TimeOrdering { t: t0, s });
    }
    let adj = field.adjoint_coefficient();
    let reversed: Vec<f64> = spec.times.iter().map(|s| -s).collect();
    let sample = column(&adj, eps, (x0, -t0), &reversed, spec, policy, SourceKind::Dirac)?;
    let mut out = sample.time_reversed();
    out.pole = pole;
    Ok(out)
}
