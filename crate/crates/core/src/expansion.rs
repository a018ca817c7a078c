//! Two-scale expansion in one space dimension: the parabolic smoothing
//! operator `S_ε`, the expansion `w_ε`, its forcing `F_ε` and the weak form of
//! `(∂_t + L_ε) w_ε = ε div F_ε`.
//!
//! Fields live on uniform space-time lattices ([`SampledField`]). Smoothing
//! is a discrete convolution `Σ_{p,q} W_{pq} f(x − ph, t − qk)`; as a function
//! of `(x, t)` it commutes with derivatives exactly, so `∂_x S(∂_x u₀)` is
//! computed as `S(∂²_x u₀)` and so on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::CorrectorSet;
use crate::coefficients::CoefficientField;
use crate::dual::DualCorrectorSet;
use crate::error::{HomogError, Result};
use crate::fft::NdFft;
use crate::interp::PeriodicInterpolator;
use crate::kernels::HeatKernelClosedForm;

/// `∫_O (1 − x² − |t|)⁴ dx dt` over `O = {x² + |t| ≤ 1}`, `x ∈ ℝ`.
const BUMP_MASS_1D: f64 = 1024.0 / 3465.0;

/// Samples on `x_i = x0 + i h`, `t_j = t0 + j k`, stored time-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub x0: f64,
    pub h: f64,
    pub nx: usize,
    pub t0: f64,
    pub k: f64,
    pub nt: usize,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(x0: f64, h: f64, nx: usize, t0: f64, k: f64, nt: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * nt {
            return Err(HomogError::LatticeMismatch(format!(
                "{} values for a {nt}×{nx} lattice",
                values.len()
            )));
        }
        if !(h > 0.0 && k > 0.0) {
            return Err(HomogError::InvalidParameter("lattice steps must be positive".into()));
        }
        Ok(Self {
            x0,
            h,
            nx,
            t0,
            k,
            nt,
            values,
        })
    }

    pub fn from_fn<F>(x0: f64, h: f64, nx: usize, t0: f64, k: f64, nt: usize, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(nx * nt);
        for j in 0..nt {
            let t = t0 + j as f64 * k;
            for i in 0..nx {
                values.push(f(x0 + i as f64 * h, t));
            }
        }
        Self {
            x0,
            h,
            nx,
            t0,
            k,
            nt,
            values,
        }
    }

    /// Same lattice, new values.
    pub fn map_lattice<F>(&self, f: F) -> Self
    where
        F: FnMut(f64, f64) -> f64,
    {
        Self::from_fn(self.x0, self.h, self.nx, self.t0, self.k, self.nt, f)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.k
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn same_lattice(&self, other: &SampledField) -> bool {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale;
        self.nx == other.nx
            && self.nt == other.nt
            && close(self.h, other.h, self.h)
            && close(self.k, other.k, self.k)
            && close(self.x0, other.x0, self.h)
            && close(self.t0, other.t0, self.k)
    }

    /// Sub-lattice `i ∈ i0..i0+nx`, `j ∈ j0..j0+nt`.
    pub fn restrict(&self, i0: usize, nx: usize, j0: usize, nt: usize) -> Result<Self> {
        if i0 + nx > self.nx || j0 + nt > self.nt {
            return Err(HomogError::LatticeMismatch("restriction leaves the lattice".into()));
        }
        let mut values = Vec::with_capacity(nx * nt);
        for j in j0..j0 + nt {
            values.extend_from_slice(&self.row(j)[i0..i0 + nx]);
        }
        Ok(Self {
            x0: self.x(i0),
            h: self.h,
            nx,
            t0: self.t(j0),
            k: self.k,
            nt,
            values,
        })
    }

    /// `‖f‖_{L²}` by the rectangle rule.
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.h * self.k).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn zip_with<F>(&self, other: &SampledField, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> f64,
    {
        if !self.same_lattice(other) {
            return Err(HomogError::LatticeMismatch("fields live on different lattices".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &SampledField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }
}

/// Parabolic mollifier `θ(x, t) = c (1 − x² − |t|)⁴ (1 + γ x)` on `O`,
/// rescaled as `θ_ε(x, t) = ε⁻³ θ(x/ε, t/ε²)`.
///
/// `γ = 0` is the even kernel; `|γ| < 1` tilts it so the first spatial
/// moment no longer vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingKernel {
    pub eps: f64,
    pub tilt: f64,
}

/// Weights `W_{pq}`, `p ∈ −px..=px`, `q ∈ −pt..=pt`, summing to one.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub px: usize,
    pub pt: usize,
    /// Row-major `(2pt+1) × (2px+1)`.
    pub weights: Vec<f64>,
    /// `Σ θ_ε h k` before normalization.
    pub quadrature_mass: f64,
}

impl SmoothingKernel {
    pub fn new(eps: f64) -> Result<Self> {
        Self::tilted(eps, 0.0)
    }

    pub fn tilted(eps: f64, tilt: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(HomogError::InvalidParameter(format!("ε = {eps} must be positive")));
        }
        if !(tilt.abs() < 1.0) {
            return Err(HomogError::InvalidParameter(format!(
                "tilt {tilt} would make the kernel negative"
            )));
        }
        Ok(Self { eps, tilt })
    }

    /// Unit-scale kernel.
    pub fn theta(&self, x: f64, t: f64) -> f64 {
        let r = 1.0 - x * x - t.abs();
        if r <= 0.0 {
            0.0
        } else {
            r.powi(4) * (1.0 + self.tilt * x) / BUMP_MASS_1D
        }
    }

    pub fn theta_eps(&self, x: f64, t: f64) -> f64 {
        let e = self.eps;
        self.theta(x / e, t / (e * e)) / (e * e * e)
    }

    /// `(∂_x θ, ∂_t θ)` of the unit-scale kernel.
    fn theta_grad(&self, x: f64, t: f64) -> (f64, f64) {
        let r = 1.0 - x * x - t.abs();
        if r <= 0.0 {
            return (0.0, 0.0);
        }
        let g = 1.0 + self.tilt * x;
        let dx = (-8.0 * x * r.powi(3) * g + r.powi(4) * self.tilt) / BUMP_MASS_1D;
        let dt = -4.0 * t.signum() * r.powi(3) * g / BUMP_MASS_1D;
        (dx, dt)
    }

    /// `ε ∫ |∇_x θ_ε|`, independent of `ε`; computed on an `n × n` midpoint grid.
    pub fn gradient_constant(&self, n: usize) -> f64 {
        let hx = 2.0 / n as f64;
        let ht = 2.0 / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            let t = -1.0 + (j as f64 + 0.5) * ht;
            for i in 0..n {
                let x = -1.0 + (i as f64 + 0.5) * hx;
                acc += self.theta_grad(x, t).0.abs();
            }
        }
        acc * hx * ht
    }

    pub fn discrete(&self, h: f64, k: f64) -> Result<DiscreteKernel> {
        if h > self.eps / 4.0 * (1.0 + 1e-12) {
            return Err(HomogError::InvalidParameter(format!(
                "lattice step {h} is coarser than ε/4 = {}",
                self.eps / 4.0
            )));
        }
        let px = (self.eps / h).floor() as usize;
        let pt = (self.eps * self.eps / k).floor() as usize;
        let mut weights = Vec::with_capacity((2 * px + 1) * (2 * pt + 1));
        for q in -(pt as i64)..=pt as i64 {
            for p in -(px as i64)..=px as i64 {
                weights.push(self.theta_eps(p as f64 * h, q as f64 * k) * h * k);
            }
        }
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0) {
            return Err(HomogError::InvalidParameter("time step too coarse to sample the kernel".into()));
        }
        weights.iter_mut().for_each(|w| *w /= mass);
        Ok(DiscreteKernel {
            px,
            pt,
            weights,
            quadrature_mass: mass,
        })
    }
}

/// Linear convolutions of several fields with one kernel, sharing its transform.
struct Convolver {
    fft: NdFft,
    kernel_hat: Vec<Complex64>,
    dims: [usize; 2],
    px: usize,
    pt: usize,
}

impl Convolver {
    fn new(kernel: &DiscreteKernel, nx: usize, nt: usize) -> Self {
        let dims = [nt + 2 * kernel.pt, nx + 2 * kernel.px];
        let fft = NdFft::new(&dims);
        let kx = 2 * kernel.px + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); dims[0] * dims[1]];
        for (q, row) in kernel.weights.chunks(kx).enumerate() {
            for (p, w) in row.iter().enumerate() {
                buf[q * dims[1] + p] = Complex64::new(*w, 0.0);
            }
        }
        fft.forward(&mut buf);
        Self {
            fft,
            kernel_hat: buf,
            dims,
            px: kernel.px,
            pt: kernel.pt,
        }
    }

    fn apply(&self, f: &SampledField) -> SampledField {
        let [mt, mx] = self.dims;
        let mut buf = vec![Complex64::new(0.0, 0.0); mt * mx];
        for j in 0..f.nt {
            for (i, v) in f.row(j).iter().enumerate() {
                buf[j * mx + i] = Complex64::new(*v, 0.0);
            }
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        let nx = f.nx - 2 * self.px;
        let nt = f.nt - 2 * self.pt;
        let mut values = Vec::with_capacity(nx * nt);
        for j in 0..nt {
            let src = (j + 2 * self.pt) * mx + 2 * self.px;
            values.extend(buf[src..src + nx].iter().map(|c| c.re));
        }
        SampledField {
            x0: f.x(self.px),
            h: f.h,
            nx,
            t0: f.t(self.pt),
            k: f.k,
            nt,
            values,
        }
    }
}

fn check_padding(kernel: &DiscreteKernel, f: &SampledField) -> Result<()> {
    if f.nx <= 2 * kernel.px || f.nt <= 2 * kernel.pt {
        return Err(HomogError::InsufficientPadding(format!(
            "a {}×{} lattice cannot absorb a kernel reaching {} nodes in x and {} in t",
            f.nt, f.nx, kernel.px, kernel.pt
        )));
    }
    Ok(())
}

/// `S_ε(f)` on the interior of `f`'s lattice: the output drops `px` nodes
/// at each end in `x` and `pt` in `t`, so no value depends on data outside
/// the sampled box.
pub fn smooth(kernel: &SmoothingKernel, f: &SampledField) -> Result<SampledField> {
    let dk = kernel.discrete(f.h, f.k)?;
    check_padding(&dk, f)?;
    Ok(Convolver::new(&dk, f.nx, f.nt).apply(f))
}

/// Cell quantities evaluated at `(x/ε, t/ε²)`.
pub struct CellFactors {
    field: CoefficientField,
    a_hat: f64,
    chi: PeriodicInterpolator,
    /// `φ_{(d+1)11}`.
    psi: PeriodicInterpolator,
    /// `φ_{1(d+1)1}`, equal to `−ψ` up to round-off.
    phi_x_time: PeriodicInterpolator,
    /// `∂_y φ_{(d+1)11}`.
    dpsi: PeriodicInterpolator,
}

impl CellFactors {
    pub fn new(correctors: &CorrectorSet, duals: &DualCorrectorSet, upsample: usize) -> Result<Self> {
        let grid = *correctors.grid();
        if grid.d() != 1 || correctors.a_hat.m() != 1 {
            return Err(HomogError::Unsupported(
                "the two-scale expansion is implemented for scalar one-dimensional fields".into(),
            ));
        }
        if *duals.phi.grid() != grid {
            return Err(HomogError::LatticeMismatch("correctors and dual correctors differ in grid".into()));
        }
        let a_hat = correctors.a_hat.scalar().expect("scalar tensor");
        Ok(Self {
            field: correctors.coefficient.clone(),
            a_hat,
            chi: PeriodicInterpolator::new(&grid, correctors.chi.component(0), upsample)?,
            psi: PeriodicInterpolator::new(&grid, duals.phi.at(&[0, 0, 1, 0, 0]), upsample)?,
            phi_x_time: PeriodicInterpolator::new(&grid, duals.phi.at(&[0, 0, 0, 1, 0]), upsample)?,
            dpsi: PeriodicInterpolator::new(&grid, duals.grad_phi_spatial.at(&[0, 0, 0, 0, 0]), upsample)?,
        })
    }

    pub fn a_hat(&self) -> f64 {
        self.a_hat
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    fn cell(eps: f64, x: f64, t: f64) -> ([f64; 1], f64) {
        ([x / eps], t / (eps * eps))
    }

    pub fn a(&self, eps: f64, x: f64, t: f64) -> f64 {
        let (y, s) = Self::cell(eps, x, t);
        self.field.evaluate_scalar(y[0], s)
    }

    pub fn chi(&self, eps: f64, x: f64, t: f64) -> f64 {
        let (y, s) = Self::cell(eps, x, t);
        self.chi.eval(&y, s)
    }

    pub fn psi(&self, eps: f64, x: f64, t: f64) -> f64 {
        let (y, s) = Self::cell(eps, x, t);
        self.psi.eval(&y, s)
    }
}

/// `u₀` and the derivatives the expansion needs, on one padded lattice.
#[derive(Debug, Clone)]
pub struct HomogenizedJets {
    pub value: SampledField,
    pub dx: Option<SampledField>,
    pub dxx: Option<SampledField>,
    pub dxt: Option<SampledField>,
    pub dxxx: Option<SampledField>,
}

impl HomogenizedJets {
    /// Samples of `Γ₀(·, ·; pole)` and its derivatives on the given lattice.
    #[allow(clippy::too_many_arguments)]
    pub fn from_kernel(
        kernel: &HeatKernelClosedForm,
        pole: (f64, f64),
        x0: f64,
        h: f64,
        nx: usize,
        t0: f64,
        k: f64,
        nt: usize,
    ) -> Result<Self> {
        if t0 <= pole.1 {
            return Err(HomogError::TimeOrdering { t: t0, s: pole.1 });
        }
        let mut jets = Vec::with_capacity(nx * nt);
        for j in 0..nt {
            let t = t0 + j as f64 * k;
            for i in 0..nx {
                jets.push(kernel.jet(&[x0 + i as f64 * h], t, &[pole.0], pole.1)?);
            }
        }
        let pick = |f: &dyn Fn(&crate::kernels::Gamma0Jet) -> f64| SampledField {
            x0,
            h,
            nx,
            t0,
            k,
            nt,
            values: jets.iter().map(f).collect(),
        };
        Ok(Self {
            value: pick(&|j| j.value),
            dx: Some(pick(&|j| j.grad[0])),
            dxx: Some(pick(&|j| j.hess[0])),
            dxt: Some(pick(&|j| j.dt_grad[0])),
            dxxx: Some(pick(&|j| j.third[0])),
        })
    }

    fn require<'a>(f: &'a Option<SampledField>, name: &str) -> Result<&'a SampledField> {
        f.as_ref().ok_or_else(|| HomogError::MissingInput(format!("{name} of u₀")))
    }
}

/// The six terms of `F_ε`, each on the smoothed (interior) lattice.
#[derive(Debug, Clone)]
pub struct ForcingTerms {
    pub terms: [SampledField; 6],
}

impl ForcingTerms {
    pub fn total(&self) -> SampledField {
        let mut out = self.terms[0].clone();
        for t in &self.terms[1..] {
            for (o, v) in out.values.iter_mut().zip(&t.values) {
                *o += v;
            }
        }
        out
    }
}

/// Smoothed derivatives of `u₀` shared by `w_ε` and `F_ε`.
#[derive(Debug, Clone)]
pub struct SmoothedJets {
    /// `u₀`, `∂_x u₀` restricted to the interior lattice.
    pub u0: SampledField,
    pub u0_x: SampledField,
    /// `S(∂_x u₀)`, `S(∂²_x u₀)`, `S(∂_x∂_t u₀)`, `S(∂³_x u₀)`.
    pub s_x: SampledField,
    pub s_xx: SampledField,
    pub s_xt: SampledField,
    pub s_xxx: SampledField,
}

pub fn smooth_jets(jets: &HomogenizedJets, kernel: &SmoothingKernel) -> Result<SmoothedJets> {
    let dx = HomogenizedJets::require(&jets.dx, "∂_x")?;
    let dxx = HomogenizedJets::require(&jets.dxx, "∂²_x")?;
    let dxt = HomogenizedJets::require(&jets.dxt, "∂_x∂_t")?;
    let dxxx = HomogenizedJets::require(&jets.dxxx, "∂³_x")?;
    let v = &jets.value;
    for f in [dx, dxx, dxt, dxxx] {
        if !f.same_lattice(v) {
            return Err(HomogError::LatticeMismatch("u₀ derivatives sampled on different lattices".into()));
        }
    }
    let dk = kernel.discrete(v.h, v.k)?;
    check_padding(&dk, v)?;
    let conv = Convolver::new(&dk, v.nx, v.nt);
    let (nx, nt) = (v.nx - 2 * dk.px, v.nt - 2 * dk.pt);
    Ok(SmoothedJets {
        u0: v.restrict(dk.px, nx, dk.pt, nt)?,
        u0_x: dx.restrict(dk.px, nx, dk.pt, nt)?,
        s_x: conv.apply(dx),
        s_xx: conv.apply(dxx),
        s_xt: conv.apply(dxt),
        s_xxx: conv.apply(dxxx),
    })
}

/// Everything assembled on one interior lattice.
#[derive(Debug, Clone)]
pub struct ExpansionFields {
    pub eps: f64,
    pub u_eps: SampledField,
    pub u_0: SampledField,
    pub w_eps: SampledField,
    pub forcing: ForcingTerms,
    pub f_eps: SampledField,
}

/// `w_ε = u_ε − u₀ − ε χ^ε S(∂_x u₀) − ε² ψ^ε S(∂²_x u₀)` with `ψ = φ_{(d+1)11}`.
pub fn build_w_eps(
    u_eps: &SampledField,
    smoothed: &SmoothedJets,
    cell: &CellFactors,
    kernel: &SmoothingKernel,
) -> Result<SampledField> {
    if !u_eps.same_lattice(&smoothed.u0) {
        return Err(HomogError::LatticeMismatch(format!(
            "u_ε lattice ({} × {} from ({}, {})) differs from the smoothed lattice ({} × {} from ({}, {}))",
            u_eps.nt, u_eps.nx, u_eps.x0, u_eps.t0, smoothed.u0.nt, smoothed.u0.nx, smoothed.u0.x0, smoothed.u0.t0
        )));
    }
    let eps = kernel.eps;
    let mut values = Vec::with_capacity(u_eps.values.len());
    for j in 0..u_eps.nt {
        let t = u_eps.t(j);
        for i in 0..u_eps.nx {
            let x = u_eps.x(i);
            let idx = j * u_eps.nx + i;
            values.push(
                u_eps.values[idx]
                    - smoothed.u0.values[idx]
                    - eps * cell.chi(eps, x, t) * smoothed.s_x.values[idx]
                    - eps * eps * cell.psi(eps, x, t) * smoothed.s_xx.values[idx],
            );
        }
    }
    Ok(SampledField {
        values,
        ..u_eps.clone()
    })
}

/// The six terms of `F_ε` in one space dimension:
///
/// 1. `ε⁻¹ (a^ε − â)(∂_x u₀ − S(∂_x u₀))`
/// 2. `a^ε χ^ε S(∂²_x u₀)`
/// 3. `φ^ε_{111} S(∂²_x u₀)` (identically zero by antisymmetry)
/// 4. `ε φ^ε_{1(d+1)1} S(∂_x∂_t u₀)`
/// 5. `a^ε (∂_y ψ)^ε S(∂²_x u₀)`
/// 6. `ε a^ε ψ^ε S(∂³_x u₀)`
///
/// Terms 5 and 6 are the flux of the `ε² ψ^ε ∂_x S(∂_x u₀)` part of `w_ε`
/// and enter with a plus sign: with `∂_y ψ = χ` and `∂_s ψ = b₁₁` this is
/// the sign for which `(∂_t + L_ε) w_ε = ε ∂_x F_ε` holds.
pub fn build_f_eps(smoothed: &SmoothedJets, cell: &CellFactors, kernel: &SmoothingKernel) -> Result<ForcingTerms> {
    let eps = kernel.eps;
    let lat = &smoothed.s_x;
    let n = lat.values.len();
    let mut terms: [Vec<f64>; 6] = Default::default();
    for t in terms.iter_mut() {
        t.reserve(n);
    }
    for j in 0..lat.nt {
        let t = lat.t(j);
        for i in 0..lat.nx {
            let x = lat.x(i);
            let idx = j * lat.nx + i;
            let (y, s) = CellFactors::cell(eps, x, t);
            let a = cell.field.evaluate_scalar(y[0], s);
            let chi = cell.chi.eval(&y, s);
            let psi = cell.psi.eval(&y, s);
            let dpsi = cell.dpsi.eval(&y, s);
            let phi_xt = cell.phi_x_time.eval(&y, s);
            let sxx = smoothed.s_xx.values[idx];
            terms[0].push((a - cell.a_hat) * (smoothed.u0_x.values[idx] - smoothed.s_x.values[idx]) / eps);
            terms[1].push(a * chi * sxx);
            terms[2].push(0.0);
            terms[3].push(eps * phi_xt * smoothed.s_xt.values[idx]);
            terms[4].push(a * dpsi * sxx);
            terms[5].push(eps * a * psi * smoothed.s_xxx.values[idx]);
        }
    }
    let terms = terms.map(|values| SampledField {
        values,
        ..lat.clone()
    });
    Ok(ForcingTerms { terms })
}

/// Assemble `w_ε` and `F_ε` from a sampled `u_ε` and the jets of `u₀`.
pub fn build_expansion(
    u_eps: &SampledField,
    jets: &HomogenizedJets,
    cell: &CellFactors,
    kernel: &SmoothingKernel,
) -> Result<ExpansionFields> {
    let smoothed = smooth_jets(jets, kernel)?;
    let w_eps = build_w_eps(u_eps, &smoothed, cell, kernel)?;
    let forcing = build_f_eps(&smoothed, cell, kernel)?;
    let f_eps = forcing.total();
    Ok(ExpansionFields {
        eps: kernel.eps,
        u_eps: u_eps.clone(),
        u_0: smoothed.u0,
        w_eps,
        forcing,
        f_eps,
    })
}

/// `v(x, t) = B((x − cx)/rx) B((t − ct)/rt) cos(ω (x − cx))`, `B(z) = (1 − z²)⁴₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub cx: f64,
    pub rx: f64,
    pub ct: f64,
    pub rt: f64,
    pub omega: f64,
}

fn bump(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let r = 1.0 - z * z;
    (r.powi(4), -8.0 * z * r.powi(3))
}

impl TestFunction {
    /// `(v, ∂_x v, ∂_t v)`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64, f64) {
        let zx = (x - self.cx) / self.rx;
        let zt = (t - self.ct) / self.rt;
        let (bx, dbx) = bump(zx);
        let (bt, dbt) = bump(zt);
        let c = (self.omega * (x - self.cx)).cos();
        let s = (self.omega * (x - self.cx)).sin();
        let v = bx * bt * c;
        let vx = (dbx / self.rx * c - bx * self.omega * s) * bt;
        let vt = bx * c * dbt / self.rt;
        (v, vx, vt)
    }

    /// Ten deterministic test functions inside `[x_lo, x_hi] × [t_lo, t_hi]`,
    /// mixing macroscopic bumps with ones oscillating at the scale `eps`.
    pub fn family(x_lo: f64, x_hi: f64, t_lo: f64, t_hi: f64, eps: f64) -> Vec<TestFunction> {
        let (xm, xr) = (0.5 * (x_lo + x_hi), 0.5 * (x_hi - x_lo));
        let (tm, tr) = (0.5 * (t_lo + t_hi), 0.5 * (t_hi - t_lo));
        let w = 2.0 * std::f64::consts::PI / eps;
        [
            (0.0, 0.9, 0.0, 0.9, 0.0),
            (-0.4, 0.5, 0.0, 0.9, 0.0),
            (0.4, 0.5, 0.0, 0.9, 0.0),
            (0.0, 0.3, -0.4, 0.5, 0.0),
            (0.2, 0.3, 0.4, 0.5, 0.0),
            (0.0, 0.9, 0.0, 0.9, 0.5 * w),
            (-0.3, 0.5, 0.2, 0.6, w),
            (0.3, 0.5, -0.2, 0.6, w),
            (0.1, 0.2, 0.0, 0.8, 2.0 * w),
            (-0.6, 0.3, 0.3, 0.6, 0.25 * w),
        ]
        .iter()
        .map(|&(cx, rx, ct, rt, omega)| TestFunction {
            cx: xm + cx * xr,
            rx: rx * xr,
            ct: tm + ct * tr,
            rt: rt * tr,
            omega,
        })
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// `|∫∫ −w ∂_t v + a^ε ∂_x w ∂_x v + ε F ∂_x v| / ‖v‖` per test function,
    /// with `‖v‖² = ∫∫ v² + (∂_x v)²`.
    pub per_test: Vec<f64>,
    pub max: f64,
}

/// Discrete weak residual of `(∂_t + L_ε) w = ε div F`: rectangle rule in
/// `x` and `t`, `∂_x w` as half-node differences paired with `a^ε` at half
/// nodes.
pub fn weak_residual(
    w: &SampledField,
    f: &SampledField,
    field: &CoefficientField,
    eps: f64,
    tests: &[TestFunction],
) -> Result<WeakResidual> {
    if !w.same_lattice(f) {
        return Err(HomogError::LatticeMismatch("w_ε and F_ε differ in lattice".into()));
    }
    let (h, k) = (w.h, w.k);
    let mut per_test = Vec::with_capacity(tests.len());
    for v in tests {
        let mut acc = 0.0;
        let mut norm = 0.0;
        for j in 0..w.nt {
            let t = w.t(j);
            let row = w.row(j);
            let frow = f.row(j);
            for i in 0..w.nx {
                let x = w.x(i);
                let (vv, vx, vt) = v.eval(x, t);
                acc += -row[i] * vt + eps * frow[i] * vx;
                norm += vv * vv + vx * vx;
                if i + 1 < w.nx {
                    let xm = x + 0.5 * h;
                    let (_, vxm, _) = v.eval(xm, t);
                    if vxm != 0.0 {
                        let a = field.evaluate_scalar(xm / eps, t / (eps * eps));
                        acc += a * (row[i + 1] - row[i]) / h * vxm;
                    }
                }
            }
        }
        let norm = (norm * h * k).sqrt();
        per_test.push(if norm > 0.0 { (acc * h * k).abs() / norm } else { 0.0 });
    }
    let max = per_test.iter().cloned().fold(0.0, f64::max);
    Ok(WeakResidual { per_test, max })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    const TAU: f64 = 2.0 * PI;

    #[test]
    fn kernel_has_unit_mass_and_support_in_o() {
        for tilt in [0.0, 0.7] {
            let k = SmoothingKernel::tilted(1.0, tilt).unwrap();
            let n = 2000;
            let hx = 2.0 / n as f64;
            let mut mass = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let x = -1.0 + (i as f64 + 0.5) * hx;
                    let t = -1.0 + (j as f64 + 0.5) * hx;
                    mass += k.theta(x, t);
                }
            }
            assert!((mass * hx * hx - 1.0).abs() < 1e-5, "{mass}");
            assert_eq!(k.theta(0.8, 0.37), 0.0);
            assert_eq!(k.theta(0.0, -1.0), 0.0);
            assert!(k.theta(0.0, 0.0) > 0.0);
        }
        let dk = SmoothingKernel::new(0.125).unwrap().discrete(0.125 / 32.0, 0.125f64.powi(2) / 64.0).unwrap();
        assert!((dk.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!((dk.quadrature_mass - 1.0).abs() < 1e-3);
        assert!(dk.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn gradient_constant_is_finite_and_positive() {
        let c = SmoothingKernel::new(0.1).unwrap().gradient_constant(400);
        assert!(c > 0.5 && c < 10.0, "{c}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SmoothingKernel::new(0.0).is_err());
        assert!(SmoothingKernel::tilted(0.1, 1.0).is_err());
        let k = SmoothingKernel::new(0.1).unwrap();
        assert!(matches!(k.discrete(0.05, 1e-4), Err(HomogError::InvalidParameter(_))));
    }

    fn lattice(eps: f64, f: impl FnMut(f64, f64) -> f64) -> SampledField {
        let h = eps / 8.0;
        let k = eps * eps / 8.0;
        SampledField::from_fn(-0.5, h, (1.0 / h) as usize + 1, 0.2, k, (0.3 / k) as usize, f)
    }

    #[test]
    fn preserves_constants_and_linear_functions() {
        let k = SmoothingKernel::new(0.125).unwrap();
        let one = lattice(0.125, |_, _| 1.0);
        let s = smooth(&k, &one).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let lin = lattice(0.125, |x, _| 2.0 * x - 1.0);
        let s = smooth(&k, &lin).unwrap();
        for j in 0..s.nt {
            for i in 0..s.nx {
                assert!((s.at(i, j) - (2.0 * s.x(i) - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_is_a_sup_norm_contraction() {
        let k = SmoothingKernel::tilted(0.125, 0.5).unwrap();
        let f = lattice(0.125, |x, t| (17.0 * x).sin() * (3.0 * t).cos() + (40.0 * x * t).sin());
        let s = smooth(&k, &f).unwrap();
        assert!(s.max_abs() <= f.max_abs() + 1e-14);
    }

    #[test]
    fn insufficient_padding_is_an_error() {
        let k = SmoothingKernel::new(0.125).unwrap();
        let f = SampledField::from_fn(0.0, 0.125 / 8.0, 10, 0.0, 0.125f64.powi(2) / 8.0, 40, |_, _| 1.0);
        assert!(matches!(smooth(&k, &f), Err(HomogError::InsufficientPadding(_))));
    }

    #[test]
    fn smoothing_commutes_with_differences() {
        // S(D g) and D S(g), computed independently, for D a lattice difference in t or x
        let k = SmoothingKernel::tilted(0.125, 0.3).unwrap();
        let g = lattice(0.125, |x, t| (TAU * x).cos() * (TAU * t).cos() + x * x * t);
        let dt = SampledField::from_fn(g.x0, g.h, g.nx, g.t0, g.k, g.nt - 1, |_, _| 0.0);
        let dt = SampledField {
            values: (0..dt.nt)
                .flat_map(|j| (0..g.nx).map(move |i| (j, i)))
                .map(|(j, i)| (g.at(i, j + 1) - g.at(i, j)) / g.k)
                .collect(),
            ..dt
        };
        let dx = SampledField {
            nx: g.nx - 1,
            values: (0..g.nt)
                .flat_map(|j| (0..g.nx - 1).map(move |i| (j, i)))
                .map(|(j, i)| (g.at(i + 1, j) - g.at(i, j)) / g.h)
                .collect(),
            ..g.clone()
        };
        let sg = smooth(&k, &g).unwrap();
        let s_dt = smooth(&k, &dt).unwrap();
        let s_dx = smooth(&k, &dx).unwrap();
        let scale = s_dt.max_abs().max(s_dx.max_abs());
        for j in 0..s_dt.nt {
            for i in 0..s_dt.nx {
                let d = (sg.at(i, j + 1) - sg.at(i, j)) / sg.k;
                assert!((d - s_dt.at(i, j)).abs() < 1e-10 * scale);
            }
        }
        for j in 0..s_dx.nt {
            for i in 0..s_dx.nx {
                let d = (sg.at(i + 1, j) - sg.at(i, j)) / sg.h;
                assert!((d - s_dx.at(i, j)).abs() < 1e-11 * scale);
            }
        }
    }

    #[test]
    fn lattice_checks() {
        let a = lattice(0.125, |_, _| 0.0);
        let b = SampledField {
            x0: a.x0 + 0.1,
            ..a.clone()
        };
        assert!(a.same_lattice(&a.clone()));
        assert!(matches!(a.sub(&b), Err(HomogError::LatticeMismatch(_))));
        assert!(a.restrict(0, a.nx + 1, 0, 1).is_err());
    }

    #[test]
    fn test_functions_vanish_on_the_boundary() {
        for v in TestFunction::family(-1.0, 1.0, 0.5, 1.0, 0.125) {
            for &(x, t) in &[(-1.0, 0.7), (1.0, 0.7), (0.0, 0.5), (0.0, 1.0)] {
                let (a, b, c) = v.eval(x, t);
                assert!(a.abs() < 1e-12 && b.abs() < 1e-9 && c.abs() < 1e-9);
            }
            let (x, t) = (0.013, 0.711);
            let e = 1e-6;
            let (_, vx, vt) = v.eval(x, t);
            assert!(((v.eval(x + e, t).0 - v.eval(x - e, t).0) / (2.0 * e) - vx).abs() < 1e-4 * (1.0 + vx.abs()));
            assert!(((v.eval(x, t + e).0 - v.eval(x, t - e).0) / (2.0 * e) - vt).abs() < 1e-4 * (1.0 + vt.abs()));
        }
    }
}
