//! Time-periodic cell problem
//! `∂_s χ_j^{·β} − ∂_i(a_{ik} ∂_k χ_j^{·β}) = ∂_i a_{ij}^{·β}` on the unit
//! space-time torus, the homogenized tensor and the flux matrix.
//!
//! The spectral path collocates the whole space-time problem and solves it
//! with GMRES, preconditioned by the constant-coefficient operator
//! `∂_s − ā Δ_y` (diagonal in Fourier space). The finite-difference path
//! iterates the Crank–Nicolson period map of a conservative flux
//! discretization until the period-start slices stop moving.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coefficients::{CoefTensor, CoefficientField};
use crate::error::{HomogError, Result};
use crate::fft::{is_nyquist, wavenumber, NdFft};
use crate::grid::{AxisSet, GridFunction, GridOps, Scheme, SpaceTimeTorusGrid, MEAN_ZERO_TOL};
use crate::linalg::{gmres, GmresOptions};

#[derive(Debug, Clone, Copy)]
pub struct CellSolveOptions {
    pub scheme: Scheme,
    /// Relative residual target (spectral) or period-map increment (fd).
    pub tol: f64,
    pub max_periods: usize,
    pub max_iter: usize,
}

impl CellSolveOptions {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            tol: match scheme {
                Scheme::Spectral => 1e-9,
                Scheme::FiniteDifference => 1e-7,
            },
            max_periods: 200,
            max_iter: 4000,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

impl Default for CellSolveOptions {
    fn default() -> Self {
        Self::new(Scheme::Spectral)
    }
}

/// Constant tensor `â_{ij}^{αβ}` with its checked ellipticity bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedTensor {
    pub a_hat: CoefTensor,
    /// Smallest eigenvalue of the symmetric part of `â`.
    pub mu_check: f64,
}

impl HomogenizedTensor {
    pub fn new(a_hat: CoefTensor) -> Self {
        let mu_check = a_hat.ellipticity();
        Self { a_hat, mu_check }
    }

    pub fn d(&self) -> usize {
        self.a_hat.d()
    }

    pub fn m(&self) -> usize {
        self.a_hat.m()
    }

    /// `â` for scalar one-dimensional problems.
    pub fn scalar(&self) -> Option<f64> {
        (self.d() == 1 && self.m() == 1).then(|| self.a_hat.get(0, 0, 0, 0))
    }
}

/// `b_{ij}^{αβ}` with components `[α, β, i, j]`, `i ∈ 0..=d`; row `i = d`
/// holds `−χ_j^{αβ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxMatrix {
    pub b: GridFunction,
}

#[derive(Debug, Clone)]
pub struct CorrectorSet {
    /// `χ_j^{αβ}`, components `[α, β, j]`.
    pub chi: GridFunction,
    /// `∂χ_j^{αβ}/∂y_k`, components `[α, β, j, k]`.
    pub grad_chi: GridFunction,
    pub a_hat: HomogenizedTensor,
    pub b_flux: FluxMatrix,
    pub solve_residual: f64,
    pub scheme: Scheme,
    pub coefficient: CoefficientField,
}

impl CorrectorSet {
    pub fn grid(&self) -> &SpaceTimeTorusGrid {
        self.chi.grid()
    }
}

/// Samples of every `a_{ik}^{αγ}` at the grid nodes shifted by `shift`
/// (in units of the grid steps, one entry per derivative axis).
fn sample_tensor(field: &CoefficientField, grid: &SpaceTimeTorusGrid, shift: &[f64]) -> Vec<Vec<f64>> {
    let d = grid.d();
    let m = field.m();
    let ncomp = d * d * m * m;
    let nodes = grid.node_count();
    let mut out = vec![vec![0.0; nodes]; ncomp];
    let mut t = CoefTensor::zeros(d, m);
    for node in 0..nodes {
        let (mut y, mut s) = grid.node_coords(node);
        for k in 0..d {
            y[k] += shift[k] * grid.h_space();
        }
        s += shift[d] * grid.h_time();
        field.evaluate_into(&y, s, &mut t);
        for (c, v) in t.data().iter().enumerate() {
            out[c][node] = *v;
        }
    }
    out
}

#[inline]
fn tidx(d: usize, m: usize, i: usize, k: usize, a: usize, b: usize) -> usize {
    ((i * d + k) * m + a) * m + b
}

/// Solve the cell problem for every column `(j, β)`, then assemble `â` and `b`.
pub fn solve_corrector(
    field: &CoefficientField,
    grid: SpaceTimeTorusGrid,
    opts: &CellSolveOptions,
) -> Result<CorrectorSet> {
    if field.d() != grid.d() {
        return Err(HomogError::LatticeMismatch(format!(
            "coefficient has d = {}, grid has d = {}",
            field.d(),
            grid.d()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(HomogError::InvalidParameter("tol must be positive".into()));
    }
    let d = grid.d();
    let m = field.m();
    let nodes = grid.node_count();
    let a_nodes = sample_tensor(field, &grid, &vec![0.0; d + 1]);

    let columns: Vec<(usize, usize)> = (0..d).flat_map(|j| (0..m).map(move |b| (j, b))).collect();
    let solved: Vec<Result<(Vec<Vec<f64>>, f64)>> = match opts.scheme {
        Scheme::Spectral => {
            let solver = SpectralCellSolver::new(grid, m, &a_nodes);
            columns
                .par_iter()
                .map(|&(j, beta)| solver.solve_column(j, beta, opts))
                .collect()
        }
        Scheme::FiniteDifference => {
            let solver = FdCellSolver::new(field, grid);
            columns
                .par_iter()
                .map(|&(j, beta)| solver.solve_column(j, beta, opts))
                .collect()
        }
    };

    // chi components [α, β, j]
    let mut chi_comps = vec![vec![0.0; nodes]; m * m * d];
    let mut residual: f64 = 0.0;
    for (&(j, beta), res) in columns.iter().zip(solved) {
        let (comps, r) = res?;
        residual = residual.max(r);
        for (alpha, mut c) in comps.into_iter().enumerate() {
            let mean = c.iter().sum::<f64>() / nodes as f64;
            c.iter_mut().for_each(|v| *v -= mean);
            chi_comps[(alpha * m + beta) * d + j] = c;
        }
    }
    let chi = GridFunction::from_components(grid, vec![m, m, d], chi_comps)?;
    let ops = GridOps::new(grid, opts.scheme);
    let grad_chi = chi.gradient_with(&ops, AxisSet::Spatial);
    let a_hat = homogenized_tensor_from(&a_nodes, &grad_chi, d, m)?;
    let b_flux = flux_matrix_from(&a_nodes, &chi, &grad_chi, &a_hat)?;
    Ok(CorrectorSet {
        chi,
        grad_chi,
        a_hat,
        b_flux,
        solve_residual: residual,
        scheme: opts.scheme,
        coefficient: field.clone(),
    })
}

/// `â = ⨍ (a + a∇χ)` from a solved corrector set.
pub fn homogenized_tensor(field: &CoefficientField, set: &CorrectorSet) -> Result<HomogenizedTensor> {
    let grid = *set.grid();
    let a_nodes = sample_tensor(field, &grid, &vec![0.0; grid.d() + 1]);
    homogenized_tensor_from(&a_nodes, &set.grad_chi, grid.d(), field.m())
}

/// `b = a + a∇χ − â` with the time row `−χ`.
pub fn flux_matrix(field: &CoefficientField, set: &CorrectorSet, a_hat: &HomogenizedTensor) -> Result<FluxMatrix> {
    let grid = *set.grid();
    let a_nodes = sample_tensor(field, &grid, &vec![0.0; grid.d() + 1]);
    flux_matrix_from(&a_nodes, &set.chi, &set.grad_chi, a_hat)
}

/// Pointwise `a_{ij}^{αβ} + a_{ik}^{αγ} ∂_k χ_j^{γβ}`.
fn effective_flux(a_nodes: &[Vec<f64>], grad_chi: &GridFunction, d: usize, m: usize, i: usize, j: usize, alpha: usize, beta: usize) -> Vec<f64> {
    let mut out = a_nodes[tidx(d, m, i, j, alpha, beta)].clone();
    for k in 0..d {
        for gamma in 0..m {
            let a = &a_nodes[tidx(d, m, i, k, alpha, gamma)];
            let g = grad_chi.at(&[gamma, beta, j, k]);
            for ((o, av), gv) in out.iter_mut().zip(a).zip(g) {
                *o += av * gv;
            }
        }
    }
    out
}

fn homogenized_tensor_from(a_nodes: &[Vec<f64>], grad_chi: &GridFunction, d: usize, m: usize) -> Result<HomogenizedTensor> {
    let mut a_hat = CoefTensor::zeros(d, m);
    for i in 0..d {
        for j in 0..d {
            for alpha in 0..m {
                for beta in 0..m {
                    let flux = effective_flux(a_nodes, grad_chi, d, m, i, j, alpha, beta);
                    a_hat.set(i, j, alpha, beta, flux.iter().sum::<f64>() / flux.len() as f64);
                }
            }
        }
    }
    let out = HomogenizedTensor::new(a_hat);
    if !(out.mu_check > 0.0) {
        return Err(HomogError::EllipticityViolated(format!(
            "homogenized tensor has ellipticity {}",
            out.mu_check
        )));
    }
    Ok(out)
}

fn flux_matrix_from(
    a_nodes: &[Vec<f64>],
    chi: &GridFunction,
    grad_chi: &GridFunction,
    a_hat: &HomogenizedTensor,
) -> Result<FluxMatrix> {
    let grid = *chi.grid();
    let d = grid.d();
    let m = a_hat.m();
    let mut comps = Vec::with_capacity(m * m * (d + 1) * d);
    for alpha in 0..m {
        for beta in 0..m {
            for i in 0..=d {
                for j in 0..d {
                    if i == d {
                        comps.push(chi.at(&[alpha, beta, j]).iter().map(|v| -v).collect());
                    } else {
                        let mut f = effective_flux(a_nodes, grad_chi, d, m, i, j, alpha, beta);
                        let ah = a_hat.a_hat.get(i, j, alpha, beta);
                        f.iter_mut().for_each(|v| *v -= ah);
                        comps.push(f);
                    }
                }
            }
        }
    }
    let b = GridFunction::from_components(grid, vec![m, m, d + 1, d], comps)?;
    let sup = b.max_abs();
    for (c, mean) in b.cell_mean().iter().enumerate() {
        let tol = MEAN_ZERO_TOL * sup;
        if mean.abs() > tol && sup > 0.0 {
            return Err(HomogError::MeanZeroViolation {
                component: c,
                mean: *mean,
                tol,
            });
        }
    }
    Ok(FluxMatrix { b })
}

/// Pseudo-spectral space-time collocation.
struct SpectralCellSolver<'a> {
    grid: SpaceTimeTorusGrid,
    m: usize,
    a_nodes: &'a [Vec<f64>],
    fft: NdFft,
    /// Inverse symbol of `∂_s − ā Δ_y`; zero on the mean mode.
    precond: Vec<Complex64>,
}

impl<'a> SpectralCellSolver<'a> {
    fn new(grid: SpaceTimeTorusGrid, m: usize, a_nodes: &'a [Vec<f64>]) -> Self {
        let d = grid.d();
        let dims = grid.storage_dims();
        let nodes = grid.node_count();
        let mut abar = 0.0;
        for i in 0..d {
            for alpha in 0..m {
                abar += a_nodes[tidx(d, m, i, i, alpha, alpha)].iter().sum::<f64>();
            }
        }
        abar /= (nodes * d * m) as f64;
        let mut precond = vec![Complex64::new(0.0, 0.0); nodes];
        for (flat, p) in precond.iter_mut().enumerate() {
            let mut rest = flat;
            let mut k2 = 0.0;
            for axis in (1..dims.len()).rev() {
                let idx = rest % dims[axis];
                rest /= dims[axis];
                k2 += (2.0 * PI * wavenumber(idx, dims[axis]) as f64).powi(2);
            }
            let ks = if is_nyquist(rest, dims[0]) {
                0.0
            } else {
                2.0 * PI * wavenumber(rest, dims[0]) as f64
            };
            let sym = Complex64::new(abar * k2, ks);
            if sym.norm() > 1e-12 {
                *p = 1.0 / sym;
            }
        }
        Self {
            grid,
            m,
            a_nodes,
            fft: NdFft::new(&dims),
            precond,
        }
    }

    fn apply(&self, ops: &GridOps, v: &[f64], out: &mut [f64]) {
        let d = self.grid.d();
        let m = self.m;
        let nodes = self.grid.node_count();
        let axes: Vec<usize> = (0..=d).collect();
        let grads: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|g| ops.derivatives(&v[g * nodes..(g + 1) * nodes], &axes))
            .collect();
        for alpha in 0..m {
            let o = &mut out[alpha * nodes..(alpha + 1) * nodes];
            o.copy_from_slice(&grads[alpha][d]);
            for i in 0..d {
                let mut flux = vec![0.0; nodes];
                for k in 0..d {
                    for gamma in 0..m {
                        let a = &self.a_nodes[tidx(d, m, i, k, alpha, gamma)];
                        let g = &grads[gamma][k];
                        for ((f, av), gv) in flux.iter_mut().zip(a).zip(g) {
                            *f += av * gv;
                        }
                    }
                }
                let div = ops.derivative(&flux, i);
                for (ov, dv) in o.iter_mut().zip(&div) {
                    *ov -= dv;
                }
            }
        }
    }

    fn precondition(&self, v: &[f64], out: &mut [f64]) {
        let nodes = self.grid.node_count();
        for c in 0..self.m {
            let mut spec = self.fft.forward_real(&v[c * nodes..(c + 1) * nodes]);
            for (s, p) in spec.iter_mut().zip(&self.precond) {
                *s *= p;
            }
            out[c * nodes..(c + 1) * nodes].copy_from_slice(&self.fft.inverse_real(spec));
        }
    }

    fn solve_column(&self, j: usize, beta: usize, opts: &CellSolveOptions) -> Result<(Vec<Vec<f64>>, f64)> {
        let d = self.grid.d();
        let m = self.m;
        let nodes = self.grid.node_count();
        let ops = GridOps::new(self.grid, Scheme::Spectral);
        let mut rhs = vec![0.0; m * nodes];
        for alpha in 0..m {
            for i in 0..d {
                let div = ops.derivative(&self.a_nodes[tidx(d, m, i, j, alpha, beta)], i);
                for (r, v) in rhs[alpha * nodes..(alpha + 1) * nodes].iter_mut().zip(&div) {
                    *r += v;
                }
            }
        }
        let mut x = vec![0.0; m * nodes];
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rhs_norm == 0.0 {
            return Ok((vec![vec![0.0; nodes]; m], 0.0));
        }
        let outcome = gmres(
            |v, o| self.apply(&ops, v, o),
            |v, o| self.precondition(v, o),
            &rhs,
            &mut x,
            GmresOptions {
                restart: 60,
                max_iter: opts.max_iter,
                rel_tol: opts.tol,
                abs_tol: 0.0,
            },
        )?;
        let comps = (0..m).map(|a| x[a * nodes..(a + 1) * nodes].to_vec()).collect();
        Ok((comps, outcome.residual / rhs_norm))
    }
}

/// Conservative finite differences in space, Crank–Nicolson in time.
struct FdCellSolver {
    grid: SpaceTimeTorusGrid,
    m: usize,
    /// `half[n][axis][component]`: coefficients at `y + h/2 e_axis`, time level `n`.
    half: Vec<Vec<Vec<Vec<f64>>>>,
    /// Node coefficients per time level.
    node: Vec<Vec<Vec<f64>>>,
}

impl FdCellSolver {
    fn new(field: &CoefficientField, grid: SpaceTimeTorusGrid) -> Self {
        let d = grid.d();
        let m = field.m();
        let nt = grid.n_time();
        let slice = SpaceTimeTorusGrid::new(d, grid.n_space(), 4).expect("valid slice grid");
        let slice_len = grid.slice_len();
        let mut half = Vec::with_capacity(nt);
        let mut node = Vec::with_capacity(nt);
        for n in 0..nt {
            let s = n as f64 * grid.h_time();
            let at = |shift: &[f64]| -> Vec<Vec<f64>> {
                let mut t = CoefTensor::zeros(d, m);
                let mut out = vec![vec![0.0; slice_len]; d * d * m * m];
                for p in 0..slice_len {
                    let (mut y, _) = slice.node_coords(p);
                    for k in 0..d {
                        y[k] += shift[k] * grid.h_space();
                    }
                    field.evaluate_into(&y, s, &mut t);
                    for (c, v) in t.data().iter().enumerate() {
                        out[c][p] = *v;
                    }
                }
                out
            };
            node.push(at(&vec![0.0; d]));
            half.push(
                (0..d)
                    .map(|axis| {
                        let mut sh = vec![0.0; d];
                        sh[axis] = 0.5;
                        at(&sh)
                    })
                    .collect(),
            );
        }
        Self { grid, m, half, node }
    }

    fn neighbor(&self, p: usize, axis: usize, step: isize) -> usize {
        let n = self.grid.n_space();
        let d = self.grid.d();
        let stride = n.pow((d - 1 - axis) as u32);
        let i = (p / stride) % n;
        let ni = (i as isize + step).rem_euclid(n as isize) as usize;
        p - i * stride + ni * stride
    }

    /// `L_h v` for one time level (all components of one column).
    fn apply_l(&self, level: usize, v: &[f64], out: &mut [f64]) {
        let d = self.grid.d();
        let m = self.m;
        let len = self.grid.slice_len();
        let h = self.grid.h_space();
        let inv_h2 = 1.0 / (h * h);
        let inv_4h2 = 0.25 * inv_h2;
        out.iter_mut().for_each(|o| *o = 0.0);
        for alpha in 0..m {
            for gamma in 0..m {
                let vg = &v[gamma * len..(gamma + 1) * len];
                for i in 0..d {
                    let ah = &self.half[level][i][tidx(d, m, i, i, alpha, gamma)];
                    for p in 0..len {
                        let pp = self.neighbor(p, i, 1);
                        let pm = self.neighbor(p, i, -1);
                        let flux_p = ah[p] * (vg[pp] - vg[p]);
                        let flux_m = ah[pm] * (vg[p] - vg[pm]);
                        out[alpha * len + p] -= (flux_p - flux_m) * inv_h2;
                    }
                    for k in 0..d {
                        if k == i {
                            continue;
                        }
                        let an = &self.node[level][tidx(d, m, i, k, alpha, gamma)];
                        for p in 0..len {
                            let pp = self.neighbor(p, i, 1);
                            let pm = self.neighbor(p, i, -1);
                            let gp = vg[self.neighbor(pp, k, 1)] - vg[self.neighbor(pp, k, -1)];
                            let gm = vg[self.neighbor(pm, k, 1)] - vg[self.neighbor(pm, k, -1)];
                            out[alpha * len + p] -= (an[pp] * gp - an[pm] * gm) * inv_4h2;
                        }
                    }
                }
            }
        }
    }

    /// Discrete `∂_i a_{ij}^{·β}` at one time level.
    fn forcing(&self, level: usize, j: usize, beta: usize) -> Vec<f64> {
        let d = self.grid.d();
        let m = self.m;
        let len = self.grid.slice_len();
        let h = self.grid.h_space();
        let mut out = vec![0.0; m * len];
        for alpha in 0..m {
            for i in 0..d {
                for p in 0..len {
                    let pm = self.neighbor(p, i, -1);
                    out[alpha * len + p] += if i == j {
                        let ah = &self.half[level][i][tidx(d, m, i, j, alpha, beta)];
                        (ah[p] - ah[pm]) / h
                    } else {
                        let an = &self.node[level][tidx(d, m, i, j, alpha, beta)];
                        (an[self.neighbor(p, i, 1)] - an[pm]) / (2.0 * h)
                    };
                }
            }
        }
        out
    }

    fn diag(&self, level: usize) -> Vec<f64> {
        let d = self.grid.d();
        let m = self.m;
        let len = self.grid.slice_len();
        let h2 = self.grid.h_space().powi(2);
        let mut out = vec![0.0; m * len];
        for alpha in 0..m {
            for i in 0..d {
                let ah = &self.half[level][i][tidx(d, m, i, i, alpha, alpha)];
                for p in 0..len {
                    out[alpha * len + p] += (ah[p] + ah[self.neighbor(p, i, -1)]) / h2;
                }
            }
        }
        out
    }

    fn solve_column(&self, j: usize, beta: usize, opts: &CellSolveOptions) -> Result<(Vec<Vec<f64>>, f64)> {
        let nt = self.grid.n_time();
        let len = self.grid.slice_len();
        let m = self.m;
        let k = self.grid.h_time();
        let forcing: Vec<Vec<f64>> = (0..nt).map(|n| self.forcing(n, j, beta)).collect();
        let diags: Vec<Vec<f64>> = (0..nt).map(|n| self.diag(n)).collect();
        let mut u = vec![0.0; m * len];
        let mut slices = vec![vec![0.0; m * len]; nt];
        let mut lu = vec![0.0; m * len];
        let mut rhs = vec![0.0; m * len];
        let mut increment = f64::INFINITY;
        for _period in 0..opts.max_periods {
            let start = u.clone();
            for n in 0..nt {
                slices[n].copy_from_slice(&u);
                let next = (n + 1) % nt;
                self.apply_l(n, &u, &mut lu);
                for q in 0..m * len {
                    rhs[q] = u[q] - 0.5 * k * lu[q] + 0.5 * k * (forcing[n][q] + forcing[next][q]);
                }
                let dg = &diags[next];
                gmres(
                    |v, o| {
                        self.apply_l(next, v, o);
                        for q in 0..o.len() {
                            o[q] = v[q] + 0.5 * k * o[q];
                        }
                    },
                    |v, o| {
                        for q in 0..o.len() {
                            o[q] = v[q] / (1.0 + 0.5 * k * dg[q]);
                        }
                    },
                    &rhs,
                    &mut u,
                    GmresOptions {
                        restart: 40,
                        max_iter: opts.max_iter,
                        rel_tol: 1e-13,
                        abs_tol: 1e-15,
                    },
                )?;
            }
            increment = u
                .iter()
                .zip(&start)
                .fold(0.0f64, |mx, (a, b)| mx.max((a - b).abs()));
            if increment < opts.tol {
                let nodes = self.grid.node_count();
                let mut comps = vec![vec![0.0; nodes]; m];
                for (n, sl) in slices.iter().enumerate() {
                    for alpha in 0..m {
                        comps[alpha][n * len..(n + 1) * len].copy_from_slice(&sl[alpha * len..(alpha + 1) * len]);
                    }
                }
                return Ok((comps, increment));
            }
        }
        Err(HomogError::PeriodicNonConvergence {
            periods: opts.max_periods,
            increment,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientFamily;

    fn field(f: CoefficientFamily) -> CoefficientField {
        CoefficientField::make_builtin(f).unwrap()
    }

    #[test]
    fn constant_coefficient_has_trivial_corrector() {
        let a = field(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None });
        for scheme in [Scheme::Spectral, Scheme::FiniteDifference] {
            let grid = SpaceTimeTorusGrid::new(1, 16, 16).unwrap();
            let set = solve_corrector(&a, grid, &CellSolveOptions::new(scheme)).unwrap();
            assert_eq!(set.chi.max_abs(), 0.0);
            assert_eq!(set.a_hat.scalar(), Some(1.0));
            assert_eq!(set.b_flux.b.max_abs(), 0.0);
        }
    }

    #[test]
    fn separable_family_gives_harmonic_mean() {
        let a = field(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 });
        let grid = SpaceTimeTorusGrid::new(1, 64, 8).unwrap();
        let set = solve_corrector(&a, grid, &CellSolveOptions::default()).unwrap();
        let ahat = set.a_hat.scalar().unwrap();
        assert!((ahat - 0.75f64.sqrt()).abs() < 1e-10, "{ahat}");
        // ∂_y χ = â/a − 1 pointwise
        let g = set.grad_chi.component(0);
        for node in 0..grid.node_count() {
            let (y, s) = grid.node_coords(node);
            let expect = ahat / a.evaluate_scalar(y[0], s) - 1.0;
            assert!((g[node] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn fd_path_agrees_with_spectral_for_space_time_family() {
        let a = field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
        let spec = solve_corrector(&a, SpaceTimeTorusGrid::new(1, 32, 32).unwrap(), &CellSolveOptions::default()).unwrap();
        let fd = solve_corrector(
            &a,
            SpaceTimeTorusGrid::new(1, 64, 128).unwrap(),
            &CellSolveOptions::new(Scheme::FiniteDifference),
        )
        .unwrap();
        let (s, f) = (spec.a_hat.scalar().unwrap(), fd.a_hat.scalar().unwrap());
        assert!((s - f).abs() < 2e-3, "{s} vs {f}");
    }

    #[test]
    fn flux_matrix_rows_are_mean_zero_and_divergence_free() {
        let a = field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
        let grid = SpaceTimeTorusGrid::new(1, 32, 32).unwrap();
        let set = solve_corrector(&a, grid, &CellSolveOptions::default().with_tol(1e-11)).unwrap();
        let b = &set.b_flux.b;
        let sup = b.max_abs();
        assert!(b.cell_mean().iter().all(|m| m.abs() <= 1e-8 * sup));
        let ops = GridOps::new(grid, Scheme::Spectral);
        let div: Vec<f64> = ops
            .derivative(b.at(&[0, 0, 0, 0]), 0)
            .iter()
            .zip(ops.derivative(b.at(&[0, 0, 1, 0]), 1))
            .map(|(a, b)| a + b)
            .collect();
        let rel = div.iter().map(|v| v * v).sum::<f64>().sqrt()
            / b.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel < 1e-9, "{rel}");
    }

    #[test]
    fn homogenized_tensor_is_elliptic_in_two_dimensions() {
        let a = field(CoefficientFamily::NonSymmetric2d { b: 0.4, c: 0.3 });
        let grid = SpaceTimeTorusGrid::new(2, 16, 16).unwrap();
        let set = solve_corrector(&a, grid, &CellSolveOptions::default()).unwrap();
        assert!(set.a_hat.mu_check >= a.declared_mu() * (1.0 - 1e-8));
        // the skew part is untouched by homogenization
        let ah = &set.a_hat.a_hat;
        assert!((ah.get(0, 1, 0, 0) - ah.get(1, 0, 0, 0) - 0.6).abs() < 1e-8);
        let again = homogenized_tensor(&a, &set).unwrap();
        assert_eq!(again, set.a_hat);
        let b = flux_matrix(&a, &set, &set.a_hat).unwrap();
        assert_eq!(b, set.b_flux);
    }

    #[test]
    fn coupled_system_solves() {
        let a = field(CoefficientFamily::CoupledSystem { b: 0.3, c: 0.2 });
        let grid = SpaceTimeTorusGrid::new(1, 16, 16).unwrap();
        let set = solve_corrector(&a, grid, &CellSolveOptions::default()).unwrap();
        assert_eq!(set.chi.shape(), &[2, 2, 1]);
        assert!(set.a_hat.mu_check > 0.0);
    }
}
