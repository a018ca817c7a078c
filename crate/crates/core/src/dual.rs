//! Dual (flux) correctors: `Δ_{d+1} f_{ij} = b_{ij}` and
//! `φ_{kij} = ∂_k f_{ij} − ∂_i f_{kj}`, so that `∂_k φ_{kij} = b_{ij}` and
//! `φ_{kij} = −φ_{ikj}`.

use rayon::prelude::*;

use crate::cell::FluxMatrix;
use crate::error::{HomogError, Result};
use crate::grid::{AxisSet, GridFunction, GridOps, Scheme};

#[derive(Debug, Clone)]
pub struct DualCorrectorSet {
    /// `f_{ij}^{αβ}`, components `[α, β, i, j]`, `i ∈ 0..=d`.
    pub f_pot: GridFunction,
    /// `φ_{kij}^{αβ}`, components `[α, β, k, i, j]`.
    pub phi: GridFunction,
    /// `∂φ_{(d+1)ij}^{αβ}/∂y_l`, components `[α, β, i, j, l]`.
    pub grad_phi_spatial: GridFunction,
    /// Largest `|∇_{y,s} Σ_i ∂_i f_{ij}|` relative to `‖b‖_∞`.
    pub harmonic_defect: f64,
    pub scheme: Scheme,
}

impl DualCorrectorSet {
    pub fn phi_sup(&self) -> f64 {
        self.phi.max_abs()
    }
}

/// Separate residuals of the two algebraic identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxIdentityResidual {
    /// `‖Σ_k ∂_k φ_{kij} − b_{ij}‖₂ / ‖b‖₂` (0 when `b ≡ 0`).
    pub flux: f64,
    /// `max |φ_{kij} + φ_{ikj}|`.
    pub antisymmetry: f64,
}

pub fn default_harmonic_tol(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Spectral => 1e-6,
        Scheme::FiniteDifference => 1e-2,
    }
}

pub fn solve_dual_correctors(b: &FluxMatrix, scheme: Scheme) -> Result<DualCorrectorSet> {
    solve_dual_correctors_with_tol(b, scheme, default_harmonic_tol(scheme))
}

pub fn solve_dual_correctors_with_tol(b: &FluxMatrix, scheme: Scheme, harmonic_tol: f64) -> Result<DualCorrectorSet> {
    let b = &b.b;
    let grid = *b.grid();
    let shape = b.shape().to_vec();
    let (m, d) = (shape[0], shape[3]);
    if shape.len() != 4 || shape[1] != m || shape[2] != d + 1 {
        return Err(HomogError::InvalidGridFunction(format!(
            "flux matrix shape {shape:?} is not [m, m, d+1, d]"
        )));
    }
    let ops = GridOps::new(grid, scheme);
    let b_sup = b.max_abs();
    let f_comps: Vec<Vec<f64>> = (0..b.n_components())
        .into_par_iter()
        .map(|c| {
            ops.poisson_invert_scaled(b.component(c), b_sup).map_err(|e| match e {
                HomogError::MeanZeroViolation { mean, tol, .. } => HomogError::MeanZeroViolation {
                    component: c,
                    mean,
                    tol,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let f_pot = GridFunction::from_components(grid, shape.clone(), f_comps)?;

    // derivatives ∂_k f_{ij} for every axis k
    let axes: Vec<usize> = (0..=d).collect();
    let df: Vec<Vec<Vec<f64>>> = (0..f_pot.n_components())
        .into_par_iter()
        .map(|c| ops.derivatives(f_pot.component(c), &axes))
        .collect();
    let fidx = |alpha: usize, beta: usize, i: usize, j: usize| ((alpha * m + beta) * (d + 1) + i) * d + j;

    // harmonicity of g_j = Σ_i ∂_i f_{ij}: its gradient must vanish
    let bsup = b.max_abs();
    let mut defect: f64 = 0.0;
    for alpha in 0..m {
        for beta in 0..m {
            for j in 0..d {
                let mut g = vec![0.0; grid.node_count()];
                for i in 0..=d {
                    for (gv, v) in g.iter_mut().zip(&df[fidx(alpha, beta, i, j)][i]) {
                        *gv += v;
                    }
                }
                for grad in ops.derivatives(&g, &axes) {
                    defect = defect.max(grad.iter().fold(0.0f64, |mx, v| mx.max(v.abs())));
                }
            }
        }
    }
    let defect = if bsup > 0.0 { defect / bsup } else { defect };
    if defect > harmonic_tol {
        return Err(HomogError::DualIdentityViolated(format!(
            "gradient of Σ_i ∂_i f_ij is {defect:.3e} relative to ‖b‖∞ (tolerance {harmonic_tol:.1e})"
        )));
    }

    let nodes = grid.node_count();
    let mut phi_comps = Vec::with_capacity(m * m * (d + 1) * (d + 1) * d);
    for alpha in 0..m {
        for beta in 0..m {
            for k in 0..=d {
                for i in 0..=d {
                    for j in 0..d {
                        if k == i {
                            phi_comps.push(vec![0.0; nodes]);
                            continue;
                        }
                        let a = &df[fidx(alpha, beta, i, j)][k];
                        let c = &df[fidx(alpha, beta, k, j)][i];
                        phi_comps.push(a.iter().zip(c).map(|(x, y)| x - y).collect());
                    }
                }
            }
        }
    }
    let phi = GridFunction::from_components(grid, vec![m, m, d + 1, d + 1, d], phi_comps)?;

    let mut rows = Vec::with_capacity(m * m * (d + 1) * d);
    for alpha in 0..m {
        for beta in 0..m {
            for i in 0..=d {
                for j in 0..d {
                    rows.push(phi.at(&[alpha, beta, d, i, j]).to_vec());
                }
            }
        }
    }
    let time_rows = GridFunction::from_components(grid, vec![m, m, d + 1, d], rows)?;
    let grad_phi_spatial = time_rows.gradient_with(&ops, AxisSet::Spatial);

    Ok(DualCorrectorSet {
        f_pot,
        phi,
        grad_phi_spatial,
        harmonic_defect: defect,
        scheme,
    })
}

/// Residuals of `b_{ij} = ∂_k φ_{kij}` and of antisymmetry.
pub fn flux_identity_residual(set: &DualCorrectorSet, b: &FluxMatrix) -> Result<FluxIdentityResidual> {
    let b = &b.b;
    let grid = *b.grid();
    if grid != *set.phi.grid() {
        return Err(HomogError::LatticeMismatch("dual correctors and flux matrix differ in grid".into()));
    }
    let shape = b.shape();
    let (m, d) = (shape[0], shape[3]);
    let ops = GridOps::new(grid, set.scheme);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut anti: f64 = 0.0;
    for alpha in 0..m {
        for beta in 0..m {
            for i in 0..=d {
                for j in 0..d {
                    let mut div = vec![0.0; grid.node_count()];
                    for k in 0..=d {
                        let phi_kij = set.phi.at(&[alpha, beta, k, i, j]);
                        for (dv, v) in div.iter_mut().zip(ops.derivative(phi_kij, k)) {
                            *dv += v;
                        }
                        let phi_ikj = set.phi.at(&[alpha, beta, i, k, j]);
                        for (p, q) in phi_kij.iter().zip(phi_ikj) {
                            anti = anti.max((p + q).abs());
                        }
                    }
                    let bij = b.at(&[alpha, beta, i, j]);
                    for (dv, bv) in div.iter().zip(bij) {
                        num += (dv - bv).powi(2);
                        den += bv * bv;
                    }
                }
            }
        }
    }
    let flux = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(FluxIdentityResidual {
        flux,
        antisymmetry: anti,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::cell::{solve_corrector, CellSolveOptions};
    use crate::coefficients::{CoefficientFamily, CoefficientField};
    use crate::grid::SpaceTimeTorusGrid;

    const TAU: f64 = 2.0 * PI;

    #[test]
    fn manufactured_single_mode() {
        let grid = SpaceTimeTorusGrid::new(1, 32, 32).unwrap();
        let mode = GridFunction::scalar_from_fn(grid, |y, _| (TAU * y[0]).sin()).unwrap();
        let zero = vec![0.0; grid.node_count()];
        // a time-row mode is divergence free, as every genuine flux matrix is
        let b = GridFunction::from_components(grid, vec![1, 1, 2, 1], vec![zero, mode.values().to_vec()]).unwrap();
        let flux = FluxMatrix { b };
        let set = solve_dual_correctors(&flux, Scheme::Spectral).unwrap();
        for (node, f) in set.f_pot.component(1).iter().enumerate() {
            let (y, _) = grid.node_coords(node);
            assert!((f + (TAU * y[0]).sin() / (TAU * TAU)).abs() < 1e-15);
        }
        let r = flux_identity_residual(&set, &flux).unwrap();
        assert!(r.flux < 1e-13, "{r:?}");
        assert_eq!(r.antisymmetry, 0.0);
    }

    #[test]
    fn rejects_flux_that_is_not_divergence_free() {
        let grid = SpaceTimeTorusGrid::new(1, 16, 16).unwrap();
        let mode = GridFunction::scalar_from_fn(grid, |y, _| (TAU * y[0]).sin()).unwrap();
        let b = GridFunction::from_components(grid, vec![1, 1, 2, 1], vec![mode.into_values(), vec![0.0; 256]]).unwrap();
        assert!(matches!(
            solve_dual_correctors(&FluxMatrix { b }, Scheme::Spectral),
            Err(HomogError::DualIdentityViolated(_))
        ));
    }

    #[test]
    fn constant_coefficient_gives_zero_dual() {
        let a = CoefficientField::make_builtin(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None }).unwrap();
        let set = solve_corrector(&a, SpaceTimeTorusGrid::new(1, 16, 16).unwrap(), &CellSolveOptions::default()).unwrap();
        let dual = solve_dual_correctors(&set.b_flux, Scheme::Spectral).unwrap();
        assert_eq!(dual.phi_sup(), 0.0);
        let r = flux_identity_residual(&dual, &set.b_flux).unwrap();
        assert_eq!(r.flux, 0.0);
    }

    #[test]
    fn space_time_family_satisfies_identities() {
        let a = CoefficientField::make_builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }).unwrap();
        let set = solve_corrector(&a, SpaceTimeTorusGrid::new(1, 32, 32).unwrap(), &CellSolveOptions::default()).unwrap();
        let dual = solve_dual_correctors(&set.b_flux, Scheme::Spectral).unwrap();
        let r = flux_identity_residual(&dual, &set.b_flux).unwrap();
        assert!(r.flux <= 1e-8, "{r:?}");
        assert_eq!(r.antisymmetry, 0.0);
        assert!(dual.phi_sup().is_finite() && dual.phi_sup() > 0.0);
    }

    #[test]
    fn time_independent_family_has_round_off_row() {
        // b_11 vanishes identically here; its round-off mean must not trip the check
        let a = CoefficientField::make_builtin(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 }).unwrap();
        let set = solve_corrector(&a, SpaceTimeTorusGrid::new(1, 64, 64).unwrap(), &CellSolveOptions::default().with_tol(1e-12)).unwrap();
        let dual = solve_dual_correctors(&set.b_flux, Scheme::Spectral).unwrap();
        let r = flux_identity_residual(&dual, &set.b_flux).unwrap();
        assert!(r.flux < 1e-10, "{r:?}");
    }

    #[test]
    fn rejects_flux_with_mean() {
        let grid = SpaceTimeTorusGrid::new(1, 8, 8).unwrap();
        let b = GridFunction::from_components(grid, vec![1, 1, 2, 1], vec![vec![1.0; 64], vec![0.0; 64]]).unwrap();
        assert!(matches!(
            solve_dual_correctors(&FluxMatrix { b }, Scheme::Spectral),
            Err(HomogError::MeanZeroViolation { component: 0, .. })
        ));
    }
}
