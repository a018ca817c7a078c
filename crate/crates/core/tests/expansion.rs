use homog_core::dual::solve_dual_correctors;
use homog_core::expansion::{
    build_expansion, weak_residual, CellFactors, HomogenizedJets, SampledField, SmoothingKernel, TestFunction,
};
use homog_core::kernels::{gamma_eps_column, EvalSpec, HeatKernelClosedForm, ResolutionPolicy};
use homog_core::{solve_corrector, CellSolveOptions, CoefficientFamily, CoefficientField, Scheme, SpaceTimeTorusGrid};

/// Weak residuals `(corrected, printed signs)` at one refinement.
fn residuals(eps: f64, refine: usize) -> (f64, f64) {
    let f = CoefficientField::make_builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }).unwrap();
    let grid = SpaceTimeTorusGrid::new(1, 64, 64).unwrap();
    let set = solve_corrector(&f, grid, &CellSolveOptions::default().with_tol(1e-12)).unwrap();
    let dual = solve_dual_correctors(&set.b_flux, Scheme::Spectral).unwrap();
    let pol = ResolutionPolicy::default().refined(refine);
    let cell = CellFactors::new(&set, &dual, refine).unwrap();
    let hk = HeatKernelClosedForm::from_scalar(cell.a_hat()).unwrap();
    let (xl, xh, tl, th) = (-1.0, 1.0, 0.75, 1.0);
    let h = eps / pol.points_per_period as f64;
    let k = eps * eps / pol.steps_per_period as f64;
    let nx = ((xh - xl) / h).round() as usize + 1;
    let nt = ((th - tl) / k).round() as usize + 1;
    let kern = SmoothingKernel::new(eps).unwrap();
    let dk = kern.discrete(h, k).unwrap();
    let jets = HomogenizedJets::from_kernel(
        &hk,
        (0.0, 0.0),
        xl - dk.px as f64 * h,
        h,
        nx + 2 * dk.px,
        tl - dk.pt as f64 * k,
        k,
        nt + 2 * dk.pt,
    )
    .unwrap();
    let times: Vec<f64> = (0..nt).map(|j| tl + j as f64 * k).collect();
    let col = gamma_eps_column(&f, eps, (0.0, 0.0), &EvalSpec::new(times, xl, xh), &pol).unwrap();
    let u = SampledField::new(col.x[0], h, col.n_x(), tl, k, nt, col.values).unwrap();
    let ex = build_expansion(&u, &jets, &cell, &kern).unwrap();
    let tests = TestFunction::family(xl, xh, tl, th, eps);
    let r = weak_residual(&ex.w_eps, &ex.f_eps, &f, eps, &tests).unwrap();
    let t = &ex.forcing.terms;
    let printed = SampledField {
        values: (0..ex.f_eps.values.len())
            .map(|i| t[0].values[i] + t[1].values[i] + t[2].values[i] + t[3].values[i] - t[4].values[i] - t[5].values[i])
            .collect(),
        ..ex.f_eps.clone()
    };
    let rp = weak_residual(&ex.w_eps, &printed, &f, eps, &tests).unwrap();
    (r.max, rp.max)
}

#[test]
fn corrected_forcing_makes_the_weak_residual_refine() {
    let (c1, p1) = residuals(0.25, 1);
    let (c2, p2) = residuals(0.25, 2);
    assert!(c1 / c2 >= 3.0, "{c1} -> {c2}");
    // with the flux of the ψ part subtracted the residual stays O(1) in h
    assert!(p1 / p2 < 1.5, "{p1} -> {p2}");
    assert!(p2 > 5.0 * c2);
}
