use homog_core::dual::solve_dual_correctors;
use homog_core::io::{load_grid_function, load_kernel_sample, save_grid_function, save_kernel_sample, CorrectorBundle};
use homog_core::kernels::{gamma_eps_gradients, EvalSpec, ResolutionPolicy};
use homog_core::{solve_corrector, CellSolveOptions, CoefficientFamily, CoefficientField, HomogError, Scheme, SpaceTimeTorusGrid};

fn space_time() -> CoefficientField {
    CoefficientField::make_builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }).unwrap()
}

#[test]
fn corrector_bundle_round_trips_through_a_file() {
    let f = space_time();
    let set = solve_corrector(&f, SpaceTimeTorusGrid::new(1, 16, 16).unwrap(), &CellSolveOptions::default()).unwrap();
    let duals = solve_dual_correctors(&set.b_flux, Scheme::Spectral).unwrap();
    let bundle = CorrectorBundle {
        correctors: set,
        duals: Some(duals),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.hgb");
    bundle.save(&path).unwrap();
    let back = CorrectorBundle::load(&path).unwrap();
    assert_eq!(back.meta(), bundle.meta());
    assert_eq!(back.correctors.chi, bundle.correctors.chi);
    assert_eq!(back.correctors.b_flux.b, bundle.correctors.b_flux.b);
    let (a, b) = (back.duals.unwrap(), bundle.duals.unwrap());
    assert_eq!(a.phi, b.phi);
    assert_eq!(a.grad_phi_spatial, b.grad_phi_spatial);

    save_grid_function(&dir.path().join("chi.hgf"), &bundle.correctors.chi).unwrap();
    assert!(matches!(
        CorrectorBundle::load(&dir.path().join("chi.hgf")),
        Err(HomogError::Format(_))
    ));
    assert_eq!(load_grid_function(&dir.path().join("chi.hgf")).unwrap(), bundle.correctors.chi);
}

#[test]
fn kernel_samples_round_trip() {
    let s = gamma_eps_gradients(
        &space_time(),
        0.25,
        (0.0, 0.0),
        &EvalSpec::new(vec![0.5, 1.0], -1.0, 1.0),
        &ResolutionPolicy::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("k");
    let (csv, meta) = save_kernel_sample(&stem, &s).unwrap();
    assert!(csv.exists() && meta.exists());
    let back = load_kernel_sample(&stem).unwrap();
    assert_eq!(back.x.len(), s.x.len());
    assert_eq!(back.times, s.times);
    for (a, b) in back.values.iter().zip(&s.values) {
        assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
    }
    assert!(back.grad.is_some());
}
