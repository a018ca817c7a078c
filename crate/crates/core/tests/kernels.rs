use homog_core::kernels::{
    adjoint_column, gamma_eps_column, gamma_eps_gradients, gamma_eps_pole_derivative, EvalSpec, HeatKernelClosedForm,
    ResolutionPolicy,
};
use homog_core::{CoefficientFamily, CoefficientField, HomogError};

fn space_time() -> CoefficientField {
    CoefficientField::make_builtin(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }).unwrap()
}

#[test]
fn columns_conserve_mass_and_stay_positive() {
    let s = gamma_eps_column(
        &space_time(),
        0.25,
        (0.0, 0.0),
        &EvalSpec::new(vec![0.25, 1.0], -3.0, 3.0),
        &ResolutionPolicy::default(),
    )
    .unwrap();
    for m in &s.mass {
        assert!((m - 1.0).abs() < 1e-12, "{m}");
    }
    assert!(s.values.iter().all(|&v| v > 0.0));
}

#[test]
fn direct_and_adjoint_columns_agree() {
    let f = CoefficientField::make_builtin(CoefficientFamily::TravelingWave { b: 0.5 }).unwrap();
    let eps = 0.25;
    let policy = ResolutionPolicy::default();
    let h = eps / policy.points_per_period as f64;
    let (x0, t0) = (0.0, 1.0);
    let poles = [(0.0, 0.0), (0.5, 0.25), (-0.25, 0.5)];
    let times: Vec<f64> = poles.iter().map(|p| p.1).collect();
    let adj = adjoint_column(&f, eps, (x0, t0), &EvalSpec::new(times, -1.0, 1.0), &policy).unwrap();
    assert!(adj.adjoint);
    for (ti, &(y, s)) in poles.iter().enumerate() {
        let d = gamma_eps_column(&f, eps, (y, s), &EvalSpec::new(vec![t0], x0 - h, x0 + h), &policy).unwrap();
        let direct = d.values[d.nearest(x0)];
        let other = adj.row(ti)[adj.nearest(y)];
        assert!((direct - other).abs() <= 1e-3 * direct, "({y}, {s}): {direct} vs {other}");
    }
}

#[test]
fn gradients_are_half_node_differences() {
    let s = gamma_eps_gradients(
        &space_time(),
        0.25,
        (0.0, 0.0),
        &EvalSpec::new(vec![1.0], -1.0, 1.0),
        &ResolutionPolicy::default(),
    )
    .unwrap();
    let g = s.grad_row(0).unwrap();
    assert_eq!(s.grad_offset, 0.5 * s.h);
    for i in 0..s.n_x() - 1 {
        assert!((g[i] - (s.values[i + 1] - s.values[i]) / s.h).abs() < 1e-12);
    }
}

#[test]
fn pole_derivative_of_constant_coefficient_is_minus_x_derivative() {
    let f = CoefficientField::make_builtin(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None }).unwrap();
    let s = gamma_eps_pole_derivative(
        &f,
        0.25,
        (0.0, 0.0),
        &EvalSpec::new(vec![1.0], -3.0, 3.0),
        &ResolutionPolicy::default(),
    )
    .unwrap();
    let hk = HeatKernelClosedForm::from_scalar(1.0).unwrap();
    for (p, &x) in s.x.iter().enumerate() {
        let j = hk.jet(&[x], 1.0, &[0.0], 0.0).unwrap();
        assert!((s.values[p] + j.grad[0]).abs() < 1e-5, "x = {x}");
    }
}

#[test]
fn time_ordering_and_budget_are_enforced() {
    let f = space_time();
    let spec = EvalSpec::new(vec![0.5], -1.0, 1.0);
    assert!(matches!(
        gamma_eps_column(&f, 0.25, (0.0, 1.0), &spec, &ResolutionPolicy::default()),
        Err(HomogError::TimeOrdering { .. })
    ));
    let tight = ResolutionPolicy {
        max_node_steps: 1000,
        ..Default::default()
    };
    assert!(matches!(
        gamma_eps_column(&f, 0.25, (0.0, 0.0), &spec, &tight),
        Err(HomogError::ResolutionBudgetExceeded { .. })
    ));
}

#[test]
fn time_reversal_metadata_is_an_involution() {
    let s = gamma_eps_column(
        &space_time(),
        0.25,
        (0.0, 0.0),
        &EvalSpec::new(vec![0.5], -1.0, 1.0),
        &ResolutionPolicy::default(),
    )
    .unwrap();
    assert_eq!(s.time_reversed().time_reversed(), s);
}
