//! Production values against oracle results frozen in `tests/fixtures`
//! (regenerate with `homog --out crates/core/tests/fixtures oracle --run all`).

use std::path::PathBuf;

use homog_core::kernels::{gamma_eps_column, EvalSpec, HeatKernelClosedForm, ResolutionPolicy};
use homog_core::oracle::{self, OracleResult};
use homog_core::{solve_corrector, CellSolveOptions, CoefficientFamily, CoefficientField, SpaceTimeTorusGrid};

fn fixture(id: &str) -> OracleResult {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{id}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

fn field(family: CoefficientFamily) -> CoefficientField {
    CoefficientField::make_builtin(family).unwrap()
}

fn a_hat(f: &CoefficientField, n: usize) -> f64 {
    let grid = SpaceTimeTorusGrid::new(1, n, n).unwrap();
    solve_corrector(f, grid, &CellSolveOptions::default().with_tol(1e-12))
        .unwrap()
        .a_hat
        .scalar()
        .unwrap()
}

#[test]
fn every_registered_oracle_has_a_fixture() {
    for (id, _) in oracle::ORACLES {
        assert_eq!(fixture(id).id, *id);
    }
}

#[test]
fn cheap_oracles_reproduce_their_fixtures() {
    for id in ["harmonic-mean-b0.5", "harmonic-mean-b0.9", "gamma0-separable-b0.5"] {
        let fresh = oracle::run(id).unwrap();
        let frozen = fixture(id);
        for (k, v) in &frozen.values {
            assert!((fresh.value(k).unwrap() - v).abs() <= 1e-14, "{id}/{k}");
        }
    }
}

#[test]
fn separable_a_hat_matches_harmonic_mean() {
    let expected = fixture("harmonic-mean-b0.5").value("a_hat").unwrap();
    assert!((expected - 0.75f64.sqrt()).abs() < 1e-13);
    let got = a_hat(&field(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 }), 64);
    assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    let dense = fixture("cell-separable-b0.5").value("a_hat").unwrap();
    assert!((dense - expected).abs() < 1e-10);
}

#[test]
fn space_time_a_hat_matches_dense_galerkin() {
    let expected = fixture("cell-space-time-b0.5").value("a_hat").unwrap();
    let got = a_hat(&field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 }), 64);
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    // lies strictly between the harmonic and arithmetic means
    assert!(got > 0.75f64.sqrt() && got < 1.0);
}

#[test]
fn gamma0_at_origin_uses_the_certified_a_hat() {
    let f = fixture("gamma0-separable-b0.5");
    let ah = a_hat(&field(CoefficientFamily::SeparableSpace { b: 0.5, d: 1 }), 64);
    let v = HeatKernelClosedForm::from_scalar(ah).unwrap().value(&[0.0], 1.0, &[0.0], 0.0).unwrap();
    assert!((v - f.value("gamma0_at_origin").unwrap()).abs() < 1e-12);
    assert!((v - 0.303_130_581_164_231_97).abs() < 1e-12);
}

#[test]
fn constant_coefficient_column_matches_heat_kernel() {
    let reference = fixture("kernel-constant-eps0.125").value("sup_error").unwrap();
    assert!(reference <= 1e-6);
    let f = field(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None });
    let s = gamma_eps_column(&f, 0.125, (0.0, 0.0), &EvalSpec::new(vec![1.0], -4.0, 4.0), &ResolutionPolicy::default())
        .unwrap();
    let hk = HeatKernelClosedForm::from_scalar(1.0).unwrap();
    let err = s
        .x
        .iter()
        .zip(&s.values)
        .map(|(&x, v)| (v - hk.value(&[x], 1.0, &[0.0], 0.0).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn production_column_sits_within_the_reference_gap() {
    let f = fixture("kernel-gap-eps0.125");
    let field = field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
    let policy = ResolutionPolicy::default();
    let ah = a_hat(&field, 64);
    let s = gamma_eps_column(&field, 0.125, (0.0, 0.0), &EvalSpec::new(vec![1.0], -4.0, 4.0), &policy).unwrap();
    let hk = HeatKernelClosedForm::from_scalar(ah).unwrap();
    let err = s
        .x
        .iter()
        .zip(&s.values)
        .map(|(&x, v)| (v - hk.value(&[x], 1.0, &[0.0], 0.0).unwrap()).abs())
        .fold(0.0, f64::max);
    let frozen = f.value("thm1_error").unwrap();
    assert!((err - frozen).abs() <= 1e-9 * frozen.max(1.0), "{err} vs {frozen}");
    assert!(f.value("relative_gap").unwrap() < 0.01);
    assert!(f.value("richardson_estimate").unwrap() < 0.1 * f.value("gap").unwrap());
}

#[test]
fn mollifier_width_is_a_second_order_effect() {
    let frozen = fixture("kernel-mollifier-eps0.125").value("sup_change").unwrap();
    assert!(frozen < 1e-5, "{frozen}");
    let field = field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
    let change = |pps: usize| {
        let base = ResolutionPolicy {
            points_per_period: pps,
            steps_per_period: 2 * pps,
            ..Default::default()
        };
        let run = |factor: f64| {
            let p = ResolutionPolicy {
                mollifier_factor: factor,
                ..base
            };
            gamma_eps_column(&field, 0.125, (0.0, 0.0), &EvalSpec::new(vec![1.0], -4.0, 4.0), &p).unwrap()
        };
        let (a, b) = (run(2.0), run(1.0));
        a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (change(32), change(64));
    assert!(coarse < 1e-5, "{coarse}");
    assert!(coarse / fine > 3.0, "{coarse} / {fine}");
}

#[test]
fn sampled_holder_estimate_tracks_the_dense_oracle() {
    let dense = fixture("holder-space-time-b0.5").value("tau").unwrap();
    let f = field(CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
    let report = f.regularity_report(&[0.5, 0.25, 0.125], 0.5, 64).unwrap();
    let tau = report.holder_seminorm_estimate;
    assert!((tau - dense).abs() <= 0.1 * dense, "{tau} vs {dense}");
    let (_, declared) = f.declared_holder().unwrap();
    assert!(tau <= declared && dense <= declared);
}
