use homog_core::harness::{fit_rate, run_experiment, write_report, ExperimentConfig, ExperimentId};
use homog_core::{CoefficientFamily, HomogError};

fn smoothing_config() -> ExperimentConfig {
    ExperimentConfig {
        region: Some([0.0, 0.5, 0.0, 0.125]),
        ..ExperimentConfig::new(ExperimentId::Smoothing)
    }
}

#[test]
fn reports_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let fa = write_report(&run_experiment(&smoothing_config()).unwrap(), &a).unwrap();
    let fb = write_report(&run_experiment(&smoothing_config()).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&fa.csv).unwrap(), std::fs::read(&fb.csv).unwrap());
    assert_eq!(std::fs::read(&fa.points_csv).unwrap(), std::fs::read(&fb.points_csv).unwrap());
    let csv = std::fs::read_to_string(&fa.csv).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# homog "));
    assert!(lines.next().unwrap().starts_with("eps,sup_error,weighted_error,floor_flag"));
    assert_eq!(lines.count(), 3);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fa.json).unwrap()).unwrap();
    assert_eq!(json["experiment"], "smoothing");
    assert!(json["fit"]["slope"].as_f64().is_some());
}

#[test]
fn tilted_smoothing_is_first_order_and_the_even_kernel_second() {
    let r = run_experiment(&smoothing_config()).unwrap();
    let slope = r.fit.unwrap().slope;
    assert!((0.9..=1.1).contains(&slope), "{slope}");
    let even = r.diagnostics["even_kernel_slope"];
    assert!((1.8..=2.2).contains(&even), "{even}");
    assert!(r.pass);
}

#[test]
fn constant_coefficient_thm1_sits_at_the_floor() {
    let cfg = ExperimentConfig {
        coefficient: Some(CoefficientFamily::Constant { d: 1, a: 1.0, matrix: None }),
        eps: vec![0.5, 0.25, 0.125],
        ..ExperimentConfig::new(ExperimentId::Thm1)
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.floor_flag));
    assert_eq!(r.fit_note.as_deref(), Some("degenerate: errors at floor"));
    assert!(r.fit.is_none());
    assert!(r.rows.iter().all(|row| row.sup_error <= 1e-4));
}

#[test]
fn fit_errors_surface_before_any_output() {
    assert!(matches!(
        fit_rate(&[0.1, 0.05], &[0.25, 0.125]),
        Err(HomogError::InsufficientPoints { needed: 3, got: 2 })
    ));
    let bad = ExperimentConfig {
        eps: vec![0.25, -0.125],
        ..ExperimentConfig::new(ExperimentId::Thm1)
    };
    assert!(matches!(run_experiment(&bad), Err(HomogError::NonPositive { index: 1, .. })));
}

#[test]
fn systems_are_rejected_by_the_rate_harness() {
    let cfg = ExperimentConfig {
        coefficient: Some(CoefficientFamily::CoupledSystem { b: 0.5, c: 0.2 }),
        ..ExperimentConfig::new(ExperimentId::Tail)
    };
    assert!(matches!(run_experiment(&cfg), Err(HomogError::Unsupported(_))));
}
