use homog_core::expansion::{smooth, SampledField, SmoothingKernel};
use homog_core::harness::{fit_rate, ParabolicCylinder};
use homog_core::interp::PeriodicInterpolator;
use homog_core::io::{read_grid_function, write_grid_function};
use homog_core::kernels::HeatKernelClosedForm;
use homog_core::{GridFunction, SpaceTimeTorusGrid};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_power_laws(c in 0.01f64..100.0, p in 0.2f64..3.0) {
        let scales: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
        let errs: Vec<f64> = scales.iter().map(|e| c * e.powf(p)).collect();
        let f = fit_rate(&errs, &scales).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-10);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn heat_kernel_is_symmetric_and_positive(a in 0.2f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.05f64..4.0) {
        let k = HeatKernelClosedForm::from_scalar(a).unwrap();
        let g1 = k.value(&[x], t, &[y], 0.0).unwrap();
        let g2 = k.value(&[y], t, &[x], 0.0).unwrap();
        prop_assert!(g1 > 0.0);
        prop_assert!((g1 - g2).abs() <= 1e-15 * g1.max(1e-300));
    }

    #[test]
    fn cylinders_contain_their_centre_line(r in 0.01f64..2.0, x0 in -5.0f64..5.0, t0 in -5.0f64..5.0, f in 0.0f64..0.999) {
        let q = ParabolicCylinder::new(vec![x0], t0, r).unwrap();
        prop_assert!(q.contains(&[x0], t0 - f * r * r));
        prop_assert!(!q.contains(&[x0 + 1.001 * r], t0));
        prop_assert!(!q.contains(&[x0], t0 + 1e-9));
    }

    #[test]
    fn grid_functions_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 64)) {
        let grid = SpaceTimeTorusGrid::new(1, 8, 8).unwrap();
        let f = GridFunction::new(grid, vec![1], values).unwrap();
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &f).unwrap();
        prop_assert_eq!(read_grid_function(&mut buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn interpolation_is_exact_on_nodes(seed in 0u64..1000) {
        let grid = SpaceTimeTorusGrid::new(1, 8, 8).unwrap();
        let g = GridFunction::scalar_from_fn(grid, |y, s| ((seed as f64) * 0.1 + 6.283 * y[0]).sin() * (6.283 * s).cos()).unwrap();
        let ip = PeriodicInterpolator::new(&grid, g.component(0), 2).unwrap();
        for node in 0..grid.node_count() {
            let (y, s) = grid.node_coords(node);
            prop_assert!((ip.eval(&y, s) - g.component(0)[node]).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_preserves_affine_functions(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let eps = 0.25;
        let kern = SmoothingKernel::new(eps).unwrap();
        let (h, k) = (eps / 8.0, eps * eps / 8.0);
        let dk = kern.discrete(h, k).unwrap();
        let (nx, nt) = (2 * dk.px + 5, 2 * dk.pt + 5);
        let f = SampledField::from_fn(0.0, h, nx, 0.0, k, nt, |x, t| a + b * x + c * t);
        let s = smooth(&kern, &f).unwrap();
        for j in 0..s.nt {
            for i in 0..s.nx {
                let (x, t) = (s.x(i), s.t(j));
                prop_assert!((s.at(i, j) - (a + b * x + c * t)).abs() < 1e-10);
            }
        }
    }
}
