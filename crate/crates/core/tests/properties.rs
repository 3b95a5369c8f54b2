use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use prandtl_expander::assembly::{mirror_defect, residual_app, symmetric_extend, ExpansionSet, Parity, PARITY_TOL};
use prandtl_expander::harness::{fit_rate, run_pipeline, FitStatus, SweepOptions};
use prandtl_expander::numerics::field::ScalarField2D;
use prandtl_expander::numerics::grid::{DomainTag, Grid1D, Grid2D};
use prandtl_expander::numerics::snapshot::{from_binary, parse_csv, to_binary, to_csv};
use prandtl_expander::prandtl0::solve_porous_medium;
use prandtl_expander::spec::{Profile, ProblemSpec};
use prandtl_expander::Error;

fn benchmark() -> ProblemSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default-benchmark.json");
    ProblemSpec::from_file(&path).unwrap()
}

fn half_grid(nx: usize, ny: usize, ratio: f64) -> Arc<Grid2D> {
    Arc::new(
        Grid2D::new(
            Grid1D::uniform(0.0, 1.0, nx).unwrap(),
            Grid1D::geometric(0.0, 1.0, ny, ratio).unwrap(),
            DomainTag::Half,
        )
        .unwrap(),
    )
}

/// Coarse benchmark expansion at one viscosity, shared across cases.
fn coarse_expansion() -> &'static ExpansionSet {
    static CELL: OnceLock<ExpansionSet> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = benchmark().with_grid_override(33, 65);
        let state = solve_porous_medium(&spec).unwrap();
        let opts = SweepOptions { with_reference: false, ..Default::default() };
        run_pipeline(&spec, &state, 0.02, &opts).unwrap().expansion
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn power_laws_are_fitted_exactly(slope in -1.0f64..2.0, scale in 0.1f64..10.0, n in 3usize..7) {
        let eps: Vec<f64> = (0..n).map(|k| 0.04 / 2f64.powi(k as i32)).collect();
        let vals: Vec<f64> = eps.iter().map(|e| scale * e.powf(slope)).collect();
        let fit = fit_rate("q", &eps, &vals);
        prop_assert_eq!(fit.status, FitStatus::Ok);
        prop_assert!((fit.slope.unwrap() - slope).abs() < 1e-10);
        prop_assert!((fit.intercept.unwrap() - scale.ln()).abs() < 1e-9);
        prop_assert!(fit.r2.unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn extensions_mirror_exactly(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1u32..4, ratio in 1.0f64..1.1) {
        let g = half_grid(9, 17, ratio);
        let even = ScalarField2D::from_fn(g.clone(), |x, y| a * (k as f64 * (1.0 - y)).cos() + b * x).unwrap();
        let ext = symmetric_extend(&even, Parity::Even, PARITY_TOL).unwrap();
        prop_assert_eq!(ext.grid().ny(), 2 * 17 - 1);
        prop_assert_eq!(mirror_defect(&ext, Parity::Even), 0.0);
        let odd = ScalarField2D::from_fn(g, |x, y| a * (1.0 - y) * (1.0 + x) + b * (1.0 - y).powi(3)).unwrap();
        let ext = symmetric_extend(&odd, Parity::Odd, PARITY_TOL).unwrap();
        prop_assert_eq!(mirror_defect(&ext, Parity::Odd), 0.0);
    }

    #[test]
    fn odd_extension_needs_a_zero_midline(c in prop_oneof![-1.0f64..-1e-6, 1e-6f64..1.0]) {
        let f = ScalarField2D::from_fn(half_grid(9, 9, 1.0), |_, y| c + (1.0 - y)).unwrap();
        let is_conflict = matches!(symmetric_extend(&f, Parity::Odd, PARITY_TOL), Err(Error::ParityConflict { .. }));
        prop_assert!(is_conflict);
    }

    #[test]
    fn snapshots_round_trip(seed in any::<u64>(), nx in 8usize..12, ny in 8usize..12) {
        let g = half_grid(nx, ny, 1.03);
        let f = ScalarField2D::from_fn(g, |x, y| ((seed % 1000) as f64 + 1.0) * (x * 7.3 + y * 3.1).sin() / 3.0).unwrap();
        let back = parse_csv(&to_csv(&f), DomainTag::Half).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.grid().y(), f.grid().y());
        let back = from_binary(&to_binary(&f), DomainTag::Half).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn profiles_round_trip_through_json(coeffs in prop::collection::vec(-3.0f64..3.0, 1..6), s in 0.0f64..1.0) {
        let p = Profile::polynomial(coeffs);
        let q = Profile::from_json(&p.to_json(), "p").unwrap();
        prop_assert_eq!(p.eval_all(s), q.eval_all(s));
    }

    #[test]
    fn stretched_grids_are_increasing(n in 8usize..400, stretch in 1.0f64..200.0, len in 0.1f64..10.0) {
        let g = Grid1D::stretched(0.0, len, n, stretch).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g.first(), 0.0);
        prop_assert_eq!(g.last(), len);
        prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        prop_assert!((g.max_step() / g.min_step() - stretch).abs() < 1e-6 * stretch);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn porous_medium_obeys_the_maximum_principle(u_b in 0.4f64..3.0, rate in 0.5f64..2.0) {
        let mut spec = benchmark();
        spec.u_b = u_b;
        spec.ubar0 = Profile::exp_decay(u_b - spec.u_e(), rate);
        let state = solve_porous_medium(&spec).unwrap();
        let (lo, hi) = (u_b.min(spec.u_e()), u_b.max(spec.u_e()));
        prop_assert!(state.min_w() >= lo - 1e-8, "min {}", state.min_w());
        prop_assert!(state.max_w() <= hi + 1e-8, "max {}", state.max_w());
    }

    #[test]
    fn residuals_ignore_the_pressure_level(c in -5.0f64..5.0) {
        let exp = coarse_expansion();
        let base = residual_app(exp).unwrap();
        let mut parts = exp.parts.clone();
        parts.p_p2 = parts.p_p2.map(|p| p + c).unwrap();
        let shifted = residual_app(&ExpansionSet::from_components(exp.eps, parts).unwrap()).unwrap();
        let scale = base.r_u.max_abs().max(1.0);
        prop_assert!(shifted.r_u.sub(&base.r_u).unwrap().max_abs() < 1e-9 * scale);
        prop_assert!(shifted.r_v.sub(&base.r_v).unwrap().max_abs() < 1e-9 * base.r_v.max_abs().max(1.0));
    }
}
