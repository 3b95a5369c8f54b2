use std::path::PathBuf;

use prandtl_expander::assembly::layer_sum_residual;
use prandtl_expander::harness::{run_pipeline, run_sweep, FitStatus, SweepOptions};
use prandtl_expander::numerics::quad::l2;
use prandtl_expander::prandtl0::solve_porous_medium;
use prandtl_expander::spec::ProblemSpec;

fn load(name: &str) -> ProblemSpec {
    ProblemSpec::from_file(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

#[test]
fn single_viscosity_has_no_rates() {
    let mut spec = load("default-benchmark.json").with_grid_override(33, 65);
    spec.epsilon_list = vec![0.02];
    let report = run_sweep(&spec, &SweepOptions::default()).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].status, "ok");
    assert!(report.rows[0].errors.is_some());
    assert!(report.fits.iter().all(|f| f.status == FitStatus::InsufficientData));
    assert!(report.fits.iter().all(|f| f.slope.is_none()));
    let c5 = report.criteria.iter().find(|c| c.id == 5).unwrap();
    assert!(!c5.pass);
    assert!(report.rates_csv().contains("residual_app,insufficient_data,,false"));
}

#[test]
fn trivial_chain_reduces_to_the_viscous_shear_correction() {
    let spec = load("trivial-chain.json").with_grid_override(33, 65);
    let report = run_sweep(&spec, &SweepOptions::default()).unwrap();
    let mut errs = Vec::new();
    for row in &report.rows {
        assert_eq!(row.status, "ok");
        assert_eq!(row.corrector_max, Some(0.0));
        let info = row.reference.as_ref().unwrap();
        assert!(info.residual.converged);
        assert_eq!(info.symmetry_defect, 0.0);
        errs.push(row.errors.as_ref().unwrap().err_u_inf);
    }
    // without layers the only deviation is the viscous response of the shear flow, which fades with eps
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(report.criteria.iter().find(|c| c.id == 1).unwrap().pass);
    assert!(report.criteria.iter().find(|c| c.id == 10).unwrap().pass);
}

#[test]
fn layer_bookkeeping_matches_the_direct_residual() {
    let spec = load("default-benchmark.json").with_grid_override(65, 129);
    let state = solve_porous_medium(&spec).unwrap();
    let opts = SweepOptions { with_reference: false, ..Default::default() };
    let mut gaps = Vec::new();
    for eps in [0.04, 0.01] {
        let pipe = run_pipeline(&spec, &state, eps, &opts).unwrap();
        let sum = layer_sum_residual(&spec, &pipe.expansion, &pipe.zero, &pipe.euler, &pipe.first).unwrap();
        let direct = &pipe.residual.r_u;
        gaps.push(l2(&sum.sub(direct).unwrap()) / l2(direct));
        let defects = pipe.expansion.boundary_defects(spec.u_b);
        assert!(defects.iter().all(|d| *d < 1e-10), "{defects:?}");
    }
    // the two evaluations differ only by discretization error
    assert!(gaps.iter().all(|g| *g < 0.1), "{gaps:?}");
}

#[test]
fn report_outputs_have_the_documented_columns() {
    let mut spec = load("default-benchmark.json").with_grid_override(33, 65);
    spec.epsilon_list = vec![0.04, 0.02, 0.01];
    let opts = SweepOptions { with_reference: false, ..Default::default() };
    let report = run_sweep(&spec, &opts).unwrap();
    let errors = report.errors_csv();
    assert!(errors.starts_with("epsilon,quantity,value\n"));
    assert!(errors.lines().skip(1).all(|l| l.split(',').count() == 3));
    let rates = report.rates_csv();
    assert!(rates.starts_with("quantity,slope,r2,pass\n"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json_string().unwrap()).unwrap();
    assert_eq!(json["spec"]["grids"]["nx"], 33);
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    // reference-free sweeps skip the criteria that need it
    assert!(report.criteria.iter().all(|c| c.id < 7 || c.id > 10));
}
