//! Viscosity sweeps: per-viscosity pipeline, error norms against the reference solve,
//! log-log rate fits and the pass/fail report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::assembly::{
    assemble, mirror_defect, residual_app, symmetric_extend, AppResidual, ExpansionSet, Parity, ResidualNorms,
    PARITY_TOL,
};
use crate::error::{Error, Result};
use crate::euler1::{
    build_boundary_lift, coercivity_constant, euler_grid, euler_residuals, solve_euler_one, EulerOne,
    OuterResidualNorms, COERCIVITY_PROBES, COERCIVITY_SEED,
};
use crate::numerics::diff::{apply_diff, DiffOp};
use crate::numerics::field::ScalarField2D;
use crate::numerics::quad::{l2, lp};
use crate::prandtl0::{cutoff_to_strip, solve_porous_medium, PrandtlZero, VonMisesState, ZerothNorms};
use crate::prandtl1::{
    layer_coercivity, layer_stations, solve_prandtl_one, CommutatorSign, FirstOrderNorms, PrandtlOne,
    COERCIVITY_PROBES_LAYER, COERCIVITY_SEED_LAYER,
};
use crate::reference_ns::{ns_residual, solve_steady_ns, NewtonOptions, NsProblem, NsResidualReport, NsSolution};
use crate::spec::ProblemSpec;

/// Slack-adjusted rate thresholds of the acceptance suite.
pub mod thresholds {
    pub const RESIDUAL_SLOPE: f64 = 0.6;
    pub const RESIDUAL_R2: f64 = 0.95;
    pub const R_U1_SLOPE: f64 = 0.2;
    pub const E0_SLOPE: f64 = 0.6;
    pub const R_P_U1_SLOPE: f64 = 0.2;
    pub const P_P2_X_SLOPE: f64 = -0.35;
    pub const ERR_U_SLOPE: f64 = 0.45;
    pub const ERR_V_SLOPE: f64 = 0.5;
    pub const ERR_U_L2_SLOPE: f64 = 0.2;
    pub const REMAINDER_SLOPE: f64 = -0.05;
    pub const MAX_PRINCIPLE_SLACK: f64 = 1e-8;
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker threads for the per-viscosity pipelines; 0 means one per viscosity, capped at the core count.
    pub jobs: usize,
    pub seed: Option<u64>,
    pub sign: CommutatorSign,
    pub p_list: Vec<f64>,
    pub newton: NewtonOptions,
    /// Skip the reference solve (layer and residual quantities only).
    pub with_reference: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            seed: None,
            sign: CommutatorSign::Minus,
            p_list: vec![2.0],
            newton: NewtonOptions::default(),
            with_reference: true,
        }
    }
}

/// Everything computed for one viscosity.
pub struct EpsPipeline {
    pub eps: f64,
    pub zero: PrandtlZero,
    pub euler: EulerOne,
    pub outer_norms: OuterResidualNorms,
    pub first: PrandtlOne,
    pub expansion: ExpansionSet,
    pub residual: AppResidual,
    pub reference: Option<(NsProblem, NsSolution)>,
}

/// Layers, assembly and (optionally) the reference solve for one viscosity.
pub fn run_pipeline(
    spec: &ProblemSpec,
    state: &VonMisesState,
    eps: f64,
    opts: &SweepOptions,
) -> Result<EpsPipeline> {
    let zero = cutoff_to_strip(spec, state, eps)?;
    let wall: Vec<f64> = (0..zero.strip.nx()).map(|i| zero.v_p0.at(i, 0)).collect();
    let grid = euler_grid(spec)?;
    let lift = build_boundary_lift(spec, &grid, &wall)?;
    let euler = solve_euler_one(spec, &lift, eps)?;
    let outer_norms = euler_residuals(spec, &euler, &zero)?.norms;
    let first = solve_prandtl_one(spec, &zero, &euler, opts.sign)?;
    let expansion = assemble(spec, &zero, &euler, &first)?;
    let residual = residual_app(&expansion)?;
    let reference = if opts.with_reference { Some(solve_steady_ns(spec, &expansion, &opts.newton)?) } else { None };
    Ok(EpsPipeline { eps, zero, euler, outer_norms, first, expansion, residual, reference })
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderNorms {
    pub grad_u: f64,
    pub grad_v: f64,
    pub u_inf: f64,
    /// `sqrt(eps) |v|_inf`.
    pub v_inf_scaled: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub err_u_inf: f64,
    pub err_v_inf: f64,
    /// `|U - u_e0|_p` on the physical half channel, keyed by `p`.
    pub err_u_lp: BTreeMap<String, f64>,
    /// The same on the full channel (mirror image included).
    pub err_u_lp_full: BTreeMap<String, f64>,
    pub remainder: RemainderNorms,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub newton_iters: usize,
    pub continuation_steps: usize,
    pub final_residual: f64,
    pub divergence_max: f64,
    pub residual: NsResidualReport,
    /// Mirror defect of the even/odd extension of `(U, V, P)`.
    pub symmetry_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    pub status: String,
    pub zeroth: Option<ZerothNorms>,
    pub outer: Option<OuterResidualNorms>,
    pub first: Option<FirstOrderNorms>,
    pub residual: Option<ResidualNorms>,
    pub boundary_defects: Option<[f64; 3]>,
    pub corrector_max: Option<f64>,
    pub alpha_layer: Option<f64>,
    pub reference: Option<ReferenceInfo>,
    pub errors: Option<ErrorRow>,
}

fn lp_key(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// Error norms of a reference solution against the expansion components.
pub fn compute_errors(spec: &ProblemSpec, sol: &NsSolution, exp: &ExpansionSet, p_list: &[f64]) -> Result<ErrorRow> {
    let eps = exp.eps;
    let se = eps.sqrt();
    if !sol.u.grid().same_nodes(&exp.grid) {
        return Err(Error::GridMismatch("reference and expansion grids differ".into()));
    }
    let parts = &exp.parts;
    let lead_u = parts.shear.add(&parts.u_p0)?.axpy(se, &parts.u_e1)?;
    let err_u_inf = sol.u.sub(&lead_u)?.max_abs();
    // physical V = sqrt(eps) V^eps
    let err_v_inf = se * sol.v.sub(&parts.v_p0.add(&parts.v_e1)?)?.max_abs();
    let outer_dev = sol.u.sub(&parts.shear)?;
    let mut err_u_lp = BTreeMap::new();
    let mut err_u_lp_full = BTreeMap::new();
    for &p in p_list {
        // dY = sqrt(eps) dy on the physical domain
        let half = if p.is_infinite() { outer_dev.max_abs() } else { eps.powf(0.5 / p) * lp(&outer_dev, p) };
        let full = if p.is_infinite() { half } else { 2f64.powf(1.0 / p) * half };
        err_u_lp.insert(lp_key(p), half);
        err_u_lp_full.insert(lp_key(p), full);
    }
    let scale = eps.powf(-spec.gamma - 0.5);
    let ru = sol.u.sub(&exp.u_app)?.scale(scale);
    let rv = sol.v.sub(&exp.v_app)?.scale(scale);
    let grad = |f: &ScalarField2D| -> Result<f64> {
        let fx = l2(&apply_diff(f, DiffOp::Dx)?);
        let fy = l2(&apply_diff(f, DiffOp::Dy)?);
        Ok((fy * fy + eps * fx * fx).sqrt())
    };
    let grad_u = grad(&ru)?;
    let grad_v = grad(&rv)?;
    let u_inf = ru.max_abs();
    let v_inf_scaled = se * rv.max_abs();
    Ok(ErrorRow {
        err_u_inf,
        err_v_inf,
        err_u_lp,
        err_u_lp_full,
        remainder: RemainderNorms { grad_u, grad_v, u_inf, v_inf_scaled, total: grad_u + grad_v + u_inf + v_inf_scaled },
    })
}

/// Mirror defect of the extended reference solution.
pub fn reference_symmetry_defect(sol: &NsSolution) -> Result<f64> {
    let mut worst = 0.0f64;
    for (f, parity) in [(&sol.u, Parity::Even), (&sol.v, Parity::Odd), (&sol.p, Parity::Even)] {
        let ext = symmetric_extend(f, parity, PARITY_TOL)?;
        worst = worst.max(mirror_defect(&ext, parity));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    /// Some value is exactly zero: exact convergence, passes trivially.
    ExactZero,
    InsufficientData,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub quantity: String,
    pub status: FitStatus,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// 95% interval of the slope from the t distribution with n - 2 degrees of freedom.
    pub slope_ci95: Option<[f64; 2]>,
    pub n: usize,
}

/// Least-squares line through `(ln eps, ln value)`.
pub fn fit_rate(quantity: &str, eps: &[f64], values: &[f64]) -> RateFit {
    let n = eps.len().min(values.len());
    let mut fit =
        RateFit { quantity: quantity.into(), status: FitStatus::Ok, slope: None, intercept: None, r2: None, slope_ci95: None, n };
    if n < 3 {
        fit.status = FitStatus::InsufficientData;
        return fit;
    }
    if values[..n].iter().any(|v| *v == 0.0) {
        fit.status = FitStatus::ExactZero;
        return fit;
    }
    let xs: Vec<f64> = eps[..n].iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values[..n].iter().map(|v| v.abs().ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let se_slope = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN);
    fit.slope = Some(slope);
    fit.intercept = Some(intercept);
    fit.r2 = Some(r2);
    fit.slope_ci95 = Some([slope - t * se_slope, slope + t * se_slope]);
    fit
}

impl RateFit {
    /// Slope at least `min` (exact-zero fits pass).
    pub fn slope_at_least(&self, min: f64) -> bool {
        match self.status {
            FitStatus::ExactZero => true,
            FitStatus::InsufficientData => false,
            FitStatus::Ok => self.slope.is_some_and(|s| s >= min),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub spec: Value,
    pub options: Value,
    pub max_principle: [f64; 2],
    pub alpha_outer: f64,
    pub rows: Vec<EpsRow>,
    pub fits: Vec<RateFit>,
    pub criteria: Vec<CriterionResult>,
    pub flags: Vec<String>,
    pub all_pass: bool,
}

fn row_from(spec: &ProblemSpec, pipe: &EpsPipeline, opts: &SweepOptions) -> Result<EpsRow> {
    let seed = opts.seed.unwrap_or(COERCIVITY_SEED_LAYER);
    let stations = layer_stations(&pipe.zero.fine, spec.u_e(), spec.grids.march_refine);
    let alpha_layer = layer_coercivity(pipe.zero.fine.grid.y(), &stations, COERCIVITY_PROBES_LAYER, seed);
    let (reference, errors) = match &pipe.reference {
        Some((problem, sol)) => {
            let info = ReferenceInfo {
                newton_iters: sol.newton_iters,
                continuation_steps: sol.continuation_steps,
                final_residual: sol.final_residual,
                divergence_max: sol.divergence_max,
                residual: ns_residual(problem, sol)?,
                symmetry_defect: reference_symmetry_defect(sol)?,
            };
            (Some(info), Some(compute_errors(spec, sol, &pipe.expansion, &opts.p_list)?))
        }
        None => (None, None),
    };
    Ok(EpsRow {
        eps: pipe.eps,
        status: "ok".into(),
        zeroth: Some(pipe.zero.norms()),
        outer: Some(pipe.outer_norms.clone()),
        first: Some(pipe.first.norms.clone()),
        residual: Some(pipe.residual.norms),
        boundary_defects: Some(pipe.expansion.boundary_defects(spec.u_b)),
        corrector_max: Some(pipe.expansion.parts.corrector_max()),
        alpha_layer: Some(alpha_layer),
        reference,
        errors,
    })
}

fn failed_row(eps: f64, e: &Error) -> EpsRow {
    EpsRow {
        eps,
        status: format!("failed: {e}"),
        zeroth: None,
        outer: None,
        first: None,
        residual: None,
        boundary_defects: None,
        corrector_max: None,
        alpha_layer: None,
        reference: None,
        errors: None,
    }
}

/// Quantities fitted against `eps`, with their extractors.
type Extractor = fn(&EpsRow) -> Option<f64>;

fn fitted_quantities() -> Vec<(&'static str, Extractor)> {
    vec![
        ("residual_app", |r| r.residual.map(|n| n.combined)),
        ("r_u_app", |r| r.residual.map(|n| n.r_u_l2)),
        ("r_v_app_scaled", |r| r.residual.map(|n| n.r_v_scaled_l2)),
        ("r_p_u0", |r| r.zeroth.as_ref().map(|n| n.r_p_u0_terms_l2)),
        ("r_u1", |r| r.outer.as_ref().map(|n| n.r_u1)),
        ("r_v0", |r| r.outer.as_ref().map(|n| n.r_v0)),
        ("e0", |r| r.outer.as_ref().map(|n| n.e0)),
        ("r_p_u1", |r| r.first.as_ref().map(|n| n.r_p_u1)),
        ("r_tilde_u1", |r| r.first.as_ref().map(|n| n.r_tilde_u1)),
        ("p_p2_x", |r| r.first.as_ref().map(|n| n.p_p2_x)),
        ("err_u_inf", |r| r.errors.as_ref().map(|e| e.err_u_inf)),
        ("err_v_inf", |r| r.errors.as_ref().map(|e| e.err_v_inf)),
        ("err_u_l2", |r| r.errors.as_ref().and_then(|e| e.err_u_lp.get("2").copied())),
        ("remainder_total", |r| r.errors.as_ref().map(|e| e.remainder.total)),
        ("remainder_u_inf", |r| r.errors.as_ref().map(|e| e.remainder.u_inf)),
    ]
}

fn series(rows: &[EpsRow], f: Extractor) -> (Vec<f64>, Vec<f64>) {
    rows.iter().filter_map(|r| f(r).map(|v| (r.eps, v))).unzip()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criteria(report: &ConvergenceReport) -> Vec<CriterionResult> {
    use thresholds::*;
    let fit = |q: &str| report.fits.iter().find(|f| f.quantity == q).cloned();
    let slope_txt = |f: &Option<RateFit>| match f {
        Some(f) => match f.status {
            FitStatus::Ok => format!("{}: slope {:.4}, r2 {:.4}", f.quantity, f.slope.unwrap(), f.r2.unwrap()),
            FitStatus::ExactZero => format!("{}: exact zero", f.quantity),
            FitStatus::InsufficientData => format!("{}: insufficient data", f.quantity),
        },
        None => "missing".into(),
    };
    let at_least = |f: &Option<RateFit>, m: f64| f.as_ref().is_some_and(|f| f.slope_at_least(m));
    let ok_rows: Vec<&EpsRow> = report.rows.iter().filter(|r| r.status == "ok").collect();
    let all_rows_ok = ok_rows.len() == report.rows.len();
    let mut out = Vec::new();

    let [lo, hi] = report.max_principle;
    out.push(CriterionResult {
        id: 1,
        name: "maximum principle of the porous-medium solve".into(),
        pass: report.flags.iter().all(|f| !f.starts_with("max_principle")),
        detail: format!("w in [{lo:.12}, {hi:.12}]"),
    });

    let alpha_layer = ok_rows.iter().filter_map(|r| r.alpha_layer).fold(f64::INFINITY, f64::min);
    out.push(CriterionResult {
        id: 4,
        name: "coercivity of the outer and layer quadratic forms".into(),
        pass: report.alpha_outer > 0.0 && alpha_layer > 0.0 && !ok_rows.is_empty(),
        detail: format!("alpha_outer {:.6}, alpha_layer {:.6}", report.alpha_outer, alpha_layer),
    });

    let res = fit("residual_app");
    let res_pass = at_least(&res, RESIDUAL_SLOPE)
        && res.as_ref().is_some_and(|f| f.status == FitStatus::ExactZero || f.r2.is_some_and(|r| r >= RESIDUAL_R2));
    out.push(CriterionResult {
        id: 5,
        name: "decay of the assembled residual".into(),
        pass: res_pass && all_rows_ok,
        detail: slope_txt(&res),
    });

    let layer = [("r_u1", R_U1_SLOPE), ("e0", E0_SLOPE), ("r_p_u1", R_P_U1_SLOPE), ("p_p2_x", P_P2_X_SLOPE)];
    let mut pass6 = all_rows_ok;
    let mut detail6 = Vec::new();
    for (q, m) in layer {
        let f = fit(q);
        pass6 &= at_least(&f, m);
        detail6.push(format!("{} (>= {m})", slope_txt(&f)));
    }
    out.push(CriterionResult { id: 6, name: "per-layer residual slopes".into(), pass: pass6, detail: detail6.join("; ") });

    let has_reference = ok_rows.iter().all(|r| r.errors.is_some()) && !ok_rows.is_empty();
    if has_reference {
        let fu = fit("err_u_inf");
        let fv = fit("err_v_inf");
        let (_, su) = series(&report.rows, |r| r.errors.as_ref().map(|e| e.err_u_inf));
        let (_, sv) = series(&report.rows, |r| r.errors.as_ref().map(|e| e.err_v_inf));
        let exact = |s: &[f64]| s.iter().all(|v| *v == 0.0);
        let mono = (strictly_decreasing(&su) || exact(&su)) && (strictly_decreasing(&sv) || exact(&sv));
        out.push(CriterionResult {
            id: 7,
            name: "inviscid-limit rates".into(),
            pass: all_rows_ok && at_least(&fu, ERR_U_SLOPE) && at_least(&fv, ERR_V_SLOPE) && mono,
            detail: format!("{} (>= {ERR_U_SLOPE}); {} (>= {ERR_V_SLOPE}); monotone {mono}", slope_txt(&fu), slope_txt(&fv)),
        });
        let f8 = fit("err_u_l2");
        out.push(CriterionResult {
            id: 8,
            name: "L2 rate of the deviation from the shear flow".into(),
            pass: all_rows_ok && at_least(&f8, ERR_U_L2_SLOPE),
            detail: format!("{} (>= {ERR_U_L2_SLOPE})", slope_txt(&f8)),
        });
        let f9 = fit("remainder_total");
        out.push(CriterionResult {
            id: 9,
            name: "boundedness of the scaled remainder".into(),
            pass: all_rows_ok && at_least(&f9, REMAINDER_SLOPE),
            detail: format!("{} (>= {REMAINDER_SLOPE})", slope_txt(&f9)),
        });
        let sym = ok_rows.iter().filter_map(|r| r.reference.as_ref().map(|i| i.symmetry_defect)).fold(0.0, f64::max);
        out.push(CriterionResult {
            id: 10,
            name: "mirror symmetry of the extended solution".into(),
            pass: all_rows_ok && sym <= f64::EPSILON,
            detail: format!("largest mirror defect {sym:e}"),
        });
    }
    out
}

/// Runs every viscosity of the spec and aggregates fits and criteria.
pub fn run_sweep(spec: &ProblemSpec, opts: &SweepOptions) -> Result<ConvergenceReport> {
    let state = solve_porous_medium(spec)?;
    let grid = euler_grid(spec)?;
    let alpha_outer =
        coercivity_constant(&grid, &spec.u_e0, COERCIVITY_PROBES, opts.seed.unwrap_or(COERCIVITY_SEED))?;
    let mut eps_list = spec.epsilon_list.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    let jobs = if opts.jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(eps_list.len().max(1))
    } else {
        opts.jobs
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidField(format!("thread pool: {e}")))?;
    let rows: Vec<EpsRow> = pool.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| {
                log::info!("sweep: eps = {eps}");
                match run_pipeline(spec, &state, eps, opts).and_then(|p| row_from(spec, &p, opts)) {
                    Ok(r) => r,
                    Err(e) => {
                        log::error!("eps = {eps} failed: {e}");
                        failed_row(eps, &e)
                    }
                }
            })
            .collect()
    });
    let mut flags = Vec::new();
    let (lo, hi) = (state.min_w(), state.max_w());
    let (a, b) = (spec.u_e().min(spec.u_b), spec.u_e().max(spec.u_b));
    if lo < a - thresholds::MAX_PRINCIPLE_SLACK || hi > b + thresholds::MAX_PRINCIPLE_SLACK {
        flags.push(format!("max_principle_violated: w in [{lo}, {hi}], data in [{a}, {b}]"));
    }
    let ok_rows: Vec<EpsRow> = rows.iter().filter(|r| r.status == "ok").cloned().collect();
    let fits: Vec<RateFit> = fitted_quantities()
        .into_iter()
        .filter_map(|(q, f)| {
            let (e, v) = series(&ok_rows, f);
            if e.is_empty() {
                None
            } else {
                Some(fit_rate(q, &e, &v))
            }
        })
        .collect();
    let (_, eu) = series(&ok_rows, |r| r.errors.as_ref().map(|e| e.err_u_inf));
    if eu.len() >= 2 && !strictly_decreasing(&eu) {
        flags.push("err_u_inf_not_monotone: grid pollution suspected".into());
    }
    if let Some(f) = fits.iter().find(|f| f.quantity == "remainder_u_inf") {
        if f.status == FitStatus::Ok && f.slope.unwrap() < thresholds::REMAINDER_SLOPE {
            flags.push(format!("remainder_u_inf_growth: slope {}", f.slope.unwrap()));
        }
    }
    let options = serde_json::json!({
        "seed_outer": opts.seed.unwrap_or(COERCIVITY_SEED),
        "seed_layer": opts.seed.unwrap_or(COERCIVITY_SEED_LAYER),
        "fp_sign": opts.sign.as_str(),
        "p_list": opts.p_list.iter().map(|p| lp_key(*p)).collect::<Vec<_>>(),
        "newton_tol": opts.newton.tol,
        "newton_max_iters": opts.newton.max_iters,
        "reference": opts.with_reference,
    });
    let mut report = ConvergenceReport {
        spec: spec.to_json(),
        options,
        max_principle: [lo, hi],
        alpha_outer,
        rows,
        fits,
        criteria: Vec::new(),
        flags,
        all_pass: false,
    };
    report.criteria = criteria(&report);
    report.all_pass = report.criteria.iter().all(|c| c.pass);
    Ok(report)
}

impl ConvergenceReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Long format: `epsilon,quantity,value`.
    pub fn errors_csv(&self) -> String {
        let mut s = String::from("epsilon,quantity,value\n");
        for r in self.rows.iter().filter(|r| r.status == "ok") {
            for (q, f) in fitted_quantities() {
                if let Some(v) = f(r) {
                    let _ = writeln!(s, "{:e},{q},{v:e}", r.eps);
                }
            }
            if let Some(e) = &r.errors {
                for (p, v) in &e.err_u_lp {
                    let _ = writeln!(s, "{:e},err_u_lp{p},{v:e}", r.eps);
                }
            }
        }
        s
    }

    /// `quantity,slope,r2,pass`; `pass` is empty for quantities without a threshold.
    pub fn rates_csv(&self) -> String {
        use thresholds::*;
        let limits: BTreeMap<&str, f64> = [
            ("residual_app", RESIDUAL_SLOPE),
            ("r_u1", R_U1_SLOPE),
            ("e0", E0_SLOPE),
            ("r_p_u1", R_P_U1_SLOPE),
            ("p_p2_x", P_P2_X_SLOPE),
            ("err_u_inf", ERR_U_SLOPE),
            ("err_v_inf", ERR_V_SLOPE),
            ("err_u_l2", ERR_U_L2_SLOPE),
            ("remainder_total", REMAINDER_SLOPE),
        ]
        .into_iter()
        .collect();
        let mut s = String::from("quantity,slope,r2,pass\n");
        for f in &self.fits {
            let slope = f.slope.map(|v| format!("{v:e}")).unwrap_or_else(|| match f.status {
                FitStatus::ExactZero => "exact_zero".into(),
                _ => "insufficient_data".into(),
            });
            let r2 = f.r2.map(|v| format!("{v:e}")).unwrap_or_default();
            let pass = limits.get(f.quantity.as_str()).map(|m| f.slope_at_least(*m).to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{slope},{r2},{pass}", f.quantity);
        }
        s
    }

    /// One line per criterion.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            let _ = writeln!(s, "[{}] criterion {:>2} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
        }
        for f in &self.flags {
            let _ = writeln!(s, "flag: {f}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_of_exact_power_law() {
        let eps = [0.04, 0.02, 0.01, 0.005];
        let f = fit_rate("q", &eps, &eps);
        assert!((f.slope.unwrap() - 1.0).abs() < 1e-12);
        assert!((f.r2.unwrap() - 1.0).abs() < 1e-12);
        let v: Vec<f64> = eps.iter().map(|e| 3.0 * e.sqrt()).collect();
        let f = fit_rate("q", &eps, &v);
        assert!((f.slope.unwrap() - 0.5).abs() < 1e-12);
        assert!((f.intercept.unwrap() - 3f64.ln()).abs() < 1e-12);
        let [lo, hi] = f.slope_ci95.unwrap();
        assert!((hi - lo).abs() < 1e-6);
    }

    #[test]
    fn zero_values_are_exact_convergence() {
        let f = fit_rate("q", &[0.04, 0.02, 0.01], &[0.0, 0.0, 0.0]);
        assert_eq!(f.status, FitStatus::ExactZero);
        assert!(f.slope_at_least(10.0));
        let f = fit_rate("q", &[0.04], &[1.0]);
        assert_eq!(f.status, FitStatus::InsufficientData);
        assert!(!f.slope_at_least(-10.0));
    }

    #[test]
    fn noisy_fit_interval_covers_the_slope() {
        let eps = [0.04f64, 0.02, 0.01, 0.005, 0.0025];
        let noise = [1.02, 0.97, 1.03, 0.99, 1.01];
        let v: Vec<f64> = eps.iter().zip(noise).map(|(e, n)| e.powf(0.75) * n).collect();
        let f = fit_rate("q", &eps, &v);
        let [lo, hi] = f.slope_ci95.unwrap();
        assert!(lo < 0.75 && 0.75 < hi && f.r2.unwrap() > 0.99);
    }
}
