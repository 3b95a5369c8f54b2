use serde::Serialize;

use super::{ProblemSpec, L_MAX};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured violation (0 when satisfied exactly).
    pub violation: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Compatibility that can only be checked once the wall trace of the zeroth-order layer is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeferredCheck {
    pub name: &'static str,
    /// Side data value at the wall corner, to be compared against `-v_p(x_side, 0)`.
    pub side_value: f64,
    pub x: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub deferred: Vec<DeferredCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<34} {:>6} {:>12} {:>10}\n", "check", "status", "violation", "tol");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<34} {:>6} {:>12.3e} {:>10.1e}\n",
                c.name,
                if c.passed { "ok" } else { "FAIL" },
                c.violation,
                c.tolerance
            ));
        }
        for d in &self.deferred {
            s.push_str(&format!("{:<34} {:>6} (after the zeroth-order solve)\n", d.name, "later"));
        }
        s
    }

    /// Converts the first failed check into a rejection.
    pub fn into_result(self) -> Result<Self> {
        match self.first_failure() {
            Some(c) => Err(Error::reject(c.name, c.detail.clone())),
            None => Ok(self),
        }
    }
}

fn check(name: &'static str, violation: f64, tol: f64, detail: String) -> CheckResult {
    CheckResult { name, passed: violation.is_finite() && violation <= tol, violation, tolerance: tol, detail }
}

/// Evaluates every compatibility condition; never fails, see [`ValidationReport::into_result`].
pub fn validate_spec(spec: &ProblemSpec) -> ValidationReport {
    let mut checks = Vec::new();
    let eps = &spec.epsilon_list;

    let eps_bad = eps.is_empty()
        || eps.iter().any(|e| !(*e > 0.0) || !e.is_finite())
        || eps.windows(2).any(|w| !(w[1] < w[0]));
    checks.push(check(
        "epsilon_list",
        if eps_bad { 1.0 } else { 0.0 },
        0.0,
        format!("must be nonempty, positive and strictly decreasing: {eps:?}"),
    ));
    checks.push(check(
        "length",
        if spec.length > 0.0 && spec.length <= L_MAX { 0.0 } else { 1.0 },
        0.0,
        format!("L = {} must lie in (0, {L_MAX}]", spec.length),
    ));
    let gamma_ok = spec.gamma > 0.0 && spec.gamma < 0.2;
    checks.push(check(
        "gamma",
        if gamma_ok { 0.0 } else { (spec.gamma - 0.1).abs() },
        0.0,
        format!("gamma out of (0,1/5): {}", spec.gamma),
    ));
    checks.push(check(
        "u_b_positive",
        if spec.u_b > 0.0 { 0.0 } else { -spec.u_b },
        0.0,
        format!("u_b = {} must be positive", spec.u_b),
    ));
    checks.push(check(
        "kappa_positive",
        if spec.kappa > 0.0 && spec.kappa < 0.25 { 0.0 } else { 1.0 },
        0.0,
        format!("kappa = {} must lie in (0, 1/4)", spec.kappa),
    ));

    let zs: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
    let min_ue = zs.iter().map(|&z| spec.u_e0.eval(z)).fold(f64::INFINITY, f64::min);
    checks.push(check(
        "outer_flow_positive",
        if min_ue > 0.0 { 0.0 } else { -min_ue },
        0.0,
        format!("min u_e0 on [0,1] = {min_ue}"),
    ));
    let tol = spec.tol_bc(&[&spec.u_e0]);
    let slope_top = spec.u_e0.d1(1.0);
    checks.push(check(
        "outer_flow_flat_at_centerline",
        slope_top.abs(),
        tol,
        format!("u_e0'(1) = {slope_top:e}"),
    ));
    let tol = spec.tol_bc(&[&spec.u_e0, &spec.ubar0]);
    let wall_mismatch = spec.ubar0.eval(0.0) - (spec.u_b - spec.u_e());
    checks.push(check(
        "wall_trace_zeroth_order",
        wall_mismatch.abs(),
        tol,
        format!("ubar0(0) - (u_b - u_e) = {wall_mismatch:e}"),
    ));
    let tol = spec.tol_bc(&[&spec.ub1, &spec.ubar1]);
    let wall1 = spec.ubar1.eval(0.0) + spec.ub1.eval(0.0);
    checks.push(check(
        "wall_trace_first_order",
        wall1.abs(),
        tol,
        format!("ubar1(0) + ub1(0) = {wall1:e}"),
    ));

    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    if !eps_bad {
        for &e in eps {
            let ys = match spec.halfline_y_grid(e) {
                Ok(g) => g.nodes().to_vec(),
                Err(err) => {
                    detail = err.to_string();
                    worst = f64::NEG_INFINITY;
                    break;
                }
            };
            for y in ys {
                let z = (e.sqrt() * y).min(1.0);
                let v = spec.u_e0.eval(z) + spec.ubar0.eval(y);
                if v < worst {
                    worst = v;
                    detail = format!("min u_e0(sqrt(eps) y) + ubar0(y) = {v} at eps = {e}, y = {y}");
                }
            }
        }
    }
    checks.push(check("positivity", if worst > 0.0 { 0.0 } else { 1.0 - worst.min(0.0) }, 0.0, detail));

    let tol = spec.tol_bc(&[&spec.vb0, &spec.vbl]);
    let corner = [spec.vb0.eval(1.0), spec.vbl.eval(1.0), spec.vb0.d2(1.0), spec.vbl.d2(1.0)];
    let cv = corner.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    checks.push(check(
        "corner_compatibility",
        cv,
        tol,
        format!("[Vb0(1), VbL(1), Vb0''(1), VbL''(1)] = {corner:?}"),
    ));
    let tol = spec.tol_bc(&[&spec.ub1]);
    let ub1z = spec.ub1.d1(1.0);
    checks.push(check("inflow_corrector_flat", ub1z.abs(), tol, format!("ub1'(1) = {ub1z:e}")));

    let c = spec.chi.eval(0.0);
    let c1 = spec.chi.eval(1.0 - 1e-12);
    let tol = if spec.chi.is_table() { super::TOL_BC_TABLE } else { 1e-9 };
    let chi_v = [c[0] - 1.0, c[1], c1[0], c1[1]].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    checks.push(check("cutoff_endpoints", chi_v, tol, format!("chi(0)-1, chi'(0), chi(1), chi'(1) = {chi_v:e}")));

    let deferred = vec![
        DeferredCheck { name: "inflow_side_compatibility", side_value: spec.vb0.eval(0.0), x: 0.0, tolerance: 1e-4 },
        DeferredCheck {
            name: "outflow_side_compatibility",
            side_value: spec.vbl.eval(0.0),
            x: spec.length,
            tolerance: 1e-4,
        },
    ];
    ValidationReport { checks, deferred }
}
