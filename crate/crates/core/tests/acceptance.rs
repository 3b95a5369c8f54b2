//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::Value;

use prandtl_expander::euler1::{outer_grid, solve_tilde_w};
use prandtl_expander::harness::{run_pipeline, run_sweep, ConvergenceReport, SweepOptions};
use prandtl_expander::numerics::field::ScalarField2D;
use prandtl_expander::numerics::grid::Grid2D;
use prandtl_expander::prandtl0::solve_porous_medium;
use prandtl_expander::spec::{validate_spec, Profile, ProblemSpec};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> ProblemSpec {
    ProblemSpec::from_file(&config(name)).expect("config parses")
}

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn line(id: u32, pass: bool, detail: impl Into<String>) -> Line {
    Line { id, pass, detail: detail.into() }
}

fn max_principle() -> Line {
    let mut spec = load("default-benchmark.json");
    spec.ubar0 = Profile::exp_decay(1.0, 1.0);
    let t = Instant::now();
    let state = match validate_spec(&spec).into_result().and_then(|_| solve_porous_medium(&spec)) {
        Ok(s) => s,
        Err(e) => return line(1, false, format!("solve failed: {e}")),
    };
    let dt = t.elapsed();
    let (lo, hi) = (state.min_w(), state.max_w());
    let pass = lo >= 1.0 - 1e-8 && hi <= 2.0 + 1e-8 && dt < Duration::from_secs(5);
    line(1, pass, format!("W in [{lo:.12}, {hi:.12}] (bounds [1, 2] +- 1e-8), {:.2} s (< 5 s)", dt.as_secs_f64()))
}

fn trivial_chain() -> Line {
    let spec = load("trivial-chain.json");
    let t = Instant::now();
    let state = match solve_porous_medium(&spec) {
        Ok(s) => s,
        Err(e) => return line(2, false, format!("solve failed: {e}")),
    };
    let opts = SweepOptions { with_reference: false, ..Default::default() };
    let (mut corr, mut app) = (0.0f64, 0.0f64);
    for &eps in &spec.epsilon_list {
        let pipe = match run_pipeline(&spec, &state, eps, &opts) {
            Ok(p) => p,
            Err(e) => return line(2, false, format!("eps {eps}: {e}")),
        };
        let exp = &pipe.expansion;
        corr = corr.max(exp.parts.corrector_max());
        let se = eps.sqrt();
        let shear = ScalarField2D::from_fn(exp.grid.clone(), |_, y| spec.u_e0.eval((se * y).min(1.0))).unwrap();
        app = app.max(exp.u_app.sub(&shear).unwrap().max_abs());
        app = app.max(exp.v_app.max_abs()).max(exp.p_app.max_abs());
    }
    let dt = t.elapsed();
    let pass = corr <= 1e-10 && app <= 1e-10 && dt < Duration::from_secs(10);
    line(
        2,
        pass,
        format!("corrector max {corr:.3e}, |u_app - shear| {app:.3e} (<= 1e-10), {:.2} s (< 10 s)", dt.as_secs_f64()),
    )
}

fn elliptic_mms() -> Line {
    let spec = load("default-benchmark.json");
    let len = spec.length;
    let t = Instant::now();
    let error = |n: usize| -> f64 {
        let g: Arc<Grid2D> = outer_grid(len, n, n, 1.0, 1.0).unwrap();
        let exact = |x: f64, z: f64| (std::f64::consts::PI * x / len).sin() * (std::f64::consts::PI * z).sin();
        let k2 = std::f64::consts::PI.powi(2) * (1.0 / (len * len) + 1.0);
        let u = &spec.u_e0;
        let rhs = ScalarField2D::from_fn(g.clone(), |x, z| (u.eval(z) * k2 + u.d2(z)) * exact(x, z)).unwrap();
        let sol = solve_tilde_w(&g, u, &rhs).unwrap();
        sol.w.sub(&ScalarField2D::from_fn(g, exact).unwrap()).unwrap().max_abs()
    };
    let errs: Vec<f64> = [17, 33, 65, 129].iter().map(|&n| error(n)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let dt = t.elapsed();
    let pass = orders.iter().all(|o| (1.9..=2.1).contains(o)) && dt < Duration::from_secs(30);
    line(3, pass, format!("observed orders {orders:.4?} (in [1.9, 2.1]), {:.2} s (< 30 s)", dt.as_secs_f64()))
}

fn from_report(report: &ConvergenceReport, id: u32) -> Line {
    match report.criteria.iter().find(|c| c.id == id) {
        Some(c) => line(id, c.pass, c.detail.clone()),
        None => line(id, false, "criterion missing from the report"),
    }
}

/// Numeric comparison of two reports with a relative tolerance; strings and shapes must match.
fn json_close(a: &Value, b: &Value, path: &str, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() > 1e-6 * x.abs().max(y.abs()) + 1e-8 {
                out.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (k, (p, q)) in x.iter().zip(y).enumerate() {
                json_close(p, q, &format!("{path}[{k}]"), out);
            }
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => {
            for (k, p) in x {
                match y.get(k) {
                    Some(q) => json_close(p, q, &format!("{path}.{k}"), out),
                    None => out.push(format!("{path}.{k}: missing")),
                }
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} vs {b}")),
    }
}

fn main() -> ExitCode {
    let mut lines = vec![max_principle(), trivial_chain(), elliptic_mms()];

    let spec = load("default-benchmark.json");
    let t = Instant::now();
    let first = run_sweep(&spec, &SweepOptions::default());
    let sweep_time = t.elapsed();
    let mut golden_ok = false;
    match &first {
        Ok(report) => {
            for id in [4, 5, 6, 7, 8, 9, 10] {
                let mut l = from_report(report, id);
                if id == 5 || id == 7 {
                    let limit = if id == 5 { 300 } else { 900 };
                    l.pass &= sweep_time < Duration::from_secs(limit);
                    l.detail += &format!("; sweep {:.1} s (< {limit} s)", sweep_time.as_secs_f64());
                }
                lines.push(l);
            }
            let second = run_sweep(&spec, &SweepOptions { jobs: 2, ..Default::default() });
            let a = report.to_json_string().unwrap();
            let same = matches!(&second, Ok(r) if r.to_json_string().unwrap() == a);
            lines.push(line(11, same, format!("second sweep (2 workers) byte-identical: {same}")));

            let golden_path = config("golden/default-benchmark.report.json");
            let mut diffs = Vec::new();
            match std::fs::read_to_string(&golden_path) {
                Ok(text) => {
                    let golden: Value = serde_json::from_str(&text).unwrap();
                    let now: Value = serde_json::from_str(&a).unwrap();
                    json_close(&golden, &now, "", &mut diffs);
                }
                Err(e) => diffs.push(format!("{}: {e}", golden_path.display())),
            }
            golden_ok = diffs.is_empty();
            println!(
                "[{}] regression against the committed golden report{}",
                if golden_ok { "PASS" } else { "FAIL" },
                if golden_ok { String::new() } else { format!(": {}", diffs[..diffs.len().min(5)].join("; ")) }
            );
            for f in &report.flags {
                println!("flag: {f}");
            }
        }
        Err(e) => {
            for id in 4..=11 {
                lines.push(line(id, false, format!("sweep failed: {e}")));
            }
        }
    }

    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!("[{}] criterion {:>2}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 && golden_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
