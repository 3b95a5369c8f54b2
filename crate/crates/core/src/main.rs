use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use prandtl_expander::assembly::{assemble, residual_app, symmetric_extend, Parity, PARITY_TOL};
use prandtl_expander::euler1::{build_boundary_lift, euler_grid, euler_residuals, solve_euler_one};
use prandtl_expander::harness::{run_sweep, SweepOptions};
use prandtl_expander::numerics::field::ScalarField2D;
use prandtl_expander::numerics::snapshot::write_csv;
use prandtl_expander::prandtl0::{cutoff_to_strip, solve_porous_medium, PrandtlZero, VonMisesState};
use prandtl_expander::prandtl1::{solve_prandtl_one, CommutatorSign};
use prandtl_expander::reference_ns::{ns_residual, solve_steady_ns, NewtonOptions};
use prandtl_expander::spec::{validate_spec, ProblemSpec};
use prandtl_expander::{Error, Result};

const EXIT_ACCEPTANCE: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "prandtl-expander", version, about = "Boundary-layer expansion and inviscid-limit verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the spec's compatibility conditions and print the per-check table.
    Validate(Common),
    /// Porous-medium solve and per-viscosity cut-off of the zeroth-order layer.
    #[command(name = "solve-prandtl0")]
    SolvePrandtl0(Common),
    /// First-order outer corrector.
    #[command(name = "solve-euler1")]
    SolveEuler1(Common),
    /// First-order layer corrector.
    #[command(name = "solve-prandtl1")]
    SolvePrandtl1(Stage),
    /// Assembled expansion and its residuals.
    Assemble(Stage),
    /// Newton solve of the steady equations, warm-started from the expansion.
    Reference(Stage),
    /// Full sweep over the viscosity list with rate fits and acceptance criteria.
    Sweep(Sweep),
}

#[derive(Args)]
struct Common {
    /// Spec file (JSON).
    spec: PathBuf,
    /// Output directory, created if absent.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Grid override `nx,ny`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
}

#[derive(Args)]
struct Stage {
    #[command(flatten)]
    common: Common,
    /// Sign of the zeroth-order commutator in the first-order forcing.
    #[arg(long, default_value = "minus")]
    fp_sign: CommutatorSign,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    stage: Stage,
    /// Concurrent viscosities; defaults to the core count capped at the list length.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed of the coercivity probes.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected nx,ny")?;
    let nx = a.trim().parse::<usize>().map_err(|e| format!("nx: {e}"))?;
    let ny = b.trim().parse::<usize>().map_err(|e| format!("ny: {e}"))?;
    Ok((nx, ny))
}

impl Common {
    fn load(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::from_file(&self.spec)?;
        Ok(match self.grid {
            Some((nx, ny)) => spec.with_grid_override(nx, ny),
            None => spec,
        })
    }

    /// Creates the output directory and refuses to clobber `main` without `--force`.
    fn prepare(&self, main: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(main);
        if path.exists() && !self.force {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists; pass --force to overwrite", path.display()),
            )));
        }
        Ok(path)
    }
}

fn snapshot(dir: &Path, name: &str, eps: Option<f64>, f: &ScalarField2D) -> Result<()> {
    let file = match eps {
        Some(e) => format!("{name}_eps{e}.csv"),
        None => format!("{name}.csv"),
    };
    write_csv(f, &dir.join(file))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn checked_spec(c: &Common) -> Result<ProblemSpec> {
    let spec = c.load()?;
    validate_spec(&spec).into_result()?;
    Ok(spec)
}

fn zeroth_layers(spec: &ProblemSpec) -> Result<(VonMisesState, Vec<PrandtlZero>)> {
    let state = solve_porous_medium(spec)?;
    let layers = spec.epsilon_list.iter().map(|&e| cutoff_to_strip(spec, &state, e)).collect::<Result<Vec<_>>>()?;
    Ok((state, layers))
}

fn wall_trace(z: &PrandtlZero) -> Vec<f64> {
    (0..z.strip.nx()).map(|i| z.v_p0.at(i, 0)).collect()
}

fn cmd_validate(c: &Common) -> Result<u8> {
    let spec = c.load()?;
    let report = validate_spec(&spec);
    print!("{}", report.table());
    report.into_result()?;
    Ok(0)
}

fn cmd_prandtl0(c: &Common) -> Result<u8> {
    let spec = checked_spec(c)?;
    let path = c.prepare("prandtl0.json")?;
    let (state, layers) = zeroth_layers(&spec)?;
    snapshot(&c.out, "w_halfline", None, &state.w)?;
    let mut norms = Vec::new();
    for z in &layers {
        snapshot(&c.out, "u_p0", Some(z.eps), &z.u_p0)?;
        snapshot(&c.out, "v_p0", Some(z.eps), &z.v_p0)?;
        norms.push(z.norms());
    }
    write_json(
        &path,
        &json!({"c0": state.c0, "c0bar": state.c0bar, "min_W": state.min_w(), "max_W": state.max_w(), "Rp0_norms": norms}),
    )?;
    println!("W in [{:.12}, {:.12}], data bounds [{}, {}]", state.min_w(), state.max_w(), state.c0, state.c0bar);
    Ok(0)
}

fn cmd_euler1(c: &Common) -> Result<u8> {
    let spec = checked_spec(c)?;
    let path = c.prepare("euler1.json")?;
    let (_, layers) = zeroth_layers(&spec)?;
    let grid = euler_grid(&spec)?;
    let mut rows = Vec::new();
    for z in &layers {
        let lift = build_boundary_lift(&spec, &grid, &wall_trace(z))?;
        let eo = solve_euler_one(&spec, &lift, z.eps)?;
        let res = euler_residuals(&spec, &eo, z)?;
        snapshot(&c.out, "v_e1", Some(z.eps), &eo.v_e1)?;
        snapshot(&c.out, "u_e1", Some(z.eps), &eo.u_e1)?;
        snapshot(&c.out, "p_e1", Some(z.eps), &eo.p_e1)?;
        println!("eps {:e}: alpha {:.6}, R_u1 {:.4e}, E0 {:.4e}", z.eps, eo.diagnostics.alpha, res.norms.r_u1, res.norms.e0);
        rows.push(json!({
            "epsilon": z.eps,
            "alpha": eo.diagnostics.alpha,
            "bc_trace_residuals": eo.diagnostics.bc_trace_residuals,
            "R_u1_norms": res.norms.r_u1,
            "R_v0_norms": res.norms.r_v0,
            "E0_norms": res.norms.e0,
            "diagnostics": eo.diagnostics,
        }));
    }
    write_json(&path, &json!({"rows": rows}))?;
    Ok(0)
}

/// Layer chain for every viscosity; `main` selects what is emitted.
fn cmd_chain(s: &Stage, main: &str, reference: bool) -> Result<u8> {
    let c = &s.common;
    let spec = checked_spec(c)?;
    let path = c.prepare(main)?;
    let (_, layers) = zeroth_layers(&spec)?;
    let grid = euler_grid(&spec)?;
    let mut rows = Vec::new();
    for z in &layers {
        let eps = z.eps;
        let lift = build_boundary_lift(&spec, &grid, &wall_trace(z))?;
        let eo = solve_euler_one(&spec, &lift, eps)?;
        let first = solve_prandtl_one(&spec, z, &eo, s.fp_sign)?;
        let row = match main {
            "prandtl1.json" => {
                snapshot(&c.out, "u_p1", Some(eps), &first.u_p1)?;
                snapshot(&c.out, "v_p1", Some(eps), &first.v_p1)?;
                snapshot(&c.out, "p_p2", Some(eps), &first.p_p2)?;
                let n = &first.norms;
                println!("eps {eps:e}: R_p_u1 {:.4e}, p_p2_x {:.4e}, alpha_4th {:.6}", n.r_p_u1, n.p_p2_x, n.alpha_4th);
                json!({
                    "epsilon": eps,
                    "alpha_4th": n.alpha_4th,
                    "Rp1_norms": n.r_p_u1,
                    "Rtilde_norms": n.r_tilde_u1,
                    "pp2x_norms": n.p_p2_x,
                    "norms": n,
                })
            }
            _ => {
                let exp = assemble(&spec, z, &eo, &first)?;
                if reference {
                    let (problem, sol) = solve_steady_ns(&spec, &exp, &NewtonOptions::default())?;
                    snapshot(&c.out, "U", Some(eps), &sol.u)?;
                    snapshot(&c.out, "V", Some(eps), &sol.v)?;
                    snapshot(&c.out, "P", Some(eps), &sol.p)?;
                    let report = ns_residual(&problem, &sol)?;
                    println!(
                        "eps {eps:e}: {} Newton iterations, residual {:.3e}, divergence {:.3e}",
                        sol.newton_iters, sol.final_residual, sol.divergence_max
                    );
                    json!({
                        "epsilon": eps,
                        "newton_iters": sol.newton_iters,
                        "continuation_steps": sol.continuation_steps,
                        "final_residual": sol.final_residual,
                        "residual": report,
                    })
                } else {
                    let res = residual_app(&exp)?;
                    for (name, f, parity) in [
                        ("u_app", &exp.u_app, Parity::Even),
                        ("v_app", &exp.v_app, Parity::Odd),
                        ("p_app", &exp.p_app, Parity::Even),
                    ] {
                        snapshot(&c.out, name, Some(eps), f)?;
                        match symmetric_extend(f, parity, PARITY_TOL) {
                            Ok(ext) => snapshot(&c.out, &format!("{name}_extended"), Some(eps), &ext)?,
                            Err(e) => log::warn!("{name} at eps = {eps}: no extended snapshot ({e})"),
                        }
                    }
                    println!("eps {eps:e}: |R^u| + sqrt(eps)|R^v| = {:.4e}", res.norms.combined);
                    json!({
                        "epsilon": eps,
                        "residual_norms": res.norms,
                        "boundary_defects": exp.boundary_defects(spec.u_b),
                    })
                }
            }
        };
        rows.push(row);
    }
    write_json(&path, &json!({"rows": rows}))?;
    Ok(0)
}

fn cmd_sweep(s: &Sweep) -> Result<u8> {
    let c = &s.stage.common;
    let spec = checked_spec(c)?;
    let path = c.prepare("report.json")?;
    let opts = SweepOptions { jobs: s.jobs.unwrap_or(0), seed: s.seed, sign: s.stage.fp_sign, ..Default::default() };
    let report = run_sweep(&spec, &opts)?;
    std::fs::write(&path, report.to_json_string()?)?;
    std::fs::write(c.out.join("errors.csv"), report.errors_csv())?;
    std::fs::write(c.out.join("rates.csv"), report.rates_csv())?;
    print!("{}", report.summary());
    Ok(if report.all_pass { 0 } else { EXIT_ACCEPTANCE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PRANDTL_EXPANDER_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::SolvePrandtl0(c) => cmd_prandtl0(c),
        Command::SolveEuler1(c) => cmd_euler1(c),
        Command::SolvePrandtl1(s) => cmd_chain(s, "prandtl1.json", false),
        Command::Assemble(s) => cmd_chain(s, "assemble.json", false),
        Command::Reference(s) => cmd_chain(s, "reference.json", true),
        Command::Sweep(s) => cmd_sweep(s),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
