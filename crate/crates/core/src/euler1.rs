//! First-order outer corrector: boundary lift, smoothed wall forcing, the auxiliary Dirichlet
//! problem, recovery of the tangential velocity and pressure, and the residual pieces they leave.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::diff::Stencil;
use crate::numerics::field::ScalarField2D;
use crate::numerics::grid::{DomainTag, Grid1D, Grid2D};
use crate::numerics::interp::resample;
use crate::numerics::linear::solve_sparse;
use crate::numerics::quad::{l2, trapz_cumulative, From};
use crate::numerics::{apply_diff, DiffOp};
use crate::prandtl0::PrandtlZero;
use crate::spec::{Profile, ProblemSpec};

pub const COERCIVITY_PROBES: usize = 200;
pub const COERCIVITY_SEED: u64 = 0x5eed_e1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LiftBranch {
    /// Side data scaled by the ratio of wall traces.
    Ratio,
    /// Side data minus a linear profile carrying the wall trace.
    Degenerate,
}

/// Lift `B` carrying all boundary values of the vertical corrector, and `F_e = -U Lap B + U'' B`.
#[derive(Debug, Clone)]
pub struct BoundaryLift {
    pub grid: Arc<Grid2D>,
    pub b: ScalarField2D,
    pub f_e: ScalarField2D,
    pub inflow_branch: LiftBranch,
    pub outflow_branch: LiftBranch,
    /// Side data actually used (after the optional corner adjustment).
    pub vb0: Vec<f64>,
    pub vbl: Vec<f64>,
    /// Largest trace mismatch at the wall, centerline, inflow and outflow sides.
    pub trace_residuals: [f64; 4],
    pub wall_v: Vec<f64>,
}

/// Euler grid: the shared streamwise grid times the clustered grid on [0, 1].
pub fn euler_grid(spec: &ProblemSpec) -> Result<Arc<Grid2D>> {
    Ok(Arc::new(Grid2D::new(spec.x_grid()?, spec.euler_z_grid()?, DomainTag::Half)?))
}

fn fill(g: &Arc<Grid2D>, f: impl Fn(usize, usize) -> f64) -> Result<ScalarField2D> {
    let mut v = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            v.push(f(i, j));
        }
    }
    ScalarField2D::new(g.clone(), v)
}

/// `-U(z) (v_xx + v_zz) + U''(z) v` with the grid stencils (one-sided on the boundary).
pub fn outer_operator(v: &ScalarField2D, u_e0: &Profile) -> Result<ScalarField2D> {
    let vxx = apply_diff(v, DiffOp::Dxx)?;
    let vzz = apply_diff(v, DiffOp::Dyy)?;
    let g = v.grid_arc().clone();
    let prof: Vec<[f64; 4]> = g.y().iter().map(|&z| u_e0.eval_all(z)).collect();
    fill(&g, |i, j| -prof[j][0] * (vxx.at(i, j) + vzz.at(i, j)) + prof[j][2] * v.at(i, j))
}

/// Builds the lift from the wall trace `v_p0(x, 0)` sampled on the streamwise grid.
pub fn build_boundary_lift(spec: &ProblemSpec, grid: &Arc<Grid2D>, wall_v: &[f64]) -> Result<BoundaryLift> {
    if wall_v.len() != grid.nx() {
        return Err(Error::GridMismatch(format!("wall trace has {} samples, grid {}", wall_v.len(), grid.nx())));
    }
    let z = grid.y();
    let x = grid.x();
    let len = spec.length;
    let (w0, wl) = (wall_v[0], *wall_v.last().unwrap());
    let mut vb0: Vec<f64> = z.iter().map(|&t| spec.vb0.eval(t)).collect();
    let mut vbl: Vec<f64> = z.iter().map(|&t| spec.vbl.eval(t)).collect();
    if spec.adjust_compat {
        let (s0, sl) = (-w0 - vb0[0], -wl - vbl[0]);
        for (k, &t) in z.iter().enumerate() {
            vb0[k] += s0 * (1.0 - t);
            vbl[k] += sl * (1.0 - t);
        }
    }
    for (name, side, wv) in [("inflow", vb0[0], w0), ("outflow", vbl[0], wl)] {
        if (side + wv).abs() > 1e-4 {
            log::warn!("{name} side data {side:e} does not match -v_p0 = {:e} at the wall corner", -wv);
        }
    }
    let thresh = 1e-8 * (1.0 + wall_v.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let inflow_branch = if w0.abs() > thresh { LiftBranch::Ratio } else { LiftBranch::Degenerate };
    let outflow_branch = if wl.abs() > thresh { LiftBranch::Ratio } else { LiftBranch::Degenerate };
    let side = |branch: LiftBranch, data: &[f64], trace: f64, i: usize, j: usize| match branch {
        LiftBranch::Ratio => data[j] / trace * wall_v[i],
        LiftBranch::Degenerate => data[j] - wall_v[i] * (1.0 - z[j]),
    };
    let b = fill(grid, |i, j| {
        let s = x[i] / len;
        (1.0 - s) * side(inflow_branch, &vb0, w0, i, j) + s * side(outflow_branch, &vbl, wl, i, j)
    })?;
    let (nx, nz) = (grid.nx(), grid.ny());
    let mut tr = [0.0f64; 4];
    for i in 0..nx {
        tr[0] = tr[0].max((b.at(i, 0) + wall_v[i]).abs());
        tr[1] = tr[1].max(b.at(i, nz - 1).abs());
    }
    for j in 0..nz {
        tr[2] = tr[2].max((b.at(0, j) - vb0[j]).abs());
        tr[3] = tr[3].max((b.at(nx - 1, j) - vbl[j]).abs());
    }
    let f_e = outer_operator(&b, &spec.u_e0)?;
    Ok(BoundaryLift {
        grid: grid.clone(),
        b,
        f_e,
        inflow_branch,
        outflow_branch,
        vb0,
        vbl,
        trace_residuals: tr,
        wall_v: wall_v.to_vec(),
    })
}

/// Nodal weights of `chi(z/eps)`: point values when the first cell resolves the support,
/// otherwise averages over the dual cells so the integral does not depend on the grid.
/// The wall node always carries weight 1.
pub fn wall_forcing_profile(spec: &ProblemSpec, z: &[f64], eps: f64) -> Vec<f64> {
    let h0 = z[1] - z[0];
    let n = z.len();
    let mut out: Vec<f64> = if eps >= 2.0 * h0 {
        z.iter().map(|&t| spec.chi.value(t / eps)).collect()
    } else {
        (0..n)
            .map(|j| {
                let a = if j == 0 { z[0] } else { 0.5 * (z[j - 1] + z[j]) };
                let b = if j + 1 == n { z[n - 1] } else { 0.5 * (z[j] + z[j + 1]) };
                let a_eff = a.min(eps);
                let b_eff = b.min(eps);
                if b_eff <= a_eff {
                    return 0.0;
                }
                let m = 64;
                let h = (b_eff - a_eff) / m as f64;
                let s: f64 = (0..=m)
                    .map(|k| {
                        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                        w * spec.chi.value((a_eff + k as f64 * h) / eps)
                    })
                    .sum::<f64>()
                    * h;
                s / (b - a)
            })
            .collect()
    };
    out[0] = 1.0;
    out
}

/// `E_b(x, z) = chi(z/eps) F_e(x, 0)`.
pub fn build_eb(spec: &ProblemSpec, lift: &BoundaryLift, eps: f64) -> Result<ScalarField2D> {
    let prof = wall_forcing_profile(spec, lift.grid.y(), eps);
    fill(&lift.grid, |i, j| prof[j] * lift.f_e.at(i, 0))
}

#[derive(Debug, Clone)]
pub struct TildeSolution {
    pub w: ScalarField2D,
    /// Discrete quadratic form evaluated at the solution.
    pub quad_form: f64,
}

/// Solves `-Lap w + (U''/U) w = rhs / U` in the interior with `w = 0` on the boundary.
pub fn solve_tilde_w(grid: &Arc<Grid2D>, u_e0: &Profile, rhs: &ScalarField2D) -> Result<TildeSolution> {
    let (nx, nz) = (grid.nx(), grid.ny());
    let sx = Stencil::new(grid.x(), 2)?;
    let sz = Stencil::new(grid.y(), 2)?;
    let prof: Vec<[f64; 4]> = grid.y().iter().map(|&z| u_e0.eval_all(z)).collect();
    if let Some(p) = prof.iter().find(|p| !(p[0] > 0.0)) {
        return Err(Error::reject("outer_flow_positive", format!("outer velocity {} is not positive", p[0])));
    }
    let (mx, mz) = (nx - 2, nz - 2);
    let id = |i: usize, j: usize| (i - 1) * mz + (j - 1);
    let mut entries = Vec::with_capacity(5 * mx * mz);
    let mut b = vec![0.0; mx * mz];
    for i in 1..nx - 1 {
        let (ox, wx) = (sx.rows[i].0, &sx.rows[i].1);
        for j in 1..nz - 1 {
            let (oz, wz) = (sz.rows[j].0, &sz.rows[j].1);
            let r = id(i, j);
            let mut diag = prof[j][2] / prof[j][0];
            for (k, w) in wx.iter().enumerate() {
                let ii = ox + k;
                if ii == i {
                    diag -= w;
                } else if ii > 0 && ii < nx - 1 {
                    entries.push((r, id(ii, j), -w));
                }
            }
            for (k, w) in wz.iter().enumerate() {
                let jj = oz + k;
                if jj == j {
                    diag -= w;
                } else if jj > 0 && jj < nz - 1 {
                    entries.push((r, id(i, jj), -w));
                }
            }
            entries.push((r, r, diag));
            b[r] = rhs.at(i, j) / prof[j][0];
        }
    }
    let sol = solve_sparse(mx * mz, &entries, &b)?;
    let w = fill(grid, |i, j| {
        if i == 0 || j == 0 || i == nx - 1 || j == nz - 1 {
            0.0
        } else {
            sol[id(i, j)]
        }
    })?;
    let quad_form = quadratic_form(&w, u_e0).0;
    if quad_form < 0.0 {
        return Err(Error::SingularSystem(format!("quadratic form {quad_form:e} is negative at the solution")));
    }
    Ok(TildeSolution { w, quad_form })
}

/// `(B[v,v], |v|_H1^2)` with edge differences for the gradient and trapezoid weights.
pub fn quadratic_form(v: &ScalarField2D, u_e0: &Profile) -> (f64, f64) {
    let g = v.grid();
    let (x, z) = (g.x(), g.y());
    let wx = crate::numerics::grid::trapz_weights(x);
    let wz = crate::numerics::grid::trapz_weights(z);
    let pot: Vec<f64> = z.iter().map(|&t| u_e0.d2(t) / u_e0.eval(t)).collect();
    let (mut grad, mut mass, mut pot_sum) = (0.0, 0.0, 0.0);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let c = v.at(i, j);
            mass += wx[i] * wz[j] * c * c;
            pot_sum += wx[i] * wz[j] * pot[j] * c * c;
            if i + 1 < g.nx() {
                let h = x[i + 1] - x[i];
                let d = (v.at(i + 1, j) - c) / h;
                grad += h * wz[j] * d * d;
            }
            if j + 1 < g.ny() {
                let h = z[j + 1] - z[j];
                let d = (v.at(i, j + 1) - c) / h;
                grad += wx[i] * h * d * d;
            }
        }
    }
    (grad + pot_sum, grad + mass)
}

/// Smallest ratio `B[v,v] / |v|_H1^2` over seeded random probes vanishing on the boundary.
pub fn coercivity_constant(grid: &Arc<Grid2D>, u_e0: &Profile, probes: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, nz) = (grid.nx(), grid.ny());
    let (len, top) = (*grid.x().last().unwrap(), *grid.y().last().unwrap());
    let mut alpha = f64::INFINITY;
    for p in 0..probes {
        let v = if p % 2 == 0 {
            let vals: Vec<f64> = (0..nx * nz)
                .map(|k| {
                    let (i, j) = (k / nz, k % nz);
                    if i == 0 || j == 0 || i == nx - 1 || j == nz - 1 {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            ScalarField2D::new(grid.clone(), vals)?
        } else {
            let (cx, cz) = (rng.random_range(0.1..0.9) * len, rng.random_range(0.1..0.9) * top);
            let (rx, rz) = (rng.random_range(0.05..0.5) * len, rng.random_range(0.05..0.5) * top);
            let (kx, kz) = (rng.random_range(1..6) as f64, rng.random_range(1..6) as f64);
            ScalarField2D::from_fn(grid.clone(), |x, z| {
                let bump = (-((x - cx) / rx).powi(2) - ((z - cz) / rz).powi(2)).exp();
                let mode = (kx * std::f64::consts::PI * x / len).sin() * (kz * std::f64::consts::PI * z / top).sin();
                bump * mode
            })?
        };
        let (bf, h1) = quadratic_form(&v, u_e0);
        if h1 > 0.0 {
            alpha = alpha.min(bf / h1);
        }
    }
    Ok(alpha)
}

/// Tangential velocity `ub1(z) - int_0^x v_z` and pressure
/// `int_z^1 U v_x + int_0^x U(1) v_z(s, 1) ds`. The boundary term enters with a plus sign:
/// integrating `U v_zz` by parts leaves `-U(1) v_z(x, 1)`, which it has to cancel.
pub fn recover_correctors(spec: &ProblemSpec, v_e1: &ScalarField2D) -> Result<(ScalarField2D, ScalarField2D)> {
    let g = v_e1.grid_arc().clone();
    let (x, z) = (g.x(), g.y());
    let (nx, nz) = (g.nx(), g.ny());
    let vz = apply_diff(v_e1, DiffOp::Dy)?;
    let vx = apply_diff(v_e1, DiffOp::Dx)?;
    let mut u = vec![0.0; g.len()];
    for j in 0..nz {
        let row = vz.row(j);
        let cum = trapz_cumulative(x, &row, From::Start);
        let base = spec.ub1.eval(z[j]);
        for i in 0..nx {
            u[g.idx(i, j)] = base - cum[i];
        }
    }
    let top_flux: Vec<f64> = (0..nx).map(|i| spec.u_e0.eval(1.0) * vz.at(i, nz - 1)).collect();
    let top_cum = trapz_cumulative(x, &top_flux, From::Start);
    let ue: Vec<f64> = z.iter().map(|&t| spec.u_e0.eval(t)).collect();
    let mut p = vec![0.0; g.len()];
    for i in 0..nx {
        let f: Vec<f64> = vx.column(i).iter().zip(&ue).map(|(a, b)| a * b).collect();
        let cum = trapz_cumulative(z, &f, From::End);
        for j in 0..nz {
            p[g.idx(i, j)] = cum[j] + top_cum[i];
        }
    }
    Ok((ScalarField2D::new(g.clone(), u)?, ScalarField2D::new(g, p)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerDiagnostics {
    pub alpha: f64,
    pub quad_form: f64,
    pub bc_trace_residuals: [f64; 4],
    pub divergence_max: f64,
    pub u_e1_z_top_max: f64,
    pub v_e1_zz_top_max: f64,
    pub momentum_identity_max: f64,
}

/// First-order outer corrector for one viscosity.
#[derive(Debug, Clone)]
pub struct EulerOne {
    pub eps: f64,
    pub lift: BoundaryLift,
    pub e_b: ScalarField2D,
    pub w_tilde: ScalarField2D,
    pub v_e1: ScalarField2D,
    pub u_e1: ScalarField2D,
    pub p_e1: ScalarField2D,
    pub diagnostics: EulerDiagnostics,
}

impl EulerOne {
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.lift.grid
    }
}

pub fn solve_euler_one(spec: &ProblemSpec, lift: &BoundaryLift, eps: f64) -> Result<EulerOne> {
    let grid = lift.grid.clone();
    let e_b = build_eb(spec, lift, eps)?;
    let rhs = e_b.sub(&lift.f_e)?;
    let tilde = solve_tilde_w(&grid, &spec.u_e0, &rhs)?;
    let v_e1 = lift.b.add(&tilde.w)?;
    let (u_e1, p_e1) = recover_correctors(spec, &v_e1)?;
    let alpha = coercivity_constant(&grid, &spec.u_e0, COERCIVITY_PROBES, COERCIVITY_SEED)?;
    if !(alpha > 0.0) {
        return Err(Error::SingularSystem(format!("discrete coercivity constant {alpha:e}")));
    }
    log::debug!("eps {eps}: coercivity constant {alpha:.4e}");

    let (nx, nz) = (grid.nx(), grid.ny());
    let z = grid.y();
    let ux = apply_diff(&u_e1, DiffOp::Dx)?;
    let uz = apply_diff(&u_e1, DiffOp::Dy)?;
    let vz = apply_diff(&v_e1, DiffOp::Dy)?;
    let vzz = apply_diff(&v_e1, DiffOp::Dyy)?;
    let px = apply_diff(&p_e1, DiffOp::Dx)?;
    let mut tr = [0.0f64; 4];
    for i in 0..nx {
        tr[0] = tr[0].max((v_e1.at(i, 0) + lift.wall_v[i]).abs());
        tr[1] = tr[1].max(v_e1.at(i, nz - 1).abs());
    }
    for j in 0..nz {
        tr[2] = tr[2].max((v_e1.at(0, j) - lift.vb0[j]).abs());
        tr[3] = tr[3].max((v_e1.at(nx - 1, j) - lift.vbl[j]).abs());
    }
    let mut div = 0.0f64;
    let mut mom = 0.0f64;
    for i in 1..nx - 1 {
        let eb_tail = trapz_cumulative(z, e_b.column(i), From::End);
        for j in 1..nz - 1 {
            div = div.max((ux.at(i, j) + vz.at(i, j)).abs());
            let [ue, uez, _, _] = spec.u_e0.eval_all(z[j]);
            mom = mom.max((ue * ux.at(i, j) + uez * v_e1.at(i, j) + px.at(i, j) + eb_tail[j]).abs());
        }
    }
    let diagnostics = EulerDiagnostics {
        alpha,
        quad_form: tilde.quad_form,
        bc_trace_residuals: tr,
        divergence_max: div,
        u_e1_z_top_max: (0..nx).map(|i| uz.at(i, nz - 1).abs()).fold(0.0, f64::max),
        v_e1_zz_top_max: (0..nx).map(|i| vzz.at(i, nz - 1).abs()).fold(0.0, f64::max),
        momentum_identity_max: mom,
    };
    Ok(EulerOne { eps, lift: lift.clone(), e_b, w_tilde: tilde.w, v_e1, u_e1, p_e1, diagnostics })
}

/// Samples `f(x, sqrt(eps) y)` on the strip grid by local cubic interpolation in z.
pub fn sample_on_strip(f: &ScalarField2D, strip: &Arc<Grid2D>, eps: f64) -> Result<ScalarField2D> {
    let g = f.grid();
    if g.x() != strip.x() {
        return Err(Error::GridMismatch("outer and strip streamwise grids differ".into()));
    }
    let se = eps.sqrt();
    let zs: Vec<f64> = strip.y().iter().map(|&y| (se * y).min(1.0)).collect();
    let cols: Vec<Vec<f64>> = (0..g.nx()).map(|i| resample(g.y(), f.column(i), &zs)).collect();
    ScalarField2D::from_columns(strip.clone(), &cols)
}

/// Outer-corrector fields and derivatives evaluated at `z = sqrt(eps) y` on the strip grid.
#[derive(Debug, Clone)]
pub struct OuterOnStrip {
    pub v: ScalarField2D,
    pub v_x: ScalarField2D,
    pub v_z: ScalarField2D,
    pub v_zz: ScalarField2D,
    pub u: ScalarField2D,
    pub u_x: ScalarField2D,
    pub u_z: ScalarField2D,
    pub u_zz: ScalarField2D,
    pub p: ScalarField2D,
    pub p_x: ScalarField2D,
    /// `int_z^1 E_b`.
    pub eb_tail: ScalarField2D,
}

pub fn outer_on_strip(eo: &EulerOne, strip: &Arc<Grid2D>) -> Result<OuterOnStrip> {
    let s = |f: &ScalarField2D| sample_on_strip(f, strip, eo.eps);
    let g = eo.grid().clone();
    let tail_cols: Vec<Vec<f64>> =
        (0..g.nx()).map(|i| trapz_cumulative(g.y(), eo.e_b.column(i), From::End)).collect();
    let tail = ScalarField2D::from_columns(g, &tail_cols)?;
    Ok(OuterOnStrip {
        v: s(&eo.v_e1)?,
        v_x: s(&apply_diff(&eo.v_e1, DiffOp::Dx)?)?,
        v_z: s(&apply_diff(&eo.v_e1, DiffOp::Dy)?)?,
        v_zz: s(&apply_diff(&eo.v_e1, DiffOp::Dyy)?)?,
        u: s(&eo.u_e1)?,
        u_x: s(&apply_diff(&eo.u_e1, DiffOp::Dx)?)?,
        u_z: s(&apply_diff(&eo.u_e1, DiffOp::Dy)?)?,
        u_zz: s(&apply_diff(&eo.u_e1, DiffOp::Dyy)?)?,
        p: s(&eo.p_e1)?,
        p_x: s(&apply_diff(&eo.p_e1, DiffOp::Dx)?)?,
        eb_tail: s(&tail)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterResidualNorms {
    pub eps: f64,
    pub r_u1: f64,
    pub r_v0: f64,
    pub e0: f64,
}

#[derive(Debug, Clone)]
pub struct OuterResiduals {
    pub r_u1: ScalarField2D,
    pub r_v0: ScalarField2D,
    pub e0: ScalarField2D,
    pub norms: OuterResidualNorms,
}

/// `eps int_0^y (y - t) f''(sqrt(eps) t) dt` by two cumulative quadratures; equals
/// `f(sqrt(eps) y) - f(0) - sqrt(eps) y f'(0)`.
pub fn taylor_remainder(y: &[f64], f_zz: &[f64], eps: f64) -> Vec<f64> {
    let inner: Vec<f64> = f_zz.iter().map(|v| eps * v).collect();
    let g = trapz_cumulative(y, &inner, From::Start);
    trapz_cumulative(y, &g, From::Start)
}

/// Residual pieces left by the outer corrector on the strip of one viscosity.
pub fn euler_residuals(spec: &ProblemSpec, eo: &EulerOne, zero: &PrandtlZero) -> Result<OuterResiduals> {
    let eps = eo.eps;
    let se = eps.sqrt();
    let strip = zero.strip.clone();
    let outer = outer_on_strip(eo, &strip)?;
    let c = zero.v_p0.add(&outer.v)?;
    let r_u1 = fill(&strip, |i, j| {
        se * c.at(i, j) * outer.u_z.at(i, j) - eps * outer.u_zz.at(i, j) - outer.eb_tail.at(i, j)
    })?;
    let r_v0 = fill(&strip, |i, j| se * c.at(i, j) * outer.v_z.at(i, j) - eps * outer.v_zz.at(i, j))?;
    let e0 = outer_taylor_term(spec, zero, &outer, eps)?;
    let norms = OuterResidualNorms { eps, r_u1: l2(&r_u1), r_v0: l2(&r_v0), e0: l2(&e0) };
    Ok(OuterResiduals { r_u1, r_v0, e0, norms })
}

/// `u_p0_x [U(z) - U(0) - z U'(0)] + u_p0_y [V(x,z) - V(x,0) - z V_z(x,0)]` at `z = sqrt(eps) y`,
/// each bracket by nested quadrature of the second derivative.
pub fn outer_taylor_term(
    spec: &ProblemSpec,
    zero: &PrandtlZero,
    outer: &OuterOnStrip,
    eps: f64,
) -> Result<ScalarField2D> {
    let strip = zero.strip.clone();
    let y = strip.y();
    let se = eps.sqrt();
    let upx = apply_diff(&zero.u_p0, DiffOp::Dx)?;
    let upy = apply_diff(&zero.u_p0, DiffOp::Dy)?;
    let uzz: Vec<f64> = y.iter().map(|&t| spec.u_e0.d2((se * t).min(1.0))).collect();
    let tu = taylor_remainder(y, &uzz, eps);
    let mut out = Vec::with_capacity(strip.len());
    for i in 0..strip.nx() {
        let tv = taylor_remainder(y, outer.v_zz.column(i), eps);
        for j in 0..strip.ny() {
            out.push(upx.at(i, j) * tu[j] + upy.at(i, j) * tv[j]);
        }
    }
    ScalarField2D::new(strip, out)
}

/// Euler fields at the wall, interpolated onto the march grid: `(u, u_x, v, v_z)`.
pub fn wall_traces(eo: &EulerOne, xs: &[f64]) -> Result<[Vec<f64>; 4]> {
    let g = eo.grid();
    let u0: Vec<f64> = (0..g.nx()).map(|i| eo.u_e1.at(i, 0)).collect();
    let ux = apply_diff(&eo.u_e1, DiffOp::Dx)?;
    let vz = apply_diff(&eo.v_e1, DiffOp::Dy)?;
    let ux0: Vec<f64> = (0..g.nx()).map(|i| ux.at(i, 0)).collect();
    let v0: Vec<f64> = (0..g.nx()).map(|i| eo.v_e1.at(i, 0)).collect();
    let vz0: Vec<f64> = (0..g.nx()).map(|i| vz.at(i, 0)).collect();
    let r = |f: &[f64]| resample(g.x(), f, xs);
    Ok([r(&u0), r(&ux0), r(&v0), r(&vz0)])
}

/// Outer grid with the given node counts, used by refinement studies.
pub fn outer_grid(len: f64, nx: usize, nz: usize, x_stretch: f64, z_stretch: f64) -> Result<Arc<Grid2D>> {
    Ok(Arc::new(Grid2D::new(
        Grid1D::stretched(0.0, len, nx, x_stretch)?,
        Grid1D::stretched(0.0, 1.0, nz, z_stretch)?,
        DomainTag::Half,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::f64::consts::PI;

    fn spec(adjust: bool) -> ProblemSpec {
        ProblemSpec::from_json_value(&json!({
            "epsilon_list": [0.04, 0.01],
            "L": 0.25,
            "gamma": 0.1,
            "u_b": 2.0,
            "profiles": {
                "u_e0": {"kind": "polynomial", "params": {"coeffs": [1.0, 0.4, -0.2]}},
                "ubar0": {"kind": "exp_decay", "params": {"amplitude": 1.0, "rate": 1.0}}
            },
            "grids": {"nx": 33, "ny": 33},
            "adjust_compat": adjust
        }))
        .unwrap()
    }

    fn wall(g: &Grid2D) -> Vec<f64> {
        g.x().iter().map(|x| -0.3 - 0.2 * x).collect()
    }

    #[test]
    fn zero_data_gives_zero_lift() {
        let s = spec(false);
        let g = euler_grid(&s).unwrap();
        let lift = build_boundary_lift(&s, &g, &vec![0.0; g.nx()]).unwrap();
        assert_eq!(lift.inflow_branch, LiftBranch::Degenerate);
        assert_eq!(lift.b.max_abs(), 0.0);
        assert_eq!(lift.f_e.max_abs(), 0.0);
        let eo = solve_euler_one(&s, &lift, 0.01).unwrap();
        assert_eq!(eo.v_e1.max_abs(), 0.0);
        assert_eq!(eo.p_e1.max_abs(), 0.0);
    }

    #[test]
    fn ratio_lift_traces() {
        let s = spec(true);
        let g = euler_grid(&s).unwrap();
        let wv = wall(&g);
        let lift = build_boundary_lift(&s, &g, &wv).unwrap();
        assert_eq!(lift.inflow_branch, LiftBranch::Ratio);
        assert!(lift.trace_residuals.iter().all(|r| *r < 1e-12), "{:?}", lift.trace_residuals);
        // adjusted side data is -(1-z) times the corner trace, so the lift is -(1-z) v_w(x)
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                assert!((lift.b.at(i, j) + (1.0 - g.y()[j]) * wv[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn squared_side_data_reproduces_wall_trace() {
        let mut s = spec(false);
        let g = euler_grid(&s).unwrap();
        let wv = wall(&g);
        let (a, b) = (wv[0], *wv.last().unwrap());
        s.vb0 = Profile::Polynomial { coeffs: vec![a, -2.0 * a, a] };
        s.vbl = Profile::Polynomial { coeffs: vec![b, -2.0 * b, b] };
        let lift = build_boundary_lift(&s, &g, &wv).unwrap();
        for i in 0..g.nx() {
            assert!((lift.b.at(i, 0) - wv[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn forcing_support_and_scaling() {
        let s = spec(true);
        let g = outer_grid(0.25, 17, 401, 1.0, 50.0).unwrap();
        let wv: Vec<f64> = g.x().iter().map(|x| -0.3 - x * x).collect();
        let lift = build_boundary_lift(&s, &g, &wv).unwrap();
        let mut norms = Vec::new();
        for eps in [0.04, 0.01, 0.0025] {
            let eb = build_eb(&s, &lift, eps).unwrap();
            for i in 0..g.nx() {
                assert_eq!(eb.at(i, 0), lift.f_e.at(i, 0));
                for (j, z) in g.y().iter().enumerate() {
                    if *z >= eps + 1e-2 {
                        assert_eq!(eb.at(i, j), 0.0);
                    }
                }
            }
            norms.push(l2(&eb));
        }
        // |E_b|_2 ~ sqrt(eps)
        for w in norms.windows(2) {
            let slope = (w[0] / w[1]).ln() / 4f64.ln();
            assert!((slope - 0.5).abs() < 0.05, "slope {slope}");
        }
    }

    fn mms_error(n: usize) -> f64 {
        let u = Profile::Polynomial { coeffs: vec![1.0, 0.4, -0.2] };
        let len = 0.25;
        let g = outer_grid(len, n, n, 1.0, 1.0).unwrap();
        let exact = |x: f64, z: f64| (PI * x / len).sin() * (PI * z).sin();
        let rhs = ScalarField2D::from_fn(g.clone(), |x, z| {
            let k2 = PI * PI / (len * len) + PI * PI;
            u.eval(z) * k2 * exact(x, z) + u.d2(z) * exact(x, z)
        })
        .unwrap();
        let sol = solve_tilde_w(&g, &u, &rhs).unwrap();
        let want = ScalarField2D::from_fn(g, exact).unwrap();
        sol.w.sub(&want).unwrap().max_abs()
    }

    #[test]
    fn manufactured_solution_second_order() {
        let (a, b, c) = (mms_error(17), mms_error(33), mms_error(65));
        for r in [a / b, b / c] {
            let order = r.log2();
            assert!((1.9..2.1).contains(&order), "order {order}");
        }
    }

    #[test]
    fn coercive_on_random_probes() {
        let s = spec(false);
        let g = euler_grid(&s).unwrap();
        let alpha = coercivity_constant(&g, &s.u_e0, COERCIVITY_PROBES, COERCIVITY_SEED).unwrap();
        assert!(alpha > 0.0);
        assert_eq!(alpha, coercivity_constant(&g, &s.u_e0, COERCIVITY_PROBES, COERCIVITY_SEED).unwrap());
    }

    #[test]
    fn recovery_of_linear_in_x_field() {
        let s = spec(false);
        let g = outer_grid(0.25, 65, 129, 1.0, 1.0).unwrap();
        let v = ScalarField2D::from_fn(g.clone(), |x, z| (PI * z).sin() * x).unwrap();
        let (u, _) = recover_correctors(&s, &v).unwrap();
        let err = u
            .map_xy(|x, z, val| val - (-PI * (PI * z).cos() * x * x / 2.0))
            .unwrap()
            .max_abs();
        assert!(err < 1e-3, "{err}");
        let (u0, p0) = recover_correctors(&s, &ScalarField2D::zeros(g)).unwrap();
        assert_eq!(u0.max_abs(), 0.0);
        assert_eq!(p0.max_abs(), 0.0);
    }

    #[test]
    fn corrector_satisfies_momentum_identity() {
        let s = spec(true);
        let g = euler_grid(&s).unwrap();
        let wv: Vec<f64> = g.x().iter().map(|x| -0.3 - 0.5 * x * x).collect();
        let lift = build_boundary_lift(&s, &g, &wv).unwrap();
        let eo = solve_euler_one(&s, &lift, 0.04).unwrap();
        let d = &eo.diagnostics;
        assert!(d.bc_trace_residuals.iter().all(|r| *r < 1e-12));
        assert!(d.divergence_max < 1e-2, "{d:?}");
        assert!(d.momentum_identity_max < 5e-2, "{d:?}");
    }

    #[test]
    fn taylor_remainder_matches_closed_form() {
        let y: Vec<f64> = Grid1D::geometric(0.0, 5.0, 801, 1.003).unwrap().nodes().to_vec();
        let eps: f64 = 0.04;
        let se = eps.sqrt();
        let fzz: Vec<f64> = y.iter().map(|t| -(se * t).sin()).collect();
        let got = taylor_remainder(&y, &fzz, eps);
        for (k, t) in y.iter().enumerate() {
            let z = se * t;
            assert!((got[k] - (z.sin() - z)).abs() < 1e-5);
        }
    }
}
