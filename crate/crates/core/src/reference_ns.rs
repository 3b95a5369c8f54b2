//! Newton solver for the full steady equations on the scaled half channel.
//!
//! Staggered (MAC) layout on the strip grid: pressure at cell centres, the streamwise velocity
//! on vertical faces `(x_k, yc_l)`, the wall-normal velocity on horizontal faces `(xc_k, y_l)`.
//! Continuity holds cell by cell. Streamwise convection uses second-order backward differences
//! (the flow is to the right everywhere), everything else second-order central.
//!
//! Boundary rows: inflow `u` and the wall/midline `v` are Dirichlet rows; the wall velocity enters
//! through the `u_yy` stencil, the midline condition `u_y = 0` through a mirrored ghost. At the
//! outflow the normal stress `p - 2 eps u_x` and the shear stress `u_y + eps v_x` take the
//! expansion's trace values.

use std::sync::Arc;

use serde::Serialize;

use crate::assembly::ExpansionSet;
use crate::error::{Error, Result};
use crate::numerics::diff::{apply_diff, fd_weights, DiffOp};
use crate::numerics::field::ScalarField2D;
use crate::numerics::grid::Grid2D;
use crate::numerics::interp::{lagrange4, resample};
use crate::numerics::linear::solve_sparse;
use crate::numerics::quad::l2;
use crate::spec::ProblemSpec;

pub const NEWTON_TOL: f64 = 1e-9;
pub const NEWTON_MAX_ITERS: usize = 30;
pub const CONTINUATION_MAX_STEPS: usize = 2000;

#[derive(Debug, Clone)]
pub struct MacGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub xc: Vec<f64>,
    pub yc: Vec<f64>,
}

impl MacGrid {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() < 5 || y.len() < 5 {
            return Err(Error::GridTooSmall { needed: 5, got: x.len().min(y.len()) });
        }
        let mid = |v: &[f64]| v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect::<Vec<_>>();
        Ok(Self { x: x.to_vec(), y: y.to_vec(), xc: mid(x), yc: mid(y) })
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    fn ncx(&self) -> usize {
        self.xc.len()
    }

    fn ncy(&self) -> usize {
        self.yc.len()
    }

    pub fn n_u(&self) -> usize {
        self.nx() * self.ncy()
    }

    pub fn n_v(&self) -> usize {
        self.ncx() * self.ny()
    }

    pub fn n_p(&self) -> usize {
        self.ncx() * self.ncy()
    }

    pub fn dim(&self) -> usize {
        self.n_u() + self.n_v() + self.n_p()
    }

    pub fn iu(&self, k: usize, l: usize) -> usize {
        k * self.ncy() + l
    }

    pub fn iv(&self, k: usize, l: usize) -> usize {
        self.n_u() + k * self.ny() + l
    }

    pub fn ip(&self, k: usize, l: usize) -> usize {
        self.n_u() + self.n_v() + k * self.ncy() + l
    }

    fn top(&self) -> f64 {
        *self.y.last().unwrap()
    }

    fn len(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

/// Boundary data of the solve.
#[derive(Debug, Clone)]
pub struct NsBoundary {
    pub u_wall: f64,
    /// Inflow streamwise velocity at the cell-centre heights.
    pub u_in: Vec<f64>,
    /// Inflow wall-normal velocity at the grid heights.
    pub v_in: Vec<f64>,
    /// Outflow `p - 2 eps u_x` at the cell-centre heights.
    pub normal_stress: Vec<f64>,
    /// Outflow `u_y + eps v_x` at the grid heights.
    pub shear_stress: Vec<f64>,
}

/// Affine combination of unknowns.
#[derive(Debug, Clone, Default)]
struct Lin {
    c: f64,
    t: Vec<(usize, f64)>,
}

impl Lin {
    fn var(i: usize) -> Self {
        Self { c: 0.0, t: vec![(i, 1.0)] }
    }

    fn konst(c: f64) -> Self {
        Self { c, t: Vec::new() }
    }

    fn add_scaled(&mut self, s: f64, o: &Lin) {
        self.c += s * o.c;
        self.t.extend(o.t.iter().map(|&(i, w)| (i, s * w)));
    }

    fn scaled(mut self, s: f64) -> Self {
        self.c *= s;
        for t in &mut self.t {
            t.1 *= s;
        }
        self
    }

    fn value(&self, q: &[f64]) -> f64 {
        self.c + self.t.iter().map(|&(i, w)| w * q[i]).sum::<f64>()
    }

    fn combo(parts: &[(f64, &Lin)]) -> Self {
        let mut out = Lin::default();
        for (s, l) in parts {
            out.add_scaled(*s, l);
        }
        out
    }
}

/// `d^order/dx^order` at `x0` from values at `pts`.
fn deriv(x0: f64, pts: &[f64], vals: &[Lin], order: usize) -> Lin {
    let w = fd_weights(x0, pts, order);
    let mut out = Lin::default();
    for (wj, v) in w[order].iter().zip(vals) {
        out.add_scaled(*wj, v);
    }
    out
}

/// One equation: linear part plus a sum of products of affine forms.
#[derive(Debug, Default)]
struct RowForm {
    lin: Lin,
    prods: Vec<(Lin, Lin)>,
}

#[derive(Debug, Clone)]
pub struct NsProblem {
    pub eps: f64,
    pub mac: MacGrid,
    pub bc: NsBoundary,
    /// Subtracted from every row; zero for the physical problem.
    pub forcing: Vec<f64>,
}

impl NsProblem {
    pub fn new(eps: f64, mac: MacGrid, bc: NsBoundary) -> Result<Self> {
        if bc.u_in.len() != mac.ncy()
            || bc.normal_stress.len() != mac.ncy()
            || bc.v_in.len() != mac.ny()
            || bc.shear_stress.len() != mac.ny()
        {
            return Err(Error::GridMismatch("boundary data does not match the staggered grid".into()));
        }
        let n = mac.dim();
        Ok(Self { eps, mac, bc, forcing: vec![0.0; n] })
    }

    /// Boundary data from the inflow profiles and the expansion's outflow trace.
    pub fn from_expansion(spec: &ProblemSpec, exp: &ExpansionSet) -> Result<Self> {
        let eps = exp.eps;
        let se = eps.sqrt();
        let g = exp.grid.clone();
        let mac = MacGrid::new(g.x(), g.y())?;
        let u_in: Vec<f64> = mac
            .yc
            .iter()
            .map(|&y| {
                let z = (se * y).min(1.0);
                spec.u_e0.eval(z) + spec.ubar0.eval(y) + se * (spec.ub1.eval(z) + spec.ubar1.eval(y))
            })
            .collect();
        let v_in = exp.v_app.column(0).to_vec();
        let last = g.nx() - 1;
        let ux = apply_diff(&exp.u_app, DiffOp::Dx)?;
        let uy = apply_diff(&exp.u_app, DiffOp::Dy)?;
        let vx = apply_diff(&exp.v_app, DiffOp::Dx)?;
        let normal: Vec<f64> =
            (0..g.ny()).map(|j| exp.p_app.at(last, j) - 2.0 * eps * ux.at(last, j)).collect();
        let shear: Vec<f64> = (0..g.ny()).map(|j| uy.at(last, j) + eps * vx.at(last, j)).collect();
        let bc = NsBoundary {
            u_wall: spec.u_b,
            u_in,
            v_in,
            normal_stress: resample(g.y(), &normal, &mac.yc),
            shear_stress: shear,
        };
        Self::new(eps, mac, bc)
    }

    /// Sets the forcing so that `q` solves the discrete system exactly.
    pub fn manufacture(&mut self, q: &[f64]) {
        self.forcing = vec![0.0; q.len()];
        self.forcing = self.residual(q);
    }

    fn row(&self, r: usize) -> RowForm {
        let m = &self.mac;
        let (nu, nv) = (m.n_u(), m.n_v());
        if r < nu {
            let (k, l) = (r / m.ncy(), r % m.ncy());
            self.u_row(k, l)
        } else if r < nu + nv {
            let s = r - nu;
            self.v_row(s / m.ny(), s % m.ny())
        } else {
            let s = r - nu - nv;
            self.continuity_row(s / m.ncy(), s % m.ncy())
        }
    }

    /// Values and nodes of `u` along column `k` around cell-centre row `l`, with the wall value
    /// below the first centre and a mirrored ghost above the last.
    fn u_y_stencil(&self, k: usize, l: usize) -> ([f64; 3], [Lin; 3]) {
        let m = &self.mac;
        let ncy = m.ncy();
        let u = |j: usize| Lin::var(m.iu(k, j));
        if l == 0 {
            ([0.0, m.yc[0], m.yc[1]], [Lin::konst(self.bc.u_wall), u(0), u(1)])
        } else if l == ncy - 1 {
            ([m.yc[l - 1], m.yc[l], 2.0 * m.top() - m.yc[l]], [u(l - 1), u(l), u(l)])
        } else {
            ([m.yc[l - 1], m.yc[l], m.yc[l + 1]], [u(l - 1), u(l), u(l + 1)])
        }
    }

    fn u_row(&self, k: usize, l: usize) -> RowForm {
        let m = &self.mac;
        let eps = self.eps;
        let nx = m.nx();
        let u = |kk: usize| Lin::var(m.iu(kk, l));
        if k == 0 {
            return RowForm { lin: Lin::combo(&[(1.0, &u(0)), (-1.0, &Lin::konst(self.bc.u_in[l]))]), prods: vec![] };
        }
        if k == nx - 1 {
            let n = m.ncx();
            let p1 = Lin::var(m.ip(n - 1, l));
            let p2 = Lin::var(m.ip(n - 2, l));
            let s = (m.len() - m.xc[n - 1]) / (m.xc[n - 1] - m.xc[n - 2]);
            let p_out = Lin::combo(&[(1.0 + s, &p1), (-s, &p2)]);
            let ux = deriv(m.x[k], &m.x[k - 2..=k], &[u(k - 2), u(k - 1), u(k)], 1);
            let mut lin = Lin::combo(&[(1.0, &p_out), (-2.0 * eps, &ux)]);
            lin.c -= self.bc.normal_stress[l];
            return RowForm { lin, prods: vec![] };
        }
        let ks = if k >= 2 { k - 2 } else { 0 };
        let ux = deriv(m.x[k], &m.x[ks..ks + 3], &[u(ks), u(ks + 1), u(ks + 2)], 1);
        let uxx = deriv(m.x[k], &m.x[k - 1..=k + 1], &[u(k - 1), u(k), u(k + 1)], 2);
        let (pts, vals) = self.u_y_stencil(k, l);
        let uy = deriv(m.yc[l], &pts, &vals, 1);
        let uyy = deriv(m.yc[l], &pts, &vals, 2);
        // v at the face: linear in x between the neighbouring centres, mean of the two heights
        let wa = (m.xc[k] - m.x[k]) / (m.xc[k] - m.xc[k - 1]);
        let v_face = Lin::combo(&[
            (0.5 * wa, &Lin::var(m.iv(k - 1, l))),
            (0.5 * wa, &Lin::var(m.iv(k - 1, l + 1))),
            (0.5 * (1.0 - wa), &Lin::var(m.iv(k, l))),
            (0.5 * (1.0 - wa), &Lin::var(m.iv(k, l + 1))),
        ]);
        let px = Lin::combo(&[(1.0, &Lin::var(m.ip(k, l))), (-1.0, &Lin::var(m.ip(k - 1, l)))])
            .scaled(1.0 / (m.xc[k] - m.xc[k - 1]));
        let lin = Lin::combo(&[(1.0, &px), (-1.0, &uyy), (-eps, &uxx)]);
        RowForm { lin, prods: vec![(u(k), ux), (v_face, uy)] }
    }

    fn v_row(&self, k: usize, l: usize) -> RowForm {
        let m = &self.mac;
        let eps = self.eps;
        let (ny, n) = (m.ny(), m.ncx());
        let v = |kk: usize, ll: usize| Lin::var(m.iv(kk, ll));
        if l == 0 || l == ny - 1 {
            return RowForm { lin: v(k, l), prods: vec![] };
        }
        let v_in = Lin::konst(self.bc.v_in[l]);
        // streamwise line of v through the inflow value
        let line_x = |kk: isize| -> f64 { if kk < 0 { 0.0 } else { m.xc[kk as usize] } };
        let line_v = |kk: isize| -> Lin { if kk < 0 { v_in.clone() } else { v(kk as usize, l) } };
        let ks: isize = if k >= 2 { k as isize - 2 } else { -1 };
        let xs: Vec<f64> = (ks..ks + 3).map(line_x).collect();
        let vs: Vec<Lin> = (ks..ks + 3).map(line_v).collect();
        let vx = deriv(m.xc[k], &xs, &vs, 1);
        let vxx = if k + 1 < n {
            let kk = k as isize;
            let xs: Vec<f64> = (kk - 1..=kk + 1).map(line_x).collect();
            let vs: Vec<Lin> = (kk - 1..=kk + 1).map(line_v).collect();
            deriv(m.xc[k], &xs, &vs, 2)
        } else {
            // ghost beyond the outflow from the shear-stress condition
            let h = m.len() - m.xc[k];
            let uy_out = Lin::combo(&[
                (1.0, &Lin::var(m.iu(m.nx() - 1, l))),
                (-1.0, &Lin::var(m.iu(m.nx() - 1, l - 1))),
            ])
            .scaled(1.0 / (m.yc[l] - m.yc[l - 1]));
            let mut ghost = v(k, l);
            ghost.add_scaled(2.0 * h / eps, &Lin::konst(self.bc.shear_stress[l]));
            ghost.add_scaled(-2.0 * h / eps, &uy_out);
            deriv(m.xc[k], &[m.xc[k - 1], m.xc[k], m.len() + h], &[v(k - 1, l), v(k, l), ghost], 2)
        };
        let ys = &m.y[l - 1..=l + 1];
        let vv = [v(k, l - 1), v(k, l), v(k, l + 1)];
        let vy = deriv(m.y[l], ys, &vv, 1);
        let vyy = deriv(m.y[l], ys, &vv, 2);
        let wb = (m.yc[l] - m.y[l]) / (m.yc[l] - m.yc[l - 1]);
        let u_face = Lin::combo(&[
            (0.5 * wb, &Lin::var(m.iu(k, l - 1))),
            (0.5 * wb, &Lin::var(m.iu(k + 1, l - 1))),
            (0.5 * (1.0 - wb), &Lin::var(m.iu(k, l))),
            (0.5 * (1.0 - wb), &Lin::var(m.iu(k + 1, l))),
        ]);
        let py = Lin::combo(&[(1.0, &Lin::var(m.ip(k, l))), (-1.0, &Lin::var(m.ip(k, l - 1)))])
            .scaled(1.0 / ((m.yc[l] - m.yc[l - 1]) * eps));
        let lin = Lin::combo(&[(1.0, &py), (-1.0, &vyy), (-eps, &vxx)]);
        RowForm { lin, prods: vec![(u_face, vx), (v(k, l), vy)] }
    }

    fn continuity_row(&self, k: usize, l: usize) -> RowForm {
        let m = &self.mac;
        let hx = m.x[k + 1] - m.x[k];
        let hy = m.y[l + 1] - m.y[l];
        let lin = Lin::combo(&[
            (1.0 / hx, &Lin::var(m.iu(k + 1, l))),
            (-1.0 / hx, &Lin::var(m.iu(k, l))),
            (1.0 / hy, &Lin::var(m.iv(k, l + 1))),
            (-1.0 / hy, &Lin::var(m.iv(k, l))),
        ]);
        RowForm { lin, prods: vec![] }
    }

    pub fn residual(&self, q: &[f64]) -> Vec<f64> {
        (0..self.mac.dim())
            .map(|r| {
                let f = self.row(r);
                f.lin.value(q) + f.prods.iter().map(|(a, b)| a.value(q) * b.value(q)).sum::<f64>()
                    - self.forcing[r]
            })
            .collect()
    }

    /// Residual and Jacobian triplets.
    pub fn linearize(&self, q: &[f64]) -> (Vec<f64>, Vec<(usize, usize, f64)>) {
        let n = self.mac.dim();
        let mut res = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n * 16);
        for r in 0..n {
            let f = self.row(r);
            let mut val = f.lin.value(q) - self.forcing[r];
            jac.extend(f.lin.t.iter().map(|&(c, w)| (r, c, w)));
            for (a, b) in &f.prods {
                let (va, vb) = (a.value(q), b.value(q));
                val += va * vb;
                jac.extend(a.t.iter().map(|&(c, w)| (r, c, w * vb)));
                jac.extend(b.t.iter().map(|&(c, w)| (r, c, w * va)));
            }
            res.push(val);
        }
        (res, jac)
    }

    /// Jacobian-vector product.
    pub fn jacobian_apply(&self, q: &[f64], dq: &[f64]) -> Vec<f64> {
        let (_, jac) = self.linearize(q);
        let mut out = vec![0.0; q.len()];
        for (r, c, w) in jac {
            out[r] += w * dq[c];
        }
        out
    }

    /// Largest cell divergence.
    pub fn divergence_max(&self, q: &[f64]) -> f64 {
        let m = &self.mac;
        let mut worst = 0.0f64;
        for k in 0..m.ncx() {
            for l in 0..m.ncy() {
                worst = worst.max(self.continuity_row(k, l).lin.value(q).abs());
            }
        }
        worst
    }

    /// Samples nodal fields (on the strip grid) at the staggered positions.
    pub fn sample_nodal(&self, u: &ScalarField2D, v: &ScalarField2D, p: &ScalarField2D) -> Vec<f64> {
        let m = &self.mac;
        let mut q = vec![0.0; m.dim()];
        for k in 0..m.nx() {
            let col = resample(&m.y, u.column(k), &m.yc);
            for (l, val) in col.into_iter().enumerate() {
                q[m.iu(k, l)] = val;
            }
        }
        for l in 0..m.ny() {
            let row = resample(&m.x, &v.row(l), &m.xc);
            for (k, val) in row.into_iter().enumerate() {
                q[m.iv(k, l)] = val;
            }
        }
        let pc: Vec<Vec<f64>> = (0..m.nx()).map(|k| resample(&m.y, p.column(k), &m.yc)).collect();
        for l in 0..m.ncy() {
            let line: Vec<f64> = pc.iter().map(|c| c[l]).collect();
            for (k, val) in resample(&m.x, &line, &m.xc).into_iter().enumerate() {
                q[m.ip(k, l)] = val;
            }
        }
        for k in 0..m.ncx() {
            q[m.iv(k, 0)] = 0.0;
            q[m.iv(k, m.ny() - 1)] = 0.0;
        }
        for l in 0..m.ncy() {
            q[m.iu(0, l)] = self.bc.u_in[l];
        }
        q
    }

    /// Staggered unknowns interpolated to the grid nodes: `(u, v, p)`.
    pub fn to_nodal(&self, grid: &Arc<Grid2D>, q: &[f64]) -> Result<[ScalarField2D; 3]> {
        let m = &self.mac;
        if grid.x() != m.x.as_slice() || grid.y() != m.y.as_slice() {
            return Err(Error::GridMismatch("staggered grid does not match the node grid".into()));
        }
        let (nx, ny) = (m.nx(), m.ny());
        let top = m.top();
        // u: wall value below, mirrored ghost above
        let mut ys = vec![0.0];
        ys.extend_from_slice(&m.yc);
        ys.push(2.0 * top - m.yc[m.ncy() - 1]);
        let mut u_cols = Vec::with_capacity(nx);
        for k in 0..nx {
            let mut vals = vec![self.bc.u_wall];
            vals.extend((0..m.ncy()).map(|l| q[m.iu(k, l)]));
            vals.push(q[m.iu(k, m.ncy() - 1)]);
            u_cols.push(resample(&ys, &vals, &m.y));
        }
        // v: inflow value on the left
        let mut xs = vec![0.0];
        xs.extend_from_slice(&m.xc);
        let mut v_rows = Vec::with_capacity(ny);
        for l in 0..ny {
            let mut vals = vec![self.bc.v_in[l]];
            vals.extend((0..m.ncx()).map(|k| q[m.iv(k, l)]));
            v_rows.push(resample(&xs, &vals, &m.x));
        }
        let v_cols: Vec<Vec<f64>> = (0..nx).map(|k| (0..ny).map(|l| v_rows[l][k]).collect()).collect();
        // p: centres, extrapolated to the boundary nodes
        let p_lines: Vec<Vec<f64>> = (0..m.ncx())
            .map(|k| {
                let c: Vec<f64> = (0..m.ncy()).map(|l| q[m.ip(k, l)]).collect();
                m.y.iter().map(|&t| lagrange4(&m.yc, &c, t)).collect()
            })
            .collect();
        let p_cols: Vec<Vec<f64>> = (0..nx)
            .map(|k| {
                (0..ny)
                    .map(|l| {
                        let line: Vec<f64> = p_lines.iter().map(|c| c[l]).collect();
                        lagrange4(&m.xc, &line, m.x[k])
                    })
                    .collect()
            })
            .collect();
        Ok([
            ScalarField2D::from_columns(grid.clone(), &u_cols)?,
            ScalarField2D::from_columns(grid.clone(), &v_cols)?,
            ScalarField2D::from_columns(grid.clone(), &p_cols)?,
        ])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub continuation_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: NEWTON_TOL, max_iters: NEWTON_MAX_ITERS, continuation_steps: CONTINUATION_MAX_STEPS }
    }
}

#[derive(Debug, Clone)]
pub struct NsSolution {
    pub eps: f64,
    pub q: Vec<f64>,
    pub u: ScalarField2D,
    pub v: ScalarField2D,
    pub p: ScalarField2D,
    pub newton_iters: usize,
    pub continuation_steps: usize,
    pub final_residual: f64,
    /// Largest Newton update of the last iteration.
    pub last_update: f64,
    pub divergence_max: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton with backtracking: `(q, iterations, residual, last update, converged)`.
fn newton(problem: &NsProblem, mut q: Vec<f64>, opts: &NewtonOptions) -> Result<(Vec<f64>, usize, f64, f64, bool)> {
    let (mut res, mut jac) = problem.linearize(&q);
    let mut norm = inf_norm(&res);
    let mut last_update = 0.0;
    for it in 1..=opts.max_iters {
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let dq = solve_sparse(q.len(), &jac, &rhs)?;
        last_update = inf_norm(&dq);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = q.iter().zip(&dq).map(|(a, d)| a + step * d).collect();
            let (r_new, j_new) = problem.linearize(&trial);
            let n_new = inf_norm(&r_new);
            if n_new.is_finite() && (n_new < norm || n_new <= opts.tol) {
                q = trial;
                res = r_new;
                jac = j_new;
                norm = n_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        log::debug!("newton eps={} iter {it}: residual {norm:e}, update {last_update:e}", problem.eps);
        if !accepted {
            return Ok((q, it, norm, last_update, false));
        }
        if norm <= opts.tol {
            return Ok((q, it, norm, last_update, true));
        }
    }
    Ok((q, opts.max_iters, norm, last_update, false))
}

/// Pseudo-time continuation on the momentum rows, with the step grown as the residual drops.
fn continuation(problem: &NsProblem, mut q: Vec<f64>, opts: &NewtonOptions) -> Result<(Vec<f64>, usize, f64)> {
    let m = &problem.mac;
    let momentum: Vec<bool> = (0..m.dim())
        .map(|r| {
            if r < m.n_u() {
                let k = r / m.ncy();
                k > 0 && k + 1 < m.nx()
            } else if r < m.n_u() + m.n_v() {
                let l = (r - m.n_u()) % m.ny();
                l > 0 && l + 1 < m.ny()
            } else {
                false
            }
        })
        .collect();
    let mut dt = 1e-2;
    let (mut res, mut jac) = problem.linearize(&q);
    let mut norm = inf_norm(&res);
    for step in 1..=opts.continuation_steps {
        for (r, is_mom) in momentum.iter().enumerate() {
            if *is_mom {
                jac.push((r, r, 1.0 / dt));
            }
        }
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let dq = solve_sparse(q.len(), &jac, &rhs)?;
        let trial: Vec<f64> = q.iter().zip(&dq).map(|(a, d)| a + d).collect();
        let (r_new, j_new) = problem.linearize(&trial);
        let n_new = inf_norm(&r_new);
        if !n_new.is_finite() {
            dt *= 0.25;
            let (r0, j0) = problem.linearize(&q);
            res = r0;
            jac = j0;
            continue;
        }
        dt = (dt * (norm / n_new).clamp(0.5, 4.0)).min(1e8);
        q = trial;
        res = r_new;
        jac = j_new;
        norm = n_new;
        if norm <= opts.tol || dt >= 1e8 {
            return Ok((q, step, norm));
        }
    }
    Ok((q, opts.continuation_steps, norm))
}

/// Newton solve from the given start; falls back to pseudo-time continuation when Newton stalls.
pub fn solve_problem(problem: &NsProblem, grid: &Arc<Grid2D>, q0: Vec<f64>, opts: &NewtonOptions) -> Result<NsSolution> {
    let (mut q, mut iters, mut norm, mut last_update, ok) = newton(problem, q0.clone(), opts)?;
    let mut cont_steps = 0;
    if !ok {
        log::warn!("newton stalled at eps = {} (residual {norm:e}); switching to continuation", problem.eps);
        let (qc, steps, _) = continuation(problem, q0, opts)?;
        cont_steps = steps;
        let (q2, it2, n2, u2, ok2) = newton(problem, qc, opts)?;
        if !ok2 {
            return Err(Error::NewtonDiverged { iterations: iters + it2 + steps, residual: n2 });
        }
        q = q2;
        iters += it2;
        norm = n2;
        last_update = u2;
    }
    let [u, v, p] = problem.to_nodal(grid, &q)?;
    let divergence_max = problem.divergence_max(&q);
    Ok(NsSolution {
        eps: problem.eps,
        q,
        u,
        v,
        p,
        newton_iters: iters,
        continuation_steps: cont_steps,
        final_residual: norm,
        last_update,
        divergence_max,
    })
}

/// Warm-started solve from the assembled expansion.
pub fn solve_steady_ns(spec: &ProblemSpec, exp: &ExpansionSet, opts: &NewtonOptions) -> Result<(NsProblem, NsSolution)> {
    let problem = NsProblem::from_expansion(spec, exp)?;
    let q0 = problem.sample_nodal(&exp.u_app, &exp.v_app, &exp.p_app);
    let sol = solve_problem(&problem, &exp.grid, q0, opts)?;
    Ok((problem, sol))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NsResidualReport {
    pub discrete_inf: f64,
    pub discrete_l2: f64,
    /// Nodal residual of the momentum equations with central differences on the node grid.
    pub nodal_u_l2: f64,
    pub nodal_v_l2: f64,
    pub divergence_max: f64,
    pub converged: bool,
}

/// Re-evaluates the staggered residual and, independently, the nodal residual of the interpolated fields.
pub fn ns_residual(problem: &NsProblem, sol: &NsSolution) -> Result<NsResidualReport> {
    let r = problem.residual(&sol.q);
    let discrete_inf = inf_norm(&r);
    let discrete_l2 = (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt();
    let eps = problem.eps;
    let d = |f: &ScalarField2D, op| apply_diff(f, op);
    let (u, v, p) = (&sol.u, &sol.v, &sol.p);
    let (ux, uy, uyy, uxx) = (d(u, DiffOp::Dx)?, d(u, DiffOp::Dy)?, d(u, DiffOp::Dyy)?, d(u, DiffOp::Dxx)?);
    let (vx, vy, vyy, vxx) = (d(v, DiffOp::Dx)?, d(v, DiffOp::Dy)?, d(v, DiffOp::Dyy)?, d(v, DiffOp::Dxx)?);
    let (px, py) = (d(p, DiffOp::Dx)?, d(p, DiffOp::Dy)?);
    let ru = u.mul(&ux)?.add(&v.mul(&uy)?)?.add(&px)?.sub(&uyy)?.axpy(-eps, &uxx)?;
    let rv = u.mul(&vx)?.add(&v.mul(&vy)?)?.axpy(1.0 / eps, &py)?.sub(&vyy)?.axpy(-eps, &vxx)?;
    Ok(NsResidualReport {
        discrete_inf,
        discrete_l2,
        nodal_u_l2: l2(&ru),
        nodal_v_l2: l2(&rv),
        divergence_max: problem.divergence_max(&sol.q),
        converged: discrete_inf <= 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::{DomainTag, Grid1D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_problem(eps: f64, nx: usize, ny: usize) -> (NsProblem, Arc<Grid2D>) {
        let gx = Grid1D::uniform(0.0, 1.0, nx).unwrap();
        let gy = Grid1D::stretched(0.0, 3.0, ny, 4.0).unwrap();
        let grid = Arc::new(Grid2D::new(gx, gy, DomainTag::HalfLine).unwrap());
        let mac = MacGrid::new(grid.x(), grid.y()).unwrap();
        let bc = NsBoundary {
            u_wall: 1.0,
            u_in: vec![1.0; ny - 1],
            v_in: vec![0.0; ny],
            normal_stress: vec![0.0; ny - 1],
            shear_stress: vec![0.0; ny],
        };
        (NsProblem::new(eps, mac, bc).unwrap(), grid)
    }

    fn random_state(p: &NsProblem, seed: u64, amp: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = &p.mac;
        let mut q = vec![0.0; m.dim()];
        for k in 0..m.nx() {
            for l in 0..m.ncy() {
                q[m.iu(k, l)] = 1.0 + amp * rng.random_range(-1.0..1.0);
            }
        }
        for r in m.n_u()..m.dim() {
            q[r] = amp * rng.random_range(-1.0..1.0);
        }
        q
    }

    #[test]
    fn uniform_stream_is_exact() {
        let (p, grid) = uniform_problem(0.05, 9, 11);
        let q = random_state(&p, 1, 0.0);
        assert!(inf_norm(&p.residual(&q)) < 1e-12);
        let sol = solve_problem(&p, &grid, q, &NewtonOptions::default()).unwrap();
        assert!(sol.final_residual < 1e-12);
        assert!(sol.last_update < 1e-12);
        assert!((sol.u.max() - 1.0).abs() < 1e-12 && (sol.u.min() - 1.0).abs() < 1e-12);
        assert!(sol.v.max_abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (p, _) = uniform_problem(0.05, 9, 11);
        let q = random_state(&p, 2, 0.3);
        let dq = random_state(&p, 3, 1.0);
        let h = 1e-3;
        let plus: Vec<f64> = q.iter().zip(&dq).map(|(a, d)| a + h * d).collect();
        let minus: Vec<f64> = q.iter().zip(&dq).map(|(a, d)| a - h * d).collect();
        let (rp, rm) = (p.residual(&plus), p.residual(&minus));
        let jv = p.jacobian_apply(&q, &dq);
        let scale = inf_norm(&jv).max(1.0);
        for r in 0..jv.len() {
            // rows are at most quadratic, so the central difference is exact up to rounding
            assert!(((rp[r] - rm[r]) / (2.0 * h) - jv[r]).abs() < 1e-7 * scale, "row {r}");
        }
    }

    #[test]
    fn manufactured_state_is_recovered() {
        let (mut p, grid) = uniform_problem(0.02, 11, 13);
        let target = random_state(&p, 4, 0.05);
        p.manufacture(&target);
        let start: Vec<f64> = target.iter().zip(random_state(&p, 5, 0.01)).map(|(a, b)| a + b).collect();
        let sol = solve_problem(&p, &grid, start, &NewtonOptions::default()).unwrap();
        assert!(sol.newton_iters <= 6, "{}", sol.newton_iters);
        let err = sol.q.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn discrete_continuity_holds_at_convergence() {
        let (mut p, grid) = uniform_problem(0.02, 11, 13);
        p.bc.u_wall = 1.5;
        let sol = solve_problem(&p, &grid, random_state(&p, 6, 0.0), &NewtonOptions::default()).unwrap();
        assert!(sol.divergence_max <= 1e-8, "{}", sol.divergence_max);
        let rep = ns_residual(&p, &sol).unwrap();
        assert!(rep.converged);
        // inflow rows are Dirichlet
        for l in 0..p.mac.yc.len() {
            assert_eq!(sol.q[p.mac.iu(0, l)], p.bc.u_in[l]);
        }
    }

    #[test]
    fn mismatched_boundary_data_is_rejected() {
        let (p, _) = uniform_problem(0.05, 9, 11);
        let mut bc = p.bc.clone();
        bc.u_in.pop();
        assert!(matches!(NsProblem::new(0.05, p.mac.clone(), bc), Err(Error::GridMismatch(_))));
        assert!(matches!(MacGrid::new(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0, 3.0, 4.0]), Err(Error::GridTooSmall { .. })));
    }
}
