//! Assembly of the two-term expansion on the scaled strip and evaluation of its residuals.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::euler1::{euler_residuals, outer_on_strip, EulerOne};
use crate::numerics::diff::{apply_diff, DiffOp};
use crate::numerics::field::ScalarField2D;
use crate::numerics::grid::{DomainTag, Grid1D, Grid2D};
use crate::numerics::quad::l2;
use crate::prandtl0::PrandtlZero;
use crate::prandtl1::PrandtlOne;
use crate::spec::ProblemSpec;

/// Default tolerance for the midline value of an odd extension.
pub const PARITY_TOL: f64 = 1e-10;

/// Every layer field on the strip grid `[0, L] x [0, 1/sqrt(eps)]`.
/// Outer fields are already evaluated at `z = sqrt(eps) y`.
#[derive(Debug, Clone)]
pub struct Components {
    /// Base shear flow `u_e0(sqrt(eps) y)`.
    pub shear: ScalarField2D,
    pub u_p0: ScalarField2D,
    pub v_p0: ScalarField2D,
    pub u_e1: ScalarField2D,
    pub v_e1: ScalarField2D,
    pub p_e1: ScalarField2D,
    pub u_p1: ScalarField2D,
    pub v_p1: ScalarField2D,
    pub p_p2: ScalarField2D,
}

impl Components {
    /// Shear flow only; every corrector is zero.
    pub fn shear_only(spec: &ProblemSpec, strip: Arc<Grid2D>, eps: f64) -> Result<Self> {
        let se = eps.sqrt();
        let shear = ScalarField2D::from_fn(strip.clone(), |_, y| spec.u_e0.eval((se * y).min(1.0)))?;
        let z = ScalarField2D::zeros(strip);
        Ok(Self {
            shear,
            u_p0: z.clone(),
            v_p0: z.clone(),
            u_e1: z.clone(),
            v_e1: z.clone(),
            p_e1: z.clone(),
            u_p1: z.clone(),
            v_p1: z.clone(),
            p_p2: z,
        })
    }

    fn all(&self) -> [&ScalarField2D; 9] {
        [
            &self.shear, &self.u_p0, &self.v_p0, &self.u_e1, &self.v_e1, &self.p_e1, &self.u_p1, &self.v_p1,
            &self.p_p2,
        ]
    }

    /// Largest absolute value over every corrector (all fields except the shear flow).
    pub fn corrector_max(&self) -> f64 {
        self.all()[1..].iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionSet {
    pub eps: f64,
    pub grid: Arc<Grid2D>,
    pub parts: Components,
    pub u_app: ScalarField2D,
    pub v_app: ScalarField2D,
    pub p_app: ScalarField2D,
}

impl ExpansionSet {
    pub fn from_components(eps: f64, parts: Components) -> Result<Self> {
        let grid = parts.shear.grid_arc().clone();
        for f in parts.all() {
            if !f.grid().same_nodes(&grid) {
                return Err(Error::GridMismatch("layer fields live on different strip grids".into()));
            }
        }
        let se = eps.sqrt();
        let u_app = parts.shear.add(&parts.u_p0)?.axpy(se, &parts.u_e1.add(&parts.u_p1)?)?;
        let v_app = parts.v_p0.add(&parts.v_e1)?.axpy(se, &parts.v_p1)?;
        let p_app = parts.p_e1.scale(se).axpy(eps, &parts.p_p2)?;
        Ok(Self { eps, grid, parts, u_app, v_app, p_app })
    }

    /// Worst deviation from the wall and midline conditions: `|u_app(x,0) - u_b|`,
    /// `|v_app(x,0)|`, `|v_app(x, 1/sqrt(eps))|`.
    pub fn boundary_defects(&self, u_b: f64) -> [f64; 3] {
        let ny = self.grid.ny();
        let mut d = [0.0f64; 3];
        for i in 0..self.grid.nx() {
            d[0] = d[0].max((self.u_app.at(i, 0) - u_b).abs());
            d[1] = d[1].max(self.v_app.at(i, 0).abs());
            d[2] = d[2].max(self.v_app.at(i, ny - 1).abs());
        }
        d
    }
}

/// Sums the layers computed for one viscosity.
pub fn assemble(spec: &ProblemSpec, zero: &PrandtlZero, euler: &EulerOne, first: &PrandtlOne) -> Result<ExpansionSet> {
    let eps = zero.eps;
    if (euler.eps - eps).abs() > 1e-15 || (first.eps - eps).abs() > 1e-15 {
        return Err(Error::GridMismatch(format!(
            "layers built for different viscosities: {eps}, {}, {}",
            euler.eps, first.eps
        )));
    }
    let strip = zero.strip.clone();
    let outer = outer_on_strip(euler, &strip)?;
    let base = Components::shear_only(spec, strip, eps)?;
    let parts = Components {
        shear: base.shear,
        u_p0: zero.u_p0.clone(),
        v_p0: zero.v_p0.clone(),
        u_e1: outer.u,
        v_e1: outer.v,
        p_e1: outer.p,
        u_p1: first.u_p1.clone(),
        v_p1: first.v_p1.clone(),
        p_p2: first.p_p2.clone(),
    };
    ExpansionSet::from_components(eps, parts)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualNorms {
    pub eps: f64,
    pub r_u_l2: f64,
    /// `sqrt(eps) |R^v|`.
    pub r_v_scaled_l2: f64,
    pub combined: f64,
}

#[derive(Debug, Clone)]
pub struct AppResidual {
    pub r_u: ScalarField2D,
    pub r_v: ScalarField2D,
    pub norms: ResidualNorms,
}

/// Plugs the assembled fields into the scaled steady equations:
/// `R^u = u u_x + v u_y + p_x - u_yy - eps u_xx`,
/// `R^v = u v_x + v v_y + p_y / eps - v_yy - eps v_xx`.
pub fn residual_app(exp: &ExpansionSet) -> Result<AppResidual> {
    let eps = exp.eps;
    let (u, v, p) = (&exp.u_app, &exp.v_app, &exp.p_app);
    let d = |f: &ScalarField2D, op| apply_diff(f, op);
    let (ux, uy, uyy, uxx) = (d(u, DiffOp::Dx)?, d(u, DiffOp::Dy)?, d(u, DiffOp::Dyy)?, d(u, DiffOp::Dxx)?);
    let (vx, vy, vyy, vxx) = (d(v, DiffOp::Dx)?, d(v, DiffOp::Dy)?, d(v, DiffOp::Dyy)?, d(v, DiffOp::Dxx)?);
    let (px, py) = (d(p, DiffOp::Dx)?, d(p, DiffOp::Dy)?);
    let g = exp.grid.clone();
    let mut ru = Vec::with_capacity(g.len());
    let mut rv = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let (a, b) = (u.at(i, j), v.at(i, j));
            ru.push(a * ux.at(i, j) + b * uy.at(i, j) + px.at(i, j) - uyy.at(i, j) - eps * uxx.at(i, j));
            rv.push(a * vx.at(i, j) + b * vy.at(i, j) + py.at(i, j) / eps - vyy.at(i, j) - eps * vxx.at(i, j));
        }
    }
    let r_u = ScalarField2D::new(g.clone(), ru)?;
    let r_v = ScalarField2D::new(g, rv)?;
    let r_u_l2 = l2(&r_u);
    let r_v_scaled_l2 = eps.sqrt() * l2(&r_v);
    let norms = ResidualNorms { eps, r_u_l2, r_v_scaled_l2, combined: r_u_l2 + r_v_scaled_l2 };
    Ok(AppResidual { r_u, r_v, norms })
}

/// The streamwise residual rebuilt from the per-layer remainders:
/// `E0 - eps u_e0'' + eps E2 + sqrt(eps) (R_1 + R~_1 + R^{u,1}_p)
///  + eps [(u_e1 + u_p1) d_x + v_p1 d_y](u_e1 + u_p1) + eps p2_x
///  - eps d_xx [u_p0 + sqrt(eps)(u_e1 + u_p1)]`.
pub fn layer_sum_residual(
    spec: &ProblemSpec,
    exp: &ExpansionSet,
    zero: &PrandtlZero,
    euler: &EulerOne,
    first: &PrandtlOne,
) -> Result<ScalarField2D> {
    let eps = exp.eps;
    let se = eps.sqrt();
    let g = exp.grid.clone();
    let outer_res = euler_residuals(spec, euler, zero)?;
    let p = &exp.parts;
    let w = p.u_e1.add(&p.u_p1)?;
    let wx = apply_diff(&w, DiffOp::Dx)?;
    let wy = apply_diff(&w, DiffOp::Dy)?;
    let lap = apply_diff(&p.u_p0.axpy(se, &w)?, DiffOp::Dxx)?;
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for (j, &y) in g.y().iter().enumerate() {
            let shear_zz = spec.u_e0.d2((se * y).min(1.0));
            let quad = w.at(i, j) * wx.at(i, j) + p.v_p1.at(i, j) * wy.at(i, j);
            out.push(
                outer_res.e0.at(i, j) - eps * shear_zz
                    + eps * zero.e2.at(i, j)
                    + se * (outer_res.r_u1.at(i, j) + first.r_tilde_u1.at(i, j) + first.r_p_u1.at(i, j))
                    + eps * quad
                    + eps * first.p_p2_x.at(i, j)
                    - eps * lap.at(i, j),
            );
        }
    }
    ScalarField2D::new(g, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Mirrors a field about its top y node, doubling the wall-normal extent.
/// Odd fields must vanish on the midline (within `tol`); the midline is then set to exactly 0.
pub fn symmetric_extend(f: &ScalarField2D, parity: Parity, tol: f64) -> Result<ScalarField2D> {
    let g = f.grid();
    let ny = g.ny();
    let top = g.gy.last();
    if parity == Parity::Odd {
        let worst = (0..g.nx()).map(|i| f.at(i, ny - 1)).fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if worst.abs() > tol {
            return Err(Error::ParityConflict { value: worst });
        }
    }
    let mut ys = g.y().to_vec();
    ys.extend(g.y()[..ny - 1].iter().rev().map(|y| 2.0 * top - y));
    let tag = match g.tag {
        DomainTag::Half => DomainTag::Physical,
        _ => DomainTag::HalfLine,
    };
    let grid = Arc::new(Grid2D::new(g.gx.clone(), Grid1D::from_nodes(ys)?, tag)?);
    let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
    let mut vals = Vec::with_capacity(grid.len());
    for i in 0..g.nx() {
        let c = f.column(i);
        vals.extend_from_slice(&c[..ny - 1]);
        vals.push(if parity == Parity::Even { c[ny - 1] } else { 0.0 });
        vals.extend(c[..ny - 1].iter().rev().map(|v| sign * v));
    }
    ScalarField2D::new(grid, vals)
}

/// Largest mirror defect `|f(y_top + d) - s f(y_top - d)|` over paired nodes of an extended field.
pub fn mirror_defect(ext: &ScalarField2D, parity: Parity) -> f64 {
    let n = ext.grid().ny();
    let mid = n / 2;
    let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
    let mut worst = 0.0f64;
    for i in 0..ext.grid().nx() {
        let c = ext.column(i);
        for k in 1..=mid {
            worst = worst.max((c[mid + k] - sign * c[mid - k]).abs());
        }
        if parity == Parity::Odd {
            worst = worst.max(c[mid].abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_grid(nx: usize, ny: usize) -> Arc<Grid2D> {
        Arc::new(
            Grid2D::new(
                Grid1D::uniform(0.0, 0.25, nx).unwrap(),
                Grid1D::geometric(0.0, 1.0, ny, 1.05).unwrap(),
                DomainTag::Half,
            )
            .unwrap(),
        )
    }

    #[test]
    fn even_extension_is_exactly_symmetric() {
        let f = ScalarField2D::from_fn(unit_grid(9, 33), |x, y| (PI * (1.0 - y)).cos() + x).unwrap();
        let e = symmetric_extend(&f, Parity::Even, PARITY_TOL).unwrap();
        assert_eq!(e.grid().ny(), 65);
        assert_eq!(e.grid().gy.last(), 2.0);
        assert_eq!(mirror_defect(&e, Parity::Even), 0.0);
    }

    #[test]
    fn odd_extension_rejects_nonzero_midline() {
        let f = ScalarField2D::from_fn(unit_grid(9, 17), |_, y| 0.3 * y).unwrap();
        match symmetric_extend(&f, Parity::Odd, PARITY_TOL) {
            Err(Error::ParityConflict { value }) => assert!((value - 0.3).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn odd_extension_keeps_the_slope_across_the_midline() {
        let g = Arc::new(
            Grid2D::new(Grid1D::uniform(0.0, 0.25, 9).unwrap(), Grid1D::uniform(0.0, 1.0, 41).unwrap(), DomainTag::Half)
                .unwrap(),
        );
        let f = ScalarField2D::from_fn(g, |_, y| (PI * (1.0 - y) / 2.0).sin()).unwrap();
        let e = symmetric_extend(&f, Parity::Odd, PARITY_TOL).unwrap();
        let dy = apply_diff(&e, DiffOp::Dy).unwrap();
        let mid = e.grid().ny() / 2;
        let h = 1.0 / 40.0;
        let one_sided = (f.at(0, 40) - f.at(0, 39)) / h;
        // centered slope through the mirrored node agrees with the one-sided slope to O(h^2)
        assert!((dy.at(0, mid) - one_sided).abs() < h * h, "{} vs {one_sided}", dy.at(0, mid));
        assert_eq!(mirror_defect(&e, Parity::Odd), 0.0);
    }
}
