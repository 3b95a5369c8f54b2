//! First-order boundary-layer corrector: linear parabolic march on the half-line with the
//! vertical velocity eliminated through continuity, cutoff to the strip, and the second-order
//! layer pressure.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::euler1::{outer_on_strip, EulerOne};
use crate::numerics::diff::Stencil;
use crate::numerics::field::ScalarField2D;
use crate::numerics::grid::{DomainTag, Grid2D};
use crate::numerics::interp::resample;
use crate::numerics::linear::Banded;
use crate::numerics::quad::{l2, trapz_cumulative, weighted_norm, From, WeightedNorm};
use crate::numerics::{apply_diff, DiffOp};
use crate::prandtl0::{PrandtlZero, ZerothFine};
use crate::spec::ProblemSpec;

pub const COERCIVITY_PROBES_LAYER: usize = 200;
pub const COERCIVITY_SEED_LAYER: u64 = 0x5eed_f4;

/// Sign of the zeroth-order commutator term inside the first-order forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CommutatorSign {
    /// `F_p = ... - E1`, the sign in the defining system.
    #[default]
    Minus,
    Plus,
}

impl CommutatorSign {
    pub fn as_str(self) -> &'static str {
        match self {
            CommutatorSign::Minus => "minus",
            CommutatorSign::Plus => "plus",
        }
    }
}

impl std::str::FromStr for CommutatorSign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "minus" | "-" => Ok(CommutatorSign::Minus),
            "plus" | "+" => Ok(CommutatorSign::Plus),
            other => Err(format!("unknown sign '{other}', expected 'minus' or 'plus'")),
        }
    }
}

/// Coefficients of `u0 u_x + u0_x u + u0_y v + c u_y - u_yy = f`, `u_x + v_y = 0`.
#[derive(Debug, Clone)]
pub struct MarchCoefficients {
    pub u0: ScalarField2D,
    pub u0_x: ScalarField2D,
    pub u0_y: ScalarField2D,
    pub c: ScalarField2D,
    pub forcing: ScalarField2D,
}

/// Implicit march. `wall[i]` is the Dirichlet value at y = 0, `inflow` the profile at x = 0;
/// `u` vanishes at the top and `v` at the wall.
pub fn march_linear(co: &MarchCoefficients, wall: &[f64], inflow: &[f64]) -> Result<(ScalarField2D, ScalarField2D)> {
    let g = co.u0.grid_arc().clone();
    let (nx, ny) = (g.nx(), g.ny());
    let (x, y) = (g.x(), g.y());
    if wall.len() != nx || inflow.len() != ny {
        return Err(Error::GridMismatch("march boundary data does not match the grid".into()));
    }
    if co.u0.min() <= 0.0 {
        let k = co.u0.values().iter().position(|v| *v <= 0.0).unwrap();
        return Err(Error::PositivityViolated { x: x[k / ny], min: co.u0.min() });
    }
    let s1 = Stencil::new(y, 1)?;
    let s2 = Stencil::new(y, 2)?;
    let n = 2 * ny;
    let mut band = Banded::new(n, 3, 2);
    let mut u_cols = Vec::with_capacity(nx);
    let mut v_cols = Vec::with_capacity(nx);
    let mut prev = inflow.to_vec();
    prev[0] = wall[0];
    prev[ny - 1] = 0.0;
    u_cols.push(prev.clone());
    // continuity at the inflow from the profile's own streamwise change is unknown; the
    // first station's v comes out of the first implicit step
    v_cols.push(vec![0.0; ny]);
    let mut rhs = vec![0.0; n];
    for i in 1..nx {
        let dx = x[i] - x[i - 1];
        band.clear();
        rhs.iter_mut().for_each(|r| *r = 0.0);
        let (u0, u0x, u0y, c, f) =
            (co.u0.column(i), co.u0_x.column(i), co.u0_y.column(i), co.c.column(i), co.forcing.column(i));
        band.add(0, 0, 1.0);
        rhs[0] = wall[i];
        band.add(1, 1, 1.0);
        for j in 1..ny - 1 {
            let r = 2 * j;
            let (o1, w1) = (s1.rows[j].0, &s1.rows[j].1);
            let (o2, w2) = (s2.rows[j].0, &s2.rows[j].1);
            band.add(r, r, u0[j] / dx + u0x[j]);
            for k in 0..3 {
                band.add(r, 2 * (o1 + k), c[j] * w1[k]);
                band.add(r, 2 * (o2 + k), -w2[k]);
            }
            band.add(r, r + 1, u0y[j]);
            rhs[r] = f[j] + u0[j] * prev[j] / dx;
        }
        band.add(2 * (ny - 1), 2 * (ny - 1), 1.0);
        for j in 1..ny {
            let r = 2 * j + 1;
            let h = 0.5 * (y[j] - y[j - 1]) / dx;
            band.add(r, r, 1.0);
            band.add(r, r - 2, -1.0);
            band.add(r, 2 * j, h);
            band.add(r, 2 * (j - 1), h);
            rhs[r] = h * (prev[j] + prev[j - 1]);
        }
        band.solve(&mut rhs).ok_or(Error::StationSingular { x: x[i] })?;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::StationSingular { x: x[i] });
        }
        let u: Vec<f64> = (0..ny).map(|j| rhs[2 * j]).collect();
        let v: Vec<f64> = (0..ny).map(|j| rhs[2 * j + 1]).collect();
        if i == 1 {
            v_cols[0] = v.clone();
        }
        prev = u.clone();
        u_cols.push(u);
        v_cols.push(v);
    }
    Ok((ScalarField2D::from_columns(g.clone(), &u_cols)?, ScalarField2D::from_columns(g, &v_cols)?))
}

/// Outer-corrector fields on the march grid times the half-line grid, extended past z = 1 by
/// `U(z) = U(1)`, `u1(x, z) = u1(x, 1)` and `v1 = 0`.
#[derive(Debug, Clone)]
pub struct OuterOnLayer {
    pub u: ScalarField2D,
    pub u_x: ScalarField2D,
    pub v: ScalarField2D,
    pub v_x: ScalarField2D,
    pub v_z: ScalarField2D,
    /// `U'(sqrt(eps) y)`.
    pub ue_z: Vec<f64>,
    /// `U(sqrt(eps) y)`.
    pub ue: Vec<f64>,
}

pub fn outer_on_layer(spec: &ProblemSpec, eo: &EulerOne, zf: &ZerothFine) -> Result<OuterOnLayer> {
    let se = zf.eps.sqrt();
    let g = zf.grid.clone();
    let eg = eo.grid();
    let y = g.y();
    let zs: Vec<f64> = y.iter().map(|&t| (se * t).min(1.0)).collect();
    let inside: Vec<bool> = y.iter().map(|&t| se * t < 1.0).collect();
    let sample = |f: &ScalarField2D, vanish_outside: bool| -> Result<ScalarField2D> {
        // along z on the outer grid, then along x onto the march stations
        let cols: Vec<Vec<f64>> = (0..eg.nx())
            .map(|i| {
                let mut c = resample(eg.y(), f.column(i), &zs);
                if vanish_outside {
                    for (v, keep) in c.iter_mut().zip(&inside) {
                        if !keep {
                            *v = 0.0;
                        }
                    }
                }
                c
            })
            .collect();
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny() {
            let row: Vec<f64> = cols.iter().map(|c| c[j]).collect();
            for (i, v) in resample(eg.x(), &row, g.x()).into_iter().enumerate() {
                out[g.idx(i, j)] = v;
            }
        }
        ScalarField2D::new(g.clone(), out)
    };
    let ue_z = y.iter().map(|&t| if se * t < 1.0 { spec.u_e0.d1(se * t) } else { 0.0 }).collect();
    let ue = y.iter().map(|&t| spec.u_e0.eval((se * t).min(1.0))).collect();
    Ok(OuterOnLayer {
        u: sample(&eo.u_e1, false)?,
        u_x: sample(&apply_diff(&eo.u_e1, DiffOp::Dx)?, false)?,
        v: sample(&eo.v_e1, true)?,
        v_x: sample(&apply_diff(&eo.v_e1, DiffOp::Dx)?, true)?,
        v_z: sample(&apply_diff(&eo.v_e1, DiffOp::Dy)?, true)?,
        ue_z,
        ue,
    })
}

/// `-u0_px u1 - u0_p u1_x - (v0_p + y u0_px) U' - y u0_py v1_z -+ E1`.
pub fn build_fp(zf: &ZerothFine, outer: &OuterOnLayer, sign: CommutatorSign) -> Result<ScalarField2D> {
    let g = zf.grid.clone();
    let y = g.y();
    let s = match sign {
        CommutatorSign::Minus => -1.0,
        CommutatorSign::Plus => 1.0,
    };
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for (j, &yj) in y.iter().enumerate() {
            let upx = zf.u_p0_x.at(i, j);
            out.push(
                -upx * outer.u.at(i, j)
                    - zf.u_p0.at(i, j) * outer.u_x.at(i, j)
                    - (zf.v_p0.at(i, j) + yj * upx) * outer.ue_z[j]
                    - yj * zf.u_p0_y.at(i, j) * outer.v_z.at(i, j)
                    + s * zf.e1.at(i, j),
            );
        }
    }
    ScalarField2D::new(g, out)
}

/// `[[v, v]] = int v_y^2 + (u0_yy / u0) v^2` at one station, with edge differences.
pub fn layer_form(y: &[f64], u0: &[f64], u0_yy: &[f64], v: &[f64]) -> (f64, f64) {
    let w = crate::numerics::grid::trapz_weights(y);
    let (mut grad, mut pot) = (0.0, 0.0);
    for j in 0..y.len() {
        pot += w[j] * u0_yy[j] / u0[j] * v[j] * v[j];
        if j + 1 < y.len() {
            let h = y[j + 1] - y[j];
            let d = (v[j + 1] - v[j]) / h;
            grad += h * d * d;
        }
    }
    (grad + pot, grad)
}

/// Background `(u_e + u_p0, u_p0_yy)` at every `stride`-th march station.
pub fn layer_stations(zf: &ZerothFine, u_e: f64, stride: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..zf.grid.nx())
        .step_by(stride.max(1))
        .map(|i| (zf.u_p0.column(i).iter().map(|v| u_e + v).collect(), zf.u_p0_yy.column(i).to_vec()))
        .collect()
}

/// Smallest `[[v,v]] / |v_y|^2` over seeded probes vanishing at both ends, over the given stations.
pub fn layer_coercivity(y: &[f64], stations: &[(Vec<f64>, Vec<f64>)], probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = y.len();
    let top = *y.last().unwrap();
    let mut alpha = f64::INFINITY;
    for p in 0..probes {
        let v: Vec<f64> = if p % 2 == 0 {
            (0..n).map(|j| if j == 0 || j == n - 1 { 0.0 } else { rng.random_range(-1.0..1.0) }).collect()
        } else {
            let c = rng.random_range(0.0..0.3) * top;
            let r = rng.random_range(0.2..5.0);
            let k = rng.random_range(1..4) as f64;
            y.iter()
                .map(|&t| (-((t - c) / r).powi(2)).exp() * (k * std::f64::consts::PI * t / top).sin())
                .collect()
        };
        for (u0, u0_yy) in stations {
            let (form, grad) = layer_form(y, u0, u0_yy, &v);
            if grad > 0.0 {
                alpha = alpha.min(form / grad);
            }
        }
    }
    alpha
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstOrderNorms {
    pub eps: f64,
    pub r_p_u1: f64,
    pub r_p_u1_substituted: f64,
    pub r_tilde_u1: f64,
    pub p_p2_x: f64,
    pub f_p_weighted: f64,
    pub u_p_inf: f64,
    pub v_p_inf: f64,
    pub phi_mismatch: f64,
    pub alpha_4th: f64,
}

/// First-order layer corrector for one viscosity.
#[derive(Debug, Clone)]
pub struct PrandtlOne {
    pub eps: f64,
    /// Half-line fields on the march grid.
    pub f_p: ScalarField2D,
    pub u_p: ScalarField2D,
    pub v_p: ScalarField2D,
    pub psi: ScalarField2D,
    pub phi: ScalarField2D,
    /// Strip fields on the shared streamwise grid.
    pub u_p1: ScalarField2D,
    pub v_p1: ScalarField2D,
    pub r_p_u1: ScalarField2D,
    pub r_p_u1_substituted: ScalarField2D,
    pub r_tilde_u1: ScalarField2D,
    pub p_p2: ScalarField2D,
    pub p_p2_x: ScalarField2D,
    pub norms: FirstOrderNorms,
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

pub fn solve_prandtl_one(
    spec: &ProblemSpec,
    zero: &PrandtlZero,
    eo: &EulerOne,
    sign: CommutatorSign,
) -> Result<PrandtlOne> {
    let zf = &zero.fine;
    let eps = zf.eps;
    let se = eps.sqrt();
    let g = zf.grid.clone();
    let (nx, ny) = (g.nx(), g.ny());
    let y = g.y().to_vec();
    let u_e = spec.u_e();
    let outer = outer_on_layer(spec, eo, zf)?;
    let f_p = build_fp(zf, &outer, sign)?;

    let co = MarchCoefficients {
        u0: zf.u_p0.map(|v| u_e + v)?,
        u0_x: zf.u_p0_x.clone(),
        u0_y: zf.u_p0_y.clone(),
        c: zf.v_p0.add(&outer.v)?,
        forcing: f_p.clone(),
    };
    let wall: Vec<f64> = (0..nx).map(|i| -outer.u.at(i, 0)).collect();
    let top = 1.0 / se;
    let inflow: Vec<f64> = y.iter().map(|&t| spec.ubar1.eval(t.min(top))).collect();
    let (u_p, v_p) = march_linear(&co, &wall, &inflow)?;

    // stream function and the flux-form identity
    let psi_cols: Vec<Vec<f64>> = (0..nx).map(|i| trapz_cumulative(&y, u_p.column(i), From::Start)).collect();
    let psi = ScalarField2D::from_columns(g.clone(), &psi_cols)?;
    let phi = fill(&g, |i, j| co.u0.at(i, j) * u_p.at(i, j) - co.u0_y.at(i, j) * psi.at(i, j))?;
    let phi_x = apply_diff(&phi, DiffOp::Dx)?;
    let upy = apply_diff(&u_p, DiffOp::Dy)?;
    let upyy = apply_diff(&u_p, DiffOp::Dyy)?;
    let want = fill(&g, |i, j| {
        -zf.u_p0_xy.at(i, j) * psi.at(i, j) - co.c.at(i, j) * upy.at(i, j) + upyy.at(i, j) + f_p.at(i, j)
    })?;
    let phi_mismatch = l2(&phi_x.sub(&want)?) / l2(&want).max(1e-300);

    let stride = spec.grids.march_refine.max(1);
    let stations = layer_stations(zf, u_e, stride);
    let alpha_4th = layer_coercivity(&y, &stations, COERCIVITY_PROBES_LAYER, COERCIVITY_SEED_LAYER);
    if !(alpha_4th > 0.0) {
        log::warn!("layer quadratic form is not coercive: {alpha_4th:e}");
    }

    // cutoff on the half-line grid, then restriction to the strip
    let chi: Vec<[f64; 4]> = y
        .iter()
        .enumerate()
        .map(|(j, &t)| if j + 1 == zf.ny_strip { spec.chi.eval_left(1.0) } else { spec.chi.eval(se * t.min(top)) })
        .collect();
    let u_p1_f = fill(&g, |i, j| chi[j][0] * u_p.at(i, j) + se * chi[j][1] * psi.at(i, j))?;
    let v_p1_f = fill(&g, |i, j| chi[j][0] * v_p.at(i, j))?;
    let u0x = &co.u0_x;
    let terms_f = fill(&g, |i, j| {
        let [c0, c1, c2, c3] = chi[j];
        let (u, v, ps, cc) = (u_p.at(i, j), v_p.at(i, j), psi.at(i, j), co.c.at(i, j));
        (c0 - 1.0) * f_p.at(i, j) - se * c1 * co.u0.at(i, j) * v + se * c1 * u0x.at(i, j) * ps
            + 2.0 * se * c1 * cc * u
            - 3.0 * se * c1 * upy.at(i, j)
            + eps * c2 * cc * ps
            - 3.0 * eps * c2 * u
            - eps * se * c3 * ps
    })?;
    let r_tilde_f = {
        let u_p1_x = apply_diff(&u_p1_f, DiffOp::Dx)?;
        fill(&g, |i, j| (outer.ue[j] - u_e) * u_p1_x.at(i, j) + se * v_p1_f.at(i, j) * outer.ue_z[j])?
    };

    // second-order layer pressure, gauged to vanish at the strip top
    let vpx = apply_diff(&zf.v_p0, DiffOp::Dx)?;
    let vpy = apply_diff(&zf.v_p0, DiffOp::Dy)?;
    let vpyy = apply_diff(&zf.v_p0, DiffOp::Dyy)?;
    let ny_s = zf.ny_strip;
    let gfun = fill(&g, |i, j| {
        if j >= ny_s {
            return 0.0;
        }
        (outer.ue[j] + zf.u_p0.at(i, j)) * vpx.at(i, j)
            + zf.u_p0.at(i, j) * outer.v_x.at(i, j)
            + (zf.v_p0.at(i, j) + outer.v.at(i, j)) * vpy.at(i, j)
            - vpyy.at(i, j)
    })?;
    let gx = apply_diff(&gfun, DiffOp::Dx)?;
    let ys = &y[..ny_s];
    let tail = |f: &ScalarField2D| -> Result<ScalarField2D> {
        let cols: Vec<Vec<f64>> = (0..nx)
            .map(|i| {
                let mut c = trapz_cumulative(ys, &f.column(i)[..ny_s], From::End);
                c.resize(ny, 0.0);
                c
            })
            .collect();
        ScalarField2D::from_columns(g.clone(), &cols)
    };
    let p_p2_f = tail(&gfun)?;
    let p_p2_x_f = tail(&gx)?;

    let strip = zero.strip.clone();
    let cols: Vec<usize> = (0..strip.nx()).map(|i| i * stride).collect();
    let sel_grid = Arc::new(Grid2D::new(strip.gx.clone(), g.gy.clone(), DomainTag::HalfLine)?);
    let to_strip =
        |f: &ScalarField2D| -> Result<ScalarField2D> { f.select_columns(sel_grid.clone(), &cols)?.truncate_rows(strip.clone()) };
    let u_p1 = to_strip(&u_p1_f)?;
    let v_p1 = to_strip(&v_p1_f)?;
    let r_p_u1 = to_strip(&terms_f)?;
    let r_tilde_u1 = to_strip(&r_tilde_f)?;
    let p_p2 = to_strip(&p_p2_f)?;
    let p_p2_x = to_strip(&p_p2_x_f)?;

    // direct substitution into the strip equation with strip-grid differences
    let co_s = MarchCoefficients {
        u0: to_strip(&co.u0)?,
        u0_x: apply_diff(&zero.u_p0, DiffOp::Dx)?,
        u0_y: apply_diff(&zero.u_p0, DiffOp::Dy)?,
        c: zero.v_p0.add(&outer_on_strip(eo, &strip)?.v)?,
        forcing: to_strip(&f_p)?,
    };
    let r_p_u1_substituted = layer_operator(&co_s, &u_p1, &v_p1)?;

    let norms = FirstOrderNorms {
        eps,
        r_p_u1: l2(&r_p_u1),
        r_p_u1_substituted: l2(&r_p_u1_substituted),
        r_tilde_u1: l2(&r_tilde_u1),
        p_p2_x: l2(&p_p2_x),
        f_p_weighted: weighted_norm(&f_p, 2.0, WeightedNorm::L2xy)?,
        u_p_inf: u_p.max_abs(),
        v_p_inf: v_p.max_abs(),
        phi_mismatch,
        alpha_4th,
    };
    Ok(PrandtlOne {
        eps,
        f_p,
        u_p,
        v_p,
        psi,
        phi,
        u_p1,
        v_p1,
        r_p_u1,
        r_p_u1_substituted,
        r_tilde_u1,
        p_p2,
        p_p2_x,
        norms,
    })
}

/// `u0 u_x + u0_x u + u0_y v + c u_y - u_yy - f` with the grid's differences.
pub fn layer_operator(co: &MarchCoefficients, u: &ScalarField2D, v: &ScalarField2D) -> Result<ScalarField2D> {
    let ux = apply_diff(u, DiffOp::Dx)?;
    let uy = apply_diff(u, DiffOp::Dy)?;
    let uyy = apply_diff(u, DiffOp::Dyy)?;
    let g = u.grid_arc().clone();
    fill(&g, |i, j| {
        co.u0.at(i, j) * ux.at(i, j) + co.u0_x.at(i, j) * u.at(i, j) + co.u0_y.at(i, j) * v.at(i, j)
            + co.c.at(i, j) * uy.at(i, j)
            - uyy.at(i, j)
            - co.forcing.at(i, j)
    })
}
