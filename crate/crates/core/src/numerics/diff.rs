use crate::error::{Error, Result};
use crate::numerics::field::ScalarField2D;

/// Finite-difference weights for derivatives 0..=m at `x0` (Fornberg's recursion).
/// Returns `w[k][j]`, the weight of node `j` for derivative order `k`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Per-node stencil: (first node index, weights).
#[derive(Debug, Clone)]
pub struct Stencil {
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl Stencil {
    /// Second-order stencils: three-point central in the interior, one-sided at the ends
    /// (three points for the first derivative, four for the second).
    pub fn new(x: &[f64], order: usize) -> Result<Self> {
        let n = x.len();
        let need = if order == 2 { 4 } else { 3 };
        if n < need {
            return Err(Error::GridTooSmall { needed: need, got: n });
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let (start, len) = if i == 0 {
                (0, need)
            } else if i == n - 1 {
                (n - need, need)
            } else {
                (i - 1, 3)
            };
            let w = fd_weights(x[i], &x[start..start + len], order);
            rows.push((start, w[order].clone()));
        }
        Ok(Self { rows })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(s, w)| w.iter().enumerate().map(|(k, wk)| wk * f[s + k]).sum())
            .collect()
    }

    pub fn apply_at(&self, i: usize, f: impl Fn(usize) -> f64) -> f64 {
        let (s, w) = &self.rows[i];
        w.iter().enumerate().map(|(k, wk)| wk * f(s + k)).sum()
    }
}

pub fn d1(x: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    check_len(x, f)?;
    Ok(Stencil::new(x, 1)?.apply(f))
}

pub fn d2(x: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    check_len(x, f)?;
    Ok(Stencil::new(x, 2)?.apply(f))
}

fn check_len(x: &[f64], f: &[f64]) -> Result<()> {
    if x.len() != f.len() {
        return Err(Error::GridMismatch(format!("{} nodes but {} values", x.len(), f.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffOp {
    Dx,
    Dy,
    Dxx,
    Dyy,
    /// `d_yy + eps * d_xx`
    LaplaceEps(f64),
}

pub fn apply_diff(f: &ScalarField2D, op: DiffOp) -> Result<ScalarField2D> {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let along_x = |order: usize| -> Result<Vec<f64>> {
        let st = Stencil::new(g.x(), order)?;
        let mut out = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                out[i * ny + j] = st.apply_at(i, |k| f.at(k, j));
            }
        }
        Ok(out)
    };
    let along_y = |order: usize| -> Result<Vec<f64>> {
        let st = Stencil::new(g.y(), order)?;
        let mut out = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            out.extend(st.apply(f.column(i)));
        }
        Ok(out)
    };
    let vals = match op {
        DiffOp::Dx => along_x(1)?,
        DiffOp::Dy => along_y(1)?,
        DiffOp::Dxx => along_x(2)?,
        DiffOp::Dyy => along_y(2)?,
        DiffOp::LaplaceEps(eps) => {
            let a = along_y(2)?;
            let b = along_x(2)?;
            a.iter().zip(&b).map(|(p, q)| p + eps * q).collect()
        }
    };
    ScalarField2D::new(f.grid_arc().clone(), vals)
}
