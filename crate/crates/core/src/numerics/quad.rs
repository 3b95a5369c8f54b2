use crate::error::{Error, Result};
use crate::numerics::field::ScalarField2D;
use crate::numerics::grid::trapz_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum From {
    Start,
    End,
}

pub fn trapz(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2).zip(f.windows(2)).map(|(h, v)| 0.5 * (h[1] - h[0]) * (v[0] + v[1])).sum()
}

/// Running trapezoid integral: `int_{x0}^{x_k}` from the start, or `int_{x_k}^{x_end}` from the end.
pub fn trapz_cumulative(x: &[f64], f: &[f64], from: From) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    match from {
        From::Start => {
            for k in 1..n {
                out[k] = out[k - 1] + 0.5 * (x[k] - x[k - 1]) * (f[k] + f[k - 1]);
            }
        }
        From::End => {
            for k in (0..n.saturating_sub(1)).rev() {
                out[k] = out[k + 1] + 0.5 * (x[k + 1] - x[k]) * (f[k] + f[k + 1]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightedNorm {
    /// L2 in y at one x column.
    L2y(usize),
    L2xy,
    Linf,
}

/// Norm of `<y>^n f` with `<y> = sqrt(1 + y^2)`.
pub fn weighted_norm(f: &ScalarField2D, n: f64, norm: WeightedNorm) -> Result<f64> {
    let g = f.grid();
    let weight: Vec<f64> = g.y().iter().map(|y| (1.0 + y * y).sqrt().powf(n)).collect();
    match norm {
        WeightedNorm::L2y(i) => {
            if i >= g.nx() {
                return Err(Error::GridMismatch(format!("column {i} out of range")));
            }
            let sq: Vec<f64> =
                f.column(i).iter().zip(&weight).map(|(v, w)| (v * w) * (v * w)).collect();
            Ok(trapz(g.y(), &sq).sqrt())
        }
        WeightedNorm::L2xy => {
            let wx = trapz_weights(g.x());
            let wy = trapz_weights(g.y());
            let mut s = 0.0;
            for (i, wxi) in wx.iter().enumerate() {
                for (j, wyj) in wy.iter().enumerate() {
                    let v = f.at(i, j) * weight[j];
                    s += wxi * wyj * v * v;
                }
            }
            Ok(s.sqrt())
        }
        WeightedNorm::Linf => {
            let mut m = 0.0f64;
            for i in 0..g.nx() {
                for (j, w) in weight.iter().enumerate() {
                    m = m.max((f.at(i, j) * w).abs());
                }
            }
            Ok(m)
        }
    }
}

/// Unweighted L2 over the whole grid.
pub fn l2(f: &ScalarField2D) -> f64 {
    weighted_norm(f, 0.0, WeightedNorm::L2xy).unwrap_or(f64::NAN)
}

/// `(int |f|^p)^(1/p)` over the whole grid.
pub fn lp(f: &ScalarField2D, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let g = f.grid();
    let wx = trapz_weights(g.x());
    let wy = trapz_weights(g.y());
    let mut s = 0.0;
    for (i, wxi) in wx.iter().enumerate() {
        for (j, wyj) in wy.iter().enumerate() {
            s += wxi * wyj * f.at(i, j).abs().powf(p);
        }
    }
    s.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::{DomainTag, Grid1D, Grid2D};
    use std::sync::Arc;

    #[test]
    fn exact_for_linear() {
        let x = Grid1D::geometric(0.0, 2.0, 17, 1.2).unwrap();
        let f: Vec<f64> = x.nodes().iter().map(|t| 3.0 * t + 1.0).collect();
        assert!((trapz(x.nodes(), &f) - 8.0).abs() < 1e-12);
        let c = trapz_cumulative(x.nodes(), &f, From::End);
        assert!((c[0] - 8.0).abs() < 1e-12 && c[16] == 0.0);
    }

    #[test]
    fn weighted_linf_of_gaussian_tail() {
        let g = Arc::new(
            Grid2D::new(
                Grid1D::uniform(0.0, 1.0, 9).unwrap(),
                Grid1D::uniform(0.0, 10.0, 2001).unwrap(),
                DomainTag::HalfLine,
            )
            .unwrap(),
        );
        let f = ScalarField2D::from_fn(g, |_, y| (-y).exp()).unwrap();
        // (1+y^2)^2 e^{-y} peaks at y = 2 + sqrt(3)
        let y = 2.0 + 3f64.sqrt();
        let want = (1.0 + y * y).powi(2) * (-y).exp();
        let m = weighted_norm(&f, 4.0, WeightedNorm::Linf).unwrap();
        assert!((m - want).abs() < 1e-3 * want, "{m} vs {want}");
        assert!((weighted_norm(&f, 2.0, WeightedNorm::Linf).unwrap() - 1.0).abs() < 1e-12);
    }
}
