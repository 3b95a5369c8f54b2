use crate::error::{Error, Result};
use crate::numerics::grid::check_increasing;

/// Index `k` with `x[k] <= t < x[k+1]`, clamped to the valid interval range.
pub fn locate(x: &[f64], t: f64) -> usize {
    let n = x.len();
    if t <= x[0] {
        return 0;
    }
    if t >= x[n - 1] {
        return n - 2;
    }
    match x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(k) => k.min(n - 2),
        Err(k) => k - 1,
    }
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::GridMismatch("pchip needs matching arrays of length >= 2".into()));
        }
        check_increasing(&x)?;
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let k = locate(&self.x, t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * (s - 1.0);
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (v, dv)
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Natural cubic spline with derivatives up to third order.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 3 {
            return Err(Error::GridMismatch("spline needs matching arrays of length >= 3".into()));
        }
        check_increasing(&x)?;
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![1.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for k in 1..n - 1 {
            a[k] = h[k - 1];
            b[k] = 2.0 * (h[k - 1] + h[k]);
            c[k] = h[k];
            r[k] = 6.0 * ((y[k + 1] - y[k]) / h[k] - (y[k] - y[k - 1]) / h[k - 1]);
        }
        let m = crate::numerics::linear::tridiag_solve(&a, &b, &c, &r)?;
        Ok(Self { x, y, m })
    }

    /// Value and first three derivatives.
    pub fn eval_all(&self, t: f64) -> [f64; 4] {
        let k = locate(&self.x, t);
        let h = self.x[k + 1] - self.x[k];
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let a = self.x[k + 1] - t;
        let b = t - self.x[k];
        let v = m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (self.y[k] / h - m0 * h / 6.0) * a
            + (self.y[k + 1] / h - m1 * h / 6.0) * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - self.y[k] / h + m0 * h / 6.0
            + self.y[k + 1] / h
            - m1 * h / 6.0;
        let d2 = m0 * a / h + m1 * b / h;
        let d3 = (m1 - m0) / h;
        [v, d1, d2, d3]
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t)[0]
    }
}

/// Local four-point Lagrange interpolation on a sorted node set.
pub fn lagrange4(x: &[f64], f: &[f64], t: f64) -> f64 {
    let n = x.len();
    if n < 4 {
        let k = locate(x, t);
        let s = (t - x[k]) / (x[k + 1] - x[k]);
        return f[k] * (1.0 - s) + f[k + 1] * s;
    }
    let k = locate(x, t);
    let s = k.saturating_sub(1).min(n - 4);
    let mut v = 0.0;
    for a in s..s + 4 {
        let mut l = 1.0;
        for b in s..s + 4 {
            if a != b {
                l *= (t - x[b]) / (x[a] - x[b]);
            }
        }
        v += l * f[a];
    }
    v
}

/// Resamples `f(x)` at the points `t` with [`lagrange4`].
pub fn resample(x: &[f64], f: &[f64], t: &[f64]) -> Vec<f64> {
    t.iter().map(|&ti| lagrange4(x, f, ti)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pchip_is_monotone_on_step_data() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let p = Pchip::new(x, y).unwrap();
        let mut prev = -1.0;
        for k in 0..=900 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15 && (-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        let x: Vec<f64> = (0..41).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        let [v, d1, d2, _] = s.eval_all(1.0);
        assert!((v - 1f64.sin()).abs() < 1e-6);
        assert!((d1 - 1f64.cos()).abs() < 1e-5);
        assert!((d2 + 1f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn lagrange_exact_on_cubics() {
        let x = vec![0.0, 0.3, 0.7, 1.2, 1.3, 2.0];
        let f: Vec<f64> = x.iter().map(|t| t * t * t - t).collect();
        for t in [0.1, 0.5, 1.25, 1.9] {
            assert!((lagrange4(&x, &f, t) - (t * t * t - t)).abs() < 1e-12);
        }
    }
}
