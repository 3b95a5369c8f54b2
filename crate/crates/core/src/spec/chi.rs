use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::spec::profile::Profile;

/// Cutoff function on [0, inf), equal to 1 at 0 and identically 0 from 1 on.
#[derive(Debug, Clone, Default)]
pub enum Cutoff {
    /// `1 - 10 s^3 + 15 s^4 - 6 s^5`: flat to second order at both ends.
    #[default]
    Quintic,
    /// User profile on [0, 1]; derivatives come from its interpolant.
    Custom(Profile),
}

impl Cutoff {
    /// `(chi, chi', chi'', chi''')` at `s >= 0`; exactly zero for `s >= 1`.
    pub fn eval(&self, s: f64) -> [f64; 4] {
        if s >= 1.0 {
            return [0.0; 4];
        }
        let s = s.max(0.0);
        match self {
            Cutoff::Quintic => {
                let s2 = s * s;
                let s3 = s2 * s;
                let t = 1.0 - s;
                [
                    1.0 - 10.0 * s3 + 15.0 * s3 * s - 6.0 * s3 * s2,
                    -30.0 * s2 * t * t,
                    -60.0 * s * t * (1.0 - 2.0 * s),
                    -60.0 * (1.0 - 6.0 * s + 6.0 * s2),
                ]
            }
            Cutoff::Custom(p) => p.eval_all(s),
        }
    }

    /// Like [`Cutoff::eval`] but takes the limit from below at `s = 1`, where the third
    /// derivative of the quintic jumps.
    pub fn eval_left(&self, s: f64) -> [f64; 4] {
        if s > 1.0 {
            return [0.0; 4];
        }
        match self {
            Cutoff::Quintic if s == 1.0 => [0.0, 0.0, 0.0, -60.0],
            Cutoff::Custom(p) if s == 1.0 => p.eval_all(1.0),
            _ => self.eval(s),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        if let Some(obj) = v.as_object() {
            if obj.get("kind").and_then(Value::as_str) == Some("quintic") {
                if obj.len() > 1 {
                    return Err(Error::reject("config", "chi: quintic takes no parameters"));
                }
                return Ok(Cutoff::Quintic);
            }
        }
        Ok(Cutoff::Custom(Profile::from_json(v, "chi")?))
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cutoff::Quintic => json!({"kind": "quintic"}),
            Cutoff::Custom(p) => p.to_json(),
        }
    }

    pub fn is_table(&self) -> bool {
        matches!(self, Cutoff::Custom(p) if p.is_table())
    }

    /// `int_0^1 chi(s) ds` by fine trapezoid.
    pub fn integral(&self) -> f64 {
        match self {
            Cutoff::Quintic => 0.5,
            Cutoff::Custom(_) => {
                let n = 20_000;
                let h = 1.0 / n as f64;
                (0..=n)
                    .map(|k| {
                        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                        w * self.value(k as f64 * h)
                    })
                    .sum::<f64>()
                    * h
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quintic coefficients from the six endpoint conditions, solved by Gaussian elimination.
    fn hermite_quintic() -> [f64; 6] {
        // rows: p(0)=1, p'(0)=0, p''(0)=0, p(1)=0, p'(1)=0, p''(1)=0
        let mut a = [[0.0f64; 7]; 6];
        a[0][0] = 1.0;
        a[0][6] = 1.0;
        a[1][1] = 1.0;
        a[2][2] = 2.0;
        for n in 0..6 {
            a[3][n] = 1.0;
            a[4][n] = n as f64;
            a[5][n] = (n * n.saturating_sub(1)) as f64;
        }
        for c in 0..6 {
            let p = (c..6).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
            a.swap(c, p);
            for r in 0..6 {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..7 {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = a[i][6] / a[i][i];
        }
        out
    }

    #[test]
    fn quintic_matches_hermite_oracle() {
        let c = hermite_quintic();
        for s in [0.1f64, 0.25, 0.5, 0.8, 0.99] {
            let want: f64 = c.iter().enumerate().map(|(n, cn)| cn * s.powi(n as i32)).sum();
            assert!((Cutoff::Quintic.value(s) - want).abs() < 1e-13);
        }
        assert!((Cutoff::Quintic.value(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn endpoints_and_support() {
        let q = Cutoff::Quintic;
        assert_eq!(q.eval(0.0)[..2], [1.0, 0.0]);
        assert_eq!(q.eval(1.0), [0.0; 4]);
        assert_eq!(q.eval(3.7), [0.0; 4]);
        let prev = q.eval(1.0 - 1e-9);
        assert!(prev[0].abs() < 1e-20 && prev[1].abs() < 1e-15);
    }

    #[test]
    fn monotone_nonincreasing() {
        let q = Cutoff::Quintic;
        let mut last = 1.0;
        for k in 0..=1000 {
            let v = q.value(k as f64 / 1000.0);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }
}
