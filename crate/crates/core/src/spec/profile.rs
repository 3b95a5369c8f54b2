use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::numerics::interp::CubicSpline;

/// One-variable data function with exact (registry) or interpolated (table) derivatives.
#[derive(Debug, Clone)]
pub enum Profile {
    Constant { value: f64 },
    /// `offset + amplitude * poly(s) * exp(-rate * s)`
    ExpDecay { amplitude: f64, rate: f64, offset: f64, poly: Vec<f64> },
    Polynomial { coeffs: Vec<f64> },
    /// `offset + amplitude * sin(frequency * s + phase)`
    Sine { amplitude: f64, frequency: f64, phase: f64, offset: f64 },
    /// Natural cubic spline through the samples, constant outside the sampled range.
    Table { x: Vec<f64>, y: Vec<f64>, spline: CubicSpline },
}

fn poly_eval_derivs(c: &[f64], s: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (n, &cn) in c.iter().enumerate() {
        for (k, o) in out.iter_mut().enumerate() {
            if n >= k {
                let mut fall = 1.0;
                for m in 0..k {
                    fall *= (n - m) as f64;
                }
                *o += cn * fall * s.powi((n - k) as i32);
            }
        }
    }
    out
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn exp_decay(amplitude: f64, rate: f64) -> Self {
        Profile::ExpDecay { amplitude, rate, offset: 0.0, poly: vec![1.0] }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Profile::Polynomial { coeffs }
    }

    pub fn table(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let spline = CubicSpline::new(x.clone(), y.clone())?;
        Ok(Profile::Table { x, y, spline })
    }

    pub fn is_table(&self) -> bool {
        matches!(self, Profile::Table { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Constant { value } => *value == 0.0,
            Profile::ExpDecay { amplitude, offset, .. } => *amplitude == 0.0 && *offset == 0.0,
            Profile::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            Profile::Sine { amplitude, offset, .. } => *amplitude == 0.0 && *offset == 0.0,
            Profile::Table { y, .. } => y.iter().all(|v| *v == 0.0),
        }
    }

    /// Value and derivatives of order 1..=3.
    pub fn eval_all(&self, s: f64) -> [f64; 4] {
        match self {
            Profile::Constant { value } => [*value, 0.0, 0.0, 0.0],
            Profile::ExpDecay { amplitude, rate, offset, poly } => {
                let p = poly_eval_derivs(poly, s);
                let e = (-rate * s).exp();
                let r = -rate;
                // d^k (p e^{rs}) = e^{rs} sum_j C(k,j) r^{k-j} p^{(j)}
                let d0 = p[0];
                let d1 = p[1] + r * p[0];
                let d2 = p[2] + 2.0 * r * p[1] + r * r * p[0];
                let d3 = p[3] + 3.0 * r * p[2] + 3.0 * r * r * p[1] + r * r * r * p[0];
                [offset + amplitude * e * d0, amplitude * e * d1, amplitude * e * d2, amplitude * e * d3]
            }
            Profile::Polynomial { coeffs } => poly_eval_derivs(coeffs, s),
            Profile::Sine { amplitude, frequency, phase, offset } => {
                let t = frequency * s + phase;
                let (sn, cs) = t.sin_cos();
                let k = *frequency;
                [
                    offset + amplitude * sn,
                    amplitude * k * cs,
                    -amplitude * k * k * sn,
                    -amplitude * k * k * k * cs,
                ]
            }
            Profile::Table { x, spline, .. } => {
                let (a, b) = (x[0], x[x.len() - 1]);
                if s < a {
                    [spline.eval(a), 0.0, 0.0, 0.0]
                } else if s > b {
                    [spline.eval(b), 0.0, 0.0, 0.0]
                } else {
                    spline.eval_all(s)
                }
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_all(s)[0]
    }

    pub fn d1(&self, s: f64) -> f64 {
        self.eval_all(s)[1]
    }

    pub fn d2(&self, s: f64) -> f64 {
        self.eval_all(s)[2]
    }

    pub fn from_json(v: &Value, what: &str) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::reject("config", format!("{what}: profile must be an object")))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::reject("config", format!("{what}: missing string `kind`")))?;
        if kind == "table" {
            check_keys(obj, &["kind", "x", "y"], what)?;
            let x = num_array(obj.get("x"), &format!("{what}.x"))?;
            let y = num_array(obj.get("y"), &format!("{what}.y"))?;
            if x.len() != y.len() || x.len() < 3 {
                return Err(Error::reject(
                    "config",
                    format!("{what}: table needs matching x/y arrays with >= 3 samples"),
                ));
            }
            return Profile::table(x, y)
                .map_err(|e| Error::reject("config", format!("{what}: {e}")));
        }
        check_keys(obj, &["kind", "params"], what)?;
        let empty = Map::new();
        let params = match obj.get("params") {
            None => &empty,
            Some(p) => p
                .as_object()
                .ok_or_else(|| Error::reject("config", format!("{what}.params must be an object")))?,
        };
        let ctx = format!("{what}.params");
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.get(key) {
                Some(v) => v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::reject("config", format!("{ctx}.{key} must be a finite number"))
                }),
                None => default.ok_or_else(|| Error::reject("config", format!("{ctx}.{key} is required"))),
            }
        };
        let p = match kind {
            "constant" => {
                check_keys(params, &["value"], &ctx)?;
                Profile::Constant { value: num("value", None)? }
            }
            "exp_decay" => {
                check_keys(params, &["amplitude", "rate", "offset", "poly"], &ctx)?;
                let poly = match params.get("poly") {
                    Some(v) => num_array(Some(v), &format!("{ctx}.poly"))?,
                    None => vec![1.0],
                };
                Profile::ExpDecay {
                    amplitude: num("amplitude", None)?,
                    rate: num("rate", None)?,
                    offset: num("offset", Some(0.0))?,
                    poly,
                }
            }
            "polynomial" => {
                check_keys(params, &["coeffs"], &ctx)?;
                Profile::Polynomial { coeffs: num_array(params.get("coeffs"), &format!("{ctx}.coeffs"))? }
            }
            "sine" => {
                check_keys(params, &["amplitude", "frequency", "phase", "offset"], &ctx)?;
                Profile::Sine {
                    amplitude: num("amplitude", None)?,
                    frequency: num("frequency", None)?,
                    phase: num("phase", Some(0.0))?,
                    offset: num("offset", Some(0.0))?,
                }
            }
            other => {
                return Err(Error::reject(
                    "config",
                    format!("{what}: unknown profile kind `{other}` (expected constant, exp_decay, polynomial, sine, table)"),
                ))
            }
        };
        Ok(p)
    }

    pub fn to_json(&self) -> Value {
        match self {
            Profile::Constant { value } => json!({"kind": "constant", "params": {"value": value}}),
            Profile::ExpDecay { amplitude, rate, offset, poly } => json!({
                "kind": "exp_decay",
                "params": {"amplitude": amplitude, "rate": rate, "offset": offset, "poly": poly}
            }),
            Profile::Polynomial { coeffs } => json!({"kind": "polynomial", "params": {"coeffs": coeffs}}),
            Profile::Sine { amplitude, frequency, phase, offset } => json!({
                "kind": "sine",
                "params": {"amplitude": amplitude, "frequency": frequency, "phase": phase, "offset": offset}
            }),
            Profile::Table { x, y, .. } => json!({"kind": "table", "x": x, "y": y}),
        }
    }
}

pub(crate) fn check_keys(obj: &Map<String, Value>, allowed: &[&str], what: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::reject("config", format!("{what}: unknown key `{k}`")));
        }
    }
    Ok(())
}

pub(crate) fn num_array(v: Option<&Value>, what: &str) -> Result<Vec<f64>> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| Error::reject("config", format!("{what} must be an array of numbers")))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::reject("config", format!("{what} must contain finite numbers")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(p: &Profile, s: f64) {
        let h = 1e-5;
        let a = p.eval_all(s);
        let up = p.eval_all(s + h);
        let dn = p.eval_all(s - h);
        for k in 0..3 {
            let fd = (up[k] - dn[k]) / (2.0 * h);
            assert!((fd - a[k + 1]).abs() < 1e-6 * (1.0 + fd.abs()), "order {k}: {fd} vs {}", a[k + 1]);
        }
    }

    #[test]
    fn registry_derivatives_match_finite_differences() {
        fd_check(&Profile::ExpDecay { amplitude: 1.3, rate: 0.7, offset: 0.2, poly: vec![1.0, 0.75, 0.25, 1.0 / 24.0] }, 0.9);
        fd_check(&Profile::polynomial(vec![1.0, 0.4, -0.2, 0.05]), 0.3);
        fd_check(&Profile::Sine { amplitude: 0.5, frequency: 3.0, phase: 0.1, offset: 1.0 }, 0.7);
    }

    #[test]
    fn json_round_trip() {
        let v = json!({"kind": "exp_decay", "params": {"amplitude": 1.0, "rate": 1.0}});
        let p = Profile::from_json(&v, "ubar0").unwrap();
        let back = Profile::from_json(&p.to_json(), "ubar0").unwrap();
        assert_eq!(p.eval_all(0.37), back.eval_all(0.37));
    }

    #[test]
    fn unknown_param_rejected() {
        let v = json!({"kind": "constant", "params": {"value": 1.0, "slope": 2.0}});
        assert!(Profile::from_json(&v, "u_e0").is_err());
        let v = json!({"kind": "gaussian", "params": {}});
        assert!(Profile::from_json(&v, "u_e0").is_err());
    }

    #[test]
    fn table_clamps_outside_range() {
        let x: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.0 - t * t).collect();
        let p = Profile::table(x, y).unwrap();
        assert_eq!(p.eval_all(2.0), [0.0, 0.0, 0.0, 0.0]);
    }
}
