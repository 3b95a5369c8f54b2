//! Problem data, configuration parsing and compatibility checks.

pub mod chi;
pub mod profile;
mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::numerics::grid::{DomainTag, Grid1D, Grid2D};
pub use chi::Cutoff;
pub use profile::Profile;
use profile::{check_keys, num_array};
pub use validate::{validate_spec, CheckResult, DeferredCheck, ValidationReport};

/// Largest accepted channel length. The small-length hypothesis names no value; this is a working cap.
pub const L_MAX: f64 = 1.0;
pub const TOL_BC_ANALYTIC: f64 = 1e-10;
pub const TOL_BC_TABLE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Streamwise nodes of the two-dimensional grids.
    pub nx: usize,
    /// Wall-normal nodes of the strip grid on [0, 1/sqrt(eps)] and of the Euler grid on [0, 1].
    pub ny: usize,
    /// Last-to-first cell ratio of the streamwise grid, clustered at the inflow.
    pub x_stretch: f64,
    /// Last-to-first cell ratio of the strip grid, clustered at the wall.
    pub y_stretch: f64,
    /// Last-to-first cell ratio of the Euler grid on [0, 1], clustered at the wall.
    pub z_stretch: f64,
    /// Growth of cells beyond the strip on the half-line grids.
    pub tail_ratio: f64,
    /// Sub-steps per streamwise cell in the boundary-layer marches.
    pub march_refine: usize,
    /// Nodes of the von Mises grid.
    pub n_eta: usize,
    pub eta_stretch: f64,
    /// Half-line truncation; defaults to max(40, 8/sqrt(eps_min)).
    pub y_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 129,
            ny: 257,
            x_stretch: 40.0,
            y_stretch: 12.0,
            z_stretch: 150.0,
            tail_ratio: 1.03,
            march_refine: 8,
            n_eta: 2001,
            eta_stretch: 50.0,
            y_max: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub epsilon_list: Vec<f64>,
    pub length: f64,
    pub gamma: f64,
    pub u_b: f64,
    pub u_e0: Profile,
    pub ubar0: Profile,
    pub ubar1: Profile,
    pub ub1: Profile,
    pub vb0: Profile,
    pub vbl: Profile,
    pub chi: Cutoff,
    pub kappa: f64,
    pub grids: GridConfig,
    /// Shift the side data of the Euler corrector by an affine term vanishing at z = 1
    /// so that it matches the computed wall trace at the corners.
    pub adjust_compat: bool,
}

impl ProblemSpec {
    /// Outer velocity at the wall, `u_e0(0)`.
    pub fn u_e(&self) -> f64 {
        self.u_e0.eval(0.0)
    }

    pub fn eps_min(&self) -> f64 {
        self.epsilon_list.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn y_max(&self) -> f64 {
        self.grids.y_max.unwrap_or_else(|| 40f64.max(8.0 / self.eps_min().sqrt()))
    }

    pub fn tol_bc(&self, profiles: &[&Profile]) -> f64 {
        if profiles.iter().any(|p| p.is_table()) {
            TOL_BC_TABLE
        } else {
            TOL_BC_ANALYTIC
        }
    }

    /// Streamwise grid shared by all two-dimensional fields.
    pub fn x_grid(&self) -> Result<Grid1D> {
        Grid1D::stretched(0.0, self.length, self.grids.nx, self.grids.x_stretch)
    }

    /// Streamwise grid of the boundary-layer marches; contains `x_grid` at every `march_refine`-th node.
    pub fn march_grid(&self) -> Result<Grid1D> {
        Ok(self.x_grid()?.refine(self.grids.march_refine))
    }

    /// Wall-normal grid of the strip [0, 1/sqrt(eps)].
    pub fn strip_y_grid(&self, eps: f64) -> Result<Grid1D> {
        Grid1D::stretched(0.0, 1.0 / eps.sqrt(), self.grids.ny, self.grids.y_stretch)
    }

    pub fn strip_grid(&self, eps: f64) -> Result<Grid2D> {
        Grid2D::new(self.x_grid()?, self.strip_y_grid(eps)?, DomainTag::Scaled { eps })
    }

    /// Strip nodes followed by geometrically growing nodes up to `y_max`.
    pub fn halfline_y_grid(&self, eps: f64) -> Result<Grid1D> {
        let strip = self.strip_y_grid(eps)?;
        let y_max = self.y_max();
        let top = strip.last();
        if top > y_max {
            return Err(Error::DomainTooShort(format!(
                "half-line truncation y_max = {y_max} is below the strip top {top}"
            )));
        }
        let n = strip.len();
        let mut h = strip.nodes()[n - 1] - strip.nodes()[n - 2];
        let mut tail = Vec::new();
        let mut y = top;
        while y < y_max {
            h *= self.grids.tail_ratio;
            y += h;
            tail.push(y.min(y_max));
        }
        if let Some(last) = tail.last_mut() {
            *last = y_max;
        }
        // Avoid a sliver cell at the top.
        if tail.len() >= 2 {
            let k = tail.len();
            if tail[k - 1] - tail[k - 2] < 0.5 * h / self.grids.tail_ratio {
                tail.remove(k - 2);
            }
        }
        Ok(strip.extended_with(&tail))
    }

    /// Wall-normal grid of the outer domain [0, 1], clustered at the wall where the
    /// corrector forcing lives.
    pub fn euler_z_grid(&self) -> Result<Grid1D> {
        Grid1D::stretched(0.0, 1.0, self.grids.ny, self.grids.z_stretch)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::reject("config", "top level must be an object"))?;
        check_keys(
            obj,
            &["epsilon_list", "L", "gamma", "u_b", "profiles", "chi", "kappa", "grids", "adjust_compat"],
            "config",
        )?;
        let num = |key: &str| -> Result<f64> {
            obj.get(key)
                .and_then(Value::as_f64)
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::reject("config", format!("`{key}` must be a finite number")))
        };
        let epsilon_list = num_array(obj.get("epsilon_list"), "epsilon_list")?;
        let profiles = obj
            .get("profiles")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::reject("config", "`profiles` must be an object"))?;
        check_keys(profiles, &["u_e0", "ubar0", "ubar1", "ub1", "Vb0", "VbL"], "profiles")?;
        let prof = |key: &str, required: bool| -> Result<Profile> {
            match profiles.get(key) {
                Some(p) => Profile::from_json(p, key),
                None if required => Err(Error::reject("config", format!("profiles.{key} is required"))),
                None => Ok(Profile::constant(0.0)),
            }
        };
        let chi = match obj.get("chi") {
            Some(c) => Cutoff::from_json(c)?,
            None => Cutoff::Quintic,
        };
        let kappa = match obj.get("kappa") {
            Some(_) => num("kappa")?,
            None => 0.05,
        };
        let grids: GridConfig = match obj.get("grids") {
            Some(g) => serde_json::from_value(g.clone())
                .map_err(|e| Error::reject("config", format!("grids: {e}")))?,
            None => GridConfig::default(),
        };
        let adjust_compat = match obj.get("adjust_compat") {
            Some(b) => b
                .as_bool()
                .ok_or_else(|| Error::reject("config", "`adjust_compat` must be a boolean"))?,
            None => false,
        };
        Ok(Self {
            epsilon_list,
            length: num("L")?,
            gamma: num("gamma")?,
            u_b: num("u_b")?,
            u_e0: prof("u_e0", true)?,
            ubar0: prof("ubar0", true)?,
            ubar1: prof("ubar1", false)?,
            ub1: prof("ub1", false)?,
            vb0: prof("Vb0", false)?,
            vbl: prof("VbL", false)?,
            chi,
            kappa,
            grids,
            adjust_compat,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)
            .map_err(|e| Error::reject("config", format!("invalid JSON: {e}")))?;
        Self::from_json_value(&v)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Fully resolved configuration (all defaults filled in).
    pub fn to_json(&self) -> Value {
        let mut profiles = Map::new();
        profiles.insert("u_e0".into(), self.u_e0.to_json());
        profiles.insert("ubar0".into(), self.ubar0.to_json());
        profiles.insert("ubar1".into(), self.ubar1.to_json());
        profiles.insert("ub1".into(), self.ub1.to_json());
        profiles.insert("Vb0".into(), self.vb0.to_json());
        profiles.insert("VbL".into(), self.vbl.to_json());
        json!({
            "epsilon_list": self.epsilon_list,
            "L": self.length,
            "gamma": self.gamma,
            "u_b": self.u_b,
            "profiles": Value::Object(profiles),
            "chi": self.chi.to_json(),
            "kappa": self.kappa,
            "grids": serde_json::to_value(&self.grids).expect("grid config serializes"),
            "adjust_compat": self.adjust_compat,
        })
    }

    pub fn with_grid_override(mut self, nx: usize, ny: usize) -> Self {
        self.grids.nx = nx;
        self.grids.ny = ny;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> Value {
        json!({
            "epsilon_list": [0.04, 0.01],
            "L": 0.25,
            "gamma": 0.1,
            "u_b": 1.0,
            "profiles": {
                "u_e0": {"kind": "constant", "params": {"value": 1.0}},
                "ubar0": {"kind": "constant", "params": {"value": 0.0}}
            }
        })
    }

    #[test]
    fn parses_and_round_trips() {
        let s = ProblemSpec::from_json_value(&minimal()).unwrap();
        let back = ProblemSpec::from_json_value(&s.to_json()).unwrap();
        assert_eq!(back.to_json(), s.to_json());
        assert_eq!(s.grids, GridConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = minimal();
        v["viscosity"] = json!(1.0);
        assert!(matches!(ProblemSpec::from_json_value(&v), Err(Error::RejectSpec { .. })));
        let mut v = minimal();
        v["grids"] = json!({"nx": 65, "nz": 3});
        assert!(ProblemSpec::from_json_value(&v).is_err());
        let mut v = minimal();
        v["profiles"]["ubar2"] = json!({"kind": "constant", "params": {"value": 0.0}});
        assert!(ProblemSpec::from_json_value(&v).is_err());
    }

    #[test]
    fn halfline_grid_extends_strip() {
        let s = ProblemSpec::from_json_value(&minimal()).unwrap();
        let strip = s.strip_y_grid(0.04).unwrap();
        let half = s.halfline_y_grid(0.04).unwrap();
        assert_eq!(&half.nodes()[..strip.len()], strip.nodes());
        assert_eq!(half.last(), 80.0);
    }
}
