//! Python bindings: specs, the per-viscosity pipeline, the reference solve and the sweep.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use prandtl_expander::assembly::ResidualNorms;
use prandtl_expander::harness::{self, compute_errors, run_pipeline, EpsPipeline, SweepOptions};
use prandtl_expander::numerics::field::ScalarField2D;
use prandtl_expander::prandtl0::{solve_porous_medium, VonMisesState};
use prandtl_expander::prandtl1::CommutatorSign;
use prandtl_expander::spec::{validate_spec, ProblemSpec};
use prandtl_expander::Error;

create_exception!(prandtl_expander_py, SpecRejected, PyException, "The spec failed a compatibility check.");
create_exception!(prandtl_expander_py, SolverError, PyException, "A solver stage failed.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::RejectSpec { .. } | Error::Json(_) => SpecRejected::new_err(e.to_string()),
        other => SolverError::new_err(other.to_string()),
    }
}

fn parse_sign(s: &str) -> PyResult<CommutatorSign> {
    s.parse().map_err(PyValueError::new_err)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "ProblemSpec", frozen, module = "prandtl_expander_py")]
struct PySpec {
    inner: ProblemSpec,
}

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ProblemSpec::from_json_str(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: ProblemSpec::from_file(&path).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    /// Copy with the `nx, ny` grid override.
    fn with_grid(&self, nx: usize, ny: usize) -> Self {
        Self { inner: self.inner.clone().with_grid_override(nx, ny) }
    }

    /// `(passed, table)` of the compatibility checks.
    fn validate(&self) -> (bool, String) {
        let report = validate_spec(&self.inner);
        (report.all_passed(), report.table())
    }

    #[getter]
    fn epsilon_list(&self) -> Vec<f64> {
        self.inner.epsilon_list.clone()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn u_b(&self) -> f64 {
        self.inner.u_b
    }

    fn __repr__(&self) -> String {
        format!(
            "ProblemSpec(L={}, u_b={}, gamma={}, epsilon_list={:?})",
            self.inner.length, self.inner.u_b, self.inner.gamma, self.inner.epsilon_list
        )
    }
}

/// Nodal field on a tensor grid; `values()[i][j]` sits at `(x[i], y[j])`.
#[pyclass(name = "Field", frozen, module = "prandtl_expander_py")]
struct PyField {
    inner: ScalarField2D,
}

#[pymethods]
impl PyField {
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.grid().x().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.grid().y().to_vec()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.grid().nx(), self.inner.grid().ny())
    }

    fn values(&self) -> Vec<Vec<f64>> {
        (0..self.inner.grid().nx()).map(|i| self.inner.column(i).to_vec()).collect()
    }

    fn at(&self, i: usize, j: usize) -> PyResult<f64> {
        let (nx, ny) = self.shape();
        if i >= nx || j >= ny {
            return Err(PyValueError::new_err(format!("index ({i}, {j}) outside {nx}x{ny}")));
        }
        Ok(self.inner.at(i, j))
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn to_csv(&self) -> String {
        prandtl_expander::numerics::snapshot::to_csv(&self.inner)
    }

    fn __repr__(&self) -> String {
        let (nx, ny) = self.shape();
        format!("Field({nx}x{ny}, max_abs={:e})", self.inner.max_abs())
    }
}

fn field(f: &ScalarField2D) -> PyField {
    PyField { inner: f.clone() }
}

/// Porous-medium solution in von Mises variables.
#[pyclass(name = "VonMises", frozen, module = "prandtl_expander_py")]
struct PyVonMises {
    inner: VonMisesState,
}

#[pymethods]
impl PyVonMises {
    #[getter]
    fn min_w(&self) -> f64 {
        self.inner.min_w()
    }

    #[getter]
    fn max_w(&self) -> f64 {
        self.inner.max_w()
    }

    /// Bounds `(c0, c0bar)` from the data.
    #[getter]
    fn bounds(&self) -> (f64, f64) {
        (self.inner.c0, self.inner.c0bar)
    }

    #[getter]
    fn w(&self) -> PyField {
        field(&self.inner.w)
    }
}

/// Layers, assembly and optionally the reference solve at one viscosity.
#[pyclass(name = "Expansion", frozen, module = "prandtl_expander_py")]
struct PyExpansion {
    spec: ProblemSpec,
    pipe: EpsPipeline,
}

fn norms_dict(py: Python<'_>, n: &ResidualNorms) -> PyResult<Py<PyAny>> {
    Ok(json_to_py(py, &serde_json::to_string(n).expect("norms serialize"))?.unbind())
}

#[pymethods]
impl PyExpansion {
    #[getter]
    fn eps(&self) -> f64 {
        self.pipe.eps
    }

    #[getter]
    fn u_app(&self) -> PyField {
        field(&self.pipe.expansion.u_app)
    }

    #[getter]
    fn v_app(&self) -> PyField {
        field(&self.pipe.expansion.v_app)
    }

    #[getter]
    fn p_app(&self) -> PyField {
        field(&self.pipe.expansion.p_app)
    }

    /// One layer field by name: shear, u_p0, v_p0, u_e1, v_e1, p_e1, u_p1, v_p1, p_p2.
    fn component(&self, name: &str) -> PyResult<PyField> {
        let p = &self.pipe.expansion.parts;
        let f = match name {
            "shear" => &p.shear,
            "u_p0" => &p.u_p0,
            "v_p0" => &p.v_p0,
            "u_e1" => &p.u_e1,
            "v_e1" => &p.v_e1,
            "p_e1" => &p.p_e1,
            "u_p1" => &p.u_p1,
            "v_p1" => &p.v_p1,
            "p_p2" => &p.p_p2,
            other => return Err(PyValueError::new_err(format!("unknown component '{other}'"))),
        };
        Ok(field(f))
    }

    fn corrector_max(&self) -> f64 {
        self.pipe.expansion.parts.corrector_max()
    }

    fn residual_norms(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        norms_dict(py, &self.pipe.residual.norms)
    }

    fn boundary_defects(&self) -> [f64; 3] {
        self.pipe.expansion.boundary_defects(self.spec.u_b)
    }

    /// `(U, V, P)` of the reference solve, if it was run.
    fn reference(&self) -> Option<(PyField, PyField, PyField)> {
        self.pipe.reference.as_ref().map(|(_, s)| (field(&s.u), field(&s.v), field(&s.p)))
    }

    /// Error norms of the reference solve against the expansion (`None` without a reference).
    #[pyo3(signature = (p_list = vec![2.0]))]
    fn errors(&self, py: Python<'_>, p_list: Vec<f64>) -> PyResult<Option<Py<PyAny>>> {
        let Some((_, sol)) = &self.pipe.reference else { return Ok(None) };
        let row = compute_errors(&self.spec, sol, &self.pipe.expansion, &p_list).map_err(to_py)?;
        Ok(Some(json_to_py(py, &serde_json::to_string(&row).expect("row serializes"))?.unbind()))
    }
}

#[pyfunction]
fn porous_medium(py: Python<'_>, spec: &PySpec) -> PyResult<PyVonMises> {
    let s = spec.inner.clone();
    let inner = py.detach(move || solve_porous_medium(&s)).map_err(to_py)?;
    Ok(PyVonMises { inner })
}

#[pyfunction]
#[pyo3(signature = (spec, eps, fp_sign = "minus", reference = false))]
fn expand(py: Python<'_>, spec: &PySpec, eps: f64, fp_sign: &str, reference: bool) -> PyResult<PyExpansion> {
    let opts = SweepOptions { sign: parse_sign(fp_sign)?, with_reference: reference, ..Default::default() };
    let s = spec.inner.clone();
    let pipe = py
        .detach(move || -> prandtl_expander::Result<EpsPipeline> {
            validate_spec(&s).into_result()?;
            let state = solve_porous_medium(&s)?;
            run_pipeline(&s, &state, eps, &opts)
        })
        .map_err(to_py)?;
    Ok(PyExpansion { spec: spec.inner.clone(), pipe })
}

/// Full sweep; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (spec, jobs = 0, seed = None, fp_sign = "minus", reference = true))]
fn sweep(
    py: Python<'_>,
    spec: &PySpec,
    jobs: usize,
    seed: Option<u64>,
    fp_sign: &str,
    reference: bool,
) -> PyResult<Py<PyAny>> {
    let opts = SweepOptions { jobs, seed, sign: parse_sign(fp_sign)?, with_reference: reference, ..Default::default() };
    let s = spec.inner.clone();
    let text = py
        .detach(move || -> prandtl_expander::Result<String> {
            validate_spec(&s).into_result()?;
            harness::run_sweep(&s, &opts)?.to_json_string()
        })
        .map_err(to_py)?;
    Ok(json_to_py(py, &text)?.unbind())
}

/// Least-squares rate of `values` against `eps` on log-log axes.
#[pyfunction]
fn fit_rate(py: Python<'_>, eps: Vec<f64>, values: Vec<f64>) -> PyResult<Py<PyAny>> {
    let fit = harness::fit_rate("value", &eps, &values);
    Ok(json_to_py(py, &serde_json::to_string(&fit).expect("fit serializes"))?.unbind())
}

#[pymodule]
fn prandtl_expander_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyVonMises>()?;
    m.add_class::<PyExpansion>()?;
    m.add_function(wrap_pyfunction!(porous_medium, m)?)?;
    m.add_function(wrap_pyfunction!(expand, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add("SpecRejected", m.py().get_type::<SpecRejected>())?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    Ok(())
}
