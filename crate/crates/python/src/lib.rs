//! Python bindings. Reports are returned as plain dicts.

use std::path::Path;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use glcarleman::carleman::{self as cm, Prepared, Variant};
use glcarleman::cli::{commands, RunConfig};
use glcarleman::grid::{build_grid, DomainSpec, Shape, SpaceTimeField, SpaceTimeGrid};
use glcarleman::identity::{
    identity_residual_linear, identity_residual_nonlinear, AnalyticTestField, AuxKind, FluxForm, Identity, ResidualOptions,
    Setup,
};
use glcarleman::operator::{check_condition1, derive_coeffs, GLCoeffs};
use glcarleman::solver::{energy_balance, random_trig_initial, solve as run_solver, BoundaryCondition, Scheme, SolveConfig};
use glcarleman::weights::{CarlemanParams, Family};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Parses a snake_case enum name such as `"imex_cn"`.
fn parse<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_owned())).map_err(|_| err(format!("unknown {what} '{name}'")))
}

#[pyclass(name = "Coefficients", frozen)]
struct PyCoefficients {
    inner: GLCoeffs,
}

#[pymethods]
impl PyCoefficients {
    #[new]
    fn new(b: f64, c: f64) -> PyResult<Self> {
        if !b.is_finite() || !c.is_finite() {
            return Err(err("b and c must be finite"));
        }
        Ok(Self { inner: derive_coeffs(b, c) })
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }
    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }
    #[getter]
    fn alpha1(&self) -> f64 {
        self.inner.alpha1
    }
    #[getter]
    fn beta1(&self) -> f64 {
        self.inner.beta1
    }
    #[getter]
    fn alpha2(&self) -> f64 {
        self.inner.alpha2
    }
    #[getter]
    fn beta2(&self) -> f64 {
        self.inner.beta2
    }

    fn t_positivity(&self) -> f64 {
        self.inner.t_positivity()
    }

    fn t_positivity_bound(&self) -> f64 {
        self.inner.t_positivity_bound()
    }

    fn check_condition<'py>(&self, py: Python<'py>, r0: f64, delta0: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &check_condition1(&self.inner, r0, delta0).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Coefficients(b={}, c={})", self.inner.b, self.inner.c)
    }
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: SpaceTimeGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n=64, nt=64, t_final=1.0, shape="unit_square", omega_center=(0.5, 0.5), omega_radius=0.25))]
    fn new(n: usize, nt: usize, t_final: f64, shape: &str, omega_center: (f64, f64), omega_radius: f64) -> PyResult<Self> {
        let c = [omega_center.0, omega_center.1];
        let spec = match parse::<Shape>("shape", shape)? {
            Shape::UnitSquare => DomainSpec::unit_square(c, omega_radius),
            Shape::UnitDisk => DomainSpec::unit_disk(c, omega_radius),
        };
        Ok(Self { inner: build_grid(spec, n, n, nt, t_final).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.nx
    }
    #[getter]
    fn nt(&self) -> usize {
        self.inner.nt
    }
    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    /// Node coordinates, `(n+1) x (n+1)` nested lists of `(x1, x2)`.
    fn nodes(&self) -> Vec<Vec<(f64, f64)>> {
        let (nx, ny) = self.inner.dims();
        (0..nx).map(|i| (0..ny).map(|j| self.inner.x(i, j)).map(|[a, b]| (a, b)).collect()).collect()
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    field: SpaceTimeField,
    grid: SpaceTimeGrid,
    coeffs: GLCoeffs,
    bc: BoundaryCondition,
    l2: Vec<f64>,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn n_slices(&self) -> usize {
        self.field.slices.len()
    }

    /// Nodal values at time level `k` as nested lists of complex numbers.
    fn slice(&self, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        let s = self.field.slices.get(k).ok_or_else(|| err(format!("time level {k} out of range")))?;
        Ok(s.values.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Discrete `||y(t_k)||_{L2}` at every time level.
    fn l2_norms(&self) -> Vec<f64> {
        self.l2.clone()
    }

    fn energy_residual(&self) -> PyResult<Vec<f64>> {
        energy_balance(&self.field, &self.grid, self.bc.laplacian_bc()).map_err(err)
    }

    /// Weighted Carleman totals of this trajectory for one variant.
    fn carleman<'py>(&self, py: Python<'py>, variant: &str, lambda: f64, mu: f64) -> PyResult<Bound<'py, PyAny>> {
        let v: Variant = parse("variant", variant)?;
        let prep = Prepared::new(&self.field, &self.grid, &self.coeffs, self.bc.laplacian_bc()).map_err(err)?;
        to_py(py, &cm::evaluate(&prep, v, lambda, mu).map_err(err)?)
    }
}

/// Runs the solver from a seeded random trigonometric initial state.
#[pyfunction]
#[pyo3(signature = (grid, coeffs, bc="dirichlet", scheme="imex_cn", seed=1, modes=4, amplitude=1.0))]
fn solve(
    grid: &PyGrid,
    coeffs: &PyCoefficients,
    bc: &str,
    scheme: &str,
    seed: u64,
    modes: usize,
    amplitude: f64,
) -> PyResult<PyTrajectory> {
    let bc = match bc {
        "dirichlet" => BoundaryCondition::Dirichlet0,
        "neumann" => BoundaryCondition::Neumann0,
        other => return Err(err(format!("unknown boundary condition '{other}'"))),
    };
    let grid = grid.inner.clone();
    let y0 = random_trig_initial(&grid, &bc, seed, modes, amplitude).map_err(err)?;
    let cfg = SolveConfig { coeffs: coeffs.inner, bc: bc.clone(), scheme: parse::<Scheme>("scheme", scheme)?, source: None };
    let tr = run_solver(&y0, &cfg, &grid).map_err(err)?;
    let l2 = tr.diagnostics.iter().map(|d| d.l2_sq.sqrt()).collect();
    Ok(PyTrajectory { field: tr.field, grid, coeffs: coeffs.inner, bc, l2 })
}

/// Residual report of the pointwise weighted identity on one analytic field:
/// `"bubble"` (default), `"rotating_bump"`, `"zero"` or an integer seed.
#[pyfunction]
#[pyo3(signature = (coeffs, lam, mu, field=None, identity="nonlinear", aux="step_one", form="corrected", n=32, nt=20))]
#[allow(clippy::too_many_arguments)]
fn verify_identity<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficients,
    lam: f64,
    mu: f64,
    field: Option<&Bound<'py, PyAny>>,
    identity: &str,
    aux: &str,
    form: &str,
    n: usize,
    nt: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let f = match field {
        None => AnalyticTestField::bubble(1.0),
        Some(f) if f.extract::<u64>().is_ok() => AnalyticTestField::random_trig(f.extract()?, 1.0).map_err(err)?,
        Some(f) => match f.extract::<String>()?.as_str() {
            "bubble" => AnalyticTestField::bubble(1.0),
            "rotating_bump" => AnalyticTestField::rotating_bump(),
            "zero" => AnalyticTestField::zero(),
            other => return Err(err(format!("unknown field '{other}'"))),
        },
    };
    let spec = DomainSpec::unit_square([0.5, 0.5], 0.25);
    let grid = build_grid(spec, n, n, nt, 1.0).map_err(err)?;
    let params = CarlemanParams::new(lam, mu, 1.0, Family::J1Interior).map_err(err)?;
    let setup = Setup {
        spec: &spec,
        params: &params,
        coeffs: &coeffs.inner,
        aux: parse::<AuxKind>("aux choice", aux)?.choice(),
        form: parse::<FluxForm>("flux form", form)?,
    };
    let opts = ResidualOptions::default();
    let report = match parse::<Identity>("identity", identity)? {
        Identity::Nonlinear => identity_residual_nonlinear(&setup, &f, &grid, &opts),
        Identity::Linear => identity_residual_linear(&setup, &f, &grid, &opts),
    }
    .map_err(err)?;
    to_py(py, &report)
}

/// Runs one CLI subcommand. `config` is a JSON document in the CLI format.
#[pyfunction]
#[pyo3(signature = (command, config=None, out="runs"))]
fn run<'py>(py: Python<'py>, command: &str, config: Option<&str>, out: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match config {
        Some(text) => RunConfig::from_json(text).map_err(err)?,
        None => RunConfig::default(),
    };
    cfg.validate().map_err(err)?;
    let root = Path::new(out);
    let outcome = py
        .detach(|| match command {
            "verify-identity" => commands::verify_identity(&cfg, root, None),
            "solve" => commands::solve_cmd(&cfg, root),
            "carleman-scan" => commands::carleman_scan(&cfg, root),
            "stability" => commands::stability_cmd(&cfg, root),
            "check-weights" => commands::check_weights(&cfg, root),
            other => Err(glcarleman::Error::InvalidArgument(format!("unknown command '{other}'"))),
        })
        .map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("pass", outcome.pass)?;
    d.set_item("dir", outcome.dir.display().to_string())?;
    d.set_item("message", outcome.message)?;
    Ok(d.into_any())
}

#[pymodule]
#[pyo3(name = "glcarleman")]
fn glcarleman_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identity, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
