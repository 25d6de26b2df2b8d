//! Python bindings for `fvlab`: cone math, domains, the particle system, QSD
//! estimation and the JSON-configured experiment runner.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use fvlab::cli;
use fvlab::cone;
use fvlab::engine::{self, BinGrid, FvState, Resolution};
use fvlab::error::Error;
use fvlab::geometry;
use fvlab::stochastic::{PathConfig, RngStream};

create_exception!(fvlab_py, FvlabError, PyException);

fn err(e: Error) -> PyErr {
    FvlabError::new_err(e.to_string())
}

fn resolution(name: &str) -> PyResult<Resolution> {
    match name {
        "strict" => Ok(Resolution::Strict),
        "sequential" => Ok(Resolution::Sequential),
        other => Err(FvlabError::new_err(format!("resolution must be \"strict\" or \"sequential\", got {other:?}"))),
    }
}

/// `2F1(-p, p+d-2; (d-1)/2; (1 - cos theta)/2)`.
#[pyfunction]
fn hyp_h(p: f64, d: usize, theta: f64) -> PyResult<f64> {
    cone::hyp_h(p, d, theta).map_err(err)
}

/// Smallest zero of `hyp_h(p, d, .)` in `(0, pi]`.
#[pyfunction]
fn theta_pd(p: f64, d: usize) -> PyResult<f64> {
    cone::theta_pd(p, d).map_err(err)
}

/// The `p` whose critical angle in dimension `d` equals `theta`.
#[pyfunction]
fn invert_theta(theta: f64, d: usize) -> PyResult<f64> {
    cone::invert_theta(theta, d).map_err(err)
}

#[pyfunction]
fn lipschitz_threshold(n: usize, d: usize) -> PyResult<f64> {
    cone::lipschitz_threshold(n, d).map_err(err)
}

#[pyfunction]
fn hawkes_nonintersect(n: usize, p: f64) -> bool {
    cone::hawkes_nonintersect(n, p)
}

/// A simulation domain.
#[pyclass(name = "Domain", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDomain {
    inner: geometry::Domain,
}

#[pymethods]
impl PyDomain {
    /// Parses a domain literal such as `{"type": "interval", "a": 0, "b": 1}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|inner| Self { inner }).map_err(|e| FvlabError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn interval(a: f64, b: f64) -> PyResult<Self> {
        geometry::Domain::interval(a, b).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        geometry::Domain::cuboid(lo, hi).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        geometry::Domain::ball(center, radius).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn polygon(vertices: Vec<[f64; 2]>) -> PyResult<Self> {
        geometry::Domain::polygon(vertices).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (half_angle, vertex = [0.0, 0.0], axis = [0.0, 1.0]))]
    fn wedge(half_angle: f64, vertex: [f64; 2], axis: [f64; 2]) -> PyResult<Self> {
        geometry::Domain::wedge(vertex, axis, half_angle).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn half_plane() -> Self {
        Self { inner: geometry::Domain::half_plane() }
    }

    #[staticmethod]
    fn l_shape() -> Self {
        Self { inner: geometry::l_shape() }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn contains(&self, x: Vec<f64>) -> PyResult<bool> {
        self.inner.contains(&x).map_err(err)
    }

    fn dist_to_boundary(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.dist_to_boundary(&x).map_err(err)
    }

    fn reference_point(&self) -> Vec<f64> {
        self.inner.reference_point()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| FvlabError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Domain({})", self.to_json().unwrap_or_default())
    }
}

/// A Fleming-Viot system with its own random stream.
#[pyclass(name = "FvSystem")]
struct PyFvSystem {
    domain: geometry::Domain,
    state: FvState,
    rng: RngStream,
    dt: f64,
    resolution: Resolution,
}

type JumpTuple = (u64, f64, usize, usize, Vec<f64>);

#[pymethods]
impl PyFvSystem {
    #[new]
    #[pyo3(signature = (domain, points, dt, seed, stream = 0, resolution = "strict"))]
    fn new(domain: &PyDomain, points: Vec<Vec<f64>>, dt: f64, seed: u64, stream: u64, resolution: &str) -> PyResult<Self> {
        if !(dt > 0.0) {
            return Err(FvlabError::new_err(format!("dt must be positive, got {dt}")));
        }
        let state = FvState::new(&domain.inner, &points).map_err(err)?;
        Ok(Self {
            domain: domain.inner.clone(),
            state,
            rng: RngStream::new(seed, stream),
            dt,
            resolution: self::resolution(resolution)?,
        })
    }

    /// Advances one step; returns the jumps as `(k, tau, dying, donor, xi)`.
    fn step(&mut self) -> PyResult<Vec<JumpTuple>> {
        let jumps = engine::fv_step_with(&mut self.state, &self.domain, self.dt, self.resolution, &mut self.rng).map_err(err)?;
        Ok(jumps.into_iter().map(|j| (j.k, j.tau, j.dying, j.donor, j.xi)).collect())
    }

    /// Advances `steps` steps and returns all jumps.
    fn run(&mut self, steps: u64) -> PyResult<Vec<JumpTuple>> {
        let mut out = Vec::new();
        for _ in 0..steps {
            out.extend(self.step()?);
        }
        Ok(out)
    }

    fn positions(&self) -> Vec<Vec<f64>> {
        self.state.points()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t()
    }

    #[getter]
    fn n(&self) -> usize {
        self.state.n()
    }

    #[getter]
    fn jump_count(&self) -> u64 {
        self.state.jump_count()
    }

    #[getter]
    fn coincidences(&self) -> u64 {
        self.state.coincidences()
    }
}

/// Time-averaged empirical measure from `n` particles started at the
/// domain's reference point. Returns `(masses, reference_masses, l1)`, where
/// the reference is the normalized Dirichlet ground state.
#[pyfunction]
#[pyo3(signature = (domain, n, dt, horizon, burn_in, bins, seed, observe_every = engine::DEFAULT_OBSERVE_EVERY))]
#[allow(clippy::too_many_arguments)]
fn qsd_estimate(
    domain: &PyDomain,
    n: usize,
    dt: f64,
    horizon: f64,
    burn_in: f64,
    bins: usize,
    seed: u64,
    observe_every: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let d = &domain.inner;
    let cfg = PathConfig::new(dt, horizon).map_err(err)?;
    let grid = BinGrid::cover(d, bins).map_err(err)?;
    let reference = engine::eigenfunction_reference(d).map_err(err)?.bin_masses(&grid);
    let hist = engine::qsd_estimate(d, n, &cfg, burn_in, &grid, observe_every, &mut RngStream::new(seed, 0)).map_err(err)?;
    let l1 = hist.l1_distance(&reference);
    Ok((hist.masses, reference, l1))
}

/// Runs an experiment from a JSON config (the same fields as the `fv-lab`
/// config file) without writing files. Returns the summary as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let raw = cli::RawConfig::from_json(config_json).map_err(err)?;
    let cfg = cli::validate(raw).map_err(err)?;
    let outcome = py.detach(|| cli::run_with_threads(&cfg)).map_err(err)?;
    serde_json::to_string(&outcome.summary).map_err(|e| FvlabError::new_err(e.to_string()))
}

#[pymodule]
fn fvlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FvlabError", m.py().get_type::<FvlabError>())?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyFvSystem>()?;
    m.add_function(wrap_pyfunction!(hyp_h, m)?)?;
    m.add_function(wrap_pyfunction!(theta_pd, m)?)?;
    m.add_function(wrap_pyfunction!(invert_theta, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(hawkes_nonintersect, m)?)?;
    m.add_function(wrap_pyfunction!(qsd_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
