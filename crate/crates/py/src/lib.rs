//! Python bindings: measures, lattices, quantization, distances and the
//! tail checks. Errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wquant::harness::verify::verify as run_verify;
use wquant::measure::{MeasureSpec, QuadratureSpec};
use wquant::quantize::{self, WpMethod};
use wquant::tail::{self, TailDecaySpec};
use wquant::{ApproximantMode, DensityMeasure, DiscreteMeasure};

fn err(e: wquant::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(s: &str) -> PyResult<ApproximantMode> {
    match s {
        "dirac" => Ok(ApproximantMode::Dirac),
        "indicator" => Ok(ApproximantMode::Indicator),
        _ => Err(PyValueError::new_err(format!("mode must be 'dirac' or 'indicator', got {s:?}"))),
    }
}

/// Probability measure: atoms, a density on a box, or a mixture.
#[pyclass(frozen, module = "pywquant")]
struct Measure(wquant::Measure);

#[pymethods]
impl Measure {
    /// Build from a JSON measure spec.
    #[staticmethod]
    fn from_json(spec: &str) -> PyResult<Self> {
        let s: MeasureSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        s.build().map(Measure).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (dim, half_width = 0.5, nodes = None))]
    fn uniform_cube(dim: usize, half_width: f64, nodes: Option<usize>) -> PyResult<Self> {
        let b = wquant::geometry::BoxDomain::cube(dim, half_width);
        let mut m = DensityMeasure::uniform_box(b);
        if let Some(n) = nodes {
            m = m.with_quadrature(QuadratureSpec::tensor_grid(n)).map_err(err)?;
        }
        Ok(Measure(m.into()))
    }

    #[staticmethod]
    #[pyo3(signature = (mean, sigma, truncation = 8.0))]
    fn gaussian(mean: Vec<f64>, sigma: f64, truncation: f64) -> PyResult<Self> {
        Ok(Measure(DensityMeasure::gaussian(mean, sigma, truncation).map_err(err)?.into()))
    }

    /// Weighted atoms; weights are normalized.
    #[staticmethod]
    #[pyo3(signature = (points, weights = None))]
    fn atoms(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let dim = points.first().map_or(0, |p| p.len());
        let m = match weights {
            Some(w) => DiscreteMeasure::from_weighted(dim, points, &w),
            None => DiscreteMeasure::uniform(dim, points),
        };
        Ok(Measure(m.map_err(err)?.into()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `∫ |x|^p dμ`.
    fn moment(&self, p: f64) -> PyResult<f64> {
        self.0.moment(p).map_err(err)
    }

    /// `(points, weights)` of the discrete surrogate.
    fn discretize(&self) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let d = self.0.discretize().map_err(err)?;
        Ok((d.locations().map(|x| x.to_vec()).collect(), d.weights()))
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        self.0.sample(n, seed).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Measure(dim={})", self.0.dim())
    }
}

#[pyclass(frozen, module = "pywquant")]
struct Lattice(wquant::Lattice);

#[pymethods]
impl Lattice {
    #[staticmethod]
    fn integer(dim: usize) -> PyResult<Self> {
        wquant::Lattice::integer(dim).map(Lattice).map_err(err)
    }

    #[staticmethod]
    fn checkerboard(dim: usize) -> PyResult<Self> {
        wquant::Lattice::checkerboard(dim).map(Lattice).map_err(err)
    }

    #[staticmethod]
    fn hexagonal() -> PyResult<Self> {
        wquant::Lattice::hexagonal().map(Lattice).map_err(err)
    }

    /// Lattice generated by the rows of `basis`.
    #[staticmethod]
    fn general(basis: Vec<Vec<f64>>) -> PyResult<Self> {
        wquant::Lattice::general(basis).map(Lattice).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Coordinates of the cell of `hΛ` containing `x`.
    fn decode(&self, h: f64, x: Vec<f64>) -> Vec<i64> {
        self.0.decode(h, &x).to_vec()
    }

    fn site(&self, h: f64, cell: Vec<i64>) -> Vec<f64> {
        self.0.site(h, &cell)
    }

    /// `(diameter, covering_radius)` of the Voronoi cell at scale 1.
    fn cell_geometry(&self) -> PyResult<(f64, f64)> {
        let g = self.0.voronoi_geometry().map_err(err)?;
        Ok((g.diameter, g.covering_radius))
    }

    fn covering_count(&self, h: f64, radius: f64) -> PyResult<u64> {
        self.0.covering_count(h, radius).map_err(err)
    }
}

#[pyclass(frozen, module = "pywquant")]
struct Approximant(wquant::Approximant);

#[pymethods]
impl Approximant {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        wquant::Approximant::from_json(s).map(Approximant).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn masses(&self) -> Vec<f64> {
        self.0.masses()
    }

    fn sites(&self) -> Vec<Vec<f64>> {
        self.0.sites()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.0.mode {
            ApproximantMode::Dirac => "dirac",
            ApproximantMode::Indicator => "indicator",
        }
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
#[pyo3(signature = (measure, lattice, h, mode = "dirac"))]
fn quantize_lattice(measure: &Measure, lattice: &Lattice, h: f64, mode: &str) -> PyResult<Approximant> {
    quantize::quantize_lattice(&measure.0, &lattice.0, h, self::mode(mode)?).map(Approximant).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (measure, sites, mode = "dirac"))]
fn quantize_nonuniform(measure: &Measure, sites: Vec<Vec<f64>>, mode: &str) -> PyResult<Approximant> {
    quantize::quantize_nonuniform(&measure.0, &sites, self::mode(mode)?).map(Approximant).map_err(err)
}

#[pyfunction]
fn coupling_cost(measure: &Measure, approx: &Approximant, p: f64) -> PyResult<f64> {
    quantize::coupling_cost(&measure.0, &approx.0, p).map_err(err)
}

/// `{"coupling", "measured", "method"}` for `W_p(μ, approximant)`.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, measure: &Measure, approx: &Approximant, p: f64) -> PyResult<Bound<'py, PyDict>> {
    let ev = quantize::evaluate(&measure.0, &approx.0, p).map_err(err)?;
    let method = match ev.method {
        WpMethod::Line => "line",
        WpMethod::Lp => "lp",
        WpMethod::NearestSite => "nearest_site",
        WpMethod::BoundOnly => "bound_only",
    };
    let d = PyDict::new(py);
    d.set_item("coupling", ev.coupling)?;
    d.set_item("measured", ev.measured)?;
    d.set_item("method", method)?;
    Ok(d)
}

/// Exact `W_p` between two discrete measures.
#[pyfunction]
fn wasserstein(a: &Measure, b: &Measure, p: f64) -> PyResult<f64> {
    let (x, y) = (a.0.discretize().map_err(err)?, b.0.discretize().map_err(err)?);
    wquant::ot::wasserstein(&x, &y, p).map_err(err)
}

/// `W_p(μ, projection of μ onto the ball of radius R)`.
#[pyfunction]
#[pyo3(name = "truncation_error")]
fn py_truncation_error(measure: &Measure, radius: f64, p: f64) -> PyResult<f64> {
    tail::truncation_error(&measure.0, radius, p).map_err(err)
}

/// Decay-condition report as JSON.
#[pyfunction]
#[pyo3(signature = (measure, epsilon, p, radius, q = 2.0))]
fn tail_report(measure: &Measure, epsilon: f64, p: f64, radius: f64, q: f64) -> PyResult<String> {
    let spec = TailDecaySpec::new(epsilon, p, radius, q).map_err(err)?;
    let r = tail::tail_report(&measure.0, &spec).map_err(err)?;
    serde_json::to_string(&r).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `[(id, lhs, rhs)]` for the three radial moment inequalities on `hΛ`.
#[pyfunction]
fn moment_bounds(measure: &Measure, lattice: &Lattice, h: f64, p: f64) -> PyResult<Vec<(String, f64, f64)>> {
    let scheme = wquant::VoronoiScheme::lattice(lattice.0.clone(), h).map_err(err)?;
    let reps = quantize::moment_bound_suite(&measure.0, &scheme, p).map_err(err)?;
    Ok(reps.iter().map(|r| (r.inequality_id.label().to_string(), r.lhs, r.rhs)).collect())
}

/// Run the acceptance suite; `[(id, name, passed, detail)]`.
#[pyfunction]
#[pyo3(signature = (jobs = 1))]
fn verify(py: Python<'_>, jobs: usize) -> Vec<(u8, String, bool, String)> {
    let r = py.detach(|| run_verify(jobs));
    r.criteria.into_iter().map(|c| (c.id, c.name, c.passed, c.detail)).collect()
}

#[pymodule]
fn pywquant(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Measure>()?;
    m.add_class::<Lattice>()?;
    m.add_class::<Approximant>()?;
    m.add_function(wrap_pyfunction!(quantize_lattice, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_nonuniform, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_cost, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(py_truncation_error, m)?)?;
    m.add_function(wrap_pyfunction!(tail_report, m)?)?;
    m.add_function(wrap_pyfunction!(moment_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
