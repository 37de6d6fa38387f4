//! Python bindings for the conic Finsler engine: spaces, geodesics, the
//! non-symmetric distance, the polyline length oracle and cut loci, exposed
//! with plain lists and floats so the module needs nothing beyond CPython.

use std::path::PathBuf;

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kropina_core::dsl::document::{load_space, load_space_from_json, probe_grid};
use kropina_core::engine::{
    integrate_flow, jacobi_conjugate_search, kropina_exponential, kropina_geodesic,
    IntegrationConfig, PathSample,
};
use kropina_core::error::Error;
use kropina_core::geometry::{field_diagnostics, ChartPoint, Tangent};
use kropina_core::models::{
    cut_locus, cylinder_space, euclidean_space, sphere_space, torus_space, DEFAULT_CUT_SAMPLES,
};
use kropina_core::oracle::{polyline_oracle, OracleConfig};
use kropina_core::separation::{
    forward_domain_membership, separation, DomainVerdict, SeparationConfig, SeparationResult,
    SeparationStatus,
};
use kropina_core::space::{ModelKind, SpaceDefinition};
use kropina_core::zermelo::kropina_value;

fn err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn dv(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn point(v: Vec<f64>) -> PyResult<ChartPoint> {
    ChartPoint::new(dv(v)).map_err(err)
}

fn tangent(x: Vec<f64>, y: Vec<f64>) -> PyResult<Tangent> {
    Tangent::new(point(x)?, dv(y)).map_err(err)
}

/// A sampled parametrized path: positions, velocities and the conic speed
/// value at each sample.
#[pyclass(frozen)]
struct Path {
    inner: PathSample,
}

#[pymethods]
impl Path {
    /// Sample parameters, ascending from zero.
    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params.clone()
    }

    /// Chart coordinates of every sample.
    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points.iter().map(to_vec).collect()
    }

    /// Velocity components of every sample.
    #[getter]
    fn velocities(&self) -> Vec<Vec<f64>> {
        self.inner.velocities.iter().map(to_vec).collect()
    }

    /// Speed value at every sample (infinite where inadmissible).
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.f_values.clone()
    }

    /// True when the launch vector had to be renormalized to unit speed.
    #[getter]
    fn rescaled(&self) -> bool {
        self.inner.rescaled
    }

    fn end_point(&self) -> Vec<f64> {
        to_vec(self.inner.end_point())
    }

    fn end_velocity(&self) -> Vec<f64> {
        to_vec(self.inner.end_velocity())
    }

    /// Largest deviation of the speed value from one over the whole path.
    fn max_unit_deviation(&self) -> f64 {
        self.inner.max_unit_deviation()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Path(samples={}, rescaled={})", self.inner.len(), self.inner.rescaled)
    }
}

/// Outcome of a one-way distance query.
#[pyclass(frozen)]
struct Separation {
    inner: SeparationResult,
}

#[pymethods]
impl Separation {
    /// "same_point", "finite" or "unreachable".
    #[getter]
    fn status(&self) -> &'static str {
        match self.inner.status {
            SeparationStatus::SamePoint => "same_point",
            SeparationStatus::Finite => "finite",
            SeparationStatus::Unreachable { .. } => "unreachable",
        }
    }

    /// The distance for reachable targets, None otherwise.
    #[getter]
    fn value(&self) -> Option<f64> {
        self.inner.value
    }

    /// Fixed-point parameter of the solve; equals the value when finite.
    #[getter]
    fn tau_star(&self) -> Option<f64> {
        self.inner.tau_star
    }

    /// Unit initial vector of a minimizing geodesic, when one was found.
    #[getter]
    fn direction(&self) -> Option<Vec<f64>> {
        self.inner.initial_direction.as_ref().map(|t| to_vec(t.components()))
    }

    /// True when "unreachable" means "scan budget exhausted" rather than a
    /// proof of unreachability.
    #[getter]
    fn capped(&self) -> bool {
        matches!(self.inner.status, SeparationStatus::Unreachable { capped: true })
    }

    /// Number of pullback-distance evaluations spent by the solver.
    #[getter]
    fn evaluations(&self) -> usize {
        self.inner.evaluations
    }

    fn is_finite(&self) -> bool {
        self.inner.is_finite()
    }

    fn __repr__(&self) -> String {
        match self.inner.value {
            Some(v) => format!("Separation(status='{}', value={v})", self.status()),
            None => format!("Separation(status='{}', capped={})", self.status(), self.capped()),
        }
    }
}

/// A runnable conic Finsler space: a chart with a Riemannian metric and a
/// unit Killing wind field on it.
#[pyclass(frozen)]
struct Space {
    inner: SpaceDefinition,
}

#[pymethods]
impl Space {
    /// Flat unbounded chart of the given dimension with a constant wind.
    #[staticmethod]
    fn euclidean(dim: usize, wind: Vec<f64>) -> PyResult<Self> {
        Ok(Space { inner: euclidean_space(dim, &wind).map_err(err)? })
    }

    /// Flat chart with the first axis rolled up, wind (a, b).
    #[staticmethod]
    fn cylinder(a: f64, b: f64) -> PyResult<Self> {
        Ok(Space { inner: cylinder_space(a, b).map_err(err)? })
    }

    /// Flat chart with both axes rolled up and the fixed diagonal wind.
    #[staticmethod]
    fn torus() -> PyResult<Self> {
        Ok(Space { inner: torus_space().map_err(err)? })
    }

    /// Odd-dimensional round sphere in its ambient chart, rotational wind.
    #[staticmethod]
    fn sphere(dim: usize) -> PyResult<Self> {
        Ok(Space { inner: sphere_space(dim).map_err(err)? })
    }

    /// Load a space document (JSON with expression-valued entries) from disk.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Space { inner: load_space(&path).map_err(err)? })
    }

    /// Parse a space document from a JSON string.
    #[staticmethod]
    #[pyo3(signature = (text, name = "custom"))]
    fn loads(text: &str, name: &str) -> PyResult<Self> {
        Ok(Space { inner: load_space_from_json(text, name).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// "euclidean", "cylinder", "torus", "sphere" or "custom".
    #[getter]
    fn model(&self) -> &'static str {
        match self.inner.model() {
            ModelKind::Euclidean => "euclidean",
            ModelKind::Cylinder => "cylinder",
            ModelKind::Torus => "torus",
            ModelKind::Sphere => "sphere",
            ModelKind::Custom => "custom",
        }
    }

    #[getter]
    fn periodic(&self) -> bool {
        self.inner.is_periodic()
    }

    /// Common period of the wind orbits when they all close, else None.
    #[getter]
    fn orbit_period(&self) -> Option<f64> {
        self.inner.quasi_regular_period()
    }

    /// The same space with every periodic identification unrolled.
    fn universal_cover(&self) -> Space {
        Space { inner: self.inner.universal_cover() }
    }

    /// Metric matrix at a chart point, as nested lists.
    fn metric(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let h = self.inner.metric().at(&dv(x)).map_err(err)?;
        Ok((0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect()).collect())
    }

    /// Wind vector at a chart point.
    fn wind(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(to_vec(&self.inner.wind().at(&dv(x)).map_err(err)?))
    }

    /// Conic metric value F(x, y); None outside the forward cone.
    fn value(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
        let t = tangent(x, y)?;
        Ok(kropina_value(self.inner.nav(), &t).map_err(err)?.value())
    }

    /// Wind flow of a chart point for parameter t.
    fn flow(&self, x: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        Ok(to_vec(integrate_flow(&self.inner, &point(x)?, t).map_err(err)?.coords()))
    }

    /// Reduce a chart point modulo the periodic identifications.
    fn canonicalize(&self, x: Vec<f64>) -> Vec<f64> {
        to_vec(&self.inner.canonicalize(&dv(x)))
    }

    fn same_point(&self, p: Vec<f64>, q: Vec<f64>) -> bool {
        self.inner.same_point(&dv(p), &dv(q))
    }

    /// Closed-form metric distance between two points, when the space has one.
    fn metric_distance(&self, p: Vec<f64>, q: Vec<f64>) -> Option<f64> {
        self.inner.h_distance_closed_form(&dv(p), &dv(q))
    }

    /// Unit-speed conic geodesic launched by (x, y), sampled to parameter
    /// t_max.
    #[pyo3(signature = (x, y, t_max, steps = 1024))]
    fn geodesic(&self, x: Vec<f64>, y: Vec<f64>, t_max: f64, steps: usize) -> PyResult<Path> {
        let t = tangent(x, y)?;
        let cfg = IntegrationConfig::with_steps(steps);
        Ok(Path { inner: kropina_geodesic(&self.inner, &t, t_max, &cfg).map_err(err)? })
    }

    /// Endpoint of the forward exponential map after parameter t.
    #[pyo3(signature = (x, y, t, steps = 1024))]
    fn exponential(&self, x: Vec<f64>, y: Vec<f64>, t: f64, steps: usize) -> PyResult<Vec<f64>> {
        let tg = tangent(x, y)?;
        let cfg = IntegrationConfig::with_steps(steps);
        Ok(to_vec(kropina_exponential(&self.inner, &tg, t, &cfg).map_err(err)?.coords()))
    }

    /// One-way distance from p to q via the fixed-point solve.
    #[pyo3(signature = (p, q, cap = 64.0, tol = 1e-8))]
    fn distance(&self, p: Vec<f64>, q: Vec<f64>, cap: f64, tol: f64) -> PyResult<Separation> {
        let cfg = SeparationConfig { cap, tol, ..Default::default() };
        let res = separation(&self.inner, &point(p)?, &point(q)?, &cfg).map_err(err)?;
        Ok(Separation { inner: res })
    }

    /// "forward", "backward", "both" or "neither": which of the two one-way
    /// distances between p and q is finite.
    fn reachability(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<&'static str> {
        let cfg = SeparationConfig::default();
        let v = forward_domain_membership(&self.inner, &point(p)?, &point(q)?, &cfg).map_err(err)?;
        Ok(match v {
            DomainVerdict::Forward => "forward",
            DomainVerdict::Backward => "backward",
            DomainVerdict::Both => "both",
            DomainVerdict::Neither => "neither",
        })
    }

    /// Solver-independent length estimate by polyline descent; None when no
    /// admissible polyline was found.
    #[pyo3(signature = (p, q, segments = 16, restarts = 6, seed = 0x6b72_6f70, sweeps = 120, quadrature = 8))]
    fn oracle_length(
        &self,
        p: Vec<f64>,
        q: Vec<f64>,
        segments: usize,
        restarts: usize,
        seed: u64,
        sweeps: usize,
        quadrature: usize,
    ) -> PyResult<Option<f64>> {
        let cfg = OracleConfig { segments, restarts, seed, sweeps, quadrature };
        Ok(polyline_oracle(&self.inner, &point(p)?, &point(q)?, &cfg).map_err(err)?.length)
    }

    /// Analytic cut locus of p on the model spaces, as (parameters, points).
    #[pyo3(signature = (p, samples = DEFAULT_CUT_SAMPLES))]
    fn cut_locus(&self, p: Vec<f64>, samples: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let curve = cut_locus(&self.inner, &point(p)?, samples).map_err(err)?;
        let pts = curve.samples.iter().map(|s| to_vec(s.coords())).collect();
        Ok((curve.parameters, pts))
    }

    /// Parameters in (0, t_max] where the geodesic from (x, y) meets a
    /// conjugate point, by the deviation-field search.
    #[pyo3(signature = (x, y, t_max, steps = 1024))]
    fn conjugate_parameters(&self, x: Vec<f64>, y: Vec<f64>, t_max: f64, steps: usize) -> PyResult<Vec<f64>> {
        let t = tangent(x, y)?;
        let cfg = IntegrationConfig::with_steps(steps);
        Ok(jacobi_conjugate_search(&self.inner, &t, t_max, &cfg).map_err(err)?.parameters)
    }

    /// (unit_deviation, killing_residual) of the wind over a probe grid:
    /// both vanish exactly when the wind is a unit Killing field.
    fn killing_report(&self) -> PyResult<(f64, f64)> {
        let mut probes = Vec::new();
        for mut x in probe_grid(self.inner.topology()) {
            let mut v = DVector::zeros(x.len());
            self.inner.project_state(&mut x, &mut v);
            probes.push(x);
        }
        let diag = field_diagnostics(self.inner.metric(), self.inner.wind(), &probes).map_err(err)?;
        Ok((diag.unit_deviation, diag.killing_residual))
    }

    fn __repr__(&self) -> String {
        format!(
            "Space(name='{}', dim={}, model='{}')",
            self.inner.name(),
            self.inner.dim(),
            self.model()
        )
    }
}

/// Conic Finsler engine bindings: build or load a `Space`, then query values,
/// geodesics, distances, reachability, cut loci and diagnostics on it.
#[pymodule]
fn kropina(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Space>()?;
    m.add_class::<Path>()?;
    m.add_class::<Separation>()?;
    Ok(())
}
