//! A runnable space: navigation data plus chart topology, optional closed-form
//! providers (flow, geodesics, distance) and optional constraint handling for
//! embedded charts (the odd-dimensional sphere lives in its ambient space).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{fd_step, norm_raw, MetricField, VectorField};
use crate::zermelo::NavigationData;

/// Per-coordinate chart topology.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    Unbounded,
    Periodic(f64),
}

/// Which model family a space belongs to; `Custom` for DSL-defined spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Euclidean,
    Sphere,
    Cylinder,
    Torus,
    Custom,
}

type FlowFn = dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync;
type FlowPushFn = dyn Fn(&DVector<f64>, f64, &DVector<f64>) -> DVector<f64> + Send + Sync;
type GeodesicFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> (DVector<f64>, DVector<f64>) + Send + Sync;
type DistanceFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;
type AccelFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;
type ProjectFn = dyn Fn(&mut DVector<f64>, &mut DVector<f64>) + Send + Sync;
type NormalsFn = dyn Fn(&DVector<f64>) -> Vec<DVector<f64>> + Send + Sync;
type DirectionFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> Vec<DVector<f64>> + Send + Sync;

/// Maximum integration step for numerically integrated wind flows.
pub const FLOW_STEP: f64 = 1e-3;

#[derive(Clone)]
pub struct SpaceDefinition {
    name: String,
    nav: NavigationData,
    topology: Vec<Topology>,
    model: ModelKind,
    /// Some(period) when every flow orbit is closed with this common period.
    quasi_regular: Option<f64>,
    flow: Option<Arc<FlowFn>>,
    flow_pushforward: Option<Arc<FlowPushFn>>,
    h_geodesic: Option<Arc<GeodesicFn>>,
    h_distance: Option<Arc<DistanceFn>>,
    accel: Option<Arc<AccelFn>>,
    project: Option<Arc<ProjectFn>>,
    normals: Option<Arc<NormalsFn>>,
    /// Unit initial directions of all minimizing h-geodesics between two
    /// points, closed form. First entry is the canonical choice.
    h_directions: Option<Arc<DirectionFn>>,
}

impl std::fmt::Debug for SpaceDefinition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpaceDefinition")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("topology", &self.topology)
            .field("model", &self.model)
            .field("quasi_regular", &self.quasi_regular)
            .finish_non_exhaustive()
    }
}

impl SpaceDefinition {
    pub fn new(name: impl Into<String>, nav: NavigationData, topology: Vec<Topology>) -> Result<Self> {
        if topology.len() != nav.dim() {
            return Err(Error::DimensionMismatch { expected: nav.dim(), got: topology.len() });
        }
        Ok(SpaceDefinition {
            name: name.into(),
            nav,
            topology,
            model: ModelKind::Custom,
            quasi_regular: None,
            flow: None,
            flow_pushforward: None,
            h_geodesic: None,
            h_distance: None,
            accel: None,
            project: None,
            normals: None,
            h_directions: None,
        })
    }

    pub fn with_model(mut self, model: ModelKind) -> Self {
        self.model = model;
        self
    }

    pub fn with_quasi_regular(mut self, period: Option<f64>) -> Self {
        self.quasi_regular = period;
        self
    }

    pub fn with_flow<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        self.flow = Some(Arc::new(f));
        self
    }

    pub fn with_flow_pushforward<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>, f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.flow_pushforward = Some(Arc::new(f));
        self
    }

    pub fn with_h_geodesic<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>, f64) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    {
        self.h_geodesic = Some(Arc::new(f));
        self
    }

    pub fn with_h_distance<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        self.h_distance = Some(Arc::new(f));
        self
    }

    pub fn with_accel<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.accel = Some(Arc::new(f));
        self
    }

    pub fn with_projection<F>(mut self, f: F) -> Self
    where
        F: Fn(&mut DVector<f64>, &mut DVector<f64>) + Send + Sync + 'static,
    {
        self.project = Some(Arc::new(f));
        self
    }

    pub fn with_normals<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Vec<DVector<f64>> + Send + Sync + 'static,
    {
        self.normals = Some(Arc::new(f));
        self
    }

    pub fn with_h_directions<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>) -> Vec<DVector<f64>> + Send + Sync + 'static,
    {
        self.h_directions = Some(Arc::new(f));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.nav.dim()
    }

    pub fn nav(&self) -> &NavigationData {
        &self.nav
    }

    pub fn metric(&self) -> &MetricField {
        self.nav.metric()
    }

    pub fn wind(&self) -> &VectorField {
        self.nav.wind()
    }

    pub fn topology(&self) -> &[Topology] {
        &self.topology
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn quasi_regular_period(&self) -> Option<f64> {
        self.quasi_regular
    }

    pub fn is_periodic(&self) -> bool {
        self.topology.iter().any(|t| matches!(t, Topology::Periodic(_)))
    }

    pub fn axis_is_periodic(&self, axis: usize) -> bool {
        matches!(self.topology.get(axis), Some(Topology::Periodic(_)))
    }

    /// The same space with all periodic identifications removed. Flow orbits
    /// that closed only through the identification no longer close, so the
    /// quasi-regular marker is dropped for such spaces.
    pub fn universal_cover(&self) -> SpaceDefinition {
        if !self.is_periodic() {
            return self.clone();
        }
        let mut cover = self.clone();
        cover.topology = vec![Topology::Unbounded; self.dim()];
        cover.quasi_regular = None;
        cover.name = format!("{}-cover", self.name);
        // Closed-form distances and h-direction enumerations of the quotient
        // are lift-minimized; on the cover the plain chart versions apply.
        cover.h_distance = None;
        cover.h_directions = None;
        if self.model == ModelKind::Cylinder || self.model == ModelKind::Torus {
            let hm = self.metric().clone();
            cover.h_distance = Some(Arc::new(move |p: &DVector<f64>, q: &DVector<f64>| {
                let h = hm.at(p).unwrap_or_else(|_| DMatrix::identity(p.len(), p.len()));
                norm_raw(&h, &(q - p))
            }));
            let hm2 = self.metric().clone();
            cover.h_directions = Some(Arc::new(move |p: &DVector<f64>, q: &DVector<f64>| {
                let d = q - p;
                let h = hm2.at(p).unwrap_or_else(|_| DMatrix::identity(p.len(), p.len()));
                let n = norm_raw(&h, &d);
                if n < 1e-14 {
                    vec![]
                } else {
                    vec![d / n]
                }
            }));
        }
        cover
    }

    /// Wrap periodic coordinates into [0, period).
    pub fn canonicalize(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for (i, t) in self.topology.iter().enumerate() {
            if let Topology::Periodic(p) = t {
                out[i] = out[i].rem_euclid(*p);
            }
        }
        out
    }

    /// Displacement q - p with periodic components reduced to (-period/2, period/2].
    pub fn canonical_displacement(&self, p: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        let mut d = q - p;
        for (i, t) in self.topology.iter().enumerate() {
            if let Topology::Periodic(period) = t {
                let mut r = d[i].rem_euclid(*period);
                if r > period / 2.0 {
                    r -= period;
                }
                d[i] = r;
            }
        }
        d
    }

    pub fn same_point(&self, p: &DVector<f64>, q: &DVector<f64>) -> bool {
        self.canonical_displacement(p, q).amax() <= 1e-12
    }

    /// All lift offsets of the identity within the +-`window` period window.
    pub fn lift_offsets(&self, window: i64) -> Vec<DVector<f64>> {
        let periodic: Vec<(usize, f64)> = self
            .topology
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                Topology::Periodic(p) => Some((i, *p)),
                Topology::Unbounded => None,
            })
            .collect();
        let mut offsets = vec![DVector::zeros(self.dim())];
        for (i, period) in periodic {
            let mut next = Vec::new();
            for off in &offsets {
                for k in -window..=window {
                    let mut o = off.clone();
                    o[i] += k as f64 * period;
                    next.push(o);
                }
            }
            offsets = next;
        }
        offsets
    }

    /// Wind flow at time t (closed form when available, RK4 otherwise with
    /// step bounded by FLOW_STEP * max(1, |t|)).
    pub fn flow(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        if let Some(f) = &self.flow {
            return Ok(f(x, t));
        }
        if t == 0.0 {
            return Ok(x.clone());
        }
        let steps = ((t.abs() / (FLOW_STEP * t.abs().max(1.0))).ceil() as usize).max(16);
        let dt = t / steps as f64;
        let mut pos = x.clone();
        for _ in 0..steps {
            let k1 = self.wind().at(&pos)?;
            let k2 = self.wind().at(&(&pos + &k1 * (dt / 2.0)))?;
            let k3 = self.wind().at(&(&pos + &k2 * (dt / 2.0)))?;
            let k4 = self.wind().at(&(&pos + &k3 * dt))?;
            pos += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        Ok(pos)
    }

    /// Differential of the flow map applied to a tangent vector at x
    /// (closed form when available, central differences otherwise).
    pub fn flow_pushforward(&self, x: &DVector<f64>, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(f) = &self.flow_pushforward {
            return Ok(f(x, t, v));
        }
        let scale = v.norm();
        if scale == 0.0 {
            return Ok(v.clone());
        }
        let dir = v / scale;
        let eps = fd_step(x);
        let plus = self.flow(&(x + &dir * eps), t)?;
        let minus = self.flow(&(x - &dir * eps), t)?;
        Ok((plus - minus) * (scale / (2.0 * eps)))
    }

    /// Closed-form h-geodesic (position, velocity) if the space provides one.
    pub fn h_geodesic_closed_form(
        &self,
        x0: &DVector<f64>,
        v0: &DVector<f64>,
        t: f64,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        self.h_geodesic.as_ref().map(|f| f(x0, v0, t))
    }

    /// Closed-form h-distance if the space provides one. Quotient model
    /// spaces minimize over deck-transformation lifts.
    pub fn h_distance_closed_form(&self, p: &DVector<f64>, q: &DVector<f64>) -> Option<f64> {
        self.h_distance.as_ref().map(|f| f(p, q))
    }

    /// Unit initial directions of minimizing h-geodesics from p to q, closed
    /// form, when the space provides the enumeration.
    pub fn h_directions_closed_form(&self, p: &DVector<f64>, q: &DVector<f64>) -> Option<Vec<DVector<f64>>> {
        self.h_directions.as_ref().map(|f| f(p, q))
    }

    /// Geodesic acceleration: override if present, Christoffel contraction
    /// otherwise.
    pub fn h_accel(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(f) = &self.accel {
            return Ok(f(x, v));
        }
        let gamma = crate::geometry::christoffel(self.metric(), x)?;
        Ok(-gamma.contract(v, v))
    }

    /// Per-step constraint projection for embedded charts (no-op by default).
    pub fn project_state(&self, x: &mut DVector<f64>, v: &mut DVector<f64>) {
        if let Some(f) = &self.project {
            f(x, v);
        }
    }

    /// Normal frame of the constraint at x (empty for genuine charts).
    pub fn normal_frame(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        self.normals.as_ref().map(|f| f(x)).unwrap_or_default()
    }

    /// Chart dimension minus the number of constraint normals.
    pub fn intrinsic_dim(&self) -> usize {
        let probe = DVector::from_element(self.dim(), 0.5);
        self.dim() - self.normal_frame(&probe).len()
    }
}
