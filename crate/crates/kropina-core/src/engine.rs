//! Geodesic machinery: fixed-step RK4 integration of metric geodesics and of
//! the wind flow, their composition into unit-speed conic geodesics, the
//! exponential map, deviation (Jacobi) fields with conjugate-parameter search,
//! and the radial orthogonality residual.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{norm_raw, ChartPoint, Tangent};
use crate::space::{ModelKind, SpaceDefinition};
use crate::zermelo::{fundamental_tensor, kropina_value, KropinaValue};

/// Velocity drift tolerance of the integrators on reference spaces.
pub const TOL_INT: f64 = 1e-7;
/// Allowed deviation of F from 1 along composed unit-speed geodesics.
pub const TOL_UNIT_SPEED: f64 = 1e-6;
/// Directions closer than this to the excluded opposite-wind direction are
/// rejected.
pub const TOL_DEGENERATE: f64 = 1e-9;
const MIN_STEPS: usize = 16;

/// Knobs shared by all integration entry points.
#[derive(Clone, Copy, Debug)]
pub struct IntegrationConfig {
    /// Number of fixed RK4 steps over the full parameter range.
    pub steps: usize,
    /// Prefer closed-form providers when the space has them.
    pub use_closed_form: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig { steps: 1024, use_closed_form: true }
    }
}

impl IntegrationConfig {
    pub fn with_steps(steps: usize) -> Self {
        IntegrationConfig { steps, ..Default::default() }
    }

    pub fn numerical(steps: usize) -> Self {
        IntegrationConfig { steps, use_closed_form: false }
    }

    fn effective_steps(&self) -> usize {
        self.steps.max(MIN_STEPS)
    }
}

/// A sampled parametrized path with velocities and per-sample speed values.
/// For wind-composed geodesics `f_values` holds F(P, Pdot); for plain metric
/// geodesics it holds the metric speed.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub params: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub f_values: Vec<f64>,
    pub admissible: Vec<bool>,
    /// Set when the initial vector had to be renormalized.
    pub rescaled: bool,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn end_point(&self) -> &DVector<f64> {
        self.points.last().expect("paths hold at least one sample")
    }

    pub fn end_velocity(&self) -> &DVector<f64> {
        self.velocities.last().expect("paths hold at least one sample")
    }

    /// Largest |f - 1| over the path.
    pub fn max_unit_deviation(&self) -> f64 {
        self.f_values.iter().map(|f| (f - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn check_base(space: &SpaceDefinition, x: &DVector<f64>) -> Result<()> {
    if x.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: x.len() });
    }
    Ok(())
}

/// One RK4 step of x' = v, v' = a(x, v), followed by the space's constraint
/// projection.
fn rk4_step(space: &SpaceDefinition, x: &mut DVector<f64>, v: &mut DVector<f64>, dt: f64) -> Result<()> {
    let k1x = v.clone();
    let k1v = space.h_accel(x, v)?;
    let x2 = &*x + &k1x * (dt / 2.0);
    let v2 = &*v + &k1v * (dt / 2.0);
    let k2x = v2.clone();
    let k2v = space.h_accel(&x2, &v2)?;
    let x3 = &*x + &k2x * (dt / 2.0);
    let v3 = &*v + &k2v * (dt / 2.0);
    let k3x = v3.clone();
    let k3v = space.h_accel(&x3, &v3)?;
    let x4 = &*x + &k3x * dt;
    let v4 = &*v + &k3v * dt;
    let k4x = v4.clone();
    let k4v = space.h_accel(&x4, &v4)?;
    *x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
    *v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
    space.project_state(x, v);
    Ok(())
}

fn sample_grid(t_max: f64, steps: usize) -> Vec<f64> {
    if t_max == 0.0 {
        return vec![0.0];
    }
    (0..=steps).map(|k| t_max * k as f64 / steps as f64).collect()
}

/// Raw fixed-step integration of the geodesic equation from (x0, v0), no
/// speed normalization. Returns (positions, velocities) on the sample grid.
fn integrate_h_raw(
    space: &SpaceDefinition,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t_max: f64,
    steps: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let grid = sample_grid(t_max, steps);
    let mut points = Vec::with_capacity(grid.len());
    let mut velocities = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    let mut v = v0.clone();
    points.push(x.clone());
    velocities.push(v.clone());
    let dt = if grid.len() > 1 { t_max / steps as f64 } else { 0.0 };
    for _ in 1..grid.len() {
        rk4_step(space, &mut x, &mut v, dt)?;
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Numerical {
                context: "geodesic integration",
                message: "state became non-finite".into(),
            });
        }
        points.push(x.clone());
        velocities.push(v.clone());
    }
    Ok((points, velocities))
}

/// Integrate the metric geodesic with |v|_h = 1; the initial vector is
/// rescaled (and flagged) when its speed is off by more than 1e-9.
pub fn integrate_h_geodesic(
    space: &SpaceDefinition,
    start: &Tangent,
    t_max: f64,
    config: &IntegrationConfig,
) -> Result<PathSample> {
    check_base(space, start.base().coords())?;
    if t_max < 0.0 {
        return Err(Error::InvalidInput {
            context: "geodesic integration",
            message: format!("negative duration {t_max}"),
        });
    }
    let x0 = start.base().coords();
    let h0 = space.metric().at(x0)?;
    let speed = norm_raw(&h0, start.components());
    if speed < 1e-300 {
        return Err(Error::ZeroDirection);
    }
    let rescaled = (speed - 1.0).abs() > 1e-9;
    let v0 = start.components() / speed;
    let steps = config.effective_steps();
    let grid = sample_grid(t_max, steps);

    let (points, velocities) = if config.use_closed_form && space.h_geodesic_closed_form(x0, &v0, 0.0).is_some() {
        let mut points = Vec::with_capacity(grid.len());
        let mut velocities = Vec::with_capacity(grid.len());
        for &t in &grid {
            let (p, v) = space.h_geodesic_closed_form(x0, &v0, t).expect("provider checked above");
            points.push(p);
            velocities.push(v);
        }
        (points, velocities)
    } else {
        integrate_h_raw(space, x0, &v0, t_max, steps)?
    };

    let mut f_values = Vec::with_capacity(grid.len());
    for (p, v) in points.iter().zip(&velocities) {
        let h = space.metric().at(p)?;
        f_values.push(norm_raw(&h, v));
    }
    let admissible = vec![true; grid.len()];
    Ok(PathSample { params: grid, points, velocities, f_values, admissible, rescaled })
}

/// Transport a point along the wind for time t.
pub fn integrate_flow(space: &SpaceDefinition, x0: &ChartPoint, t: f64) -> Result<ChartPoint> {
    check_base(space, x0.coords())?;
    ChartPoint::new(space.flow(x0.coords(), t)?)
}

/// The unit-speed conic geodesic launched by y0: the metric geodesic in the
/// direction y0 - W carried along by the wind flow. The initial vector is
/// rescaled to F = 1 when necessary (flagged on the sample).
pub fn kropina_geodesic(
    space: &SpaceDefinition,
    y0: &Tangent,
    t_max: f64,
    config: &IntegrationConfig,
) -> Result<PathSample> {
    check_base(space, y0.base().coords())?;
    let value = kropina_value(space.nav(), y0)?;
    let f = match value {
        KropinaValue::Admissible { value, .. } => value,
        KropinaValue::Inadmissible { beta } => {
            return Err(Error::InadmissibleTangent { what: "geodesic initial vector", beta });
        }
    };
    let p = y0.base().coords();
    let y_unit = y0.components() / f;
    let w = space.wind().at(p)?;
    let v0 = &y_unit - &w;
    let h0 = space.metric().at(p)?;
    let v_norm = norm_raw(&h0, &v0);
    if v_norm < TOL_DEGENERATE {
        return Err(Error::ExcludedDirection { norm: v_norm });
    }
    let rescaled = (f - 1.0).abs() > 1e-9;

    let rho = integrate_h_geodesic(space, &Tangent::new(y0.base().clone(), v0)?, t_max, config)?;
    let mut points = Vec::with_capacity(rho.len());
    let mut velocities = Vec::with_capacity(rho.len());
    let mut f_values = Vec::with_capacity(rho.len());
    let mut admissible = Vec::with_capacity(rho.len());
    for (k, &t) in rho.params.iter().enumerate() {
        let pos = space.flow(&rho.points[k], t)?;
        let pushed = space.flow_pushforward(&rho.points[k], t, &rho.velocities[k])?;
        let vel = space.wind().at(&pos)? + pushed;
        let h = space.metric().at(&pos)?;
        let w_here = space.wind().at(&pos)?;
        let value = crate::zermelo::kropina_value_raw(&h, &w_here, &vel);
        f_values.push(value.value().unwrap_or(f64::INFINITY));
        admissible.push(value.is_admissible());
        points.push(pos);
        velocities.push(vel);
    }
    Ok(PathSample {
        params: rho.params,
        points,
        velocities,
        f_values,
        admissible,
        rescaled: rescaled || rho.rescaled,
    })
}

/// Endpoint of the forward exponential map after time t. Homogeneity is used
/// to accept vectors of any admissible length: (y, t) is traded for
/// (y / F(y), t F(y)).
pub fn kropina_exponential(
    space: &SpaceDefinition,
    y: &Tangent,
    t: f64,
    config: &IntegrationConfig,
) -> Result<ChartPoint> {
    check_base(space, y.base().coords())?;
    if t < 0.0 {
        return Err(Error::InvalidInput {
            context: "exponential map",
            message: format!("negative parameter {t}"),
        });
    }
    if t == 0.0 {
        return Ok(y.base().clone());
    }
    let value = kropina_value(space.nav(), y)?;
    let f = value.value().ok_or(Error::InadmissibleTangent {
        what: "exponential direction",
        beta: value.beta(),
    })?;
    let path = kropina_geodesic(space, y, t * f, config)?;
    ChartPoint::new(path.end_point().clone())
}

/// How a conjugate report was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConjugateMethod {
    ClosedForm,
    Numerical,
}

/// Parameters in (0, t_max] where a deviation field vanishing at 0 vanishes
/// again, with the sampled magnitude trace of the deviation matrix.
#[derive(Clone, Debug)]
pub struct ConjugateReport {
    pub parameters: Vec<f64>,
    pub trace_params: Vec<f64>,
    pub trace_norms: Vec<f64>,
    pub method: ConjugateMethod,
}

/// Closed-form conjugate parameters where the space family has them: none on
/// the flat charts, every multiple of pi on the odd spheres.
pub fn closed_form_conjugates(space: &SpaceDefinition, t_max: f64) -> Option<ConjugateReport> {
    let parameters = match space.model() {
        ModelKind::Euclidean | ModelKind::Cylinder | ModelKind::Torus => Vec::new(),
        ModelKind::Sphere => {
            let mut out = Vec::new();
            let mut k = 1usize;
            while k as f64 * std::f64::consts::PI <= t_max {
                out.push(k as f64 * std::f64::consts::PI);
                k += 1;
            }
            out
        }
        ModelKind::Custom => return None,
    };
    Some(ConjugateReport {
        parameters,
        trace_params: Vec::new(),
        trace_norms: Vec::new(),
        method: ConjugateMethod::ClosedForm,
    })
}

/// State advanced by the deviation-field integrator: base geodesic plus a
/// basis of deviation fields with their derivatives.
#[derive(Clone)]
struct DeviationState {
    x: DVector<f64>,
    v: DVector<f64>,
    j: Vec<DVector<f64>>,
    jd: Vec<DVector<f64>>,
}

/// Second derivative of a deviation field, obtained by differencing the
/// geodesic acceleration along the field. Linear in (j, jd) up to the
/// differencing error.
fn deviation_accel(
    space: &SpaceDefinition,
    x: &DVector<f64>,
    v: &DVector<f64>,
    j: &DVector<f64>,
    jd: &DVector<f64>,
) -> Result<DVector<f64>> {
    let norm = (j.norm_squared() + jd.norm_squared()).sqrt();
    if norm < 1e-300 {
        return Ok(DVector::zeros(x.len()));
    }
    let u = j / norm;
    let ud = jd / norm;
    let eps = 1e-6 * (1.0 + x.amax());
    let plus = space.h_accel(&(x + &u * eps), &(v + &ud * eps))?;
    let minus = space.h_accel(&(x - &u * eps), &(v - &ud * eps))?;
    Ok((plus - minus) * (norm / (2.0 * eps)))
}

fn deviation_derivative(space: &SpaceDefinition, s: &DeviationState) -> Result<DeviationState> {
    let mut j = Vec::with_capacity(s.j.len());
    let mut jd = Vec::with_capacity(s.j.len());
    for k in 0..s.j.len() {
        j.push(s.jd[k].clone());
        jd.push(deviation_accel(space, &s.x, &s.v, &s.j[k], &s.jd[k])?);
    }
    Ok(DeviationState { x: s.v.clone(), v: space.h_accel(&s.x, &s.v)?, j, jd })
}

fn deviation_axpy(base: &DeviationState, k: &DeviationState, c: f64) -> DeviationState {
    DeviationState {
        x: &base.x + &k.x * c,
        v: &base.v + &k.v * c,
        j: base.j.iter().zip(&k.j).map(|(a, b)| a + b * c).collect(),
        jd: base.jd.iter().zip(&k.jd).map(|(a, b)| a + b * c).collect(),
    }
}

fn deviation_rk4_step(space: &SpaceDefinition, s: &mut DeviationState, dt: f64) -> Result<()> {
    let k1 = deviation_derivative(space, s)?;
    let k2 = deviation_derivative(space, &deviation_axpy(s, &k1, dt / 2.0))?;
    let k3 = deviation_derivative(space, &deviation_axpy(s, &k2, dt / 2.0))?;
    let k4 = deviation_derivative(space, &deviation_axpy(s, &k3, dt))?;
    let mut next = deviation_axpy(s, &k1, dt / 6.0);
    next = deviation_axpy(&next, &k2, dt / 3.0);
    next = deviation_axpy(&next, &k3, dt / 3.0);
    next = deviation_axpy(&next, &k4, dt / 6.0);
    space.project_state(&mut next.x, &mut next.v);
    *s = next;
    Ok(())
}

/// Determinant of the deviation columns completed by the geodesic velocity
/// and the constraint normals; its zeros mark conjugate parameters.
fn deviation_det(space: &SpaceDefinition, s: &DeviationState) -> f64 {
    let m = s.x.len();
    let mut cols: Vec<DVector<f64>> = s.j.clone();
    let vn = s.v.norm();
    cols.push(if vn > 0.0 { &s.v / vn } else { s.v.clone() });
    cols.extend(space.normal_frame(&s.x));
    if cols.len() != m {
        return f64::NAN;
    }
    DMatrix::from_columns(&cols).determinant()
}

fn deviation_norm(s: &DeviationState) -> f64 {
    s.j.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
}

/// Advance a snapshot to parameter `t` (relative offset from the snapshot)
/// with a few fixed substeps; used by the refinement searches.
fn det_at_offset(space: &SpaceDefinition, snapshot: &DeviationState, offset: f64) -> Result<f64> {
    let mut s = snapshot.clone();
    if offset > 0.0 {
        let substeps = 4;
        let dt = offset / substeps as f64;
        for _ in 0..substeps {
            deviation_rk4_step(space, &mut s, dt)?;
        }
    }
    Ok(deviation_det(space, &s))
}

/// Metric-orthonormal basis of the tangent space at p orthogonal to `v` and
/// to the constraint normals.
fn transverse_basis(space: &SpaceDefinition, p: &DVector<f64>, v: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let m = space.dim();
    let h = space.metric().at(p)?;
    let mut frame: Vec<DVector<f64>> = Vec::new();
    let vn = norm_raw(&h, v);
    if vn > 0.0 {
        frame.push(v / vn);
    }
    for n in space.normal_frame(p) {
        let mut u = n;
        for f in &frame {
            let r = crate::geometry::inner_raw(&h, &u, f);
            u -= f * r;
        }
        let nrm = norm_raw(&h, &u);
        if nrm > 1e-9 {
            frame.push(u / nrm);
        }
    }
    let reserved = frame.len();
    for i in 0..m {
        let mut u = DVector::zeros(m);
        u[i] = 1.0;
        for f in &frame {
            let r = crate::geometry::inner_raw(&h, &u, f);
            u -= f * r;
        }
        let nrm = norm_raw(&h, &u);
        if nrm > 1e-9 {
            frame.push(u / nrm);
        }
    }
    Ok(frame.split_off(reserved))
}

/// Find parameters in (0, t_max] where the deviation determinant vanishes:
/// sign changes are bisected, and local dips of the magnitude are closed in
/// on by golden-section search and accepted when the refined magnitude is
/// consistent with an even-order zero.
pub fn jacobi_conjugate_search(
    space: &SpaceDefinition,
    y0: &Tangent,
    t_max: f64,
    config: &IntegrationConfig,
) -> Result<ConjugateReport> {
    check_base(space, y0.base().coords())?;
    if t_max <= 0.0 {
        return Err(Error::InvalidInput {
            context: "conjugate search",
            message: format!("non-positive horizon {t_max}"),
        });
    }
    let value = kropina_value(space.nav(), y0)?;
    let f = value.value().ok_or(Error::InadmissibleTangent {
        what: "conjugate search direction",
        beta: value.beta(),
    })?;
    let p = y0.base().coords();
    let w = space.wind().at(p)?;
    let v0 = y0.components() / f - &w;
    let h0 = space.metric().at(p)?;
    let vn = norm_raw(&h0, &v0);
    if vn < TOL_DEGENERATE {
        return Err(Error::ExcludedDirection { norm: vn });
    }
    let v0 = v0 / vn;
    let basis = transverse_basis(space, p, &v0)?;

    let steps = config.effective_steps();
    let dt = t_max / steps as f64;
    let mut state = DeviationState {
        x: p.clone(),
        v: v0,
        j: vec![DVector::zeros(space.dim()); basis.len()],
        jd: basis,
    };

    let mut dets = Vec::with_capacity(steps + 1);
    let mut snapshots: Vec<DeviationState> = Vec::with_capacity(steps + 1);
    let mut trace_params = Vec::with_capacity(steps + 1);
    let mut trace_norms = Vec::with_capacity(steps + 1);
    dets.push(deviation_det(space, &state));
    snapshots.push(state.clone());
    trace_params.push(0.0);
    trace_norms.push(deviation_norm(&state));
    for k in 1..=steps {
        deviation_rk4_step(space, &mut state, dt)?;
        let d = deviation_det(space, &state);
        if !d.is_finite() {
            return Err(Error::Numerical {
                context: "conjugate search",
                message: "deviation determinant became non-finite".into(),
            });
        }
        dets.push(d);
        snapshots.push(state.clone());
        trace_params.push(k as f64 * dt);
        trace_norms.push(deviation_norm(&state));
    }
    let scale = dets.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);

    let mut parameters: Vec<f64> = Vec::new();
    let push_parameter = |t: f64, parameters: &mut Vec<f64>| {
        if t > 1e-9 && parameters.last().is_none_or(|last| (t - last).abs() > 1e-6) {
            parameters.push(t);
        }
    };
    for k in 1..=steps {
        let (d_prev, d_here) = (dets[k - 1], dets[k]);
        if d_prev != 0.0 && d_here != 0.0 && d_prev.signum() != d_here.signum() {
            // Odd-order zero: bisect on the sign change.
            let base = &snapshots[k - 1];
            let t_base = trace_params[k - 1];
            let mut lo = 0.0;
            let mut hi = dt;
            let sign_lo = d_prev.signum();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let d_mid = det_at_offset(space, base, mid)?;
                if d_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if d_mid.signum() == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-7 {
                    break;
                }
            }
            push_parameter(t_base + 0.5 * (lo + hi), &mut parameters);
        } else if k + 1 <= steps
            && dets[k].abs() <= dets[k - 1].abs()
            && dets[k].abs() <= dets[k + 1].abs()
            && dets[k].abs() < 0.05 * scale
        {
            // Candidate even-order zero: a dip of the magnitude. Close in by
            // golden-section search over the two surrounding intervals.
            let base = &snapshots[k - 1];
            let t_base = trace_params[k - 1];
            let mut lo = 0.0;
            let mut hi = 2.0 * dt;
            let golden = 0.5 * (3.0 - 5.0f64.sqrt());
            let mut x1 = lo + golden * (hi - lo);
            let mut x2 = hi - golden * (hi - lo);
            let mut f1 = det_at_offset(space, base, x1)?.abs();
            let mut f2 = det_at_offset(space, base, x2)?.abs();
            for _ in 0..80 {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = lo + golden * (hi - lo);
                    f1 = det_at_offset(space, base, x1)?.abs();
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = hi - golden * (hi - lo);
                    f2 = det_at_offset(space, base, x2)?.abs();
                }
                if hi - lo <= 1e-7 {
                    break;
                }
            }
            let t_min = t_base + 0.5 * (lo + hi);
            let f_min = f1.min(f2);
            if f_min <= 1e-6 * scale {
                push_parameter(t_min, &mut parameters);
            }
        }
    }
    Ok(ConjugateReport { parameters, trace_params, trace_norms, method: ConjugateMethod::Numerical })
}

/// |g_T((exp_*)V, T)|: the inner product, in the metric induced at the radial
/// velocity T, between the pushed-forward sphere-tangent variation V and T.
/// V is first projected onto the tangent space of the radial sphere at tau*y.
pub fn gauss_orthogonality(
    space: &SpaceDefinition,
    y: &Tangent,
    variation: &DVector<f64>,
    tau: f64,
    config: &IntegrationConfig,
) -> Result<f64> {
    check_base(space, y.base().coords())?;
    if variation.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: variation.len() });
    }
    if tau <= 0.0 {
        return Err(Error::InvalidInput {
            context: "orthogonality residual",
            message: format!("non-positive radius {tau}"),
        });
    }
    let nav = space.nav();
    let value = kropina_value(nav, y)?;
    let f = value.value().ok_or(Error::InadmissibleTangent {
        what: "orthogonality base direction",
        beta: value.beta(),
    })?;
    let p = y.base();
    let g_y = fundamental_tensor(nav, y)?;
    let gy = &g_y * y.components();
    // Tangency to the radial sphere: remove the radial component of V.
    let coeff = gy.dot(variation) / (f * f);
    let v_proj = variation - y.components() * coeff;

    let eps = 1e-5 * y.components().norm() / v_proj.norm().max(1e-12);
    let y_plus = Tangent::new(p.clone(), y.components() * tau + &v_proj * eps)?;
    let y_minus = Tangent::new(p.clone(), y.components() * tau - &v_proj * eps)?;
    let e_plus = kropina_exponential(space, &y_plus, 1.0, config)?;
    let e_minus = kropina_exponential(space, &y_minus, 1.0, config)?;
    let pushed = (e_plus.coords() - e_minus.coords()) / (2.0 * eps);

    let radial = kropina_geodesic(space, y, tau * f, config)?;
    let end = ChartPoint::new(radial.end_point().clone())?;
    let t_vec = Tangent::new(end, radial.end_velocity().clone())?;
    let g_t = fundamental_tensor(nav, &t_vec)?;
    Ok(((&g_t * t_vec.components()).dot(&pushed)).abs())
}

/// Two-point solve on an unconstrained chart: the vector z at p whose time-1
/// geodesic lands on q. Newton iteration on the endpoint map with a
/// finite-difference Jacobian and step backtracking. The result is only
/// meaningful where the connecting geodesic is unique (short arcs); failures
/// report the surviving residual.
pub fn shoot_h_geodesic(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    config: &IntegrationConfig,
) -> Result<Tangent> {
    shoot_h_geodesic_from(space, p, q, None, config)
}

/// `shoot_h_geodesic` with an explicit initial guess, letting sweeps of
/// nearby targets reuse the previous solution.
pub fn shoot_h_geodesic_from(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    init: Option<&DVector<f64>>,
    config: &IntegrationConfig,
) -> Result<Tangent> {
    check_base(space, p.coords())?;
    check_base(space, q.coords())?;
    if !space.normal_frame(p.coords()).is_empty() {
        return Err(Error::InvalidInput {
            context: "two-point solve",
            message: "shooting requires an unconstrained chart".into(),
        });
    }
    let m = space.dim();
    let steps = config.effective_steps();
    let endpoint = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let (points, _) = integrate_h_raw(space, p.coords(), z, 1.0, steps)?;
        Ok(points.last().expect("non-empty path").clone())
    };
    let mut z = match init {
        Some(z0) if z0.len() == m => z0.clone(),
        _ => q.coords() - p.coords(),
    };
    let mut residual = endpoint(&z)? - q.coords();
    let tol = 1e-10 * (1.0 + q.coords().norm());
    for _ in 0..25 {
        if residual.norm() <= tol {
            return Tangent::new(p.clone(), z);
        }
        let delta = 1e-6 * (1.0 + z.norm());
        let mut jac = DMatrix::zeros(m, m);
        let base_end = &residual + q.coords();
        for i in 0..m {
            let mut zp = z.clone();
            zp[i] += delta;
            let col = (endpoint(&zp)? - &base_end) / delta;
            jac.set_column(i, &col);
        }
        let step = jac
            .lu()
            .solve(&residual)
            .ok_or(Error::ShootingFailed { residual: residual.norm() })?;
        let mut improved = false;
        let mut lambda = 1.0;
        for _ in 0..6 {
            let z_try = &z - &step * lambda;
            let r_try = endpoint(&z_try)? - q.coords();
            if r_try.norm() < residual.norm() {
                z = z_try;
                residual = r_try;
                improved = true;
                break;
            }
            lambda /= 2.0;
        }
        if !improved {
            return Err(Error::ShootingFailed { residual: residual.norm() });
        }
    }
    if residual.norm() <= tol {
        Tangent::new(p.clone(), z)
    } else {
        Err(Error::ShootingFailed { residual: residual.norm() })
    }
}
