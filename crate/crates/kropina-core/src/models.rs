//! Built-in example spaces with closed-form geodesics, distances, and cut
//! loci. These are the reference answers every numerical routine in the crate
//! is tested against.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, MetricField, VectorField};
use crate::space::{ModelKind, SpaceDefinition, Topology};
use crate::zermelo::NavigationData;

const TAU: f64 = 2.0 * PI;
/// Default number of parameter samples per cut-locus branch.
pub const DEFAULT_CUT_SAMPLES: usize = 257;
const TOL_WIND_UNIT: f64 = 1e-12;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Flat chart with a constant unit wind; nothing wraps.
pub fn euclidean_space(n: usize, wind: &[f64]) -> Result<SpaceDefinition> {
    if wind.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: wind.len() });
    }
    let w = DVector::from_column_slice(wind);
    let norm = w.norm();
    if (norm - 1.0).abs() > TOL_WIND_UNIT {
        return Err(Error::NotUnitWind { deviation: (norm - 1.0).abs(), tolerance: TOL_WIND_UNIT });
    }
    let nav = NavigationData::new(MetricField::euclidean(n), VectorField::constant(w.clone()))?;
    let space = SpaceDefinition::new("euclidean", nav, vec![Topology::Unbounded; n])?
        .with_model(ModelKind::Euclidean)
        .with_h_distance(|p: &DVector<f64>, q: &DVector<f64>| (q - p).norm())
        .with_h_directions(flat_quotient_directions(Vec::new()));
    Ok(install_flat_closed_forms(space, w))
}

/// Chart (u, v) with u wrapping at 2 pi and a constant unit wind (A, B).
/// The flow orbits close only when B = 0.
pub fn cylinder_space(a: f64, b: f64) -> Result<SpaceDefinition> {
    let norm = (a * a + b * b).sqrt();
    if (norm - 1.0).abs() > TOL_WIND_UNIT {
        return Err(Error::NotUnitWind { deviation: (norm - 1.0).abs(), tolerance: TOL_WIND_UNIT });
    }
    let w = DVector::from_column_slice(&[a, b]);
    let nav = NavigationData::new(MetricField::euclidean(2), VectorField::constant(w.clone()))?;
    let quasi_regular = if b.abs() <= TOL_WIND_UNIT { Some(TAU) } else { None };
    let space = SpaceDefinition::new("cylinder", nav, vec![Topology::Periodic(TAU), Topology::Unbounded])?
        .with_model(ModelKind::Cylinder)
        .with_quasi_regular(quasi_regular)
        .with_h_distance(|p: &DVector<f64>, q: &DVector<f64>| {
            let mut du = (q[0] - p[0]).rem_euclid(TAU);
            if du > PI {
                du -= TAU;
            }
            (du * du + (q[1] - p[1]).powi(2)).sqrt()
        })
        .with_h_directions(flat_quotient_directions(vec![(0, TAU)]));
    Ok(install_flat_closed_forms(space, w))
}

/// Square torus of side 2 pi with the diagonal unit wind.
pub fn torus_space() -> Result<SpaceDefinition> {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let w = DVector::from_column_slice(&[c, c]);
    let nav = NavigationData::new(MetricField::euclidean(2), VectorField::constant(w.clone()))?;
    let space = SpaceDefinition::new("torus", nav, vec![Topology::Periodic(TAU), Topology::Periodic(TAU)])?
        .with_model(ModelKind::Torus)
        .with_quasi_regular(Some(TAU * std::f64::consts::SQRT_2))
        .with_h_distance(|p: &DVector<f64>, q: &DVector<f64>| {
            let mut s = 0.0;
            for i in 0..2 {
                let mut d = (q[i] - p[i]).rem_euclid(TAU);
                if d > PI {
                    d -= TAU;
                }
                s += d * d;
            }
            s.sqrt()
        })
        .with_h_directions(flat_quotient_directions(vec![(0, TAU), (1, TAU)]));
    Ok(install_flat_closed_forms(space, w))
}

/// Shared closed forms for the flat charts: translation flow (identity
/// pushforward) and straight-line geodesics.
fn install_flat_closed_forms(space: SpaceDefinition, w: DVector<f64>) -> SpaceDefinition {
    let w_flow = w.clone();
    space
        .with_flow(move |x: &DVector<f64>, t: f64| x + &w_flow * t)
        .with_flow_pushforward(|_x: &DVector<f64>, _t: f64, v: &DVector<f64>| v.clone())
        .with_h_geodesic(|x0: &DVector<f64>, v0: &DVector<f64>, t: f64| (x0 + v0 * t, v0.clone()))
}

/// All unit initial directions of minimizing straight segments on a flat
/// quotient, enumerated over deck-transformation lifts (ties kept).
fn flat_quotient_directions(
    periods: Vec<(usize, f64)>,
) -> impl Fn(&DVector<f64>, &DVector<f64>) -> Vec<DVector<f64>> + Send + Sync + 'static {
    move |p: &DVector<f64>, q: &DVector<f64>| {
        let base = q - p;
        let mut offsets = vec![DVector::zeros(base.len())];
        for &(axis, period) in &periods {
            let mut next = Vec::new();
            for off in &offsets {
                for k in -2i64..=2 {
                    let mut o = off.clone();
                    o[axis] += k as f64 * period;
                    next.push(o);
                }
            }
            offsets = next;
        }
        let mut lifts: Vec<(f64, DVector<f64>)> = offsets
            .into_iter()
            .map(|off| {
                let d = &base + &off;
                (d.norm(), d)
            })
            .filter(|(n, _)| *n > 1e-14)
            .collect();
        lifts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(best) = lifts.first().map(|(n, _)| *n) else {
            return Vec::new();
        };
        lifts
            .into_iter()
            .take_while(|(n, _)| *n <= best + 1e-9 * (1.0 + best))
            .map(|(n, d)| d / n)
            .collect()
    }
}

/// Round odd-dimensional sphere in ambient coordinates, with the wind given
/// by simultaneous unit-speed rotation of each coordinate pair. `n` is the
/// sphere dimension, so the chart has n + 1 coordinates.
pub fn sphere_space(n: usize) -> Result<SpaceDefinition> {
    if n % 2 == 0 || n < 3 {
        return Err(Error::InvalidInput {
            context: "sphere dimension",
            message: format!("expected an odd dimension >= 3, got {n}"),
        });
    }
    let m = n + 1;
    let wind = VectorField::new(m, move |x: &DVector<f64>| {
        let mut w = DVector::zeros(x.len());
        for k in 0..x.len() / 2 {
            w[2 * k] = -x[2 * k + 1];
            w[2 * k + 1] = x[2 * k];
        }
        w
    });
    let nav = NavigationData::new(MetricField::euclidean(m), wind)?;
    let space = SpaceDefinition::new("sphere", nav, vec![Topology::Unbounded; m])?
        .with_model(ModelKind::Sphere)
        .with_quasi_regular(Some(TAU))
        .with_flow(move |x: &DVector<f64>, t: f64| rotate_pairs(x, t))
        .with_flow_pushforward(move |_x: &DVector<f64>, t: f64, v: &DVector<f64>| rotate_pairs(v, t))
        .with_h_geodesic(|x0: &DVector<f64>, v0: &DVector<f64>, t: f64| {
            let s = v0.norm();
            if s < 1e-300 {
                return (x0.clone(), v0.clone());
            }
            let u = v0 / s;
            let (st, ct) = (s * t).sin_cos();
            (x0 * ct + &u * st, -x0 * (s * st) + u * (s * ct))
        })
        .with_h_distance(|p: &DVector<f64>, q: &DVector<f64>| p.dot(q).clamp(-1.0, 1.0).acos())
        .with_h_directions(|p: &DVector<f64>, q: &DVector<f64>| {
            let c = p.dot(q).clamp(-1.0, 1.0);
            if 1.0 - c <= 1e-12 {
                return Vec::new();
            }
            if 1.0 + c <= 1e-9 {
                // Antipodal pair: every direction minimizes; report an
                // orthonormal pair as representatives.
                return orthonormal_tangent_pair(p);
            }
            let u = q - p * c;
            let norm = u.norm();
            if norm < 1e-14 {
                return Vec::new();
            }
            vec![u / norm]
        })
        .with_accel(|x: &DVector<f64>, v: &DVector<f64>| x * (-v.norm_squared()))
        .with_projection(|x: &mut DVector<f64>, v: &mut DVector<f64>| {
            let n = x.norm();
            if n > 0.0 {
                *x /= n;
            }
            let r = v.dot(x);
            *v -= &*x * r;
        })
        .with_normals(|x: &DVector<f64>| {
            let n = x.norm();
            if n > 0.0 {
                vec![x / n]
            } else {
                Vec::new()
            }
        });
    Ok(space)
}

/// Rotate each consecutive coordinate pair by angle t.
fn rotate_pairs(x: &DVector<f64>, t: f64) -> DVector<f64> {
    let (s, c) = t.sin_cos();
    let mut out = x.clone();
    for k in 0..x.len() / 2 {
        let (a, b) = (x[2 * k], x[2 * k + 1]);
        out[2 * k] = c * a - s * b;
        out[2 * k + 1] = s * a + c * b;
    }
    out
}

/// Two orthonormal vectors tangent to the unit sphere at p.
fn orthonormal_tangent_pair(p: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = p.len();
    let mut frame = Vec::new();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].abs().total_cmp(&p[j].abs()));
    for &i in &order {
        let mut u = DVector::zeros(m);
        u[i] = 1.0;
        u -= p * p.dot(&u);
        for f in &frame {
            let r = u.dot(f);
            u -= f * r;
        }
        let n = u.norm();
        if n > 1e-8 {
            frame.push(u / n);
        }
        if frame.len() == 2 {
            break;
        }
    }
    frame
}

/// Outcome of the closed-form distance formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosedFormDistance {
    Finite(f64),
    Unreachable,
}

impl ClosedFormDistance {
    pub fn value(&self) -> Option<f64> {
        match self {
            ClosedFormDistance::Finite(v) => Some(*v),
            ClosedFormDistance::Unreachable => None,
        }
    }
}

/// Closed-form forward distance on a model space. Flat charts use the chord
/// formula |pq|^2 / (2 <W, pq>), minimized over lifts when the chart wraps;
/// the sphere solves the fixed-point equation for the flow by bisection.
pub fn closed_form_distance(space: &SpaceDefinition, p: &ChartPoint, q: &ChartPoint) -> Result<ClosedFormDistance> {
    if p.dim() != space.dim() || q.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: p.dim().max(q.dim()) });
    }
    match space.model() {
        ModelKind::Custom => Err(Error::NotModelSpace),
        ModelKind::Euclidean | ModelKind::Cylinder | ModelKind::Torus => {
            if space.same_point(p.coords(), q.coords()) {
                return Ok(ClosedFormDistance::Finite(0.0));
            }
            let w = space.wind().at(p.coords())?;
            let base = q.coords() - p.coords();
            let mut best: Option<f64> = None;
            for off in space.lift_offsets(2) {
                let d = &base + &off;
                let beta = w.dot(&d);
                if beta <= 0.0 {
                    continue;
                }
                let s0 = d.norm_squared() / (2.0 * beta);
                best = Some(best.map_or(s0, |b: f64| b.min(s0)));
            }
            Ok(best.map_or(ClosedFormDistance::Unreachable, ClosedFormDistance::Finite))
        }
        ModelKind::Sphere => {
            if space.same_point(p.coords(), q.coords()) {
                return Ok(ClosedFormDistance::Finite(0.0));
            }
            let delta = |tau: f64| -> f64 {
                let back = rotate_pairs(q.coords(), -tau);
                p.coords().dot(&back).clamp(-1.0, 1.0).acos()
            };
            let mut lo = 0.0;
            let mut g_lo = delta(0.0);
            let step = PI / 512.0;
            let mut hi = None;
            let mut tau = step;
            while tau <= TAU + delta(0.0) + step {
                let g = delta(tau) - tau;
                if g <= 0.0 {
                    hi = Some(tau);
                    break;
                }
                lo = tau;
                g_lo = g;
                tau += step;
            }
            let Some(mut hi) = hi else {
                return Err(Error::Numerical {
                    context: "sphere distance",
                    message: "no bracket for the fixed point of the flow equation".into(),
                });
            };
            let _ = g_lo;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if delta(mid) - mid > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            Ok(ClosedFormDistance::Finite(0.5 * (lo + hi)))
        }
    }
}

/// How a cut-locus curve was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSource {
    Analytic,
    HCutTwisted,
}

/// A sampled cut-locus curve; `parameters[i]` is the generating coordinate of
/// `samples[i]` (the meridian height or the cut-segment coordinate).
#[derive(Clone, Debug)]
pub struct CutLocusCurve {
    pub parameters: Vec<f64>,
    pub samples: Vec<ChartPoint>,
    pub source: CutSource,
}

impl CutLocusCurve {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The set of points where minimizing h-geodesics from p stop minimizing,
/// sampled along its generating coordinate. Flat unbounded charts have none;
/// the sphere's is the antipodal point.
pub fn h_cut_locus_samples(space: &SpaceDefinition, p: &ChartPoint, sampling: usize) -> Result<CutLocusCurve> {
    if p.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: p.dim() });
    }
    if sampling == 0 {
        return Err(Error::InvalidInput { context: "cut locus sampling", message: "need at least one sample".into() });
    }
    let pc = p.coords();
    let (parameters, raw): (Vec<f64>, Vec<DVector<f64>>) = match space.model() {
        ModelKind::Custom => return Err(Error::NotModelSpace),
        ModelKind::Euclidean => (Vec::new(), Vec::new()),
        ModelKind::Sphere => (vec![0.0], vec![-pc]),
        ModelKind::Cylinder => {
            let params = linspace(-4.0 * PI, 4.0 * PI, sampling);
            let pts = params
                .iter()
                .map(|&v| DVector::from_column_slice(&[pc[0] + PI, pc[1] + v]))
                .collect();
            (params, pts)
        }
        ModelKind::Torus => {
            let grid = linspace(-PI, PI, sampling);
            let mut params = Vec::with_capacity(2 * sampling);
            let mut pts = Vec::with_capacity(2 * sampling);
            for &u in &grid {
                params.push(u);
                pts.push(DVector::from_column_slice(&[pc[0] + u, pc[1] + PI]));
            }
            for &v in &grid {
                params.push(v);
                pts.push(DVector::from_column_slice(&[pc[0] + PI, pc[1] + v]));
            }
            (params, pts)
        }
    };
    let samples = raw.into_iter().map(ChartPoint::new).collect::<Result<Vec<_>>>()?;
    Ok(CutLocusCurve { parameters, samples, source: CutSource::Analytic })
}

/// Push each h-cut point q-hat along the wind flow for its h-distance from p.
/// This is the closed-form mechanism behind every model-space cut locus.
pub fn twist_h_cut_locus(
    space: &SpaceDefinition,
    p: &ChartPoint,
    parameters: &[f64],
    h_cut_samples: &[ChartPoint],
) -> Result<CutLocusCurve> {
    if parameters.len() != h_cut_samples.len() {
        return Err(Error::InvalidInput {
            context: "cut locus twist",
            message: format!("{} parameters for {} samples", parameters.len(), h_cut_samples.len()),
        });
    }
    let mut samples = Vec::with_capacity(h_cut_samples.len());
    for q_hat in h_cut_samples {
        let l = space
            .h_distance_closed_form(p.coords(), q_hat.coords())
            .ok_or(Error::InvalidInput {
                context: "cut locus twist",
                message: "space has no closed-form h-distance".into(),
            })?;
        let mut twisted = space.flow(q_hat.coords(), l)?;
        if space.is_periodic() {
            twisted = space.canonicalize(&twisted);
        }
        samples.push(ChartPoint::new(twisted)?);
    }
    Ok(CutLocusCurve { parameters: parameters.to_vec(), samples, source: CutSource::HCutTwisted })
}

/// Analytic cut locus of p. Euclidean charts have none; the sphere's is p
/// itself; the flat quotients twist their h-cut sets along the wind:
/// cylinder (pi + A l(v), v + B l(v)) with l = sqrt(pi^2 + v^2), and the
/// torus branches (u + l/sqrt2, pi + l/sqrt2), (pi + l/sqrt2, v + l/sqrt2)
/// with l = sqrt(u^2 + pi^2) over u, v in [-pi, pi].
pub fn cut_locus(space: &SpaceDefinition, p: &ChartPoint, sampling: usize) -> Result<CutLocusCurve> {
    if p.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: p.dim() });
    }
    if sampling == 0 {
        return Err(Error::InvalidInput { context: "cut locus sampling", message: "need at least one sample".into() });
    }
    let pc = p.coords();
    let wrap = |x: DVector<f64>| if space.is_periodic() { space.canonicalize(&x) } else { x };
    let (parameters, raw): (Vec<f64>, Vec<DVector<f64>>) = match space.model() {
        ModelKind::Custom => return Err(Error::NotModelSpace),
        ModelKind::Euclidean => (Vec::new(), Vec::new()),
        ModelKind::Sphere => (vec![0.0], vec![pc.clone()]),
        ModelKind::Cylinder => {
            let w = space.wind().at(pc)?;
            let params = linspace(-4.0 * PI, 4.0 * PI, sampling);
            let pts = params
                .iter()
                .map(|&v| {
                    let l = (PI * PI + v * v).sqrt();
                    wrap(DVector::from_column_slice(&[pc[0] + PI + w[0] * l, pc[1] + v + w[1] * l]))
                })
                .collect();
            (params, pts)
        }
        ModelKind::Torus => {
            let c = std::f64::consts::FRAC_1_SQRT_2;
            let grid = linspace(-PI, PI, sampling);
            let mut params = Vec::with_capacity(2 * sampling);
            let mut pts = Vec::with_capacity(2 * sampling);
            for &u in &grid {
                let off = c * (u * u + PI * PI).sqrt();
                params.push(u);
                pts.push(wrap(DVector::from_column_slice(&[pc[0] + u + off, pc[1] + PI + off])));
            }
            for &v in &grid {
                let off = c * (PI * PI + v * v).sqrt();
                params.push(v);
                pts.push(wrap(DVector::from_column_slice(&[pc[0] + PI + off, pc[1] + v + off])));
            }
            (params, pts)
        }
    };
    let samples = raw.into_iter().map(ChartPoint::new).collect::<Result<Vec<_>>>()?;
    Ok(CutLocusCurve { parameters, samples, source: CutSource::Analytic })
}

/// Build a space from its textual address: `euclidean:n:c1,..,cn`,
/// `sphere:n`, `cylinder:A,B`, `torus`, or a path to a JSON space document.
pub fn parse_space_spec(text: &str) -> Result<SpaceDefinition> {
    let text = text.trim();
    let bad = |message: String| Error::InvalidInput { context: "space spec", message };
    let floats = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{t}`"))))
            .collect()
    };
    if text == "torus" {
        return torus_space();
    }
    if let Some(rest) = text.strip_prefix("euclidean:") {
        let (dim_text, wind_text) = rest
            .split_once(':')
            .ok_or_else(|| bad("expected euclidean:n:c1,..,cn".into()))?;
        let n: usize = dim_text.trim().parse().map_err(|_| bad(format!("bad dimension `{dim_text}`")))?;
        return euclidean_space(n, &floats(wind_text)?);
    }
    if let Some(rest) = text.strip_prefix("sphere:") {
        let n: usize = rest.trim().parse().map_err(|_| bad(format!("bad dimension `{rest}`")))?;
        return sphere_space(n);
    }
    if let Some(rest) = text.strip_prefix("cylinder:") {
        let ab = floats(rest)?;
        if ab.len() != 2 {
            return Err(bad("expected cylinder:A,B".into()));
        }
        return cylinder_space(ab[0], ab[1]);
    }
    if std::path::Path::new(text).exists() || text.ends_with(".json") {
        return crate::dsl::document::load_space(std::path::Path::new(text));
    }
    Err(bad(format!("unrecognized space `{text}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::from_slice(c).unwrap()
    }

    #[test]
    fn euclidean_requires_unit_wind() {
        assert!(euclidean_space(2, &[1.0, 0.0]).is_ok());
        assert!(euclidean_space(3, &[0.0, 0.0, 1.0]).is_ok());
        assert!(matches!(euclidean_space(2, &[1.0, 1.0]), Err(Error::NotUnitWind { .. })));
    }

    #[test]
    fn cylinder_quasi_regular_iff_horizontal_wind() {
        assert_eq!(cylinder_space(1.0, 0.0).unwrap().quasi_regular_period(), Some(TAU));
        assert_eq!(cylinder_space(0.0, 1.0).unwrap().quasi_regular_period(), None);
        assert_eq!(cylinder_space(0.6, 0.8).unwrap().quasi_regular_period(), None);
        assert!(cylinder_space(1.0, 1.0).is_err());
    }

    #[test]
    fn sphere_dimension_parity() {
        assert!(sphere_space(3).is_ok());
        assert!(sphere_space(4).is_err());
        assert!(sphere_space(1).is_err());
    }

    #[test]
    fn sphere_flow_and_geodesic() {
        let s = sphere_space(3).unwrap();
        let z = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
        let out = s.flow(&z, 0.7).unwrap();
        assert_abs_diff_eq!(out[0], 0.7f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.7f64.sin(), epsilon = 1e-15);
        let v = DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.0]);
        let (pos, vel) = s.h_geodesic_closed_form(&z, &v, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!((&pos - DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.0])).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((vel - DVector::from_column_slice(&[-1.0, 0.0, 0.0, 0.0])).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.h_distance_closed_form(&z, &pos).unwrap(), std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn torus_flow_reaches_diagonal() {
        let t = torus_space().unwrap();
        let out = t.flow(&DVector::zeros(2), std::f64::consts::SQRT_2 * PI).unwrap();
        assert_abs_diff_eq!(out[0], PI, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], PI, epsilon = 1e-12);
        assert_eq!(t.quasi_regular_period(), Some(TAU * std::f64::consts::SQRT_2));
    }

    #[test]
    fn chord_distance_examples() {
        let cyl = cylinder_space(0.0, 1.0).unwrap().universal_cover();
        let d = closed_form_distance(&cyl, &pt(&[0.0, 0.0]), &pt(&[0.0, 2.0])).unwrap();
        assert_abs_diff_eq!(d.value().unwrap(), 1.0, epsilon = 1e-12);

        let torus = torus_space().unwrap();
        let cover = torus.universal_cover();
        let d = closed_form_distance(&cover, &pt(&[0.0, 0.0]), &pt(&[PI, PI])).unwrap();
        assert_abs_diff_eq!(d.value().unwrap(), PI / std::f64::consts::SQRT_2, epsilon = 1e-12);
        // Quotient agrees here: competing lifts are inadmissible or longer.
        let d = closed_form_distance(&torus, &pt(&[0.0, 0.0]), &pt(&[PI, PI])).unwrap();
        assert_abs_diff_eq!(d.value().unwrap(), PI / std::f64::consts::SQRT_2, epsilon = 1e-12);

        let euc = euclidean_space(2, &[1.0, 0.0]).unwrap();
        assert_eq!(
            closed_form_distance(&euc, &pt(&[0.0, 0.0]), &pt(&[0.0, 1.0])).unwrap(),
            ClosedFormDistance::Unreachable
        );
        let d = closed_form_distance(&euc, &pt(&[0.0, 0.0]), &pt(&[3.0, 0.0])).unwrap();
        assert_abs_diff_eq!(d.value().unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn sphere_distance_fixed_point() {
        let s = sphere_space(3).unwrap();
        let p = pt(&[1.0, 0.0, 0.0, 0.0]);
        let q = pt(&[-1.0, 0.0, 0.0, 0.0]);
        let d = closed_form_distance(&s, &p, &q).unwrap().value().unwrap();
        assert_abs_diff_eq!(d, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
        // The fixed point is self-consistent: d_h(p, flow(q, -d)) = d.
        let back = s.flow(q.coords(), -d).unwrap();
        assert_abs_diff_eq!(s.h_distance_closed_form(p.coords(), &back).unwrap(), d, epsilon = 1e-9);
        assert_eq!(closed_form_distance(&s, &p, &p).unwrap(), ClosedFormDistance::Finite(0.0));
    }

    #[test]
    fn cylinder_cut_locus_hyperbola() {
        let cover = cylinder_space(1.0, 0.0).unwrap().universal_cover();
        let curve = cut_locus(&cover, &pt(&[0.0, 0.0]), 5).unwrap();
        assert_eq!(curve.len(), 5);
        let mid = &curve.samples[2];
        assert_abs_diff_eq!(curve.parameters[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.coords()[0], TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.coords()[1], 0.0, epsilon = 1e-12);
        for (v, s) in curve.parameters.iter().zip(&curve.samples) {
            assert_abs_diff_eq!(s.coords()[0], PI + (PI * PI + v * v).sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(s.coords()[1], *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn meridian_wind_cut_locus_is_upper_half_meridian() {
        let cover = cylinder_space(0.0, 1.0).unwrap().universal_cover();
        let curve = cut_locus(&cover, &pt(&[0.0, 0.0]), 33).unwrap();
        for s in &curve.samples {
            assert_abs_diff_eq!(s.coords()[0], PI, epsilon = 1e-12);
            assert!(s.coords()[1] > 0.0);
        }
    }

    #[test]
    fn twist_reproduces_analytic_cut_loci() {
        for space in [
            cylinder_space(1.0, 0.0).unwrap().universal_cover(),
            cylinder_space(0.6, 0.8).unwrap().universal_cover(),
            torus_space().unwrap().universal_cover(),
            sphere_space(3).unwrap(),
        ] {
            let p = if space.model() == ModelKind::Sphere {
                pt(&[0.0, 1.0, 0.0, 0.0])
            } else {
                pt(&[0.3, -0.2])
            };
            let analytic = cut_locus(&space, &p, 21).unwrap();
            let h_cut = h_cut_locus_samples(&space, &p, 21).unwrap();
            let twisted = twist_h_cut_locus(&space, &p, &h_cut.parameters, &h_cut.samples).unwrap();
            assert_eq!(twisted.source, CutSource::HCutTwisted);
            assert_eq!(analytic.len(), twisted.len());
            for (a, b) in analytic.samples.iter().zip(&twisted.samples) {
                assert!((a.coords() - b.coords()).amax() <= 1e-10);
            }
        }
    }

    #[test]
    fn torus_cut_branch_endpoints_wrap_to_base_point() {
        let torus = torus_space().unwrap();
        let curve = cut_locus(&torus, &pt(&[0.0, 0.0]), 3).unwrap();
        // Branch parameter +-pi twists the corner back to the base point.
        let corner = &curve.samples[0];
        assert!(torus.same_point(corner.coords(), &DVector::zeros(2)));
    }

    #[test]
    fn sphere_cut_locus_is_base_point() {
        let s = sphere_space(3).unwrap();
        let p = pt(&[0.6, 0.0, 0.8, 0.0]);
        let curve = cut_locus(&s, &p, 7).unwrap();
        assert_eq!(curve.len(), 1);
        assert!((curve.samples[0].coords() - p.coords()).amax() <= 1e-12);
        assert!(cut_locus(&euclidean_space(2, &[1.0, 0.0]).unwrap(), &pt(&[0.0, 0.0]), 7).unwrap().is_empty());
    }

    #[test]
    fn space_spec_grammar() {
        assert_eq!(parse_space_spec("torus").unwrap().model(), ModelKind::Torus);
        assert_eq!(parse_space_spec("euclidean:2:1,0").unwrap().model(), ModelKind::Euclidean);
        assert_eq!(parse_space_spec("sphere:3").unwrap().model(), ModelKind::Sphere);
        assert_eq!(parse_space_spec("cylinder:0.6,0.8").unwrap().model(), ModelKind::Cylinder);
        assert!(parse_space_spec("klein").is_err());
        assert!(parse_space_spec("euclidean:2:1,1").is_err());
    }
}
