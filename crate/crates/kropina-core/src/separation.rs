//! Forward separation between points: the one-sided distance induced by the
//! conic metric. It is found as the smallest fixed point of
//! tau |-> d_h(p, flow_{-tau}(q)), located by a monotone scan with a
//! Lipschitz skip and bisection. Reachability verdicts, initial-direction
//! certificates, and forward-ball membership live here too.

use nalgebra::DVector;

use crate::engine::{shoot_h_geodesic_from, IntegrationConfig};
use crate::error::{Error, Result};
use crate::geometry::{inner_raw, norm_raw, ChartPoint, Tangent};
use crate::space::{ModelKind, SpaceDefinition};

/// Outcome class of a separation query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparationStatus {
    SamePoint,
    Finite,
    /// `capped` distinguishes "scan budget exhausted" from "proved
    /// unreachable".
    Unreachable { capped: bool },
}

/// Full account of a separation query.
#[derive(Clone, Debug)]
pub struct SeparationResult {
    pub status: SeparationStatus,
    /// The separation value for SamePoint (0) and Finite outcomes.
    pub value: Option<f64>,
    /// The fixed-point parameter; equals `value` when finite.
    pub tau_star: Option<f64>,
    /// Unit initial vector of a minimizing geodesic from p.
    pub initial_direction: Option<Tangent>,
    /// Number of pullback-distance evaluations spent.
    pub evaluations: usize,
    /// Successive bisection brackets around the fixed point.
    pub bracket_history: Vec<(f64, f64)>,
}

impl SeparationResult {
    pub fn is_finite(&self) -> bool {
        matches!(self.status, SeparationStatus::SamePoint | SeparationStatus::Finite)
    }
}

/// Scan controls. The cap bounds the scan horizon on spaces without a
/// periodic flow: tau_max = cap * (1 + delta(0)).
#[derive(Clone, Copy, Debug)]
pub struct SeparationConfig {
    pub cap: f64,
    /// Bisection width at which the fixed point is accepted.
    pub tol: f64,
    /// Smallest scan stride.
    pub min_step: f64,
    /// RK4 steps for shooting-based distance fallbacks.
    pub shooting_steps: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig { cap: 64.0, tol: 1e-8, min_step: 0.01, shooting_steps: 128 }
    }
}

/// d_h(p, flow_{-tau}(q)): distance to q pulled back along the wind. Uses the
/// space's closed-form distance when present, otherwise a two-point shooting
/// solve (valid for short arcs on unconstrained charts; the warm start keeps
/// consecutive solves cheap).
fn pullback_distance(
    space: &SpaceDefinition,
    p: &DVector<f64>,
    q: &DVector<f64>,
    tau: f64,
    config: &SeparationConfig,
    warm: &mut Option<DVector<f64>>,
) -> Result<f64> {
    let q_hat = space.flow(q, -tau)?;
    if let Some(d) = space.h_distance_closed_form(p, &q_hat) {
        return Ok(d);
    }
    let shoot_cfg = IntegrationConfig::with_steps(config.shooting_steps);
    let target = ChartPoint::new(space.canonicalize(&q_hat))?;
    let start = ChartPoint::new(p.clone())?;
    let z = shoot_h_geodesic_from(space, &start, &target, warm.as_ref(), &shoot_cfg)?;
    *warm = Some(z.components().clone());
    let h = space.metric().at(p)?;
    Ok(norm_raw(&h, z.components()))
}

/// Public probe of the pullback distance, mainly for validation.
pub fn flow_pullback_distance(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    tau: f64,
    config: &SeparationConfig,
) -> Result<f64> {
    let mut warm = None;
    pullback_distance(space, p.coords(), q.coords(), tau, config, &mut warm)
}

/// True when the chart is flat with a constant wind and every wrapped axis
/// carries no wind component, so that the drift term of the chord formula is
/// the same for all lifts.
fn flat_with_rigid_beta(space: &SpaceDefinition) -> bool {
    match space.model() {
        ModelKind::Euclidean | ModelKind::Cylinder | ModelKind::Torus => {}
        _ => return false,
    }
    let w = match space.wind().at(&DVector::zeros(space.dim())) {
        Ok(w) => w,
        Err(_) => return false,
    };
    (0..space.dim()).all(|i| !space.axis_is_periodic(i) || w[i].abs() <= 1e-12)
}

/// Smallest-fixed-point separation from p to q.
///
/// The scan walks g(tau) = d_h(p, flow_{-tau}(q)) - tau, which never
/// increases because the pullback moves q at unit speed. A positive g
/// therefore rules out a zero before tau + g/2, which the scan uses to skip
/// ahead; the first sign change is bisected down to `config.tol`.
pub fn separation(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    config: &SeparationConfig,
) -> Result<SeparationResult> {
    if p.dim() != space.dim() || q.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: p.dim().max(q.dim()) });
    }
    if space.same_point(p.coords(), q.coords()) {
        return Ok(SeparationResult {
            status: SeparationStatus::SamePoint,
            value: Some(0.0),
            tau_star: Some(0.0),
            initial_direction: None,
            evaluations: 0,
            bracket_history: Vec::new(),
        });
    }

    let mut warm: Option<DVector<f64>> = None;
    let mut evaluations = 0usize;
    let eval = |tau: f64, warm: &mut Option<DVector<f64>>, evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        Ok(pullback_distance(space, p.coords(), q.coords(), tau, config, warm)? - tau)
    };

    // On flat charts where no lift can change the drift term, the chord
    // formula |d|^2 / (2 h(d, W)) decides the query outright: the sign of the
    // drift settles reachability and the minimal lift gives the exact value.
    if flat_with_rigid_beta(space) {
        let h = space.metric().at(p.coords())?;
        let w = space.wind().at(p.coords())?;
        let chord = space.canonical_displacement(p.coords(), q.coords());
        let drift = inner_raw(&h, &chord, &w);
        if drift <= 0.0 {
            return Ok(SeparationResult {
                status: SeparationStatus::Unreachable { capped: false },
                value: None,
                tau_star: None,
                initial_direction: None,
                evaluations,
                bracket_history: Vec::new(),
            });
        }
        let tau_star = inner_raw(&h, &chord, &chord) / (2.0 * drift);
        let direction = Tangent::new(p.clone(), &chord / tau_star)?;
        return Ok(SeparationResult {
            status: SeparationStatus::Finite,
            value: Some(tau_star),
            tau_star: Some(tau_star),
            initial_direction: Some(direction),
            evaluations,
            bracket_history: Vec::new(),
        });
    }

    let delta0 = eval(0.0, &mut warm, &mut evaluations)?;

    let tau_max = match space.quasi_regular_period() {
        Some(period) => delta0 + period + 2.0 * config.min_step,
        None => config.cap * (1.0 + delta0),
    };
    let stride_floor = config.min_step.max(delta0 / 64.0).min(tau_max / 8.0).max(config.tol);

    let mut bracket_history = Vec::new();
    let mut tau_lo = 0.0;
    let mut g_lo = delta0;
    let (mut tau_hi, mut g_hi);
    loop {
        let stride = stride_floor.max(g_lo / 2.0);
        let tau_next = tau_lo + stride;
        if tau_next > tau_max {
            return Ok(SeparationResult {
                status: SeparationStatus::Unreachable { capped: true },
                value: None,
                tau_star: None,
                initial_direction: None,
                evaluations,
                bracket_history,
            });
        }
        let g_next = eval(tau_next, &mut warm, &mut evaluations)?;
        if g_next <= 0.0 {
            tau_hi = tau_next;
            g_hi = g_next;
            break;
        }
        tau_lo = tau_next;
        g_lo = g_next;
    }

    bracket_history.push((tau_lo, tau_hi));
    while tau_hi - tau_lo > config.tol && g_hi != 0.0 && g_lo != 0.0 {
        let mid = 0.5 * (tau_lo + tau_hi);
        let g_mid = eval(mid, &mut warm, &mut evaluations)?;
        if g_mid > 0.0 {
            tau_lo = mid;
            g_lo = g_mid;
        } else {
            tau_hi = mid;
            g_hi = g_mid;
        }
        bracket_history.push((tau_lo, tau_hi));
    }
    let tau_star = if g_hi == 0.0 {
        tau_hi
    } else if g_lo == 0.0 {
        tau_lo
    } else {
        0.5 * (tau_lo + tau_hi)
    };

    let direction = minimizing_directions(space, p, q, tau_star, config)?
        .into_iter()
        .next();
    Ok(SeparationResult {
        status: SeparationStatus::Finite,
        value: Some(tau_star),
        tau_star: Some(tau_star),
        initial_direction: direction,
        evaluations,
        bracket_history,
    })
}

/// All unit initial vectors of minimizing geodesics from p to q, given the
/// separation tau. Ties (several minimizing lifts or great-circle
/// representatives) each yield one vector.
pub fn minimizing_directions(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    tau: f64,
    config: &SeparationConfig,
) -> Result<Vec<Tangent>> {
    if tau <= 0.0 {
        return Ok(Vec::new());
    }
    let q_hat = space.flow(q.coords(), -tau)?;
    let w = space.wind().at(p.coords())?;
    let units: Vec<DVector<f64>> = if let Some(us) = space.h_directions_closed_form(p.coords(), &q_hat) {
        us
    } else {
        let shoot_cfg = IntegrationConfig::with_steps(config.shooting_steps);
        let target = ChartPoint::new(space.canonicalize(&q_hat))?;
        let z = shoot_h_geodesic_from(space, p, &target, None, &shoot_cfg)?;
        let h = space.metric().at(p.coords())?;
        let n = norm_raw(&h, z.components());
        if n <= 1e-14 {
            Vec::new()
        } else {
            vec![z.components() / n]
        }
    };
    units
        .into_iter()
        .map(|u| Tangent::new(p.clone(), &u + &w))
        .collect()
}

/// Membership classification with respect to the two one-sided domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainVerdict {
    Forward,
    Backward,
    Both,
    Neither,
}

/// Whether q can be reached from p, p from q, both, or neither. Flat charts
/// with a rigid drift term use the chord sign test; everything else runs the
/// two separations.
pub fn forward_domain_membership(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    config: &SeparationConfig,
) -> Result<DomainVerdict> {
    if space.same_point(p.coords(), q.coords()) {
        return Ok(DomainVerdict::Both);
    }
    let (forward, backward) = if flat_with_rigid_beta(space) {
        let w = space.wind().at(p.coords())?;
        let chord = space.canonical_displacement(p.coords(), q.coords());
        let s = w.dot(&chord);
        (s > 0.0, s < 0.0)
    } else {
        (
            separation(space, p, q, config)?.is_finite(),
            separation(space, q, p, config)?.is_finite(),
        )
    };
    Ok(match (forward, backward) {
        (true, true) => DomainVerdict::Both,
        (true, false) => DomainVerdict::Forward,
        (false, true) => DomainVerdict::Backward,
        (false, false) => DomainVerdict::Neither,
    })
}

/// Strict membership of q in the forward ball of radius r around p.
pub fn ball_membership(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    radius: f64,
    config: &SeparationConfig,
) -> Result<bool> {
    let sep = separation(space, p, q, config)?;
    Ok(match sep.value {
        Some(v) => v < radius,
        None => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::kropina_geodesic;
    use crate::models::{closed_form_distance, cylinder_space, euclidean_space, sphere_space, torus_space};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cfg() -> SeparationConfig {
        SeparationConfig::default()
    }

    fn pt(coords: &[f64]) -> ChartPoint {
        ChartPoint::from_slice(coords).unwrap()
    }

    #[test]
    fn flat_chord_value_and_verdicts() {
        let space = euclidean_space(2, &[1.0, 0.0]).unwrap();
        let p = pt(&[0.0, 0.0]);
        let ahead = pt(&[3.0, 0.0]);
        let res = separation(&space, &p, &ahead, &cfg()).unwrap();
        assert_eq!(res.status, SeparationStatus::Finite);
        assert_abs_diff_eq!(res.value.unwrap(), 1.5, epsilon = 1e-12);
        // Rigid-drift charts answer in closed form, without scan evaluations.
        assert_eq!(res.evaluations, 0);
        let dir = res.initial_direction.as_ref().unwrap();
        assert_abs_diff_eq!(dir.components()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dir.components()[1], 0.0, epsilon = 1e-12);

        // A far target with a slim drift component stays finite and exact.
        let slim = pt(&[1e-4, 3.0]);
        let res = separation(&space, &p, &slim, &cfg()).unwrap();
        assert_eq!(res.status, SeparationStatus::Finite);
        let d2 = 1e-8 + 9.0;
        assert_abs_diff_eq!(res.value.unwrap(), d2 / 2e-4, epsilon = 1e-6);

        let side = pt(&[0.0, 1.0]);
        let res = separation(&space, &p, &side, &cfg()).unwrap();
        assert_eq!(res.status, SeparationStatus::Unreachable { capped: false });
        let behind = pt(&[-1.0, 0.0]);
        assert_eq!(
            forward_domain_membership(&space, &p, &behind, &cfg()).unwrap(),
            DomainVerdict::Backward
        );
        assert_eq!(
            forward_domain_membership(&space, &p, &ahead, &cfg()).unwrap(),
            DomainVerdict::Forward
        );
        assert_eq!(
            forward_domain_membership(&space, &p, &side, &cfg()).unwrap(),
            DomainVerdict::Neither
        );
        assert_eq!(forward_domain_membership(&space, &p, &p, &cfg()).unwrap(), DomainVerdict::Both);
    }

    #[test]
    fn same_point_is_zero() {
        let space = torus_space().unwrap();
        let p = pt(&[0.3, 0.4]);
        let q = pt(&[0.3 + 2.0 * PI, 0.4 - 2.0 * PI]);
        let res = separation(&space, &p, &q, &cfg()).unwrap();
        assert_eq!(res.status, SeparationStatus::SamePoint);
        assert_eq!(res.value, Some(0.0));
    }

    #[test]
    fn scan_matches_chord_minimum_on_wrapped_chart() {
        let space = cylinder_space(1.0, 0.0).unwrap();
        let p = pt(&[0.0, 0.0]);
        let q = pt(&[0.0, 2.0]);
        let res = separation(&space, &p, &q, &cfg()).unwrap();
        let expected = closed_form_distance(&space, &p, &q).unwrap().value().unwrap();
        assert_abs_diff_eq!(res.value.unwrap(), expected, epsilon = 1e-6);
        assert_abs_diff_eq!(expected, PI + 1.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn torus_diagonal_value() {
        let space = torus_space().unwrap();
        let res = separation(&space, &pt(&[0.0, 0.0]), &pt(&[PI, PI]), &cfg()).unwrap();
        assert_abs_diff_eq!(res.value.unwrap(), PI / std::f64::consts::SQRT_2, epsilon = 1e-8);
    }

    #[test]
    fn sphere_antipodal_value_and_certificate() {
        let space = sphere_space(3).unwrap();
        let p = pt(&[1.0, 0.0, 0.0, 0.0]);
        let q = pt(&[-1.0, 0.0, 0.0, 0.0]);
        let res = separation(&space, &p, &q, &cfg()).unwrap();
        assert_abs_diff_eq!(res.value.unwrap(), PI / 2.0, epsilon = 1e-8);

        // The pulled-back target sits a quarter turn from p, so the
        // minimizing geodesic is unique.
        let tau = res.tau_star.unwrap();
        let dirs = minimizing_directions(&space, &p, &q, tau, &cfg()).unwrap();
        assert_eq!(dirs.len(), 1);
        for y0 in &dirs {
            let path = kropina_geodesic(&space, y0, tau, &IntegrationConfig::with_steps(256)).unwrap();
            let gap = (path.end_point() - q.coords()).norm();
            assert!(gap <= 1e-6, "certificate endpoint gap {gap}");
        }
    }

    #[test]
    fn certificate_reaches_target_on_flat_quotients() {
        let cases = [
            (cylinder_space(1.0, 0.0).unwrap(), [0.0, 0.0], [2.5, 1.0]),
            (torus_space().unwrap(), [0.2, -0.4], [2.0, 1.0]),
        ];
        for (space, p, q) in cases {
            let p = pt(&p);
            let q = pt(&q);
            let res = separation(&space, &p, &q, &cfg()).unwrap();
            let tau = res.tau_star.unwrap();
            let y0 = res.initial_direction.clone().unwrap();
            let path = kropina_geodesic(&space, &y0, tau, &IntegrationConfig::with_steps(512)).unwrap();
            let end = ChartPoint::new(path.end_point().clone()).unwrap();
            assert!(
                space.canonical_displacement(end.coords(), q.coords()).norm() <= 1e-5,
                "certificate missed target on {}",
                space.name()
            );
        }
    }

    #[test]
    fn lower_bound_against_metric_distance() {
        let space = torus_space().unwrap();
        let p = pt(&[0.1, 0.2]);
        let q = pt(&[2.0, -1.3]);
        let res = separation(&space, &p, &q, &cfg()).unwrap();
        let dh = space.h_distance_closed_form(p.coords(), q.coords()).unwrap();
        assert!(res.value.unwrap() + 1e-9 >= dh / 2.0);
    }

    #[test]
    fn triangle_inequality_on_periodic_flow() {
        let space = torus_space().unwrap();
        let pts = [
            pt(&[0.0, 0.0]),
            pt(&[1.0, 2.0]),
            pt(&[-2.0, 0.7]),
            pt(&[3.0, -3.0]),
        ];
        for a in &pts {
            for b in &pts {
                for c in &pts {
                    let ab = separation(&space, a, b, &cfg()).unwrap().value.unwrap();
                    let bc = separation(&space, b, c, &cfg()).unwrap().value.unwrap();
                    let ac = separation(&space, a, c, &cfg()).unwrap().value.unwrap();
                    assert!(ac <= ab + bc + 1e-6, "triangle violated: {ac} > {ab} + {bc}");
                }
            }
        }
    }

    #[test]
    fn ball_membership_is_strict() {
        let space = euclidean_space(2, &[1.0, 0.0]).unwrap();
        let p = pt(&[0.0, 0.0]);
        let q = pt(&[3.0, 0.0]);
        assert!(ball_membership(&space, &p, &q, 1.6, &cfg()).unwrap());
        assert!(!ball_membership(&space, &p, &q, 1.5, &cfg()).unwrap());
        assert!(!ball_membership(&space, &p, &pt(&[0.0, 1.0]), 10.0, &cfg()).unwrap());
    }
}
