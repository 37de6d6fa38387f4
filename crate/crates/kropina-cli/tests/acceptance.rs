//! Acceptance gate for the whole engine. Each test pins one shipped
//! guarantee end to end and prints a single verdict line (visible with
//! `--nocapture`); the harness line doubles as the pass/fail record.

use std::process::Command;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kropina_core::engine::{
    integrate_h_geodesic, jacobi_conjugate_search, kropina_exponential, kropina_geodesic,
    IntegrationConfig,
};
use kropina_core::geometry::{norm_raw, ChartPoint, MetricField, ScalarField, Tangent, VectorField};
use kropina_core::models::{
    cut_locus, cylinder_space, euclidean_space, h_cut_locus_samples, sphere_space, torus_space,
    twist_h_cut_locus,
};
use kropina_core::oracle::{polyline_oracle, OracleConfig};
use kropina_core::projective::{navigation_parallel_residual, projective_equivalence_verdict};
use kropina_core::separation::{
    ball_membership, flow_pullback_distance, forward_domain_membership, minimizing_directions,
    separation, DomainVerdict, SeparationConfig, SeparationStatus,
};
use kropina_core::space::{ModelKind, SpaceDefinition};
use kropina_core::zermelo::{kropina_value_raw, to_alpha_beta, to_navigation, AlphaBetaData};

const PI: f64 = std::f64::consts::PI;

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("[accept] {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

/// The four reference charts used by the per-space criteria.
fn model_spaces() -> Vec<SpaceDefinition> {
    vec![
        euclidean_space(2, &[1.0, 0.0]).unwrap(),
        cylinder_space(0.6, 0.8).unwrap(),
        torus_space().unwrap(),
        sphere_space(3).unwrap(),
    ]
}

fn random_point(space: &SpaceDefinition, rng: &mut ChaCha8Rng) -> ChartPoint {
    let n = space.dim();
    let mut x = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    match space.model() {
        ModelKind::Sphere => {
            let mut v = DVector::zeros(n);
            loop {
                for c in x.iter_mut() {
                    *c = rng.random_range(-1.0..1.0);
                }
                if x.norm() > 0.3 {
                    break;
                }
            }
            space.project_state(&mut x, &mut v);
        }
        _ => {
            for (i, c) in x.iter_mut().enumerate() {
                if space.axis_is_periodic(i) {
                    *c = rng.random_range(0.0..2.0 * PI);
                }
            }
        }
    }
    ChartPoint::new(x).unwrap()
}

/// Random tangent-space unit vector at p (h-unit; tangent to the constraint
/// set where one exists).
fn random_unit(space: &SpaceDefinition, p: &ChartPoint, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let n = space.dim();
    let h = space.metric().at(p.coords()).unwrap();
    loop {
        let mut x = p.coords().clone();
        let mut u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        space.project_state(&mut x, &mut u);
        let norm = norm_raw(&h, &u);
        if norm > 0.2 {
            return u / norm;
        }
    }
}

/// Admissible tangent y = W + r u with a controlled cone margin.
fn random_admissible(
    space: &SpaceDefinition,
    p: &ChartPoint,
    rng: &mut ChaCha8Rng,
    max_r: f64,
) -> Tangent {
    let w = space.wind().at(p.coords()).unwrap();
    let u = random_unit(space, p, rng);
    let r = rng.random_range(0.1..max_r);
    Tangent::new(p.clone(), w + u * r).unwrap()
}

fn h_distance(space: &SpaceDefinition, p: &ChartPoint, q: &ChartPoint) -> f64 {
    match space.h_distance_closed_form(p.coords(), q.coords()) {
        Some(d) => d,
        None => flow_pullback_distance(space, p, q, 0.0, &SeparationConfig::default()).unwrap(),
    }
}

/// Forward-reachable pair of controlled separation: q is a geodesic endpoint.
fn reachable_pair(
    space: &SpaceDefinition,
    rng: &mut ChaCha8Rng,
    length: std::ops::Range<f64>,
) -> (ChartPoint, ChartPoint, f64) {
    let p = random_point(space, rng);
    let y = random_admissible(space, &p, rng, 0.9);
    let len = rng.random_range(length);
    let q = kropina_exponential(space, &y, len, &IntegrationConfig::default()).unwrap();
    let q = ChartPoint::new(space.canonicalize(q.coords())).unwrap();
    (p, q, len)
}

// 1. Document-level conversions between the metric-plus-wind and the
//    scaled-metric-plus-one-form descriptions invert each other.
#[test]
fn a01_conversion_round_trips_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<DVector<f64>> = (0..5)
        .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    let mut max_ab = 0.0f64;
    let mut max_nav = 0.0f64;
    let mut max_unit = 0.0f64;
    for _ in 0..200 {
        // Random SPD matrix via a well-conditioned Cholesky factor.
        let l = DMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                rng.random_range(0.6..1.6)
            } else if i > j {
                rng.random_range(-0.4..0.4)
            } else {
                0.0
            }
        });
        let a0 = &l * l.transpose();
        let b0 = loop {
            let b = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            if b.norm() > 0.2 {
                break b;
            }
        };
        let a_inv = a0.clone().try_inverse().unwrap();
        let bsq: f64 = (&a_inv * &b0).dot(&b0);
        let kappa0 = (4.0 / bsq).ln();
        let ab = AlphaBetaData::new(
            MetricField::constant(a0.clone()),
            VectorField::constant(b0.clone()),
            ScalarField::constant(2, kappa0),
        )
        .unwrap();

        let nav = to_navigation(&ab, &samples).unwrap();
        for x in &samples {
            let h = nav.metric().at(x).unwrap();
            let w = nav.wind().at(x).unwrap();
            max_unit = max_unit.max((norm_raw(&h, &w) - 1.0).abs());
        }

        // Three scale choices; each must reproduce the navigation data.
        for kappa in [
            ScalarField::constant(2, 0.0),
            ScalarField::constant(2, 0.7),
            ScalarField::new(2, |x: &DVector<f64>| 0.3 * x[0].sin()),
        ] {
            let ab2 = to_alpha_beta(&nav, kappa, &samples).unwrap();
            let nav2 = to_navigation(&ab2, &samples).unwrap();
            for x in &samples {
                let dh = (nav.metric().at(x).unwrap() - nav2.metric().at(x).unwrap()).amax();
                let dw = (nav.wind().at(x).unwrap() - nav2.wind().at(x).unwrap()).amax();
                max_nav = max_nav.max(dh).max(dw);
            }
        }

        // The coherent scale reproduces the original pair itself.
        let ab3 = to_alpha_beta(&nav, ScalarField::constant(2, kappa0), &samples).unwrap();
        for x in &samples {
            let da = (ab3.metric().at(x).unwrap() - &a0).amax();
            let db = (ab3.beta().at(x).unwrap() - &b0).amax();
            max_ab = max_ab.max(da).max(db);
        }
    }
    verdict(
        "a01 conversion round trips",
        max_ab <= 1e-10 && max_nav <= 1e-10 && max_unit <= 1e-8,
        &format!("ab {max_ab:.2e}, nav {max_nav:.2e}, unit {max_unit:.2e}"),
    );
}

// 2. The unit level set of the metric is exactly the wind-translated unit
//    sphere through the origin.
#[test]
fn a02_indicatrix_is_translated_unit_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_res = 0.0f64;
    for space in model_spaces() {
        for _ in 0..1000 {
            let p = random_point(&space, &mut rng);
            let h = space.metric().at(p.coords()).unwrap();
            let w = space.wind().at(p.coords()).unwrap();

            // Forward: scale an admissible tangent to the unit level, then
            // its offset from the wind must be h-unit.
            let y = random_admissible(&space, &p, &mut rng, 0.9);
            let scale = rng.random_range(0.2..5.0);
            let yc = y.components() * scale;
            let f = kropina_value_raw(&h, &w, &yc).value().unwrap();
            let unit = &yc / f;
            max_res = max_res.max((norm_raw(&h, &(&unit - &w)) - 1.0).abs());

            // Reverse: any h-unit offset from the wind sits on the unit level.
            let u = random_unit(&space, &p, &mut rng);
            let y2 = &u + &w;
            let val = kropina_value_raw(&h, &w, &y2);
            if val.beta() > 1e-6 {
                max_res = max_res.max((val.value().unwrap() - 1.0).abs());
            }
        }
    }
    verdict("a02 indicatrix identity", max_res <= 1e-10, &format!("residual {max_res:.2e}"));
}

// 3. Geodesics stay on the unit level of the metric over long horizons.
#[test]
fn a03_geodesics_hold_unit_speed() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for space in model_spaces() {
        for _ in 0..50 {
            let p = random_point(&space, &mut rng);
            let y = random_admissible(&space, &p, &mut rng, 0.9);
            let path = kropina_geodesic(&space, &y, 10.0, &IntegrationConfig::default()).unwrap();
            worst = worst.max(path.max_unit_deviation());
        }
    }
    verdict("a03 unit-speed geodesics", worst <= 1e-6, &format!("max deviation {worst:.2e}"));
}

// 4. On the 3-sphere every geodesic returns to its start at parameter pi and
//    2 pi, and the flow orbits (great circles) have metric length pi.
#[test]
fn a04_sphere_geodesics_close_at_pi() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let space = sphere_space(3).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let z = random_point(&space, &mut rng);
        let y = random_admissible(&space, &z, &mut rng, 0.9);
        let path = kropina_geodesic(&space, &y, 2.0 * PI, &IntegrationConfig::default()).unwrap();
        let half = &path.points[path.len() / 2];
        let full = path.end_point();
        worst = worst.max((half - z.coords()).norm()).max((full - z.coords()).norm());
    }

    // Orbit length by composite Simpson over the exact flow parameterization.
    let z = random_point(&space, &mut rng);
    let n = 256usize;
    let mut integral = 0.0;
    for k in 0..=n {
        let s = 2.0 * PI * k as f64 / n as f64;
        let x = space.flow(z.coords(), s).unwrap();
        let h = space.metric().at(&x).unwrap();
        let w = space.wind().at(&x).unwrap();
        let f = kropina_value_raw(&h, &w, &w).value().unwrap();
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += weight * f;
    }
    integral *= (2.0 * PI / n as f64) / 3.0;
    let orbit_err = (integral - PI).abs();
    verdict(
        "a04 sphere closure",
        worst <= 1e-6 && orbit_err <= 1e-6,
        &format!("return {worst:.2e}, orbit length err {orbit_err:.2e}"),
    );
}

// 5. The conic exponential is the metric exponential of the offset carried by
//    the wind flow.
#[test]
fn a05_exponential_commutes_with_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = IntegrationConfig::default();
    let mut worst = 0.0f64;
    for space in model_spaces() {
        for _ in 0..100 {
            let p = random_point(&space, &mut rng);
            let h = space.metric().at(p.coords()).unwrap();
            let w = space.wind().at(p.coords()).unwrap();
            let y = random_admissible(&space, &p, &mut rng, 0.9);
            let f = kropina_value_raw(&h, &w, y.components()).value().unwrap();
            let y_unit = Tangent::new(p.clone(), y.components() / f).unwrap();
            let t = rng.random_range(0.1..3.0);

            let lhs = kropina_exponential(&space, &y_unit, t, &config).unwrap();
            let offset = y_unit.components() - &w;
            let ray = integrate_h_geodesic(
                &space,
                &Tangent::new(p.clone(), offset).unwrap(),
                t,
                &config,
            )
            .unwrap();
            let rhs = space.flow(&ray.end_point(), t).unwrap();
            worst = worst.max((lhs.coords() - rhs).norm());
        }
    }
    verdict("a05 exponential commutation", worst <= 1e-6, &format!("max gap {worst:.2e}"));
}

// 6. Flat-chart trichotomy: the drift sign decides reachability exactly.
#[test]
fn a06_flat_trichotomy_matches_drift_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let space = euclidean_space(2, &[1.0, 0.0]).unwrap();
    let p = ChartPoint::from_slice(&[0.0, 0.0]).unwrap();
    let cfg = SeparationConfig::default();
    let mut targets: Vec<ChartPoint> = (0..295)
        .map(|_| {
            ChartPoint::new(DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0))).unwrap()
        })
        .collect();
    for c in [-2.0, -0.5, 0.4, 1.7, 2.9] {
        targets.push(ChartPoint::from_slice(&[0.0, c]).unwrap());
    }
    let mut checked = 0usize;
    for q in &targets {
        let s = q.coords()[0];
        let fwd = separation(&space, &p, q, &cfg).unwrap();
        let bwd = separation(&space, q, &p, &cfg).unwrap();
        let dom = forward_domain_membership(&space, &p, q, &cfg).unwrap();
        let ok = if s > 0.0 {
            fwd.status == SeparationStatus::Finite
                && bwd.status == (SeparationStatus::Unreachable { capped: false })
                && dom == DomainVerdict::Forward
        } else if s < 0.0 {
            fwd.status == (SeparationStatus::Unreachable { capped: false })
                && bwd.status == SeparationStatus::Finite
                && dom == DomainVerdict::Backward
        } else {
            fwd.status == (SeparationStatus::Unreachable { capped: false })
                && bwd.status == (SeparationStatus::Unreachable { capped: false })
                && dom == DomainVerdict::Neither
        };
        assert!(ok, "trichotomy mismatch at q = {:?} (drift {s})", q.coords());
        checked += 1;
    }
    verdict("a06 flat trichotomy", checked == 300, &format!("{checked} targets classified"));
}

// 7. The fixed-point solver reproduces the closed chord forms on flat covers
//    and the wrapped diagonal value on the torus.
#[test]
fn a07_fixed_point_distance_matches_chord_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SeparationConfig::default();
    let mut worst = 0.0f64;

    // Euclidean chart and the cylinder cover: s0 = |d|^2 / (2 <d, W>).
    for (space, w) in [
        (euclidean_space(2, &[0.6, 0.8]).unwrap(), DVector::from_column_slice(&[0.6, 0.8])),
        (cylinder_space(1.0, 0.0).unwrap().universal_cover(), DVector::from_column_slice(&[1.0, 0.0])),
    ] {
        let mut done = 0;
        while done < 100 {
            let p = ChartPoint::new(DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0))).unwrap();
            let d = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            if d.dot(&w) < 0.05 {
                continue;
            }
            let q = ChartPoint::new(p.coords() + &d).unwrap();
            let s0 = d.norm_squared() / (2.0 * d.dot(&w));
            let got = separation(&space, &p, &q, &cfg).unwrap().value.unwrap();
            worst = worst.max((got - s0).abs());
            done += 1;
        }
    }

    // Torus cover: displacement (u, v) with u + v > 0 gives
    // (u^2 + v^2) / (sqrt2 (u + v)).
    let cover = torus_space().unwrap().universal_cover();
    let mut done = 0;
    while done < 100 {
        let p = ChartPoint::new(DVector::from_fn(2, |_, _| rng.random_range(0.0..2.0 * PI))).unwrap();
        let (u, v) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if u + v < 0.05 {
            continue;
        }
        let q = ChartPoint::from_slice(&[p.coords()[0] + u, p.coords()[1] + v]).unwrap();
        let expected = (u * u + v * v) / (std::f64::consts::SQRT_2 * (u + v));
        let got = separation(&cover, &p, &q, &cfg).unwrap().value.unwrap();
        worst = worst.max((got - expected).abs());
        done += 1;
    }

    // Wrapped diagonal example on the quotient torus (scan path).
    let torus = torus_space().unwrap();
    let p0 = ChartPoint::from_slice(&[0.0, 0.0]).unwrap();
    let q0 = ChartPoint::from_slice(&[PI, PI]).unwrap();
    let diag = separation(&torus, &p0, &q0, &cfg).unwrap().value.unwrap();
    let diag_err = (diag - PI / std::f64::consts::SQRT_2).abs();
    verdict(
        "a07 fixed-point vs chord forms",
        worst <= 1e-6 && diag_err <= 1e-6,
        &format!("cover gap {worst:.2e}, diagonal gap {diag_err:.2e}"),
    );
}

// 8. The derivative-free polyline bound lands within 2% of the fixed-point
//    solver on reachable pairs, including a curved DSL-defined space.
#[test]
fn a08_polyline_oracle_matches_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sep_cfg = SeparationConfig::default();
    let oracle_cfg = OracleConfig::default();
    let mut worst_rel = 0.0f64;
    for space in model_spaces() {
        for _ in 0..50 {
            let (p, q, _) = reachable_pair(&space, &mut rng, 0.4..2.5);
            if space.same_point(p.coords(), q.coords()) {
                continue;
            }
            let solver = separation(&space, &p, &q, &sep_cfg).unwrap().value.unwrap();
            let oracle = polyline_oracle(&space, &p, &q, &oracle_cfg)
                .unwrap()
                .length
                .expect("reachable pair must yield a polyline");
            worst_rel = worst_rel.max((oracle - solver).abs() / solver.max(1e-9));
        }
    }

    let custom = kropina_core::dsl::document::load_space(std::path::Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../spaces/heisenberg.json"
    )))
    .unwrap();
    let mut rng_c = ChaCha8Rng::seed_from_u64(88);
    for _ in 0..5 {
        let p = ChartPoint::new(DVector::from_fn(3, |_, _| rng_c.random_range(-0.5..0.5))).unwrap();
        let y = random_admissible(&custom, &p, &mut rng_c, 0.7);
        let len = rng_c.random_range(0.3..1.0);
        let q = kropina_exponential(&custom, &y, len, &IntegrationConfig::default()).unwrap();
        let solver = separation(&custom, &p, &q, &sep_cfg).unwrap().value.unwrap();
        let oracle = polyline_oracle(&custom, &p, &q, &oracle_cfg).unwrap().length.unwrap();
        worst_rel = worst_rel.max((oracle - solver).abs() / solver.max(1e-9));
    }
    verdict(
        "a08 oracle within 2% of solver",
        worst_rel <= 0.02,
        &format!("worst relative gap {worst_rel:.3e}"),
    );
}

// 9. The conic distance dominates half the metric distance, and strict
//    forward balls sit inside doubled metric balls.
#[test]
fn a09_lower_bound_and_ball_inclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SeparationConfig::default();
    let mut min_margin = f64::INFINITY;
    let mut finite_seen = 0usize;
    for space in model_spaces() {
        for _ in 0..60 {
            let (p, q, _) = reachable_pair(&space, &mut rng, 0.2..2.5);
            if space.same_point(p.coords(), q.coords()) {
                continue;
            }
            let sep = separation(&space, &p, &q, &cfg).unwrap();
            if let Some(df) = sep.value {
                let dh = h_distance(&space, &p, &q);
                min_margin = min_margin.min(df - 0.5 * dh);
                finite_seen += 1;
            }
        }
    }
    // Random unrestricted targets on the open flat chart as well.
    let flat = euclidean_space(2, &[1.0, 0.0]).unwrap();
    let p = ChartPoint::from_slice(&[0.0, 0.0]).unwrap();
    for _ in 0..100 {
        let q = ChartPoint::new(DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0))).unwrap();
        let sep = separation(&flat, &p, &q, &cfg).unwrap();
        if let Some(df) = sep.value {
            let dh = h_distance(&flat, &p, &q);
            min_margin = min_margin.min(df - 0.5 * dh);
            finite_seen += 1;
        }
    }

    let cyl = cylinder_space(0.6, 0.8).unwrap();
    let mut members = 0usize;
    let mut inclusion_ok = true;
    for _ in 0..100 {
        let (p, q, len) = reachable_pair(&cyl, &mut rng, 0.1..2.0);
        if cyl.same_point(p.coords(), q.coords()) {
            continue;
        }
        let eps = len * rng.random_range(0.8..1.6);
        if ball_membership(&cyl, &p, &q, eps, &cfg).unwrap() {
            members += 1;
            inclusion_ok &= h_distance(&cyl, &p, &q) < 2.0 * eps + 1e-9;
        }
    }
    verdict(
        "a09 lower bound and ball inclusion",
        min_margin >= -1e-9 && inclusion_ok && finite_seen > 200 && members > 20,
        &format!("min margin {min_margin:.2e}, {finite_seen} finite, {members} members"),
    );
}

// 10. Flat charts carry no conjugate parameters; on the 3-sphere the first
//     one sits at pi and the geodesic is back at its start there.
#[test]
fn a10_conjugate_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let config = IntegrationConfig::default();
    let mut flat_count = 0usize;
    for space in [
        euclidean_space(2, &[1.0, 0.0]).unwrap(),
        cylinder_space(0.6, 0.8).unwrap(),
        torus_space().unwrap(),
    ] {
        for _ in 0..3 {
            let p = random_point(&space, &mut rng);
            let y = random_admissible(&space, &p, &mut rng, 0.9);
            let report = jacobi_conjugate_search(&space, &y, 50.0, &config).unwrap();
            flat_count += report.parameters.len();
        }
    }

    let sphere = sphere_space(3).unwrap();
    let mut worst_param = 0.0f64;
    let mut worst_return = 0.0f64;
    for _ in 0..5 {
        let z = random_point(&sphere, &mut rng);
        let y = random_admissible(&sphere, &z, &mut rng, 0.9);
        // Reported parameters refer to the unit-speed geodesic, so the
        // exponential must be fed the normalized vector.
        let h = sphere.metric().at(z.coords()).unwrap();
        let w = sphere.wind().at(z.coords()).unwrap();
        let f = kropina_value_raw(&h, &w, y.components()).value().unwrap();
        let y_unit = Tangent::new(z.clone(), y.components() / f).unwrap();
        let report = jacobi_conjugate_search(&sphere, &y_unit, 4.0, &config).unwrap();
        assert!(!report.parameters.is_empty(), "sphere must report a conjugate parameter");
        let t1 = report.parameters[0];
        worst_param = worst_param.max((t1 - PI).abs());
        let at = kropina_exponential(&sphere, &y_unit, t1, &config).unwrap();
        worst_return = worst_return.max((at.coords() - z.coords()).norm());
    }
    verdict(
        "a10 conjugate parameters",
        flat_count == 0 && worst_param <= 1e-4 && worst_return <= 1e-3,
        &format!("flat count {flat_count}, sphere param err {worst_param:.2e}, return {worst_return:.2e}"),
    );
}

// 11. Cut loci of the flat quotients and the sphere, with two-direction
//     solver certificates on the tilted cylinder.
#[test]
fn a11_cut_loci_and_certificates() {
    // (1, 0): hyperbola u = pi + sqrt(pi^2 + v^2) on the cover.
    let cyl = cylinder_space(1.0, 0.0).unwrap();
    let p = ChartPoint::from_slice(&[0.0, 0.0]).unwrap();
    let cover_curve = cut_locus(&cyl.universal_cover(), &p, 257).unwrap();
    let mut analytic_err = 0.0f64;
    for (t, s) in cover_curve.parameters.iter().zip(&cover_curve.samples) {
        let expected_u = PI + (PI * PI + t * t).sqrt();
        analytic_err = analytic_err
            .max((s.coords()[0] - expected_u).abs())
            .max((s.coords()[1] - t).abs());
    }

    // Solver certificates on the quotient: cut points admit two distinct
    // minimizing directions whose geodesics both reach the target.
    let tight = SeparationConfig { tol: 1e-12, ..SeparationConfig::default() };
    let mut certified = 0usize;
    let mut cert_err = 0.0f64;
    for idx in (16..cover_curve.len() - 16).step_by(32) {
        let raw = cover_curve.samples[idx].coords();
        let q = ChartPoint::new(cyl.canonicalize(raw)).unwrap();
        let sep = separation(&cyl, &p, &q, &tight).unwrap();
        let tau = sep.tau_star.unwrap();
        let dirs = minimizing_directions(&cyl, &p, &q, tau, &tight).unwrap();
        assert!(dirs.len() >= 2, "cut point must carry two minimizers, got {}", dirs.len());
        let gap = (dirs[0].components() - dirs[1].components()).norm();
        assert!(gap > 1e-3, "directions must be distinct, gap {gap:.2e}");
        for dir in dirs.iter().take(2) {
            let reached = kropina_exponential(&cyl, dir, tau, &IntegrationConfig::default()).unwrap();
            let miss = cyl.canonical_displacement(reached.coords(), q.coords()).norm();
            cert_err = cert_err.max(miss);
        }
        certified += 1;
    }

    // (0, 1): the cut locus is the half-meridian u = pi, second coordinate
    // positive.
    let upright = cylinder_space(0.0, 1.0).unwrap();
    let merid = cut_locus(&upright, &p, 257).unwrap();
    let mut meridian_ok = true;
    for s in &merid.samples {
        let wrapped = upright.canonicalize(s.coords());
        meridian_ok &= (wrapped[0] - PI).abs() <= 1e-9 && s.coords()[1] > 0.0;
    }

    // Torus: the analytic branches equal the twisted metric cut set.
    let torus = torus_space().unwrap();
    let p2 = ChartPoint::from_slice(&[0.5, 0.25]).unwrap();
    let analytic = cut_locus(&torus, &p2, 129).unwrap();
    let h_cut = h_cut_locus_samples(&torus, &p2, 129).unwrap();
    let twisted = twist_h_cut_locus(&torus, &p2, &h_cut.parameters, &h_cut.samples).unwrap();
    let mut twist_gap = 0.0f64;
    assert_eq!(analytic.len(), twisted.len());
    for (a, b) in analytic.samples.iter().zip(&twisted.samples) {
        twist_gap = twist_gap.max(torus.canonical_displacement(a.coords(), b.coords()).amax());
    }

    // Sphere: the cut locus collapses to the start point.
    let sphere = sphere_space(3).unwrap();
    let z = ChartPoint::from_slice(&[1.0, 0.0, 0.0, 0.0]).unwrap();
    let sphere_cut = cut_locus(&sphere, &z, 257).unwrap();
    let sphere_ok = sphere_cut.len() == 1
        && (sphere_cut.samples[0].coords() - z.coords()).norm() <= 1e-12;

    verdict(
        "a11 cut loci",
        analytic_err <= 1e-8
            && certified >= 6
            && cert_err <= 1e-5
            && meridian_ok
            && twist_gap <= 1e-10
            && sphere_ok,
        &format!(
            "hyperbola {analytic_err:.2e}, {certified} certified (err {cert_err:.2e}), twist {twist_gap:.2e}"
        ),
    );
}

// 12. Variations orthogonal at launch stay orthogonal at the far end of the
//     exponential (the Gauss-type orthogonality residual stays small).
#[test]
fn a12_gauss_orthogonality() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let config = IntegrationConfig::default();
    let mut worst = 0.0f64;
    for space in model_spaces() {
        for _ in 0..50 {
            let p = random_point(&space, &mut rng);
            let h = space.metric().at(p.coords()).unwrap();
            let w = space.wind().at(p.coords()).unwrap();
            let y = random_admissible(&space, &p, &mut rng, 0.8);
            let f = kropina_value_raw(&h, &w, y.components()).value().unwrap();
            let y_unit = Tangent::new(p.clone(), y.components() / f).unwrap();
            let v = random_unit(&space, &p, &mut rng);
            let tau = rng.random_range(0.3..2.5);
            let res = kropina_core::engine::gauss_orthogonality(&space, &y_unit, &v, tau, &config)
                .unwrap();
            worst = worst.max(res);
        }
    }
    verdict("a12 gauss orthogonality", worst <= 1e-4, &format!("max residual {worst:.2e}"));
}

// 13. Straight-line verdicts: flat constant-wind charts are projectively
//     trivial (geodesics are straight point sets), the sphere is not, and the
//     wind-side derivative identities hold for varying scale choices.
#[test]
fn a13_projective_verdicts_and_identities() {
    let probes: Vec<ChartPoint> = (0..7)
        .map(|k| {
            ChartPoint::from_slice(&[0.3 * k as f64 - 1.0, 0.2 * (k as f64).sin() + 0.1]).unwrap()
        })
        .collect();
    let raw: Vec<DVector<f64>> = probes.iter().map(|p| p.coords().clone()).collect();

    let mut flat_ok = true;
    let mut line_err = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for space in [
        euclidean_space(2, &[1.0, 0.0]).unwrap(),
        cylinder_space(0.6, 0.8).unwrap(),
        torus_space().unwrap(),
    ] {
        let ab = to_alpha_beta(space.nav(), ScalarField::constant(2, 0.0), &raw).unwrap();
        let (parallel, residual) = projective_equivalence_verdict(&ab, &probes).unwrap();
        flat_ok &= parallel && residual <= 1e-7;

        // Point sets of conic geodesics are straight lines in the chart.
        for _ in 0..3 {
            let p = random_point(&space, &mut rng);
            let y = random_admissible(&space, &p, &mut rng, 0.9);
            let path = kropina_geodesic(&space, &y, 4.0, &IntegrationConfig::default()).unwrap();
            let e = &path.velocities[0] / path.velocities[0].norm();
            for pt in &path.points {
                let d = pt - p.coords();
                let off = (&d - &e * d.dot(&e)).norm();
                line_err = line_err.max(off);
            }
        }
    }

    let sphere = sphere_space(3).unwrap();
    let sphere_probes: Vec<ChartPoint> = (0..5)
        .map(|k| {
            let t = 0.4 * k as f64 + 0.2;
            ChartPoint::from_slice(&[t.cos(), t.sin(), 0.0, 0.0]).unwrap()
        })
        .collect();
    let sphere_raw: Vec<DVector<f64>> =
        sphere_probes.iter().map(|p| p.coords().clone()).collect();
    let ab_s = to_alpha_beta(sphere.nav(), ScalarField::constant(4, 0.0), &sphere_raw).unwrap();
    let (sphere_parallel, sphere_res) =
        projective_equivalence_verdict(&ab_s, &sphere_probes).unwrap();

    // Cross identities between the one-form derivative split and the
    // wind-side derivative data, for constant and varying scales.
    let mut identity_err = 0.0f64;
    let flat = euclidean_space(2, &[1.0, 0.0]).unwrap();
    for kappa in [ScalarField::constant(2, 0.2), ScalarField::new(2, |x: &DVector<f64>| 0.3 * x[0].sin())] {
        let report = navigation_parallel_residual(flat.nav(), &kappa, &probes).unwrap();
        identity_err = identity_err.max(report.identity_residual);
    }
    let kappa_s = ScalarField::constant(4, 0.15);
    let report_s = navigation_parallel_residual(sphere.nav(), &kappa_s, &sphere_probes).unwrap();
    identity_err = identity_err.max(report_s.identity_residual);

    verdict(
        "a13 projective verdicts",
        flat_ok && line_err <= 1e-6 && !sphere_parallel && sphere_res > 1e-3 && identity_err <= 1e-6,
        &format!(
            "line err {line_err:.2e}, sphere residual {sphere_res:.2e}, identities {identity_err:.2e}"
        ),
    );
}

// 14. Fixed-seed CLI invocations are byte-identical.
#[test]
fn a14_cli_determinism() {
    let exe = env!("CARGO_BIN_EXE_kropina");
    let tmp = std::env::temp_dir();
    let run_csv = |tag: &str, args: &[&str]| -> Vec<u8> {
        let path = tmp.join(format!("kropina-accept-{}-{tag}.csv", std::process::id()));
        let status = Command::new(exe)
            .args(args)
            .args(["--out", path.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(&path).unwrap()
    };
    let geo_args = ["geodesic", "--space", "cylinder:0.6,0.8", "--point", "0.3,0.4", "--dir",
        "1.1,0.7", "--tmax", "5.0"];
    let first = run_csv("g1", &geo_args);
    let second = run_csv("g2", &geo_args);
    let csv_ok = first == second && !first.is_empty();

    let dist_args = ["distance", "--space", "torus", "--from", "0.3,0.2", "--to", "2.9,2.7",
        "--oracle", "--seed", "42", "--format", "json"];
    let d1 = Command::new(exe).args(dist_args).output().unwrap();
    let d2 = Command::new(exe).args(dist_args).output().unwrap();
    let dist_ok = d1.status.success() && d1.stdout == d2.stdout;

    verdict(
        "a14 deterministic output",
        csv_ok && dist_ok,
        &format!("{} CSV bytes, distance JSON stable", first.len()),
    );
}
