//! Independent length estimator: minimize the conic length of a polyline
//! with fixed endpoints by coordinate pattern search over its interior
//! vertices. Deliberately built on nothing but the metric value itself, so
//! its answers can arbitrate the geodesic-based solvers.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::ChartPoint;
use crate::space::SpaceDefinition;
use crate::zermelo::kropina_value_raw;

/// Knobs of the polyline search.
#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    /// Number of polyline segments (>= 2).
    pub segments: usize,
    /// Independent descent runs; the first starts from the plain chord, the
    /// rest from jittered copies.
    pub restarts: usize,
    /// Seed for the jitter stream; results are a pure function of the
    /// configuration.
    pub seed: u64,
    /// Pattern-search sweep budget per restart.
    pub sweeps: usize,
    /// Simpson subintervals per segment (rounded up to even).
    pub quadrature: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { segments: 16, restarts: 6, seed: 0x6b72_6f70, sweeps: 120, quadrature: 8 }
    }
}

/// Outcome of the polyline search. `length` is None when no admissible
/// polyline was found by any restart.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub length: Option<f64>,
    pub vertices: Vec<DVector<f64>>,
    /// Best length per restart, in restart order.
    pub restart_lengths: Vec<Option<f64>>,
}

fn simpson_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Conic length of one polyline segment by Simpson quadrature. Segments
/// follow metric geodesic chords when the space provides them in closed form
/// (trying every tied chord and keeping the best admissible one), otherwise
/// straight chart chords. Returns None when every chord leaves the forward
/// cone at some quadrature node.
fn segment_length(
    space: &SpaceDefinition,
    a: &DVector<f64>,
    b: &DVector<f64>,
    quadrature: usize,
) -> Result<Option<f64>> {
    let n = quadrature.max(2).next_multiple_of(2);
    let f_at = |x: &DVector<f64>, v: &DVector<f64>| -> Result<Option<f64>> {
        let h = space.metric().at(x)?;
        let w = space.wind().at(x)?;
        Ok(kropina_value_raw(&h, &w, v).value())
    };

    let geodesic_chords = space.h_distance_closed_form(a, b).is_some()
        && space.h_directions_closed_form(a, b).is_some()
        && space.h_geodesic_closed_form(a, a, 0.0).is_some();
    if geodesic_chords {
        let len = space.h_distance_closed_form(a, b).expect("checked above");
        if len <= 1e-14 {
            return Ok(Some(0.0));
        }
        let dirs = space.h_directions_closed_form(a, b).expect("checked above");
        if dirs.is_empty() {
            return Ok(Some(0.0));
        }
        let mut best: Option<f64> = None;
        'chords: for u in &dirs {
            let mut total = 0.0;
            for i in 0..=n {
                let s = len * i as f64 / n as f64;
                let (x, v) = space.h_geodesic_closed_form(a, u, s).expect("checked above");
                let Some(f) = f_at(&x, &v)? else {
                    continue 'chords;
                };
                total += simpson_weight(i, n) * f;
            }
            let l = total * len / (3.0 * n as f64);
            if best.is_none_or(|b| l < b) {
                best = Some(l);
            }
        }
        Ok(best)
    } else {
        let chord = space.canonical_displacement(a, b);
        if chord.norm() <= 1e-14 {
            return Ok(Some(0.0));
        }
        let mut total = 0.0;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let x = a + &chord * s;
            let Some(f) = f_at(&x, &chord)? else {
                return Ok(None);
            };
            total += simpson_weight(i, n) * f;
        }
        Ok(Some(total / (3.0 * n as f64)))
    }
}

/// Conic length of a whole polyline; None when any segment is inadmissible.
pub fn polyline_length(space: &SpaceDefinition, vertices: &[DVector<f64>], quadrature: usize) -> Result<Option<f64>> {
    let mut total = 0.0;
    for pair in vertices.windows(2) {
        match segment_length(space, &pair[0], &pair[1], quadrature)? {
            Some(l) => total += l,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

fn as_cost(l: Option<f64>) -> f64 {
    l.unwrap_or(f64::INFINITY)
}

/// Candidate initial polylines, most promising first:
/// - metric geodesic chord interpolation, one candidate per tied chord;
/// - on flat quotients, the straight line along each deck lift whose drift
///   term is positive (the routes that wrap around the identifications);
/// - the plain straight chart chord as a last resort.
fn initial_candidates(
    space: &SpaceDefinition,
    p: &DVector<f64>,
    q: &DVector<f64>,
    segments: usize,
) -> Vec<Vec<DVector<f64>>> {
    let k = segments;
    let mut out: Vec<Vec<DVector<f64>>> = Vec::new();

    if let (Some(len), Some(dirs)) = (
        space.h_distance_closed_form(p, q),
        space.h_directions_closed_form(p, q),
    ) {
        if space.h_geodesic_closed_form(p, p, 0.0).is_some() {
            for u in dirs.iter().take(4) {
                out.push(
                    (0..=k)
                        .map(|j| {
                            space
                                .h_geodesic_closed_form(p, u, len * j as f64 / k as f64)
                                .expect("provider present")
                                .0
                        })
                        .collect(),
                );
            }
        }
    }

    let flat = matches!(
        space.model(),
        crate::space::ModelKind::Euclidean | crate::space::ModelKind::Cylinder | crate::space::ModelKind::Torus
    );
    if flat && space.is_periodic() {
        if let Ok(w) = space.wind().at(p) {
            let chord = space.canonical_displacement(p, q);
            let mut lifts: Vec<(f64, DVector<f64>)> = space
                .lift_offsets(2)
                .into_iter()
                .map(|off| &chord + &off)
                .filter_map(|d| {
                    let beta = w.dot(&d);
                    (beta > 1e-12).then(|| (d.norm_squared() / (2.0 * beta), d))
                })
                .collect();
            lifts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (_, d) in lifts.into_iter().take(2) {
                out.push((0..=k).map(|j| p + &d * (j as f64 / k as f64)).collect());
            }
        }
    }

    // Spaces with closed wind orbits get "ride the orbit, then cut across"
    // routes: the minimizing path can wrap far around the flow direction, a
    // region the direct chord families never reach.
    if let Some(period) = space.quasi_regular_period() {
        let m = (k / 2).max(1);
        for frac in [0.3, 0.55, 0.8] {
            let s = frac * period;
            let Ok(waypoint) = space.flow(p, s) else { continue };
            let mut cand: Vec<DVector<f64>> = (0..=m)
                .map(|j| space.flow(p, s * j as f64 / m as f64).unwrap_or_else(|_| p.clone()))
                .collect();
            let rest = k - m;
            let cross_geodesic = space
                .h_distance_closed_form(&waypoint, q)
                .zip(space.h_directions_closed_form(&waypoint, q))
                .and_then(|(len, dirs)| dirs.into_iter().next().map(|u| (len, u)))
                .filter(|_| space.h_geodesic_closed_form(&waypoint, &waypoint, 0.0).is_some());
            match cross_geodesic {
                Some((len, u)) => {
                    for j in 1..=rest {
                        cand.push(
                            space
                                .h_geodesic_closed_form(&waypoint, &u, len * j as f64 / rest as f64)
                                .expect("provider present")
                                .0,
                        );
                    }
                }
                None => {
                    let d = space.canonical_displacement(&waypoint, q);
                    for j in 1..=rest {
                        cand.push(&waypoint + &d * (j as f64 / rest as f64));
                    }
                }
            }
            out.push(cand);
        }
    }

    let chord = space.canonical_displacement(p, q);
    out.push((0..=k).map(|j| p + &chord * (j as f64 / k as f64)).collect());

    for cand in &mut out {
        for v in cand.iter_mut() {
            project_vertex(space, v);
        }
    }
    out
}

/// Keep a trial vertex on the space's constraint set.
fn project_vertex(space: &SpaceDefinition, x: &mut DVector<f64>) {
    let mut v = DVector::zeros(x.len());
    space.project_state(x, &mut v);
}

/// Insert the chord midpoint of every adjacent vertex pair, following the
/// metric geodesic chord when the space has one in closed form.
fn subdivide(space: &SpaceDefinition, vertices: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(vertices.len() * 2 - 1);
    for pair in vertices.windows(2) {
        out.push(pair[0].clone());
        let geodesic_mid = space
            .h_distance_closed_form(&pair[0], &pair[1])
            .zip(space.h_directions_closed_form(&pair[0], &pair[1]))
            .and_then(|(len, dirs)| dirs.into_iter().next().map(|u| (len, u)))
            .filter(|_| space.h_geodesic_closed_form(&pair[0], &pair[0], 0.0).is_some())
            .map(|(len, u)| space.h_geodesic_closed_form(&pair[0], &u, len * 0.5).expect("provider present").0);
        let mut mid = geodesic_mid
            .unwrap_or_else(|| &pair[0] + space.canonical_displacement(&pair[0], &pair[1]) * 0.5);
        project_vertex(space, &mut mid);
        out.push(mid);
    }
    out.push(vertices.last().expect("polylines are nonempty").clone());
    out
}

/// One full pattern-search run from the given initial polyline.
fn descend(
    space: &SpaceDefinition,
    mut vertices: Vec<DVector<f64>>,
    config: &OracleConfig,
    initial_step: f64,
) -> Result<(Option<f64>, Vec<DVector<f64>>)> {
    let k = vertices.len() - 1;
    let mut seg: Vec<f64> = Vec::with_capacity(k);
    for pair in vertices.windows(2) {
        seg.push(as_cost(segment_length(space, &pair[0], &pair[1], config.quadrature)?));
    }
    let mut step = initial_step;
    let step_floor = 1e-6 * (1.0 + initial_step);
    for _ in 0..config.sweeps {
        let before: f64 = seg.iter().sum();
        for j in 1..k {
            // Curve-shortening move: pulling a vertex toward the midpoint of
            // its neighbors irons out kinks far faster than axis steps alone.
            let mid = &vertices[j - 1] + space.canonical_displacement(&vertices[j - 1], &vertices[j + 1]) * 0.5;
            for blend in [1.0, 0.5] {
                let mut trial = &vertices[j] + space.canonical_displacement(&vertices[j], &mid) * blend;
                project_vertex(space, &mut trial);
                let left = as_cost(segment_length(space, &vertices[j - 1], &trial, config.quadrature)?);
                let right = as_cost(segment_length(space, &trial, &vertices[j + 1], config.quadrature)?);
                if left + right < seg[j - 1] + seg[j] {
                    vertices[j] = trial;
                    seg[j - 1] = left;
                    seg[j] = right;
                    break;
                }
            }
            // On spaces with closed wind orbits the cost is nearly flat along
            // the flow direction; axis steps crawl through that valley, a
            // move along the orbit itself walks straight down it.
            if space.quasi_regular_period().is_some() {
                for sign in [1.0, -1.0] {
                    let Ok(mut trial) = space.flow(&vertices[j], sign * step) else { continue };
                    project_vertex(space, &mut trial);
                    let left = as_cost(segment_length(space, &vertices[j - 1], &trial, config.quadrature)?);
                    let right = as_cost(segment_length(space, &trial, &vertices[j + 1], config.quadrature)?);
                    if left + right < seg[j - 1] + seg[j] {
                        vertices[j] = trial;
                        seg[j - 1] = left;
                        seg[j] = right;
                    }
                }
            }
            for axis in 0..space.dim() {
                for sign in [1.0, -1.0] {
                    let mut trial = vertices[j].clone();
                    trial[axis] += sign * step;
                    project_vertex(space, &mut trial);
                    let left = as_cost(segment_length(space, &vertices[j - 1], &trial, config.quadrature)?);
                    let right = as_cost(segment_length(space, &trial, &vertices[j + 1], config.quadrature)?);
                    if left + right < seg[j - 1] + seg[j] {
                        vertices[j] = trial;
                        seg[j - 1] = left;
                        seg[j] = right;
                    }
                }
            }
        }
        let after: f64 = seg.iter().sum();
        // Shrink only when the sweep's gain is negligible; microscopic
        // improvements must not starve the fine-step polish phase.
        if !(before - after > 1e-5 * (1.0 + after.abs())) {
            step *= 0.5;
            if step < step_floor {
                break;
            }
        }
    }
    let total: f64 = seg.iter().sum();
    let length = if total.is_finite() { Some(total) } else { None };
    Ok((length, vertices))
}

fn thread_budget(restarts: usize) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("KROPINA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw);
    cap.min(restarts).max(1)
}

/// Best polyline length from p to q over all restarts. Restarts run
/// concurrently (bounded by the KROPINA_THREADS environment variable) and
/// merge by minimum; the outcome depends only on the configuration.
pub fn polyline_oracle(
    space: &SpaceDefinition,
    p: &ChartPoint,
    q: &ChartPoint,
    config: &OracleConfig,
) -> Result<OracleResult> {
    if p.dim() != space.dim() || q.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: p.dim().max(q.dim()) });
    }
    if config.segments < 2 {
        return Err(Error::InvalidInput {
            context: "polyline search",
            message: format!("need at least 2 segments, got {}", config.segments),
        });
    }
    if space.same_point(p.coords(), q.coords()) {
        return Ok(OracleResult {
            length: Some(0.0),
            vertices: vec![p.coords().clone(), q.coords().clone()],
            restart_lengths: vec![Some(0.0); config.restarts.max(1)],
        });
    }

    let candidates = initial_candidates(space, p.coords(), q.coords(), config.segments);
    let scale = {
        let mut s = 0.0;
        for pair in candidates[0].windows(2) {
            s += (&pair[1] - &pair[0]).norm();
        }
        (s / config.segments as f64).max(1e-3)
    };

    // Every structured candidate gets at least one run; extra restarts beyond
    // the candidate list are jittered copies.
    let restarts = config.restarts.max(candidates.len());
    let run_one = |r: usize| -> Result<(Option<f64>, Vec<DVector<f64>>)> {
        let mut start = candidates[r % candidates.len()].clone();
        if r >= candidates.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            let sigma = scale * 0.5 * (1.0 + r as f64 / restarts as f64);
            for v in start.iter_mut().skip(1).take(config.segments - 1) {
                for c in v.iter_mut() {
                    *c += (rng.random::<f64>() * 2.0 - 1.0) * sigma;
                }
                project_vertex(space, v);
            }
        }
        descend(space, start, config, scale * 0.25)
    };

    let workers = thread_budget(restarts);
    let mut outcomes: Vec<Option<Result<(Option<f64>, Vec<DVector<f64>>)>>> = Vec::new();
    outcomes.resize_with(restarts, || None);
    if workers <= 1 {
        for (r, slot) in outcomes.iter_mut().enumerate() {
            *slot = Some(run_one(r));
        }
    } else {
        let chunks: Vec<Vec<usize>> = (0..workers)
            .map(|w| (0..restarts).filter(|r| r % workers == w).collect())
            .collect();
        let results = std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    let run = &run_one;
                    s.spawn(move || {
                        chunk
                            .iter()
                            .map(|&r| (r, run(r)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("restart worker panicked"))
                .collect::<Vec<_>>()
        });
        for (r, res) in results {
            outcomes[r] = Some(res);
        }
    }

    let mut restart_lengths = Vec::with_capacity(restarts);
    let mut best: Option<(f64, Vec<DVector<f64>>)> = None;
    for outcome in outcomes {
        let (length, vertices) = outcome.expect("all restarts ran")?;
        restart_lengths.push(length);
        if let Some(l) = length {
            if best.as_ref().is_none_or(|(bl, _)| l < *bl) {
                best = Some((l, vertices));
            }
        }
    }
    match best {
        Some((mut l, mut vertices)) => {
            // Coordinate sweeps descend shallow valleys slowly; the winning
            // restart alone gets an extended budget instead of paying for
            // long runs on every restart.
            let polish = OracleConfig { sweeps: config.sweeps * 4, ..*config };
            let (polished, polished_vertices) = descend(space, vertices.clone(), &polish, scale * 0.25)?;
            if let Some(r) = polished {
                if r < l {
                    l = r;
                    vertices = polished_vertices;
                }
            }
            // A kinked polyline overestimates a curved minimizer by an amount
            // proportional to the squared segment length; two subdivision and
            // re-polish passes shrink that bias far below the search tolerance.
            for _ in 0..2 {
                let finer = subdivide(space, &vertices);
                let polish = OracleConfig { sweeps: (config.sweeps / 2).max(20), ..*config };
                let (refined, refined_vertices) = descend(space, finer, &polish, scale * 0.1)?;
                match refined {
                    Some(r) if r < l => {
                        l = r;
                        vertices = refined_vertices;
                    }
                    _ => break,
                }
            }
            Ok(OracleResult { length: Some(l), vertices, restart_lengths })
        }
        None => Ok(OracleResult {
            length: None,
            vertices: candidates.into_iter().next().expect("at least the chord candidate"),
            restart_lengths,
        }),
    }
}
