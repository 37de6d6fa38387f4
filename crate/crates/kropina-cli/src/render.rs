//! Deterministic output rendering: CSV tables with a fixed 7-decimal format,
//! and presentation-only SVG plots whose every point also appears in the CSV.

use kropina_core::engine::PathSample;
use kropina_core::models::CutLocusCurve;
use kropina_core::space::Topology;

pub fn fmt7(x: f64) -> String {
    format!("{x:.7}")
}

/// Geodesic table: t, positions, velocities, metric value.
pub fn csv_geodesic(path: &PathSample) -> String {
    let n = path.points.first().map(|p| p.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("v{i}")));
    header.push("F".to_string());
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..path.len() {
        let mut row = vec![fmt7(path.params[k])];
        row.extend(path.points[k].iter().map(|&c| fmt7(c)));
        row.extend(path.velocities[k].iter().map(|&c| fmt7(c)));
        row.push(fmt7(path.f_values[k]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Cut-locus table: branch parameter and point coordinates.
pub fn csv_cut_locus(curve: &CutLocusCurve) -> String {
    let n = curve.samples.first().map(|p| p.dim()).unwrap_or(0);
    let mut header = vec!["param".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for (t, p) in curve.parameters.iter().zip(&curve.samples) {
        let mut row = vec![fmt7(*t)];
        row.extend(p.coords().iter().map(|&c| fmt7(c)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const SVG_MARGIN: f64 = 24.0;

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

/// Plot 2-plane projections of chart points. `connect` draws one polyline,
/// otherwise a scatter of dots. Periodic axes of the plotted plane get grid
/// guides at multiples of their period.
pub fn svg_chart(points: &[(f64, f64)], connect: bool, guides: &[(usize, f64)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    ));
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for &(x, y) in points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let scale = ((SVG_W - 2.0 * SVG_MARGIN) / span_x).min((SVG_H - 2.0 * SVG_MARGIN) / span_y);
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            SVG_MARGIN + (x - min_x) * scale,
            SVG_H - SVG_MARGIN - (y - min_y) * scale,
        )
    };

    for &(axis, period) in guides {
        if axis > 1 || period <= 0.0 {
            continue;
        }
        let (lo, hi) = if axis == 0 { (min_x, max_x) } else { (min_y, max_y) };
        let mut k = (lo / period).floor() as i64;
        while (k as f64) * period <= hi {
            let v = k as f64 * period;
            if v >= lo {
                let (p1, p2) = if axis == 0 {
                    (to_px(v, min_y), to_px(v, max_y))
                } else {
                    (to_px(min_x, v), to_px(max_x, v))
                };
                out.push_str(&format!(
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n",
                    fmt3(p1.0),
                    fmt3(p1.1),
                    fmt3(p2.0),
                    fmt3(p2.1)
                ));
            }
            k += 1;
        }
    }

    if connect {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{},{}", fmt3(px), fmt3(py))
            })
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e8c\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
    } else {
        for &(x, y) in points {
            let (px, py) = to_px(x, y);
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"1.5\" fill=\"#933b27\"/>\n",
                fmt3(px),
                fmt3(py)
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Guides for a plotted plane from the space topology.
pub fn plane_guides(topology: &[Topology], plane: (usize, usize)) -> Vec<(usize, f64)> {
    let mut guides = Vec::new();
    for (slot, axis) in [plane.0, plane.1].into_iter().enumerate() {
        if let Some(Topology::Periodic(p)) = topology.get(axis) {
            guides.push((slot, *p));
        }
    }
    guides
}
