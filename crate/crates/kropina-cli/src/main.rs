//! Command-line front end: geodesic traces, forward distances, cut loci,
//! document conversion, and structural checks for wind-driven conic metrics.

mod convert;
mod render;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use kropina_core::dsl::document::{probe_grid, SpaceDocument, TOL_DOC_KILLING, TOL_DOC_UNIT};
use kropina_core::engine::{kropina_geodesic, IntegrationConfig};
use kropina_core::error::{Error, Result};
use kropina_core::geometry::{field_diagnostics, ChartPoint, ScalarField, Tangent};
use kropina_core::models::{
    closed_form_distance, cut_locus, parse_space_spec, ClosedFormDistance, DEFAULT_CUT_SAMPLES,
};
use kropina_core::oracle::{polyline_oracle, OracleConfig};
use kropina_core::projective::projective_equivalence_verdict;
use kropina_core::separation::{separation, SeparationConfig, SeparationStatus};
use kropina_core::space::{ModelKind, SpaceDefinition};
use kropina_core::zermelo::to_alpha_beta;
use nalgebra::DVector;

#[derive(Parser)]
#[command(
    name = "kropina",
    version,
    about = "Geodesics, forward distances, and cut loci for wind-driven conic metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceForm {
    /// Symmetric-tensor-plus-one-form description.
    Ab,
    /// Metric-plus-wind description.
    Nav,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a space document between its two equivalent descriptions.
    Convert {
        /// Form of the input document.
        #[arg(long, value_enum)]
        from: SourceForm,
        /// Input JSON document.
        #[arg(long)]
        space: PathBuf,
        /// Conformal exponent expression for --from nav (default "0").
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<String>,
        /// Output JSON document.
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate a unit-speed geodesic and write a CSV trace (plus an SVG).
    Geodesic {
        /// Space address: euclidean:n:c1,..,cn | sphere:n | cylinder:A,B | torus | path.json
        #[arg(long)]
        space: String,
        /// Start point, comma-separated chart coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Initial direction in the admissible cone.
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
        /// Arc-length horizon.
        #[arg(long)]
        tmax: f64,
        /// Integration steps.
        #[arg(long, default_value_t = 1024)]
        steps: usize,
        /// Work on the periodic chart's universal cover.
        #[arg(long)]
        cover: bool,
        /// Coordinate plane for the SVG, 1-based "i,j".
        #[arg(long, default_value = "1,2", allow_hyphen_values = true)]
        plane: String,
        /// Output CSV path; the SVG replaces its extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward distance between two points.
    Distance {
        #[arg(long)]
        space: String,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        /// Work on the periodic chart's universal cover.
        #[arg(long)]
        cover: bool,
        /// Also run the derivative-free polyline bound.
        #[arg(long)]
        oracle: bool,
        /// Seed for the polyline bound's restart jitter.
        #[arg(long, default_value_t = 0x6b72_6f70)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Sample the cut locus of a point and write a CSV table (plus an SVG).
    Cutlocus {
        #[arg(long)]
        space: String,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Samples per branch.
        #[arg(long, default_value_t = DEFAULT_CUT_SAMPLES)]
        samples: usize,
        /// Emit unwrapped (covering-chart) coordinates.
        #[arg(long)]
        cover: bool,
        /// Coordinate plane for the SVG, 1-based "i,j".
        #[arg(long, default_value = "1,2", allow_hyphen_values = true)]
        plane: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Structural diagnostics; with no flags all checks run.
    Check {
        #[arg(long)]
        space: String,
        /// Wind-field isometry and unit-length residuals.
        #[arg(long)]
        killing: bool,
        /// Parallelism of the associated one-form (straight-line verdict).
        #[arg(long)]
        projective: bool,
        /// Closed-form vs numerical agreement on model spaces.
        #[arg(long)]
        closedform: bool,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(if e.is_numerical() { 2 } else { 1 });
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Convert { from, space, kappa, out } => run_convert(from, &space, kappa.as_deref(), &out),
        Cmd::Geodesic { space, point, dir, tmax, steps, cover, plane, out } => {
            run_geodesic(&space, &point, &dir, tmax, steps, cover, &plane, &out)
        }
        Cmd::Distance { space, from, to, cover, oracle, seed, format } => {
            run_distance(&space, &from, &to, cover, oracle, seed, format)
        }
        Cmd::Cutlocus { space, point, samples, cover, plane, out } => {
            run_cutlocus(&space, &point, samples, cover, &plane, &out)
        }
        Cmd::Check { space, killing, projective, closedform } => {
            run_check(&space, killing, projective, closedform)
        }
    }
}

fn bad_arg(message: String) -> Error {
    Error::InvalidInput { context: "command line", message }
}

fn parse_vector(name: &str, text: &str) -> Result<DVector<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad_arg(format!("--{name}: bad number `{t}`")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(bad_arg(format!("--{name}: empty vector")));
    }
    Ok(DVector::from_vec(values))
}

fn parse_plane(text: &str, dim: usize) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(bad_arg(format!("--plane: expected `i,j`, got `{text}`")));
    }
    let idx = |t: &str| -> Result<usize> {
        let i: usize = t
            .trim()
            .parse()
            .map_err(|_| bad_arg(format!("--plane: bad index `{t}`")))?;
        if i == 0 || i > dim {
            return Err(bad_arg(format!("--plane: index {i} outside 1..={dim}")));
        }
        Ok(i - 1)
    };
    let (i, j) = (idx(parts[0])?, idx(parts[1])?);
    if i == j {
        return Err(bad_arg("--plane: indices must differ".into()));
    }
    Ok((i, j))
}

fn load_chart_space(spec: &str, cover: bool) -> Result<SpaceDefinition> {
    let space = parse_space_spec(spec)?;
    Ok(if cover { space.universal_cover() } else { space })
}

fn write_with_svg(out: &Path, csv: &str, svg: &str) -> Result<()> {
    std::fs::write(out, csv)?;
    let svg_path = out.with_extension("svg");
    std::fs::write(&svg_path, svg)?;
    println!("wrote {}", out.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

fn run_convert(from: SourceForm, space: &Path, kappa: Option<&str>, out: &Path) -> Result<()> {
    match from {
        SourceForm::Nav => {
            let doc = SpaceDocument::from_file(space)?;
            let one_form = convert::navigation_to_one_form(&doc, kappa.unwrap_or("0"))?;
            std::fs::write(out, one_form.to_json()? + "\n")?;
        }
        SourceForm::Ab => {
            if kappa.is_some() {
                return Err(bad_arg("--kappa applies only to --from nav".into()));
            }
            let doc = convert::OneFormDocument::from_file(space)?;
            let nav = convert::one_form_to_navigation(&doc)?;
            std::fs::write(out, nav.to_json()? + "\n")?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run_geodesic(
    spec: &str,
    point: &str,
    dir: &str,
    tmax: f64,
    steps: usize,
    cover: bool,
    plane: &str,
    out: &Path,
) -> Result<()> {
    let space = load_chart_space(spec, cover)?;
    let plane = parse_plane(plane, space.dim())?;
    let y = Tangent::new(
        ChartPoint::new(parse_vector("point", point)?)?,
        parse_vector("dir", dir)?,
    )?;
    let path = kropina_geodesic(&space, &y, tmax, &IntegrationConfig::with_steps(steps))?;
    let csv = render::csv_geodesic(&path);
    let pts: Vec<(f64, f64)> = path.points.iter().map(|p| (p[plane.0], p[plane.1])).collect();
    let guides = render::plane_guides(space.topology(), plane);
    let svg = render::svg_chart(&pts, true, &guides);
    write_with_svg(out, &csv, &svg)
}

fn run_distance(
    spec: &str,
    from: &str,
    to: &str,
    cover: bool,
    oracle: bool,
    seed: u64,
    format: OutputFormat,
) -> Result<()> {
    let space = load_chart_space(spec, cover)?;
    let p = ChartPoint::new(parse_vector("from", from)?)?;
    let q = ChartPoint::new(parse_vector("to", to)?)?;
    let sep = separation(&space, &p, &q, &SeparationConfig::default())?;
    let oracle_length = if oracle {
        let cfg = OracleConfig { seed, ..OracleConfig::default() };
        Some(polyline_oracle(&space, &p, &q, &cfg)?.length)
    } else {
        None
    };
    match format {
        OutputFormat::Text => {
            match sep.status {
                SeparationStatus::SamePoint | SeparationStatus::Finite => {
                    println!("FINITE {}", sep.value.unwrap_or(0.0));
                    if let Some(t) = sep.tau_star {
                        println!("tau_star {t}");
                    }
                    if let Some(dir) = &sep.initial_direction {
                        let comps: Vec<String> =
                            dir.components().iter().map(|c| c.to_string()).collect();
                        println!("direction {}", comps.join(","));
                    }
                }
                SeparationStatus::Unreachable { capped } => {
                    println!("UNREACHABLE");
                    println!("capped {capped}");
                }
            }
            if let Some(length) = oracle_length {
                match length {
                    Some(v) => println!("oracle {v}"),
                    None => println!("oracle UNREACHABLE"),
                }
            }
        }
        OutputFormat::Json => {
            let mut obj = serde_json::Map::new();
            let status = match sep.status {
                SeparationStatus::SamePoint | SeparationStatus::Finite => "FINITE",
                SeparationStatus::Unreachable { .. } => "UNREACHABLE",
            };
            obj.insert("status".into(), status.into());
            obj.insert(
                "value".into(),
                sep.value.map_or(serde_json::Value::Null, |v| v.into()),
            );
            obj.insert(
                "tau_star".into(),
                sep.tau_star.map_or(serde_json::Value::Null, |v| v.into()),
            );
            obj.insert(
                "direction".into(),
                sep.initial_direction.as_ref().map_or(serde_json::Value::Null, |d| {
                    d.components().iter().copied().collect::<Vec<f64>>().into()
                }),
            );
            if let SeparationStatus::Unreachable { capped } = sep.status {
                obj.insert("capped".into(), capped.into());
            }
            obj.insert("evaluations".into(), sep.evaluations.into());
            if let Some(length) = oracle_length {
                obj.insert(
                    "oracle".into(),
                    length.map_or(serde_json::Value::Null, |v| v.into()),
                );
            }
            println!("{}", serde_json::Value::Object(obj));
        }
    }
    Ok(())
}

fn run_cutlocus(
    spec: &str,
    point: &str,
    samples: usize,
    cover: bool,
    plane: &str,
    out: &Path,
) -> Result<()> {
    let space = load_chart_space(spec, cover)?;
    let plane = parse_plane(plane, space.dim())?;
    let p = ChartPoint::new(parse_vector("point", point)?)?;
    let curve = cut_locus(&space, &p, samples)?;
    let csv = render::csv_cut_locus(&curve);
    let pts: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .map(|s| (s.coords()[plane.0], s.coords()[plane.1]))
        .collect();
    let guides = render::plane_guides(space.topology(), plane);
    let svg = render::svg_chart(&pts, false, &guides);
    write_with_svg(out, &csv, &svg)
}

/// Probe points of the chart, projected onto the space's constraint set.
fn projected_probes(space: &SpaceDefinition) -> Vec<DVector<f64>> {
    probe_grid(space.topology())
        .into_iter()
        .map(|mut x| {
            let mut v = DVector::zeros(x.len());
            space.project_state(&mut x, &mut v);
            x
        })
        .collect()
}

fn run_check(spec: &str, killing: bool, projective: bool, closedform: bool) -> Result<()> {
    let space = parse_space_spec(spec)?;
    let all = !(killing || projective || closedform);
    if killing || all {
        check_killing(&space)?;
    }
    if projective || all {
        check_projective(&space)?;
    }
    if closedform || all {
        check_closed_form(&space)?;
    }
    Ok(())
}

fn check_killing(space: &SpaceDefinition) -> Result<()> {
    let probes = projected_probes(space);
    let diag = field_diagnostics(space.metric(), space.wind(), &probes)?;
    let pass = diag.unit_deviation <= TOL_DOC_UNIT && diag.killing_residual <= TOL_DOC_KILLING;
    println!(
        "killing unit_deviation={:.3e} isometry_residual={:.3e} verdict={}",
        diag.unit_deviation,
        diag.killing_residual,
        if pass { "pass" } else { "fail" }
    );
    Ok(())
}

fn check_projective(space: &SpaceDefinition) -> Result<()> {
    let probes = projected_probes(space);
    let ab = to_alpha_beta(space.nav(), ScalarField::constant(space.dim(), 0.0), &probes)?;
    let chart_probes: Vec<ChartPoint> = probes
        .iter()
        .map(|x| ChartPoint::new(x.clone()))
        .collect::<Result<_>>()?;
    let (parallel, residual) = projective_equivalence_verdict(&ab, &chart_probes)?;
    println!(
        "projective parallel={} max_residual={:.3e} straight_geodesics={}",
        parallel,
        residual,
        if parallel { "yes" } else { "no" }
    );
    Ok(())
}

/// Deterministic admissible test tangents over the probe set.
fn check_tangents(space: &SpaceDefinition, count: usize) -> Result<Vec<Tangent>> {
    let probes = projected_probes(space);
    let mut out = Vec::with_capacity(count);
    for (i, probe) in probes.iter().enumerate().take(count) {
        let n = probe.len();
        let mut x = probe.clone();
        let mut v = space.wind().at(&x)?;
        for k in 0..n {
            v[k] += 0.3 * ((1 + i + 2 * k) as f64).cos() / (n as f64).sqrt();
        }
        space.project_state(&mut x, &mut v);
        out.push(Tangent::new(ChartPoint::new(x)?, v)?);
    }
    Ok(out)
}

fn check_closed_form(space: &SpaceDefinition) -> Result<()> {
    if space.model() == ModelKind::Custom {
        return Err(Error::NotModelSpace);
    }
    let tangents = check_tangents(space, 3)?;
    let mut geodesic_gap: f64 = 0.0;
    for y in &tangents {
        let closed = kropina_geodesic(space, y, 2.0, &IntegrationConfig::default())?;
        let numeric = kropina_geodesic(space, y, 2.0, &IntegrationConfig::numerical(1024))?;
        geodesic_gap = geodesic_gap.max((closed.end_point() - numeric.end_point()).norm());
    }

    let probes = projected_probes(space);
    let cfg = SeparationConfig::default();
    let mut distance_gap: f64 = 0.0;
    let mut compared = 0usize;
    for pair in probes.windows(2).take(6) {
        let p = ChartPoint::new(pair[0].clone())?;
        let q = ChartPoint::new(pair[1].clone())?;
        let reference = closed_form_distance(space, &p, &q)?;
        let sep = separation(space, &p, &q, &cfg)?;
        match (reference, sep.value) {
            (ClosedFormDistance::Finite(r), Some(v)) => {
                distance_gap = distance_gap.max((r - v).abs());
                compared += 1;
            }
            (ClosedFormDistance::Unreachable, None) => {}
            (ClosedFormDistance::Finite(_), None) | (ClosedFormDistance::Unreachable, Some(_)) => {
                distance_gap = f64::INFINITY;
            }
        }
        if compared >= 3 {
            break;
        }
    }
    let pass = geodesic_gap <= 1e-6 && distance_gap <= 1e-6;
    println!(
        "closedform geodesic_gap={:.3e} distance_gap={:.3e} verdict={}",
        geodesic_gap,
        distance_gap,
        if pass { "pass" } else { "fail" }
    );
    Ok(())
}
