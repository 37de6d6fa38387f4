//! JSON space documents: a chart dimension, metric and wind entries as
//! expression strings, named constants, per-coordinate topology and a
//! `strong` flag requesting the unit-Killing admission checks.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dsl::{evaluate, parse_expression, Expr};
use crate::error::{Error, Result};
use crate::geometry::{field_diagnostics, halton_box, MetricField, VectorField};
use crate::space::{ModelKind, SpaceDefinition, Topology};
use crate::zermelo::NavigationData;

/// Admission threshold on |W|_h - 1 for documents marked strong.
pub const TOL_DOC_UNIT: f64 = 1e-6;
/// Admission threshold on the Killing residual for documents marked strong.
pub const TOL_DOC_KILLING: f64 = 1e-5;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TopologySpec {
    Name(String),
    Periodic { periodic: f64 },
}

impl TopologySpec {
    pub fn to_topology(&self) -> Result<Topology> {
        match self {
            TopologySpec::Name(s) if s == "unbounded" => Ok(Topology::Unbounded),
            TopologySpec::Name(s) => {
                Err(Error::Document(format!("unknown topology tag `{s}` (expected \"unbounded\" or {{\"periodic\": L}})")))
            }
            TopologySpec::Periodic { periodic } => {
                if *periodic > 0.0 && periodic.is_finite() {
                    Ok(Topology::Periodic(*periodic))
                } else {
                    Err(Error::Document(format!("periodic length must be positive, got {periodic}")))
                }
            }
        }
    }

    pub fn from_topology(t: &Topology) -> Self {
        match t {
            Topology::Unbounded => TopologySpec::Name("unbounded".into()),
            Topology::Periodic(p) => TopologySpec::Periodic { periodic: *p },
        }
    }
}

/// On-disk description of a space. `metric` is a dim x dim array of
/// expression strings, `wind` a dim array.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub dim: usize,
    pub metric: Vec<Vec<String>>,
    pub wind: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
    pub topology: Vec<TopologySpec>,
    #[serde(default)]
    pub strong: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_name: Option<String>,
}

/// A document with all expressions parsed.
pub struct CompiledDocument {
    pub dim: usize,
    pub metric: Vec<Vec<Expr>>,
    pub wind: Vec<Expr>,
    pub constants: BTreeMap<String, f64>,
    pub topology: Vec<Topology>,
    pub strong: bool,
    pub chart_name: Option<String>,
}

impl SpaceDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn compile(&self) -> Result<CompiledDocument> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Document("dim must be at least 1".into()));
        }
        if self.metric.len() != n || self.metric.iter().any(|row| row.len() != n) {
            return Err(Error::Document(format!("metric must be a {n}x{n} array of expressions")));
        }
        if self.wind.len() != n {
            return Err(Error::Document(format!("wind must have {n} entries")));
        }
        if self.topology.len() != n {
            return Err(Error::Document(format!("topology must have {n} entries")));
        }
        let metric: Vec<Vec<Expr>> = self
            .metric
            .iter()
            .map(|row| row.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let wind: Vec<Expr> =
            self.wind.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>()?;
        let topology: Vec<Topology> =
            self.topology.iter().map(|t| t.to_topology()).collect::<Result<Vec<_>>>()?;
        for e in metric.iter().flatten().chain(wind.iter()) {
            if let Some(&bad) = e.variables().iter().find(|&&i| i >= n) {
                return Err(Error::Document(format!(
                    "expression references x{} but dim is {n}",
                    bad + 1
                )));
            }
            for c in e.constants() {
                if !self.constants.contains_key(&c) {
                    return Err(Error::UnknownSymbol { name: c });
                }
            }
        }
        Ok(CompiledDocument {
            dim: n,
            metric,
            wind,
            constants: self.constants.clone(),
            topology,
            strong: self.strong,
            chart_name: self.chart_name.clone(),
        })
    }
}

/// Probe grid for document validation: Halton points, one period along
/// periodic coordinates and [-1, 1] along unbounded ones.
pub fn probe_grid(topology: &[Topology]) -> Vec<DVector<f64>> {
    let dim = topology.len();
    let count = 5usize.pow(dim.min(3) as u32);
    let (lo, hi): (Vec<f64>, Vec<f64>) = topology
        .iter()
        .map(|t| match t {
            Topology::Periodic(p) => (0.0, *p),
            Topology::Unbounded => (-1.0, 1.0),
        })
        .unzip();
    halton_box(dim, count, &lo, &hi)
}

impl CompiledDocument {
    fn eval_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let vars: Vec<f64> = x.iter().copied().collect();
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = evaluate(&self.metric[i][j], &vars, &self.constants)?;
            }
        }
        Ok(m)
    }

    fn eval_wind(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let vars: Vec<f64> = x.iter().copied().collect();
        let mut w = DVector::zeros(self.dim);
        for i in 0..self.dim {
            w[i] = evaluate(&self.wind[i], &vars, &self.constants)?;
        }
        Ok(w)
    }

    /// Build the runnable space, validating on the probe grid: expressions
    /// must evaluate, the metric must be symmetric positive definite, and
    /// for `strong` documents the wind must be h-unit within 1e-6 and
    /// Killing within 1e-5.
    pub fn into_space(self, fallback_name: &str) -> Result<SpaceDefinition> {
        let probes = probe_grid(&self.topology);
        for x in &probes {
            let m = self.eval_matrix(x)?;
            let mut asym = 0.0f64;
            for i in 0..self.dim {
                for j in (i + 1)..self.dim {
                    asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
                }
            }
            if asym > crate::geometry::TOL_SYM {
                return Err(Error::NotSymmetric { asymmetry: asym });
            }
            if m.cholesky().is_none() {
                return Err(Error::NotPositiveDefinite);
            }
            self.eval_wind(x)?;
        }
        let name =
            self.chart_name.clone().unwrap_or_else(|| fallback_name.to_string());
        let dim = self.dim;
        let doc = std::sync::Arc::new(self);
        let metric = {
            let doc = doc.clone();
            MetricField::new(dim, move |x| {
                doc.eval_matrix(x).unwrap_or_else(|_| DMatrix::from_element(dim, dim, f64::NAN))
            })
        };
        let wind = {
            let doc = doc.clone();
            VectorField::new(dim, move |x| {
                doc.eval_wind(x).unwrap_or_else(|_| DVector::from_element(dim, f64::NAN))
            })
        };
        if doc.strong {
            let diag = field_diagnostics(&metric, &wind, &probes)?;
            if diag.unit_deviation > TOL_DOC_UNIT {
                return Err(Error::NotUnitWind {
                    deviation: diag.unit_deviation,
                    tolerance: TOL_DOC_UNIT,
                });
            }
            if diag.killing_residual > TOL_DOC_KILLING {
                return Err(Error::NotKilling {
                    residual: diag.killing_residual,
                    tolerance: TOL_DOC_KILLING,
                });
            }
        }
        let nav = NavigationData::new(metric, wind)?;
        SpaceDefinition::new(name, nav, doc.topology.clone()).map(|s| s.with_model(ModelKind::Custom))
    }
}

/// Load and validate a space document from a file.
pub fn load_space(path: &Path) -> Result<SpaceDefinition> {
    let doc = SpaceDocument::from_file(path)?;
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("space");
    doc.compile()?.into_space(fallback)
}

/// Load and validate a space document from a JSON string.
pub fn load_space_from_json(text: &str, name: &str) -> Result<SpaceDefinition> {
    SpaceDocument::from_json(text)?.compile()?.into_space(name)
}
