//! Conversion between the two on-disk descriptions of a space: the
//! navigation form (metric `h` plus wind `W`) and the conic form (scaled
//! metric `a` plus drag one-form `b`). Conversions compose the expression
//! strings textually, so the output document is again exact symbolic data.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use kropina_core::dsl::document::{probe_grid, SpaceDocument, TopologySpec};
use kropina_core::dsl::parse_expression;
use kropina_core::Error;

type Result<T> = std::result::Result<T, Error>;

/// On-disk description of conic data: `metric` holds the scaled metric
/// entries, `one_form` the drag one-form components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OneFormDocument {
    pub dim: usize,
    pub metric: Vec<Vec<String>>,
    pub one_form: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
    pub topology: Vec<TopologySpec>,
    #[serde(default)]
    pub strong: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_name: Option<String>,
}

impl OneFormDocument {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Document("dim must be at least 1".into()));
        }
        if self.metric.len() != n || self.metric.iter().any(|row| row.len() != n) {
            return Err(Error::Document(format!("metric must be a {n}x{n} array of expressions")));
        }
        if self.one_form.len() != n {
            return Err(Error::Document(format!("one_form must have {n} entries")));
        }
        if self.topology.len() != n {
            return Err(Error::Document(format!("topology must have {n} entries")));
        }
        for s in self.metric.iter().flatten().chain(self.one_form.iter()) {
            parse_expression(s)?;
        }
        Ok(())
    }

    fn eval_at(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let vars: Vec<f64> = x.iter().copied().collect();
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                a[(i, j)] =
                    kropina_core::dsl::evaluate(&parse_expression(&self.metric[i][j])?, &vars, &self.constants)?;
            }
        }
        let mut b = DVector::zeros(self.dim);
        for i in 0..self.dim {
            b[i] = kropina_core::dsl::evaluate(&parse_expression(&self.one_form[i])?, &vars, &self.constants)?;
        }
        Ok((a, b))
    }
}

fn eval_space_doc(doc: &SpaceDocument, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let vars: Vec<f64> = x.iter().copied().collect();
    let mut h = DMatrix::zeros(doc.dim, doc.dim);
    for i in 0..doc.dim {
        for j in 0..doc.dim {
            h[(i, j)] =
                kropina_core::dsl::evaluate(&parse_expression(&doc.metric[i][j])?, &vars, &doc.constants)?;
        }
    }
    let mut w = DVector::zeros(doc.dim);
    for i in 0..doc.dim {
        w[i] = kropina_core::dsl::evaluate(&parse_expression(&doc.wind[i])?, &vars, &doc.constants)?;
    }
    Ok((h, w))
}

/// Navigation form to conic form: a = e^{-kappa} h and b_i = 2 e^{-kappa}
/// h_ij W^j, composed textually with the given scale expression.
pub fn navigation_to_one_form(doc: &SpaceDocument, kappa: &str) -> Result<OneFormDocument> {
    let compiled = doc.compile()?;
    let kappa_expr = parse_expression(kappa)?;
    if let Some(&bad) = kappa_expr.variables().iter().find(|&&i| i >= doc.dim) {
        return Err(Error::Document(format!(
            "scale expression references x{} but dim is {}",
            bad + 1,
            doc.dim
        )));
    }
    for c in kappa_expr.constants() {
        if !doc.constants.contains_key(&c) {
            return Err(Error::UnknownSymbol { name: c });
        }
    }
    let _ = compiled;

    let factor = format!("exp(-({kappa}))");
    let n = doc.dim;
    let metric: Vec<Vec<String>> = (0..n)
        .map(|i| (0..n).map(|j| format!("{factor} * ({})", doc.metric[i][j])).collect())
        .collect();
    let one_form: Vec<String> = (0..n)
        .map(|i| {
            let sum = (0..n)
                .map(|j| format!("({}) * ({})", doc.metric[i][j], doc.wind[j]))
                .collect::<Vec<_>>()
                .join(" + ");
            format!("2 * {factor} * ({sum})")
        })
        .collect();

    let out = OneFormDocument {
        dim: n,
        metric,
        one_form,
        constants: doc.constants.clone(),
        topology: doc.topology.clone(),
        strong: doc.strong,
        chart_name: doc.chart_name.clone(),
    };
    out.check_shapes()?;
    Ok(out)
}

/// Symbolic determinant and adjugate of an expression matrix, closed-form up
/// to 3x3.
fn det_and_adjugate(a: &[Vec<String>]) -> Result<(String, Vec<Vec<String>>)> {
    let n = a.len();
    let e = |i: usize, j: usize| format!("({})", a[i][j]);
    match n {
        1 => Ok((e(0, 0), vec![vec!["1".to_string()]])),
        2 => {
            let det = format!("({}*{} - {}*{})", e(0, 0), e(1, 1), e(0, 1), e(1, 0));
            let adj = vec![
                vec![e(1, 1), format!("(-{})", e(0, 1))],
                vec![format!("(-{})", e(1, 0)), e(0, 0)],
            ];
            Ok((det, adj))
        }
        3 => {
            // minor(i, j): determinant after deleting row i, column j.
            let minor = |i: usize, j: usize| {
                let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
                let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
                format!("({}*{} - {}*{})", e(r[0], c[0]), e(r[1], c[1]), e(r[0], c[1]), e(r[1], c[0]))
            };
            let cof = |i: usize, j: usize| {
                if (i + j) % 2 == 0 {
                    minor(i, j)
                } else {
                    format!("(-{})", minor(i, j))
                }
            };
            let det = format!("({}*{} + {}*{} + {}*{})", e(0, 0), cof(0, 0), e(0, 1), cof(0, 1), e(0, 2), cof(0, 2));
            let adj: Vec<Vec<String>> =
                (0..3).map(|i| (0..3).map(|j| cof(j, i)).collect()).collect();
            Ok((det, adj))
        }
        _ => Err(Error::InvalidInput {
            context: "conic-to-navigation conversion",
            message: format!("symbolic matrix inversion is implemented up to dimension 3, got {n}"),
        }),
    }
}

/// Conic form back to navigation form: with s = a^{ij} b_i b_j, the metric is
/// h = (4 / s) a and the wind W^i = a^{ij} b_j / 2. The scale factor is
/// recovered implicitly (e^{-kappa} = s / 4), making the wind unit by
/// construction.
pub fn one_form_to_navigation(doc: &OneFormDocument) -> Result<SpaceDocument> {
    doc.check_shapes()?;
    let n = doc.dim;
    let (det, adj) = det_and_adjugate(&doc.metric)?;
    let b = |i: usize| format!("({})", doc.one_form[i]);

    let mut bsq_terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            bsq_terms.push(format!("({})*{}*{}", adj[i][j], b(i), b(j)));
        }
    }
    let bsq = format!("(({}) / {det})", bsq_terms.join(" + "));

    let metric: Vec<Vec<String>> = (0..n)
        .map(|i| (0..n).map(|j| format!("(4 * ({})) / {bsq}", doc.metric[i][j])).collect())
        .collect();
    let wind: Vec<String> = (0..n)
        .map(|i| {
            let sum = (0..n).map(|j| format!("({})*{}", adj[i][j], b(j))).collect::<Vec<_>>().join(" + ");
            format!("(({sum}) / (2 * {det}))")
        })
        .collect();

    let out = SpaceDocument {
        dim: n,
        metric,
        wind,
        constants: doc.constants.clone(),
        topology: doc.topology.clone(),
        strong: doc.strong,
        chart_name: doc.chart_name.clone(),
    };
    out.compile()?;

    // Numeric cross-check of the symbolic inversion on the probe grid.
    let topology: Vec<_> = doc.topology.iter().map(|t| t.to_topology()).collect::<Result<Vec<_>>>()?;
    for x in probe_grid(&topology) {
        let (a, bv) = doc.eval_at(&x)?;
        let a_inv = a.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let s = (&a_inv * &bv).dot(&bv);
        if s <= 0.0 {
            return Err(Error::DegenerateBeta { b_squared: s });
        }
        let h_want = &a * (4.0 / s);
        let w_want = &a_inv * &bv / 2.0;
        let (h_got, w_got) = eval_space_doc(&out, &x)?;
        if (&h_got - &h_want).amax() > 1e-9 * (1.0 + h_want.amax())
            || (&w_got - &w_want).amax() > 1e-9 * (1.0 + w_want.amax())
        {
            return Err(Error::Numerical {
                context: "conic-to-navigation conversion",
                message: "symbolic inversion disagrees with numeric inversion".into(),
            });
        }
    }
    Ok(out)
}
