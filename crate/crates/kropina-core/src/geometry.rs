//! Chart-level primitives: points, tangent vectors, metric and vector fields,
//! Christoffel symbols and Killing-type diagnostics for a wind field.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Base step for central finite differences; scaled by max(1, |x|_inf).
pub const EPS_FD_BASE: f64 = 1e-6;
/// Maximum tolerated asymmetry of a metric matrix.
pub const TOL_SYM: f64 = 1e-12;
/// Maximum tolerated deviation of |W|_h from 1 for a navigation wind.
pub const TOL_UNIT: f64 = 1e-8;

/// Finite-difference step at the point x.
pub fn fd_step(x: &DVector<f64>) -> f64 {
    EPS_FD_BASE * x.amax().max(1.0)
}

/// A point of the chart, dimension fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    coords: DVector<f64>,
}

impl ChartPoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite { context: "chart point coordinates" });
        }
        Ok(ChartPoint { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }
}

/// A tangent vector attached to a chart point.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    base: ChartPoint,
    components: DVector<f64>,
}

impl Tangent {
    pub fn new(base: ChartPoint, components: DVector<f64>) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: components.len() });
        }
        if !components.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite { context: "tangent components" });
        }
        Ok(Tangent { base, components })
    }

    pub fn from_slices(base: &[f64], components: &[f64]) -> Result<Self> {
        Self::new(ChartPoint::from_slice(base)?, DVector::from_column_slice(components))
    }

    pub fn base(&self) -> &ChartPoint {
        &self.base
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.components
    }
}

type MetricEval = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type MetricPartials = dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync;

/// A field of symmetric positive definite matrices h_ij(x) on the chart.
///
/// Analytic partial derivatives are optional; central differences with step
/// `fd_step(x)` are used when absent. Positive definiteness is only verified
/// where a factorization is actually requested (`inverse_at`, `check_spd`).
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    eval: Arc<MetricEval>,
    partials: Option<Arc<MetricPartials>>,
}

impl MetricField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        MetricField { dim, eval: Arc::new(eval), partials: None }
    }

    pub fn with_partials<F>(mut self, partials: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(partials));
        self
    }

    /// Constant-coefficient metric; partials are identically zero.
    pub fn constant(matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        let zeros: Vec<DMatrix<f64>> = (0..dim).map(|_| DMatrix::zeros(dim, dim)).collect();
        MetricField {
            dim,
            eval: Arc::new(move |_| matrix.clone()),
            partials: Some(Arc::new(move |_| zeros.clone())),
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::constant(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate h(x), enforcing symmetry within TOL_SYM.
    pub fn at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = (self.eval)(x);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.nrows() });
        }
        let mut asym = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if !asym.is_finite() || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "metric evaluation" });
        }
        if asym > TOL_SYM {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(m)
    }

    /// Inverse metric via Cholesky; fails if h(x) is not positive definite.
    pub fn inverse_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = self.at(x)?;
        let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(chol.inverse())
    }

    pub fn check_spd(&self, x: &DVector<f64>) -> Result<()> {
        let m = self.at(x)?;
        m.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(())
    }

    /// Partial derivatives [d h / d x^k] for k = 0..dim.
    pub fn partials_at(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        if let Some(p) = &self.partials {
            let out = p(x);
            if out.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: out.len() });
            }
            return Ok(out);
        }
        let eps = fd_step(x);
        let mut out = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += eps;
            xm[k] -= eps;
            let d = (self.at(&xp)? - self.at(&xm)?) / (2.0 * eps);
            out.push(d);
        }
        Ok(out)
    }
}

type VecEval = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A vector field on the chart.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: Arc<VecEval>,
}

impl VectorField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        VectorField { dim, eval: Arc::new(eval) }
    }

    pub fn constant(v: DVector<f64>) -> Self {
        let dim = v.len();
        VectorField { dim, eval: Arc::new(move |_| v.clone()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let v = (self.eval)(x);
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite { context: "vector field evaluation" });
        }
        Ok(v)
    }

    /// Jacobian d W^i / d x^j by central differences.
    pub fn jacobian_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let eps = fd_step(x);
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let d = (self.at(&xp)? - self.at(&xm)?) / (2.0 * eps);
            jac.set_column(j, &d);
        }
        Ok(jac)
    }
}

type ScalarEval = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;

/// A scalar field on the chart (used for conformal factors).
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: Arc<ScalarEval>,
}

impl ScalarField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        ScalarField { dim, eval: Arc::new(eval) }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        ScalarField { dim, eval: Arc::new(move |_| value) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, x: &DVector<f64>) -> Result<f64> {
        let v = (self.eval)(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { context: "scalar field evaluation" });
        }
        Ok(v)
    }

    pub fn gradient_at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let eps = fd_step(x);
        let mut g = DVector::zeros(self.dim);
        for j in 0..self.dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            g[j] = (self.at(&xp)? - self.at(&xm)?) / (2.0 * eps);
        }
        Ok(g)
    }
}

/// Inner product h_x(u, v) of two tangent vectors with a common base point.
pub fn inner(metric: &MetricField, u: &Tangent, v: &Tangent) -> Result<f64> {
    if u.base() != v.base() {
        return Err(Error::InvalidInput {
            context: "inner",
            message: "tangent vectors have different base points".into(),
        });
    }
    let h = metric.at(u.base().coords())?;
    Ok(inner_raw(&h, u.components(), v.components()))
}

/// h-inner product from a pre-evaluated metric matrix.
pub fn inner_raw(h: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (h * v).dot(u)
}

pub fn norm_raw(h: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    inner_raw(h, u, u).max(0.0).sqrt()
}

/// Christoffel symbols of the second kind at a point: `gamma(i)[(j, k)]` is
/// Gamma^i_{jk}, symmetric in (j, k) by construction.
#[derive(Clone, Debug)]
pub struct Christoffel {
    dim: usize,
    symbols: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symbol(&self, i: usize) -> &DMatrix<f64> {
        &self.symbols[i]
    }

    /// Contraction Gamma^i_{jk} u^j v^k for all i.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| (self.symbols[i].clone() * v).dot(u))
    }
}

/// Levi-Civita Christoffel symbols of the metric at x.
pub fn christoffel(metric: &MetricField, x: &DVector<f64>) -> Result<Christoffel> {
    let n = metric.dim();
    let inv = metric.inverse_at(x)?;
    let dh = metric.partials_at(x)?;
    let mut lowered = vec![DMatrix::zeros(n, n); n];
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                lowered[l][(j, k)] = 0.5 * (dh[j][(l, k)] + dh[k][(l, j)] - dh[l][(j, k)]);
            }
        }
    }
    let mut symbols = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += inv[(i, l)] * lowered[l][(j, k)];
                }
                symbols[i][(j, k)] = s;
            }
        }
    }
    Ok(Christoffel { dim: n, symbols })
}

/// Residuals of the Killing / parallel / closedness equations for a wind
/// field, together with the deviation of |W|_h from 1. All residuals are
/// max-norms over the supplied sample points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldDiagnostics {
    pub killing_residual: f64,
    pub parallel_residual: f64,
    pub closedness_residual: f64,
    pub unit_deviation: f64,
}

/// Covariant derivative matrix of the lowered field: out[(i, j)] = W_{i|j}.
fn lowered_covariant_derivative(
    metric: &MetricField,
    field: &VectorField,
    x: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = metric.dim();
    let lowered = |p: &DVector<f64>| -> Result<DVector<f64>> { Ok(metric.at(p)? * field.at(p)?) };
    let eps = fd_step(x);
    let mut plain = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += eps;
        xm[j] -= eps;
        let d = (lowered(&xp)? - lowered(&xm)?) / (2.0 * eps);
        plain.set_column(j, &d);
    }
    let gamma = christoffel(metric, x)?;
    let w_low = lowered(x)?;
    let mut cov = plain.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                cov[(i, j)] -= gamma.symbol(k)[(i, j)] * w_low[k];
            }
        }
    }
    Ok((cov, plain))
}

/// Evaluate the diagnostics over a set of sample points.
pub fn field_diagnostics(
    metric: &MetricField,
    field: &VectorField,
    samples: &[DVector<f64>],
) -> Result<FieldDiagnostics> {
    if samples.is_empty() {
        return Err(Error::InvalidInput {
            context: "field_diagnostics",
            message: "no sample points supplied".into(),
        });
    }
    let mut diag = FieldDiagnostics::default();
    for x in samples {
        let (cov, plain) = lowered_covariant_derivative(metric, field, x)?;
        let h = metric.at(x)?;
        let w = field.at(x)?;
        let n = metric.dim();
        for i in 0..n {
            for j in 0..n {
                diag.killing_residual = diag.killing_residual.max((cov[(i, j)] + cov[(j, i)]).abs());
                diag.parallel_residual = diag.parallel_residual.max(cov[(i, j)].abs());
                diag.closedness_residual =
                    diag.closedness_residual.max((plain[(i, j)] - plain[(j, i)]).abs());
            }
        }
        diag.unit_deviation = diag.unit_deviation.max((norm_raw(&h, &w) - 1.0).abs());
    }
    Ok(diag)
}

const HALTON_PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

/// Low-discrepancy (Halton) points filling the box [lo_i, hi_i]^dim.
pub fn halton_box(dim: usize, count: usize, lo: &[f64], hi: &[f64]) -> Vec<DVector<f64>> {
    assert!(dim <= HALTON_PRIMES.len(), "halton_box supports dim <= 8");
    (0..count)
        .map(|k| {
            DVector::from_fn(dim, |i, _| {
                let t = radical_inverse(k as u64 + 1, HALTON_PRIMES[i]);
                lo[i] + (hi[i] - lo[i]) * t
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn conformal_metric() -> MetricField {
        // h = exp(2 phi) * I with phi = 0.1 sin(x1) cos(x2)
        MetricField::new(2, |x: &DVector<f64>| {
            let phi = 0.1 * x[0].sin() * x[1].cos();
            DMatrix::identity(2, 2) * (2.0 * phi).exp()
        })
    }

    #[test]
    fn christoffel_matches_conformal_closed_form() {
        // For h = exp(2 phi) delta: Gamma^i_jk = d_j phi d^i_k + d_k phi d^i_j - d_i phi d_jk
        let h = conformal_metric();
        let x = DVector::from_column_slice(&[0.4, -0.7]);
        let gamma = christoffel(&h, &x).unwrap();
        let phi_1 = 0.1 * x[0].cos() * x[1].cos();
        let phi_2 = -0.1 * x[0].sin() * x[1].sin();
        let grad = [phi_1, phi_2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut expect = 0.0;
                    if i == k {
                        expect += grad[j];
                    }
                    if i == j {
                        expect += grad[k];
                    }
                    if j == k {
                        expect -= grad[i];
                    }
                    assert_abs_diff_eq!(gamma.symbol(i)[(j, k)], expect, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let h = conformal_metric();
        let x = DVector::from_column_slice(&[-1.2, 0.3]);
        let gamma = christoffel(&h, &x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(gamma.symbol(i)[(j, k)], gamma.symbol(i)[(k, j)]);
                }
            }
        }
    }

    #[test]
    fn metric_compatibility_via_product_rule() {
        // d_k h(U, V) = h(nabla_k U, V) + h(U, nabla_k V) for constant-component U, V.
        let h = conformal_metric();
        let x = DVector::from_column_slice(&[0.9, 0.2]);
        let u = DVector::from_column_slice(&[0.3, -1.1]);
        let v = DVector::from_column_slice(&[0.8, 0.5]);
        let gamma = christoffel(&h, &x).unwrap();
        let dh = h.partials_at(&x).unwrap();
        let hm = h.at(&x).unwrap();
        for k in 0..2 {
            let lhs = inner_raw(&dh[k], &u, &v);
            let ek = DVector::from_fn(2, |i, _| if i == k { 1.0 } else { 0.0 });
            let du = gamma.contract(&ek, &u);
            let dv = gamma.contract(&ek, &v);
            let rhs = inner_raw(&hm, &du, &v) + inner_raw(&hm, &u, &dv);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 10.0 * EPS_FD_BASE);
        }
    }

    #[test]
    fn rotation_field_is_killing_not_parallel() {
        // W(x) = J x on R^4 with J the block rotation generator.
        let j = DMatrix::from_row_slice(4, 4, &[
            0.0, -1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 1.0, 0.0,
        ]);
        let w = {
            let j = j.clone();
            VectorField::new(4, move |x: &DVector<f64>| &j * x)
        };
        let h = MetricField::euclidean(4);
        // Samples on the unit sphere so that |W|_h = |x| = 1.
        let raw = halton_box(4, 12, &[-1.0; 4], &[1.0; 4]);
        let samples: Vec<DVector<f64>> =
            raw.into_iter().filter(|x| x.norm() > 0.3).map(|x| x.normalize()).collect();
        let diag = field_diagnostics(&h, &w, &samples).unwrap();
        assert!(diag.killing_residual <= 1e-8, "killing {}", diag.killing_residual);
        assert!(diag.closedness_residual > 0.1);
        assert!(diag.parallel_residual > 0.1);
        assert!(diag.unit_deviation <= 1e-8);
    }

    #[test]
    fn constant_field_diagnostics_vanish() {
        let h = MetricField::euclidean(2);
        let w = VectorField::constant(DVector::from_column_slice(&[1.0, 0.0]));
        let samples = halton_box(2, 9, &[-1.0; 2], &[1.0; 2]);
        let diag = field_diagnostics(&h, &w, &samples).unwrap();
        assert!(diag.killing_residual <= 1e-12);
        assert!(diag.parallel_residual <= 1e-12);
        assert!(diag.closedness_residual <= 1e-12);
        assert!(diag.unit_deviation <= 1e-12);
    }

    #[test]
    fn non_spd_metric_rejected() {
        let h = MetricField::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        let x = DVector::zeros(2);
        assert!(matches!(h.inverse_at(&x), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn asymmetric_metric_rejected() {
        let h = MetricField::new(2, |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]));
        let x = DVector::zeros(2);
        assert!(matches!(h.at(&x), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn inner_requires_common_base() {
        let h = MetricField::euclidean(2);
        let u = Tangent::from_slices(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let v = Tangent::from_slices(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(inner(&h, &u, &v).is_err());
        let w = Tangent::from_slices(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(inner(&h, &u, &w).unwrap(), 2.0);
    }

    #[test]
    fn halton_points_fill_box() {
        let pts = halton_box(2, 25, &[-1.0, -1.0], &[1.0, 1.0]);
        assert_eq!(pts.len(), 25);
        assert!(pts.iter().all(|p| p.amax() <= 1.0));
        // Not all clustered: spread across quadrants.
        let q1 = pts.iter().filter(|p| p[0] > 0.0 && p[1] > 0.0).count();
        assert!(q1 >= 3 && q1 <= 22);
    }
}
