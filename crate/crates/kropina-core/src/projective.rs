//! Covariant-derivative diagnostics of the drag one-form: whether the
//! one-form is parallel for its metric, the equivalent statement on the
//! navigation side (parallel wind, constant scale), and the spray correction
//! that must vanish exactly when geodesics of the conic metric trace the same
//! point sets as the metric ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{christoffel, fd_step, ChartPoint, ScalarField, Tangent};
use crate::zermelo::{AlphaBetaData, NavigationData};

/// Residual bound under which the one-form counts as parallel.
pub const TOL_PROJ: f64 = 1e-7;

/// Per-sample covariant derivative of the one-form with its exact
/// symmetric/antisymmetric split.
#[derive(Clone, Debug)]
pub struct BetaDerivativeReport {
    /// b_{i;j} per sample, row i, column j.
    pub b_cov: Vec<DMatrix<f64>>,
    /// Symmetric parts.
    pub r: Vec<DMatrix<f64>>,
    /// Antisymmetric parts.
    pub s: Vec<DMatrix<f64>>,
    /// Contractions s_j = b^i s_ij per sample.
    pub s_lower: Vec<DVector<f64>>,
    /// max |b_{i;j}| over all samples.
    pub max_residual: f64,
}

/// Split m into (sym, antisym) so that sym + antisym == m holds exactly in
/// floating point and both parts have exact symmetry.
fn split_exact(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        sym[(i, i)] = m[(i, i)];
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    let antisym = m - &sym;
    (sym, antisym)
}

/// Covariant derivative of a one-form field at x for the given metric:
/// M[(i, j)] = partial_j omega_i - Gamma^k_{ij} omega_k.
fn covariant_derivative_one_form(
    metric: &crate::geometry::MetricField,
    omega: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = metric.dim();
    let eps = fd_step(x);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += eps;
        xm[j] -= eps;
        let d = (omega(&xp)? - omega(&xm)?) / (2.0 * eps);
        for i in 0..n {
            m[(i, j)] = d[i];
        }
    }
    let gamma = christoffel(metric, x)?;
    let w = omega(x)?;
    for i in 0..n {
        for j in 0..n {
            let mut corr = 0.0;
            for k in 0..n {
                corr += gamma.symbol(k)[(i, j)] * w[k];
            }
            m[(i, j)] -= corr;
        }
    }
    Ok(m)
}

/// Covariant derivatives of the drag one-form at the given samples, with the
/// symmetric/antisymmetric split and its contraction against the raised
/// one-form.
pub fn beta_derivatives(ab: &AlphaBetaData, samples: &[ChartPoint]) -> Result<BetaDerivativeReport> {
    let beta = ab.beta().clone();
    let omega = move |x: &DVector<f64>| beta.at(x);
    let mut b_cov = Vec::with_capacity(samples.len());
    let mut r = Vec::with_capacity(samples.len());
    let mut s = Vec::with_capacity(samples.len());
    let mut s_lower = Vec::with_capacity(samples.len());
    let mut max_residual = 0.0f64;
    for p in samples {
        let x = p.coords();
        let m = covariant_derivative_one_form(ab.metric(), &omega, x)?;
        max_residual = max_residual.max(m.amax());
        let (sym, antisym) = split_exact(&m);
        let a_inv = ab.metric().inverse_at(x)?;
        let b_up = &a_inv * ab.beta().at(x)?;
        // s_j = b^i s_ij: contract the raised one-form into the row index.
        let sj = DVector::from_fn(m.nrows(), |j, _| antisym.column(j).dot(&b_up));
        b_cov.push(m);
        r.push(sym);
        s.push(antisym);
        s_lower.push(sj);
    }
    Ok(BetaDerivativeReport { b_cov, r, s, s_lower, max_residual })
}

/// True when the one-form is parallel on the samples (all covariant
/// derivatives below TOL_PROJ), along with the largest residual seen.
pub fn projective_equivalence_verdict(ab: &AlphaBetaData, samples: &[ChartPoint]) -> Result<(bool, f64)> {
    let report = beta_derivatives(ab, samples)?;
    Ok((report.max_residual <= TOL_PROJ, report.max_residual))
}

/// The direction-dependent spray correction at (x, y). It vanishes
/// identically exactly when the one-form is parallel, which is what makes
/// the conic geodesics trace metric geodesics; evaluated here only as a
/// verification quantity.
pub fn spray_correction(ab: &AlphaBetaData, y: &Tangent) -> Result<DVector<f64>> {
    let x = y.base().coords();
    let yc = y.components();
    let a = ab.metric().at(x)?;
    let a_inv = ab.metric().inverse_at(x)?;
    let b = ab.beta().at(x)?;
    let alpha2 = (&a * yc).dot(yc);
    let beta = b.dot(yc);
    let b_up = &a_inv * &b;
    let b2 = b_up.dot(&b);
    if beta.abs() < 1e-14 {
        return Err(Error::DegenerateBeta { b_squared: b2 });
    }
    if alpha2 <= 0.0 || b2 <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let single = [ChartPoint::new(x.clone())?];
    let report = beta_derivatives(ab, &single)?;
    let r00 = (&report.r[0] * yc).dot(yc);
    let s0 = report.s_lower[0].dot(yc);
    let si0 = &a_inv * (&report.s[0] * yc);
    let common = beta * r00 + alpha2 * s0;
    Ok(yc * (-common / (b2 * alpha2)) - si0 * (alpha2 / (2.0 * beta)) + b_up * (common / (2.0 * b2 * beta)))
}

/// Navigation-side derivative data: split covariant derivative of the
/// lowered wind, the scale gradient, and the residual of the conversion
/// identities tying them to the one-form derivatives.
#[derive(Clone, Debug)]
pub struct NavDerivativeReport {
    /// Symmetric part of W_{i|j} per sample.
    pub r_wind: Vec<DMatrix<f64>>,
    /// Antisymmetric part of W_{i|j} per sample.
    pub s_wind: Vec<DMatrix<f64>>,
    /// Gradient of the scale function per sample.
    pub kappa_grad: Vec<DVector<f64>>,
    /// max |W_{i|j}| over all samples.
    pub max_w_residual: f64,
    /// Largest deviation in the identities linking (r, s) of the converted
    /// one-form data to (r_wind, s_wind, kappa_grad).
    pub identity_residual: f64,
}

/// Covariant derivative of the lowered wind and the cross-check of the
/// conversion identities: with a = e^{-kappa} h and b = 2 e^{-kappa} W-flat,
///   r_ij = 2 e^{-kappa} (R_ij - (W^r kappa_r / 2) h_ij)
///   s_ij = 2 e^{-kappa} (S_ij + (kappa_i W_j - kappa_j W_i) / 2).
pub fn navigation_parallel_residual(
    nav: &NavigationData,
    kappa: &ScalarField,
    samples: &[ChartPoint],
) -> Result<NavDerivativeReport> {
    if kappa.dim() != nav.dim() {
        return Err(Error::DimensionMismatch { expected: nav.dim(), got: kappa.dim() });
    }
    let raw: Vec<DVector<f64>> = samples.iter().map(|p| p.coords().clone()).collect();
    let ab = crate::zermelo::to_alpha_beta(nav, kappa.clone(), &raw)?;
    let one_form = beta_derivatives(&ab, samples)?;

    let h_field = nav.metric().clone();
    let wind = nav.wind().clone();
    let lowered = move |x: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(h_field.at(x)? * wind.at(x)?)
    };

    let mut r_wind = Vec::with_capacity(samples.len());
    let mut s_wind = Vec::with_capacity(samples.len());
    let mut kappa_grad = Vec::with_capacity(samples.len());
    let mut max_w_residual = 0.0f64;
    let mut identity_residual = 0.0f64;
    for (idx, p) in samples.iter().enumerate() {
        let x = p.coords();
        let m = covariant_derivative_one_form(nav.metric(), &lowered, x)?;
        max_w_residual = max_w_residual.max(m.amax());
        let (big_r, big_s) = split_exact(&m);
        let kg = kappa.gradient_at(x)?;

        let h = nav.metric().at(x)?;
        let w_up = nav.wind().at(x)?;
        let w_low = &h * &w_up;
        let k = kappa.at(x)?;
        let scale = 2.0 * (-k).exp();
        let drift = w_up.dot(&kg);
        let r_expected = (&big_r - &h * (0.5 * drift)) * scale;
        let mut s_expected = big_s.clone();
        let n = h.nrows();
        for i in 0..n {
            for j in 0..n {
                s_expected[(i, j)] += 0.5 * (kg[i] * w_low[j] - kg[j] * w_low[i]);
            }
        }
        s_expected *= scale;
        identity_residual = identity_residual
            .max((&one_form.r[idx] - &r_expected).amax())
            .max((&one_form.s[idx] - &s_expected).amax());

        r_wind.push(big_r);
        s_wind.push(big_s);
        kappa_grad.push(kg);
    }
    Ok(NavDerivativeReport { r_wind, s_wind, kappa_grad, max_w_residual, identity_residual })
}
