//! Zermelo navigation layer: the conic Kropina metric F = |y|_h^2 / (2 h(y, W))
//! induced by a Riemannian metric h and an h-unit wind W, and the equivalent
//! alpha-beta presentation F = a(y,y) / b(y) with a = exp(-kappa) h,
//! b_i = 2 exp(-kappa) h_ij W^j, kappa = log(4 / |b|_a^2).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    field_diagnostics, inner_raw, norm_raw, MetricField, ScalarField, Tangent, VectorField, TOL_UNIT,
};

/// Maximum tolerated |kappa - log(4/b^2)| for alpha-beta data.
pub const TOL_KAPPA: f64 = 1e-10;
/// Indicatrix identity tolerance: |y|_h^2 = 2 h(y,W)  iff  |y - W|_h = 1.
pub const TOL_INDICATRIX: f64 = 1e-10;

/// Admissibility threshold for a tangent with squared h-norm `alpha2`.
pub fn admissibility_threshold(alpha2: f64) -> f64 {
    1e-12 * alpha2 + 1e-300
}

/// Navigation data: Riemannian metric h and h-unit wind W.
#[derive(Clone)]
pub struct NavigationData {
    h: MetricField,
    wind: VectorField,
}

impl NavigationData {
    /// Construct without sample validation. Callers providing closed-form
    /// model data use this; untrusted data should go through `validated`.
    pub fn new(h: MetricField, wind: VectorField) -> Result<Self> {
        if h.dim() != wind.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: wind.dim() });
        }
        Ok(NavigationData { h, wind })
    }

    /// Construct and enforce |W|_h = 1 within TOL_UNIT at every sample.
    pub fn validated(h: MetricField, wind: VectorField, samples: &[DVector<f64>]) -> Result<Self> {
        let data = Self::new(h, wind)?;
        let diag = field_diagnostics(&data.h, &data.wind, samples)?;
        if diag.unit_deviation > TOL_UNIT {
            return Err(Error::NotUnitWind { deviation: diag.unit_deviation, tolerance: TOL_UNIT });
        }
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn metric(&self) -> &MetricField {
        &self.h
    }

    pub fn wind(&self) -> &VectorField {
        &self.wind
    }
}

/// Alpha-beta data: Riemannian metric a, covector field b (components b_i)
/// and the conformal exponent kappa, linked by kappa = log(4 / |b|_a^2).
#[derive(Clone)]
pub struct AlphaBetaData {
    a: MetricField,
    beta: VectorField,
    kappa: ScalarField,
}

impl AlphaBetaData {
    pub fn new(a: MetricField, beta: VectorField, kappa: ScalarField) -> Result<Self> {
        if a.dim() != beta.dim() || a.dim() != kappa.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: beta.dim() });
        }
        Ok(AlphaBetaData { a, beta, kappa })
    }

    /// Construct and enforce |b|_a^2 > 0 and kappa = log(4/|b|_a^2) within
    /// TOL_KAPPA at every sample.
    pub fn validated(
        a: MetricField,
        beta: VectorField,
        kappa: ScalarField,
        samples: &[DVector<f64>],
    ) -> Result<Self> {
        let data = Self::new(a, beta, kappa)?;
        for x in samples {
            let b2 = data.b_squared(x)?;
            if b2 <= 0.0 {
                return Err(Error::DegenerateBeta { b_squared: b2 });
            }
            let expected = (4.0 / b2).ln();
            let dev = (data.kappa.at(x)? - expected).abs();
            if dev > TOL_KAPPA {
                return Err(Error::KappaMismatch { deviation: dev });
            }
        }
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn metric(&self) -> &MetricField {
        &self.a
    }

    pub fn beta(&self) -> &VectorField {
        &self.beta
    }

    pub fn kappa(&self) -> &ScalarField {
        &self.kappa
    }

    /// |b|_a^2 = a^{ij} b_i b_j.
    pub fn b_squared(&self, x: &DVector<f64>) -> Result<f64> {
        let inv = self.a.inverse_at(x)?;
        let b = self.beta.at(x)?;
        Ok((&inv * &b).dot(&b))
    }
}

/// Value of the conic metric at a tangent vector, tagged by admissibility.
/// `beta` is h(y, W), twice the alpha-beta denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KropinaValue {
    Admissible { value: f64, beta: f64 },
    Inadmissible { beta: f64 },
}

impl KropinaValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            KropinaValue::Admissible { value, .. } => Some(*value),
            KropinaValue::Inadmissible { .. } => None,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            KropinaValue::Admissible { beta, .. } | KropinaValue::Inadmissible { beta } => *beta,
        }
    }

    pub fn is_admissible(&self) -> bool {
        matches!(self, KropinaValue::Admissible { .. })
    }
}

/// F(x, y) = |y|_h^2 / (2 h(y, W)) on the conic domain h(y, W) > 0.
pub fn kropina_value(data: &NavigationData, y: &Tangent) -> Result<KropinaValue> {
    let x = y.base().coords();
    let h = data.h.at(x)?;
    let w = data.wind.at(x)?;
    let alpha2 = inner_raw(&h, y.components(), y.components());
    let beta = inner_raw(&h, y.components(), &w);
    if beta > admissibility_threshold(alpha2) {
        Ok(KropinaValue::Admissible { value: alpha2 / (2.0 * beta), beta })
    } else {
        Ok(KropinaValue::Inadmissible { beta })
    }
}

/// Raw value from pre-evaluated h and W matrices; admissible branch only.
pub fn kropina_value_raw(h: &DMatrix<f64>, w: &DVector<f64>, y: &DVector<f64>) -> KropinaValue {
    let alpha2 = inner_raw(h, y, y);
    let beta = inner_raw(h, y, w);
    if beta > admissibility_threshold(alpha2) {
        KropinaValue::Admissible { value: alpha2 / (2.0 * beta), beta }
    } else {
        KropinaValue::Inadmissible { beta }
    }
}

/// Same metric value computed from the alpha-beta presentation:
/// F = a(y, y) / b(y). The conformal factor cancels between the two forms.
pub fn kropina_value_alpha_beta(data: &AlphaBetaData, y: &Tangent) -> Result<KropinaValue> {
    let x = y.base().coords();
    let a = data.a.at(x)?;
    let b = data.beta.at(x)?;
    let alpha2 = inner_raw(&a, y.components(), y.components());
    let beta = b.dot(y.components());
    if beta > admissibility_threshold(alpha2) {
        Ok(KropinaValue::Admissible { value: alpha2 / beta, beta })
    } else {
        Ok(KropinaValue::Inadmissible { beta })
    }
}

/// Residual of the indicatrix identity: | |y / F - W|_h - 1 |.
/// Vanishes identically on the admissible cone.
pub fn indicatrix_residual(data: &NavigationData, y: &Tangent) -> Result<f64> {
    let x = y.base().coords();
    let value = match kropina_value(data, y)? {
        KropinaValue::Admissible { value, .. } => value,
        KropinaValue::Inadmissible { beta } => {
            return Err(Error::InadmissibleTangent { what: "indicatrix argument", beta });
        }
    };
    let h = data.h.at(x)?;
    let w = data.wind.at(x)?;
    let rescaled = y.components() / value - w;
    Ok((norm_raw(&h, &rescaled) - 1.0).abs())
}

/// Navigation data from alpha-beta data: h = exp(kappa) a, W^i = a^{ij} b_j / 2.
/// The result is validated (|W|_h = 1) on the supplied samples.
pub fn to_navigation(data: &AlphaBetaData, samples: &[DVector<f64>]) -> Result<NavigationData> {
    let a = data.a.clone();
    let kappa = data.kappa.clone();
    let beta = data.beta.clone();
    let dim = data.dim();
    let h = {
        let a = a.clone();
        let kappa = kappa.clone();
        MetricField::new(dim, move |x| {
            let factor = kappa.at(x).map(|k| k.exp()).unwrap_or(f64::NAN);
            a.at(x).map(|m| m * factor).unwrap_or_else(|_| DMatrix::from_element(dim, dim, f64::NAN))
        })
    };
    let wind = {
        let a = a.clone();
        VectorField::new(dim, move |x| {
            match (a.inverse_at(x), beta.at(x)) {
                (Ok(inv), Ok(b)) => inv * b * 0.5,
                _ => DVector::from_element(dim, f64::NAN),
            }
        })
    };
    NavigationData::validated(h, wind, samples)
}

/// Alpha-beta data from navigation data and a chosen conformal exponent:
/// a = exp(-kappa) h, b_i = 2 exp(-kappa) h_ij W^j. Then |b|_a^2 = 4 exp(-kappa),
/// consistent with kappa = log(4 / |b|_a^2) for any choice of kappa.
pub fn to_alpha_beta(
    data: &NavigationData,
    kappa: ScalarField,
    samples: &[DVector<f64>],
) -> Result<AlphaBetaData> {
    if kappa.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: kappa.dim() });
    }
    let dim = data.dim();
    let a = {
        let h = data.h.clone();
        let kappa = kappa.clone();
        MetricField::new(dim, move |x| {
            let factor = kappa.at(x).map(|k| (-k).exp()).unwrap_or(f64::NAN);
            h.at(x).map(|m| m * factor).unwrap_or_else(|_| DMatrix::from_element(dim, dim, f64::NAN))
        })
    };
    let beta = {
        let h = data.h.clone();
        let wind = data.wind.clone();
        let kappa = kappa.clone();
        VectorField::new(dim, move |x| {
            match (h.at(x), wind.at(x), kappa.at(x)) {
                (Ok(hm), Ok(w), Ok(k)) => hm * w * (2.0 * (-k).exp()),
                _ => DVector::from_element(dim, f64::NAN),
            }
        })
    };
    AlphaBetaData::validated(a, beta, kappa, samples)
}

fn admissible_margin_checked(
    data: &NavigationData,
    y: &Tangent,
) -> Result<(DMatrix<f64>, DVector<f64>, f64, f64)> {
    let x = y.base().coords();
    let h = data.h.at(x)?;
    let w = data.wind.at(x)?;
    let yc = y.components();
    let alpha2 = inner_raw(&h, yc, yc);
    let beta = inner_raw(&h, yc, &w);
    if beta <= admissibility_threshold(alpha2) {
        return Err(Error::InadmissibleTangent { what: "fundamental tensor argument", beta });
    }
    if beta < 1e-6 * alpha2 {
        return Err(Error::Numerical {
            context: "fundamental_tensor",
            message: format!("admissibility margin too small: h(y,W)/|y|^2 = {:.3e}", beta / alpha2),
        });
    }
    Ok((h, w, alpha2, beta))
}

/// Fundamental tensor g_y = (1/2) Hess_y F^2 at an admissible tangent.
///
/// F^2 = A^2 / (4 B^2) is rational in y (A = |y|_h^2, B = h(y, W)), so the
/// Hessian is evaluated in closed form:
/// g_y = A/(2B^2) h + u u^T / B^2 - A/B^3 (u b^T + b u^T) + 3A^2/(4B^4) b b^T
/// with u = h y and b = h W. A difference-quotient version is kept as
/// `fundamental_tensor_fd` for cross-checks.
pub fn fundamental_tensor(data: &NavigationData, y: &Tangent) -> Result<DMatrix<f64>> {
    let (h, w, alpha2, beta) = admissible_margin_checked(data, y)?;
    let u = &h * y.components();
    let b = &h * &w;
    let uu = &u * u.transpose();
    let ub = &u * b.transpose();
    let bu = &b * u.transpose();
    let bb = &b * b.transpose();
    let b2 = beta * beta;
    let g = h * (alpha2 / (2.0 * b2))
        + uu / b2
        + (ub + bu) * (-alpha2 / (b2 * beta))
        + bb * (3.0 * alpha2 * alpha2 / (4.0 * b2 * b2));
    Ok(g)
}

/// Difference-quotient fundamental tensor with central step 1e-5 |y|_h.
/// Agrees with the closed form to a few parts in 1e6 away from the cone
/// boundary; the closed form is authoritative.
pub fn fundamental_tensor_fd(data: &NavigationData, y: &Tangent) -> Result<DMatrix<f64>> {
    let n = data.dim();
    let yc = y.components();
    let (h, w, alpha2, _) = admissible_margin_checked(data, y)?;
    let step = 1e-5 * alpha2.sqrt();
    let f2 = |u: &DVector<f64>| -> Result<f64> {
        match kropina_value_raw(&h, &w, u) {
            KropinaValue::Admissible { value, .. } => Ok(value * value),
            KropinaValue::Inadmissible { beta } => Err(Error::Numerical {
                context: "fundamental_tensor",
                message: format!("difference stencil left the conic domain (beta = {beta:.3e})"),
            }),
        }
    };
    let center = f2(yc)?;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut yp = yc.clone();
        let mut ym = yc.clone();
        yp[i] += step;
        ym[i] -= step;
        g[(i, i)] = 0.5 * (f2(&yp)? - 2.0 * center + f2(&ym)?) / (step * step);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut pp = yc.clone();
            let mut pm = yc.clone();
            let mut mp = yc.clone();
            let mut mm = yc.clone();
            pp[i] += step;
            pp[j] += step;
            pm[i] += step;
            pm[j] -= step;
            mp[i] -= step;
            mp[j] += step;
            mm[i] -= step;
            mm[j] -= step;
            let v = 0.5 * (f2(&pp)? - f2(&pm)? - f2(&mp)? + f2(&mm)?) / (4.0 * step * step);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// g_y(u, v) without forming the full tensor: (1/2) directional second
/// difference of F^2. Used by the Gauss-orthogonality check.
pub fn fundamental_inner(data: &NavigationData, y: &Tangent, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let g = fundamental_tensor(data, y)?;
    Ok((&g * v).dot(u))
}
