//! Linear model fitting on augmented designs.

mod design;
mod gls;
mod qr;
mod sandwich;

pub use design::{
    build_degree_design, build_design, Column, ColumnRole, DesignMatrix, DesignOptions, DesignSpec,
};
pub use gls::{fit_gls_known, fit_gls_network};
pub use sandwich::{sandwich_vcov, VcovKind, VcovSpec};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use qr::OrderedQr;

/// Columns whose residual norm after projection on earlier columns is at or
/// below this fraction of their own norm are treated as collinear.
pub const DROP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Ols,
    Gls,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub method: FitMethod,
    /// Coefficients for `columns`, in order.
    pub beta: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub residuals: DVector<f64>,
    /// Diagonal of the ordinary hat matrix of the kept design columns.
    pub leverages: DVector<f64>,
    /// OLS: RSS/(n − rank). GLS: the maximum-likelihood scale.
    pub sigma2: f64,
    /// Network covariance weight `σ²θ` (0 for OLS).
    pub rho: f64,
    /// Network correlation parameter `θ` in `σ²(I + θG)` (0 for OLS).
    pub theta: f64,
    /// Gaussian log-likelihood at the maximum-likelihood scale.
    pub loglik: f64,
    /// Number of estimated variance parameters, counted by [`aic`].
    pub variance_params: usize,
    pub n: usize,
    pub k: usize,
    pub columns: Vec<Column>,
    /// Indices into the design's columns for each entry of `beta`.
    pub kept: Vec<usize>,
    /// Design columns dropped at fit time as collinear.
    pub dropped: Vec<Column>,
    /// `(XᵀX)⁻¹` over the kept columns.
    pub xtx_inv: DMatrix<f64>,
}

impl FitResult {
    pub fn coefficient(&self, role: ColumnRole) -> Option<(usize, f64)> {
        self.columns.iter().position(|c| c.role == role).map(|i| (i, self.beta[i]))
    }
}

/// Gaussian log-likelihood at `σ² = rss/n`, plus `-½ log det` of the
/// correlation matrix. A zero residual sum of squares gives `+∞`.
pub(crate) fn profile_loglik(rss: f64, n: usize, half_logdet: f64, scale: f64) -> f64 {
    let nf = n as f64;
    // relative to the outcome scale, a vanishing RSS is an exact fit
    if rss <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
        return f64::INFINITY;
    }
    -0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0) - half_logdet
}

pub(crate) fn factor_design(x: &DesignMatrix) -> Result<OrderedQr> {
    let qr = OrderedQr::factor(&x.x, DROP_TOL);
    let n = x.n();
    if n <= qr.rank() {
        return Err(Error::InsufficientDof { n, rank: qr.rank() });
    }
    for &d in &qr.dropped {
        if x.columns[d].role == ColumnRole::Treatment {
            return Err(Error::TreatmentCollinear(x.columns[d].name.clone()));
        }
    }
    Ok(qr)
}

/// Ordinary least squares by ordered Householder QR.
pub fn fit_ols(x: &DesignMatrix, y: &DVector<f64>) -> Result<FitResult> {
    let n = x.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("outcome has {} rows, design {n}", y.len())));
    }
    let qr = factor_design(x)?;
    let k = qr.rank();
    let beta = qr.solve(y);
    let xk = x.x.select_columns(&qr.kept);
    let residuals = y - &xk * &beta;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (n - k) as f64;
    let xtx_inv = qr.xtx_inverse();
    Ok(FitResult {
        method: FitMethod::Ols,
        vcov: &xtx_inv * sigma2,
        beta,
        leverages: qr.leverages(),
        sigma2,
        rho: 0.0,
        theta: 0.0,
        loglik: profile_loglik(rss, n, 0.0, y.norm_squared()),
        variance_params: 1,
        n,
        k,
        columns: qr.kept.iter().map(|&c| x.columns[c].clone()).collect(),
        kept: qr.kept,
        dropped: qr.dropped.iter().map(|&c| x.columns[c].clone()).collect(),
        residuals,
        xtx_inv,
    })
}

/// Akaike information criterion, counting coefficients and variance parameters.
pub fn aic(fit: &FitResult) -> Result<f64> {
    if !fit.loglik.is_finite() {
        return Err(Error::DegenerateLikelihood);
    }
    Ok(-2.0 * fit.loglik + 2.0 * (fit.k + fit.variance_params) as f64)
}
