//! Heteroscedasticity-consistent coefficient covariances.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DesignMatrix, FitMethod, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VcovKind {
    #[default]
    Classical,
    Hc0,
    Hc1,
    Hc2,
    Hc3,
    Hc4,
    Hc5,
    Gls,
}

impl VcovKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VcovKind::Classical => "classical",
            VcovKind::Hc0 => "hc0",
            VcovKind::Hc1 => "hc1",
            VcovKind::Hc2 => "hc2",
            VcovKind::Hc3 => "hc3",
            VcovKind::Hc4 => "hc4",
            VcovKind::Hc5 => "hc5",
            VcovKind::Gls => "gls",
        }
    }
}

impl fmt::Display for VcovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VcovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use clap::ValueEnum;
        <VcovKind as ValueEnum>::from_str(s, true)
            .map_err(|_| Error::InvalidParameter(format!("unknown covariance kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcovSpec {
    pub kind: VcovKind,
    /// Leverage-discount constant for HC5.
    pub hc5_k: f64,
}

impl VcovSpec {
    pub const DEFAULT_HC5_K: f64 = 0.7;

    pub fn new(kind: VcovKind) -> Self {
        Self { kind, hc5_k: Self::DEFAULT_HC5_K }
    }
}

impl Default for VcovSpec {
    fn default() -> Self {
        Self::new(VcovKind::Classical)
    }
}

/// Sandwich covariance `(XᵀX)⁻¹ Xᵀ diag(ω) X (XᵀX)⁻¹` for an OLS fit of `x`.
///
/// With residuals `e`, leverages `h`, mean leverage `h̄ = k/n`:
///
/// | kind | ω |
/// |------|---|
/// | hc0  | e² |
/// | hc1  | e²·n/(n−k) |
/// | hc2  | e²/(1−h) |
/// | hc3  | e²/(1−h)² |
/// | hc4  | e²/(1−h)^δ, δ = min(4, h/h̄) |
/// | hc5  | e²/√((1−h)^δ), δ = min(h/h̄, max(4, k₅·h_max/h̄)) |
///
/// `classical` returns the fit's own covariance.
pub fn sandwich_vcov(fit: &FitResult, x: &DesignMatrix, spec: VcovSpec) -> Result<DMatrix<f64>> {
    match spec.kind {
        VcovKind::Classical => return Ok(fit.vcov.clone()),
        VcovKind::Gls => {
            return Err(Error::InvalidParameter("gls is not a sandwich covariance kind".into()))
        }
        _ => {}
    }
    if fit.method != FitMethod::Ols {
        return Err(Error::Unsupported("sandwich covariances need an OLS fit".into()));
    }
    let xk = x.x.select_columns(&fit.kept);
    let n = fit.n as f64;
    let k = fit.k as f64;
    let h = &fit.leverages;
    let h_bar = k / n;
    let h_max = h.max();

    let mut omega = Vec::with_capacity(fit.n);
    for (i, (&e, &hi)) in fit.residuals.iter().zip(h.iter()).enumerate() {
        let e2 = e * e;
        let one_minus = 1.0 - hi;
        let needs_discount = !matches!(spec.kind, VcovKind::Hc0 | VcovKind::Hc1);
        if needs_discount && one_minus <= 1e-10 {
            return Err(Error::UnitLeverage { unit: i, kind: spec.kind.to_string() });
        }
        let w = match spec.kind {
            VcovKind::Hc0 => e2,
            VcovKind::Hc1 => e2 * n / (n - k),
            VcovKind::Hc2 => e2 / one_minus,
            VcovKind::Hc3 => e2 / (one_minus * one_minus),
            VcovKind::Hc4 => e2 / one_minus.powf((hi / h_bar).min(4.0)),
            VcovKind::Hc5 => {
                let delta = (hi / h_bar).min((spec.hc5_k * h_max / h_bar).max(4.0));
                e2 / one_minus.powf(delta).sqrt()
            }
            VcovKind::Classical | VcovKind::Gls => unreachable!(),
        };
        omega.push(w);
    }

    let mut meat = DMatrix::zeros(fit.k, fit.k);
    for (i, &w) in omega.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = xk.row(i);
        meat += row.transpose() * row * w;
    }
    let v = &fit.xtx_inv * meat * &fit.xtx_inv;
    Ok((&v + v.transpose()) * 0.5)
}
