//! Total-effect estimators built on the augmented regression.

mod quantile;

pub use quantile::normal_quantile;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::regress::{
    build_degree_design, build_design, fit_gls_known, fit_gls_network, fit_ols, sandwich_vcov,
    ColumnRole, DesignMatrix, DesignOptions, DesignSpec, FitResult, VcovKind, VcovSpec,
};

/// Relative tolerance for the positive-semidefiniteness check on coefficient covariances.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Naive,
    Full,
    Partial,
    Multi,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Full => "full",
            EstimatorKind::Partial => "partial",
            EstimatorKind::Multi => "multi",
        }
    }
}

/// A total-effect estimate with its Wald interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub estimator: EstimatorKind,
    pub psi: f64,
    pub se: f64,
    /// `(lower, upper)` at level `1 − alpha`.
    pub ci: (f64, f64),
    pub alpha: f64,
    pub beta_a: f64,
    /// Spillover coefficient per network; 0 for a dropped column.
    pub beta_as: Vec<f64>,
    /// Mean weighted degree per network.
    pub f_bar: Vec<f64>,
    pub vcov: VcovKind,
    pub n: usize,
    /// Names of design columns removed as collinear.
    pub dropped: Vec<String>,
    /// Machine-readable notes, e.g. `spillover_dropped:G1:A`.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub vcov: VcovSpec,
    pub alpha: f64,
    /// Add the degree column `G_k·1` to the full design.
    pub neighbor_intercept: bool,
    pub intercept: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { vcov: VcovSpec::default(), alpha: 0.05, neighbor_intercept: false, intercept: true }
    }
}

impl EstimateOptions {
    pub fn new(vcov: VcovKind, alpha: f64) -> Self {
        Self { vcov: VcovSpec::new(vcov), alpha, ..Self::default() }
    }
}

/// An estimate together with the fit and design that produced it.
#[derive(Debug, Clone)]
pub struct Estimation {
    pub estimate: EffectEstimate,
    pub fit: FitResult,
    pub design: DesignMatrix,
}

/// `ψ̂ = β̂_a + Σ_k β̂_{a,k}·F̄_k`.
pub fn plug_in_psi(beta_a: f64, beta_as: &[f64], f_bar: &[f64]) -> Result<f64> {
    if beta_as.len() != f_bar.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} spillover coefficients for {} mean degrees",
            beta_as.len(),
            f_bar.len()
        )));
    }
    Ok(beta_a + beta_as.iter().zip(f_bar).map(|(b, f)| b * f).sum::<f64>())
}

/// `cᵀ V c` with `c = (1, F̄_1, …, F̄_K)` and `V` the covariance of
/// `(β̂_a, β̂_{a,1}, …, β̂_{a,K})`.
pub fn plug_in_variance(vcov_sub: &DMatrix<f64>, f_bar: &[f64]) -> Result<f64> {
    let k = f_bar.len() + 1;
    if vcov_sub.nrows() != k || vcov_sub.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}×{} for {} mean degrees",
            vcov_sub.nrows(),
            vcov_sub.ncols(),
            f_bar.len()
        )));
    }
    if vcov_sub.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("coefficient covariance has non-finite entries".into()));
    }
    let scale = vcov_sub.amax();
    let tol = PSD_TOL * scale;
    for i in 0..k {
        for j in 0..i {
            if (vcov_sub[(i, j)] - vcov_sub[(j, i)]).abs() > tol {
                return Err(Error::InvalidParameter("coefficient covariance is not symmetric".into()));
            }
        }
    }
    let min_eigenvalue = SymmetricEigen::new(vcov_sub.clone()).eigenvalues.min();
    if min_eigenvalue < -tol {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    let mut c = DVector::from_element(k, 1.0);
    for (i, f) in f_bar.iter().enumerate() {
        c[i + 1] = *f;
    }
    Ok((c.transpose() * vcov_sub * &c)[0].max(0.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `ψ ∓ z_{1−α/2}·√variance`.
pub fn wald_ci(psi: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be finite and ≥ 0, got {variance}")));
    }
    let half = normal_quantile(1.0 - alpha / 2.0) * variance.sqrt();
    Ok((psi - half, psi + half))
}

fn fit_with(
    design: &DesignMatrix,
    y: &DVector<f64>,
    vcov: VcovSpec,
    gls_graph: Option<&AdjacencyMatrix>,
) -> Result<(FitResult, DMatrix<f64>)> {
    if vcov.kind == VcovKind::Gls {
        let g = gls_graph
            .ok_or_else(|| Error::Unsupported("gls covariance needs a graph-based design".into()))?;
        let fit = fit_gls_network(design, y, g)?;
        let v = fit.vcov.clone();
        return Ok((fit, v));
    }
    let fit = fit_ols(design, y)?;
    let v = sandwich_vcov(&fit, design, vcov)?;
    Ok((fit, v))
}

fn dropped_names(design: &DesignMatrix, fit: &FitResult) -> Vec<String> {
    design.dropped.iter().chain(&fit.dropped).map(|c| c.name.clone()).collect()
}

/// Turn a fit of the full design into a plug-in estimate over `f_bar.len()` networks.
fn contrast_estimate(
    estimator: EstimatorKind,
    design: &DesignMatrix,
    fit: &FitResult,
    vcov: &DMatrix<f64>,
    kind: VcovKind,
    f_bar: Vec<f64>,
    alpha: f64,
) -> Result<EffectEstimate> {
    let (ia, beta_a) = fit
        .coefficient(ColumnRole::Treatment)
        .ok_or_else(|| Error::Numerical("treatment column missing from the fit".into()))?;
    let k = f_bar.len();
    let mut idx = vec![Some(ia)];
    let mut beta_as = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    for net in 0..k {
        match fit.coefficient(ColumnRole::ExposureTreatment(net)) {
            Some((i, b)) => {
                idx.push(Some(i));
                beta_as.push(b);
            }
            None => {
                let name = design
                    .dropped
                    .iter()
                    .chain(&fit.dropped)
                    .find(|c| c.role == ColumnRole::ExposureTreatment(net))
                    .map_or_else(|| format!("G{}", net + 1), |c| c.name.clone());
                warnings.push(format!("spillover_dropped:{name}"));
                idx.push(None);
                beta_as.push(0.0);
            }
        }
    }
    let sub = DMatrix::from_fn(k + 1, k + 1, |r, c| match (idx[r], idx[c]) {
        (Some(i), Some(j)) => vcov[(i, j)],
        _ => 0.0,
    });
    let psi = plug_in_psi(beta_a, &beta_as, &f_bar)?;
    let var = plug_in_variance(&sub, &f_bar)?;
    Ok(EffectEstimate {
        estimator,
        psi,
        se: var.sqrt(),
        ci: wald_ci(psi, var, alpha)?,
        alpha,
        beta_a,
        beta_as,
        f_bar,
        vcov: kind,
        n: fit.n,
        dropped: dropped_names(design, fit),
        warnings,
    })
}

fn full_fit(
    estimator: EstimatorKind,
    data: &Dataset,
    graphs: &[AdjacencyMatrix],
    opts: EstimateOptions,
) -> Result<Estimation> {
    check_alpha(opts.alpha)?;
    if graphs.is_empty() {
        return Err(Error::InvalidParameter("the full estimator needs at least one graph".into()));
    }
    let design_opts = DesignOptions { neighbor_intercept: opts.neighbor_intercept, intercept: opts.intercept };
    let design = build_design(data, graphs, DesignSpec::Full, design_opts)?;
    let (fit, vcov) = fit_with(&design, &data.outcome, opts.vcov, graphs.first())?;
    let f_bar = graphs.iter().map(|g| g.degree_summary().mean).collect();
    let estimate = contrast_estimate(estimator, &design, &fit, &vcov, opts.vcov.kind, f_bar, opts.alpha)?;
    Ok(Estimation { estimate, fit, design })
}

/// Full-information estimator with every network known.
pub fn fit_total_known(
    data: &Dataset,
    graphs: &[AdjacencyMatrix],
    opts: EstimateOptions,
) -> Result<Estimation> {
    full_fit(EstimatorKind::Full, data, graphs, opts)
}

pub fn estimate_total_known(
    data: &Dataset,
    graphs: &[AdjacencyMatrix],
    opts: EstimateOptions,
) -> Result<EffectEstimate> {
    fit_total_known(data, graphs, opts).map(|e| e.estimate)
}

/// Same computation as [`fit_total_known`], tagged as a multi-network estimate.
pub fn fit_multi_network(
    data: &Dataset,
    graphs: &[AdjacencyMatrix],
    opts: EstimateOptions,
) -> Result<Estimation> {
    full_fit(EstimatorKind::Multi, data, graphs, opts)
}

pub fn estimate_multi_network(
    data: &Dataset,
    graphs: &[AdjacencyMatrix],
    opts: EstimateOptions,
) -> Result<EffectEstimate> {
    fit_multi_network(data, graphs, opts).map(|e| e.estimate)
}

/// Full estimator under a known error covariance `Σ = aI + bG`.
pub fn fit_total_known_sigma(
    data: &Dataset,
    graph: &AdjacencyMatrix,
    a: f64,
    b: f64,
    alpha: f64,
) -> Result<Estimation> {
    check_alpha(alpha)?;
    let design = build_design(
        data,
        std::slice::from_ref(graph),
        DesignSpec::Full,
        DesignOptions::default(),
    )?;
    let fit = fit_gls_known(&design, &data.outcome, graph, a, b)?;
    let f_bar = vec![graph.degree_summary().mean];
    let estimate =
        contrast_estimate(EstimatorKind::Full, &design, &fit, &fit.vcov, VcovKind::Gls, f_bar, alpha)?;
    Ok(Estimation { estimate, fit, design })
}

/// Degree-only estimator: fits `Y ~ 1 + A + L + F` and reports
/// `ψ̂ = β̂_a(1 + F̄)`, relying on equal within-unit and spillover coefficients.
pub fn fit_partially_known(
    data: &Dataset,
    degrees: &DVector<f64>,
    opts: EstimateOptions,
) -> Result<Estimation> {
    check_alpha(opts.alpha)?;
    if let Some(d) = degrees.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter(format!("degrees must be finite and ≥ 0, found {d}")));
    }
    if opts.vcov.kind == VcovKind::Gls {
        return Err(Error::Unsupported("gls covariance needs the full graph".into()));
    }
    let design = build_degree_design(data, degrees, opts.intercept)?;
    let (fit, vcov) = fit_with(&design, &data.outcome, opts.vcov, None)?;
    let (ia, beta_a) = fit
        .coefficient(ColumnRole::Treatment)
        .ok_or_else(|| Error::Numerical("treatment column missing from the fit".into()))?;
    let f_bar = degrees.mean();
    let mut warnings = Vec::new();
    if fit.coefficient(ColumnRole::Degree(0)).is_none() {
        warnings.push("degree_dropped:F".to_string());
    }
    let psi = beta_a * (1.0 + f_bar);
    let var = (1.0 + f_bar).powi(2) * vcov[(ia, ia)].max(0.0);
    let estimate = EffectEstimate {
        estimator: EstimatorKind::Partial,
        psi,
        se: var.sqrt(),
        ci: wald_ci(psi, var, opts.alpha)?,
        alpha: opts.alpha,
        beta_a,
        beta_as: vec![beta_a],
        f_bar: vec![f_bar],
        vcov: opts.vcov.kind,
        n: fit.n,
        dropped: dropped_names(&design, &fit),
        warnings,
    };
    Ok(Estimation { estimate, fit, design })
}

pub fn estimate_partially_known(
    data: &Dataset,
    degrees: &DVector<f64>,
    opts: EstimateOptions,
) -> Result<EffectEstimate> {
    fit_partially_known(data, degrees, opts).map(|e| e.estimate)
}

/// Estimator that ignores interference: `Y ~ 1 + A + L`, `ψ̂ = β̂_a`.
pub fn fit_naive(data: &Dataset, opts: EstimateOptions) -> Result<Estimation> {
    check_alpha(opts.alpha)?;
    if opts.vcov.kind == VcovKind::Gls {
        return Err(Error::Unsupported("gls covariance needs a graph-based design".into()));
    }
    let design_opts = DesignOptions { intercept: opts.intercept, ..DesignOptions::default() };
    let design = build_design(data, &[], DesignSpec::Naive, design_opts)?;
    let (fit, vcov) = fit_with(&design, &data.outcome, opts.vcov, None)?;
    let estimate =
        contrast_estimate(EstimatorKind::Naive, &design, &fit, &vcov, opts.vcov.kind, vec![], opts.alpha)?;
    Ok(Estimation { estimate, fit, design })
}

pub fn estimate_naive(data: &Dataset, opts: EstimateOptions) -> Result<EffectEstimate> {
    fit_naive(data, opts).map(|e| e.estimate)
}

/// Expected shortfall of the conditional plug-in variance when the graph is
/// random: `−n⁻²·βᵀ Cov(W) β`, with `W_k` the total edge weight of network `k`.
///
/// A diagnostic only; reported intervals condition on the observed graph.
pub fn random_graph_variance_bias(beta_as: &[f64], w_cov: &DMatrix<f64>, n: usize) -> Result<f64> {
    let k = beta_as.len();
    if w_cov.nrows() != k || w_cov.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "total-weight covariance is {}×{} for {k} networks",
            w_cov.nrows(),
            w_cov.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let b = DVector::from_column_slice(beta_as);
    let q = (b.transpose() * w_cov * &b)[0];
    Ok(-q / (n as f64).powi(2))
}

/// `Var(W)` for an Erdős–Rényi graph with unit weights.
///
/// Directed: `n(n−1)p(1−p)`. Undirected graphs store each edge twice, so the
/// variance is `2n(n−1)p(1−p)`.
pub fn er_total_weight_variance(n: usize, p: f64, directed: bool) -> f64 {
    let pairs = (n as f64) * (n as f64 - 1.0);
    let v = pairs * p * (1.0 - p);
    if directed {
        v
    } else {
        2.0 * v
    }
}
