//! Generalized least squares with network-correlated errors,
//! `Var(ε) = σ²(I + θG)` for a symmetric interference graph `G`.
//!
//! With `G = UΛUᵀ`, rotating the design and outcome by `Uᵀ` turns the model
//! into weighted least squares with weights `1/(1 + θλᵢ)`, so each likelihood
//! evaluation costs `O(nk²)` after one eigendecomposition. `σ²` is profiled
//! out in closed form and `θ` is maximized over the interval where
//! `I + θG` is positive definite, `(−1/λ_max, −1/λ_min)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;

use super::qr::OrderedQr;
use super::{factor_design, profile_loglik, DesignMatrix, FitMethod, FitResult};

const GOLDEN_TOL: f64 = 1e-6;
const GRID_POINTS: usize = 5;

struct Rotated {
    lambda: Vec<f64>,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Rotated {
    fn new(g: &AdjacencyMatrix, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let n = g.n();
        let dense = g.to_dense();
        let gf = faer::Mat::<f64>::from_fn(n, n, |i, j| dense[(i, j)]);
        let evd = gf
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let u = evd.U();
        let s = evd.S().column_vector();
        let lambda = (0..n).map(|i| s[i]).collect();

        let k = x.ncols();
        let rhs = faer::Mat::<f64>::from_fn(n, k + 1, |i, j| if j < k { x[(i, j)] } else { y[i] });
        let rot = u.transpose() * rhs;
        Ok(Self {
            lambda,
            x: DMatrix::from_fn(n, k, |i, j| rot[(i, j)]),
            y: DVector::from_fn(n, |i, _| rot[(i, k)]),
        })
    }

    fn interval(&self) -> Option<(f64, f64)> {
        let max = self.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.lambda.iter().copied().fold(f64::INFINITY, f64::min);
        (max > 0.0 && min < 0.0).then(|| (-1.0 / max, -1.0 / min))
    }

    /// Weighted fit at `θ`: (coefficients, weighted RSS, ½ log det(I + θG), QR).
    fn weighted(&self, theta: f64) -> Option<(DVector<f64>, f64, f64, OrderedQr)> {
        let n = self.lambda.len();
        let mut sqrt_w = Vec::with_capacity(n);
        let mut half_logdet = 0.0;
        for &l in &self.lambda {
            let d = 1.0 + theta * l;
            if d <= 0.0 {
                return None;
            }
            half_logdet += 0.5 * d.ln();
            sqrt_w.push(d.sqrt().recip());
        }
        let sx = DMatrix::from_fn(n, self.x.ncols(), |i, j| self.x[(i, j)] * sqrt_w[i]);
        let sy = DVector::from_fn(n, |i, _| self.y[i] * sqrt_w[i]);
        let qr = OrderedQr::factor(&sx, 0.0);
        if qr.rank() < sx.ncols() {
            return None;
        }
        let beta = qr.solve(&sy);
        let rss = (sy - sx * &beta).norm_squared();
        Some((beta, rss, half_logdet, qr))
    }

    fn loglik(&self, theta: f64, scale: f64) -> f64 {
        match self.weighted(theta) {
            Some((_, rss, half_logdet, _)) => {
                profile_loglik(rss, self.lambda.len(), half_logdet, scale)
            }
            None => f64::NEG_INFINITY,
        }
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn check_graph(g: &AdjacencyMatrix, n: usize) -> Result<()> {
    if g.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} nodes but the design has {n} rows",
            g.n()
        )));
    }
    if !g.is_symmetric() {
        return Err(Error::DirectedGraph);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    x: &DesignMatrix,
    y: &DVector<f64>,
    ols: &OrderedQr,
    beta: DVector<f64>,
    bread: DMatrix<f64>,
    sigma2: f64,
    theta: f64,
    loglik: f64,
    variance_params: usize,
) -> FitResult {
    let xk = x.x.select_columns(&ols.kept);
    let residuals = y - &xk * &beta;
    FitResult {
        method: FitMethod::Gls,
        vcov: &bread * sigma2,
        beta,
        residuals,
        leverages: ols.leverages(),
        sigma2,
        rho: sigma2 * theta,
        theta,
        loglik,
        variance_params,
        n: x.n(),
        k: ols.rank(),
        columns: ols.kept.iter().map(|&c| x.columns[c].clone()).collect(),
        kept: ols.kept.clone(),
        dropped: ols.dropped.iter().map(|&c| x.columns[c].clone()).collect(),
        xtx_inv: bread,
    }
}

/// Maximum-likelihood fit under `Var(ε) = σ²(I + θG)`.
///
/// Returns `σ̂²` (ML), `θ̂`, `rho = σ̂²θ̂` and `vcov = σ̂²(Xᵀ(I+θ̂G)⁻¹X)⁻¹`. An
/// empty graph reduces to OLS with the ML scale.
pub fn fit_gls_network(x: &DesignMatrix, y: &DVector<f64>, g: &AdjacencyMatrix) -> Result<FitResult> {
    let n = x.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("outcome has {} rows, design {n}", y.len())));
    }
    check_graph(g, n)?;
    let ols = factor_design(x)?;
    let scale = y.norm_squared();

    if g.nnz() == 0 {
        let beta = ols.solve(y);
        let xk = x.x.select_columns(&ols.kept);
        let rss = (y - xk * &beta).norm_squared();
        let loglik = profile_loglik(rss, n, 0.0, scale);
        return Ok(assemble(x, y, &ols, beta, ols.xtx_inverse(), rss / n as f64, 0.0, loglik, 1));
    }

    let xk = x.x.select_columns(&ols.kept);
    let rot = Rotated::new(g, &xk, y)?;
    let (lo, hi) = rot.interval().ok_or(Error::NoFeasibleInterval)?;
    let margin = 1e-9 * (hi - lo);
    let (lo, hi) = (lo + margin, hi - margin);

    let f = |t: f64| rot.loglik(t, scale);
    let mut best = (0.0, f(0.0));
    let step = (hi - lo) / (GRID_POINTS + 1) as f64;
    let knots: Vec<f64> = (0..=GRID_POINTS + 1).map(|i| lo + step * i as f64).collect();
    for w in knots.windows(2) {
        let (t, v) = golden_max(&f, w[0], w[1]);
        if v > best.1 {
            best = (t, v);
        }
    }
    let (theta, loglik) = best;
    let (beta, rss, _, wqr) = rot
        .weighted(theta)
        .ok_or_else(|| Error::Numerical("weighted design lost rank at the optimum".into()))?;
    Ok(assemble(x, y, &ols, beta, wqr.xtx_inverse(), rss / n as f64, theta, loglik, 2))
}

/// GLS with a known error covariance `Σ = aI + bG`; nothing is estimated
/// beyond the coefficients, and `vcov = (XᵀΣ⁻¹X)⁻¹`.
pub fn fit_gls_known(
    x: &DesignMatrix,
    y: &DVector<f64>,
    g: &AdjacencyMatrix,
    a: f64,
    b: f64,
) -> Result<FitResult> {
    let n = x.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("outcome has {} rows, design {n}", y.len())));
    }
    if !(a > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("need a > 0 and finite b, got a = {a}, b = {b}")));
    }
    check_graph(g, n)?;
    let ols = factor_design(x)?;
    let xk = x.x.select_columns(&ols.kept);
    let rot = Rotated::new(g, &xk, y)?;
    let theta = b / a;
    let (beta, rss, half_logdet, wqr) = rot
        .weighted(theta)
        .ok_or(Error::NotPositiveDefinite { a, b, family: None })?;
    let nf = n as f64;
    let loglik = -0.5 * nf * (2.0 * std::f64::consts::PI * a).ln() - half_logdet - rss / (2.0 * a);
    Ok(assemble(x, y, &ols, beta, wqr.xtx_inverse(), a, theta, loglik, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{fit_ols, Column, ColumnRole};

    fn design(n: usize) -> (DesignMatrix, DVector<f64>) {
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => ((i * 37 % 11) as f64).sqrt(),
            _ => (i as f64 * 0.37).sin(),
        });
        let y = DVector::from_fn(n, |i, _| 1.0 + x[(i, 1)] - 0.5 * x[(i, 2)] + ((i * 7919 % 13) as f64 - 6.0) * 0.1);
        let columns = vec![
            Column { name: "(Intercept)".into(), role: ColumnRole::Intercept },
            Column { name: "A".into(), role: ColumnRole::Treatment },
            Column { name: "L".into(), role: ColumnRole::Covariate },
        ];
        (DesignMatrix { x, columns, dropped: vec![] }, y)
    }

    #[test]
    fn empty_graph_reduces_to_ols() {
        let (x, y) = design(30);
        let g = AdjacencyMatrix::empty(30, false).unwrap();
        let gls = fit_gls_network(&x, &y, &g).unwrap();
        let ols = fit_ols(&x, &y).unwrap();
        assert_eq!(gls.beta, ols.beta);
        let ml = ols.residuals.norm_squared() / 30.0;
        assert!((gls.sigma2 - ml).abs() < 1e-14);
        assert!((gls.vcov.clone() - &ols.xtx_inv * ml).abs().max() < 1e-14);
        assert_eq!(gls.theta, 0.0);
    }

    #[test]
    fn directed_graph_rejected() {
        let (x, y) = design(4);
        let g = AdjacencyMatrix::from_triplets(4, [(0, 1, 1.0)], true).unwrap();
        assert!(matches!(fit_gls_network(&x, &y, &g), Err(Error::DirectedGraph)));
    }

    #[test]
    fn likelihood_not_below_ols_point() {
        let (x, y) = design(40);
        let g = crate::graph::generate_er(40, 0.1, 4, false).unwrap();
        let fit = fit_gls_network(&x, &y, &g).unwrap();
        let rot = Rotated::new(&g, &x.x, &y).unwrap();
        assert!(fit.loglik >= rot.loglik(0.0, y.norm_squared()));
        let ols = fit_ols(&x, &y).unwrap();
        // θ = 0 is the OLS likelihood
        assert!((rot.loglik(0.0, y.norm_squared()) - ols.loglik).abs() < 1e-9);
    }

    #[test]
    fn known_covariance_matches_dense_formula() {
        let (x, y) = design(25);
        let g = crate::graph::generate_er(25, 0.1, 2, false).unwrap();
        let (a, b) = (2.0, 0.3);
        let fit = fit_gls_known(&x, &y, &g, a, b).unwrap();
        let sigma = DMatrix::<f64>::identity(25, 25) * a + g.to_dense() * b;
        let si = sigma.try_inverse().unwrap();
        let xtsx = x.x.transpose() * &si * &x.x;
        let vcov = xtsx.clone().try_inverse().unwrap();
        let beta = &vcov * x.x.transpose() * &si * &y;
        assert!((fit.beta - beta).abs().max() < 1e-10);
        assert!((fit.vcov - vcov).abs().max() < 1e-10);
    }
}
