//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Inverse by Gauss–Jordan elimination with partial pivoting, on plain rows.
pub fn gauss_jordan_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[k..].to_vec()).collect()
}

/// OLS by the normal equations: `(β, σ²(XᵀX)⁻¹)` with `σ² = RSS/(n − k)`.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, k) = x.shape();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        for a in 0..k {
            xty[a] += x[(i, a)] * y[i];
            for b in 0..k {
                xtx[a][b] += x[(i, a)] * x[(i, b)];
            }
        }
    }
    let inv = gauss_jordan_inverse(&xtx);
    let beta: Vec<f64> = (0..k).map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let rss: f64 = (0..n)
        .map(|i| {
            let fit: f64 = (0..k).map(|a| x[(i, a)] * beta[a]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    let s2 = rss / (n - k) as f64;
    let vcov = inv.iter().map(|r| r.iter().map(|v| v * s2).collect()).collect();
    (beta, vcov)
}

/// Coefficient of column `target` when regressing `y` on `x` by the normal equations.
pub fn coefficient(x: &DMatrix<f64>, y: &DVector<f64>, target: usize) -> f64 {
    normal_equations(x, y).0[target]
}
