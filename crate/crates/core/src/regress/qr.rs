//! Householder QR that keeps columns in their given order and defers
//! (drops) any column whose residual norm after projecting out the earlier
//! kept columns falls below `tol` times its original norm.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct OrderedQr {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Columns never examined because the rank already equals the row count.
    pub exhausted: Vec<usize>,
    n: usize,
    reflectors: Vec<(DVector<f64>, f64)>,
    r: DMatrix<f64>,
}

impl OrderedQr {
    pub fn factor(x: &DMatrix<f64>, tol: f64) -> Self {
        let (n, k) = x.shape();
        let mut w = x.clone();
        let orig: Vec<f64> = (0..k).map(|c| x.column(c).norm()).collect();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut exhausted = Vec::new();
        let mut reflectors = Vec::new();

        for c in 0..k {
            let r = kept.len();
            if r == n {
                exhausted.push(c);
                continue;
            }
            let norm = w.view((r, c), (n - r, 1)).norm();
            if orig[c] == 0.0 || norm <= tol * orig[c] {
                dropped.push(c);
                continue;
            }
            let x0 = w[(r, c)];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let mut v = DVector::from_iterator(n - r, (r..n).map(|i| w[(i, c)]));
            v[0] -= alpha;
            let beta = 2.0 / v.norm_squared();
            w[(r, c)] = alpha;
            for i in r + 1..n {
                w[(i, c)] = 0.0;
            }
            for c2 in c + 1..k {
                let dot: f64 = (0..n - r).map(|i| v[i] * w[(r + i, c2)]).sum();
                let s = beta * dot;
                for i in 0..n - r {
                    w[(r + i, c2)] -= s * v[i];
                }
            }
            reflectors.push((v, beta));
            kept.push(c);
        }

        let rank = kept.len();
        let r = DMatrix::from_fn(rank, rank, |i, j| if i <= j { w[(i, kept[j])] } else { 0.0 });
        Self { kept, dropped, exhausted, n, reflectors, r }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// `Qᵀ y` over all `n` rows.
    pub fn apply_qt(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = y.clone();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            let dot: f64 = v.iter().zip(out.iter().skip(k)).map(|(a, b)| a * b).sum();
            let s = beta * dot;
            for (i, vi) in v.iter().enumerate() {
                out[k + i] -= s * vi;
            }
        }
        out
    }

    /// Least-squares coefficients for the kept columns.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let rank = self.rank();
        let qty = self.apply_qt(y);
        let mut beta = DVector::zeros(rank);
        for i in (0..rank).rev() {
            let s: f64 = (i + 1..rank).map(|j| self.r[(i, j)] * beta[j]).sum();
            beta[i] = (qty[i] - s) / self.r[(i, i)];
        }
        beta
    }

    /// `R⁻¹`, upper triangular.
    pub fn r_inverse(&self) -> DMatrix<f64> {
        let rank = self.rank();
        let mut inv = DMatrix::zeros(rank, rank);
        for j in 0..rank {
            inv[(j, j)] = 1.0 / self.r[(j, j)];
            for i in (0..j).rev() {
                let s: f64 = (i + 1..=j).map(|m| self.r[(i, m)] * inv[(m, j)]).sum();
                inv[(i, j)] = -s / self.r[(i, i)];
            }
        }
        inv
    }

    /// `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ` for the kept columns.
    pub fn xtx_inverse(&self) -> DMatrix<f64> {
        let ri = self.r_inverse();
        let m = &ri * ri.transpose();
        (&m + m.transpose()) * 0.5
    }

    /// Diagonal of the hat matrix: squared row norms of the thin `Q`.
    pub fn leverages(&self) -> DVector<f64> {
        let rank = self.rank();
        let mut q = DMatrix::zeros(self.n, rank);
        for j in 0..rank {
            q[(j, j)] = 1.0;
        }
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            for c in 0..rank {
                let dot: f64 = (0..v.len()).map(|i| v[i] * q[(k + i, c)]).sum();
                let s = beta * dot;
                for i in 0..v.len() {
                    q[(k + i, c)] -= s * v[i];
                }
            }
        }
        DVector::from_fn(self.n, |i, _| q.row(i).norm_squared())
    }
}
