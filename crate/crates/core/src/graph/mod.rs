//! Interference graphs.
//!
//! An [`AdjacencyMatrix`] stores the weighted interference graph `G` in
//! compressed sparse row form. Row `i` lists the units whose treatments enter
//! unit `i`'s exposure, so the neighbor-summed treatment is the product `G·A`.
//! The diagonal is always zero.

mod generate;
mod io;

pub use generate::{generate_ba, generate_er, generate_ws};
pub use io::{load_edge_list, load_node_labels, EdgeListOptions, Normalize};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry of undirected input.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    directed: bool,
    labels: Option<Vec<String>>,
}

/// Weighted degrees of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSummary {
    /// Row sums `F_i`.
    pub degrees: Vec<f64>,
    /// Mean weighted degree.
    pub mean: f64,
    /// Total edge weight (sum of all entries).
    pub total_weight: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation of the degrees (0 when n = 1).
    pub sd: f64,
}

impl AdjacencyMatrix {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph must have at least one node".into()));
        }
        Ok(Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            directed,
            labels: None,
        })
    }

    /// Build from `(row, col, weight)` entries. Duplicate entries are summed and
    /// entries that sum to exactly zero are discarded.
    ///
    /// For `directed = false` the entries must already describe a symmetric
    /// matrix; use [`AdjacencyMatrix::from_edges`] to symmetrize edge lists.
    pub fn from_triplets<I>(n: usize, entries: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::InvalidParameter("graph must have at least one node".into()));
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (record, (i, j, w)) in entries.into_iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if i == j {
                return Err(Error::SelfLoop { record: record + 1, node: i });
            }
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { record: record + 1, value: w.to_string() });
            }
            *rows[i].entry(j).or_insert(0.0) += w;
        }
        let g = Self::from_rows(n, rows, directed);
        if !directed {
            g.check_symmetric()?;
        }
        Ok(g)
    }

    /// Build from edges. Undirected edges are inserted in both orientations.
    pub fn from_edges<I>(n: usize, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if directed {
            return Self::from_triplets(n, edges, true);
        }
        let mut entries = Vec::new();
        for (i, j, w) in edges {
            entries.push((i, j, w));
            if i != j {
                entries.push((j, i, w));
            }
        }
        Self::from_triplets(n, entries, false)
    }

    /// Build from a dense square matrix. The diagonal must be zero.
    pub fn from_dense(m: &DMatrix<f64>, directed: bool) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "adjacency matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = m[(i, j)];
                if w != 0.0 {
                    entries.push((i, j, w));
                }
            }
        }
        Self::from_triplets(n, entries, directed)
    }

    fn from_rows(n: usize, rows: Vec<BTreeMap<usize, f64>>, directed: bool) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, w) in row {
                if w != 0.0 {
                    col_idx.push(j);
                    values.push(w);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values, directed, labels: None }
    }

    fn check_symmetric(&self) -> Result<()> {
        for (i, j, w) in self.entries() {
            let back = self.get(j, i);
            if (w - back).abs() > SYMMETRY_TOL * w.abs().max(back.abs()) {
                return Err(Error::Asymmetric { row: i, col: j });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored nonzero entries (each undirected edge counts twice).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Column indices and weights of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// All nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &w)| (i, j, w))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, w) in self.entries() {
            m[(i, j)] = w;
        }
        m
    }

    /// `true` when `G_ij = G_ji` for every entry.
    pub fn is_symmetric(&self) -> bool {
        self.check_symmetric().is_ok()
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n];
        for (i, j, w) in self.entries() {
            rows[j].insert(i, w);
        }
        let mut g = Self::from_rows(self.n, rows, self.directed);
        g.labels = self.labels.clone();
        g
    }

    pub fn degree_summary(&self) -> DegreeSummary {
        let degrees: Vec<f64> = (0..self.n).map(|i| self.row(i).1.iter().sum()).collect();
        let total_weight: f64 = degrees.iter().sum();
        let n = self.n as f64;
        let mean = total_weight / n;
        let min = degrees.iter().copied().fold(f64::INFINITY, f64::min);
        let max = degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sd = if self.n > 1 {
            (degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        DegreeSummary { degrees, mean, total_weight, min, max, sd }
    }

    /// Neighbor-weighted sums `G·v`.
    pub fn exposure(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector has {} entries, graph has {} nodes",
                v.len(),
                self.n
            )));
        }
        Ok(DVector::from_fn(self.n, |i, _| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &w)| w * v[j]).sum()
        }))
    }

    /// Column-wise `G·M`.
    pub fn exposure_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, graph has {} nodes",
                m.nrows(),
                self.n
            )));
        }
        let mut out = DMatrix::zeros(self.n, m.ncols());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for c in 0..m.ncols() {
                out[(i, c)] = cols.iter().zip(vals).map(|(&j, &w)| w * m[(j, c)]).sum();
            }
        }
        Ok(out)
    }

    /// `G^k` with the diagonal set to zero after the product.
    pub fn matrix_power(&self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("matrix power order must be at least 1".into()));
        }
        let mut acc: Vec<BTreeMap<usize, f64>> = (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        for _ in 1..k {
            acc = acc
                .iter()
                .map(|row| {
                    let mut next = BTreeMap::new();
                    for (&m, &a) in row {
                        let (cols, vals) = self.row(m);
                        for (&j, &b) in cols.iter().zip(vals) {
                            *next.entry(j).or_insert(0.0) += a * b;
                        }
                    }
                    next
                })
                .collect();
        }
        for (i, row) in acc.iter_mut().enumerate() {
            row.remove(&i);
        }
        let mut g = Self::from_rows(self.n, acc, self.directed);
        g.labels = self.labels.clone();
        Ok(g)
    }

    /// Divide each nonzero row by its sum.
    pub fn row_normalize(&self) -> Result<Self> {
        if let Some((i, j, w)) = self.entries().find(|&(_, _, w)| w < 0.0) {
            return Err(Error::NegativeWeight { row: i, col: j, weight: w });
        }
        let mut values = self.values.clone();
        for i in 0..self.n {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let s: f64 = values[lo..hi].iter().sum();
            if s > 0.0 {
                values[lo..hi].iter_mut().for_each(|w| *w /= s);
            }
        }
        let mut g = Self { values, ..self.clone() };
        g.directed = self.directed || !g.is_symmetric();
        Ok(g)
    }

    /// Relabel nodes so that `G'[perm[i]][perm[j]] = G[i][j]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidPermutation(format!(
                "length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidPermutation(format!("index {p} repeated or out of range")));
            }
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n];
        for (i, j, w) in self.entries() {
            rows[perm[i]].insert(perm[j], w);
        }
        let mut g = Self::from_rows(self.n, rows, self.directed);
        if let Some(labels) = &self.labels {
            let mut out = vec![String::new(); self.n];
            for (i, l) in labels.iter().enumerate() {
                out[perm[i]] = l.clone();
            }
            g.labels = Some(out);
        }
        Ok(g)
    }
}
