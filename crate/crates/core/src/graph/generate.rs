//! Random graph families. Every generator is a pure function of its
//! parameters and seed, and emits unit-weight edges.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::AdjacencyMatrix;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Erdős–Rényi graph: every unordered pair (ordered, if `directed`) is an edge
/// independently with probability `p`.
pub fn generate_er(n: usize, p: f64, seed: u64, directed: bool) -> Result<AdjacencyMatrix> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        let start = if directed { 0 } else { i + 1 };
        for j in start..n {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, edges, directed)
}

/// Preferential attachment. Node `t` attaches to `min(m, t)` distinct earlier
/// nodes, each drawn with probability proportional to `(degree + 1)^power`.
pub fn generate_ba(n: usize, power: f64, m: usize, seed: u64) -> Result<AdjacencyMatrix> {
    if m < 1 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !power.is_finite() {
        return Err(Error::InvalidParameter("power must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1) * m);
    let mut weights = Vec::with_capacity(n);
    for t in 1..n {
        weights.clear();
        weights.extend((0..t).map(|v| (degree[v] as f64 + 1.0).powf(power)));
        let mut chosen = Vec::with_capacity(m.min(t));
        for _ in 0..m.min(t) {
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = t - 1;
            for (v, &w) in weights.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = v;
                    break;
                }
                u -= w;
            }
            // fall back to the last still-available node on rounding overrun
            while weights[pick] == 0.0 {
                pick -= 1;
            }
            weights[pick] = 0.0;
            chosen.push(pick);
        }
        for v in chosen {
            degree[v] += 1;
            degree[t] += 1;
            edges.push((t, v, 1.0));
        }
    }
    AdjacencyMatrix::from_edges(n, edges, false)
}

/// One-dimensional small-world graph: a ring where every node is joined to its
/// `nei` nearest neighbors on each side, after which each edge has one endpoint
/// rewired with probability `p_rewire`, never creating self-loops or
/// duplicate edges. The edge count is always `n * nei`.
pub fn generate_ws(
    n: usize,
    dim: usize,
    nei: usize,
    p_rewire: f64,
    seed: u64,
) -> Result<AdjacencyMatrix> {
    if dim != 1 {
        return Err(Error::Unsupported(format!("small-world lattices of dimension {dim}")));
    }
    if nei < 1 {
        return Err(Error::InvalidParameter("nei must be at least 1".into()));
    }
    check_probability("p_rewire", p_rewire)?;
    if n <= 2 * nei {
        return Err(Error::InvalidParameter(format!(
            "ring lattice needs n > 2*nei, got n = {n}, nei = {nei}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut edges = Vec::with_capacity(n * nei);
    for i in 0..n {
        for d in 1..=nei {
            let j = (i + d) % n;
            adj[i].insert(j);
            adj[j].insert(i);
            edges.push((i, j));
        }
    }
    for edge in edges.iter_mut() {
        if rng.random::<f64>() >= p_rewire {
            continue;
        }
        let (i, j) = *edge;
        if adj[i].len() >= n - 1 {
            continue;
        }
        let k = loop {
            let k = rng.random_range(0..n);
            if k != i && !adj[i].contains(&k) {
                break k;
            }
        };
        adj[i].remove(&j);
        adj[j].remove(&i);
        adj[i].insert(k);
        adj[k].insert(i);
        *edge = (i, k);
    }
    AdjacencyMatrix::from_edges(n, edges.into_iter().map(|(i, j)| (i, j, 1.0)), false)
}
