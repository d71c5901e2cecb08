use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillover::effects::er_total_weight_variance;
use spillover::graph::{generate_ba, generate_er, generate_ws, load_edge_list, EdgeListOptions};
use spillover::regress::{fit_gls_known, fit_gls_network, Column, ColumnRole, DesignMatrix};
use spillover::{AdjacencyMatrix, Error};

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn directed_er_edge_count_moments() {
    let (n, p) = (50, 0.1);
    let w: Vec<f64> = (0..500)
        .map(|s| generate_er(n, p, 1000 + s, true).unwrap().degree_summary().total_weight)
        .collect();
    let (m, v) = mean_var(&w);
    let expected_mean = (n * (n - 1)) as f64 * p;
    let expected_var = er_total_weight_variance(n, p, true);
    assert!((m - expected_mean).abs() < 4.0 * (expected_var / 500.0).sqrt(), "{m} vs {expected_mean}");
    assert!((v / expected_var - 1.0).abs() < 0.25, "{v} vs {expected_var}");
}

#[test]
fn undirected_er_weight_variance() {
    let (n, p) = (40, 0.05);
    let w: Vec<f64> = (0..500)
        .map(|s| generate_er(n, p, 7 + s, false).unwrap().degree_summary().total_weight)
        .collect();
    let (_, v) = mean_var(&w);
    let expected = er_total_weight_variance(n, p, false);
    assert!((v / expected - 1.0).abs() < 0.25, "{v} vs {expected}");
}

#[test]
fn generators_are_seed_deterministic() {
    assert_eq!(generate_er(60, 0.1, 3, false).unwrap(), generate_er(60, 0.1, 3, false).unwrap());
    assert_ne!(generate_er(60, 0.1, 3, false).unwrap(), generate_er(60, 0.1, 4, false).unwrap());
    assert_eq!(generate_ba(80, 0.05, 2, 9).unwrap(), generate_ba(80, 0.05, 2, 9).unwrap());
    assert_eq!(generate_ws(80, 1, 3, 0.2, 9).unwrap(), generate_ws(80, 1, 3, 0.2, 9).unwrap());
}

#[test]
fn ws_edge_count_is_fixed() {
    for (seed, p) in [(1, 0.0), (2, 0.05), (3, 0.5), (4, 1.0)] {
        let g = generate_ws(120, 1, 4, p, seed).unwrap();
        assert!(g.is_symmetric());
        assert_eq!(g.degree_summary().total_weight, 2.0 * 120.0 * 4.0);
        assert!((0..120).all(|i| g.get(i, i) == 0.0));
    }
}

#[test]
fn ba_edges_and_symmetry() {
    let g = generate_ba(200, 0.05, 2, 11).unwrap();
    assert!(g.is_symmetric());
    // node 1 attaches once, every later node twice
    assert_eq!(g.degree_summary().total_weight, 2.0 * (1.0 + 2.0 * 198.0));
    assert!(g.entries().all(|(_, _, w)| w == 1.0));
    assert!(matches!(generate_ba(5, 0.0, 0, 1), Err(Error::InvalidParameter(_))));
}

#[test]
fn edge_list_validation() {
    let opts = EdgeListOptions { n_hint: Some(3), ..EdgeListOptions::default() };
    let g = load_edge_list("src,dst,weight\n0,1,2.5\n".as_bytes(), &opts).unwrap();
    assert_eq!((g.get(0, 1), g.get(1, 0), g.n()), (2.5, 2.5, 3));

    // repeated records accumulate
    let dup = load_edge_list("src,dst\n0,1\n1,0\n".as_bytes(), &EdgeListOptions::default()).unwrap();
    assert_eq!((dup.get(0, 1), dup.get(1, 0)), (2.0, 2.0));
    let neg = load_edge_list("src,dst,weight\n0,1,-1\n".as_bytes(), &EdgeListOptions::default()).unwrap();
    assert!(matches!(neg.row_normalize(), Err(Error::NegativeWeight { .. })));
    let inf = load_edge_list("src,dst,weight\n0,1,inf\n".as_bytes(), &EdgeListOptions::default());
    assert!(matches!(inf, Err(Error::NonFiniteWeight { record: 1, .. })));
    let directed = EdgeListOptions { directed: true, ..EdgeListOptions::default() };
    let g = load_edge_list("src,dst\n0,1\n1,0\n".as_bytes(), &directed).unwrap();
    assert_eq!(g.nnz(), 2);
    let t = EdgeListOptions { directed: true, transpose: true, ..EdgeListOptions::default() };
    let g = load_edge_list("src,dst\n0,1\n".as_bytes(), &t).unwrap();
    assert_eq!((g.get(0, 1), g.get(1, 0)), (0.0, 1.0));
}

/// Eigenvalues of a ring lattice where each node links to `nei` neighbors per
/// side: the adjacency is circulant, so `λ_k = 2 Σ_d cos(2πkd/n)`.
fn ring_eigenvalues(n: usize, nei: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (1..=nei).map(|d| 2.0 * (2.0 * PI * (k * d) as f64 / n as f64).cos()).sum())
        .collect()
}

fn design(n: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
    DesignMatrix::from_columns(vec![
        (Column { name: "(Intercept)".into(), role: ColumnRole::Intercept }, DVector::from_element(n, 1.0)),
        (
            Column { name: "A".into(), role: ColumnRole::Treatment },
            DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
        ),
    ])
    .unwrap()
}

#[test]
fn ring_lattice_eigenvalue_oracle() {
    for (n, nei) in [(12, 1), (20, 3), (31, 4), (50, 10)] {
        let g = generate_ws(n, 1, nei, 0.0, 0).unwrap();
        let mut oracle = ring_eigenvalues(n, nei);
        oracle.sort_by(f64::total_cmp);
        let mut numeric: Vec<f64> = SymmetricEigen::new(g.to_dense()).eigenvalues.iter().copied().collect();
        numeric.sort_by(f64::total_cmp);
        for (a, b) in oracle.iter().zip(&numeric) {
            assert!((a - b).abs() < 1e-9, "n={n} nei={nei}: {a} vs {b}");
        }
    }
}

#[test]
fn ring_lattice_positive_definiteness_bracket() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, nei) in [(12, 1), (20, 3), (31, 4), (50, 10)] {
        let g = generate_ws(n, 1, nei, 0.0, 0).unwrap();
        let lam = ring_eigenvalues(n, nei);
        let lo = lam.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let x = design(n, &mut rng);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

        let b_max = -1.0 / lo;
        let b_min = -1.0 / hi;
        assert!(fit_gls_known(&x, &y, &g, 1.0, 0.99 * b_max).is_ok(), "n={n} nei={nei}");
        assert!(fit_gls_known(&x, &y, &g, 1.0, 0.99 * b_min).is_ok());
        for b in [1.01 * b_max, 1.01 * b_min] {
            let err = fit_gls_known(&x, &y, &g, 1.0, b).unwrap_err();
            assert!(matches!(err, Error::NotPositiveDefinite { .. }), "b={b}: {err}");
        }

        let fit = fit_gls_network(&x, &y, &g).unwrap();
        assert!(fit.theta > b_min && fit.theta < b_max, "theta {} outside ({b_min}, {b_max})", fit.theta);
    }
}

#[test]
fn gls_known_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 30;
    let g = generate_er(n, 0.1, 17, false).unwrap();
    let x = design(n, &mut rng);
    let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let (a, b) = (2.0, 0.3);
    let fit = fit_gls_known(&x, &y, &g, a, b).unwrap();

    let sigma = DMatrix::identity(n, n) * a + g.to_dense() * b;
    let si = sigma.try_inverse().unwrap();
    let xt_si = x.x.transpose() * &si;
    let cov = (&xt_si * &x.x).try_inverse().unwrap();
    let beta = &cov * (&xt_si * &y);
    assert!((fit.beta - beta).amax() < 1e-10);
    assert!((fit.vcov - cov).amax() < 1e-10);
}

#[test]
fn empty_graph_helpers() {
    let g = AdjacencyMatrix::empty(4, false).unwrap();
    let s = g.degree_summary();
    assert_eq!((s.mean, s.total_weight, s.sd), (0.0, 0.0, 0.0));
    assert_eq!(g.matrix_power(3).unwrap().nnz(), 0);
    assert_eq!(g.row_normalize().unwrap(), g);
}
