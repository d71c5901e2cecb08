mod common;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillover::effects::{
    estimate_multi_network, estimate_naive, estimate_total_known, normal_quantile, plug_in_variance,
    EstimateOptions,
};
use spillover::graph::generate_er;
use spillover::regress::{
    fit_gls_network, fit_ols, sandwich_vcov, Column, ColumnRole, DesignMatrix, VcovKind, VcovSpec,
};
use spillover::{AdjacencyMatrix, Dataset};
use statrs::distribution::{ContinuousCDF, Normal};

const HC_KINDS: [VcovKind; 7] = [
    VcovKind::Classical,
    VcovKind::Hc0,
    VcovKind::Hc1,
    VcovKind::Hc2,
    VcovKind::Hc3,
    VcovKind::Hc4,
    VcovKind::Hc5,
];

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn random_dataset(n: usize, rng: &mut ChaCha8Rng, g: &AdjacencyMatrix) -> Dataset {
    let a = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let l = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
    let ga = g.exposure(&a).unwrap();
    let y = DVector::from_fn(n, |i, _| {
        1.0 + 0.5 * a[i] + l[(i, 0)] - l[(i, 1)] + 0.8 * ga[i] + rng.random_range(-1.0..1.0)
    });
    Dataset::new(y, a, l, vec!["L1".into(), "L2".into()]).unwrap()
}

fn random_design(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
    let cols = (0..k)
        .map(|c| {
            let v = if c == 0 {
                DVector::from_element(n, 1.0)
            } else {
                DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
            };
            let role = match c {
                0 => ColumnRole::Intercept,
                1 => ColumnRole::Treatment,
                _ => ColumnRole::Covariate,
            };
            (Column { name: format!("x{c}"), role }, v)
        })
        .collect();
    DesignMatrix::from_columns(cols).unwrap()
}

fn min_eigen(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimates_invariant_under_relabelling(seed in any::<u64>(), n in 15usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_er(n, 0.15, seed, false).unwrap();
        let d = random_dataset(n, &mut rng, &g);
        let perm = permutation(n, &mut rng);
        let (dp, gp) = (d.permute(&perm).unwrap(), g.permute(&perm).unwrap());
        for kind in [VcovKind::Classical, VcovKind::Hc3] {
            let opts = EstimateOptions::new(kind, 0.05);
            let a = estimate_total_known(&d, std::slice::from_ref(&g), opts);
            let b = estimate_total_known(&dp, std::slice::from_ref(&gp), opts);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert!(close(a.psi, b.psi, 1e-9), "{} {}", a.psi, b.psi);
                    prop_assert!(close(a.se, b.se, 1e-8), "{} {}", a.se, b.se);
                    prop_assert_eq!(a.f_bar.len(), 1);
                    prop_assert!(close(a.f_bar[0], b.f_bar[0], 1e-12));
                }
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
        let a = estimate_naive(&d, EstimateOptions::default()).unwrap();
        let b = estimate_naive(&dp, EstimateOptions::default()).unwrap();
        prop_assert!(close(a.psi, b.psi, 1e-9));
    }

    #[test]
    fn exposure_is_linear(seed in any::<u64>(), n in 2usize..40, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_er(n, 0.3, seed, seed % 2 == 0).unwrap();
        let u = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let v = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let lhs = g.exposure(&(&u * s + &v * t)).unwrap();
        let rhs = g.exposure(&u).unwrap() * s + g.exposure(&v).unwrap() * t;
        prop_assert!((lhs - rhs).amax() < 1e-9);
        let m = DMatrix::from_columns(&[u.clone(), v.clone()]);
        let gm = g.exposure_matrix(&m).unwrap();
        prop_assert_eq!(gm.column(0).into_owned(), g.exposure(&u).unwrap());
    }

    #[test]
    fn ols_row_permutation_and_column_scaling(seed in any::<u64>(), n in 8usize..60, k in 2usize..5, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_design(n, k, &mut rng);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let fit = fit_ols(&x, &y).unwrap();
        prop_assume!(fit.dropped.is_empty());

        let perm = permutation(n, &mut rng);
        let mut xp = x.clone();
        let mut yp = y.clone();
        for (i, &p) in perm.iter().enumerate() {
            xp.x.set_row(p, &x.x.row(i));
            yp[p] = y[i];
        }
        let fp = fit_ols(&xp, &yp).unwrap();
        prop_assert!((&fit.beta - &fp.beta).amax() < 1e-9);
        prop_assert!(close(fit.sigma2, fp.sigma2, 1e-9));

        let mut xs = x.clone();
        xs.x.column_mut(k - 1).scale_mut(c);
        let fs = fit_ols(&xs, &y).unwrap();
        prop_assert!(close(fs.beta[k - 1] * c, fit.beta[k - 1], 1e-8));
        prop_assert!((&fs.residuals - &fit.residuals).amax() < 1e-9);
        prop_assert!(close(fs.vcov[(k - 1, k - 1)] * c * c, fit.vcov[(k - 1, k - 1)], 1e-8));
    }

    #[test]
    fn ols_matches_normal_equations(seed in any::<u64>(), n in 8usize..40, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_design(n, k, &mut rng);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let fit = fit_ols(&x, &y).unwrap();
        prop_assume!(fit.dropped.is_empty());
        let (beta, vcov) = common::normal_equations(&x.x, &y);
        for j in 0..k {
            prop_assert!(close(fit.beta[j], beta[j], 1e-7));
            prop_assert!(close(fit.vcov[(j, j)], vcov[j][j], 1e-7));
        }
    }

    #[test]
    fn leverages_and_residual_orthogonality(seed in any::<u64>(), n in 6usize..60, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_design(n.max(k + 1), k, &mut rng);
        let n = x.n();
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let fit = fit_ols(&x, &y).unwrap();
        let h = &fit.leverages;
        prop_assert!(h.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        prop_assert!((h.sum() - fit.k as f64).abs() < 1e-9);
        let xte = x.x.transpose() * &fit.residuals;
        prop_assert!(xte.amax() < 1e-9 * (1.0 + y.amax()) * n as f64);
    }

    #[test]
    fn every_vcov_kind_is_psd(seed in any::<u64>(), n in 8usize..50, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_design(n, k, &mut rng);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0f64..1.0).powi(3));
        let fit = fit_ols(&x, &y).unwrap();
        for kind in HC_KINDS {
            let v = sandwich_vcov(&fit, &x, VcovSpec::new(kind)).unwrap();
            prop_assert!((&v - v.transpose()).amax() <= 1e-12 * v.amax().max(1e-300));
            prop_assert!(min_eigen(&v) >= -1e-10 * v.amax(), "{kind:?}");
        }
    }

    #[test]
    fn zero_residuals_give_zero_sandwich(seed in any::<u64>(), n in 8usize..40, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_design(n, k, &mut rng);
        let beta = DVector::from_fn(k, |_, _| rng.random_range(-2.0..2.0));
        let y = &x.x * beta;
        let fit = fit_ols(&x, &y).unwrap();
        let vs: Vec<_> = HC_KINDS
            .iter()
            .map(|&kind| sandwich_vcov(&fit, &x, VcovSpec::new(kind)).unwrap())
            .collect();
        for v in &vs {
            prop_assert!(v.amax() < 1e-20, "{}", v.amax());
        }
    }

    #[test]
    fn plug_in_variance_nonnegative(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(k + 1, k + 1, |_, _| rng.random_range(-1.0..1.0));
        let v = &b * b.transpose();
        let f: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..20.0)).collect();
        let var = plug_in_variance(&v, &f).unwrap();
        prop_assert!(var >= 0.0);
        let zero = plug_in_variance(&v, &vec![0.0; k]).unwrap();
        prop_assert!(close(zero, v[(0, 0)], 1e-12));
    }

    #[test]
    fn matrix_square_matches_repeated_exposure(seed in any::<u64>(), n in 2usize..25, directed in any::<bool>()) {
        let g = generate_er(n, 0.25, seed, directed).unwrap();
        let g2 = g.matrix_power(2).unwrap();
        for j in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            let mut col = g.exposure(&g.exposure(&e).unwrap()).unwrap();
            col[j] = 0.0;
            let got = g2.exposure(&e).unwrap();
            prop_assert!((col - got).amax() < 1e-12);
        }
    }

    #[test]
    fn degrees_follow_relabelling(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_er(n, 0.2, seed, true).unwrap();
        let perm = permutation(n, &mut rng);
        let (a, b) = (g.degree_summary(), g.permute(&perm).unwrap().degree_summary());
        for i in 0..n {
            prop_assert_eq!(a.degrees[i], b.degrees[perm[i]]);
        }
        prop_assert!(close(a.mean, b.mean, 1e-12));
        prop_assert_eq!(a.total_weight, b.total_weight);
    }

    #[test]
    fn duplicated_networks_reproduce_single(seed in any::<u64>(), n in 20usize..50, copies in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_er(n, 0.15, seed, false).unwrap();
        let d = random_dataset(n, &mut rng, &g);
        let opts = EstimateOptions::default();
        let one = estimate_total_known(&d, std::slice::from_ref(&g), opts);
        prop_assume!(one.is_ok());
        let one = one.unwrap();
        let many = estimate_multi_network(&d, &vec![g.clone(); copies], opts).unwrap();
        prop_assert!(close(one.psi, many.psi, 1e-8), "{} {}", one.psi, many.psi);
        prop_assert!(close(one.se, many.se, 1e-7), "{} {}", one.se, many.se);
        prop_assert_eq!(many.f_bar.len(), copies);
    }

    #[test]
    fn normal_quantile_matches_reference(p in 1e-12f64..1.0) {
        prop_assume!(p < 1.0);
        let reference = Normal::standard().inverse_cdf(p);
        let got = normal_quantile(p);
        prop_assert!((got - reference).abs() <= 1e-9 * (1.0 + reference.abs()), "{p}: {got} {reference}");
    }

    #[test]
    fn gls_likelihood_dominates_ols(seed in any::<u64>(), n in 20usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_er(n, 0.1, seed, false).unwrap();
        let x = random_design(n, 3, &mut rng);
        let e = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let y = &x.x.column(1) * 2.0 + &e + g.exposure(&e).unwrap() * 0.3;
        let ols = fit_ols(&x, &y).unwrap();
        let gls = fit_gls_network(&x, &y, &g).unwrap();
        prop_assert!(gls.loglik >= ols.loglik - 1e-8 * ols.loglik.abs(), "{} {}", gls.loglik, ols.loglik);
    }
}
