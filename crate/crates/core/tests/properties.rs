use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use wlasso::correlation::{block_average, expand_block_model, sample_correlation, BlockCorrelationModel};
use wlasso::diagnostics::recovery_metrics;
use wlasso::lasso::{lasso_objective, lasso_solve, soft_threshold, SolverConfig};
use wlasso::linalg::{whitening_operator, SymmetricMatrix};
use wlasso::wlasso::{magnitude_order, mse_curve, mse_tilde_curve, threshold_beta, threshold_beta_tilde};

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], len).prop_map(DVector::from_vec)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

proptest! {
    #[test]
    fn magnitude_order_is_a_sorted_permutation(b in vector(1..30)) {
        let order = magnitude_order(&b);
        let mut seen = order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..b.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            let (a, c) = (b[w[0]].abs(), b[w[1]].abs());
            prop_assert!(a > c || (a == c && w[0] < w[1]));
        }
    }

    #[test]
    fn top_k_keeps_head_and_flattens_tail(b in vector(1..25), k_frac in 0.0..1.0f64) {
        let p = b.len();
        let k = 1 + ((p - 1) as f64 * k_frac) as usize;
        let t = threshold_beta_tilde(&b, k).unwrap();
        let order = magnitude_order(&b);
        let vk = b[order[k - 1]].abs();
        for (rank, &j) in order.iter().enumerate() {
            if rank < k {
                prop_assert_eq!(t[j], b[j]);
            } else {
                prop_assert_eq!(t[j].abs(), if b[j] == 0.0 { 0.0 } else { vk });
                prop_assert!(t[j] * b[j] >= 0.0);
            }
        }
        prop_assert_eq!(threshold_beta_tilde(&b, p).unwrap(), b);
    }

    #[test]
    fn top_m_is_a_sparse_restriction(b in vector(1..25), m_frac in 0.0..1.0f64) {
        let p = b.len();
        let m = 1 + ((p - 1) as f64 * m_frac) as usize;
        let t = threshold_beta(&b, m).unwrap();
        prop_assert!(t.iter().filter(|v| **v != 0.0).count() <= m);
        for j in 0..p {
            prop_assert!(t[j] == 0.0 || t[j] == b[j]);
        }
        let norm = |v: &DVector<f64>| v.iter().map(|x| x.abs()).sum::<f64>();
        prop_assert!(norm(&t) <= norm(&b));
    }

    #[test]
    fn incremental_curves_match_direct(x in matrix(6, 8), b in vector(8..9), noise in vector(6..7)) {
        let y = &x * &b + noise;
        let tilde = mse_tilde_curve(&y, &x, &b);
        let plain = mse_curve(&y, &x, &b);
        for k in 1..=8 {
            let dt = (&y - &x * threshold_beta_tilde(&b, k).unwrap()).norm_squared();
            let dm = (&y - &x * threshold_beta(&b, k).unwrap()).norm_squared();
            prop_assert!((tilde[k - 1] - dt).abs() <= 1e-9 * (1.0 + dt));
            prop_assert!((plain[k - 1] - dm).abs() <= 1e-9 * (1.0 + dm));
        }
    }

    #[test]
    fn metrics_are_rates(sel in prop::collection::vec(0usize..20, 0..20), truth in prop::collection::btree_set(0usize..20, 1..19)) {
        let truth: Vec<usize> = truth.into_iter().collect();
        let m = recovery_metrics(&sel, &truth, 20).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.tpr));
        prop_assert!((0.0..=1.0).contains(&m.fpr));
        prop_assert_eq!(m.diff, m.tpr - m.fpr);
        let all = recovery_metrics(&(0..20).collect::<Vec<_>>(), &truth, 20).unwrap();
        prop_assert_eq!((all.tpr, all.fpr), (1.0, 1.0));
    }

    #[test]
    fn whitening_inverts(a in matrix(6, 6)) {
        let sigma = SymmetricMatrix::new(&a * a.transpose() + DMatrix::identity(6, 6) * 0.1).unwrap();
        let op = whitening_operator(&sigma, None).unwrap();
        let back = op.sqrt.as_matrix() * op.sqrt.as_matrix();
        let id = op.sqrt.as_matrix() * op.inv_sqrt.as_matrix();
        let scale = sigma.as_matrix().amax();
        prop_assert!((back - sigma.as_matrix()).amax() <= 1e-9 * scale);
        prop_assert!((id - DMatrix::<f64>::identity(6, 6)).amax() <= 1e-6);
    }

    #[test]
    fn block_model_round_trips(labels in prop::collection::vec(1u8..=2, 4..12), a1 in -0.2..0.9f64, a2 in -0.2..0.9f64, a3 in -0.2..0.9f64) {
        prop_assume!(labels.iter().filter(|&&c| c == 1).count() >= 2 && labels.iter().filter(|&&c| c == 2).count() >= 2);
        let model = BlockCorrelationModel::new(labels.clone(), a1, a2, a3).unwrap();
        let r = expand_block_model(&model);
        let corr = wlasso::correlation::SampleCorrelation { r, column_sds: vec![1.0; labels.len()] };
        let back = block_average(&corr, &labels).unwrap();
        for (u, v) in back.rho.iter().flatten().zip(model.rho.iter().flatten()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_correlation_is_scale_free(x in matrix(8, 4), scales in prop::collection::vec(0.1..10.0f64, 4)) {
        let Ok(r) = sample_correlation(&x) else { return Ok(()) };
        let mut xs = x.clone();
        for (j, s) in scales.iter().enumerate() {
            xs.column_mut(j).scale_mut(*s);
            xs.column_mut(j).add_scalar_mut(3.0);
        }
        let rs = sample_correlation(&xs).unwrap();
        prop_assert!((r.r.as_matrix() - rs.r.as_matrix()).amax() < 1e-9);
        for j in 0..4 {
            prop_assert!((r.r.get(j, j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lasso_solution_beats_perturbations(x in matrix(10, 6), y in vector(10..11), frac in 0.01..0.9f64, dir in vector(6..7)) {
        let lmax = 2.0 * x.tr_mul(&y).amax();
        prop_assume!(lmax > 1e-6);
        let lam = frac * lmax;
        let b = lasso_solve(&x, &y, lam, &SolverConfig::default(), None).unwrap();
        let obj = lasso_objective(&x, &y, &b, lam);
        for eps in [1e-3, 1e-1] {
            let moved = &b + &dir * eps;
            prop_assert!(lasso_objective(&x, &y, &moved, lam) >= obj - 1e-9 * (1.0 + obj));
        }
    }

    #[test]
    fn soft_threshold_is_shrinkage(v in -10.0..10.0f64, t in 0.0..5.0f64) {
        let s = soft_threshold(v, t);
        prop_assert!(s.abs() <= v.abs());
        prop_assert!(s == 0.0 || s.signum() == v.signum());
        prop_assert!((v - s).abs() <= t + 1e-15);
    }
}
