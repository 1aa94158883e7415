//! Property tests for invariants that hold for every input.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use readmit_core::data::{read_csv, ColumnKind, ColumnSpec, CsvOptions, DataTable, Column, Schema};
use readmit_core::diagnostics::{ici_family, lr_sweep, post_test_delta};
use readmit_core::evaluation::{auc, confusion, mcc};
use readmit_core::explain::{brute_shapley, random_tree, tree_shap};
use readmit_core::learner::{Node, Tree};
use readmit_core::stats::{chi2_contingency, rank_sum};

fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn labelled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..=1, n),
            // a small value set forces ties
            prop::collection::vec((0u8..8).prop_map(|v| v as f64 / 8.0), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pairwise((y, s) in labelled_scores()) {
        let n_pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(n_pos > 0 && n_pos < y.len());
        let a = auc(&y, &s).unwrap();
        prop_assert!((a - pairwise_auc(&y, &s)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        // reversing the scores mirrors the AUC
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&y, &neg).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_map((y, s) in labelled_scores()) {
        let n_pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(n_pos > 0 && n_pos < y.len());
        let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp()).collect();
        prop_assert_eq!(auc(&y, &s).unwrap(), auc(&y, &mapped).unwrap());
    }

    #[test]
    fn mcc_is_bounded((y, s) in labelled_scores(), t in 0.0f64..1.0) {
        let cm = confusion(&y, &s, t).unwrap();
        prop_assert_eq!(cm.total() as usize, y.len());
        let m = mcc(&cm);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m));
    }

    #[test]
    fn chi2_is_symmetric_under_row_and_column_swaps(
        a in 1u64..200, b in 1u64..200, c in 1u64..200, d in 1u64..200
    ) {
        let base = chi2_contingency(&[vec![a, b], vec![c, d]]).unwrap();
        let rows = chi2_contingency(&[vec![c, d], vec![a, b]]).unwrap();
        let cols = chi2_contingency(&[vec![b, a], vec![d, c]]).unwrap();
        let tr = chi2_contingency(&[vec![a, c], vec![b, d]]).unwrap();
        for other in [rows, cols, tr] {
            prop_assert!((base.statistic - other.statistic).abs() <= 1e-9 * base.statistic.max(1.0));
            prop_assert!((base.p_value - other.p_value).abs() < 1e-12);
        }
        prop_assert!(base.statistic >= 0.0);
        prop_assert!((0.0..=1.0).contains(&base.p_value));
    }

    #[test]
    fn rank_sum_u_statistics_add_up(
        a in prop::collection::vec((0i32..20).prop_map(f64::from), 1..25),
        b in prop::collection::vec((0i32..20).prop_map(f64::from), 1..25),
    ) {
        let ab = rank_sum(&a, &b).unwrap();
        let ba = rank_sum(&b, &a).unwrap();
        prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
    }

    #[test]
    fn post_test_delta_sign_follows_lr(lr in 0.01f64..50.0, q in 0.01f64..0.99) {
        let d = post_test_delta(lr, q).unwrap();
        if lr > 1.0 {
            prop_assert!(d > 0.0);
        } else if lr < 1.0 {
            prop_assert!(d < 0.0);
        }
        prop_assert!(q + d > 0.0 && q + d < 1.0);
    }

    #[test]
    fn lr_sweep_invariant_to_label_order_permutation((y, s) in labelled_scores(), seed in 0u64..1000) {
        let n_pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(n_pos > 0 && n_pos < y.len());
        let grid = [0.2, 0.4, 0.6, 0.8];
        let base = lr_sweep(&y, &s, &grid, 0.1).unwrap();
        // the same rows in another order
        let mut idx: Vec<usize> = (0..y.len()).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let y2: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        prop_assert_eq!(base, lr_sweep(&y2, &s2, &grid, 0.1).unwrap());
    }

    #[test]
    fn ici_family_is_ordered(seed in 0u64..10_000) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 80;
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let y: Vec<u8> = p.iter().map(|&q| u8::from(rng.random::<f64>() < q)).collect();
        prop_assume!(y.contains(&1) && y.contains(&0));
        let f = ici_family(&y, &p).unwrap();
        prop_assert!(f.ici >= 0.0);
        prop_assert!(f.e50 <= f.e90 + 1e-15);
        prop_assert!(f.e90 <= f.emax + 1e-15);
        prop_assert!(f.ici <= f.emax + 1e-15);
    }

    #[test]
    fn tree_shap_matches_oracle_on_random_trees(seed in 0u64..100_000, depth in 1usize..5, p in 1usize..7) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, depth, p);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = tree_shap(&tree, &x);
        let slow = brute_shapley(&tree, &x).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        // efficiency
        let total: f64 = fast.iter().sum();
        prop_assert!((tree.base_value() + total - tree.predict(&x)).abs() < 1e-9);
    }

    #[test]
    fn unused_feature_gets_zero(seed in 0u64..100_000, depth in 1usize..5) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // trees over features 0..3, explained with a 4th feature the tree never uses
        let tree = random_tree(&mut rng, depth, 3);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = tree_shap(&tree, &x);
        prop_assert_eq!(phi.len(), 4);
        prop_assert_eq!(phi[3], 0.0);
    }

    #[test]
    fn attributions_are_linear_in_leaf_values(seed in 0u64..100_000, w in 0.0f64..1.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_tree(&mut rng, 3, 4);
        // same structure, fresh leaf values, and their mixture
        let relabel = |g: &mut dyn FnMut(f64) -> f64| {
            Tree::from_nodes(
                f.nodes()
                    .iter()
                    .map(|n| match n {
                        Node::Leaf { value, cover } => Node::Leaf { value: g(*value), cover: *cover },
                        other => *other,
                    })
                    .collect(),
            )
            .unwrap()
        };
        let fresh: Vec<f64> = (0..f.nodes().len()).map(|_| rng.random()).collect();
        let mut k = 0;
        let g = relabel(&mut |_| { k += 1; fresh[k - 1] });
        let g_leaves: Vec<f64> = g.nodes().iter().filter_map(|n| match n {
            Node::Leaf { value, .. } => Some(*value),
            _ => None,
        }).collect();
        let mut j = 0;
        let mix = relabel(&mut |v| { j += 1; w * v + (1.0 - w) * g_leaves[j - 1] });
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (pf, pg, pm) = (tree_shap(&f, &x), tree_shap(&g, &x), tree_shap(&mix, &x));
        for i in 0..4 {
            prop_assert!((w * pf[i] + (1.0 - w) * pg[i] - pm[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trip(
        values in prop::collection::vec(prop::option::of(-1e6f64..1e6), 1..30),
        labels in prop::collection::vec(0u8..=1, 30),
        cats in prop::collection::vec(prop::option::of(prop::sample::select(vec!["a", "b,c", "d\"e"])), 30),
    ) {
        let n = values.len();
        let schema = Schema::new(vec![
            ColumnSpec::feature("x", ColumnKind::Continuous),
            ColumnSpec::feature("kind", ColumnKind::Categorical),
            ColumnSpec::label("y"),
        ]).unwrap();
        let table = DataTable::new(
            schema.clone(),
            vec![
                Column::Numeric(values.clone()),
                Column::Text(cats[..n].iter().map(|c| c.map(str::to_string)).collect()),
                Column::Numeric(labels[..n].iter().map(|&v| Some(f64::from(v))).collect()),
            ],
        ).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let (back, _) = read_csv(buf.as_slice(), &schema, &CsvOptions::default()).unwrap();
        prop_assert_eq!(back, table);
    }
}
