mod common;

use common::{grid_anova, random_tree, space_for};
use hypimp::configspace::SubsetSelector;
use hypimp::fanova::{decompose_tree, importance, marginal, MarginalQuery};
use hypimp::forest::{Layout, Node, RegressionForest, RegressionTree, SplitRule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAYOUTS: [&[Option<usize>]; 5] = [
    &[None, None],
    &[None, Some(3)],
    &[Some(2), None, None],
    &[None, Some(4), None, Some(2)],
    &[Some(3), Some(2), None],
];

fn check_against_grid(seed: u64, layout: &Layout, max_leaves: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = random_tree(&mut rng, layout, max_leaves);
    let space = space_for(layout);
    let max_order = layout.len().min(3);
    let oracle = grid_anova(&tree, max_order);
    let got = decompose_tree(&tree, max_order).unwrap();
    assert!((got.mean - oracle.mean).abs() < 1e-9, "seed {seed}");
    assert!((got.total_variance - oracle.total_variance).abs() < 1e-9, "seed {seed}");
    for (u, v) in &oracle.components {
        let s = SubsetSelector::new(u.clone(), &space).unwrap();
        assert!((got.components[&s] - v).abs() < 1e-9, "seed {seed} subset {u:?}");
        assert!((got.fraction(&s).unwrap() - oracle.fraction(u)).abs() < 1e-9, "seed {seed} subset {u:?}");
    }
}

#[test]
fn hundred_random_trees_match_grid_oracle() {
    for seed in 0..100u64 {
        let layout: Layout = LAYOUTS[seed as usize % LAYOUTS.len()].to_vec();
        check_against_grid(seed, &layout, 6);
    }
}

#[test]
fn marginals_match_grid_averages() {
    let layout: Layout = vec![None, Some(3), None];
    let space = space_for(&layout);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let tree = random_tree(&mut rng, &layout, 6);
        let x0: f64 = rng.random();
        let c1 = rng.random_range(0..3) as f64;
        let q = MarginalQuery::new(SubsetSelector::new(vec![0, 1], &space).unwrap(), vec![x0, c1]).unwrap();
        // the tree is constant between consecutive dim-2 thresholds
        let mut cuts = vec![0.0, 1.0];
        for n in tree.nodes() {
            if let Node::Split { dim: 2, rule: SplitRule::Threshold(t), .. } = n {
                cuts.push(*t);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let exact: f64 = cuts
            .windows(2)
            .map(|w| (w[1] - w[0]) * tree.predict_point(&[x0, c1, 0.5 * (w[0] + w[1])]))
            .sum();
        assert!((marginal(&tree, &q) - exact).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With every subset included, the components exhaust the variance.
    #[test]
    fn full_decomposition_sums_to_one(seed in any::<u64>(), which in 0usize..3) {
        let layout: Layout = [LAYOUTS[0], LAYOUTS[1], LAYOUTS[2]][which].to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, &layout, 8);
        let d = decompose_tree(&tree, layout.len()).unwrap();
        let total: f64 = d.components.values().sum::<f64>() / d.total_variance;
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(d.components.values().all(|&v| v >= -1e-12));
    }

    /// A shift of all leaf values leaves fractions unchanged; a scale by `c`
    /// multiplies variances by `c²`.
    #[test]
    fn affine_leaf_transforms(seed in any::<u64>(), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let layout: Layout = LAYOUTS[3].to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, &layout, 6);
        let space = space_for(&layout);
        let nodes: Vec<_> = tree
            .nodes()
            .iter()
            .cloned()
            .map(|n| match n {
                Node::Leaf { value } => Node::Leaf { value: scale * value + shift },
                other => other,
            })
            .collect();
        let moved = RegressionTree::from_nodes(layout.clone(), nodes).unwrap();
        let a = decompose_tree(&tree, 3).unwrap();
        let b = decompose_tree(&moved, 3).unwrap();
        prop_assert!((b.total_variance - scale * scale * a.total_variance).abs() < 1e-9 * (1.0 + b.total_variance));
        for u in SubsetSelector::all_up_to(space.len(), 3) {
            prop_assert!((a.fraction(&u).unwrap() - b.fraction(&u).unwrap()).abs() < 1e-9);
        }
    }

    /// Forest fractions are the mean of per-tree fractions.
    #[test]
    fn forest_fraction_is_tree_average(seed in any::<u64>()) {
        let layout: Layout = LAYOUTS[2].to_vec();
        let space = space_for(&layout);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees: Vec<_> = (0..4).map(|_| random_tree(&mut rng, &layout, 6)).collect();
        let forest = RegressionForest::from_trees(space.clone(), trees.clone()).unwrap();
        let vd = importance(&forest, 2).unwrap();
        for u in SubsetSelector::all_up_to(space.len(), 2) {
            let mean = trees
                .iter()
                .map(|t| decompose_tree(t, 2).unwrap().fraction(&u).unwrap())
                .sum::<f64>()
                / 4.0;
            prop_assert!((vd.raw_fraction(&u).unwrap() - mean).abs() < 1e-12);
        }
    }
}
