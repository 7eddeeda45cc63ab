//! Regression forests over the internal unit cube.
//!
//! Each tree is kept as a flat node arena so that its leaves can be
//! enumerated as axis-aligned boxes ([`LeafBox`]); the variance
//! decomposition in [`crate::fanova`] works directly on that partition.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{Config, ConfigSpace};
use crate::error::{Error, Result};
use crate::rundata::DatasetRuns;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    pub max_features_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings {
            n_trees: 16,
            min_samples_leaf: 1,
            max_features_fraction: 5.0 / 6.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be >= 1".into()));
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max_features_fraction must be in (0, 1], got {}",
                self.max_features_fraction
            )));
        }
        Ok(())
    }
}

/// How a split node routes a point to its left child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Left when the internal value is `< threshold`.
    Threshold(f64),
    /// Left when the category index is flagged in the mask.
    Categories(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        dim: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

/// Extent of a leaf along one dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum Side {
    /// `[lo, hi)`, closed at 1.
    Interval { lo: f64, hi: f64 },
    Categories(Vec<bool>),
}

impl Side {
    pub fn measure(&self) -> f64 {
        match self {
            Side::Interval { lo, hi } => hi - lo,
            Side::Categories(mask) => {
                mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            Side::Interval { lo, hi } => *lo <= x && (x < *hi || (*hi >= 1.0 && x <= 1.0)),
            Side::Categories(mask) => {
                x >= 0.0 && (x as usize) < mask.len() && mask[x as usize]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafBox {
    pub sides: Vec<Side>,
    pub value: f64,
    pub weight: f64,
}

impl LeafBox {
    pub fn contains(&self, point: &[f64]) -> bool {
        self.sides.iter().zip(point).all(|(s, &x)| s.contains(x))
    }
}

/// Per-dimension layout: `None` for numeric, `Some(c)` for `c` categories.
pub type Layout = Vec<Option<usize>>;

pub fn layout_of(space: &ConfigSpace) -> Layout {
    space.specs().iter().map(|s| s.n_categories()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionTree {
    #[serde(skip)]
    layout: Layout,
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Builds a tree from a node arena rooted at index 0. Every split must cut
    /// the region it applies to into two non-empty parts.
    pub fn from_nodes(layout: Layout, nodes: Vec<Node>) -> Result<Self> {
        let tree = RegressionTree { layout, nodes };
        if tree.nodes.is_empty() {
            return Err(Error::InvalidArgument("tree has no nodes".into()));
        }
        let mut visited = vec![false; tree.nodes.len()];
        let mut stack = vec![(0usize, tree.unit_box())];
        while let Some((id, sides)) = stack.pop() {
            if std::mem::replace(&mut visited[id], true) {
                return Err(Error::InvalidArgument(format!("node {id} reached twice")));
            }
            match &tree.nodes[id] {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::InvalidArgument(format!("leaf {id} is not finite")));
                    }
                }
                Node::Split {
                    dim,
                    rule,
                    left,
                    right,
                } => {
                    if *dim >= tree.layout.len() || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                        return Err(Error::InvalidArgument(format!("node {id} has bad indices")));
                    }
                    let (l, r) = split_side(&sides[*dim], rule).ok_or_else(|| {
                        Error::InvalidArgument(format!("node {id}: split does not cut its region"))
                    })?;
                    let mut ls = sides.clone();
                    ls[*dim] = l;
                    let mut rs = sides;
                    rs[*dim] = r;
                    stack.push((*left, ls));
                    stack.push((*right, rs));
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::InvalidArgument("unreachable nodes in tree".into()));
        }
        Ok(tree)
    }

    pub fn single_leaf(layout: Layout, value: f64) -> Self {
        RegressionTree {
            layout,
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    fn unit_box(&self) -> Vec<Side> {
        self.layout
            .iter()
            .map(|l| match l {
                None => Side::Interval { lo: 0.0, hi: 1.0 },
                Some(c) => Side::Categories(vec![true; *c]),
            })
            .collect()
    }

    /// Prediction for a point in internal coordinates.
    pub fn predict_point(&self, point: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    dim,
                    rule,
                    left,
                    right,
                } => {
                    let x = point[*dim];
                    let go_left = match rule {
                        SplitRule::Threshold(t) => x < *t,
                        SplitRule::Categories(mask) => mask.get(x as usize).copied().unwrap_or(false),
                    };
                    id = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Enumerates every leaf as a box; the weights sum to one.
    pub fn leaf_partition(&self) -> Vec<LeafBox> {
        let mut out = Vec::with_capacity(self.n_leaves());
        let mut stack = vec![(0usize, self.unit_box())];
        while let Some((id, sides)) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { value } => {
                    let weight = sides.iter().map(Side::measure).product();
                    out.push(LeafBox {
                        sides,
                        value: *value,
                        weight,
                    });
                }
                Node::Split {
                    dim,
                    rule,
                    left,
                    right,
                } => {
                    let (l, r) = split_side(&sides[*dim], rule)
                        .expect("validated trees only cut non-empty regions");
                    let mut ls = sides.clone();
                    ls[*dim] = l;
                    let mut rs = sides;
                    rs[*dim] = r;
                    // right first so leaves come out left-to-right
                    stack.push((*right, rs));
                    stack.push((*left, ls));
                }
            }
        }
        out
    }
}

fn split_side(side: &Side, rule: &SplitRule) -> Option<(Side, Side)> {
    match (side, rule) {
        (Side::Interval { lo, hi }, SplitRule::Threshold(t)) => {
            if *t > *lo && *t < *hi && *t > 0.0 && *t < 1.0 {
                Some((
                    Side::Interval { lo: *lo, hi: *t },
                    Side::Interval { lo: *t, hi: *hi },
                ))
            } else {
                None
            }
        }
        (Side::Categories(cur), SplitRule::Categories(mask)) if mask.len() == cur.len() => {
            let left: Vec<bool> = cur.iter().zip(mask).map(|(&c, &m)| c && m).collect();
            let right: Vec<bool> = cur.iter().zip(mask).map(|(&c, &m)| c && !m).collect();
            if left.iter().any(|&b| b) && right.iter().any(|&b| b) {
                Some((Side::Categories(left), Side::Categories(right)))
            } else {
                None
            }
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionForest {
    trees: Vec<RegressionTree>,
    space: ConfigSpace,
    settings: ForestSettings,
}

impl RegressionForest {
    pub fn from_trees(space: ConfigSpace, trees: Vec<RegressionTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        let layout = layout_of(&space);
        if trees.iter().any(|t| t.layout != layout) {
            return Err(Error::InvalidArgument("tree layout does not match the space".into()));
        }
        let settings = ForestSettings {
            n_trees: trees.len(),
            ..ForestSettings::default()
        };
        Ok(RegressionForest {
            trees,
            space,
            settings,
        })
    }

    pub fn fit(data: &DatasetRuns, space: &ConfigSpace, settings: &ForestSettings) -> Result<Self> {
        let points = data.internal_points(space)?;
        Self::fit_points(&points, &data.targets(), space, settings)
    }

    /// Fits on points already in internal coordinates.
    pub fn fit_points(
        points: &[Vec<f64>],
        y: &[f64],
        space: &ConfigSpace,
        settings: &ForestSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if points.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} targets",
                points.len(),
                y.len()
            )));
        }
        if y.len() < 2 {
            return Err(Error::TooFewSamples(y.len()));
        }
        if y.iter().all(|&v| v == y[0]) {
            return Err(Error::ConstantTarget);
        }
        if let Some(p) = points.iter().find(|p| p.len() != space.len()) {
            return Err(Error::InvalidArgument(format!(
                "point of dimension {} for a space of {}",
                p.len(),
                space.len()
            )));
        }
        let layout = layout_of(space);
        let trees = (0..settings.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                rng.set_stream(i as u64);
                grow_tree(points, y, &layout, settings, &mut rng)
            })
            .collect();
        Ok(RegressionForest {
            trees,
            space: space.clone(),
            settings: settings.clone(),
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn settings(&self) -> &ForestSettings {
        &self.settings
    }

    pub fn predict_point(&self, point: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_point(point)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, config: &Config) -> Result<f64> {
        Ok(self.predict_point(&self.space.to_internal(config)?))
    }

    /// Debug dump of all trees; not a stable format.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            names: Vec<&'a str>,
            settings: &'a ForestSettings,
            trees: &'a [RegressionTree],
        }
        serde_json::to_string_pretty(&Dump {
            names: self.space.names().collect(),
            settings: &self.settings,
            trees: &self.trees,
        })
        .expect("forest serializes")
    }
}

struct BestSplit {
    gain: f64,
    dim: usize,
    rule: SplitRule,
}

fn grow_tree(
    points: &[Vec<f64>],
    y: &[f64],
    layout: &Layout,
    settings: &ForestSettings,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let k = y.len();
    let indices: Vec<usize> = if settings.bootstrap {
        (0..k).map(|_| rng.random_range(0..k)).collect()
    } else {
        (0..k).collect()
    };
    let n_dims = layout.len();
    let n_try = ((settings.max_features_fraction * n_dims as f64).ceil() as usize).clamp(1, n_dims);
    let min_leaf = settings.min_samples_leaf;

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut work = vec![(0usize, indices)];
    while let Some((id, idx)) = work.pop() {
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        let first = y[idx[0]];
        let splittable = idx.len() >= 2 * min_leaf && idx.iter().any(|&i| y[i] != first);
        let best = if splittable {
            let dims = sample(rng, n_dims, n_try);
            best_split(points, y, &idx, dims.iter(), layout, min_leaf, mean)
        } else {
            None
        };
        let Some(best) = best else {
            nodes[id] = Node::Leaf { value: mean };
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| goes_left(&best.rule, points[i][best.dim]));
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            dim: best.dim,
            rule: best.rule,
            left,
            right,
        };
        work.push((right, right_idx));
        work.push((left, left_idx));
    }
    RegressionTree {
        layout: layout.clone(),
        nodes,
    }
}

fn goes_left(rule: &SplitRule, x: f64) -> bool {
    match rule {
        SplitRule::Threshold(t) => x < *t,
        SplitRule::Categories(mask) => mask[x as usize],
    }
}

/// Variance-reduction split search over the candidate dimensions. Gains are
/// computed on targets centred at the node mean.
fn best_split(
    points: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    dims: impl Iterator<Item = usize>,
    layout: &Layout,
    min_leaf: usize,
    mean: f64,
) -> Option<BestSplit> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i] - mean).sum();
    let sse: f64 = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    let base = total * total / n as f64;
    let min_gain = sse * 1e-12;
    let mut best: Option<BestSplit> = None;
    let mut consider = |gain: f64, dim: usize, rule: SplitRule| {
        if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(BestSplit { gain, dim, rule });
        }
    };
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for dim in dims {
        match layout[dim] {
            None => {
                pairs.clear();
                pairs.extend(idx.iter().map(|&i| (points[i][dim], y[i] - mean)));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut left_sum = 0.0;
                let mut best_here: Option<(f64, f64)> = None;
                for i in 1..n {
                    left_sum += pairs[i - 1].1;
                    if i < min_leaf || n - i < min_leaf {
                        continue;
                    }
                    let (a, b) = (pairs[i - 1].0, pairs[i].0);
                    if a >= b {
                        continue;
                    }
                    let t = a + (b - a) / 2.0;
                    if !(t > a && t <= b && t > 0.0 && t < 1.0) {
                        continue;
                    }
                    let right_sum = total - left_sum;
                    let gain = left_sum * left_sum / i as f64
                        + right_sum * right_sum / (n - i) as f64
                        - base;
                    if best_here.is_none_or(|(g, _)| gain > g) {
                        best_here = Some((gain, t));
                    }
                }
                if let Some((gain, t)) = best_here {
                    consider(gain, dim, SplitRule::Threshold(t));
                }
            }
            Some(n_cat) => {
                let mut counts = vec![0usize; n_cat];
                let mut sums = vec![0.0; n_cat];
                for &i in idx {
                    let c = points[i][dim] as usize;
                    counts[c] += 1;
                    sums[c] += y[i] - mean;
                }
                for c in 0..n_cat {
                    let nl = counts[c];
                    if nl < min_leaf || n - nl < min_leaf || nl == 0 || nl == n {
                        continue;
                    }
                    let right_sum = total - sums[c];
                    let gain = sums[c] * sums[c] / nl as f64
                        + right_sum * right_sum / (n - nl) as f64
                        - base;
                    let mut mask = vec![false; n_cat];
                    mask[c] = true;
                    consider(gain, dim, SplitRule::Categories(mask));
                }
            }
        }
    }
    best
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::configspace::HyperparameterSpec;

    pub(crate) fn unit_space(n: usize) -> ConfigSpace {
        ConfigSpace::new(
            (0..n)
                .map(|i| HyperparameterSpec::continuous(format!("x{}", i + 1), 0.0, 1.0, false).unwrap())
                .collect(),
        )
        .unwrap()
    }

    /// Split on dim 0 at 0.5, leaves 0 and 1, over two numeric dims.
    pub(crate) fn t0() -> RegressionTree {
        RegressionTree::from_nodes(
            vec![None, None],
            vec![
                Node::Split {
                    dim: 0,
                    rule: SplitRule::Threshold(0.5),
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn t0_predictions_and_partition() {
        let t = t0();
        assert_eq!(t.predict_point(&[0.3, 0.9]), 0.0);
        assert_eq!(t.predict_point(&[0.7, 0.1]), 1.0);
        let boxes = t.leaf_partition();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].sides[0], Side::Interval { lo: 0.0, hi: 0.5 });
        assert_eq!(boxes[0].sides[1], Side::Interval { lo: 0.0, hi: 1.0 });
        assert_eq!((boxes[0].value, boxes[0].weight), (0.0, 0.5));
        assert_eq!(boxes[1].sides[0], Side::Interval { lo: 0.5, hi: 1.0 });
        assert_eq!((boxes[1].value, boxes[1].weight), (1.0, 0.5));

        let forest = RegressionForest::from_trees(unit_space(2), vec![t.clone(), t]).unwrap();
        assert_eq!(forest.predict_point(&[0.3, 0.5]), 0.0);
        assert_eq!(forest.predict_point(&[0.7, 0.5]), 1.0);
    }

    #[test]
    fn single_leaf_and_categorical_weights() {
        let leaf = RegressionTree::single_leaf(vec![None], 3.0);
        let boxes = leaf.leaf_partition();
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].weight, 1.0);

        let cat = RegressionTree::from_nodes(
            vec![Some(3)],
            vec![
                Node::Split {
                    dim: 0,
                    rule: SplitRule::Categories(vec![true, false, false]),
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 2.0 },
            ],
        )
        .unwrap();
        let w: Vec<f64> = cat.leaf_partition().iter().map(|b| b.weight).collect();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cat.predict_point(&[0.0]), 1.0);
        assert_eq!(cat.predict_point(&[2.0]), 2.0);
    }

    #[test]
    fn invalid_trees_are_rejected() {
        // second split re-cuts dim 0 outside the left region
        let bad = RegressionTree::from_nodes(
            vec![None],
            vec![
                Node::Split {
                    dim: 0,
                    rule: SplitRule::Threshold(0.5),
                    left: 1,
                    right: 2,
                },
                Node::Split {
                    dim: 0,
                    rule: SplitRule::Threshold(0.7),
                    left: 3,
                    right: 4,
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
            ],
        );
        assert!(bad.is_err());
        let out_of_range = RegressionTree::from_nodes(
            vec![None],
            vec![
                Node::Split {
                    dim: 0,
                    rule: SplitRule::Threshold(1.0),
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
            ],
        );
        assert!(out_of_range.is_err());
    }

    #[test]
    fn fit_errors() {
        let space = unit_space(1);
        let s = ForestSettings::default();
        assert!(matches!(
            RegressionForest::fit_points(&[vec![0.1]], &[1.0], &space, &s),
            Err(Error::TooFewSamples(1))
        ));
        assert!(matches!(
            RegressionForest::fit_points(&[vec![0.1], vec![0.2]], &[1.0, 1.0], &space, &s),
            Err(Error::ConstantTarget)
        ));
        let zero = ForestSettings {
            n_trees: 0,
            ..ForestSettings::default()
        };
        assert!(RegressionForest::fit_points(&[vec![0.1], vec![0.2]], &[1.0, 2.0], &space, &zero).is_err());
    }

    #[test]
    fn fits_a_linear_function() {
        let space = unit_space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..1000).map(|_| space.sample_internal(&mut rng)).collect();
        let y: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let forest = RegressionForest::fit_points(&pts, &y, &space, &ForestSettings::default()).unwrap();
        let mse = (0..1000)
            .map(|_| {
                let p = space.sample_internal(&mut rng);
                (forest.predict_point(&p) - p[0]).powi(2)
            })
            .sum::<f64>()
            / 1000.0;
        assert!(mse < 0.005, "mse {mse}");

        let again = RegressionForest::fit_points(&pts, &y, &space, &ForestSettings::default()).unwrap();
        assert_eq!(forest, again);
    }

    #[test]
    fn fitted_partitions_are_complete() {
        let space = ConfigSpace::new(vec![
            HyperparameterSpec::continuous("a", 0.0, 1.0, false).unwrap(),
            HyperparameterSpec::categorical("b", ["p", "q", "r"]).unwrap(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| space.sample_internal(&mut rng)).collect();
        let y: Vec<f64> = pts.iter().map(|p| p[0] * (1.0 + p[1])).collect();
        let settings = ForestSettings {
            n_trees: 4,
            min_samples_leaf: 3,
            ..ForestSettings::default()
        };
        let forest = RegressionForest::fit_points(&pts, &y, &space, &settings).unwrap();
        for tree in forest.trees() {
            let boxes = tree.leaf_partition();
            let total: f64 = boxes.iter().map(|b| b.weight).sum();
            assert!((total - 1.0).abs() < 1e-9);
            for n in tree.nodes() {
                if let Node::Split {
                    rule: SplitRule::Threshold(t),
                    ..
                } = n
                {
                    assert!(*t > 0.0 && *t < 1.0);
                }
            }
            for _ in 0..1000 {
                let p = space.sample_internal(&mut rng);
                let hits: Vec<&LeafBox> = boxes.iter().filter(|b| b.contains(&p)).collect();
                assert_eq!(hits.len(), 1);
                assert_eq!(hits[0].value, tree.predict_point(&p));
            }
        }
    }

    #[test]
    fn partition_mean_matches_monte_carlo() {
        let space = unit_space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..200).map(|_| space.sample_internal(&mut rng)).collect();
        let y: Vec<f64> = pts.iter().map(|p| (6.0 * p[0]).sin() + p[1] * p[1]).collect();
        let forest = RegressionForest::fit_points(&pts, &y, &space, &ForestSettings::default()).unwrap();
        let tree = &forest.trees()[0];
        let exact: f64 = tree.leaf_partition().iter().map(|b| b.weight * b.value).sum();
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| tree.predict_point(&space.sample_internal(&mut rng)))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }
}
