//! Test-side oracles: a random small-tree generator and a brute-force
//! functional ANOVA over the grid of cells induced by a tree's splits.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use hypimp::configspace::{ConfigSpace, HyperparameterSpec};
use hypimp::forest::{Layout, Node, RegressionTree, SplitRule};
use rand::Rng;

/// Space with unit numeric dims and `c`-way categorical dims per `layout`.
pub fn space_for(layout: &Layout) -> ConfigSpace {
    ConfigSpace::new(
        layout
            .iter()
            .enumerate()
            .map(|(j, l)| match l {
                None => HyperparameterSpec::continuous(format!("x{j}"), 0.0, 1.0, false).unwrap(),
                Some(c) => HyperparameterSpec::categorical(format!("x{j}"), (0..*c).map(|i| format!("c{i}"))).unwrap(),
            })
            .collect(),
    )
    .unwrap()
}

#[derive(Clone)]
enum Extent {
    Interval(f64, f64),
    Allowed(Vec<bool>),
}

/// A tree with between 2 and `max_leaves` leaves built by repeatedly
/// splitting a random leaf along a random dimension that can still be cut.
pub fn random_tree<R: Rng>(rng: &mut R, layout: &Layout, max_leaves: usize) -> RegressionTree {
    let target = rng.random_range(2..=max_leaves.max(2));
    let unit: Vec<Extent> = layout
        .iter()
        .map(|l| match l {
            None => Extent::Interval(0.0, 1.0),
            Some(c) => Extent::Allowed(vec![true; *c]),
        })
        .collect();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut leaves: Vec<(usize, Vec<Extent>)> = vec![(0, unit)];
    let mut attempts = 0;
    while leaves.len() < target && attempts < 1000 {
        attempts += 1;
        let pick = rng.random_range(0..leaves.len());
        let dim = rng.random_range(0..layout.len());
        let (id, region) = leaves[pick].clone();
        let (rule, left_ext, right_ext) = match &region[dim] {
            Extent::Interval(lo, hi) => {
                let t = lo + (hi - lo) * rng.random_range(0.1..0.9);
                (
                    SplitRule::Threshold(t),
                    Extent::Interval(*lo, t),
                    Extent::Interval(t, *hi),
                )
            }
            Extent::Allowed(cur) => {
                let present: Vec<usize> = (0..cur.len()).filter(|&i| cur[i]).collect();
                if present.len() < 2 {
                    continue;
                }
                let mut mask = vec![false; cur.len()];
                loop {
                    for &i in &present {
                        mask[i] = rng.random_bool(0.5);
                    }
                    let n_left = present.iter().filter(|&&i| mask[i]).count();
                    if n_left > 0 && n_left < present.len() {
                        break;
                    }
                }
                let left: Vec<bool> = cur.iter().zip(&mask).map(|(&c, &m)| c && m).collect();
                let right: Vec<bool> = cur.iter().zip(&mask).map(|(&c, &m)| c && !m).collect();
                (SplitRule::Categories(mask), Extent::Allowed(left), Extent::Allowed(right))
            }
        };
        let l = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            dim,
            rule,
            left: l,
            right: l + 1,
        };
        let mut lr = region.clone();
        lr[dim] = left_ext;
        let mut rr = region;
        rr[dim] = right_ext;
        leaves.swap_remove(pick);
        leaves.push((l, lr));
        leaves.push((l + 1, rr));
    }
    for (id, _) in &leaves {
        nodes[*id] = Node::Leaf {
            value: rng.random_range(-1.0..1.0),
        };
    }
    RegressionTree::from_nodes(layout.clone(), nodes).expect("generated splits cut their regions")
}

/// Cells of one dimension as `(representative point, width)`.
fn cells(tree: &RegressionTree, layout: &Layout, dim: usize) -> Vec<(f64, f64)> {
    match layout[dim] {
        Some(c) => (0..c).map(|i| (i as f64, 1.0 / c as f64)).collect(),
        None => {
            let mut cuts = vec![0.0, 1.0];
            for n in tree.nodes() {
                if let Node::Split {
                    dim: d,
                    rule: SplitRule::Threshold(t),
                    ..
                } = n
                {
                    if *d == dim {
                        cuts.push(*t);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).collect()
        }
    }
}

pub struct GridAnova {
    pub mean: f64,
    pub total_variance: f64,
    /// `V_U` for every non-empty subset up to the requested order.
    pub components: BTreeMap<Vec<usize>, f64>,
}

impl GridAnova {
    pub fn fraction(&self, u: &[usize]) -> f64 {
        self.components[u] / self.total_variance
    }
}

fn subsets_up_to(n: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let u: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        if u.len() <= max_order {
            out.push(u);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Functional ANOVA by explicit summation over every grid cell, evaluating
/// the tree only through `predict_point`.
pub fn grid_anova(tree: &RegressionTree, max_order: usize) -> GridAnova {
    let layout = tree.layout().clone();
    let n = layout.len();
    let per_dim: Vec<Vec<(f64, f64)>> = (0..n).map(|d| cells(tree, &layout, d)).collect();
    let mut grid: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    let mut idx = vec![0usize; n];
    'outer: loop {
        let point: Vec<f64> = idx.iter().enumerate().map(|(d, &i)| per_dim[d][i].0).collect();
        let w: f64 = idx.iter().enumerate().map(|(d, &i)| per_dim[d][i].1).product();
        grid.push((idx.clone(), w, tree.predict_point(&point)));
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < per_dim[d].len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    let mean: f64 = grid.iter().map(|(_, w, f)| w * f).sum();
    let total_variance: f64 = grid.iter().map(|(_, w, f)| w * (f - mean).powi(2)).sum();

    let width = |u: &[usize], key: &[usize]| -> f64 { u.iter().zip(key).map(|(&d, &i)| per_dim[d][i].1).product() };
    // marginal means keyed by subset, then by the subset's cell indices
    let mut marg: HashMap<Vec<usize>, HashMap<Vec<usize>, f64>> = HashMap::new();
    let all = subsets_up_to(n, max_order);
    for u in &all {
        let mut m: HashMap<Vec<usize>, f64> = HashMap::new();
        for (cell, w, f) in &grid {
            let key: Vec<usize> = u.iter().map(|&d| cell[d]).collect();
            *m.entry(key).or_default() += w * f;
        }
        for (key, v) in m.iter_mut() {
            *v /= width(u, key);
        }
        marg.insert(u.clone(), m);
    }
    let mut components = BTreeMap::new();
    for u in &all {
        let mut v_u = 0.0;
        for key in marg[u].keys() {
            // inclusion-exclusion over all W ⊆ U
            let mut f_u = 0.0;
            for wmask in 0u32..(1 << u.len()) {
                let pos: Vec<usize> = (0..u.len()).filter(|&i| wmask & (1 << i) != 0).collect();
                let sign = if (u.len() - pos.len()) % 2 == 0 { 1.0 } else { -1.0 };
                let a = if pos.is_empty() {
                    mean
                } else {
                    let w: Vec<usize> = pos.iter().map(|&i| u[i]).collect();
                    let wk: Vec<usize> = pos.iter().map(|&i| key[i]).collect();
                    marg[&w][&wk]
                };
                f_u += sign * a;
            }
            v_u += width(u, key) * f_u * f_u;
        }
        components.insert(u.clone(), v_u);
    }
    GridAnova {
        mean,
        total_variance,
        components,
    }
}
