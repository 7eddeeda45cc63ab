//! Functional ANOVA over piecewise-constant tree predictions.
//!
//! For a subset `U` of dimensions, every threshold (or category) the tree
//! uses on a dimension of `U` induces a grid on the `U` sub-cube. The
//! marginal `â_U` is constant on each grid cell, so the component
//! `f_U = â_U - Σ_{W ⊊ U} f_W` and its variance `V_U = ∫ f_U²` are computed
//! exactly as finite sums over cells. Each leaf adds a constant over a block
//! of cells; the blocks are accumulated with an N-dimensional difference
//! array, so building `â_U` costs `O(#leaves + #cells)`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::configspace::{ConfigSpace, SubsetSelector};
use crate::error::{Error, Result};
use crate::forest::{LeafBox, RegressionForest, RegressionTree, Side};

/// Values within this distance below zero are treated as rounding noise.
pub const FRACTION_EPS: f64 = 1e-9;

/// Largest grid (in cells) a single subset may expand to.
pub const MAX_GRID_CELLS: usize = 1 << 27;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalQuery {
    pub subset: SubsetSelector,
    /// Internal value (or category index) for each dimension of `subset`, in order.
    pub values: Vec<f64>,
}

impl MarginalQuery {
    pub fn new(subset: SubsetSelector, values: Vec<f64>) -> Result<Self> {
        if subset.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a subset of {} dimensions",
                values.len(),
                subset.len()
            )));
        }
        Ok(MarginalQuery { subset, values })
    }
}

/// Average prediction over all completions of the partial instantiation.
pub fn marginal(tree: &RegressionTree, query: &MarginalQuery) -> f64 {
    marginal_over(&tree.leaf_partition(), query)
}

pub fn marginal_over(boxes: &[LeafBox], query: &MarginalQuery) -> f64 {
    let dims = query.subset.dims();
    boxes
        .iter()
        .filter(|b| dims.iter().zip(&query.values).all(|(&d, &v)| b.sides[d].contains(v)))
        .map(|b| {
            let rest: f64 = b
                .sides
                .iter()
                .enumerate()
                .filter(|(j, _)| !query.subset.contains(*j))
                .map(|(_, s)| s.measure())
                .product();
            b.value * rest
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDecomposition {
    /// `f_∅`, the mean prediction over the unit cube.
    pub mean: f64,
    pub total_variance: f64,
    /// Raw `V_U` per subset with `1 <= |U| <= max_order`.
    pub components: BTreeMap<SubsetSelector, f64>,
}

impl TreeDecomposition {
    pub fn fraction(&self, subset: &SubsetSelector) -> Option<f64> {
        self.components
            .get(subset)
            .map(|v| v / self.total_variance)
    }
}

/// Per-dimension cell structure induced by one tree.
struct DimCells {
    /// Cell boundaries for numeric dims (`[0, t_1, .., 1]`), empty for categorical.
    edges: Vec<f64>,
    measures: Vec<f64>,
}

impl DimCells {
    fn numeric(mut edges: Vec<f64>) -> Self {
        edges.push(0.0);
        edges.push(1.0);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let measures = edges.windows(2).map(|w| w[1] - w[0]).collect();
        DimCells { edges, measures }
    }

    fn categorical(n: usize) -> Self {
        DimCells {
            edges: Vec::new(),
            measures: vec![1.0 / n as f64; n],
        }
    }

    fn len(&self) -> usize {
        self.measures.len()
    }

    /// Half-open cell-index runs covered by a leaf side.
    fn runs(&self, side: &Side) -> Vec<(usize, usize)> {
        match side {
            Side::Interval { lo, hi } => {
                let find = |x: &f64| {
                    self.edges
                        .binary_search_by(|e| e.total_cmp(x))
                        .expect("leaf bounds are tree thresholds")
                };
                vec![(find(lo), find(hi))]
            }
            Side::Categories(mask) => {
                let mut out = Vec::new();
                let mut start = None;
                for (i, &m) in mask.iter().chain(std::iter::once(&false)).enumerate() {
                    match (m, start) {
                        (true, None) => start = Some(i),
                        (false, Some(s)) => {
                            out.push((s, i));
                            start = None;
                        }
                        _ => {}
                    }
                }
                out
            }
        }
    }
}

/// Dense row-major grid over the cells of a subset.
struct Grid {
    shape: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl Grid {
    fn zeros(shape: Vec<usize>) -> Result<Self> {
        let size = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&s| s <= MAX_GRID_CELLS)
            .ok_or_else(|| {
                Error::Unsupported(format!("interaction grid {shape:?} exceeds {MAX_GRID_CELLS} cells"))
            })?;
        let mut strides = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        Ok(Grid {
            shape,
            strides,
            values: vec![0.0; size],
        })
    }

    fn add_block(&mut self, runs: &[(usize, usize)], value: f64) {
        let k = runs.len();
        'corner: for mask in 0..(1u32 << k) {
            let mut flat = 0;
            for (i, &(a, b)) in runs.iter().enumerate() {
                let idx = if mask & (1 << i) != 0 { b } else { a };
                if idx >= self.shape[i] {
                    continue 'corner;
                }
                flat += idx * self.strides[i];
            }
            if mask.count_ones() % 2 == 0 {
                self.values[flat] += value;
            } else {
                self.values[flat] -= value;
            }
        }
    }

    fn prefix_sum(&mut self) {
        for axis in 0..self.shape.len() {
            let stride = self.strides[axis];
            let block = stride * self.shape[axis];
            for base in (0..self.values.len()).step_by(block) {
                for f in base + stride..base + block {
                    self.values[f] += self.values[f - stride];
                }
            }
        }
    }
}

struct TreeCells {
    boxes: Vec<LeafBox>,
    dims: Vec<DimCells>,
    /// `runs[leaf][dim]`
    runs: Vec<Vec<Vec<(usize, usize)>>>,
}

impl TreeCells {
    fn new(tree: &RegressionTree) -> Self {
        let boxes = tree.leaf_partition();
        let dims: Vec<DimCells> = tree
            .layout()
            .iter()
            .enumerate()
            .map(|(d, kind)| match kind {
                Some(c) => DimCells::categorical(*c),
                None => DimCells::numeric(
                    boxes
                        .iter()
                        .flat_map(|b| match b.sides[d] {
                            Side::Interval { lo, hi } => [lo, hi],
                            Side::Categories(_) => unreachable!("numeric dim"),
                        })
                        .collect(),
                ),
            })
            .collect();
        let runs = boxes
            .iter()
            .map(|b| dims.iter().zip(&b.sides).map(|(dc, s)| dc.runs(s)).collect())
            .collect();
        TreeCells { boxes, dims, runs }
    }

    /// Builds the grid of `â_U`.
    fn marginal_grid(&self, subset: &[usize]) -> Result<Grid> {
        let mut grid = Grid::zeros(subset.iter().map(|&d| self.dims[d].len()).collect())?;
        let mut block = vec![(0, 0); subset.len()];
        for (leaf, b) in self.boxes.iter().enumerate() {
            let rest: f64 = b
                .sides
                .iter()
                .enumerate()
                .filter(|(j, _)| !subset.contains(j))
                .map(|(_, s)| s.measure())
                .product();
            let g = b.value * rest;
            if g == 0.0 {
                continue;
            }
            let per_dim: Vec<&Vec<(usize, usize)>> =
                subset.iter().map(|&d| &self.runs[leaf][d]).collect();
            // cartesian product over the runs of each dimension
            let mut choice = vec![0usize; subset.len()];
            'blocks: loop {
                for (i, runs) in per_dim.iter().enumerate() {
                    block[i] = runs[choice[i]];
                }
                grid.add_block(&block, g);
                let mut i = subset.len();
                loop {
                    if i == 0 {
                        break 'blocks;
                    }
                    i -= 1;
                    choice[i] += 1;
                    if choice[i] < per_dim[i].len() {
                        continue 'blocks;
                    }
                    choice[i] = 0;
                }
            }
        }
        grid.prefix_sum();
        Ok(grid)
    }
}

/// Decomposes one tree's variance into `V_U` for every `1 <= |U| <= max_order`.
pub fn decompose_tree(tree: &RegressionTree, max_order: usize) -> Result<TreeDecomposition> {
    if !(1..=3).contains(&max_order) {
        return Err(Error::InvalidArgument(format!(
            "max_order must be 1, 2 or 3, got {max_order}"
        )));
    }
    let cells = TreeCells::new(tree);
    let mean: f64 = cells.boxes.iter().map(|b| b.weight * b.value).sum();
    let total_variance: f64 = cells
        .boxes
        .iter()
        .map(|b| b.weight * (b.value - mean).powi(2))
        .sum();
    let first = cells.boxes[0].value;
    if cells.boxes.iter().all(|b| b.value == first) || total_variance <= 0.0 {
        return Err(Error::DegenerateTree);
    }

    let n = tree.layout().len();
    let mut components = BTreeMap::new();
    let mut kept: HashMap<SubsetSelector, Grid> = HashMap::new();
    for subset in SubsetSelector::all_up_to(n, max_order) {
        let dims = subset.dims();
        if dims.len() == n {
            // the marginal over every dim is the tree itself
            let lower: f64 = subset.proper_subsets().iter().map(|w| components[w]).sum();
            components.insert(subset, total_variance - lower);
            continue;
        }
        let mut grid = cells.marginal_grid(dims)?;
        let lower: Vec<(Vec<usize>, &Grid)> = subset
            .proper_subsets()
            .into_iter()
            .map(|w| {
                let g = &kept[&w];
                // stride of each U position inside W's grid (0 when absent)
                let mut strides = vec![0; dims.len()];
                for (wi, d) in w.dims().iter().enumerate() {
                    let ui = dims.iter().position(|x| x == d).unwrap();
                    strides[ui] = g.strides[wi];
                }
                (strides, g)
            })
            .collect();

        let measures: Vec<&[f64]> = dims.iter().map(|&d| cells.dims[d].measures.as_slice()).collect();
        let last = dims.len() - 1;
        let row_len = grid.shape[last];
        let last_measures = measures[last];
        let last_strides: Vec<usize> = lower.iter().map(|(s, _)| s[last]).collect();
        let mut bases = vec![0usize; lower.len()];
        let mut coords = vec![0usize; last];
        let mut v_u = 0.0;
        for row in grid.values.chunks_exact_mut(row_len) {
            let row_measure: f64 = coords.iter().zip(&measures).map(|(&c, ms)| ms[c]).product();
            for (b, (strides, _)) in bases.iter_mut().zip(&lower) {
                *b = coords.iter().zip(strides).map(|(c, s)| c * s).sum();
            }
            let mut acc = 0.0;
            for (c, value) in row.iter_mut().enumerate() {
                let mut f = *value - mean;
                for ((b, s), (_, g)) in bases.iter().zip(&last_strides).zip(&lower) {
                    f -= g.values[b + c * s];
                }
                *value = f;
                acc += last_measures[c] * f * f;
            }
            v_u += row_measure * acc;
            for i in (0..last).rev() {
                coords[i] += 1;
                if coords[i] < grid.shape[i] {
                    break;
                }
                coords[i] = 0;
            }
        }
        components.insert(subset.clone(), v_u);
        if subset.len() < max_order {
            kept.insert(subset, grid);
        }
    }
    Ok(TreeDecomposition {
        mean,
        total_variance,
        components,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDecomposition {
    pub max_order: usize,
    /// Per tree, `None` for trees skipped because their variance is zero.
    pub trees: Vec<Option<TreeDecomposition>>,
    /// Subsets in size-then-lexicographic order.
    pub subsets: Vec<SubsetSelector>,
    /// Mean over non-degenerate trees of `V_U / V`, aligned with `subsets`.
    pub fractions: Vec<f64>,
    pub v_total_mean: f64,
}

impl VarianceDecomposition {
    /// Raw (unclamped) mean fraction.
    pub fn raw_fraction(&self, subset: &SubsetSelector) -> Option<f64> {
        self.subsets
            .iter()
            .position(|s| s == subset)
            .map(|i| self.fractions[i])
    }

    /// Fraction clamped into `[0, 1]` for reporting.
    pub fn fraction(&self, subset: &SubsetSelector) -> Option<f64> {
        self.raw_fraction(subset).map(|f| f.clamp(0.0, 1.0))
    }

    pub fn singleton_fractions(&self) -> Vec<f64> {
        self.subsets
            .iter()
            .zip(&self.fractions)
            .filter(|(s, _)| s.len() == 1)
            .map(|(_, f)| f.clamp(0.0, 1.0))
            .collect()
    }

    pub fn used_trees(&self) -> usize {
        self.trees.iter().filter(|t| t.is_some()).count()
    }

    /// Report fragment with subset keys joined by `*`.
    pub fn fragment(&self, dataset_id: &str, space: &ConfigSpace) -> ImportanceFragment {
        let fractions = self
            .subsets
            .iter()
            .zip(&self.fractions)
            .map(|(s, f)| (s.key(space), serde_json::Value::from(f.clamp(0.0, 1.0))))
            .collect();
        ImportanceFragment {
            dataset_id: dataset_id.to_string(),
            fractions,
            v_total_mean: self.v_total_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceFragment {
    pub dataset_id: String,
    pub fractions: serde_json::Map<String, serde_json::Value>,
    pub v_total_mean: f64,
}

/// Forest-level importance: per-tree fractions averaged over trees with
/// non-zero variance.
pub fn importance(forest: &RegressionForest, max_order: usize) -> Result<VarianceDecomposition> {
    let results: Vec<Result<TreeDecomposition>> = forest
        .trees()
        .par_iter()
        .map(|t| decompose_tree(t, max_order))
        .collect();
    let mut trees = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(d) => trees.push(Some(d)),
            Err(Error::DegenerateTree) => trees.push(None),
            Err(e) => return Err(e),
        }
    }
    let used: Vec<&TreeDecomposition> = trees.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::ConstantModel);
    }
    let subsets = SubsetSelector::all_up_to(forest.space().len(), max_order);
    let fractions = subsets
        .iter()
        .map(|s| used.iter().map(|t| t.fraction(s).unwrap_or(0.0)).sum::<f64>() / used.len() as f64)
        .collect();
    let v_total_mean = used.iter().map(|t| t.total_variance).sum::<f64>() / used.len() as f64;
    Ok(VarianceDecomposition {
        max_order,
        trees,
        subsets,
        fractions,
        v_total_mean,
    })
}

/// The `k` interaction subsets (`|U| >= 2`) with the largest fractions,
/// ties broken by lexicographic subset order.
pub fn top_interactions(vd: &VarianceDecomposition, k: usize) -> Vec<(SubsetSelector, f64)> {
    let mut items: Vec<(SubsetSelector, f64)> = vd
        .subsets
        .iter()
        .zip(&vd.fractions)
        .filter(|(s, _)| s.len() >= 2)
        .map(|(s, f)| (s.clone(), f.clamp(0.0, 1.0)))
        .collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.truncate(k);
    items
}
