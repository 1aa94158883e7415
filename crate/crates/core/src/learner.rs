//! CART decision trees and a bootstrap-aggregated random forest.
//!
//! Trees are stored as a flat preorder arena: the root is node 0 and the
//! left child of a split always immediately follows it. Every node records
//! its cover (the number of training draws that reached it), which the
//! TreeSHAP code uses as marginalisation weights.

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: u64,
    },
    Leaf { value: f64, cover: u64 },
}

impl Node {
    pub fn cover(&self) -> u64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from a preorder node list, checking structure, cover
    /// conservation and leaf ranges.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("a tree needs at least one node"));
        }
        let tree = Tree { nodes };
        let end = tree.check(0, 0)?;
        if end != tree.nodes.len() {
            return Err(Error::invalid(format!(
                "tree has {} unreachable trailing node(s)",
                tree.nodes.len() - end
            )));
        }
        Ok(tree)
    }

    /// Validates the subtree at `idx`; returns the index after it.
    fn check(&self, idx: usize, depth: usize) -> Result<usize> {
        if depth > 4096 {
            return Err(Error::invalid("tree is too deep"));
        }
        match self.nodes.get(idx) {
            None => Err(Error::invalid(format!("tree node {idx} is missing"))),
            Some(Node::Leaf { value, .. }) => {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::invalid(format!("leaf value {value} outside [0, 1]")));
                }
                Ok(idx + 1)
            }
            Some(&Node::Split {
                left,
                right,
                cover,
                threshold,
                ..
            }) => {
                if left != idx + 1 {
                    return Err(Error::invalid(format!("node {idx} is not in preorder")));
                }
                if threshold.is_nan() {
                    return Err(Error::invalid(format!("node {idx} has a NaN threshold")));
                }
                let after_left = self.check(left, depth + 1)?;
                if right != after_left {
                    return Err(Error::invalid(format!("node {idx} is not in preorder")));
                }
                let end = self.check(right, depth + 1)?;
                let children = self.nodes[left].cover() + self.nodes[right].cover();
                if children != cover {
                    return Err(Error::invalid(format!(
                        "node {idx} cover {cover} differs from its children's total {children}"
                    )));
                }
                Ok(end)
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Cover-weighted mean leaf value: the expected prediction over the
    /// training draws.
    pub fn base_value(&self) -> f64 {
        let total = self.root().cover() as f64;
        if total == 0.0 {
            return 0.0;
        }
        self.nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { value, cover } => value * cover as f64,
                Node::Split { .. } => 0.0,
            })
            .sum::<f64>()
            / total
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, idx: usize) -> usize {
            match t.nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Highest feature index used by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

// ---------------------------------------------------------------------------
// Parameters

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesPerSplit {
    /// `round(sqrt(p))`, at least 1.
    Auto,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            FeaturesPerSplit::Auto => (n_features as f64).sqrt().round() as usize,
            FeaturesPerSplit::All => n_features,
            FeaturesPerSplit::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 80,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeaturesPerSplit::Auto,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if self.features_per_split == FeaturesPerSplit::Count(0) {
            return Err(Error::invalid("features_per_split must be at least 1"));
        }
        Ok(())
    }
}

/// Random stream for tree `tree_index` of a forest seeded with `seed`.
///
/// Streams depend only on (seed, index), so training order and thread count
/// cannot change the model.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

// ---------------------------------------------------------------------------
// Tree induction

struct Builder<'a, R> {
    x: &'a Matrix,
    y: &'a [u8],
    params: &'a ForestParams,
    k_features: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// `n * weighted Gini` of a two-way split given per-side counts.
#[inline]
fn split_score(n_left: f64, pos_left: f64, n_right: f64, pos_right: f64) -> f64 {
    let side = |n: f64, p: f64| n - (p * p + (n - p) * (n - p)) / n;
    side(n_left, pos_left) + side(n_right, pos_right)
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let idx = self.nodes.len();
        let cover = n as u64;
        let leaf = Node::Leaf {
            value: pos as f64 / n as f64,
            cover,
        };
        let stop = pos == 0
            || pos == n
            || self.params.max_depth.is_some_and(|d| depth >= d)
            || n < 2 * self.params.min_samples_leaf;
        if stop {
            self.nodes.push(leaf);
            return idx;
        }
        let Some(best) = self.best_split(&rows, pos) else {
            self.nodes.push(leaf);
            return idx;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, best.feature) <= best.threshold);
        drop(rows);
        self.nodes.push(leaf); // placeholder until the children exist
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            cover,
        };
        idx
    }

    fn best_split(&mut self, rows: &[usize], pos: usize) -> Option<BestSplit> {
        let p = self.x.n_cols();
        let mut candidates: Vec<usize> = if self.k_features >= p {
            (0..p).collect()
        } else {
            index::sample(self.rng, p, self.k_features).into_vec()
        };
        candidates.sort_unstable();
        let mut best = self.scan(rows, pos, &candidates);
        if best.is_none() && candidates.len() < p {
            // The sampled features are all constant here; fall back to the rest.
            let rest: Vec<usize> = (0..p).filter(|f| candidates.binary_search(f).is_err()).collect();
            best = self.scan(rows, pos, &rest);
        }
        best
    }

    fn scan(&mut self, rows: &[usize], pos: usize, features: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let total_pos = pos as f64;
        let mut best: Option<BestSplit> = None;
        for &f in features {
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut pos_left = 0.0;
            for i in 1..n {
                pos_left += f64::from(self.scratch[i - 1].1);
                let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
                if lo == hi || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let n_left = i as f64;
                let impurity =
                    split_score(n_left, pos_left, n as f64 - n_left, total_pos - pos_left);
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid >= lo && mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

fn check_xy(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot fit a tree on empty input"));
    }
    if x.n_cols() == 0 {
        return Err(Error::invalid("cannot fit a tree without features"));
    }
    Ok(())
}

fn grow<R: Rng>(
    x: &Matrix,
    y: &[u8],
    rows: Vec<usize>,
    params: &ForestParams,
    rng: &mut R,
) -> Tree {
    let mut builder = Builder {
        x,
        y,
        params,
        k_features: params.features_per_split.resolve(x.n_cols()),
        rng,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    builder.build(rows, 0);
    Tree {
        nodes: builder.nodes,
    }
}

/// Grows one CART tree on every row of `x`, minimising weighted Gini
/// impurity over midpoints of consecutive distinct values. Ties prefer the
/// lowest feature index, then the lowest threshold.
pub fn fit_tree<R: Rng>(x: &Matrix, y: &[u8], params: &ForestParams, rng: &mut R) -> Result<Tree> {
    check_xy(x, y)?;
    params.validate()?;
    Ok(grow(x, y, (0..y.len()).collect(), params, rng))
}

// ---------------------------------------------------------------------------
// Forest

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    params: ForestParams,
    feature_names: Vec<String>,
}

impl RandomForest {
    pub fn new(trees: Vec<Tree>, params: ForestParams, feature_names: Vec<String>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        for (t, tree) in trees.iter().enumerate() {
            if let Some(f) = tree.max_feature() {
                if f >= feature_names.len() {
                    return Err(Error::invalid(format!(
                        "tree {t} splits on feature {f} but only {} features are named",
                        feature_names.len()
                    )));
                }
            }
        }
        Ok(Self {
            trees,
            params,
            feature_names,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Mean of the leaf values reached in each tree, per row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }

    /// Mean of the per-tree base values.
    pub fn base_value(&self) -> f64 {
        self.trees.iter().map(Tree::base_value).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(data: &Dataset, params: &ForestParams) -> Result<RandomForest> {
    fit_forest_xy(&data.x, &data.y, data.feature_names.clone(), params)
}

/// Trains `n_trees` trees, each on its own bootstrap sample (n draws with
/// replacement) and random stream.
pub fn fit_forest_xy(
    x: &Matrix,
    y: &[u8],
    feature_names: Vec<String>,
    params: &ForestParams,
) -> Result<RandomForest> {
    check_xy(x, y)?;
    params.validate()?;
    if feature_names.len() != x.n_cols() {
        return Err(Error::Dimension {
            expected: feature_names.len(),
            found: x.n_cols(),
        });
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::data("random forest needs both classes in the training labels"));
    }
    let n = y.len();
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, rows, params, &mut rng)
        })
        .collect();
    RandomForest::new(trees, params.clone(), feature_names)
}

// ---------------------------------------------------------------------------
// Model file

const MODEL_FORMAT: &str = "readmit-forest";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FlatNode {
    Split {
        feature: usize,
        threshold: f64,
        cover: u64,
    },
    Leaf {
        leaf: f64,
        cover: u64,
    },
}

#[derive(Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    params: ForestParams,
    feature_names: Vec<String>,
    trees: Vec<Vec<FlatNode>>,
}

fn flatten(tree: &Tree) -> Vec<FlatNode> {
    tree.nodes
        .iter()
        .map(|n| match *n {
            Node::Split {
                feature,
                threshold,
                cover,
                ..
            } => FlatNode::Split {
                feature,
                threshold,
                cover,
            },
            Node::Leaf { value, cover } => FlatNode::Leaf { leaf: value, cover },
        })
        .collect()
}

/// Rebuilds child links of a preorder list.
fn unflatten(flat: &[FlatNode]) -> Result<Tree> {
    fn go(flat: &[FlatNode], idx: usize, nodes: &mut Vec<Node>, depth: usize) -> Result<usize> {
        if depth > 4096 {
            return Err(Error::invalid("tree is too deep"));
        }
        match flat.get(idx) {
            None => Err(Error::invalid("tree node list ends inside a subtree")),
            Some(&FlatNode::Leaf { leaf, cover }) => {
                nodes[idx] = Node::Leaf { value: leaf, cover };
                Ok(idx + 1)
            }
            Some(&FlatNode::Split {
                feature,
                threshold,
                cover,
            }) => {
                let right = go(flat, idx + 1, nodes, depth + 1)?;
                let end = go(flat, right, nodes, depth + 1)?;
                nodes[idx] = Node::Split {
                    feature,
                    threshold,
                    left: idx + 1,
                    right,
                    cover,
                };
                Ok(end)
            }
        }
    }
    let mut nodes = vec![Node::Leaf { value: 0.0, cover: 0 }; flat.len()];
    go(flat, 0, &mut nodes, 0)?;
    Tree::from_nodes(nodes)
}

impl RandomForest {
    /// Text encoding: a JSON object with one tree per line. Floats use the
    /// shortest round-trip representation, so decoding reproduces every
    /// threshold and leaf value bit for bit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{{\"format\":{},\"version\":{},\n",
            serde_json::to_string(MODEL_FORMAT).unwrap(),
            MODEL_VERSION
        ));
        out.push_str(&format!(
            "\"params\":{},\n",
            serde_json::to_string(&self.params).unwrap()
        ));
        out.push_str(&format!(
            "\"feature_names\":{},\n",
            serde_json::to_string(&self.feature_names).unwrap()
        ));
        out.push_str("\"trees\":[\n");
        for (i, tree) in self.trees.iter().enumerate() {
            out.push_str(&serde_json::to_string(&flatten(tree)).unwrap());
            out.push_str(if i + 1 < self.trees.len() { ",\n" } else { "\n" });
        }
        out.push_str("]}\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: ModelFile = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => {
                if let Ok(h) = serde_json::from_str::<ModelHeader>(text) {
                    check_header(&h.format, h.version)?;
                }
                return Err(Error::parse_json(text, e));
            }
        };
        check_header(&file.format, file.version)?;
        let trees = file
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| {
                unflatten(t).map_err(|e| Error::Parse {
                    offset: tree_offset(text, i),
                    message: format!("tree {i}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(trees, file.params, file.feature_names)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn check_header(format: &str, version: u32) -> Result<()> {
    if format != MODEL_FORMAT {
        return Err(Error::Parse {
            offset: 0,
            message: format!("not a forest model file (format '{format}')"),
        });
    }
    if version != MODEL_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    Ok(())
}

/// Byte offset of the line holding tree `i` in files written by `to_text`.
fn tree_offset(text: &str, i: usize) -> usize {
    let Some(start) = text.find("\"trees\":[\n") else {
        return 0;
    };
    let mut offset = start + "\"trees\":[\n".len();
    for line in text[offset..].split_inclusive('\n').take(i) {
        offset += line.len();
    }
    offset
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_scan() -> ForestParams {
        ForestParams {
            features_per_split: FeaturesPerSplit::All,
            bootstrap: false,
            n_trees: 1,
            ..Default::default()
        }
    }

    fn fit(x: &[Vec<f64>], y: &[u8], params: &ForestParams) -> Tree {
        fit_tree(&Matrix::from_rows(x).unwrap(), y, params, &mut tree_rng(0, 0)).unwrap()
    }

    #[test]
    fn pure_input_is_a_single_leaf() {
        let t = fit(&[vec![1.0], vec![2.0], vec![3.0]], &[1, 1, 1], &full_scan());
        assert_eq!(t.nodes(), &[Node::Leaf { value: 1.0, cover: 3 }]);
    }

    #[test]
    fn forced_stump() {
        let t = fit(&[vec![0.0], vec![1.0]], &[0, 1], &full_scan());
        assert_eq!(
            t.nodes(),
            &[
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: 2
                },
                Node::Leaf { value: 0.0, cover: 1 },
                Node::Leaf { value: 1.0, cover: 1 },
            ]
        );
    }

    #[test]
    fn xor_is_learned_exactly() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let params = ForestParams {
            max_depth: Some(2),
            ..full_scan()
        };
        let t = fit(&x, &y, &params);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(t.predict(row), f64::from(label));
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Both columns separate the classes perfectly.
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let t = fit(&x, &[0, 1], &full_scan());
        assert!(matches!(t.root(), Node::Split { feature: 0, .. }));
    }

    #[test]
    fn max_depth_and_min_leaf_stop_growth() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let t = fit(&x, &y, &ForestParams { max_depth: Some(3), ..full_scan() });
        assert!(t.depth() <= 3);
        let t = fit(&x, &y, &ForestParams { min_samples_leaf: 4, ..full_scan() });
        assert!(t.nodes().iter().all(|n| match n {
            Node::Leaf { cover, .. } => *cover >= 4,
            _ => true,
        }));
    }

    #[test]
    fn empty_input_is_an_error() {
        let x = Matrix::new(0, 1, vec![]).unwrap();
        assert!(fit_tree(&x, &[], &full_scan(), &mut tree_rng(0, 0)).is_err());
    }

    #[test]
    fn forest_needs_both_classes() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(fit_forest_xy(&x, &[1, 1], vec!["a".into()], &ForestParams::default()).is_err());
    }

    #[test]
    fn averaging_two_constant_trees() {
        let leaf = |v| Tree::from_nodes(vec![Node::Leaf { value: v, cover: 5 }]).unwrap();
        let forest =
            RandomForest::new(vec![leaf(0.2), leaf(0.6)], ForestParams::default(), vec!["a".into()])
                .unwrap();
        let x = Matrix::from_rows(&[vec![-3.0], vec![9.0]]).unwrap();
        for p in forest.predict_proba(&x).unwrap() {
            assert!((p - 0.4).abs() < 1e-15);
        }
        let wide = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(forest.predict_proba(&wide), Err(Error::Dimension { .. })));
    }

    #[test]
    fn from_nodes_rejects_broken_covers() {
        let nodes = vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 2,
                cover: 5,
            },
            Node::Leaf { value: 0.0, cover: 1 },
            Node::Leaf { value: 1.0, cover: 1 },
        ];
        assert!(Tree::from_nodes(nodes).is_err());
    }

    #[test]
    fn features_per_split_auto() {
        assert_eq!(FeaturesPerSplit::Auto.resolve(1), 1);
        assert_eq!(FeaturesPerSplit::Auto.resolve(2), 1);
        assert_eq!(FeaturesPerSplit::Auto.resolve(3), 2);
        assert_eq!(FeaturesPerSplit::Auto.resolve(186), 14);
        assert_eq!(FeaturesPerSplit::Count(50).resolve(3), 3);
    }

    #[test]
    fn version_mismatch_is_reported() {
        let leaf = Tree::from_nodes(vec![Node::Leaf { value: 0.5, cover: 2 }]).unwrap();
        let forest = RandomForest::new(vec![leaf], ForestParams::default(), vec!["a".into()]).unwrap();
        let text = forest.to_text().replace("\"version\":1", "\"version\":7");
        assert!(matches!(
            RandomForest::from_text(&text),
            Err(Error::Version { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn truncated_file_names_an_offset() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let forest =
            fit_forest_xy(&x, &[0, 1, 1], vec!["a".into()], &ForestParams { n_trees: 3, ..Default::default() })
                .unwrap();
        let text = forest.to_text();
        let cut = &text[..text.len() - 10];
        match RandomForest::from_text(cut) {
            Err(Error::Parse { offset, .. }) => assert!(offset <= cut.len() && offset > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
