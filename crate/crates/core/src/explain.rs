//! Shapley attributions for trees and forests.
//!
//! Uses the path-dependent value function: features outside the coalition
//! are marginalized by following both children weighted by training cover.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{format_number, DataTable};
use crate::error::{Error, Result};
use crate::learner::{Node, RandomForest, Tree};
use crate::matrix::Matrix;

/// Largest number of distinct split features the brute-force oracle accepts.
pub const MAX_BRUTE_FEATURES: usize = 15;
pub const DEFAULT_TOP_K: usize = 20;

/// Share of a parent's cover sent to each child. Zero-cover parents split
/// evenly so the value function stays defined.
fn child_fractions(tree: &Tree, node: usize, left: usize, right: usize) -> (f64, f64) {
    let nodes = tree.nodes();
    let total = nodes[node].cover();
    if total == 0 {
        return (0.5, 0.5);
    }
    (
        nodes[left].cover() as f64 / total as f64,
        nodes[right].cover() as f64 / total as f64,
    )
}

fn value_with(tree: &Tree, x: &[f64], node: usize, in_s: &impl Fn(usize) -> bool) -> f64 {
    match tree.nodes()[node] {
        Node::Leaf { value, .. } => value,
        Node::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            if in_s(feature) {
                let next = if x[feature] <= threshold { left } else { right };
                value_with(tree, x, next, in_s)
            } else {
                let (wl, wr) = child_fractions(tree, node, left, right);
                wl * value_with(tree, x, left, in_s) + wr * value_with(tree, x, right, in_s)
            }
        }
    }
}

/// Expected tree output given the features in `subset` fixed to `x`.
pub fn tree_value_function(tree: &Tree, x: &[f64], subset: &[usize]) -> f64 {
    value_with(tree, x, 0, &|f| subset.contains(&f))
}

fn used_features(tree: &Tree) -> Vec<usize> {
    tree.nodes()
        .iter()
        .filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Shapley values by enumerating every coalition of the features the tree
/// splits on. Exponential; intended as a reference.
pub fn brute_shapley(tree: &Tree, x: &[f64]) -> Result<Vec<f64>> {
    let used = used_features(tree);
    let m = used.len();
    if m > MAX_BRUTE_FEATURES {
        return Err(Error::invalid(format!(
            "tree splits on {m} features; exhaustive enumeration is limited to {MAX_BRUTE_FEATURES}"
        )));
    }
    if let Some(&f) = used.last() {
        if f >= x.len() {
            return Err(Error::Dimension {
                expected: f + 1,
                found: x.len(),
            });
        }
    }
    let values: Vec<f64> = (0..1usize << m)
        .map(|mask| value_with(tree, x, 0, &|f| used.binary_search(&f).is_ok_and(|k| mask >> k & 1 == 1)))
        .collect();
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; x.len()];
    for (k, &f) in used.iter().enumerate() {
        let bit = 1usize << k;
        let mut total = 0.0;
        for mask in (0..1usize << m).filter(|mask| mask & bit == 0) {
            let s = mask.count_ones() as usize;
            let weight = fact[s] * fact[m - s - 1] / fact[m];
            total += weight * (values[mask | bit] - values[mask]);
        }
        phi[f] = total;
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        let w = path[i].weight;
        path[i + 1].weight += one * w * (i + 1) as f64 / (d + 1.0);
        path[i].weight = zero * w * (d - i as f64) / (d + 1.0);
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { zero, one, .. } = path[index];
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1.0) / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i as f64) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - i as f64));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { zero, one, .. } = path[index];
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1.0) / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i as f64) / (d + 1.0);
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((d - i as f64) / (d + 1.0));
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn shap_recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    parent: &[PathElement],
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    let mut path = Vec::with_capacity(parent.len() + 1);
    path.extend_from_slice(parent);
    extend(&mut path, zero, one, feature);
    match tree.nodes()[node] {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one - el.zero) * value;
                }
            }
        }
        Node::Split {
            feature: split,
            threshold,
            left,
            right,
            ..
        } => {
            let (wl, wr) = child_fractions(tree, node, left, right);
            let (hot, cold, hot_w, cold_w) = if x[split] <= threshold {
                (left, right, wl, wr)
            } else {
                (right, left, wr, wl)
            };
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split)) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(&mut path, k);
            }
            shap_recurse(tree, x, phi, hot, &path, hot_w * in_zero, in_one, Some(split));
            shap_recurse(tree, x, phi, cold, &path, cold_w * in_zero, 0.0, Some(split));
        }
    }
}

/// Exact Shapley values in time polynomial in tree size and depth.
pub fn tree_shap(tree: &Tree, x: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; x.len()];
    shap_recurse(tree, x, &mut phi, 0, &[], 1.0, 1.0, None);
    phi
}

// ---------------------------------------------------------------------------
// Forests

#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    pub values: Matrix,
    pub base_value: f64,
    pub feature_names: Vec<String>,
}

impl ShapMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    /// `base_value + sum of attributions` for each row.
    pub fn reconstructed(&self) -> Vec<f64> {
        self.values
            .rows()
            .map(|r| self.base_value + r.iter().sum::<f64>())
            .collect()
    }

    /// First line `base_value,<v>`, then a header of feature names and one
    /// line per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["base_value", &format_number(self.base_value)])?;
        w.write_record(&self.feature_names)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|&v| format_number(v)))?;
        }
        w.flush().map_err(|e| Error::io("<shap csv>", e))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = r.records();
        let mut next = || -> Result<Option<csv::StringRecord>> { records.next().transpose().map_err(Error::from) };
        let base = next()?.ok_or_else(|| Error::data("SHAP file is empty"))?;
        if base.len() != 2 || &base[0] != "base_value" {
            return Err(Error::data("SHAP file must start with a base_value line"));
        }
        let base_value = parse_f64(&base[1])?;
        let header = next()?.ok_or_else(|| Error::data("SHAP file has no header"))?;
        let feature_names: Vec<String> = header.iter().map(str::to_string).collect();
        let mut data = Vec::new();
        let mut n_rows = 0;
        while let Some(rec) = next()? {
            if rec.len() != feature_names.len() {
                return Err(Error::Dimension {
                    expected: feature_names.len(),
                    found: rec.len(),
                });
            }
            for v in rec.iter() {
                data.push(parse_f64(v)?);
            }
            n_rows += 1;
        }
        Ok(Self {
            values: Matrix::new(n_rows, feature_names.len(), data)?,
            base_value,
            feature_names,
        })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::data(format!("'{s}' is not a number")))
}

/// Per row, the mean of the tree attribution vectors; the base value is the
/// mean of the tree base values.
pub fn forest_shap(model: &RandomForest, x: &Matrix) -> Result<ShapMatrix> {
    let p = model.n_features();
    if x.n_cols() != p {
        return Err(Error::Dimension {
            expected: p,
            found: x.n_cols(),
        });
    }
    let n_trees = model.trees().len() as f64;
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let mut acc = vec![0.0; p];
            for tree in model.trees() {
                for (a, v) in acc.iter_mut().zip(tree_shap(tree, row)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= n_trees);
            acc
        })
        .collect();
    Ok(ShapMatrix {
        values: Matrix::new(x.n_rows(), p, rows.concat())?,
        base_value: model.base_value(),
        feature_names: model.feature_names().to_vec(),
    })
}

// ---------------------------------------------------------------------------
// Rankings and beeswarm data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub features: Vec<RankedFeature>,
}

impl FeatureRanking {
    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.feature.as_str()).collect()
    }
}

fn rank(mut features: Vec<RankedFeature>, top_k: usize) -> FeatureRanking {
    features.sort_by(|a, b| {
        b.mean_abs
            .total_cmp(&a.mean_abs)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    features.truncate(top_k);
    FeatureRanking { features }
}

fn mean_abs(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v.abs(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Features by mean absolute attribution, largest first, ties by name.
pub fn summary_ranking(shap: &ShapMatrix, top_k: usize) -> FeatureRanking {
    let features = shap
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| RankedFeature {
            feature: name.clone(),
            mean_abs: mean_abs(shap.values.rows().map(|r| r[j])),
        })
        .collect();
    rank(features, top_k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeeswarmPoint {
    pub feature: String,
    pub row: usize,
    /// Feature value as the model saw it (standardized space).
    pub value: f64,
    pub attribution: f64,
    /// Pre-standardization value when the source table has the column.
    pub raw_value: Option<f64>,
}

/// One point per (ranked feature, row), features in ranking order.
pub fn beeswarm_points(
    shap: &ShapMatrix,
    x: &Matrix,
    ranking: &FeatureRanking,
    raw: Option<&DataTable>,
) -> Result<Vec<BeeswarmPoint>> {
    if x.n_rows() != shap.n_rows() || x.n_cols() != shap.values.n_cols() {
        return Err(Error::Dimension {
            expected: shap.n_rows(),
            found: x.n_rows(),
        });
    }
    if let Some(t) = raw {
        if t.n_rows() != x.n_rows() {
            return Err(Error::Dimension {
                expected: x.n_rows(),
                found: t.n_rows(),
            });
        }
    }
    let mut out = Vec::with_capacity(ranking.features.len() * x.n_rows());
    for ranked in &ranking.features {
        let j = shap
            .feature_names
            .iter()
            .position(|n| *n == ranked.feature)
            .ok_or_else(|| Error::data(format!("ranked feature '{}' is not in the SHAP matrix", ranked.feature)))?;
        let raw_col = raw
            .and_then(|t| t.column_by_name(&ranked.feature))
            .and_then(|c| c.as_numeric());
        for i in 0..x.n_rows() {
            out.push(BeeswarmPoint {
                feature: ranked.feature.clone(),
                row: i,
                value: x.get(i, j),
                attribution: shap.values.get(i, j),
                raw_value: raw_col.and_then(|c| c[i]),
            });
        }
    }
    Ok(out)
}

pub fn write_beeswarm_csv<W: Write>(points: &[BeeswarmPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "row", "value", "attribution", "raw_value"])?;
    for pt in points {
        w.write_record([
            pt.feature.clone(),
            pt.row.to_string(),
            format_number(pt.value),
            format_number(pt.attribution),
            pt.raw_value.map(format_number).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<beeswarm csv>", e))
}

pub fn read_beeswarm_csv<R: Read>(reader: R) -> Result<Vec<BeeswarmPoint>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Dimension {
                expected: 5,
                found: rec.len(),
            });
        }
        out.push(BeeswarmPoint {
            feature: rec[0].to_string(),
            row: rec[1]
                .parse()
                .map_err(|_| Error::data(format!("bad row index '{}'", &rec[1])))?,
            value: parse_f64(&rec[2])?,
            attribution: parse_f64(&rec[3])?,
            raw_value: if rec[4].is_empty() { None } else { Some(parse_f64(&rec[4])?) },
        });
    }
    Ok(out)
}

/// Recomputes the ranking from exported beeswarm points.
pub fn ranking_from_points(points: &[BeeswarmPoint]) -> FeatureRanking {
    let mut names: Vec<&str> = Vec::new();
    for pt in points {
        if !names.contains(&pt.feature.as_str()) {
            names.push(&pt.feature);
        }
    }
    let features: Vec<RankedFeature> = names
        .iter()
        .map(|name| RankedFeature {
            feature: name.to_string(),
            mean_abs: mean_abs(points.iter().filter(|p| p.feature == *name).map(|p| p.attribution)),
        })
        .collect();
    let k = features.len();
    rank(features, k)
}

// ---------------------------------------------------------------------------
// Fixture generation

/// Random tree with thresholds and inputs on `[-1, 1]`, leaf values in
/// `[0, 1]` and leaf covers in `1..=100`.
pub fn random_tree<R: Rng>(rng: &mut R, max_depth: usize, n_features: usize) -> Tree {
    fn grow<R: Rng>(rng: &mut R, depth: usize, max_depth: usize, p: usize, nodes: &mut Vec<Node>) -> u64 {
        let idx = nodes.len();
        if depth == max_depth || (depth > 0 && rng.random_bool(0.25)) {
            let cover = rng.random_range(1..=100);
            nodes.push(Node::Leaf {
                value: rng.random(),
                cover,
            });
            return cover;
        }
        nodes.push(Node::Leaf { value: 0.0, cover: 0 });
        let feature = rng.random_range(0..p);
        let threshold = rng.random_range(-1.0..1.0);
        let left = idx + 1;
        let lc = grow(rng, depth + 1, max_depth, p, nodes);
        let right = nodes.len();
        let rc = grow(rng, depth + 1, max_depth, p, nodes);
        nodes[idx] = Node::Split {
            feature,
            threshold,
            left,
            right,
            cover: lc + rc,
        };
        lc + rc
    }
    let mut nodes = Vec::new();
    grow(rng, 0, max_depth, n_features.max(1), &mut nodes);
    Tree::from_nodes(nodes).expect("generated tree is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stump(feature: usize, lc: u64, rc: u64, lv: f64, rv: f64) -> Tree {
        Tree::from_nodes(vec![
            Node::Split {
                feature,
                threshold: 0.5,
                left: 1,
                right: 2,
                cover: lc + rc,
            },
            Node::Leaf { value: lv, cover: lc },
            Node::Leaf { value: rv, cover: rc },
        ])
        .unwrap()
    }

    #[test]
    fn value_function_fixtures() {
        let t = stump(0, 3, 1, 0.0, 1.0);
        assert_eq!(tree_value_function(&t, &[1.0], &[]), 0.25);
        assert_eq!(tree_value_function(&t, &[1.0], &[0]), 1.0);
        assert_eq!(tree_value_function(&t, &[0.0], &[0]), t.predict(&[0.0]));
    }

    #[test]
    fn leaf_only_tree_is_all_zero() {
        let t = Tree::from_nodes(vec![Node::Leaf { value: 0.3, cover: 7 }]).unwrap();
        assert_eq!(brute_shapley(&t, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(tree_shap(&t, &[1.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(t.base_value(), 0.3);
    }

    #[test]
    fn stump_gives_single_player() {
        let t = stump(1, 3, 1, 0.0, 1.0);
        let x = [9.0, 1.0, 9.0];
        let phi = brute_shapley(&t, &x).unwrap();
        assert_eq!(phi, vec![0.0, 0.75, 0.0]);
        assert_eq!(tree_shap(&t, &x), phi);
    }

    #[test]
    fn two_feature_tree_by_hand() {
        // root on f0; left child splits on f1
        let t = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 4, cover: 10 },
            Node::Split { feature: 1, threshold: 0.5, left: 2, right: 3, cover: 6 },
            Node::Leaf { value: 0.2, cover: 2 },
            Node::Leaf { value: 0.8, cover: 4 },
            Node::Leaf { value: 0.5, cover: 4 },
        ])
        .unwrap();
        let x = [0.0, 1.0];
        let v0 = 0.6 * (0.2 / 3.0 + 0.8 * 2.0 / 3.0) + 0.4 * 0.5;
        let v_f0 = 0.2 / 3.0 + 0.8 * 2.0 / 3.0;
        let v_f1 = 0.6 * 0.8 + 0.4 * 0.5;
        let v_all = 0.8;
        let phi0 = 0.5 * (v_f0 - v0) + 0.5 * (v_all - v_f1);
        let phi1 = 0.5 * (v_f1 - v0) + 0.5 * (v_all - v_f0);
        let brute = brute_shapley(&t, &x).unwrap();
        assert!((brute[0] - phi0).abs() < 1e-15 && (brute[1] - phi1).abs() < 1e-15);
        let fast = tree_shap(&t, &x);
        assert!((fast[0] - phi0).abs() < 1e-12 && (fast[1] - phi1).abs() < 1e-12);
    }

    #[test]
    fn matches_oracle_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let t = random_tree(&mut rng, 4, 8);
            for _ in 0..5 {
                let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a = tree_shap(&t, &x);
                let b = brute_shapley(&t, &x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-9, "{a:?} vs {b:?}");
                }
                let total: f64 = a.iter().sum();
                assert!((t.base_value() + total - t.predict(&x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repeated_feature_on_path() {
        let t = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.0, left: 1, right: 4, cover: 9 },
            Node::Split { feature: 0, threshold: -0.5, left: 2, right: 3, cover: 5 },
            Node::Leaf { value: 0.1, cover: 2 },
            Node::Leaf { value: 0.4, cover: 3 },
            Node::Leaf { value: 0.9, cover: 4 },
        ])
        .unwrap();
        for x in [-1.0, -0.2, 0.7] {
            let a = tree_shap(&t, &[x]);
            let b = brute_shapley(&t, &[x]).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_tree_gives_equal_attributions() {
        let t = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 4, cover: 8 },
            Node::Split { feature: 1, threshold: 0.5, left: 2, right: 3, cover: 4 },
            Node::Leaf { value: 0.0, cover: 2 },
            Node::Leaf { value: 0.5, cover: 2 },
            Node::Split { feature: 1, threshold: 0.5, left: 5, right: 6, cover: 4 },
            Node::Leaf { value: 0.5, cover: 2 },
            Node::Leaf { value: 1.0, cover: 2 },
        ])
        .unwrap();
        let phi = tree_shap(&t, &[1.0, 1.0]);
        assert!((phi[0] - phi[1]).abs() < 1e-15);
    }

    #[test]
    fn too_many_features_for_oracle() {
        let mut nodes = Vec::new();
        let n = MAX_BRUTE_FEATURES + 1;
        for f in 0..n {
            let idx = nodes.len();
            nodes.push(Node::Split {
                feature: f,
                threshold: 0.0,
                left: idx + 1,
                right: idx + 2,
                cover: (n - f + 1) as u64,
            });
            nodes.push(Node::Leaf { value: 0.5, cover: 1 });
        }
        nodes.push(Node::Leaf { value: 0.5, cover: 1 });
        let t = Tree::from_nodes(nodes).unwrap();
        assert!(brute_shapley(&t, &vec![0.0; n]).is_err());
    }

    fn matrix(names: &[&str], rows: Vec<Vec<f64>>) -> ShapMatrix {
        ShapMatrix {
            values: Matrix::from_rows(&rows).unwrap(),
            base_value: 0.1,
            feature_names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn ranking_orders_and_truncates() {
        let shap = matrix(&["b", "a", "c"], vec![vec![0.0, 0.0, 0.3], vec![0.0, 0.0, -0.1]]);
        let r = summary_ranking(&shap, 20);
        assert_eq!(r.names(), ["c", "a", "b"]);
        assert!((r.features[0].mean_abs - 0.2).abs() < 1e-15);
        assert_eq!(summary_ranking(&shap, 1).names(), ["c"]);
    }

    #[test]
    fn beeswarm_round_trip_reproduces_ranking() {
        let shap = matrix(&["x", "y", "z"], vec![vec![0.1, -0.7, 0.3], vec![-0.2, 0.1, 0.3]]);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let ranking = summary_ranking(&shap, 2);
        let pts = beeswarm_points(&shap, &x, &ranking, None).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].feature, ranking.features[0].feature);
        let mut buf = Vec::new();
        write_beeswarm_csv(&pts, &mut buf).unwrap();
        let back = read_beeswarm_csv(buf.as_slice()).unwrap();
        assert_eq!(back, pts);
        assert_eq!(ranking_from_points(&back), ranking);
    }

    #[test]
    fn shap_csv_round_trip() {
        let shap = matrix(&["x", "y"], vec![vec![0.1, -0.7], vec![1e-17, 0.3]]);
        let mut buf = Vec::new();
        shap.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("base_value,0.1\nx,y\n"), "{text}");
        assert_eq!(ShapMatrix::read_csv(buf.as_slice()).unwrap(), shap);
    }
}
