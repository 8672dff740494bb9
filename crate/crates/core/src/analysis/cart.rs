//! Binary classification trees grown greedily on Gini impurity.
//!
//! Features are expected in the unit cube. Samples with `feature < threshold`
//! go left, the rest go right; thresholds sit halfway between adjacent
//! distinct feature values. Split search visits features in index order and
//! thresholds in ascending order, keeping the first best candidate, so the
//! tree is a deterministic function of the training data and its order.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::EvaluationRecord;
use crate::scenario::ScenarioSpec;

/// Two weighted impurities closer than this are treated as equal.
const IMPURITY_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_impurity_decrease: f64,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_samples_split: 10,
            min_impurity_decrease: 0.01,
        }
    }
}

impl CartParams {
    /// Grows until every leaf is pure.
    pub fn unbounded() -> Self {
        Self {
            max_depth: usize::MAX,
            min_samples_split: 2,
            min_impurity_decrease: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature_index: usize,
        /// Threshold in unit-cube coordinates.
        threshold: f64,
        /// Threshold in the variable's own units.
        threshold_raw: f64,
        left: usize,
        right: usize,
        count_total: usize,
        count_critical: usize,
    },
    Leaf {
        count_total: usize,
        count_critical: usize,
        label: bool,
    },
}

impl Node {
    pub fn counts(&self) -> (usize, usize) {
        match *self {
            Node::Split { count_total, count_critical, .. } | Node::Leaf { count_total, count_critical, .. } => {
                (count_total, count_critical)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
    pub feature_names: Vec<String>,
    /// Closed bounds used to map unit thresholds to raw units.
    pub bounds: Vec<(f64, f64)>,
}

pub fn gini(total: usize, critical: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = critical as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

/// Majority label; ties are non-critical.
fn majority(total: usize, critical: usize) -> bool {
    2 * critical > total
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [bool],
    params: CartParams,
    bounds: Vec<(f64, f64)>,
    nodes: Vec<Node>,
    root_count: f64,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, total: usize, critical: usize) -> usize {
        self.nodes.push(Node::Leaf {
            count_total: total,
            count_critical: critical,
            label: majority(total, critical),
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, samples: &[usize]) -> Option<Candidate> {
        let n = samples.len();
        let critical_total = samples.iter().filter(|&&i| self.labels[i]).count();
        let dims = self.features.first().map_or(0, Vec::len);
        let mut best: Option<Candidate> = None;
        let mut sorted = samples.to_vec();
        for f in 0..dims {
            sorted.sort_by(|&a, &b| self.features[a][f].total_cmp(&self.features[b][f]).then(a.cmp(&b)));
            let mut left_critical = 0;
            for k in 0..n - 1 {
                if self.labels[sorted[k]] {
                    left_critical += 1;
                }
                let (lo, hi) = (self.features[sorted[k]][f], self.features[sorted[k + 1]][f]);
                if lo >= hi {
                    continue;
                }
                let mut threshold = 0.5 * (lo + hi);
                if threshold <= lo {
                    threshold = hi;
                }
                let left = k + 1;
                let right = n - left;
                let impurity = (left as f64 * gini(left, left_critical)
                    + right as f64 * gini(right, critical_total - left_critical))
                    / n as f64;
                if best.as_ref().map_or(true, |b| impurity < b.impurity - IMPURITY_TIE) {
                    best = Some(Candidate { feature: f, threshold, impurity });
                }
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let total = samples.len();
        let critical = samples.iter().filter(|&&i| self.labels[i]).count();
        let parent_impurity = gini(total, critical);
        if depth >= self.params.max_depth
            || total < self.params.min_samples_split.max(2)
            || critical == 0
            || critical == total
        {
            return self.leaf(total, critical);
        }
        let Some(split) = self.best_split(&samples) else {
            return self.leaf(total, critical);
        };
        let decrease = total as f64 / self.root_count * (parent_impurity - split.impurity);
        if decrease < self.params.min_impurity_decrease {
            return self.leaf(total, critical);
        }

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.features[i][split.feature] < split.threshold);
        let (lo, hi) = self.bounds[split.feature];
        let index = self.nodes.len();
        self.nodes.push(Node::Leaf { count_total: 0, count_critical: 0, label: false });
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[index] = Node::Split {
            feature_index: split.feature,
            threshold: split.threshold,
            threshold_raw: lo + split.threshold * (hi - lo),
            left,
            right,
            count_total: total,
            count_critical: critical,
        };
        index
    }
}

/// Fits a tree on unit-cube `features`. `names` and `bounds` only label the
/// tree and convert thresholds back to raw units.
pub fn fit_cart(
    features: &[Vec<f64>],
    labels: &[bool],
    names: Vec<String>,
    bounds: Vec<(f64, f64)>,
    params: CartParams,
) -> DecisionTree {
    assert_eq!(features.len(), labels.len(), "one label per sample");
    let mut builder = Builder {
        features,
        labels,
        params,
        bounds: bounds.clone(),
        nodes: Vec::new(),
        root_count: features.len().max(1) as f64,
    };
    builder.grow((0..features.len()).collect(), 0);
    DecisionTree { nodes: builder.nodes, feature_names: names, bounds }
}

/// Fits a tree on archive records, scaling inputs with the scenario bounds and
/// labelling by criticality.
pub fn fit_cart_on_records(records: &[EvaluationRecord], spec: &ScenarioSpec, params: CartParams) -> DecisionTree {
    let features: Vec<Vec<f64>> = records.iter().map(|r| spec.scale_to_unit(&r.input)).collect();
    let labels: Vec<bool> = records.iter().map(|r| r.critical).collect();
    fit_cart(&features, &labels, spec.names().map(str::to_owned).collect(), spec.bounds(), params)
}

impl DecisionTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf reached by a unit-cube point.
    pub fn leaf_of(&self, unit: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature_index, threshold, left, right, .. } => {
                    i = if unit[feature_index] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, unit: &[f64]) -> bool {
        match self.nodes[self.leaf_of(unit)] {
            Node::Leaf { label, .. } => label,
            Node::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    /// Nested JSON rendering, one object per node.
    pub fn to_json(&self) -> Value {
        fn node(tree: &DecisionTree, i: usize) -> Value {
            match &tree.nodes[i] {
                Node::Leaf { count_total, count_critical, label } => json!({
                    "leaf": true,
                    "count_total": count_total,
                    "count_critical": count_critical,
                    "label": if *label { "critical" } else { "non-critical" },
                }),
                Node::Split { feature_index, threshold, threshold_raw, left, right, count_total, count_critical } => json!({
                    "leaf": false,
                    "feature_index": feature_index,
                    "feature": tree.feature_names.get(*feature_index),
                    "threshold": threshold,
                    "threshold_raw": threshold_raw,
                    "count_total": count_total,
                    "count_critical": count_critical,
                    "left": node(tree, *left),
                    "right": node(tree, *right),
                }),
            }
        }
        json!({
            "feature_names": self.feature_names,
            "bounds": self.bounds,
            "root": node(self, 0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    fn exhaustive_best_threshold(xs: &[f64], ys: &[bool]) -> (f64, f64) {
        // every midpoint, scored independently
        let mut sorted: Vec<f64> = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut best = (f64::INFINITY, f64::NAN);
        for w in sorted.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (mut l, mut lc, mut r, mut rc) = (0, 0, 0, 0);
            for (x, y) in xs.iter().zip(ys) {
                if *x < t {
                    l += 1;
                    lc += *y as usize;
                } else {
                    r += 1;
                    rc += *y as usize;
                }
            }
            let g = |n: usize, c: usize| {
                let p = c as f64 / n as f64;
                1.0 - p * p - (1.0 - p) * (1.0 - p)
            };
            let score = (l as f64 * g(l, lc) + r as f64 * g(r, rc)) / xs.len() as f64;
            if score < best.0 {
                best = (score, t);
            }
        }
        best
    }

    #[test]
    fn one_dimensional_threshold() {
        let bounds = (1.0, 22.0);
        let raw = [6.0, 7.0, 8.0, 9.0, 10.0];
        let labels = [false, false, false, true, true];
        let (score, oracle) = exhaustive_best_threshold(&raw, &labels);
        assert_eq!(score, 0.0);
        assert_eq!(oracle, 8.5);

        let features: Vec<Vec<f64>> = raw.iter().map(|x| vec![(x - bounds.0) / (bounds.1 - bounds.0)]).collect();
        let tree = fit_cart(&features, &labels, names(1), vec![bounds], CartParams::unbounded());
        assert_eq!(tree.depth(), 1);
        match tree.root() {
            Node::Split { threshold_raw, left, right, .. } => {
                assert!((threshold_raw - 8.5).abs() < 1e-9);
                assert_eq!(tree.nodes[*left], Node::Leaf { count_total: 3, count_critical: 0, label: false });
                assert_eq!(tree.nodes[*right], Node::Leaf { count_total: 2, count_critical: 2, label: true });
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn all_critical_is_one_leaf() {
        let features = vec![vec![0.1], vec![0.5], vec![0.9]];
        let tree = fit_cart(&features, &[true; 3], names(1), vec![(0.0, 1.0)], CartParams::default());
        assert_eq!(tree.nodes, vec![Node::Leaf { count_total: 3, count_critical: 3, label: true }]);
    }

    #[test]
    fn xor_needs_two_levels() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        // corners, several copies each
        for _ in 0..5 {
            for (x, y) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                features.push(vec![x, y]);
                labels.push((x < 0.5) != (y < 0.5));
            }
        }
        let params = CartParams { max_depth: 2, min_samples_split: 2, min_impurity_decrease: 0.0 };
        let tree = fit_cart(&features, &labels, names(2), vec![(0.0, 1.0); 2], params);
        assert_eq!(tree.depth(), 2);
        // the four leaves partition the data exactly along the quadrants
        let correct = features.iter().zip(&labels).filter(|(f, l)| tree.predict(f) == **l).count();
        assert_eq!(correct, labels.len());
    }

    #[test]
    fn ties_are_labelled_non_critical() {
        let features = vec![vec![0.5], vec![0.5]];
        let tree = fit_cart(&features, &[true, false], names(1), vec![(0.0, 1.0)], CartParams::unbounded());
        assert_eq!(tree.nodes, vec![Node::Leaf { count_total: 2, count_critical: 1, label: false }]);
    }

    #[test]
    fn child_counts_sum_to_parent() {
        let features: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0]).collect();
        let labels: Vec<bool> = features.iter().map(|f| f[0] + f[1] > 0.9).collect();
        let tree = fit_cart(&features, &labels, names(2), vec![(0.0, 1.0); 2], CartParams::unbounded());
        for node in &tree.nodes {
            if let Node::Split { left, right, count_total, count_critical, .. } = node {
                let (lt, lc) = tree.nodes[*left].counts();
                let (rt, rc) = tree.nodes[*right].counts();
                assert_eq!(lt + rt, *count_total);
                assert_eq!(lc + rc, *count_critical);
            }
        }
    }

    #[test]
    fn json_is_nested() {
        let features = vec![vec![0.1], vec![0.9]];
        let tree = fit_cart(&features, &[false, true], names(1), vec![(0.0, 10.0)], CartParams::unbounded());
        let v = tree.to_json();
        assert_eq!(v["root"]["feature"], "x0");
        assert_eq!(v["root"]["right"]["label"], "critical");
        assert_eq!(v["root"]["threshold_raw"], 5.0);
    }
}
