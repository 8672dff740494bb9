//! Box-shaped regions read off the leaves of a decision tree.

use serde::{Deserialize, Serialize};

use super::cart::{DecisionTree, Node};
use super::EvaluationRecord;
use crate::scenario::{ScenarioSpec, TestInput};

/// `[lower, upper)`, or `[lower, upper]` when `upper_closed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub upper_closed: bool,
}

impl Interval {
    pub fn closed(lower: f64, upper: f64) -> Self {
        Self { lower, upper, upper_closed: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && (x < self.upper || (self.upper_closed && x <= self.upper))
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        let lower = self.lower.max(other.lower);
        let (upper, closed) = match self.upper.total_cmp(&other.upper) {
            std::cmp::Ordering::Less => (self.upper, self.upper_closed),
            std::cmp::Ordering::Greater => (other.upper, other.upper_closed),
            std::cmp::Ordering::Equal => (self.upper, self.upper_closed && other.upper_closed),
        };
        lower < upper || (closed && lower <= upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// One interval per search variable, in scenario order (raw units).
    pub intervals: Vec<Interval>,
    /// Label of the leaf the region came from.
    pub critical: bool,
    /// Archive points inside the region.
    pub support: usize,
    /// Critical fraction among `support`; 0 when the region is empty.
    pub purity: f64,
    /// Tree leaf the region was read from.
    pub leaf: usize,
}

impl Region {
    pub fn full(spec: &ScenarioSpec) -> Self {
        Self {
            intervals: spec.parameters.iter().map(|p| Interval::closed(p.lower, p.upper)).collect(),
            critical: false,
            support: 0,
            purity: 0.0,
            leaf: 0,
        }
    }

    pub fn contains(&self, input: &TestInput) -> bool {
        self.intervals.iter().zip(&input.values).all(|(iv, x)| iv.contains(*x))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.intervals.iter().zip(&other.intervals).all(|(a, b)| a.intersects(b))
    }

    /// Closed bounds usable for sampling inside the region.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.intervals.iter().map(|iv| (iv.lower, iv.upper)).collect()
    }

    pub fn is_within(&self, spec: &ScenarioSpec) -> bool {
        self.intervals
            .iter()
            .zip(&spec.parameters)
            .all(|(iv, p)| iv.lower >= p.lower && iv.upper <= p.upper && iv.lower <= iv.upper)
    }

    pub fn same_box(&self, other: &Region) -> bool {
        self.intervals == other.intervals
    }

    /// Recomputes support and purity from archive records.
    pub fn score(&mut self, records: &[EvaluationRecord]) {
        let inside: Vec<&EvaluationRecord> = records.iter().filter(|r| self.contains(&r.input)).collect();
        self.support = inside.len();
        self.purity = if inside.is_empty() {
            0.0
        } else {
            inside.iter().filter(|r| r.critical).count() as f64 / inside.len() as f64
        };
    }
}

/// One region per leaf, tiling the global box. Leaf counts are copied into
/// support/purity.
pub fn leaf_regions(tree: &DecisionTree, spec: &ScenarioSpec) -> Vec<Region> {
    fn walk(tree: &DecisionTree, i: usize, intervals: &mut Vec<Interval>, out: &mut Vec<Region>) {
        match tree.nodes[i] {
            Node::Leaf { count_total, count_critical, label } => out.push(Region {
                intervals: intervals.clone(),
                critical: label,
                support: count_total,
                purity: if count_total == 0 { 0.0 } else { count_critical as f64 / count_total as f64 },
                leaf: i,
            }),
            Node::Split { feature_index, threshold_raw, left, right, .. } => {
                let saved = intervals[feature_index];
                if threshold_raw <= saved.upper {
                    intervals[feature_index].upper = threshold_raw;
                    intervals[feature_index].upper_closed = false;
                }
                walk(tree, left, intervals, out);
                intervals[feature_index] = saved;
                intervals[feature_index].lower = saved.lower.max(threshold_raw);
                walk(tree, right, intervals, out);
                intervals[feature_index] = saved;
            }
        }
    }
    let mut intervals = Region::full(spec).intervals;
    let mut out = Vec::new();
    walk(tree, 0, &mut intervals, &mut out);
    out
}

/// Regions of all leaves labelled critical.
pub fn extract_critical_regions(tree: &DecisionTree, spec: &ScenarioSpec) -> Vec<Region> {
    leaf_regions(tree, spec).into_iter().filter(|r| r.critical).collect()
}

/// Human-readable conjunction of the region's non-trivial bounds, e.g.
/// `EgoSpeed < 8.33 m/s ∧ PedSpeed ≥ 1.20 m/s`. Full-range regions read `true`.
pub fn format_condition(region: &Region, spec: &ScenarioSpec) -> String {
    let mut terms = Vec::new();
    for (iv, p) in region.intervals.iter().zip(&spec.parameters) {
        let unit = if p.unit.is_empty() { String::new() } else { format!(" {}", p.unit) };
        if iv.lower > p.lower {
            terms.push(format!("{} ≥ {:.2}{unit}", p.name, iv.lower));
        }
        if iv.upper < p.upper {
            let op = if iv.upper_closed { "≤" } else { "<" };
            terms.push(format!("{} {op} {:.2}{unit}", p.name, iv.upper));
        }
    }
    if terms.is_empty() {
        "true".to_owned()
    } else {
        terms.join(" ∧ ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::cart::Node;
    use crate::scenario::pedestrian_crossing_spec;

    fn ego_split_tree(critical_left: bool) -> DecisionTree {
        let spec = pedestrian_crossing_spec();
        DecisionTree {
            nodes: vec![
                Node::Split {
                    feature_index: 1,
                    threshold: (8.33 - 1.0) / 21.0,
                    threshold_raw: 8.33,
                    left: 1,
                    right: 2,
                    count_total: 10,
                    count_critical: 4,
                },
                Node::Leaf { count_total: 4, count_critical: 4, label: critical_left },
                Node::Leaf { count_total: 6, count_critical: 0, label: !critical_left },
            ],
            feature_names: spec.names().map(str::to_owned).collect(),
            bounds: spec.bounds(),
        }
    }

    #[test]
    fn ego_speed_condition() {
        let spec = pedestrian_crossing_spec();
        let regions = extract_critical_regions(&ego_split_tree(true), &spec);
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        assert_eq!(r.intervals[1], Interval { lower: 1.0, upper: 8.33, upper_closed: false });
        assert_eq!(r.intervals[0], Interval::closed(0.5, 3.0));
        assert_eq!(r.intervals[2], Interval::closed(0.0, 60.0));
        assert_eq!(format_condition(r, &spec), "EgoSpeed < 8.33 m/s");
    }

    #[test]
    fn single_critical_leaf_is_the_whole_box() {
        let spec = pedestrian_crossing_spec();
        let tree = DecisionTree {
            nodes: vec![Node::Leaf { count_total: 3, count_critical: 3, label: true }],
            feature_names: vec![],
            bounds: spec.bounds(),
        };
        let regions = extract_critical_regions(&tree, &spec);
        assert_eq!(regions, vec![Region { critical: true, support: 3, purity: 1.0, leaf: 0, ..Region::full(&spec) }]);
        assert_eq!(format_condition(&regions[0], &spec), "true");
    }

    #[test]
    fn two_constraints_in_spec_order() {
        let spec = pedestrian_crossing_spec();
        let mut r = Region::full(&spec);
        r.intervals[1].upper = 8.33;
        r.intervals[1].upper_closed = false;
        r.intervals[0].lower = 1.2;
        assert_eq!(format_condition(&r, &spec), "PedSpeed ≥ 1.20 m/s ∧ EgoSpeed < 8.33 m/s");
    }

    #[test]
    fn no_critical_leaf_gives_no_region() {
        let spec = pedestrian_crossing_spec();
        let tree = DecisionTree {
            nodes: vec![Node::Leaf { count_total: 3, count_critical: 0, label: false }],
            feature_names: vec![],
            bounds: spec.bounds(),
        };
        assert!(extract_critical_regions(&tree, &spec).is_empty());
    }

    #[test]
    fn half_open_intervals_do_not_overlap() {
        let a = Interval { lower: 0.0, upper: 5.0, upper_closed: false };
        let b = Interval::closed(5.0, 10.0);
        assert!(!a.intersects(&b));
        assert!(Interval::closed(0.0, 5.0).intersects(&b));
        assert!(a.contains(0.0) && !a.contains(5.0) && b.contains(10.0));
    }
}
