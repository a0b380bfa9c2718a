//! Binary classification tree (CART) with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature; a row goes left iff `value <= threshold`. Split quality is
//! compared with exact integer arithmetic, so ties are real ties and are
//! broken by the lowest feature index, then the lowest threshold. Leaves
//! report Laplace-smoothed probabilities `(pos + 1) / (total + 2)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, LearningError};
use crate::common::{Milestone, SignalSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for CartParams {
    fn default() -> Self {
        Self { max_depth: 6, min_leaf: 5, min_impurity_decrease: 1e-7 }
    }
}

impl CartParams {
    pub fn validate(&self) -> Result<(), LearningError> {
        if self.min_leaf == 0 {
            return Err(LearningError::InvalidParams("min_leaf must be at least 1".into()));
        }
        if !self.min_impurity_decrease.is_finite() || self.min_impurity_decrease < 0.0 {
            return Err(LearningError::InvalidParams("min_impurity_decrease must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Tree node. Nodes are stored in pre-order and reference children by
/// position in that list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split { id: usize, feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { id: usize, positive: usize, total: usize },
}

impl Node {
    pub fn id(&self) -> usize {
        match self {
            Node::Split { id, .. } | Node::Leaf { id, .. } => *id,
        }
    }
}

pub fn leaf_probability(positive: usize, total: usize) -> f64 {
    (positive as f64 + 1.0) / (total as f64 + 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub milestone: Milestone,
    pub signal_source: SignalSource,
    pub schema_id: String,
    pub n_features: usize,
    pub params: CartParams,
    /// Trained on a single class; the tree is one leaf.
    pub degenerate: bool,
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { positive, total, .. } => Some((positive, total)),
            Node::Split { .. } => None,
        })
    }

    /// Index of the leaf `features` is routed to.
    pub fn route(&self, features: &[f64]) -> Result<usize, LearningError> {
        if features.len() != self.n_features {
            return Err(LearningError::SchemaMismatch { expected: self.n_features, found: features.len() });
        }
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return Ok(at),
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if features[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64, LearningError> {
        match self.nodes[self.route(features)?] {
            Node::Leaf { positive, total, .. } => Ok(leaf_probability(positive, total)),
            Node::Split { .. } => unreachable!("route always ends at a leaf"),
        }
    }
}

pub fn predict(model: &TreeModel, features: &[f64]) -> Result<f64, LearningError> {
    model.predict(features)
}

/// Best split found at a node: feature, threshold, and the split score
/// `S = (pl² + nl²)/|L| + (pr² + nr²)/|R|` kept as an exact fraction
/// (`numerator / denominator`). Maximising `S` minimises weighted child Gini.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    numerator: u128,
    denominator: u128,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.numerator * other.denominator).cmp(&(other.numerator * self.denominator)) == Ordering::Greater
    }
}

fn split_score(left_pos: usize, left_n: usize, right_pos: usize, right_n: usize) -> (u128, u128) {
    let sq = |x: usize| (x as u128) * (x as u128);
    let left = sq(left_pos) + sq(left_n - left_pos);
    let right = sq(right_pos) + sq(right_n - right_pos);
    let (nl, nr) = (left_n as u128, right_n as u128);
    (left * nr + right * nl, nl * nr)
}

struct Builder<'a> {
    data: &'a LabeledDataset,
    params: CartParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.data.rows[row].features[feature]
    }

    fn label(&self, row: usize) -> bool {
        self.data.rows[row].label
    }

    fn best_split(&self, rows: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&r| self.label(r)).count();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<Candidate> = None;
        let mut sorted = rows.to_vec();
        for feature in 0..self.data.n_features() {
            sorted.sort_by(|&a, &b| self.value(a, feature).total_cmp(&self.value(b, feature)));
            let mut left_pos = 0;
            for i in 0..n - 1 {
                if self.label(sorted[i]) {
                    left_pos += 1;
                }
                let here = self.value(sorted[i], feature);
                let next = self.value(sorted[i + 1], feature);
                if here == next {
                    continue;
                }
                let left_n = i + 1;
                if left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let (numerator, denominator) = split_score(left_pos, left_n, total_pos - left_pos, n - left_n);
                let candidate = Candidate { feature, threshold: midpoint(here, next), numerator, denominator };
                if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                    best = Some(candidate);
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let positive = rows.iter().filter(|&&r| self.label(r)).count();
        let leaf = Node::Leaf { id, positive, total: n };

        let splittable = depth < self.params.max_depth
            && n >= 2 * self.params.min_leaf
            && positive > 0
            && positive < n;
        let chosen = if splittable { self.best_split(&rows) } else { None };
        let Some(split) = chosen.filter(|c| impurity_decrease(c, positive, n) >= self.params.min_impurity_decrease)
        else {
            self.nodes.push(leaf);
            return id;
        };

        self.nodes.push(leaf);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.value(r, split.feature) <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split { id, feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

fn midpoint(low: f64, high: f64) -> f64 {
    let mid = low + (high - low) / 2.0;
    if mid >= high {
        low
    } else {
        mid
    }
}

fn impurity_decrease(c: &Candidate, positive: usize, n: usize) -> f64 {
    let nf = n as f64;
    let parent = (positive as f64).powi(2) + ((n - positive) as f64).powi(2);
    (c.numerator as f64 / c.denominator as f64) / nf - parent / (nf * nf)
}

/// Grows a tree by greedy recursive splitting.
pub fn train_cart(data: &LabeledDataset, params: &CartParams) -> Result<TreeModel, LearningError> {
    params.validate()?;
    data.check()?;
    let n = data.rows.len();
    if n < 2 * params.min_leaf {
        return Err(LearningError::InsufficientRows { rows: n, required: 2 * params.min_leaf });
    }
    let positive = data.rows.iter().filter(|r| r.label).count();
    let mut builder = Builder { data, params: *params, nodes: Vec::new() };
    builder.grow((0..n).collect(), 0);
    Ok(TreeModel {
        milestone: data.milestone,
        signal_source: data.signal_source,
        schema_id: data.schema_id.clone(),
        n_features: data.n_features(),
        params: *params,
        degenerate: positive == 0 || positive == n,
        nodes: builder.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::LabeledRow;

    fn dataset(xs: &[&[f64]], labels: &[u8]) -> LabeledDataset {
        LabeledDataset {
            schema_id: "test".into(),
            milestone: Milestone::Survival,
            signal_source: SignalSource::Machine,
            rows: xs
                .iter()
                .zip(labels)
                .map(|(x, &l)| LabeledRow { features: x.to_vec(), label: l == 1 })
                .collect(),
        }
    }

    fn small() -> CartParams {
        CartParams { min_leaf: 1, ..CartParams::default() }
    }

    #[test]
    fn perfect_separation_splits_at_midpoint() {
        let data = dataset(&[&[1.0], &[2.0], &[3.0], &[4.0]], &[1, 1, 0, 0]);
        let tree = train_cart(&data, &small()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert!(matches!(tree.root(), Node::Split { feature: 0, threshold, .. } if *threshold == 2.5));
        assert_eq!(tree.leaves().collect::<Vec<_>>(), vec![(2, 2), (0, 2)]);
        assert_eq!(tree.predict(&[1.0]).unwrap(), 0.75);
        assert_eq!(tree.predict(&[4.0]).unwrap(), 0.25);
        assert!(!tree.degenerate);
    }

    #[test]
    fn single_class_gives_flagged_leaf() {
        let data = dataset(&[&[1.0], &[2.0], &[3.0], &[4.0]], &[1, 1, 1, 1]);
        let tree = train_cart(&data, &small()).unwrap();
        assert!(tree.degenerate);
        assert_eq!(tree.nodes, vec![Node::Leaf { id: 0, positive: 4, total: 4 }]);
        assert_eq!(tree.predict(&[9.0]).unwrap(), 5.0 / 6.0);
    }

    #[test]
    fn smoothing_of_three_in_four() {
        assert!((leaf_probability(3, 4) - 0.6667).abs() < 1e-4);
        assert_eq!(leaf_probability(3, 4), 4.0 / 6.0);
    }

    #[test]
    fn depth_two_fixture_routes_by_hand() {
        // go left iff x0 <= 0.5; then on the left x1 <= 10, on the right x1 <= 20
        let tree = TreeModel {
            milestone: Milestone::SeriesA,
            signal_source: SignalSource::Machine,
            schema_id: "fx".into(),
            n_features: 2,
            params: CartParams::default(),
            degenerate: false,
            nodes: vec![
                Node::Split { id: 0, feature: 0, threshold: 0.5, left: 1, right: 4 },
                Node::Split { id: 1, feature: 1, threshold: 10.0, left: 2, right: 3 },
                Node::Leaf { id: 2, positive: 0, total: 8 },
                Node::Leaf { id: 3, positive: 4, total: 8 },
                Node::Split { id: 4, feature: 1, threshold: 20.0, left: 5, right: 6 },
                Node::Leaf { id: 5, positive: 6, total: 8 },
                Node::Leaf { id: 6, positive: 8, total: 8 },
            ],
        };
        assert_eq!(tree.predict(&[0.0, 10.0]).unwrap(), 1.0 / 10.0);
        assert_eq!(tree.predict(&[0.5, 10.5]).unwrap(), 5.0 / 10.0);
        assert_eq!(tree.predict(&[1.0, 20.0]).unwrap(), 7.0 / 10.0);
        assert_eq!(tree.predict(&[1.0, 25.0]).unwrap(), 9.0 / 10.0);
        assert!(matches!(tree.predict(&[1.0]), Err(LearningError::SchemaMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn min_leaf_is_respected() {
        let data = dataset(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0], &[6.0]], &[1, 0, 0, 0, 0, 0]);
        let tree = train_cart(&data, &CartParams { min_leaf: 2, ..CartParams::default() }).unwrap();
        assert!(tree.leaves().all(|(_, total)| total >= 2));
    }

    #[test]
    fn max_depth_caps_growth() {
        let xs: Vec<Vec<f64>> = (0..16).map(|i| vec![f64::from(i)]).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
        let tree = train_cart(&dataset(&refs, &labels), &CartParams { max_depth: 2, ..small() }).unwrap();
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn data_errors() {
        let empty = dataset(&[], &[]);
        assert!(matches!(train_cart(&empty, &small()), Err(LearningError::EmptyDataset)));
        let few = dataset(&[&[1.0], &[2.0]], &[0, 1]);
        assert!(matches!(
            train_cart(&few, &CartParams::default()),
            Err(LearningError::InsufficientRows { rows: 2, required: 10 })
        ));
        let ragged = dataset(&[&[1.0], &[2.0, 3.0]], &[0, 1]);
        assert!(matches!(train_cart(&ragged, &small()), Err(LearningError::RaggedFeatures { .. })));
        let nan = dataset(&[&[1.0], &[f64::NAN]], &[0, 1]);
        assert!(matches!(train_cart(&nan, &small()), Err(LearningError::NonFinite { .. })));
    }

    #[test]
    fn row_order_does_not_matter() {
        let a = dataset(&[&[3.0, 1.0], &[1.0, 0.0], &[2.0, 1.0], &[4.0, 0.0], &[5.0, 1.0]], &[0, 1, 1, 0, 0]);
        let mut b = a.clone();
        b.rows.reverse();
        let ta = train_cart(&a, &small()).unwrap();
        let tb = train_cart(&b, &small()).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn adjacent_float_midpoint_stays_below_upper_value() {
        let low = 1.0f64;
        let high = f64::from_bits(low.to_bits() + 1);
        let t = midpoint(low, high);
        assert!(low <= t && t < high);
    }
}
