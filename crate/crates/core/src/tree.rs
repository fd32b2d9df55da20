//! Decision trees grown directly from pairwise comparisons.
//!
//! A split sends an instance right when it passes the test (`x[k] >= t` for
//! thresholds, `x[k] == label` for categorical tests). The consistency score
//! of a split is `|n_right - n_left|`, where `n_right` counts pairs whose
//! winner goes right and loser goes left and `n_left` the reverse. After a
//! split only the pairs that fall entirely on one side reach the children;
//! straddlers are dropped at that node.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::schema::{ComparisonPair, FeatureKind, FeatureSchema, Instance, PreferenceDataset};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("feature index {0} is out of range")]
    FeatureOutOfRange(usize),
    #[error("threshold test on categorical feature `{0}`")]
    ThresholdOnCategorical(String),
    #[error("category test on continuous feature `{0}`")]
    CategoryOnContinuous(String),
    #[error("label index {label} out of range for feature `{feature}`")]
    LabelOutOfRange { feature: String, label: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitTest {
    Threshold { feature: usize, threshold: f64 },
    CategoryEquals { feature: usize, label: usize },
}

impl SplitTest {
    pub fn feature(&self) -> usize {
        match *self {
            SplitTest::Threshold { feature, .. } | SplitTest::CategoryEquals { feature, .. } => {
                feature
            }
        }
    }

    /// True when the instance goes to the right child.
    #[inline]
    pub fn passes(&self, instance: &Instance) -> bool {
        match *self {
            SplitTest::Threshold { feature, threshold } => instance.get(feature) >= threshold,
            SplitTest::CategoryEquals { feature, label } => instance.get(feature) == label as f64,
        }
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), TreeError> {
        let spec = schema
            .feature(self.feature())
            .ok_or(TreeError::FeatureOutOfRange(self.feature()))?;
        match (self, &spec.kind) {
            (SplitTest::Threshold { .. }, FeatureKind::Continuous { .. }) => Ok(()),
            (SplitTest::Threshold { .. }, FeatureKind::Categorical { .. }) => {
                Err(TreeError::ThresholdOnCategorical(spec.name.clone()))
            }
            (SplitTest::CategoryEquals { label, .. }, FeatureKind::Categorical { labels }) => {
                if *label < labels.len() {
                    Ok(())
                } else {
                    Err(TreeError::LabelOutOfRange {
                        feature: spec.name.clone(),
                        label: *label,
                    })
                }
            }
            (SplitTest::CategoryEquals { .. }, FeatureKind::Continuous { .. }) => {
                Err(TreeError::CategoryOnContinuous(spec.name.clone()))
            }
        }
    }

    /// Ordering key used for tie-breaking within one feature.
    fn order_key(&self) -> f64 {
        match *self {
            SplitTest::Threshold { threshold, .. } => threshold,
            SplitTest::CategoryEquals { label, .. } => label as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_split_score: usize,
    pub min_samples_split: usize,
    pub max_depth: usize,
}

impl Default for TreeConfig {
    /// Settings loose enough that only straddler discarding limits growth.
    fn default() -> Self {
        Self {
            min_split_score: 1,
            min_samples_split: 1,
            max_depth: 50,
        }
    }
}

impl TreeConfig {
    pub fn with_max_depth(self, max_depth: usize) -> Self {
        Self { max_depth, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        test: SplitTest,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
        split_score: usize,
        discarded_count: usize,
    },
    Leaf {
        leaf_index: usize,
        pair_count: usize,
    },
}

impl TreeNode {
    pub fn route(&self, instance: &Instance) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf_index, .. } => return *leaf_index,
                TreeNode::Internal {
                    test, left, right, ..
                } => {
                    node = if test.passes(instance) { right } else { left };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Per-leaf pair counts indexed by leaf index.
    pub fn leaf_pair_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.leaf_count()];
        self.visit_leaves(&mut |leaf, pairs| counts[leaf] = pairs);
        counts
    }

    fn visit_leaves(&self, visit: &mut impl FnMut(usize, usize)) {
        match self {
            TreeNode::Leaf {
                leaf_index,
                pair_count,
            } => visit(*leaf_index, *pair_count),
            TreeNode::Internal { left, right, .. } => {
                left.visit_leaves(visit);
                right.visit_leaves(visit);
            }
        }
    }
}

/// A grown tree together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTree {
    pub root: TreeNode,
    pub config: TreeConfig,
    leaf_count: usize,
    leaf_pair_counts: Vec<usize>,
}

impl PreferenceTree {
    pub fn new(root: TreeNode, config: TreeConfig) -> Self {
        let leaf_pair_counts = root.leaf_pair_counts();
        Self {
            leaf_count: leaf_pair_counts.len(),
            leaf_pair_counts,
            root,
            config,
        }
    }

    /// A tree with a single leaf holding no pairs.
    pub fn single_leaf(config: TreeConfig) -> Self {
        Self::new(
            TreeNode::Leaf {
                leaf_index: 0,
                pair_count: 0,
            },
            config,
        )
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn route(&self, instance: &Instance) -> usize {
        self.root.route(instance)
    }

    /// Number of training pairs that reached each leaf.
    pub fn pair_count(&self, leaf: usize) -> usize {
        self.leaf_pair_counts[leaf]
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// `|n_right - n_left|` for one candidate test.
pub fn consistency_score(
    pairs: &[ComparisonPair],
    test: &SplitTest,
    schema: &FeatureSchema,
) -> Result<usize, TreeError> {
    test.validate(schema)?;
    Ok(score_unchecked(pairs, test))
}

fn score_unchecked(pairs: &[ComparisonPair], test: &SplitTest) -> usize {
    let mut net: i64 = 0;
    for pair in pairs {
        match (test.passes(&pair.winner), test.passes(&pair.loser)) {
            (true, false) => net += 1,
            (false, true) => net -= 1,
            _ => {}
        }
    }
    net.unsigned_abs() as usize
}

/// Best test for one feature: highest score, lowest threshold/label on ties.
fn best_for_feature(
    pairs: &[ComparisonPair],
    feature: usize,
    kind: &FeatureKind,
) -> Option<(SplitTest, usize)> {
    match kind {
        FeatureKind::Continuous { .. } => best_threshold(pairs, feature),
        FeatureKind::Categorical { labels } => best_category(pairs, feature, labels.len()),
    }
}

/// Sweep over the sorted midpoints of the pooled observed values.
///
/// A pair with distinct values `lo < hi` is separated by every threshold in
/// `(lo, hi]`; it adds +1 to those candidates when the winner holds `hi` and
/// -1 otherwise. A difference array over candidate indices gives every
/// candidate's signed net in `O(n log n)`.
fn best_threshold(pairs: &[ComparisonPair], feature: usize) -> Option<(SplitTest, usize)> {
    let mut values: Vec<f64> = pairs
        .iter()
        .flat_map(|p| [p.winner.get(feature), p.loser.get(feature)])
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return None;
    }
    let candidates: Vec<f64> = values
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            // adjacent floats: the midpoint must still separate the two values
            if mid > w[0] {
                mid
            } else {
                w[1]
            }
        })
        .collect();

    let mut diff = vec![0i64; candidates.len() + 1];
    for pair in pairs {
        let (w, l) = (pair.winner.get(feature), pair.loser.get(feature));
        if w == l {
            continue;
        }
        let (lo, hi, sign) = if w > l { (l, w, 1) } else { (w, l, -1) };
        // candidates c with lo < c <= hi
        let start = candidates.partition_point(|&c| c <= lo);
        let end = candidates.partition_point(|&c| c <= hi);
        diff[start] += sign;
        diff[end] -= sign;
    }
    let mut best: Option<(usize, usize)> = None;
    let mut running = 0i64;
    for (i, d) in diff.iter().take(candidates.len()).enumerate() {
        running += d;
        let score = running.unsigned_abs() as usize;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, score)| {
        (
            SplitTest::Threshold {
                feature,
                threshold: candidates[i],
            },
            score,
        )
    })
}

fn best_category(
    pairs: &[ComparisonPair],
    feature: usize,
    label_count: usize,
) -> Option<(SplitTest, usize)> {
    let mut observed = vec![false; label_count];
    let mut net = vec![0i64; label_count];
    for pair in pairs {
        let (w, l) = (pair.winner.get(feature) as usize, pair.loser.get(feature) as usize);
        observed[w] = true;
        observed[l] = true;
        if w != l {
            // winner equals label w, loser does not: right-going winner
            net[w] += 1;
            net[l] -= 1;
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for label in (0..label_count).filter(|&c| observed[c]) {
        let score = net[label].unsigned_abs() as usize;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((label, score));
        }
    }
    best.map(|(label, score)| (SplitTest::CategoryEquals { feature, label }, score))
}

/// Highest-scoring split, or `None` if no candidate reaches
/// `config.min_split_score`.
///
/// Thresholds are the midpoints between consecutive distinct observed values
/// (winners and losers pooled); categorical features get one equality test per
/// observed label. Ties go to the lowest feature index, then the lowest
/// threshold or label index.
pub fn best_split(
    pairs: &[ComparisonPair],
    schema: &FeatureSchema,
    config: &TreeConfig,
) -> Option<(SplitTest, usize)> {
    best_split_with(pairs, schema, config, Execution::default())
}

pub fn best_split_with(
    pairs: &[ComparisonPair],
    schema: &FeatureSchema,
    config: &TreeConfig,
    exec: Execution,
) -> Option<(SplitTest, usize)> {
    let per_feature = exec.map(schema.len(), |k| {
        best_for_feature(pairs, k, &schema.features()[k].kind)
    });
    let mut best: Option<(SplitTest, usize)> = None;
    for (test, score) in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((test, score));
        }
    }
    best.filter(|(_, score)| *score >= config.min_split_score)
}

/// Exhaustive variant scoring every candidate with [`consistency_score`].
/// Slow; used to cross-check the sweep.
pub fn best_split_exhaustive(
    pairs: &[ComparisonPair],
    schema: &FeatureSchema,
    config: &TreeConfig,
) -> Option<(SplitTest, usize)> {
    let mut best: Option<(SplitTest, usize)> = None;
    for test in candidate_tests(pairs, schema) {
        let score = score_unchecked(pairs, &test);
        let better = match &best {
            None => true,
            Some((b, s)) => {
                score > *s
                    || (score == *s
                        && (test.feature(), test.order_key()) < (b.feature(), b.order_key()))
            }
        };
        if better {
            best = Some((test, score));
        }
    }
    best.filter(|(_, score)| *score >= config.min_split_score)
}

/// Every candidate test in feature order, then threshold/label order.
pub fn candidate_tests(pairs: &[ComparisonPair], schema: &FeatureSchema) -> Vec<SplitTest> {
    let mut tests = Vec::new();
    for (feature, spec) in schema.features().iter().enumerate() {
        let mut values: Vec<f64> = pairs
            .iter()
            .flat_map(|p| [p.winner.get(feature), p.loser.get(feature)])
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        match spec.kind {
            FeatureKind::Continuous { .. } => {
                tests.extend(values.windows(2).map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    SplitTest::Threshold {
                        feature,
                        threshold: if mid > w[0] { mid } else { w[1] },
                    }
                }));
            }
            FeatureKind::Categorical { .. } => {
                tests.extend(values.iter().map(|&v| SplitTest::CategoryEquals {
                    feature,
                    label: v as usize,
                }));
            }
        }
    }
    tests
}

/// Pairs split by a test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    /// Both members fail the test.
    pub left: Vec<ComparisonPair>,
    /// Both members pass.
    pub right: Vec<ComparisonPair>,
    /// Members on opposite sides.
    pub discarded: Vec<ComparisonPair>,
}

pub fn partition_pairs(pairs: &[ComparisonPair], test: &SplitTest) -> Partition {
    let mut out = Partition::default();
    for pair in pairs {
        match (test.passes(&pair.winner), test.passes(&pair.loser)) {
            (false, false) => out.left.push(pair.clone()),
            (true, true) => out.right.push(pair.clone()),
            _ => out.discarded.push(pair.clone()),
        }
    }
    out
}

/// Greedy recursive growth. Leaves are numbered depth-first, left to right.
pub fn grow_tree(dataset: &PreferenceDataset, config: &TreeConfig) -> PreferenceTree {
    grow_tree_with(dataset.pairs(), dataset.schema(), config, Execution::default())
}

pub fn grow_tree_with(
    pairs: &[ComparisonPair],
    schema: &FeatureSchema,
    config: &TreeConfig,
    exec: Execution,
) -> PreferenceTree {
    let mut next_leaf = 0;
    let root = grow_node(pairs, schema, config, exec, 0, &mut next_leaf);
    PreferenceTree::new(root, *config)
}

fn grow_node(
    pairs: &[ComparisonPair],
    schema: &FeatureSchema,
    config: &TreeConfig,
    exec: Execution,
    depth: usize,
    next_leaf: &mut usize,
) -> TreeNode {
    let split = if depth >= config.max_depth || pairs.len() < config.min_samples_split {
        None
    } else {
        best_split_with(pairs, schema, config, exec)
    };
    match split {
        None => {
            let leaf_index = *next_leaf;
            *next_leaf += 1;
            TreeNode::Leaf {
                leaf_index,
                pair_count: pairs.len(),
            }
        }
        Some((test, split_score)) => {
            let parts = partition_pairs(pairs, &test);
            let left = grow_node(&parts.left, schema, config, exec, depth + 1, next_leaf);
            let right = grow_node(&parts.right, schema, config, exec, depth + 1, next_leaf);
            TreeNode::Internal {
                test,
                left: Box::new(left),
                right: Box::new(right),
                split_score,
                discarded_count: parts.discarded.len(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;
    use proptest::prelude::*;

    fn one_d() -> FeatureSchema {
        FeatureSchema::continuous_box(&[(0.0, 1.0)]).unwrap()
    }

    fn pairs_1d(raw: &[(f64, f64)]) -> Vec<ComparisonPair> {
        raw.iter()
            .map(|&(w, l)| ComparisonPair::new(Instance::new(vec![w]), Instance::new(vec![l])))
            .collect()
    }

    fn mixed() -> Vec<ComparisonPair> {
        pairs_1d(&[(0.9, 0.6), (0.3, 0.1), (0.8, 0.2)])
    }

    fn consistent() -> Vec<ComparisonPair> {
        pairs_1d(&[(0.9, 0.1), (0.8, 0.2), (0.7, 0.3)])
    }

    fn half() -> SplitTest {
        SplitTest::Threshold {
            feature: 0,
            threshold: 0.5,
        }
    }

    #[test]
    fn consistency_score_examples() {
        assert_eq!(consistency_score(&mixed(), &half(), &one_d()).unwrap(), 1);
        assert_eq!(consistency_score(&[], &half(), &one_d()).unwrap(), 0);
        assert_eq!(consistency_score(&consistent(), &half(), &one_d()).unwrap(), 3);
    }

    #[test]
    fn consistency_score_rejects_kind_mismatch() {
        let schema =
            FeatureSchema::new(vec![FeatureSpec::categorical("c", ["a", "b"])]).unwrap();
        assert!(matches!(
            consistency_score(&[], &half(), &schema),
            Err(TreeError::ThresholdOnCategorical(_))
        ));
        let test = SplitTest::CategoryEquals {
            feature: 0,
            label: 0,
        };
        assert!(matches!(
            consistency_score(&[], &test, &one_d()),
            Err(TreeError::CategoryOnContinuous(_))
        ));
    }

    #[test]
    fn best_split_examples() {
        let cfg = TreeConfig::default();
        assert_eq!(best_split(&consistent(), &one_d(), &cfg), Some((half(), 3)));
        let same = pairs_1d(&[(0.4, 0.4), (0.4, 0.4)]);
        assert_eq!(best_split(&same, &one_d(), &cfg), None);
        let strict = TreeConfig {
            min_split_score: 4,
            ..cfg
        };
        assert_eq!(best_split(&consistent(), &one_d(), &strict), None);
    }

    #[test]
    fn partition_examples() {
        let parts = partition_pairs(&mixed(), &half());
        assert_eq!(parts.left, pairs_1d(&[(0.3, 0.1)]));
        assert_eq!(parts.right, pairs_1d(&[(0.9, 0.6)]));
        assert_eq!(parts.discarded, pairs_1d(&[(0.8, 0.2)]));
        assert_eq!(partition_pairs(&[], &half()), Partition::default());
        let all_right = partition_pairs(&pairs_1d(&[(0.9, 0.6), (0.7, 0.8)]), &half());
        assert_eq!(all_right.right.len(), 2);
        assert!(all_right.left.is_empty() && all_right.discarded.is_empty());
    }

    #[test]
    fn grow_tree_examples() {
        let cfg = TreeConfig::default();
        let empty = PreferenceDataset::new(one_d());
        let tree = grow_tree(&empty, &cfg);
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.route(&Instance::new(vec![0.3])), 0);

        let data = PreferenceDataset::with_pairs(one_d(), consistent()).unwrap();
        let tree = grow_tree(&data, &cfg);
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.depth(), 1);
        for p in data.pairs() {
            assert_eq!(tree.route(&p.loser), 0);
            assert_eq!(tree.route(&p.winner), 1);
        }
        assert_eq!(tree.route(&Instance::new(vec![0.9])), 1);
        // boundary value passes the >= test
        assert_eq!(tree.route(&Instance::new(vec![0.5])), 1);
        match &tree.root {
            TreeNode::Internal {
                split_score,
                discarded_count,
                ..
            } => {
                assert_eq!(*split_score, 3);
                assert_eq!(*discarded_count, 3);
            }
            _ => panic!("expected a split"),
        }

        let flat = grow_tree(&data, &cfg.with_max_depth(0));
        assert_eq!(flat.leaf_count(), 1);
        assert_eq!(flat.pair_count(0), 3);
    }

    #[test]
    fn categorical_split_uses_equality() {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("x", 0.0, 1.0),
            FeatureSpec::categorical("c", ["a", "b", "c"]),
        ])
        .unwrap();
        let p = |w: [f64; 2], l: [f64; 2]| {
            ComparisonPair::new(Instance::new(w.to_vec()), Instance::new(l.to_vec()))
        };
        // label "b" always wins; x carries no signal (identical values)
        let pairs = vec![
            p([0.5, 1.0], [0.5, 0.0]),
            p([0.5, 1.0], [0.5, 2.0]),
            p([0.5, 1.0], [0.5, 0.0]),
        ];
        let (test, score) = best_split(&pairs, &schema, &TreeConfig::default()).unwrap();
        assert_eq!(
            test,
            SplitTest::CategoryEquals {
                feature: 1,
                label: 1
            }
        );
        assert_eq!(score, 3);
    }

    #[test]
    fn ties_prefer_lowest_feature_then_lowest_threshold() {
        let schema = FeatureSchema::continuous_box(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let pairs = vec![
            ComparisonPair::new(Instance::new(vec![0.9, 0.9]), Instance::new(vec![0.1, 0.1])),
        ];
        let (test, _) = best_split(&pairs, &schema, &TreeConfig::default()).unwrap();
        assert_eq!(test.feature(), 0);
        // two points pooled: a single midpoint
        assert_eq!(
            test,
            SplitTest::Threshold {
                feature: 0,
                threshold: 0.5
            }
        );
    }

    fn arb_dataset() -> impl Strategy<Value = (FeatureSchema, Vec<ComparisonPair>)> {
        (1usize..=4, 0usize..=50).prop_flat_map(|(d, n)| {
            let kinds = proptest::collection::vec(any::<bool>(), d);
            kinds.prop_flat_map(move |kinds| {
                let schema = FeatureSchema::new(
                    kinds
                        .iter()
                        .enumerate()
                        .map(|(i, &cat)| {
                            if cat {
                                FeatureSpec::categorical(format!("c{i}"), ["a", "b", "c"])
                            } else {
                                FeatureSpec::continuous(format!("x{i}"), 0.0, 1.0)
                            }
                        })
                        .collect(),
                )
                .unwrap();
                let value = |cat: bool| -> BoxedStrategy<f64> {
                    if cat {
                        (0usize..3).prop_map(|v| v as f64).boxed()
                    } else {
                        // coarse grid to force repeated values
                        (0u32..=8).prop_map(|v| v as f64 / 8.0).boxed()
                    }
                };
                let inst = kinds.iter().map(|&c| value(c)).collect::<Vec<_>>();
                let pair = (inst.clone(), inst).prop_map(|(w, l)| {
                    ComparisonPair::new(Instance::new(w), Instance::new(l))
                });
                (Just(schema), proptest::collection::vec(pair, n))
            })
        })
    }

    proptest! {
        #[test]
        fn sweep_matches_exhaustive((schema, pairs) in arb_dataset()) {
            let cfg = TreeConfig::default();
            prop_assert_eq!(
                best_split_with(&pairs, &schema, &cfg, Execution::Sequential),
                best_split_exhaustive(&pairs, &schema, &cfg)
            );
        }

        #[test]
        fn partition_covers_input((schema, pairs) in arb_dataset()) {
            for test in candidate_tests(&pairs, &schema) {
                let parts = partition_pairs(&pairs, &test);
                prop_assert_eq!(parts.left.len() + parts.right.len() + parts.discarded.len(), pairs.len());
            }
        }

        #[test]
        fn grown_trees_respect_config((schema, pairs) in arb_dataset(), depth in 0usize..6, min_score in 1usize..4) {
            let cfg = TreeConfig { min_split_score: min_score, min_samples_split: 1, max_depth: depth };
            let tree = grow_tree_with(&pairs, &schema, &cfg, Execution::Sequential);
            prop_assert!(tree.depth() <= depth);
            fn check(node: &TreeNode, min: usize, pairs: &[ComparisonPair]) -> Result<(), TestCaseError> {
                if let TreeNode::Internal { test, left, right, split_score, .. } = node {
                    prop_assert!(*split_score >= min);
                    let parts = partition_pairs(pairs, test);
                    // pairs sent wholly left route into the left subtree
                    let left_leaves = leaf_set(left);
                    for p in &parts.left {
                        prop_assert!(left_leaves.contains(&node.route(&p.winner)));
                        prop_assert!(left_leaves.contains(&node.route(&p.loser)));
                    }
                    check(left, min, &parts.left)?;
                    check(right, min, &parts.right)?;
                }
                Ok(())
            }
            fn leaf_set(node: &TreeNode) -> Vec<usize> {
                let mut out = Vec::new();
                node.visit_leaves(&mut |i, _| out.push(i));
                out
            }
            check(&tree.root, min_score, &pairs)?;
            let mut leaves = leaf_set(&tree.root);
            leaves.sort_unstable();
            prop_assert_eq!(leaves, (0..tree.leaf_count()).collect::<Vec<_>>());
        }
    }
}
