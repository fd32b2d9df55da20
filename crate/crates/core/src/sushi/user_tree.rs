//! User tree: partitions users into cohorts whose comparisons agree.
//!
//! Comparisons are never made between users, so user-feature splits are
//! scored by how consistent the pooled comparisons of each child are: for
//! every unordered item pair, `|#(i ≻ j) − #(j ≻ i)|`, summed over pairs and
//! over both children. Each leaf holds a cohort item tree fitted on the
//! pooled comparisons of its members.

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::posterior::{fit_surrogate, FittedModel, NoiseConfig, PosteriorError};
use crate::schema::{ComparisonPair, FeatureKind, FeatureSchema, Instance, PreferenceDataset};
use crate::tree::{SplitTest, TreeConfig};

/// One user's features and answered comparisons as `(winner, loser)` item ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: usize,
    pub features: Instance,
    pub comparisons: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTreeConfig {
    pub max_depth: usize,
    pub item_tree: TreeConfig,
    pub noise: NoiseConfig,
}

impl Default for UserTreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 5,
            item_tree: TreeConfig::default().with_max_depth(5),
            noise: NoiseConfig::default(),
        }
    }
}

/// Net preference counts over unordered item pairs.
struct PairTally {
    items: usize,
    net: Vec<i64>,
}

impl PairTally {
    fn new(items: usize) -> Self {
        Self {
            items,
            net: vec![0; items * items],
        }
    }

    fn add(&mut self, (winner, loser): (usize, usize)) {
        if winner == loser {
            return;
        }
        let (i, j, sign) = if winner < loser {
            (winner, loser, 1)
        } else {
            (loser, winner, -1)
        };
        self.net[i * self.items + j] += sign;
    }

    fn score(&self) -> usize {
        self.net.iter().map(|v| v.unsigned_abs() as usize).sum()
    }
}

fn item_bound<'a>(comparisons: impl IntoIterator<Item = &'a (usize, usize)>) -> usize {
    comparisons
        .into_iter()
        .map(|&(w, l)| w.max(l) + 1)
        .max()
        .unwrap_or(0)
}

/// `Σ |C(i ≻ j) − C(j ≻ i)|` over unordered item pairs of a comparison pool.
pub fn pooled_score<'a>(comparisons: impl IntoIterator<Item = &'a (usize, usize)> + Clone) -> usize {
    let mut tally = PairTally::new(item_bound(comparisons.clone()));
    for &c in comparisons {
        tally.add(c);
    }
    tally.score()
}

/// Pooled score of the left (test fails) plus the right (test passes) users.
pub fn user_split_gain(users: &[UserRecord], test: &SplitTest) -> usize {
    let refs: Vec<&UserRecord> = users.iter().collect();
    let items = item_bound(users.iter().flat_map(|u| &u.comparisons));
    split_gain(&refs, test, items)
}

fn split_gain(users: &[&UserRecord], test: &SplitTest, items: usize) -> usize {
    let mut left = PairTally::new(items);
    let mut right = PairTally::new(items);
    for u in users {
        let side = if test.passes(&u.features) {
            &mut right
        } else {
            &mut left
        };
        for &c in &u.comparisons {
            side.add(c);
        }
    }
    left.score() + right.score()
}

/// Candidate tests that put at least one user on each side, ordered by
/// feature and then threshold or label.
pub fn user_candidate_tests(users: &[&UserRecord], schema: &FeatureSchema) -> Vec<SplitTest> {
    let mut tests = Vec::new();
    for (feature, spec) in schema.features().iter().enumerate() {
        let mut values: Vec<f64> = users.iter().map(|u| u.features.get(feature)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        match &spec.kind {
            FeatureKind::Continuous { .. } => {
                for w in values.windows(2) {
                    let threshold = 0.5 * (w[0] + w[1]);
                    if threshold > w[0] && threshold <= w[1] {
                        tests.push(SplitTest::Threshold { feature, threshold });
                    }
                }
            }
            FeatureKind::Categorical { .. } => {
                if values.len() >= 2 {
                    for v in values {
                        tests.push(SplitTest::CategoryEquals {
                            feature,
                            label: v as usize,
                        });
                    }
                }
            }
        }
    }
    tests
}

/// Highest-gain test; ties keep the earliest candidate.
pub fn best_user_split(
    users: &[&UserRecord],
    schema: &FeatureSchema,
    exec: Execution,
) -> Option<(SplitTest, usize)> {
    let items = item_bound(users.iter().flat_map(|u| &u.comparisons));
    let tests = user_candidate_tests(users, schema);
    let gains = exec.map_slice(&tests, |t| split_gain(users, t, items));
    let mut best: Option<(SplitTest, usize)> = None;
    for (test, gain) in tests.into_iter().zip(gains) {
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((test, gain));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum UserTreeNode {
    Internal {
        test: SplitTest,
        gain: usize,
        left: Box<UserTreeNode>,
        right: Box<UserTreeNode>,
    },
    Leaf {
        cohort: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub members: Vec<usize>,
    pub model: FittedModel,
}

#[derive(Debug, Clone)]
pub struct UserTree {
    pub root: UserTreeNode,
    /// Cohorts in depth-first left-to-right leaf order.
    pub cohorts: Vec<Cohort>,
}

impl UserTree {
    pub fn route(&self, features: &Instance) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                UserTreeNode::Leaf { cohort } => return *cohort,
                UserTreeNode::Internal {
                    test, left, right, ..
                } => node = if test.passes(features) { right } else { left },
            }
        }
    }

    pub fn cohort_for(&self, features: &Instance) -> &Cohort {
        &self.cohorts[self.route(features)]
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &UserTreeNode) -> usize {
            match n {
                UserTreeNode::Leaf { .. } => 0,
                UserTreeNode::Internal { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }
}

/// Grows the user tree and fits one item tree per cohort.
///
/// `item_instances[id]` is the feature vector of item `id` under
/// `item_schema`.
pub fn grow_user_tree(
    users: &[UserRecord],
    user_schema: &FeatureSchema,
    item_instances: &[Instance],
    item_schema: &FeatureSchema,
    cfg: &UserTreeConfig,
    exec: Execution,
) -> Result<UserTree, PosteriorError> {
    let mut groups: Vec<Vec<&UserRecord>> = Vec::new();
    let refs: Vec<&UserRecord> = users.iter().collect();
    let root = grow(refs, user_schema, cfg.max_depth, 0, &mut groups, exec);
    let cohorts = exec
        .map_slice(&groups, |members| {
            let pairs = members
                .iter()
                .flat_map(|u| &u.comparisons)
                .map(|&(w, l)| ComparisonPair::new(item_instances[w].clone(), item_instances[l].clone()))
                .collect();
            let data = PreferenceDataset::with_pairs(item_schema.clone(), pairs)
                .expect("item instances match the item schema");
            fit_surrogate(&data, &cfg.item_tree, &cfg.noise).map(|model| Cohort {
                members: members.iter().map(|u| u.user_id).collect(),
                model,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(UserTree { root, cohorts })
}

fn grow<'a>(
    users: Vec<&'a UserRecord>,
    schema: &FeatureSchema,
    max_depth: usize,
    depth: usize,
    groups: &mut Vec<Vec<&'a UserRecord>>,
    exec: Execution,
) -> UserTreeNode {
    let leaf = |users: Vec<&'a UserRecord>, groups: &mut Vec<Vec<&'a UserRecord>>| {
        groups.push(users);
        UserTreeNode::Leaf {
            cohort: groups.len() - 1,
        }
    };
    if depth >= max_depth || users.len() < 2 {
        return leaf(users, groups);
    }
    let parent = pooled_score(users.iter().flat_map(|u| &u.comparisons));
    match best_user_split(&users, schema, exec) {
        Some((test, gain)) if gain > parent => {
            let (right, left): (Vec<_>, Vec<_>) = users.into_iter().partition(|u| test.passes(&u.features));
            let left = grow(left, schema, max_depth, depth + 1, groups, exec);
            let right = grow(right, schema, max_depth, depth + 1, groups, exec);
            UserTreeNode::Internal {
                test,
                gain,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
        _ => leaf(users, groups),
    }
}
