//! Human-readable explanation of a fitted tree.
//!
//! The document mirrors the tree node for node. Rules carry both the
//! rendered text ("price < 0.42", "minor_group = akami") and the structured
//! test, so a document converts back into the exact tree it came from.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posterior::{FittedModel, LatentPosterior};
use crate::schema::FeatureSchema;
use crate::tree::{PreferenceTree, SplitTest, TreeError, TreeNode};

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("posterior has {actual} entries but the tree has {expected} leaves")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub leaf_count: usize,
    pub root: ExplanationNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ExplanationNode {
    Rule {
        /// Condition for the left branch.
        left_rule: String,
        /// Condition for the right branch.
        right_rule: String,
        test: SplitTest,
        split_score: usize,
        discarded_count: usize,
        left: Box<ExplanationNode>,
        right: Box<ExplanationNode>,
    },
    Leaf {
        leaf_index: usize,
        mean: f64,
        std: f64,
        pair_count: usize,
    },
}

/// Rule text for the right (`passes`) and left side of a test.
pub fn rule_text(test: &SplitTest, schema: &FeatureSchema) -> (String, String) {
    let spec = schema
        .feature(test.feature())
        .expect("test validated against schema");
    match *test {
        SplitTest::Threshold { threshold, .. } => {
            let t = format_threshold(threshold);
            (format!("{} < {t}", spec.name), format!("{} >= {t}", spec.name))
        }
        SplitTest::CategoryEquals { label, .. } => {
            let text = spec.format_value(label as f64);
            (
                format!("{} != {text}", spec.name),
                format!("{} = {text}", spec.name),
            )
        }
    }
}

/// Up to four decimals with trailing zeros removed.
fn format_threshold(t: f64) -> String {
    let s = format!("{t:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn export_explanation(
    tree: &PreferenceTree,
    posterior: &LatentPosterior,
    schema: &FeatureSchema,
) -> Result<Explanation, ExplainError> {
    if posterior.dim() != tree.leaf_count() {
        return Err(ExplainError::DimensionMismatch {
            expected: tree.leaf_count(),
            actual: posterior.dim(),
        });
    }
    Ok(Explanation {
        leaf_count: tree.leaf_count(),
        root: export_node(&tree.root, posterior, schema)?,
    })
}

pub fn explain_model(model: &FittedModel, schema: &FeatureSchema) -> Result<Explanation, ExplainError> {
    export_explanation(&model.tree, &model.posterior, schema)
}

fn export_node(
    node: &TreeNode,
    posterior: &LatentPosterior,
    schema: &FeatureSchema,
) -> Result<ExplanationNode, ExplainError> {
    Ok(match node {
        TreeNode::Leaf {
            leaf_index,
            pair_count,
        } => ExplanationNode::Leaf {
            leaf_index: *leaf_index,
            mean: posterior.mean[*leaf_index],
            std: posterior.std(*leaf_index),
            pair_count: *pair_count,
        },
        TreeNode::Internal {
            test,
            left,
            right,
            split_score,
            discarded_count,
        } => {
            test.validate(schema)?;
            let (left_rule, right_rule) = rule_text(test, schema);
            ExplanationNode::Rule {
                left_rule,
                right_rule,
                test: *test,
                split_score: *split_score,
                discarded_count: *discarded_count,
                left: Box::new(export_node(left, posterior, schema)?),
                right: Box::new(export_node(right, posterior, schema)?),
            }
        }
    })
}

impl ExplanationNode {
    /// The tree structure this node describes.
    pub fn to_tree_node(&self) -> TreeNode {
        match self {
            ExplanationNode::Leaf {
                leaf_index,
                pair_count,
                ..
            } => TreeNode::Leaf {
                leaf_index: *leaf_index,
                pair_count: *pair_count,
            },
            ExplanationNode::Rule {
                test,
                split_score,
                discarded_count,
                left,
                right,
                ..
            } => TreeNode::Internal {
                test: *test,
                left: Box::new(left.to_tree_node()),
                right: Box::new(right.to_tree_node()),
                split_score: *split_score,
                discarded_count: *discarded_count,
            },
        }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&ExplanationNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a ExplanationNode>) {
        match self {
            ExplanationNode::Leaf { .. } => out.push(self),
            ExplanationNode::Rule { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }
}

impl Explanation {
    /// Indented plain-text rendering for terminals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        render(&self.root, 0, &mut out);
        out
    }
}

fn render(node: &ExplanationNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        ExplanationNode::Leaf {
            leaf_index,
            mean,
            std,
            pair_count,
        } => {
            let _ = writeln!(
                out,
                "{pad}leaf {leaf_index}: mean {mean:.4} ± {std:.4} ({pair_count} pairs)"
            );
        }
        ExplanationNode::Rule {
            left_rule,
            right_rule,
            left,
            right,
            ..
        } => {
            let _ = writeln!(out, "{pad}if {left_rule}:");
            render(left, depth + 1, out);
            let _ = writeln!(out, "{pad}if {right_rule}:");
            render(right, depth + 1, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::fit_surrogate;
    use crate::schema::{ComparisonPair, FeatureSpec, Instance, PreferenceDataset};
    use crate::{NoiseConfig, TreeConfig};
    use nalgebra::{DMatrix, DVector};

    fn posterior(mean: Vec<f64>) -> LatentPosterior {
        let m = mean.len();
        LatentPosterior {
            mean: DVector::from_vec(mean),
            covariance: DMatrix::identity(m, m) * 4e-4,
            constrained: true,
        }
    }

    #[test]
    fn single_leaf_document() {
        let schema = FeatureSchema::continuous_box(&[(0.0, 1.0)]).unwrap();
        let tree = PreferenceTree::single_leaf(TreeConfig::default());
        let doc = export_explanation(&tree, &posterior(vec![0.0]), &schema).unwrap();
        assert_eq!(doc.leaf_count, 1);
        assert!(matches!(doc.root, ExplanationNode::Leaf { leaf_index: 0, mean, .. } if mean == 0.0));
    }

    #[test]
    fn two_leaf_document_matches_posterior_by_index() {
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("price", 0.0, 1.0)]).unwrap();
        let data = PreferenceDataset::with_pairs(
            schema.clone(),
            vec![ComparisonPair::new(Instance::new(vec![0.9]), Instance::new(vec![0.1]))],
        )
        .unwrap();
        let model = fit_surrogate(&data, &TreeConfig::default(), &NoiseConfig::default()).unwrap();
        let doc = explain_model(&model, &schema).unwrap();
        match &doc.root {
            ExplanationNode::Rule {
                left_rule,
                right_rule,
                ..
            } => {
                assert_eq!(left_rule, "price < 0.5");
                assert_eq!(right_rule, "price >= 0.5");
            }
            other => panic!("expected a rule, got {other:?}"),
        }
        let leaves = doc.root.leaves();
        assert_eq!(leaves.len(), 2);
        for leaf in leaves {
            if let ExplanationNode::Leaf { leaf_index, mean, std, .. } = leaf {
                assert_eq!(*mean, model.posterior.mean[*leaf_index]);
                assert_eq!(*std, model.posterior.std(*leaf_index));
            }
        }
        assert_eq!(doc.root.to_tree_node(), model.tree.root);
        let json = serde_json::to_string(&doc).unwrap();
        let back: Explanation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        let text = doc.render_text();
        assert!(text.starts_with("if price < 0.5:\n  leaf 0: mean "));
    }

    #[test]
    fn categorical_rule_uses_label_text() {
        let schema = FeatureSchema::new(vec![FeatureSpec::categorical(
            "minor_group",
            ["aomono", "akami", "shiromi"],
        )])
        .unwrap();
        let test = SplitTest::CategoryEquals { feature: 0, label: 1 };
        let (left, right) = rule_text(&test, &schema);
        assert_eq!(right, "minor_group = akami");
        assert_eq!(left, "minor_group != akami");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let schema = FeatureSchema::continuous_box(&[(0.0, 1.0)]).unwrap();
        let tree = PreferenceTree::single_leaf(TreeConfig::default());
        let err = export_explanation(&tree, &posterior(vec![0.0, 0.0]), &schema).unwrap_err();
        assert_eq!(err, ExplainError::DimensionMismatch { expected: 1, actual: 2 });
    }

    #[test]
    fn thresholds_are_trimmed() {
        assert_eq!(format_threshold(0.42), "0.42");
        assert_eq!(format_threshold(-0.00001), "0");
        assert_eq!(format_threshold(418.98291), "418.9829");
        assert_eq!(format_threshold(2.0), "2");
    }
}
