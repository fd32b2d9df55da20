//! Search-space schema, instances and comparison records.
//!
//! An [`Instance`] stores one `f64` per schema feature. Continuous features
//! hold the raw value; categorical features hold the label index as an
//! exact integer. Nothing is rescaled: tree splits are invariant to the
//! scale of each feature.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("schema has no features")]
    Empty,
    #[error("feature `{0}`: duplicate feature name")]
    DuplicateName(String),
    #[error("feature `{name}`: bounds must be finite with lower < upper (got [{lower}, {upper}])")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("feature `{name}`: categorical features need at least two distinct labels")]
    TooFewLabels { name: String },
    #[error("feature `{name}`: duplicate label `{label}`")]
    DuplicateLabel { name: String, label: String },
    #[error("feature `{name}`: unknown label `{label}`")]
    UnknownLabel { name: String, label: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous { bounds: [f64; 2] },
    Categorical { labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous {
                bounds: [lower, upper],
            },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical {
                labels: labels.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FeatureKind::Continuous { .. })
    }

    /// Width used when measuring distances in feature space.
    pub(crate) fn span(&self) -> f64 {
        match &self.kind {
            FeatureKind::Continuous { bounds } => bounds[1] - bounds[0],
            FeatureKind::Categorical { .. } => 1.0,
        }
    }

    /// Formats a stored value for display: label text for categorical features.
    pub fn format_value(&self, value: f64) -> String {
        match &self.kind {
            FeatureKind::Continuous { .. } => format!("{value}"),
            FeatureKind::Categorical { labels } => labels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{value}")),
        }
    }
}

/// Ordered list of features spanning the search space.
///
/// Construction validates every invariant; a deserialized schema is
/// validated the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

#[derive(Deserialize)]
struct RawSchema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = SchemaError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        FeatureSchema::new(raw.features)
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self, SchemaError> {
        if features.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut names = HashSet::new();
        for spec in &features {
            if !names.insert(spec.name.as_str()) {
                return Err(SchemaError::DuplicateName(spec.name.clone()));
            }
            match &spec.kind {
                FeatureKind::Continuous { bounds: [lo, hi] } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(SchemaError::InvalidBounds {
                            name: spec.name.clone(),
                            lower: *lo,
                            upper: *hi,
                        });
                    }
                }
                FeatureKind::Categorical { labels } => {
                    let mut seen = HashSet::new();
                    for label in labels {
                        if !seen.insert(label.as_str()) {
                            return Err(SchemaError::DuplicateLabel {
                                name: spec.name.clone(),
                                label: label.clone(),
                            });
                        }
                    }
                    if labels.len() < 2 {
                        return Err(SchemaError::TooFewLabels {
                            name: spec.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self { features })
    }

    /// A box of continuous features named `x0..x{d-1}`.
    pub fn continuous_box(bounds: &[(f64, f64)]) -> Result<Self, SchemaError> {
        Self::new(
            bounds
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| FeatureSpec::continuous(format!("x{i}"), lo, hi))
                .collect(),
        )
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, index: usize) -> Option<&FeatureSpec> {
        self.features.get(index)
    }

    /// Checks an instance against the schema. An empty list means valid.
    pub fn validate(&self, instance: &Instance) -> Vec<Violation> {
        let mut violations = Vec::new();
        if instance.len() != self.len() {
            violations.push(Violation {
                feature: None,
                message: format!(
                    "expected {} values, got {}",
                    self.len(),
                    instance.len()
                ),
            });
            return violations;
        }
        for (spec, &value) in self.features.iter().zip(instance.values()) {
            let problem = match &spec.kind {
                FeatureKind::Continuous { bounds: [lo, hi] } => {
                    if !value.is_finite() || value < *lo || value > *hi {
                        Some(format!("value {value} outside [{lo}, {hi}]"))
                    } else {
                        None
                    }
                }
                FeatureKind::Categorical { labels } => {
                    if value.fract() != 0.0 || value < 0.0 || value >= labels.len() as f64 {
                        Some(format!(
                            "category index {value} not in 0..{}",
                            labels.len()
                        ))
                    } else {
                        None
                    }
                }
            };
            if let Some(message) = problem {
                violations.push(Violation {
                    feature: Some(spec.name.clone()),
                    message,
                });
            }
        }
        violations
    }

    pub fn is_valid(&self, instance: &Instance) -> bool {
        self.validate(instance).is_empty()
    }

    /// Like [`validate`](Self::validate) but as a `Result`, for call sites that
    /// treat an invalid instance as an error.
    pub fn check(&self, instance: &Instance) -> Result<(), SchemaError> {
        let violations = self.validate(instance);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SchemaError::InvalidInstance(
                violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    /// Normalized Euclidean distance: continuous gaps are divided by the
    /// feature's range, categorical mismatches count as 1.
    pub fn distance(&self, a: &Instance, b: &Instance) -> f64 {
        self.features
            .iter()
            .zip(a.values().iter().zip(b.values()))
            .map(|(spec, (x, y))| match spec.kind {
                FeatureKind::Continuous { .. } => ((x - y) / spec.span()).powi(2),
                FeatureKind::Categorical { .. } => {
                    if x == y {
                        0.0
                    } else {
                        1.0
                    }
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Resolves a label to its index for a categorical feature.
    pub fn label_index(&self, feature: usize, label: &str) -> Result<usize, SchemaError> {
        let spec = &self.features[feature];
        match &spec.kind {
            FeatureKind::Categorical { labels } => labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| SchemaError::UnknownLabel {
                    name: spec.name.clone(),
                    label: label.to_string(),
                }),
            FeatureKind::Continuous { .. } => Err(SchemaError::UnknownLabel {
                name: spec.name.clone(),
                label: label.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// `None` when the instance has the wrong length.
    pub feature: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.feature {
            Some(name) => write!(f, "feature `{name}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// One point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, feature: usize) -> f64 {
        self.0[feature]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Instance {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// An observed preference `winner ≻ loser`.
///
/// Identical winner and loser are allowed; such a pair carries no
/// information and is ignored by every split and by the likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPair {
    pub winner: Instance,
    pub loser: Instance,
}

impl ComparisonPair {
    pub fn new(winner: Instance, loser: Instance) -> Self {
        Self { winner, loser }
    }

    pub fn reversed(&self) -> Self {
        Self {
            winner: self.loser.clone(),
            loser: self.winner.clone(),
        }
    }
}

/// An unordered pair offered to the decision-maker; `a` is shown first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: Instance,
    pub b: Instance,
}

impl CandidatePair {
    pub fn new(a: Instance, b: Instance) -> Self {
        Self { a, b }
    }
}

/// Comparisons observed so far, in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDataset {
    schema: FeatureSchema,
    pairs: Vec<ComparisonPair>,
}

impl PreferenceDataset {
    pub fn new(schema: FeatureSchema) -> Self {
        Self {
            schema,
            pairs: Vec::new(),
        }
    }

    pub fn with_pairs(
        schema: FeatureSchema,
        pairs: Vec<ComparisonPair>,
    ) -> Result<Self, SchemaError> {
        let mut dataset = Self::new(schema);
        for pair in pairs {
            dataset.push(pair)?;
        }
        Ok(dataset)
    }

    /// Appends a comparison after validating both members.
    pub fn push(&mut self, pair: ComparisonPair) -> Result<(), SchemaError> {
        self.schema.check(&pair.winner)?;
        self.schema.check(&pair.loser)?;
        self.pairs.push(pair);
        Ok(())
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn pairs(&self) -> &[ComparisonPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every observed instance in order of first appearance: winner, then
    /// loser, pair by pair. Duplicates are kept.
    pub fn observed_instances(&self) -> impl Iterator<Item = &Instance> {
        self.pairs.iter().flat_map(|p| [&p.winner, &p.loser])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("x", 0.0, 1.0),
            FeatureSpec::categorical("color", ["r", "g", "b"]),
        ])
        .unwrap()
    }

    #[test]
    fn in_bounds_instance_is_valid() {
        assert!(schema().validate(&Instance::new(vec![0.5, 1.0])).is_empty());
    }

    #[test]
    fn out_of_bounds_continuous_value_names_feature() {
        let v = schema().validate(&Instance::new(vec![1.5, 1.0]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].feature.as_deref(), Some("x"));
    }

    #[test]
    fn invalid_category_index_names_feature() {
        let v = schema().validate(&Instance::new(vec![0.5, 3.0]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].feature.as_deref(), Some("color"));
        let v = schema().validate(&Instance::new(vec![0.5, 0.5]));
        assert_eq!(v[0].feature.as_deref(), Some("color"));
    }

    #[test]
    fn wrong_length_is_a_violation() {
        let v = schema().validate(&Instance::new(vec![0.5]));
        assert_eq!(v.len(), 1);
        assert!(v[0].feature.is_none());
    }

    #[test]
    fn schema_invariants_are_enforced() {
        assert!(matches!(
            FeatureSchema::new(vec![FeatureSpec::continuous("x", 1.0, 1.0)]),
            Err(SchemaError::InvalidBounds { .. })
        ));
        assert!(matches!(
            FeatureSchema::new(vec![FeatureSpec::categorical("c", ["only"])]),
            Err(SchemaError::TooFewLabels { .. })
        ));
        assert!(matches!(
            FeatureSchema::new(vec![FeatureSpec::categorical("c", ["a", "a"])]),
            Err(SchemaError::DuplicateLabel { .. })
        ));
        assert!(matches!(
            FeatureSchema::new(vec![
                FeatureSpec::continuous("x", 0.0, 1.0),
                FeatureSpec::continuous("x", 0.0, 2.0)
            ]),
            Err(SchemaError::DuplicateName(_))
        ));
    }

    #[test]
    fn schema_json_layout() {
        let json = serde_json::to_value(schema()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"features": [
                {"name": "x", "kind": "continuous", "bounds": [0.0, 1.0]},
                {"name": "color", "kind": "categorical", "labels": ["r", "g", "b"]}
            ]})
        );
        let back: FeatureSchema = serde_json::from_value(json).unwrap();
        assert_eq!(back, schema());
    }

    #[test]
    fn malformed_json_schema_is_rejected_with_field_name() {
        let err = serde_json::from_str::<FeatureSchema>(
            r#"{"features":[{"name":"price","kind":"continuous","bounds":[3,1]}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("price"), "{err}");
    }

    #[test]
    fn dataset_append_preserves_order_and_validates() {
        let mut d = PreferenceDataset::new(schema());
        let a = Instance::new(vec![0.1, 0.0]);
        let b = Instance::new(vec![0.2, 2.0]);
        d.push(ComparisonPair::new(a.clone(), b.clone())).unwrap();
        d.push(ComparisonPair::new(b.clone(), a.clone())).unwrap();
        assert!(d
            .push(ComparisonPair::new(a.clone(), Instance::new(vec![2.0, 0.0])))
            .is_err());
        assert_eq!(d.len(), 2);
        assert_eq!(d.pairs()[0].winner, a);
        assert_eq!(d.pairs()[1].winner, b);
        let observed: Vec<_> = d.observed_instances().cloned().collect();
        assert_eq!(observed, vec![a.clone(), b.clone(), b, a]);
    }
}
