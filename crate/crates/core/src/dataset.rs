//! Labeled datasets, masks and probability vectors.
//!
//! Example order is identity: index `i` of a [`Mask`] or a coreset always
//! refers to the `i`-th example of the dataset it was built for, and no
//! transform in this crate reorders examples.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: usize,
    /// Label before any corruption was applied, when known.
    pub clean_label: Option<usize>,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self {
            features,
            label,
            clean_label: None,
        }
    }

    pub fn with_clean_label(features: Vec<f64>, label: usize, clean_label: usize) -> Self {
        Self {
            features,
            label,
            clean_label: Some(clean_label),
        }
    }

    pub fn is_corrupted(&self) -> bool {
        self.clean_label.is_some_and(|c| c != self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyDataset,
    RaggedFeatures { index: usize, len: usize },
    LabelOutOfRange { index: usize, label: usize },
    CleanLabelOutOfRange { index: usize, label: usize },
    NonFiniteFeature { index: usize },
    ZeroClasses,
    ZeroFeatureDim,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDataset => write!(f, "empty dataset"),
            Violation::RaggedFeatures { index, len } => {
                write!(f, "ragged features: example {index} has {len} values")
            }
            Violation::LabelOutOfRange { index, label } => {
                write!(f, "label out of range: example {index} has label {label}")
            }
            Violation::CleanLabelOutOfRange { index, label } => {
                write!(f, "clean label out of range: example {index} has {label}")
            }
            Violation::NonFiniteFeature { index } => {
                write!(f, "non-finite feature in example {index}")
            }
            Violation::ZeroClasses => write!(f, "number of classes must be positive"),
            Violation::ZeroFeatureDim => write!(f, "feature dimension must be positive"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .take(5)
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Data(msg))
    }
}

/// Checks a would-be dataset without constructing it.
pub fn validate_examples(
    examples: &[LabeledExample],
    num_classes: usize,
    feature_dim: usize,
) -> ValidationReport {
    let mut violations = Vec::new();
    if num_classes == 0 {
        violations.push(Violation::ZeroClasses);
    }
    if feature_dim == 0 {
        violations.push(Violation::ZeroFeatureDim);
    }
    if examples.is_empty() {
        violations.push(Violation::EmptyDataset);
    }
    for (index, ex) in examples.iter().enumerate() {
        if ex.features.len() != feature_dim {
            violations.push(Violation::RaggedFeatures {
                index,
                len: ex.features.len(),
            });
        } else if ex.features.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFiniteFeature { index });
        }
        if ex.label >= num_classes {
            violations.push(Violation::LabelOutOfRange {
                index,
                label: ex.label,
            });
        }
        if let Some(c) = ex.clean_label.filter(|&c| c >= num_classes) {
            violations.push(Violation::CleanLabelOutOfRange { index, label: c });
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    num_classes: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, num_classes: usize, feature_dim: usize) -> Result<Self> {
        validate_examples(&examples, num_classes, feature_dim).into_result()?;
        Ok(Self {
            examples,
            num_classes,
            feature_dim,
        })
    }

    /// Builds a dataset from a row-major feature matrix and labels.
    pub fn from_rows(
        features: &[f64],
        labels: &[usize],
        num_classes: usize,
        feature_dim: usize,
    ) -> Result<Self> {
        if feature_dim == 0 || features.len() != labels.len() * feature_dim {
            return Err(Error::Data(format!(
                "feature buffer of {} values does not hold {} rows of width {}",
                features.len(),
                labels.len(),
                feature_dim
            )));
        }
        let examples = features
            .chunks_exact(feature_dim)
            .zip(labels)
            .map(|(row, &label)| LabeledExample::new(row.to_vec(), label))
            .collect();
        Self::new(examples, num_classes, feature_dim)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_examples(&self.examples, self.num_classes, self.feature_dim)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn example(&self, index: usize) -> &LabeledExample {
        &self.examples[index]
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.examples.iter().map(|e| e.label)
    }

    pub fn has_clean_labels(&self) -> bool {
        self.examples.iter().all(|e| e.clean_label.is_some())
    }

    /// Marks the current labels as ground truth.
    pub fn with_labels_as_clean(mut self) -> Self {
        for e in &mut self.examples {
            e.clean_label = Some(e.label);
        }
        self
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for e in &self.examples {
            counts[e.label] += 1;
        }
        counts
    }

    /// Examples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut examples = Vec::with_capacity(indices.len());
        for &i in indices {
            let ex = self.examples.get(i).ok_or_else(|| {
                Error::Input(format!("index {i} out of bounds for {} examples", self.len()))
            })?;
            examples.push(ex.clone());
        }
        Dataset::new(examples, self.num_classes, self.feature_dim)
    }

    /// Examples selected by a mask, in index order.
    pub fn masked(&self, mask: &Mask) -> Result<Dataset> {
        self.check_mask(mask)?;
        self.subset(&mask.indices())
    }

    pub fn check_mask(&self, mask: &Mask) -> Result<()> {
        if mask.len() != self.len() {
            return Err(Error::Input(format!(
                "mask of length {} applied to {} examples",
                mask.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Concatenates datasets with the same shape.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("nothing to concatenate".into()))?;
        let mut examples = Vec::new();
        for p in parts {
            if p.feature_dim != first.feature_dim || p.num_classes != first.num_classes {
                return Err(Error::Input("concatenating datasets of different shapes".into()));
            }
            examples.extend_from_slice(&p.examples);
        }
        Dataset::new(examples, first.num_classes, first.feature_dim)
    }

    /// Copy with feature coordinates outside `keep` set to zero.
    pub fn zero_features(&self, keep: &Mask) -> Result<Dataset> {
        if keep.len() != self.feature_dim {
            return Err(Error::Input(format!(
                "feature mask of length {} for dimension {}",
                keep.len(),
                self.feature_dim
            )));
        }
        let mut out = self.clone();
        for e in &mut out.examples {
            for (v, &on) in e.features.iter_mut().zip(keep.bits()) {
                if !on {
                    *v = 0.0;
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn set_label(&mut self, index: usize, label: usize) {
        debug_assert!(label < self.num_classes);
        self.examples[index].label = label;
    }
}

/// Binary inclusion vector over examples (or features).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    bits: Vec<bool>,
    cardinality: usize,
}

impl Mask {
    pub fn new(bits: Vec<bool>) -> Self {
        let cardinality = bits.iter().filter(|&&b| b).count();
        Self { bits, cardinality }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self::new(vec![true; n])
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in indices {
            *bits
                .get_mut(i)
                .ok_or_else(|| Error::Input(format!("index {i} out of bounds for length {n}")))? = true;
        }
        Ok(Self::new(bits))
    }

    /// Mask number `code` in the enumeration order used by the oracles:
    /// bit `i` of `code` is bit `i` of the mask.
    pub fn from_code(n: usize, code: u64) -> Self {
        Self::new((0..n).map(|i| code >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Per-example inclusion probabilities `s` with expected-size budget `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    values: Vec<f64>,
    budget: usize,
}

impl ProbabilityVector {
    /// Tolerance on the budget constraint `sum(s) <= K`.
    pub const BUDGET_TOL: f64 = 1e-8;

    pub fn new(values: Vec<f64>, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input(format!(
                "probability {} at index {i} outside [0, 1]",
                values[i]
            )));
        }
        Ok(Self { values, budget })
    }

    /// Uniform `K/n` start point.
    pub fn uniform(n: usize, budget: usize) -> Result<Self> {
        if budget == 0 || budget > n {
            return Err(Error::Config(format!(
                "budget {budget} must be in [1, {n}]"
            )));
        }
        Self::new(vec![budget as f64 / n as f64; n], budget)
    }

    pub(crate) fn from_projected(values: Vec<f64>, budget: usize) -> Self {
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { values, budget }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Whether `s` lies in the capped simplex `{0 <= s <= 1, sum(s) <= K}`.
    pub fn is_feasible(&self) -> bool {
        self.sum() <= self.budget as f64 + Self::BUDGET_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(f: &[f64], y: usize) -> LabeledExample {
        LabeledExample::new(f.to_vec(), y)
    }

    #[test]
    fn well_formed_dataset_validates() {
        let examples = vec![ex(&[0.0, 1.0], 0), ex(&[1.0, 0.0], 1), ex(&[1.0, 1.0], 1)];
        assert!(validate_examples(&examples, 2, 2).is_ok());
        assert!(Dataset::new(examples, 2, 2).unwrap().validate().is_ok());
    }

    #[test]
    fn label_equal_to_class_count_is_out_of_range() {
        let examples = vec![ex(&[0.0], 0), ex(&[1.0], 2)];
        let report = validate_examples(&examples, 2, 1);
        assert_eq!(
            report.violations,
            vec![Violation::LabelOutOfRange { index: 1, label: 2 }]
        );
        assert!(report.violations[0].to_string().contains("label out of range"));
        assert!(Dataset::new(examples, 2, 1).is_err());
    }

    #[test]
    fn empty_dataset_is_reported() {
        let report = validate_examples(&[], 2, 1);
        assert_eq!(report.violations, vec![Violation::EmptyDataset]);
        assert_eq!(report.violations[0].to_string(), "empty dataset");
    }

    #[test]
    fn ragged_rows_are_reported() {
        let report = validate_examples(&[ex(&[0.0, 1.0], 0), ex(&[1.0], 0)], 1, 2);
        assert_eq!(
            report.violations,
            vec![Violation::RaggedFeatures { index: 1, len: 1 }]
        );
    }

    #[test]
    fn mask_cardinality_and_indices() {
        let m = Mask::new(vec![true, false, true, true]);
        assert_eq!(m.cardinality(), 3);
        assert_eq!(m.indices(), vec![0, 2, 3]);
        assert_eq!(Mask::from_code(4, 0b1101), m);
        assert!(Mask::from_indices(3, &[3]).is_err());
    }

    #[test]
    fn mask_of_wrong_length_is_rejected() {
        let d = Dataset::new(vec![ex(&[0.0], 0), ex(&[1.0], 0)], 1, 1).unwrap();
        assert!(d.masked(&Mask::ones(3)).is_err());
        assert_eq!(d.masked(&Mask::new(vec![false, true])).unwrap().len(), 1);
    }

    #[test]
    fn probability_vector_bounds() {
        assert!(ProbabilityVector::new(vec![0.2, 1.1], 1).is_err());
        assert!(ProbabilityVector::new(vec![0.2, 0.3], 0).is_err());
        let s = ProbabilityVector::uniform(10, 3).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.3));
        assert!(s.is_feasible());
        assert!(ProbabilityVector::uniform(3, 4).is_err());
    }
}
