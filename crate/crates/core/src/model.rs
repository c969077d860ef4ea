//! Self-describing model files (JSON).
//!
//! A file holds everything needed to classify a raw feature vector: the
//! learner and its hyperparameters, the feature set, the min-max scaling fitted
//! on training data, the class names and the fitted parameters.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabelTuple, LabeledSample, ScalingParams, Target};
use crate::features::{FeatureSetId, FeatureVector};
use crate::learners::{Hyper, LearnerKind, Model};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Sorted distinct class names and each label's index into them.
pub fn encode_label_tuples(labels: &[LabelTuple], target: Target) -> (Vec<String>, Vec<usize>) {
    let projected: Vec<String> = labels.iter().map(|l| target.project(l)).collect();
    let names: Vec<String> = projected.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let indices = projected.iter().map(|name| names.binary_search(name).expect("name collected above")).collect();
    (names, indices)
}

pub fn encode_labels(samples: &[LabeledSample], target: Target) -> (Vec<String>, Vec<usize>) {
    let labels: Vec<LabelTuple> = samples.iter().map(|s| s.label).collect();
    encode_label_tuples(&labels, target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub learner: LearnerKind,
    pub hyper: Hyper,
    pub target: Target,
    pub schema: FeatureSetId,
    pub classes: Vec<String>,
    pub scaling: ScalingParams,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub class: String,
    /// Per-class votes, aligned with [`ModelFile::classes`].
    pub votes: Vec<f64>,
}

impl ModelFile {
    /// Fits scaling on `train`, then the learner on the scaled rows.
    pub fn train(train: &[LabeledSample], hyper: &Hyper, target: Target, seed: u64) -> Result<Self> {
        let first = train.first().ok_or_else(|| Error::InvalidExperiment("empty training set".into()))?;
        let schema = first.features.schema;
        if let Some(bad) = train.iter().find(|s| s.features.schema != schema) {
            return Err(Error::SchemaMismatch { expected: schema, actual: bad.features.schema });
        }
        let (classes, labels) = encode_labels(train, target);
        if classes.len() < 2 {
            return Err(Error::SingleClass(classes.into_iter().next().unwrap_or_default()));
        }
        let raw: Vec<&[f64]> = train.iter().map(|s| s.features.values.as_slice()).collect();
        let scaling = ScalingParams::fit_rows(schema, &raw);
        let rows: Vec<Vec<f64>> = raw.iter().map(|r| scaling.transform(r)).collect();
        let model = Model::fit(hyper, &rows, &labels, classes.len(), seed)?;
        Ok(ModelFile {
            format_version: FORMAT_VERSION,
            learner: hyper.kind(),
            hyper: *hyper,
            target,
            schema,
            classes,
            scaling,
            model,
        })
    }

    fn check(&self, v: &FeatureVector) -> Result<()> {
        if v.schema != self.schema {
            return Err(Error::SchemaMismatch { expected: self.schema, actual: v.schema });
        }
        Ok(())
    }

    pub fn predict(&self, v: &FeatureVector) -> Result<String> {
        self.check(v)?;
        let class = self.model.predict(&self.scaling.transform(&v.values));
        Ok(self.classes[class].clone())
    }

    pub fn predict_votes(&self, v: &FeatureVector) -> Result<Prediction> {
        self.check(v)?;
        let (class, votes) = self.model.predict_votes(&self.scaling.transform(&v.values));
        Ok(Prediction { class: self.classes[class].clone(), votes })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if v.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                v.format_version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
