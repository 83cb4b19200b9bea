//! Single-frame fusion of features into a preliminary bicycle decision.
//!
//! Two fusers are available: a linear SVM over standardised features and a
//! cascade of single-feature interval tests. Both are immutable once trained
//! and persist as versioned plain-text model files.

mod cascade;
mod model_file;
mod svm;

use serde::{Deserialize, Serialize};

pub use cascade::{calibrate_cascade, cascade_decide, Cascade, CascadeStage, DEFAULT_STAGE_ORDER};
pub use model_file::ModelFileError;
pub use svm::{svm_decide, svm_score, train_svm, Standardization, SvmFuser, SvmModel, SvmParams};

use crate::features::{FeatureError, FeatureVector};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("training set has no {0} samples")]
    EmptyClass(&'static str),
    #[error("feature layout mismatch: {0}")]
    Layout(#[from] FeatureError),
    #[error("cascade calibration failed: {0}")]
    Calibration(String),
    #[error("invalid classifier configuration: {0}")]
    Config(String),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
}

/// Preliminary (single-frame) or fused (multi-frame) decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Bicycle,
    NotBicycle,
}

impl Decision {
    pub fn is_bicycle(self) -> bool {
        self == Decision::Bicycle
    }

    pub fn flipped(self) -> Self {
        match self {
            Decision::Bicycle => Decision::NotBicycle,
            Decision::NotBicycle => Decision::Bicycle,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Bicycle => "bicycle",
            Decision::NotBicycle => "not_bicycle",
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bicycle" => Ok(Decision::Bicycle),
            "not_bicycle" => Ok(Decision::NotBicycle),
            other => Err(format!("unknown decision {other:?}")),
        }
    }
}

/// Labelled feature vectors: bicycles and everything else.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub positives: Vec<FeatureVector>,
    pub negatives: Vec<FeatureVector>,
}

impl TrainingSet {
    pub fn new(positives: Vec<FeatureVector>, negatives: Vec<FeatureVector>) -> Self {
        Self {
            positives,
            negatives,
        }
    }

    pub(crate) fn check_nonempty(&self) -> Result<(), ClassifierError> {
        if self.positives.is_empty() {
            return Err(ClassifierError::EmptyClass("positive"));
        }
        if self.negatives.is_empty() {
            return Err(ClassifierError::EmptyClass("negative"));
        }
        Ok(())
    }

    /// Keeps at most `ratio` negatives per positive, picked at evenly spaced
    /// indices so the result does not depend on any random state.
    pub fn balanced(mut self, ratio: f64) -> Self {
        let cap = (self.positives.len() as f64 * ratio).round() as usize;
        let n = self.negatives.len();
        if cap > 0 && n > cap {
            self.negatives = (0..cap).map(|i| self.negatives[i * n / cap]).collect();
        }
        self
    }
}

/// Which single-frame fuser a pipeline runs.
// One fuser lives per pipeline, so the unboxed SVM variant costs nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Fuser {
    Svm(SvmFuser),
    Cascade(Cascade),
    /// Labels everything not-bicycle; used when only features are wanted.
    Null,
}

impl Fuser {
    pub fn decide(&self, fv: &FeatureVector) -> Result<Decision, ClassifierError> {
        match self {
            Fuser::Svm(svm) => svm.decide(fv),
            Fuser::Cascade(c) => Ok(cascade_decide(c, fv).0),
            Fuser::Null => Ok(Decision::NotBicycle),
        }
    }

    /// Checks the fuser can score any vector the pipeline will produce.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        match self {
            Fuser::Svm(svm) => svm.validate(),
            Fuser::Cascade(c) => c.validate(),
            Fuser::Null => Ok(()),
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            Fuser::Svm(_) => "svm",
            Fuser::Cascade(_) => "cascade",
            Fuser::Null => "null",
        }
    }

    /// Loads either model kind, dispatching on the file's format line.
    pub fn parse_model(text: &str) -> Result<Self, ClassifierError> {
        match model_file::format_of(text)? {
            model_file::SVM_FORMAT => Ok(Fuser::Svm(SvmFuser::from_model_text(text)?)),
            model_file::CASCADE_FORMAT => Ok(Fuser::Cascade(Cascade::from_model_text(text)?)),
            other => Err(ModelFileError::Format(format!("unknown model format {other:?}")).into()),
        }
    }

    pub fn to_model_text(&self) -> Option<String> {
        match self {
            Fuser::Svm(s) => Some(s.to_model_text()),
            Fuser::Cascade(c) => Some(c.to_model_text()),
            Fuser::Null => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balancing_is_deterministic_and_capped() {
        let fv = |v: u32| FeatureVector {
            fg_count: v,
            width: 1,
            height: 1,
            aspect_ratio: 1.0,
            duty: 1.0,
            duty_upper: 1.0,
            duty_lower: 1.0,
            speed: None,
        };
        let set = TrainingSet::new((0..5).map(fv).collect(), (0..100).map(fv).collect());
        let a = set.clone().balanced(2.0);
        let b = set.balanced(2.0);
        assert_eq!(a.negatives.len(), 10);
        assert_eq!(a.negatives, b.negatives);
        assert_eq!(a.negatives[1].fg_count, 10);
    }
}
