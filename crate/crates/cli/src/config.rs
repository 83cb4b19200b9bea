//! The TOML config file. Every command-line flag has a counterpart here;
//! a flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use bikedet_core::classify::DEFAULT_STAGE_ORDER;
use bikedet_core::eval::SWEEP_THRESHOLDS;
use bikedet_core::{
    EvalConfig, FeatureName, FusionConfig, GmmParams, PipelineConfig, SegmentationParams, SvmParams,
};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub background: GmmParams,
    pub segmentation: SegmentationParams,
    pub tracking: FusionConfig,
    pub classifier: ClassifierSection,
    pub eval: EvalSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    /// `svm` or `cascade`, for `train`.
    pub method: Option<String>,
    /// Model file for `detect` and `bench`.
    pub model: Option<PathBuf>,
    /// Feature CSVs for `train`.
    pub corpus: Vec<PathBuf>,
    pub regularization: f64,
    pub budget: usize,
    pub tolerance: f64,
    pub per_stage_tpr: f64,
    pub stage_order: Vec<FeatureName>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let svm = SvmParams::default();
        Self {
            method: None,
            model: None,
            corpus: Vec::new(),
            regularization: svm.regularization,
            budget: svm.budget,
            tolerance: svm.tolerance,
            per_stage_tpr: 0.99,
            stage_order: DEFAULT_STAGE_ORDER.to_vec(),
        }
    }
}

impl ClassifierSection {
    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            regularization: self.regularization,
            budget: self.budget,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub overlap_min: f64,
    pub records: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub sweep: bool,
    pub thresholds: Vec<f64>,
    /// Scene length in frames when the truth directory holds no frames.
    pub length: Option<u32>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            overlap_min: EvalConfig::default().overlap_min,
            records: None,
            truth: None,
            sweep: false,
            thresholds: SWEEP_THRESHOLDS.to_vec(),
            length: None,
        }
    }
}

impl EvalSection {
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            overlap_min: self.overlap_min,
        }
    }
}

/// Paths and selections shared by several subcommands.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub masks: bool,
    pub profile: Option<String>,
    pub scene: Option<String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            background: self.background.clone(),
            segmentation: self.segmentation.clone(),
            tracking: self.tracking.clone(),
        }
    }
}
