//! Bicycle detection for low-resolution traffic video.
//!
//! The crate is organised along the processing chain:
//!
//! - [`video`]: PGM sequences and Y4M streams in, greyscale [`Frame`]s out.
//! - [`background`]: per-pixel Gaussian mixture background model.
//! - [`segment`]: morphological cleaning, connected components and fusion
//!   of nearby blobs into [`ObjectRegion`]s.
//! - [`features`]: size, aspect ratio, foreground duty cycles and speed.
//! - [`classify`]: single-frame decisions by a linear SVM or an interval
//!   cascade.
//! - [`track`]: Kalman tracks, overlap matching and multi-frame fusion.
//! - [`pipeline`]: all of the above per frame.
//! - [`eval`] and [`formats`]: scoring against ground truth and CSV I/O.
//! - [`synth`]: deterministic synthetic scenes with exact ground truth.

pub mod background;
pub mod classify;
pub mod eval;
pub mod features;
pub mod formats;
pub mod geometry;
pub mod mask;
pub mod pipeline;
pub mod segment;
pub mod synth;
pub mod track;
pub mod video;

pub use background::{GmmParams, GmmState};
pub use classify::{
    calibrate_cascade, cascade_decide, svm_decide, svm_score, train_svm, Cascade, CascadeStage,
    ClassifierError, Decision, Fuser, SvmFuser, SvmModel, SvmParams, TrainingSet,
};
pub use eval::{sweep_tcof, EvalConfig, MetricsReport, SceneMatch, Tallies, TimingSummary};
pub use features::{estimate_speed, extract_static, FeatureLayout, FeatureName, FeatureVector};
pub use geometry::{BBox, Point, Rect};
pub use mask::ForegroundMask;
pub use pipeline::{
    run_frames, run_pipeline, DetectionRecord, Pipeline, PipelineConfig, PipelineError,
    PipelineOutput,
};
pub use segment::{
    connected_components, fuse_regions, morphological_clean, ObjectRegion, SegmentationParams,
};
pub use synth::{generate_scene, ActorClass, GroundTruth, Profile, Scene, SceneConfig};
pub use track::{accept, confidence, fuse_decision, FusionConfig, Tracker};
pub use video::{Frame, FrameRate, VideoError};
