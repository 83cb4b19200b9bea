//! Inputs shared by the benchmarks: one busy standard scene and fusers
//! trained on its own regions.

use bikedet_core::classify::DEFAULT_STAGE_ORDER;
use bikedet_core::eval::{label_observations, training_set, EvalConfig};
use bikedet_core::pipeline::collect_observations;
use bikedet_core::synth::{full_standard_suite, Scene};
use bikedet_core::{
    calibrate_cascade, Frame, Fuser, GroundTruth, PipelineConfig, SvmFuser, SvmParams,
};

pub const SCENE: &str = "rainy-03";

pub fn scene() -> (Vec<Frame>, GroundTruth) {
    let cfg = full_standard_suite()
        .into_iter()
        .find(|c| c.name == SCENE)
        .expect("benchmark scene in the standard suite");
    let scene = Scene::new(cfg).expect("valid suite scene");
    (scene.frames().collect(), scene.ground_truth())
}

/// Cascade and SVM fitted to the scene's own labelled regions.
pub fn fusers(frames: &[Frame], gt: &GroundTruth) -> Vec<(&'static str, Fuser)> {
    let cfg = PipelineConfig::default();
    let obs = collect_observations(
        frames
            .iter()
            .cloned()
            .map(Ok::<_, std::convert::Infallible>),
        &cfg,
    )
    .expect("pipeline runs");
    let set = training_set(&label_observations(
        &obs,
        gt,
        EvalConfig::default().overlap_min,
    ));
    let cascade = calibrate_cascade(&set, 0.99, &DEFAULT_STAGE_ORDER).expect("cascade calibrates");
    let svm = SvmFuser::train(&set, &SvmParams::default()).expect("svm trains");
    vec![
        ("cascade", Fuser::Cascade(cascade)),
        ("svm", Fuser::Svm(svm)),
    ]
}
