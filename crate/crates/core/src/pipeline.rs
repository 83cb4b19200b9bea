//! Frame-by-frame orchestration of the detector.
//!
//! Per frame: background update and subtraction, morphological cleaning,
//! connected components, region fusion, then for every region its static
//! features, a track association, speed from the track's centre history,
//! a preliminary decision and the track update. Tracks that stay unmatched
//! past the life cycle are closed into [`DetectionRecord`]s.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::background::{GmmError, GmmParams, GmmState};
use crate::classify::{ClassifierError, Decision, Fuser};
use crate::features::{estimate_speed, extract_static, FeatureError, FeatureVector};
use crate::geometry::{Point, Rect};
use crate::mask::ForegroundMask;
use crate::segment::{
    clean_in_place, connected_components, fuse_regions, ObjectRegion, SegmentationParams,
};
use crate::track::{FusionConfig, TrackError, Tracker};
use crate::video::{Frame, VideoError};

pub use crate::track::{DetectionRecord, TrailPoint};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Background(#[from] GmmError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Video(#[from] VideoError),
}

/// Settings of every stage; mirrors the config file sections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub background: GmmParams,
    pub segmentation: SegmentationParams,
    pub tracking: FusionConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.background.validate()?;
        self.tracking.validate()?;
        let s = &self.segmentation;
        if s.min_area == 0 {
            return Err(PipelineError::Config(
                "segmentation.min_area must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One classified region of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: u64,
    pub track_id: u64,
    pub region: ObjectRegion,
    pub features: FeatureVector,
    pub preliminary: Decision,
}

/// Everything a finished run produces.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    /// Terminal records ordered by track id.
    pub records: Vec<DetectionRecord>,
    /// Processing time of every frame, warmup included.
    pub frame_times: Vec<Duration>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    fuser: Fuser,
    gmm: Option<GmmState>,
    tracker: Tracker,
    mask: ForegroundMask,
    scratch: ForegroundMask,
    centers: Vec<Point>,
    frames_seen: u64,
    records: Vec<DetectionRecord>,
    frame_times: Vec<Duration>,
}

impl Pipeline {
    /// Checks the configuration and the fuser before any frame is read.
    pub fn new(cfg: PipelineConfig, fuser: Fuser) -> Result<Self, PipelineError> {
        cfg.validate()?;
        fuser.validate()?;
        Ok(Self {
            tracker: Tracker::new(cfg.tracking.clone())?,
            cfg,
            fuser,
            gmm: None,
            mask: ForegroundMask::new(0, 0),
            scratch: ForegroundMask::new(0, 0),
            centers: Vec::new(),
            frames_seen: 0,
            records: Vec::new(),
            frame_times: Vec::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Cleaned foreground mask of the last processed frame.
    pub fn mask(&self) -> &ForegroundMask {
        &self.mask
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Processes one frame and returns the regions classified in it
    /// (none during warmup).
    pub fn process(&mut self, frame: &Frame) -> Result<Vec<Observation>, PipelineError> {
        let start = Instant::now();
        let out = self.step(frame);
        self.frame_times.push(start.elapsed());
        self.frames_seen += 1;
        out
    }

    fn step(&mut self, frame: &Frame) -> Result<Vec<Observation>, PipelineError> {
        match self.gmm.as_mut() {
            None => {
                self.gmm = Some(GmmState::init(frame, self.cfg.background.clone())?);
                self.mask = ForegroundMask::new(frame.width(), frame.height());
            }
            Some(gmm) => gmm.update_into(frame, &mut self.mask)?,
        }
        if self.frames_seen < u64::from(self.cfg.background.warmup_frames) {
            return Ok(Vec::new());
        }

        let seg = &self.cfg.segmentation;
        clean_in_place(&mut self.mask, &mut self.scratch, &seg.morphology());
        let regions = fuse_regions(&connected_components(&self.mask, seg.min_area), seg.max_gap);
        let boxes: Vec<Rect> = regions.iter().map(ObjectRegion::bbox).collect();

        let assignment = self.tracker.predict_and_match(&boxes);
        let mut track_of = vec![None; regions.len()];
        for &(ti, ri) in &assignment.pairs {
            track_of[ri] = Some(ti);
        }

        let index = frame.index();
        let mut observations = Vec::with_capacity(regions.len());
        for (ri, region) in regions.into_iter().enumerate() {
            let mut features = extract_static(&region)?;
            let bbox = region.bbox();
            let (track_id, preliminary) = match track_of[ri] {
                Some(ti) => {
                    let track = self.tracker.track(ti);
                    self.centers.clear();
                    self.centers.extend_from_slice(track.centers());
                    self.centers.push(bbox.center());
                    features.speed = Some(estimate_speed(&self.centers)?);
                    let id = track.id();
                    let preliminary = self.fuser.decide(&features)?;
                    self.tracker.observe(ti, index, bbox, preliminary);
                    (id, preliminary)
                }
                None => {
                    let preliminary = self.fuser.decide(&features)?;
                    (self.tracker.spawn(index, bbox, preliminary), preliminary)
                }
            };
            observations.push(Observation {
                frame: index,
                track_id,
                region,
                features,
                preliminary,
            });
        }
        self.records.extend(self.tracker.end_frame());
        Ok(observations)
    }

    /// Closes all live tracks.
    pub fn finish(self) -> PipelineOutput {
        let mut records = self.records;
        records.extend(self.tracker.finish());
        records.sort_by_key(|r| r.track_id);
        PipelineOutput {
            records,
            frame_times: self.frame_times,
        }
    }
}

/// Runs a whole stream.
pub fn run_pipeline<I, E>(
    frames: I,
    fuser: Fuser,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError>
where
    I: IntoIterator<Item = Result<Frame, E>>,
    PipelineError: From<E>,
{
    let mut p = Pipeline::new(cfg.clone(), fuser)?;
    for frame in frames {
        p.process(&frame?)?;
    }
    Ok(p.finish())
}

/// Every classified region of a stream, with the [`Fuser::Null`] fuser.
/// Labelled against ground truth, these become training features.
pub fn collect_observations<I, E>(
    frames: I,
    cfg: &PipelineConfig,
) -> Result<Vec<Observation>, PipelineError>
where
    I: IntoIterator<Item = Result<Frame, E>>,
    PipelineError: From<E>,
{
    let mut p = Pipeline::new(cfg.clone(), Fuser::Null)?;
    let mut out = Vec::new();
    for frame in frames {
        out.extend(p.process(&frame?)?);
    }
    Ok(out)
}

/// [`run_pipeline`] over frames already in memory.
pub fn run_frames(
    frames: &[Frame],
    fuser: Fuser,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let mut p = Pipeline::new(cfg.clone(), fuser)?;
    for frame in frames {
        p.process(frame)?;
    }
    Ok(p.finish())
}

impl From<std::convert::Infallible> for PipelineError {
    fn from(e: std::convert::Infallible) -> Self {
        match e {}
    }
}
