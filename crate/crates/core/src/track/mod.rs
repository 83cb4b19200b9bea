//! Object persistence across frames and multi-frame decision fusion.
//!
//! A [`Tracker`] owns the live tracks of one stream. Each frame the caller
//! predicts every track, associates regions by overlap, records one
//! preliminary decision per matched region and finally ages the tracks that
//! went unmatched. Tracks unmatched for more than `life_cycle` frames are
//! evicted and turned into [`DetectionRecord`]s.

mod kalman;

use serde::{Deserialize, Serialize};

pub use kalman::{Kalman, KalmanNoise};

use crate::classify::Decision;
use crate::geometry::{BBox, Point, Rect};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackError {
    #[error("track {0} has no observations")]
    NoObservations(u64),
    #[error("invalid tracking configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Frames a track may go unmatched before eviction (`N`).
    pub life_cycle: u32,
    /// Minimum confidence for a track to be reported.
    pub t_cof: f64,
    /// Minimum IoU between a prediction and a region to match them.
    pub match_min_overlap: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
    pub initial_velocity_variance: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            life_cycle: 15,
            t_cof: 0.2,
            match_min_overlap: 0.3,
            process_noise: 1.0,
            measurement_noise: 4.0,
            initial_velocity_variance: 100.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        if self.life_cycle < 1 {
            return Err(TrackError::Config("life_cycle must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.t_cof) {
            return Err(TrackError::Config(format!(
                "t_cof {} outside [0, 1]",
                self.t_cof
            )));
        }
        if !(self.match_min_overlap > 0.0 && self.match_min_overlap <= 1.0) {
            return Err(TrackError::Config(format!(
                "match_min_overlap {} outside (0, 1]",
                self.match_min_overlap
            )));
        }
        if !(self.process_noise >= 0.0
            && self.measurement_noise > 0.0
            && self.initial_velocity_variance >= 0.0)
        {
            return Err(TrackError::Config(
                "Kalman variances must be non-negative (measurement positive)".into(),
            ));
        }
        Ok(())
    }

    pub fn noise(&self) -> KalmanNoise {
        KalmanNoise {
            process: self.process_noise,
            measurement: self.measurement_noise,
            initial_velocity: self.initial_velocity_variance,
        }
    }
}

/// One observed box of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailPoint {
    pub frame: u64,
    pub bbox: Rect,
}

#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    kalman: Kalman,
    last_bbox: Rect,
    predicted: BBox,
    centers: Vec<Point>,
    trail: Vec<TrailPoint>,
    life: u32,
    m: u32,
    m_b: u32,
    matched: bool,
}

impl Track {
    /// A track born from its first observation.
    pub fn new(id: u64, frame: u64, bbox: Rect, preliminary: Decision, noise: KalmanNoise) -> Self {
        let center = bbox.center();
        let mut t = Self {
            id,
            kalman: Kalman::new(center, noise),
            last_bbox: bbox,
            predicted: bbox.to_box(),
            centers: Vec::new(),
            trail: Vec::new(),
            life: 0,
            m: 0,
            m_b: 0,
            matched: false,
        };
        t.record(frame, bbox, preliminary);
        t
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kalman(&self) -> &Kalman {
        &self.kalman
    }

    pub fn last_bbox(&self) -> Rect {
        self.last_bbox
    }

    /// Box from the latest [`predict`](Self::predict).
    pub fn predicted(&self) -> BBox {
        self.predicted
    }

    /// Observed centres, oldest first.
    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn trail(&self) -> &[TrailPoint] {
        &self.trail
    }

    /// Consecutive unmatched frames.
    pub fn life(&self) -> u32 {
        self.life
    }

    /// Frames in which the object was detected and classified.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Frames whose preliminary decision was bicycle.
    pub fn m_b(&self) -> u32 {
        self.m_b
    }

    /// Advances the filter by one frame; the box keeps the last observed
    /// size, centred on the predicted centre.
    pub fn predict(&mut self) -> BBox {
        let c = self.kalman.predict();
        self.predicted =
            BBox::centered(c, f64::from(self.last_bbox.w), f64::from(self.last_bbox.h));
        self.predicted
    }

    /// Records a matched region and its preliminary decision.
    pub fn observe(&mut self, frame: u64, bbox: Rect, preliminary: Decision) {
        self.kalman.update(bbox.center());
        self.record(frame, bbox, preliminary);
    }

    fn record(&mut self, frame: u64, bbox: Rect, preliminary: Decision) {
        self.last_bbox = bbox;
        self.centers.push(bbox.center());
        self.trail.push(TrailPoint { frame, bbox });
        self.life = 0;
        self.m += 1;
        if preliminary.is_bicycle() {
            self.m_b += 1;
        }
        self.matched = true;
    }

    /// Strict-majority vote over the preliminary decisions.
    pub fn fuse_decision(&self) -> Result<Decision, TrackError> {
        fuse_decision(self.m, self.m_b).ok_or(TrackError::NoObservations(self.id))
    }

    pub fn confidence(&self, cfg: &FusionConfig) -> f64 {
        confidence(self.m, cfg.life_cycle)
    }

    /// Final record of this track. `None` if it never saw an observation.
    pub fn to_record(&self, cfg: &FusionConfig) -> Option<DetectionRecord> {
        let decision = self.fuse_decision().ok()?;
        Some(DetectionRecord {
            track_id: self.id,
            first_frame: self.trail.first()?.frame,
            last_frame: self.trail.last()?.frame,
            m: self.m,
            m_b: self.m_b,
            decision,
            cof: self.confidence(cfg),
            trail: self.trail.clone(),
        })
    }
}

/// Bicycle iff `m_b > m / 2`; a tie is not a bicycle. `None` when `m == 0`.
pub fn fuse_decision(m: u32, m_b: u32) -> Option<Decision> {
    (m > 0).then(|| {
        if 2 * u64::from(m_b) > u64::from(m) {
            Decision::Bicycle
        } else {
            Decision::NotBicycle
        }
    })
}

/// `1` once `m >= n`, else `m / n`.
pub fn confidence(m: u32, n: u32) -> f64 {
    if m >= n {
        1.0
    } else {
        f64::from(m) / f64::from(n)
    }
}

/// Inclusive threshold test.
pub fn accept(cof: f64, t_cof: f64) -> bool {
    cof >= t_cof
}

/// Result of associating predictions with regions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    /// `(track index, region index)` pairs in the order they were chosen.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_regions: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

/// Greedy association by descending IoU. Candidates below `min_overlap`
/// never match; equal IoUs are resolved by track id, then region index.
pub fn match_regions(
    predictions: &[(u64, BBox)],
    regions: &[Rect],
    min_overlap: f64,
) -> Assignment {
    let mut candidates = Vec::new();
    for (ti, (_, pred)) in predictions.iter().enumerate() {
        for (ri, region) in regions.iter().enumerate() {
            let iou = pred.iou(&region.to_box());
            if iou >= min_overlap {
                candidates.push((iou, ti, ri));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(predictions[a.1].0.cmp(&predictions[b.1].0))
            .then(a.2.cmp(&b.2))
    });

    let mut track_used = vec![false; predictions.len()];
    let mut region_used = vec![false; regions.len()];
    let mut out = Assignment::default();
    for (_, ti, ri) in candidates {
        if !track_used[ti] && !region_used[ri] {
            track_used[ti] = true;
            region_used[ri] = true;
            out.pairs.push((ti, ri));
        }
    }
    out.unmatched_tracks = (0..predictions.len()).filter(|&i| !track_used[i]).collect();
    out.unmatched_regions = (0..regions.len()).filter(|&i| !region_used[i]).collect();
    out
}

/// Ages every track not observed since the last call, then removes and
/// returns those unmatched for more than `life_cycle` frames. Clears the
/// per-frame matched flags.
pub fn age_and_evict(tracks: &mut Vec<Track>, cfg: &FusionConfig) -> Vec<Track> {
    for t in tracks.iter_mut() {
        if !t.matched {
            t.life += 1;
        }
        t.matched = false;
    }
    let (evicted, kept) = std::mem::take(tracks)
        .into_iter()
        .partition(|t| t.life > cfg.life_cycle);
    *tracks = kept;
    evicted
}

/// Terminal record of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub track_id: u64,
    pub first_frame: u64,
    pub last_frame: u64,
    pub m: u32,
    pub m_b: u32,
    pub decision: Decision,
    pub cof: f64,
    pub trail: Vec<TrailPoint>,
}

impl DetectionRecord {
    pub fn accepted(&self, t_cof: f64) -> bool {
        accept(self.cof, t_cof)
    }

    pub fn is_accepted_bicycle(&self, t_cof: f64) -> bool {
        self.decision.is_bicycle() && self.accepted(t_cof)
    }
}

/// Track store of one stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: FusionConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: FusionConfig) -> Result<Self, TrackError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, index: usize) -> &Track {
        &self.tracks[index]
    }

    /// Predicts every live track and associates the regions with them.
    /// Indices in the result refer to [`tracks`](Self::tracks).
    pub fn predict_and_match(&mut self, regions: &[Rect]) -> Assignment {
        let predictions: Vec<(u64, BBox)> = self
            .tracks
            .iter_mut()
            .map(|t| (t.id, t.predict()))
            .collect();
        match_regions(&predictions, regions, self.cfg.match_min_overlap)
    }

    pub fn observe(&mut self, index: usize, frame: u64, bbox: Rect, preliminary: Decision) {
        self.tracks[index].observe(frame, bbox, preliminary);
    }

    /// Starts a track from an unmatched region and returns its id.
    pub fn spawn(&mut self, frame: u64, bbox: Rect, preliminary: Decision) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.tracks
            .push(Track::new(id, frame, bbox, preliminary, self.cfg.noise()));
        id
    }

    /// Ends the frame: ages unmatched tracks and returns records of the
    /// evicted ones.
    pub fn end_frame(&mut self) -> Vec<DetectionRecord> {
        age_and_evict(&mut self.tracks, &self.cfg)
            .iter()
            .filter_map(|t| t.to_record(&self.cfg))
            .collect()
    }

    /// Closes the stream, emitting records for all live tracks in id order.
    pub fn finish(self) -> Vec<DetectionRecord> {
        let mut tracks = self.tracks;
        tracks.sort_by_key(|t| t.id);
        tracks
            .iter()
            .filter_map(|t| t.to_record(&self.cfg))
            .collect()
    }
}
