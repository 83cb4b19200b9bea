//! Scoring detection records against ground truth.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classify::{Decision, TrainingSet};
use crate::features::FeatureVector;
use crate::pipeline::{DetectionRecord, Observation};
use crate::synth::{ActorClass, GroundTruth, TruthTrack};

/// Confidence thresholds of the standard sweep.
pub const SWEEP_THRESHOLDS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Minimum number of shared frames for a record to cover a truth track.
pub const MIN_SHARED_FRAMES: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("record {track_id} ends at frame {last_frame} but the scene has {length} frames")]
    SceneLength {
        track_id: u64,
        last_frame: u64,
        length: u32,
    },
    #[error("ground truth contains no bicycles; rates are undefined")]
    NoBicycles,
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Mean IoU a record needs over the shared frames to cover a truth track.
    pub overlap_min: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { overlap_min: 0.3 }
    }
}

/// Whether `record` follows `truth` for at least three common frames with
/// mean IoU at least `overlap_min`.
pub fn covers(record: &DetectionRecord, truth: &TruthTrack, overlap_min: f64) -> bool {
    let (mut i, mut j) = (0, 0);
    let (mut shared, mut iou_sum) = (0usize, 0.0);
    let (a, b) = (&record.trail, &truth.boxes);
    while i < a.len() && j < b.len() {
        let (fa, fb) = (a[i].frame, u64::from(b[j].0));
        if fa == fb {
            shared += 1;
            iou_sum += a[i].bbox.iou(&b[j].1);
            i += 1;
            j += 1;
        } else if fa < fb {
            i += 1;
        } else {
            j += 1;
        }
    }
    shared >= MIN_SHARED_FRAMES && iou_sum / shared as f64 >= overlap_min
}

/// Integer counts behind every rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tallies {
    /// Truth bicycles.
    pub bicycles: u64,
    /// Truth bicycles covered by at least one accepted bicycle record.
    pub detected: u64,
    /// Accepted bicycle records covering no truth bicycle.
    pub false_positives: u64,
    /// Accepted bicycle records covering some truth bicycle.
    pub bicycle_records: u64,
}

impl std::ops::AddAssign for Tallies {
    fn add_assign(&mut self, o: Self) {
        self.bicycles += o.bicycles;
        self.detected += o.detected;
        self.false_positives += o.false_positives;
        self.bicycle_records += o.bicycle_records;
    }
}

/// Precomputed coverage of one scene, so thresholds can be re-applied
/// without re-matching.
#[derive(Debug, Clone)]
pub struct SceneMatch {
    bicycles: usize,
    /// Per record: decision, COF and the truth bicycles it covers.
    records: Vec<(Decision, f64, Vec<usize>)>,
}

impl SceneMatch {
    pub fn new(
        records: &[DetectionRecord],
        gt: &GroundTruth,
        cfg: &EvalConfig,
    ) -> Result<Self, EvalError> {
        for r in records {
            if r.last_frame >= u64::from(gt.length) {
                return Err(EvalError::SceneLength {
                    track_id: r.track_id,
                    last_frame: r.last_frame,
                    length: gt.length,
                });
            }
        }
        let bikes: Vec<&TruthTrack> = gt
            .tracks
            .iter()
            .filter(|t| t.class == ActorClass::Bicycle)
            .collect();
        let records = records
            .iter()
            .map(|r| {
                let covered = bikes
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| covers(r, t, cfg.overlap_min))
                    .map(|(i, _)| i)
                    .collect();
                (r.decision, r.cof, covered)
            })
            .collect();
        Ok(Self {
            bicycles: bikes.len(),
            records,
        })
    }

    pub fn tallies(&self, t_cof: f64) -> Tallies {
        let mut covered = vec![false; self.bicycles];
        let mut t = Tallies {
            bicycles: self.bicycles as u64,
            ..Tallies::default()
        };
        for (decision, cof, bikes) in &self.records {
            if !decision.is_bicycle() || !crate::track::accept(*cof, t_cof) {
                continue;
            }
            if bikes.is_empty() {
                t.false_positives += 1;
            } else {
                t.bicycle_records += 1;
                for &b in bikes {
                    covered[b] = true;
                }
            }
        }
        t.detected = covered.iter().filter(|c| **c).count() as u64;
        t
    }
}

/// Tallies of one scene at one threshold.
pub fn match_to_ground_truth(
    records: &[DetectionRecord],
    gt: &GroundTruth,
    cfg: &EvalConfig,
    t_cof: f64,
) -> Result<Tallies, EvalError> {
    Ok(SceneMatch::new(records, gt, cfg)?.tallies(t_cof))
}

/// Median and 95th percentile of per-frame processing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub frames: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl TimingSummary {
    /// Nearest-rank percentiles. `None` for an empty sample.
    pub fn from_durations(times: &[Duration]) -> Option<Self> {
        if times.is_empty() {
            return None;
        }
        let mut ms: Vec<f64> = times.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let rank = |p: f64| ms[((p * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1];
        Some(Self {
            frames: ms.len(),
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub t_cof: f64,
    pub counts: Tallies,
    pub r_det: f64,
    pub r_fp: f64,
    /// Can be negative when some bicycles are never detected.
    pub r_rep: f64,
    pub missing_rate: f64,
    pub timing: Option<TimingSummary>,
}

impl MetricsReport {
    pub fn from_tallies(t_cof: f64, counts: Tallies) -> Result<Self, EvalError> {
        if counts.bicycles == 0 {
            return Err(EvalError::NoBicycles);
        }
        let n = counts.bicycles as f64;
        let r_det = counts.detected as f64 / n;
        Ok(Self {
            t_cof,
            counts,
            r_det,
            r_fp: counts.false_positives as f64 / n,
            r_rep: counts.bicycle_records as f64 / n - 1.0,
            missing_rate: 1.0 - r_det,
            timing: None,
        })
    }
}

/// Re-applies each threshold to the same matched records and aggregates
/// the counts over all scenes.
pub fn sweep_tcof(
    scenes: &[SceneMatch],
    thresholds: &[f64],
) -> Result<Vec<MetricsReport>, EvalError> {
    thresholds
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(EvalError::Threshold(t));
            }
            let mut total = Tallies::default();
            for s in scenes {
                total += s.tallies(t);
            }
            MetricsReport::from_tallies(t, total)
        })
        .collect()
}

/// Feature vector with the class of the truth actor it lies on.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub track_id: u64,
    pub frame: u64,
    pub features: FeatureVector,
    /// `None` for regions that match no actor.
    pub label: Option<ActorClass>,
}

/// Labels every observation with the truth actor of highest IoU in the same
/// frame, if that IoU reaches `overlap_min`.
pub fn label_observations(
    observations: &[Observation],
    gt: &GroundTruth,
    overlap_min: f64,
) -> Vec<LabeledFeatures> {
    observations
        .iter()
        .map(|o| {
            let bbox = o.region.bbox();
            let best = u32::try_from(o.frame)
                .ok()
                .into_iter()
                .flat_map(|f| gt.at_frame(f))
                .map(|(t, b)| (bbox.iou(&b), t.class))
                .filter(|(iou, _)| *iou >= overlap_min)
                .max_by(|a, b| a.0.total_cmp(&b.0));
            LabeledFeatures {
                track_id: o.track_id,
                frame: o.frame,
                features: o.features,
                label: best.map(|(_, c)| c),
            }
        })
        .collect()
}

/// Bicycles against everything else, unmatched regions included.
pub fn training_set(samples: &[LabeledFeatures]) -> TrainingSet {
    let mut set = TrainingSet::default();
    for s in samples {
        if s.label == Some(ActorClass::Bicycle) {
            set.positives.push(s.features);
        } else {
            set.negatives.push(s.features);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::track::TrailPoint;

    fn truth(id: u32, class: ActorClass, frames: std::ops::Range<u32>, x: u32) -> TruthTrack {
        TruthTrack {
            actor_id: id,
            class,
            boxes: frames.map(|f| (f, Rect::new(x, 10, 20, 20))).collect(),
        }
    }

    fn record(
        id: u64,
        frames: std::ops::Range<u64>,
        x: u32,
        decision: Decision,
        cof: f64,
    ) -> DetectionRecord {
        DetectionRecord {
            track_id: id,
            first_frame: frames.start,
            last_frame: frames.end - 1,
            m: (frames.end - frames.start) as u32,
            m_b: 0,
            decision,
            cof,
            trail: frames
                .map(|frame| TrailPoint {
                    frame,
                    bbox: Rect::new(x, 10, 20, 20),
                })
                .collect(),
        }
    }

    fn gt(tracks: Vec<TruthTrack>) -> GroundTruth {
        GroundTruth {
            length: 100,
            tracks,
        }
    }

    #[test]
    fn perfect_single_coverage() {
        let g = gt(vec![truth(0, ActorClass::Bicycle, 10..40, 5)]);
        let r = vec![record(1, 10..40, 5, Decision::Bicycle, 1.0)];
        let t = match_to_ground_truth(&r, &g, &EvalConfig::default(), 0.2).unwrap();
        let m = MetricsReport::from_tallies(0.2, t).unwrap();
        assert_eq!((m.r_det, m.r_fp, m.r_rep), (1.0, 0.0, 0.0));
    }

    #[test]
    fn rate_arithmetic() {
        let counts = Tallies {
            bicycles: 10,
            detected: 9,
            false_positives: 1,
            bicycle_records: 18,
        };
        let m = MetricsReport::from_tallies(0.0, counts).unwrap();
        assert_eq!(m.r_det, 0.9);
        assert_eq!(m.missing_rate, 1.0 - m.r_det);
        assert!((m.r_rep - 0.8).abs() < 1e-12);
        assert_eq!(m.r_fp, 0.1);
    }

    #[test]
    fn coverage_needs_three_frames_and_overlap() {
        let t = truth(0, ActorClass::Bicycle, 10..20, 5);
        assert!(covers(
            &record(1, 17..30, 5, Decision::Bicycle, 1.0),
            &t,
            0.3
        ));
        assert!(!covers(
            &record(1, 18..30, 5, Decision::Bicycle, 1.0),
            &t,
            0.3
        ));
        assert!(!covers(
            &record(1, 10..20, 40, Decision::Bicycle, 1.0),
            &t,
            0.3
        ));
    }

    #[test]
    fn false_positive_and_duplicates() {
        let g = gt(vec![
            truth(0, ActorClass::Bicycle, 10..40, 5),
            truth(1, ActorClass::Vehicle, 10..40, 60),
        ]);
        let r = vec![
            record(1, 10..25, 5, Decision::Bicycle, 1.0),
            record(2, 25..40, 5, Decision::Bicycle, 0.3),
            record(3, 10..40, 60, Decision::Bicycle, 1.0),
            record(4, 10..40, 60, Decision::NotBicycle, 1.0),
        ];
        let s = SceneMatch::new(&r, &g, &EvalConfig::default()).unwrap();
        assert_eq!(
            s.tallies(0.0),
            Tallies {
                bicycles: 1,
                detected: 1,
                false_positives: 1,
                bicycle_records: 2
            }
        );
        assert_eq!(s.tallies(0.5).bicycle_records, 1);
        let sweep = sweep_tcof(&[s], &SWEEP_THRESHOLDS).unwrap();
        assert_eq!(sweep.len(), 6);
        assert_eq!(sweep[0].r_rep, 1.0);
        assert!(sweep
            .windows(2)
            .all(|w| w[1].r_det <= w[0].r_det && w[1].r_rep <= w[0].r_rep));
    }

    #[test]
    fn scene_length_mismatch() {
        let g = GroundTruth {
            length: 20,
            tracks: vec![],
        };
        let r = vec![record(1, 10..25, 5, Decision::Bicycle, 1.0)];
        assert!(matches!(
            SceneMatch::new(&r, &g, &EvalConfig::default()),
            Err(EvalError::SceneLength { .. })
        ));
    }

    #[test]
    fn timing_percentiles() {
        let times: Vec<Duration> = (1..=100).map(Duration::from_millis).collect();
        let t = TimingSummary::from_durations(&times).unwrap();
        assert_eq!((t.median_ms, t.p95_ms), (50.0, 95.0));
    }
}
