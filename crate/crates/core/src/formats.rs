//! CSV files exchanged between the subcommands.
//!
//! | file         | columns                                                    |
//! |--------------|------------------------------------------------------------|
//! | truth        | `frame,actor_id,class,x,y,w,h`                             |
//! | records      | `track_id,first_frame,last_frame,M,M_b,decision,COF`       |
//! | trails       | `track_id,frame,x,y,w,h`                                   |
//! | features     | `track_id,frame,<feature names>,label` (empty speed = unset)|
//! | sweep        | `T_COF,R_det,R_fp,R_rep,missing_rate,<counts>`             |

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::classify::Decision;
use crate::eval::{LabeledFeatures, MetricsReport};
use crate::features::{FeatureName, FeatureVector};
use crate::geometry::Rect;
use crate::pipeline::{DetectionRecord, TrailPoint};
use crate::synth::{ActorClass, GroundTruth, TruthTrack};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
}

pub const TRUTH_HEADER: [&str; 7] = ["frame", "actor_id", "class", "x", "y", "w", "h"];
pub const RECORDS_HEADER: [&str; 7] = [
    "track_id",
    "first_frame",
    "last_frame",
    "M",
    "M_b",
    "decision",
    "COF",
];
pub const TRAILS_HEADER: [&str; 6] = ["track_id", "frame", "x", "y", "w", "h"];

fn row_err(rec: &csv::StringRecord, reason: impl Into<String>) -> FormatError {
    FormatError::Row {
        row: rec.position().map_or(0, |p| p.line()),
        reason: reason.into(),
    }
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, FormatError> {
    let raw = rec
        .get(i)
        .ok_or_else(|| row_err(rec, format!("missing column {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| row_err(rec, format!("bad {name} value {raw:?}")))
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), FormatError> {
    let found = reader.headers()?.clone();
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(FormatError::Row {
            row: 1,
            reason: format!(
                "expected header {}, found {}",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

fn rect_fields(r: Rect) -> [String; 4] {
    [
        r.x.to_string(),
        r.y.to_string(),
        r.w.to_string(),
        r.h.to_string(),
    ]
}

/// One row per visible actor per frame, ordered by frame then actor.
pub fn write_truth(out: impl Write, gt: &GroundTruth) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRUTH_HEADER)?;
    let mut rows: Vec<(u32, u32, ActorClass, Rect)> = gt
        .tracks
        .iter()
        .flat_map(|t| {
            t.boxes
                .iter()
                .map(move |(f, b)| (*f, t.actor_id, t.class, *b))
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    for (frame, id, class, b) in rows {
        let [x, y, bw, bh] = rect_fields(b);
        w.write_record([
            frame.to_string(),
            id.to_string(),
            class.to_string(),
            x,
            y,
            bw,
            bh,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a truth CSV. `length` is the number of frames in the scene.
pub fn read_truth(input: impl Read, length: u32) -> Result<GroundTruth, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &TRUTH_HEADER)?;
    let mut tracks: BTreeMap<u32, TruthTrack> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let frame: u32 = field(&rec, 0, "frame")?;
        let id: u32 = field(&rec, 1, "actor_id")?;
        let class: ActorClass = field(&rec, 2, "class")?;
        let b = Rect::new(
            field(&rec, 3, "x")?,
            field(&rec, 4, "y")?,
            field(&rec, 5, "w")?,
            field(&rec, 6, "h")?,
        );
        let t = tracks.entry(id).or_insert_with(|| TruthTrack {
            actor_id: id,
            class,
            boxes: Vec::new(),
        });
        if t.class != class {
            return Err(row_err(&rec, format!("actor {id} changes class")));
        }
        t.boxes.push((frame, b));
    }
    let mut tracks: Vec<TruthTrack> = tracks.into_values().collect();
    for t in &mut tracks {
        t.boxes.sort_by_key(|(f, _)| *f);
        t.boxes.dedup_by_key(|(f, _)| *f);
    }
    Ok(GroundTruth { length, tracks })
}

pub fn write_records(out: impl Write, records: &[DetectionRecord]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.track_id.to_string(),
            r.first_frame.to_string(),
            r.last_frame.to_string(),
            r.m.to_string(),
            r.m_b.to_string(),
            r.decision.to_string(),
            r.cof.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trails(out: impl Write, records: &[DetectionRecord]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAILS_HEADER)?;
    for r in records {
        for p in &r.trail {
            let [x, y, bw, bh] = rect_fields(p.bbox);
            w.write_record([r.track_id.to_string(), p.frame.to_string(), x, y, bw, bh])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads records and attaches their trails. Trails of unknown tracks are
/// an error; records without trail rows keep an empty trail.
pub fn read_records(
    records: impl Read,
    trails: impl Read,
) -> Result<Vec<DetectionRecord>, FormatError> {
    let mut r = csv::Reader::from_reader(records);
    check_header(&mut r, &RECORDS_HEADER)?;
    let mut out: Vec<DetectionRecord> = Vec::new();
    let mut index = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let record = DetectionRecord {
            track_id: field(&rec, 0, "track_id")?,
            first_frame: field(&rec, 1, "first_frame")?,
            last_frame: field(&rec, 2, "last_frame")?,
            m: field(&rec, 3, "M")?,
            m_b: field(&rec, 4, "M_b")?,
            decision: field::<Decision>(&rec, 5, "decision")?,
            cof: field(&rec, 6, "COF")?,
            trail: Vec::new(),
        };
        if record.m_b > record.m || !(0.0..=1.0).contains(&record.cof) {
            return Err(row_err(&rec, "inconsistent M/M_b/COF"));
        }
        if index.insert(record.track_id, out.len()).is_some() {
            return Err(row_err(
                &rec,
                format!("duplicate track id {}", record.track_id),
            ));
        }
        out.push(record);
    }
    let mut t = csv::Reader::from_reader(trails);
    check_header(&mut t, &TRAILS_HEADER)?;
    for rec in t.records() {
        let rec = rec?;
        let id: u64 = field(&rec, 0, "track_id")?;
        let &i = index
            .get(&id)
            .ok_or_else(|| row_err(&rec, format!("trail for unknown track {id}")))?;
        out[i].trail.push(TrailPoint {
            frame: field(&rec, 1, "frame")?,
            bbox: Rect::new(
                field(&rec, 2, "x")?,
                field(&rec, 3, "y")?,
                field(&rec, 4, "w")?,
                field(&rec, 5, "h")?,
            ),
        });
    }
    for r in &mut out {
        r.trail.sort_by_key(|p| p.frame);
    }
    Ok(out)
}

fn features_header() -> Vec<&'static str> {
    let mut h = vec!["track_id", "frame"];
    h.extend(FeatureName::ALL.iter().map(|n| n.as_str()));
    h.push("label");
    h
}

fn label_str(label: Option<ActorClass>) -> &'static str {
    label.map_or("none", ActorClass::as_str)
}

pub fn write_features(out: impl Write, samples: &[LabeledFeatures]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(features_header())?;
    for s in samples {
        let mut row = vec![s.track_id.to_string(), s.frame.to_string()];
        for name in FeatureName::ALL {
            row.push(
                s.features
                    .get(name)
                    .map_or_else(String::new, |v| v.to_string()),
            );
        }
        row.push(label_str(s.label).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(input: impl Read) -> Result<Vec<LabeledFeatures>, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &features_header())?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let speed_raw = rec.get(9).unwrap_or("").trim();
        let label_raw = rec.get(10).unwrap_or("").trim();
        let label = match label_raw {
            "none" => None,
            other => Some(other.parse().map_err(|e: String| row_err(&rec, e))?),
        };
        out.push(LabeledFeatures {
            track_id: field(&rec, 0, "track_id")?,
            frame: field(&rec, 1, "frame")?,
            features: FeatureVector {
                fg_count: field(&rec, 2, "fg_count")?,
                width: field(&rec, 3, "width")?,
                height: field(&rec, 4, "height")?,
                aspect_ratio: field(&rec, 5, "aspect_ratio")?,
                duty: field(&rec, 6, "r_f")?,
                duty_upper: field(&rec, 7, "r_f_upper")?,
                duty_lower: field(&rec, 8, "r_f_lower")?,
                speed: if speed_raw.is_empty() {
                    None
                } else {
                    Some(field(&rec, 9, "speed")?)
                },
            },
            label,
        });
    }
    Ok(out)
}

pub fn write_sweep(out: impl Write, reports: &[MetricsReport]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "T_COF",
        "R_det",
        "R_fp",
        "R_rep",
        "missing_rate",
        "bicycles",
        "detected",
        "false_positives",
        "bicycle_records",
    ])?;
    for m in reports {
        let c = &m.counts;
        w.write_record([
            m.t_cof.to_string(),
            m.r_det.to_string(),
            m.r_fp.to_string(),
            m.r_rep.to_string(),
            m.missing_rate.to_string(),
            c.bicycles.to_string(),
            c.detected.to_string(),
            c.false_positives.to_string(),
            c.bicycle_records.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<DetectionRecord> {
        vec![
            DetectionRecord {
                track_id: 3,
                first_frame: 60,
                last_frame: 62,
                m: 3,
                m_b: 2,
                decision: Decision::Bicycle,
                cof: 0.2,
                trail: (60..63)
                    .map(|f| TrailPoint {
                        frame: f,
                        bbox: Rect::new(f as u32, 4, 20, 30),
                    })
                    .collect(),
            },
            DetectionRecord {
                track_id: 7,
                first_frame: 61,
                last_frame: 61,
                m: 1,
                m_b: 0,
                decision: Decision::NotBicycle,
                cof: 1.0 / 15.0,
                trail: vec![TrailPoint {
                    frame: 61,
                    bbox: Rect::new(1, 2, 3, 4),
                }],
            },
        ]
    }

    #[test]
    fn records_round_trip() {
        let recs = sample_records();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_records(&mut a, &recs).unwrap();
        write_trails(&mut b, &recs).unwrap();
        assert!(String::from_utf8(a.clone()).unwrap().starts_with(
            "track_id,first_frame,last_frame,M,M_b,decision,COF\n3,60,62,3,2,bicycle,0.2\n"
        ));
        assert_eq!(read_records(&a[..], &b[..]).unwrap(), recs);
    }

    #[test]
    fn truth_round_trip() {
        let gt = GroundTruth {
            length: 10,
            tracks: vec![
                TruthTrack {
                    actor_id: 0,
                    class: ActorClass::Bicycle,
                    boxes: vec![(1, Rect::new(0, 0, 5, 5)), (2, Rect::new(1, 0, 5, 5))],
                },
                TruthTrack {
                    actor_id: 1,
                    class: ActorClass::Vehicle,
                    boxes: vec![(2, Rect::new(9, 9, 9, 9))],
                },
            ],
        };
        let mut buf = Vec::new();
        write_truth(&mut buf, &gt).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("frame,actor_id,class,x,y,w,h\n1,0,bicycle,0,0,5,5\n"));
        assert_eq!(read_truth(&buf[..], 10).unwrap(), gt);
    }

    #[test]
    fn features_round_trip() {
        let fv = FeatureVector {
            fg_count: 120,
            width: 20,
            height: 30,
            aspect_ratio: 2.0 / 3.0,
            duty: 0.2,
            duty_upper: 0.1,
            duty_lower: 0.3,
            speed: None,
        };
        let samples = vec![
            LabeledFeatures {
                track_id: 1,
                frame: 9,
                features: fv,
                label: Some(ActorClass::Bicycle),
            },
            LabeledFeatures {
                track_id: 1,
                frame: 10,
                features: fv.with_speed(2.5),
                label: None,
            },
        ];
        let mut buf = Vec::new();
        write_features(&mut buf, &samples).unwrap();
        assert_eq!(read_features(&buf[..]).unwrap(), samples);
    }

    #[test]
    fn bad_rows_are_reported() {
        let text = "frame,actor_id,class,x,y,w,h\n1,0,unicycle,0,0,5,5\n";
        assert!(matches!(
            read_truth(text.as_bytes(), 5),
            Err(FormatError::Row { .. })
        ));
        let text = "frame,actor,class,x,y,w,h\n";
        assert!(read_truth(text.as_bytes(), 5).is_err());
    }
}
