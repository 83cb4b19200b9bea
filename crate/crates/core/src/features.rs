//! Sparse geometric features of one object region, plus averaged speed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::segment::ObjectRegion;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("region has zero area")]
    DegenerateRegion,
    #[error("speed needs at least two centres, got {0}")]
    InsufficientHistory(usize),
    #[error("feature {0} is not set")]
    MissingFeature(FeatureName),
    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    FgCount,
    Width,
    Height,
    AspectRatio,
    #[serde(rename = "r_f")]
    DutyCycle,
    #[serde(rename = "r_f_upper")]
    DutyUpper,
    #[serde(rename = "r_f_lower")]
    DutyLower,
    Speed,
}

impl FeatureName {
    pub const ALL: [FeatureName; 8] = [
        FeatureName::FgCount,
        FeatureName::Width,
        FeatureName::Height,
        FeatureName::AspectRatio,
        FeatureName::DutyCycle,
        FeatureName::DutyUpper,
        FeatureName::DutyLower,
        FeatureName::Speed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureName::FgCount => "fg_count",
            FeatureName::Width => "width",
            FeatureName::Height => "height",
            FeatureName::AspectRatio => "aspect_ratio",
            FeatureName::DutyCycle => "r_f",
            FeatureName::DutyUpper => "r_f_upper",
            FeatureName::DutyLower => "r_f_lower",
            FeatureName::Speed => "speed",
        }
    }

    /// Box-shape features, cheap enough to sit at the front of a cascade.
    pub fn is_shape(self) -> bool {
        matches!(
            self,
            FeatureName::Width | FeatureName::Height | FeatureName::AspectRatio
        )
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureName {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| FeatureError::UnknownFeature(s.to_string()))
    }
}

/// Features of one object in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fg_count: u32,
    pub width: u32,
    pub height: u32,
    pub aspect_ratio: f64,
    /// Foreground duty cycle of the whole box.
    pub duty: f64,
    pub duty_upper: f64,
    pub duty_lower: f64,
    /// Mean centre displacement per observation; unset on a first sighting.
    pub speed: Option<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: FeatureName) -> Option<f64> {
        Some(match name {
            FeatureName::FgCount => f64::from(self.fg_count),
            FeatureName::Width => f64::from(self.width),
            FeatureName::Height => f64::from(self.height),
            FeatureName::AspectRatio => self.aspect_ratio,
            FeatureName::DutyCycle => self.duty,
            FeatureName::DutyUpper => self.duty_upper,
            FeatureName::DutyLower => self.duty_lower,
            FeatureName::Speed => return self.speed,
        })
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = Some(speed);
        self
    }
}

/// Box-shape and duty-cycle features of a region; speed left unset.
pub fn extract_static(region: &ObjectRegion) -> Result<FeatureVector, FeatureError> {
    let bbox = region.bbox();
    if bbox.w == 0 || bbox.h == 0 {
        return Err(FeatureError::DegenerateRegion);
    }
    let ratio = |count: u32, rows: u32| {
        let area = u64::from(rows) * u64::from(bbox.w);
        if area == 0 {
            0.0
        } else {
            f64::from(count) / area as f64
        }
    };
    Ok(FeatureVector {
        fg_count: region.fg_count(),
        width: bbox.w,
        height: bbox.h,
        aspect_ratio: f64::from(bbox.w) / f64::from(bbox.h),
        duty: ratio(region.fg_count(), bbox.h),
        duty_upper: ratio(region.fg_count_upper(), region.upper_rows()),
        duty_lower: ratio(region.fg_count_lower(), region.lower_rows()),
        speed: None,
    })
}

/// Mean Euclidean displacement between consecutive centres.
pub fn estimate_speed(centers: &[Point]) -> Result<f64, FeatureError> {
    if centers.len() < 2 {
        return Err(FeatureError::InsufficientHistory(centers.len()));
    }
    let total: f64 = centers.windows(2).map(|p| p[0].distance(p[1])).sum();
    Ok(total / (centers.len() - 1) as f64)
}

/// Ordered list of features making up a numeric vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureLayout(Vec<FeatureName>);

impl FeatureLayout {
    pub fn new(names: Vec<FeatureName>) -> Self {
        Self(names)
    }

    /// All eight features in canonical order.
    pub fn full() -> Self {
        Self(FeatureName::ALL.to_vec())
    }

    /// The full layout without speed, for first sightings.
    pub fn speed_free() -> Self {
        Self(FeatureName::ALL[..7].to_vec())
    }

    pub fn names(&self) -> &[FeatureName] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, name: FeatureName) -> bool {
        self.0.contains(&name)
    }

    pub fn to_vector(&self, fv: &FeatureVector) -> Result<Vec<f64>, FeatureError> {
        let mut out = Vec::with_capacity(self.0.len());
        self.write_vector(fv, &mut out)?;
        Ok(out)
    }

    /// Like [`to_vector`](Self::to_vector) into a reused buffer.
    pub fn write_vector(&self, fv: &FeatureVector, out: &mut Vec<f64>) -> Result<(), FeatureError> {
        out.clear();
        for &name in &self.0 {
            out.push(fv.get(name).ok_or(FeatureError::MissingFeature(name))?);
        }
        Ok(())
    }
}

impl fmt::Display for FeatureLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(n.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for FeatureLayout {
    type Err = FeatureError;

    /// Comma-separated feature names; the empty string is the empty layout.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split(',')
            .map(|n| n.trim().parse())
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

/// Convenience: `to_vector` as a free function.
pub fn to_vector(fv: &FeatureVector, layout: &FeatureLayout) -> Result<Vec<f64>, FeatureError> {
    layout.to_vector(fv)
}
