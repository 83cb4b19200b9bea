//! Mask clean-up, connected components and blob fusion.

mod components;
mod fuse;
mod morphology;

use serde::{Deserialize, Serialize};

pub use components::{connected_components, label_components};
pub use fuse::fuse_regions;
pub use morphology::{
    clean_in_place, dilate, erode, morphological_clean, Element, MorphologyParams,
};

use crate::geometry::Rect;

/// A segmented object: its bounding box plus foreground pixel statistics.
///
/// Per-row foreground counts are kept so the upper/lower split can be
/// recomputed when regions are merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectRegion {
    bbox: Rect,
    row_counts: Vec<u32>,
    fg_count: u32,
}

impl ObjectRegion {
    /// `row_counts[i]` is the number of foreground pixels in row `bbox.y + i`.
    ///
    /// # Panics
    /// If `row_counts.len() != bbox.h` or a row count exceeds `bbox.w`.
    pub fn from_row_counts(bbox: Rect, row_counts: Vec<u32>) -> Self {
        assert_eq!(row_counts.len(), bbox.h as usize, "one count per bbox row");
        assert!(
            row_counts.iter().all(|&c| c <= bbox.w),
            "row count exceeds width"
        );
        let fg_count = row_counts.iter().sum();
        Self {
            bbox,
            row_counts,
            fg_count,
        }
    }

    /// A fully foreground rectangle.
    pub fn solid(bbox: Rect) -> Self {
        Self::from_row_counts(bbox, vec![bbox.w; bbox.h as usize])
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn fg_count(&self) -> u32 {
        self.fg_count
    }

    pub fn row_counts(&self) -> &[u32] {
        &self.row_counts
    }

    /// Rows in the upper half; odd heights give the extra row to the top.
    pub fn upper_rows(&self) -> u32 {
        self.bbox.h.div_ceil(2)
    }

    pub fn lower_rows(&self) -> u32 {
        self.bbox.h / 2
    }

    pub fn fg_count_upper(&self) -> u32 {
        self.row_counts[..self.upper_rows() as usize].iter().sum()
    }

    pub fn fg_count_lower(&self) -> u32 {
        self.row_counts[self.upper_rows() as usize..].iter().sum()
    }

    /// Merges another region into this one: union bbox, summed row counts.
    pub(crate) fn absorb(&mut self, other: &ObjectRegion) {
        let bbox = self.bbox.union(&other.bbox);
        let mut rows = vec![0u32; bbox.h as usize];
        for src in [&*self, other] {
            let off = (src.bbox.y - bbox.y) as usize;
            for (dst, &c) in rows[off..].iter_mut().zip(&src.row_counts) {
                *dst += c;
            }
        }
        // Hand-built regions may overlap; a row never holds more than its width.
        for c in &mut rows {
            *c = (*c).min(bbox.w);
        }
        *self = ObjectRegion::from_row_counts(bbox, rows);
    }
}

/// `[segmentation]` section of the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    pub open_element: Element,
    pub open_iterations: u32,
    pub close_element: Element,
    pub close_iterations: u32,
    /// Components smaller than this are dropped.
    pub min_area: u32,
    /// Regions at most this many pixels apart are fused.
    pub max_gap: u32,
}

impl SegmentationParams {
    pub fn morphology(&self) -> MorphologyParams {
        MorphologyParams {
            open_element: self.open_element,
            open_iterations: self.open_iterations,
            close_element: self.close_element,
            close_iterations: self.close_iterations,
        }
    }
}

impl Default for SegmentationParams {
    fn default() -> Self {
        let m = MorphologyParams::default();
        Self {
            open_element: m.open_element,
            open_iterations: m.open_iterations,
            close_element: m.close_element,
            close_iterations: m.close_iterations,
            min_area: 50,
            max_gap: 5,
        }
    }
}
