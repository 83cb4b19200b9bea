//! Boxes and points shared by segmentation, tracking and evaluation.

use serde::{Deserialize, Serialize};

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Integer pixel rectangle, top-left origin. Covers columns `x..x + w` and
/// rows `y..y + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn center(&self) -> Point {
        Point::new(
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        )
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, other: &Rect) -> Rect {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        Rect::new(
            x,
            y,
            self.right().max(other.right()) - x,
            self.bottom().max(other.bottom()) - y,
        )
    }

    /// Chebyshev-style gap between two rectangles: the larger of the
    /// horizontal and vertical pixel gaps, zero when they touch or overlap.
    pub fn gap(&self, other: &Rect) -> u32 {
        let gap_x = other
            .x
            .saturating_sub(self.right())
            .max(self.x.saturating_sub(other.right()));
        let gap_y = other
            .y
            .saturating_sub(self.bottom())
            .max(self.y.saturating_sub(other.bottom()));
        gap_x.max(gap_y)
    }

    pub fn to_box(&self) -> BBox {
        BBox::new(
            f64::from(self.x),
            f64::from(self.y),
            f64::from(self.w),
            f64::from(self.h),
        )
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        self.to_box().iou(&other.to_box())
    }
}

/// Real-valued box, used for Kalman predictions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn centered(center: Point, w: f64, h: f64) -> Self {
        Self::new(center.x - w / 2.0, center.y - h / 2.0, w, h)
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Intersection over union; zero for disjoint or degenerate boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_identical_and_disjoint() {
        let a = Rect::new(10, 10, 20, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(40, 10, 5, 5)), 0.0);
        // touching edges share no area
        assert_eq!(a.iou(&Rect::new(30, 10, 5, 5)), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        let a = BBox::new(0.0, 0.0, 2.0, 1.0);
        let b = BBox::new(1.0, 0.0, 2.0, 1.0);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gap_is_max_of_axis_gaps() {
        let a = Rect::new(0, 0, 5, 5);
        assert_eq!(a.gap(&Rect::new(8, 0, 5, 5)), 3);
        assert_eq!(a.gap(&Rect::new(8, 12, 5, 5)), 7);
        assert_eq!(a.gap(&Rect::new(2, 2, 5, 5)), 0);
        assert_eq!(a.gap(&Rect::new(5, 0, 5, 5)), 0);
        assert_eq!(Rect::new(8, 0, 5, 5).gap(&a), 3);
    }

    #[test]
    fn union_covers_both() {
        let u = Rect::new(2, 3, 4, 4).union(&Rect::new(5, 1, 4, 2));
        assert_eq!(u, Rect::new(2, 1, 7, 6));
    }
}
