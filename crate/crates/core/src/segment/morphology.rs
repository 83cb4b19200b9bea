use serde::{Deserialize, Serialize};

use crate::mask::ForegroundMask;

/// 3x3 structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    /// Centre plus its four edge neighbours.
    Cross,
    /// Full 3x3 neighbourhood.
    Square,
}

impl Element {
    fn offsets(self) -> &'static [(i32, i32)] {
        const CROSS: [(i32, i32); 5] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];
        const SQUARE: [(i32, i32); 9] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (0, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        match self {
            Element::Cross => &CROSS,
            Element::Square => &SQUARE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphologyParams {
    pub open_element: Element,
    pub open_iterations: u32,
    pub close_element: Element,
    pub close_iterations: u32,
}

impl Default for MorphologyParams {
    fn default() -> Self {
        Self {
            open_element: Element::Square,
            open_iterations: 1,
            close_element: Element::Square,
            close_iterations: 1,
        }
    }
}

/// Opening (erode then dilate) followed by closing (dilate then erode).
/// Pixels outside the frame count as background.
pub fn morphological_clean(mask: &ForegroundMask, params: &MorphologyParams) -> ForegroundMask {
    let mut scratch = ForegroundMask::new(mask.width(), mask.height());
    let mut out = mask.clone();
    clean_in_place(&mut out, &mut scratch, params);
    out
}

/// Allocation-free variant of [`morphological_clean`]; `scratch` is resized
/// as needed.
pub fn clean_in_place(
    mask: &mut ForegroundMask,
    scratch: &mut ForegroundMask,
    params: &MorphologyParams,
) {
    if scratch.width() != mask.width() || scratch.height() != mask.height() {
        *scratch = ForegroundMask::new(mask.width(), mask.height());
    }
    let passes = [
        (Op::Erode, params.open_element, params.open_iterations),
        (Op::Dilate, params.open_element, params.open_iterations),
        (Op::Dilate, params.close_element, params.close_iterations),
        (Op::Erode, params.close_element, params.close_iterations),
    ];
    for (op, element, iterations) in passes {
        for _ in 0..iterations {
            apply(mask, scratch, op, element);
            std::mem::swap(mask, scratch);
        }
    }
}

pub fn erode(mask: &ForegroundMask, element: Element) -> ForegroundMask {
    let mut out = ForegroundMask::new(mask.width(), mask.height());
    apply(mask, &mut out, Op::Erode, element);
    out
}

pub fn dilate(mask: &ForegroundMask, element: Element) -> ForegroundMask {
    let mut out = ForegroundMask::new(mask.width(), mask.height());
    apply(mask, &mut out, Op::Dilate, element);
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Erode,
    Dilate,
}

fn apply(src: &ForegroundMask, dst: &mut ForegroundMask, op: Op, element: Element) {
    let w = src.width() as usize;
    let h = src.height() as usize;
    let bits = src.bits();
    let out = dst.bits_mut();
    let offsets = element.offsets();
    for y in 0..h {
        let interior_y = y > 0 && y + 1 < h;
        for x in 0..w {
            let i = y * w + x;
            let value = if interior_y && x > 0 && x + 1 < w {
                // Fast path: the whole neighbourhood is in bounds.
                let probe = |&(dx, dy): &(i32, i32)| {
                    bits[(i as isize + dy as isize * w as isize + dx as isize) as usize]
                };
                match op {
                    Op::Erode => offsets.iter().all(probe),
                    Op::Dilate => offsets.iter().any(probe),
                }
            } else {
                let probe = |&(dx, dy): &(i32, i32)| {
                    let nx = x as i64 + i64::from(dx);
                    let ny = y as i64 + i64::from(dy);
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < w
                        && (ny as usize) < h
                        && bits[ny as usize * w + nx as usize]
                };
                match op {
                    Op::Erode => offsets.iter().all(probe),
                    Op::Dilate => offsets.iter().any(probe),
                }
            };
            out[i] = value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(size: u32, side: u32, at: u32) -> ForegroundMask {
        let mut m = ForegroundMask::new(size, size);
        for y in at..at + side {
            for x in at..at + side {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn singleton_removed() {
        let mut m = ForegroundMask::new(9, 9);
        m.set(4, 4, true);
        assert_eq!(
            morphological_clean(&m, &MorphologyParams::default()).count(),
            0
        );
        let cross = MorphologyParams {
            open_element: Element::Cross,
            ..MorphologyParams::default()
        };
        assert_eq!(morphological_clean(&m, &cross).count(), 0);
    }

    #[test]
    fn solid_square_unchanged() {
        let m = square(20, 10, 5);
        assert_eq!(morphological_clean(&m, &MorphologyParams::default()), m);
    }

    #[test]
    fn interior_hole_filled() {
        let full = square(20, 10, 5);
        let mut holed = full.clone();
        holed.set(9, 9, false);
        assert_eq!(
            morphological_clean(&holed, &MorphologyParams::default()),
            full
        );
    }

    #[test]
    fn erosion_treats_outside_as_background() {
        let m = ForegroundMask::from_ascii(&["###", "###", "###"]);
        let e = erode(&m, Element::Square);
        assert_eq!(e.count(), 1);
        assert!(e.get(1, 1));
        let e = erode(&m, Element::Cross);
        assert_eq!(e.count(), 1);
    }

    #[test]
    fn cross_dilation_shape() {
        let mut m = ForegroundMask::new(5, 5);
        m.set(2, 2, true);
        let d = dilate(&m, Element::Cross);
        assert_eq!(
            d,
            ForegroundMask::from_ascii(&[".....", "..#..", ".###.", "..#..", "....."])
        );
    }
}
