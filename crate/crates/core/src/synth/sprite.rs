use serde::{Deserialize, Serialize};

/// Inside-test of a body shape at a point in body coordinates.
type Membership = Box<dyn Fn(f64, f64) -> bool>;

/// Shape parameters of one actor, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    /// Lower body over the full width with a narrower cabin on top.
    Vehicle {
        width: f64,
        height: f64,
        cabin_ratio: f64,
    },
    /// Head, trunk and two legs.
    Pedestrian { width: f64, height: f64 },
    /// Two ring wheels joined by a bar, with a rider's torso and head above.
    Bicycle {
        wheel_radius: f64,
        wheel_thickness: f64,
        wheel_base: f64,
        torso_width: f64,
        torso_height: f64,
        head_radius: f64,
    },
}

impl Body {
    pub const DEFAULT_VEHICLE: Body = Body::Vehicle {
        width: 50.0,
        height: 24.0,
        cabin_ratio: 0.9,
    };
    pub const DEFAULT_PEDESTRIAN: Body = Body::Pedestrian {
        width: 9.0,
        height: 24.0,
    };
    pub const DEFAULT_BICYCLE: Body = Body::Bicycle {
        wheel_radius: 6.5,
        wheel_thickness: 4.0,
        wheel_base: 17.0,
        torso_width: 4.5,
        torso_height: 12.0,
        head_radius: 3.0,
    };

    /// Multiplies every length by `sx` horizontally and `sy` vertically.
    /// Round parts (wheels, head) use the mean of the two.
    pub fn scaled(self, sx: f64, sy: f64) -> Body {
        let s = 0.5 * (sx + sy);
        match self {
            Body::Vehicle {
                width,
                height,
                cabin_ratio,
            } => Body::Vehicle {
                width: width * sx,
                height: height * sy,
                cabin_ratio,
            },
            Body::Pedestrian { width, height } => Body::Pedestrian {
                width: width * sx,
                height: height * sy,
            },
            Body::Bicycle {
                wheel_radius,
                wheel_thickness,
                wheel_base,
                torso_width,
                torso_height,
                head_radius,
            } => Body::Bicycle {
                wheel_radius: wheel_radius * s,
                wheel_thickness: wheel_thickness * s,
                wheel_base: wheel_base * sx,
                torso_width: torso_width * sx,
                torso_height: torso_height * sy,
                head_radius: head_radius * s,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match *self {
            Body::Vehicle {
                width,
                height,
                cabin_ratio,
            } => positive(width) && positive(height) && cabin_ratio > 0.0 && cabin_ratio <= 1.0,
            Body::Pedestrian { width, height } => positive(width) && positive(height),
            Body::Bicycle {
                wheel_radius,
                wheel_thickness,
                wheel_base,
                torso_width,
                torso_height,
                head_radius,
            } => {
                [
                    wheel_radius,
                    wheel_thickness,
                    wheel_base,
                    torso_width,
                    torso_height,
                    head_radius,
                ]
                .into_iter()
                .all(positive)
                    && wheel_thickness <= wheel_radius
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid body parameters {self:?}"))
        }
    }

    /// Nominal extent and membership test in body coordinates.
    fn shape(&self) -> (f64, f64, Membership) {
        match *self {
            Body::Vehicle {
                width,
                height,
                cabin_ratio,
            } => {
                let cabin_h = 0.4 * height;
                let margin = 0.5 * (1.0 - cabin_ratio) * width;
                let inside = move |x: f64, y: f64| {
                    (0.0..width).contains(&x)
                        && (0.0..height).contains(&y)
                        && (y >= cabin_h || (x >= margin && x <= width - margin))
                };
                (width, height, Box::new(inside))
            }
            Body::Pedestrian { width, height } => {
                let head_r = 0.11 * height;
                let hip = 0.55 * height;
                let leg_w = width / 3.0;
                let cx = 0.5 * width;
                let inside = move |x: f64, y: f64| {
                    if !((0.0..width).contains(&x) && (0.0..height).contains(&y)) {
                        return false;
                    }
                    let head = (x - cx) * (x - cx) + (y - head_r) * (y - head_r) <= head_r * head_r;
                    let trunk = y >= 2.0 * head_r && y < hip;
                    let legs = y >= hip && (x < leg_w || x >= width - leg_w);
                    head || trunk || legs
                };
                (width, height, Box::new(inside))
            }
            Body::Bicycle {
                wheel_radius: r,
                wheel_thickness: t,
                wheel_base,
                torso_width,
                torso_height,
                head_radius,
            } => {
                let width = wheel_base + 2.0 * r;
                let height = 2.0 * head_radius + torso_height + 2.0 * r;
                let hub_y = height - r;
                let (hub_a, hub_b) = (r, r + wheel_base);
                let inner2 = (r - t) * (r - t);
                let rider_x = 0.5 * width;
                let torso_top = 2.0 * head_radius;
                let torso_bottom = torso_top + torso_height + 0.5 * r;
                let bar = 0.5 * t.min(3.0);
                let inside = move |x: f64, y: f64| {
                    let ring = |hx: f64| {
                        let d2 = (x - hx) * (x - hx) + (y - hub_y) * (y - hub_y);
                        d2 <= r * r && d2 >= inner2
                    };
                    let frame_bar = (y - hub_y).abs() <= bar && x >= hub_a && x <= hub_b;
                    let torso = (x - rider_x).abs() <= 0.5 * torso_width
                        && y >= torso_top
                        && y <= torso_bottom;
                    let head = (x - rider_x) * (x - rider_x)
                        + (y - head_radius) * (y - head_radius)
                        <= head_radius * head_radius;
                    ring(hub_a) || ring(hub_b) || frame_bar || torso || head
                };
                (width, height, Box::new(inside))
            }
        }
    }

    /// Silhouette with its origin on a pixel corner.
    pub fn rasterize(&self) -> Sprite {
        self.rasterize_at(0.0, 0.0).0
    }

    /// Silhouette with its origin shifted by `(fx, fy)` pixels, each in
    /// `[0, 1)`. Returns the cropped sprite and the offset of its top-left
    /// pixel from the unshifted origin.
    pub fn rasterize_at(&self, fx: f64, fy: f64) -> (Sprite, (u32, u32)) {
        let (w, h, inside) = self.shape();
        Sprite::from_fn(w + fx, h + fy, |x, y| inside(x - fx, y - fy))
    }
}

/// Samples per pixel side when measuring coverage.
pub const SUBSAMPLES: u32 = 4;
const FULL: u8 = (SUBSAMPLES * SUBSAMPLES) as u8;

/// Silhouette with per-pixel area coverage, row-major. A pixel is set when
/// any part of it is covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sprite {
    width: u32,
    height: u32,
    /// Covered subsamples out of `SUBSAMPLES^2`.
    cover: Vec<u8>,
}

impl Sprite {
    /// Supersamples `inside` over a `ceil(w) x ceil(h)` grid and crops the
    /// result to the covered pixels.
    fn from_fn(w: f64, h: f64, inside: impl Fn(f64, f64) -> bool) -> (Sprite, (u32, u32)) {
        let gw = w.ceil().max(1.0) as u32;
        let gh = h.ceil().max(1.0) as u32;
        let step = 1.0 / f64::from(SUBSAMPLES);
        let mut cover = Vec::with_capacity((gw * gh) as usize);
        for y in 0..gh {
            for x in 0..gw {
                let mut n = 0u8;
                for j in 0..SUBSAMPLES {
                    for i in 0..SUBSAMPLES {
                        let sx = f64::from(x) + (f64::from(i) + 0.5) * step;
                        let sy = f64::from(y) + (f64::from(j) + 0.5) * step;
                        n += u8::from(inside(sx, sy));
                    }
                }
                cover.push(n);
            }
        }
        Sprite {
            width: gw,
            height: gh,
            cover,
        }
        .cropped()
    }

    fn cropped(self) -> (Sprite, (u32, u32)) {
        let (w, h) = (self.width as usize, self.height as usize);
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        for y in 0..h {
            for x in 0..w {
                if self.cover[y * w + x] > 0 {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        if x0 >= x1 {
            let empty = Sprite {
                width: 0,
                height: 0,
                cover: Vec::new(),
            };
            return (empty, (0, 0));
        }
        let mut cover = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            cover.extend_from_slice(&self.cover[y * w + x0..y * w + x1]);
        }
        let sprite = Sprite {
            width: (x1 - x0) as u32,
            height: (y1 - y0) as u32,
            cover,
        };
        (sprite, (x0 as u32, y0 as u32))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.cover[(y * self.width + x) as usize] > 0
    }

    /// Covered fraction of pixel `(x, y)`.
    pub fn coverage(&self, x: u32, y: u32) -> f64 {
        f64::from(self.cover[(y * self.width + x) as usize]) / f64::from(FULL)
    }

    pub fn count(&self) -> u32 {
        self.cover.iter().filter(|c| **c > 0).count() as u32
    }

    /// Set pixels per row, top to bottom.
    pub fn row_counts(&self) -> Vec<u32> {
        self.cover
            .chunks(self.width.max(1) as usize)
            .map(|row| row.iter().filter(|c| **c > 0).count() as u32)
            .collect()
    }

    /// Columns with a set pixel in the bottom `fraction` of the rows.
    pub(crate) fn footprint(&self, fraction: f64) -> Vec<bool> {
        let from = ((1.0 - fraction) * f64::from(self.height)).floor() as u32;
        (0..self.width)
            .map(|x| (from..self.height).any(|y| self.get(x, y)))
            .collect()
    }
}
