//! Adaptive per-pixel Gaussian mixture background model.
//!
//! Each pixel carries up to `K` weighted Gaussians over luma, kept sorted by
//! `weight / sigma` so the most stable, best-supported modes come first. A
//! pixel is background when the Gaussian it matches lies inside the shortest
//! prefix whose weights reach `background_ratio`.

use serde::{Deserialize, Serialize};

use crate::mask::ForegroundMask;
use crate::video::Frame;

#[derive(Debug, thiserror::Error)]
pub enum GmmError {
    #[error("invalid background model parameters: {0}")]
    Config(String),
    #[error("frame is {found_w}x{found_h}, model is {expected_w}x{expected_h}")]
    Dimension {
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },
}

/// `[background]` section of the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    /// Gaussians per pixel.
    pub components: usize,
    /// Learning rate, in (0, 1).
    pub learning_rate: f64,
    /// Weight mass that counts as background (T_bg).
    pub background_ratio: f64,
    /// Match radius in standard deviations.
    pub match_threshold: f64,
    pub initial_variance: f64,
    pub variance_floor: f64,
    /// Frames at the start of a stream that only train the model and are
    /// excluded from detection output.
    pub warmup_frames: u32,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 3,
            learning_rate: 0.005,
            background_ratio: 0.7,
            match_threshold: 2.5,
            initial_variance: 225.0,
            variance_floor: 4.0,
            warmup_frames: 50,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<(), GmmError> {
        let bad = |msg: String| Err(GmmError::Config(msg));
        if self.components < 1 {
            return bad("need at least one component".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return bad(format!(
                "learning rate {} outside (0, 1)",
                self.learning_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.background_ratio) || self.background_ratio == 0.0 {
            return bad(format!(
                "background ratio {} outside (0, 1]",
                self.background_ratio
            ));
        }
        if self.match_threshold.is_nan() || self.match_threshold <= 0.0 {
            return bad(format!(
                "match threshold {} must be positive",
                self.match_threshold
            ));
        }
        if self.variance_floor.is_nan()
            || self.variance_floor <= 0.0
            || self.initial_variance.is_nan()
            || self.initial_variance < self.variance_floor
        {
            return bad(format!(
                "need 0 < variance floor ({}) <= initial variance ({})",
                self.variance_floor, self.initial_variance
            ));
        }
        Ok(())
    }
}

/// One mixture component. Empty slots have zero weight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    fn rank(&self) -> f64 {
        // weight / sigma, squared to avoid the square root
        self.weight * self.weight / self.variance
    }
}

#[derive(Debug, Clone)]
pub struct GmmState {
    params: GmmParams,
    width: u32,
    height: u32,
    /// `components` slots per pixel, pixel-major.
    mixtures: Vec<Gaussian>,
}

impl GmmState {
    /// Seeds every pixel with one Gaussian at its first-frame value.
    pub fn init(first_frame: &Frame, params: GmmParams) -> Result<Self, GmmError> {
        params.validate()?;
        let k = params.components;
        let mut mixtures = vec![Gaussian::default(); first_frame.pixels().len() * k];
        for (slots, &value) in mixtures.chunks_exact_mut(k).zip(first_frame.pixels()) {
            slots[0] = Gaussian {
                weight: 1.0,
                mean: f64::from(value),
                variance: params.initial_variance,
            };
            for empty in &mut slots[1..] {
                empty.variance = params.initial_variance;
            }
        }
        Ok(Self {
            params,
            width: first_frame.width(),
            height: first_frame.height(),
            mixtures,
        })
    }

    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// The mixture of pixel `(x, y)`, sorted by `weight / sigma`.
    pub fn pixel(&self, x: u32, y: u32) -> &[Gaussian] {
        let k = self.params.components;
        let i = y as usize * self.width as usize + x as usize;
        &self.mixtures[i * k..(i + 1) * k]
    }

    /// Updates the model with `frame` and returns its raw foreground mask.
    pub fn update_and_subtract(&mut self, frame: &Frame) -> Result<ForegroundMask, GmmError> {
        let mut mask = ForegroundMask::new(self.width, self.height);
        self.update_into(frame, &mut mask)?;
        Ok(mask)
    }

    /// Same as [`update_and_subtract`](Self::update_and_subtract), reusing
    /// the caller's mask buffer.
    pub fn update_into(
        &mut self,
        frame: &Frame,
        mask: &mut ForegroundMask,
    ) -> Result<(), GmmError> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(GmmError::Dimension {
                expected_w: self.width,
                expected_h: self.height,
                found_w: frame.width(),
                found_h: frame.height(),
            });
        }
        if mask.width() != self.width || mask.height() != self.height {
            *mask = ForegroundMask::new(self.width, self.height);
        }
        let k = self.params.components;
        let p = &self.params;
        let step = Step {
            alpha: p.learning_rate,
            threshold_sq: p.match_threshold * p.match_threshold,
            ratio: p.background_ratio,
            init_var: p.initial_variance,
            floor: p.variance_floor,
        };
        for ((slots, &value), out) in self
            .mixtures
            .chunks_exact_mut(k)
            .zip(frame.pixels())
            .zip(mask.bits_mut())
        {
            *out = step.apply(slots, f64::from(value));
        }
        Ok(())
    }
}

struct Step {
    alpha: f64,
    threshold_sq: f64,
    ratio: f64,
    init_var: f64,
    floor: f64,
}

impl Step {
    /// Updates one pixel mixture in place; returns `true` for foreground.
    #[inline]
    fn apply(&self, slots: &mut [Gaussian], x: f64) -> bool {
        // Nearest active component within the match radius.
        let mut matched: Option<usize> = None;
        let mut best = f64::INFINITY;
        for (i, g) in slots.iter().enumerate() {
            if g.weight <= 0.0 {
                continue;
            }
            let d = x - g.mean;
            let dist_sq = d * d / g.variance;
            if dist_sq <= self.threshold_sq && dist_sq < best {
                best = dist_sq;
                matched = Some(i);
            }
        }

        let decay = 1.0 - self.alpha;
        for g in slots.iter_mut() {
            g.weight *= decay;
        }
        let slot = match matched {
            Some(i) => {
                let g = &mut slots[i];
                g.weight += self.alpha;
                g.mean += self.alpha * (x - g.mean);
                let d = x - g.mean;
                g.variance = (decay * g.variance + self.alpha * d * d).max(self.floor);
                i
            }
            None => {
                // Replace the weakest slot (empty slots have zero weight).
                let mut weakest = 0;
                for (i, g) in slots.iter().enumerate() {
                    if g.weight <= slots[weakest].weight {
                        weakest = i;
                    }
                }
                slots[weakest] = Gaussian {
                    weight: self.alpha,
                    mean: x,
                    variance: self.init_var,
                };
                weakest
            }
        };

        let total: f64 = slots.iter().map(|g| g.weight).sum();
        for g in slots.iter_mut() {
            g.weight /= total;
        }

        // Insertion sort by rank, descending, tracking the updated slot.
        let mut pos = slot;
        for i in 1..slots.len() {
            let mut j = i;
            while j > 0 && slots[j - 1].rank() < slots[j].rank() {
                slots.swap(j - 1, j);
                if pos == j {
                    pos = j - 1;
                } else if pos == j - 1 {
                    pos = j;
                }
                j -= 1;
            }
        }

        if matched.is_none() {
            return true;
        }
        let mut cumulative = 0.0;
        for (i, g) in slots.iter().enumerate() {
            if i == pos {
                return false;
            }
            cumulative += g.weight;
            if cumulative >= self.ratio {
                break;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(w: u32, h: u32, px: Vec<u8>) -> Frame {
        Frame::new(w, h, 0, px).unwrap()
    }

    #[test]
    fn init_seeds_one_gaussian_per_pixel() {
        let f = frame(2, 2, vec![10, 20, 30, 40]);
        let s = GmmState::init(&f, GmmParams::default()).unwrap();
        for (i, (x, y)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let mix = s.pixel(x, y);
            assert_eq!(mix.len(), 3);
            assert_eq!(mix[0].weight, 1.0);
            assert_eq!(mix[0].mean, 10.0 * (i + 1) as f64);
            assert_eq!(mix[0].variance, 225.0);
            assert!(mix[1..].iter().all(|g| g.weight == 0.0));
        }
    }

    #[test]
    fn learning_rate_bounds() {
        let f = frame(1, 1, vec![0]);
        for alpha in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            let p = GmmParams {
                learning_rate: alpha,
                ..GmmParams::default()
            };
            assert!(
                matches!(GmmState::init(&f, p), Err(GmmError::Config(_))),
                "{alpha}"
            );
        }
        let p = GmmParams {
            components: 0,
            ..GmmParams::default()
        };
        assert!(GmmState::init(&f, p).is_err());
    }

    #[test]
    fn first_frame_after_init_is_background() {
        let f = frame(3, 2, vec![0, 50, 100, 150, 200, 250]);
        let mut s = GmmState::init(&f, GmmParams::default()).unwrap();
        assert_eq!(s.update_and_subtract(&f).unwrap().count(), 0);
    }

    #[test]
    fn constant_video_stays_background() {
        let f = frame(8, 8, (0..64).map(|i| (i * 3) as u8).collect());
        let mut s = GmmState::init(&f, GmmParams::default()).unwrap();
        let mut last = None;
        for _ in 0..100 {
            last = Some(s.update_and_subtract(&f).unwrap());
        }
        assert_eq!(last.unwrap().count(), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = GmmState::init(&frame(2, 2, vec![0; 4]), GmmParams::default()).unwrap();
        assert!(matches!(
            s.update_and_subtract(&frame(2, 3, vec![0; 6])),
            Err(GmmError::Dimension { .. })
        ));
    }

    #[test]
    fn white_square_on_black() {
        // 50 warm-up frames of black, then a white 8x8 square at frame 60.
        let (w, h) = (32u32, 32u32);
        let black = frame(w, h, vec![0; (w * h) as usize]);
        let mut s = GmmState::init(&black, GmmParams::default()).unwrap();
        for _ in 0..60 {
            s.update_and_subtract(&black).unwrap();
        }
        let mut px = vec![0u8; (w * h) as usize];
        for y in 12..20 {
            for x in 12..20 {
                px[(y * w + x) as usize] = 255;
            }
        }
        let mask = s.update_and_subtract(&frame(w, h, px)).unwrap();
        let mut inside = 0;
        let mut outside = 0;
        for y in 0..h {
            for x in 0..w {
                let sq = (12..20).contains(&x) && (12..20).contains(&y);
                match (sq, mask.get(x, y)) {
                    (true, true) => inside += 1,
                    (false, true) => outside += 1,
                    _ => {}
                }
            }
        }
        assert!(inside as f64 >= 0.95 * 64.0);
        assert!((outside as f64) < 0.01 * f64::from(w * h - 64));
    }

    /// Running-average background subtraction, written out directly. With a
    /// single component the mixture must behave exactly like this.
    struct RunningAverage {
        mean: Vec<f64>,
        var: Vec<f64>,
    }

    impl RunningAverage {
        fn step(&mut self, frame: &[u8], p: &GmmParams) -> Vec<bool> {
            let a = p.learning_rate;
            frame
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let x = f64::from(v);
                    let d = x - self.mean[i];
                    if d * d / self.var[i] <= p.match_threshold * p.match_threshold {
                        self.mean[i] += a * (x - self.mean[i]);
                        let d = x - self.mean[i];
                        self.var[i] = ((1.0 - a) * self.var[i] + a * d * d).max(p.variance_floor);
                        false
                    } else {
                        self.mean[i] = x;
                        self.var[i] = p.initial_variance;
                        true
                    }
                })
                .collect()
        }
    }

    proptest! {
        #[test]
        fn single_component_is_running_average(
            frames in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 64), 2..30),
            alpha in 0.01f64..0.5,
        ) {
            let p = GmmParams { components: 1, learning_rate: alpha, ..GmmParams::default() };
            let first = frame(8, 8, frames[0].clone());
            let mut gmm = GmmState::init(&first, p.clone()).unwrap();
            let mut oracle = RunningAverage {
                mean: frames[0].iter().map(|&v| f64::from(v)).collect(),
                var: vec![p.initial_variance; 64],
            };
            for px in &frames[1..] {
                let got = gmm.update_and_subtract(&frame(8, 8, px.clone())).unwrap();
                let want = oracle.step(px, &p);
                prop_assert_eq!(got.bits(), &want[..]);
            }
        }

        #[test]
        fn weights_normalised_and_variance_floored(
            frames in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 16), 1..40),
            k in 1usize..5,
        ) {
            let p = GmmParams { components: k, learning_rate: 0.05, ..GmmParams::default() };
            let mut gmm = GmmState::init(&frame(4, 4, frames[0].clone()), p.clone()).unwrap();
            for px in &frames {
                gmm.update_and_subtract(&frame(4, 4, px.clone())).unwrap();
                for y in 0..4 {
                    for x in 0..4 {
                        let mix = gmm.pixel(x, y);
                        let total: f64 = mix.iter().map(|g| g.weight).sum();
                        prop_assert!((total - 1.0).abs() < 1e-6);
                        prop_assert!(mix.iter().all(|g| g.variance >= p.variance_floor));
                        prop_assert!(mix.windows(2).all(|w| w[0].rank() >= w[1].rank()));
                    }
                }
            }
        }
    }
}
