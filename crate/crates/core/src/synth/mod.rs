//! Deterministic synthetic traffic scenes with exact ground truth.
//!
//! Every random quantity comes from a ChaCha8 generator keyed by the scene
//! seed, with a separate stream per purpose and index (plate texture, one
//! per frame for pixel noise, one per actor for layout). Changing one actor
//! therefore leaves the noise of every frame and the other actors intact.
//! Noise is a sum of four uniforms, so rendering needs no transcendental
//! functions and is bit-identical on any IEEE-754 platform.

mod sprite;
mod suite;

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use sprite::{Body, Sprite, SUBSAMPLES};
pub use suite::{
    full_standard_suite, plan_scene, standard_suite, training_suite, SuiteEntry,
    SINGLE_BICYCLE_SCENE, STANDARD_SUITE, TRAINING_SUITE,
};

use crate::geometry::{Point, Rect};
use crate::video::Frame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorClass {
    Vehicle,
    Pedestrian,
    Bicycle,
}

impl ActorClass {
    pub const ALL: [ActorClass; 3] = [
        ActorClass::Vehicle,
        ActorClass::Pedestrian,
        ActorClass::Bicycle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActorClass::Vehicle => "vehicle",
            ActorClass::Pedestrian => "pedestrian",
            ActorClass::Bicycle => "bicycle",
        }
    }

    /// Unscaled archetype body.
    pub fn default_body(self) -> Body {
        match self {
            ActorClass::Vehicle => Body::DEFAULT_VEHICLE,
            ActorClass::Pedestrian => Body::DEFAULT_PEDESTRIAN,
            ActorClass::Bicycle => Body::DEFAULT_BICYCLE,
        }
    }

    /// Range of horizontal speeds in pixels per frame.
    pub fn speed_range(self) -> (f64, f64) {
        match self {
            ActorClass::Pedestrian => (0.6, 1.4),
            ActorClass::Bicycle => (2.0, 3.5),
            ActorClass::Vehicle => (4.0, 7.0),
        }
    }
}

impl fmt::Display for ActorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActorClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActorClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown actor class {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub class: ActorClass,
    pub body: Body,
    pub entry_frame: u32,
    /// Top-left corner of the silhouette at the entry frame.
    pub start: Point,
    /// Pixels per frame.
    pub velocity: Point,
    /// Grey level of the silhouette.
    pub intensity: u8,
    /// Frames `[from, to)` during which the actor is not drawn.
    pub hidden: Option<(u32, u32)>,
}

impl ActorSpec {
    pub fn is_hidden(&self, frame: u32) -> bool {
        self.hidden.is_some_and(|(a, b)| frame >= a && frame < b)
    }
}

/// Image-wide degradation applied on top of the noise-free render.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disturbance {
    None,
    /// Darkened, squashed and sheared copy of each actor's ground contact,
    /// drawn directly below it. `strength` is the darkening factor.
    Shadow {
        strength: f64,
        length: f64,
        shear: f64,
    },
    /// Blend of every pixel toward a bright haze level.
    Fog {
        amount: f64,
        level: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Sunny,
    Foggy,
    Rainy,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Sunny, Profile::Foggy, Profile::Rainy];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Sunny => "sunny",
            Profile::Foggy => "foggy",
            Profile::Rainy => "rainy",
        }
    }

    pub fn noise_sigma(self) -> f64 {
        match self {
            Profile::Sunny => 2.5,
            Profile::Foggy => 5.0,
            Profile::Rainy => 4.0,
        }
    }

    pub fn disturbance(self) -> Disturbance {
        match self {
            Profile::Sunny => Disturbance::None,
            Profile::Foggy => Disturbance::Fog {
                amount: 0.35,
                level: 170.0,
            },
            Profile::Rainy => Disturbance::Shadow {
                strength: 0.3,
                length: 0.3,
                shear: 0.5,
            },
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown profile {s:?} (expected sunny, foggy or rainy)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub length: u32,
    pub actors: Vec<ActorSpec>,
    pub noise_sigma: f64,
    pub disturbance: Disturbance,
    pub seed: u64,
    /// Static dark posts in front of the road. Actors passing behind them
    /// are not drawn there; their ground-truth boxes stay whole.
    #[serde(default)]
    pub occluders: Vec<Rect>,
}

impl SceneConfig {
    /// An empty scene: textured plate only.
    pub fn empty(name: &str, width: u32, height: u32, length: u32, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            width,
            height,
            length,
            actors: Vec::new(),
            noise_sigma: 0.0,
            disturbance: Disturbance::None,
            seed,
            occluders: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Config(m));
        if self.width == 0 || self.height == 0 || self.length == 0 {
            return err("width, height and length must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return err(format!(
                "noise sigma {} must be finite and non-negative",
                self.noise_sigma
            ));
        }
        match self.disturbance {
            Disturbance::None => {}
            Disturbance::Shadow {
                strength,
                length,
                shear,
            } => {
                if !((0.0..=1.0).contains(&strength) && length >= 0.0 && shear.is_finite()) {
                    return err(format!("bad shadow parameters {:?}", self.disturbance));
                }
            }
            Disturbance::Fog { amount, level } => {
                if !((0.0..=1.0).contains(&amount) && (0.0..=255.0).contains(&level)) {
                    return err(format!("bad fog parameters {:?}", self.disturbance));
                }
            }
        }
        for o in &self.occluders {
            if o.area() == 0 || o.right() > self.width || o.bottom() > self.height {
                return err(format!("occluder {o:?} is empty or leaves the frame"));
            }
        }
        for (i, a) in self.actors.iter().enumerate() {
            a.body.validate().map_err(SynthError::Config)?;
            if a.entry_frame >= self.length {
                return err(format!(
                    "actor {i} enters at {} after the scene ends",
                    a.entry_frame
                ));
            }
            if !(a.velocity.x.is_finite() && a.velocity.y.is_finite()) {
                return err(format!("actor {i} has a non-finite velocity"));
            }
            if placement(
                a,
                &Raster::new(&a.body),
                a.entry_frame,
                self.width,
                self.height,
            )
            .is_none()
            {
                return err(format!(
                    "actor {i} is not fully inside the frame at its entry"
                ));
            }
        }
        Ok(())
    }
}

/// Silhouettes of one body at every sub-pixel phase of its origin.
#[derive(Debug, Clone)]
pub(crate) struct Raster {
    /// Indexed by `qy * SUBSAMPLES + qx`; each with its crop offset.
    phases: Vec<(Sprite, (u32, u32))>,
}

impl Raster {
    pub(crate) fn new(body: &Body) -> Self {
        let n = SUBSAMPLES;
        let step = 1.0 / f64::from(n);
        let phases = (0..n * n)
            .map(|q| body.rasterize_at(f64::from(q % n) * step, f64::from(q / n) * step))
            .collect();
        Self { phases }
    }

    pub(crate) fn phase(&self, index: usize) -> &Sprite {
        &self.phases[index].0
    }
}

/// Top-left pixel and phase index of an actor at `frame`, if the whole
/// silhouette is inside the image.
pub(crate) fn placement(
    actor: &ActorSpec,
    raster: &Raster,
    frame: u32,
    width: u32,
    height: u32,
) -> Option<(u32, u32, usize)> {
    if frame < actor.entry_frame {
        return None;
    }
    let dt = f64::from(frame - actor.entry_frame);
    let n = SUBSAMPLES as usize;
    let split = |v: f64| {
        let whole = v.floor();
        let q = (((v - whole) * n as f64).floor() as usize).min(n - 1);
        (whole, q)
    };
    let (ix, qx) = split(actor.start.x + actor.velocity.x * dt);
    let (iy, qy) = split(actor.start.y + actor.velocity.y * dt);
    let index = qy * n + qx;
    let (sprite, (ox, oy)) = &raster.phases[index];
    if sprite.width() == 0 {
        return None;
    }
    let x = ix + f64::from(*ox);
    let y = iy + f64::from(*oy);
    let fits = x >= 0.0
        && y >= 0.0
        && x + f64::from(sprite.width()) <= f64::from(width)
        && y + f64::from(sprite.height()) <= f64::from(height);
    fits.then_some((x as u32, y as u32, index))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTrack {
    pub actor_id: u32,
    pub class: ActorClass,
    /// `(frame, box)` for every frame the actor is drawn, ascending.
    pub boxes: Vec<(u32, Rect)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub length: u32,
    pub tracks: Vec<TruthTrack>,
}

impl GroundTruth {
    pub fn count(&self, class: ActorClass) -> usize {
        self.tracks.iter().filter(|t| t.class == class).count()
    }

    /// Actors drawn in `frame`, by actor id.
    pub fn at_frame(&self, frame: u32) -> impl Iterator<Item = (&TruthTrack, Rect)> + '_ {
        self.tracks.iter().filter_map(move |t| {
            t.boxes
                .binary_search_by_key(&frame, |(f, _)| *f)
                .ok()
                .map(|i| (t, t.boxes[i].1))
        })
    }
}

const PLATE_STREAM: u64 = 1 << 48;
const NOISE_STREAM: u64 = 2 << 48;
pub(crate) const ACTOR_STREAM: u64 = 3 << 48;
pub(crate) const LAYOUT_STREAM: u64 = 4 << 48;

/// Grey level of occluding posts.
pub const OCCLUDER_LEVEL: u8 = 60;

/// Stream `id` of the generator keyed by `seed`.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
pub(crate) fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Approximately standard normal: four 16-bit uniforms, centred and scaled
/// to unit variance.
fn gaussian_from_bits(bits: u64) -> f64 {
    const SQRT_3: f64 = 1.732_050_807_568_877_2;
    let mut s = 0.0;
    for k in 0..4 {
        s += (((bits >> (16 * k)) & 0xffff) as f64 + 0.5) / 65536.0;
    }
    (s - 2.0) * SQRT_3
}

/// Renders frames of one scene on demand.
#[derive(Debug, Clone)]
pub struct Scene {
    config: SceneConfig,
    plate: Vec<f64>,
    rasters: Vec<Raster>,
    occluded: Vec<bool>,
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self, SynthError> {
        config.validate()?;
        let mut plate = background_plate(config.width, config.height, config.seed);
        let mut occluded = vec![false; plate.len()];
        for o in &config.occluders {
            for y in o.y..o.bottom() {
                for x in o.x..o.right() {
                    let p = (y * config.width + x) as usize;
                    plate[p] = f64::from(OCCLUDER_LEVEL);
                    occluded[p] = true;
                }
            }
        }
        let rasters = config.actors.iter().map(|a| Raster::new(&a.body)).collect();
        Ok(Self {
            config,
            plate,
            rasters,
            occluded,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn len(&self) -> u32 {
        self.config.length
    }

    pub fn is_empty(&self) -> bool {
        self.config.length == 0
    }

    /// The static background, quantised.
    pub fn plate(&self) -> Frame {
        let pixels = self.plate.iter().map(|v| quantize(*v)).collect();
        Frame::new(self.config.width, self.config.height, 0, pixels)
            .expect("plate matches dimensions")
    }

    fn visible(&self, actor: usize, frame: u32) -> Option<(u32, u32, usize)> {
        let a = &self.config.actors[actor];
        if frame >= self.config.length || a.is_hidden(frame) {
            return None;
        }
        placement(
            a,
            &self.rasters[actor],
            frame,
            self.config.width,
            self.config.height,
        )
    }

    pub fn frame(&self, index: u32) -> Frame {
        let cfg = &self.config;
        let (w, h) = (cfg.width as usize, cfg.height as usize);
        let mut img = self.plate.clone();
        let mut covered = self.occluded.clone();

        let placed: Vec<(usize, u32, u32, &Sprite)> = (0..cfg.actors.len())
            .filter_map(|i| {
                self.visible(i, index)
                    .map(|(x, y, q)| (i, x, y, self.rasters[i].phase(q)))
            })
            .collect();
        for &(i, x0, y0, s) in &placed {
            let level = f64::from(cfg.actors[i].intensity);
            for y in 0..s.height() {
                for x in 0..s.width() {
                    let p = (y0 + y) as usize * w + (x0 + x) as usize;
                    let c = s.coverage(x, y);
                    if c > 0.0 && !self.occluded[p] {
                        img[p] += c * (level - img[p]);
                        covered[p] = true;
                    }
                }
            }
        }

        match cfg.disturbance {
            Disturbance::None => {}
            Disturbance::Shadow {
                strength,
                length,
                shear,
            } => {
                for &(_, x0, y0, s) in &placed {
                    let footprint = s.footprint(1.0 / 3.0);
                    let rows = (length * f64::from(s.height())).round() as u32;
                    for r in 0..rows {
                        let y = (y0 + s.height() + r) as usize;
                        if y >= h {
                            break;
                        }
                        let dx = (shear * f64::from(r)).round() as i64;
                        for (c, &on) in footprint.iter().enumerate() {
                            let x = i64::from(x0) + c as i64 + dx;
                            if on && x >= 0 && (x as usize) < w {
                                let p = y * w + x as usize;
                                if !covered[p] {
                                    img[p] *= 1.0 - strength;
                                    covered[p] = true;
                                }
                            }
                        }
                    }
                }
            }
            Disturbance::Fog { amount, level } => {
                for v in img.iter_mut() {
                    *v = *v * (1.0 - amount) + level * amount;
                }
            }
        }

        if cfg.noise_sigma > 0.0 {
            let mut rng = stream(cfg.seed, NOISE_STREAM | u64::from(index));
            for v in img.iter_mut() {
                *v += cfg.noise_sigma * gaussian_from_bits(rng.next_u64());
            }
        }

        let pixels = img.iter().map(|v| quantize(*v)).collect();
        Frame::new(cfg.width, cfg.height, u64::from(index), pixels)
            .expect("render matches dimensions")
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame> + '_ {
        (0..self.config.length).map(|t| self.frame(t))
    }

    /// Exact silhouette boxes for every frame each actor is drawn.
    pub fn ground_truth(&self) -> GroundTruth {
        let tracks = (0..self.config.actors.len())
            .map(|i| TruthTrack {
                actor_id: i as u32,
                class: self.config.actors[i].class,
                boxes: (0..self.config.length)
                    .filter_map(|t| {
                        self.visible(i, t).map(|(x, y, q)| {
                            let s = self.rasters[i].phase(q);
                            (t, Rect::new(x, y, s.width(), s.height()))
                        })
                    })
                    .collect(),
            })
            .collect();
        GroundTruth {
            length: self.config.length,
            tracks,
        }
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Road-like plate: vertical gradient, fixed per-pixel texture and dashed
/// lane markings.
fn background_plate(width: u32, height: u32, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, PLATE_STREAM);
    let mut plate = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        let base = 115.0 + 12.0 * (f64::from(y) / f64::from(height) - 0.5);
        let marking_row = suite::lane_boundaries(height)
            .iter()
            .any(|&b| y == b || y == b + 1);
        for x in 0..width {
            let texture = 10.0 * unit(&mut rng) - 5.0;
            let dash = marking_row && (x / 12) % 2 == 0;
            plate.push(if dash {
                190.0 + texture
            } else {
                base + texture
            });
        }
    }
    plate
}

/// Renders all frames and the ground truth of a scene.
pub fn generate_scene(config: &SceneConfig) -> Result<(Vec<Frame>, GroundTruth), SynthError> {
    let scene = Scene::new(config.clone())?;
    Ok((scene.frames().collect(), scene.ground_truth()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_bicycle(seed: u64) -> SceneConfig {
        let mut cfg = SceneConfig::empty("t", 120, 80, 40, seed);
        cfg.noise_sigma = 3.0;
        cfg.actors.push(ActorSpec {
            class: ActorClass::Bicycle,
            body: Body::DEFAULT_BICYCLE,
            entry_frame: 5,
            start: Point::new(3.0, 20.0),
            velocity: Point::new(2.5, 0.0),
            intensity: 30,
            hidden: None,
        });
        cfg
    }

    #[test]
    fn rendering_is_deterministic() {
        let (a, ga) = generate_scene(&one_bicycle(42)).unwrap();
        let (b, gb) = generate_scene(&one_bicycle(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate_scene(&one_bicycle(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_noiseless_scene_is_the_plate() {
        let scene = Scene::new(SceneConfig::empty("e", 40, 30, 5, 7)).unwrap();
        let plate = scene.plate();
        for f in scene.frames() {
            assert_eq!(f.pixels(), plate.pixels());
        }
    }

    #[test]
    fn truth_boxes_bound_the_silhouette() {
        let mut cfg = one_bicycle(1);
        cfg.noise_sigma = 0.0;
        cfg.length = 60;
        let scene = Scene::new(cfg).unwrap();
        let plate = scene.plate();
        let gt = scene.ground_truth();
        for (t, bbox) in &gt.tracks[0].boxes {
            let f = scene.frame(*t);
            let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
            for y in 0..f.height() {
                for x in 0..f.width() {
                    if f.get(x, y) != plate.get(x, y) {
                        x0 = x0.min(x);
                        y0 = y0.min(y);
                        x1 = x1.max(x + 1);
                        y1 = y1.max(y + 1);
                    }
                }
            }
            assert_eq!(*bbox, Rect::new(x0, y0, x1 - x0, y1 - y0));
            assert!(bbox.right() <= 120 && bbox.bottom() <= 80);
        }
        // Enters at 5 and vanishes as soon as it would cross the right edge.
        let boxes = &gt.tracks[0].boxes;
        assert_eq!(boxes.first().unwrap().0, 5);
        let (last, b) = *boxes.last().unwrap();
        assert!(last < 59);
        assert!(b.right() + 3 > 120);
    }

    #[test]
    fn hidden_frames_are_skipped() {
        let mut cfg = one_bicycle(1);
        cfg.actors[0].hidden = Some((10, 14));
        let gt = Scene::new(cfg).unwrap().ground_truth();
        let frames: Vec<u32> = gt.tracks[0].boxes.iter().map(|(f, _)| *f).collect();
        assert!(frames.contains(&9) && frames.contains(&14));
        assert!(!(10..14).any(|f| frames.contains(&f)));
    }

    #[test]
    fn actor_outside_at_entry_is_rejected() {
        let mut cfg = one_bicycle(1);
        cfg.actors[0].start = Point::new(110.0, 20.0);
        assert!(matches!(Scene::new(cfg), Err(SynthError::Config(_))));
    }

    #[test]
    fn bicycle_upper_half_is_sparser() {
        let s = Body::DEFAULT_BICYCLE.rasterize();
        let rows = s.row_counts();
        let upper_rows = rows.len().div_ceil(2);
        let upper: u32 = rows[..upper_rows].iter().sum();
        let lower: u32 = rows[upper_rows..].iter().sum();
        assert!(upper < lower, "upper {upper} lower {lower}");
    }

    /// Mean of `R_f,lower - R_f,upper` over 100 jittered instances.
    fn mean_duty_gap(class: ActorClass) -> f64 {
        let mut rng = stream(2024, 77);
        let mut total = 0.0;
        for _ in 0..100 {
            let body = class
                .default_body()
                .scaled(0.92 + 0.16 * unit(&mut rng), 0.92 + 0.16 * unit(&mut rng));
            let s = body.rasterize();
            let rows = s.row_counts();
            let upper_rows = rows.len().div_ceil(2);
            let lower_rows = rows.len() - upper_rows;
            let upper: u32 = rows[..upper_rows].iter().sum();
            let lower: u32 = rows[upper_rows..].iter().sum();
            let w = f64::from(s.width());
            total += f64::from(lower) / (w * lower_rows as f64)
                - f64::from(upper) / (w * upper_rows as f64);
        }
        total / 100.0
    }

    #[test]
    fn archetypes_separate_on_duty_gap() {
        let bicycle = mean_duty_gap(ActorClass::Bicycle);
        let vehicle = mean_duty_gap(ActorClass::Vehicle);
        let pedestrian = mean_duty_gap(ActorClass::Pedestrian);
        eprintln!("duty gap: bicycle {bicycle:.3} vehicle {vehicle:.3} pedestrian {pedestrian:.3}");
        assert!(bicycle - vehicle >= 0.15);
        assert!(bicycle - pedestrian >= 0.15);
    }

    #[test]
    fn noise_has_unit_variance_shape() {
        let mut rng = stream(5, 99);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let g = gaussian_from_bits(rng.next_u64());
            s += g;
            s2 += g * g;
            assert!(g.abs() < 2.0 * 1.7321);
        }
        let mean = s / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((s2 / n as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn speed_ordering_across_classes() {
        let p = ActorClass::Pedestrian.speed_range();
        let b = ActorClass::Bicycle.speed_range();
        let v = ActorClass::Vehicle.speed_range();
        assert!(p.1 < b.0 && b.1 < v.0);
    }
}
