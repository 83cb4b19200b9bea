use super::{
    stream, unit, ActorClass, ActorSpec, Profile, Raster, SceneConfig, ACTOR_STREAM, LAYOUT_STREAM,
};
use crate::geometry::{Point, Rect};

pub const SCENE_WIDTH: u32 = 352;
pub const SCENE_HEIGHT: u32 = 288;
/// First frame at which actors may appear; leaves the background model
/// time to settle.
pub const FIRST_ENTRY: u32 = 55;
const LANE_SPACING: u32 = 50;
const FIRST_LANE: u32 = 45;

/// One manifest row: everything needed to rebuild a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub profile: Profile,
    pub seed: u64,
    pub length: u32,
    pub bicycles: u32,
    pub pedestrians: u32,
    pub vehicles: u32,
    /// Occluding posts, each covering one lane.
    pub posts: u32,
}

#[allow(clippy::too_many_arguments)]
const fn entry(
    name: &'static str,
    profile: Profile,
    seed: u64,
    length: u32,
    bicycles: u32,
    pedestrians: u32,
    vehicles: u32,
    posts: u32,
) -> SuiteEntry {
    SuiteEntry {
        name,
        profile,
        seed,
        length,
        bicycles,
        pedestrians,
        vehicles,
        posts,
    }
}

use Profile::{Foggy, Rainy, Sunny};

/// The evaluation suite, version 1. Do not edit: metrics are only
/// comparable across runs of the same manifest.
pub const STANDARD_SUITE: [SuiteEntry; 20] = [
    entry("sunny-01", Sunny, 0x5EED_0001, 200, 1, 0, 0, 0),
    entry("sunny-02", Sunny, 0x5EED_0002, 300, 3, 2, 3, 2),
    entry("sunny-03", Sunny, 0x5EED_0003, 300, 2, 2, 4, 2),
    entry("sunny-04", Sunny, 0x5EED_0004, 300, 3, 1, 3, 2),
    entry("sunny-05", Sunny, 0x5EED_0005, 300, 2, 2, 3, 2),
    entry("sunny-06", Sunny, 0x5EED_0006, 300, 3, 2, 2, 2),
    entry("sunny-07", Sunny, 0x5EED_0007, 300, 3, 1, 4, 2),
    entry("foggy-01", Foggy, 0x5EED_0101, 300, 3, 2, 3, 2),
    entry("foggy-02", Foggy, 0x5EED_0102, 300, 2, 2, 4, 2),
    entry("foggy-03", Foggy, 0x5EED_0103, 300, 3, 1, 3, 2),
    entry("foggy-04", Foggy, 0x5EED_0104, 300, 2, 2, 3, 2),
    entry("foggy-05", Foggy, 0x5EED_0105, 300, 3, 2, 2, 2),
    entry("foggy-06", Foggy, 0x5EED_0106, 300, 2, 1, 4, 2),
    entry("foggy-07", Foggy, 0x5EED_0107, 300, 3, 2, 3, 2),
    entry("rainy-01", Rainy, 0x5EED_0201, 300, 3, 2, 3, 2),
    entry("rainy-02", Rainy, 0x5EED_0202, 300, 2, 2, 4, 2),
    entry("rainy-03", Rainy, 0x5EED_0203, 300, 3, 1, 3, 2),
    entry("rainy-04", Rainy, 0x5EED_0204, 300, 3, 2, 3, 2),
    entry("rainy-05", Rainy, 0x5EED_0205, 300, 2, 2, 3, 2),
    entry("rainy-06", Rainy, 0x5EED_0206, 300, 3, 1, 3, 2),
];

/// Index of the single-bicycle scene in [`STANDARD_SUITE`].
pub const SINGLE_BICYCLE_SCENE: usize = 0;

/// Scenes for fitting classifiers; disjoint seeds from the standard suite.
pub const TRAINING_SUITE: [SuiteEntry; 18] = [
    entry("train-sunny-01", Sunny, 0x7EA1_0001, 300, 3, 2, 3, 2),
    entry("train-sunny-02", Sunny, 0x7EA1_0002, 300, 3, 2, 3, 2),
    entry("train-sunny-03", Sunny, 0x7EA1_0003, 300, 3, 2, 3, 2),
    entry("train-sunny-04", Sunny, 0x7EA1_0004, 300, 3, 2, 3, 2),
    entry("train-sunny-05", Sunny, 0x7EA1_0005, 300, 3, 2, 3, 2),
    entry("train-sunny-06", Sunny, 0x7EA1_0006, 300, 3, 2, 3, 2),
    entry("train-foggy-01", Foggy, 0x7EA1_0101, 300, 3, 2, 3, 2),
    entry("train-foggy-02", Foggy, 0x7EA1_0102, 300, 3, 2, 3, 2),
    entry("train-foggy-03", Foggy, 0x7EA1_0103, 300, 3, 2, 3, 2),
    entry("train-foggy-04", Foggy, 0x7EA1_0104, 300, 3, 2, 3, 2),
    entry("train-foggy-05", Foggy, 0x7EA1_0105, 300, 3, 2, 3, 2),
    entry("train-foggy-06", Foggy, 0x7EA1_0106, 300, 3, 2, 3, 2),
    entry("train-rainy-01", Rainy, 0x7EA1_0201, 300, 3, 2, 3, 2),
    entry("train-rainy-02", Rainy, 0x7EA1_0202, 300, 3, 2, 3, 2),
    entry("train-rainy-03", Rainy, 0x7EA1_0203, 300, 3, 2, 3, 2),
    entry("train-rainy-04", Rainy, 0x7EA1_0204, 300, 3, 2, 3, 2),
    entry("train-rainy-05", Rainy, 0x7EA1_0205, 300, 3, 2, 3, 2),
    entry("train-rainy-06", Rainy, 0x7EA1_0206, 300, 3, 2, 3, 2),
];

/// Standard scenes of one profile.
pub fn standard_suite(profile: Profile) -> Vec<SceneConfig> {
    STANDARD_SUITE
        .iter()
        .filter(|e| e.profile == profile)
        .map(plan_scene)
        .collect()
}

/// All twenty standard scenes in manifest order.
pub fn full_standard_suite() -> Vec<SceneConfig> {
    STANDARD_SUITE.iter().map(plan_scene).collect()
}

pub fn training_suite() -> Vec<SceneConfig> {
    TRAINING_SUITE.iter().map(plan_scene).collect()
}

pub(crate) fn lane_centers(height: u32) -> Vec<u32> {
    (0..)
        .map(|i| FIRST_LANE + i * LANE_SPACING)
        .take_while(|c| c + LANE_SPACING / 2 <= height)
        .collect()
}

/// Rows halfway between neighbouring lanes.
pub(crate) fn lane_boundaries(height: u32) -> Vec<u32> {
    let c = lane_centers(height);
    c.windows(2).map(|w| (w[0] + w[1]) / 2).collect()
}

/// Last frame offset (from entry) at which the actor is fully inside.
fn visible_frames(actor: &ActorSpec, raster: &Raster, width: u32, height: u32, length: u32) -> u32 {
    let mut n = 0;
    while actor.entry_frame + n < length
        && super::placement(actor, raster, actor.entry_frame + n, width, height).is_some()
    {
        n += 1;
    }
    n
}

/// Lays out the actors of a manifest row. Actors share horizontal lanes
/// one at a time, entering after the lane's previous occupant has left.
pub fn plan_scene(e: &SuiteEntry) -> SceneConfig {
    let (w, h) = (SCENE_WIDTH, SCENE_HEIGHT);
    let lanes = lane_centers(h);
    let mut layout = stream(e.seed, LAYOUT_STREAM);

    let mut classes: Vec<ActorClass> = std::iter::repeat(ActorClass::Bicycle)
        .take(e.bicycles as usize)
        .chain(std::iter::repeat(ActorClass::Pedestrian).take(e.pedestrians as usize))
        .chain(std::iter::repeat(ActorClass::Vehicle).take(e.vehicles as usize))
        .collect();
    for i in (1..classes.len()).rev() {
        let j = (unit(&mut layout) * (i + 1) as f64) as usize;
        classes.swap(i, j.min(i));
    }
    let mut lane_free: Vec<u32> = lanes
        .iter()
        .map(|_| FIRST_ENTRY + (unit(&mut layout) * 25.0) as u32)
        .collect();

    let mut actors = Vec::with_capacity(classes.len());
    for (k, &class) in classes.iter().enumerate() {
        let mut r = stream(e.seed, ACTOR_STREAM | k as u64);
        let body = class
            .default_body()
            .scaled(0.92 + 0.16 * unit(&mut r), 0.92 + 0.16 * unit(&mut r));
        let raster = Raster::new(&body);
        let sprite = raster.phase(0);
        let (lo, hi) = class.speed_range();
        let speed = lo + (hi - lo) * unit(&mut r);
        let rightward = unit(&mut r) < 0.5;
        let vy = 0.06 * unit(&mut r) - 0.03;
        let contrast = 80.0 + 20.0 * unit(&mut r);
        let brighter = unit(&mut r) < 0.5;
        let jitter_entry = (unit(&mut r) * 10.0) as u32;
        let jitter_y = (unit(&mut r) * 4.0).round() - 2.0;
        let inset = unit(&mut r);

        let (lane, &free) = lane_free
            .iter()
            .enumerate()
            .min_by_key(|(i, f)| (**f, *i))
            .expect("at least one lane");
        let sw = f64::from(sprite.width());
        let x0 = match (class, rightward) {
            (ActorClass::Pedestrian, true) => 2.0 + inset * (0.5 * f64::from(w) - sw),
            (ActorClass::Pedestrian, false) => {
                0.5 * f64::from(w) + inset * (0.5 * f64::from(w) - sw - 2.0)
            }
            (_, true) => 2.0 + 48.0 * inset,
            (_, false) => f64::from(w) - sw - 2.0 - 48.0 * inset,
        };
        let y0 = f64::from(lanes[lane]) - 0.5 * f64::from(sprite.height()) + jitter_y;
        let base = 115.0 + 12.0 * (y0 / f64::from(h) - 0.5);
        let intensity = if brighter {
            base + contrast
        } else {
            base - contrast
        };

        let actor = ActorSpec {
            class,
            body,
            entry_frame: free + jitter_entry,
            start: Point::new(x0.round(), y0.round()),
            velocity: Point::new(if rightward { speed } else { -speed }, vy),
            intensity: intensity.round().clamp(0.0, 255.0) as u8,
            hidden: None,
        };
        let span = visible_frames(&actor, &raster, w, h, e.length);
        lane_free[lane] = actor.entry_frame + span + 8;
        actors.push(actor);
    }

    let occluders = (0..e.posts)
        .map(|_| {
            let pw = 6 + (unit(&mut layout) * 5.0) as u32;
            // Near one side of the road, where actors enter or leave.
            let offset = 25 + (unit(&mut layout) * 20.0) as u32;
            let x = if unit(&mut layout) < 0.5 {
                offset
            } else {
                w - offset - pw
            };
            let lane = lanes[(unit(&mut layout) * lanes.len() as f64) as usize % lanes.len()];
            Rect::new(x, lane - LANE_SPACING / 2, pw, LANE_SPACING)
        })
        .collect();

    SceneConfig {
        name: e.name.to_string(),
        width: w,
        height: h,
        length: e.length,
        actors,
        noise_sigma: e.profile.noise_sigma(),
        disturbance: e.profile.disturbance(),
        seed: e.seed,
        occluders,
    }
}
