//! Locating scenes on disk.
//!
//! A scene is a directory of numbered PGM files or a single `.y4m` file. A
//! suite is a directory whose subdirectories are scenes; its scenes are
//! visited in name order.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bikedet_core::formats::read_truth;
use bikedet_core::video::{load_pgm_sequence, parse_y4m};
use bikedet_core::{Frame, GroundTruth, VideoError};

pub const TRUTH_FILE: &str = "truth.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const TRAILS_FILE: &str = "trails.csv";

#[derive(Debug, Clone)]
pub struct SceneInput {
    pub name: String,
    pub path: PathBuf,
}

impl SceneInput {
    /// Streams the frames from disk.
    pub fn frames(&self) -> anyhow::Result<Box<dyn Iterator<Item = Result<Frame, VideoError>>>> {
        if self.path.is_dir() {
            Ok(Box::new(load_pgm_sequence(&self.path)?))
        } else {
            let file = File::open(&self.path)
                .with_context(|| format!("opening {}", self.path.display()))?;
            Ok(Box::new(parse_y4m(BufReader::new(file))?))
        }
    }

    pub fn load_frames(&self) -> anyhow::Result<Vec<Frame>> {
        self.frames()?
            .collect::<Result<_, _>>()
            .with_context(|| format!("reading frames of {}", self.path.display()))
    }

    /// Directory holding this scene's side files.
    pub fn dir(&self) -> &Path {
        if self.path.is_dir() {
            &self.path
        } else {
            self.path.parent().unwrap_or(Path::new("."))
        }
    }
}

fn is_y4m(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e == "y4m")
}

fn numbered_pgms(dir: &Path) -> usize {
    let Ok(entries) = fs::read_dir(dir) else {
        return 0;
    };
    entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "pgm")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
        })
        .count()
}

fn name_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into())
}

/// Expands `path` into one scene or the scenes of a suite.
pub fn discover(path: &Path) -> anyhow::Result<Vec<SceneInput>> {
    if is_y4m(path) || numbered_pgms(path) > 0 {
        return Ok(vec![SceneInput {
            name: name_of(path),
            path: path.to_path_buf(),
        }]);
    }
    if !path.is_dir() {
        bail!(
            "{} is neither a scene nor a suite directory",
            path.display()
        );
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .collect();
    dirs.sort();
    let scenes: Vec<SceneInput> = dirs
        .into_iter()
        .filter(|p| is_y4m(p) || numbered_pgms(p) > 0)
        .map(|p| SceneInput {
            name: name_of(&p),
            path: p,
        })
        .collect();
    if scenes.is_empty() {
        bail!("no scenes found under {}", path.display());
    }
    Ok(scenes)
}

/// The file `name` for `scene`, under `root` when given, else in the scene
/// directory. `root` may be the file itself, a scene directory or a suite
/// directory.
pub fn side_file(root: Option<&Path>, scene: &SceneInput, name: &str, single: bool) -> PathBuf {
    match root {
        None => scene.dir().join(name),
        Some(r) if r.is_file() => r.to_path_buf(),
        Some(r) if single && r.join(name).is_file() => r.join(name),
        Some(r) => r.join(&scene.name).join(name),
    }
}

/// Reads a truth CSV. The scene length is taken from `length` or from the
/// frames stored next to the truth file; failing both, from the last frame
/// mentioned anywhere.
pub fn load_truth(
    path: &Path,
    length: Option<u32>,
    last_record_frame: u64,
) -> anyhow::Result<GroundTruth> {
    let file = File::open(path).with_context(|| format!("opening truth {}", path.display()))?;
    let length = length.or_else(|| {
        let n = numbered_pgms(path.parent().unwrap_or(Path::new(".")));
        (n > 0).then_some(n as u32)
    });
    let mut gt = read_truth(BufReader::new(file), length.unwrap_or(u32::MAX))
        .with_context(|| format!("parsing truth {}", path.display()))?;
    if length.is_none() {
        let last_truth = gt
            .tracks
            .iter()
            .filter_map(|t| t.boxes.last().map(|(f, _)| u64::from(*f)))
            .max()
            .unwrap_or(0);
        log::warn!(
            "{}: scene length unknown, scene-length check skipped",
            path.display()
        );
        gt.length = u32::try_from(last_truth.max(last_record_frame) + 1).unwrap_or(u32::MAX);
    }
    Ok(gt)
}
