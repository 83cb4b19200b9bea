use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use bikedet_core::classify::{calibrate_cascade, SvmFuser};
use bikedet_core::eval::{label_observations, training_set, LabeledFeatures};
use bikedet_core::formats::{
    read_features, read_records, write_features, write_records, write_sweep, write_trails,
    write_truth,
};
use bikedet_core::pipeline::{collect_observations, Pipeline};
use bikedet_core::synth::{full_standard_suite, standard_suite, training_suite, Scene};
use bikedet_core::video::{encode_mask_pgm, write_frame_rate, write_pgm};
use bikedet_core::{
    sweep_tcof, FrameRate, Fuser, MetricsReport, Profile, Rect, SceneConfig, SceneMatch,
    TimingSummary,
};

use crate::config::ConfigFile;
use crate::scenes::{self, SceneInput, RECORDS_FILE, TRAILS_FILE, TRUTH_FILE};
use crate::{BenchArgs, DetectArgs, EvalArgs, FeaturesArgs, SynthArgs, TrainArgs, UsageError};

fn required<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| UsageError(format!("missing {flag} (flag or config file)")).into())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes to `out` when given, else to standard output.
fn with_output(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<Fuser> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    Fuser::parse_model(&text).with_context(|| format!("loading model {}", path.display()))
}

fn suite_configs(profile: &str) -> anyhow::Result<Vec<SceneConfig>> {
    Ok(match profile {
        "all" => full_standard_suite(),
        "training" => training_suite(),
        other => standard_suite(other.parse::<Profile>().map_err(UsageError)?),
    })
}

pub fn synth(args: SynthArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let profile = required(args.profile.or(file.io.profile.clone()), "--profile")?;
    let out = required(args.out.or(file.io.out.clone()), "--out")?;
    let only = args.scene.or(file.io.scene.clone());
    let mut configs = suite_configs(&profile)?;
    if let Some(name) = &only {
        configs.retain(|c| &c.name == name);
        if configs.is_empty() {
            return Err(UsageError(format!("no scene named {name:?} in profile {profile}")).into());
        }
    }
    for cfg in configs {
        let dir = out.join(&cfg.name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let scene = Scene::new(cfg.clone())?;
        for t in 0..scene.len() {
            write_pgm(&scene.frame(t), dir.join(format!("{t:06}.pgm")))?;
        }
        write_frame_rate(&dir, FrameRate::DEFAULT)?;
        let mut w = create(&dir.join(TRUTH_FILE))?;
        write_truth(&mut w, &scene.ground_truth())?;
        w.flush()?;
        fs::write(dir.join("scene.toml"), toml::to_string(&cfg)?)?;
        log::info!(
            "{}: {} frames, {} actors",
            cfg.name,
            cfg.length,
            cfg.actors.len()
        );
    }
    Ok(())
}

fn input_scenes(flag: Option<PathBuf>, file: &ConfigFile) -> anyhow::Result<Vec<SceneInput>> {
    let input = required(flag.or(file.io.input.clone()), "--in")?;
    scenes::discover(&input)
}

pub fn features(args: FeaturesArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let inputs = input_scenes(args.input, file)?;
    let out = required(args.out.or(file.io.out.clone()), "--out")?;
    let truth_root = args.truth.or(file.eval.truth.clone());
    let cfg = file.pipeline();
    let single = inputs.len() == 1;
    let mut samples: Vec<LabeledFeatures> = Vec::new();
    for scene in &inputs {
        let observations = collect_observations(scene.frames()?, &cfg)?;
        let truth_path = scenes::side_file(truth_root.as_deref(), scene, TRUTH_FILE, single);
        let last = observations.last().map_or(0, |o| o.frame);
        let gt = scenes::load_truth(&truth_path, file.eval.length, last)?;
        let labelled = label_observations(&observations, &gt, file.eval.overlap_min);
        log::info!("{}: {} labelled regions", scene.name, labelled.len());
        samples.extend(labelled);
    }
    let mut w = create(&out)?;
    write_features(&mut w, &samples)?;
    w.flush()?;
    Ok(())
}

pub fn train(args: TrainArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let method = required(args.method.or(file.classifier.method.clone()), "--method")?;
    if !matches!(method.as_str(), "svm" | "cascade") {
        return Err(UsageError(format!(
            "unknown method {method:?} (expected svm or cascade)"
        ))
        .into());
    }
    let corpus = if args.corpus.is_empty() {
        file.classifier.corpus.clone()
    } else {
        args.corpus
    };
    if corpus.is_empty() {
        return Err(UsageError("missing --corpus (flag or config file)".into()).into());
    }
    let out = required(args.out.or(file.io.out.clone()), "--out")?;

    let mut samples = Vec::new();
    for path in &corpus {
        let f = File::open(path).with_context(|| format!("opening corpus {}", path.display()))?;
        samples.extend(
            read_features(BufReader::new(f))
                .with_context(|| format!("parsing {}", path.display()))?,
        );
    }
    let set = training_set(&samples);
    log::info!(
        "training on {} positives, {} negatives",
        set.positives.len(),
        set.negatives.len()
    );

    let mut classifier = file.classifier.clone();
    if let Some(r) = args.regularization {
        classifier.regularization = r;
    }
    if let Some(t) = args.per_stage_tpr {
        classifier.per_stage_tpr = t;
    }
    let fuser = match method.as_str() {
        "svm" => Fuser::Svm(SvmFuser::train(&set, &classifier.svm_params())?),
        "cascade" => Fuser::Cascade(calibrate_cascade(
            &set,
            classifier.per_stage_tpr,
            &classifier.stage_order,
        )?),
        _ => unreachable!("method checked above"),
    };
    let text = fuser
        .to_model_text()
        .expect("trained fusers have a model file");
    let mut w = create(&out)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Mask as 0/255 with region boxes outlined in mid grey.
fn annotated_mask(pipeline: &Pipeline, boxes: &[Rect]) -> Vec<u8> {
    let mask = pipeline.mask();
    let mut bytes = encode_mask_pgm(mask);
    let header = bytes.len() - (mask.width() * mask.height()) as usize;
    let w = mask.width() as usize;
    for b in boxes.iter().filter(|b| b.w > 0 && b.h > 0) {
        let (x1, y1) = (b.right() - 1, b.bottom() - 1);
        for x in b.x..=x1 {
            bytes[header + b.y as usize * w + x as usize] = 128;
            bytes[header + y1 as usize * w + x as usize] = 128;
        }
        for y in b.y..=y1 {
            bytes[header + y as usize * w + b.x as usize] = 128;
            bytes[header + y as usize * w + x1 as usize] = 128;
        }
    }
    bytes
}

pub fn detect(args: DetectArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let inputs = input_scenes(args.input, file)?;
    let model = required(args.model.or(file.classifier.model.clone()), "--model")?;
    let out = required(args.out.or(file.io.out.clone()), "--out")?;
    let masks = args.masks || file.io.masks;
    let fuser = load_model(&model)?;
    let cfg = file.pipeline();
    let single = inputs.len() == 1;

    for scene in &inputs {
        let dir = if single {
            out.clone()
        } else {
            out.join(&scene.name)
        };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut pipeline = Pipeline::new(cfg.clone(), fuser.clone())?;
        for frame in scene.frames()? {
            let frame = frame?;
            let observations = pipeline.process(&frame)?;
            if masks && frame.index() >= u64::from(cfg.background.warmup_frames) {
                let boxes: Vec<Rect> = observations.iter().map(|o| o.region.bbox()).collect();
                let path = dir.join("masks").join(format!("{:06}.pgm", frame.index()));
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, annotated_mask(&pipeline, &boxes))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        let output = pipeline.finish();
        let mut w = create(&dir.join(RECORDS_FILE))?;
        write_records(&mut w, &output.records)?;
        w.flush()?;
        let mut w = create(&dir.join(TRAILS_FILE))?;
        write_trails(&mut w, &output.records)?;
        w.flush()?;
        if let Some(t) = TimingSummary::from_durations(&output.frame_times) {
            log::info!(
                "{}: {} records, median {:.2} ms, p95 {:.2} ms",
                scene.name,
                output.records.len(),
                t.median_ms,
                t.p95_ms
            );
        }
    }
    Ok(())
}

/// Record files under `root`: the file itself, `root/records.csv`, or one
/// per scene subdirectory.
fn record_sets(root: &Path) -> anyhow::Result<Vec<(String, PathBuf)>> {
    if root.is_file() {
        return Ok(vec![(String::new(), root.to_path_buf())]);
    }
    if root.join(RECORDS_FILE).is_file() {
        return Ok(vec![(String::new(), root.join(RECORDS_FILE))]);
    }
    let mut sets: Vec<(String, PathBuf)> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(RECORDS_FILE).is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                p.join(RECORDS_FILE),
            )
        })
        .collect();
    sets.sort();
    if sets.is_empty() {
        bail!("no {RECORDS_FILE} found under {}", root.display());
    }
    Ok(sets)
}

/// Truth file for `scene`. Records written for a lone scene carry no scene
/// name; they pair with `root/truth.csv` or with the only scene of a suite.
fn truth_path(root: &Path, scene: &str) -> anyhow::Result<PathBuf> {
    if root.is_file() {
        return Ok(root.to_path_buf());
    }
    if root.join(TRUTH_FILE).is_file() {
        return Ok(root.join(TRUTH_FILE));
    }
    if !scene.is_empty() {
        return Ok(root.join(scene).join(TRUTH_FILE));
    }
    let candidates: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(Result::ok)
        .map(|e| e.path().join(TRUTH_FILE))
        .filter(|p| p.is_file())
        .collect();
    match candidates.as_slice() {
        [only] => Ok(only.clone()),
        [] => bail!("no {TRUTH_FILE} under {}", root.display()),
        _ => Err(UsageError(format!(
            "{} holds several scenes; point --truth at the one matching the records",
            root.display()
        ))
        .into()),
    }
}

pub fn eval(args: EvalArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let records_root = required(args.records.or(file.eval.records.clone()), "--records")?;
    let truth_root = required(args.truth.or(file.eval.truth.clone()), "--truth")?;
    let sweep = args.sweep || file.eval.sweep;
    let mut eval_cfg = file.eval.eval_config();
    if let Some(o) = args.overlap_min {
        eval_cfg.overlap_min = o;
    }
    let length = args.length.or(file.eval.length);

    let mut matches = Vec::new();
    for (scene, path) in record_sets(&records_root)? {
        let trails = path.with_file_name(TRAILS_FILE);
        let records = read_records(
            BufReader::new(
                File::open(&path).with_context(|| format!("opening {}", path.display()))?,
            ),
            BufReader::new(
                File::open(&trails).with_context(|| format!("opening {}", trails.display()))?,
            ),
        )
        .with_context(|| format!("parsing {}", path.display()))?;
        let last = records.iter().map(|r| r.last_frame).max().unwrap_or(0);
        let gt = scenes::load_truth(&truth_path(&truth_root, &scene)?, length, last)?;
        matches.push(
            SceneMatch::new(&records, &gt, &eval_cfg).with_context(|| format!("scene {scene}"))?,
        );
    }
    let thresholds = if sweep {
        file.eval.thresholds.clone()
    } else {
        vec![args.t_cof.unwrap_or(file.tracking.t_cof)]
    };
    let reports: Vec<MetricsReport> = sweep_tcof(&matches, &thresholds)?;
    with_output(args.out.as_deref(), |w| Ok(write_sweep(w, &reports)?))
}

pub fn bench(args: BenchArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let inputs = input_scenes(args.input, file)?;
    let model = required(args.model.or(file.classifier.model.clone()), "--model")?;
    let fuser = load_model(&model)?;
    let cfg = file.pipeline();

    let mut rows: Vec<(String, TimingSummary)> = Vec::new();
    let mut all: Vec<Duration> = Vec::new();
    for scene in &inputs {
        let frames = scene.load_frames()?;
        let mut pipeline = Pipeline::new(cfg.clone(), fuser.clone())?;
        for frame in &frames {
            pipeline.process(frame)?;
        }
        let times = pipeline.finish().frame_times;
        if let Some(t) = TimingSummary::from_durations(&times) {
            rows.push((scene.name.clone(), t));
        }
        all.extend(times);
    }
    if let Some(t) = TimingSummary::from_durations(&all) {
        rows.push(("all".into(), t));
    }
    with_output(args.out.as_deref(), |w| {
        writeln!(w, "scene,method,frames,median_ms,p95_ms")?;
        for (name, t) in &rows {
            writeln!(
                w,
                "{name},{},{},{:.3},{:.3}",
                fuser.method_name(),
                t.frames,
                t.median_ms,
                t.p95_ms
            )?;
        }
        Ok(())
    })
}
