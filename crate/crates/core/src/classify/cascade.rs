use super::model_file::{self, ModelFileError, ModelText};
use super::{ClassifierError, Decision, TrainingSet};
use crate::features::{FeatureName, FeatureVector};

/// Accepts a vector when `lo <= value <= hi` for one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeStage {
    pub feature: FeatureName,
    pub lo: f64,
    pub hi: f64,
}

impl CascadeStage {
    pub fn new(feature: FeatureName, lo: f64, hi: f64) -> Self {
        Self { feature, lo, hi }
    }

    /// A vector missing the stage's feature passes.
    pub fn passes(&self, fv: &FeatureVector) -> bool {
        fv.get(self.feature)
            .map_or(true, |v| self.lo <= v && v <= self.hi)
    }
}

/// Ordered interval tests; a vector is a bicycle when it passes every one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cascade {
    pub stages: Vec<CascadeStage>,
}

/// Stage order used when none is given: shape first, speed last.
pub const DEFAULT_STAGE_ORDER: [FeatureName; 8] = [
    FeatureName::Width,
    FeatureName::Height,
    FeatureName::AspectRatio,
    FeatureName::FgCount,
    FeatureName::DutyCycle,
    FeatureName::DutyUpper,
    FeatureName::DutyLower,
    FeatureName::Speed,
];

/// Minimum share of the surviving negatives a stage must reject to be kept.
const MIN_REJECTION: f64 = 0.01;

fn check_order(features: impl IntoIterator<Item = FeatureName>) -> Result<(), ClassifierError> {
    let mut seen_speed = false;
    for f in features {
        if f == FeatureName::Speed {
            seen_speed = true;
        } else if seen_speed && f.is_shape() {
            return Err(ClassifierError::Config(format!(
                "shape feature {f} must come before speed in the cascade"
            )));
        }
    }
    Ok(())
}

impl Cascade {
    pub fn new(stages: Vec<CascadeStage>) -> Result<Self, ClassifierError> {
        let c = Self { stages };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        check_order(self.stages.iter().map(|s| s.feature))?;
        for s in &self.stages {
            if s.lo.is_nan() || s.hi.is_nan() || s.lo > s.hi {
                return Err(ClassifierError::Config(format!(
                    "stage {} has an empty interval [{}, {}]",
                    s.feature, s.lo, s.hi
                )));
            }
        }
        Ok(())
    }

    pub fn to_model_text(&self) -> String {
        let mut text = ModelText::new(model_file::CASCADE_FORMAT);
        for s in &self.stages {
            text.root.push(
                "stage",
                format!(
                    "{} {} {}",
                    s.feature,
                    model_file::float(s.lo),
                    model_file::float(s.hi)
                ),
            );
        }
        text.render()
    }

    pub fn from_model_text(text: &str) -> Result<Self, ClassifierError> {
        let parsed = ModelText::parse(text)?;
        parsed.expect_format(model_file::CASCADE_FORMAT)?;
        let mut stages = Vec::new();
        for line in parsed.root.get_all("stage") {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [name, lo, hi] = parts[..] else {
                return Err(ModelFileError::Format(format!("bad stage line {line:?}")).into());
            };
            stages.push(CascadeStage::new(
                name.parse()?,
                model_file::parse_float(lo)?,
                model_file::parse_float(hi)?,
            ));
        }
        Self::new(stages)
    }
}

/// Runs the stages in order and stops at the first rejection. Returns the
/// decision and how many stages were evaluated.
pub fn cascade_decide(cascade: &Cascade, fv: &FeatureVector) -> (Decision, usize) {
    for (i, stage) in cascade.stages.iter().enumerate() {
        if !stage.passes(fv) {
            return (Decision::NotBicycle, i + 1);
        }
    }
    (Decision::Bicycle, cascade.stages.len())
}

/// Calibrates one stage per feature in `stage_order`.
///
/// Each stage takes the narrowest interval that keeps at least
/// `ceil(per_stage_tpr * m)` of the `m` positives still alive, ties going to
/// the lower interval. A stage rejecting under 1% of the negatives still
/// alive is dropped. Vectors without a feature are not used to fit its stage
/// and pass it.
pub fn calibrate_cascade(
    data: &TrainingSet,
    per_stage_tpr: f64,
    stage_order: &[FeatureName],
) -> Result<Cascade, ClassifierError> {
    if !(per_stage_tpr > 0.5 && per_stage_tpr <= 1.0) {
        return Err(ClassifierError::Config(format!(
            "per-stage true-positive rate must be in (0.5, 1], got {per_stage_tpr}"
        )));
    }
    check_order(stage_order.iter().copied())?;
    data.check_nonempty()?;

    let mut positives: Vec<&FeatureVector> = data.positives.iter().collect();
    let mut negatives: Vec<&FeatureVector> = data.negatives.iter().collect();
    let mut stages = Vec::new();

    for &feature in stage_order {
        let mut values: Vec<f64> = positives.iter().filter_map(|fv| fv.get(feature)).collect();
        if values.is_empty() {
            log::debug!("no positive carries {feature}; stage skipped");
            continue;
        }
        values.sort_by(f64::total_cmp);
        let m = values.len();
        // The epsilon absorbs products like 0.99 * 100 landing just above 99.
        let keep = ((per_stage_tpr * m as f64 - 1e-9).ceil() as usize).clamp(1, m);
        let start = (0..=m - keep)
            .min_by(|&a, &b| {
                let wa = values[a + keep - 1] - values[a];
                let wb = values[b + keep - 1] - values[b];
                wa.total_cmp(&wb).then(a.cmp(&b))
            })
            .ok_or_else(|| ClassifierError::Calibration(format!("no interval for {feature}")))?;
        let stage = CascadeStage::new(feature, values[start], values[start + keep - 1]);

        let rejected = negatives.iter().filter(|fv| !stage.passes(fv)).count();
        if negatives.is_empty() || (rejected as f64) < MIN_REJECTION * negatives.len() as f64 {
            log::debug!(
                "stage {feature} rejects {rejected} of {} negatives; dropped",
                negatives.len()
            );
            continue;
        }
        positives.retain(|fv| stage.passes(fv));
        negatives.retain(|fv| stage.passes(fv));
        stages.push(stage);
    }
    Ok(Cascade { stages })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(width: u32, height: u32) -> FeatureVector {
        FeatureVector {
            fg_count: width * height / 2,
            width,
            height,
            aspect_ratio: width as f64 / height as f64,
            duty: 0.5,
            duty_upper: 0.5,
            duty_lower: 0.5,
            speed: None,
        }
    }

    fn cascade(stages: &[(FeatureName, f64, f64)]) -> Cascade {
        Cascade::new(
            stages
                .iter()
                .map(|&(f, lo, hi)| CascadeStage::new(f, lo, hi))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn decide_examples() {
        let c = cascade(&[
            (FeatureName::Width, 10.0, 30.0),
            (FeatureName::AspectRatio, 0.0, 2.0),
        ]);
        assert_eq!(cascade_decide(&c, &fv(20, 15)), (Decision::Bicycle, 2));
        assert_eq!(cascade_decide(&c, &fv(40, 15)), (Decision::NotBicycle, 1));
        assert_eq!(cascade_decide(&c, &fv(28, 10)), (Decision::NotBicycle, 2));
        assert_eq!(
            cascade_decide(&Cascade::default(), &fv(1, 1)),
            (Decision::Bicycle, 0)
        );
    }

    #[test]
    fn unset_speed_passes() {
        let c = cascade(&[
            (FeatureName::Width, 0.0, 100.0),
            (FeatureName::Speed, 1.0, 2.0),
        ]);
        assert_eq!(cascade_decide(&c, &fv(5, 5)), (Decision::Bicycle, 2));
        assert_eq!(
            cascade_decide(&c, &fv(5, 5).with_speed(3.0)),
            (Decision::NotBicycle, 2)
        );
    }

    #[test]
    fn shape_after_speed_is_rejected() {
        let data = TrainingSet::new(vec![fv(10, 10)], vec![fv(30, 10)]);
        let err = calibrate_cascade(&data, 0.99, &[FeatureName::Speed, FeatureName::Width]);
        assert!(matches!(err, Err(ClassifierError::Config(_))));
        let err = Cascade::new(vec![
            CascadeStage::new(FeatureName::Speed, 0.0, 1.0),
            CascadeStage::new(FeatureName::AspectRatio, 0.0, 1.0),
        ]);
        assert!(matches!(err, Err(ClassifierError::Config(_))));
        // duty-cycle features may follow speed
        calibrate_cascade(&data, 0.99, &[FeatureName::Speed, FeatureName::DutyCycle]).unwrap();
    }

    #[test]
    fn tpr_range() {
        let data = TrainingSet::new(vec![fv(10, 10)], vec![fv(30, 10)]);
        for bad in [0.5, 0.2, 1.01, f64::NAN] {
            assert!(matches!(
                calibrate_cascade(&data, bad, &DEFAULT_STAGE_ORDER),
                Err(ClassifierError::Config(_))
            ));
        }
    }

    #[test]
    fn full_tpr_keeps_every_positive() {
        let pos: Vec<_> = (0..50).map(|i| fv(10 + i % 9, 20 + i % 5)).collect();
        let neg: Vec<_> = (0..80).map(|i| fv(5 + i % 40, 8 + i % 30)).collect();
        let c = calibrate_cascade(
            &TrainingSet::new(pos.clone(), neg),
            1.0,
            &DEFAULT_STAGE_ORDER,
        )
        .unwrap();
        assert!(pos.iter().all(|p| cascade_decide(&c, p).0.is_bicycle()));
    }

    #[test]
    fn wide_negatives_fall_at_width_stage() {
        let pos: Vec<_> = (0..40).map(|i| fv(10 + i % 10, 20)).collect();
        let neg: Vec<_> = pos.iter().map(|p| fv(p.width * 3, 20)).collect();
        let c = calibrate_cascade(
            &TrainingSet::new(pos, neg.clone()),
            0.99,
            &DEFAULT_STAGE_ORDER,
        )
        .unwrap();
        assert_eq!(c.stages[0].feature, FeatureName::Width);
        assert_eq!(c.stages.len(), 1);
        for n in &neg {
            assert_eq!(cascade_decide(&c, n), (Decision::NotBicycle, 1));
        }
    }

    #[test]
    fn tightest_window_and_tie_break() {
        // 100 positives: 99 clustered, one far outlier; tpr 0.99 cuts it.
        let mut pos: Vec<_> = (0..99).map(|i| fv(10 + i % 3, 20)).collect();
        pos.push(fv(200, 20));
        let neg = vec![fv(300, 20); 10];
        let c =
            calibrate_cascade(&TrainingSet::new(pos, neg), 0.99, &[FeatureName::Width]).unwrap();
        assert_eq!(
            c.stages,
            vec![CascadeStage::new(FeatureName::Width, 10.0, 12.0)]
        );

        // Equal-width windows [1,2] and [2,3]: the lower one wins.
        let pos = vec![fv(1, 1), fv(2, 1), fv(3, 1)];
        let neg = vec![fv(9, 1)];
        let c = calibrate_cascade(&TrainingSet::new(pos, neg), 0.6, &[FeatureName::Width]).unwrap();
        assert_eq!((c.stages[0].lo, c.stages[0].hi), (1.0, 2.0));
    }

    #[test]
    fn model_text_round_trip() {
        let c = cascade(&[
            (FeatureName::Width, 10.5, 30.25),
            (FeatureName::DutyLower, 0.1, f64::INFINITY),
            (FeatureName::Speed, 0.0, 3.0),
        ]);
        assert_eq!(Cascade::from_model_text(&c.to_model_text()).unwrap(), c);
    }
}
