use serde::{Deserialize, Serialize};

use super::model_file::{self, ModelFileError, ModelText, Section};
use super::{ClassifierError, Decision, TrainingSet};
use crate::features::{FeatureLayout, FeatureName, FeatureVector};

/// Per-feature z-score statistics taken from the training data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Linear separator `F = w . x~ - b` over standardised features `x~`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub layout: FeatureLayout,
    pub standardization: Standardization,
    pub w: Vec<f64>,
    pub b: f64,
    /// Features removed during training because they were constant.
    pub dropped: Vec<FeatureName>,
}

impl SvmModel {
    pub fn new(
        layout: FeatureLayout,
        standardization: Standardization,
        w: Vec<f64>,
        b: f64,
    ) -> Result<Self, ClassifierError> {
        let model = Self {
            layout,
            standardization,
            w,
            b,
            dropped: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let n = self.layout.len();
        if self.w.len() != n
            || self.standardization.mean.len() != n
            || self.standardization.std.len() != n
        {
            return Err(ClassifierError::Config(format!(
                "layout has {n} features but w/mean/std have {}/{}/{}",
                self.w.len(),
                self.standardization.mean.len(),
                self.standardization.std.len()
            )));
        }
        if self
            .standardization
            .std
            .iter()
            .any(|s| s.is_nan() || *s <= 0.0)
        {
            return Err(ClassifierError::Config(
                "standard deviations must be positive".into(),
            ));
        }
        if !self.b.is_finite()
            || self
                .w
                .iter()
                .chain(&self.standardization.mean)
                .any(|v| !v.is_finite())
        {
            return Err(ClassifierError::Config(
                "model coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Scales `w` and `b` by `c`. For `c > 0` every decision is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.w.iter_mut().for_each(|v| *v *= c);
        m.b *= c;
        m
    }

    pub(crate) fn to_section(&self, out: &mut Section) {
        out.push("layout", self.layout.to_string());
        out.push("mean", model_file::join_floats(&self.standardization.mean));
        out.push("std", model_file::join_floats(&self.standardization.std));
        out.push("w", model_file::join_floats(&self.w));
        out.push("b", model_file::float(self.b));
        let dropped: Vec<&str> = self.dropped.iter().map(|n| n.as_str()).collect();
        out.push("dropped", dropped.join(","));
    }

    pub(crate) fn from_section(section: &Section) -> Result<Self, ClassifierError> {
        let layout: FeatureLayout = section.get("layout")?.parse()?;
        let dropped: FeatureLayout = section.get_or("dropped", "").parse()?;
        let model = Self {
            layout,
            standardization: Standardization {
                mean: model_file::parse_floats(section.get("mean")?)?,
                std: model_file::parse_floats(section.get("std")?)?,
            },
            w: model_file::parse_floats(section.get("w")?)?,
            b: model_file::parse_float(section.get("b")?)?,
            dropped: dropped.names().to_vec(),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Fusion score: `w . x~ - b`.
pub fn svm_score(model: &SvmModel, fv: &FeatureVector) -> Result<f64, ClassifierError> {
    let mut x = model.layout.to_vector(fv)?;
    model.standardization.apply(&mut x);
    Ok(dot(&model.w, &x) - model.b)
}

/// Bicycle iff `score >= 0`; the boundary counts as bicycle.
pub fn svm_decide(score: f64) -> Decision {
    if score >= 0.0 {
        Decision::Bicycle
    } else {
        Decision::NotBicycle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// L2 penalty `lambda` in `lambda/2 |w|^2 + mean hinge loss`.
    pub regularization: f64,
    /// Cap on coordinate-descent sweeps over the data, summed over all
    /// bias steps.
    pub budget: usize,
    /// Relative duality gap / objective tolerance.
    pub tolerance: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            regularization: 1e-3,
            budget: 5000,
            tolerance: 1e-4,
        }
    }
}

/// Trains a linear SVM on the features in `layout`.
///
/// Samples lacking a feature of the layout (speed on a first sighting) are
/// skipped. Features are z-scored with training statistics; constant
/// features are dropped and listed in [`SvmModel::dropped`]. The primal
/// objective `lambda/2 |w|^2 + (1/n) sum max(0, 1 - y (w.x~ - b))` with an
/// unpenalised bias is minimised by dual coordinate descent over `w` for a
/// fixed bias, nested in a bisection on the bias driven by its derivative.
pub fn train_svm(
    data: &TrainingSet,
    layout: &FeatureLayout,
    params: &SvmParams,
) -> Result<SvmModel, ClassifierError> {
    data.check_nonempty()?;
    if params.regularization.is_nan() || params.regularization <= 0.0 || params.budget == 0 {
        return Err(ClassifierError::Config(
            "regularization must be positive and budget non-zero".into(),
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (set, y) in [(&data.positives, 1.0), (&data.negatives, -1.0)] {
        let before = rows.len();
        rows.extend(set.iter().filter_map(|fv| layout.to_vector(fv).ok()));
        labels.resize(rows.len(), y);
        if rows.len() == before {
            return Err(ClassifierError::EmptyClass(if y > 0.0 {
                "positive"
            } else {
                "negative"
            }));
        }
    }

    let n = rows.len() as f64;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut stats = Standardization::default();
    for (j, &name) in layout.names().iter().enumerate() {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("feature {name} is constant in the training data; dropped");
            dropped.push(name);
        } else {
            kept.push((j, name));
            stats.mean.push(mean);
            stats.std.push(std);
        }
    }
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut x: Vec<f64> = kept.iter().map(|&(j, _)| r[j]).collect();
            stats.apply(&mut x);
            x
        })
        .collect();

    let (w, b) = Solver::new(&xs, &labels, params).solve();
    Ok(SvmModel {
        layout: FeatureLayout::new(kept.into_iter().map(|(_, n)| n).collect()),
        standardization: stats,
        w,
        b,
        dropped,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Solver<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    sq_norms: Vec<f64>,
    lambda: f64,
    c: f64,
    tolerance: f64,
    epochs_left: usize,
    alpha: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(xs: &'a [Vec<f64>], ys: &'a [f64], params: &SvmParams) -> Self {
        let n = xs.len();
        let dim = xs.first().map_or(0, Vec::len);
        Self {
            xs,
            ys,
            sq_norms: xs.iter().map(|x| dot(x, x)).collect(),
            lambda: params.regularization,
            c: 1.0 / (params.regularization * n as f64),
            tolerance: params.tolerance,
            epochs_left: params.budget,
            alpha: vec![0.0; n],
            w: vec![0.0; dim],
        }
    }

    /// Primal objective in the lambda form.
    fn primal(&self, w: &[f64], b: f64) -> f64 {
        let hinge: f64 = self
            .xs
            .iter()
            .zip(self.ys)
            .map(|(x, y)| (1.0 - y * (dot(w, x) - b)).max(0.0))
            .sum();
        0.5 * self.lambda * dot(w, w) + hinge / self.xs.len() as f64
    }

    /// Dual coordinate descent on `w` with the bias fixed. Returns the
    /// derivative of the optimal objective with respect to `b`.
    fn solve_fixed_bias(&mut self, b: f64) -> f64 {
        let n = self.xs.len();
        while self.epochs_left > 0 {
            self.epochs_left -= 1;
            for i in 0..n {
                let y = self.ys[i];
                // hinge_i = max(0, offset - y w.x) with offset = 1 + y b
                let offset = 1.0 + y * b;
                let q = self.sq_norms[i];
                let old = self.alpha[i];
                let new = if q <= 0.0 {
                    if offset > 0.0 {
                        self.c
                    } else {
                        0.0
                    }
                } else {
                    let grad = y * dot(&self.w, &self.xs[i]) - offset;
                    (old - grad / q).clamp(0.0, self.c)
                };
                if new != old {
                    let step = (new - old) * y;
                    for (wj, xj) in self.w.iter_mut().zip(&self.xs[i]) {
                        *wj += step * xj;
                    }
                    self.alpha[i] = new;
                }
            }
            // Duality gap of the fixed-bias subproblem (C form).
            let half_norm = 0.5 * dot(&self.w, &self.w);
            let mut primal = half_norm;
            let mut dual = -half_norm;
            for i in 0..n {
                let y = self.ys[i];
                let offset = 1.0 + y * b;
                primal += self.c * (offset - y * dot(&self.w, &self.xs[i])).max(0.0);
                dual += offset * self.alpha[i];
            }
            if primal - dual <= self.tolerance * primal.abs().max(1e-12) {
                break;
            }
        }
        self.lambda
            * self
                .alpha
                .iter()
                .zip(self.ys)
                .map(|(a, y)| a * y)
                .sum::<f64>()
    }

    fn solve(mut self) -> (Vec<f64>, f64) {
        let radius = self.sq_norms.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt();
        let bound = radius * (2.0 / self.lambda).sqrt() + 1.0;
        let (mut lo, mut hi) = (-bound, bound);

        let mut best_w = self.w.clone();
        let mut best_b = 0.0;
        let mut best_obj = self.primal(&best_w, best_b);
        let mut b = 0.0;
        loop {
            let slope = self.solve_fixed_bias(b);
            let obj = self.primal(&self.w, b);
            if obj < best_obj {
                best_obj = obj;
                best_w.clone_from(&self.w);
                best_b = b;
            }
            if slope > 0.0 {
                hi = b;
            } else if slope < 0.0 {
                lo = b;
            } else {
                break;
            }
            if hi - lo <= 1e-7 * (1.0 + b.abs()) || self.epochs_left == 0 {
                break;
            }
            b = 0.5 * (lo + hi);
        }
        (best_w, best_b)
    }
}

/// SVM pair used by the pipeline: one model with speed, one without for
/// objects seen for the first time.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFuser {
    pub full: SvmModel,
    pub first_sighting: SvmModel,
}

impl SvmFuser {
    /// Trains the full-layout model on samples that carry speed and the
    /// speed-free model on all samples.
    pub fn train(data: &TrainingSet, params: &SvmParams) -> Result<Self, ClassifierError> {
        Ok(Self {
            full: train_svm(data, &FeatureLayout::full(), params)?,
            first_sighting: train_svm(data, &FeatureLayout::speed_free(), params)?,
        })
    }

    pub fn model_for(&self, fv: &FeatureVector) -> &SvmModel {
        if fv.speed.is_some() {
            &self.full
        } else {
            &self.first_sighting
        }
    }

    pub fn score(&self, fv: &FeatureVector) -> Result<f64, ClassifierError> {
        svm_score(self.model_for(fv), fv)
    }

    pub fn decide(&self, fv: &FeatureVector) -> Result<Decision, ClassifierError> {
        self.score(fv).map(svm_decide)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        self.full.validate()?;
        self.first_sighting.validate()?;
        if self.first_sighting.layout.contains(FeatureName::Speed) {
            return Err(ClassifierError::Config(
                "first-sighting SVM layout must not use speed".into(),
            ));
        }
        Ok(())
    }

    pub fn to_model_text(&self) -> String {
        let mut text = ModelText::new(model_file::SVM_FORMAT);
        self.full.to_section(text.section("full"));
        self.first_sighting
            .to_section(text.section("first_sighting"));
        text.render()
    }

    pub fn from_model_text(text: &str) -> Result<Self, ClassifierError> {
        let parsed = ModelText::parse(text)?;
        parsed.expect_format(model_file::SVM_FORMAT)?;
        let section = |name: &str| {
            parsed
                .find_section(name)
                .ok_or_else(|| ModelFileError::Format(format!("missing [{name}] section")))
        };
        let fuser = Self {
            full: SvmModel::from_section(section("full")?)?,
            first_sighting: SvmModel::from_section(section("first_sighting")?)?,
        };
        fuser.validate()?;
        Ok(fuser)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv1(x: f64) -> FeatureVector {
        FeatureVector {
            fg_count: 0,
            width: 1,
            height: 1,
            aspect_ratio: x,
            duty: 0.5,
            duty_upper: 0.5,
            duty_lower: 0.5,
            speed: None,
        }
    }

    fn one_d() -> FeatureLayout {
        FeatureLayout::new(vec![FeatureName::AspectRatio])
    }

    #[test]
    fn score_arithmetic() {
        let layout = FeatureLayout::new(vec![FeatureName::Width, FeatureName::Height]);
        let m = SvmModel::new(layout, Standardization::identity(2), vec![1.0, -1.0], 0.5).unwrap();
        let mut fv = fv1(1.0);
        fv.width = 2;
        fv.height = 1;
        assert_eq!(svm_score(&m, &fv).unwrap(), 0.5);
        fv.width = 3;
        fv.height = 2;
        // 3 - 2 = 1 != b; on the plane when w.x == b
        let on_plane = SvmModel {
            b: 1.0,
            ..m.clone()
        };
        assert_eq!(svm_score(&on_plane, &fv).unwrap(), 0.0);
        let zero = SvmModel {
            w: vec![0.0, 0.0],
            b: 0.0,
            ..m
        };
        assert_eq!(svm_score(&zero, &fv).unwrap(), 0.0);
    }

    #[test]
    fn decision_boundary_inclusive() {
        assert_eq!(svm_decide(0.5), Decision::Bicycle);
        assert_eq!(svm_decide(0.0), Decision::Bicycle);
        assert_eq!(svm_decide(-0.0), Decision::Bicycle);
        assert_eq!(svm_decide(-0.01), Decision::NotBicycle);
    }

    #[test]
    fn missing_speed_is_layout_error() {
        let m = SvmModel::new(
            FeatureLayout::full(),
            Standardization::identity(8),
            vec![0.0; 8],
            0.0,
        )
        .unwrap();
        assert!(matches!(
            svm_score(&m, &fv1(1.0)),
            Err(ClassifierError::Layout(_))
        ));
    }

    #[test]
    fn symmetric_one_d() {
        let data = TrainingSet::new(vec![fv1(1.0); 10], vec![fv1(-1.0); 10]);
        let m = train_svm(&data, &one_d(), &SvmParams::default()).unwrap();
        assert!(m.w[0] > 0.0);
        for fv in &data.positives {
            assert_eq!(svm_decide(svm_score(&m, fv).unwrap()), Decision::Bicycle);
        }
        for fv in &data.negatives {
            assert_eq!(svm_decide(svm_score(&m, fv).unwrap()), Decision::NotBicycle);
        }
    }

    #[test]
    fn identical_classes_do_not_crash() {
        let data = TrainingSet::new(vec![fv1(2.0); 6], vec![fv1(2.0); 6]);
        let m = train_svm(&data, &one_d(), &SvmParams::default()).unwrap();
        assert_eq!(m.dropped, vec![FeatureName::AspectRatio]);
        assert!(m.layout.is_empty());
        let correct = data
            .positives
            .iter()
            .filter(|fv| svm_decide(svm_score(&m, fv).unwrap()).is_bicycle())
            .count()
            + data
                .negatives
                .iter()
                .filter(|fv| !svm_decide(svm_score(&m, fv).unwrap()).is_bicycle())
                .count();
        assert_eq!(correct, 6);
    }

    #[test]
    fn empty_class() {
        let data = TrainingSet::new(vec![], vec![fv1(1.0)]);
        assert!(matches!(
            train_svm(&data, &one_d(), &SvmParams::default()),
            Err(ClassifierError::EmptyClass("positive"))
        ));
        // every positive lacks speed, so none is usable for the full layout
        let data = TrainingSet::new(vec![fv1(1.0)], vec![fv1(1.0).with_speed(1.0)]);
        assert!(matches!(
            train_svm(&data, &FeatureLayout::full(), &SvmParams::default()),
            Err(ClassifierError::EmptyClass("positive"))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let pos: Vec<_> = (0..30).map(|i| fv1(1.0 + (i % 7) as f64 * 0.3)).collect();
        let neg: Vec<_> = (0..60).map(|i| fv1(0.5 - (i % 5) as f64 * 0.2)).collect();
        let data = TrainingSet::new(pos, neg);
        let a = train_svm(&data, &one_d(), &SvmParams::default()).unwrap();
        let b = train_svm(&data, &one_d(), &SvmParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_text_round_trip() {
        let pos: Vec<_> = (0..20)
            .map(|i| fv1(1.0 + i as f64 * 0.1).with_speed(2.0 + i as f64 * 0.01))
            .collect();
        let neg: Vec<_> = (0..40)
            .map(|i| fv1(0.2 + i as f64 * 0.01).with_speed(5.0 + i as f64 * 0.1))
            .collect();
        let fuser = SvmFuser::train(&TrainingSet::new(pos, neg), &SvmParams::default()).unwrap();
        let text = fuser.to_model_text();
        assert_eq!(SvmFuser::from_model_text(&text).unwrap(), fuser);
    }
}
