use bikedet_core::classify::{cascade_decide, svm_decide, svm_score, Cascade, CascadeStage};
use bikedet_core::classify::{Standardization, SvmModel};
use bikedet_core::features::FeatureLayout;
use bikedet_core::segment::label_components;
use bikedet_core::{
    connected_components, extract_static, fuse_regions, train_svm, DetectionRecord, FeatureName,
    FeatureVector, ForegroundMask, SvmParams, TrainingSet,
};
use proptest::prelude::*;

fn mask_strategy() -> impl Strategy<Value = ForegroundMask> {
    (1u32..=16, 1u32..=16).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), (w * h) as usize)
            .prop_map(move |bits| ForegroundMask::from_bits(w, h, bits))
    })
}

fn vector_strategy() -> impl Strategy<Value = FeatureVector> {
    (
        1u32..60,
        1u32..60,
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..1.0,
        prop::option::of(0.0f64..10.0),
    )
        .prop_map(
            |(width, height, duty, duty_upper, duty_lower, speed)| FeatureVector {
                fg_count: ((width * height) as f64 * duty) as u32,
                width,
                height,
                aspect_ratio: f64::from(width) / f64::from(height),
                duty,
                duty_upper,
                duty_lower,
                speed,
            },
        )
}

fn stage_strategy() -> impl Strategy<Value = CascadeStage> {
    (0..FeatureName::ALL.len(), -5.0f64..40.0, 0.0f64..40.0)
        .prop_map(|(i, lo, span)| CascadeStage::new(FeatureName::ALL[i], lo, lo + span))
}

proptest! {
    #[test]
    fn components_are_disjoint_foreground_and_cover_the_mask(mask in mask_strategy()) {
        let (labels, n) = label_components(&mask);
        for (bit, label) in mask.bits().iter().zip(&labels) {
            prop_assert_eq!(*bit, *label != 0);
        }
        let regions = connected_components(&mask, 1);
        prop_assert_eq!(regions.len(), n as usize);
        let total: usize = regions.iter().map(|r| r.fg_count() as usize).sum();
        prop_assert_eq!(total, mask.count());
        for r in &regions {
            let b = r.bbox();
            prop_assert!(b.right() <= mask.width() && b.bottom() <= mask.height());
            prop_assert_eq!(r.row_counts().len(), b.h as usize);
        }
    }

    #[test]
    fn fusing_twice_changes_nothing(mask in mask_strategy(), gap in 0u32..6) {
        let once = fuse_regions(&connected_components(&mask, 1), gap);
        let twice = fuse_regions(&once, gap);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn half_duty_cycles_recompose_the_count(mask in mask_strategy()) {
        for r in connected_components(&mask, 1) {
            let f = extract_static(&r).unwrap();
            let b = r.bbox();
            let upper = f.duty_upper * f64::from(r.upper_rows() * b.w);
            let lower = f.duty_lower * f64::from(r.lower_rows() * b.w);
            prop_assert_eq!(r.upper_rows(), b.h.div_ceil(2));
            prop_assert_eq!(r.lower_rows(), b.h / 2);
            prop_assert_eq!(r.fg_count_upper() + r.fg_count_lower(), r.fg_count());
            prop_assert!((upper + lower - f64::from(f.fg_count)).abs() < 1e-9);
        }
    }

    #[test]
    fn svm_decision_survives_positive_scaling(
        w in prop::collection::vec(-5.0f64..5.0, 3),
        b in -5.0f64..5.0,
        c in 1e-3f64..1e3,
        x in vector_strategy(),
    ) {
        let layout = FeatureLayout::new(vec![FeatureName::Width, FeatureName::DutyLower, FeatureName::AspectRatio]);
        let model = SvmModel::new(layout, Standardization::identity(3), w, b).unwrap();
        let f = svm_score(&model, &x).unwrap();
        let fc = svm_score(&model.scaled(c), &x).unwrap();
        // Exactly zero scores stay zero; elsewhere the sign is kept.
        prop_assert_eq!(svm_decide(f), svm_decide(fc));
    }

    #[test]
    fn widening_a_stage_keeps_bicycles(
        stages in prop::collection::vec(stage_strategy(), 0..6),
        which in any::<prop::sample::Index>(),
        grow_lo in 0.0f64..10.0,
        grow_hi in 0.0f64..10.0,
        x in vector_strategy(),
    ) {
        let narrow = Cascade { stages: stages.clone() };
        let mut wide = narrow.clone();
        if !stages.is_empty() {
            let s = &mut wide.stages[which.index(stages.len())];
            s.lo -= grow_lo;
            s.hi += grow_hi;
        }
        if cascade_decide(&narrow, &x).0.is_bicycle() {
            prop_assert!(cascade_decide(&wide, &x).0.is_bicycle());
        }
    }

    #[test]
    fn svm_training_is_repeatable(
        pos in prop::collection::vec(vector_strategy(), 2..12),
        neg in prop::collection::vec(vector_strategy(), 2..12),
    ) {
        let set = TrainingSet::new(pos, neg);
        let layout = FeatureLayout::speed_free();
        let params = SvmParams { budget: 200, ..SvmParams::default() };
        let a = train_svm(&set, &layout, &params);
        let b = train_svm(&set, &layout, &params);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn raising_the_threshold_never_adds_records(
        cofs in prop::collection::vec(0.0f64..=1.0, 0..20),
        t1 in 0.0f64..=1.0,
        dt in 0.0f64..=1.0,
    ) {
        let t2 = (t1 + dt).min(1.0);
        for cof in cofs {
            let r = DetectionRecord {
                track_id: 1,
                first_frame: 0,
                last_frame: 0,
                m: 1,
                m_b: 1,
                decision: bikedet_core::Decision::Bicycle,
                cof,
                trail: Vec::new(),
            };
            prop_assert!(!r.accepted(t2) || r.accepted(t1));
        }
    }
}
