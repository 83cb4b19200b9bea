use std::time::Duration;

use bikedet_bench::{fusers, scene};
use bikedet_core::segment::morphological_clean;
use bikedet_core::{
    connected_components, fuse_regions, run_frames, GmmParams, GmmState, PipelineConfig,
    SegmentationParams,
};
use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion, Throughput};

fn background(c: &mut Criterion) {
    let (frames, _) = scene();
    let mut state = GmmState::init(&frames[0], GmmParams::default()).unwrap();
    for f in &frames[1..100] {
        state.update_and_subtract(f).unwrap();
    }
    let mut i = 100;
    c.bench_function("gmm_update_352x288", |b| {
        b.iter(|| {
            i = if i + 1 < frames.len() { i + 1 } else { 100 };
            black_box(state.update_and_subtract(&frames[i]).unwrap())
        })
    });
}

fn segmentation(c: &mut Criterion) {
    let (frames, _) = scene();
    let mut state = GmmState::init(&frames[0], GmmParams::default()).unwrap();
    let mut mask = None;
    for f in &frames[1..160] {
        mask = Some(state.update_and_subtract(f).unwrap());
    }
    let mask = mask.unwrap();
    let params = SegmentationParams::default();
    c.bench_function("clean_label_fuse", |b| {
        b.iter(|| {
            let clean = morphological_clean(black_box(&mask), &params.morphology());
            let regions = connected_components(&clean, params.min_area);
            black_box(fuse_regions(&regions, params.max_gap))
        })
    });
}

fn pipeline(c: &mut Criterion) {
    let (frames, gt) = scene();
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline_scene");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(20));
    group.throughput(Throughput::Elements(frames.len() as u64));
    for (name, fuser) in fusers(&frames, &gt) {
        group.bench_function(name, |b| {
            b.iter_batched(
                || fuser.clone(),
                |f| black_box(run_frames(&frames, f, &cfg).unwrap().records),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, background, segmentation, pipeline);
criterion_main!(benches);
