//! Compares the data-parallel kernels against their sequential twins on a
//! reference-scale workload: full 346x260 sensor, 32 disparity hypotheses,
//! 15k-event batches, window 24. With the `parallel` feature disabled the
//! `threaded` entries degrade to the sequential path, so the two sides of
//! each group should then time identically.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use evstereo_core::cost::{iou_cost_volume, iou_cost_volume_seq, WindowSpec};
use evstereo_core::nalgebra::Vector3;
use evstereo_core::pipeline::{process_batch, PipelineConfig};
use evstereo_core::synth::{generate_stereo_events, tiled_scene};
use evstereo_core::volume::{build_event_volume, build_event_volume_seq, CameraSide};
use evstereo_core::{CameraRig, DisparityConfig, Event, EventDisparityVolume, Velocity};

const BATCH: usize = 15_000;

struct Workload {
    rig: CameraRig,
    cfg: DisparityConfig,
    vel: Velocity,
    left: Vec<Event>,
    right: Vec<Event>,
    t_ref: f64,
}

fn workload() -> Workload {
    let rig = CameraRig::new(300.0, 172.5, 129.5, 0.3, 346, 260).unwrap();
    let vel =
        Velocity::new(Vector3::new(6.0, 0.5, 1.5), Vector3::new(0.01, 0.02, -0.01)).unwrap();
    let spec = tiled_scene(
        &[7.0, 16.0, 26.0],
        3_600,
        26.0,
        vel.clone(),
        0.025,
        80.0,
        600,
        12,
        &rig,
    )
    .unwrap();
    let scene = generate_stereo_events(&spec, &rig).unwrap();
    let keep_last = |events: &[Event]| events[events.len().saturating_sub(BATCH)..].to_vec();
    let left = keep_last(&scene.left);
    let right = keep_last(&scene.right);
    let t_ref = left.last().expect("scene is nonempty").t;
    Workload {
        rig,
        cfg: DisparityConfig::default(),
        vel,
        left,
        right,
        t_ref,
    }
}

fn volumes(w: &Workload) -> (EventDisparityVolume, EventDisparityVolume) {
    (
        build_event_volume(&w.left, &w.vel, &w.rig, &w.cfg, true, w.t_ref, CameraSide::Left),
        build_event_volume(&w.right, &w.vel, &w.rig, &w.cfg, true, w.t_ref, CameraSide::Right),
    )
}

fn bench_event_volume(c: &mut Criterion) {
    let w = workload();
    let mut g = c.benchmark_group("event_volume");
    g.throughput(Throughput::Elements(w.left.len() as u64));
    g.sample_size(20);
    g.bench_function("threaded", |b| {
        b.iter(|| {
            build_event_volume(&w.left, &w.vel, &w.rig, &w.cfg, true, w.t_ref, CameraSide::Left)
        })
    });
    g.bench_function("sequential", |b| {
        b.iter(|| {
            build_event_volume_seq(
                &w.left,
                &w.vel,
                &w.rig,
                &w.cfg,
                true,
                w.t_ref,
                CameraSide::Left,
            )
        })
    });
    g.finish();
}

fn bench_iou_cost(c: &mut Criterion) {
    let w = workload();
    let spec = WindowSpec::new(w.cfg.window).unwrap();
    let (lv, rv) = volumes(&w);
    let mut g = c.benchmark_group("iou_cost");
    g.sample_size(10);
    g.bench_function("threaded", |b| b.iter(|| iou_cost_volume(&lv, &rv, &spec).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| iou_cost_volume_seq(&lv, &rv, &spec).unwrap())
    });
    g.finish();
}

fn bench_full_batch(c: &mut Criterion) {
    let w = workload();
    let cfg = PipelineConfig {
        disparity: w.cfg.clone(),
        ..PipelineConfig::default()
    };
    let mut g = c.benchmark_group("full_batch");
    g.throughput(Throughput::Elements((w.left.len() + w.right.len()) as u64));
    g.sample_size(10);
    g.bench_function("default", |b| {
        b.iter(|| process_batch(&w.left, &w.right, &w.vel, &w.rig, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(kernels, bench_event_volume, bench_iou_cost, bench_full_batch);
criterion_main!(kernels);
