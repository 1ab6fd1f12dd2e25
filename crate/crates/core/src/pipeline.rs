//! End-to-end orchestration: constant-count batching, the per-batch
//! stage sequence (warp → volumes → cost → extraction → rejection), and
//! file-driven runs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::cost::{intersection_cost_slices, iou_cost_volume, timestamp_cost_volume, WindowSpec};
use crate::disparity::{reject_outliers, winner_takes_all, winner_takes_all_slices};
use crate::error::{Error, Result};
use crate::eval::{disparity_metrics, Metrics};
use crate::grid::Grid2;
use crate::io;
use crate::motion::perturb_velocity;
use crate::types::{
    CameraRig, CostVolume, DisparityConfig, DisparityMap, Event, EventDisparityVolume, Velocity,
};
use crate::volume::{build_left_volume, build_right_volume, build_timestamp_volume, CameraSide};

/// Which matching cost drives winner-takes-all extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Negated intersection-over-union ratio (the default).
    Iou,
    /// Negated raw intersection count (ablation).
    Intersection,
    /// Timestamp-agreement score (ablation).
    Time,
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Iou => "iou",
            CostKind::Intersection => "intersection",
            CostKind::Time => "time",
        })
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iou" => Ok(CostKind::Iou),
            "intersection" => Ok(CostKind::Intersection),
            "time" => Ok(CostKind::Time),
            other => Err(Error::InvalidConfig(format!(
                "unknown cost `{other}` (expected iou, intersection or time)"
            ))),
        }
    }
}

/// Full per-batch configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub disparity: DisparityConfig,
    pub cost: CostKind,
    /// Warp events to the batch reference time before accumulation.
    pub sync: bool,
    /// Velocity-noise fraction; 0 disables perturbation.
    pub noise_pct: f64,
    /// Seed for the velocity perturbation.
    pub seed: u64,
    /// Timestamp-cost scale.
    pub alpha: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            disparity: DisparityConfig::default(),
            cost: CostKind::Iou,
            sync: true,
            noise_pct: 0.0,
            seed: 0,
            alpha: 1.0,
        }
    }
}

/// Consecutive non-overlapping batches of exactly `n` events; a trailing
/// partial batch is dropped.
pub fn batch_events(events: &[Event], n: usize) -> std::slice::ChunksExact<'_, Event> {
    assert!(n >= 1, "batch size must be at least 1");
    events.chunks_exact(n)
}

/// The velocity record whose timestamp is nearest `t`; ties go to the
/// earlier record.
pub fn nearest_velocity(records: &[(f64, Velocity)], t: f64) -> &Velocity {
    assert!(!records.is_empty(), "need at least one velocity record");
    let mut best = &records[0];
    for rec in &records[1..] {
        if (rec.0 - t).abs() < (best.0 - t).abs() {
            best = rec;
        }
    }
    &best.1
}

/// Everything one batch produces.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub map: DisparityMap,
    /// Union/intersection window sums and the ratio cost.
    pub costs: CostVolume,
    /// Extraction slices when an ablation cost replaced the ratio.
    pub selection: Option<Vec<Grid2<f32>>>,
    pub left_volume: EventDisparityVolume,
    pub right_volume: EventDisparityVolume,
    pub t_ref: f64,
    /// Velocity the warp actually used (after optional perturbation).
    pub velocity_used: Velocity,
}

impl BatchOutput {
    /// The cost slices winner-takes-all ran on.
    pub fn extraction_slices(&self) -> &[Grid2<f32>] {
        self.selection.as_deref().unwrap_or(&self.costs.c_iou)
    }
}

/// Wall-clock spent per stage of one batch. `cost` includes building the
/// ablation timestamp volumes when the time cost is selected.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub volumes: Duration,
    pub cost: Duration,
    pub extract: Duration,
    pub total: Duration,
}

fn mark_has_events(map: &mut DisparityMap, left: &[Event]) {
    for e in left {
        if u32::from(e.x) < map.width() && u32::from(e.y) < map.height() {
            map.has_events.set(u32::from(e.x), u32::from(e.y), true);
        }
    }
}

/// Run the full stage sequence on one batch pair. The reference time is
/// the left batch's last event timestamp (falling back to the right's).
pub fn process_batch(
    left: &[Event],
    right: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &PipelineConfig,
) -> Result<BatchOutput> {
    process_batch_timed(left, right, vel, rig, cfg).map(|(out, _)| out)
}

/// As [`process_batch`], also reporting per-stage wall-clock times.
pub fn process_batch_timed(
    left: &[Event],
    right: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &PipelineConfig,
) -> Result<(BatchOutput, StageTimings)> {
    cfg.disparity.validate(rig).map_err(|e| e.in_stage("config"))?;
    if !(cfg.noise_pct >= 0.0 && cfg.noise_pct.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_pct {} must be finite and >= 0", cfg.noise_pct))
            .in_stage("config"));
    }
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha {} must be finite and >= 0", cfg.alpha))
            .in_stage("config"));
    }
    let spec = WindowSpec::new(cfg.disparity.window).map_err(|e| e.in_stage("config"))?;

    let velocity_used = if cfg.noise_pct > 0.0 {
        perturb_velocity(vel, cfg.noise_pct, cfg.seed)
    } else {
        vel.clone()
    };
    let t_ref = left
        .last()
        .map(|e| e.t)
        .or_else(|| right.last().map(|e| e.t))
        .unwrap_or(0.0);

    let t0 = Instant::now();
    let left_volume = build_left_volume(left, &velocity_used, rig, &cfg.disparity, cfg.sync, t_ref);
    let right_volume =
        build_right_volume(right, &velocity_used, rig, &cfg.disparity, cfg.sync, t_ref);
    let t1 = Instant::now();

    let costs = iou_cost_volume(&left_volume, &right_volume, &spec).map_err(|e| e.in_stage("cost"))?;
    let (selection, t2, mut map) = match cfg.cost {
        CostKind::Iou => {
            let t2 = Instant::now();
            (None, t2, winner_takes_all(&costs))
        }
        CostKind::Intersection => {
            let slices = intersection_cost_slices(&costs);
            let t2 = Instant::now();
            let map = winner_takes_all_slices(&slices, costs.d_min());
            (Some(slices), t2, map)
        }
        CostKind::Time => {
            let left_t = build_timestamp_volume(
                left,
                &velocity_used,
                rig,
                &cfg.disparity,
                cfg.sync,
                t_ref,
                CameraSide::Left,
            );
            let right_t = build_timestamp_volume(
                right,
                &velocity_used,
                rig,
                &cfg.disparity,
                cfg.sync,
                t_ref,
                CameraSide::Right,
            );
            let slices = timestamp_cost_volume(&left_t, &right_t, &costs.c_u, &spec, cfg.alpha)
                .map_err(|e| e.in_stage("cost"))?;
            let t2 = Instant::now();
            let map = winner_takes_all_slices(&slices, costs.d_min());
            (Some(slices), t2, map)
        }
    };
    mark_has_events(&mut map, left);
    reject_outliers(&mut map, &costs, &cfg.disparity, &spec);
    let t3 = Instant::now();

    Ok((
        BatchOutput {
            map,
            costs,
            selection,
            left_volume,
            right_volume,
            t_ref,
            velocity_used,
        },
        StageTimings {
            volumes: t1 - t0,
            cost: t2 - t1,
            extract: t3 - t2,
            total: t3 - t0,
        },
    ))
}

/// File-driven run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub events_left: PathBuf,
    pub events_right: PathBuf,
    pub calib: PathBuf,
    pub velocity: PathBuf,
    /// Ground-truth disparity PGM; enables the metrics CSV.
    pub gt: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub pipeline: PipelineConfig,
    pub dump_volumes: bool,
    pub dump_costs: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub batches: usize,
    /// Events consumed (both cameras) per second of processing time;
    /// file reads and writes are excluded.
    pub events_per_second: f64,
    /// Per-batch metrics when ground truth was given.
    pub metrics: Vec<Metrics>,
}

/// Read inputs, process every full batch pair, and write per-batch maps
/// (plus optional dumps and metrics). Deterministic given inputs and
/// seed; batch `i` perturbs with `seed + i`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let rig = io::read_calibration(&cfg.calib).map_err(|e| e.in_stage("calibration"))?;
    cfg.pipeline.disparity.validate(&rig).map_err(|e| e.in_stage("config"))?;
    let left = io::read_events(&cfg.events_left, &rig).map_err(|e| e.in_stage("events-left"))?;
    let right = io::read_events(&cfg.events_right, &rig).map_err(|e| e.in_stage("events-right"))?;
    let velocities =
        io::read_velocity_records(&cfg.velocity).map_err(|e| e.in_stage("velocity"))?;
    let gt = match &cfg.gt {
        Some(p) => Some(io::read_gt_pgm(p).map_err(|e| e.in_stage("ground-truth"))?),
        None => None,
    };
    std::fs::create_dir_all(&cfg.out_dir)?;

    let n = cfg.pipeline.disparity.num_events;
    let mut batches = 0usize;
    let mut events_done = 0usize;
    let mut busy = Duration::ZERO;
    let mut per_batch: Vec<(String, Metrics)> = Vec::new();

    for (i, (lb, rb)) in batch_events(&left, n).zip(batch_events(&right, n)).enumerate() {
        let t_ref = lb.last().expect("batches are non-empty").t;
        let vel = nearest_velocity(&velocities, t_ref);
        let mut pcfg = cfg.pipeline.clone();
        pcfg.seed = cfg.pipeline.seed.wrapping_add(i as u64);

        let (out, timings) = process_batch_timed(lb, rb, vel, &rig, &pcfg)?;
        busy += timings.total;
        events_done += lb.len() + rb.len();

        io::write_disparity_pgm(cfg.out_dir.join(format!("disparity_{i:04}.pgm")), &out.map)?;
        io::write_sparse_csv(
            cfg.out_dir.join(format!("sparse_{i:04}.csv")),
            &out.map,
            &out.costs,
        )?;
        if cfg.dump_volumes {
            io::write_volume_dump(
                cfg.out_dir.join(format!("volume_left_{i:04}.bin")),
                &out.left_volume,
            )?;
            io::write_volume_dump(
                cfg.out_dir.join(format!("volume_right_{i:04}.bin")),
                &out.right_volume,
            )?;
        }
        if cfg.dump_costs {
            io::write_cost_dump(
                cfg.out_dir.join(format!("cost_{i:04}.bin")),
                out.extraction_slices(),
                out.costs.d_min(),
            )?;
        }
        if let Some(gt) = &gt {
            let m = disparity_metrics(&out.map, gt, &rig).map_err(|e| e.in_stage("metrics"))?;
            per_batch.push((format!("batch{i:04}"), m));
        }
        batches += 1;
    }

    if gt.is_some() {
        let records: Vec<io::MetricsRecord<'_>> = per_batch
            .iter()
            .map(|(variant, metrics)| io::MetricsRecord {
                variant,
                cost: cfg.pipeline.cost,
                sync: cfg.pipeline.sync,
                noise_pct: cfg.pipeline.noise_pct,
                window: cfg.pipeline.disparity.window,
                metrics: *metrics,
            })
            .collect();
        io::write_metrics_csv(cfg.out_dir.join("metrics.csv"), &records)?;
    }

    Ok(RunSummary {
        batches,
        events_per_second: if busy.as_secs_f64() > 0.0 {
            events_done as f64 / busy.as_secs_f64()
        } else {
            f64::NAN
        },
        metrics: per_batch.into_iter().map(|(_, m)| m).collect(),
    })
}
