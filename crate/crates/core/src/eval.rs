//! Accuracy metrics against ground truth and the ablation sweep.
//!
//! Comparison is restricted to pixels that are valid in the estimate,
//! covered by ground truth, and flagged as having raw events — matching
//! how sparse output is reported. "Within one pixel" is published with
//! both the inclusive (|err| ≤ 1) and strict (|err| < 1) readings, and
//! with both denominators (surviving pixels vs. all covered event
//! pixels), since rejected pixels can be counted either way.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::pipeline::{process_batch, CostKind, PipelineConfig};
use crate::types::{CameraRig, DisparityConfig, DisparityMap, Event, Velocity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean |d̂ − d_gt| over compared pixels.
    pub mean_disp_err: f64,
    /// Mean |Z(d̂) − Z(d_gt)| over compared pixels with both disparities
    /// positive; NaN when no such pixel exists.
    pub mean_depth_err: f64,
    /// 100 · fraction of compared pixels with |d̂ − d_gt| ≤ 1.
    pub pct_within_1: f64,
    /// As above with the strict reading |d̂ − d_gt| < 1.
    pub pct_within_1_strict: f64,
    /// Inclusive reading over the larger denominator: all ground-truth
    /// covered event pixels, whether or not they survived rejection.
    pub pct_within_1_covered: f64,
    pub n_compared: usize,
    /// Ground-truth covered event pixels that did not survive.
    pub n_rejected: usize,
}

/// Compare an estimated disparity map against ground truth (NaN = hole).
pub fn disparity_metrics(
    est: &DisparityMap,
    gt: &Grid2<f32>,
    rig: &CameraRig,
) -> Result<Metrics> {
    if est.width() != gt.width() || est.height() != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "estimate {}x{} vs ground truth {}x{}",
            est.width(),
            est.height(),
            gt.width(),
            gt.height()
        )));
    }

    let fb = rig.fb();
    let mut n_compared = 0usize;
    let mut n_rejected = 0usize;
    let mut sum_disp_err = 0.0;
    let mut within = 0usize;
    let mut within_strict = 0usize;
    let mut depth_pairs = 0usize;
    let mut sum_depth_err = 0.0;

    for (x, y) in gt.coords() {
        let truth = f64::from(gt.get(x, y));
        if !truth.is_finite() || !est.has_events.get(x, y) {
            continue;
        }
        if !est.valid.get(x, y) {
            n_rejected += 1;
            continue;
        }
        let d = f64::from(est.d_hat.get(x, y));
        let err = (d - truth).abs();
        n_compared += 1;
        sum_disp_err += err;
        if err <= 1.0 {
            within += 1;
        }
        if err < 1.0 {
            within_strict += 1;
        }
        if d > 0.0 && truth > 0.0 {
            depth_pairs += 1;
            sum_depth_err += (fb / d - fb / truth).abs();
        }
    }

    if n_compared == 0 {
        return Err(Error::EmptyComparison);
    }
    let covered = n_compared + n_rejected;
    Ok(Metrics {
        mean_disp_err: sum_disp_err / n_compared as f64,
        mean_depth_err: if depth_pairs > 0 {
            sum_depth_err / depth_pairs as f64
        } else {
            f64::NAN
        },
        pct_within_1: 100.0 * within as f64 / n_compared as f64,
        pct_within_1_strict: 100.0 * within_strict as f64 / n_compared as f64,
        pct_within_1_covered: 100.0 * within as f64 / covered as f64,
        n_compared,
        n_rejected,
    })
}

/// Everything an ablation sweep holds fixed.
#[derive(Debug, Clone, Copy)]
pub struct AblationInputs<'a> {
    pub left: &'a [Event],
    pub right: &'a [Event],
    pub gt: &'a Grid2<f32>,
    pub vel: &'a Velocity,
    pub rig: &'a CameraRig,
    pub base: &'a DisparityConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub cost: CostKind,
    pub sync: bool,
    pub noise_pct: f64,
    pub window: u32,
    pub metrics: Metrics,
}

impl AblationRow {
    /// Label for the `variant` CSV column, e.g. `iou-sync`.
    pub fn variant(&self) -> String {
        format!("{}-{}", self.cost, if self.sync { "sync" } else { "nosync" })
    }
}

/// Run the full cartesian product of matching variants, velocity-noise
/// levels and window sides over one batch pair. Deterministic given the
/// seed in `inputs`.
pub fn ablation_runner(
    inputs: &AblationInputs<'_>,
    variants: &[(CostKind, bool)],
    noise_pcts: &[f64],
    windows: &[u32],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(variants.len() * noise_pcts.len() * windows.len());
    for &(cost, sync) in variants {
        for &noise_pct in noise_pcts {
            for &window in windows {
                let cfg = DisparityConfig {
                    window,
                    ..inputs.base.clone()
                };
                let pcfg = PipelineConfig {
                    disparity: cfg,
                    cost,
                    sync,
                    noise_pct,
                    seed: inputs.seed,
                    ..PipelineConfig::default()
                };
                let out = process_batch(inputs.left, inputs.right, inputs.vel, inputs.rig, &pcfg)?;
                let metrics = disparity_metrics(&out.map, inputs.gt, inputs.rig)?;
                rows.push(AblationRow {
                    cost,
                    sync,
                    noise_pct,
                    window,
                    metrics,
                });
            }
        }
    }
    Ok(rows)
}
