//! Event disparity volumes.
//!
//! Every event is propagated to the batch reference time with the flow of
//! each candidate disparity, rounded to the nearest integer pixel
//! (half-way cases away from zero) and accumulated per voxel: polarity
//! sums reduced through `sign` for the event volumes, latest original
//! timestamp for the timestamp volumes. The right camera's slice at
//! disparity `d` is additionally translated by `+d` columns so that
//! correctly matched structure lands on the same pixel coordinates in
//! both volumes. Events whose target pixel falls outside the sensor are
//! dropped from that slice only.
//!
//! Slices are independent, so they are built in parallel when the
//! `parallel` feature is enabled; the result is identical to the
//! sequential build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::grid::Grid2;
use crate::motion::{flow_basis, inverse_depth};
use crate::types::{
    CameraRig, DisparityConfig, Event, EventDisparityVolume, TimestampVolume, Velocity, TS_NONE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraSide {
    Left,
    Right,
}

impl CameraSide {
    #[inline]
    fn column_shift(self, d: u32) -> i64 {
        match self {
            CameraSide::Left => 0,
            CameraSide::Right => i64::from(d),
        }
    }
}

/// Event with its flow decomposition precomputed; shared by all slices.
struct PreparedEvent {
    x: f64,
    y: f64,
    dt: f64,
    trans_dx: f64,
    trans_dy: f64,
    rot_dx: f64,
    rot_dy: f64,
    p: i8,
    t: f64,
}

impl PreparedEvent {
    /// Warped integer pixel for one slice, or None when it leaves the
    /// sensor after the shift.
    #[inline]
    fn target(&self, inv_depth: f64, shift: i64, width: u32, height: u32) -> Option<(u32, u32)> {
        let xs = self.x + (self.trans_dx * inv_depth + self.rot_dx) * self.dt;
        let ys = self.y + (self.trans_dy * inv_depth + self.rot_dy) * self.dt;
        let xi = xs.round() as i64 + shift;
        let yi = ys.round() as i64;
        if xi < 0 || yi < 0 || xi >= i64::from(width) || yi >= i64::from(height) {
            None
        } else {
            Some((xi as u32, yi as u32))
        }
    }
}

fn prepare(events: &[Event], vel: &Velocity, rig: &CameraRig, t_ref: f64, sync: bool) -> Vec<PreparedEvent> {
    events
        .iter()
        .map(|e| {
            let basis = flow_basis(f64::from(e.x), f64::from(e.y), vel, rig);
            PreparedEvent {
                x: f64::from(e.x),
                y: f64::from(e.y),
                // dt = 0 makes the warp an exact identity, which is how
                // sync-off reduces to plain per-slice accumulation.
                dt: if sync { t_ref - e.t } else { 0.0 },
                trans_dx: basis.trans_dx,
                trans_dy: basis.trans_dy,
                rot_dx: basis.rot_dx,
                rot_dy: basis.rot_dy,
                p: e.p,
                t: e.t,
            }
        })
        .collect()
}

fn polarity_slice(prep: &[PreparedEvent], d: u32, side: CameraSide, rig: &CameraRig) -> Grid2<i8> {
    let inv_depth = inverse_depth(d, rig);
    let shift = side.column_shift(d);
    let mut acc = vec![0i32; rig.npixels()];
    for ev in prep {
        if let Some((x, y)) = ev.target(inv_depth, shift, rig.width, rig.height) {
            acc[y as usize * rig.width as usize + x as usize] += i32::from(ev.p);
        }
    }
    Grid2::from_vec(
        rig.width,
        rig.height,
        acc.into_iter().map(|s| s.signum() as i8).collect(),
    )
}

fn timestamp_slice(prep: &[PreparedEvent], d: u32, side: CameraSide, rig: &CameraRig) -> Grid2<f64> {
    let inv_depth = inverse_depth(d, rig);
    let shift = side.column_shift(d);
    let mut acc = vec![TS_NONE; rig.npixels()];
    for ev in prep {
        if let Some((x, y)) = ev.target(inv_depth, shift, rig.width, rig.height) {
            let cell = &mut acc[y as usize * rig.width as usize + x as usize];
            if ev.t > *cell {
                *cell = ev.t;
            }
        }
    }
    Grid2::from_vec(rig.width, rig.height, acc)
}

fn disparities(cfg: &DisparityConfig) -> Vec<u32> {
    (cfg.d_min..=cfg.d_max).collect()
}

/// Build a signed event volume for one camera side. `t_ref` is the shared
/// reference time; the pipeline uses the last timestamp of the left batch.
#[allow(clippy::too_many_arguments)]
pub fn build_event_volume(
    events: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &DisparityConfig,
    sync: bool,
    t_ref: f64,
    side: CameraSide,
) -> EventDisparityVolume {
    let prep = prepare(events, vel, rig, t_ref, sync);
    #[cfg(feature = "parallel")]
    let slices = disparities(cfg)
        .par_iter()
        .map(|&d| polarity_slice(&prep, d, side, rig))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let slices = disparities(cfg)
        .iter()
        .map(|&d| polarity_slice(&prep, d, side, rig))
        .collect();
    EventDisparityVolume::from_slices(slices, cfg.d_min, t_ref)
}

/// Single-threaded reference build; the `parallel` build must match it
/// slice for slice.
#[allow(clippy::too_many_arguments)]
pub fn build_event_volume_seq(
    events: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &DisparityConfig,
    sync: bool,
    t_ref: f64,
    side: CameraSide,
) -> EventDisparityVolume {
    let prep = prepare(events, vel, rig, t_ref, sync);
    let slices = disparities(cfg)
        .iter()
        .map(|&d| polarity_slice(&prep, d, side, rig))
        .collect();
    EventDisparityVolume::from_slices(slices, cfg.d_min, t_ref)
}

pub fn build_left_volume(
    events: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &DisparityConfig,
    sync: bool,
    t_ref: f64,
) -> EventDisparityVolume {
    build_event_volume(events, vel, rig, cfg, sync, t_ref, CameraSide::Left)
}

pub fn build_right_volume(
    events: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &DisparityConfig,
    sync: bool,
    t_ref: f64,
) -> EventDisparityVolume {
    build_event_volume(events, vel, rig, cfg, sync, t_ref, CameraSide::Right)
}

/// Latest-timestamp volume for one camera side; voxels keep the original
/// (unshifted) timestamp of their most recent event.
#[allow(clippy::too_many_arguments)]
pub fn build_timestamp_volume(
    events: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &DisparityConfig,
    sync: bool,
    t_ref: f64,
    side: CameraSide,
) -> TimestampVolume {
    let prep = prepare(events, vel, rig, t_ref, sync);
    #[cfg(feature = "parallel")]
    let slices = disparities(cfg)
        .par_iter()
        .map(|&d| timestamp_slice(&prep, d, side, rig))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let slices = disparities(cfg)
        .iter()
        .map(|&d| timestamp_slice(&prep, d, side, rig))
        .collect();
    TimestampVolume::from_slices(slices, cfg.d_min, t_ref)
}

/// Timestamp volumes for both cameras at the shared reference time.
#[allow(clippy::too_many_arguments)]
pub fn build_timestamp_volumes(
    left: &[Event],
    right: &[Event],
    vel: &Velocity,
    rig: &CameraRig,
    cfg: &DisparityConfig,
    sync: bool,
    t_ref: f64,
) -> (TimestampVolume, TimestampVolume) {
    (
        build_timestamp_volume(left, vel, rig, cfg, sync, t_ref, CameraSide::Left),
        build_timestamp_volume(right, vel, rig, cfg, sync, t_ref, CameraSide::Right),
    )
}
