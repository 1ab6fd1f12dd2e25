//! Stereo disparity estimation for event cameras under known ego-motion.
//!
//! Event cameras report per-pixel brightness changes asynchronously, so
//! the two cameras of a stereo rig never observe the same instant. This
//! crate removes that obstacle with motion compensation: given the rig's
//! linear and angular velocity, every event in a batch is warped along
//! its motion-field trajectory to the batch's reference time, once per
//! candidate disparity (depth hypothesis). The warp that matches the
//! true disparity focuses events into sharp edge images; wrong
//! hypotheses leave motion blur.
//!
//! The pipeline stages, in order:
//!
//! 1. [`volume`] scatters warped events into per-disparity signed images
//!    (left camera) and disparity-shifted images (right camera).
//! 2. [`cost`] scores each pixel/disparity cell by windowed
//!    intersection-over-union between the two volumes, with exact
//!    separable window sums.
//! 3. [`disparity`] picks the best-scoring disparity per pixel
//!    (winner-takes-all) and rejects weakly supported matches.
//! 4. [`pipeline`] wires the stages into batched end-to-end runs.
//!
//! [`synth`] renders exact scenes (rigid point clouds under constant
//! velocity) for ground-truth evaluation, [`eval`] computes accuracy
//! metrics and ablation grids, and [`io`] reads and writes the on-disk
//! formats (event logs, calibration, velocity records, PGM disparity
//! maps, volume/cost dumps, metrics CSV).
//!
//! Per-disparity slices are independent, so the heavy kernels run
//! data-parallel over disparity by default (the `parallel` feature);
//! disabling the feature yields identical results sequentially.

pub mod cost;
pub mod disparity;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod motion;
pub mod pipeline;
pub mod synth;
pub mod types;
pub mod volume;

pub use nalgebra;

pub use error::{Error, Result};
pub use grid::Grid2;
pub use types::{
    validate_batch, CameraRig, CostVolume, DisparityConfig, DisparityMap, Event, EventBatch,
    EventDisparityVolume, TimestampVolume, Velocity, COST_UNDEFINED, TS_NONE,
};
