//! Per-pixel image motion under known camera velocity, and the temporal
//! shift that synchronizes events to a common reference time.
//!
//! The flow at a pixel splits into a translational part scaled by inverse
//! depth and a rotational part that is depth independent. Candidate
//! disparities index depth through the rectified rig model, so disparity 0
//! corresponds to a point at infinity and carries no translational flow.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{CameraRig, Event, Velocity};

/// Image-plane velocity of a pixel, in pixels per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelFlow {
    pub dx: f64,
    pub dy: f64,
}

/// Flow at one pixel split into its depth-scaled translational part and
/// its depth-independent rotational part, both in pixels per second.
/// Evaluating at several inverse depths reuses the per-pixel work.
#[derive(Debug, Clone, Copy)]
pub struct FlowBasis {
    pub trans_dx: f64,
    pub trans_dy: f64,
    pub rot_dx: f64,
    pub rot_dy: f64,
}

impl FlowBasis {
    #[inline]
    pub fn eval(&self, inv_depth: f64) -> PixelFlow {
        PixelFlow {
            dx: self.trans_dx * inv_depth + self.rot_dx,
            dy: self.trans_dy * inv_depth + self.rot_dy,
        }
    }
}

/// Decompose the motion field at a pixel. Positions are normalized with
/// the rig intrinsics before applying the interaction terms, and the
/// result is scaled back to pixels per second.
pub fn flow_basis(x_px: f64, y_px: f64, vel: &Velocity, rig: &CameraRig) -> FlowBasis {
    let x = (x_px - rig.cx) / rig.f;
    let y = (y_px - rig.cy) / rig.f;
    let v = &vel.linear;
    let w = &vel.angular;
    FlowBasis {
        trans_dx: rig.f * (-v.x + x * v.z),
        trans_dy: rig.f * (-v.y + y * v.z),
        rot_dx: rig.f * (x * y * w.x - (1.0 + x * x) * w.y + y * w.z),
        rot_dy: rig.f * ((1.0 + y * y) * w.x - x * y * w.y - x * w.z),
    }
}

/// Depth of a positive disparity under the rectified rig model.
pub fn depth_from_disparity(d: f64, rig: &CameraRig) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::NonpositiveDisparity { d });
    }
    Ok(rig.fb() / d)
}

/// Inverse depth of a candidate disparity. Disparity 0 maps to zero
/// inverse depth (a point at infinity), which zeroes the translational
/// flow exactly.
#[inline]
pub fn inverse_depth(d: u32, rig: &CameraRig) -> f64 {
    f64::from(d) / rig.fb()
}

/// Motion-field flow at a pixel for the depth implied by disparity `d`.
pub fn motion_field_flow(x_px: f64, y_px: f64, d: u32, vel: &Velocity, rig: &CameraRig) -> PixelFlow {
    flow_basis(x_px, y_px, vel, rig).eval(inverse_depth(d, rig))
}

/// Propagate an event to `t_ref` along its flow at disparity `d`. One
/// linear step with the flow evaluated at the original event position;
/// the result keeps sub-pixel precision.
pub fn time_shift(event: &Event, d: u32, t_ref: f64, vel: &Velocity, rig: &CameraRig) -> (f64, f64) {
    let flow = motion_field_flow(f64::from(event.x), f64::from(event.y), d, vel, rig);
    let dt = t_ref - event.t;
    (
        f64::from(event.x) + flow.dx * dt,
        f64::from(event.y) + flow.dy * dt,
    )
}

/// Perturb a velocity with zero-mean Gaussian noise whose variance is
/// `pct` times the norm of the respective part; linear and angular parts
/// are drawn separately. Deterministic for a given seed, and an exact
/// copy when `pct` is zero or a part has zero norm.
pub fn perturb_velocity(vel: &Velocity, pct: f64, seed: u64) -> Velocity {
    assert!(pct >= 0.0 && pct.is_finite(), "noise fraction must be non-negative");
    if pct == 0.0 {
        return vel.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Velocity {
        linear: perturb_part(&vel.linear, pct, &mut rng),
        angular: perturb_part(&vel.angular, pct, &mut rng),
    }
}

fn perturb_part(part: &Vector3<f64>, pct: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let variance = pct * part.norm();
    if variance == 0.0 {
        return *part;
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite standard deviation");
    Vector3::new(
        part.x + normal.sample(rng),
        part.y + normal.sample(rng),
        part.z + normal.sample(rng),
    )
}
