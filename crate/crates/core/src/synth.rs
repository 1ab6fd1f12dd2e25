//! Synthetic stereo scenes with analytically known ground truth.
//!
//! A scene is a stack of fronto-parallel textured planes observed by a
//! rig moving with constant linear and angular velocity. Texture points
//! ride exact rigid-body trajectories (matrix exponential, not the
//! linearized flow), and each camera samples event times independently,
//! so the matcher faces genuinely asynchronous data. Ground truth is the
//! exact left-camera projection at the end of the window.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::types::{validate_batch, CameraRig, Event, EventBatch, Velocity};
use crate::volume::CameraSide;

/// Fronto-parallel textured plane. `depth` is the camera-frame Z at
/// t = 0; extents are metres in the left-camera frame at that instant.
/// `points` edge points are scattered uniformly over the rectangle with
/// alternating edge signs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSpec {
    pub depth: f64,
    pub x_extent: (f64, f64),
    pub y_extent: (f64, f64),
    pub points: usize,
}

impl PlaneSpec {
    /// Plane at the depth matching `disparity`, spanning the pixel rows
    /// `y_band_px` and the stereo-visible width shrunk by `margin_px` on
    /// each side, all measured at t = 0.
    pub fn banded(
        disparity: f64,
        y_band_px: (f64, f64),
        margin_px: f64,
        points: usize,
        rig: &CameraRig,
    ) -> Result<Self> {
        if !(disparity > 0.0 && disparity.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "plane disparity {disparity} must be positive"
            )));
        }
        let z = rig.fb() / disparity;
        // Left camera sees X ∈ [(m − cx), (w−1−m − cx)]·z/f; the right
        // camera's view of the same band sits `baseline` further right.
        let x_lo = rig.baseline + (margin_px - rig.cx) * z / rig.f;
        let x_hi = (f64::from(rig.width - 1) - margin_px - rig.cx) * z / rig.f;
        let y_lo = (y_band_px.0 - rig.cy) * z / rig.f;
        let y_hi = (y_band_px.1 - rig.cy) * z / rig.f;
        if x_lo >= x_hi || y_lo >= y_hi {
            return Err(Error::InvalidConfig(format!(
                "plane at depth {z:.3} has an empty stereo-visible extent"
            )));
        }
        Ok(Self {
            depth: z,
            x_extent: (x_lo, x_hi),
            y_extent: (y_lo, y_hi),
            points,
        })
    }
}

/// Full scene description; deterministic given `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub planes: Vec<PlaneSpec>,
    pub vel: Velocity,
    /// Observation window length in seconds.
    pub duration: f64,
    /// Events emitted per texture point per second, per camera.
    pub event_rate: f64,
    /// Spurious uniformly random events added per camera.
    pub noise_events: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.planes.is_empty() {
            return Err(Error::InvalidConfig("scene needs at least one plane".into()));
        }
        for plane in &self.planes {
            if !(plane.depth > 0.0 && plane.depth.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "plane depth {} must be positive",
                    plane.depth
                )));
            }
            if plane.x_extent.0 >= plane.x_extent.1 || plane.y_extent.0 >= plane.y_extent.1 {
                return Err(Error::InvalidConfig("plane extent is empty".into()));
            }
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration {} must be positive",
                self.duration
            )));
        }
        if !(self.event_rate > 0.0 && self.event_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "event rate {} must be positive",
                self.event_rate
            )));
        }
        Ok(())
    }
}

/// Tile the frame into horizontal bands, one plane per disparity, with
/// `gap_px` empty rows between bands so matching windows rarely straddle
/// a depth discontinuity.
#[allow(clippy::too_many_arguments)]
pub fn tiled_scene(
    disparities: &[f64],
    points_per_plane: usize,
    gap_px: f64,
    vel: Velocity,
    duration: f64,
    event_rate: f64,
    noise_events: usize,
    seed: u64,
    rig: &CameraRig,
) -> Result<SceneSpec> {
    if disparities.is_empty() {
        return Err(Error::InvalidConfig("need at least one plane disparity".into()));
    }
    let n = disparities.len() as f64;
    let margin = 4.0;
    let usable = f64::from(rig.height - 1) - 2.0 * margin;
    let band_h = (usable - (n - 1.0) * gap_px) / n;
    if band_h < 8.0 {
        return Err(Error::InvalidConfig(format!(
            "bands of {band_h:.1} px are too thin for {n} planes on a {}-px-high sensor",
            rig.height
        )));
    }
    let planes = disparities
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let y0 = margin + i as f64 * (band_h + gap_px);
            PlaneSpec::banded(d, (y0, y0 + band_h), 6.0, points_per_plane, rig)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneSpec {
        planes,
        vel,
        duration,
        event_rate,
        noise_events,
        seed,
    })
}

/// Generated stereo batches plus ground truth. The truth maps are
/// left-referenced with NaN at uncovered pixels.
#[derive(Debug, Clone)]
pub struct StereoScene {
    pub left: EventBatch,
    pub right: EventBatch,
    pub gt_disparity: Grid2<f32>,
    pub gt_depth: Grid2<f32>,
}

/// Skew-symmetric left Jacobian of SO(3), Taylor-expanded near zero.
fn left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = phi.norm_squared();
    let hat = phi.cross_matrix();
    let (a, b) = if theta_sq < 1e-12 {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        let theta = theta_sq.sqrt();
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    Matrix3::identity() + a * hat + b * (hat * hat)
}

/// Exact camera-frame position at time `t` of a world-fixed point that
/// sits at `p0` at t = 0 while the camera moves with constant body
/// velocity: `P(t) = exp(-t [ω, v]) ∘ P0`.
pub fn point_at(p0: &Vector3<f64>, vel: &Velocity, t: f64) -> Vector3<f64> {
    let phi = -t * vel.angular;
    Rotation3::new(phi) * p0 + left_jacobian(&phi) * (-t * vel.linear)
}

/// Pinhole projection into one camera of the rig; `None` behind the
/// image plane. The right camera sits `baseline` along +x.
pub fn project(p: &Vector3<f64>, rig: &CameraRig, side: CameraSide) -> Option<(f64, f64)> {
    let x = match side {
        CameraSide::Left => p.x,
        CameraSide::Right => p.x - rig.baseline,
    };
    if p.z <= 1e-9 {
        return None;
    }
    Some((rig.f * x / p.z + rig.cx, rig.f * p.y / p.z + rig.cy))
}

struct Point {
    p0: Vector3<f64>,
    sign: i8,
}

fn emit_camera(
    points: &[Point],
    spec: &SceneSpec,
    rig: &CameraRig,
    side: CameraSide,
    events_per_point: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Event> {
    let mut events = Vec::with_capacity(points.len() * events_per_point + spec.noise_events);
    for (i, pt) in points.iter().enumerate() {
        for k in 0..events_per_point {
            // One left event is pinned to the exact end of the window so
            // the batch reference time coincides with the truth maps.
            let t = if side == CameraSide::Left && i == 0 && k == 0 {
                spec.duration
            } else {
                rng.gen_range(0.0..spec.duration)
            };
            let p = point_at(&pt.p0, &spec.vel, t);
            let Some((xf, yf)) = project(&p, rig, side) else {
                continue;
            };
            let (xi, yi) = (xf.round(), yf.round());
            if xi < 0.0 || yi < 0.0 || xi >= f64::from(rig.width) || yi >= f64::from(rig.height)
            {
                continue; // point outside the frame: event dropped
            }
            events.push(Event {
                t,
                x: xi as u16,
                y: yi as u16,
                p: pt.sign,
            });
        }
    }
    for _ in 0..spec.noise_events {
        events.push(Event {
            t: rng.gen_range(0.0..spec.duration),
            x: rng.gen_range(0..rig.width) as u16,
            y: rng.gen_range(0..rig.height) as u16,
            p: if rng.gen::<bool>() { 1 } else { -1 },
        });
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    events
}

/// Generate both event batches and the ground-truth maps at
/// t = `duration`. Where several planes land on one pixel the nearest
/// (largest-disparity) one wins.
pub fn generate_stereo_events(spec: &SceneSpec, rig: &CameraRig) -> Result<StereoScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut points = Vec::new();
    for plane in &spec.planes {
        for _ in 0..plane.points {
            let x = rng.gen_range(plane.x_extent.0..=plane.x_extent.1);
            let y = rng.gen_range(plane.y_extent.0..=plane.y_extent.1);
            // Neighbouring edge points carry opposite edge signs; both
            // cameras see the same sign for the same point.
            let sign = if points.len() % 2 == 0 { 1 } else { -1 };
            points.push(Point {
                p0: Vector3::new(x, y, plane.depth),
                sign,
            });
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidConfig("scene has zero texture points".into()));
    }

    let events_per_point = (spec.event_rate * spec.duration).round().max(1.0) as usize;
    let left = emit_camera(&points, spec, rig, CameraSide::Left, events_per_point, &mut rng);
    let right = emit_camera(&points, spec, rig, CameraSide::Right, events_per_point, &mut rng);

    let mut gt_disparity = Grid2::filled(rig.width, rig.height, f32::NAN);
    let mut gt_depth = Grid2::filled(rig.width, rig.height, f32::NAN);
    for pt in &points {
        let p = point_at(&pt.p0, &spec.vel, spec.duration);
        let Some((xf, yf)) = project(&p, rig, CameraSide::Left) else {
            continue;
        };
        let (xi, yi) = (xf.round(), yf.round());
        if xi < 0.0 || yi < 0.0 || xi >= f64::from(rig.width) || yi >= f64::from(rig.height) {
            continue;
        }
        let (x, y) = (xi as u32, yi as u32);
        let d = (rig.fb() / p.z) as f32;
        let old = gt_disparity.get(x, y);
        if old.is_nan() || old < d {
            gt_disparity.set(x, y, d);
            gt_depth.set(x, y, p.z as f32);
        }
    }

    Ok(StereoScene {
        left: validate_batch(left, rig)?,
        right: validate_batch(right, rig)?,
        gt_disparity,
        gt_depth,
    })
}

#[cfg(test)]
mod tests {
    use approx::{assert_relative_eq, relative_eq};

    use super::*;
    use crate::motion::motion_field_flow;

    fn rig() -> CameraRig {
        CameraRig::new(300.0, 170.0, 130.0, 0.3, 346, 260).unwrap()
    }

    fn vel(l: [f64; 3], a: [f64; 3]) -> Velocity {
        Velocity::new(Vector3::from(l), Vector3::from(a)).unwrap()
    }

    /// Independent oracle for `point_at`: many small Euler steps of
    /// `dP = (-v - ω×P) dt`.
    fn point_at_euler(p0: &Vector3<f64>, vel: &Velocity, t: f64, steps: usize) -> Vector3<f64> {
        let dt = t / steps as f64;
        let mut p = *p0;
        for _ in 0..steps {
            p += (-vel.linear - vel.angular.cross(&p)) * dt;
        }
        p
    }

    #[test]
    fn exact_trajectory_matches_euler_integration() {
        let v = vel([0.8, -0.4, 1.1], [0.3, -0.5, 0.7]);
        let p0 = Vector3::new(0.4, -0.2, 2.5);
        let exact = point_at(&p0, &v, 0.5);
        let stepped = point_at_euler(&p0, &v, 0.5, 200_000);
        assert_relative_eq!(exact, stepped, max_relative = 1e-4);
    }

    #[test]
    fn zero_time_and_zero_velocity_are_identity() {
        let p0 = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(point_at(&p0, &vel([0.5, 0.2, 0.1], [0.1, 0.2, 0.3]), 0.0), p0);
        assert_eq!(point_at(&p0, &Velocity::zero(), 7.0), p0);
    }

    #[test]
    fn tiny_rotations_cross_the_series_guard_smoothly() {
        // Values must be continuous across the Taylor guard.
        let p0 = Vector3::new(0.3, -0.1, 2.0);
        let v = vel([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let just_below = point_at(&p0, &v, 9.0e-7);
        let just_above = point_at(&p0, &v, 1.1e-6);
        assert_relative_eq!(just_below, just_above, max_relative = 1e-3);
    }

    #[test]
    fn static_point_projects_d_columns_apart() {
        let rig = rig();
        // Depth picked for disparity exactly 6; point on the optical axis.
        let z = rig.fb() / 6.0;
        let spec = SceneSpec {
            planes: vec![PlaneSpec {
                depth: z,
                x_extent: (-1e-12, 1e-12),
                y_extent: (-1e-12, 1e-12),
                points: 1,
            }],
            vel: Velocity::zero(),
            duration: 0.1,
            event_rate: 50.0,
            noise_events: 0,
            seed: 7,
        };
        let scene = generate_stereo_events(&spec, &rig).unwrap();
        assert_eq!(scene.left.len(), 5);
        assert_eq!(scene.right.len(), 5);
        assert!(scene.left.iter().all(|e| (e.x, e.y) == (170, 130)));
        assert!(scene.right.iter().all(|e| (e.x, e.y) == (164, 130)));
        assert_eq!(scene.gt_disparity.get(170, 130), 6.0);
        assert_relative_eq!(f64::from(scene.gt_depth.get(170, 130)), z, max_relative = 1e-6);
    }

    #[test]
    fn single_plane_truth_is_uniform() {
        let rig = rig();
        let spec = tiled_scene(
            &[16.0],
            300,
            26.0,
            vel([0.2, 0.1, 0.3], [0.02, 0.03, 0.01]),
            0.05,
            60.0,
            0,
            11,
            &rig,
        )
        .unwrap();
        let scene = generate_stereo_events(&spec, &rig).unwrap();
        let covered: Vec<f32> = scene
            .gt_disparity
            .data()
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .collect();
        assert!(covered.len() > 100);
        // Motion changes the depth slightly over the window; disparity
        // stays near 16 but not exactly on it.
        assert!(covered.iter().all(|&d| (d - 16.0).abs() < 0.5));
    }

    #[test]
    fn pure_z_rotation_traces_circles_and_ignores_depth() {
        let rig = rig();
        let v = vel([0.0, 0.0, 0.0], [0.0, 0.0, 1.5]);
        let p_near = Vector3::new(0.2, 0.1, 1.0);
        let p_far = p_near * 8.0; // same ray, eight times the depth
        let (x0, y0) = project(&point_at(&p_near, &v, 0.0), &rig, CameraSide::Left).unwrap();
        let r0 = ((x0 - rig.cx).powi(2) + (y0 - rig.cy).powi(2)).sqrt();
        for k in 1..=10 {
            let t = k as f64 * 0.03;
            let (xn, yn) = project(&point_at(&p_near, &v, t), &rig, CameraSide::Left).unwrap();
            let (xf, yf) = project(&point_at(&p_far, &v, t), &rig, CameraSide::Left).unwrap();
            let r = ((xn - rig.cx).powi(2) + (yn - rig.cy).powi(2)).sqrt();
            assert_relative_eq!(r, r0, max_relative = 1e-9);
            assert_relative_eq!(xn, xf, max_relative = 1e-9);
            assert_relative_eq!(yn, yf, max_relative = 1e-9);
        }
    }

    #[test]
    fn trajectory_derivative_matches_flow_field() {
        let rig = rig();
        let v = vel([0.7, -0.3, 0.5], [0.1, 0.2, -0.15]);
        let p0 = Vector3::new(0.3, -0.4, rig.fb() / 12.0);
        let dt = 1e-6;
        let (xa, ya) = project(&point_at(&p0, &v, -dt), &rig, CameraSide::Left).unwrap();
        let (xb, yb) = project(&point_at(&p0, &v, dt), &rig, CameraSide::Left).unwrap();
        let (x0, y0) = project(&p0, &rig, CameraSide::Left).unwrap();
        let flow = motion_field_flow(x0, y0, 12, &v, &rig);
        assert_relative_eq!((xb - xa) / (2.0 * dt), flow.dx, max_relative = 1e-4);
        assert_relative_eq!((yb - ya) / (2.0 * dt), flow.dy, max_relative = 1e-4);
    }

    #[test]
    fn exiting_points_drop_their_later_events() {
        let rig = rig();
        // Plane band hugging the right frame edge, fast rightward image
        // motion (camera moving left): points exit within the window.
        let z = rig.fb() / 10.0;
        let spec = SceneSpec {
            planes: vec![PlaneSpec {
                depth: z,
                x_extent: (
                    (340.0 - rig.cx) * z / rig.f,
                    (345.0 - rig.cx) * z / rig.f,
                ),
                y_extent: ((100.0 - rig.cy) * z / rig.f, (150.0 - rig.cy) * z / rig.f),
                points: 40,
            }],
            vel: vel([-20.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
            duration: 0.1,
            event_rate: 100.0,
            noise_events: 0,
            seed: 3,
        };
        let scene = generate_stereo_events(&spec, &rig).unwrap();
        assert!(!scene.left.is_empty());
        assert!(scene.left.len() < 40 * 10, "exited points must shed events");
        // Early events exist, late ones are gone.
        let t_last = scene.left.t_last().unwrap();
        assert!(t_last < 0.05, "all points exit in the first half: {t_last}");
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let rig = rig();
        let make = |seed| {
            let spec = tiled_scene(
                &[8.0, 20.0],
                200,
                26.0,
                vel([0.5, 0.0, 0.4], [0.0, 0.05, 0.0]),
                0.04,
                75.0,
                50,
                seed,
                &rig,
            )
            .unwrap();
            generate_stereo_events(&spec, &rig).unwrap()
        };
        let a = make(42);
        let b = make(42);
        assert_eq!(a.left.events(), b.left.events());
        assert_eq!(a.right.events(), b.right.events());
        // Bitwise comparison: empty ground-truth pixels hold NaN.
        let bits = |g: &Grid2<f32>| g.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.gt_disparity), bits(&b.gt_disparity));
        let c = make(43);
        assert_ne!(a.left.events(), c.left.events());
    }

    #[test]
    fn stereo_polarities_agree_pixelwise_when_static() {
        let rig = rig();
        let z = rig.fb() / 12.0;
        let spec = SceneSpec {
            planes: vec![PlaneSpec {
                depth: z,
                x_extent: ((60.0 - rig.cx) * z / rig.f, (280.0 - rig.cx) * z / rig.f),
                y_extent: ((40.0 - rig.cy) * z / rig.f, (200.0 - rig.cy) * z / rig.f),
                points: 150,
            }],
            vel: Velocity::zero(),
            duration: 0.02,
            event_rate: 100.0,
            noise_events: 0,
            seed: 5,
        };
        let scene = generate_stereo_events(&spec, &rig).unwrap();
        // Static scene: every left event at (x, y, p) has right events at
        // (x − 12, y) with the same polarity.
        for e in scene.left.iter() {
            assert!(
                scene
                    .right
                    .iter()
                    .any(|r| r.x + 12 == e.x && r.y == e.y && r.p == e.p),
                "missing right twin for {e:?}"
            );
        }
        let n_pos = scene.left.iter().filter(|e| e.p == 1).count();
        let n_neg = scene.left.len() - n_pos;
        assert!(relative_eq!(
            n_pos as f64,
            n_neg as f64,
            max_relative = 0.1
        ));
    }

    #[test]
    fn nearest_plane_wins_overlapping_pixels() {
        let rig = rig();
        let z_near = rig.fb() / 20.0;
        let z_far = rig.fb() / 5.0;
        let on_axis = |z| PlaneSpec {
            depth: z,
            x_extent: (-1e-12, 1e-12),
            y_extent: (-1e-12, 1e-12),
            points: 1,
        };
        // Far plane listed first: order must not matter.
        let spec = SceneSpec {
            planes: vec![on_axis(z_far), on_axis(z_near)],
            vel: Velocity::zero(),
            duration: 0.01,
            event_rate: 100.0,
            noise_events: 0,
            seed: 1,
        };
        let scene = generate_stereo_events(&spec, &rig).unwrap();
        assert_eq!(scene.gt_disparity.get(170, 130), 20.0);
        assert_relative_eq!(
            f64::from(scene.gt_depth.get(170, 130)),
            z_near,
            max_relative = 1e-6
        );
    }
}
