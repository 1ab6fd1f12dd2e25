//! Domain data model: events, rig calibration, matching configuration and
//! the volume/map containers the pipeline stages exchange.

use std::ops::Deref;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::grid::Grid2;

/// One polarity change: timestamp in seconds, pixel position, polarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

/// Rectified stereo rig: shared intrinsics plus a horizontal baseline.
/// The right camera sits at `+baseline` metres along the left camera's
/// x axis, so a point at depth `z` appears `f * baseline / z` pixels
/// further left in the right image.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraRig {
    pub fn new(f: f64, cx: f64, cy: f64, baseline: f64, width: u32, height: u32) -> Result<Self> {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidConfig(format!("focal length {f} must be positive")));
        }
        if !(baseline > 0.0 && baseline.is_finite()) {
            return Err(Error::InvalidConfig(format!("baseline {baseline} must be positive")));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidConfig("principal point must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "sensor size {width}x{height} must be nonzero"
            )));
        }
        Ok(Self {
            f,
            cx,
            cy,
            baseline,
            width,
            height,
        })
    }

    #[inline]
    pub fn npixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Focal length times baseline, the disparity/depth constant.
    #[inline]
    pub fn fb(&self) -> f64 {
        self.f * self.baseline
    }
}

/// Camera velocity expressed in the left camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    /// Linear velocity in metres per second.
    pub linear: Vector3<f64>,
    /// Angular velocity in radians per second.
    pub angular: Vector3<f64>,
}

impl Velocity {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Result<Self> {
        if !(linear.iter().all(|v| v.is_finite()) && angular.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidConfig("velocity components must be finite".into()));
        }
        Ok(Self { linear, angular })
    }

    pub fn zero() -> Self {
        Self {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }
}

/// Matching parameters shared across the pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityConfig {
    pub d_min: u32,
    pub d_max: u32,
    /// Side length of the square matching window, in pixels.
    pub window: u32,
    /// Minimum accepted match ratio `C_I / C_U` at the winning disparity.
    pub eps_c: f64,
    /// Minimum union support as a fraction of the in-bounds window size.
    pub eps_n: f64,
    /// Events per batch fed to the pipeline.
    pub num_events: usize,
}

impl Default for DisparityConfig {
    fn default() -> Self {
        Self {
            d_min: 0,
            d_max: 31,
            window: 24,
            eps_c: 0.1,
            eps_n: 0.1,
            num_events: 15_000,
        }
    }
}

impl DisparityConfig {
    pub fn validate(&self, rig: &CameraRig) -> Result<()> {
        if self.d_min > self.d_max {
            return Err(Error::InvalidConfig(format!(
                "d_min {} exceeds d_max {}",
                self.d_min, self.d_max
            )));
        }
        if self.d_max >= rig.width {
            return Err(Error::InvalidConfig(format!(
                "d_max {} must stay below the sensor width {}",
                self.d_max, rig.width
            )));
        }
        if self.window == 0 || self.window > rig.width.min(rig.height) {
            return Err(Error::InvalidConfig(format!(
                "window side {} must lie in [1, {}]",
                self.window,
                rig.width.min(rig.height)
            )));
        }
        for (name, eps) in [("eps_c", self.eps_c), ("eps_n", self.eps_n)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::InvalidConfig(format!("{name} {eps} must lie in [0, 1]")));
            }
        }
        if self.num_events == 0 {
            return Err(Error::InvalidConfig("num_events must be at least 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn num_disparities(&self) -> u32 {
        self.d_max - self.d_min + 1
    }

    pub fn disparities(&self) -> impl Iterator<Item = u32> {
        self.d_min..=self.d_max
    }
}

/// An event batch whose members passed domain validation.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    events: Vec<Event>,
}

impl EventBatch {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn t_first(&self) -> Option<f64> {
        self.events.first().map(|e| e.t)
    }

    pub fn t_last(&self) -> Option<f64> {
        self.events.last().map(|e| e.t)
    }

    pub fn into_vec(self) -> Vec<Event> {
        self.events
    }
}

impl Deref for EventBatch {
    type Target = [Event];

    fn deref(&self) -> &[Event] {
        &self.events
    }
}

/// Check pixel bounds, polarity domain and timestamp ordering.
pub fn validate_batch(events: Vec<Event>, rig: &CameraRig) -> Result<EventBatch> {
    let mut prev = f64::NEG_INFINITY;
    for (index, e) in events.iter().enumerate() {
        if u32::from(e.x) >= rig.width || u32::from(e.y) >= rig.height {
            return Err(Error::OutOfBounds {
                index,
                x: e.x,
                y: e.y,
                width: rig.width,
                height: rig.height,
            });
        }
        if e.p != -1 && e.p != 1 {
            return Err(Error::InvalidPolarity { index, value: e.p });
        }
        if e.t < prev {
            return Err(Error::NonMonotoneTimestamps {
                index,
                prev,
                t: e.t,
            });
        }
        prev = e.t;
    }
    Ok(EventBatch { events })
}

/// Signed event image stack, one slice per candidate disparity. Each voxel
/// is the sign of the summed polarities of the events warped into it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDisparityVolume {
    slices: Vec<Grid2<i8>>,
    d_min: u32,
    t_ref: f64,
}

impl EventDisparityVolume {
    pub(crate) fn from_slices(slices: Vec<Grid2<i8>>, d_min: u32, t_ref: f64) -> Self {
        assert!(!slices.is_empty(), "volume needs at least one slice");
        assert!(
            slices.windows(2).all(|s| s[0].same_shape(&s[1])),
            "volume slices must share one shape"
        );
        Self {
            slices,
            d_min,
            t_ref,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.slices[0].width()
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.slices[0].height()
    }

    #[inline]
    pub fn d_min(&self) -> u32 {
        self.d_min
    }

    #[inline]
    pub fn d_max(&self) -> u32 {
        self.d_min + self.slices.len() as u32 - 1
    }

    #[inline]
    pub fn num_disparities(&self) -> u32 {
        self.slices.len() as u32
    }

    #[inline]
    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    /// Slice for the disparity value `d` (not the slice index).
    pub fn slice(&self, d: u32) -> &Grid2<i8> {
        &self.slices[(d - self.d_min) as usize]
    }

    pub fn slices(&self) -> &[Grid2<i8>] {
        &self.slices
    }

    #[inline]
    pub fn value(&self, x: u32, y: u32, d: u32) -> i8 {
        self.slice(d).get(x, y)
    }
}

/// Marks a voxel that received no events in a [`TimestampVolume`].
pub const TS_NONE: f64 = f64::NEG_INFINITY;

/// Most recent original event timestamp per voxel; `TS_NONE` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampVolume {
    slices: Vec<Grid2<f64>>,
    d_min: u32,
    t_ref: f64,
}

impl TimestampVolume {
    pub(crate) fn from_slices(slices: Vec<Grid2<f64>>, d_min: u32, t_ref: f64) -> Self {
        assert!(!slices.is_empty(), "volume needs at least one slice");
        assert!(
            slices.windows(2).all(|s| s[0].same_shape(&s[1])),
            "volume slices must share one shape"
        );
        Self {
            slices,
            d_min,
            t_ref,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.slices[0].width()
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.slices[0].height()
    }

    #[inline]
    pub fn d_min(&self) -> u32 {
        self.d_min
    }

    #[inline]
    pub fn num_disparities(&self) -> u32 {
        self.slices.len() as u32
    }

    #[inline]
    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    pub fn slice(&self, d: u32) -> &Grid2<f64> {
        &self.slices[(d - self.d_min) as usize]
    }

    pub fn slices(&self) -> &[Grid2<f64>] {
        &self.slices
    }
}

/// Cost value for voxels without union support; ranks worse than any
/// defined cost under argmin.
pub const COST_UNDEFINED: f32 = f32::INFINITY;

/// Windowed match statistics per disparity slice: intersection counts,
/// union counts and the negated ratio used for extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub c_i: Vec<Grid2<u32>>,
    pub c_u: Vec<Grid2<u32>>,
    pub c_iou: Vec<Grid2<f32>>,
    d_min: u32,
}

impl CostVolume {
    pub fn new(
        c_i: Vec<Grid2<u32>>,
        c_u: Vec<Grid2<u32>>,
        c_iou: Vec<Grid2<f32>>,
        d_min: u32,
    ) -> Self {
        assert!(!c_u.is_empty(), "cost volume needs at least one slice");
        assert_eq!(c_i.len(), c_u.len());
        assert_eq!(c_iou.len(), c_u.len());
        for k in 0..c_u.len() {
            assert!(c_i[k].same_shape(&c_u[k]) && c_iou[k].same_shape(&c_u[k]));
        }
        Self {
            c_i,
            c_u,
            c_iou,
            d_min,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.c_u[0].width()
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.c_u[0].height()
    }

    #[inline]
    pub fn d_min(&self) -> u32 {
        self.d_min
    }

    #[inline]
    pub fn num_disparities(&self) -> u32 {
        self.c_u.len() as u32
    }

    /// Slice index of the disparity value `d`.
    #[inline]
    pub fn slice_index(&self, d: u32) -> usize {
        (d - self.d_min) as usize
    }
}

/// Per-pixel winning disparity with validity and raw-event masks.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub d_hat: Grid2<u16>,
    pub valid: Grid2<bool>,
    /// Pixels where a raw (unwarped) event occurred in the batch.
    pub has_events: Grid2<bool>,
    /// Cost of the winning disparity; `COST_UNDEFINED` where invalid.
    pub cost: Grid2<f32>,
}

impl DisparityMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            d_hat: Grid2::filled(width, height, 0),
            valid: Grid2::filled(width, height, false),
            has_events: Grid2::filled(width, height, false),
            cost: Grid2::filled(width, height, COST_UNDEFINED),
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.d_hat.width()
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.d_hat.height()
    }

    /// Winning disparity at `(x, y)` if the pixel survived extraction.
    pub fn d_at(&self, x: u32, y: u32) -> Option<u16> {
        self.valid.get(x, y).then(|| self.d_hat.get(x, y))
    }

    pub fn count_valid(&self) -> usize {
        self.valid.data().iter().filter(|&&v| v).count()
    }
}
