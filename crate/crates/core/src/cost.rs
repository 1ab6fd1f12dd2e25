//! Windowed matching costs between the left and right event volumes.
//!
//! Per slice, the two signed images are compared pixelwise: a pixel is in
//! the union when either side is nonzero and in the intersection when
//! both sides carry the same nonzero sign. Box sums over the matching
//! window turn these into `C_U` and `C_I`, and the score is their negated
//! ratio so that argmin extraction picks the best overlap. Windows are
//! truncated at the image border (only in-bounds pixels contribute) and
//! box sums are computed with two separable one-dimensional passes.
//!
//! Voxels whose window holds no events at all (`C_U = 0`) get
//! [`COST_UNDEFINED`], which ranks worse than any defined cost.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::types::{CameraRig, CostVolume, EventDisparityVolume, TimestampVolume, COST_UNDEFINED};

/// Square matching window. The anchor pixel sits at `(side - 1) / 2`,
/// i.e. up and left of centre for even sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    side: u32,
}

impl WindowSpec {
    pub fn new(side: u32) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidConfig("window side must be at least 1".into()));
        }
        Ok(Self { side })
    }

    pub fn validate_for(&self, rig: &CameraRig) -> Result<()> {
        if self.side > rig.width.min(rig.height) {
            return Err(Error::InvalidConfig(format!(
                "window side {} exceeds sensor {}x{}",
                self.side, rig.width, rig.height
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn side(&self) -> u32 {
        self.side
    }

    #[inline]
    pub fn anchor(&self) -> u32 {
        (self.side - 1) / 2
    }

    #[inline]
    pub fn area(&self) -> u32 {
        self.side * self.side
    }

    /// Pixels of the window anchored at `(x, y)` that fall inside a
    /// `width` x `height` image.
    pub fn in_bounds_area(&self, x: u32, y: u32, width: u32, height: u32) -> u32 {
        self.span(x, width) * self.span(y, height)
    }

    #[inline]
    fn span(&self, c: u32, limit: u32) -> u32 {
        let a = i64::from(self.anchor());
        let lo = (i64::from(c) - a).max(0);
        let hi = (i64::from(c) - a + i64::from(self.side) - 1).min(i64::from(limit) - 1);
        (hi - lo + 1) as u32
    }
}

/// 1 when either side carries an event.
#[inline]
pub fn pixel_union(a: i8, b: i8) -> u32 {
    u32::from(a != 0 || b != 0)
}

/// 1 when both sides carry the same nonzero sign; matching zeros score 0.
#[inline]
pub fn pixel_intersection(a: i8, b: i8) -> u32 {
    u32::from(a == b && a != 0)
}

/// Element types the separable box sum can accumulate.
pub trait WindowSumElem: Copy + Send + Sync {
    const ZERO: Self;
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
}

impl WindowSumElem for u32 {
    const ZERO: Self = 0;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
}

impl WindowSumElem for f64 {
    const ZERO: Self = 0.0;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
}

/// Box sum over the window anchored at every pixel, truncated at the
/// image border. Two separable passes: per-row prefix sums, then a
/// rolling sum over rows.
pub fn window_sum<T: WindowSumElem>(field: &Grid2<T>, spec: &WindowSpec) -> Grid2<T> {
    let w = field.width() as usize;
    let h = field.height() as usize;
    let ahead = i64::from(spec.side - 1 - spec.anchor());
    let behind = i64::from(spec.anchor());

    // Horizontal pass: prefix sums per row.
    let mut hsum = vec![T::ZERO; w * h];
    let mut prefix = vec![T::ZERO; w + 1];
    for (row_in, row_out) in field.rows().zip(hsum.chunks_exact_mut(w)) {
        for i in 0..w {
            prefix[i + 1] = prefix[i].add(row_in[i]);
        }
        for (x, out) in row_out.iter_mut().enumerate() {
            let lo = (x as i64 - behind).max(0) as usize;
            let hi = (x as i64 + ahead).min(w as i64 - 1) as usize;
            *out = prefix[hi + 1].sub(prefix[lo]);
        }
    }

    // Vertical pass: rolling sum of the horizontal results.
    let mut out = vec![T::ZERO; w * h];
    let mut acc = vec![T::ZERO; w];
    let hrow = |y: i64| -> &[T] { &hsum[y as usize * w..(y as usize + 1) * w] };
    for y in 0..=ahead.min(h as i64 - 1) {
        let row = hrow(y);
        for (a, &v) in acc.iter_mut().zip(row) {
            *a = a.add(v);
        }
    }
    for y in 0..h as i64 {
        out[y as usize * w..(y as usize + 1) * w].copy_from_slice(&acc);
        let enter = y + 1 + ahead;
        if enter < h as i64 {
            let row = hrow(enter);
            for (a, &v) in acc.iter_mut().zip(row) {
                *a = a.add(v);
            }
        }
        let leave = y - behind;
        if leave >= 0 {
            let row = hrow(leave);
            for (a, &v) in acc.iter_mut().zip(row) {
                *a = a.sub(v);
            }
        }
    }
    Grid2::from_vec(field.width(), field.height(), out)
}

fn check_pair(left: &EventDisparityVolume, right: &EventDisparityVolume) -> Result<()> {
    if left.width() != right.width()
        || left.height() != right.height()
        || left.d_min() != right.d_min()
        || left.num_disparities() != right.num_disparities()
    {
        return Err(Error::DimensionMismatch(format!(
            "left volume {}x{}x{} (d_min {}) vs right {}x{}x{} (d_min {})",
            left.width(),
            left.height(),
            left.num_disparities(),
            left.d_min(),
            right.width(),
            right.height(),
            right.num_disparities(),
            right.d_min(),
        )));
    }
    Ok(())
}

fn iou_slice(
    left: &Grid2<i8>,
    right: &Grid2<i8>,
    spec: &WindowSpec,
) -> (Grid2<u32>, Grid2<u32>, Grid2<f32>) {
    let w = left.width();
    let h = left.height();
    let union: Vec<u32> = left
        .data()
        .iter()
        .zip(right.data())
        .map(|(&a, &b)| pixel_union(a, b))
        .collect();
    let inter: Vec<u32> = left
        .data()
        .iter()
        .zip(right.data())
        .map(|(&a, &b)| pixel_intersection(a, b))
        .collect();
    let c_u = window_sum(&Grid2::from_vec(w, h, union), spec);
    let c_i = window_sum(&Grid2::from_vec(w, h, inter), spec);
    let c_iou: Vec<f32> = c_i
        .data()
        .iter()
        .zip(c_u.data())
        .map(|(&i, &u)| {
            if u > 0 {
                -(i as f32 / u as f32)
            } else {
                COST_UNDEFINED
            }
        })
        .collect();
    (c_i, c_u, Grid2::from_vec(w, h, c_iou))
}

fn assemble(slices: Vec<(Grid2<u32>, Grid2<u32>, Grid2<f32>)>, d_min: u32) -> CostVolume {
    let mut c_i = Vec::with_capacity(slices.len());
    let mut c_u = Vec::with_capacity(slices.len());
    let mut c_iou = Vec::with_capacity(slices.len());
    for (i, u, r) in slices {
        c_i.push(i);
        c_u.push(u);
        c_iou.push(r);
    }
    CostVolume::new(c_i, c_u, c_iou, d_min)
}

/// Windowed intersection-over-union cost volume for a volume pair.
pub fn iou_cost_volume(
    left: &EventDisparityVolume,
    right: &EventDisparityVolume,
    spec: &WindowSpec,
) -> Result<CostVolume> {
    check_pair(left, right)?;
    #[cfg(feature = "parallel")]
    let slices: Vec<_> = left
        .slices()
        .par_iter()
        .zip(right.slices().par_iter())
        .map(|(l, r)| iou_slice(l, r, spec))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let slices: Vec<_> = left
        .slices()
        .iter()
        .zip(right.slices().iter())
        .map(|(l, r)| iou_slice(l, r, spec))
        .collect();
    Ok(assemble(slices, left.d_min()))
}

/// Single-threaded reference path for the IoU cost volume.
pub fn iou_cost_volume_seq(
    left: &EventDisparityVolume,
    right: &EventDisparityVolume,
    spec: &WindowSpec,
) -> Result<CostVolume> {
    check_pair(left, right)?;
    let slices: Vec<_> = left
        .slices()
        .iter()
        .zip(right.slices().iter())
        .map(|(l, r)| iou_slice(l, r, spec))
        .collect();
    Ok(assemble(slices, left.d_min()))
}

/// Ablation cost that drops the union normalization: the negated
/// intersection count, undefined where the window holds no events.
pub fn intersection_cost_slices(costs: &CostVolume) -> Vec<Grid2<f32>> {
    costs
        .c_i
        .iter()
        .zip(&costs.c_u)
        .map(|(ci, cu)| {
            let vals: Vec<f32> = ci
                .data()
                .iter()
                .zip(cu.data())
                .map(|(&i, &u)| if u > 0 { -(i as f32) } else { COST_UNDEFINED })
                .collect();
            Grid2::from_vec(ci.width(), ci.height(), vals)
        })
        .collect()
}

/// Ablation cost built from timestamp agreement instead of polarity
/// overlap. Each pixel with a timestamp on both sides contributes
/// `1 / ((alpha * |t_L - t_R| + 1) * C_U)`; the window sum of these terms
/// is negated so that argmin extraction still applies. Windows without a
/// single valid pair stay undefined.
pub fn timestamp_cost_volume(
    left_t: &TimestampVolume,
    right_t: &TimestampVolume,
    c_u: &[Grid2<u32>],
    spec: &WindowSpec,
    alpha: f64,
) -> Result<Vec<Grid2<f32>>> {
    if left_t.width() != right_t.width()
        || left_t.height() != right_t.height()
        || left_t.num_disparities() != right_t.num_disparities()
        || left_t.num_disparities() as usize != c_u.len()
    {
        return Err(Error::DimensionMismatch(
            "timestamp volumes and union sums must share one shape".into(),
        ));
    }
    let slice_cost = |k: usize| -> Grid2<f32> {
        let lt = &left_t.slices()[k];
        let rt = &right_t.slices()[k];
        let cu = &c_u[k];
        let terms: Vec<f64> = lt
            .data()
            .iter()
            .zip(rt.data())
            .zip(cu.data())
            .map(|((&a, &b), &u)| {
                if a.is_finite() && b.is_finite() && u > 0 {
                    1.0 / ((alpha * (a - b).abs() + 1.0) * f64::from(u))
                } else {
                    0.0
                }
            })
            .collect();
        let sums = window_sum(&Grid2::from_vec(lt.width(), lt.height(), terms), spec);
        let vals: Vec<f32> = sums
            .data()
            .iter()
            .map(|&s| if s > 0.0 { -(s as f32) } else { COST_UNDEFINED })
            .collect();
        Grid2::from_vec(lt.width(), lt.height(), vals)
    };
    let ks: Vec<usize> = (0..c_u.len()).collect();
    #[cfg(feature = "parallel")]
    let slices = ks.par_iter().map(|&k| slice_cost(k)).collect();
    #[cfg(not(feature = "parallel"))]
    let slices = ks.iter().map(|&k| slice_cost(k)).collect();
    Ok(slices)
}
