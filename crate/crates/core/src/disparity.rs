//! Disparity extraction from a cost volume and post-hoc outlier rejection.
//!
//! Winner-takes-all picks, per pixel, the disparity with the lowest cost.
//! Scanning runs in ascending disparity order with a strict-less update,
//! so ties resolve to the smallest disparity. Pixels where every slice is
//! undefined stay invalid.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cost::WindowSpec;
use crate::grid::Grid2;
use crate::types::{CameraRig, CostVolume, DisparityConfig, DisparityMap, COST_UNDEFINED};

/// Per-pixel argmin over cost slices ordered `d_min, d_min + 1, ...`.
pub fn winner_takes_all_slices(slices: &[Grid2<f32>], d_min: u32) -> DisparityMap {
    assert!(!slices.is_empty(), "need at least one cost slice");
    let width = slices[0].width();
    let height = slices[0].height();
    let mut map = DisparityMap::new(width, height);
    let w = width as usize;

    let fill_row = |y: usize, d_row: &mut [u16], v_row: &mut [bool], c_row: &mut [f32]| {
        for (k, slice) in slices.iter().enumerate() {
            let src = &slice.data()[y * w..(y + 1) * w];
            for x in 0..w {
                let c = src[x];
                if c < c_row[x] {
                    c_row[x] = c;
                    d_row[x] = (d_min as usize + k) as u16;
                }
            }
        }
        for x in 0..w {
            v_row[x] = c_row[x] != COST_UNDEFINED;
        }
    };

    #[cfg(feature = "parallel")]
    map.d_hat
        .data_mut()
        .par_chunks_exact_mut(w)
        .zip(map.valid.data_mut().par_chunks_exact_mut(w))
        .zip(map.cost.data_mut().par_chunks_exact_mut(w))
        .enumerate()
        .for_each(|(y, ((d_row, v_row), c_row))| fill_row(y, d_row, v_row, c_row));
    #[cfg(not(feature = "parallel"))]
    map.d_hat
        .data_mut()
        .chunks_exact_mut(w)
        .zip(map.valid.data_mut().chunks_exact_mut(w))
        .zip(map.cost.data_mut().chunks_exact_mut(w))
        .enumerate()
        .for_each(|(y, ((d_row, v_row), c_row))| fill_row(y, d_row, v_row, c_row));

    map
}

/// Winner-takes-all over the ratio cost of a full cost volume.
pub fn winner_takes_all(costs: &CostVolume) -> DisparityMap {
    winner_takes_all_slices(&costs.c_iou, costs.d_min())
}

/// Invalidate weakly supported winners.
///
/// A pixel survives only when, at its winning disparity, the window
/// holds events (`C_U > 0`), the overlap ratio `C_I / C_U` reaches
/// `eps_c`, and the union count reaches `eps_n` times the in-bounds
/// window area.
pub fn reject_outliers(
    map: &mut DisparityMap,
    costs: &CostVolume,
    cfg: &DisparityConfig,
    spec: &WindowSpec,
) {
    let width = map.width();
    let height = map.height();
    for y in 0..height {
        for x in 0..width {
            if !map.valid.get(x, y) {
                continue;
            }
            let k = costs.slice_index(u32::from(map.d_hat.get(x, y)));
            let cu = costs.c_u[k].get(x, y);
            let ci = costs.c_i[k].get(x, y);
            let area = spec.in_bounds_area(x, y, width, height);
            let keep = cu > 0
                && f64::from(ci) / f64::from(cu) >= cfg.eps_c
                && f64::from(cu) >= cfg.eps_n * f64::from(area);
            if !keep {
                map.valid.set(x, y, false);
                map.cost.set(x, y, COST_UNDEFINED);
            }
        }
    }
}

/// Metric depth per pixel: `f * baseline / d`. Invalid pixels map to
/// NaN; a zero disparity (point at infinity) maps to +inf.
pub fn disparity_to_depth(map: &DisparityMap, rig: &CameraRig) -> Grid2<f64> {
    let fb = rig.f * rig.baseline;
    let data: Vec<f64> = map
        .d_hat
        .data()
        .iter()
        .zip(map.valid.data())
        .map(|(&d, &valid)| match (valid, d) {
            (false, _) => f64::NAN,
            (true, 0) => f64::INFINITY,
            (true, d) => fb / f64::from(d),
        })
        .collect();
    Grid2::from_vec(map.width(), map.height(), data)
}
