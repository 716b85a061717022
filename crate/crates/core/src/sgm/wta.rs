use rayon::prelude::*;

use super::cost::CostVolume;
use crate::error::{Error, Result};
use crate::formats::FloatMap;
use crate::synth::DisparityMap;
use crate::warp::target_column;

/// Per-pixel argmin over disparity; ties go to the smaller disparity.
///
/// With `subpixel`, interior minima are refined by fitting a parabola through
/// the costs at `d - 1`, `d`, `d + 1`.
pub fn wta_disparity<T>(vol: &CostVolume<T>, subpixel: bool) -> DisparityMap
where
    T: Copy + Into<u64> + Send + Sync,
{
    let (w, h) = vol.dims();
    let nd = vol.disparities();
    let mut data = vec![0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let costs = vol.costs(x, y);
            let mut best = 0;
            for d in 1..nd {
                if costs[d].into() < costs[best].into() {
                    best = d;
                }
            }
            let mut disp = best as f64;
            if subpixel && best > 0 && best + 1 < nd {
                let (c0, c1, c2) = (
                    costs[best - 1].into() as f64,
                    costs[best].into() as f64,
                    costs[best + 1].into() as f64,
                );
                let denom = c0 - 2.0 * c1 + c2;
                if denom > 0.0 {
                    disp += ((c0 - c2) / (2.0 * denom)).clamp(-0.5, 0.5);
                }
            }
            *out = disp as f32;
        }
    });
    DisparityMap::from_samples(w, h, data).expect("finite non-negative disparities")
}

/// Invalidate left-view pixels whose right-view counterpart disagrees.
///
/// Pixel `x` of `left` maps to `round(x - dl(x))` in `right`; it is dropped
/// when that column is off-image or invalid, or when the two estimates differ
/// by more than `threshold`.
pub fn lr_check(left: &DisparityMap, right: &DisparityMap, threshold: f32) -> Result<DisparityMap> {
    if left.dims() != right.dims() {
        return Err(Error::dims(left.dims(), right.dims()));
    }
    let (w, h) = left.dims();
    let mut valid = left.valid().to_vec();
    for y in 0..h {
        for x in 0..w {
            let Some(dl) = left.get(x, y) else { continue };
            let consistent = target_column(x, dl, w)
                .and_then(|xr| right.get(xr, y))
                .is_some_and(|dr| (dl - dr).abs() <= threshold);
            valid[y * w + x] = consistent;
        }
    }
    DisparityMap::new(FloatMap::new(w, h, left.data().to_vec(), valid)?)
}
