//! Classical stereo matcher used to check synthesized pairs.
//!
//! Census transform, Hamming cost volume, semi-global aggregation,
//! winner-take-all with optional parabola refinement, and a left-right
//! consistency check. The right-view disparity for the check is obtained by
//! running the same matcher on the mirrored, swapped pair.

mod aggregate;
mod census;
mod cost;
mod wta;

pub use aggregate::{aggregate_path, sgm_aggregate, PathSet};
pub use census::{census_bit, census_transform, CensusMap};
pub use cost::{build_cost_volume, CostVolume};
pub use wta::{lr_check, wta_disparity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FloatMap, RasterImage};
use crate::synth::DisparityMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    pub d_max: usize,
    pub census_window: usize,
    pub p1: u32,
    pub p2: u32,
    pub paths: PathSet,
    /// `None` disables the left-right check.
    pub lr_threshold: Option<f32>,
    pub subpixel: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            d_max: 64,
            census_window: 5,
            p1: 10,
            p2: 120,
            paths: PathSet::Eight,
            lr_threshold: Some(1.0),
            subpixel: true,
        }
    }
}

impl MatchParams {
    pub fn with_d_max(mut self, d_max: usize) -> Self {
        self.d_max = d_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        census::validate_window(self.census_window)?;
        if self.d_max < 1 {
            return Err(Error::InvalidParameter("d_max must be at least 1".into()));
        }
        if !(0 < self.p1 && self.p1 < self.p2) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < p1 < p2, got p1={} p2={}",
                self.p1, self.p2
            )));
        }
        if let Some(t) = self.lr_threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("lr threshold {t}")));
            }
        }
        Ok(())
    }
}

/// Left-view disparity without the consistency check.
fn raw_disparity(left: &RasterImage, right: &RasterImage, params: &MatchParams) -> Result<DisparityMap> {
    let cl = census_transform(left, params.census_window)?;
    let cr = census_transform(right, params.census_window)?;
    let vol = build_cost_volume(&cl, &cr, params.d_max)?;
    let agg = sgm_aggregate(&vol, params.p1, params.p2, params.paths);
    Ok(wta_disparity(&agg, params.subpixel))
}

fn mirror_map(map: &DisparityMap) -> Result<DisparityMap> {
    let (w, h) = map.dims();
    let mut data = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in (0..w).rev() {
            data.push(map.data()[y * w + x]);
            valid.push(map.valid()[y * w + x]);
        }
    }
    DisparityMap::new(FloatMap::new(w, h, data, valid)?)
}

/// Full matching pipeline on a rectified pair. Output values lie in `[0, d_max]`.
pub fn match_pair(left: &RasterImage, right: &RasterImage, params: &MatchParams) -> Result<DisparityMap> {
    params.validate()?;
    if left.dims() != right.dims() {
        return Err(Error::dims(left.dims(), right.dims()));
    }
    let (lg, rg) = (left.to_gray(), right.to_gray());
    let dl = raw_disparity(&lg, &rg, params)?;
    let Some(threshold) = params.lr_threshold else {
        return Ok(dl);
    };
    let dr = mirror_map(&raw_disparity(&rg.mirrored(), &lg.mirrored(), params)?)?;
    lr_check(&dl, &dr, threshold)
}
