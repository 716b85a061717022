//! Forward warping of the left view into a preliminary right view.
//!
//! Every source pixel `(x, y)` lands on column `round(x - d)` of the same row
//! (round half up). Targets outside the image are dropped. On a collision the
//! larger disparity wins, and equal disparities go to the larger source `x`.
//! Targets nobody lands on are holes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fill::FillStrategy;
use crate::formats::RasterImage;
use crate::pipeline::AugmentRecord;
use crate::synth::{DisparityMap, ScaleMode};

#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    /// Warped view; hole pixels are zero.
    pub right_raw: RasterImage,
    /// `true` where no source pixel landed.
    pub hole_mask: Vec<bool>,
    /// Column of the winning source pixel for each target.
    pub source_x: Vec<Option<u32>>,
}

impl WarpResult {
    pub fn hole_count(&self) -> usize {
        self.hole_mask.iter().filter(|&&h| h).count()
    }

    /// Left-view mask of source pixels that survived into the right view.
    pub fn visible_sources(&self) -> Vec<bool> {
        let w = self.right_raw.width();
        let mut visible = vec![false; self.source_x.len()];
        for (i, src) in self.source_x.iter().enumerate() {
            if let Some(x) = src {
                visible[(i / w) * w + *x as usize] = true;
            }
        }
        visible
    }
}

/// Target column for a source pixel, or `None` if it leaves the image.
pub fn target_column(x: usize, disparity: f32, width: usize) -> Option<usize> {
    let t = (x as f64 - disparity as f64 + 0.5).floor();
    (t >= 0.0 && t < width as f64).then_some(t as usize)
}

/// Pixels, hole flags and source columns of one warped row.
type WarpedRow = (Vec<u8>, Vec<bool>, Vec<Option<u32>>);

pub fn forward_warp(left: &RasterImage, disp: &DisparityMap) -> Result<WarpResult> {
    if left.dims() != disp.dims() {
        return Err(Error::dims(left.dims(), disp.dims()));
    }
    let (w, h) = left.dims();
    let c = left.channels();

    let rows: Vec<WarpedRow> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut winner: Vec<Option<(f32, usize)>> = vec![None; w];
            for x in 0..w {
                let Some(d) = disp.get(x, y) else { continue };
                let Some(t) = target_column(x, d, w) else { continue };
                // ascending x, so `>=` hands equal-disparity ties to the larger x
                if winner[t].is_none_or(|(best, _)| d >= best) {
                    winner[t] = Some((d, x));
                }
            }
            let src_row = left.row(y);
            let mut pixels = vec![0u8; w * c];
            let mut holes = vec![true; w];
            let mut sources = vec![None; w];
            for (t, win) in winner.iter().enumerate() {
                if let Some((_, x)) = *win {
                    pixels[t * c..(t + 1) * c].copy_from_slice(&src_row[x * c..(x + 1) * c]);
                    holes[t] = false;
                    sources[t] = Some(x as u32);
                }
            }
            (pixels, holes, sources)
        })
        .collect();

    let mut data = Vec::with_capacity(w * h * c);
    let mut hole_mask = Vec::with_capacity(w * h);
    let mut source_x = Vec::with_capacity(w * h);
    for (p, m, s) in rows {
        data.extend(p);
        hole_mask.extend(m);
        source_x.extend(s);
    }
    Ok(WarpResult {
        right_raw: RasterImage::new(w, h, c, data)?,
        hole_mask,
        source_x,
    })
}

/// Every random choice and input that produced a sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source_image: String,
    pub source_depth: String,
    pub s: f64,
    pub scale_mode: ScaleMode,
    pub seed: u64,
    pub fill_strategy: FillStrategy,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub background: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub background_offset: Option<(usize, usize)>,
    pub original_size: (usize, usize),
    pub size: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub augment: Option<AugmentRecord>,
}

/// A filled right view, with any pixels the fill left undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct Filled {
    pub image: RasterImage,
    pub unfilled: Vec<bool>,
}

impl Filled {
    pub fn complete(image: RasterImage) -> Self {
        let n = image.width() * image.height();
        Self {
            image,
            unfilled: vec![false; n],
        }
    }

    /// The raw warp with its holes left open, for debugging dumps.
    pub fn leave_holes(warp: &WarpResult) -> Self {
        Self {
            image: warp.right_raw.clone(),
            unfilled: warp.hole_mask.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoSample {
    pub left: RasterImage,
    pub right: RasterImage,
    /// Left-view ground truth; exactly the map the right view was warped with.
    pub disparity: DisparityMap,
    /// Right-view disocclusion mask.
    pub hole_mask: Vec<bool>,
    pub provenance: Provenance,
}

impl StereoSample {
    pub fn dims(&self) -> (usize, usize) {
        self.left.dims()
    }
}

pub fn assemble_sample(
    left: RasterImage,
    warp: &WarpResult,
    filled: Filled,
    disparity: DisparityMap,
    provenance: Provenance,
) -> Result<StereoSample> {
    for dims in [warp.right_raw.dims(), filled.image.dims(), disparity.dims()] {
        if dims != left.dims() {
            return Err(Error::dims(left.dims(), dims));
        }
    }
    if filled.unfilled.len() != warp.hole_mask.len() {
        return Err(Error::InvalidRaster("unfilled mask length".into()));
    }
    let open = filled.unfilled.iter().filter(|&&u| u).count();
    if open > 0 {
        return Err(Error::UnfilledHoles(open));
    }
    Ok(StereoSample {
        left,
        right: filled.image,
        disparity,
        hole_mask: warp.hole_mask.clone(),
        provenance,
    })
}
