//! Depth to training-disparity conversion.
//!
//! A scale `s` is drawn uniformly from `[disp_min, disp_max]` and each valid
//! depth sample becomes `s * depth_max / depth`, where `depth_max` is the
//! per-image maximum over valid pixels. The nearest pixel therefore gets the
//! largest disparity and the farthest gets exactly `s`.

mod stats;

pub use stats::{disparity_stats, emit_histogram_svg, DispStats, Histogram, DEFAULT_BIN_WIDTH};

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::FloatMap;

/// Per-pixel depth; every valid sample is finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(FloatMap);

impl DepthMap {
    pub fn new(map: FloatMap) -> Result<Self> {
        if let Some((index, value)) = map
            .data()
            .iter()
            .zip(map.valid())
            .enumerate()
            .find_map(|(i, (&v, &ok))| (ok && v <= 0.0).then_some((i, v)))
        {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Self(map))
    }

    /// Treat non-positive samples as missing depth instead of rejecting them.
    pub fn masking_non_positive(map: FloatMap) -> Result<Self> {
        let (w, h, data, mut valid) = map.into_parts();
        for (ok, &v) in valid.iter_mut().zip(&data) {
            *ok &= v > 0.0;
        }
        Ok(Self(FloatMap::new(w, h, data, valid)?))
    }

    pub fn into_map(self) -> FloatMap {
        self.0
    }
}

impl Deref for DepthMap {
    type Target = FloatMap;
    fn deref(&self) -> &FloatMap {
        &self.0
    }
}

/// Per-pixel disparity in pixels; every valid sample is finite and `>= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap(FloatMap);

impl DisparityMap {
    pub fn new(map: FloatMap) -> Result<Self> {
        if let Some((index, value)) = map
            .data()
            .iter()
            .zip(map.valid())
            .enumerate()
            .find_map(|(i, (&v, &ok))| (ok && v < 0.0).then_some((i, v)))
        {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Self(map))
    }

    pub fn from_samples(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(FloatMap::from_samples(width, height, data)?)
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(FloatMap::constant(width, height, value)?)
    }

    pub fn as_map(&self) -> &FloatMap {
        &self.0
    }

    pub fn into_map(self) -> FloatMap {
        self.0
    }
}

impl Deref for DisparityMap {
    type Target = FloatMap;
    fn deref(&self) -> &FloatMap {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// `s * depth_max / depth`; the minimum disparity equals `s`.
    #[default]
    Literal,
    /// Literal output rescaled so the maximum disparity equals `s`,
    /// i.e. `s * depth_min / depth`.
    MaxNormalized,
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScaleMode::Literal => "literal",
            ScaleMode::MaxNormalized => "max-normalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub disp_min: f64,
    pub disp_max: f64,
    pub scale_mode: ScaleMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            disp_min: 50.0,
            disp_max: 192.0,
            scale_mode: ScaleMode::Literal,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.disp_min > 0.0 && self.disp_min <= self.disp_max && self.disp_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < disp_min <= disp_max, got [{}, {}]",
                self.disp_min, self.disp_max
            )));
        }
        Ok(())
    }
}

/// Draw the disparity scale uniformly from `[disp_min, disp_max]`.
pub fn sample_scale<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> f64 {
    if cfg.disp_min == cfg.disp_max {
        return cfg.disp_min;
    }
    rng.random_range(cfg.disp_min..=cfg.disp_max)
}

pub fn depth_to_disparity(depth: &DepthMap, s: f64, mode: ScaleMode) -> Result<DisparityMap> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {s}")));
    }
    let (lo, hi) = depth
        .valid_values()
        .fold(None, |acc: Option<(f32, f32)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .ok_or(Error::NoValidPixels)?;
    let reference = match mode {
        ScaleMode::Literal => hi,
        ScaleMode::MaxNormalized => lo,
    } as f64;
    let (w, h) = depth.dims();
    let data = depth
        .data()
        .iter()
        .zip(depth.valid())
        .map(|(&d, &ok)| if ok { (s * reference / d as f64) as f32 } else { 0.0 })
        .collect();
    DisparityMap::new(FloatMap::new(w, h, data, depth.valid().to_vec())?)
}
