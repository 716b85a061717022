use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma, Rgb};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FloatMap, RasterImage};
use crate::synth::{DepthMap, DisparityMap};
use crate::warp::StereoSample;

/// Scale factor that brings `(w, h)` up to at least `(min_w, min_h)`; never shrinks.
pub fn resize_factor(w: usize, h: usize, min_w: usize, min_h: usize) -> f64 {
    (min_w as f64 / w as f64).max(min_h as f64 / h as f64).max(1.0)
}

pub fn resized_dims(w: usize, h: usize, min_w: usize, min_h: usize) -> (usize, usize) {
    let f = resize_factor(w, h, min_w, min_h);
    if f == 1.0 {
        return (w, h);
    }
    ((f * w as f64).round() as usize, (f * h as f64).round() as usize)
}

/// Bilinear resize.
pub fn resize_image(img: &RasterImage, nw: usize, nh: usize) -> Result<RasterImage> {
    if img.dims() == (nw, nh) {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let data = match img.channels() {
        1 => {
            let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(w, h, img.data().to_vec())
                .ok_or_else(|| Error::InvalidRaster("buffer size".into()))?;
            imageops::resize(&buf, nw as u32, nh as u32, FilterType::Triangle).into_raw()
        }
        _ => {
            let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, img.to_rgb().into_data())
                .ok_or_else(|| Error::InvalidRaster("buffer size".into()))?;
            imageops::resize(&buf, nw as u32, nh as u32, FilterType::Triangle).into_raw()
        }
    };
    RasterImage::new(nw, nh, img.channels(), data)
}

/// Nearest-neighbour resize; validity travels with each sample.
pub fn resize_nearest(map: &FloatMap, nw: usize, nh: usize) -> Result<FloatMap> {
    let (w, h) = map.dims();
    if (w, h) == (nw, nh) {
        return Ok(map.clone());
    }
    let src = |i: usize, n: usize, m: usize| (((i as f64 + 0.5) * m as f64 / n as f64) as usize).min(m - 1);
    let mut data = Vec::with_capacity(nw * nh);
    let mut valid = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let sy = src(y, nh, h);
        for x in 0..nw {
            let i = sy * w + src(x, nw, w);
            data.push(map.data()[i]);
            valid.push(map.valid()[i]);
        }
    }
    FloatMap::new(nw, nh, data, valid)
}

/// Upscale image and depth together so both sides reach the minimum size,
/// keeping the aspect ratio.
pub fn resize_min_dims(
    img: &RasterImage,
    depth: &DepthMap,
    min_w: usize,
    min_h: usize,
) -> Result<(RasterImage, DepthMap)> {
    if img.dims() != depth.dims() {
        return Err(Error::dims(img.dims(), depth.dims()));
    }
    let (nw, nh) = resized_dims(img.width(), img.height(), min_w, min_h);
    let img = resize_image(img, nw, nh)?;
    let depth = DepthMap::new(resize_nearest(depth, nw, nh)?)?;
    Ok((img, depth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// `(height, width)`.
    pub crop: (usize, usize),
    /// Maximum relative change of brightness and contrast; 0 disables jitter.
    pub jitter: f64,
    /// Chance of erasing one rectangle of the right view.
    pub erase_probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            crop: (352, 640),
            jitter: 0.0,
            erase_probability: 0.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop.0 == 0 || self.crop.1 == 0 {
            return Err(Error::Config("crop must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!("jitter must be in [0, 1), got {}", self.jitter)));
        }
        if !(0.0..=1.0).contains(&self.erase_probability) {
            return Err(Error::Config(format!(
                "erase_probability must be in [0, 1], got {}",
                self.erase_probability
            )));
        }
        Ok(())
    }
}

/// What an augmentation did to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    /// Top-left corner `(x, y)` of the crop window.
    pub crop_origin: (usize, usize),
    /// `(height, width)`.
    pub crop: (usize, usize),
    pub brightness: f64,
    pub contrast: f64,
    /// Erased rectangle `(x, y, width, height)` in the cropped right view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erased: Option<(usize, usize, usize, usize)>,
}

fn jitter(img: &mut RasterImage, brightness: f64, contrast: f64) {
    for v in img.data_mut() {
        let x = (*v as f64 * brightness - 128.0) * contrast + 128.0;
        *v = x.round().clamp(0.0, 255.0) as u8;
    }
}

fn erase<R: Rng + ?Sized>(img: &mut RasterImage, rng: &mut R) -> Option<(usize, usize, usize, usize)> {
    let (w, h) = img.dims();
    let c = img.channels();
    let area = (w * h) as f64;
    for _ in 0..10 {
        let target = area * rng.random_range(0.02..0.2);
        let aspect = rng.random_range(0.3f64.ln()..3.3f64.ln()).exp();
        let ew = (target * aspect).sqrt().round() as usize;
        let eh = (target / aspect).sqrt().round() as usize;
        if ew == 0 || eh == 0 || ew >= w || eh >= h {
            continue;
        }
        let x0 = rng.random_range(0..=w - ew);
        let y0 = rng.random_range(0..=h - eh);
        let mut mean = vec![0u64; c];
        for (i, v) in img.data().iter().enumerate() {
            mean[i % c] += *v as u64;
        }
        let fill: Vec<u8> = mean
            .iter()
            .map(|&s| ((s + (w * h / 2) as u64) / (w * h) as u64) as u8)
            .collect();
        for y in y0..y0 + eh {
            for x in x0..x0 + ew {
                img.pixel_mut(x, y).copy_from_slice(&fill);
            }
        }
        return Some((x0, y0, ew, eh));
    }
    None
}

/// Training-time augmentation: the same random crop window on every view
/// and the ground truth, shared colour jitter, and random erasing of the
/// right view only. Disparity values are left untouched.
pub fn augment_crop<R: Rng + ?Sized>(sample: &StereoSample, cfg: &AugmentConfig, rng: &mut R) -> Result<StereoSample> {
    cfg.validate()?;
    let (w, h) = sample.dims();
    let (ch, cw) = cfg.crop;
    if w < cw || h < ch {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: cw,
            min_height: ch,
        });
    }
    let x0 = rng.random_range(0..=w - cw);
    let y0 = rng.random_range(0..=h - ch);

    let mut left = sample.left.crop(x0, y0, cw, ch)?;
    let mut right = sample.right.crop(x0, y0, cw, ch)?;
    let disparity = DisparityMap::new(sample.disparity.crop(x0, y0, cw, ch)?)?;
    let hole_mask = (y0..y0 + ch)
        .flat_map(|y| sample.hole_mask[y * w + x0..y * w + x0 + cw].iter().copied())
        .collect();

    let (brightness, contrast) = if cfg.jitter > 0.0 {
        let j = cfg.jitter;
        (rng.random_range(1.0 - j..=1.0 + j), rng.random_range(1.0 - j..=1.0 + j))
    } else {
        (1.0, 1.0)
    };
    if cfg.jitter > 0.0 {
        jitter(&mut left, brightness, contrast);
        jitter(&mut right, brightness, contrast);
    }
    let erased = if cfg.erase_probability > 0.0 && rng.random_bool(cfg.erase_probability) {
        erase(&mut right, rng)
    } else {
        None
    };

    let mut provenance = sample.provenance.clone();
    provenance.size = (cw, ch);
    provenance.augment = Some(AugmentRecord {
        crop_origin: (x0, y0),
        crop: cfg.crop,
        brightness,
        contrast,
        erased,
    });
    Ok(StereoSample {
        left,
        right,
        disparity,
        hole_mask,
        provenance,
    })
}
