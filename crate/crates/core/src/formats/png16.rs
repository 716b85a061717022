//! KITTI-style 16-bit disparity PNG: `disparity = stored / 256`, `0` = invalid.

use std::io::Cursor;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use super::FloatMap;
use crate::error::{Error, Result};

pub fn read_disp_png16(bytes: &[u8]) -> Result<FloatMap> {
    let img =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::MalformedPng(e.to_string()))?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::UnsupportedBitDepth(format!(
            "{:?}, expected 16-bit grayscale",
            img.color()
        )));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let raw = buf.into_raw();
    let valid = raw.iter().map(|&v| v != 0).collect();
    let data = raw.iter().map(|&v| v as f32 / 256.0).collect();
    FloatMap::new(w, h, data, valid)
}

/// Invalid pixels become 0; valid ones `round(d * 256)` clamped to `[1, 65535]`.
pub fn write_disp_png16(map: &FloatMap) -> Result<Vec<u8>> {
    let (w, h) = map.dims();
    let raw: Vec<u16> = map
        .data()
        .iter()
        .zip(map.valid())
        .map(|(&d, &ok)| if ok { quantize(d) } else { 0 })
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, raw)
        .ok_or_else(|| Error::InvalidRaster("png16 buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::MalformedPng(e.to_string()))?;
    Ok(out.into_inner())
}

fn quantize(d: f32) -> u16 {
    (d as f64 * 256.0).round().clamp(1.0, 65535.0) as u16
}
