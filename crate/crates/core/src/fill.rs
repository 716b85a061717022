//! Hole filling for the warped right view.
//!
//! Three strategies: copying texture from an unrelated background image,
//! extending nearby background along the scanline, and handing the holes to
//! an external inpainting program. All of them leave non-hole pixels
//! byte-identical.

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_image, write_image, write_mask_png, ImageFormat, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillStrategy {
    RandomTexture,
    #[default]
    BackgroundExtend,
    External,
}

impl std::str::FromStr for FillStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_texture" | "random-texture" => Ok(Self::RandomTexture),
            "background_extend" | "background-extend" => Ok(Self::BackgroundExtend),
            "external" => Ok(Self::External),
            other => Err(Error::Config(format!("unknown fill strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FillConfig {
    pub strategy: FillStrategy,
    /// Candidate textures for [`FillStrategy::RandomTexture`].
    pub background_pool: Vec<PathBuf>,
    /// Shell command with `{input}`, `{mask}` and `{output}` placeholders.
    pub external_cmd: Option<String>,
    pub seed: u64,
}

const PLACEHOLDERS: [&str; 3] = ["{input}", "{mask}", "{output}"];

impl FillConfig {
    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            FillStrategy::RandomTexture if self.background_pool.is_empty() => Err(Error::EmptyPool),
            FillStrategy::External => {
                let cmd = self
                    .external_cmd
                    .as_deref()
                    .ok_or_else(|| Error::Config("external fill needs external_cmd".into()))?;
                validate_template(cmd)
            }
            _ => Ok(()),
        }
    }
}

fn validate_template(cmd: &str) -> Result<()> {
    match PLACEHOLDERS.iter().find(|p| !cmd.contains(*p)) {
        Some(missing) => Err(Error::Config(format!(
            "external_cmd is missing the {missing} placeholder"
        ))),
        None => Ok(()),
    }
}

fn check_mask(img: &RasterImage, hole_mask: &[bool]) -> Result<()> {
    if hole_mask.len() != img.width() * img.height() {
        return Err(Error::InvalidRaster(format!(
            "mask has {} entries for a {}x{} image",
            hole_mask.len(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Pick one background from the pool.
pub fn choose_background<'a, R: Rng + ?Sized>(pool: &'a [PathBuf], rng: &mut R) -> Result<&'a Path> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(&pool[rng.random_range(0..pool.len())])
}

/// Random crop of `bg` to `width`x`height`, tiling along any axis where the
/// background is too small. Returns the crop and its origin in `bg`.
pub fn prepare_background<R: Rng + ?Sized>(
    bg: &RasterImage,
    width: usize,
    height: usize,
    channels: usize,
    rng: &mut R,
) -> Result<(RasterImage, (usize, usize))> {
    let bg = bg.with_channels(channels);
    let (bw, bh) = bg.dims();
    let pick = |rng: &mut R, src: usize, dst: usize| {
        if src >= dst {
            rng.random_range(0..=src - dst)
        } else {
            rng.random_range(0..src)
        }
    };
    let ox = pick(rng, bw, width);
    let oy = pick(rng, bh, height);
    let mut data = Vec::with_capacity(width * height * channels);
    for y in 0..height {
        for x in 0..width {
            data.extend_from_slice(bg.pixel((ox + x) % bw, (oy + y) % bh));
        }
    }
    Ok((RasterImage::new(width, height, channels, data)?, (ox, oy)))
}

/// Take `fill` wherever `hole_mask` is set and `base` everywhere else.
pub fn composite(base: &RasterImage, hole_mask: &[bool], fill: &RasterImage) -> Result<RasterImage> {
    check_mask(base, hole_mask)?;
    if base.dims() != fill.dims() {
        return Err(Error::dims(base.dims(), fill.dims()));
    }
    let fill = fill.with_channels(base.channels());
    let c = base.channels();
    let mut out = base.clone();
    for (i, _) in hole_mask.iter().enumerate().filter(|(_, &h)| h) {
        out.data_mut()[i * c..(i + 1) * c].copy_from_slice(&fill.data()[i * c..(i + 1) * c]);
    }
    Ok(out)
}

/// Fill holes with texture from an unrelated image, sampled at the same
/// coordinates after a random crop.
pub fn fill_random_texture<R: Rng + ?Sized>(
    right_raw: &RasterImage,
    hole_mask: &[bool],
    bg: &RasterImage,
    rng: &mut R,
) -> Result<RasterImage> {
    check_mask(right_raw, hole_mask)?;
    let (prepared, _) = prepare_background(bg, right_raw.width(), right_raw.height(), right_raw.channels(), rng)?;
    composite(right_raw, hole_mask, &prepared)
}

/// Each hole takes the nearest visible pixel to its right on the same row,
/// else the nearest to its left. Rows without any visible pixel copy the
/// filled result of the nearest row that has one (upper row on ties).
pub fn fill_background_extend(right_raw: &RasterImage, hole_mask: &[bool]) -> Result<RasterImage> {
    check_mask(right_raw, hole_mask)?;
    let (w, h) = right_raw.dims();
    let c = right_raw.channels();
    let mut out = right_raw.clone();

    let mut has_visible = vec![false; h];
    for y in 0..h {
        let mask = &hole_mask[y * w..(y + 1) * w];
        if mask.iter().all(|&m| m) {
            continue;
        }
        has_visible[y] = true;
        // nearest visible column to the right of each x, scanning right to left
        let mut right_src = vec![None; w];
        let mut next = None;
        for x in (0..w).rev() {
            if !mask[x] {
                next = Some(x);
            }
            right_src[x] = next;
        }
        let mut prev = None;
        for x in 0..w {
            if !mask[x] {
                prev = Some(x);
                continue;
            }
            let src = right_src[x].or(prev).expect("row has a visible pixel");
            let (s, d) = ((y * w + src) * c, (y * w + x) * c);
            out.data_mut().copy_within(s..s + c, d);
        }
    }

    if !has_visible.iter().any(|&v| v) {
        return Err(Error::AllHoles);
    }
    for y in 0..h {
        if has_visible[y] {
            continue;
        }
        let src = (1..h)
            .flat_map(|k| [y.checked_sub(k), (y + k < h).then_some(y + k)])
            .flatten()
            .find(|&r| has_visible[r])
            .expect("some row has a visible pixel");
        let stride = w * c;
        out.data_mut().copy_within(src * stride..(src + 1) * stride, y * stride);
    }
    Ok(out)
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Run an external inpainter on the holes.
///
/// The raw view and mask (255 = fill) are written as PNGs into a fresh
/// directory under `workdir`, the placeholders in `cmd_template` are replaced
/// with their quoted paths and the command runs through `sh -c`. The output
/// PNG must match the input size. Non-hole pixels are restored from
/// `right_raw` afterwards, so the tool can only change holes.
pub fn fill_external(
    right_raw: &RasterImage,
    hole_mask: &[bool],
    cmd_template: &str,
    workdir: &Path,
) -> Result<RasterImage> {
    check_mask(right_raw, hole_mask)?;
    validate_template(cmd_template)?;
    let dir = tempfile::Builder::new().prefix("fill-").tempdir_in(workdir)?;
    let input = dir.path().join("input.png");
    let mask = dir.path().join("mask.png");
    let output = dir.path().join("output.png");
    std::fs::write(&input, write_image(right_raw, ImageFormat::Png)?)?;
    std::fs::write(&mask, write_mask_png(hole_mask, right_raw.width(), right_raw.height())?)?;

    let cmd = cmd_template
        .replace("{input}", &shell_quote(&input))
        .replace("{mask}", &shell_quote(&mask))
        .replace("{output}", &shell_quote(&output));
    let result = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| Error::ExternalFailure(format!("cannot spawn sh: {e}")))?;
    if !result.status.success() {
        return Err(Error::ExternalFailure(format!(
            "`{cmd}` exited with {}: {}",
            result.status,
            String::from_utf8_lossy(&result.stderr).trim()
        )));
    }
    let bytes = std::fs::read(&output)
        .map_err(|e| Error::ExternalFailure(format!("no output at {}: {e}", output.display())))?;
    let filled = read_image(&bytes)?;
    if filled.dims() != right_raw.dims() {
        return Err(Error::dims(right_raw.dims(), filled.dims()));
    }
    composite(right_raw, hole_mask, &filled)
}
