//! End-to-end synthesis of stereo training pairs from (image, depth) lists.
//!
//! Each sample draws its randomness from its own generator seeded with
//! `derive_seed(global_seed, index)`, so output bytes do not depend on the
//! number of workers or the order in which samples finish.

mod augment;

pub use augment::{
    augment_crop, resize_factor, resize_image, resize_min_dims, resize_nearest, resized_dims, AugmentConfig,
    AugmentRecord,
};

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fill::{
    choose_background, composite, fill_background_extend, fill_external, prepare_background, FillConfig, FillStrategy,
};
use crate::formats::{
    read_disp_png16, read_image, read_pfm, write_image, write_mask_png, write_pfm, FloatMap, ImageFormat,
};
use crate::numeric::derive_seed;
use crate::synth::{depth_to_disparity, sample_scale, DepthMap, DispStats, SynthConfig, DEFAULT_BIN_WIDTH};
use crate::warp::{assemble_sample, forward_warp, Filled, Provenance, StereoSample};

/// Environment variable that overrides `global_seed`.
pub const SEED_ENV: &str = "STEREOFORGE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub synth: SynthConfig,
    pub fill: FillConfig,
    pub augment: AugmentConfig,
    pub min_width: usize,
    pub min_height: usize,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub global_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            fill: FillConfig::default(),
            augment: AugmentConfig::default(),
            min_width: 768,
            min_height: 384,
            workers: 0,
            global_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.fill.validate()?;
        self.augment.validate()?;
        if self.min_width == 0 || self.min_height == 0 {
            return Err(Error::Config("minimum dimensions must be positive".into()));
        }
        let (ch, cw) = self.augment.crop;
        if self.augment.enabled && (ch > self.min_height || cw > self.min_width) {
            return Err(Error::Config(format!(
                "crop {ch}x{cw} (height x width) exceeds the minimum size {}x{}",
                self.min_height, self.min_width
            )));
        }
        Ok(())
    }

    /// Parse TOML text. Relative background paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in &mut cfg.fill.background_pool {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| e.at(path))
    }

    /// Apply the seed override from `lookup(SEED_ENV)`, if set.
    pub fn apply_seed_override(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = lookup(SEED_ENV) {
            self.global_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?;
        }
        Ok(())
    }
}

/// Decode a depth map from PFM or 16-bit PNG (value / 256). Non-positive
/// samples become invalid.
pub fn read_depth(bytes: &[u8]) -> Result<DepthMap> {
    let map: FloatMap = if bytes.starts_with(b"\x89PNG") {
        read_disp_png16(bytes)?
    } else {
        read_pfm(bytes)?
    };
    DepthMap::masking_non_positive(map)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::from(e).at(path))
}

/// Synthesize one stereo sample. All randomness comes from `seed`.
pub fn synth_pair(image_path: &Path, depth_path: &Path, cfg: &PipelineConfig, seed: u64) -> Result<StereoSample> {
    let image = read_image(&read_file(image_path)?).map_err(|e| e.at(image_path))?;
    let depth = read_depth(&read_file(depth_path)?).map_err(|e| e.at(depth_path))?;
    let original_size = image.dims();
    let (left, depth) = resize_min_dims(&image, &depth, cfg.min_width, cfg.min_height)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sample_scale(&cfg.synth, &mut rng);
    let disparity = depth_to_disparity(&depth, s, cfg.synth.scale_mode)?;
    let warp = forward_warp(&left, &disparity)?;

    let mut provenance = Provenance {
        source_image: image_path.display().to_string(),
        source_depth: depth_path.display().to_string(),
        s,
        scale_mode: cfg.synth.scale_mode,
        seed,
        fill_strategy: cfg.fill.strategy,
        original_size,
        size: left.dims(),
        ..Provenance::default()
    };

    let filled = if warp.hole_count() == 0 {
        Filled::complete(warp.right_raw.clone())
    } else {
        match cfg.fill.strategy {
            FillStrategy::BackgroundExtend => {
                Filled::complete(fill_background_extend(&warp.right_raw, &warp.hole_mask)?)
            }
            FillStrategy::RandomTexture => {
                let bg_path = choose_background(&cfg.fill.background_pool, &mut rng)?;
                let bg = read_image(&read_file(bg_path)?).map_err(|e| e.at(bg_path))?;
                let (w, h) = left.dims();
                let (texture, offset) = prepare_background(&bg, w, h, left.channels(), &mut rng)?;
                provenance.background = Some(bg_path.display().to_string());
                provenance.background_offset = Some(offset);
                Filled::complete(composite(&warp.right_raw, &warp.hole_mask, &texture)?)
            }
            FillStrategy::External => {
                let cmd = cfg
                    .fill
                    .external_cmd
                    .as_deref()
                    .ok_or_else(|| Error::Config("external fill needs external_cmd".into()))?;
                Filled::complete(fill_external(
                    &warp.right_raw,
                    &warp.hole_mask,
                    cmd,
                    &std::env::temp_dir(),
                )?)
            }
        }
    };

    let sample = assemble_sample(left, &warp, filled, disparity, provenance)?;
    if cfg.augment.enabled {
        augment_crop(&sample, &cfg.augment, &mut rng)
    } else {
        Ok(sample)
    }
}

/// Write `left.png`, `right.png`, `disparity.pfm`, `hole_mask.png` and
/// `sidecar.json` into `dir`.
pub fn write_sample(sample: &StereoSample, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (w, h) = sample.dims();
    let files: [(&str, Vec<u8>); 5] = [
        ("left.png", write_image(&sample.left, ImageFormat::Png)?),
        ("right.png", write_image(&sample.right, ImageFormat::Png)?),
        ("disparity.pfm", write_pfm(&sample.disparity)),
        ("hole_mask.png", write_mask_png(&sample.hole_mask, w, h)?),
        ("sidecar.json", {
            let mut s = serde_json::to_vec_pretty(&sample.provenance)?;
            s.push(b'\n');
            s
        }),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::from(e).at(path))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListEntry {
    pub image: PathBuf,
    pub depth: PathBuf,
}

/// Parse a list file: one `image depth` pair per line, whitespace separated.
/// Blank lines and lines starting with `#` are skipped; relative paths are
/// resolved against `base`.
pub fn parse_list(text: &str, base: &Path) -> Result<Vec<ListEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [image, depth] = fields[..] else {
            return Err(Error::Config(format!(
                "list line {}: expected `image depth`, found {} fields",
                i + 1,
                fields.len()
            )));
        };
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_relative() {
                base.join(p)
            } else {
                p.to_path_buf()
            }
        };
        out.push(ListEntry {
            image: resolve(image),
            depth: resolve(depth),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub image: String,
    pub depth: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub global_seed: u64,
    pub failures: Vec<SampleFailure>,
    /// Statistics over every valid ground-truth disparity written.
    pub disparity: Option<DispStats>,
}

/// Output directory name of sample `index`.
pub fn sample_dir_name(index: usize) -> String {
    format!("{index:06}")
}

/// Synthesize every entry into `out/<index>/` and write `out/summary.json`.
///
/// Per-sample failures are collected in the summary rather than aborting
/// the batch.
pub fn run_batch(entries: &[ListEntry], out: &Path, cfg: &PipelineConfig) -> Result<BatchSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let results: Vec<Result<Vec<f32>>> = pool.install(|| {
        entries
            .par_iter()
            .enumerate()
            .map(|(index, entry)| {
                let seed = derive_seed(cfg.global_seed, index as u64);
                let sample = synth_pair(&entry.image, &entry.depth, cfg, seed)?;
                write_sample(&sample, &out.join(sample_dir_name(index)))?;
                Ok(sample.disparity.valid_values().collect())
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut values = Vec::new();
    for (index, (entry, result)) in entries.iter().zip(results).enumerate() {
        match result {
            Ok(v) => values.extend(v.into_iter().map(f64::from)),
            Err(e) => failures.push(SampleFailure {
                index,
                image: entry.image.display().to_string(),
                depth: entry.depth.display().to_string(),
                error: e.to_string(),
            }),
        }
    }
    let disparity = if values.is_empty() {
        None
    } else {
        Some(DispStats::from_values(values, DEFAULT_BIN_WIDTH)?)
    };
    let summary = BatchSummary {
        total: entries.len(),
        succeeded: entries.len() - failures.len(),
        failed: failures.len(),
        global_seed: cfg.global_seed,
        failures,
        disparity,
    };
    let mut text = serde_json::to_vec_pretty(&summary)?;
    text.push(b'\n');
    std::fs::write(out.join("summary.json"), text)?;
    Ok(summary)
}
