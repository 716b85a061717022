//! Disparity error metrics, four-benchmark mean, and evaluation records.
//!
//! Every metric is computed over pixels valid in both prediction and ground
//! truth. Pixels the prediction leaves invalid are reported through
//! `coverage` rather than being counted as errors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FloatMap, RasterImage};
use crate::numeric::CompensatedSum;
use crate::synth::DisparityMap;

/// Per-pixel absolute errors over the shared valid set, poolable across images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PixelErrors {
    abs: Vec<f64>,
    gt: Vec<f64>,
    gt_valid: usize,
}

impl PixelErrors {
    pub fn collect(pred: &FloatMap, gt: &FloatMap) -> Result<Self> {
        if pred.dims() != gt.dims() {
            return Err(Error::dims(pred.dims(), gt.dims()));
        }
        let mut out = PixelErrors::default();
        for i in 0..gt.len() {
            if !gt.valid()[i] {
                continue;
            }
            out.gt_valid += 1;
            if pred.valid()[i] {
                let g = gt.data()[i] as f64;
                out.abs.push((pred.data()[i] as f64 - g).abs());
                out.gt.push(g);
            }
        }
        Ok(out)
    }

    pub fn extend(&mut self, other: PixelErrors) {
        self.abs.extend(other.abs);
        self.gt.extend(other.gt);
        self.gt_valid += other.gt_valid;
    }

    pub fn n_valid(&self) -> usize {
        self.abs.len()
    }

    /// Fraction of ground-truth-valid pixels that the prediction also covers.
    pub fn coverage(&self) -> f64 {
        if self.gt_valid == 0 {
            0.0
        } else {
            self.abs.len() as f64 / self.gt_valid as f64
        }
    }

    fn require_overlap(&self) -> Result<()> {
        if self.abs.is_empty() {
            Err(Error::NoOverlap)
        } else {
            Ok(())
        }
    }

    pub fn epe(&self) -> Result<f64> {
        self.require_overlap()?;
        let sum: CompensatedSum = self.abs.iter().copied().collect();
        Ok(sum.value() / self.abs.len() as f64)
    }

    pub fn bad(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {tau}"
            )));
        }
        self.require_overlap()?;
        let n = self.abs.iter().filter(|&&e| e > tau).count();
        Ok(percent(n, self.abs.len()))
    }

    /// Share of pixels off by more than 3 px; `official` additionally
    /// requires the error to exceed 5% of the ground truth.
    pub fn d1(&self, official: bool) -> Result<f64> {
        if !official {
            return self.bad(3.0);
        }
        self.require_overlap()?;
        let n = self
            .abs
            .iter()
            .zip(&self.gt)
            .filter(|&(&e, &g)| e > 3.0 && e > 0.05 * g)
            .count();
        Ok(percent(n, self.abs.len()))
    }
}

fn percent(n: usize, total: usize) -> f64 {
    100.0 * n as f64 / total as f64
}

pub fn epe(pred: &DisparityMap, gt: &DisparityMap) -> Result<f64> {
    PixelErrors::collect(pred, gt)?.epe()
}

pub fn bad_tau(pred: &DisparityMap, gt: &DisparityMap, tau: f64) -> Result<f64> {
    PixelErrors::collect(pred, gt)?.bad(tau)
}

pub fn d1_all(pred: &DisparityMap, gt: &DisparityMap, official: bool) -> Result<f64> {
    PixelErrors::collect(pred, gt)?.d1(official)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadRate {
    pub tau: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub epe: f64,
    pub bad: Vec<BadRate>,
    pub d1_all: f64,
    pub n_valid: usize,
    pub coverage: f64,
}

pub const DEFAULT_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];

pub fn evaluate(errors: &PixelErrors, thresholds: &[f64], official_d1: bool) -> Result<MetricReport> {
    let bad = thresholds
        .iter()
        .map(|&tau| {
            Ok(BadRate {
                tau,
                percent: errors.bad(tau)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MetricReport {
        epe: errors.epe()?,
        bad,
        d1_all: errors.d1(official_d1)?,
        n_valid: errors.n_valid(),
        coverage: errors.coverage(),
    })
}

/// Metric selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Epe,
    Bad1,
    Bad2,
    D1,
}

impl Metric {
    pub fn compute(self, errors: &PixelErrors, official_d1: bool) -> Result<f64> {
        match self {
            Metric::Epe => errors.epe(),
            Metric::Bad1 => errors.bad(1.0),
            Metric::Bad2 => errors.bad(2.0),
            Metric::D1 => errors.d1(official_d1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Epe => "epe",
            Metric::Bad1 => "bad1",
            Metric::Bad2 => "bad2",
            Metric::D1 => "d1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epe" => Ok(Metric::Epe),
            "bad1" => Ok(Metric::Bad1),
            "bad2" => Ok(Metric::Bad2),
            "d1" | "d1-all" | "d1_all" => Ok(Metric::D1),
            _ => Err(Error::InvalidParameter(format!("unknown metric {s:?}"))),
        }
    }
}

/// The four evaluation benchmarks averaged into the cross-domain mean, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Benchmark {
    Kitti2012,
    Kitti2015,
    Middlebury,
    Eth3d,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Kitti2012,
        Benchmark::Kitti2015,
        Benchmark::Middlebury,
        Benchmark::Eth3d,
    ];

    /// Short column key used in evaluation records.
    pub fn key(self) -> &'static str {
        match self {
            Benchmark::Kitti2012 => "K12",
            Benchmark::Kitti2015 => "K15",
            Benchmark::Middlebury => "Midd",
            Benchmark::Eth3d => "E3D",
        }
    }

    /// Metric reported for this benchmark.
    pub fn metric(self) -> Metric {
        match self {
            Benchmark::Kitti2012 | Benchmark::Kitti2015 => Metric::D1,
            Benchmark::Middlebury => Metric::Bad2,
            Benchmark::Eth3d => Metric::Bad1,
        }
    }

    /// Parse a record's metric label: a column key or a full benchmark name.
    pub fn parse(label: &str) -> Option<Benchmark> {
        let norm: String = label
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "k12" | "kitti12" | "kitti2012" => Some(Benchmark::Kitti2012),
            "k15" | "kitti15" | "kitti2015" => Some(Benchmark::Kitti2015),
            "midd" | "middlebury" => Some(Benchmark::Middlebury),
            "e3d" | "eth3d" => Some(Benchmark::Eth3d),
            _ => None,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMean {
    pub value: f64,
    /// `value` rounded half-up to two decimals.
    pub rounded: f64,
}

/// Round half-up to two decimals.
///
/// The value is first snapped to six decimals so that inputs such as 7.635,
/// stored as 7.63499…, still round up.
pub fn round2(value: f64) -> f64 {
    let hundredths = (value * 1e6).round() / 1e4;
    hundredths.round() / 100.0
}

/// Mean of the four benchmark values (K12, K15, Midd, E3D).
pub fn dataset_mean(values: &[f64]) -> Result<DatasetMean> {
    if values.len() != 4 {
        return Err(Error::ArityMismatch {
            expected: 4,
            found: values.len(),
        });
    }
    if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite metric value {v}")));
    }
    let sum: CompensatedSum = values.iter().copied().collect();
    let value = sum.value() / 4.0;
    Ok(DatasetMean {
        value,
        rounded: round2(value),
    })
}

/// Allowed gap between a computed mean and a value printed to two decimals.
pub const MEAN_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub computed: f64,
    pub rounded: f64,
    pub reported: f64,
    pub consistent: bool,
}

/// Compare a reported mean against the mean of its four inputs.
pub fn check_reported_mean(values: &[f64], reported: f64) -> Result<MeanCheck> {
    let m = dataset_mean(values)?;
    Ok(MeanCheck {
        computed: m.value,
        rounded: m.rounded,
        reported,
        consistent: (m.value - reported).abs() <= MEAN_TOLERANCE + 1e-9,
    })
}

fn check_half_res(w: usize, h: usize) -> Result<()> {
    if w < 2 || h < 2 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: 2,
            min_height: 2,
        });
    }
    Ok(())
}

/// Keep the top-left sample of every 2x2 block and halve its value.
pub fn half_resolution_disparity(disp: &DisparityMap) -> Result<DisparityMap> {
    let (w, h) = disp.dims();
    check_half_res(w, h)?;
    let (hw, hh) = (w / 2, h / 2);
    let mut data = Vec::with_capacity(hw * hh);
    let mut valid = Vec::with_capacity(hw * hh);
    for y in 0..hh {
        for x in 0..hw {
            let i = 2 * y * w + 2 * x;
            data.push(disp.data()[i] * 0.5);
            valid.push(disp.valid()[i]);
        }
    }
    DisparityMap::new(FloatMap::new(hw, hh, data, valid)?)
}

/// 2x2 box filter with rounding to nearest.
pub fn half_resolution_image(img: &RasterImage) -> Result<RasterImage> {
    let (w, h) = img.dims();
    check_half_res(w, h)?;
    let (hw, hh, c) = (w / 2, h / 2, img.channels());
    let mut data = Vec::with_capacity(hw * hh * c);
    for y in 0..hh {
        for x in 0..hw {
            for ch in 0..c {
                let s: u32 = [(0, 0), (1, 0), (0, 1), (1, 1)]
                    .iter()
                    .map(|&(dx, dy)| img.pixel(2 * x + dx, 2 * y + dy)[ch] as u32)
                    .sum();
                data.push(((s + 2) / 4) as u8);
            }
        }
    }
    RasterImage::new(hw, hh, c, data)
}

/// One evaluation result, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model_id: String,
    pub dataset_id: String,
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_valid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

/// Parse JSON lines, skipping blank lines.
pub fn read_records(text: &str) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord =
            serde_json::from_str(line).map_err(|e| Error::Config(format!("record on line {}: {e}", i + 1)))?;
        if !rec.value.is_finite() {
            return Err(Error::Config(format!("record on line {}: non-finite value", i + 1)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(records: &[EvalRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
