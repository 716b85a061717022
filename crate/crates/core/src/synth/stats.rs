use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DisparityMap;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

pub const DEFAULT_BIN_WIDTH: f64 = 1.0;

/// Display window of the histogram plot, in pixels of disparity.
const DISPLAY_RANGE: (f64, f64) = (0.0, 512.0);
const MAX_BINS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `fractions.len() + 1` edges; bin `i` covers `[edges[i], edges[i + 1])`.
    pub edges: Vec<f64>,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Lower of the two middle order statistics when `count` is even.
    pub median: f64,
    pub histogram: Histogram,
}

impl DispStats {
    /// Statistics over an arbitrary collection of disparity samples.
    pub fn from_values(mut values: Vec<f64>, bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidParameter(format!("bin width {bin_width}")));
        }
        if values.is_empty() {
            return Err(Error::NoValidPixels);
        }
        // sorting first makes every statistic independent of pixel order
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let min = values[0];
        let max = values[n - 1];
        let median = values[(n - 1) / 2];
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;

        let start = (min / bin_width).floor() * bin_width;
        let span = ((max - start) / bin_width).floor();
        if span >= MAX_BINS as f64 {
            return Err(Error::InvalidParameter(format!(
                "histogram over [{min}, {max}] at width {bin_width} needs too many bins"
            )));
        }
        let bins = span as usize + 1;
        let mut counts = vec![0usize; bins];
        for &v in &values {
            let i = (((v - start) / bin_width).floor() as usize).min(bins - 1);
            counts[i] += 1;
        }
        let edges = (0..=bins).map(|i| start + i as f64 * bin_width).collect();
        let fractions = counts.iter().map(|&c| c as f64 / n as f64).collect();

        Ok(Self {
            count: n,
            min,
            max,
            mean,
            median,
            histogram: Histogram {
                bin_width,
                edges,
                fractions,
            },
        })
    }
}

/// Statistics over the valid pixels of `disp`.
pub fn disparity_stats(disp: &DisparityMap, bin_width: f64) -> Result<DispStats> {
    DispStats::from_values(disp.valid_values().map(f64::from).collect(), bin_width)
}

/// Bar chart of the histogram: x is disparity, y is the percentage of pixels.
/// Bars are scaled so the tallest displayed bin spans the full plot height.
pub fn emit_histogram_svg(stats: &DispStats) -> String {
    const W: f64 = 800.0;
    const H: f64 = 320.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 40.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let hist = &stats.histogram;
    let lo = hist.edges[0].max(DISPLAY_RANGE.0);
    let hi = hist.edges[hist.edges.len() - 1].min(DISPLAY_RANGE.1);

    let shown: Vec<(f64, f64, f64)> = hist
        .fractions
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f > 0.0)
        .filter_map(|(i, &f)| {
            let x0 = hist.edges[i].max(lo);
            let x1 = hist.edges[i + 1].min(hi);
            (x1 > x0).then_some((x0, x1, 100.0 * f))
        })
        .collect();
    let peak = shown.iter().map(|b| b.2).fold(0.0, f64::max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    for (x0, x1, pct) in &shown {
        let x = LEFT + (x0 - lo) / (hi - lo) * plot_w;
        let w = (x1 - x0) / (hi - lo) * plot_w;
        let h = pct / peak * plot_h;
        let y = TOP + plot_h - h;
        let _ = writeln!(
            svg,
            r##"<rect class="bar" x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" fill="#4878a8"><title>[{x0}, {x1}): {pct:.4}%</title></rect>"##
        );
    }
    let axis_y = TOP + plot_h;
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        W - RIGHT
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{axis_y}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="{}" font-size="12">{lo}</text>"#,
        axis_y + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{hi}</text>"#,
        W - RIGHT,
        axis_y + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">disparity (px)</text>"#,
        LEFT + plot_w / 2.0,
        H - 6.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{peak:.2}%</text>"#,
        LEFT - 4.0,
        TOP + 10.0
    );
    svg.push_str("</svg>\n");
    svg
}
