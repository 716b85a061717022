//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stereoforge::fill::fill_background_extend;
use stereoforge::formats::{
    read_disp_png16, read_pfm, write_disp_png16, write_image, write_pfm, FloatMap, ImageFormat, RasterImage,
};
use stereoforge::metrics::{bad_tau, check_reported_mean, d1_all, epe, EvalRecord, MEAN_TOLERANCE};
use stereoforge::mix::{build_mix, rank_datasets, Weighting};
use stereoforge::pipeline::resize_min_dims;
use stereoforge::sgm::{match_pair, MatchParams};
use stereoforge::synth::{depth_to_disparity, DepthMap, DisparityMap, ScaleMode};
use stereoforge::warp::forward_warp;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// (row, K12, K15, Midd, E3D, reported mean)
const MEAN_ROWS: [(&str, [f64; 4], f64); 9] = [
    ("NMRF", [4.20, 5.10, 7.50, 3.80], 5.15),
    ("IGEV", [4.88, 5.16, 8.47, 3.53], 5.51),
    ("MonSter", [3.62, 3.97, 5.17, 2.03], 3.70),
    ("FoundationStereo", [3.2, 4.9, 5.5, 1.8], 3.85),
    ("SF->FoundationStereo", [4.13, 3.64, 6.56, 2.76], 4.27),
    ("MIX 1", [4.45, 3.67, 6.59, 3.20], 4.48),
    ("MIX 10", [3.49, 3.56, 6.18, 2.10], 3.83),
    ("LightStereo-S", [4.83, 5.06, 13.03, 7.62], 7.64),
    ("StereoBase", [3.45, 4.43, 5.64, 2.05], 3.89),
];

const INCONSISTENT_ROW: (&str, [f64; 4], f64) = ("StereoAnything", [3.01, 3.26, 2.69, 0.77], 2.68);

fn criterion_means() -> Outcome {
    let mut bad = Vec::new();
    for (name, values, printed) in MEAN_ROWS {
        let c = check_reported_mean(&values, printed).unwrap();
        if !c.consistent || (c.rounded - printed).abs() > 1e-9 {
            bad.push(format!("{name}: {:.4} vs {printed}", c.computed));
        }
    }
    let (name, values, printed) = INCONSISTENT_ROW;
    let flagged = check_reported_mean(&values, printed).unwrap();
    if flagged.consistent {
        bad.push(format!("{name} was not flagged"));
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{} cells within ±{MEAN_TOLERANCE} and round to the reported value; {name} flagged ({:.4} vs reported {printed})",
                MEAN_ROWS.len(),
                flagged.computed
            )
        } else {
            bad.join("; ")
        },
    )
}

/// Cross-domain table in reported rank order: (dataset, four cells, reported mean).
#[allow(clippy::approx_constant)]
const CROSS_DOMAIN: [(&str, [f64; 4], f64); 11] = [
    ("FSD", [4.13, 3.64, 6.56, 2.76], 4.27),
    ("SC", [4.11, 4.87, 9.12, 3.17], 5.32),
    ("Tartanair", [4.16, 4.71, 13.95, 5.25], 7.02),
    ("CREStereo", [8.01, 6.18, 13.73, 5.75], 8.42),
    ("Spring", [6.59, 6.23, 16.04, 6.96], 8.96),
    ("Sintel", [6.09, 6.28, 19.28, 6.18], 9.46),
    ("DynamicReplica", [11.84, 15.36, 12.84, 5.32], 11.34),
    ("FallingThings", [4.28, 4.23, 13.17, 27.93], 12.40),
    ("Instereo2K", [13.33, 15.21, 11.75, 11.23], 12.88),
    ("VirtualKitti2", [3.96, 4.00, 22.23, 73.78], 25.99),
    ("UnrealStereo4K", [8.68, 6.90, 44.98, 64.51], 31.27),
];

fn criterion_ranking() -> Outcome {
    // records arrive in alphabetical order so the ranking cannot lean on input order
    let mut records: Vec<EvalRecord> = CROSS_DOMAIN
        .iter()
        .flat_map(|(id, cells, _)| {
            ["K12", "K15", "Midd", "E3D"]
                .iter()
                .zip(cells)
                .map(|(m, &v)| EvalRecord {
                    model_id: "FoundationStereo".into(),
                    dataset_id: id.to_string(),
                    metric: m.to_string(),
                    value: v,
                    n_valid: None,
                    coverage: None,
                })
        })
        .collect();
    records.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
    let ranked = rank_datasets(&records, &[]).unwrap();
    let printed: Vec<&str> = CROSS_DOMAIN.iter().map(|r| r.0).collect();
    if ranked.ids() != printed {
        return outcome(false, format!("rank order {:?}", ranked.ids()));
    }
    for (e, (id, _, mean)) in ranked.entries().iter().zip(CROSS_DOMAIN) {
        if (e.mean_error - mean).abs() > MEAN_TOLERANCE + 1e-9 {
            return outcome(false, format!("{id}: mean {:.4} vs reported {mean}", e.mean_error));
        }
    }
    for k in 1..=CROSS_DOMAIN.len() {
        let plan = build_mix(&ranked, k, Weighting::Uniform).unwrap();
        if plan.ids() != printed[..k] {
            return outcome(false, format!("MIX {k} = {:?}", plan.ids()));
        }
    }
    outcome(
        true,
        "rank order 1-11 and MIX 1-11 memberships match the reported tables",
    )
}

fn brute_force_warp(left: &RasterImage, disp: &[u8]) -> (Vec<u8>, Vec<bool>) {
    let (w, h) = left.dims();
    let c = left.channels();
    let mut pixels = vec![0u8; w * h * c];
    let mut holes = vec![true; w * h];
    for y in 0..h {
        for t in 0..w {
            let mut best: Option<(u8, usize)> = None;
            for x in 0..w {
                let d = disp[y * w + x];
                if x as i64 - d as i64 != t as i64 {
                    continue;
                }
                if best.is_none_or(|(bd, bx)| d > bd || (d == bd && x > bx)) {
                    best = Some((d, x));
                }
            }
            if let Some((_, x)) = best {
                pixels[(y * w + t) * c..(y * w + t + 1) * c].copy_from_slice(left.pixel(x, y));
                holes[y * w + t] = false;
            }
        }
    }
    (pixels, holes)
}

fn criterion_warp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let left = RasterImage::new(16, 16, 3, (0..16 * 16 * 3).map(|_| rng.random()).collect()).unwrap();
        let disp: Vec<u8> = (0..256).map(|_| rng.random_range(0..=8)).collect();
        let d = DisparityMap::from_samples(16, 16, disp.iter().map(|&v| v as f32).collect()).unwrap();
        let warp = forward_warp(&left, &d).unwrap();
        let (pixels, holes) = brute_force_warp(&left, &disp);
        if warp.right_raw.data() != pixels.as_slice() || warp.hole_mask != holes {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!(
            "1000 random 16x16 cases, {mismatches} mismatches, {:.2} s (limit 5 s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// Noise at two scales, so the texture has both fine and coarse structure.
fn textured(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RasterImage {
    let (bw, bh) = (w / 8 + 1, h / 8 + 1);
    let coarse: Vec<[u8; 3]> = (0..bw * bh).map(|_| rng.random()).collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let c = coarse[(y / 8) * bw + x / 8];
            for ch in c {
                let fine: u8 = rng.random();
                data.push(((ch as u16 + fine as u16) / 2) as u8);
            }
        }
    }
    RasterImage::new(w, h, 3, data).unwrap()
}

/// 2 to 4 full-height strips with integer disparities in [10, 60].
fn strips(w: usize, h: usize, rng: &mut ChaCha8Rng) -> DisparityMap {
    let regions = rng.random_range(2..=4);
    let mut cuts: Vec<usize> = (1..regions).map(|_| rng.random_range(w / 8..w - w / 8)).collect();
    cuts.sort_unstable();
    let values: Vec<f32> = (0..regions).map(|_| rng.random_range(10..=60) as f32).collect();
    let row: Vec<f32> = (0..w)
        .map(|x| values[cuts.iter().filter(|&&c| x >= c).count()])
        .collect();
    DisparityMap::from_samples(w, h, row.repeat(h)).unwrap()
}

fn criterion_round_trip() -> Outcome {
    let (w, h) = (768, 384);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let params = MatchParams::default().with_d_max(64);
    let mut worst_fraction: f64 = 1.0;
    let mut worst_time = Duration::ZERO;
    let mut failures = Vec::new();
    for i in 0..20 {
        let left = textured(w, h, &mut rng);
        let gt = strips(w, h, &mut rng);
        let warp = forward_warp(&left, &gt).unwrap();
        let right = fill_background_extend(&warp.right_raw, &warp.hole_mask).unwrap();

        let start = Instant::now();
        let pred = match_pair(&left, &right, &params).unwrap();
        let elapsed = start.elapsed();

        // left pixels that are visible in the synthesized right view
        let visible = warp.visible_sources();
        let total = visible.iter().filter(|&&v| v).count();
        let good = (0..w * h)
            .filter(|&i| visible[i])
            .filter(|&i| pred.valid()[i] && (pred.data()[i] - gt.data()[i]).abs() < 1.0)
            .count();
        let fraction = good as f64 / total as f64;
        worst_fraction = worst_fraction.min(fraction);
        worst_time = worst_time.max(elapsed);
        if fraction < 0.9 || elapsed >= Duration::from_secs(10) {
            failures.push(format!(
                "pair {i}: {:.1}% in {:.2} s",
                100.0 * fraction,
                elapsed.as_secs_f64()
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "20 pairs at 768x384: worst {:.1}% of visible pixels within 1 px (need 90%), slowest {:.2} s (limit 10 s){}",
            100.0 * worst_fraction,
            worst_time.as_secs_f64(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join(", "))
            }
        ),
    )
}

fn criterion_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut problems = Vec::new();
    for case in 0..100 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let data: Vec<f32> = (0..w * h).map(|_| rng.random_range(0.05f32..500.0)).collect();
        let depth = DepthMap::new(FloatMap::from_samples(w, h, data.clone()).unwrap()).unwrap();
        let s = rng.random_range(50.0..=192.0);
        let c = rng.random_range(0.01f32..100.0);
        let scaled = DepthMap::new(depth.map_valid(|v| v * c).unwrap()).unwrap();
        let a = depth_to_disparity(&depth, s, ScaleMode::Literal).unwrap();
        let b = depth_to_disparity(&scaled, s, ScaleMode::Literal).unwrap();
        if a.data().iter().zip(b.data()).any(|(x, y)| ((x - y) / x).abs() > 1e-6) {
            problems.push(format!("case {case}: scale invariance"));
        }
        let min = a.valid_values().fold(f32::INFINITY, f32::min) as f64;
        if ((min - s) / s).abs() > 1e-5 {
            problems.push(format!("case {case}: min {min} vs s {s}"));
        }
        let n = w * h;
        let anti = (0..n).all(|i| (0..n).all(|j| data[i] >= data[j] || a.data()[i] >= a.data()[j]));
        if !anti {
            problems.push(format!("case {case}: anti-monotonicity"));
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "100 random depth maps: scale invariance (1e-6 rel), literal minimum = s (1e-5 rel), anti-monotonicity"
                .into()
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut problems = Vec::new();
    for case in 0..100 {
        let n = rng.random_range(1..400);
        let gt_vals: Vec<f32> = (0..n).map(|_| rng.random_range(0.0f32..200.0)).collect();
        let valid: Vec<bool> = (0..n).map(|i| i == 0 || rng.random_bool(0.8)).collect();
        let pred_vals: Vec<f32> = gt_vals
            .iter()
            .map(|g| (g + rng.random_range(-6.0f32..6.0)).max(0.0))
            .collect();
        let gt = DisparityMap::new(FloatMap::new(n, 1, gt_vals.clone(), valid.clone()).unwrap()).unwrap();
        let pred = DisparityMap::from_samples(n, 1, pred_vals.clone()).unwrap();
        let (b1, b2, b3) = (
            bad_tau(&pred, &gt, 1.0).unwrap(),
            bad_tau(&pred, &gt, 2.0).unwrap(),
            bad_tau(&pred, &gt, 3.0).unwrap(),
        );
        if !(b1 >= b2 && b2 >= b3) || d1_all(&pred, &gt, false).unwrap() != b3 {
            problems.push(format!("case {case}: monotonicity"));
        }
        let same = DisparityMap::new(gt.as_map().clone()).unwrap();
        if epe(&same, &gt).unwrap() != 0.0
            || bad_tau(&same, &gt, 1.0).unwrap() != 0.0
            || d1_all(&same, &gt, false).unwrap() != 0.0
        {
            problems.push(format!("case {case}: pred = gt not zero"));
        }
        let junk: Vec<f32> = (0..n)
            .map(|i| {
                if valid[i] {
                    pred_vals[i]
                } else {
                    rng.random_range(0.0f32..1e4)
                }
            })
            .collect();
        let pred_junk = DisparityMap::from_samples(n, 1, junk).unwrap();
        let same_metrics = epe(&pred, &gt).unwrap() == epe(&pred_junk, &gt).unwrap()
            && [1.0, 2.0, 3.0]
                .iter()
                .all(|&t| bad_tau(&pred, &gt, t).unwrap() == bad_tau(&pred_junk, &gt, t).unwrap());
        if !same_metrics {
            problems.push(format!("case {case}: invalid pixels changed a metric"));
        }
    }
    // error exactly at the threshold is not counted
    let gt = DisparityMap::from_samples(3, 1, vec![10.0, 10.0, 10.0]).unwrap();
    let pred = DisparityMap::from_samples(3, 1, vec![11.0, 12.0, 13.0]).unwrap();
    let boundary = [(1.0, 200.0 / 3.0), (2.0, 100.0 / 3.0), (3.0, 0.0)]
        .iter()
        .all(|&(t, want)| (bad_tau(&pred, &gt, t).unwrap() - want).abs() < 1e-9);
    if !boundary {
        problems.push("boundary error counted".into());
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "100 random pairs: Bad-1 >= Bad-2 >= Bad-3, pred = gt gives 0, boundary not counted, invalid pixels ignored"
                .into()
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_formats() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut problems = Vec::new();
    let mut worst_quant: f64 = 0.0;
    for case in 0..100 {
        let (w, h) = (rng.random_range(1..64), rng.random_range(1..64));
        let n = w * h;
        let pfm_map = FloatMap::new(
            w,
            h,
            (0..n).map(|_| rng.random_range(-1e4f32..1e4)).collect(),
            (0..n).map(|_| rng.random_bool(0.9)).collect(),
        )
        .unwrap();
        let bytes = write_pfm(&pfm_map);
        let back = read_pfm(&bytes).unwrap();
        let exact = (0..n).all(|i| !pfm_map.valid()[i] || back.data()[i].to_bits() == pfm_map.data()[i].to_bits());
        if write_pfm(&back) != bytes || !exact {
            problems.push(format!("case {case}: pfm"));
        }

        let valid: Vec<bool> = (0..n).map(|_| rng.random_bool(0.9)).collect();
        let png_map = FloatMap::new(
            w,
            h,
            (0..n).map(|_| rng.random_range(1.0f32 / 256.0..=255.0)).collect(),
            valid,
        )
        .unwrap();
        let bytes = write_disp_png16(&png_map).unwrap();
        let back = read_disp_png16(&bytes).unwrap();
        if write_disp_png16(&back).unwrap() != bytes || back.valid() != png_map.valid() {
            problems.push(format!("case {case}: png16"));
        }
        for i in (0..n).filter(|&i| png_map.valid()[i]) {
            worst_quant = worst_quant.max((back.data()[i] as f64 - png_map.data()[i] as f64).abs());
        }
    }
    if worst_quant > 1.0 / 512.0 + 1e-6 {
        problems.push(format!("quantization {worst_quant}"));
    }
    outcome(
        problems.is_empty(),
        format!(
            "100 random maps each: PFM and PNG16 canonical round-trips bit-exact, worst PNG16 quantization {worst_quant:.6} px (limit 1/512){}",
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {}", problems.join(", "))
            }
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut list = String::new();
    for i in 0..10 {
        let (w, h) = (rng.random_range(80..160), rng.random_range(40..100));
        let img = textured(w, h, &mut rng);
        std::fs::write(
            dir.path().join(format!("img{i}.png")),
            write_image(&img, ImageFormat::Png).unwrap(),
        )
        .unwrap();
        let cx = rng.random_range(0..w);
        let depth: Vec<f32> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                if x.abs_diff(cx) < w / 5 && y > h / 3 {
                    1.5
                } else {
                    4.0 + y as f32 * 0.01
                }
            })
            .collect();
        std::fs::write(
            dir.path().join(format!("depth{i}.pfm")),
            write_pfm(&FloatMap::from_samples(w, h, depth).unwrap()),
        )
        .unwrap();
        list.push_str(&format!("img{i}.png depth{i}.pfm\n"));
    }
    std::fs::write(dir.path().join("list.txt"), list).unwrap();
    std::fs::write(dir.path().join("config.toml"), "global_seed = 1\n").unwrap();

    let mut trees = Vec::new();
    for workers in [1, 4] {
        let out = dir.path().join(format!("out{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_stereoforge"))
            .args(["synth", "--list"])
            .arg(dir.path().join("list.txt"))
            .arg("--out")
            .arg(&out)
            .arg("--config")
            .arg(dir.path().join("config.toml"))
            .args(["--workers", &workers.to_string()])
            .env("STEREOFORGE_SEED", "4242")
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("synth with {workers} workers exited with {status}"));
        }
        trees.push(tree(&out));
    }
    let summary: serde_json::Value = serde_json::from_slice(&trees[0][Path::new("summary.json")]).unwrap();
    let seeded = summary["global_seed"] == 4242 && summary["succeeded"] == 10;
    let files = trees[0].len();
    outcome(
        trees[0] == trees[1] && seeded && files == 51,
        format!(
            "10 samples, workers 1 vs 4, STEREOFORGE_SEED=4242: {files} files, trees {}",
            if trees[0] == trees[1] {
                "byte-identical"
            } else {
                "DIFFER"
            }
        ),
    )
}

fn criterion_resize() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut problems = Vec::new();
    for _ in 0..50 {
        let (w, h) = (rng.random_range(8..1600), rng.random_range(8..1200));
        let img = RasterImage::filled(w, h, 3, 90).unwrap();
        let depth = DepthMap::new(FloatMap::constant(w, h, 3.0).unwrap()).unwrap();
        let (out, d) = resize_min_dims(&img, &depth, 768, 384).unwrap();
        let (nw, nh) = out.dims();
        let aspect_h = nw as f64 * h as f64 / w as f64;
        let aspect_w = nh as f64 * w as f64 / h as f64;
        let aspect_ok = (nh as f64 - aspect_h).abs() <= 1.0 || (nw as f64 - aspect_w).abs() <= 1.0;
        if nw < 768 || nh < 384 || !aspect_ok || d.dims() != (nw, nh) {
            problems.push(format!("{w}x{h} -> {nw}x{nh}"));
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "50 random sizes reach at least 768x384 with aspect kept within 1 px".into()
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("mean arithmetic", criterion_means),
        ("ranking and MIX membership", criterion_ranking),
        ("warp oracle equivalence", criterion_warp_oracle),
        ("round-trip synthesis check", criterion_round_trip),
        ("formula properties", criterion_formula),
        ("metric properties", criterion_metrics),
        ("format round-trips", criterion_formats),
        ("determinism", criterion_determinism),
        ("resize rule", criterion_resize),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!(
            "[{}] {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
