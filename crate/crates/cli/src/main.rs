use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stereoforge::fill::{choose_background, fill_background_extend, fill_external, fill_random_texture, FillStrategy};
use stereoforge::formats::{
    read_disp_png16, read_image, read_mask_png, read_pfm, write_image, write_pfm, FloatMap, ImageFormat,
};
use stereoforge::metrics::{
    check_reported_mean, half_resolution_disparity, read_records, Benchmark, EvalRecord, Metric, PixelErrors,
};
use stereoforge::mix::{build_mix, draw_schedule, emit_manifest, rank_datasets, read_catalog, RankedList, Weighting};
use stereoforge::pipeline::{parse_list, run_batch, PipelineConfig};
use stereoforge::sgm::{match_pair, MatchParams, PathSet};
use stereoforge::synth::{emit_histogram_svg, DispStats, DisparityMap, DEFAULT_BIN_WIDTH};

#[derive(Parser)]
#[command(
    name = "stereoforge",
    version,
    about = "Synthesize, match and evaluate stereo training pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize stereo pairs from a list of `image depth` lines.
    Synth(SynthArgs),
    /// Disparity statistics and histogram over a set of maps.
    Stats(StatsArgs),
    /// Evaluate predicted disparities against ground truth.
    Eval(EvalArgs),
    /// Rank training datasets from evaluation records.
    Rank(RankArgs),
    /// Build the mixture of the top-k ranked datasets.
    Mixplan(MixplanArgs),
    /// Run the census/SGM matcher on a rectified pair.
    Match(MatchArgs),
    /// Fill the holes of a warped view.
    Fill(FillArgs),
    /// Mean of four benchmark values, optionally checked against a reported mean.
    Mean(MeanArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    list: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured number of workers.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// Glob of PFM or 16-bit PNG disparity maps.
    #[arg(long)]
    disp_glob: String,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    /// Write the statistics JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted maps, matched to ground truth by file stem.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// epe, bad1, bad2 or d1; defaults to the benchmark's metric.
    #[arg(long)]
    metric: Option<Metric>,
    /// Evaluate at half resolution.
    #[arg(long)]
    half_res: bool,
    /// Count D1 errors only when they also exceed 5% of the ground truth.
    #[arg(long)]
    official_d1: bool,
    #[arg(long, default_value = "model")]
    model_id: String,
    /// Training dataset the evaluated model comes from.
    #[arg(long, default_value = "dataset")]
    dataset_id: String,
    /// Benchmark column (K12, K15, Midd, E3D) recorded as the metric label.
    #[arg(long)]
    benchmark: Option<String>,
    /// Append the record to this JSON-lines file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// JSON-lines evaluation records.
    #[arg(long)]
    records: PathBuf,
    /// JSON array of dataset descriptions (id, manifest_path, sample_count).
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixplanArgs {
    /// Ranking written by `rank`.
    #[arg(long)]
    ranking: PathBuf,
    #[arg(long)]
    k: usize,
    /// sample_count or uniform.
    #[arg(long, default_value = "sample_count")]
    weighting: Weighting,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also draw a schedule of this many dataset ids.
    #[arg(long)]
    schedule: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the schedule, one id per line.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    dmax: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 10)]
    p1: u32,
    #[arg(long, default_value_t = 120)]
    p2: u32,
    /// 4 or 8 aggregation paths.
    #[arg(long, default_value_t = 8)]
    paths: usize,
    #[arg(long, default_value_t = 1.0)]
    lr_threshold: f32,
    /// Skip the left-right consistency check.
    #[arg(long)]
    no_lr: bool,
    #[arg(long)]
    no_subpixel: bool,
}

#[derive(Args)]
struct FillArgs {
    /// random_texture, background_extend or external.
    #[arg(long)]
    strategy: FillStrategy,
    #[arg(long)]
    input: PathBuf,
    /// PNG mask, white = hole.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Background candidates for random_texture.
    #[arg(long)]
    background: Vec<PathBuf>,
    /// Command for external, with {input}, {mask} and {output} placeholders.
    #[arg(long)]
    cmd: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MeanArgs {
    /// K12 K15 Midd E3D.
    #[arg(num_args = 4, allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long)]
    reported: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Stats(a) => stats(a).map(|_| ExitCode::SUCCESS),
        Command::Eval(a) => eval(a).map(|_| ExitCode::SUCCESS),
        Command::Rank(a) => rank(a).map(|_| ExitCode::SUCCESS),
        Command::Mixplan(a) => mixplan(a).map(|_| ExitCode::SUCCESS),
        Command::Match(a) => run_match(a).map(|_| ExitCode::SUCCESS),
        Command::Fill(a) => fill(a).map(|_| ExitCode::SUCCESS),
        Command::Mean(a) => mean(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// PFM or 16-bit PNG, chosen by magic bytes.
fn read_disparity(path: &Path) -> Result<DisparityMap> {
    let bytes = read(path)?;
    let map = if bytes.starts_with(b"\x89PNG") {
        read_disp_png16(&bytes)
    } else {
        read_pfm(&bytes)
    }
    .with_context(|| format!("decoding {}", path.display()))?;
    DisparityMap::new(map).with_context(|| format!("{}", path.display()))
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_seed_override(|k| std::env::var(k).ok())?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    let text = fs::read_to_string(&a.list).with_context(|| format!("reading {}", a.list.display()))?;
    let base = a.list.parent().unwrap_or(Path::new("."));
    let entries = parse_list(&text, base).with_context(|| format!("parsing {}", a.list.display()))?;
    let summary = run_batch(&entries, &a.out, &cfg)?;
    for f in &summary.failures {
        eprintln!("sample {}: {}", f.index, f.error);
    }
    eprintln!(
        "{} samples: {} written, {} failed",
        summary.total, summary.succeeded, summary.failed
    );
    Ok(if summary.failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn stats(a: StatsArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(&a.disp_glob)
        .context("invalid glob pattern")?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no files match {}", a.disp_glob);
    }
    let mut values = Vec::new();
    for p in &paths {
        values.extend(read_disparity(p)?.valid_values().map(f64::from));
    }
    let stats = DispStats::from_values(values, a.bin_width)?;
    if let Some(svg) = &a.svg {
        write(svg, emit_histogram_svg(&stats))?;
    }
    let mut text = serde_json::to_string_pretty(&stats)?;
    text.push('\n');
    write_or_print(a.out.as_deref(), &text)
}

fn disparity_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pfm") || e.eq_ignore_ascii_case("png"))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let benchmark = match &a.benchmark {
        Some(b) => Some(Benchmark::parse(b).with_context(|| format!("unknown benchmark {b:?}"))?),
        None => None,
    };
    let metric = match (a.metric, benchmark) {
        (Some(m), _) => m,
        (None, Some(b)) => b.metric(),
        (None, None) => bail!("give --metric or --benchmark"),
    };

    let gt_files = disparity_files(&a.gt)?;
    if gt_files.is_empty() {
        bail!("no ground-truth maps in {}", a.gt.display());
    }
    let preds = disparity_files(&a.pred)?;
    let mut pooled = PixelErrors::default();
    let mut missing = 0;
    for gt_path in &gt_files {
        let mut gt = read_disparity(gt_path)?;
        let stem = gt_path.file_stem();
        let pred_path = preds.iter().find(|p| p.file_stem() == stem);
        let mut pred = match pred_path {
            Some(p) => read_disparity(p)?,
            None => {
                // an absent prediction covers nothing
                missing += 1;
                let n = gt.len();
                DisparityMap::new(FloatMap::new(gt.width(), gt.height(), vec![0.0; n], vec![false; n])?)?
            }
        };
        if a.half_res {
            let full = gt.dims();
            gt = half_resolution_disparity(&gt)?;
            if pred.dims() == full {
                pred = half_resolution_disparity(&pred)?;
            }
        }
        pooled.extend(
            PixelErrors::collect(&pred, &gt).with_context(|| format!("comparing against {}", gt_path.display()))?,
        );
    }
    if missing > 0 {
        eprintln!("{missing} ground-truth maps have no prediction");
    }
    let value = metric.compute(&pooled, a.official_d1)?;
    let record = EvalRecord {
        model_id: a.model_id,
        dataset_id: a.dataset_id,
        metric: benchmark.map_or_else(|| metric.name().to_string(), |b| b.key().to_string()),
        value,
        n_valid: Some(pooled.n_valid()),
        coverage: Some(pooled.coverage()),
    };
    let line = serde_json::to_string(&record)?;
    println!("{line}");
    if let Some(out) = &a.out {
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(out)
            .with_context(|| format!("opening {}", out.display()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let text = fs::read_to_string(&a.records).with_context(|| format!("reading {}", a.records.display()))?;
    let records = read_records(&text).with_context(|| format!("parsing {}", a.records.display()))?;
    let catalog = match &a.catalog {
        Some(p) => read_catalog(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let ranked = rank_datasets(&records, &catalog)?;
    for (i, e) in ranked.entries().iter().enumerate() {
        eprintln!("{:>3}  {:<24} {:.2}", i + 1, e.dataset.id, e.mean_error);
    }
    let mut text = serde_json::to_string_pretty(&ranked)?;
    text.push('\n');
    write_or_print(a.out.as_deref(), &text)
}

fn mixplan(a: MixplanArgs) -> Result<()> {
    let text = fs::read_to_string(&a.ranking).with_context(|| format!("reading {}", a.ranking.display()))?;
    let ranked: RankedList = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.ranking.display()))?;
    let plan = build_mix(&ranked, a.k, a.weighting)?;
    write_or_print(a.out.as_deref(), &emit_manifest(&plan)?)?;
    if let Some(n) = a.schedule {
        let ids = draw_schedule(&plan, n, a.seed)?;
        let mut text = ids.join("\n");
        text.push('\n');
        match &a.schedule_out {
            Some(p) => write(p, text)?,
            None => eprint!("{text}"),
        }
    }
    Ok(())
}

fn run_match(a: MatchArgs) -> Result<()> {
    let left = read_image(&read(&a.left)?).with_context(|| format!("decoding {}", a.left.display()))?;
    let right = read_image(&read(&a.right)?).with_context(|| format!("decoding {}", a.right.display()))?;
    let paths = match a.paths {
        4 => PathSet::Four,
        8 => PathSet::Eight,
        n => bail!("--paths must be 4 or 8, got {n}"),
    };
    let params = MatchParams {
        d_max: a.dmax,
        census_window: a.window,
        p1: a.p1,
        p2: a.p2,
        paths,
        lr_threshold: (!a.no_lr).then_some(a.lr_threshold),
        subpixel: !a.no_subpixel,
    };
    let disp = match_pair(&left, &right, &params)?;
    write(&a.out, write_pfm(&disp))
}

fn fill(a: FillArgs) -> Result<()> {
    let raw = read_image(&read(&a.input)?).with_context(|| format!("decoding {}", a.input.display()))?;
    let (mw, mh, mask) = read_mask_png(&read(&a.mask)?).with_context(|| format!("decoding {}", a.mask.display()))?;
    if (mw, mh) != raw.dims() {
        bail!("mask is {mw}x{mh} but the image is {}x{}", raw.width(), raw.height());
    }
    let filled = match a.strategy {
        FillStrategy::BackgroundExtend => fill_background_extend(&raw, &mask)?,
        FillStrategy::RandomTexture => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let bg_path = choose_background(&a.background, &mut rng)?;
            let bg = read_image(&read(bg_path)?).with_context(|| format!("decoding {}", bg_path.display()))?;
            fill_random_texture(&raw, &mask, &bg, &mut rng)?
        }
        FillStrategy::External => {
            let cmd = a.cmd.as_deref().context("external fill needs --cmd")?;
            fill_external(&raw, &mask, cmd, &std::env::temp_dir())?
        }
    };
    write(&a.out, write_image(&filled, ImageFormat::Png)?)
}

fn mean(a: MeanArgs) -> Result<ExitCode> {
    let m = stereoforge::metrics::dataset_mean(&a.values)?;
    match a.reported {
        None => {
            println!("{:.2} ({})", m.rounded, m.value);
            Ok(ExitCode::SUCCESS)
        }
        Some(r) => {
            let check = check_reported_mean(&a.values, r)?;
            let verdict = if check.consistent { "consistent" } else { "INCONSISTENT" };
            println!(
                "{:.2} ({}) vs reported {r:.2}: {verdict}",
                check.rounded, check.computed
            );
            Ok(if check.consistent {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
