//! `cloudseg`: sky/cloud segmentation pipeline CLI.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
//! failure. Errors print to stderr as one machine-parsable line
//! `error: <code>: <message>`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cloudseg::analysis::{self, BinnedRoc, PcaAccumulator};
use cloudseg::baselines::{BaselineConfig, BaselineMethod};
use cloudseg::color::{self, ChannelId};
use cloudseg::dataset::{self, ManifestSamples, SampleSource};
use cloudseg::error::{Error, Result};
use cloudseg::eval::{self, Grouping};
use cloudseg::fisheye::{self, FisheyeCalibration, FovConvention, ViewSpec};
use cloudseg::pls;
use cloudseg::report;
use cloudseg::synth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
}

#[derive(Parser, Debug)]
#[command(
    name = "cloudseg",
    version,
    about = "Color-based sky/cloud segmentation: channel analysis, PLS regression, evaluation and fisheye undistortion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for all randomized procedures (fold assignment, trials, synth).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads for per-image parallelism (0 = all cores). Results do
    /// not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,

    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,

    /// Record the wall-clock time in reports and model metadata (off by
    /// default so identical runs produce identical bytes).
    #[arg(long, global = true)]
    stamp: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Color channel tools.
    Channels {
        #[command(subcommand)]
        cmd: ChannelsCmd,
    },
    /// PCA and ROC channel analysis over a dataset.
    Analyze {
        #[command(subcommand)]
        cmd: AnalyzeCmd,
    },
    /// Train a PLS segmentation model on an annotated manifest.
    Train(TrainArgs),
    /// Predict a cloud belongingness map for one image.
    Predict(PredictArgs),
    /// Threshold a probability map into a binary mask.
    Binarize(BinarizeArgs),
    /// Score a trained model over an annotated manifest.
    Evaluate(EvaluateArgs),
    /// K-fold cross-validation.
    Crossval(CrossvalArgs),
    /// ROC sweep of the trained segmenter over random train/test splits.
    Rocsweep(RocsweepArgs),
    /// Compare threshold baselines and the PLS model on one manifest.
    Benchmark(BenchmarkArgs),
    /// Mean F-score grouped by image metadata.
    Breakdown(BreakdownArgs),
    /// Generate a deterministic synthetic dataset.
    Synth(SynthArgs),
    /// Render an undistorted perspective patch from a fisheye sky image.
    Undistort(UndistortArgs),
    /// Build a manifest from a directory of image/_GT pairs.
    ConvertManifest(ConvertManifestArgs),
}

#[derive(Subcommand, Debug)]
enum ChannelsCmd {
    /// Extract one of c1..c16 into a 16-bit PNG plus rescale sidecar.
    Extract(ChannelsExtractArgs),
}

#[derive(Args, Debug)]
struct ChannelsExtractArgs {
    #[arg(long)]
    input: PathBuf,
    /// Channel id, c1..c16.
    #[arg(long)]
    channel: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCmd {
    /// Per-image variance fractions plus the concatenated distribution.
    Pca(AnalyzePcaArgs),
    /// Channel ranking: loading factor and ROC area per channel.
    Rank(AnalyzeRankArgs),
    /// Pooled ROC curve of one channel against the masks.
    Roc(AnalyzeRocArgs),
}

#[derive(Args, Debug)]
struct AnalyzePcaArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Also export the concatenated biplot coordinates.
    #[arg(long)]
    biplot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeRankArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Accept non-binary masks, cloud iff value >= cutoff.
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct AnalyzeRocArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    channel: String,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated channel ids (the default operating point is c15).
    #[arg(long, default_value = "c15")]
    channels: String,
    #[arg(long, default_value_t = 1)]
    components: usize,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output probability map (16-bit PNG + sidecar JSON).
    #[arg(long)]
    prob: PathBuf,
    /// Optional binary mask output (8-bit PNG, 0/255).
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct BinarizeArgs {
    #[arg(long)]
    prob: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct CrossvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Comma-separated channels. One channel: a single detailed run. Several:
    /// each is cross-validated on its own (add --joint to use them as one
    /// feature set instead).
    #[arg(long, default_value = "c15")]
    channels: String,
    #[arg(long, default_value_t = 1)]
    components: usize,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    joint: bool,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct RocsweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value = "c15")]
    channels: String,
    #[arg(long, default_value_t = 1)]
    components: usize,
    /// Training images per trial (default: the named database's split, or
    /// half the manifest).
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated subset of long,souza,li,pls.
    #[arg(long, default_value = "long,souza,li,pls")]
    methods: String,
    /// Required when `pls` is among the methods.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = cloudseg::baselines::DEFAULT_LONG_THRESHOLD)]
    long_threshold: f64,
    #[arg(long, default_value_t = cloudseg::baselines::DEFAULT_SOUZA_THRESHOLD)]
    souza_threshold: f64,
    #[arg(long, default_value_t = cloudseg::baselines::DEFAULT_LI_FIXED_THRESHOLD)]
    li_threshold: f64,
    #[arg(long, default_value_t = cloudseg::baselines::DEFAULT_HYBRID_STD_CUTOFF)]
    li_std_cutoff: f64,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct BreakdownArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// time_of_day, cloud_coverage or sun_distance.
    #[arg(long)]
    group: String,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    binarize_gt: Option<u8>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    images: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct UndistortArgs {
    #[arg(long)]
    input: PathBuf,
    /// Fisheye focal length in pixels per radian.
    #[arg(long)]
    focal: f64,
    /// Optical center as "cx,cy" in source pixels.
    #[arg(long)]
    center: String,
    #[arg(long, default_value_t = 0.0)]
    azimuth: f64,
    #[arg(long)]
    elevation: f64,
    #[arg(long, default_value_t = fisheye::DEFAULT_FOV_DEG)]
    fov: f64,
    #[arg(long, default_value_t = fisheye::DEFAULT_OUT_SIZE)]
    size: usize,
    /// Whether --fov spans the output diagonal or its width.
    #[arg(long, default_value = "diagonal")]
    fov_convention: String,
    /// Fisheye field-of-view half-angle in degrees.
    #[arg(long, default_value_t = 90.0)]
    max_theta: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ConvertManifestArgs {
    /// Directory holding `X.png`/`X.jpg` images and `X_GT.png` masks.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "dataset")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            let rendered = e.render().to_string();
            eprintln!("error: validation: {}", squeeze_one_line(&rendered));
            // Keep the full usage text available below the parsable line.
            eprint!("{rendered}");
            std::process::exit(1);
        }
    };
    if cli.jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    if let Err(err) = run(&cli) {
        eprintln!("error: {}: {}", err.code(), squeeze_one_line(&err.to_string()));
        std::process::exit(err.exit_code());
    }
}

/// Collapses a (possibly multi-line) message into one line, dropping clap's
/// own prefix and usage section.
fn squeeze_one_line(msg: &str) -> String {
    let body = msg.split("\nUsage:").next().unwrap_or(msg);
    let body = body.trim_start_matches("error: ");
    body.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Channels { cmd } => match cmd {
            ChannelsCmd::Extract(args) => channels_extract(cli, args),
        },
        Command::Analyze { cmd } => match cmd {
            AnalyzeCmd::Pca(args) => analyze_pca(cli, args),
            AnalyzeCmd::Rank(args) => analyze_rank(cli, args),
            AnalyzeCmd::Roc(args) => analyze_roc(cli, args),
        },
        Command::Train(args) => train(cli, args),
        Command::Predict(args) => predict(cli, args),
        Command::Binarize(args) => binarize_cmd(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Crossval(args) => crossval(cli, args),
        Command::Rocsweep(args) => rocsweep(cli, args),
        Command::Benchmark(args) => benchmark(cli, args),
        Command::Breakdown(args) => breakdown_cmd(cli, args),
        Command::Synth(args) => synth_cmd(cli, args),
        Command::Undistort(args) => undistort_cmd(cli, args),
        Command::ConvertManifest(args) => convert_manifest(cli, args),
    }
}

fn info(cli: &Cli, msg: &str) {
    if cli.log_level >= LogLevel::Info {
        eprintln!("info: {msg}");
    }
}

fn warn(cli: &Cli, msg: &str) {
    if cli.log_level >= LogLevel::Warn {
        eprintln!("warning: {msg}");
    }
}

fn stamp_suffix(cli: &Cli) -> String {
    if cli.stamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!(" stamp={secs}")
    } else {
        String::new()
    }
}

fn parse_channels(spec: &str) -> Result<Vec<ChannelId>> {
    let channels: Vec<ChannelId> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(ChannelId::parse)
        .collect::<Result<_>>()?;
    if channels.is_empty() {
        return Err(Error::InvalidArgument("no channels given".into()));
    }
    Ok(channels)
}

fn channels_label(channels: &[ChannelId]) -> String {
    channels
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn channels_extract(cli: &Cli, args: &ChannelsExtractArgs) -> Result<()> {
    let ch = ChannelId::parse(&args.channel)?;
    let img = dataset::load_image(&args.input)?;
    let map = color::extract_channel(&img, ch);
    dataset::save_channel_map(&map, &args.output, cli.force)?;
    info(
        cli,
        &format!("wrote {} with rescale sidecar", args.output.display()),
    );
    Ok(())
}

fn analyze_pca(cli: &Cli, args: &AnalyzePcaArgs) -> Result<()> {
    let manifest = dataset::load_manifest(&args.manifest)?;
    let mut acc = PcaAccumulator::new();
    let mut per_image = Vec::with_capacity(manifest.len());
    for i in 0..manifest.len() {
        let img = dataset::load_image(manifest.image_path(i))?;
        let std = analysis::standardize(&color::extract_stack(&img))?;
        per_image.push((manifest.entries[i].image_path.clone(), analysis::pca(&std)?));
        acc.add_stack(&std)?;
    }
    let concatenated = acc.finish()?;
    let config = format!(
        "cmd=analyze-pca manifest={} images={}{}",
        args.manifest.display(),
        manifest.len(),
        stamp_suffix(cli)
    );
    report::write_report(
        &args.report,
        cli.force,
        &report::pca_csv(&config, &per_image, &concatenated),
    )?;
    if let Some(biplot) = &args.biplot {
        report::write_report(biplot, cli.force, &report::biplot_csv(&config, &concatenated))?;
    }
    Ok(())
}

fn analyze_rank(cli: &Cli, args: &AnalyzeRankArgs) -> Result<()> {
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let rows = analysis::rank_channels((0..samples.len()).map(|i| samples.load(i)))?;
    let config = format!(
        "cmd=analyze-rank manifest={} images={}{}",
        args.manifest.display(),
        manifest.len(),
        stamp_suffix(cli)
    );
    report::write_report(&args.report, cli.force, &report::rank_csv(&config, &rows))
}

fn analyze_roc(cli: &Cli, args: &AnalyzeRocArgs) -> Result<()> {
    let ch = ChannelId::parse(&args.channel)?;
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let mut roc = BinnedRoc::new();
    for i in 0..samples.len() {
        let (img, mask) = samples.load(i)?;
        let map = color::extract_channel(&img, ch);
        for (v, l) in map.values.iter().zip(mask.labels()) {
            roc.push(*v, *l == 1);
        }
    }
    let curve = roc.finish(Some(ch))?;
    let config = format!(
        "cmd=analyze-roc manifest={} channel={ch} images={}{}",
        args.manifest.display(),
        manifest.len(),
        stamp_suffix(cli)
    );
    report::write_report(&args.report, cli.force, &report::roc_csv(&config, &curve))
}

fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let channels = parse_channels(&args.channels)?;
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let (mut model, summary) = pls::train_from_images(
        (0..samples.len()).map(|i| samples.load(i)),
        &channels,
        args.components,
    )?;
    if !summary.has_both_classes() {
        warn(
            cli,
            "training pixels are single-class; the model degenerates to a constant",
        );
    }
    let mut meta = serde_json::json!({
        "manifest": args.manifest.display().to_string(),
        "manifest_fnv": dataset::file_fingerprint(&args.manifest)?,
        "images": summary.images,
        "pixels": summary.pixels,
        "cloud_pixels": summary.cloud_pixels,
        "seed": cli.seed,
    });
    if cli.stamp {
        meta["trained_at_unix"] = serde_json::json!(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        );
    }
    model.training_meta = meta;
    dataset::save_model(&model, &args.model, cli.force)?;
    info(
        cli,
        &format!(
            "trained on {} images ({} px); B = [{}]",
            summary.images,
            summary.pixels,
            model
                .coefficients
                .iter()
                .map(|b| format!("{b:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    Ok(())
}

fn predict(cli: &Cli, args: &PredictArgs) -> Result<()> {
    let model = dataset::load_model(&args.model)?;
    let img = dataset::load_image(&args.input)?;
    let prob = pls::predict_image(&model, &img)?;
    dataset::save_prob_map(&prob, &args.prob, cli.force)?;
    if prob.degenerate {
        warn(cli, "constant raw prediction; probability map is all 0.5");
    }
    if let Some(mask_path) = &args.mask {
        let mask = pls::binarize(&prob, args.threshold)?;
        dataset::save_mask(&mask, mask_path, cli.force)?;
    }
    Ok(())
}

fn binarize_cmd(cli: &Cli, args: &BinarizeArgs) -> Result<()> {
    let prob = dataset::load_prob_map(&args.prob)?;
    let mask = pls::binarize(&prob, args.threshold)?;
    dataset::save_mask(&mask, &args.mask, cli.force)
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let model = dataset::load_model(&args.model)?;
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let (per_image, mean, pooled) = eval::evaluate(&samples, &model, args.threshold)?;
    let rows: Vec<(String, eval::Metrics)> = manifest
        .entries
        .iter()
        .map(|e| e.image_path.clone())
        .zip(per_image)
        .collect();
    let config = format!(
        "cmd=evaluate manifest={} model={} threshold={} images={}{}",
        args.manifest.display(),
        args.model.display(),
        args.threshold,
        manifest.len(),
        stamp_suffix(cli)
    );
    report::write_report(
        &args.report,
        cli.force,
        &report::eval_csv(&config, &rows, &mean, &pooled),
    )?;
    info(cli, &format!("mean F-score {:.4}", mean.f_score));
    Ok(())
}

fn crossval(cli: &Cli, args: &CrossvalArgs) -> Result<()> {
    let channels = parse_channels(&args.channels)?;
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let names: Vec<String> = manifest
        .entries
        .iter()
        .map(|e| e.image_path.clone())
        .collect();

    let config = format!(
        "cmd=crossval manifest={} folds={} channels={} components={} threshold={} seed={}{}",
        args.manifest.display(),
        args.folds,
        channels_label(&channels),
        args.components,
        args.threshold,
        cli.seed,
        stamp_suffix(cli)
    );

    if channels.len() == 1 || args.joint {
        let cv = eval::cross_validate(
            &samples,
            args.folds,
            &channels,
            args.components,
            args.threshold,
            cli.seed,
        )?;
        for w in &cv.warnings {
            warn(cli, w);
        }
        report::write_report(
            &args.report,
            cli.force,
            &report::crossval_csv(&config, &cv, &names),
        )?;
        info(cli, &format!("mean F-score {:.4}", cv.mean.f_score));
    } else {
        // Channel sweep: cross-validate each channel on its own.
        let mut out = format!("# config: {config}\n");
        out.push_str("channel,name,precision,recall,f_score,misclassification\n");
        for ch in &channels {
            let cv = eval::cross_validate(
                &samples,
                args.folds,
                &[*ch],
                args.components.min(1),
                args.threshold,
                cli.seed,
            )?;
            for w in &cv.warnings {
                warn(cli, &format!("{ch}: {w}"));
            }
            out.push_str(&format!(
                "{ch},{},{:.6},{:.6},{:.6},{:.6}\n",
                ch.label(),
                cv.mean.precision,
                cv.mean.recall,
                cv.mean.f_score,
                cv.mean.misclassification
            ));
        }
        report::write_report(&args.report, cli.force, &out)?;
    }
    Ok(())
}

fn rocsweep(cli: &Cli, args: &RocsweepArgs) -> Result<()> {
    let channels = parse_channels(&args.channels)?;
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let train_size = args
        .train_size
        .unwrap_or_else(|| eval::default_train_size(&manifest.name, manifest.len()));
    let thresholds = eval::default_sweep_thresholds();
    let sweep = eval::roc_sweep(
        &samples,
        &channels,
        args.components,
        args.trials,
        &thresholds,
        train_size,
        cli.seed,
    )?;
    let config = format!(
        "cmd=rocsweep manifest={} trials={} channels={} components={} train_size={} seed={}{}",
        args.manifest.display(),
        args.trials,
        channels_label(&channels),
        args.components,
        train_size,
        cli.seed,
        stamp_suffix(cli)
    );
    report::write_report(&args.report, cli.force, &report::sweep_csv(&config, &sweep))
}

fn benchmark(cli: &Cli, args: &BenchmarkArgs) -> Result<()> {
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let methods: Vec<String> = args
        .methods
        .split(',')
        .map(|s| s.trim().to_ascii_lowercase())
        .filter(|s| !s.is_empty())
        .collect();
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods given".into()));
    }
    let model = if methods.iter().any(|m| m == "pls") {
        let path = args.model.as_ref().ok_or_else(|| {
            Error::InvalidArgument("--model is required when benchmarking pls".into())
        })?;
        Some(dataset::load_model(path)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut means = Vec::new();
    for method in &methods {
        let mut per_image = Vec::with_capacity(samples.len());
        let mut total_ms = 0.0;
        for i in 0..samples.len() {
            let (img, gt) = samples.load(i)?;
            let started = Instant::now();
            let mask = match method.as_str() {
                "long" => BaselineConfig::new(
                    BaselineMethod::LongRatio,
                    args.long_threshold,
                    args.li_std_cutoff,
                )?
                .segment(&img),
                "souza" => BaselineConfig::new(
                    BaselineMethod::SouzaSaturation,
                    args.souza_threshold,
                    args.li_std_cutoff,
                )?
                .segment(&img),
                "li" => BaselineConfig::new(
                    BaselineMethod::LiHybrid,
                    args.li_threshold,
                    args.li_std_cutoff,
                )?
                .segment(&img),
                "pls" => {
                    let model = model.as_ref().expect("model checked above");
                    let prob = pls::predict_image(model, &img)?;
                    pls::binarize(&prob, args.threshold)?
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown method '{other}' (expected long, souza, li or pls)"
                    )))
                }
            };
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            total_ms += runtime_ms;
            let metrics = eval::score(&mask, &gt)?;
            per_image.push(metrics);
            rows.push(report::BenchRow {
                method: method.clone(),
                image: manifest.entries[i].image_path.clone(),
                metrics,
                runtime_ms,
            });
        }
        means.push((
            method.clone(),
            eval::mean_scores(&per_image),
            total_ms / samples.len() as f64,
        ));
    }
    let config = format!(
        "cmd=benchmark manifest={} methods={} threshold={} long={} souza={} li={} cutoff={}{}",
        args.manifest.display(),
        methods.join("+"),
        args.threshold,
        args.long_threshold,
        args.souza_threshold,
        args.li_threshold,
        args.li_std_cutoff,
        stamp_suffix(cli)
    );
    report::write_report(
        &args.report,
        cli.force,
        &report::bench_csv(&config, &rows, &means),
    )
}

fn breakdown_cmd(cli: &Cli, args: &BreakdownArgs) -> Result<()> {
    let grouping: Grouping = args.group.parse()?;
    let model = dataset::load_model(&args.model)?;
    let manifest = dataset::load_manifest(&args.manifest)?;
    let samples = ManifestSamples::new(&manifest, args.binarize_gt)?;
    let report_data = eval::breakdown(&samples, &model, grouping, args.threshold)?;
    if report_data.skipped > 0 {
        warn(
            cli,
            &format!(
                "{} of {} images lack {} metadata and were skipped",
                report_data.skipped,
                manifest.len(),
                grouping
            ),
        );
    }
    let config = format!(
        "cmd=breakdown manifest={} model={} group={} threshold={}{}",
        args.manifest.display(),
        args.model.display(),
        grouping,
        args.threshold,
        stamp_suffix(cli)
    );
    report::write_report(
        &args.report,
        cli.force,
        &report::breakdown_csv(&config, &report_data),
    )
}

fn synth_cmd(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let cfg = synth::SynthConfig {
        images: args.images,
        size: args.size,
        noise_sigma: args.noise,
        seed: cli.seed,
    };
    let manifest_path = synth::write_dataset(&cfg, &args.out, cli.force)?;
    println!("{}", manifest_path.display());
    Ok(())
}

fn undistort_cmd(cli: &Cli, args: &UndistortArgs) -> Result<()> {
    let center = parse_center(&args.center)?;
    let cal = FisheyeCalibration::new(args.focal, center, args.max_theta.to_radians())?;
    let convention: FovConvention = args.fov_convention.parse()?;
    let view =
        ViewSpec::new(args.azimuth, args.elevation, args.fov, args.size)?.with_convention(convention);
    let src = dataset::load_image(&args.input)?;
    let out = fisheye::undistort(&src, &cal, &view)?;
    dataset::save_image(&out, &args.output, cli.force)
}

fn parse_center(spec: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "center must be 'cx,cy', got '{spec}'"
        )));
    }
    let cx: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad center x '{}'", parts[0])))?;
    let cy: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad center y '{}'", parts[1])))?;
    Ok((cx, cy))
}

fn convert_manifest(cli: &Cli, args: &ConvertManifestArgs) -> Result<()> {
    let entries = dataset::convert_directory(&args.dir, &args.name)?;
    let with_masks = entries.iter().filter(|e| e.mask_path.is_some()).count();
    // The manifest resolves entries relative to its own directory, so it must
    // live next to the images.
    let out_dir = args.out.parent().map(PathBuf::from).unwrap_or_default();
    let canon_dir = args
        .dir
        .canonicalize()
        .map_err(|e| Error::io(args.dir.display().to_string(), e))?;
    let canon_out = out_dir
        .canonicalize()
        .unwrap_or_else(|_| out_dir.clone());
    if canon_dir != canon_out {
        warn(
            cli,
            "manifest is written outside the image directory; set CLOUDSEG_DATA_ROOT or move it next to the images",
        );
    }
    dataset::save_manifest(&args.name, &entries, &args.out, cli.force)?;
    info(
        cli,
        &format!(
            "{} entries ({} with masks) -> {}",
            entries.len(),
            with_masks,
            args.out.display()
        ),
    );
    Ok(())
}
