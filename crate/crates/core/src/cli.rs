//! Command-line front end: `classify`, `localize`, `video`, `stats` and
//! `schedule`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad input, 3 backend failure,
//! 4 localization tile below the minimum size.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use crate::classifier::{BackendSpec, ClassificationResult, Classifier, Concurrency};
use crate::enhance::{EnhancePolicy, Enhanced, Enhancer, Gamma, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::imageio;
use crate::localize::{headline, localize, render_localization};
use crate::luminance::{dark_report, dark_stats, DarkThresholds, DEFAULT_PIXEL_THRESHOLD, DEFAULT_RATIO_THRESHOLD};
use crate::netmath::{cosine_decay_lr, ScheduleParams};
use crate::overlay;
use crate::raster::{check_input_size, to_gray, Raster};
use crate::report::{
    ClassifyReport, EnhancementDoc, FrameDoc, LocalizeReport, Report, ResultDoc, StatsReport, TileDoc,
    VideoReport,
};
use crate::temporal::{finalize_run, SmoothedFrameResult, TemporalState, DEFAULT_WINDOW};

/// Frame rate the default window length is calibrated for.
pub const REFERENCE_FPS: f64 = 30.0;
pub const DEFAULT_BACKEND: &str = "model:model.onnx";

#[derive(Debug, Parser)]
#[command(name = "vigil", version, about = "Smoking/calling behavior classification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a single image and write an annotated PNG.
    Classify(ClassifyArgs),
    /// Classify the image and each tile of a grid, highlighting agreeing tiles.
    Localize(LocalizeArgs),
    /// Classify a frame sequence with temporal smoothing.
    Video(VideoArgs),
    /// Per-class dark-image statistics for a dataset tree.
    Stats(StatsArgs),
    /// Print a cosine-decay learning-rate table.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// constant:P0,P1,P2,P3 | scripted:FILE | model:FILE.onnx
    #[arg(long, default_value = DEFAULT_BACKEND)]
    pub backend: String,
    /// auto | on | off
    #[arg(long, default_value = "auto")]
    pub enhance: String,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// gamma | extern-enhancer:CMD
    #[arg(long, default_value = "gamma")]
    pub enhancer: String,
    #[arg(long, default_value_t = DEFAULT_PIXEL_THRESHOLD)]
    pub pixel_threshold: u8,
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub ratio_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Annotated PNG; defaults to `<stem>_classified.png` next to the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Grid as ROWSxCOLS.
    #[arg(long, default_value = "4x4")]
    pub grid: String,
    /// Annotated PNG; defaults to `<stem>_localized.png` next to the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["frames", "raw_stdin"])))]
pub struct VideoArgs {
    /// Directory of numbered frame images, processed in lexicographic order.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Read packed RGB24 frames from standard input.
    #[arg(long, requires_all = ["width", "height"])]
    pub raw_stdin: bool,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Smoothing window in frames.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Source frame rate; rescales the window so it spans the same time as
    /// `--window` frames at 30 fps.
    #[arg(long)]
    pub fps_hint: Option<f64>,
    #[arg(long, default_value = "vigil_frames")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub root: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PIXEL_THRESHOLD)]
    pub pixel_threshold: u8,
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub ratio_threshold: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub lr: f64,
    /// Decay horizon in steps.
    #[arg(long)]
    pub steps: u64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Number of evenly spaced rows from step 0 to the horizon.
    #[arg(long, default_value_t = 11)]
    pub rows: u64,
}

/// Everything the pipeline commands share, resolved from flags.
pub struct Pipeline {
    pub classifier: Classifier,
    pub policy: EnhancePolicy,
    pub enhancer: Enhancer,
    enhancer_name: String,
}

impl Pipeline {
    /// Validates enhancement flags before touching the backend, so bad flags
    /// report as input errors even when the model file is also broken.
    pub fn from_args(args: &PipelineArgs) -> Result<Self> {
        let policy = EnhancePolicy {
            mode: args.enhance.parse()?,
            gamma: Gamma::new(args.gamma)?,
            thresholds: DarkThresholds::new(args.pixel_threshold, args.ratio_threshold)?,
        };
        let enhancer: Enhancer = args.enhancer.parse()?;
        let spec: BackendSpec = args.backend.parse()?;
        let classifier = Classifier::from_spec(&spec)?;
        Ok(Pipeline {
            classifier,
            policy,
            enhancer,
            enhancer_name: args.enhancer.clone(),
        })
    }

    pub fn enhance(&self, img: &Raster) -> (Enhanced, f64) {
        let ratio = dark_report(&to_gray(img), &self.policy.thresholds).ratio;
        (self.enhancer.apply(img, &self.policy), ratio)
    }

    fn enhancement_doc(&self, dark_ratio: f64, outcome: &Enhanced) -> EnhancementDoc {
        EnhancementDoc::new(
            self.policy.mode,
            self.policy.gamma.value(),
            self.enhancer_name.clone(),
            (self.policy.thresholds.pixel(), self.policy.thresholds.ratio()),
            dark_ratio,
            outcome,
        )
    }
}

fn default_output(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_owned());
    input.with_file_name(format!("{stem}_{suffix}.png"))
}

fn write_report(path: Option<&Path>, report: &Report) -> Result<()> {
    if let Some(path) = path {
        std::fs::write(path, report.to_json() + "\n")
            .map_err(|e| Error::io(format!("writing report {}", path.display()), e))?;
    }
    Ok(())
}

fn load_checked(path: &Path) -> Result<Raster> {
    let img = imageio::load_image(path)?;
    check_input_size(&img)?;
    Ok(img)
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<Report> {
    let img = load_checked(&args.image)?;
    let pipeline = Pipeline::from_args(&args.pipeline)?;
    let start = Instant::now();
    let (enhanced, dark_ratio) = pipeline.enhance(&img);
    let result = pipeline.classifier.classify(&enhanced.raster)?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut annotated = enhanced.raster.clone();
    overlay::draw_headline(&mut annotated, &headline(&result));
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_output(&args.image, "classified"));
    imageio::save_png(&annotated, &out)?;

    println!("{}: {}", args.image.display(), headline(&result));
    let report = Report::Classify(ClassifyReport {
        input: args.image.display().to_string(),
        width: img.width(),
        height: img.height(),
        backend: pipeline.classifier.describe(),
        enhancement: pipeline.enhancement_doc(dark_ratio, &enhanced),
        result: ResultDoc::from(&result),
        backend_invocations: pipeline.classifier.invocations(),
        elapsed_secs: elapsed,
        output: out.display().to_string(),
    });
    write_report(args.report.as_deref(), &report)?;
    Ok(report)
}

pub fn parse_grid(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::param("grid", format!("expected ROWSxCOLS, got `{s}`"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let rows = r.trim().parse::<u32>().map_err(|_| bad())?;
    let cols = c.trim().parse::<u32>().map_err(|_| bad())?;
    if rows == 0 || cols == 0 {
        return Err(bad());
    }
    Ok((rows, cols))
}

pub fn cmd_localize(args: &LocalizeArgs) -> Result<Report> {
    let (rows, cols) = parse_grid(&args.grid)?;
    let img = load_checked(&args.image)?;
    let pipeline = Pipeline::from_args(&args.pipeline)?;
    let start = Instant::now();
    let (enhanced, dark_ratio) = pipeline.enhance(&img);
    let before = pipeline.classifier.invocations();
    let grid = localize(&pipeline.classifier, &enhanced.raster, rows, cols)?;
    let invocation_count = pipeline.classifier.invocations() - before;
    let elapsed = start.elapsed().as_secs_f64();

    let annotated = render_localization(&enhanced.raster, &grid);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_output(&args.image, "localized"));
    imageio::save_png(&annotated, &out)?;

    println!(
        "{}: {} ({} of {} tiles agree)",
        args.image.display(),
        headline(&grid.whole),
        grid.matches(),
        grid.tiles.len()
    );
    let tiles = grid
        .bounds
        .iter()
        .zip(&grid.tiles)
        .zip(&grid.match_mask)
        .enumerate()
        .map(|(index, ((rect, tile), &matches))| TileDoc {
            index,
            row: index as u32 / cols,
            col: index as u32 % cols,
            rect: *rect,
            result: ResultDoc::from(tile),
            matches,
        })
        .collect();
    let report = Report::Localize(LocalizeReport {
        input: args.image.display().to_string(),
        width: img.width(),
        height: img.height(),
        backend: pipeline.classifier.describe(),
        enhancement: pipeline.enhancement_doc(dark_ratio, &enhanced),
        rows,
        cols,
        whole: ResultDoc::from(&grid.whole),
        tiles,
        mask: grid.match_mask.clone(),
        match_count: grid.matches(),
        invocation_count,
        elapsed_secs: elapsed,
        output: out.display().to_string(),
    });
    write_report(args.report.as_deref(), &report)?;
    Ok(report)
}

/// Window length after applying an optional source frame rate.
pub fn effective_window(window: usize, fps_hint: Option<f64>) -> Result<usize> {
    if window == 0 {
        return Err(Error::param("window", "must be positive"));
    }
    match fps_hint {
        None => Ok(window),
        Some(f) if f.is_finite() && f > 0.0 => {
            Ok(((window as f64 * f / REFERENCE_FPS).round() as usize).max(1))
        }
        Some(f) => Err(Error::param("fps-hint", format!("{f} must be positive"))),
    }
}

/// Source of decoded frames, in order.
pub trait FrameSource {
    /// `Ok(None)` at end of stream.
    fn next_frame(&mut self) -> Result<Option<Raster>>;

    fn describe(&self) -> String;

    /// Whether the stream ended in the middle of a frame.
    fn truncated(&self) -> bool {
        false
    }
}

pub struct DirectoryFrames {
    dir: PathBuf,
    files: std::vec::IntoIter<PathBuf>,
}

impl DirectoryFrames {
    pub fn open(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::NoInput(format!("{} is not a directory", dir.display())));
        }
        let mut files = std::fs::read_dir(dir)
            .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && imageio::is_image_path(p))
            .collect::<Vec<_>>();
        files.sort();
        Ok(DirectoryFrames {
            dir: dir.to_path_buf(),
            files: files.into_iter(),
        })
    }
}

impl FrameSource for DirectoryFrames {
    fn next_frame(&mut self) -> Result<Option<Raster>> {
        self.files.next().map(|p| imageio::load_image(&p)).transpose()
    }

    fn describe(&self) -> String {
        self.dir.display().to_string()
    }
}

/// Packed RGB24 frames of a fixed size, back to back.
pub struct RawFrames<R> {
    reader: R,
    width: u32,
    height: u32,
    truncated: bool,
}

impl<R: Read> RawFrames<R> {
    pub fn new(reader: R, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("width/height", "raw frames need positive dimensions"));
        }
        Ok(RawFrames {
            reader,
            width,
            height,
            truncated: false,
        })
    }
}

impl<R: Read> FrameSource for RawFrames<R> {
    fn next_frame(&mut self) -> Result<Option<Raster>> {
        if self.truncated {
            return Ok(None);
        }
        let size = self.width as usize * self.height as usize * 3;
        let mut buf = vec![0u8; size];
        let mut filled = 0;
        while filled < size {
            match self.reader.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io("reading raw frames", e)),
            }
        }
        if filled == 0 {
            return Ok(None);
        }
        if filled < size {
            warn!("raw stream ended {filled} bytes into a {size}-byte frame; dropping it");
            self.truncated = true;
            return Ok(None);
        }
        Raster::new(self.width, self.height, buf).map(Some)
    }

    fn describe(&self) -> String {
        format!("raw-stdin {}x{}", self.width, self.height)
    }

    fn truncated(&self) -> bool {
        self.truncated
    }
}

struct ClassifiedFrame {
    raster: Raster,
    result: ClassificationResult,
    enhanced: bool,
}

/// Drives a frame source through enhance, classify, smoothing and
/// annotation. Classification of a batch may run in parallel; smoothing is
/// always fed in frame order, so the output matches a sequential run.
pub fn run_video(
    pipeline: &Pipeline,
    source: &mut dyn FrameSource,
    window: usize,
    out_dir: &Path,
) -> Result<VideoReport> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut state = TemporalState::new(window)?;
    let batch = match pipeline.classifier.concurrency() {
        Concurrency::ConcurrentSafe => rayon::current_num_threads().max(1) * 2,
        Concurrency::Exclusive => 1,
    };

    let start = Instant::now();
    let mut history: Vec<SmoothedFrameResult> = Vec::new();
    let mut docs: Vec<FrameDoc> = Vec::new();
    let mut pending: Vec<Raster> = Vec::with_capacity(batch);
    let mut exhausted = false;
    while !exhausted {
        pending.clear();
        while pending.len() < batch {
            match source.next_frame()? {
                Some(f) => pending.push(f),
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        if pending.is_empty() {
            break;
        }

        let classify = |frame: &Raster| -> Result<ClassifiedFrame> {
            check_input_size(frame)?;
            let (enhanced, _) = pipeline.enhance(frame);
            let result = pipeline.classifier.classify(&enhanced.raster)?;
            Ok(ClassifiedFrame {
                raster: enhanced.raster,
                result,
                enhanced: enhanced.applied,
            })
        };
        let classified: Vec<ClassifiedFrame> = if batch > 1 {
            pending.par_iter().map(classify).collect::<Result<_>>()?
        } else {
            pending.iter().map(classify).collect::<Result<_>>()?
        };

        let smoothed: Vec<SmoothedFrameResult> =
            classified.iter().map(|c| state.push(c.result)).collect();

        let outputs: Vec<PathBuf> = classified
            .par_iter()
            .zip(&smoothed)
            .map(|(c, s)| {
                let mut frame = c.raster.clone();
                overlay::draw_headline(
                    &mut frame,
                    &format!("{} {:.2}", s.mode_label.name(), s.mode_mean),
                );
                let path = out_dir.join(format!("frame_{:06}.png", s.frame_index));
                imageio::save_png(&frame, &path).map(|_| path)
            })
            .collect::<Result<_>>()?;

        for ((c, s), path) in classified.iter().zip(&smoothed).zip(outputs) {
            docs.push(FrameDoc {
                frame_index: s.frame_index,
                raw: ResultDoc::from(&s.raw),
                mode_label: s.mode_label,
                mode_mean: s.mode_mean,
                enhancement_applied: c.enhanced,
                output: path.display().to_string(),
            });
        }
        history.extend(smoothed);
    }
    let elapsed = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    let run = finalize_run(&history, elapsed)?;
    Ok(VideoReport {
        source: source.describe(),
        backend: pipeline.classifier.describe(),
        window,
        frames: docs,
        truncated: source.truncated(),
        run,
    })
}

pub fn cmd_video(args: &VideoArgs, stdin: &mut dyn Read) -> Result<Report> {
    let window = effective_window(args.window, args.fps_hint)?;
    let mut source: Box<dyn FrameSource + '_> = match (&args.frames, args.raw_stdin) {
        (Some(dir), _) => Box::new(DirectoryFrames::open(dir)?),
        (None, true) => {
            let (w, h) = args
                .width
                .zip(args.height)
                .ok_or_else(|| Error::param("raw-stdin", "--width and --height are required"))?;
            Box::new(RawFrames::new(BufReader::new(stdin), w, h)?)
        }
        (None, false) => return Err(Error::param("source", "pass --frames DIR or --raw-stdin")),
    };
    let pipeline = Pipeline::from_args(&args.pipeline)?;
    info!("smoothing over {window} frames");
    let video = run_video(&pipeline, source.as_mut(), window, &args.out_dir)?;
    print!("{}", video.run.render());
    let truncated = video.truncated;
    let empty = video.run.frames_processed == 0;
    let report = Report::Video(video);
    write_report(args.report.as_deref(), &report)?;
    if truncated {
        return Err(Error::MalformedStream(
            "raw stream ended with a partial frame".to_owned(),
        ));
    }
    if empty {
        return Err(Error::NoInput("no frames to process".to_owned()));
    }
    Ok(report)
}

pub fn cmd_stats(args: &StatsArgs) -> Result<Report> {
    let thresholds = DarkThresholds::new(args.pixel_threshold, args.ratio_threshold)?;
    let stats = dark_stats(&args.root, &thresholds)?;
    print!("{}", stats.render_table());
    for s in &stats.skipped {
        warn!("skipped {}: {}", s.path.display(), s.reason);
    }
    let report = Report::Stats(StatsReport {
        root: args.root.display().to_string(),
        pixel_threshold: stats.pixel_threshold,
        ratio_threshold: stats.ratio_threshold,
        classes: stats.classes,
        skipped: stats.skipped,
    });
    write_report(args.report.as_deref(), &report)?;
    Ok(report)
}

/// Steps printed by `schedule`: `rows` points spread evenly over `0..=steps`.
pub fn schedule_steps(steps: u64, rows: u64) -> Result<Vec<u64>> {
    if rows < 2 {
        return Err(Error::param("rows", "need at least 2 rows"));
    }
    let mut out: Vec<u64> = (0..rows)
        .map(|i| ((u128::from(i) * u128::from(steps)) / u128::from(rows - 1)) as u64)
        .collect();
    out.dedup();
    Ok(out)
}

pub fn cmd_schedule(args: &ScheduleArgs, out: &mut dyn Write) -> Result<()> {
    let params = ScheduleParams::new(args.lr, args.steps, args.alpha)?;
    let steps = schedule_steps(args.steps, args.rows)?;
    let mut text = format!("{:>10}  {}\n", "step", "lr");
    for s in steps {
        text.push_str(&format!("{s:>10}  {}\n", cosine_decay_lr(&params, s)));
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("writing schedule", e))
}

/// Runs one parsed invocation and maps the outcome to an exit code.
pub fn run(cli: Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Classify(a) => cmd_classify(a).map(drop),
        Command::Localize(a) => cmd_localize(a).map(drop),
        Command::Video(a) => cmd_video(a, &mut std::io::stdin().lock()).map(drop),
        Command::Stats(a) => cmd_stats(a).map(drop),
        Command::Schedule(a) => cmd_schedule(a, &mut std::io::stdout().lock()),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vigil: error: {e}");
            e.exit_code()
        }
    }
}

/// Reads a scripted-backend file body from any reader; used by tooling that
/// generates scripts on the fly.
pub fn read_script(reader: impl BufRead) -> Result<Vec<[f64; 4]>> {
    let mut text = String::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("reading script", e))?;
        text.push_str(&line);
        text.push('\n');
    }
    crate::classifier::ScriptedBackend::parse(&text)
}
