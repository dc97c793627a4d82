//! Command-line front end. `run` parses arguments and returns the exit code:
//! 0 on success, 1 on usage errors and 2 on data errors.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::codec::{self, FileKind};
use crate::dataset::{
    compute_stats, mean_skydome, prune, read_exclusions, scan, split, stats_report, DatasetConfig,
    SampleRecord, SplitSpec, StatsCache, Subset,
};
use crate::error::Error;
use crate::format::{solid_angles, EnvFormat, Grid};
use crate::image::{Encoding, EnvMap};
use crate::losskit::{parametric_boost, BoostImage, BoostParams};
use crate::metrics::{
    clip_exposure, evaluate, format_g, match_exposure, sensitivity_sweep, ClipSpec, Metric, Space, SweepConfig,
    Table,
};
use crate::radiometry::{exposure_value, integrated_illumination, luminance_range};
use crate::resample::{convert_format, resize, InterpMethod};
use crate::skylabel::{
    continuous_label, discrete_label, segment, solar_position, LabelConfig, PerlinConfig, SunPosition,
};
use crate::tonemap::{self, ToneMapOp, DEFAULT_MU};

#[derive(Debug, Parser)]
#[command(name = "fdrsky", version, about = "Full-dynamic-range skydome toolkit")]
pub struct Cli {
    /// Worker threads (falls back to FDRSKY_THREADS, then all cores).
    #[arg(long, global = true, env = "FDRSKY_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print format, dimensions, EV and integrated illumination.
    Info(InfoArgs),
    /// Convert between latlong, sky-latlong and sky-angular.
    Convert(ConvertArgs),
    /// Change resolution within a format.
    Resize(ResizeArgs),
    /// Apply a tonemapping operator; writes `<output>.tm.json`.
    Tonemap(TonemapArgs),
    /// Invert a tonemapping operator.
    Untonemap(UntonemapArgs),
    /// Discrete sun/cloud/skydome/border segmentation.
    Segment(SegmentArgs),
    /// Continuous three-channel label.
    Label(LabelArgs),
    /// Compare a real and a fake environment map.
    Metrics(MetricsArgs),
    /// Clip at decreasing EV thresholds and score against the original.
    Sensitivity(SensitivityArgs),
    /// Clip the exposure range at an EV threshold.
    Clip(ClipArgs),
    /// Parametric exposure boost of a batch.
    Boost(BoostArgs),
    /// Rescale a fake image to the mean luminance of a real one.
    MatchExposure(MatchArgs),
    /// List timestamped captures and their pruning status.
    DatasetScan(ScanArgs),
    /// Date-disjoint train/val/test split.
    DatasetSplit(SplitArgs),
    /// Per-capture EV and integrated illumination report.
    DatasetReport(ReportArgs),
    /// Per-pixel mean of many environment maps.
    MeanSkydome(MeanArgs),
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub input: PathBuf,
    /// Environment format; inferred from the aspect ratio when omitted.
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: String,
    /// Target format.
    #[arg(long)]
    pub to: EnvFormat,
    /// Target width; defaults to the source's angular resolution.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value = "linear-spline")]
    pub method: InterpMethod,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct ResizeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: String,
    #[arg(long)]
    pub width: usize,
    /// Defaults to the height implied by the format.
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, default_value = "area")]
    pub method: InterpMethod,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct TonemapArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: String,
    /// Operator as `name[:param...]`, e.g. `gamma:2.2` or `mulawlog2:5000`.
    #[arg(long, default_value = "mulawlog2:5000")]
    pub op: ToneMapOp,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct UntonemapArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: String,
    /// Operator; read from `<input>.tm.json` when omitted.
    #[arg(long)]
    pub op: Option<ToneMapOp>,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct SunArgs {
    /// Capture time (RFC 3339, or `YYYY-MM-DDTHH:MM:SS` read as UTC).
    #[arg(long)]
    pub timestamp: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub latitude: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub longitude: Option<f64>,
    /// Sun elevation in degrees; overrides the ephemeris.
    #[arg(long, conflicts_with = "timestamp", allow_negative_numbers = true)]
    pub elevation: Option<f64>,
    /// Sun azimuth in degrees clockwise from north.
    #[arg(long, conflicts_with = "timestamp", allow_negative_numbers = true)]
    pub azimuth: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LabelParams {
    /// Circular erosion brush diameter in pixels (odd).
    #[arg(long, default_value_t = 1)]
    pub kernel: u32,
    /// Cloud ratio threshold.
    #[arg(long, default_value_t = crate::skylabel::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Sun disk diameter in degrees.
    #[arg(long, default_value_t = crate::skylabel::DEFAULT_SUN_DIAMETER)]
    pub sun_diameter: f64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    /// Snap the sun to the brightest blob within this many degrees.
    #[arg(long)]
    pub snap_degrees: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub input: PathBuf,
    /// Discrete label raster (0 border, 1 skydome, 2 cloud, 3 sun).
    #[arg(short, long)]
    pub output: String,
    /// Also write sun/cloud/skydome/border masks as PBM into this directory.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[command(flatten)]
    pub sun: SunArgs,
    #[command(flatten)]
    pub params: LabelParams,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    pub input: PathBuf,
    /// Continuous label image; provenance goes to `<output>.meta.json`.
    #[arg(short, long)]
    pub output: String,
    #[command(flatten)]
    pub sun: SunArgs,
    #[command(flatten)]
    pub params: LabelParams,
    /// Perlin noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub real: PathBuf,
    pub fake: PathBuf,
    #[arg(short, long, default_value = "-")]
    pub output: String,
    #[arg(long, value_delimiter = ',', default_value = "hdr,cldr")]
    pub spaces: Vec<Space>,
    #[arg(long, default_value_t = 2.0)]
    pub psnr_base: f64,
    /// Operator used for the LDR space.
    #[arg(long, default_value = "mulawlog2:5000")]
    pub ldr_op: ToneMapOp,
    /// Rescale the fake to the real mean luminance first.
    #[arg(long)]
    pub match_exposure: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    pub input: PathBuf,
    #[arg(short, long, default_value = "-")]
    pub output: String,
    /// Strictly decreasing EV thresholds.
    #[arg(long, value_delimiter = ',', default_value = "15,14,13,12,11,10,9", allow_negative_numbers = true)]
    pub thresholds: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "psnr2,ssim,ev,ev_dist,ii,ii_dist")]
    pub metrics: Vec<Metric>,
    #[arg(long, value_delimiter = ',', default_value = "hdr,cldr")]
    pub spaces: Vec<Space>,
    #[arg(long, default_value = "mulawlog2:5000")]
    pub ldr_op: ToneMapOp,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct ClipArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: String,
    /// f-stops kept above the minimum luminance.
    #[arg(long)]
    pub ev: f64,
    /// Rescale to the input's integrated illumination.
    #[arg(long)]
    pub equalize: bool,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    /// Batch members; may hold signed values.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Directory receiving outputs under the input file names.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// `paper` or `appendix`.
    #[arg(long, default_value = "paper")]
    pub preset: String,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Multiplier applied to inputs first; defaults to 8 for the appendix
    /// preset (maps [-1, 1] to [-8, 8]) and 1 otherwise.
    #[arg(long, allow_negative_numbers = true)]
    pub input_scale: Option<f64>,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    pub real: PathBuf,
    pub fake: PathBuf,
    #[arg(short, long)]
    pub output: String,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// JSON dataset description; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Filename timestamp template, e.g. `YYYYMMDD_HHMMSS`.
    #[arg(long)]
    pub pattern: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub latitude: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub longitude: Option<f64>,
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
    /// Minimum sun elevation in degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub min_elevation: Option<f64>,
    #[arg(long)]
    pub format: Option<EnvFormat>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(short, long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct SplitParams {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<f64>,
    #[arg(long)]
    pub val: Option<f64>,
    #[arg(long)]
    pub test: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub split: SplitParams,
    #[arg(short, long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Tag rows with their subset.
    #[arg(long)]
    pub with_split: bool,
    #[command(flatten)]
    pub split: SplitParams,
    /// Statistics cache file, created when missing.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(short, long, default_value = "-")]
    pub output: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MeanArgs {
    /// Images to average; the dataset flags select them when omitted.
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Restrict dataset selection to one subset (needs the split flags).
    #[arg(long)]
    pub subset: Option<String>,
    #[command(flatten)]
    pub split: SplitParams,
    /// Average the eight rotations/flips of every sky-angular input.
    #[arg(long)]
    pub augment: bool,
    #[arg(short, long)]
    pub output: String,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        // fails only when a pool already exists, e.g. in-process test runs
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Info(a) => info(a),
        Command::Convert(a) => convert(a),
        Command::Resize(a) => resize_cmd(a),
        Command::Tonemap(a) => tonemap_cmd(a),
        Command::Untonemap(a) => untonemap_cmd(a),
        Command::Segment(a) => segment_cmd(a),
        Command::Label(a) => label_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Sensitivity(a) => sensitivity_cmd(a),
        Command::Clip(a) => clip_cmd(a),
        Command::Boost(a) => boost_cmd(a),
        Command::MatchExposure(a) => match_cmd(a),
        Command::DatasetScan(a) => scan_cmd(a),
        Command::DatasetSplit(a) => split_cmd(a),
        Command::DatasetReport(a) => report_cmd(a),
        Command::MeanSkydome(a) => mean_cmd(a),
    }
}

/// Records the operator that produced a tonemapped file.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    tonemap: ToneMapOp,
}

fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".tm.json");
    PathBuf::from(s)
}

fn read_sidecar(image: &Path) -> CliResult<Option<ToneMapOp>> {
    let p = sidecar_path(image);
    match fs::read_to_string(&p) {
        Ok(text) => {
            let s: Sidecar = serde_json::from_str(&text).map_err(Error::from)?;
            Ok(Some(s.tonemap))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::Io { path: p, source: e }.into()),
    }
}

/// Loads an image, tagging it as tonemapped when a sidecar says so.
fn load_any(path: &Path, format: Option<EnvFormat>) -> CliResult<EnvMap> {
    match read_sidecar(path)? {
        Some(op) => {
            let raw = codec::read_rgb(path)?;
            let f = codec::resolve_format(format, raw.width, raw.height)?;
            Ok(EnvMap::compressed(f, raw.width, raw.height, raw.data, op)?)
        }
        None => Ok(codec::load(path, format)?),
    }
}

fn load_linear(path: &Path, format: Option<EnvFormat>) -> CliResult<EnvMap> {
    let img = load_any(path, format)?;
    img.require_linear()?;
    Ok(img)
}

fn write_bytes(output: &str, bytes: &[u8]) -> CliResult {
    if output == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush()).map_err(Error::from)?;
        Ok(())
    } else {
        fs::write(output, bytes).map_err(|e| Error::Io {
            path: PathBuf::from(output),
            source: e,
        })?;
        Ok(())
    }
}

fn image_kind(output: &str) -> FileKind {
    match FileKind::from_path(Path::new(output)) {
        Some(FileKind::Rgbe) => FileKind::Rgbe,
        _ => FileKind::Pfm,
    }
}

/// Writes an image and keeps its tonemap sidecar in sync.
fn write_image(output: &str, img: &EnvMap) -> CliResult {
    write_bytes(output, &codec::encode_env(img, image_kind(output))?)?;
    if output == "-" {
        return Ok(());
    }
    let side = sidecar_path(Path::new(output));
    match img.encoding() {
        Encoding::Compressed(op) => {
            let text = serde_json::to_string_pretty(&Sidecar { tonemap: op }).map_err(Error::from)?;
            write_bytes(&side.to_string_lossy(), (text + "\n").as_bytes())
        }
        Encoding::Linear => {
            if side.exists() {
                fs::remove_file(&side).map_err(|e| Error::Io { path: side, source: e })?;
            }
            Ok(())
        }
    }
}

/// Prints `key=value` lines on stdout unless stdout carries the output.
fn announce(output: &str, lines: &[(&str, String)]) {
    if output == "-" {
        return;
    }
    for (k, v) in lines {
        println!("{k}={v}");
    }
}

fn info(a: InfoArgs) -> CliResult {
    let img = load_any(&a.input, a.format)?;
    let mut out = String::new();
    let _ = writeln!(out, "format={}", img.format());
    let _ = writeln!(out, "width={}", img.width());
    let _ = writeln!(out, "height={}", img.height());
    let valid = (0..img.len()).filter(|i| img.is_valid(*i)).count();
    let _ = writeln!(out, "valid_pixels={valid}");
    match img.encoding() {
        Encoding::Compressed(op) => {
            let _ = writeln!(out, "encoding=tonemapped:{op}");
        }
        Encoding::Linear => {
            let omega = solid_angles(img.format(), img.width(), img.height())?;
            let (lo, hi) = luminance_range(&img)?;
            let _ = writeln!(out, "encoding=linear");
            let _ = writeln!(out, "luminance_min={}", format_g(lo));
            let _ = writeln!(out, "luminance_max={}", format_g(hi));
            let _ = writeln!(out, "ev={}", format_g(exposure_value(&img)?));
            let _ = writeln!(out, "ii={}", format_g(integrated_illumination(&img, &omega, None)?));
        }
    }
    write_bytes("-", out.as_bytes())
}

fn convert(a: ConvertArgs) -> CliResult {
    let img = load_linear(&a.input, a.format)?;
    let out = convert_format(&img, a.to, a.width, a.method)?;
    write_image(&a.output, &out)
}

fn resize_cmd(a: ResizeArgs) -> CliResult {
    let img = load_linear(&a.input, a.format)?;
    let h = a.height.unwrap_or_else(|| img.format().height_for_width(a.width));
    let out = resize(&img, a.width, h, a.method)?;
    write_image(&a.output, &out)
}

fn tonemap_cmd(a: TonemapArgs) -> CliResult {
    let img = load_linear(&a.input, a.format)?;
    let out = tonemap::apply(a.op, &img)?;
    write_image(&a.output, &out)
}

fn untonemap_cmd(a: UntonemapArgs) -> CliResult {
    let stored = read_sidecar(&a.input)?;
    let op = a
        .op
        .or(stored)
        .ok_or_else(|| usage(format!("no --op given and no {} found", sidecar_path(&a.input).display())))?;
    let raw = codec::read_rgb(&a.input)?;
    let f = codec::resolve_format(a.format, raw.width, raw.height)?;
    let img = EnvMap::compressed(f, raw.width, raw.height, raw.data, op)?;
    let out = tonemap::invert(op, &img)?;
    write_image(&a.output, &out)
}

fn parse_timestamp(s: &str) -> CliResult<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for f in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Ok(t.and_utc());
        }
    }
    Err(usage(format!("cannot parse timestamp '{s}'")))
}

fn resolve_sun(s: &SunArgs) -> CliResult<SunPosition> {
    match (&s.timestamp, s.elevation, s.azimuth) {
        (Some(t), None, None) => {
            let (lat, lon) = match (s.latitude, s.longitude) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(usage("--timestamp needs --latitude and --longitude")),
            };
            Ok(solar_position(parse_timestamp(t)?, lat, lon)?)
        }
        (None, Some(e), Some(az)) => Ok(SunPosition::from_angles(e, az)),
        _ => Err(usage(
            "give either --timestamp with --latitude/--longitude, or --elevation with --azimuth",
        )),
    }
}

fn label_config(p: &LabelParams, seed: u64) -> LabelConfig {
    LabelConfig {
        kernel: p.kernel,
        threshold: p.threshold,
        sun_diameter: p.sun_diameter,
        mu: p.mu,
        snap_degrees: p.snap_degrees,
        perlin: PerlinConfig {
            seed,
            ..PerlinConfig::default()
        },
    }
}

fn sun_lines(sun: &SunPosition) -> Vec<(&'static str, String)> {
    vec![
        ("sun_elevation", format_g(sun.elevation)),
        ("sun_azimuth", format_g(sun.azimuth)),
    ]
}

fn segment_cmd(a: SegmentArgs) -> CliResult {
    let img = load_any(&a.input, a.format)?;
    let sun = resolve_sun(&a.sun)?;
    let cfg = label_config(&a.params, 0);
    let seg = segment(&img, &sun, &cfg)?;
    let label = discrete_label(&seg.maps)?;
    write_bytes(&a.output, &codec::encode_gray(&label.to_gray())?)?;
    if let Some(dir) = &a.masks {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let m = &seg.maps;
        for (name, mask) in [("sun", &m.sun), ("cloud", &m.cloud), ("skydome", &m.skydome), ("border", &m.border)] {
            let p = dir.join(format!("{name}.pbm"));
            write_bytes(&p.to_string_lossy(), &codec::encode_mask(mask, FileKind::Pbm)?)?;
        }
    }
    let mut lines = sun_lines(&seg.sun);
    lines.push(("sun_pixels", seg.maps.sun.count().to_string()));
    lines.push(("cloud_pixels", seg.maps.cloud.count().to_string()));
    lines.push(("skydome_pixels", seg.maps.skydome.count().to_string()));
    lines.push(("border_pixels", seg.maps.border.count().to_string()));
    announce(&a.output, &lines);
    Ok(())
}

#[derive(Serialize)]
struct LabelMeta {
    input: String,
    seed: u64,
    sun_elevation: f64,
    sun_azimuth: f64,
    config: LabelConfig,
}

fn label_cmd(a: LabelArgs) -> CliResult {
    let img = load_any(&a.input, a.format)?;
    let sun = resolve_sun(&a.sun)?;
    let cfg = label_config(&a.params, a.seed);
    let seg = segment(&img, &sun, &cfg)?;
    let omega = solid_angles(img.format(), img.width(), img.height())?;
    let label = continuous_label(&seg.maps, &seg.sun, &omega, &cfg)?;
    let out = EnvMap::new(img.format(), label.width, label.height, label.data)?;
    write_bytes(&a.output, &codec::encode_env(&out, FileKind::Pfm)?)?;
    if a.output != "-" {
        let meta = LabelMeta {
            input: a.input.to_string_lossy().into_owned(),
            seed: a.seed,
            sun_elevation: seg.sun.elevation,
            sun_azimuth: seg.sun.azimuth,
            config: cfg,
        };
        let text = serde_json::to_string_pretty(&meta).map_err(Error::from)?;
        write_bytes(&format!("{}.meta.json", a.output), (text + "\n").as_bytes())?;
    }
    let mut lines = vec![("seed", a.seed.to_string())];
    lines.extend(sun_lines(&seg.sun));
    announce(&a.output, &lines);
    Ok(())
}

fn table_output(table: &Table, meta: &[(String, String)], json: bool) -> String {
    if json {
        table.to_json(meta)
    } else {
        table.to_csv(meta)
    }
}

fn metrics_cmd(a: MetricsArgs) -> CliResult {
    let real = load_linear(&a.real, a.format)?;
    let mut fake = load_linear(&a.fake, a.format)?;
    real.same_shape(&fake)?;
    let mut meta = vec![
        ("real".to_string(), a.real.to_string_lossy().into_owned()),
        ("fake".to_string(), a.fake.to_string_lossy().into_owned()),
    ];
    if a.match_exposure {
        let (alpha, scaled) = match_exposure(&real, &fake)?;
        fake = scaled;
        meta.push(("exposure_alpha".to_string(), format_g(alpha)));
    }
    let omega = solid_angles(real.format(), real.width(), real.height())?;
    let mut columns = Vec::new();
    let mut row = Vec::new();
    for space in &a.spaces {
        let r = evaluate(&real, &fake, *space, &omega, a.psnr_base, a.ldr_op)?;
        for (name, v) in r.column_names().into_iter().zip(r.values()) {
            let hdr_only = name.starts_with("ev_") || name.starts_with("ii_");
            if *space == Space::Hdr || !hdr_only {
                columns.push(name);
                row.push(v);
            }
        }
    }
    let mut table = Table::new(columns);
    table.push(row);
    write_bytes(&a.output, table_output(&table, &meta, a.json).as_bytes())
}

fn sensitivity_cmd(a: SensitivityArgs) -> CliResult {
    let img = load_linear(&a.input, a.format)?;
    let cfg = SweepConfig {
        thresholds: a.thresholds.clone(),
        metrics: a.metrics.clone(),
        spaces: a.spaces.clone(),
        ldr_op: a.ldr_op,
    };
    let omega = solid_angles(img.format(), img.width(), img.height())?;
    let table = sensitivity_sweep(&img, &cfg, &omega)?;
    let meta = vec![
        ("input".to_string(), a.input.to_string_lossy().into_owned()),
        ("ldr_op".to_string(), a.ldr_op.to_string()),
    ];
    write_bytes(&a.output, table_output(&table, &meta, a.json).as_bytes())
}

fn clip_cmd(a: ClipArgs) -> CliResult {
    let img = load_linear(&a.input, a.format)?;
    let omega = solid_angles(img.format(), img.width(), img.height())?;
    let spec = ClipSpec {
        ev_threshold: a.ev,
        equalize_target: a.equalize.then_some(&img),
    };
    let out = clip_exposure(&img, spec, &omega)?;
    write_image(&a.output, &out)?;
    let changed = img.pixels().iter().zip(out.pixels()).filter(|(p, q)| p != q).count();
    announce(
        &a.output,
        &[("ev", format_g(exposure_value(&out)?)), ("changed_pixels", changed.to_string())],
    );
    Ok(())
}

fn boost_cmd(a: BoostArgs) -> CliResult {
    let mut params = BoostParams::preset(&a.preset).map_err(|e| usage(e.to_string()))?;
    params.rho = a.rho.unwrap_or(params.rho);
    params.theta = a.theta.unwrap_or(params.theta);
    params.gamma = a.gamma.unwrap_or(params.gamma);
    params.beta = a.beta.unwrap_or(params.beta);
    let scale = a.input_scale.unwrap_or(if a.preset == "appendix" { 8.0 } else { 1.0 });
    let mut names = HashSet::new();
    for p in &a.inputs {
        if !names.insert(p.file_name().map(|n| n.to_owned())) {
            return Err(usage(format!("duplicate output name for {}", p.display())));
        }
    }
    let mut batch = Vec::with_capacity(a.inputs.len());
    let mut shapes = Vec::with_capacity(a.inputs.len());
    for p in &a.inputs {
        let raw = codec::read_rgb(p)?;
        let f = codec::resolve_format(a.format, raw.width, raw.height)?;
        let grid = Grid::new(f, raw.width, raw.height)?;
        let mut b = BoostImage::from_rgb(&raw.data);
        for px in &mut b.pixels {
            *px = px.map(|v| v * scale);
        }
        b.valid = Some((0..grid.len()).map(|i| grid.inside(i % grid.width, i / grid.width)).collect());
        batch.push(b);
        shapes.push((f, raw.width, raw.height));
    }
    let boosted = parametric_boost(&batch, &params)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    for ((p, b), (f, w, h)) in a.inputs.iter().zip(boosted).zip(shapes) {
        if b.pixels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "boosting {} overflowed; inputs are expected in display range",
                p.display()
            ))
            .into());
        }
        let pixels = b.pixels.iter().map(|q| q.map(|v| v as f32)).collect();
        let img = EnvMap::new(f, w, h, pixels)?;
        let out = a.out_dir.join(p.file_name().unwrap_or_default());
        write_image(&out.to_string_lossy(), &img)?;
    }
    Ok(())
}

fn match_cmd(a: MatchArgs) -> CliResult {
    let real = load_linear(&a.real, a.format)?;
    let fake = load_linear(&a.fake, a.format)?;
    let (alpha, out) = match_exposure(&real, &fake)?;
    write_image(&a.output, &out)?;
    announce(&a.output, &[("alpha", format_g(alpha))]);
    Ok(())
}

fn dataset_config(d: &DatasetArgs) -> CliResult<DatasetConfig> {
    let mut cfg = match &d.config {
        Some(p) => DatasetConfig::load(p)?,
        None => {
            if d.root.is_none() {
                return Err(usage("give --config or --root"));
            }
            DatasetConfig::default()
        }
    };
    if let Some(r) = &d.root {
        cfg.root = r.clone();
    }
    if let Some(p) = &d.pattern {
        cfg.pattern = p.clone();
    }
    cfg.latitude = d.latitude.unwrap_or(cfg.latitude);
    cfg.longitude = d.longitude.unwrap_or(cfg.longitude);
    cfg.min_elevation = d.min_elevation.unwrap_or(cfg.min_elevation);
    if d.exclusions.is_some() {
        cfg.exclusions = d.exclusions.clone();
    }
    if d.format.is_some() {
        cfg.format = d.format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_split_params(spec: &mut SplitSpec, p: &SplitParams) -> CliResult {
    spec.seed = p.seed.unwrap_or(spec.seed);
    spec.train = p.train.unwrap_or(spec.train);
    spec.val = p.val.unwrap_or(spec.val);
    spec.test = p.test.unwrap_or(spec.test);
    spec.validate()?;
    Ok(())
}

struct Selection {
    kept: Vec<SampleRecord>,
    dropped: Vec<SampleRecord>,
    warnings: Vec<String>,
}

fn select(cfg: &DatasetConfig) -> CliResult<Selection> {
    let scanned = scan(&cfg.root, &cfg.pattern, cfg.latitude, cfg.longitude)?;
    for w in &scanned.warnings {
        log::warn!("{w}");
    }
    let exclusions = match &cfg.exclusions {
        Some(p) => read_exclusions(p)?,
        None => HashSet::new(),
    };
    let pruned = prune(&scanned.records, cfg.min_elevation, &exclusions)?;
    Ok(Selection {
        kept: pruned.kept,
        dropped: pruned.dropped,
        warnings: scanned.warnings,
    })
}

fn rel(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn stamp(r: &SampleRecord) -> String {
    r.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn scan_cmd(a: ScanArgs) -> CliResult {
    let cfg = dataset_config(&a.dataset)?;
    let sel = select(&cfg)?;
    let mut all: Vec<&SampleRecord> = sel.kept.iter().chain(&sel.dropped).collect();
    all.sort_by(|x, y| x.timestamp.cmp(&y.timestamp).then_with(|| x.path.cmp(&y.path)));
    let mut out = String::new();
    let _ = writeln!(out, "# pattern: {}", cfg.pattern);
    let _ = writeln!(out, "# latitude: {}", format_g(cfg.latitude));
    let _ = writeln!(out, "# longitude: {}", format_g(cfg.longitude));
    let _ = writeln!(out, "# min_elevation: {}", format_g(cfg.min_elevation));
    let _ = writeln!(out, "# kept: {}", sel.kept.len());
    let _ = writeln!(out, "# dropped: {}", sel.dropped.len());
    for w in &sel.warnings {
        let w = w.replace(&*cfg.root.to_string_lossy(), ".");
        let _ = writeln!(out, "# warning: {w}");
    }
    out.push_str("timestamp,path,elevation,azimuth,status\n");
    for r in all {
        let sun = solar_position(r.timestamp, r.latitude, r.longitude)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            stamp(r),
            csv_field(&rel(&r.path, &cfg.root)),
            format_g(sun.elevation),
            format_g(sun.azimuth),
            r.exclusion.as_deref().unwrap_or("kept")
        );
    }
    write_bytes(&a.output, out.as_bytes())
}

fn split_cmd(a: SplitArgs) -> CliResult {
    let mut cfg = dataset_config(&a.dataset)?;
    apply_split_params(&mut cfg.split, &a.split)?;
    let sel = select(&cfg)?;
    let s = split(&sel.kept, &cfg.split)?;
    let mut rows: Vec<(&SampleRecord, Subset)> = Subset::ALL
        .into_iter()
        .flat_map(|sub| s.subset(sub).iter().map(move |r| (r, sub)))
        .collect();
    rows.sort_by(|x, y| x.0.timestamp.cmp(&y.0.timestamp).then_with(|| x.0.path.cmp(&y.0.path)));
    let mut out = String::new();
    let _ = writeln!(out, "# seed: {}", cfg.split.seed);
    let _ = writeln!(
        out,
        "# ratios: train={} val={} test={}",
        format_g(cfg.split.train),
        format_g(cfg.split.val),
        format_g(cfg.split.test)
    );
    for sub in Subset::ALL {
        let _ = writeln!(out, "# {}: {}", sub.name(), s.subset(sub).len());
    }
    out.push_str("timestamp,path,subset\n");
    for (r, sub) in rows {
        let _ = writeln!(out, "{},{},{}", stamp(r), csv_field(&rel(&r.path, &cfg.root)), sub.name());
    }
    write_bytes(&a.output, out.as_bytes())
}

fn report_cmd(a: ReportArgs) -> CliResult {
    let mut cfg = dataset_config(&a.dataset)?;
    apply_split_params(&mut cfg.split, &a.split)?;
    let sel = select(&cfg)?;
    let mut records = sel.kept;
    let mut cache = match &a.cache {
        Some(p) => StatsCache::load(p)?,
        None => StatsCache::default(),
    };
    let outcomes = compute_stats(&mut records, cfg.format, &mut cache);
    if let Some(p) = &a.cache {
        cache.save(p)?;
    }
    let s = if a.with_split {
        Some(split(&records, &cfg.split)?)
    } else {
        None
    };
    let report = stats_report(&records, Some(&outcomes), Some(&cfg.root), s.as_ref());
    let mut meta = vec![
        ("latitude".to_string(), format_g(cfg.latitude)),
        ("longitude".to_string(), format_g(cfg.longitude)),
        ("min_elevation".to_string(), format_g(cfg.min_elevation)),
        ("dropped".to_string(), sel.dropped.len().to_string()),
    ];
    if a.with_split {
        meta.push(("seed".to_string(), cfg.split.seed.to_string()));
    }
    let text = if a.json {
        report.to_json(&meta)
    } else {
        report.to_csv(&meta)
    };
    write_bytes(&a.output, text.as_bytes())
}

fn mean_cmd(a: MeanArgs) -> CliResult {
    let (paths, format) = if !a.inputs.is_empty() {
        (a.inputs.clone(), a.dataset.format)
    } else {
        let mut cfg = dataset_config(&a.dataset)?;
        apply_split_params(&mut cfg.split, &a.split)?;
        let kept = select(&cfg)?.kept;
        let records = match &a.subset {
            None => kept,
            Some(name) => {
                let sub = Subset::ALL
                    .into_iter()
                    .find(|s| s.name() == name)
                    .ok_or_else(|| usage(format!("unknown subset '{name}' (train, val, test)")))?;
                split(&kept, &cfg.split)?.subset(sub).to_vec()
            }
        };
        (records.into_iter().map(|r| r.path).collect(), cfg.format)
    };
    for p in &paths {
        if read_sidecar(p)?.is_some() {
            return Err(Error::CompressedInput(p.display().to_string()).into());
        }
    }
    let out = mean_skydome(&paths, format, a.augment)?;
    write_image(&a.output, &out)?;
    announce(&a.output, &[("images", paths.len().to_string())]);
    Ok(())
}
