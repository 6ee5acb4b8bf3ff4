//! `omnivqa` command-line front end.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{heatmap_cc, heatmap_from_traces, lonlat_correlation, DEFAULT_HEATMAP_SIGMA_DEG};
use crate::error::Error;
use crate::eval::{evaluate_metric, load_dmos, load_objective};
use crate::gaze::{build_training_set, load_trajectory, predict_trajectory, train_forest, ForestParams, GazeConfig, Truncated};
use crate::media_io::{
    encode_grid, encode_pgm16, load_manifest, load_model, load_scores, load_traces, load_weight_map, model_id,
    save_model, save_weight_map, TraceSet, YuvFile,
};
use crate::metrics::{score_sequence, Metric, ScoringContext};
use crate::scores::{dmos_pipeline, v_dmos_csv, RejectionScope, VDmosOptions};
use crate::weight::{load_gmm_params, ncp_weight_map, GmmParams, WeightMap};

pub const DEFAULT_SEED: u64 = 0;
pub const THREADS_ENV: &str = "OVQ_THREADS";

const FORMATS: &str = "\
File formats:
  video       raw planar YUV 4:2:0 (I420), 8-bit, frames back to back, no header
  traces      first line `# sample_rate=<Hz>`, then CSV
              subject_id,sequence_id,sample_index,longitude_deg,latitude_deg
  scores      CSV subject_id,sequence_id,raw_score (raw_score in [0,100])
  references  CSV sequence_id,reference_id (one row per impaired sequence)
  manifest    CSV sequence_id,path,width,height,frame_count,role,reference_id[,fps]
              role is reference|impaired; relative paths resolve against the manifest's directory
  weight map  u32 LE width, u32 LE height, then width*height f64 LE values, row-major
  model       JSON {version, tree_count, params, trees:[{nodes:[{feature_index,threshold,left,right,leaf_posterior}]}]}
  gmm         CSV axis,k,a,b,c with six rows (axis longitude|latitude, k in 1..3)
  trajectory  CSV frame_index,longitude_deg,latitude_deg
  report      CSV frame_index,score rows then `mean,<value>`; JSON twin with provenance
  v-dmos      CSV sequence_id,o_dmos,front,left,back,right,top,bottom (`---` = no qualifying subject)
  objective   CSV sequence_id,score
  dmos        CSV sequence_id,o_dmos[,...]
  config      TOML: seed, threads, gmm, [gaze], [forest], [dmos] tables

Exit status: 0 success, 1 data error, 2 usage error.
Threads: --threads, else the OVQ_THREADS environment variable, else the config file, else all cores.";

#[derive(Parser, Debug)]
#[command(
    name = "omnivqa",
    version,
    about = "Viewing-direction aware quality assessment for omnidirectional video",
    after_long_help = FORMATS
)]
struct Cli {
    /// Worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file supplying defaults for unset flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the non-content weight map for a frame size and cache it
    Weightmap(WeightmapArgs),
    /// Score a distorted sequence against its reference
    Metric(MetricArgs),
    /// Train the viewing-direction forest from traces
    Train(TrainArgs),
    /// Predict a viewing trajectory for a sequence
    Predict(PredictArgs),
    /// Turn raw scores and traces into O-DMOS / V-DMOS
    Dmos(DmosArgs),
    /// Fit objective scores to DMOS and report SRCC, PCC, RMSE, MAE
    Eval(EvalArgs),
    /// Trace statistics
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Args, Debug)]
struct WeightmapArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Weight-map file to write
    #[arg(long)]
    out: PathBuf,
    /// GMM override (CSV axis,k,a,b,c)
    #[arg(long)]
    gmm: Option<PathBuf>,
    /// Also write a 16-bit PGM rendering
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricArgs {
    /// Reference YUV file
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Distorted YUV file
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// psnr, ssim, ncp-psnr, ncp-ssim, cp-psnr or cp-ssim
    #[arg(long)]
    metric: String,
    /// Weight-map cache: loaded when present, otherwise computed and written
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Use uniform weights instead of the viewing-direction prior
    #[arg(long, conflicts_with = "weights")]
    uniform_weights: bool,
    #[arg(long)]
    gmm: Option<PathBuf>,
    /// Forest model for content-based metrics
    #[arg(long)]
    model: Option<PathBuf>,
    /// Precomputed trajectory for content-based metrics (instead of --model)
    #[arg(long, conflicts_with = "model")]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    viewport_size: Option<usize>,
    /// Score only the first N frames
    #[arg(long)]
    frames: Option<usize>,
    /// Report CSV
    #[arg(long)]
    out: PathBuf,
    /// Report JSON (default: --out with a .json extension)
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    /// Model JSON to write
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    features_per_split: Option<usize>,
    /// Grow every tree on the full row set
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    viewport_size: Option<usize>,
    /// Saliency samples drawn per viewport
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// YUV file to simulate viewing on
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    viewport_size: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Trajectory CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    PerSequence,
    Panel,
}

#[derive(Args, Debug)]
struct DmosArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    references: PathBuf,
    /// Traces recorded on the impaired sequences (regional DMOS are all `---` without them)
    #[arg(long)]
    traces: Option<PathBuf>,
    /// V-DMOS CSV to write
    #[arg(long)]
    out: PathBuf,
    /// Region frequency a subject must exceed to count for that region
    #[arg(long)]
    threshold: Option<f64>,
    /// Seconds of trace discarded at the start of each sequence
    #[arg(long)]
    discard_seconds: Option<f64>,
    /// Population for the outlier statistics
    #[arg(long, value_enum)]
    rejection: Option<ScopeArg>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// CSV sequence_id,score
    #[arg(long)]
    objective: PathBuf,
    /// CSV sequence_id,o_dmos
    #[arg(long)]
    dmos: PathBuf,
    /// JSON to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeatmapFormat {
    Pgm,
    Grid,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Longitude/latitude correlation of all samples
    Corr {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian heat map of viewing directions
    Heatmap {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Kernel standard deviation in degrees
        #[arg(long, default_value_t = DEFAULT_HEATMAP_SIGMA_DEG)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "grid")]
        format: HeatmapFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlation between the heat maps of two trace sets
    Cc {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = DEFAULT_HEATMAP_SIGMA_DEG)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    threads: Option<usize>,
    gmm: Option<PathBuf>,
    gaze: Option<GazeConfig>,
    forest: ForestSection,
    dmos: Option<VDmosOptions>,
}

#[derive(Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
struct ForestSection {
    trees: usize,
    depth: usize,
    min_leaf: usize,
    features_per_split: usize,
    bootstrap: bool,
}

impl Default for ForestSection {
    fn default() -> Self {
        let p = ForestParams::default();
        Self {
            trees: p.tree_count,
            depth: p.max_depth,
            min_leaf: p.min_leaf,
            features_per_split: p.features_per_split,
            bootstrap: p.bootstrap,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Failed(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) => CliError::Usage(m),
            other => CliError::Failed(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn configure_threads(flag: Option<usize>, config: Option<usize>) -> CliResult {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("{THREADS_ENV}={v} is not a thread count")))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = flag.or(from_env).or(config) {
        if n == 0 {
            return Err(usage("thread count must be >= 1"));
        }
        // a pool already exists when called twice in one process; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, bytes).map_err(|e| Error::io(path, e).into())
}

fn gmm_params(flag: Option<&Path>, config: &FileConfig) -> CliResult<GmmParams> {
    match flag.or(config.gmm.as_deref()) {
        Some(p) => Ok(load_gmm_params(p)?),
        None => Ok(GmmParams::default()),
    }
}

fn gaze_config(config: &FileConfig, viewport: Option<usize>, samples: Option<usize>) -> CliResult<GazeConfig> {
    let mut g = config.gaze.unwrap_or_default();
    if let Some(v) = viewport {
        g.viewport_size = v;
    }
    if let Some(s) = samples {
        g.sample_count = s;
    }
    g.validate()?;
    Ok(g)
}

fn run(cli: Cli) -> CliResult {
    let config = read_config(cli.config.as_deref())?;
    configure_threads(cli.threads, config.threads)?;
    match cli.command {
        Command::Weightmap(a) => cmd_weightmap(a, &config),
        Command::Metric(a) => cmd_metric(a, &config),
        Command::Train(a) => cmd_train(a, &config),
        Command::Predict(a) => cmd_predict(a, &config),
        Command::Dmos(a) => cmd_dmos(a, &config),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

fn cmd_weightmap(a: WeightmapArgs, config: &FileConfig) -> CliResult {
    let params = gmm_params(a.gmm.as_deref(), config)?;
    let map = ncp_weight_map(a.width, a.height, &params)?;
    save_weight_map(&map, &a.out)?;
    if let Some(pgm) = &a.pgm {
        write_file(pgm, encode_pgm16(map.width(), map.height(), map.weights())?)?;
    }
    println!("weight map {}x{} -> {}", a.width, a.height, a.out.display());
    Ok(())
}

fn resolve_weights(a: &MetricArgs, config: &FileConfig) -> CliResult<WeightMap> {
    if a.uniform_weights {
        return Ok(WeightMap::uniform(a.width, a.height));
    }
    let compute = || -> CliResult<WeightMap> {
        Ok(ncp_weight_map(a.width, a.height, &gmm_params(a.gmm.as_deref(), config)?)?)
    };
    match &a.weights {
        Some(path) if path.exists() => {
            let map = load_weight_map(path)?;
            if (map.width(), map.height()) != (a.width, a.height) {
                return Err(CliError::Failed(Error::data(format!(
                    "{}: cached map is {}x{}, frames are {}x{}",
                    path.display(),
                    map.width(),
                    map.height(),
                    a.width,
                    a.height
                ))));
            }
            if !map.is_normalized() {
                return Err(CliError::Failed(Error::data(format!(
                    "{}: cached map is not normalized",
                    path.display()
                ))));
            }
            eprintln!("cache hit: {}", path.display());
            Ok(map)
        }
        Some(path) => {
            let map = compute()?;
            save_weight_map(&map, path)?;
            eprintln!("cache miss: {} (computed and saved)", path.display());
            Ok(map)
        }
        None => compute(),
    }
}

fn cmd_metric(a: MetricArgs, config: &FileConfig) -> CliResult {
    let metric: Metric = a.metric.parse()?;
    if metric.is_content_based() && a.model.is_none() && a.trajectory.is_none() {
        return Err(usage(format!("metric {metric} requires --model (or --trajectory)")));
    }
    let seed = a.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let gaze = gaze_config(config, a.viewport_size, None)?;
    let weights = if metric.needs_weight_map() {
        Some(resolve_weights(&a, config)?)
    } else {
        None
    };
    let model = a.model.as_deref().map(load_model).transpose()?;
    let trajectory = a.trajectory.as_deref().map(load_trajectory).transpose()?;

    let mut reference = YuvFile::open(&a.reference, a.width, a.height)?;
    let mut distorted = YuvFile::open(&a.dist, a.width, a.height)?;
    let count = a.frames.unwrap_or(usize::MAX);
    let ctx = ScoringContext {
        weight_map: weights.as_ref(),
        model: model.as_ref(),
        trajectory: trajectory.as_ref(),
        seed,
        gaze,
    };
    let report = score_sequence(
        &mut Truncated { inner: &mut reference, count },
        &mut Truncated { inner: &mut distorted, count },
        metric,
        &ctx,
    )?;
    write_file(&a.out, report.to_csv())?;
    let json = a.json.clone().unwrap_or_else(|| a.out.with_extension("json"));
    write_file(&json, report.to_json())?;
    println!("{metric} mean {}", report.mean);
    Ok(())
}

fn cmd_train(a: TrainArgs, config: &FileConfig) -> CliResult {
    let seed = a.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let gaze = gaze_config(config, a.viewport_size, a.samples)?;
    let f = &config.forest;
    let params = ForestParams {
        tree_count: a.trees.unwrap_or(f.trees),
        max_depth: a.depth.unwrap_or(f.depth),
        min_leaf: a.min_leaf.unwrap_or(f.min_leaf),
        features_per_split: a.features_per_split.unwrap_or(f.features_per_split),
        seed,
        bootstrap: f.bootstrap && !a.no_bootstrap,
    };
    let manifest = load_manifest(&a.manifest)?;
    let traces = load_traces(&a.traces)?;
    let rows = build_training_set(&manifest, &traces, seed, &gaze)?;
    let positives = rows.iter().filter(|r| r.positive).count();
    println!(
        "training rows {} (positive {}, negative {})",
        rows.len(),
        positives,
        rows.len() - positives
    );
    let model = train_forest(&rows, &params)?;
    save_model(&model, &a.out)?;
    println!("model {} with {} trees -> {}", model_id(&model), model.tree_count(), a.out.display());
    Ok(())
}

fn cmd_predict(a: PredictArgs, config: &FileConfig) -> CliResult {
    let seed = a.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let gaze = gaze_config(config, a.viewport_size, a.samples)?;
    let model = load_model(&a.model)?;
    let mut file = YuvFile::open(&a.input, a.width, a.height)?;
    let count = a.frames.unwrap_or(usize::MAX);
    let trajectory = predict_trajectory(&mut Truncated { inner: &mut file, count }, &model, seed, &gaze)?;
    trajectory.save(&a.out)?;
    println!("trajectory of {} frames -> {}", trajectory.len(), a.out.display());
    Ok(())
}

fn cmd_dmos(a: DmosArgs, config: &FileConfig) -> CliResult {
    let mut options = config.dmos.unwrap_or_default();
    if let Some(t) = a.threshold {
        options.threshold = t;
    }
    if let Some(d) = a.discard_seconds {
        options.discard_seconds = d;
    }
    if let Some(r) = a.rejection {
        options.rejection = match r {
            ScopeArg::PerSequence => RejectionScope::PerSequence,
            ScopeArg::Panel => RejectionScope::Panel,
        };
    }
    let scores = load_scores(&a.scores, &a.references)?;
    let traces = match &a.traces {
        Some(p) => load_traces(p)?,
        None => TraceSet::new(Vec::new(), 1.0)?,
    };
    let (screened, vdmos) = dmos_pipeline(&scores, &traces, &options)?;
    for (subject, fraction) in screened.rejected() {
        eprintln!(
            "rejected subject {subject}: {:.1}% of z-scores beyond 2 sigma",
            fraction * 100.0
        );
    }
    write_file(&a.out, v_dmos_csv(&vdmos))?;
    println!(
        "{} sequences, {} subjects retained, {} rejected",
        vdmos.len(),
        screened.z().len(),
        screened.rejected().len()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let objective = load_objective(&a.objective)?;
    let dmos = load_dmos(&a.dmos)?;
    let stats = evaluate_metric(&objective, &dmos)?;
    if !stats.converged {
        eprintln!("warning: logistic fit hit the iteration cap; reporting best parameters found");
    }
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_file(&a.out, json)?;
    println!(
        "srcc {} pcc {} rmse {} mae {}",
        stats.srcc, stats.pcc, stats.rmse, stats.mae
    );
    Ok(())
}

fn cmd_analyze(a: AnalyzeCommand) -> CliResult {
    match a {
        AnalyzeCommand::Corr { traces, out } => {
            let rho = lonlat_correlation(&load_traces(&traces)?)?;
            println!("rho {rho}");
            if let Some(out) = out {
                write_file(&out, format!("rho,{rho}\n"))?;
            }
        }
        AnalyzeCommand::Heatmap {
            traces,
            width,
            height,
            sigma,
            format,
            out,
        } => {
            let h = heatmap_from_traces(&load_traces(&traces)?, width, height, sigma)?;
            let bytes = match format {
                HeatmapFormat::Pgm => encode_pgm16(width, height, h.density())?,
                HeatmapFormat::Grid => encode_grid(width, height, h.density())?,
            };
            write_file(&out, bytes)?;
            println!("heat map {width}x{height} -> {}", out.display());
        }
        AnalyzeCommand::Cc {
            a,
            b,
            width,
            height,
            sigma,
            out,
        } => {
            let ha = heatmap_from_traces(&load_traces(&a)?, width, height, sigma)?;
            let hb = heatmap_from_traces(&load_traces(&b)?, width, height, sigma)?;
            let cc = heatmap_cc(&ha, &hb)?;
            println!("cc {cc}");
            if let Some(out) = out {
                write_file(&out, format!("cc,{cc}\n"))?;
            }
        }
    }
    Ok(())
}
