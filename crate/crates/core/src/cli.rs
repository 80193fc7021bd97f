//! Command-line front end.
//!
//! Each subcommand first loads and validates every input (failures exit
//! with [`EXIT_CONFIG`]) and only then does work and writes outputs
//! (failures exit with [`EXIT_RUNTIME`]).

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::align::{
    estimate_frame_transform, layout_shift, load_observations, localize_camera, LayoutConfig, LocalizeConfig,
    WeightPreset,
};
use crate::edit::{run_script, CompositionScript};
use crate::error::{Error, Result};
use crate::eval::{serve, ServeConfig, ServeOptions};
use crate::kinematics::{bind_labels, drive_scene, JointState, MdhChain};
use crate::metrics::{compare, compare_sequence, diff_image, FrameMetrics, SequenceReport};
use crate::raster::{Mask, RgbImage};
use crate::render::{render_with, CameraModel, RenderOptions};
use crate::splat::{load_labels, load_splat_file, GaussianScene};
use crate::synth::{replay_job_file, SynthesisJob};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gstwin", version, about = "Kinematic Gaussian-splatting scene engine")]
pub struct Cli {
    /// Worker threads for rendering (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Log filter for stderr, e.g. `info` or `gstwin=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one frame of a splat scene.
    Render(RenderArgs),
    /// Replay a trajectory job into an image/depth dataset.
    Replay(ReplayArgs),
    /// Run a scene composition script.
    Compose(ComposeArgs),
    /// Estimate the gs→sim transform or a BEV layout shift.
    Align(AlignArgs),
    /// Refine a camera pose against an observed image.
    Localize(LocalizeArgs),
    /// Host closed-loop evaluation episodes over TCP.
    Serve(ServeArgs),
    /// Compare two images or two directories of PNG frames.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Splat file (binary little-endian PLY).
    #[arg(long)]
    pub scene: PathBuf,
    /// Camera JSON: {fx, fy, cx, cy, width, height, pose}.
    #[arg(long)]
    pub camera: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional depth map output (PFM).
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Background color as r,g,b in [0,1].
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
    pub background: Vec<f64>,
    /// Chain file; with --labels and --joints, poses the arm before rendering.
    #[arg(long, requires_all = ["labels", "joints"])]
    pub chain: Option<PathBuf>,
    /// Joint label sidecar (one label per Gaussian).
    #[arg(long, requires = "chain")]
    pub labels: Option<PathBuf>,
    /// Target joint angles in radians, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "chain")]
    pub joints: Option<Vec<f64>>,
    /// Joint angles the scene was captured in (default zeros).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub canonical: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Job configuration JSON.
    #[arg(long)]
    pub job: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Composition script JSON.
    #[arg(long)]
    pub script: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightArg {
    /// Keep the weights from the observation file.
    File,
    Uniform,
    Distal,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Per-joint observation file: [{i, T_gs, T_sim, w}].
    #[arg(long, conflicts_with_all = ["gs_mask", "sim_mask"], required_unless_present = "gs_mask")]
    pub obs: Option<PathBuf>,
    /// Weighting applied to the observations.
    #[arg(long, value_enum, default_value_t = WeightArg::File)]
    pub weights: WeightArg,
    /// Mask rendered from the Gaussian scene (PNG).
    #[arg(long, requires = "sim_mask")]
    pub gs_mask: Option<PathBuf>,
    /// Mask rendered from the simulator (PNG).
    #[arg(long, requires = "gs_mask")]
    pub sim_mask: Option<PathBuf>,
    /// Largest shift searched, pixels.
    #[arg(long, default_value_t = 10)]
    pub max_shift: i64,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Camera JSON holding the intrinsics and the initial pose.
    #[arg(long)]
    pub camera: PathBuf,
    /// Observed image (PNG) at the camera's resolution.
    #[arg(long)]
    pub observed: PathBuf,
    /// Iteration budget across all pyramid levels.
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    /// Pyramid levels.
    #[arg(long, default_value_t = 3)]
    pub levels: u32,
    /// Refined camera JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Episode configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: String,
    /// Stop after this many sessions (serve forever when absent).
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Run sessions concurrently, each with its own state.
    #[arg(long)]
    pub concurrent: bool,
    /// Transcript directory.
    #[arg(long, default_value = "transcripts")]
    pub transcripts: PathBuf,
    /// Seconds to wait for a client message before ending the episode.
    #[arg(long)]
    pub read_timeout: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// First image or directory of PNG frames.
    #[arg(long)]
    pub a: PathBuf,
    /// Second image or directory.
    #[arg(long)]
    pub b: PathBuf,
    /// Write |a − b| difference images here.
    #[arg(long)]
    pub diff: Option<PathBuf>,
    /// Machine-readable JSON report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Error tagged with the phase it happened in.
#[derive(Debug)]
pub enum CliError {
    Config(Error),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

trait Phase<T> {
    fn config(self) -> std::result::Result<T, CliError>;
    fn runtime(self) -> std::result::Result<T, CliError>;
}

impl<T> Phase<T> for Result<T> {
    fn config(self) -> std::result::Result<T, CliError> {
        self.map_err(CliError::Config)
    }
    fn runtime(self) -> std::result::Result<T, CliError> {
        self.map_err(CliError::Runtime)
    }
}

type CliResult = std::result::Result<(), CliError>;

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .try_init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("gstwin: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Compose(a) => cmd_compose(a),
        Command::Align(a) => cmd_align(a),
        Command::Localize(a) => cmd_localize(a, cli.seed),
        Command::Serve(a) => cmd_serve(a),
        Command::Metrics(a) => cmd_metrics(a),
    }
}

fn rgb3(v: &[f64]) -> Result<[f64; 3]> {
    match v {
        [r, g, b] if v.iter().all(|c| c.is_finite()) => Ok([*r, *g, *b]),
        _ => Err(Error::Config("expected three finite color components".into())),
    }
}

fn check_output_dir(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(Error::Config(format!(
            "output directory {} does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn posed_scene(a: &RenderArgs) -> Result<GaussianScene> {
    let scene = load_splat_file(&a.scene)?;
    let (Some(chain), Some(labels), Some(joints)) = (&a.chain, &a.labels, &a.joints) else {
        return Ok(scene);
    };
    let chain = MdhChain::load(chain)?;
    let scene = bind_labels(&scene, &load_labels(labels)?, chain.joint_count())?;
    let target = JointState(joints.clone());
    let canonical = a.canonical.clone().map(JointState).unwrap_or_else(|| chain.zero_state());
    chain.check_state(&target)?;
    chain.check_state(&canonical)?;
    for v in chain.limit_violations(&target) {
        log::warn!("joint {} angle {} outside [{}, {}]", v.joint, v.angle, v.min, v.max);
    }
    drive_scene(&scene, &chain, &canonical, &target)
}

fn cmd_render(a: &RenderArgs) -> CliResult {
    let scene = posed_scene(a).config()?;
    let camera = CameraModel::load(&a.camera).config()?;
    let background = rgb3(&a.background).config()?;
    check_output_dir(&a.out).config()?;
    if let Some(d) = &a.depth {
        check_output_dir(d).config()?;
    }
    let out = render_with(&scene, &camera, &RenderOptions { background });
    out.rgb.save_png(&a.out).runtime()?;
    if let Some(d) = &a.depth {
        out.depth.save_pfm(d).runtime()?;
    }
    log::info!("rendered {} gaussians to {}", scene.len(), a.out.display());
    Ok(())
}

fn cmd_replay(a: &ReplayArgs) -> CliResult {
    // full load for validation; the replay reloads from the same files
    let (job, _) = SynthesisJob::load(&a.job).config()?;
    let manifest = replay_job_file(&a.job).runtime()?;
    println!(
        "{} records in {} (config {})",
        manifest.records.len(),
        job.output_dir.display(),
        &manifest.header.config_hash[..16]
    );
    let flagged = manifest.records.iter().filter(|r| r.flagged).count();
    if flagged > 0 {
        log::warn!("{flagged} records flagged for joint-limit violations");
    }
    Ok(())
}

fn cmd_compose(a: &ComposeArgs) -> CliResult {
    let script = CompositionScript::load(&a.script).config()?;
    let base = a.script.parent().unwrap_or(Path::new("."));
    script.validate(base).config()?;
    let scenes = run_script(&script, base).runtime()?;
    for (name, s) in &scenes {
        println!("{name}: {} gaussians", s.len());
    }
    Ok(())
}

fn write_report(out: &Option<PathBuf>, value: &serde_json::Value) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Error::from).runtime()?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)).runtime(),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_align(a: &AlignArgs) -> CliResult {
    if let Some(out) = &a.out {
        check_output_dir(out).config()?;
    }
    if let Some(obs_path) = &a.obs {
        let mut obs = load_observations(obs_path).config()?;
        match a.weights {
            WeightArg::File => {}
            WeightArg::Uniform => WeightPreset::Uniform.apply(&mut obs),
            WeightArg::Distal => WeightPreset::Distal.apply(&mut obs),
        }
        let report = estimate_frame_transform(&obs).runtime()?;
        for w in &report.warnings {
            log::warn!("{w}");
        }
        let sim_to_gs = report.sim_to_gs().runtime()?;
        let value = serde_json::json!({
            "gs_to_sim": report.gs_to_sim,
            "sim_to_gs": sim_to_gs,
            "residuals": report.residuals,
            "warnings": report.warnings,
        });
        return write_report(&a.out, &value);
    }
    let (Some(gs), Some(sim)) = (&a.gs_mask, &a.sim_mask) else {
        return Err(CliError::Config(Error::Config("need --obs or --gs-mask/--sim-mask".into())));
    };
    let gs = Mask::load_png(gs).config()?;
    let sim = Mask::load_png(sim).config()?;
    let cfg = LayoutConfig {
        max_shift: a.max_shift,
        ..Default::default()
    };
    let shift = layout_shift(&gs, &sim, &cfg).runtime()?;
    write_report(&a.out, &serde_json::to_value(shift).map_err(Error::from).runtime()?)
}

fn cmd_localize(a: &LocalizeArgs, seed: u64) -> CliResult {
    let scene = load_splat_file(&a.scene).config()?;
    let camera = CameraModel::load(&a.camera).config()?;
    let observed = RgbImage::load_png(&a.observed).config()?;
    if !(observed.width == camera.width() && observed.height == camera.height()) {
        return Err(CliError::Config(Error::Dimension(format!(
            "observed image is {}x{}, camera expects {}x{}",
            observed.width,
            observed.height,
            camera.width(),
            camera.height()
        ))));
    }
    check_output_dir(&a.out).config()?;
    let cfg = LocalizeConfig {
        budget: a.budget,
        levels: a.levels,
        seed,
        ..Default::default()
    };
    let result = localize_camera(&scene, &observed, &camera, &cfg).runtime()?;
    camera.with_pose(result.pose).runtime()?.save(&a.out).runtime()?;
    println!(
        "residual {:.6} -> {:.6} after {} iterations ({})",
        result.initial_residual,
        result.residual,
        result.iterations,
        if result.converged { "converged" } else { "budget exhausted" }
    );
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> CliResult {
    let (world, episode) = ServeConfig::load(&a.config).config()?;
    let listener = TcpListener::bind(&a.bind)
        .map_err(|e| Error::Config(format!("cannot bind {}: {e}", a.bind)))
        .config()?;
    if let Ok(addr) = listener.local_addr() {
        println!("listening on {addr}");
    }
    let opts = ServeOptions {
        max_sessions: a.sessions,
        concurrent: a.concurrent,
        transcript_dir: a.transcripts.clone(),
        read_timeout: a.read_timeout.map(Duration::from_secs),
    };
    let sessions = serve(&listener, &world, &episode, &opts).runtime()?;
    for s in &sessions {
        println!(
            "session {}: {} after {} steps ({})",
            s.session,
            s.reason.as_str(),
            s.steps,
            s.transcript.display()
        );
    }
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> CliResult {
    if let Some(p) = &a.json {
        check_output_dir(p).config()?;
    }
    let report = if a.a.is_dir() && a.b.is_dir() {
        compare_sequence(&a.a, &a.b, a.diff.as_deref()).config()?
    } else {
        let ia = RgbImage::load_png(&a.a).config()?;
        let ib = RgbImage::load_png(&a.b).config()?;
        let metrics = compare(&ia, &ib).config()?;
        if let Some(d) = &a.diff {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e)).runtime()?;
            let name = a.a.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "diff.png".into());
            diff_image(&ia, &ib).runtime()?.save_png(&d.join(name)).runtime()?;
        }
        SequenceReport {
            frames: vec![FrameMetrics {
                name: a.a.display().to_string(),
                metrics,
            }],
            mean: metrics,
        }
    };
    print!("{}", report.to_table());
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&report).map_err(Error::from).runtime()?;
        std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)).runtime()?;
    }
    Ok(())
}
