//! `psfield`: synthetic scenes, training, evaluation and diagnostics.

mod commands;
mod env;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;
use env::Runtime;

#[derive(Parser, Debug)]
#[command(name = "psfield", version, about = "Uncalibrated photometric stereo with neural intrinsics fields")]
#[command(after_help = "Environment:\n  PSFIELD_THREADS        worker threads for render and inspect (default 1)\n  PSFIELD_DETERMINISTIC  0 draws a random seed when --seed is omitted (default 1)\n  RUST_LOG               log filter, e.g. info\n\nExit codes: 0 success, 2 usage, 3 data error, 4 numeric failure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic sphere scene with ground truth.
    Synth(SynthArgs),
    /// Train the fields on a scene.
    Train(TrainArgs),
    /// Compare a trained run with scene ground truth.
    Eval(EvalArgs),
    /// Calibrated least-squares normals.
    Baseline(BaselineArgs),
    /// Check that a bas-relief transform leaves Lambertian images unchanged.
    Gbr(GbrArgs),
    /// Render images from a trained run.
    Render(RenderArgs),
    /// Dump intrinsics maps, BRDF spheres and the feature-light correlation table.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 20)]
    lights: usize,
    /// Defaults to 7.
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform albedo, no specular, no bump, no cast shadows, unit intensities.
    #[arg(long)]
    lambertian: bool,
    /// Ray samples for cast shadows; 0 disables them.
    #[arg(long)]
    shadow_samples: Option<usize>,
    /// Also write PGM previews of every image.
    #[arg(long)]
    previews: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AblateArg {
    NoShadowToLight,
    NoSpecularToLight,
    NoAzimuthInit,
    NoGp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RefreshArg {
    PerEpoch,
    PerBatch,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Scene directory, scene.json or DiLiGenT-layout directory.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON training config; replaces the 200-epoch desk preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Defaults to the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sparse-light mode: finer position codes, no azimuth term.
    #[arg(long)]
    sparse: bool,
    #[arg(long, value_enum)]
    ablate: Vec<AblateArg>,
    #[arg(long)]
    pixel_batch: Option<usize>,
    #[arg(long)]
    light_batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    shadow_refresh: Option<RefreshArg>,
    /// Fixed warm-up azimuths in radians, one per line, instead of the factorization.
    #[arg(long)]
    azimuth_file: Option<PathBuf>,
    /// Small fields for quick runs.
    #[arg(long)]
    tiny: bool,
    /// Save the model every N epochs; 0 saves only at the end.
    #[arg(long, default_value_t = 10)]
    checkpoint_every: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Defaults to metrics.csv in the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Use the lights estimated by this run instead of the scene's.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GbrArgs {
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 20)]
    lights: usize,
    /// Defaults to 7.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = -0.2, allow_negative_numbers = true)]
    nu: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    lambda: f64,
    /// Write the transformed scene here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    run: PathBuf,
    /// Scene supplying the mask.
    #[arg(long)]
    scene: PathBuf,
    /// A light direction `x,y,z`; repeatable. Defaults to the estimated lights.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    light: Vec<[f64; 3]>,
    /// Intensity for every `--light`.
    #[arg(long, default_value_t = 1.0)]
    intensity: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Pixel `col,row` for a BRDF sphere; repeatable. Defaults to four mask points.
    #[arg(long, value_parser = parse_point)]
    point: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 64)]
    sphere_resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected x,y,z".into());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(v)
}

fn parse_point(s: &str) -> Result<(usize, usize), String> {
    let (c, r) = s.split_once(',').ok_or("expected col,row")?;
    let c = c.trim().parse().map_err(|e| format!("{c:?}: {e}"))?;
    let r = r.trim().parse().map_err(|e| format!("{r:?}: {e}"))?;
    Ok((c, r))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = Runtime::from_env()
        .map_err(Failure::Usage)
        .and_then(|rt| commands::run(cli.command, rt));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
