//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::Path;

use log::info;
use psfield::evalkit::{
    brdf_sphere_at, feature_light_correlation, intensity_error, light_dir_mae, normal_mae, woodham_ls, CorrelationTable,
};
use psfield::fields::{encoder_input, FieldConfig};
use psfield::grid::{Grid, Mask, NormalMap};
use psfield::io::{
    history_csv, load_model, load_scene, metrics_csv, read_json, save_model, save_scene, write_atomic, write_json,
    write_mask_pgm, write_normals_pfm, write_preview_pgm, write_scalar_pfm, MetricsRow, HISTORY_FILE,
};
use psfield::scene::{apply_gbr, make_sphere_scene, GbrTransform, Scene, SphereConfig};
use psfield::trainer::{read_azimuths, AzimuthSource, ShadowRefresh, TrainConfig, Trainer};
use psfield::Error;
use rand::{Rng, SeedableRng};

use crate::env::Runtime;
use crate::{
    AblateArg, BaselineArgs, Command, EvalArgs, GbrArgs, InspectArgs, RefreshArg, RenderArgs, SynthArgs, TrainArgs,
};

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

pub fn run(command: Command, rt: Runtime) -> CmdResult {
    match command {
        Command::Synth(a) => synth(a, rt),
        Command::Train(a) => train(a, rt),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Gbr(a) => gbr(a, rt),
        Command::Render(a) => render(a, rt),
        Command::Inspect(a) => inspect(a, rt),
    }
}

const DEFAULT_SCENE_SEED: u64 = 7;

fn synth(a: SynthArgs, rt: Runtime) -> CmdResult {
    let seed = rt.seed(a.seed, DEFAULT_SCENE_SEED);
    let mut cfg = if a.lambertian {
        SphereConfig::lambertian(a.resolution, a.lights, seed)
    } else {
        SphereConfig {
            resolution: a.resolution,
            lights: a.lights,
            seed,
            ..SphereConfig::default()
        }
    };
    if let Some(s) = a.shadow_samples {
        cfg.shadow_samples = s;
    }
    let scene = make_sphere_scene(&cfg).map_err(usage_if_invalid)?;
    save_scene(&scene, &a.out, Some(&cfg))?;
    if a.previews {
        fs::create_dir_all(a.out.join("previews"))?;
        for (j, img) in scene.images.iter().enumerate() {
            write_preview_pgm(&a.out.join(format!("previews/{j:03}.pgm")), img)?;
        }
    }
    println!(
        "wrote {}x{} scene with {} lights (seed {seed}) to {}",
        cfg.resolution,
        cfg.resolution,
        cfg.lights,
        a.out.display()
    );
    Ok(())
}

/// Invalid settings are the caller's fault; everything else keeps its class.
fn usage_if_invalid(e: Error) -> Failure {
    match e {
        Error::InvalidArgument(m) => Failure::Usage(m),
        e => e.into(),
    }
}

fn train_config(a: &TrainArgs, rt: Runtime) -> Result<TrainConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<TrainConfig>(p)?,
        None => TrainConfig::desk(),
    };
    if let Some(e) = a.epochs {
        cfg.total_epochs = e;
        cfg.finetune_epochs = cfg.finetune_epochs.min(e);
    }
    if let Some(w) = a.warmup {
        cfg.warmup_epochs = w;
    }
    cfg.warmup_epochs = cfg.warmup_epochs.min(cfg.total_epochs);
    cfg.seed = rt.seed(a.seed, cfg.seed);
    cfg.sparse |= a.sparse;
    for ablation in &a.ablate {
        match ablation {
            AblateArg::NoShadowToLight => cfg.ablation.cut_shadow_to_light = true,
            AblateArg::NoSpecularToLight => cfg.ablation.cut_specular_to_light = true,
            AblateArg::NoAzimuthInit => cfg.ablation.skip_azimuth_init = true,
            AblateArg::NoGp => cfg.ablation.skip_gp = true,
        }
    }
    if let Some(b) = a.pixel_batch {
        cfg.pixel_batch = b;
    }
    if let Some(b) = a.light_batch {
        cfg.light_batch = b;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    if let Some(r) = a.shadow_refresh {
        cfg.shadow_refresh = match r {
            RefreshArg::PerEpoch => ShadowRefresh::PerEpoch,
            RefreshArg::PerBatch => ShadowRefresh::PerBatch,
        };
    }
    if a.tiny {
        cfg.fields = FieldConfig::tiny();
        cfg.gp_samples = cfg.gp_samples.min(32);
    }
    cfg.validate().map_err(usage_if_invalid)?;
    Ok(cfg)
}

fn train(a: TrainArgs, rt: Runtime) -> CmdResult {
    let cfg = train_config(&a, rt)?;
    let scene = load_scene(&a.scene)?;
    let obs = scene.observations()?;
    let source = match &a.azimuth_file {
        Some(p) => AzimuthSource::Fixed(read_azimuths(p)?),
        None => AzimuthSource::Factorization,
    };
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("config.json"), &cfg)?;
    let hash = cfg.hash();
    info!("config {hash}, seed {}, {} epochs", cfg.seed, cfg.total_epochs);
    let mut trainer = Trainer::new(&obs, &cfg, &source)?;
    let history_path = a.out.join(HISTORY_FILE);
    trainer.run(|report, t| {
        write_atomic(&history_path, history_csv(&hash, t.history()).as_bytes())?;
        info!("epoch {} total {:.6}", report.epoch, report.total);
        if a.checkpoint_every > 0 && t.epoch() % a.checkpoint_every == 0 && t.epoch() < cfg.total_epochs {
            save_model(&t.snapshot()?, &a.out)?;
        }
        Ok(())
    })?;
    let model = trainer.into_model()?;
    save_model(&model, &a.out)?;
    let last = model.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs, final total {:.6}, config {hash}, run in {}",
        model.history.len(),
        last.total,
        a.out.display()
    );
    Ok(())
}

fn require<'a, T>(value: &'a Option<T>, what: &str, scene: &Path) -> Result<&'a T, Failure> {
    value
        .as_ref()
        .ok_or_else(|| Failure::Data(format!("scene {} has no ground-truth {what}", scene.display())))
}

fn eval(a: EvalArgs) -> CmdResult {
    let model = load_model(&a.run)?;
    let scene = load_scene(&a.scene)?;
    let gt = require(&scene.normals, "normals", &a.scene)?;
    let mut row = MetricsRow {
        config_hash: model.config.hash(),
        scene: a.scene.display().to_string(),
        normal_mae_deg: normal_mae(&model.normals, gt, &scene.mask)?,
        light_mae_deg: None,
        eta: None,
        e_int: None,
    };
    if let Some(l) = &scene.lights {
        row.light_mae_deg = Some(light_dir_mae(&model.lights, l)?);
    }
    if let Some(e) = &scene.intensities {
        let m = intensity_error(&model.intensities, e)?;
        row.eta = Some(m.eta);
        row.e_int = Some(m.e_int);
    }
    let csv = metrics_csv(&[row]);
    let out = a.out.unwrap_or_else(|| a.run.join("metrics.csv"));
    write_atomic(&out, csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn baseline(a: BaselineArgs) -> CmdResult {
    let scene = load_scene(&a.scene)?;
    let (lights, intensities, tag) = match &a.run {
        Some(run) => {
            let m = load_model(run)?;
            let hash = m.config.hash();
            (m.lights, m.intensities, format!("woodham-{hash}"))
        }
        None => (
            require(&scene.lights, "lights", &a.scene)?.clone(),
            require(&scene.intensities, "intensities", &a.scene)?.clone(),
            "woodham".to_string(),
        ),
    };
    let (normals, albedo) = woodham_ls(&scene.images, &lights, &intensities, &scene.mask)?;
    fs::create_dir_all(&a.out)?;
    write_normals_pfm(&a.out.join("normals.pfm"), &normals)?;
    write_scalar_pfm(&a.out.join("albedo.pfm"), &albedo)?;
    match &scene.normals {
        Some(gt) => {
            let row = MetricsRow {
                config_hash: tag,
                scene: a.scene.display().to_string(),
                normal_mae_deg: normal_mae(&normals, gt, &scene.mask)?,
                light_mae_deg: None,
                eta: None,
                e_int: None,
            };
            let csv = metrics_csv(&[row]);
            write_atomic(&a.out.join("metrics.csv"), csv.as_bytes())?;
            print!("{csv}");
        }
        None => println!("wrote normals and albedo to {}", a.out.display()),
    }
    Ok(())
}

/// Largest accepted difference between original and transformed renders.
const GBR_TOLERANCE: f64 = 1e-6;

fn gbr(a: GbrArgs, rt: Runtime) -> CmdResult {
    let seed = rt.seed(a.seed, DEFAULT_SCENE_SEED);
    let cfg = SphereConfig::lambertian(a.resolution, a.lights, seed);
    let scene = make_sphere_scene(&cfg).map_err(usage_if_invalid)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..a.lights).map(|_| rng.random_range(0.5..2.0)).collect();
    let transform = GbrTransform::bas_relief(a.mu, a.nu, a.lambda, scales).map_err(|e| Failure::Usage(e.to_string()))?;
    let normals = scene.normals.as_ref().expect("synthetic scenes carry normals");
    let lights = scene.lights.as_ref().expect("synthetic scenes carry lights");
    let intensities = scene.intensities.as_ref().expect("synthetic scenes carry intensities");
    let albedo = Grid::filled(cfg.resolution, cfg.resolution, 1.0);
    let pseudo = apply_gbr(&scene.mask, normals, &albedo, lights, intensities, &transform)?;
    let rendered = pseudo.render(&scene.mask);
    let max_diff = rendered
        .iter()
        .zip(&scene.images)
        .flat_map(|(p, o)| p.data().iter().zip(o.data()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let mae = normal_mae(&pseudo.normals, normals, &scene.mask)?;
    println!("max_abs_diff {max_diff:e}");
    println!("pseudo_normal_mae_deg {mae:.4}");
    if let Some(out) = &a.out {
        let transformed = Scene {
            images: rendered,
            mask: scene.mask.clone(),
            normals: Some(pseudo.normals.clone()),
            depth: None,
            lights: Some(pseudo.lights.clone()),
            intensities: Some(
                pseudo
                    .intensities
                    .iter()
                    .zip(&pseudo.reflectance_scales)
                    .map(|(e, r)| e * r)
                    .collect(),
            ),
        };
        save_scene(&transformed, out, None)?;
    }
    if !(max_diff <= GBR_TOLERANCE) {
        return Err(Failure::Numeric(format!(
            "renders differ by {max_diff:e}, above {GBR_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// Applies `f` to every item on up to `threads` scoped threads, keeping order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> psfield::Result<R> + Sync,
) -> psfield::Result<Vec<R>> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let per = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(per)
            .map(|chunk| s.spawn(|| chunk.iter().map(&f).collect::<psfield::Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

fn render(a: RenderArgs, rt: Runtime) -> CmdResult {
    let model = load_model(&a.run)?;
    let scene = load_scene(&a.scene)?;
    check_size(&scene.mask, &model.normals)?;
    let lights: Vec<([f64; 3], f64)> = if a.light.is_empty() {
        model.lights.iter().copied().zip(model.intensities.iter().copied()).collect()
    } else {
        if !(a.intensity > 0.0) {
            return Err(Failure::Usage("--intensity must be positive".into()));
        }
        a.light
            .iter()
            .map(|l| {
                let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
                if !(n > 0.0) {
                    return Err(Failure::Usage("--light must be nonzero".into()));
                }
                Ok(([l[0] / n, l[1] / n, l[2] / n], a.intensity))
            })
            .collect::<Result<_, _>>()?
    };
    let renders = parallel_map(&lights, rt.threads, |&(l, e)| {
        model.fields.render_images(&scene.mask, &[l], &[e])
    })?;
    fs::create_dir_all(a.out.join("images"))?;
    fs::create_dir_all(a.out.join("shadows"))?;
    for (j, r) in renders.iter().enumerate() {
        let img = r.images[0].map(|v| v * model.image_scale);
        write_scalar_pfm(&a.out.join(format!("images/{j:03}.pfm")), &img)?;
        write_mask_pgm(&a.out.join(format!("shadows/{j:03}.pgm")), &r.shadows[0])?;
    }
    println!("rendered {} images to {}", renders.len(), a.out.display());
    Ok(())
}

fn check_size(mask: &Mask, normals: &NormalMap) -> CmdResult {
    if !mask.same_size(normals) {
        return Err(Failure::Data(format!(
            "scene is {}x{} but the run is {}x{}",
            mask.width(),
            mask.height(),
            normals.width(),
            normals.height()
        )));
    }
    Ok(())
}

/// Four mask pixels spread along raster order.
fn default_points(mask: &Mask) -> Vec<(usize, usize)> {
    let pixels = mask.pixels();
    (1..=4).map(|k| pixels[k * pixels.len() / 5]).collect()
}

fn correlation_csv(table: &CorrelationTable) -> String {
    let mut out = String::from("channel,direction,intensity,degenerate\n");
    for r in &table.rows {
        out.push_str(&format!("{},{},{},{}\n", r.channel, r.direction, r.intensity, r.degenerate));
    }
    out
}

fn inspect(a: InspectArgs, rt: Runtime) -> CmdResult {
    let model = load_model(&a.run)?;
    let scene = load_scene(&a.scene)?;
    check_size(&scene.mask, &model.normals)?;
    fs::create_dir_all(a.out.join("brdf"))?;
    write_normals_pfm(&a.out.join("normals.pfm"), &model.normals)?;
    write_scalar_pfm(&a.out.join("albedo.pfm"), &model.albedo)?;
    write_scalar_pfm(&a.out.join("diffuse.pfm"), &model.diffuse)?;
    write_preview_pgm(&a.out.join("albedo.pgm"), &model.albedo)?;
    write_preview_pgm(&a.out.join("diffuse.pgm"), &model.diffuse)?;
    let shading = model.normals.map(|n| n[2].max(0.0));
    write_preview_pgm(&a.out.join("normal_z.pgm"), &shading)?;

    let points = if a.point.is_empty() {
        default_points(&scene.mask)
    } else {
        a.point.clone()
    };
    let spheres = parallel_map(&points, rt.threads, |&p| {
        brdf_sphere_at(&model.fields, &scene.mask, p, a.sphere_resolution)
    })
    .map_err(usage_if_invalid)?;
    for ((c, r), sphere) in points.iter().zip(&spheres) {
        write_scalar_pfm(&a.out.join(format!("brdf/{c}_{r}.pfm")), sphere)?;
        write_preview_pgm(&a.out.join(format!("brdf/{c}_{r}.pgm")), sphere)?;
    }

    let normalized: Vec<Grid<f64>> = scene
        .images
        .iter()
        .map(|img| img.map(|v| v / model.image_scale))
        .collect();
    let input = encoder_input(&normalized, model.fields.config.encoder_resolution)?;
    let features = model.fields.encoder_features(&input)?;
    let (lights, intensities, source) = match (&scene.lights, &scene.intensities) {
        (Some(l), Some(e)) => (l.clone(), e.clone(), "ground-truth"),
        _ => (model.lights.clone(), model.intensities.clone(), "estimated"),
    };
    let table = feature_light_correlation(&features, &lights, &intensities)?;
    write_atomic(&a.out.join("correlation.csv"), correlation_csv(&table).as_bytes())?;
    println!(
        "max channel similarity to {source} lights: direction {:.4}, intensity {:.4}",
        table.max_direction, table.max_intensity
    );
    println!("wrote maps, {} BRDF spheres and correlation.csv to {}", points.len(), a.out.display());
    Ok(())
}

