//! Scene and model containers, raster formats, dataset loading and CSV output.

mod diligent;
mod raster;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use diligent::{is_diligent_dir, load_diligent};
pub use raster::{
    decode_pfm, decode_pnm, encode_pfm, encode_pgm, read_mask, read_normals_pfm, read_raster, read_scalar_pfm,
    write_mask_pgm, write_normals_pfm, write_preview_pgm, write_scalar_pfm, Raster,
};

use crate::array::Array;
use crate::error::{Error, Result};
use crate::fields::FieldParameters;
use crate::grid::Grid;
use crate::losses::{LossReport, LossTerm};
use crate::scene::{Scene, SphereConfig};
use crate::trainer::{TrainConfig, TrainedModel};

pub const SCENE_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;
pub const SCENE_FILE: &str = "scene.json";
pub const MODEL_FILE: &str = "model.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const HISTORY_FILE: &str = "history.csv";

/// Reads a whole file, reporting a missing one by name.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Writes through a sibling temporary file and a rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// On-disk description of a scene directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub light_count: usize,
    pub images: Vec<String>,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lights: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensities: Option<Vec<f64>>,
    /// Settings of the generator that produced the scene, if synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SphereConfig>,
}

/// Writes `scene` into directory `dir`. Raster payloads are stored as 32-bit floats.
pub fn save_scene(scene: &Scene, dir: &Path, generator: Option<&SphereConfig>) -> Result<()> {
    scene.validate()?;
    fs::create_dir_all(dir.join("images"))?;
    let images: Vec<String> = (0..scene.light_count()).map(|j| format!("images/{j:03}.pfm")).collect();
    for (img, name) in scene.images.iter().zip(&images) {
        write_scalar_pfm(&dir.join(name), img)?;
    }
    write_mask_pgm(&dir.join("mask.pgm"), &scene.mask)?;
    let normals = match &scene.normals {
        Some(n) => {
            write_normals_pfm(&dir.join("normals.pfm"), n)?;
            Some("normals.pfm".to_string())
        }
        None => None,
    };
    let depth = match &scene.depth {
        Some(d) => {
            write_scalar_pfm(&dir.join("depth.pfm"), d)?;
            Some("depth.pfm".to_string())
        }
        None => None,
    };
    let manifest = SceneManifest {
        version: SCENE_VERSION,
        width: scene.width(),
        height: scene.height(),
        light_count: scene.light_count(),
        images,
        mask: "mask.pgm".into(),
        normals,
        depth,
        lights: scene.lights.clone(),
        intensities: scene.intensities.clone(),
        generator: generator.cloned(),
    };
    write_json(&dir.join(SCENE_FILE), &manifest)
}

fn check_size<T>(grid: &Grid<T>, manifest: &SceneManifest, path: &Path) -> Result<()> {
    if grid.width() != manifest.width || grid.height() != manifest.height {
        return Err(Error::format(
            path,
            format!(
                "raster is {}x{}, manifest declares {}x{}",
                grid.width(),
                grid.height(),
                manifest.width,
                manifest.height
            ),
        ));
    }
    Ok(())
}

/// Loads a scene directory written by [`save_scene`] or laid out like DiLiGenT.
/// `path` may also name the manifest file itself.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let (dir, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(SCENE_FILE))
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        (dir, path.to_path_buf())
    };
    if !manifest_path.exists() && is_diligent_dir(&dir) {
        return load_diligent(&dir);
    }
    let manifest: SceneManifest = read_json(&manifest_path)?;
    if manifest.version != SCENE_VERSION {
        return Err(Error::UnsupportedVersion(manifest.version));
    }
    if manifest.images.len() != manifest.light_count {
        return Err(Error::format(&manifest_path, "image list does not match light_count"));
    }
    let mask_path = dir.join(&manifest.mask);
    let mask = read_mask(&mask_path)?;
    check_size(&mask, &manifest, &mask_path)?;
    let mut images = Vec::with_capacity(manifest.images.len());
    for name in &manifest.images {
        let p = dir.join(name);
        let img = read_raster(&p)?.to_gray();
        check_size(&img, &manifest, &p)?;
        images.push(img);
    }
    let normals = match &manifest.normals {
        Some(name) => {
            let p = dir.join(name);
            let n = read_normals_pfm(&p)?;
            check_size(&n, &manifest, &p)?;
            Some(n)
        }
        None => None,
    };
    let depth = match &manifest.depth {
        Some(name) => {
            let p = dir.join(name);
            let d = read_scalar_pfm(&p)?;
            check_size(&d, &manifest, &p)?;
            Some(d)
        }
        None => None,
    };
    for (what, len) in [
        ("lights", manifest.lights.as_ref().map(Vec::len)),
        ("intensities", manifest.intensities.as_ref().map(Vec::len)),
    ] {
        if let Some(len) = len {
            if len != manifest.light_count {
                return Err(Error::format(&manifest_path, format!("{what} has {len} entries")));
            }
        }
    }
    let scene = Scene {
        images,
        mask,
        normals,
        depth,
        lights: manifest.lights,
        intensities: manifest.intensities,
    };
    scene.validate()?;
    Ok(scene)
}

/// Loads the generator settings recorded in a scene manifest, if any.
pub fn scene_generator(dir: &Path) -> Result<Option<SphereConfig>> {
    let manifest: SceneManifest = read_json(&dir.join(SCENE_FILE))?;
    Ok(manifest.generator)
}

/// Parameter tensor index entry of the model container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// `model.json` of a run directory; tensors live in `params.bin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub version: u32,
    pub config_hash: String,
    pub config: TrainConfig,
    pub image_scale: f64,
    pub lights: Vec<[f64; 3]>,
    pub intensities: Vec<f64>,
    pub tensors: Vec<TensorEntry>,
    pub has_depth: bool,
}

/// Writes parameters, estimates and history into run directory `dir`.
pub fn save_model(model: &TrainedModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let store = &model.fields.store;
    let mut bytes = Vec::with_capacity(8 * store.scalar_count());
    for v in store.values() {
        for x in v.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_atomic(&dir.join(PARAMS_FILE), &bytes)?;
    write_normals_pfm(&dir.join("normals.pfm"), &model.normals)?;
    write_scalar_pfm(&dir.join("albedo.pfm"), &model.albedo)?;
    write_scalar_pfm(&dir.join("diffuse.pfm"), &model.diffuse)?;
    if let Some(d) = &model.depth {
        write_scalar_pfm(&dir.join("depth.pfm"), d)?;
    }
    let hash = model.config.hash();
    write_atomic(&dir.join(HISTORY_FILE), history_csv(&hash, &model.history).as_bytes())?;
    let manifest = ModelManifest {
        version: MODEL_VERSION,
        config_hash: hash,
        config: model.config.clone(),
        image_scale: model.image_scale,
        lights: model.lights.clone(),
        intensities: model.intensities.clone(),
        tensors: store
            .names()
            .iter()
            .zip(store.values())
            .map(|(n, v)| TensorEntry {
                name: n.clone(),
                shape: v.shape().to_vec(),
            })
            .collect(),
        has_depth: model.depth.is_some(),
    };
    write_json(&dir.join(MODEL_FILE), &manifest)
}

/// Reads a run directory written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let manifest_path = dir.join(MODEL_FILE);
    let manifest: ModelManifest = read_json(&manifest_path)?;
    if manifest.version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(manifest.version));
    }
    let mut fields = FieldParameters::new(&manifest.config.field_config(), 0)?;
    let params_path = dir.join(PARAMS_FILE);
    let bytes = read_file(&params_path)?;
    let expected: usize = manifest.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if bytes.len() != 8 * expected {
        return Err(Error::format(
            &params_path,
            format!("expected {} bytes, found {}", 8 * expected, bytes.len()),
        ));
    }
    if manifest.tensors.len() != fields.store.len() {
        return Err(Error::format(&manifest_path, "tensor count does not match the architecture"));
    }
    let mut offset = 0;
    for t in &manifest.tensors {
        let n: usize = t.shape.iter().product();
        let data = bytes[offset..offset + 8 * n]
            .chunks(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        offset += 8 * n;
        fields.store.assign(&t.name, Array::new(&t.shape, data)?)?;
    }
    let history_path = dir.join(HISTORY_FILE);
    let history = parse_history_csv(&String::from_utf8_lossy(&read_file(&history_path)?), &history_path)?;
    let depth = if manifest.has_depth {
        Some(read_scalar_pfm(&dir.join("depth.pfm"))?)
    } else {
        None
    };
    Ok(TrainedModel {
        fields,
        normals: read_normals_pfm(&dir.join("normals.pfm"))?,
        albedo: read_scalar_pfm(&dir.join("albedo.pfm"))?,
        diffuse: read_scalar_pfm(&dir.join("diffuse.pfm"))?,
        lights: manifest.lights,
        intensities: manifest.intensities,
        depth,
        history,
        image_scale: manifest.image_scale,
        config: manifest.config,
    })
}

pub const HISTORY_HEADER: &str = "config_hash,epoch,phase,rec,si,az,gp,shadow,recshadow,total";

/// One history line; absent terms are left empty.
pub fn history_row(config_hash: &str, report: &LossReport) -> String {
    let mut cells = vec![
        config_hash.to_string(),
        report.epoch.to_string(),
        if report.warmup { "warmup" } else { "main" }.to_string(),
    ];
    for term in LossTerm::ALL {
        cells.push(report.get(term).map(|v| v.to_string()).unwrap_or_default());
    }
    cells.push(report.total.to_string());
    cells.join(",")
}

pub fn history_csv(config_hash: &str, history: &[LossReport]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&history_row(config_hash, r));
        out.push('\n');
    }
    out
}

pub fn parse_history_csv(text: &str, path: &Path) -> Result<Vec<LossReport>> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(Error::format(path, "unexpected history header"));
    }
    let bad = |line: &str| Error::format(path, format!("bad history row {line:?}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 4 + LossTerm::ALL.len() {
                return Err(bad(line));
            }
            let epoch = cells[1].parse().map_err(|_| bad(line))?;
            let warmup = match cells[2] {
                "warmup" => true,
                "main" => false,
                _ => return Err(bad(line)),
            };
            let mut terms = Vec::new();
            for (term, cell) in LossTerm::ALL.iter().zip(&cells[3..]) {
                if !cell.is_empty() {
                    terms.push((*term, cell.parse().map_err(|_| bad(line))?));
                }
            }
            let total = cells[cells.len() - 1].parse().map_err(|_| bad(line))?;
            Ok(LossReport {
                epoch,
                warmup,
                terms,
                total,
            })
        })
        .collect()
}

/// Evaluation results of one run on one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config_hash: String,
    pub scene: String,
    pub normal_mae_deg: f64,
    pub light_mae_deg: Option<f64>,
    pub eta: Option<f64>,
    pub e_int: Option<f64>,
}

pub const METRICS_HEADER: &str = "config_hash,scene,normal_mae_deg,light_mae_deg,eta,e_int";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.config_hash,
            r.scene.replace(',', "_"),
            r.normal_mae_deg,
            opt(r.light_mae_deg),
            opt(r.eta),
            opt(r.e_int)
        ));
    }
    out
}
