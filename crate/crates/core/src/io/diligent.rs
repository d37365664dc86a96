use std::path::{Path, PathBuf};

use super::raster::{read_mask, read_normals_pfm, read_raster};
use crate::error::{Error, Result};
use crate::scene::Scene;

const FILENAMES: &str = "filenames.txt";
const DIRECTIONS: &str = "light_directions.txt";
const INTENSITIES: &str = "light_intensities.txt";

/// True when `dir` holds the three DiLiGenT index files.
pub fn is_diligent_dir(dir: &Path) -> bool {
    [FILENAMES, DIRECTIONS, INTENSITIES].iter().all(|f| dir.join(f).is_file())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn non_empty_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn read_rows(path: &Path) -> Result<Vec<[f64; 3]>> {
    non_empty_lines(&read_text(path)?)
        .map(|line| {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("{line:?}: {e}")))?;
            if v.len() != 3 {
                return Err(Error::format(path, format!("expected 3 values in {line:?}")));
            }
            Ok([v[0], v[1], v[2]])
        })
        .collect()
}

/// The listed file, or a same-stem `.pfm`/`.pgm`/`.ppm` conversion of it.
fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let listed = dir.join(name);
    if listed.is_file() {
        return Ok(listed);
    }
    for ext in ["pfm", "pgm", "ppm"] {
        let alt = listed.with_extension(ext);
        if alt.is_file() {
            return Ok(alt);
        }
    }
    Err(Error::MissingFile(listed))
}

/// Loads a DiLiGenT-style object directory: `filenames.txt`,
/// `light_directions.txt`, `light_intensities.txt` and a `mask` raster, plus
/// `normals.pfm` when present. Colour images and intensities are averaged over
/// channels.
pub fn load_diligent(dir: &Path) -> Result<Scene> {
    let names: Vec<String> = non_empty_lines(&read_text(&dir.join(FILENAMES))?)
        .map(str::to_string)
        .collect();
    let lights = read_rows(&dir.join(DIRECTIONS))?;
    let rgb = read_rows(&dir.join(INTENSITIES))?;
    if lights.len() != names.len() || rgb.len() != names.len() {
        return Err(Error::format(
            dir,
            format!(
                "{} images, {} directions, {} intensities",
                names.len(),
                lights.len(),
                rgb.len()
            ),
        ));
    }
    let lights = lights
        .into_iter()
        .map(|l| {
            let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
            if !(n > 0.0) {
                return Err(Error::format(dir.join(DIRECTIONS), "zero light direction"));
            }
            Ok([l[0] / n, l[1] / n, l[2] / n])
        })
        .collect::<Result<Vec<_>>>()?;
    let intensities: Vec<f64> = rgb.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
    let mask = read_mask(&locate(dir, "mask.png")?)?;
    let images = names
        .iter()
        .map(|n| read_raster(&locate(dir, n)?).map(|r| r.to_gray()))
        .collect::<Result<Vec<_>>>()?;
    let normals_path = dir.join("normals.pfm");
    let normals = if normals_path.is_file() {
        Some(read_normals_pfm(&normals_path)?)
    } else {
        None
    };
    let scene = Scene {
        images,
        mask,
        normals,
        depth: None,
        lights: Some(lights),
        intensities: Some(intensities),
    };
    scene.validate()?;
    Ok(scene)
}
