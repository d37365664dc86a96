//! Browser bindings: relight a synthetic sphere, solve calibrated normals and
//! check the bas-relief ambiguity.

use psfield::evalkit::{normal_mae, woodham_ls};
use psfield::grid::{Grid, Mask, NormalMap};
use psfield::scene::{apply_gbr, make_sphere_scene, render_forward, GbrTransform, Material, Scene, SphereConfig, Surface};
use wasm_bindgen::prelude::*;

/// Ray samples for shadows cast while relighting.
const RELIGHT_SAMPLES: usize = 200;

fn js(e: psfield::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// An RGBA image plus scalar readouts.
#[wasm_bindgen(getter_with_clone)]
pub struct Picture {
    pub rgba: Vec<u8>,
    /// Normal MAE against ground truth, in degrees.
    pub mae: f64,
    /// Largest render difference; 0 when not applicable.
    pub max_abs_diff: f64,
}

/// Two views of one sphere-with-bump: a glossy textured one for relighting and
/// a matte shadow-free one for the Lambertian operations.
#[wasm_bindgen]
pub struct Lab {
    glossy: SphereConfig,
    glossy_scene: Scene,
    matte: SphereConfig,
    matte_scene: Scene,
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(resolution: usize, lights: usize, seed: u32) -> Result<Lab, JsError> {
        let glossy = SphereConfig {
            resolution,
            lights,
            seed: seed as u64,
            shadow_samples: 0,
            ..SphereConfig::default()
        };
        let matte = SphereConfig {
            diffuse_weight: 1.0,
            intensity_range: None,
            ..glossy.clone()
        };
        Ok(Lab {
            glossy_scene: make_sphere_scene(&glossy).map_err(js)?,
            matte_scene: make_sphere_scene(&matte).map_err(js)?,
            glossy,
            matte,
        })
    }

    pub fn resolution(&self) -> usize {
        self.glossy.resolution
    }

    pub fn light_count(&self) -> usize {
        self.matte.lights
    }

    /// Glossy sphere under one unit-intensity light, with cast shadows.
    pub fn relight(&self, x: f64, y: f64, z: f64) -> Result<Vec<u8>, JsError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 0.0) {
            return Err(JsError::new("light direction must be nonzero"));
        }
        let l = [x / norm, y / norm, z / norm];
        let res = self.glossy.resolution;
        let scene = &self.glossy_scene;
        let surface = Surface {
            mask: &scene.mask,
            normals: scene.normals.as_ref().expect("synthetic scenes carry normals"),
            depth: scene.depth.as_ref(),
            shadow_samples: RELIGHT_SAMPLES,
        };
        let material = Material {
            albedo: self.glossy.albedo_map(),
            diffuse_weight: Grid::filled(res, res, self.glossy.diffuse_weight),
            shininess: self.glossy.shininess,
        };
        let img = render_forward(&surface, &[l], &[1.0], &material).map_err(js)?;
        Ok(gray_rgba(&img[0], &scene.mask))
    }

    /// Calibrated least-squares normals of the matte sphere.
    pub fn woodham(&self) -> Result<Picture, JsError> {
        let s = &self.matte_scene;
        let lights = s.lights.as_ref().expect("synthetic scenes carry lights");
        let intensities = s.intensities.as_ref().expect("synthetic scenes carry intensities");
        let (normals, _) = woodham_ls(&s.images, lights, intensities, &s.mask).map_err(js)?;
        let truth = s.normals.as_ref().expect("synthetic scenes carry normals");
        Ok(Picture {
            rgba: normal_rgba(&normals, &s.mask),
            mae: normal_mae(&normals, truth, &s.mask).map_err(js)?,
            max_abs_diff: 0.0,
        })
    }

    /// Pseudo normals after the bas-relief transform `(μ, ν, λ)` with unit
    /// light scalars, and how far their renders drift from the originals.
    pub fn gbr(&self, mu: f64, nu: f64, lambda: f64) -> Result<Picture, JsError> {
        let s = &self.matte_scene;
        let lights = s.lights.as_ref().expect("synthetic scenes carry lights");
        let intensities = s.intensities.as_ref().expect("synthetic scenes carry intensities");
        let truth = s.normals.as_ref().expect("synthetic scenes carry normals");
        let transform = GbrTransform::bas_relief(mu, nu, lambda, vec![1.0; lights.len()]).map_err(js)?;
        let pseudo = apply_gbr(&s.mask, truth, &self.matte.albedo_map(), lights, intensities, &transform).map_err(js)?;
        let max_abs_diff = pseudo
            .render(&s.mask)
            .iter()
            .zip(&s.images)
            .flat_map(|(p, o)| p.data().iter().zip(o.data()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        Ok(Picture {
            rgba: normal_rgba(&pseudo.normals, &s.mask),
            mae: normal_mae(&pseudo.normals, truth, &s.mask).map_err(js)?,
            max_abs_diff,
        })
    }
}

fn gray_rgba(img: &Grid<f64>, mask: &Mask) -> Vec<u8> {
    img.data()
        .iter()
        .zip(mask.data())
        .flat_map(|(&v, &inside)| {
            let g = if inside { (v.clamp(0.0, 1.0) * 255.0).round() as u8 } else { 24 };
            [g, g, g, 255]
        })
        .collect()
}

fn normal_rgba(normals: &NormalMap, mask: &Mask) -> Vec<u8> {
    normals
        .data()
        .iter()
        .zip(mask.data())
        .flat_map(|(n, &inside)| {
            if !inside {
                return [24, 24, 24, 255];
            }
            let c = |v: f64| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8;
            [c(n[0]), c(n[1]), c(n[2]), 255]
        })
        .collect()
}
