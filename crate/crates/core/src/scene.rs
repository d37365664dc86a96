//! Synthetic ground truth: scenes, the forward renderer and ambiguity transforms.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::half_vector;
use crate::error::{Error, Result};
use crate::geometry::raymarch_shadow_with;
use crate::grid::{DepthMap, Grid, Mask, NormalMap};

/// Images plus whatever ground truth is known about them.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub images: Vec<Grid<f64>>,
    pub mask: Mask,
    pub normals: Option<NormalMap>,
    pub depth: Option<DepthMap>,
    pub lights: Option<Vec<[f64; 3]>>,
    pub intensities: Option<Vec<f64>>,
}

/// The part of a scene a reconstruction may look at.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub images: Vec<Grid<f64>>,
    pub mask: Mask,
}

impl Observations {
    pub fn new(images: Vec<Grid<f64>>, mask: Mask) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("no images"));
        }
        if images.iter().any(|img| !img.same_size(&mask)) {
            return Err(Error::invalid("image and mask sizes differ"));
        }
        if images.iter().flat_map(|img| img.data()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("images must be finite and non-negative"));
        }
        if mask.count() == 0 {
            return Err(Error::Degenerate("empty mask".into()));
        }
        Ok(Observations { images, mask })
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn light_count(&self) -> usize {
        self.images.len()
    }
}

impl Scene {
    pub fn light_count(&self) -> usize {
        self.images.len()
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    /// Copy of the images and mask with all ground truth stripped.
    pub fn observations(&self) -> Result<Observations> {
        Observations::new(self.images.clone(), self.mask.clone())
    }

    /// Checks the container invariants.
    pub fn validate(&self) -> Result<()> {
        let f = self.images.len();
        if f == 0 {
            return Err(Error::invalid("scene has no images"));
        }
        for img in &self.images {
            if !img.same_size(&self.mask) {
                return Err(Error::invalid("image and mask sizes differ"));
            }
            for (v, &m) in img.data().iter().zip(self.mask.data()) {
                if !v.is_finite() || *v < 0.0 || (!m && *v != 0.0) {
                    return Err(Error::invalid(
                        "images must be finite, non-negative and zero outside the mask",
                    ));
                }
            }
        }
        if let Some(n) = &self.normals {
            if !n.same_size(&self.mask) {
                return Err(Error::invalid("normal map size differs from mask"));
            }
        }
        if let Some(d) = &self.depth {
            if !d.same_size(&self.mask) {
                return Err(Error::invalid("depth map size differs from mask"));
            }
        }
        if let Some(l) = &self.lights {
            if l.len() != f {
                return Err(Error::invalid("light count differs from image count"));
            }
            if l.iter().any(|l| l[2] <= 0.0) {
                return Err(Error::invalid("lights must lie in the upper hemisphere"));
            }
        }
        if let Some(e) = &self.intensities {
            if e.len() != f {
                return Err(Error::invalid("intensity count differs from image count"));
            }
        }
        Ok(())
    }
}

/// Per-pixel reflectance of the oracle: `k_d·ρ_d + (1 − k_d)·max(n·h, 0)^α`.
#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub albedo: Grid<f64>,
    pub diffuse_weight: Grid<f64>,
    pub shininess: f64,
}

impl Material {
    pub fn uniform(width: usize, height: usize, albedo: f64, diffuse_weight: f64, shininess: f64) -> Self {
        Material {
            albedo: Grid::filled(width, height, albedo),
            diffuse_weight: Grid::filled(width, height, diffuse_weight),
            shininess,
        }
    }

    pub fn lambertian(width: usize, height: usize) -> Self {
        Material::uniform(width, height, 1.0, 1.0, 1.0)
    }
}

/// Everything the renderer needs about the surface.
#[derive(Clone, Debug)]
pub struct Surface<'a> {
    pub mask: &'a Mask,
    pub normals: &'a NormalMap,
    /// Cast shadows are ray-marched on this depth when present.
    pub depth: Option<&'a DepthMap>,
    pub shadow_samples: usize,
}

/// Single-pixel image formation.
pub fn shade(n: [f64; 3], l: [f64; 3], e: f64, albedo: f64, kd: f64, shininess: f64, lit: bool) -> f64 {
    let ndl = n[0] * l[0] + n[1] * l[1] + n[2] * l[2];
    if !lit || ndl <= 0.0 {
        return 0.0;
    }
    let h = half_unchecked(l);
    let ndh = (n[0] * h[0] + n[1] * h[1] + n[2] * h[2]).max(0.0);
    e * (kd * albedo + (1.0 - kd) * ndh.powf(shininess)) * ndl
}

fn half_unchecked(l: [f64; 3]) -> [f64; 3] {
    half_vector(l).unwrap_or_else(|_| {
        let s = [l[0], l[1], l[2] + 1.0];
        let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt().max(1e-300);
        [s[0] / n, s[1] / n, s[2] / n]
    })
}

/// Renders one image per light.
pub fn render_forward(
    surface: &Surface,
    lights: &[[f64; 3]],
    intensities: &[f64],
    material: &Material,
) -> Result<Vec<Grid<f64>>> {
    let mask = surface.mask;
    if lights.len() != intensities.len() {
        return Err(Error::invalid("light and intensity counts differ"));
    }
    if !surface.normals.same_size(mask)
        || !material.albedo.same_size(mask)
        || !material.diffuse_weight.same_size(mask)
    {
        return Err(Error::invalid("surface and material sizes differ"));
    }
    if intensities.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("intensities must be positive"));
    }
    for (c, r) in mask.pixels() {
        let n = surface.normals.get(c, r);
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if (len - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("normal at ({c}, {r}) has length {len}")));
        }
    }
    lights
        .iter()
        .zip(intensities)
        .map(|(&l, &e)| {
            let shadow = match surface.depth {
                Some(d) => Some(raymarch_shadow_with(d, mask, l, surface.shadow_samples)?),
                None => None,
            };
            Ok(Grid::from_fn(mask.width(), mask.height(), |c, r| {
                if !*mask.get(c, r) {
                    return 0.0;
                }
                let lit = shadow.as_ref().is_none_or(|s| *s.get(c, r));
                shade(
                    *surface.normals.get(c, r),
                    l,
                    e,
                    *material.albedo.get(c, r),
                    *material.diffuse_weight.get(c, r),
                    material.shininess,
                    lit,
                )
            }))
        })
        .collect()
}

/// Gaussian height bump added to the sphere, in units of the sphere radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub sigma: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Bump {
            center: [0.25, 0.15],
            amplitude: 0.3,
            sigma: 0.15,
        }
    }
}

/// Parameters of the synthetic sphere scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereConfig {
    pub resolution: usize,
    pub lights: usize,
    pub seed: u64,
    pub diffuse_weight: f64,
    pub shininess: f64,
    /// Spatially varying albedo `0.7 + 0.3·cos(2x/R)·cos(1.5y/R)` instead of 1.
    pub textured_albedo: bool,
    pub bump: Option<Bump>,
    /// Intensities drawn uniformly from this range; all 1 when `None`.
    pub intensity_range: Option<(f64, f64)>,
    /// Largest light zenith angle in degrees.
    pub max_zenith_deg: f64,
    /// Ray samples for the oracle's cast shadows; 0 renders no cast shadows.
    pub shadow_samples: usize,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            resolution: 64,
            lights: 20,
            seed: 7,
            diffuse_weight: 0.6,
            shininess: 30.0,
            textured_albedo: true,
            bump: Some(Bump::default()),
            intensity_range: Some((0.5, 1.0)),
            max_zenith_deg: 60.0,
            shadow_samples: 1000,
        }
    }
}

impl SphereConfig {
    /// Uniform-albedo Lambertian sphere without bump or cast shadows.
    pub fn lambertian(resolution: usize, lights: usize, seed: u64) -> Self {
        SphereConfig {
            resolution,
            lights,
            seed,
            diffuse_weight: 1.0,
            shininess: 1.0,
            textured_albedo: false,
            bump: None,
            intensity_range: None,
            shadow_samples: 0,
            ..SphereConfig::default()
        }
    }

    /// Diffuse albedo over the whole raster.
    pub fn albedo_map(&self) -> Grid<f64> {
        let res = self.resolution;
        let center = (res as f64 - 1.0) / 2.0;
        let radius = self.radius();
        Grid::from_fn(res, res, |c, r| {
            if self.textured_albedo {
                let (x, y) = (c as f64 - center, center - r as f64);
                0.7 + 0.3 * (2.0 * x / radius).cos() * (1.5 * y / radius).cos()
            } else {
                1.0
            }
        })
    }

    pub fn radius(&self) -> f64 {
        0.44 * self.resolution as f64
    }
}

/// Lights uniform in solid angle on the cap `zenith ≤ max_zenith`.
pub fn sample_cap_lights(rng: &mut impl Rng, count: usize, max_zenith_deg: f64) -> Vec<[f64; 3]> {
    let lo = max_zenith_deg.to_radians().cos();
    (0..count)
        .map(|_| {
            let cz: f64 = rng.random_range(lo..=1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let sz = (1.0 - cz * cz).max(0.0).sqrt();
            [sz * phi.cos(), sz * phi.sin(), cz]
        })
        .collect()
}

/// Orthographic sphere (optionally with a Gaussian bump) lit by random cap lights.
pub fn make_sphere_scene(config: &SphereConfig) -> Result<Scene> {
    let res = config.resolution;
    if res < 16 {
        return Err(Error::invalid("resolution must be at least 16"));
    }
    if config.lights < 3 {
        return Err(Error::invalid("need at least 3 lights"));
    }
    if !(config.max_zenith_deg > 0.0 && config.max_zenith_deg < 90.0) {
        return Err(Error::invalid("max zenith must lie in (0, 90) degrees"));
    }
    let center = (res as f64 - 1.0) / 2.0;
    let radius = config.radius();
    let inner = radius - 0.5;
    let mask = Mask::from_fn(res, res, |c, r| {
        let (x, y) = (c as f64 - center, center - r as f64);
        x * x + y * y < inner * inner
    });

    let mut depth = DepthMap::filled(res, res, 0.0);
    let mut normals = NormalMap::filled(res, res, [0.0; 3]);
    for (c, r) in mask.pixels() {
        let (x, y) = (c as f64 - center, center - r as f64);
        let z = (radius * radius - x * x - y * y).max(0.0).sqrt();
        let (mut w, mut dzdx, mut dzdy) = (z, -x / z.max(1e-6), -y / z.max(1e-6));
        if let Some(b) = config.bump {
            let (bx, by) = (b.center[0] * radius, b.center[1] * radius);
            let (amp, s) = (b.amplitude * radius, b.sigma * radius);
            let g = amp * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * s * s)).exp();
            w += g;
            dzdx -= g * (x - bx) / (s * s);
            dzdy -= g * (y - by) / (s * s);
        }
        let len = (dzdx * dzdx + dzdy * dzdy + 1.0).sqrt();
        *depth.get_mut(c, r) = w;
        *normals.get_mut(c, r) = [-dzdx / len, -dzdy / len, 1.0 / len];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lights = sample_cap_lights(&mut rng, config.lights, config.max_zenith_deg);
    let intensities: Vec<f64> = match config.intensity_range {
        Some((lo, hi)) => {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::invalid("intensity range must satisfy 0 < lo <= hi"));
            }
            (0..config.lights).map(|_| rng.random_range(lo..=hi)).collect()
        }
        None => vec![1.0; config.lights],
    };

    let albedo = config.albedo_map();
    let material = Material {
        albedo,
        diffuse_weight: Grid::filled(res, res, config.diffuse_weight),
        shininess: config.shininess,
    };
    let surface = Surface {
        mask: &mask,
        normals: &normals,
        depth: (config.shadow_samples > 0).then_some(&depth),
        shadow_samples: config.shadow_samples,
    };
    let images = render_forward(&surface, &lights, &intensities, &material)?;
    Ok(Scene {
        images,
        mask,
        normals: Some(normals),
        depth: Some(depth),
        lights: Some(lights),
        intensities: Some(intensities),
    })
}

/// Shape-light ambiguity `G` with per-light reflectance-light scalars `c_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct GbrTransform {
    pub g: Matrix3<f64>,
    pub scales: Vec<f64>,
}

impl GbrTransform {
    /// Classic bas-relief matrix `[[1,0,0],[0,1,0],[μ,ν,λ]]`.
    pub fn bas_relief(mu: f64, nu: f64, lambda: f64, scales: Vec<f64>) -> Result<Self> {
        if lambda == 0.0 {
            return Err(Error::Singular("bas-relief lambda must be nonzero".into()));
        }
        Ok(GbrTransform {
            g: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, mu, nu, lambda),
            scales,
        })
    }

    pub fn identity(lights: usize) -> Self {
        GbrTransform {
            g: Matrix3::identity(),
            scales: vec![1.0; lights],
        }
    }
}

/// Scene quantities after an ambiguity transform. Pixel `i` under light `j`
/// renders as `e_j · ρ_i · r_j · max(n_i·l_j, 0)` with `r_j` the per-light
/// reflectance factor `1 / c_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoScene {
    pub normals: NormalMap,
    pub albedo: Grid<f64>,
    pub lights: Vec<[f64; 3]>,
    pub intensities: Vec<f64>,
    pub reflectance_scales: Vec<f64>,
}

impl PseudoScene {
    pub fn render(&self, mask: &Mask) -> Vec<Grid<f64>> {
        self.lights
            .iter()
            .zip(&self.intensities)
            .zip(&self.reflectance_scales)
            .map(|((l, &e), &r)| {
                Grid::from_fn(mask.width(), mask.height(), |c, row| {
                    if !*mask.get(c, row) {
                        return 0.0;
                    }
                    let n = self.normals.get(c, row);
                    let ndl = n[0] * l[0] + n[1] * l[1] + n[2] * l[2];
                    e * self.albedo.get(c, row) * r * ndl.max(0.0)
                })
            })
            .collect()
    }
}

/// Pseudo normals `∝ G^{-T}(ρ n)`, lights `∝ G l` and intensities absorbing the
/// scale and `c_j` that reproduce a Lambertian, cast-shadow-free scene exactly.
pub fn apply_gbr(
    mask: &Mask,
    normals: &NormalMap,
    albedo: &Grid<f64>,
    lights: &[[f64; 3]],
    intensities: &[f64],
    transform: &GbrTransform,
) -> Result<PseudoScene> {
    if transform.scales.len() != lights.len() || intensities.len() != lights.len() {
        return Err(Error::invalid("per-light counts differ"));
    }
    if transform.scales.iter().any(|&c| c == 0.0 || !c.is_finite()) {
        return Err(Error::invalid("reflectance-light scalars must be nonzero"));
    }
    let g = transform.g;
    let inv_t = g
        .try_inverse()
        .filter(|_| g.determinant().abs() > 1e-12)
        .ok_or_else(|| Error::Singular("ambiguity matrix is not invertible".into()))?
        .transpose();
    let mut pseudo_normals = NormalMap::filled(mask.width(), mask.height(), [0.0; 3]);
    let mut pseudo_albedo = Grid::filled(mask.width(), mask.height(), 0.0);
    for (c, r) in mask.pixels() {
        let n = normals.get(c, r);
        let b = inv_t * (Vector3::new(n[0], n[1], n[2]) * *albedo.get(c, r));
        let len = b.norm();
        if len > 0.0 {
            *pseudo_normals.get_mut(c, r) = [b.x / len, b.y / len, b.z / len];
        }
        *pseudo_albedo.get_mut(c, r) = len;
    }
    let mut pseudo_lights = Vec::with_capacity(lights.len());
    let mut pseudo_intensities = Vec::with_capacity(lights.len());
    for ((l, &e), &cj) in lights.iter().zip(intensities).zip(&transform.scales) {
        let s = g * Vector3::new(l[0], l[1], l[2]);
        let len = s.norm();
        pseudo_lights.push([s.x / len, s.y / len, s.z / len]);
        pseudo_intensities.push(e * len * cj);
    }
    Ok(PseudoScene {
        normals: pseudo_normals,
        albedo: pseudo_albedo,
        lights: pseudo_lights,
        intensities: pseudo_intensities,
        reflectance_scales: transform.scales.iter().map(|c| 1.0 / c).collect(),
    })
}

/// Multiplies image `j` and its intensity by `u_j ~ U(lo, hi)`; returns the
/// scaled scene and the factors.
pub fn scale_intensities(scene: &Scene, seed: u64, lo: f64, hi: f64) -> Result<(Scene, Vec<f64>)> {
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::invalid("scaling range must satisfy 0 < lo <= hi"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<f64> = (0..scene.light_count())
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect();
    let mut out = scene.clone();
    for (img, &u) in out.images.iter_mut().zip(&factors) {
        img.data_mut().iter_mut().for_each(|v| *v *= u);
    }
    if let Some(e) = &mut out.intensities {
        e.iter_mut().zip(&factors).for_each(|(e, u)| *e *= u);
    }
    Ok((out, factors))
}

pub const DEFAULT_SCALE_RANGE: (f64, f64) = (0.01, 1.0);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn single(n: [f64; 3], l: [f64; 3], e: f64, albedo: f64, kd: f64, alpha: f64) -> f64 {
        let mask = Grid::filled(1, 1, true);
        let normals = Grid::filled(1, 1, n);
        let surface = Surface {
            mask: &mask,
            normals: &normals,
            depth: None,
            shadow_samples: 0,
        };
        let material = Material::uniform(1, 1, albedo, kd, alpha);
        *render_forward(&surface, &[l], &[e], &material).unwrap()[0].get(0, 0)
    }

    #[test]
    fn unit_case_renders_one() {
        assert_eq!(single([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 1.0, 1.0, 1.0, 5.0), 1.0);
    }

    #[test]
    fn back_facing_is_black() {
        let v = single([1.0, 0.0, 0.0], [-0.6, 0.0, 0.8], 3.0, 1.0, 0.2, 5.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn mixed_material_example() {
        let v = single([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 2.0, 0.5, 0.8, 10.0);
        assert!((v - 1.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mask = Grid::filled(1, 1, true);
        let normals = Grid::filled(1, 1, [0.0, 0.0, 2.0]);
        let surface = Surface {
            mask: &mask,
            normals: &normals,
            depth: None,
            shadow_samples: 0,
        };
        let m = Material::lambertian(1, 1);
        assert!(render_forward(&surface, &[[0.0, 0.0, 1.0]], &[1.0], &m).is_err());
        let normals = Grid::filled(1, 1, [0.0, 0.0, 1.0]);
        let surface = Surface {
            normals: &normals,
            ..surface
        };
        assert!(render_forward(&surface, &[[0.0, 0.0, 1.0]], &[0.0], &m).is_err());
    }

    #[test]
    fn sphere_scene_contract() {
        let scene = make_sphere_scene(&SphereConfig {
            shadow_samples: 32,
            ..SphereConfig::default()
        })
        .unwrap();
        scene.validate().unwrap();
        assert_eq!(scene.images.len(), 20);
        let normals = scene.normals.as_ref().unwrap();
        let lights = scene.lights.as_ref().unwrap();
        assert!(lights
            .iter()
            .all(|l| l[2] >= 60f64.to_radians().cos() - 1e-12));
        let plain = make_sphere_scene(&SphereConfig::lambertian(64, 20, 1)).unwrap();
        let n = plain.normals.unwrap();
        let c = n.get(31, 31);
        assert!(c[2] > 0.999);
        assert!(n.get(4, 32)[2] < 0.3);
        assert!(normals.data().iter().all(|v| v.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn bump_casts_shadow_under_grazing_light() {
        let cfg = SphereConfig {
            shadow_samples: 200,
            ..SphereConfig::default()
        };
        let scene = make_sphere_scene(&cfg).unwrap();
        let depth = scene.depth.unwrap();
        // Light from the -x side at 60°: the bump (right of centre) shadows pixels to its right.
        let z = 60f64.to_radians();
        let l = [-z.sin(), 0.0, z.cos()];
        let shadow = raymarch_shadow_with(&depth, &scene.mask, l, 200).unwrap();
        let bump_col = (31.5 + 0.25 * cfg.radius()).round() as usize;
        let bump_row = (31.5 - 0.15 * cfg.radius()).round() as usize;
        let behind = (bump_col + 2..bump_col + 8).filter(|&c| !*shadow.get(c, bump_row)).count();
        assert!(behind >= 3, "behind {behind}");
        assert!(*shadow.get(bump_col - 4, bump_row));
    }

    #[test]
    fn gbr_identity_is_noop() {
        let scene = make_sphere_scene(&SphereConfig::lambertian(32, 5, 3)).unwrap();
        let normals = scene.normals.unwrap();
        let lights = scene.lights.unwrap();
        let e = scene.intensities.unwrap();
        let albedo = Grid::filled(32, 32, 1.0);
        let p = apply_gbr(&scene.mask, &normals, &albedo, &lights, &e, &GbrTransform::identity(5))
            .unwrap();
        for (c, r) in scene.mask.pixels() {
            let (a, b) = (normals.get(c, r), p.normals.get(c, r));
            assert!((0..3).all(|k| (a[k] - b[k]).abs() < 1e-15));
        }
        for (a, b) in p.lights.iter().zip(&lights) {
            assert!((0..3).all(|k| (a[k] - b[k]).abs() < 1e-15));
        }
        for (a, b) in p.intensities.iter().zip(&e) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gbr_changes_normals_not_images() {
        let scene = make_sphere_scene(&SphereConfig::lambertian(64, 12, 5)).unwrap();
        let normals = scene.normals.unwrap();
        let lights = scene.lights.unwrap();
        let e = scene.intensities.unwrap();
        let albedo = Grid::filled(64, 64, 1.0);
        let t = GbrTransform::bas_relief(0.3, -0.2, 1.5, vec![1.0; 12]).unwrap();
        let p = apply_gbr(&scene.mask, &normals, &albedo, &lights, &e, &t).unwrap();
        let rendered = p.render(&scene.mask);
        for (a, b) in rendered.iter().zip(&scene.images) {
            let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-6);
        }
        let px = scene.mask.pixels();
        let mae = px
            .iter()
            .map(|&(c, r)| {
                let (a, b) = (normals.get(c, r), p.normals.get(c, r));
                (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos().to_degrees()
            })
            .sum::<f64>()
            / px.len() as f64;
        assert!(mae > 5.0, "mae {mae}");
        assert!(GbrTransform::bas_relief(0.0, 0.0, 0.0, vec![]).is_err());
    }

    #[test]
    fn scaling_unit_range_is_noop_and_seeded() {
        let scene = make_sphere_scene(&SphereConfig::lambertian(16, 4, 2)).unwrap();
        let (same, f) = scale_intensities(&scene, 9, 1.0, 1.0).unwrap();
        assert_eq!(same, scene);
        assert_eq!(f, vec![1.0; 4]);
        let (_, a) = scale_intensities(&scene, 9, 0.01, 1.0).unwrap();
        let (_, b) = scale_intensities(&scene, 9, 0.01, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|u| (0.01..1.0).contains(u)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (lo, hi) = DEFAULT_SCALE_RANGE;
        let draws: Vec<f64> = (0..96).map(|_| rng.random_range(lo..hi)).collect();
        assert_eq!(draws.len(), 96);
        assert!(scale_intensities(&scene, 1, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_intensity(e in 0.01f64..10.0, seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = sample_cap_lights(&mut rng, 1, 60.0)[0];
            let n = sample_cap_lights(&mut rng, 1, 80.0)[0];
            let kd: f64 = rng.random_range(0.0..1.0);
            let a = single(n, l, e, 0.8, kd, 20.0);
            let b = single(n, l, 2.0 * e, 0.8, kd, 20.0);
            prop_assert!(a >= 0.0);
            prop_assert_eq!(b, 2.0 * a);
        }
    }
}
