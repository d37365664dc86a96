//! Error metrics, the least-squares baseline and appendix diagnostics.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::error::{Error, Result};
use crate::fields::{pixel_codes, FieldParameters, SurfaceIntrinsics};
use crate::grid::{Grid, Mask, NormalMap};

/// Angle between two unit vectors in degrees, with the cosine clamped.
pub fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    d.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Mean angular error over masked pixels, in degrees.
pub fn normal_mae(estimate: &NormalMap, truth: &NormalMap, mask: &Mask) -> Result<f64> {
    if !estimate.same_size(mask) || !truth.same_size(mask) {
        return Err(Error::invalid("normal maps and mask differ in size"));
    }
    let pixels = mask.pixels();
    if pixels.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let total: f64 = pixels
        .iter()
        .map(|&(c, r)| angle_deg(*estimate.get(c, r), *truth.get(c, r)))
        .sum();
    Ok(total / pixels.len() as f64)
}

/// Mean angular error over matched light directions, in degrees.
pub fn light_dir_mae(estimate: &[[f64; 3]], truth: &[[f64; 3]]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid("light lists differ in length"));
    }
    if estimate.is_empty() {
        return Err(Error::invalid("no lights"));
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| angle_deg(*a, *b)).sum::<f64>() / estimate.len() as f64)
}

/// Scale-invariant intensity error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityMetric {
    /// Least-squares scale taking the estimate onto the truth.
    pub eta: f64,
    pub e_int: f64,
}

/// `η = Σ e·ẽ / Σ e²` and `E_int = mean |η·e − ẽ| / ẽ`.
pub fn intensity_error(estimate: &[f64], truth: &[f64]) -> Result<IntensityMetric> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid("intensity lists differ in length"));
    }
    if estimate.is_empty() {
        return Err(Error::invalid("no intensities"));
    }
    if truth.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("true intensities must be positive"));
    }
    let num: f64 = estimate.iter().zip(truth).map(|(e, t)| e * t).sum();
    let den: f64 = estimate.iter().map(|e| e * e).sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate("estimated intensities are all zero".into()));
    }
    let eta = num / den;
    let e_int = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (eta * e - t).abs() / t)
        .sum::<f64>()
        / estimate.len() as f64;
    Ok(IntensityMetric { eta, e_int })
}

/// Relative size of the third singular value of the light matrix below which
/// the lights count as coplanar.
pub const COPLANAR_TOLERANCE: f64 = 1e-9;

/// Per-pixel least squares `min ‖diag(e)·L·b − m‖` with `n = b/‖b‖` and
/// `ρ = ‖b‖`. Zero observations are dropped while at least 3 remain.
pub fn woodham_ls(
    images: &[Grid<f64>],
    lights: &[[f64; 3]],
    intensities: &[f64],
    mask: &Mask,
) -> Result<(NormalMap, Grid<f64>)> {
    let f = images.len();
    if lights.len() != f || intensities.len() != f {
        return Err(Error::invalid("images, lights and intensities differ in count"));
    }
    if f < 3 {
        return Err(Error::invalid("need at least 3 lights"));
    }
    if images.iter().any(|img| !img.same_size(mask)) {
        return Err(Error::invalid("image and mask sizes differ"));
    }
    let rows: Vec<[f64; 3]> = lights
        .iter()
        .zip(intensities)
        .map(|(l, e)| [e * l[0], e * l[1], e * l[2]])
        .collect();
    let lm = DMatrix::from_fn(f, 3, |j, c| rows[j][c]);
    let sv = lm.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > COPLANAR_TOLERANCE * smax) {
        return Err(Error::Degenerate("lights are coplanar".into()));
    }

    let solve = |used: &[usize], obs: &[f64]| -> Option<Vector3<f64>> {
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for &j in used {
            let a = Vector3::from(rows[j]);
            ata += a * a.transpose();
            atb += a * obs[j];
        }
        let svd = ata.svd(true, true);
        let sv = svd.singular_values;
        if !(sv.min() > COPLANAR_TOLERANCE * sv.max()) {
            return None;
        }
        svd.solve(&atb, 0.0).ok()
    };

    let (w, h) = (mask.width(), mask.height());
    let mut normals = NormalMap::filled(w, h, [0.0, 0.0, 1.0]);
    let mut albedo = Grid::filled(w, h, 0.0);
    let all: Vec<usize> = (0..f).collect();
    for (c, r) in mask.pixels() {
        let obs: Vec<f64> = images.iter().map(|img| *img.get(c, r)).collect();
        let lit: Vec<usize> = (0..f).filter(|&j| obs[j] != 0.0).collect();
        let b = if lit.len() >= 3 {
            solve(&lit, &obs).or_else(|| solve(&all, &obs))
        } else {
            solve(&all, &obs)
        }
        .ok_or_else(|| Error::Singular("per-pixel light system is rank deficient".into()))?;
        let rho = b.norm();
        if rho > 0.0 {
            *normals.get_mut(c, r) = [b.x / rho, b.y / rho, b.z / rho];
        }
        *albedo.get_mut(c, r) = rho;
    }
    Ok((normals, albedo))
}

/// Similarity of one feature channel's distances to the light distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub channel: usize,
    pub direction: f64,
    pub intensity: f64,
    /// Set when a distance vector was all zero and a similarity was reported as 0.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub rows: Vec<CorrelationRow>,
    pub max_direction: f64,
    pub max_intensity: f64,
}

fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Cosine similarity between per-channel feature distances and light
/// direction (cosine distance) and intensity (ℓ1) distances over all image pairs.
///
/// `features` holds one `[s, s, c]` array per image.
pub fn feature_light_correlation(
    features: &[Array],
    lights: &[[f64; 3]],
    intensities: &[f64],
) -> Result<CorrelationTable> {
    let f = features.len();
    if f < 2 {
        return Err(Error::invalid("need at least 2 images"));
    }
    if lights.len() != f || intensities.len() != f {
        return Err(Error::invalid("features, lights and intensities differ in count"));
    }
    let shape = features[0].shape().to_vec();
    if shape.len() != 3 || features.iter().any(|a| a.shape() != shape.as_slice()) {
        return Err(Error::InvalidShape {
            op: "feature-light-correlation",
            shape,
        });
    }
    let channels = shape[2];
    let pairs: Vec<(usize, usize)> = (0..f).flat_map(|a| (a + 1..f).map(move |b| (a, b))).collect();
    let v_dir: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| {
            let (la, lb) = (lights[a], lights[b]);
            let dot = la[0] * lb[0] + la[1] * lb[1] + la[2] * lb[2];
            let norm = (la.iter().map(|x| x * x).sum::<f64>() * lb.iter().map(|x| x * x).sum::<f64>()).sqrt();
            1.0 - dot / norm
        })
        .collect();
    let v_int: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| (intensities[a] - intensities[b]).abs())
        .collect();
    let rows: Vec<CorrelationRow> = (0..channels)
        .map(|ch| {
            let v_feat: Vec<f64> = pairs
                .iter()
                .map(|&(a, b)| {
                    features[a]
                        .data()
                        .iter()
                        .zip(features[b].data())
                        .skip(ch)
                        .step_by(channels)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            let d = cosine_similarity(&v_feat, &v_dir);
            let i = cosine_similarity(&v_feat, &v_int);
            CorrelationRow {
                channel: ch,
                direction: d.unwrap_or(0.0),
                intensity: i.unwrap_or(0.0),
                degenerate: d.is_none() || i.is_none(),
            }
        })
        .collect();
    let max_direction = rows.iter().map(|r| r.direction).fold(f64::NEG_INFINITY, f64::max);
    let max_intensity = rows.iter().map(|r| r.intensity).fold(f64::NEG_INFINITY, f64::max);
    Ok(CorrelationTable {
        rows,
        max_direction,
        max_intensity,
    })
}

/// A sphere of normals lit frontally with one point's reflectance, scaled to
/// a maximum of 1. `specular` maps `(v·h, n·h)` rows to `ρ_s`.
pub fn brdf_sphere(
    intr: &SurfaceIntrinsics,
    specular: impl Fn(&[[f64; 2]]) -> Result<Vec<f64>>,
    resolution: usize,
) -> Result<Grid<f64>> {
    if resolution == 0 {
        return Err(Error::invalid("resolution must be at least 1"));
    }
    let res = resolution as f64;
    let mut normals = Vec::new();
    let mut slots = Vec::new();
    for r in 0..resolution {
        for c in 0..resolution {
            let x = 2.0 * (c as f64 + 0.5) / res - 1.0;
            let y = 1.0 - 2.0 * (r as f64 + 0.5) / res;
            let rr = x * x + y * y;
            if rr <= 1.0 {
                normals.push([x, y, (1.0 - rr).sqrt()]);
                slots.push(r * resolution + c);
            }
        }
    }
    // Frontal light: h = v = l = (0, 0, 1), so v·h = 1 and n·h = n·l = n_z.
    let inputs: Vec<[f64; 2]> = normals.iter().map(|n| [1.0, n[2]]).collect();
    let rho_s = specular(&inputs)?;
    if rho_s.len() != inputs.len() {
        return Err(Error::invalid("specular evaluator returned the wrong count"));
    }
    let mut out = vec![0.0; resolution * resolution];
    for ((n, s), &slot) in normals.iter().zip(&rho_s).zip(&slots) {
        out[slot] = (intr.diffuse * intr.albedo + intr.specular_weight() * s) * n[2];
    }
    let peak = out.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    Grid::from_vec(resolution, resolution, out)
}

/// [`brdf_sphere`] for the trained fields at pixel `(col, row)`.
pub fn brdf_sphere_at(fields: &FieldParameters, mask: &Mask, point: (usize, usize), resolution: usize) -> Result<Grid<f64>> {
    let (c, r) = point;
    if c >= mask.width() || r >= mask.height() || !*mask.get(c, r) {
        return Err(Error::invalid(format!("point ({c}, {r}) lies outside the mask")));
    }
    let (pixels, codes) = pixel_codes(mask, fields.config.levels);
    let k = pixels
        .iter()
        .position(|&p| p == point)
        .expect("masked point has a code");
    let intr = fields.position_eval(codes.row(k))?;
    brdf_sphere(&intr, |pts| fields.specular_eval(pts), resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{apply_gbr, make_sphere_scene, GbrTransform, SphereConfig};
    use proptest::prelude::*;

    #[test]
    fn angular_error_examples() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(light_dir_mae(&[x, y], &[x, y]).unwrap(), 0.0);
        assert!((light_dir_mae(&[x, y], &[y, x]).unwrap() - 90.0).abs() < 1e-12);
        let c60 = [0.5, 3f64.sqrt() / 2.0, 0.0];
        assert!((light_dir_mae(&[x, x], &[x, c60]).unwrap() - 30.0).abs() < 1e-9);
        assert!(light_dir_mae(&[], &[]).is_err());
        let mask = Mask::filled(2, 2, false);
        let n = NormalMap::filled(2, 2, [0.0, 0.0, 1.0]);
        assert!(normal_mae(&n, &n, &mask).is_err());
    }

    #[test]
    fn rounding_never_produces_nan() {
        let a = [0.6, 0.8, 0.0];
        let b = [0.6 + 1e-16, 0.8, 0.0];
        assert!(angle_deg(a, b).is_finite());
        assert!(angle_deg(a, [-0.6, -0.8, -0.0]).is_finite());
    }

    #[test]
    fn intensity_examples() {
        let m = intensity_error(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.eta, m.e_int), (1.0, 0.0));
        let m = intensity_error(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert_eq!((m.eta, m.e_int), (2.0, 0.0));
        let m = intensity_error(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!((m.eta - 1.5).abs() < 1e-15);
        assert!((m.e_int - 0.375).abs() < 1e-15);
        assert!(intensity_error(&[], &[]).is_err());
        assert!(intensity_error(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn woodham_identity_system_is_exact() {
        let mask = Mask::filled(1, 1, true);
        let n = [0.48, -0.6, 0.64];
        let rho = 0.7;
        let images: Vec<Grid<f64>> = (0..3).map(|k| Grid::filled(1, 1, rho * n[k])).collect();
        let lights = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let (nm, al) = woodham_ls(&images, &lights, &[1.0; 3], &mask).unwrap();
        for k in 0..3 {
            assert!((nm.get(0, 0)[k] - n[k]).abs() < 1e-12);
        }
        assert!((al.get(0, 0) - rho).abs() < 1e-12);
    }

    #[test]
    fn woodham_rejects_coplanar_lights() {
        let mask = Mask::filled(1, 1, true);
        let images: Vec<Grid<f64>> = (0..3).map(|_| Grid::filled(1, 1, 0.5)).collect();
        let lights = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.8, 0.0]];
        assert!(woodham_ls(&images, &lights, &[1.0; 3], &mask).is_err());
    }

    #[test]
    fn woodham_drops_attached_shadow_observations() {
        // With the zero kept, the fit would be pulled away from the true normal.
        let mask = Mask::filled(1, 1, true);
        let n: [f64; 3] = [0.0, 0.6, 0.8];
        let lights = [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, 0.6, 0.8], [0.0, -0.8, 0.6]];
        let images: Vec<Grid<f64>> = lights
            .iter()
            .map(|l| Grid::filled(1, 1, (n[0] * l[0] + n[1] * l[1] + n[2] * l[2]).max(0.0)))
            .collect();
        assert_eq!(*images[3].get(0, 0), 0.0);
        let (nm, _) = woodham_ls(&images, &lights, &[1.0; 4], &mask).unwrap();
        assert!(angle_deg(*nm.get(0, 0), n) < 1e-9);
    }

    #[test]
    fn woodham_recovers_a_lambertian_sphere() {
        let scene = make_sphere_scene(&SphereConfig::lambertian(64, 20, 7)).unwrap();
        let lights = scene.lights.clone().unwrap();
        let e = scene.intensities.clone().unwrap();
        let (n, _) = woodham_ls(&scene.images, &lights, &e, &scene.mask).unwrap();
        let mae = normal_mae(&n, scene.normals.as_ref().unwrap(), &scene.mask).unwrap();
        assert!(mae < 0.5, "{mae}");
    }

    #[test]
    fn woodham_on_gbr_data_recovers_pseudo_normals() {
        let scene = make_sphere_scene(&SphereConfig::lambertian(32, 12, 4)).unwrap();
        let gt = scene.normals.clone().unwrap();
        let albedo = Grid::filled(32, 32, 1.0);
        let g = GbrTransform::bas_relief(0.3, -0.2, 1.4, vec![1.0; 12]).unwrap();
        let pseudo = apply_gbr(
            &scene.mask,
            &gt,
            &albedo,
            scene.lights.as_ref().unwrap(),
            scene.intensities.as_ref().unwrap(),
            &g,
        )
        .unwrap();
        let images = pseudo.render(&scene.mask);
        let (n, _) = woodham_ls(&images, &pseudo.lights, &pseudo.intensities, &scene.mask).unwrap();
        assert!(normal_mae(&n, &pseudo.normals, &scene.mask).unwrap() < 0.5);
        assert!(normal_mae(&n, &gt, &scene.mask).unwrap() > 5.0);
    }

    fn toy_features(values: &[[f64; 2]]) -> Vec<Array> {
        values
            .iter()
            .map(|v| Array::new(&[1, 1, 2], v.to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn correlation_toy_table() {
        // Pairs (0,1), (0,2), (1,2).
        let feats = toy_features(&[[0.0, 1.0], [3.0, 1.0], [4.0, 3.0]]);
        let lights = [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, 0.6, 0.8]];
        let e = [1.0, 2.0, 4.0];
        let t = feature_light_correlation(&feats, &lights, &e).unwrap();
        let v0 = [3.0, 4.0, 1.0];
        let v1 = [0.0, 2.0, 2.0];
        let vd = [0.2, 0.2, 0.36];
        let vi = [1.0, 3.0, 2.0];
        let cos = |a: &[f64; 3], b: &[f64; 3]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let n = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            d / (n(a) * n(b))
        };
        assert!((t.rows[0].direction - cos(&v0, &vd)).abs() < 1e-12);
        assert!((t.rows[0].intensity - cos(&v0, &vi)).abs() < 1e-12);
        assert!((t.rows[1].direction - cos(&v1, &vd)).abs() < 1e-12);
        assert!((t.rows[1].intensity - cos(&v1, &vi)).abs() < 1e-12);
        assert_eq!(t.max_intensity, t.rows[0].intensity.max(t.rows[1].intensity));
        assert!(!t.rows[0].degenerate);
    }

    #[test]
    fn identical_features_are_flagged() {
        let feats = toy_features(&[[1.0, 2.0]; 3]);
        let lights = [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, 0.6, 0.8]];
        let t = feature_light_correlation(&feats, &lights, &[1.0, 2.0, 3.0]).unwrap();
        assert!(t.rows.iter().all(|r| r.degenerate && r.direction == 0.0 && r.intensity == 0.0));
        assert!(feature_light_correlation(&feats[..1], &lights[..1], &[1.0]).is_err());
    }

    #[test]
    fn brdf_sphere_examples() {
        let lambert = SurfaceIntrinsics {
            normal: [0.0, 0.0, 1.0],
            albedo: 0.8,
            diffuse: 1.0,
        };
        let img = brdf_sphere(&lambert, |p| Ok(vec![5.0; p.len()]), 33).unwrap();
        for &(c, r) in &[(16, 16), (20, 10), (5, 18)] {
            let x = 2.0 * (c as f64 + 0.5) / 33.0 - 1.0;
            let y = 1.0 - 2.0 * (r as f64 + 0.5) / 33.0;
            let nz = (1.0 - x * x - y * y).sqrt();
            assert!((img.get(c, r) - nz).abs() < 1e-12);
        }
        assert_eq!(*img.get(0, 0), 0.0);

        let glossy = SurfaceIntrinsics {
            diffuse: 0.0,
            ..lambert
        };
        let img = brdf_sphere(&glossy, |p| Ok(p.iter().map(|x| x[1].powi(200)).collect()), 31).unwrap();
        let best = (0..31 * 31).max_by(|&a, &b| img.data()[a].total_cmp(&img.data()[b])).unwrap();
        assert_eq!((best % 31, best / 31), (15, 15));
        assert!(img.get(15, 15) > &(10.0 * img.get(15, 5)));

        let one = brdf_sphere(&lambert, |p| Ok(vec![0.0; p.len()]), 1).unwrap();
        assert_eq!(one.data(), &[1.0]);
    }

    #[test]
    fn brdf_sphere_rejects_points_outside_the_mask() {
        let fields = FieldParameters::new(&crate::fields::FieldConfig::tiny(), 0).unwrap();
        let mut mask = Mask::filled(8, 8, false);
        *mask.get_mut(3, 3) = true;
        assert!(brdf_sphere_at(&fields, &mask, (0, 0), 8).is_err());
        let img = brdf_sphere_at(&fields, &mask, (3, 3), 8).unwrap();
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    fn grid_search_eta(e: &[f64], t: &[f64], eta0: f64) -> f64 {
        // Refining 1-D grid around a bracket of the minimizer of Σ(η·e − t)².
        let cost = |eta: f64| e.iter().zip(t).map(|(a, b)| (eta * a - b).powi(2)).sum::<f64>();
        let (mut lo, mut hi) = (eta0 * 0.5, eta0 * 2.0);
        for _ in 0..60 {
            let step = (hi - lo) / 100.0;
            let best = (0..=100)
                .map(|k| lo + step * k as f64)
                .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
                .unwrap();
            lo = best - step;
            hi = best + step;
        }
        0.5 * (lo + hi)
    }

    proptest! {
        #[test]
        fn e_int_ignores_estimate_scale(e in proptest::collection::vec(0.1f64..3.0, 2..12),
                                        kappa in 0.01f64..100.0, seed in 0u64..1000) {
            let t: Vec<f64> = e.iter().enumerate().map(|(i, v)| v * (1.0 + 0.1 * ((i as f64 + seed as f64).sin()))).collect();
            let a = intensity_error(&e, &t).unwrap();
            let scaled: Vec<f64> = e.iter().map(|v| v * kappa).collect();
            let b = intensity_error(&scaled, &t).unwrap();
            prop_assert!((a.e_int - b.e_int).abs() < 1e-9);
        }

        #[test]
        fn eta_matches_grid_search(e in proptest::collection::vec(0.1f64..3.0, 2..10),
                                   t in proptest::collection::vec(0.1f64..3.0, 10)) {
            let t = &t[..e.len()];
            let m = intensity_error(&e, t).unwrap();
            let g = grid_search_eta(&e, t, m.eta);
            prop_assert!((m.eta - g).abs() < 1e-6);
        }

        #[test]
        fn normal_mae_is_symmetric_and_bounded(a in proptest::collection::vec(-1.0f64..1.0, 12),
                                               b in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let unit = |v: &[f64]| {
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
                [v[0] / n, v[1] / n, v[2] / n]
            };
            let na = NormalMap::from_vec(2, 2, a.chunks(3).map(unit).collect()).unwrap();
            let nb = NormalMap::from_vec(2, 2, b.chunks(3).map(unit).collect()).unwrap();
            let mask = Mask::filled(2, 2, true);
            let ab = normal_mae(&na, &nb, &mask).unwrap();
            prop_assert!((ab - normal_mae(&nb, &na, &mask).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=180.0).contains(&ab));
            prop_assert!(normal_mae(&na, &na, &mask).unwrap() < 1e-5);
        }
    }
}
