use std::rc::Rc;

use super::{FieldParameters, LightOut};
use crate::array::Array;
use crate::autodiff::{Tape, Var};
use crate::encoding::{code_len, encode_rows, half_vector, normalized_pixel, VIEW};
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};

use super::params::Bound;

/// Light-independent surface factors at one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceIntrinsics {
    pub normal: [f64; 3],
    pub albedo: f64,
    pub diffuse: f64,
}

impl SurfaceIntrinsics {
    pub fn specular_weight(&self) -> f64 {
        1.0 - self.diffuse
    }
}

/// One directional light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightState {
    pub direction: [f64; 3],
    pub intensity: f64,
    pub half: [f64; 3],
}

impl LightState {
    pub fn new(direction: [f64; 3], intensity: f64) -> Result<Self> {
        if !(intensity > 0.0) {
            return Err(Error::invalid("light intensity must be positive"));
        }
        Ok(LightState {
            direction,
            intensity,
            half: half_vector(direction)?,
        })
    }
}

/// `e · s · (k_d·ρ_d + k_s·ρ_s) · max(n·l, 0)`.
pub fn render_pixel(intr: &SurfaceIntrinsics, light: &LightState, specular: f64, lit: f64) -> f64 {
    let n = intr.normal;
    let l = light.direction;
    let ndl = (n[0] * l[0] + n[1] * l[1] + n[2] * l[2]).max(0.0);
    light.intensity
        * lit
        * (intr.diffuse * intr.albedo + intr.specular_weight() * specular)
        * ndl
}

/// Gradient paths from the light estimate that an ablation can cut.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PathCuts {
    pub specular_to_light: bool,
    pub shadow_to_light: bool,
}

/// A leaf copy of `x`: same value, no gradient back to `x`.
pub fn detach(tape: &mut Tape, x: Var) -> Result<Var> {
    let value = tape.value(x).clone();
    tape.leaf(value)
}

/// Masked pixels in raster order and their positional codes, `[P, 4L]`.
pub fn pixel_codes(mask: &Mask, levels: usize) -> (Vec<(usize, usize)>, Array) {
    let pixels = mask.pixels();
    let coords: Vec<f64> = pixels
        .iter()
        .flat_map(|&(c, r)| normalized_pixel(c, r, mask.width(), mask.height()))
        .collect();
    let codes = encode_rows(&coords, 2, levels);
    let array = Array::new(&[pixels.len(), code_len(2, levels)], codes).expect("code length");
    (pixels, array)
}

/// Box-resampled `[f, S, S, 1]` encoder input. All-zero images are rejected.
pub fn encoder_input(images: &[Grid<f64>], side: usize) -> Result<Array> {
    let mut data = Vec::with_capacity(images.len() * side * side);
    for (j, img) in images.iter().enumerate() {
        if img.data().iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(format!("image {j} is all zero")));
        }
        let (w, h) = (img.width(), img.height());
        for i in 0..side {
            let r0 = i * h / side;
            let r1 = ((i + 1) * h / side).max(r0 + 1).min(h);
            for k in 0..side {
                let c0 = k * w / side;
                let c1 = ((k + 1) * w / side).max(c0 + 1).min(w);
                let mut acc = 0.0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        acc += img.get(c, r);
                    }
                }
                data.push(acc / ((r1 - r0) * (c1 - c0)) as f64);
            }
        }
    }
    Array::new(&[images.len(), side, side, 1], data)
}

/// Tape values of one rendered batch of `B` pixels under `f` lights.
#[derive(Clone, Copy, Debug)]
pub struct BatchRender {
    /// `[B, f]`.
    pub rendered: Var,
    /// `[B, f]`, binary.
    pub shadow: Var,
    /// `[B, f]`.
    pub specular: Var,
    /// `[B, 3]`.
    pub normal: Var,
    pub albedo: Var,
    pub diffuse: Var,
}

/// Renders `code` (`[B, 4L]`) under the lights in `light`.
pub fn render_batch(
    tape: &mut Tape,
    fields: &FieldParameters,
    bound: &Bound,
    code: Var,
    light: &LightOut,
    cuts: PathCuts,
) -> Result<BatchRender> {
    let b = tape.shape(code)[0];
    let f = tape.shape(light.direction)[0];
    let pos = fields.position.forward(tape, bound, code)?;

    let l_t = tape.transpose(light.direction)?;
    let ndl_raw = tape.matmul(pos.normal, l_t)?;
    let ndl = tape.clamp_min_zero(ndl_raw)?;

    let spec_light = if cuts.specular_to_light {
        detach(tape, light.direction)?
    } else {
        light.direction
    };
    let view = tape.leaf(Array::matrix(1, 3, VIEW.to_vec())?)?;
    let bisector = tape.add(spec_light, view)?;
    let half = tape.l2_normalize(bisector)?;
    let half_t = tape.transpose(half)?;
    let ndh = tape.matmul(pos.normal, half_t)?;
    let vdh_row = tape.gather_rows(half_t, Rc::new(vec![2]))?;
    let zeros = tape.leaf(Array::zeros(&[b, f]))?;
    let vdh = tape.add(zeros, vdh_row)?;
    let ndh_col = tape.reshape(ndh, &[b * f, 1])?;
    let vdh_col = tape.reshape(vdh, &[b * f, 1])?;
    let spec_in = tape.concat(&[vdh_col, ndh_col])?;
    let specular = fields.specular.forward(tape, bound, spec_in)?;
    let specular = tape.reshape(specular, &[b, f])?;

    let shadow_light = if cuts.shadow_to_light {
        detach(tape, light.direction)?
    } else {
        light.direction
    };
    let shadow = fields.shadow.forward(tape, bound, code, shadow_light)?;

    let diffuse_term = tape.mul(pos.diffuse, pos.albedo)?;
    let neg = tape.neg(pos.diffuse)?;
    let spec_weight = tape.offset(neg, 1.0)?;
    let spec_term = tape.mul(spec_weight, specular)?;
    let brdf = tape.add(diffuse_term, spec_term)?;
    let e_row = tape.transpose(light.intensity)?;
    let lit = tape.mul(e_row, shadow.binary)?;
    let shaded = tape.mul(lit, brdf)?;
    let rendered = tape.mul(shaded, ndl)?;
    Ok(BatchRender {
        rendered,
        shadow: shadow.binary,
        specular,
        normal: pos.normal,
        albedo: pos.albedo,
        diffuse: pos.diffuse,
    })
}

/// Plain values of the fields over every masked pixel and every image.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldEval {
    pub intrinsics: Vec<SurfaceIntrinsics>,
    pub lights: Vec<[f64; 3]>,
    pub intensities: Vec<f64>,
}

/// Field renders of whole images.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRender {
    pub images: Vec<Grid<f64>>,
    /// `true` where the shadow field predicts the pixel is lit.
    pub shadows: Vec<Grid<bool>>,
}

const EVAL_CHUNK: usize = 512;

fn rows3(a: &Array) -> Vec<[f64; 3]> {
    a.data().chunks(3).map(|r| [r[0], r[1], r[2]]).collect()
}

impl FieldParameters {
    /// Surface intrinsics of every row of `codes`, evaluated in chunks.
    pub fn evaluate_position(&self, codes: &Array) -> Result<Vec<SurfaceIntrinsics>> {
        let (n, width) = codes.dims2()?;
        let mut out = Vec::with_capacity(n);
        for start in (0..n).step_by(EVAL_CHUNK) {
            let end = (start + EVAL_CHUNK).min(n);
            let chunk = Array::matrix(end - start, width, codes.data()[start * width..end * width].to_vec())?;
            let mut tape = Tape::new();
            let bound = self.store.bind(&mut tape)?;
            let x = tape.leaf(chunk)?;
            let pos = self.position.forward(&mut tape, &bound, x)?;
            let normals = rows3(tape.value(pos.normal));
            let albedo = tape.value(pos.albedo).data().to_vec();
            let diffuse = tape.value(pos.diffuse).data().to_vec();
            for k in 0..normals.len() {
                out.push(SurfaceIntrinsics {
                    normal: normals[k],
                    albedo: albedo[k],
                    diffuse: diffuse[k],
                });
            }
        }
        Ok(out)
    }

    /// Light direction and intensity for each image of an encoder input.
    pub fn evaluate_lights(&self, input: &Array) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape)?;
        let x = tape.leaf(input.clone())?;
        let out = self.light.forward(&mut tape, &bound, x)?;
        Ok((rows3(tape.value(out.direction)), tape.value(out.intensity).data().to_vec()))
    }

    /// Final encoder feature maps, one `[s, s, c]` array per image.
    pub fn encoder_features(&self, input: &Array) -> Result<Vec<Array>> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape)?;
        let x = tape.leaf(input.clone())?;
        let out = self.light.forward(&mut tape, &bound, x)?;
        let feats = tape.value(out.features);
        let f = feats.shape()[0];
        let per = feats.len() / f.max(1);
        feats
            .data()
            .chunks(per)
            .map(|c| Array::new(&feats.shape()[1..], c.to_vec()))
            .collect()
    }

    pub fn evaluate(&self, codes: &Array, input: &Array) -> Result<FieldEval> {
        let intrinsics = self.evaluate_position(codes)?;
        let (lights, intensities) = self.evaluate_lights(input)?;
        Ok(FieldEval {
            intrinsics,
            lights,
            intensities,
        })
    }

    /// Intrinsics at a single positional code.
    pub fn position_eval(&self, code: &[f64]) -> Result<SurfaceIntrinsics> {
        let codes = Array::matrix(1, code.len(), code.to_vec())?;
        Ok(self.evaluate_position(&codes)?[0])
    }

    /// Light state of one `S × S` encoder image.
    pub fn light_eval(&self, image: &Grid<f64>) -> Result<LightState> {
        let input = encoder_input(std::slice::from_ref(image), self.config.encoder_resolution)?;
        let (l, e) = self.evaluate_lights(&input)?;
        LightState::new(l[0], e[0])
    }

    /// `ρ_s(v·h, n·h)` at many points.
    pub fn specular_eval(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape)?;
        let flat = points.iter().flatten().copied().collect();
        let x = tape.leaf(Array::matrix(points.len(), 2, flat)?)?;
        let y = self.specular.forward(&mut tape, &bound, x)?;
        Ok(tape.value(y).data().to_vec())
    }

    /// Images and binary shadow maps of the masked pixels under the given
    /// lights. Pixels outside the mask are 0.
    pub fn render_images(&self, mask: &Mask, lights: &[[f64; 3]], intensities: &[f64]) -> Result<FieldRender> {
        if lights.len() != intensities.len() {
            return Err(Error::invalid("light and intensity counts differ"));
        }
        if lights.is_empty() {
            return Err(Error::invalid("no lights"));
        }
        let f = lights.len();
        let (w, h) = (mask.width(), mask.height());
        let (pixels, codes) = pixel_codes(mask, self.config.levels);
        let width = codes.shape()[1];
        let mut images = vec![Grid::filled(w, h, 0.0); f];
        let mut shadows = vec![Grid::filled(w, h, false); f];
        let chunk = (EVAL_CHUNK / f).max(1);
        for start in (0..pixels.len()).step_by(chunk) {
            let end = (start + chunk).min(pixels.len());
            let mut tape = Tape::new();
            let bound = self.store.bind(&mut tape)?;
            let code = tape.leaf(Array::matrix(
                end - start,
                width,
                codes.data()[start * width..end * width].to_vec(),
            )?)?;
            let direction = tape.leaf(Array::matrix(f, 3, lights.iter().flatten().copied().collect())?)?;
            let intensity = tape.leaf(Array::matrix(f, 1, intensities.to_vec())?)?;
            let light = LightOut {
                direction,
                intensity,
                features: intensity,
            };
            let out = render_batch(&mut tape, self, &bound, code, &light, PathCuts::default())?;
            let rendered = tape.value(out.rendered).data();
            let lit = tape.value(out.shadow).data();
            for (k, &(c, r)) in pixels[start..end].iter().enumerate() {
                for j in 0..f {
                    *images[j].get_mut(c, r) = rendered[k * f + j];
                    *shadows[j].get_mut(c, r) = lit[k * f + j] > 0.5;
                }
            }
        }
        Ok(FieldRender { images, shadows })
    }

    /// Binary shadow indicator and its pre-activation at one code and light.
    pub fn shadow_eval(&self, code: &[f64], light: [f64; 3]) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape)?;
        let c = tape.leaf(Array::matrix(1, code.len(), code.to_vec())?)?;
        let l = tape.leaf(Array::matrix(1, 3, light.to_vec())?)?;
        let out = self.shadow.forward(&mut tape, &bound, c, l)?;
        Ok((tape.value(out.binary).item(), tape.value(out.pre).item()))
    }
}
