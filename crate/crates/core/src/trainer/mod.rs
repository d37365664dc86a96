//! Warm-up and main training, the azimuth initializer and geometry refresh.

mod adam;
mod azimuth;

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use azimuth::{angle_gap_deg, azimuth_vectors, format_azimuths, rank3_azimuth, read_azimuths, AzimuthSource, RANK_TOLERANCE};

use crate::array::Array;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::fields::{encoder_input, pixel_codes, render_batch, FieldConfig, FieldParameters, PathCuts};
use crate::geometry::{fit_silhouette_normals, integrate_normals, pseudo_shadow, raymarch_shadow, SilhouetteNormals};
use crate::grid::{DepthMap, Grid, Mask, NormalMap, ShadowMap};
use crate::losses::{
    az_loss, gp_loss, rec_loss, recshadow_loss, shadow_loss, si_loss, LossReport, LossTerm, LossWeights, Objective,
};
use crate::scene::Observations;

/// Frequency levels used when only a handful of images is available.
pub const SPARSE_LEVELS: usize = 6;

/// Smallest `l_z` used when ray-marching an estimated light.
pub const MIN_SHADOW_LZ: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub cut_specular_to_light: bool,
    pub cut_shadow_to_light: bool,
    pub skip_azimuth_init: bool,
    pub skip_gp: bool,
}

impl Ablation {
    pub fn cuts(&self) -> PathCuts {
        PathCuts {
            specular_to_light: self.cut_specular_to_light,
            shadow_to_light: self.cut_shadow_to_light,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowRefresh {
    #[default]
    PerEpoch,
    PerBatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub lr: f64,
    /// Trailing epochs run at `finetune_lr`.
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub light_batch: usize,
    pub pixel_batch: usize,
    pub shadow_refresh: ShadowRefresh,
    /// Epochs a ray-marched shadow set may age before training stops.
    pub max_shadow_age: usize,
    /// Drops the azimuth term and raises the code levels to [`SPARSE_LEVELS`].
    pub sparse: bool,
    pub ablation: Ablation,
    pub weights: LossWeights,
    /// `(v·h, n·h)` samples per gradient-penalty evaluation.
    pub gp_samples: usize,
    pub fields: FieldConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            warmup_epochs: 10,
            total_epochs: 500,
            lr: 5e-4,
            finetune_epochs: 100,
            finetune_lr: 5e-5,
            light_batch: 32,
            pixel_batch: 256,
            shadow_refresh: ShadowRefresh::PerEpoch,
            max_shadow_age: 5,
            sparse: false,
            ablation: Ablation::default(),
            weights: LossWeights::default(),
            gp_samples: 256,
            fields: FieldConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// 200 epochs over 32-pixel batches; the last 50 run at the reduced rate.
    pub fn desk() -> Self {
        TrainConfig {
            total_epochs: 200,
            finetune_epochs: 50,
            pixel_batch: 32,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs > self.total_epochs {
            return Err(Error::invalid("warm-up is longer than training"));
        }
        if self.finetune_epochs > self.total_epochs {
            return Err(Error::invalid("fine-tuning is longer than training"));
        }
        if self.total_epochs == 0 || self.light_batch == 0 || self.pixel_batch == 0 {
            return Err(Error::invalid("epochs and batch sizes must be at least 1"));
        }
        if !(self.lr > 0.0 && self.finetune_lr > 0.0 && self.lr.is_finite() && self.finetune_lr.is_finite()) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if self.max_shadow_age == 0 {
            return Err(Error::invalid("max_shadow_age must be at least 1"));
        }
        self.weights.validate()
    }

    /// Field architecture with sparse mode applied.
    pub fn field_config(&self) -> FieldConfig {
        let mut cfg = self.fields.clone();
        if self.sparse {
            cfg.levels = SPARSE_LEVELS;
        }
        cfg
    }

    pub fn uses_azimuth(&self) -> bool {
        !self.sparse && !self.ablation.skip_azimuth_init
    }

    pub fn is_warmup(&self, epoch: usize) -> bool {
        epoch < self.warmup_epochs
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch + self.finetune_epochs >= self.total_epochs {
            self.finetune_lr
        } else {
            self.lr
        }
    }

    pub fn objective(&self, epoch: usize) -> Objective {
        if self.is_warmup(epoch) {
            Objective::warmup(self.uses_azimuth(), !self.ablation.skip_gp)
        } else {
            Objective::main()
        }
    }

    /// Stable FNV-1a hash of every hyperparameter and the seed.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Ray-marched shadow targets and the epoch they were rendered after.
#[derive(Clone, Debug, PartialEq)]
struct RenderedShadows {
    /// `[P, f]`, 1 for lit.
    maps: Array,
    epoch: usize,
}

/// Pixels and the light chunk of one optimization step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub pixels: Vec<usize>,
    pub chunk: usize,
}

/// Loss values and parameter adjoints of one batch.
#[derive(Clone, Debug)]
pub struct BatchResult {
    pub terms: Vec<(LossTerm, f64)>,
    pub total: f64,
    pub gradients: Vec<Array>,
}

/// Everything training produces.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub fields: FieldParameters,
    pub normals: NormalMap,
    pub albedo: Grid<f64>,
    pub diffuse: Grid<f64>,
    pub lights: Vec<[f64; 3]>,
    pub intensities: Vec<f64>,
    pub depth: Option<DepthMap>,
    pub history: Vec<LossReport>,
    /// Factor the images were divided by before training.
    pub image_scale: f64,
}

/// Current field estimates over the whole mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimates {
    pub normals: NormalMap,
    pub albedo: Grid<f64>,
    pub diffuse: Grid<f64>,
    pub lights: Vec<[f64; 3]>,
    pub intensities: Vec<f64>,
}

/// Integrated depth and one ray-marched shadow map per light.
pub fn refresh_geometry(normals: &NormalMap, mask: &Mask, lights: &[[f64; 3]]) -> Result<(DepthMap, Vec<ShadowMap>)> {
    let depth = integrate_normals(normals, mask)?;
    let maps = lights
        .iter()
        .map(|&l| raymarch_shadow(&depth, mask, above_horizon(l)))
        .collect::<Result<Vec<_>>>()?;
    Ok((depth, maps))
}

fn above_horizon(l: [f64; 3]) -> [f64; 3] {
    let xy = l[0].hypot(l[1]);
    if l[2] >= MIN_SHADOW_LZ || xy == 0.0 {
        return if xy == 0.0 { [0.0, 0.0, 1.0] } else { l };
    }
    let z = MIN_SHADOW_LZ;
    let scale = (1.0 - z * z).sqrt() / xy;
    [l[0] * scale, l[1] * scale, z]
}

/// Trains on `obs` from scratch.
pub fn train_scene(
    obs: &Observations,
    config: &TrainConfig,
    azimuths: &AzimuthSource,
    hook: impl FnMut(&LossReport, &Trainer) -> Result<()>,
) -> Result<TrainedModel> {
    let mut trainer = Trainer::new(obs, config, azimuths)?;
    trainer.run(hook)?;
    trainer.into_model()
}

/// Training state. Holds only observations, never ground truth.
pub struct Trainer {
    config: TrainConfig,
    mask: Mask,
    pixels: Vec<(usize, usize)>,
    codes: Array,
    /// `[P, f]` normalized observations.
    observed: Array,
    image_scale: f64,
    chunks: Vec<Vec<usize>>,
    chunk_inputs: Vec<Array>,
    /// Contour slot of each pixel, if it lies on the silhouette.
    contour_slot: Vec<Option<usize>>,
    silhouette: SilhouetteNormals,
    pseudo: Array,
    azimuth: Option<Vec<[f64; 2]>>,
    fields: FieldParameters,
    adam: Adam,
    rng: ChaCha8Rng,
    shadows: Option<RenderedShadows>,
    depth: Option<DepthMap>,
    history: Vec<LossReport>,
    epoch: usize,
}

fn gather_columns(a: &Array, rows: &[usize], cols: &[usize]) -> Result<Array> {
    let (_, width) = a.dims2()?;
    let data = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| a.data()[r * width + c]))
        .collect();
    Array::matrix(rows.len(), cols.len(), data)
}

impl Trainer {
    pub fn new(obs: &Observations, config: &TrainConfig, azimuths: &AzimuthSource) -> Result<Self> {
        config.validate()?;
        let f = obs.light_count();
        let field_config = config.field_config();
        let mask = obs.mask.clone();
        let image_scale = obs
            .images
            .iter()
            .flat_map(|img| img.data().iter().zip(mask.data()).filter(|(_, m)| **m).map(|(v, _)| *v))
            .fold(0.0, f64::max);
        if !(image_scale > 0.0) {
            return Err(Error::Degenerate("all masked observations are zero".into()));
        }
        let images: Vec<Grid<f64>> = obs.images.iter().map(|img| img.map(|v| v / image_scale)).collect();

        let (pixels, codes) = pixel_codes(&mask, field_config.levels);
        let p = pixels.len();
        let observed = Array::matrix(
            p,
            f,
            pixels
                .iter()
                .flat_map(|&(c, r)| images.iter().map(move |img| *img.get(c, r)))
                .collect(),
        )?;

        let silhouette = fit_silhouette_normals(&mask)?;
        let index = Grid::from_fn(mask.width(), mask.height(), |c, r| {
            pixels.binary_search_by(|&(pc, pr)| (pr, pc).cmp(&(r, c))).ok()
        });
        let mut contour_slot = vec![None; p];
        for (slot, &(c, r)) in silhouette.points.iter().enumerate() {
            if let Some(k) = *index.get(c, r) {
                contour_slot[k] = Some(slot);
            }
        }

        let pseudo_maps = pseudo_shadow(&images, &mask)?;
        let pseudo = Array::matrix(
            p,
            f,
            pixels
                .iter()
                .flat_map(|&(c, r)| pseudo_maps.iter().map(move |m| if *m.get(c, r) { 1.0 } else { 0.0 }))
                .collect(),
        )?;

        let azimuth = if config.uses_azimuth() {
            Some(azimuth_vectors(&azimuths.resolve(&images, &mask, &silhouette)?))
        } else {
            None
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..f).collect();
        if f > config.light_batch {
            order.shuffle(&mut rng);
        }
        let chunks: Vec<Vec<usize>> = order.chunks(config.light_batch).map(<[usize]>::to_vec).collect();
        let full_input = encoder_input(&images, field_config.encoder_resolution)?;
        let side = field_config.encoder_resolution * field_config.encoder_resolution;
        let chunk_inputs = chunks
            .iter()
            .map(|chunk| {
                let data = chunk
                    .iter()
                    .flat_map(|&j| full_input.data()[j * side..(j + 1) * side].iter().copied())
                    .collect();
                let res = field_config.encoder_resolution;
                Array::new(&[chunk.len(), res, res, 1], data)
            })
            .collect::<Result<Vec<_>>>()?;

        let fields = FieldParameters::new(&field_config, config.seed)?;
        let adam = Adam::new(fields.store.values());
        Ok(Trainer {
            config: config.clone(),
            mask,
            pixels,
            codes,
            observed,
            image_scale,
            chunks,
            chunk_inputs,
            contour_slot,
            silhouette,
            pseudo,
            azimuth,
            fields,
            adam,
            rng,
            shadows: None,
            depth: None,
            history: Vec::new(),
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn fields(&self) -> &FieldParameters {
        &self.fields
    }

    /// Replaces the parameters with same-layout ones and resets the optimizer.
    pub fn load_fields(&mut self, fields: FieldParameters) -> Result<()> {
        if fields.config != self.fields.config || fields.store.names() != self.fields.store.names() {
            return Err(Error::invalid("parameters have a different architecture"));
        }
        let same = fields
            .store
            .values()
            .iter()
            .zip(self.fields.store.values())
            .all(|(a, b)| a.shape() == b.shape());
        if !same {
            return Err(Error::invalid("parameter shapes differ"));
        }
        self.adam = Adam::new(fields.store.values());
        self.fields = fields;
        Ok(())
    }

    pub fn history(&self) -> &[LossReport] {
        &self.history
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn light_chunks(&self) -> &[Vec<usize>] {
        &self.chunks
    }

    pub fn image_scale(&self) -> f64 {
        self.image_scale
    }

    /// Unit azimuth vectors used by the warm-up, if any.
    pub fn azimuth_targets(&self) -> Option<&[[f64; 2]]> {
        self.azimuth.as_deref()
    }

    /// Uniform `(v·h, n·h)` points for the gradient penalty.
    pub fn sample_gp_points(&mut self) -> Result<Array> {
        let n = self.config.gp_samples.max(1);
        let data = (0..2 * n).map(|_| self.rng.random_range(0.0..1.0)).collect();
        Array::matrix(n, 2, data)
    }

    /// Losses and parameter gradients of one batch under the objective of `epoch`.
    pub fn batch_gradients(&self, batch: &Batch, epoch: usize, gp_points: Option<&Array>) -> Result<BatchResult> {
        if batch.pixels.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let lights = self
            .chunks
            .get(batch.chunk)
            .ok_or_else(|| Error::invalid(format!("no light chunk {}", batch.chunk)))?;
        let objective = self.config.objective(epoch);
        let mut tape = Tape::new();
        let bound = self.fields.store.bind(&mut tape)?;
        let input = tape.leaf(self.chunk_inputs[batch.chunk].clone())?;
        let light = self.fields.light.forward(&mut tape, &bound, input)?;
        let all: Vec<usize> = (0..self.codes.shape()[1]).collect();
        let code = tape.leaf(gather_columns(&self.codes, &batch.pixels, &all)?)?;
        let out = render_batch(&mut tape, &self.fields, &bound, code, &light, self.config.ablation.cuts())?;

        let mut terms = Vec::new();
        let observed = tape.leaf(gather_columns(&self.observed, &batch.pixels, lights)?)?;
        terms.push((LossTerm::Rec, rec_loss(&mut tape, observed, out.rendered)?));

        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (i, &k) in batch.pixels.iter().enumerate() {
            if let Some(slot) = self.contour_slot[k] {
                rows.push(i);
                targets.push(self.silhouette.normals[slot]);
            }
        }
        let si = if rows.is_empty() {
            None
        } else {
            let normals = tape.gather_rows(out.normal, Rc::new(rows))?;
            si_loss(&mut tape, normals, &targets)?.0
        };
        let si = match si {
            Some(v) => v,
            None => tape.leaf(Array::scalar(0.0))?,
        };
        terms.push((LossTerm::Si, si));

        for &term in &objective.terms {
            match term {
                LossTerm::Az => {
                    let az = self.azimuth.as_ref().ok_or_else(|| Error::invalid("no azimuth targets"))?;
                    let t: Vec<[f64; 2]> = lights.iter().map(|&j| az[j]).collect();
                    terms.push((term, az_loss(&mut tape, light.direction, &t)?));
                }
                LossTerm::Gp => {
                    let points = gp_points.ok_or_else(|| Error::invalid("gradient penalty needs sample points"))?;
                    let x = tape.leaf(points.clone())?;
                    let (_, slope) = self.fields.specular.forward_with_slope(&mut tape, &bound, x)?;
                    terms.push((term, gp_loss(&mut tape, slope)?));
                }
                LossTerm::Shadow => {
                    let target = tape.leaf(gather_columns(&self.pseudo, &batch.pixels, lights)?)?;
                    terms.push((term, shadow_loss(&mut tape, out.shadow, target)?));
                }
                LossTerm::RecShadow => {
                    let shadows = self
                        .shadows
                        .as_ref()
                        .ok_or_else(|| Error::invalid("main phase started without ray-marched shadows"))?;
                    let age = epoch.saturating_sub(shadows.epoch + 1);
                    if age >= self.config.max_shadow_age {
                        return Err(Error::invalid(format!(
                            "ray-marched shadows from epoch {} are {age} epochs stale",
                            shadows.epoch
                        )));
                    }
                    let target = tape.leaf(gather_columns(&shadows.maps, &batch.pixels, lights)?)?;
                    terms.push((term, recshadow_loss(&mut tape, out.shadow, target)?));
                }
                LossTerm::Rec | LossTerm::Si => {}
            }
        }

        let total = objective.total_on_tape(&mut tape, &terms, &self.config.weights)?;
        let values: Vec<(LossTerm, f64)> = terms.iter().map(|&(t, v)| (t, tape.value(v).item())).collect();
        let total_value = tape.value(total).item();
        if !total_value.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("non-finite loss; terms {values:?}"),
            });
        }
        let grads = tape.backward(total)?;
        Ok(BatchResult {
            terms: values,
            total: total_value,
            gradients: bound.gradients(&grads),
        })
    }

    /// Runs one epoch and returns its report.
    pub fn run_epoch(&mut self) -> Result<LossReport> {
        let epoch = self.epoch;
        if epoch >= self.config.total_epochs {
            return Err(Error::invalid("training already finished"));
        }
        let warmup = self.config.is_warmup(epoch);
        let objective = self.config.objective(epoch);
        let lr = self.config.learning_rate(epoch);
        let mut order: Vec<usize> = (0..self.pixels.len()).collect();
        order.shuffle(&mut self.rng);
        let mut sums = vec![0.0; LossTerm::ALL.len()];
        let mut counts = vec![0usize; LossTerm::ALL.len()];
        let batches: Vec<Vec<usize>> = order.chunks(self.config.pixel_batch).map(<[usize]>::to_vec).collect();
        for (k, pixels) in batches.into_iter().enumerate() {
            let has_contour = pixels.iter().any(|&p| self.contour_slot[p].is_some());
            let batch = Batch {
                pixels,
                chunk: k % self.chunks.len(),
            };
            let gp = if objective.terms.contains(&LossTerm::Gp) {
                Some(self.sample_gp_points()?)
            } else {
                None
            };
            let result = self.batch_gradients(&batch, epoch, gp.as_ref())?;
            if result.gradients.iter().any(|g| !g.all_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    reason: format!("non-finite gradient; terms {:?}", result.terms),
                });
            }
            self.adam.step(self.fields.store.values_mut(), &result.gradients, lr)?;
            for (term, value) in result.terms {
                if term == LossTerm::Si && !has_contour {
                    continue;
                }
                let slot = LossTerm::ALL.iter().position(|t| *t == term).expect("known term");
                sums[slot] += value;
                counts[slot] += 1;
            }
            if self.config.shadow_refresh == ShadowRefresh::PerBatch {
                self.refresh(epoch)?;
            }
        }
        if self.config.shadow_refresh == ShadowRefresh::PerEpoch {
            self.refresh(epoch)?;
        }
        let terms = objective
            .terms
            .iter()
            .map(|&t| {
                let slot = LossTerm::ALL.iter().position(|x| *x == t).expect("known term");
                (t, if counts[slot] > 0 { sums[slot] / counts[slot] as f64 } else { 0.0 })
            })
            .collect();
        let report = LossReport::new(epoch, warmup, terms, &self.config.weights);
        if !report.total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("non-finite epoch loss; terms {:?}", report.terms),
            });
        }
        self.history.push(report.clone());
        self.epoch += 1;
        Ok(report)
    }

    /// Runs the remaining epochs, calling `hook` after each.
    pub fn run(&mut self, mut hook: impl FnMut(&LossReport, &Trainer) -> Result<()>) -> Result<()> {
        while self.epoch < self.config.total_epochs {
            let report = self.run_epoch()?;
            hook(&report, self)?;
        }
        Ok(())
    }

    /// Field estimates at every masked pixel and for every image.
    pub fn estimates(&self) -> Result<Estimates> {
        let intr = self.fields.evaluate_position(&self.codes)?;
        let (w, h) = (self.mask.width(), self.mask.height());
        let mut normals = NormalMap::filled(w, h, [0.0, 0.0, 1.0]);
        let mut albedo = Grid::filled(w, h, 0.0);
        let mut diffuse = Grid::filled(w, h, 0.0);
        for (&(c, r), s) in self.pixels.iter().zip(&intr) {
            *normals.get_mut(c, r) = s.normal;
            *albedo.get_mut(c, r) = s.albedo;
            *diffuse.get_mut(c, r) = s.diffuse;
        }
        let f: usize = self.chunks.iter().map(Vec::len).sum();
        let mut lights = vec![[0.0; 3]; f];
        let mut intensities = vec![0.0; f];
        for (chunk, input) in self.chunks.iter().zip(&self.chunk_inputs) {
            let (l, e) = self.fields.evaluate_lights(input)?;
            for (k, &j) in chunk.iter().enumerate() {
                lights[j] = l[k];
                intensities[j] = e[k];
            }
        }
        Ok(Estimates {
            normals,
            albedo,
            diffuse,
            lights,
            intensities,
        })
    }

    /// Re-integrates depth and re-renders shadow targets; keeps the previous
    /// ones if integration fails.
    fn refresh(&mut self, epoch: usize) -> Result<()> {
        let est = self.estimates()?;
        match refresh_geometry(&est.normals, &self.mask, &est.lights) {
            Ok((depth, maps)) => {
                let p = self.pixels.len();
                let f = maps.len();
                let data = self
                    .pixels
                    .iter()
                    .flat_map(|&(c, r)| maps.iter().map(move |m| if *m.get(c, r) { 1.0 } else { 0.0 }))
                    .collect();
                self.shadows = Some(RenderedShadows {
                    maps: Array::matrix(p, f, data)?,
                    epoch,
                });
                self.depth = Some(depth);
                Ok(())
            }
            Err(e) if e.is_numeric() => {
                log::warn!("epoch {epoch}: geometry refresh failed, keeping previous shadows: {e}");
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// The model as it stands after the last completed epoch.
    pub fn snapshot(&self) -> Result<TrainedModel> {
        let est = self.estimates()?;
        Ok(TrainedModel {
            config: self.config.clone(),
            fields: self.fields.clone(),
            normals: est.normals,
            albedo: est.albedo,
            diffuse: est.diffuse,
            lights: est.lights,
            intensities: est.intensities,
            depth: self.depth.clone(),
            history: self.history.clone(),
            image_scale: self.image_scale,
        })
    }

    pub fn into_model(self) -> Result<TrainedModel> {
        let est = self.estimates()?;
        Ok(TrainedModel {
            config: self.config,
            fields: self.fields,
            normals: est.normals,
            albedo: est.albedo,
            diffuse: est.diffuse,
            lights: est.lights,
            intensities: est.intensities,
            depth: self.depth,
            history: self.history,
            image_scale: self.image_scale,
        })
    }
}
