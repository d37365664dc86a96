use rand::Rng;

use super::params::{Bound, Conv, Linear, Mlp, ParamStore};
use super::FieldConfig;
use crate::array::Array;
use crate::autodiff::{Tape, Var};
use crate::encoding::{binarize, code_len, encode_on_tape, encode_tangent_on_tape};
use crate::error::{Error, Result};

/// Coordinate MLP producing normal, diffuse albedo and diffuse weight.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionNet {
    pub before_skip: Vec<Linear>,
    pub after_skip: Vec<Linear>,
    pub head: Linear,
}

/// Tape outputs of [`PositionNet`] for a batch of `B` codes.
#[derive(Clone, Copy, Debug)]
pub struct PositionOut {
    /// `[B, 3]`, unit rows.
    pub normal: Var,
    /// `[B, 1]`, softplus.
    pub albedo: Var,
    /// `[B, 1]`, sigmoid; the specular weight is `1 − diffuse`.
    pub diffuse: Var,
}

impl PositionNet {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, cfg: &FieldConfig) -> Self {
        let code = code_len(2, cfg.levels);
        let w = cfg.position_width;
        let first = cfg.position_depth / 2;
        let before_skip = (0..first)
            .map(|k| Linear::new(store, rng, &format!("position.{k}"), if k == 0 { code } else { w }, w))
            .collect();
        let after_skip = (first..cfg.position_depth)
            .map(|k| {
                let input = if k == first { w + code } else { w };
                Linear::new(store, rng, &format!("position.{k}"), input, w)
            })
            .collect();
        let head = Linear::new(store, rng, "position.head", w, 5);
        store.get_mut(head.bias).data_mut()[2] += cfg.frontal_bias;
        PositionNet {
            before_skip,
            after_skip,
            head,
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, code: Var) -> Result<PositionOut> {
        let mut h = code;
        for layer in &self.before_skip {
            let z = layer.forward(tape, bound, h)?;
            h = tape.relu(z)?;
        }
        h = tape.concat(&[h, code])?;
        for layer in &self.after_skip {
            let z = layer.forward(tape, bound, h)?;
            h = tape.relu(z)?;
        }
        let out = self.head.forward(tape, bound, h)?;
        let raw_normal = tape.slice(out, 0, 3)?;
        let normal = tape.l2_normalize(raw_normal)?;
        let raw_albedo = tape.slice(out, 3, 4)?;
        let albedo = tape.softplus(raw_albedo)?;
        let raw_diffuse = tape.slice(out, 4, 5)?;
        let diffuse = tape.sigmoid(raw_diffuse)?;
        Ok(PositionOut {
            normal,
            albedo,
            diffuse,
        })
    }
}

/// Convolutional encoder with a direction branch and an intensity branch.
#[derive(Clone, Debug, PartialEq)]
pub struct LightNet {
    pub convs: Vec<Conv>,
    pub direction: Mlp,
    pub intensity: Mlp,
    pub feature_len: usize,
}

/// Tape outputs of [`LightNet`] for `f` images.
#[derive(Clone, Copy, Debug)]
pub struct LightOut {
    /// `[f, 3]`, unit rows with non-negative `z`.
    pub direction: Var,
    /// `[f, 1]`, softplus.
    pub intensity: Var,
    /// Final encoder activations, `[f, s, s, c]`.
    pub features: Var,
}

/// Side length after a valid 3×3 convolution with stride 2.
pub fn conv_out(size: usize) -> usize {
    if size < 3 {
        0
    } else {
        (size - 3) / 2 + 1
    }
}

impl LightNet {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, cfg: &FieldConfig) -> Result<Self> {
        let mut side = cfg.encoder_resolution;
        let mut channels = 1;
        let mut convs = Vec::new();
        for (k, &out) in cfg.encoder_channels.iter().enumerate() {
            convs.push(Conv::new(store, rng, &format!("light.conv{k}"), channels, out, 2));
            channels = out;
            side = conv_out(side);
        }
        if side == 0 || channels == 0 {
            return Err(Error::invalid(format!(
                "encoder resolution {} too small for {} stride-2 layers",
                cfg.encoder_resolution,
                cfg.encoder_channels.len()
            )));
        }
        let feature_len = side * side * channels;
        let direction = Mlp::new(store, rng, "light.direction", feature_len, cfg.light_width, cfg.light_hidden, 3);
        let bias = direction.layers.last().expect("output layer").bias;
        store.get_mut(bias).data_mut()[2] += cfg.frontal_bias;
        let intensity = Mlp::new(store, rng, "light.intensity", feature_len, cfg.light_width, cfg.light_hidden, 1);
        Ok(LightNet {
            convs,
            direction,
            intensity,
            feature_len,
        })
    }

    /// `images`: `[f, S, S, 1]` encoder input.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, images: Var) -> Result<LightOut> {
        let f = tape.shape(images)[0];
        let mut h = images;
        for conv in &self.convs {
            let z = conv.forward(tape, bound, h)?;
            h = tape.leaky_relu(z)?;
        }
        let features = h;
        let flat = tape.reshape(h, &[f, self.feature_len])?;
        let raw = self.direction.forward(tape, bound, flat)?;
        let unit = tape.l2_normalize(raw)?;
        let xy = tape.slice(unit, 0, 2)?;
        let z = tape.slice(unit, 2, 3)?;
        let z = tape.abs(z)?;
        let direction = tape.concat(&[xy, z])?;
        let raw_e = self.intensity.forward(tape, bound, flat)?;
        let intensity = tape.softplus(raw_e)?;
        Ok(LightOut {
            direction,
            intensity,
            features,
        })
    }
}

/// Isotropic specular reflectance of `(v·h, n·h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecularNet {
    pub mlp: Mlp,
    pub levels: usize,
}

impl SpecularNet {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, cfg: &FieldConfig) -> Self {
        let levels = cfg.specular_levels;
        let hidden = cfg.specular_depth.saturating_sub(1);
        SpecularNet {
            mlp: Mlp::new(store, rng, "specular", code_len(2, levels), cfg.specular_width, hidden, 1),
            levels,
        }
    }

    /// `x`: `[N, 2]` rows of `(v·h, n·h)`; returns `ρ_s` as `[N, 1]`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let code = encode_on_tape(tape, x, self.levels)?;
        let z = self.mlp.forward(tape, bound, code)?;
        tape.softplus(z)
    }

    /// `ρ_s` and `∂ρ_s/∂(n·h)`, both `[N, 1]`, with the derivative recorded on
    /// the tape so it can itself be differentiated.
    pub fn forward_with_slope(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<(Var, Var)> {
        let (n, _) = tape.value(x).dims2()?;
        let mut dir = vec![0.0; 2 * n];
        for r in 0..n {
            dir[2 * r + 1] = 1.0;
        }
        let dx = tape.leaf(Array::matrix(n, 2, dir)?)?;
        let code = encode_on_tape(tape, x, self.levels)?;
        let dcode = encode_tangent_on_tape(tape, x, dx, self.levels)?;
        let (z, dz) = self.mlp.forward_tangent(tape, bound, code, dcode)?;
        let rho = tape.softplus(z)?;
        let gate = tape.sigmoid(z)?;
        let slope = tape.mul(gate, dz)?;
        Ok((rho, slope))
    }
}

/// Cast-shadow field over pixel code and light direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowNet {
    pub trunk: Vec<Linear>,
    /// Pixel-feature half of the layer that also sees the light code.
    pub fuse: Linear,
    /// Light-code half of that layer, `[light code, width]`, no bias.
    pub fuse_light: super::params::ParamId,
    pub out: Linear,
    pub levels: usize,
}

/// Tape outputs of [`ShadowNet`] for `B` pixels and `f` lights.
#[derive(Clone, Copy, Debug)]
pub struct ShadowOut {
    /// `[B, f]`, values in `{0, 1}`.
    pub binary: Var,
    /// `[B, f]`, sigmoid pre-activation.
    pub pre: Var,
}

impl ShadowNet {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, cfg: &FieldConfig) -> Result<Self> {
        if cfg.shadow_depth < 3 {
            return Err(Error::invalid("shadow field needs at least 3 layers"));
        }
        let code = code_len(2, cfg.levels);
        let light_code = code_len(3, cfg.levels);
        let w = cfg.shadow_width;
        let trunk = (0..cfg.shadow_depth - 2)
            .map(|k| Linear::new(store, rng, &format!("shadow.{k}"), if k == 0 { code } else { w }, w))
            .collect();
        // One layer of fan-in `w + light_code`, stored as two blocks.
        let fan = w + light_code;
        let bound = 1.0 / (fan as f64).sqrt();
        let mut block = |rows: usize, cols: usize| {
            let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
            Array::new(&[rows, cols], data).expect("shape matches length")
        };
        let wf = block(w, w);
        let wl = block(light_code, w);
        let bf = block(1, w).reshape(&[w])?;
        let fuse = Linear {
            weight: store.add("shadow.fuse.weight", wf),
            bias: store.add("shadow.fuse.bias", bf),
        };
        let fuse_light = store.add("shadow.fuse.light", wl);
        let out = Linear::new(store, rng, "shadow.out", w, 1);
        Ok(ShadowNet {
            trunk,
            fuse,
            fuse_light,
            out,
            levels: cfg.levels,
        })
    }

    /// `code`: `[B, code]` pixel codes; `lights`: `[f, 3]` unit directions.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, code: Var, lights: Var) -> Result<ShadowOut> {
        let b = tape.shape(code)[0];
        let f = tape.shape(lights)[0];
        let mut h = code;
        for layer in &self.trunk {
            let z = layer.forward(tape, bound, h)?;
            h = tape.relu(z)?;
        }
        let width = tape.shape(h)[1];
        let pixel_part = self.fuse.forward(tape, bound, h)?;
        let light_code = encode_on_tape(tape, lights, self.levels)?;
        let light_part = tape.matmul(light_code, bound.var(self.fuse_light))?;
        let p3 = tape.reshape(pixel_part, &[b, 1, width])?;
        let l3 = tape.reshape(light_part, &[1, f, width])?;
        let joint = tape.add(p3, l3)?;
        let joint = tape.relu(joint)?;
        let flat = tape.reshape(joint, &[b * f, width])?;
        let logit = self.out.forward(tape, bound, flat)?;
        let pre = tape.sigmoid(logit)?;
        let pre = tape.reshape(pre, &[b, f])?;
        let binary = binarize(tape, pre)?;
        Ok(ShadowOut { binary, pre })
    }
}
