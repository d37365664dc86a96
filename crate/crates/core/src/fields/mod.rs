//! The four neural intrinsics fields and the image formation that combines them.

mod nets;
mod params;
mod render;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use nets::{conv_out, LightNet, LightOut, PositionNet, PositionOut, ShadowNet, ShadowOut, SpecularNet};
pub use params::{uniform_init, Bound, Conv, Linear, Mlp, ParamId, ParamStore};
pub use render::{
    detach, encoder_input, pixel_codes, render_batch, render_pixel, BatchRender, FieldEval, FieldRender, LightState,
    PathCuts, SurfaceIntrinsics,
};

use crate::error::Result;

/// Architecture of the four fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Frequency levels of the pixel and light codes.
    pub levels: usize,
    /// Frequency levels of the `(v·h, n·h)` code.
    pub specular_levels: usize,
    pub position_width: usize,
    /// Hidden layers of the position field; the code is re-injected halfway.
    pub position_depth: usize,
    /// Side of the square image fed to the light encoder.
    pub encoder_resolution: usize,
    pub encoder_channels: Vec<usize>,
    pub light_width: usize,
    pub light_hidden: usize,
    pub specular_width: usize,
    /// Linear layers of the specular field, output included.
    pub specular_depth: usize,
    pub shadow_width: usize,
    /// Linear layers of the shadow field, output included; the light code
    /// joins at the second-to-last.
    pub shadow_depth: usize,
    /// Added to the `z` output bias of the normal and light-direction heads so
    /// both start out facing the camera.
    pub frontal_bias: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            levels: 4,
            specular_levels: 4,
            position_width: 128,
            position_depth: 8,
            encoder_resolution: 64,
            encoder_channels: vec![8, 16, 32, 4],
            light_width: 64,
            light_hidden: 2,
            specular_width: 64,
            specular_depth: 4,
            shadow_width: 128,
            shadow_depth: 10,
            frontal_bias: 1.0,
        }
    }
}

impl FieldConfig {
    /// A much smaller network for fast tests.
    pub fn tiny() -> Self {
        FieldConfig {
            levels: 2,
            specular_levels: 2,
            position_width: 16,
            position_depth: 2,
            encoder_resolution: 16,
            encoder_channels: vec![4, 4],
            light_width: 8,
            light_hidden: 1,
            specular_width: 8,
            specular_depth: 2,
            shadow_width: 8,
            shadow_depth: 3,
            frontal_bias: 1.0,
        }
    }
}

/// All trainable tensors plus the layer layout that reads them.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldParameters {
    pub config: FieldConfig,
    pub store: ParamStore,
    pub position: PositionNet,
    pub light: LightNet,
    pub specular: SpecularNet,
    pub shadow: ShadowNet,
}

impl FieldParameters {
    /// Fresh parameters; identical seeds give identical tensors.
    pub fn new(config: &FieldConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let position = PositionNet::new(&mut store, &mut rng, config);
        let light = LightNet::new(&mut store, &mut rng, config)?;
        let specular = SpecularNet::new(&mut store, &mut rng, config);
        let shadow = ShadowNet::new(&mut store, &mut rng, config)?;
        Ok(FieldParameters {
            config: config.clone(),
            store,
            position,
            light,
            specular,
            shadow,
        })
    }

    /// Store indices of the tensors whose names start with `prefix`.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<usize> {
        self.store
            .names()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }
}
