use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, ShadowMap};

/// Fraction of the masked mean below which a pixel counts as shadowed.
pub const SHADOW_FRACTION: f64 = 0.2;

/// Per-image binary maps (`true` = lit): a masked pixel is shadow iff its value
/// is below `0.2 ×` the image's mean over the mask. Unmasked pixels are lit.
pub fn pseudo_shadow(images: &[Grid<f64>], mask: &Mask) -> Result<Vec<ShadowMap>> {
    let pixels = mask.pixels();
    if pixels.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    images
        .iter()
        .map(|img| {
            if !img.same_size(mask) {
                return Err(Error::invalid("image and mask sizes differ"));
            }
            let mean = pixels.iter().map(|&(c, r)| img.get(c, r)).sum::<f64>() / pixels.len() as f64;
            let threshold = SHADOW_FRACTION * mean;
            Ok(Grid::from_fn(mask.width(), mask.height(), |c, r| {
                !*mask.get(c, r) || *img.get(c, r) >= threshold
            }))
        })
        .collect()
}
