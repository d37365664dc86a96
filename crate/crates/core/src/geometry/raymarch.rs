use crate::error::{Error, Result};
use crate::grid::{DepthMap, Mask, ShadowMap};

pub const SHADOW_SAMPLES: usize = 32;

/// Ray `x + t·l` leaving a depth-map point toward a directional light.
#[derive(Clone, Debug)]
pub struct ShadowRay {
    /// `(col, row, depth)` of the query pixel.
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    /// Ray parameter at which the ray leaves the image rectangle.
    pub t_exit: f64,
    pub samples: usize,
}

impl ShadowRay {
    pub fn new(col: usize, row: usize, depth: f64, l: [f64; 3], width: usize, height: usize) -> Self {
        let (dc, dr) = (l[0], -l[1]);
        let exit = |pos: f64, d: f64, size: usize| {
            if d > 1e-12 {
                (size as f64 - 1.0 - pos) / d
            } else if d < -1e-12 {
                pos / -d
            } else {
                f64::INFINITY
            }
        };
        let t = exit(col as f64, dc, width).min(exit(row as f64, dr, height));
        ShadowRay {
            origin: [col as f64, row as f64, depth],
            direction: l,
            t_exit: if t.is_finite() { t } else { 0.0 },
            samples: SHADOW_SAMPLES,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    /// Points `(col, row, height on ray)` uniformly spaced in `t` up to the exit.
    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        let [c0, r0, w0] = self.origin;
        let [lx, ly, lz] = self.direction;
        (1..=self.samples).map(move |i| {
            let t = self.t_exit * i as f64 / self.samples as f64;
            [c0 + t * lx, r0 - t * ly, w0 + t * lz]
        })
    }

    /// Smallest `ray height − surface height` over the samples that land inside the mask.
    pub fn clearance(&self, depth: &DepthMap, mask: &Mask) -> f64 {
        self.points()
            .filter_map(|[c, r, w]| {
                let (ci, ri) = (c.round() as isize, r.round() as isize);
                match mask.checked(ci, ri) {
                    Some(true) => Some(w - depth.get(ci as usize, ri as usize)),
                    _ => None,
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_light(l: [f64; 3]) -> Result<()> {
    let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
    if (n - 1.0).abs() > 1e-6 || l[2] <= 0.0 {
        return Err(Error::invalid(format!(
            "shadow rays need a unit light with l_z > 0, got {l:?}"
        )));
    }
    Ok(())
}

/// Cast-shadow map of a depth surface under directional light `l`.
///
/// A masked pixel is lit when the ray toward the light never passes below the
/// surface at any of the samples; samples outside the mask never occlude.
/// Pixels outside the mask are reported lit.
pub fn raymarch_shadow(depth: &DepthMap, mask: &Mask, l: [f64; 3]) -> Result<ShadowMap> {
    raymarch_shadow_with(depth, mask, l, SHADOW_SAMPLES)
}

pub fn raymarch_shadow_with(
    depth: &DepthMap,
    mask: &Mask,
    l: [f64; 3],
    samples: usize,
) -> Result<ShadowMap> {
    check_light(l)?;
    if !depth.same_size(mask) {
        return Err(Error::invalid("depth and mask sizes differ"));
    }
    let (w, h) = (mask.width(), mask.height());
    Ok(ShadowMap::from_fn(w, h, |c, r| {
        if !*mask.get(c, r) {
            return true;
        }
        let ray = ShadowRay::new(c, r, *depth.get(c, r), l, w, h).with_samples(samples);
        ray.clearance(depth, mask) >= 0.0
    }))
}
