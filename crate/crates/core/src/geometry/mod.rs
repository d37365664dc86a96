//! Silhouette normals, normal integration, shadow rays and pseudo-shadows.

mod integrate;
mod pseudo;
mod raymarch;
mod silhouette;

pub use integrate::{integrate_normals, normals_from_depth, MIN_NZ};
pub use pseudo::{pseudo_shadow, SHADOW_FRACTION};
pub use raymarch::{raymarch_shadow, raymarch_shadow_with, ShadowRay, SHADOW_SAMPLES};
pub use silhouette::{fit_silhouette_normals, trace_contour, SilhouetteNormals, HALF_WINDOW, MIN_CONTOUR};
