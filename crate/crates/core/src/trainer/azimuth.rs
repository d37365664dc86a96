use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::geometry::SilhouetteNormals;
use crate::grid::{Grid, Mask};

/// Relative size of the third singular value below which the images are
/// treated as rank-deficient.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Where warm-up azimuth targets come from.
#[derive(Clone, Debug, PartialEq)]
pub enum AzimuthSource {
    /// Rank-3 factorization of the image matrix.
    Factorization,
    /// Fixed azimuths in radians, one per image.
    Fixed(Vec<f64>),
}

impl AzimuthSource {
    pub fn resolve(&self, images: &[Grid<f64>], mask: &Mask, silhouette: &SilhouetteNormals) -> Result<Vec<f64>> {
        match self {
            AzimuthSource::Factorization => rank3_azimuth(images, mask, silhouette),
            AzimuthSource::Fixed(az) => {
                if az.len() != images.len() {
                    return Err(Error::invalid(format!(
                        "{} azimuths for {} images",
                        az.len(),
                        images.len()
                    )));
                }
                if az.iter().any(|a| !a.is_finite()) {
                    return Err(Error::invalid("azimuths must be finite"));
                }
                Ok(az.clone())
            }
        }
    }
}

/// Reads one azimuth in radians per line; blank lines and `#` comments are skipped.
pub fn read_azimuths(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| Error::format(path, format!("bad azimuth {l:?}: {e}")))
        })
        .collect()
}

/// Writes azimuths in the format [`read_azimuths`] accepts, bit-exactly.
pub fn format_azimuths(azimuths: &[f64]) -> String {
    azimuths.iter().map(|a| format!("{a:?}\n")).collect()
}

fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| Error::Singular(format!("least squares: {e}")))
}

/// Per-image light azimuths (radians, camera frame) from a rank-3
/// factorization of the masked image matrix.
///
/// The pseudo-light factors are fixed up to an invertible 3×3 matrix. Its
/// first two columns are chosen so that boundary pseudo-normals map onto the
/// silhouette normals, and its third column is the direction boundary
/// pseudo-normals leave unused.
pub fn rank3_azimuth(images: &[Grid<f64>], mask: &Mask, silhouette: &SilhouetteNormals) -> Result<Vec<f64>> {
    let f = images.len();
    if f < 3 {
        return Err(Error::invalid(format!("need at least 3 images, got {f}")));
    }
    let pixels = mask.pixels();
    let rows: Vec<Vec<f64>> = pixels
        .iter()
        .map(|&(c, r)| images.iter().map(|img| *img.get(c, r)).collect())
        .collect();

    let lit_everywhere: Vec<&Vec<f64>> = rows.iter().filter(|r| r.iter().all(|&v| v > 0.0)).collect();
    let basis: Vec<&Vec<f64>> = if lit_everywhere.len() >= 3 {
        lit_everywhere
    } else {
        rows.iter().collect()
    };
    let m = DMatrix::from_fn(basis.len(), f, |i, j| basis[i][j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if order.len() < 3 {
        return Err(Error::Degenerate("fewer than 3 usable pixels".into()));
    }
    let sigma: Vec<f64> = order.iter().take(3).map(|&k| svd.singular_values[k]).collect();
    if !(sigma[2] > RANK_TOLERANCE * sigma[0]) {
        return Err(Error::Degenerate("image matrix has rank below 3".into()));
    }
    let s = DMatrix::from_fn(3, f, |i, j| sigma[i].sqrt() * vt[(order[i], j)]);

    let index = Grid::from_fn(mask.width(), mask.height(), |c, r| {
        pixels.binary_search_by(|&(pc, pr)| (pr, pc).cmp(&(r, c))).ok()
    });
    let mut boundary = Vec::new();
    let mut targets = Vec::new();
    for (p, n) in silhouette.points.iter().zip(&silhouette.normals) {
        let Some(k) = *index.get(p.0, p.1) else {
            continue;
        };
        let obs = &rows[k];
        let lit: Vec<usize> = (0..f).filter(|&j| obs[j] > 0.0).collect();
        let used: Vec<usize> = if lit.len() >= 3 { lit } else { (0..f).collect() };
        let a = DMatrix::from_fn(used.len(), 3, |i, c| s[(c, used[i])]);
        let y = DMatrix::from_fn(used.len(), 1, |i, _| obs[used[i]]);
        let b = lstsq(&a, &y)?;
        boundary.push([b[0], b[1], b[2]]);
        targets.push(*n);
    }
    if boundary.len() < 3 {
        return Err(Error::Degenerate("too few silhouette points inside the mask".into()));
    }
    let bb = DMatrix::from_fn(boundary.len(), 3, |i, c| boundary[i][c]);
    let sn = DMatrix::from_fn(targets.len(), 2, |i, c| targets[i][c]);
    let a12 = lstsq(&bb, &sn)?;
    let bsvd = bb.svd(false, true);
    let bvt = bsvd.v_t.as_ref().expect("right singular vectors requested");
    let smallest = (0..bsvd.singular_values.len())
        .min_by(|&a, &b| bsvd.singular_values[a].total_cmp(&bsvd.singular_values[b]))
        .expect("three singular values");
    let a3 = DVector::from_fn(3, |i, _| bvt[(smallest, i)]);
    let a = Matrix3::from_fn(|r, c| if c < 2 { a12[(r, c)] } else { a3[r] });
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::Singular("azimuth frame is not invertible".into()))?;
    Ok((0..f)
        .map(|j| {
            let col = nalgebra::Vector3::new(s[(0, j)], s[(1, j)], s[(2, j)]);
            let l = a_inv * col;
            l.y.atan2(l.x)
        })
        .collect())
}

/// Unit `(cos, sin)` vectors of azimuth angles.
pub fn azimuth_vectors(azimuths: &[f64]) -> Vec<[f64; 2]> {
    azimuths.iter().map(|a| [a.cos(), a.sin()]).collect()
}

/// Smallest absolute difference of two angles, in degrees.
pub fn angle_gap_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d).to_degrees()
}
