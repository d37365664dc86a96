use crate::error::{Error, Result};
use crate::grid::{DepthMap, Mask, NormalMap};

/// Lower bound on `n_z` before integration; steeper normals are tilted up to it.
pub const MIN_NZ: f64 = 0.01;

const MAX_ITERS: usize = 20_000;
const TOLERANCE: f64 = 1e-11;

/// One pixel's plane-fitting neighbourhood: itself plus its in-mask 4-neighbours.
struct Neighbourhood {
    members: Vec<usize>,
    normal: [f64; 3],
    /// Centered in-plane offset term `n_x (x_p - x̄) + n_y (y_p - ȳ)` per member.
    offsets: Vec<f64>,
}

fn clamp_normal(n: [f64; 3]) -> [f64; 3] {
    if n[2] >= MIN_NZ {
        return n;
    }
    let xy = (n[0] * n[0] + n[1] * n[1]).sqrt();
    let s = (1.0 - MIN_NZ * MIN_NZ).sqrt() / xy.max(1e-300);
    [n[0] * s, n[1] * s, MIN_NZ]
}

/// Depth from a normal map by orthographic five-point inverse plane fitting.
///
/// Minimizes, over all depths, the summed squared point-to-plane distances of
/// each pixel's five-point neighbourhood to the plane through it with that
/// pixel's normal. The free offset of each connected mask component is fixed
/// by giving it zero mean. Pixel coordinates are `x = col`, `y = -row`, and
/// depth is in pixel units toward the viewer.
pub fn integrate_normals(normals: &NormalMap, mask: &Mask) -> Result<DepthMap> {
    if !normals.same_size(mask) {
        return Err(Error::invalid("normal map and mask sizes differ"));
    }
    let (w, h) = (mask.width(), mask.height());
    let pixels = mask.pixels();
    if pixels.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let mut slot = vec![usize::MAX; w * h];
    for (k, &(c, r)) in pixels.iter().enumerate() {
        slot[mask.index(c, r)] = k;
    }

    let mut hoods = Vec::with_capacity(pixels.len());
    for &(c, r) in &pixels {
        let n = clamp_normal(*normals.get(c, r));
        let mut members = vec![slot[mask.index(c, r)]];
        let mut coords = vec![(c as f64, -(r as f64))];
        for (dc, dr) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            if let Some(true) = mask.checked(c as isize + dc, r as isize + dr) {
                let (nc, nr) = ((c as isize + dc) as usize, (r as isize + dr) as usize);
                members.push(slot[mask.index(nc, nr)]);
                coords.push((nc as f64, -(nr as f64)));
            }
        }
        if members.len() < 2 {
            continue;
        }
        let k = coords.len() as f64;
        let mx = coords.iter().map(|p| p.0).sum::<f64>() / k;
        let my = coords.iter().map(|p| p.1).sum::<f64>() / k;
        let offsets = coords
            .iter()
            .map(|&(x, y)| n[0] * (x - mx) + n[1] * (y - my))
            .collect();
        hoods.push(Neighbourhood {
            members,
            normal: n,
            offsets,
        });
    }

    let count = pixels.len();
    // Normal equations: sum over neighbourhoods of nz² · centering projector.
    let mut rhs = vec![0.0; count];
    let mut diag = vec![0.0; count];
    for hood in &hoods {
        let nz = hood.normal[2];
        let k = hood.members.len() as f64;
        for (&m, &off) in hood.members.iter().zip(&hood.offsets) {
            rhs[m] -= nz * off;
            diag[m] += nz * nz * (1.0 - 1.0 / k);
        }
    }
    let apply = |z: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for hood in &hoods {
            let nz2 = hood.normal[2] * hood.normal[2];
            let mean =
                hood.members.iter().map(|&m| z[m]).sum::<f64>() / hood.members.len() as f64;
            for &m in &hood.members {
                out[m] += nz2 * (z[m] - mean);
            }
        }
    };

    let labels = components(mask, &slot, &pixels);
    let z = conjugate_gradient(&apply, &rhs, &diag, &labels)?;

    let mut depth = DepthMap::filled(w, h, 0.0);
    for (k, &(c, r)) in pixels.iter().enumerate() {
        *depth.get_mut(c, r) = z[k];
    }
    Ok(depth)
}

/// 4-connected component label of each masked pixel.
fn components(mask: &Mask, slot: &[usize], pixels: &[(usize, usize)]) -> Vec<usize> {
    let mut label = vec![usize::MAX; pixels.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..pixels.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (c, r) = pixels[k];
            for (dc, dr) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (nc, nr) = (c as isize + dc, r as isize + dr);
                if let Some(true) = mask.checked(nc, nr) {
                    let j = slot[mask.index(nc as usize, nr as usize)];
                    if label[j] == usize::MAX {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

fn center_components(z: &mut [f64], labels: &[usize]) {
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; n];
    let mut cnt = vec![0usize; n];
    for (v, &l) in z.iter().zip(labels) {
        sum[l] += v;
        cnt[l] += 1;
    }
    for (v, &l) in z.iter_mut().zip(labels) {
        *v -= sum[l] / cnt[l] as f64;
    }
}

/// Jacobi-preconditioned CG on the (singular, consistent) normal equations,
/// iterating in the zero-mean-per-component subspace.
fn conjugate_gradient(
    apply: &dyn Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    diag: &[f64],
    labels: &[usize],
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let inv: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    center_components(&mut r, labels);
    let rhs_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
        center_components(&mut z, labels);
        z
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for _ in 0..MAX_ITERS {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res <= TOLERANCE * rhs_norm {
            center_components(&mut x, labels);
            return Ok(x);
        }
        z = precondition(&r);
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if res <= 1e-6 * rhs_norm {
        center_components(&mut x, labels);
        Ok(x)
    } else {
        Err(Error::Singular(format!(
            "normal integration stalled at relative residual {:.3e}",
            res / rhs_norm
        )))
    }
}

/// Unit normals of a depth map by central differences (one-sided at the mask edge).
pub fn normals_from_depth(depth: &DepthMap, mask: &Mask) -> NormalMap {
    let value = |c: isize, r: isize| match mask.checked(c, r) {
        Some(true) => Some(*depth.get(c as usize, r as usize)),
        _ => None,
    };
    NormalMap::from_fn(mask.width(), mask.height(), |c, r| {
        if !*mask.get(c, r) {
            return [0.0, 0.0, 0.0];
        }
        let (ci, ri) = (c as isize, r as isize);
        let here = *depth.get(c, r);
        let slope = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (b - a) / 2.0,
            (Some(a), None) => here - a,
            (None, Some(b)) => b - here,
            (None, None) => 0.0,
        };
        let dzdx = slope(value(ci - 1, ri), value(ci + 1, ri));
        // y grows upward, i.e. toward smaller rows.
        let dzdy = slope(value(ci, ri + 1), value(ci, ri - 1));
        let n = [-dzdx, -dzdy, 1.0];
        let len = (n[0] * n[0] + n[1] * n[1] + 1.0).sqrt();
        [n[0] / len, n[1] / len, n[2] / len]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn disc(size: usize, radius: f64) -> Mask {
        let c = (size as f64 - 1.0) / 2.0;
        Grid::from_fn(size, size, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            dx * dx + dy * dy < radius * radius
        })
    }

    #[test]
    fn constant_normal_gives_flat_depth() {
        let mask = disc(32, 12.0);
        let normals = Grid::filled(32, 32, [0.0, 0.0, 1.0]);
        let d = integrate_normals(&normals, &mask).unwrap();
        assert!(d.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn tilted_normal_gives_ramp() {
        let a: f64 = 0.4;
        let len = (1.0 + a * a).sqrt();
        let mask = disc(32, 12.0);
        let normals = Grid::filled(32, 32, [-a / len, 0.0, 1.0 / len]);
        let d = integrate_normals(&normals, &mask).unwrap();
        for (c, r) in mask.pixels() {
            if *mask.get(c + 1, r) {
                let slope = d.get(c + 1, r) - d.get(c, r);
                assert!((slope - a).abs() < 1e-6, "slope {slope}");
            }
        }
        let mean: f64 = mask.pixels().iter().map(|&(c, r)| d.get(c, r)).sum::<f64>();
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn components_centered_independently() {
        let mask = Grid::from_fn(20, 6, |c, _| c < 6 || c >= 12);
        let a: f64 = 0.3;
        let len = (1.0 + a * a).sqrt();
        let normals = Grid::filled(20, 6, [0.0, a / len, 1.0 / len]);
        let d = integrate_normals(&normals, &mask).unwrap();
        for range in [0..6, 12..20] {
            let mut s = 0.0;
            for c in range {
                for r in 0..6 {
                    s += d.get(c, r);
                }
            }
            assert!(s.abs() < 1e-6);
        }
        // n_y > 0 means depth falls as y rises, i.e. toward row 0.
        assert!(d.get(2, 0) < d.get(2, 5));
    }

    #[test]
    fn single_pixel_and_empty_masks() {
        let mut mask = Grid::filled(5, 5, false);
        let normals = Grid::filled(5, 5, [0.0, 0.0, 1.0]);
        assert!(integrate_normals(&normals, &mask).is_err());
        *mask.get_mut(2, 2) = true;
        assert_eq!(*integrate_normals(&normals, &mask).unwrap().get(2, 2), 0.0);
    }

    #[test]
    fn grazing_normals_clamped() {
        let n = clamp_normal([1.0, 0.0, 0.0]);
        assert_eq!(n[2], MIN_NZ);
        assert!(((n[0] * n[0] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-12);
    }
}
