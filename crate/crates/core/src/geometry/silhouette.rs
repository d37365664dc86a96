use crate::error::{Error, Result};
use crate::grid::Mask;

/// Points on a mask contour each paired with the 2D outward unit normal in
/// camera coordinates (`x` right, `y` up).
#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteNormals {
    /// `(col, row)` of each contour pixel.
    pub points: Vec<(usize, usize)>,
    pub normals: Vec<[f64; 2]>,
}

impl SilhouetteNormals {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub const MIN_CONTOUR: usize = 20;
/// Contour pixels on each side of the fitted point.
pub const HALF_WINDOW: isize = 5;

// Clockwise on screen starting west: W, NW, N, NE, E, SE, S, SW.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn set(mask: &Mask, c: isize, r: isize) -> bool {
    mask.checked(c, r).copied().unwrap_or(false)
}

/// Largest 8-connected component.
fn largest_component(mask: &Mask) -> Mask {
    let mut label = vec![usize::MAX; mask.len()];
    let mut best = (0, 0);
    let mut next = 0;
    for (c0, r0) in mask.pixels() {
        if label[mask.index(c0, r0)] != usize::MAX {
            continue;
        }
        let mut size = 0;
        let mut stack = vec![(c0 as isize, r0 as isize)];
        label[mask.index(c0, r0)] = next;
        while let Some((c, r)) = stack.pop() {
            size += 1;
            for (dc, dr) in RING {
                let (nc, nr) = (c + dc, r + dr);
                if set(mask, nc, nr) {
                    let i = mask.index(nc as usize, nr as usize);
                    if label[i] == usize::MAX {
                        label[i] = next;
                        stack.push((nc, nr));
                    }
                }
            }
        }
        if size > best.1 {
            best = (next, size);
        }
        next += 1;
    }
    let keep = best.0;
    Mask::from_fn(mask.width(), mask.height(), |c, r| {
        label[mask.index(c, r)] == keep
    })
}

/// Moore-neighbour trace of the outer contour, starting at the first pixel in
/// raster order. Returns pixels in traversal order without repeats.
pub fn trace_contour(mask: &Mask) -> Vec<(usize, usize)> {
    let Some(&(sc, sr)) = mask.pixels().first() else {
        return Vec::new();
    };
    let start = (sc as isize, sr as isize);
    let mut path = vec![start];
    // Entered from the west: the west neighbour is background by construction.
    let mut cur = start;
    let mut back = 0usize;
    let limit = 4 * mask.count() + 16;
    let mut first_step: Option<(isize, isize)> = None;
    for _ in 0..limit {
        let mut found = None;
        for k in 1..=8 {
            let dir = (back + k) % 8;
            let (dc, dr) = RING[dir];
            let cand = (cur.0 + dc, cur.1 + dr);
            if set(mask, cand.0, cand.1) {
                found = Some((cand, (dir + 8 - 1) % 8));
                break;
            }
        }
        let Some((next, prev_dir)) = found else {
            break;
        };
        // Backtrack: the background cell checked just before `next`, seen from `next`.
        let (bc, br) = RING[prev_dir];
        let bg = (cur.0 + bc, cur.1 + br);
        let rel = (bg.0 - next.0, bg.1 - next.1);
        back = RING.iter().position(|&d| d == rel).unwrap_or(0);
        if cur == start {
            match first_step {
                None => first_step = Some(next),
                Some(s) if s == next => break,
                _ => {}
            }
        }
        cur = next;
        path.push(cur);
    }
    // Drop the closing return to the start and any revisits.
    let mut seen = std::collections::HashSet::new();
    path.into_iter()
        .filter(|p| seen.insert(*p))
        .map(|(c, r)| (c as usize, r as usize))
        .collect()
}

/// Unit tangent at contour index `i` from least-squares quadratics `x(s)`,
/// `y(s)` over contour offsets `s ∈ [-HALF_WINDOW, HALF_WINDOW]`. With symmetric
/// offsets the linear coefficient is `Σ s·p(s) / Σ s²`.
fn window_tangent(xy: &[(f64, f64)], i: isize, n: usize) -> Result<(f64, f64)> {
    let (mut tx, mut ty) = (0.0, 0.0);
    for s in -HALF_WINDOW..=HALF_WINDOW {
        let p = xy[(i + s).rem_euclid(n as isize) as usize];
        tx += s as f64 * p.0;
        ty += s as f64 * p.1;
    }
    let len = (tx * tx + ty * ty).sqrt();
    if len == 0.0 {
        return Err(Error::Degenerate("contour folds back on itself".into()));
    }
    Ok((tx / len, ty / len))
}

/// Outward contour normals from a quadratic fit over a sliding window
/// of the traced contour of the largest mask component.
pub fn fit_silhouette_normals(mask: &Mask) -> Result<SilhouetteNormals> {
    if mask.count() == 0 {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let component = largest_component(mask);
    let interior = component.count() - component.boundary().count();
    if interior == 0 {
        return Err(Error::Degenerate("mask has no interior pixels".into()));
    }
    let points = trace_contour(&component);
    let n = points.len();
    if n < MIN_CONTOUR {
        return Err(Error::Degenerate(format!(
            "contour has {n} pixels, need at least {MIN_CONTOUR}"
        )));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(c, r)| (c as f64, -(r as f64)))
        .collect();
    let area: f64 = (0..n)
        .map(|i| {
            let (a, b) = (xy[i], xy[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    let ccw = area > 0.0;

    let mut normals = Vec::with_capacity(n);
    for i in 0..n as isize {
        let (tx, ty) = window_tangent(&xy, i, n)?;
        let nrm = if ccw { [ty, -tx] } else { [-ty, tx] };
        normals.push(nrm);
    }
    Ok(SilhouetteNormals { points, normals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;

    fn disc(size: usize, cx: f64, cy: f64, radius: f64) -> Mask {
        Grid::from_fn(size, size, |c, r| {
            let (dx, dy) = (c as f64 - cx, r as f64 - cy);
            dx * dx + dy * dy <= radius * radius
        })
    }

    #[test]
    fn circle_normals_point_outward() {
        for (cx, cy) in [(31.5, 31.5), (32.0, 32.0), (30.77, 31.3)] {
            circle_case(cx, cy);
        }
    }

    fn circle_case(cx: f64, cy: f64) {
        let sil = fit_silhouette_normals(&disc(64, cx, cy, 24.0)).unwrap();
        let mut err = 0.0;
        for (&(c, r), n) in sil.points.iter().zip(&sil.normals) {
            let (ax, ay) = (c as f64 - cx, cy - r as f64);
            let len = (ax * ax + ay * ay).sqrt();
            let cos = (n[0] * ax + n[1] * ay) / len;
            err += cos.clamp(-1.0, 1.0).acos().to_degrees();
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
        }
        let mae = err / sil.len() as f64;
        assert!(mae < 2.0, "azimuth MAE {mae}");
    }

    #[test]
    fn straight_edges_are_axis_aligned() {
        let mask = Grid::from_fn(40, 40, |c, r| (5..35).contains(&c) && (8..30).contains(&r));
        let sil = fit_silhouette_normals(&mask).unwrap();
        let boundary = mask.boundary();
        for (&(c, r), n) in sil.points.iter().zip(&sil.normals) {
            assert!(*boundary.get(c, r));
            let near_corner = (c < 11 || c > 28) && (r < 14 || r > 23);
            if near_corner {
                continue;
            }
            let expected = if c == 5 {
                [-1.0, 0.0]
            } else if c == 34 {
                [1.0, 0.0]
            } else if r == 8 {
                [0.0, 1.0]
            } else {
                [0.0, -1.0]
            };
            assert!((n[0] - expected[0]).abs() < 1e-12 && (n[1] - expected[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_masks_rejected() {
        assert!(fit_silhouette_normals(&Grid::filled(10, 10, false)).is_err());
        let line = Grid::from_fn(40, 40, |c, r| r == 20 && (2..38).contains(&c));
        assert!(fit_silhouette_normals(&line).is_err());
        let tiny = Grid::from_fn(10, 10, |c, r| (3..6).contains(&c) && (3..6).contains(&r));
        assert!(fit_silhouette_normals(&tiny).is_err());
    }

    #[test]
    fn largest_component_is_used() {
        let mut mask = disc(64, 40.0, 40.0, 15.0);
        *mask.get_mut(2, 2) = true;
        let sil = fit_silhouette_normals(&mask).unwrap();
        assert!(!sil.points.contains(&(2, 2)));
    }

    proptest! {
        #[test]
        fn translation_invariant(dx in 0usize..12, dy in 0usize..12, radius in 8.0f64..14.0) {
            let a = fit_silhouette_normals(&disc(48, 16.0, 16.0, radius)).unwrap();
            let b = fit_silhouette_normals(
                &disc(48, 16.0 + dx as f64, 16.0 + dy as f64, radius),
            ).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for i in 0..a.len() {
                prop_assert_eq!(a.points[i].0 + dx, b.points[i].0);
                prop_assert_eq!(a.points[i].1 + dy, b.points[i].1);
                prop_assert!((a.normals[i][0] - b.normals[i][0]).abs() < 1e-12);
                prop_assert!((a.normals[i][1] - b.normals[i][1]).abs() < 1e-12);
            }
        }
    }
}
