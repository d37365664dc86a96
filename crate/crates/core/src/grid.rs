//! Image-plane rasters.
//!
//! Rows run top to bottom, columns left to right. Camera coordinates used for
//! normals and lights have `x` to the right, `y` up and `z` toward the viewer.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type Mask = Grid<bool>;
pub type DepthMap = Grid<f64>;
pub type NormalMap = Grid<[f64; 3]>;
/// Binary shadow map, `true` = lit.
pub type ShadowMap = Grid<bool>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidShape {
                op: "grid",
                shape: vec![height, width, data.len()],
            });
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_size<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn get(&self, col: usize, row: usize) -> &T {
        &self.data[row * self.width + col]
    }

    pub fn get_mut(&mut self, col: usize, row: usize) -> &mut T {
        &mut self.data[row * self.width + col]
    }

    /// Value at signed coordinates, `None` outside the raster.
    pub fn checked(&self, col: isize, row: isize) -> Option<&T> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            None
        } else {
            Some(self.get(col as usize, row as usize))
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }
}

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// `(col, row)` of every set pixel in raster order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.count());
        for row in 0..self.height {
            for col in 0..self.width {
                if *self.get(col, row) {
                    out.push((col, row));
                }
            }
        }
        out
    }

    /// Set pixels with at least one unset (or out-of-raster) 4-neighbour.
    pub fn boundary(&self) -> Grid<bool> {
        Grid::from_fn(self.width, self.height, |c, r| {
            if !*self.get(c, r) {
                return false;
            }
            let (c, r) = (c as isize, r as isize);
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dc, dr)| !self.checked(c + dc, r + dr).copied().unwrap_or(false))
        })
    }
}

/// Image-plane offset of a camera-space direction: `x` maps to columns, `y` to
/// decreasing rows.
pub fn camera_to_pixel_delta(x: f64, y: f64) -> (f64, f64) {
    (x, -y)
}
