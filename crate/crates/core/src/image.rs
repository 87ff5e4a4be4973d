//! Pixel grids and scalar images.
//!
//! Images are stored row-major. The origin is the top-left corner, `x` runs
//! along columns and `y` along rows, both in nanometres; the centre of pixel
//! `(r, c)` sits at `((c + 0.5) * pixel_size, (r + 0.5) * pixel_size)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    /// Pixel side length in nm.
    pub pixel_size: f64,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, pixel_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::invalid(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixel_size,
        })
    }

    pub fn square(side: usize, pixel_size: f64) -> Result<Self> {
        Self::new(side, side, pixel_size)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical extent `(width_nm, height_nm)`.
    pub fn extent_nm(&self) -> (f64, f64) {
        (
            self.width as f64 * self.pixel_size,
            self.height as f64 * self.pixel_size,
        )
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.pixel_size,
            (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Pixel containing the point `(x_nm, y_nm)`, or `None` outside the grid.
    pub fn pixel_of(&self, x_nm: f64, y_nm: f64) -> Option<(usize, usize)> {
        if !(x_nm.is_finite() && y_nm.is_finite()) || x_nm < 0.0 || y_nm < 0.0 {
            return None;
        }
        let col = (x_nm / self.pixel_size).floor() as usize;
        let row = (y_nm / self.pixel_size).floor() as usize;
        (row < self.height && col < self.width).then_some((row, col))
    }

    /// Grid refined by an integer factor.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("refinement factor must be >= 1"));
        }
        Self::new(
            self.width * factor,
            self.height * factor,
            self.pixel_size / factor as f64,
        )
    }

    /// Grid coarsened by an integer factor; dimensions must divide evenly.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("magnification factor must be >= 1"));
        }
        if self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::dim(format!(
                "{}x{} grid is not divisible by L={factor}",
                self.width, self.height
            )));
        }
        Self::new(
            self.width / factor,
            self.height / factor,
            self.pixel_size * factor as f64,
        )
    }

    pub(crate) fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same(&self, other: &ImageGrid, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{what}: expected {}x{}, got {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: ImageGrid,
    values: Vec<f64>,
}

impl Image {
    pub fn zeros(grid: ImageGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: ImageGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dim(format!(
                "{}x{} grid needs {} values, got {}",
                grid.width,
                grid.height,
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: ImageGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.grid.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        dot(&self.values, &other.values)
    }

    /// Same image with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Image {
        Image::from_vec_unchecked(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    /// Copy of the rectangle starting at `(row0, col0)`; the crop keeps the
    /// pixel size.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Image> {
        if row0 + height > self.height() || col0 + width > self.width() {
            return Err(Error::dim(format!(
                "crop {height}x{width} at ({row0},{col0}) exceeds {}x{} image",
                self.height(),
                self.width()
            )));
        }
        let grid = ImageGrid::new(width, height, self.grid.pixel_size)?;
        let mut values = Vec::with_capacity(width * height);
        for r in row0..row0 + height {
            let start = r * self.width() + col0;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        Ok(Image::from_vec_unchecked(grid, values))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A sequence of frames sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub grid: ImageGrid,
    pub frames: Vec<Image>,
}

impl ImageStack {
    pub fn new(grid: ImageGrid, frames: Vec<Image>) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            grid.check_same(f.grid(), &format!("frame {}", i + 1))?;
        }
        Ok(Self { grid, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Pixelwise sum over all frames.
    pub fn sum_frames(&self) -> Image {
        let mut acc = vec![0.0; self.grid.len()];
        for f in &self.frames {
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += v;
            }
        }
        Image::from_vec_unchecked(self.grid, acc)
    }
}

/// Nearest-neighbour upsampling: every pixel becomes an `factor x factor`
/// block of the same value.
pub fn nn_upsample(image: &Image, factor: usize) -> Result<Image> {
    if factor < 1 {
        return Err(Error::invalid("upsampling factor must be >= 1"));
    }
    let grid = image.grid().refined(factor)?;
    let (w, h) = (image.width(), image.height());
    let mut values = vec![0.0; grid.len()];
    for r in 0..h * factor {
        let src = &image.values()[(r / factor) * w..(r / factor + 1) * w];
        let dst = &mut values[r * grid.width..(r + 1) * grid.width];
        for (c, d) in dst.iter_mut().enumerate() {
            *d = src[c / factor];
        }
    }
    Ok(Image::from_vec_unchecked(grid, values))
}
