//! The blur-and-downsample operator `A = S_L K`.
//!
//! `K` is a zero-padded ("same") convolution with the discrete Gaussian
//! kernel and `S_L` maps the fine grid onto an `L`-times coarser one. Both the
//! kernel and every supported sampling stencil are separable, so `A` is
//! applied as two strided 1D correlations with a combined filter `h`:
//!
//! ```text
//! (A x)[i, j] = sum_{t, s} h[t] h[s] x[L i + t, L j + s]
//! ```
//!
//! and the column norms factor as `||c_(r,c)||^2 = a_rows(r) * a_cols(c)`
//! with `a(r) = sum_i h[r - L i]^2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImageGrid};
use crate::psf::{gaussian_kernel_1d, PsfModel};

/// Stencil of the downsampling operator `S_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Keep the top-left fine pixel of every `L x L` block.
    #[default]
    Decimate,
    /// Mean over every `L x L` block.
    BlockMean,
    /// Sum over every `L x L` block (detector integration, flux preserving).
    BlockSum,
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decimate" => Ok(Sampling::Decimate),
            "block-mean" => Ok(Sampling::BlockMean),
            "block-sum" => Ok(Sampling::BlockSum),
            _ => Err(Error::invalid(format!(
                "unknown sampling '{s}' (decimate, block-mean, block-sum)"
            ))),
        }
    }
}

#[derive(Debug)]
pub struct ForwardOperator {
    hr_grid: ImageGrid,
    lr_grid: ImageGrid,
    factor: usize,
    psf: PsfModel,
    sampling: Sampling,
    /// Combined 1D filter, `filter[k]` is `h[k + offset]`.
    filter: Vec<f64>,
    offset: isize,
    column_norms: Vec<f64>,
    lipschitz: OnceLock<f64>,
}

impl Clone for ForwardOperator {
    fn clone(&self) -> Self {
        let lipschitz = OnceLock::new();
        if let Some(v) = self.lipschitz.get() {
            let _ = lipschitz.set(*v);
        }
        Self {
            hr_grid: self.hr_grid,
            lr_grid: self.lr_grid,
            factor: self.factor,
            psf: self.psf,
            sampling: self.sampling,
            filter: self.filter.clone(),
            offset: self.offset,
            column_norms: self.column_norms.clone(),
            lipschitz,
        }
    }
}

impl ForwardOperator {
    pub fn new(hr_grid: ImageGrid, factor: usize, psf: PsfModel) -> Result<Self> {
        Self::with_sampling(hr_grid, factor, psf, Sampling::Decimate)
    }

    pub fn with_sampling(
        hr_grid: ImageGrid,
        factor: usize,
        psf: PsfModel,
        sampling: Sampling,
    ) -> Result<Self> {
        let lr_grid = hr_grid.coarsened(factor)?;
        let k1 = gaussian_kernel_1d(&psf, hr_grid.pixel_size)?;
        let radius = psf.radius as isize;
        let (filter, offset) = match sampling {
            Sampling::Decimate => (k1, -radius),
            Sampling::BlockMean | Sampling::BlockSum => {
                let scale = match sampling {
                    Sampling::BlockMean => 1.0 / factor as f64,
                    _ => 1.0,
                };
                // h[t] = scale * sum_{p < L} k1[t - p]
                let mut h = vec![0.0; k1.len() + factor - 1];
                for p in 0..factor {
                    for (k, v) in k1.iter().enumerate() {
                        h[k + p] += scale * v;
                    }
                }
                (h, -radius)
            }
        };
        let rows = lattice_energy(&filter, offset, factor, hr_grid.height, lr_grid.height);
        let cols = lattice_energy(&filter, offset, factor, hr_grid.width, lr_grid.width);
        let mut column_norms = Vec::with_capacity(hr_grid.len());
        for a in &rows {
            column_norms.extend(cols.iter().map(|b| (a * b).sqrt()));
        }
        Ok(Self {
            hr_grid,
            lr_grid,
            factor,
            psf,
            sampling,
            filter,
            offset,
            column_norms,
            lipschitz: OnceLock::new(),
        })
    }

    pub fn hr_grid(&self) -> &ImageGrid {
        &self.hr_grid
    }

    pub fn lr_grid(&self) -> &ImageGrid {
        &self.lr_grid
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn psf(&self) -> &PsfModel {
        &self.psf
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    /// `||c_i||` for every fine-grid pixel, row-major.
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// Cached upper bound on `||A||^2`; computed by power iteration on first use.
    pub fn lipschitz(&self) -> Result<f64> {
        if let Some(v) = self.lipschitz.get() {
            return Ok(*v);
        }
        let v = crate::cel0::lipschitz_estimate(self)?;
        Ok(*self.lipschitz.get_or_init(|| v))
    }

    pub fn apply_forward(&self, x: &Image) -> Result<Image> {
        self.hr_grid
            .check_same(x.grid(), "forward operator input")?;
        let mut out = vec![0.0; self.lr_grid.len()];
        self.forward_into(x.values(), &mut out);
        Ok(Image::from_vec_unchecked(self.lr_grid, out))
    }

    pub fn apply_adjoint(&self, y: &Image) -> Result<Image> {
        self.lr_grid
            .check_same(y.grid(), "adjoint operator input")?;
        let mut out = vec![0.0; self.hr_grid.len()];
        self.adjoint_into(y.values(), &mut out);
        Ok(Image::from_vec_unchecked(self.hr_grid, out))
    }

    /// `out = A x` on raw row-major buffers.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let (n_w, n_h) = (self.hr_grid.width, self.hr_grid.height);
        let (m_w, m_h) = (self.lr_grid.width, self.lr_grid.height);
        debug_assert_eq!(x.len(), n_w * n_h);
        debug_assert_eq!(out.len(), m_w * m_h);
        // Rows first: u[i, c] = sum_t h[t] x[L i + t, c].
        // Iterates are usually sparse, so all-zero rows are skipped.
        let live: Vec<bool> = x
            .chunks_exact(n_w)
            .map(|r| r.iter().any(|v| *v != 0.0))
            .collect();
        let mut u = vec![0.0; m_h * n_w];
        let mut u_live = vec![false; m_h];
        for i in 0..m_h {
            let dst = &mut u[i * n_w..(i + 1) * n_w];
            for (row, h) in self.taps(i, n_h) {
                if live[row] {
                    axpy(h, &x[row * n_w..(row + 1) * n_w], dst);
                    u_live[i] = true;
                }
            }
        }
        // Then columns: out[i, j] = sum_s h[s] u[i, L j + s].
        let (lo, hi) = self.tap_range(m_w, n_w);
        for i in 0..m_h {
            let dst = &mut out[i * m_w..(i + 1) * m_w];
            if !u_live[i] {
                dst.iter_mut().for_each(|o| *o = 0.0);
                continue;
            }
            let src = &u[i * n_w..(i + 1) * n_w];
            for (j, o) in dst.iter_mut().enumerate() {
                *o = if j >= lo && j < hi {
                    let start = (self.factor * j) as isize + self.offset;
                    dot(
                        &self.filter,
                        &src[start as usize..start as usize + self.filter.len()],
                    )
                } else {
                    self.taps(j, n_w).map(|(c, h)| h * src[c]).sum()
                };
            }
        }
    }

    /// `out = A^T y` on raw row-major buffers.
    pub fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (n_w, n_h) = (self.hr_grid.width, self.hr_grid.height);
        let (m_w, m_h) = (self.lr_grid.width, self.lr_grid.height);
        debug_assert_eq!(y.len(), m_w * m_h);
        debug_assert_eq!(out.len(), n_w * n_h);
        let mut v = vec![0.0; m_h * n_w];
        let mut v_live = vec![false; m_h];
        let (lo, hi) = self.tap_range(m_w, n_w);
        for i in 0..m_h {
            let dst = &mut v[i * n_w..(i + 1) * n_w];
            for j in 0..m_w {
                let yij = y[i * m_w + j];
                if yij == 0.0 {
                    continue;
                }
                v_live[i] = true;
                if j >= lo && j < hi {
                    let start = ((self.factor * j) as isize + self.offset) as usize;
                    axpy(
                        yij,
                        &self.filter,
                        &mut dst[start..start + self.filter.len()],
                    );
                } else {
                    for (c, h) in self.taps(j, n_w) {
                        dst[c] += h * yij;
                    }
                }
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in (0..m_h).filter(|&i| v_live[i]) {
            let src = &v[i * n_w..(i + 1) * n_w];
            for (row, h) in self.taps(i, n_h) {
                axpy(h, src, &mut out[row * n_w..(row + 1) * n_w]);
            }
        }
    }

    /// Column `p` of the one-dimensional sampled blur along an axis with `m`
    /// coarse samples: returns the first coarse index and the weights.
    pub(crate) fn axis_column(&self, p: usize, m: usize) -> (usize, Vec<f64>) {
        let len = self.filter.len() as isize;
        let f = self.factor as isize;
        let rel = p as isize - self.offset;
        // coarse i contributes when 0 <= rel - f*i < len
        let lo = ((rel - len + 1).max(0) + f - 1) / f;
        let hi = (rel.div_euclid(f) + 1).min(m as isize);
        let lo = lo.max(0);
        if hi <= lo {
            return (0, Vec::new());
        }
        let weights = (lo..hi)
            .map(|i| self.filter[(rel - f * i) as usize])
            .collect();
        (lo as usize, weights)
    }

    /// Coarse indices `lo..hi` whose whole filter support lies inside `0..n`.
    fn tap_range(&self, m: usize, n: usize) -> (usize, usize) {
        let len = self.filter.len() as isize;
        let f = self.factor as isize;
        let lo = if self.offset >= 0 {
            0
        } else {
            (-self.offset + f - 1) / f
        };
        let last = n as isize - len - self.offset;
        let hi = if last < 0 {
            0
        } else {
            (last / f + 1).min(m as isize)
        };
        (lo as usize, (hi as usize).max(lo as usize))
    }

    /// Fine-grid indices and filter weights contributing to coarse index `i`
    /// along an axis of length `n`.
    fn taps(&self, i: usize, n: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let base = (self.factor * i) as isize + self.offset;
        self.filter.iter().enumerate().filter_map(move |(k, &h)| {
            let p = base + k as isize;
            (p >= 0 && (p as usize) < n).then_some((p as usize, h))
        })
    }
}

/// Column norms for an operator specification, without keeping the operator.
pub fn column_norms(hr_grid: ImageGrid, factor: usize, psf: PsfModel) -> Result<Vec<f64>> {
    Ok(ForwardOperator::new(hr_grid, factor, psf)?.column_norms)
}

fn lattice_energy(filter: &[f64], offset: isize, factor: usize, n: usize, m: usize) -> Vec<f64> {
    let mut a = vec![0.0; n];
    for i in 0..m {
        let base = (factor * i) as isize + offset;
        for (k, h) in filter.iter().enumerate() {
            let p = base + k as isize;
            if p >= 0 && (p as usize) < n {
                a[p as usize] += h * h;
            }
        }
    }
    a
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
