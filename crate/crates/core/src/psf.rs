//! Isotropic Gaussian point spread function and its discrete kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `FWHM = 2 sqrt(2 ln 2) sigma` for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

pub fn fwhm_from_sigma(sigma: f64) -> f64 {
    sigma * FWHM_PER_SIGMA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfModel {
    /// Standard deviation in nm.
    pub sigma_nm: f64,
    /// Truncation radius in (high-resolution) pixels.
    pub radius: usize,
}

impl PsfModel {
    pub fn new(sigma_nm: f64, radius: usize) -> Result<Self> {
        let psf = Self { sigma_nm, radius };
        psf.validate()?;
        Ok(psf)
    }

    /// PSF truncated at `ceil(4 sigma / pixel_size)` pixels.
    pub fn with_default_radius(sigma_nm: f64, pixel_size: f64) -> Result<Self> {
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::invalid(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        let radius = (4.0 * sigma_nm / pixel_size).ceil().max(1.0) as usize;
        Self::new(sigma_nm, radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_nm.is_finite() && self.sigma_nm > 0.0) {
            return Err(Error::invalid(format!(
                "PSF sigma must be positive, got {}",
                self.sigma_nm
            )));
        }
        if self.radius < 1 {
            return Err(Error::invalid("PSF truncation radius must be >= 1"));
        }
        Ok(())
    }

    pub fn fwhm_nm(&self) -> f64 {
        fwhm_from_sigma(self.sigma_nm)
    }
}

/// Square kernel of side `2 * radius + 1`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    pub radius: usize,
    pub values: Vec<f64>,
}

impl Kernel2d {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Entry at offset `(dr, dc)` from the centre.
    pub fn at(&self, dr: isize, dc: isize) -> f64 {
        let r = self.radius as isize;
        if dr.abs() > r || dc.abs() > r {
            return 0.0;
        }
        self.values[((dr + r) as usize) * self.side() + (dc + r) as usize]
    }
}

/// Gaussian sampled at pixel centres on the `(2r+1)^2` square, renormalised to
/// unit sum.
pub fn gaussian_kernel(psf: &PsfModel, pixel_size: f64) -> Result<Kernel2d> {
    psf.validate()?;
    check_pixel(pixel_size)?;
    let r = psf.radius as isize;
    let s = psf.sigma_nm / pixel_size;
    let mut values = Vec::with_capacity((2 * psf.radius + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            values.push((-d2 / (2.0 * s * s)).exp());
        }
    }
    normalize(&mut values)?;
    Ok(Kernel2d {
        radius: psf.radius,
        values,
    })
}

/// One-dimensional factor of [`gaussian_kernel`]: the 2D kernel equals the
/// outer product of this vector with itself.
pub fn gaussian_kernel_1d(psf: &PsfModel, pixel_size: f64) -> Result<Vec<f64>> {
    psf.validate()?;
    check_pixel(pixel_size)?;
    let r = psf.radius as isize;
    let s = psf.sigma_nm / pixel_size;
    let mut values: Vec<f64> = (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * s * s)).exp())
        .collect();
    normalize(&mut values)?;
    Ok(values)
}

fn check_pixel(pixel_size: f64) -> Result<()> {
    if pixel_size.is_finite() && pixel_size > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "pixel size must be positive, got {pixel_size}"
        )))
    }
}

fn normalize(values: &mut [f64]) -> Result<()> {
    let total: f64 = values.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::invalid("PSF kernel has zero mass"));
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(())
}
