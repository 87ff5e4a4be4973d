//! Additive white Gaussian noise, SNR measurement and SNR calibration.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`) seeded through
//! `seed_from_u64`, so a seed reproduces the same field on every platform.
//! Streams that need independent sub-seeds (frames, patches) derive them with
//! [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `index` of a run seeded with `seed`:
/// `splitmix64(seed ^ splitmix64(index))`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_eta: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_eta: f64, seed: u64) -> Result<Self> {
        if !(sigma_eta.is_finite() && sigma_eta >= 0.0) {
            return Err(Error::invalid(format!(
                "noise standard deviation must be >= 0, got {sigma_eta}"
            )));
        }
        Ok(Self { sigma_eta, seed })
    }
}

fn standard_normal_field(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn add_gaussian_noise(y: &Image, noise: &NoiseModel) -> Image {
    if noise.sigma_eta == 0.0 {
        return y.clone();
    }
    let z = standard_normal_field(y.grid().len(), noise.seed);
    let values = y
        .values()
        .iter()
        .zip(&z)
        .map(|(v, e)| v + noise.sigma_eta * e)
        .collect();
    Image::from_vec_unchecked(*y.grid(), values)
}

/// Signal-to-noise ratio; a zero residual has no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Db(f64),
    Infinite,
}

impl Snr {
    pub fn db(self) -> Option<f64> {
        match self {
            Snr::Db(v) => Some(v),
            Snr::Infinite => None,
        }
    }
}

/// `10 log10(||clean||^2 / ||clean - noisy||^2)`.
pub fn snr_db(clean: &Image, noisy: &Image) -> Result<Snr> {
    clean.grid().check_same(noisy.grid(), "snr")?;
    let signal = clean.norm_sq();
    if signal == 0.0 {
        return Err(Error::invalid("SNR undefined for an all-zero clean image"));
    }
    let residual: f64 = clean
        .values()
        .iter()
        .zip(noisy.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if residual == 0.0 {
        return Ok(Snr::Infinite);
    }
    Ok(Snr::Db(10.0 * (signal / residual).log10()))
}

/// Corrupt `clean` with a seeded Gaussian realization rescaled so that the
/// measured SNR equals `target_db`.
pub fn noise_for_target_snr(
    clean: &Image,
    target_db: f64,
    seed: u64,
) -> Result<(NoiseModel, Image)> {
    if !target_db.is_finite() {
        return Err(Error::invalid(format!(
            "SNR target must be finite, got {target_db}"
        )));
    }
    let signal = clean.norm_sq();
    if signal == 0.0 {
        return Err(Error::invalid(
            "cannot calibrate noise against an all-zero image",
        ));
    }
    let z = standard_normal_field(clean.grid().len(), seed);
    let z_energy: f64 = z.iter().map(|v| v * v).sum();
    let sigma_eta = (signal / (10f64.powf(target_db / 10.0) * z_energy)).sqrt();
    let model = NoiseModel::new(sigma_eta, seed)?;
    let values = clean
        .values()
        .iter()
        .zip(&z)
        .map(|(v, e)| v + sigma_eta * e)
        .collect();
    Ok((model, Image::from_vec_unchecked(*clean.grid(), values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageGrid;

    fn ramp(n: usize) -> Image {
        let g = ImageGrid::square(n, 100.0).unwrap();
        Image::from_vec(g, (0..n * n).map(|i| (i % 7) as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let y = ramp(8);
        let out = add_gaussian_noise(&y, &NoiseModel::new(0.0, 3).unwrap());
        assert_eq!(out, y);
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn same_seed_same_field() {
        let y = ramp(16);
        let n = NoiseModel::new(0.5, 42).unwrap();
        let a = add_gaussian_noise(&y, &n);
        let b = add_gaussian_noise(&y, &n);
        assert_eq!(a.values(), b.values());
        let c = add_gaussian_noise(&y, &NoiseModel::new(0.5, 43).unwrap());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn sample_variance_matches_sigma() {
        let g = ImageGrid::square(512, 100.0).unwrap();
        let y = Image::zeros(g);
        let sigma = 1.7;
        let out = add_gaussian_noise(&y, &NoiseModel::new(sigma, 11).unwrap());
        let n = out.values().len() as f64;
        let mean = out.sum() / n;
        let var = out.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            (var - sigma * sigma).abs() / (sigma * sigma) < 0.05,
            "var = {var}"
        );
    }

    #[test]
    fn doubling_noise_costs_six_db() {
        let clean = ramp(32);
        let n1 = add_gaussian_noise(&clean, &NoiseModel::new(0.3, 5).unwrap());
        let n2 = add_gaussian_noise(&clean, &NoiseModel::new(0.6, 5).unwrap());
        let s1 = snr_db(&clean, &n1).unwrap().db().unwrap();
        let s2 = snr_db(&clean, &n2).unwrap().db().unwrap();
        assert!((s1 - s2 - 10.0 * 4f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn identical_images_have_infinite_snr() {
        let clean = ramp(4);
        assert_eq!(snr_db(&clean, &clean).unwrap(), Snr::Infinite);
        let zero = Image::zeros(*clean.grid());
        assert!(snr_db(&zero, &clean).is_err());
    }

    #[test]
    fn calibrated_noise_hits_target() {
        let clean = ramp(32);
        for target in [10.0, 12.0, 15.0] {
            let (model, noisy) = noise_for_target_snr(&clean, target, 9).unwrap();
            let got = snr_db(&clean, &noisy).unwrap().db().unwrap();
            assert!((got - target).abs() < 0.1);
            assert_eq!(add_gaussian_noise(&clean, &model), noisy);
        }
        let (low, _) = noise_for_target_snr(&clean, 10.0, 1).unwrap();
        let (high, _) = noise_for_target_snr(&clean, 15.0, 1).unwrap();
        assert!(low.sigma_eta > high.sigma_eta);
        assert!(noise_for_target_snr(&clean, f64::INFINITY, 1).is_err());
        assert!(noise_for_target_snr(&Image::zeros(*clean.grid()), 10.0, 1).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
