use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{nn_upsample, Image, ImageGrid};
use crate::noise::{
    add_gaussian_noise, derive_seed, noise_for_target_snr, rng_from_seed, NoiseModel,
};
use crate::operator::ForwardOperator;
use crate::psf::PsfModel;

use super::emitter::{render_emitters_to_hr, Emitter, EmitterList};
use super::scenario::reference_noise_sigma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Poisson-distributed count with mean `density * area`.
    Poisson,
    /// Exactly `round(density * area)` emitters per image.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Emitters per square micrometre.
    pub density: f64,
    pub n_images: usize,
    /// Side of each low-resolution image, in pixels.
    pub image_side: usize,
    pub lr_pixel_nm: f64,
    pub patch: usize,
    pub factor: usize,
    /// Number of patches.
    pub k: usize,
    pub sigma_nm: f64,
    /// Mean SNR; each patch draws its own target uniformly in
    /// `snr_db +- snr_jitter_db`.
    pub snr_db: f64,
    pub snr_jitter_db: f64,
    pub intensity_range: (f64, f64),
    pub count_mode: CountMode,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            density: 6.0,
            n_images: 20,
            image_side: 64,
            lr_pixel_nm: 100.0,
            patch: 26,
            factor: 4,
            k: 10_000,
            sigma_nm: 109.65,
            snr_db: 15.0,
            snr_jitter_db: 3.0,
            intensity_range: (500.0, 1500.0),
            count_mode: CountMode::Poisson,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0
            || self.k == 0
            || self.patch == 0
            || self.factor == 0
            || self.image_side == 0
        {
            return Err(Error::invalid("training-set counts must be positive"));
        }
        if self.patch > self.image_side {
            return Err(Error::invalid(format!(
                "patch side {} exceeds image side {}",
                self.patch, self.image_side
            )));
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(Error::invalid(format!(
                "density must be >= 0, got {}",
                self.density
            )));
        }
        let (lo, hi) = self.intensity_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::invalid(format!("bad intensity range [{lo}, {hi}]")));
        }
        if !(self.snr_db.is_finite() && self.snr_jitter_db.is_finite() && self.snr_jitter_db >= 0.0)
        {
            return Err(Error::invalid(
                "SNR target and jitter must be finite, jitter >= 0",
            ));
        }
        Ok(())
    }

    /// Expected emitters per image, `density * area`.
    pub fn mean_emitters(&self) -> f64 {
        let side_um = self.image_side as f64 * self.lr_pixel_nm / 1000.0;
        self.density * side_um * side_um
    }

    pub fn hr_pixel_nm(&self) -> f64 {
        self.lr_pixel_nm / self.factor as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainingPair {
    /// Nearest-neighbour upsampled noisy patch.
    pub input: Image,
    /// Emitters of the patch projected on the fine grid.
    pub target: Image,
    pub image_index: usize,
    /// Top-left corner of the patch in low-resolution pixels `(row, col)`.
    pub origin: (usize, usize),
}

struct SourceImage {
    emitters: EmitterList,
    /// Fine-grid pixel of every emitter.
    pixels: Vec<(usize, usize)>,
    lr_clean: Image,
}

/// Lazily yields the patches of a training set. Patch `k` depends only on the
/// configuration and `k`.
pub struct TrainingSetGenerator {
    config: TrainingConfig,
    sources: Vec<SourceImage>,
    hr_patch_grid: ImageGrid,
    fallback_sigma: f64,
    next: usize,
}

const PATCH_STREAM: u64 = 0x7A7C_4E55;

impl TrainingSetGenerator {
    pub fn new(config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        let lr_grid = ImageGrid::square(config.image_side, config.lr_pixel_nm)?;
        let hr_grid = lr_grid.refined(config.factor)?;
        let psf = PsfModel::with_default_radius(config.sigma_nm, hr_grid.pixel_size)?;
        let op = ForwardOperator::new(hr_grid, config.factor, psf)?;
        let (fov_w, fov_h) = hr_grid.extent_nm();
        let mean = config.mean_emitters();
        let (lo, hi) = config.intensity_range;

        let mut sources = Vec::with_capacity(config.n_images);
        for g in 0..config.n_images {
            let mut rng = rng_from_seed(derive_seed(config.seed, g as u64));
            let count = match config.count_mode {
                CountMode::Fixed => mean.round() as usize,
                CountMode::Poisson if mean > 0.0 => Poisson::new(mean)
                    .map_err(|e| Error::invalid(e.to_string()))?
                    .sample(&mut rng) as usize,
                CountMode::Poisson => 0,
            };
            let emitters: Vec<Emitter> = (0..count)
                .map(|_| {
                    let x = rng.random::<f64>() * fov_w;
                    let y = rng.random::<f64>() * fov_h;
                    let intensity = if hi > lo {
                        rng.random_range(lo..hi)
                    } else {
                        lo
                    };
                    Emitter::new(x, y, intensity)
                })
                .collect();
            let list = EmitterList::new(g as u32 + 1, emitters)?;
            let pixels = list
                .emitters
                .iter()
                .map(|e| {
                    hr_grid
                        .pixel_of(e.x_nm, e.y_nm)
                        .expect("drawn inside the field")
                })
                .collect();
            let hr = render_emitters_to_hr(&list, &hr_grid)?;
            let lr_clean = op.apply_forward(&hr)?;
            sources.push(SourceImage {
                emitters: list,
                pixels,
                lr_clean,
            });
        }

        // Patch-sized operator so the fallback noise matches a patch.
        let patch_hr = ImageGrid::square(config.patch * config.factor, hr_grid.pixel_size)?;
        let patch_op = ForwardOperator::new(patch_hr, config.factor, psf)?;
        let fallback_sigma = reference_noise_sigma(&patch_op, 0.5 * (lo + hi), config.snr_db)?;

        Ok(Self {
            hr_patch_grid: patch_hr,
            config,
            sources,
            fallback_sigma,
            next: 0,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    /// Ground-truth emitters of every source image.
    pub fn source_emitters(&self) -> impl Iterator<Item = &EmitterList> {
        self.sources.iter().map(|s| &s.emitters)
    }

    pub fn patch(&self, k: usize) -> Result<TrainingPair> {
        let cfg = &self.config;
        let mut rng = rng_from_seed(derive_seed(cfg.seed ^ PATCH_STREAM, k as u64));
        let image_index = rng.random_range(0..cfg.n_images);
        let span = cfg.image_side - cfg.patch;
        let pr = rng.random_range(0..=span);
        let pc = rng.random_range(0..=span);
        let target_db = if cfg.snr_jitter_db > 0.0 {
            rng.random_range(cfg.snr_db - cfg.snr_jitter_db..=cfg.snr_db + cfg.snr_jitter_db)
        } else {
            cfg.snr_db
        };
        let noise_seed = rng.random::<u64>();

        let src = &self.sources[image_index];
        let clean = src.lr_clean.crop(pr, pc, cfg.patch, cfg.patch)?;
        let noisy = if clean.norm_sq() > 0.0 {
            noise_for_target_snr(&clean, target_db, noise_seed)?.1
        } else {
            add_gaussian_noise(&clean, &NoiseModel::new(self.fallback_sigma, noise_seed)?)
        };
        let input = nn_upsample(&noisy, cfg.factor)?;

        let side = cfg.patch * cfg.factor;
        let (r0, c0) = (pr * cfg.factor, pc * cfg.factor);
        let mut target = Image::zeros(self.hr_patch_grid);
        for (e, &(r, c)) in src.emitters.emitters.iter().zip(&src.pixels) {
            if r >= r0 && r < r0 + side && c >= c0 && c < c0 + side {
                let v = target.get(r - r0, c - c0);
                target.set(r - r0, c - c0, v + e.intensity);
            }
        }
        Ok(TrainingPair {
            input,
            target,
            image_index,
            origin: (pr, pc),
        })
    }
}

impl Iterator for TrainingSetGenerator {
    type Item = Result<TrainingPair>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.config.k {
            return None;
        }
        let k = self.next;
        self.next += 1;
        Some(self.patch(k))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.config.k - self.next;
        (left, Some(left))
    }
}

/// Materialise the whole training set. Prefer [`TrainingSetGenerator`] for
/// large `k`.
pub fn gen_training_set(config: &TrainingConfig) -> Result<Vec<TrainingPair>> {
    TrainingSetGenerator::new(config.clone())?.collect()
}
