use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::noise::{derive_seed, rng_from_seed};

use super::emitter::{Emitter, EmitterList};

/// Filament-like ground truth: emitters scattered along a few smooth tubes,
/// a new random subset active in every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubulinConfig {
    pub side: usize,
    pub pixel_nm: f64,
    pub n_tubes: usize,
    pub frames: usize,
    /// Mean number of active emitters per frame (Poisson).
    pub emitters_per_frame: f64,
    /// Tube radius in nm; emitters are offset uniformly across the diameter.
    pub tube_radius_nm: f64,
    pub intensity_range: (f64, f64),
    pub seed: u64,
}

impl Default for TubulinConfig {
    fn default() -> Self {
        Self {
            side: 256,
            pixel_nm: 25.0,
            n_tubes: 8,
            frames: 10,
            emitters_per_frame: 60.0,
            tube_radius_nm: 15.0,
            intensity_range: (500.0, 1500.0),
            seed: 1,
        }
    }
}

type Point = (f64, f64);

/// Cubic Bezier through four control points.
struct Tube([Point; 4]);

impl Tube {
    fn at(&self, t: f64) -> (Point, Point) {
        let [p0, p1, p2, p3] = self.0;
        let u = 1.0 - t;
        let b = [u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t];
        let d = [
            -3.0 * u * u,
            3.0 * u * u - 6.0 * u * t,
            6.0 * u * t - 3.0 * t * t,
            3.0 * t * t,
        ];
        let pts = [p0, p1, p2, p3];
        let mut pos = (0.0, 0.0);
        let mut tan = (0.0, 0.0);
        for k in 0..4 {
            pos.0 += b[k] * pts[k].0;
            pos.1 += b[k] * pts[k].1;
            tan.0 += d[k] * pts[k].0;
            tan.1 += d[k] * pts[k].1;
        }
        (pos, tan)
    }
}

/// Returns the fine grid and one emitter list per frame (ids `1..=frames`).
pub fn tubulin_stack(config: &TubulinConfig) -> Result<(ImageGrid, Vec<EmitterList>)> {
    let grid = ImageGrid::square(config.side, config.pixel_nm)?;
    if config.n_tubes == 0 || config.frames == 0 {
        return Err(Error::invalid("need at least one tube and one frame"));
    }
    if !(config.emitters_per_frame.is_finite() && config.emitters_per_frame >= 0.0) {
        return Err(Error::invalid("emitters per frame must be >= 0"));
    }
    let (lo, hi) = config.intensity_range;
    if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid(format!("bad intensity range [{lo}, {hi}]")));
    }
    let (w, h) = grid.extent_nm();
    let margin = 0.05 * w.min(h);

    let mut rng = rng_from_seed(config.seed);
    let tubes: Vec<Tube> = (0..config.n_tubes)
        .map(|_| {
            let mut pt = || {
                (
                    rng.random_range(margin..w - margin),
                    rng.random_range(margin..h - margin),
                )
            };
            Tube([pt(), pt(), pt(), pt()])
        })
        .collect();

    let mut frames = Vec::with_capacity(config.frames);
    for f in 0..config.frames {
        let frame_id = f as u32 + 1;
        let mut rng = rng_from_seed(derive_seed(config.seed, frame_id as u64));
        let count = if config.emitters_per_frame > 0.0 {
            Poisson::new(config.emitters_per_frame)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let mut emitters = Vec::with_capacity(count);
        while emitters.len() < count {
            let tube = &tubes[rng.random_range(0..tubes.len())];
            let ((x, y), (tx, ty)) = tube.at(rng.random::<f64>());
            let norm = tx.hypot(ty).max(f64::MIN_POSITIVE);
            let off = rng.random_range(-config.tube_radius_nm..=config.tube_radius_nm);
            let (ex, ey) = (x - off * ty / norm, y + off * tx / norm);
            let intensity = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            if grid.pixel_of(ex, ey).is_some() {
                emitters.push(Emitter::new(ex, ey, intensity));
            }
        }
        frames.push(EmitterList::new(frame_id, emitters)?);
    }
    Ok((grid, frames))
}
