use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImageGrid};
use crate::noise::{derive_seed, noise_for_target_snr, NoiseModel};
use crate::operator::{ForwardOperator, Sampling};
use crate::psf::{sigma_from_fwhm, PsfModel};

use super::emitter::{render_emitters_to_hr, Emitter, EmitterList};

/// PSF width of the built-in scenarios.
pub const SCENARIO_FWHM_NM: f64 = 258.21;

const SCENARIO_SIDE: usize = 512;
const SCENARIO_PIXEL_NM: f64 = 25.0;
const SCENARIO_FACTOR: usize = 4;
/// 0-based index of the 256th row/column.
const CENTER_INDEX: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    Test1a,
    Test2a,
    Test3a,
    Custom(String),
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "test1a" => Ok(ScenarioName::Test1a),
            "test2a" => Ok(ScenarioName::Test2a),
            "test3a" => Ok(ScenarioName::Test3a),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioName::Test1a => f.write_str("Test1a"),
            ScenarioName::Test2a => f.write_str("Test2a"),
            ScenarioName::Test3a => f.write_str("Test3a"),
            ScenarioName::Custom(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    /// High-resolution field of view.
    pub fov: ImageGrid,
    pub emitters: EmitterList,
    pub psf: PsfModel,
    pub factor: usize,
    pub snr_db: f64,
    pub sampling: Sampling,
    /// Intensity used to calibrate the noise level when the frame has no
    /// signal at all.
    pub reference_intensity: f64,
}

impl ScenarioSpec {
    pub fn operator(&self) -> Result<ForwardOperator> {
        ForwardOperator::with_sampling(self.fov, self.factor, self.psf, self.sampling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub intensity: f64,
    pub snr_db: f64,
    /// Vertical centre of the Test1a/Test2a pair. Defaults to the boundary
    /// between the 256th and 257th rows, which puts both emitters on pixel
    /// centres.
    pub pair_center_y_nm: Option<f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            intensity: 1000.0,
            snr_db: 15.0,
            pair_center_y_nm: None,
        }
    }
}

pub fn make_scenario(name: &str) -> Result<ScenarioSpec> {
    make_scenario_with(name.parse()?, &ScenarioOptions::default())
}

/// Built-in geometries on a 512x512, 25 nm grid with `L = 4` and a PSF of
/// FWHM 258.21 nm:
///
/// * `Test1a` / `Test2a`: two emitters on the 256th column, 25 / 75 nm apart.
/// * `Test3a`: four emitters on a 125 nm circle, two on the 256th column and
///   two on the 256th row.
pub fn make_scenario_with(name: ScenarioName, opts: &ScenarioOptions) -> Result<ScenarioSpec> {
    let fov = ImageGrid::square(SCENARIO_SIDE, SCENARIO_PIXEL_NM)?;
    let sigma = sigma_from_fwhm(SCENARIO_FWHM_NM);
    let psf = PsfModel::with_default_radius(sigma, SCENARIO_PIXEL_NM)?;
    let (cx, cy) = fov.pixel_center(CENTER_INDEX, CENTER_INDEX);
    let i = opts.intensity;
    let pair = |sep: f64| {
        let yc = opts
            .pair_center_y_nm
            .unwrap_or((CENTER_INDEX + 1) as f64 * SCENARIO_PIXEL_NM);
        vec![
            Emitter::new(cx, yc - sep / 2.0, i),
            Emitter::new(cx, yc + sep / 2.0, i),
        ]
    };
    let emitters = match name {
        ScenarioName::Test1a => pair(25.0),
        ScenarioName::Test2a => pair(75.0),
        ScenarioName::Test3a => {
            let r = 125.0;
            vec![
                Emitter::new(cx, cy - r, i),
                Emitter::new(cx, cy + r, i),
                Emitter::new(cx - r, cy, i),
                Emitter::new(cx + r, cy, i),
            ]
        }
        ScenarioName::Custom(other) => return Err(Error::UnknownScenario(other)),
    };
    Ok(ScenarioSpec {
        name,
        fov,
        emitters: EmitterList::new(1, emitters)?,
        psf,
        factor: SCENARIO_FACTOR,
        snr_db: opts.snr_db,
        sampling: Sampling::Decimate,
        reference_intensity: i,
    })
}

#[derive(Debug, Clone)]
pub struct SimulatedFrame {
    pub frame_id: u32,
    pub hr_truth: Image,
    pub lr_clean: Image,
    pub lr: Image,
    pub noise: NoiseModel,
}

/// Noise level giving `snr_db` for a lone emitter of `intensity` at the
/// centre of the field, using the expected noise energy `n sigma^2`. Used for
/// frames without any signal.
pub fn reference_noise_sigma(op: &ForwardOperator, intensity: f64, snr_db: f64) -> Result<f64> {
    let grid = op.hr_grid();
    let mut x = Image::zeros(*grid);
    x.set(grid.height / 2, grid.width / 2, intensity);
    let energy = op.apply_forward(&x)?.norm_sq();
    let n = op.lr_grid().len() as f64;
    Ok((energy / (n * 10f64.powf(snr_db / 10.0))).sqrt())
}

fn simulate_one(
    op: &ForwardOperator,
    emitters: &EmitterList,
    snr_db: f64,
    reference_intensity: f64,
    seed: u64,
) -> Result<SimulatedFrame> {
    let hr_truth = render_emitters_to_hr(emitters, op.hr_grid())?;
    let lr_clean = op.apply_forward(&hr_truth)?;
    let frame_seed = derive_seed(seed, emitters.frame_id as u64);
    let (noise, lr) = if lr_clean.norm_sq() > 0.0 {
        noise_for_target_snr(&lr_clean, snr_db, frame_seed)?
    } else {
        let sigma = reference_noise_sigma(op, reference_intensity, snr_db)?;
        let noise = NoiseModel::new(sigma, frame_seed)?;
        (noise, crate::noise::add_gaussian_noise(&lr_clean, &noise))
    };
    Ok(SimulatedFrame {
        frame_id: emitters.frame_id,
        hr_truth,
        lr_clean,
        lr,
        noise,
    })
}

/// Render, blur, downsample and corrupt one scenario frame. The noise is
/// rescaled so the frame's SNR equals `spec.snr_db`.
pub fn simulate_frame(spec: &ScenarioSpec, seed: u64) -> Result<SimulatedFrame> {
    let op = spec.operator()?;
    simulate_one(
        &op,
        &spec.emitters,
        spec.snr_db,
        spec.reference_intensity,
        seed,
    )
}

/// [`simulate_frame`] for a stack of frames sharing one operator. Frame `f`
/// draws its noise from `derive_seed(seed, f)`, so the result does not depend
/// on scheduling.
pub fn simulate_stack(
    frames: &[EmitterList],
    op: &ForwardOperator,
    snr_db: f64,
    reference_intensity: f64,
    seed: u64,
) -> Result<Vec<SimulatedFrame>> {
    frames
        .par_iter()
        .map(|f| simulate_one(op, f, snr_db, reference_intensity, seed))
        .collect()
}
