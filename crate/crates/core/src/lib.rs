//! Tools for high-density single-molecule localization microscopy.
//!
//! * [`operator`]: the Gaussian blur and downsampling image-formation model.
//! * [`simulate`]: ground-truth emitters, synthetic frames, training patches
//!   and the built-in two/four-emitter scenarios.
//! * [`cel0`]: the CEL0 penalty and its iteratively reweighted l1 solver.
//! * [`eval`]: emitter extraction, tolerance matching and Jaccard scores.
//! * [`io`] and [`pipeline`]: file formats and end-to-end runs.

pub mod cel0;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod noise;
pub mod operator;
pub mod pipeline;
pub mod psf;
pub mod reconstruct;
pub mod render;
pub mod simulate;

pub use error::{Error, Result};
pub use image::{nn_upsample, Image, ImageGrid, ImageStack};
pub use noise::{add_gaussian_noise, noise_for_target_snr, snr_db, NoiseModel, Snr};
pub use operator::{ForwardOperator, Sampling};
pub use psf::{gaussian_kernel, PsfModel};
