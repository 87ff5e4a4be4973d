//! Synthetic ground truth and acquisitions.

mod emitter;
mod scenario;
mod training;
mod tubulin;

pub use emitter::{render_emitters_to_hr, Emitter, EmitterList};
pub use scenario::{
    make_scenario, make_scenario_with, reference_noise_sigma, simulate_frame, simulate_stack,
    ScenarioName, ScenarioOptions, ScenarioSpec, SimulatedFrame, SCENARIO_FWHM_NM,
};
pub use training::{
    gen_training_set, CountMode, TrainingConfig, TrainingPair, TrainingSetGenerator,
};
pub use tubulin::{tubulin_stack, TubulinConfig};
