//! End-to-end runs driven by a JSON configuration: simulate (or load) a
//! stack, reconstruct it, extract and score emitters, render summaries and
//! record everything in a manifest.
//!
//! Outputs are assembled in `<output_dir>.partial` and moved into place only
//! when the whole run succeeded, so a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cel0::SolverConfig;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_stack, extract_emitters_with, Aggregation, ExtractConfig, MatchTolerance,
    MetricsReport, StackEvalOptions,
};
use crate::image::ImageStack;
use crate::io::{
    read_emitters, read_json, read_stack, write_emitters, write_json, write_stack, Manifest,
};
use crate::operator::ForwardOperator;
use crate::psf::{sigma_from_fwhm, PsfModel};
use crate::reconstruct::{
    lambda_grid, operator_for_lr, reconstruct_stack, tune_lambda, FrameScaling, FrameSolveSummary,
    TuningFrame, TuningReport,
};
use crate::render::{render_stack, RenderMode};
use crate::simulate::{
    make_scenario_with, simulate_stack, tubulin_stack, EmitterList, ScenarioName, ScenarioOptions,
    TubulinConfig,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// A built-in scenario, repeated over `frames` noise realisations.
    Scenario { name: String, frames: u32 },
    /// Filament-like random stack.
    Tubulin(TubulinConfig),
    /// An existing low-resolution stack, optionally with ground truth.
    Files {
        lr_stack: PathBuf,
        ground_truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed(f64),
    /// Log-spaced grid scored against the ground truth at `delta = 2`.
    Grid {
        lo: f64,
        hi: f64,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub source: Source,
    /// PSF standard deviation in nm.
    pub sigma_nm: f64,
    /// Downsampling factor between the fine and the camera grid.
    pub factor: usize,
    /// Target SNRs in dB; one run each. Ignored for file sources.
    pub snr_db: Vec<f64>,
    pub solver: SolverConfig,
    pub lambda: LambdaChoice,
    pub scaling: FrameScaling,
    pub extract: ExtractConfig,
    /// Matching tolerances in fine-grid pixels.
    pub tolerances: Vec<f64>,
    pub aggregation: Aggregation,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source: Source::Scenario {
                name: "Test2a".into(),
                frames: 1,
            },
            sigma_nm: sigma_from_fwhm(258.21),
            factor: 4,
            snr_db: vec![15.0],
            solver: SolverConfig::default(),
            lambda: LambdaChoice::Grid {
                lo: 1e-3,
                hi: 1.0,
                n: 30,
            },
            scaling: FrameScaling::Peak,
            extract: ExtractConfig::default(),
            tolerances: vec![2.0, 4.0, 6.0],
            aggregation: Aggregation::Micro,
            seed: 7,
            output_dir: PathBuf::from("pipeline-out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        read_json(path)
    }

    /// Checks parameters and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        if self.factor < 1 {
            return Err(Error::invalid("factor must be >= 1"));
        }
        if !(self.sigma_nm.is_finite() && self.sigma_nm > 0.0) {
            return Err(Error::invalid(format!(
                "sigma_nm must be positive, got {}",
                self.sigma_nm
            )));
        }
        self.solver.validate()?;
        if self.tolerances.is_empty() {
            return Err(Error::invalid("at least one tolerance is required"));
        }
        for d in &self.tolerances {
            MatchTolerance::new(*d)?;
        }
        match self.lambda {
            LambdaChoice::Fixed(l) => {
                crate::cel0::Cel0Params::new(l)?;
            }
            LambdaChoice::Grid { lo, hi, n } => {
                lambda_grid(lo, hi, n)?;
            }
        }
        match &self.source {
            Source::Scenario { name, frames } => {
                name.parse::<ScenarioName>()?;
                if *frames == 0 {
                    return Err(Error::invalid("scenario frames must be >= 1"));
                }
            }
            Source::Tubulin(cfg) => {
                if cfg.side % self.factor != 0 {
                    return Err(Error::invalid(format!(
                        "tubulin side {} is not divisible by factor {}",
                        cfg.side, self.factor
                    )));
                }
            }
            Source::Files {
                lr_stack,
                ground_truth,
            } => {
                for p in std::iter::once(lr_stack).chain(ground_truth) {
                    if !p.exists() {
                        return Err(Error::MissingPath(p.clone()));
                    }
                }
                if ground_truth.is_none() && matches!(self.lambda, LambdaChoice::Grid { .. }) {
                    return Err(Error::invalid(
                        "a lambda grid needs ground truth to score against",
                    ));
                }
            }
        }
        if !matches!(self.source, Source::Files { .. }) {
            if self.snr_db.is_empty() {
                return Err(Error::invalid("at least one SNR target is required"));
            }
            if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
                return Err(Error::invalid(format!(
                    "SNR target must be finite, got {s}"
                )));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::invalid("output_dir must not be empty"));
        }
        if self.output_dir.exists() {
            let reusable = self.output_dir.is_dir()
                && (self.output_dir.join(MANIFEST_FILE).is_file()
                    || dir_is_empty(&self.output_dir)?);
            if !reusable {
                return Err(Error::invalid(format!(
                    "{} exists and is not an earlier pipeline output; refusing to overwrite",
                    self.output_dir.display()
                )));
            }
        }
        Ok(())
    }

    fn tolerances(&self) -> Vec<MatchTolerance> {
        self.tolerances
            .iter()
            .map(|d| MatchTolerance { delta: *d })
            .collect()
    }
}

fn dir_is_empty(dir: &Path) -> Result<bool> {
    Ok(fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .next()
        .is_none())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Sub-directory holding this run's files.
    pub label: String,
    pub lambda: f64,
    /// Jaccard index at the first tolerance, when ground truth is known.
    pub jaccard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub output_dir: PathBuf,
    pub runs: Vec<RunSummary>,
}

/// One observation stack to process.
struct RunInput {
    label: String,
    op: ForwardOperator,
    lr: ImageStack,
    truth: Option<Vec<EmitterList>>,
    hr_truth: Option<ImageStack>,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineSummary> {
    config.validate()?;
    let staging = staging_dir(&config.output_dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    match run_into(config, &staging) {
        Ok(runs) => {
            let out = &config.output_dir;
            if out.exists() {
                fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
            }
            fs::rename(&staging, out).map_err(|e| Error::io(out, e))?;
            Ok(PipelineSummary {
                output_dir: out.clone(),
                runs,
            })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn staging_dir(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".partial");
    out.with_file_name(name)
}

fn run_into(config: &PipelineConfig, dir: &Path) -> Result<Vec<RunSummary>> {
    let mut artifacts: Vec<String> = Vec::new();
    write_json(dir.join("config.json"), config)?;
    artifacts.push("config.json".into());

    let mut runs = Vec::new();
    for input in prepare_inputs(config)? {
        let (summary, files) = process(config, &input, dir)?;
        runs.push(summary);
        artifacts.extend(files);
    }
    write_json(dir.join("summary.json"), &runs)?;
    artifacts.push("summary.json".into());

    let parameters = serde_json::to_value(config).map_err(|e| Error::invalid(e.to_string()))?;
    let mut manifest = Manifest::new(vec![config.seed], parameters);
    artifacts.sort();
    for a in &artifacts {
        manifest.add(dir, a)?;
    }
    write_json(dir.join(MANIFEST_FILE), &manifest)?;
    Ok(runs)
}

fn snr_label(snr: f64) -> String {
    format!("snr{snr}").replace('-', "m")
}

fn prepare_inputs(config: &PipelineConfig) -> Result<Vec<RunInput>> {
    match &config.source {
        Source::Files {
            lr_stack,
            ground_truth,
        } => {
            let lr = read_stack(lr_stack)?;
            let op = operator_for_lr(lr.grid, config.factor, config.sigma_nm)?;
            let truth = ground_truth.as_ref().map(read_emitters).transpose()?;
            Ok(vec![RunInput {
                label: "input".into(),
                op,
                lr,
                truth,
                hr_truth: None,
            }])
        }
        Source::Scenario { name, frames } => {
            let scenario = make_scenario_with(name.parse()?, &ScenarioOptions::default())?;
            let psf = PsfModel::with_default_radius(config.sigma_nm, scenario.fov.pixel_size)?;
            let op = ForwardOperator::with_sampling(
                scenario.fov,
                config.factor,
                psf,
                scenario.sampling,
            )?;
            let lists: Vec<EmitterList> = (1..=*frames)
                .map(|f| EmitterList::new(f, scenario.emitters.emitters.clone()))
                .collect::<Result<_>>()?;
            simulated_runs(config, op, lists, scenario.reference_intensity)
        }
        Source::Tubulin(cfg) => {
            let (grid, lists) = tubulin_stack(cfg)?;
            let psf = PsfModel::with_default_radius(config.sigma_nm, grid.pixel_size)?;
            let op = ForwardOperator::new(grid, config.factor, psf)?;
            let reference = 0.5 * (cfg.intensity_range.0 + cfg.intensity_range.1);
            simulated_runs(config, op, lists, reference)
        }
    }
}

fn simulated_runs(
    config: &PipelineConfig,
    op: ForwardOperator,
    lists: Vec<EmitterList>,
    reference_intensity: f64,
) -> Result<Vec<RunInput>> {
    config
        .snr_db
        .iter()
        .map(|&snr| {
            let frames = simulate_stack(&lists, &op, snr, reference_intensity, config.seed)?;
            let lr = ImageStack::new(*op.lr_grid(), frames.iter().map(|f| f.lr.clone()).collect())?;
            let hr = ImageStack::new(
                *op.hr_grid(),
                frames.into_iter().map(|f| f.hr_truth).collect(),
            )?;
            Ok(RunInput {
                label: snr_label(snr),
                op: op.clone(),
                lr,
                truth: Some(lists.clone()),
                hr_truth: Some(hr),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SolverRecord<'a> {
    lambda: f64,
    frames: &'a [FrameSolveSummary],
}

fn process(
    config: &PipelineConfig,
    input: &RunInput,
    root: &Path,
) -> Result<(RunSummary, Vec<String>)> {
    let dir = root.join(&input.label);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str| files.push(format!("{}/{name}", input.label));

    write_stack(dir.join("lr.raw"), &input.lr)?;
    put("lr.raw");
    put("lr.json");
    if let Some(hr) = &input.hr_truth {
        write_stack(dir.join("hr_truth.raw"), hr)?;
        put("hr_truth.raw");
        put("hr_truth.json");
    }
    if let Some(truth) = &input.truth {
        write_emitters(dir.join("gt.csv"), truth)?;
        put("gt.csv");
    }

    let mut solver = config.solver;
    if solver.lipschitz.is_none() {
        solver.lipschitz = Some(input.op.lipschitz()?);
    }
    let lambda = match config.lambda {
        LambdaChoice::Fixed(l) => l,
        LambdaChoice::Grid { lo, hi, n } => {
            let truth = input
                .truth
                .as_ref()
                .ok_or_else(|| Error::invalid("a lambda grid needs ground truth"))?;
            let report = scan_lambda(
                &input.lr,
                truth,
                &input.op,
                &lambda_grid(lo, hi, n)?,
                &solver,
                config,
            )?;
            write_json(dir.join("lambda_scan.json"), &report)?;
            put("lambda_scan.json");
            report.best_lambda
        }
    };

    let (hr, summaries) = reconstruct_stack(&input.lr, &input.op, lambda, &solver, config.scaling)?;
    write_stack(dir.join("hr_estimate.raw"), &hr)?;
    put("hr_estimate.raw");
    put("hr_estimate.json");
    write_json(
        dir.join("solver.json"),
        &SolverRecord {
            lambda,
            frames: &summaries,
        },
    )?;
    put("solver.json");

    let est: Vec<EmitterList> = hr
        .frames
        .iter()
        .enumerate()
        .map(|(i, x)| extract_emitters_with(x, &config.extract, i as u32 + 1))
        .collect();
    write_emitters(dir.join("est.csv"), &est)?;
    put("est.csv");

    let mut jaccard = None;
    if let Some(truth) = &input.truth {
        let report = score(config, truth, &est, &input.op, hr.len() as u32)?;
        jaccard = report.tolerances.first().map(|t| t.jaccard);
        write_json(dir.join("report.json"), &report)?;
        put("report.json");
    }

    for (mode, name) in [
        (RenderMode::Sum, "render_sum"),
        (RenderMode::Binary, "render_binary"),
    ] {
        let image = render_stack(&hr, mode, 0.0)?;
        write_stack(
            dir.join(format!("{name}.raw")),
            &ImageStack::new(*image.grid(), vec![image])?,
        )?;
        put(&format!("{name}.raw"));
        put(&format!("{name}.json"));
    }

    Ok((
        RunSummary {
            label: input.label.clone(),
            lambda,
            jaccard,
        },
        files,
    ))
}

/// Score every lambda of `grid` on a whole stack at `delta = 2`.
pub fn scan_lambda(
    lr: &ImageStack,
    truth: &[EmitterList],
    op: &ForwardOperator,
    grid: &[f64],
    solver: &SolverConfig,
    config: &PipelineConfig,
) -> Result<TuningReport> {
    let empty: Vec<EmitterList> = (1..=lr.len() as u32)
        .map(|f| EmitterList::new(f, Vec::new()))
        .collect::<Result<_>>()?;
    let by_frame: Vec<&EmitterList> = (0..lr.len())
        .map(|i| {
            let id = i as u32 + 1;
            truth.iter().find(|l| l.frame_id == id).unwrap_or(&empty[i])
        })
        .collect();
    let frames: Vec<TuningFrame<'_>> = lr
        .frames
        .iter()
        .zip(by_frame)
        .map(|(lr, truth)| TuningFrame { lr, truth })
        .collect();
    tune_lambda(
        &frames,
        op,
        grid,
        solver,
        config.scaling,
        &config.extract,
        MatchTolerance { delta: 2.0 },
    )
}

fn score(
    config: &PipelineConfig,
    truth: &[EmitterList],
    est: &[EmitterList],
    op: &ForwardOperator,
    frames: u32,
) -> Result<MetricsReport> {
    evaluate_stack(
        truth,
        est,
        &StackEvalOptions {
            tolerances: config.tolerances(),
            pixel_size: op.hr_grid().pixel_size,
            hr_pixels: op.hr_grid().len(),
            n_frames: Some(frames),
            aggregation: config.aggregation,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PipelineConfig {
            source: Source::Files {
                lr_stack: "a.raw".into(),
                ground_truth: None,
            },
            lambda: LambdaChoice::Fixed(0.03),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.factor, 4);
    }

    #[test]
    fn missing_input_is_a_validation_error() {
        let cfg = PipelineConfig {
            source: Source::Files {
                lr_stack: "/definitely/not/here.raw".into(),
                ground_truth: None,
            },
            lambda: LambdaChoice::Fixed(0.03),
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::MissingPath(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn labels() {
        assert_eq!(snr_label(15.0), "snr15");
        assert_eq!(snr_label(12.5), "snr12.5");
        assert_eq!(
            staging_dir(Path::new("/tmp/out")),
            PathBuf::from("/tmp/out.partial")
        );
    }
}
