//! `smlm`: simulate, reconstruct and score single-molecule localization data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use smlm_core::cel0::SolverConfig;
use smlm_core::eval::{
    evaluate_stack, extract_emitters_with, Aggregation, ExtractConfig, MatchTolerance,
    StackEvalOptions,
};
use smlm_core::io::{
    read_emitters, read_stack, write_emitters, write_json, write_stack, StackWriter,
};
use smlm_core::operator::{column_norms, ForwardOperator, Sampling};
use smlm_core::pipeline::{run_pipeline, PipelineConfig};
use smlm_core::psf::PsfModel;
use smlm_core::reconstruct::{
    operator_for_lr, parse_lambda_grid, reconstruct_stack, tune_lambda, FrameScaling, TuningFrame,
};
use smlm_core::render::{render_stack, RenderMode};
use smlm_core::simulate::{
    make_scenario_with, simulate_stack, tubulin_stack, CountMode, EmitterList, ScenarioOptions,
    TrainingConfig, TrainingSetGenerator, TubulinConfig,
};
use smlm_core::{snr_db, Error, ImageGrid, ImageStack, Result, Snr};

#[derive(Parser)]
#[command(
    name = "smlm",
    version,
    about = "CEL0 super-resolution toolkit for SMLM frames"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario or a filament stack.
    Simulate(SimulateArgs),
    /// Generate training patches for the network.
    TrainData(TrainDataArgs),
    /// Reconstruct a low-resolution stack with CEL0.
    SolveCel0(SolveArgs),
    /// Score estimated emitters against ground truth.
    Eval(EvalArgs),
    /// Sum or binarize a stack into one image.
    Render(RenderArgs),
    /// Dump the operator column norms as JSON.
    PsfNorms(PsfNormsArgs),
    /// Measure the SNR of a noisy stack against its clean version.
    Snr(SnrArgs),
    /// Run simulate, solve, eval and render from a JSON config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Test1a, Test2a, Test3a or tubulin.
    #[arg(long)]
    scenario: String,
    #[arg(long = "snr-db", default_value_t = 15.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Noise realisations (scenarios) or frames (tubulin).
    #[arg(long, default_value_t = 1)]
    frames: u32,
    /// Mean emitters per frame for the tubulin stack.
    #[arg(long = "emitters-per-frame", default_value_t = 60.0)]
    emitters_per_frame: f64,
    /// Writes <prefix>_lr.raw, <prefix>_hr.raw and <prefix>_gt.csv.
    #[arg(long = "out-prefix")]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct TrainDataArgs {
    #[arg(long, default_value_t = 10_000)]
    k: usize,
    /// Emitters per square micrometre.
    #[arg(long, default_value_t = 6.0)]
    density: f64,
    /// Patch side in low-resolution pixels.
    #[arg(long, default_value_t = 26)]
    patch: usize,
    #[arg(long = "L", default_value_t = 4)]
    factor: usize,
    #[arg(long = "sigma-nm", default_value_t = 109.65)]
    sigma_nm: f64,
    #[arg(long = "snr-db", default_value_t = 15.0)]
    snr_db: f64,
    #[arg(long = "snr-jitter-db", default_value_t = 3.0)]
    snr_jitter_db: f64,
    #[arg(long, default_value_t = 20)]
    images: usize,
    #[arg(long = "image-px", default_value_t = 64)]
    image_px: usize,
    #[arg(long = "pixel-nm", default_value_t = 100.0)]
    pixel_nm: f64,
    /// Emitter count per image: poisson or fixed.
    #[arg(long, default_value = "poisson")]
    count: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.031)]
    lambda: f64,
    #[arg(long = "L", default_value_t = 4)]
    factor: usize,
    #[arg(long = "sigma-nm", default_value_t = 109.65)]
    sigma_nm: f64,
    #[arg(long, default_value_t = 40)]
    outer: usize,
    #[arg(long, default_value_t = 200)]
    inner: usize,
    #[arg(long = "outer-tol", default_value_t = 1e-6)]
    outer_tol: f64,
    #[arg(long = "inner-tol", default_value_t = 1e-8)]
    inner_tol: f64,
    /// Frame scaling before solving: peak or none.
    #[arg(long, default_value = "peak")]
    scaling: String,
    /// lo:hi:n; picks the lambda with the best Jaccard at delta = 2.
    #[arg(long = "lambda-grid", requires = "gt")]
    lambda_grid: Option<String>,
    /// Ground-truth CSV for the grid search.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Grid-search report (default: <out>.scan.json).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Estimated emitters as CSV.
    #[arg(
        long,
        conflicts_with = "est_stack",
        required_unless_present = "est_stack"
    )]
    est: Option<PathBuf>,
    /// Reconstructed fine-grid stack; emitters are extracted from it.
    #[arg(long = "est-stack")]
    est_stack: Option<PathBuf>,
    #[arg(long = "pixel-nm", default_value_t = 25.0)]
    pixel_nm: f64,
    /// Comma-separated tolerances in fine-grid pixels.
    #[arg(long, default_value = "2,4,6", value_delimiter = ',')]
    delta: Vec<f64>,
    /// Fine-grid size WxH (or N for square), needed for true negatives with --est.
    #[arg(long = "grid-px")]
    grid_px: Option<String>,
    /// Number of frames; ids outside 1..=N are rejected.
    #[arg(long)]
    frames: Option<u32>,
    /// Average per-frame ratios instead of summing counts.
    #[arg(long = "macro")]
    macro_avg: bool,
    #[arg(long = "threshold-rel", default_value_t = 0.1)]
    threshold_rel: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "sum")]
    mode: String,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PsfNormsArgs {
    /// Fine-grid width in pixels.
    #[arg(long, default_value_t = 104)]
    width: usize,
    /// Fine-grid height in pixels (default: width).
    #[arg(long)]
    height: Option<usize>,
    /// Fine-grid pixel size.
    #[arg(long = "pixel-nm", default_value_t = 25.0)]
    pixel_nm: f64,
    #[arg(long = "L", default_value_t = 4)]
    factor: usize,
    #[arg(long = "sigma-nm", default_value_t = 109.65)]
    sigma_nm: f64,
    #[arg(long, default_value = "decimate")]
    sampling: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SnrArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noisy: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::TrainData(a) => train_data(a),
        Command::SolveCel0(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
        Command::PsfNorms(a) => psf_norms(a),
        Command::Snr(a) => snr(a),
        Command::Pipeline(a) => pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPath(path.to_path_buf()))
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.frames == 0 {
        return Err(Error::InvalidParameter("--frames must be >= 1".into()));
    }
    let (op, lists, reference) = if a.scenario.eq_ignore_ascii_case("tubulin") {
        let cfg = TubulinConfig {
            frames: a.frames as usize,
            emitters_per_frame: a.emitters_per_frame,
            seed: a.seed,
            ..Default::default()
        };
        let (grid, lists) = tubulin_stack(&cfg)?;
        let psf = PsfModel::with_default_radius(109.65, grid.pixel_size)?;
        let reference = 0.5 * (cfg.intensity_range.0 + cfg.intensity_range.1);
        (ForwardOperator::new(grid, 4, psf)?, lists, reference)
    } else {
        let opts = ScenarioOptions {
            snr_db: a.snr_db,
            ..Default::default()
        };
        let spec = make_scenario_with(a.scenario.parse()?, &opts)?;
        let lists = (1..=a.frames)
            .map(|f| EmitterList::new(f, spec.emitters.emitters.clone()))
            .collect::<Result<Vec<_>>>()?;
        (spec.operator()?, lists, spec.reference_intensity)
    };
    let frames = simulate_stack(&lists, &op, a.snr_db, reference, a.seed)?;
    let lr = ImageStack::new(*op.lr_grid(), frames.iter().map(|f| f.lr.clone()).collect())?;
    let clean = ImageStack::new(
        *op.lr_grid(),
        frames.iter().map(|f| f.lr_clean.clone()).collect(),
    )?;
    let hr = ImageStack::new(
        *op.hr_grid(),
        frames.into_iter().map(|f| f.hr_truth).collect(),
    )?;
    write_stack(with_suffix(&a.out_prefix, "_lr.raw"), &lr)?;
    write_stack(with_suffix(&a.out_prefix, "_clean.raw"), &clean)?;
    write_stack(with_suffix(&a.out_prefix, "_hr.raw"), &hr)?;
    write_emitters(with_suffix(&a.out_prefix, "_gt.csv"), &lists)?;
    Ok(())
}

fn train_data(a: TrainDataArgs) -> Result<()> {
    let count_mode = match a.count.to_ascii_lowercase().as_str() {
        "poisson" => CountMode::Poisson,
        "fixed" => CountMode::Fixed,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown count mode '{other}'"
            )))
        }
    };
    let cfg = TrainingConfig {
        density: a.density,
        n_images: a.images,
        image_side: a.image_px,
        lr_pixel_nm: a.pixel_nm,
        patch: a.patch,
        factor: a.factor,
        k: a.k,
        sigma_nm: a.sigma_nm,
        snr_db: a.snr_db,
        snr_jitter_db: a.snr_jitter_db,
        count_mode,
        seed: a.seed,
        ..Default::default()
    };
    let generator = TrainingSetGenerator::new(cfg.clone())?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let side = cfg.patch * cfg.factor;
    let grid = ImageGrid::square(side, cfg.hr_pixel_nm())?;
    let mut inputs = StackWriter::create(a.out.join("inputs.raw"), grid)?;
    let mut targets = StackWriter::create(a.out.join("targets.raw"), grid)?;
    for pair in generator {
        let pair = pair?;
        inputs.push(&pair.input)?;
        targets.push(&pair.target)?;
    }
    inputs.finish()?;
    targets.finish()?;
    write_json(a.out.join("config.json"), &cfg)
}

fn solver_config(a: &SolveArgs) -> SolverConfig {
    SolverConfig {
        outer_iters: a.outer,
        inner_iters: a.inner,
        outer_tol: a.outer_tol,
        inner_tol: a.inner_tol,
        lipschitz: None,
    }
}

fn parse_scaling(s: &str) -> Result<FrameScaling> {
    match s.to_ascii_lowercase().as_str() {
        "peak" => Ok(FrameScaling::Peak),
        "none" => Ok(FrameScaling::None),
        other => Err(Error::InvalidParameter(format!(
            "unknown scaling '{other}' (peak or none)"
        ))),
    }
}

fn solve(a: SolveArgs) -> Result<()> {
    require(&a.input)?;
    if let Some(gt) = &a.gt {
        require(gt)?;
    }
    let solver = solver_config(&a);
    solver.validate()?;
    let scaling = parse_scaling(&a.scaling)?;
    let grid = a
        .lambda_grid
        .as_deref()
        .map(parse_lambda_grid)
        .transpose()?;
    let lr = read_stack(&a.input)?;
    let op = operator_for_lr(lr.grid, a.factor, a.sigma_nm)?;

    let lambda = match (grid, &a.gt) {
        (Some(grid), Some(gt)) => {
            let truth = read_emitters(gt)?;
            let empty: Vec<EmitterList> = (1..=lr.len() as u32)
                .map(|f| EmitterList::new(f, Vec::new()))
                .collect::<Result<_>>()?;
            let frames: Vec<TuningFrame<'_>> = lr
                .frames
                .iter()
                .enumerate()
                .map(|(i, y)| TuningFrame {
                    lr: y,
                    truth: truth
                        .iter()
                        .find(|l| l.frame_id == i as u32 + 1)
                        .unwrap_or(&empty[i]),
                })
                .collect();
            let report = tune_lambda(
                &frames,
                &op,
                &grid,
                &solver,
                scaling,
                &ExtractConfig::default(),
                MatchTolerance::new(2.0)?,
            )?;
            let path = a
                .report
                .clone()
                .unwrap_or_else(|| a.out.with_extension("scan.json"));
            write_json(&path, &report)?;
            eprintln!(
                "selected lambda {} (Jaccard {:.2}%)",
                report.best_lambda, report.best_jaccard
            );
            report.best_lambda
        }
        _ => a.lambda,
    };
    let (hr, _) = reconstruct_stack(&lr, &op, lambda, &solver, scaling)?;
    write_stack(&a.out, &hr)
}

fn parse_grid_px(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("--grid-px must be WxH or N, got '{s}'"));
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match nums[..] {
        [n] => Ok((n, n)),
        [w, h] => Ok((w, h)),
        _ => Err(bad()),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    require(&a.gt)?;
    let tolerances = a
        .delta
        .iter()
        .map(|d| MatchTolerance::new(*d))
        .collect::<Result<Vec<_>>>()?;
    let gt = read_emitters(&a.gt)?;
    let (est, hr_pixels) = match (&a.est, &a.est_stack) {
        (Some(csv), _) => {
            require(csv)?;
            let (w, h) = parse_grid_px(a.grid_px.as_deref().ok_or_else(|| {
                Error::InvalidParameter(
                    "--grid-px is required with --est (true negatives need the grid size)".into(),
                )
            })?)?;
            (read_emitters(csv)?, w * h)
        }
        (None, Some(stack)) => {
            require(stack)?;
            let hr = read_stack(stack)?;
            let cfg = ExtractConfig {
                threshold_rel: a.threshold_rel,
                ..Default::default()
            };
            let est = hr
                .frames
                .iter()
                .enumerate()
                .map(|(i, x)| extract_emitters_with(x, &cfg, i as u32 + 1))
                .collect();
            (est, hr.grid.len())
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "one of --est or --est-stack is required".into(),
            ))
        }
    };
    let report = evaluate_stack(
        &gt,
        &est,
        &StackEvalOptions {
            tolerances,
            pixel_size: a.pixel_nm,
            hr_pixels,
            n_frames: a.frames,
            aggregation: if a.macro_avg {
                Aggregation::Macro
            } else {
                Aggregation::Micro
            },
        },
    )?;
    for t in &report.tolerances {
        eprintln!(
            "delta {}: Jaccard {:.2}%  sensitivity {:.2}%  specificity {:.4}%",
            t.delta, t.jaccard, t.sensitivity, t.specificity
        );
    }
    write_json(&a.out, &report)
}

fn render(a: RenderArgs) -> Result<()> {
    require(&a.input)?;
    let mode: RenderMode = a.mode.parse()?;
    let stack = read_stack(&a.input)?;
    let image = render_stack(&stack, mode, a.threshold)?;
    write_stack(&a.out, &ImageStack::new(*image.grid(), vec![image])?)
}

#[derive(Serialize)]
struct NormsFile {
    width: usize,
    height: usize,
    pixel_size_nm: f64,
    factor: usize,
    sigma_nm: f64,
    sampling: String,
    /// Row-major `||c_i||` on the fine grid.
    norms: Vec<f64>,
}

fn psf_norms(a: PsfNormsArgs) -> Result<()> {
    let height = a.height.unwrap_or(a.width);
    let grid = ImageGrid::new(a.width, height, a.pixel_nm)?;
    let sampling: Sampling = a.sampling.parse()?;
    let psf = PsfModel::with_default_radius(a.sigma_nm, a.pixel_nm)?;
    let norms = if sampling == Sampling::Decimate {
        column_norms(grid, a.factor, psf)?
    } else {
        ForwardOperator::with_sampling(grid, a.factor, psf, sampling)?
            .column_norms()
            .to_vec()
    };
    write_json(
        &a.out,
        &NormsFile {
            width: a.width,
            height,
            pixel_size_nm: a.pixel_nm,
            factor: a.factor,
            sigma_nm: a.sigma_nm,
            sampling: a.sampling.to_ascii_lowercase(),
            norms,
        },
    )
}

#[derive(Serialize)]
struct SnrFrame {
    frame: u32,
    /// `null` when the noisy frame equals the clean one.
    snr_db: Option<f64>,
}

fn snr(a: SnrArgs) -> Result<()> {
    require(&a.clean)?;
    require(&a.noisy)?;
    let clean = read_stack(&a.clean)?;
    let noisy = read_stack(&a.noisy)?;
    if clean.len() != noisy.len() {
        return Err(Error::Dimension(format!(
            "clean stack has {} frames, noisy stack {}",
            clean.len(),
            noisy.len()
        )));
    }
    let mut rows = Vec::with_capacity(clean.len());
    for (i, (c, n)) in clean.frames.iter().zip(&noisy.frames).enumerate() {
        let value = snr_db(c, n)?;
        let frame = i as u32 + 1;
        match value {
            Snr::Db(v) => println!("frame {frame}: {v:.4} dB"),
            Snr::Infinite => println!("frame {frame}: inf"),
        }
        rows.push(SnrFrame {
            frame,
            snr_db: value.db(),
        });
    }
    match &a.out {
        Some(path) => write_json(path, &rows),
        None => Ok(()),
    }
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let config = PipelineConfig::load(&a.config)?;
    let summary = run_pipeline(&config)?;
    for run in &summary.runs {
        match run.jaccard {
            Some(j) => println!("{}: lambda {} Jaccard {:.2}%", run.label, run.lambda, j),
            None => println!("{}: lambda {}", run.label, run.lambda),
        }
    }
    println!("outputs in {}", summary.output_dir.display());
    Ok(())
}
