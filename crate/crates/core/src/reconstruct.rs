//! Frame-level CEL0 reconstruction and regularization-parameter sweeps.
//!
//! `lambda` is scale dependent: multiplying the data by `s` multiplies the
//! objective by `s^2`. With [`FrameScaling::Peak`] (the default) every frame
//! is divided by its maximum before solving and the solution multiplied back,
//! so one `lambda` grid over `[1e-3, 1]` fits frames of any brightness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cel0::{solve_cel0, Cel0Params, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::eval::{
    extract_emitters_with, match_emitters, metrics, ConfusionCounts, ExtractConfig, MatchTolerance,
};
use crate::image::{Image, ImageGrid, ImageStack};
use crate::operator::ForwardOperator;
use crate::psf::PsfModel;
use crate::simulate::EmitterList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameScaling {
    None,
    #[default]
    Peak,
}

/// Solve one frame; the reported solution is in the units of `y`, the
/// objective trace in the scaled units the solver saw.
pub fn reconstruct_frame(
    y: &Image,
    op: &ForwardOperator,
    lambda: f64,
    solver: &SolverConfig,
    scaling: FrameScaling,
) -> Result<SolveReport> {
    let params = Cel0Params::new(lambda)?;
    let scale = match scaling {
        FrameScaling::None => 1.0,
        FrameScaling::Peak => {
            let m = y.max();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    if scale == 1.0 {
        return solve_cel0(y, op, &params, solver, None);
    }
    let mut report = solve_cel0(&y.scaled(1.0 / scale), op, &params, solver, None)?;
    report.solution = report.solution.scaled(scale);
    Ok(report)
}

/// Operator whose coarse grid is `lr`, refined by `factor`, with a Gaussian
/// PSF of standard deviation `sigma_nm`.
pub fn operator_for_lr(lr: ImageGrid, factor: usize, sigma_nm: f64) -> Result<ForwardOperator> {
    let hr = lr.refined(factor)?;
    let psf = PsfModel::with_default_radius(sigma_nm, hr.pixel_size)?;
    ForwardOperator::new(hr, factor, psf)
}

/// Per-frame solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSolveSummary {
    pub frame: u32,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

/// Solve every frame of `stack` (frame ids `1..`) in parallel.
pub fn reconstruct_stack(
    stack: &ImageStack,
    op: &ForwardOperator,
    lambda: f64,
    solver: &SolverConfig,
    scaling: FrameScaling,
) -> Result<(ImageStack, Vec<FrameSolveSummary>)> {
    op.lr_grid().check_same(&stack.grid, "observation stack")?;
    let mut solver = *solver;
    if solver.lipschitz.is_none() {
        solver.lipschitz = Some(op.lipschitz()?);
    }
    let results: Vec<(Image, FrameSolveSummary)> = stack
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let frame = i as u32 + 1;
            let r = reconstruct_frame(y, op, lambda, &solver, scaling).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("frame {frame}: {m}")),
                other => other,
            })?;
            let summary = FrameSolveSummary {
                frame,
                outer_iterations: r.outer_iterations_used,
                inner_iterations: r.inner_iterations_total,
                converged: r.converged,
                final_objective: r.objective_trace.last().copied().unwrap_or(f64::NAN),
            };
            Ok((r.solution, summary))
        })
        .collect::<Result<_>>()?;
    let (frames, summaries) = results.into_iter().unzip();
    Ok((ImageStack::new(*op.hr_grid(), frames)?, summaries))
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn lambda_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(Error::invalid(format!("bad lambda grid {lo}:{hi}:{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Parse `lo:hi:n`, e.g. `1e-3:1:30`.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::invalid(format!("lambda grid must be lo:hi:n, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    lambda_grid(lo, hi, n)
}

pub const DEFAULT_LAMBDA_GRID: (f64, f64, usize) = (1e-3, 1.0, 30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub jaccard: f64,
    pub counts: ConfusionCounts,
    pub n_estimated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub delta: f64,
    pub frames: usize,
    pub scores: Vec<LambdaScore>,
    pub best_lambda: f64,
    pub best_jaccard: f64,
}

/// A frame to tune on: observation and its ground truth.
pub struct TuningFrame<'a> {
    pub lr: &'a Image,
    pub truth: &'a EmitterList,
}

/// Solve every frame for every `lambda`, score the extracted emitters at
/// tolerance `tol` (counts summed over frames) and pick the lambda with the
/// highest Jaccard index; ties go to the smallest lambda.
pub fn tune_lambda(
    frames: &[TuningFrame<'_>],
    op: &ForwardOperator,
    grid: &[f64],
    solver: &SolverConfig,
    scaling: FrameScaling,
    extract: &ExtractConfig,
    tol: MatchTolerance,
) -> Result<TuningReport> {
    if grid.is_empty() || frames.is_empty() {
        return Err(Error::invalid(
            "tuning needs at least one lambda and one frame",
        ));
    }
    let mut solver = *solver;
    if solver.lipschitz.is_none() {
        solver.lipschitz = Some(op.lipschitz()?);
    }
    let pixel = op.hr_grid().pixel_size;
    let n_pixels = op.hr_grid().len();
    let scores: Vec<LambdaScore> = grid
        .par_iter()
        .map(|&lambda| {
            let mut counts = ConfusionCounts::default();
            let mut n_estimated = 0;
            for f in frames {
                let report = reconstruct_frame(f.lr, op, lambda, &solver, scaling)?;
                let est = extract_emitters_with(&report.solution, extract, f.truth.frame_id);
                n_estimated += est.len();
                counts = counts
                    + match_emitters(&f.truth.emitters, &est.emitters, tol, pixel).counts(n_pixels);
            }
            Ok(LambdaScore {
                lambda,
                jaccard: metrics(&counts).jaccard,
                counts,
                n_estimated,
            })
        })
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .fold(&scores[0], |b, s| if s.jaccard > b.jaccard { s } else { b });
    Ok(TuningReport {
        delta: tol.delta,
        frames: frames.len(),
        best_lambda: best.lambda,
        best_jaccard: best.jaccard,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = lambda_grid(1e-3, 1.0, 30).unwrap();
        assert_eq!(g.len(), 30);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[29] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let ratio = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-9));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_lambda_grid("1e-3:1:30").unwrap().len(), 30);
        assert!(parse_lambda_grid("1e-3:1").is_err());
        assert!(parse_lambda_grid("0:1:3").is_err());
        assert_eq!(parse_lambda_grid("0.5:0.5:1").unwrap(), vec![0.5]);
    }
}
