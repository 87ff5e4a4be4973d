use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{Emitter, EmitterList};

use super::matching::{match_emitters, MatchTolerance};
use super::metrics::{metrics, ConfusionCounts, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Sum counts over frames, then take ratios.
    #[default]
    Micro,
    /// Average the per-frame ratios.
    Macro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackEvalOptions {
    pub tolerances: Vec<MatchTolerance>,
    /// Fine-grid pixel size in nm.
    pub pixel_size: f64,
    /// Fine-grid pixels per frame (used for true negatives).
    pub hr_pixels: usize,
    /// When set, frames are `1..=n_frames` and ids outside that range are
    /// rejected. Otherwise the frame set is the union of ids present.
    pub n_frames: Option<u32>,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceReport {
    pub delta: f64,
    pub counts: ConfusionCounts,
    pub jaccard: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: u32,
    pub n_gt: usize,
    pub n_est: usize,
    /// One entry per tolerance, same order as `tolerances`.
    pub counts: Vec<ConfusionCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pixel_size_nm: f64,
    pub hr_pixels: usize,
    pub aggregation: Aggregation,
    pub frames: usize,
    pub tolerances: Vec<ToleranceReport>,
    /// Tolerance used for the headline sensitivity and specificity.
    pub headline_delta: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub per_frame: Vec<FrameReport>,
}

impl MetricsReport {
    pub fn at(&self, delta: f64) -> Option<&ToleranceReport> {
        self.tolerances.iter().find(|t| t.delta == delta)
    }
}

fn by_frame(lists: &[EmitterList]) -> BTreeMap<u32, Vec<Emitter>> {
    let mut map: BTreeMap<u32, Vec<Emitter>> = BTreeMap::new();
    for l in lists {
        map.entry(l.frame_id)
            .or_default()
            .extend_from_slice(&l.emitters);
    }
    map
}

/// Score an estimated stack against ground truth frame by frame.
///
/// Frames absent from either side are scored as empty. Sensitivity and
/// specificity headlines use `delta = 2` when it is among the tolerances.
pub fn evaluate_stack(
    gt: &[EmitterList],
    est: &[EmitterList],
    opts: &StackEvalOptions,
) -> Result<MetricsReport> {
    if opts.tolerances.is_empty() {
        return Err(Error::invalid("at least one tolerance is required"));
    }
    if !(opts.pixel_size.is_finite() && opts.pixel_size > 0.0) {
        return Err(Error::invalid("pixel size must be positive"));
    }
    let gt_map = by_frame(gt);
    let est_map = by_frame(est);
    let frames: Vec<u32> = match opts.n_frames {
        Some(n) => {
            let bad: Vec<u32> = gt_map
                .keys()
                .chain(est_map.keys())
                .copied()
                .filter(|f| *f == 0 || *f > n)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !bad.is_empty() {
                return Err(Error::MissingFrames(bad));
            }
            (1..=n).collect()
        }
        None => {
            let missing: Vec<u32> = est_map
                .keys()
                .filter(|f| !gt_map.contains_key(f))
                .copied()
                .collect();
            if !missing.is_empty() && !gt_map.is_empty() {
                return Err(Error::MissingFrames(missing));
            }
            gt_map
                .keys()
                .chain(est_map.keys())
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        }
    };

    let empty = Vec::new();
    let per_frame: Vec<FrameReport> = frames
        .par_iter()
        .map(|&f| {
            let g = gt_map.get(&f).unwrap_or(&empty);
            let e = est_map.get(&f).unwrap_or(&empty);
            let counts = opts
                .tolerances
                .iter()
                .map(|tol| match_emitters(g, e, *tol, opts.pixel_size).counts(opts.hr_pixels))
                .collect();
            FrameReport {
                frame: f,
                n_gt: g.len(),
                n_est: e.len(),
                counts,
            }
        })
        .collect();

    let tolerances: Vec<ToleranceReport> = opts
        .tolerances
        .iter()
        .enumerate()
        .map(|(k, tol)| {
            let counts: ConfusionCounts = per_frame.iter().map(|f| f.counts[k]).sum();
            let m = match opts.aggregation {
                Aggregation::Micro => metrics(&counts),
                Aggregation::Macro => {
                    macro_average(per_frame.iter().map(|f| metrics(&f.counts[k])))
                }
            };
            ToleranceReport {
                delta: tol.delta,
                counts,
                jaccard: m.jaccard,
                sensitivity: m.sensitivity,
                specificity: m.specificity,
            }
        })
        .collect();

    let headline = tolerances
        .iter()
        .find(|t| t.delta == 2.0)
        .unwrap_or(&tolerances[0]);
    Ok(MetricsReport {
        pixel_size_nm: opts.pixel_size,
        hr_pixels: opts.hr_pixels,
        aggregation: opts.aggregation,
        frames: per_frame.len(),
        headline_delta: headline.delta,
        sensitivity: headline.sensitivity,
        specificity: headline.specificity,
        tolerances,
        per_frame,
    })
}

fn macro_average(items: impl Iterator<Item = Metrics>) -> Metrics {
    let mut n = 0usize;
    let mut acc = Metrics {
        jaccard: 0.0,
        sensitivity: 0.0,
        specificity: 0.0,
    };
    for m in items {
        n += 1;
        acc.jaccard += m.jaccard;
        acc.sensitivity += m.sensitivity;
        acc.specificity += m.specificity;
    }
    if n == 0 {
        return metrics(&ConfusionCounts::default());
    }
    let n = n as f64;
    Metrics {
        jaccard: acc.jaccard / n,
        sensitivity: acc.sensitivity / n,
        specificity: acc.specificity / n,
    }
}
