use serde::{Deserialize, Serialize};

/// Confusion counts; `tn` counts the fine-grid pixels holding neither a
/// ground-truth nor an estimated emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_matching(tp: usize, fp: usize, fn_: usize, n_pixels: usize) -> Self {
        let (tp, fp, fn_) = (tp as u64, fp as u64, fn_ as u64);
        Self {
            tp,
            fp,
            fn_,
            tn: (n_pixels as u64).saturating_sub(tp + fp + fn_),
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub jaccard: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        // Nothing to find and nothing claimed counts as perfect agreement.
        100.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        jaccard: percent(c.tp, c.tp + c.fp + c.fn_),
        sensitivity: percent(c.tp, c.tp + c.fn_),
        specificity: percent(c.tn, c.tn + c.fp),
    }
}
