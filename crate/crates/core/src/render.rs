use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImageStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    /// Pixelwise sum over frames.
    Sum,
    /// 1 where the sum exceeds the threshold, 0 elsewhere.
    Binary,
}

impl FromStr for RenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(RenderMode::Sum),
            "binary" => Ok(RenderMode::Binary),
            other => Err(Error::invalid(format!(
                "unknown render mode '{other}' (sum or binary)"
            ))),
        }
    }
}

pub fn render_stack(stack: &ImageStack, mode: RenderMode, threshold: f64) -> Result<Image> {
    if !threshold.is_finite() {
        return Err(Error::invalid("render threshold must be finite"));
    }
    let sum = stack.sum_frames();
    Ok(match mode {
        RenderMode::Sum => sum,
        RenderMode::Binary => {
            let values = sum
                .values()
                .iter()
                .map(|v| if *v > threshold { 1.0 } else { 0.0 })
                .collect();
            Image::from_vec_unchecked(*sum.grid(), values)
        }
    })
}
