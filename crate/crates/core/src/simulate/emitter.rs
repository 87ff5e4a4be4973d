use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImageGrid};

/// A point emitter, positions in nm from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub x_nm: f64,
    pub y_nm: f64,
    pub intensity: f64,
}

impl Emitter {
    pub fn new(x_nm: f64, y_nm: f64, intensity: f64) -> Self {
        Self {
            x_nm,
            y_nm,
            intensity,
        }
    }

    pub fn distance_to(&self, other: &Emitter) -> f64 {
        (self.x_nm - other.x_nm).hypot(self.y_nm - other.y_nm)
    }
}

/// Emitters of one frame; `frame_id` is 1-based.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmitterList {
    pub frame_id: u32,
    pub emitters: Vec<Emitter>,
}

impl EmitterList {
    pub fn new(frame_id: u32, emitters: Vec<Emitter>) -> Result<Self> {
        if frame_id == 0 {
            return Err(Error::invalid("frame ids are 1-based"));
        }
        Ok(Self { frame_id, emitters })
    }

    pub fn len(&self) -> usize {
        self.emitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emitters.is_empty()
    }
}

/// Project emitters onto `grid`: each adds its intensity to the pixel that
/// contains it (floor of position over pixel size).
pub fn render_emitters_to_hr(list: &EmitterList, grid: &ImageGrid) -> Result<Image> {
    let mut img = Image::zeros(*grid);
    for (index, e) in list.emitters.iter().enumerate() {
        if !(e.intensity.is_finite() && e.intensity >= 0.0) {
            return Err(Error::invalid(format!(
                "emitter {index} has invalid intensity {}",
                e.intensity
            )));
        }
        let (row, col) = grid
            .pixel_of(e.x_nm, e.y_nm)
            .ok_or(Error::EmitterOutOfBounds {
                index,
                x_nm: e.x_nm,
                y_nm: e.y_nm,
            })?;
        let v = img.get(row, col);
        img.set(row, col, v + e.intensity);
    }
    Ok(img)
}
