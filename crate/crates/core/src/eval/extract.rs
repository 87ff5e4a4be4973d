use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::simulate::{Emitter, EmitterList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Peaks below `threshold_rel * max(x)` are ignored.
    pub threshold_rel: f64,
    /// Chebyshev radius of the window a peak must dominate.
    pub min_distance: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            threshold_rel: 0.1,
            min_distance: 1,
        }
    }
}

pub fn extract_emitters(
    x: &Image,
    threshold_rel: f64,
    min_distance: usize,
    frame_id: u32,
) -> EmitterList {
    extract_emitters_with(
        x,
        &ExtractConfig {
            threshold_rel,
            min_distance,
        },
        frame_id,
    )
}

/// Local maxima of a reconstructed map, one emitter per peak at the pixel
/// centre with the pixel value as intensity.
///
/// A pixel is a peak when it is positive, at least `threshold_rel * max(x)`,
/// and no pixel in its window beats it; equal values are resolved in favour
/// of the smallest `(row, col)`. The pixel must also be strictly larger than
/// at least one neighbour, so flat regions only yield their first pixel if
/// they stand above their surroundings.
pub fn extract_emitters_with(x: &Image, cfg: &ExtractConfig, frame_id: u32) -> EmitterList {
    let (w, h) = (x.width(), x.height());
    let peak = x.max();
    let mut out = EmitterList {
        frame_id,
        emitters: Vec::new(),
    };
    if !(peak > 0.0) {
        return out;
    }
    let floor = cfg.threshold_rel * peak;
    let d = cfg.min_distance.max(1) as isize;
    let v = x.values();
    for r in 0..h {
        for c in 0..w {
            let val = v[r * w + c];
            if val <= 0.0 || val < floor {
                continue;
            }
            let mut is_peak = true;
            let mut strict_somewhere = false;
            let mut has_neighbour = false;
            'window: for dr in -d..=d {
                let rr = r as isize + dr;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for dc in -d..=d {
                    let cc = c as isize + dc;
                    if (dr == 0 && dc == 0) || cc < 0 || cc >= w as isize {
                        continue;
                    }
                    has_neighbour = true;
                    let other = v[rr as usize * w + cc as usize];
                    if other > val || (other == val && (dr < 0 || (dr == 0 && dc < 0))) {
                        is_peak = false;
                        break 'window;
                    }
                    if other < val {
                        strict_somewhere = true;
                    }
                }
            }
            if is_peak && (strict_somewhere || !has_neighbour) {
                let (xn, yn) = x.grid().pixel_center(r, c);
                out.emitters.push(Emitter::new(xn, yn, val));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageGrid;

    fn blank() -> Image {
        Image::zeros(ImageGrid::square(6, 25.0).unwrap())
    }

    #[test]
    fn single_pixel() {
        let mut x = blank();
        x.set(2, 4, 3.0);
        let e = extract_emitters(&x, 0.1, 1, 1);
        assert_eq!(e.len(), 1);
        assert_eq!((e.emitters[0].x_nm, e.emitters[0].y_nm), (112.5, 62.5));
        assert_eq!(e.emitters[0].intensity, 3.0);
    }

    #[test]
    fn all_zero() {
        assert!(extract_emitters(&blank(), 0.1, 1, 1).is_empty());
    }

    #[test]
    fn plateau_keeps_first_pixel() {
        let mut x = blank();
        x.set(3, 2, 1.0);
        x.set(3, 3, 1.0);
        let e = extract_emitters(&x, 0.1, 1, 1);
        assert_eq!(e.len(), 1);
        assert_eq!(
            x.grid().pixel_of(e.emitters[0].x_nm, e.emitters[0].y_nm),
            Some((3, 2))
        );
        let mut y = blank();
        y.set(1, 1, 1.0);
        y.set(2, 1, 1.0);
        let e = extract_emitters(&y, 0.1, 1, 1);
        assert_eq!(
            y.grid().pixel_of(e.emitters[0].x_nm, e.emitters[0].y_nm),
            Some((1, 1))
        );
    }

    #[test]
    fn threshold_and_separation() {
        let mut x = blank();
        x.set(0, 0, 10.0);
        x.set(0, 3, 0.5);
        x.set(4, 4, 2.0);
        let e = extract_emitters(&x, 0.1, 1, 1);
        assert_eq!(e.len(), 2);
        // window of radius 3 lets (0,0) suppress (0,3)
        x.set(0, 3, 5.0);
        assert_eq!(extract_emitters(&x, 0.1, 1, 1).len(), 3);
        assert_eq!(extract_emitters(&x, 0.1, 3, 1).len(), 2);
    }

    #[test]
    fn flat_image_has_no_peaks() {
        let g = ImageGrid::square(3, 1.0).unwrap();
        let x = Image::from_vec(g, vec![1.0; 9]).unwrap();
        assert!(extract_emitters(&x, 0.1, 1, 1).is_empty());
        let one = Image::from_vec(ImageGrid::square(1, 1.0).unwrap(), vec![2.0]).unwrap();
        assert_eq!(extract_emitters(&one, 0.1, 1, 1).len(), 1);
    }
}
