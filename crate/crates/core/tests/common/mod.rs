//! Brute-force references shared by the integration tests. Nothing here calls
//! into the operator or solver code it is used to check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smlm_core::simulate::Emitter;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.at(r, c) * x[c]).sum())
            .collect()
    }

    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c] += self.at(r, c) * y[r];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.cols, other.rows);
        let mut out = Dense::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Dense {
        let mut out = Dense::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(c, r) = self.at(r, c);
            }
        }
        out
    }

    pub fn column_norm(&self, c: usize) -> f64 {
        (0..self.rows)
            .map(|r| self.at(r, c).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    TopLeft,
    BlockMean,
    BlockSum,
}

/// Gaussian sampled at integer offsets on the `(2r+1)^2` square, unit sum.
pub fn kernel_2d(sigma_px: f64, radius: usize) -> Vec<Vec<f64>> {
    let r = radius as i64;
    let mut k: Vec<Vec<f64>> = (-r..=r)
        .map(|dy| {
            (-r..=r)
                .map(|dx| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_px * sigma_px)).exp())
                .collect()
        })
        .collect();
    let total: f64 = k.iter().flatten().sum();
    k.iter_mut().flatten().for_each(|v| *v /= total);
    k
}

/// Explicit "same" convolution matrix with zero padding, `n x n` pixels per
/// side (width `w`, height `h`), in row-major pixel order.
pub fn blur_matrix(w: usize, h: usize, kernel: &[Vec<f64>]) -> Dense {
    let r = (kernel.len() / 2) as i64;
    let n = w * h;
    let mut k = Dense::zeros(n, n);
    for pr in 0..h as i64 {
        for pc in 0..w as i64 {
            for qr in 0..h as i64 {
                for qc in 0..w as i64 {
                    let (dr, dc) = (pr - qr, pc - qc);
                    if dr.abs() <= r && dc.abs() <= r {
                        *k.at_mut((pr * w as i64 + pc) as usize, (qr * w as i64 + qc) as usize) =
                            kernel[(dr + r) as usize][(dc + r) as usize];
                    }
                }
            }
        }
    }
    k
}

/// Sampling matrix from the `w x h` fine grid to the `w/l x h/l` coarse grid.
pub fn sampling_matrix(w: usize, h: usize, l: usize, mode: Sampler) -> Dense {
    let (mw, mh) = (w / l, h / l);
    let mut s = Dense::zeros(mw * mh, w * h);
    for i in 0..mh {
        for j in 0..mw {
            let row = i * mw + j;
            match mode {
                Sampler::TopLeft => *s.at_mut(row, (l * i) * w + l * j) = 1.0,
                Sampler::BlockMean | Sampler::BlockSum => {
                    let v = if mode == Sampler::BlockMean {
                        1.0 / (l * l) as f64
                    } else {
                        1.0
                    };
                    for a in 0..l {
                        for b in 0..l {
                            *s.at_mut(row, (l * i + a) * w + l * j + b) = v;
                        }
                    }
                }
            }
        }
    }
    s
}

pub fn dense_operator(
    w: usize,
    h: usize,
    l: usize,
    sigma_px: f64,
    radius: usize,
    mode: Sampler,
) -> Dense {
    sampling_matrix(w, h, l, mode).matmul(&blur_matrix(w, h, &kernel_2d(sigma_px, radius)))
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn max_eigenvalue_symmetric(m: &Dense) -> f64 {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.data.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n)
        .map(|i| a[i * n + i])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum bipartite matching size by exhaustive search over assignments.
pub fn exhaustive_max_matching(gt: &[Emitter], est: &[Emitter], radius_nm: f64) -> usize {
    fn go(i: usize, gt: &[Emitter], est: &[Emitter], used: &mut Vec<bool>, r: f64) -> usize {
        if i == gt.len() {
            return 0;
        }
        // leave gt[i] unmatched
        let mut best = go(i + 1, gt, est, used, r);
        for j in 0..est.len() {
            if !used[j] && gt[i].distance_to(&est[j]) < r {
                used[j] = true;
                best = best.max(1 + go(i + 1, gt, est, used, r));
                used[j] = false;
            }
        }
        best
    }
    go(0, gt, est, &mut vec![false; est.len()], radius_nm)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Emitter> {
    (0..n)
        .map(|_| {
            Emitter::new(
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
                1.0,
            )
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
