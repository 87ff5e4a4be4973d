use crate::error::{Error, Result};
use crate::image::Image;
use crate::operator::ForwardOperator;

use super::SolverConfig;

#[derive(Debug, Clone)]
pub struct InnerReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Value of `1/2 ||A x - y||^2 + w . x` at the returned point.
    pub objective: f64,
}

/// Minimise `1/2 ||A x - y||^2 + sum_i w_i x_i` over `x >= 0`.
///
/// Starts from `max(A^T y, 0)`; see [`weighted_l1_fista`] for warm starts.
pub fn solve_weighted_l1_nonneg(
    y: &Image,
    op: &ForwardOperator,
    w: &[f64],
    config: &SolverConfig,
) -> Result<Image> {
    op.lr_grid().check_same(y.grid(), "observation")?;
    let aty = op.apply_adjoint(y)?.into_values();
    let x0 = aty.iter().map(|v| v.max(0.0)).collect();
    let lip = match config.lipschitz {
        Some(l) => l,
        None => op.lipschitz()?,
    };
    let report = weighted_l1_with_aty(
        op,
        y.values(),
        &aty,
        w,
        x0,
        lip,
        config.inner_iters,
        config.inner_tol,
    )?;
    Ok(Image::from_vec_unchecked(*op.hr_grid(), report.x))
}

/// Monotone FISTA with adaptive restart for the weighted, non-negative lasso.
///
/// Every accepted iterate has an objective no larger than the previous one; a
/// momentum step that would increase it is discarded and the momentum reset,
/// after which the plain proximal gradient step (step size `1/lipschitz`) is
/// guaranteed not to increase it. Stops when the relative objective decrease
/// drops below `tol` or after `max_iters` iterations in total.
///
/// While the iterate is sparse the steps are taken on a working set: the
/// current support plus every zero entry whose optimality condition is
/// violated. Entries outside the set stay at zero, which is exactly what the
/// full proximal step would give them. The set is re-screened against the full
/// gradient whenever the restricted run stops, and the solve ends only when no
/// zero entry wants to move.
pub fn weighted_l1_fista(
    op: &ForwardOperator,
    y: &[f64],
    w: &[f64],
    x0: Vec<f64>,
    lipschitz: f64,
    max_iters: usize,
    tol: f64,
) -> Result<InnerReport> {
    let n = op.hr_grid().len();
    let m = op.lr_grid().len();
    if w.len() != n || x0.len() != n || y.len() != m {
        return Err(Error::dim(format!(
            "weighted l1 subproblem: expected {n} weights/unknowns and {m} data, got {}/{}/{}",
            w.len(),
            x0.len(),
            y.len()
        )));
    }
    let mut aty = vec![0.0; n];
    op.adjoint_into(y, &mut aty);
    weighted_l1_with_aty(op, y, &aty, w, x0, lipschitz, max_iters, tol)
}

/// [`weighted_l1_fista`] with `A^T y` supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub(crate) fn weighted_l1_with_aty(
    op: &ForwardOperator,
    y: &[f64],
    aty: &[f64],
    w: &[f64],
    x0: Vec<f64>,
    lipschitz: f64,
    max_iters: usize,
    tol: f64,
) -> Result<InnerReport> {
    let n = op.hr_grid().len();
    let m = op.lr_grid().len();
    if w.len() != n || x0.len() != n || y.len() != m || aty.len() != n {
        return Err(Error::dim(
            "weighted l1 subproblem: buffer sizes do not match the operator",
        ));
    }
    if let Some(i) = w.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::invalid(format!(
            "weight {i} is negative or NaN: {}",
            w[i]
        )));
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::invalid(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    let step = 1.0 / lipschitz;
    let dense_above = (n / 8).max(1);
    let shrink_to = n / 16;

    let mut x: Vec<f64> = x0.into_iter().map(|v| v.max(0.0)).collect();
    let mut ax = vec![0.0; m];
    let mut ata_x = vec![0.0; n];
    let mut used = 0;
    let mut objective;
    let mut last_converged = false;

    loop {
        op.forward_into(&x, &mut ax);
        objective = value(&ax, y, w, &x);
        if used >= max_iters {
            break;
        }
        op.adjoint_into(&ax, &mut ata_x);
        let mut violators = 0;
        let set: Vec<usize> = (0..n)
            .filter(|&i| {
                if x[i] > 0.0 {
                    true
                } else if ata_x[i] - aty[i] + w[i] < 0.0 {
                    violators += 1;
                    true
                } else {
                    false
                }
            })
            .collect();
        if violators == 0 && (last_converged || set.is_empty()) {
            break;
        }

        let dense = set.len() > dense_above;
        let run = if dense {
            let space = DenseSpace { op };
            let run = fista(
                &space,
                y,
                aty,
                w,
                x,
                step,
                max_iters - used,
                tol,
                Some(shrink_to),
            )?;
            x = run.x;
            run.stats
        } else {
            let space = WorkingSet::new(op, &set);
            let xs: Vec<f64> = set.iter().map(|&i| x[i]).collect();
            let ws: Vec<f64> = set.iter().map(|&i| w[i]).collect();
            let atys: Vec<f64> = set.iter().map(|&i| aty[i]).collect();
            let run = fista(&space, y, &atys, &ws, xs, step, max_iters - used, tol, None)?;
            for (&i, v) in set.iter().zip(&run.x) {
                x[i] = *v;
            }
            run.stats
        };
        used += run.iterations;
        last_converged = run.stop == Stop::Converged;
        if last_converged && dense {
            op.forward_into(&x, &mut ax);
            objective = value(&ax, y, w, &x);
            break;
        }
    }

    Ok(InnerReport {
        x,
        iterations: used,
        objective,
    })
}

/// The unknowns a FISTA run works on, with the matching pieces of `A`.
trait Space {
    fn len(&self) -> usize;
    fn forward(&self, x: &[f64], out: &mut [f64]);
    fn adjoint(&self, r: &[f64], out: &mut [f64]);
}

struct DenseSpace<'a> {
    op: &'a ForwardOperator,
}

impl Space for DenseSpace<'_> {
    fn len(&self) -> usize {
        self.op.hr_grid().len()
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        self.op.forward_into(x, out);
    }

    fn adjoint(&self, r: &[f64], out: &mut [f64]) {
        self.op.adjoint_into(r, out);
    }
}

/// Columns of `A` for a subset of fine pixels; each is an outer product of
/// two short coarse-axis profiles.
struct WorkingSet {
    m_w: usize,
    m_len: usize,
    columns: Vec<Column>,
}

struct Column {
    row0: usize,
    rows: Vec<f64>,
    col0: usize,
    cols: Vec<f64>,
}

impl WorkingSet {
    fn new(op: &ForwardOperator, set: &[usize]) -> Self {
        let n_w = op.hr_grid().width;
        let (m_w, m_h) = (op.lr_grid().width, op.lr_grid().height);
        let columns = set
            .iter()
            .map(|&i| {
                let (row0, rows) = op.axis_column(i / n_w, m_h);
                let (col0, cols) = op.axis_column(i % n_w, m_w);
                Column {
                    row0,
                    rows,
                    col0,
                    cols,
                }
            })
            .collect();
        Self {
            m_w,
            m_len: m_w * m_h,
            columns,
        }
    }
}

impl Space for WorkingSet {
    fn len(&self) -> usize {
        self.columns.len()
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m_len);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, &xi) in self.columns.iter().zip(x) {
            if xi == 0.0 {
                continue;
            }
            for (a, &rw) in c.rows.iter().enumerate() {
                let base = (c.row0 + a) * self.m_w + c.col0;
                let s = xi * rw;
                for (o, &cw) in out[base..base + c.cols.len()].iter_mut().zip(&c.cols) {
                    *o += s * cw;
                }
            }
        }
    }

    fn adjoint(&self, r: &[f64], out: &mut [f64]) {
        for (c, o) in self.columns.iter().zip(out.iter_mut()) {
            let mut acc = 0.0;
            for (a, &rw) in c.rows.iter().enumerate() {
                let base = (c.row0 + a) * self.m_w + c.col0;
                let inner: f64 = r[base..base + c.cols.len()]
                    .iter()
                    .zip(&c.cols)
                    .map(|(v, w)| v * w)
                    .sum();
                acc += rw * inner;
            }
            *o = acc;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stop {
    Converged,
    Budget,
    Shrunk,
}

struct RunStats {
    iterations: usize,
    stop: Stop,
}

struct Run {
    x: Vec<f64>,
    stats: RunStats,
}

/// Monotone FISTA on one space. `aty` and `w` are given on the same space.
/// With `shrink_to`, the run also stops once the support has at most that
/// many entries.
#[allow(clippy::too_many_arguments)]
fn fista<S: Space>(
    space: &S,
    y: &[f64],
    aty: &[f64],
    w: &[f64],
    x0: Vec<f64>,
    step: f64,
    max_iters: usize,
    tol: f64,
    shrink_to: Option<usize>,
) -> Result<Run> {
    let n = space.len();
    let m = y.len();
    let mut x = x0;
    let mut ax = vec![0.0; m];
    space.forward(&x, &mut ax);
    let mut f = value(&ax, y, w, &x);

    let mut z = x.clone();
    let mut az = ax.clone();
    let mut t = 1.0f64;
    let mut grad = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut ax_new = vec![0.0; m];

    let mut iterations = 0;
    let mut stop = Stop::Budget;
    while iterations < max_iters {
        iterations += 1;
        // grad f(z) = A^T A z - A^T y; A z stays sparse when z is.
        space.adjoint(&az, &mut grad);
        let mut support = 0;
        for i in 0..n {
            let v = (z[i] - step * (grad[i] - aty[i] + w[i])).max(0.0);
            support += (v > 0.0) as usize;
            x_new[i] = v;
        }
        space.forward(&x_new, &mut ax_new);
        let f_new = value(&ax_new, y, w, &x_new);
        if !f_new.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite inner objective at iteration {iterations}"
            )));
        }

        if f_new > f {
            if t == 1.0 {
                // Even the plain gradient step fails to descend: we are at
                // the optimum up to rounding.
                stop = Stop::Converged;
                break;
            }
            t = 1.0;
            z.copy_from_slice(&x);
            az.copy_from_slice(&ax);
            continue;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            z[i] = x_new[i] + beta * (x_new[i] - x[i]);
        }
        for j in 0..m {
            az[j] = ax_new[j] + beta * (ax_new[j] - ax[j]);
        }
        let decrease = f - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut ax, &mut ax_new);
        f = f_new;
        t = t_next;
        if decrease <= tol * f.abs().max(f64::MIN_POSITIVE) {
            stop = Stop::Converged;
            break;
        }
        if shrink_to.is_some_and(|k| support <= k) {
            stop = Stop::Shrunk;
            break;
        }
    }

    Ok(Run {
        x,
        stats: RunStats { iterations, stop },
    })
}
fn value(ax: &[f64], y: &[f64], w: &[f64], x: &[f64]) -> f64 {
    let data: f64 = ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let l1: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    0.5 * data + l1
}
