//! CEL0-penalised, non-negative deconvolution.
//!
//! The problem solved is
//!
//! ```text
//! min_x  1/2 ||A x - y||^2 + Phi(x)   subject to x >= 0
//! Phi(x) = sum_i lambda - ||c_i||^2 / 2 * (|x_i| - sqrt(2 lambda) / ||c_i||)^2 * [|x_i| < sqrt(2 lambda) / ||c_i||]
//! ```
//!
//! Each term of `Phi` is concave and non-decreasing in `|x_i|`, so its tangent
//! at the current iterate majorises it. Iteratively reweighted l1 minimises
//! that majoriser: the slope of term `i` at `|x_i|` is
//!
//! ```text
//! w_i = ||c_i|| * max(sqrt(2 lambda) - ||c_i|| |x_i|, 0)
//! ```
//!
//! and every outer step solves the convex problem
//! `min_{x >= 0} 1/2 ||A x - y||^2 + sum_i w_i x_i` with a monotone
//! accelerated proximal gradient method, warm-started from the previous
//! iterate. Because the inner solver never increases the majoriser, the
//! outer objective is non-increasing.

mod inner;
mod irl1;
mod lipschitz;
mod penalty;

pub use inner::{solve_weighted_l1_nonneg, weighted_l1_fista, InnerReport};
pub use irl1::{objective, solve_cel0, Cel0Params, Objective, SolveReport, SolverConfig};
pub use lipschitz::{lipschitz_estimate, power_iteration};
pub use penalty::{cel0_penalty, cel0_term, irl1_weights, l0_norm};
