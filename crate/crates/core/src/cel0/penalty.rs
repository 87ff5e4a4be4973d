use crate::error::{Error, Result};

/// Number of entries that are not exactly zero.
pub fn l0_norm(x: &[f64]) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

/// One term of the CEL0 penalty. A zero column norm gives `lambda * [x != 0]`,
/// the limit of the formula.
#[inline]
pub fn cel0_term(x: f64, norm: f64, lambda: f64) -> f64 {
    let a = x.abs();
    if norm == 0.0 {
        return if a != 0.0 { lambda } else { 0.0 };
    }
    let threshold = (2.0 * lambda).sqrt() / norm;
    if a < threshold {
        // lambda - n^2/2 (a - t)^2 = n^2 a (t - a/2) since n^2 t^2 = 2 lambda;
        // the factored form is exact at a = 0.
        norm * norm * a * (threshold - 0.5 * a)
    } else {
        lambda
    }
}

fn check(x: &[f64], norms: &[f64], lambda: f64) -> Result<()> {
    if x.len() != norms.len() {
        return Err(Error::dim(format!(
            "{} values but {} column norms",
            x.len(),
            norms.len()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

pub fn cel0_penalty(x: &[f64], norms: &[f64], lambda: f64) -> Result<f64> {
    check(x, norms, lambda)?;
    Ok(x.iter()
        .zip(norms)
        .map(|(&v, &n)| cel0_term(v, n, lambda))
        .sum())
}

/// Slopes of the CEL0 terms with respect to `|x_i|`; used as l1 weights.
pub fn irl1_weights(x: &[f64], norms: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check(x, norms, lambda)?;
    let s = (2.0 * lambda).sqrt();
    Ok(x.iter()
        .zip(norms)
        .map(|(&v, &n)| n * (s - n * v.abs()).max(0.0))
        .collect())
}
