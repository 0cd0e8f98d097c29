//! Standard normal distribution function and its inverse.

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Standard normal CDF, `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`]. Fails outside the open unit interval.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::input(format!(
            "normal quantile requires 0 < q < 1, got {q}"
        )));
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    // One Newton step against the CDF tightens the tails.
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        let step = (normal_cdf(x) - q) / density;
        if step.is_finite() {
            x -= step;
        }
    }
    Ok(x)
}

/// Upper-`a` point `z_a`, i.e. `Φ(z_a) = 1 − a`.
pub fn upper_point(a: f64) -> Result<f64> {
    normal_quantile(a).map(|z| -z)
}
