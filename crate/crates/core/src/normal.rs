use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc_inv;

/// Inverse CDF of the standard normal distribution, for `p` in (0, 1).
pub fn standard_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    -SQRT_2 * erfc_inv(2.0 * p)
}
