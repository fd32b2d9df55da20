//! Standard normal density, distribution and the log-space quantities the
//! probit likelihood needs.
//!
//! With small noise scales the probit argument routinely reaches |z| > 30,
//! where `Φ(z)` underflows. Below `z = -5` both `ln Φ(z)` and the inverse
//! Mills ratio `φ(z)/Φ(z)` are evaluated through a continued fraction for
//! the Mills ratio instead of through `erfc`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const TAIL: f64 = -5.0;

#[inline]
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x >= 5` by backward evaluation of
/// its continued fraction `1 / (x + 1 / (x + 2 / (x + 3 / (x + ...))))`.
fn mills_ratio_tail(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=60).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

/// `ln Φ(z)`, accurate over the whole real line.
pub fn log_cdf(z: f64) -> f64 {
    if z < TAIL {
        -0.5 * z * z - LN_SQRT_2PI + mills_ratio_tail(-z).ln()
    } else if z > 0.0 {
        (-0.5 * erfc(z * FRAC_1_SQRT_2)).ln_1p()
    } else {
        cdf(z).ln()
    }
}

/// Inverse Mills ratio `φ(z) / Φ(z)`, the derivative of `ln Φ(z)`.
pub fn inverse_mills(z: f64) -> f64 {
    if z < TAIL {
        1.0 / mills_ratio_tail(-z)
    } else {
        pdf(z) / cdf(z)
    }
}
