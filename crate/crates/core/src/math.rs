//! Small float helpers routed through `libm` so the crate stays `no_std`.

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Natural logarithm clamped below: arguments smaller than `e` evaluate to 1,
/// so confidence radii stay real and positive at tiny sample counts.
#[inline]
pub fn ln_clamped(x: f64) -> f64 {
    if x < core::f64::consts::E {
        1.0
    } else {
        libm::log(x)
    }
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// `x^1.5` for non-negative `x`.
#[inline]
pub fn pow_three_halves(x: f64) -> f64 {
    x * libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
