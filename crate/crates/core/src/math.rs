//! Float math that works on both `std` and `libm` builds.

#[cfg(feature = "std")]
#[inline(always)]
pub fn sin(x: f64) -> f64 {
    x.sin()
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// 10^x, used for dB conversions.
#[cfg(feature = "std")]
#[inline(always)]
pub fn exp10(x: f64) -> f64 {
    10f64.powf(x)
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub fn exp10(x: f64) -> f64 {
    libm::pow(10.0, x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn floor(x: f64) -> f64 {
    x.floor()
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Round to the nearest integer, ties to even. Implemented by hand so the
/// result does not depend on the platform rounding mode.
pub fn round_ties_even(x: f64) -> f64 {
    let below = floor(x);
    let frac = x - below;
    if frac > 0.5 {
        below + 1.0
    } else if frac < 0.5 {
        below
    } else if (below as i64) % 2 == 0 {
        below
    } else {
        below + 1.0
    }
}
