//! Transcendental functions routed through `libm` so that results are
//! bit-identical across platforms and available without `std`.

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// phi1(x) = (e^x - 1)/x, continuous at 0.
pub fn phi1(x: f64) -> f64 {
    if abs(x) < 1e-12 {
        1.0 + 0.5 * x
    } else {
        expm1(x) / x
    }
}
