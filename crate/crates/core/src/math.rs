//! Float math routed through `libm` so the crate stays `no_std`.

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

pub fn fmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

pub fn fmin(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

/// log(sum(exp(xs))) with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, fmax);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - m)).sum();
    m + ln(sum)
}
