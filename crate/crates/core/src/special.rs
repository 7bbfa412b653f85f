//! Closed-form moments and tails used as oracles by the test suite and as
//! fast paths by the norm evaluators.

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// E|Z|^p for standard normal Z and real p > -1:
/// 2^{p/2} Gamma((p+1)/2) / sqrt(pi).
pub fn gaussian_abs_moment(p: f64) -> f64 {
    (0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0))
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
}

/// (E|Z|^p)^{1/p} for standard normal Z.
pub fn gaussian_abs_norm(p: f64) -> f64 {
    (gaussian_abs_moment(p).ln() / p).exp()
}

/// (E|W|^p)^{1/p} for the symmetric variable with P(|W| > x) = exp(-x^m):
/// E|W|^p = Gamma(p/m + 1) by the tail integral.
pub fn weibull_tail_abs_norm(p: f64, m: f64) -> f64 {
    (ln_gamma(p / m + 1.0) / p).exp()
}

/// P(|Z| > x) for standard normal Z.
pub fn normal_two_sided_tail(x: f64) -> f64 {
    libm::erfc(x / std::f64::consts::SQRT_2)
}
