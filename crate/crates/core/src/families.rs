//! Parametric families: density, score, sampler, and the two regularity
//! identities (zero-mean score, unit covariance between an unbiased
//! estimator's error and the score sum) that every lower bound rests on.
//!
//! Built-in identifiers:
//!
//! * `gaussian-shift` — standard normal carrier, location parameter
//! * `laplace-shift` — double exponential carrier, location parameter
//! * `exponential-scale` — unit exponential carrier, scale parameter
//! * `weibull-tail(m)` — symmetric with P(|X - theta| > x) = exp(-x^m)
//! * `symmetric-stable(alpha)` — sampler only; density and score error
//!
//! Custom shift families can be built from a tabulated piecewise-linear
//! log-density (`CustomShift`), which makes segment masses and inverse-CDF
//! sampling exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, mean_and_se};
use crate::quadrature::{integrate, Domain, QuadratureRequest};
use crate::rng::{Stream, StreamKey};
use crate::special;

const LN_INV_SQRT_2PI: f64 = -0.918938533204672741780329736406;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("unknown family identifier `{0}`")]
    UnknownFamily(String),
    #[error("invalid family parameter: {0}")]
    BadParameter(String),
    #[error("theta {theta} outside the parameter domain of {family}")]
    ThetaOutOfDomain { family: String, theta: f64 },
    #[error("x {x} outside the support of {family}")]
    XOutOfSupport { family: String, x: f64 },
    #[error("{family} has no closed-form density")]
    UnsupportedDensity { family: String },
    #[error("{family} has no score function")]
    UnsupportedScore { family: String },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("tabulated family needs at least 2 strictly increasing finite knots")]
    BadTabulation,
}

/// Structural kind of the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    Shift,
    Scale,
    General,
}

/// A one-parameter family of densities with sampler and score.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    GaussianShift,
    LaplaceShift,
    ExponentialScale,
    WeibullTail { m: f64 },
    SymmetricStable { alpha: f64 },
    CustomShift(CustomShift),
}

impl Family {
    /// Parse a family identifier as used in the CLI and scenario files.
    pub fn parse(id: &str) -> Result<Family, FamilyError> {
        let id = id.trim();
        match id {
            "gaussian-shift" => return Ok(Family::GaussianShift),
            "laplace-shift" => return Ok(Family::LaplaceShift),
            "exponential-scale" => return Ok(Family::ExponentialScale),
            _ => {}
        }
        if let Some(arg) = parse_call(id, "weibull-tail") {
            let m: f64 = arg
                .parse()
                .map_err(|_| FamilyError::BadParameter(format!("weibull-tail({arg})")))?;
            return Family::weibull_tail(m);
        }
        if let Some(arg) = parse_call(id, "symmetric-stable") {
            let alpha: f64 = arg
                .parse()
                .map_err(|_| FamilyError::BadParameter(format!("symmetric-stable({arg})")))?;
            return Family::symmetric_stable(alpha);
        }
        Err(FamilyError::UnknownFamily(id.to_string()))
    }

    pub fn weibull_tail(m: f64) -> Result<Family, FamilyError> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(FamilyError::BadParameter(format!(
                "weibull-tail exponent must be finite and > 1, got {m}"
            )));
        }
        Ok(Family::WeibullTail { m })
    }

    pub fn symmetric_stable(alpha: f64) -> Result<Family, FamilyError> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(FamilyError::BadParameter(format!(
                "stability index must lie in (0, 2), got {alpha}"
            )));
        }
        Ok(Family::SymmetricStable { alpha })
    }

    pub fn id(&self) -> String {
        match self {
            Family::GaussianShift => "gaussian-shift".into(),
            Family::LaplaceShift => "laplace-shift".into(),
            Family::ExponentialScale => "exponential-scale".into(),
            Family::WeibullTail { m } => format!("weibull-tail({m})"),
            Family::SymmetricStable { alpha } => format!("symmetric-stable({alpha})"),
            Family::CustomShift(c) => format!("custom-shift({})", c.name),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::ExponentialScale => FamilyKind::Scale,
            _ => FamilyKind::Shift,
        }
    }

    /// Open parameter domain.
    pub fn param_domain(&self) -> (f64, f64) {
        match self {
            Family::ExponentialScale => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn theta_in_domain(&self, theta: f64) -> bool {
        let (lo, hi) = self.param_domain();
        theta.is_finite() && theta > lo && theta < hi
    }

    fn check_theta(&self, theta: f64) -> Result<(), FamilyError> {
        if self.theta_in_domain(theta) {
            Ok(())
        } else {
            Err(FamilyError::ThetaOutOfDomain {
                family: self.id(),
                theta,
            })
        }
    }

    /// Support of the observation given theta.
    pub fn support(&self, theta: f64) -> Domain {
        match self {
            Family::ExponentialScale => Domain::HalfLine { a: 0.0 },
            Family::CustomShift(c) => Domain::Interval {
                a: c.xs[0] + theta,
                b: *c.xs.last().unwrap() + theta,
            },
            _ => Domain::FullLine,
        }
    }

    pub fn x_in_support(&self, x: f64, theta: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.support(theta) {
            Domain::FullLine => true,
            Domain::HalfLine { a } => x > a,
            Domain::Interval { a, b } => x >= a && x <= b,
        }
    }

    /// log g(x, theta).
    pub fn log_density(&self, x: f64, theta: f64) -> Result<f64, FamilyError> {
        self.check_theta(theta)?;
        if !self.x_in_support(x, theta) {
            return Err(FamilyError::XOutOfSupport { family: self.id(), x });
        }
        match self {
            Family::GaussianShift => {
                let u = x - theta;
                Ok(LN_INV_SQRT_2PI - 0.5 * u * u)
            }
            Family::LaplaceShift => Ok(-(2.0f64.ln()) - (x - theta).abs()),
            Family::ExponentialScale => Ok(-theta.ln() - x / theta),
            Family::WeibullTail { m } => {
                let u = (x - theta).abs();
                if u == 0.0 {
                    // Density vanishes at the symmetry point for m > 1.
                    return Ok(f64::NEG_INFINITY);
                }
                Ok((m / 2.0).ln() + (m - 1.0) * u.ln() - u.powf(*m))
            }
            Family::SymmetricStable { .. } => Err(FamilyError::UnsupportedDensity {
                family: self.id(),
            }),
            Family::CustomShift(c) => Ok(c.log_density0(x - theta)),
        }
    }

    /// g(x, theta).
    pub fn density(&self, x: f64, theta: f64) -> Result<f64, FamilyError> {
        match self {
            // Direct form keeps the scale covariance
            // g(x, theta) = c g(c x, c theta) exact for dyadic c.
            Family::ExponentialScale => {
                self.check_theta(theta)?;
                if !self.x_in_support(x, theta) {
                    return Err(FamilyError::XOutOfSupport { family: self.id(), x });
                }
                Ok((-x / theta).exp() / theta)
            }
            _ => Ok(self.log_density(x, theta)?.exp()),
        }
    }

    /// Score l(x, theta) = d log g / d theta.
    pub fn score(&self, x: f64, theta: f64) -> Result<f64, FamilyError> {
        self.check_theta(theta)?;
        if !self.x_in_support(x, theta) {
            return Err(FamilyError::XOutOfSupport { family: self.id(), x });
        }
        match self {
            Family::GaussianShift => Ok(x - theta),
            Family::LaplaceShift => {
                let u = x - theta;
                Ok(if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                })
            }
            Family::ExponentialScale => Ok((x / theta - 1.0) / theta),
            Family::WeibullTail { m } => {
                let u = x - theta;
                // Evaluations inside the removable band at the symmetry
                // point are pinned to 0 by convention.
                if u.abs() < 1e-12 {
                    return Ok(0.0);
                }
                let a = u.abs();
                Ok(m * a.powf(m - 1.0) * u.signum() - (m - 1.0) / u)
            }
            Family::SymmetricStable { .. } => Err(FamilyError::UnsupportedScore {
                family: self.id(),
            }),
            Family::CustomShift(c) => Ok(-c.log_density0_slope(x - theta)),
        }
    }

    /// Points where the density or the score has a kink; used as quadrature
    /// split hints.
    pub fn integrand_kinks(&self, theta: f64) -> Vec<f64> {
        match self {
            Family::GaussianShift | Family::ExponentialScale => vec![],
            Family::LaplaceShift | Family::WeibullTail { .. } => vec![theta],
            Family::SymmetricStable { .. } => vec![],
            Family::CustomShift(c) => c.xs.iter().map(|x| x + theta).collect(),
        }
    }

    /// Closed-form |l(., theta)|_p where available; lets tests bypass
    /// quadrature.
    pub fn closed_form_score_norm(&self, p: f64, theta: f64) -> Option<f64> {
        if !self.theta_in_domain(theta) {
            return None;
        }
        match self {
            Family::GaussianShift => Some(special::gaussian_abs_norm(p)),
            Family::LaplaceShift => Some(1.0),
            _ => None,
        }
    }

    /// One draw from g(., theta).
    pub fn draw(&self, theta: f64, s: &mut Stream) -> Result<f64, FamilyError> {
        self.check_theta(theta)?;
        Ok(self.draw_unchecked(theta, s))
    }

    #[inline]
    pub(crate) fn draw_unchecked(&self, theta: f64, s: &mut Stream) -> f64 {
        match self {
            Family::GaussianShift => theta + s.standard_normal(),
            Family::LaplaceShift => {
                let u = s.uniform_open01();
                if u < 0.5 {
                    theta + (2.0 * u).ln()
                } else {
                    theta - (2.0 * (1.0 - u)).ln()
                }
            }
            Family::ExponentialScale => theta * s.exponential(),
            Family::WeibullTail { m } => {
                let mag = s.exponential().powf(1.0 / m);
                theta + mag * s.rademacher()
            }
            Family::SymmetricStable { alpha } => theta + draw_symmetric_stable(*alpha, s),
            Family::CustomShift(c) => theta + c.draw0(s),
        }
    }

    /// `n` independent draws. Identical `(stream, theta, n)` reproduce
    /// bit-identical output.
    pub fn sample(&self, theta: f64, n: u64, s: &mut Stream) -> Result<Vec<f64>, FamilyError> {
        if n == 0 {
            return Err(FamilyError::EmptySample);
        }
        self.check_theta(theta)?;
        Ok((0..n).map(|_| self.draw_unchecked(theta, s)).collect())
    }
}

fn parse_call<'a>(id: &'a str, name: &str) -> Option<&'a str> {
    id.strip_prefix(name)?
        .strip_prefix('(')?
        .strip_suffix(')')
}

/// Chambers-Mallows-Stuck draw from the symmetric alpha-stable law with
/// characteristic function exp(-|t|^alpha).
fn draw_symmetric_stable(alpha: f64, s: &mut Stream) -> f64 {
    let v = std::f64::consts::PI * (s.uniform_open01() - 0.5);
    let w = s.exponential();
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let sv = (alpha * v).sin();
    let cv = v.cos();
    let head = sv / cv.powf(1.0 / alpha);
    let tail = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    head * tail
}

/// P(|X| > x) for the symmetric alpha-stable law with characteristic
/// function exp(-|t|^alpha), by damped Fourier inversion (Gil-Pelaez):
///
///   P(|X| > x) = 1 - (2/pi) * Integral_0^inf sin(t x)/t * exp(-t^alpha) dt.
///
/// The integrand is truncated at T = (ln 1/eps)^{1/alpha} with eps = 1e-16;
/// for alpha >= 1 the omitted mass is bounded by
/// (1/T) * Integral_T^inf e^{-t^alpha} dt <= e^{-T^alpha} / (alpha T^alpha),
/// far below the quadrature tolerance at this T.
pub fn stable_tail_prob(alpha: f64, x: f64) -> Result<f64, FamilyError> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(FamilyError::BadParameter(format!(
            "stability index must lie in (0, 2), got {alpha}"
        )));
    }
    if !(x > 0.0) {
        return Err(FamilyError::BadParameter(format!(
            "tail point must be positive, got {x}"
        )));
    }
    const EPS: f64 = 1e-16;
    let t_max = (1.0 / EPS).ln().powf(1.0 / alpha).max(1.0);
    let req = QuadratureRequest::new(
        move |t: f64| {
            if t == 0.0 {
                x
            } else {
                (t * x).sin() / t * (-t.powf(alpha)).exp()
            }
        },
        Domain::Interval { a: 0.0, b: t_max },
    )
    .with_tolerance(1e-14, 1e-12)
    .with_max_subdivisions(2048);
    let r = integrate(&req).expect("valid request");
    let p = 1.0 - (2.0 / std::f64::consts::PI) * r.value;
    Ok(p.clamp(0.0, 1.0))
}

/// A shift family defined by a tabulated piecewise-linear log-density.
/// Segment masses, the normalizing constant and inverse-CDF sampling are
/// all closed-form because each segment is exponential-linear.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomShift {
    pub name: String,
    xs: Vec<f64>,
    log_dens: Vec<f64>,
    cum_mass: Vec<f64>,
}

impl CustomShift {
    pub fn from_log_density(name: &str, points: &[(f64, f64)]) -> Result<Self, FamilyError> {
        if points.len() < 2 {
            return Err(FamilyError::BadTabulation);
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut log_dens: Vec<f64> = points.iter().map(|p| p.1).collect();
        for w in xs.windows(2) {
            if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(FamilyError::BadTabulation);
            }
        }
        if log_dens.iter().any(|l| !l.is_finite()) {
            return Err(FamilyError::BadTabulation);
        }
        let masses = segment_masses(&xs, &log_dens);
        let total: f64 = exec::comp_sum(masses.iter().copied());
        let log_total = total.ln();
        for l in log_dens.iter_mut() {
            *l -= log_total;
        }
        let masses = segment_masses(&xs, &log_dens);
        let mut cum_mass = Vec::with_capacity(xs.len());
        cum_mass.push(0.0);
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cum_mass.push(acc);
        }
        *cum_mass.last_mut().unwrap() = 1.0;
        Ok(CustomShift {
            name: name.to_string(),
            xs,
            log_dens,
            cum_mass,
        })
    }

    pub fn into_family(self) -> Family {
        Family::CustomShift(self)
    }

    fn segment_of(&self, u: f64) -> usize {
        match self.xs.binary_search_by(|x| x.total_cmp(&u)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    fn log_density0(&self, u: f64) -> f64 {
        let i = self.segment_of(u);
        let t = (u - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.log_dens[i] + t * (self.log_dens[i + 1] - self.log_dens[i])
    }

    fn log_density0_slope(&self, u: f64) -> f64 {
        let i = self.segment_of(u);
        (self.log_dens[i + 1] - self.log_dens[i]) / (self.xs[i + 1] - self.xs[i])
    }

    fn draw0(&self, s: &mut Stream) -> f64 {
        let u = s.uniform_open01();
        // Find the segment whose cumulative mass straddles u.
        let mut i = match self
            .cum_mass
            .binary_search_by(|c| c.total_cmp(&u))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        i = i.min(self.xs.len() - 2);
        let target = u - self.cum_mass[i];
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (l0, l1) = (self.log_dens[i], self.log_dens[i + 1]);
        let slope = (l1 - l0) / (x1 - x0);
        let d0 = l0.exp();
        let x = if slope.abs() < 1e-14 {
            x0 + target / d0
        } else {
            x0 + (1.0 + slope * target / d0).max(f64::MIN_POSITIVE).ln() / slope
        };
        x.clamp(x0, x1)
    }
}

fn segment_masses(xs: &[f64], log_dens: &[f64]) -> Vec<f64> {
    xs.windows(2)
        .zip(log_dens.windows(2))
        .map(|(xw, lw)| {
            let dx = xw[1] - xw[0];
            let s = (lw[1] - lw[0]) / dx;
            if s.abs() < 1e-14 {
                lw[0].exp() * dx * (1.0 + 0.5 * s * dx)
            } else {
                lw[0].exp() * ((s * dx).exp() - 1.0) / s
            }
        })
        .collect()
}

/// Monte Carlo check of the two regularity identities:
/// E l(X, theta) = 0 and E[(est - theta) * sum_i l(X_i, theta)] = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub family: String,
    pub theta: f64,
    pub n: u64,
    pub reps: u64,
    /// Estimate of E l and its standard error.
    pub score_mean: f64,
    pub score_mean_se: f64,
    /// Estimate of E[(est - theta) * sum l] and its standard error.
    pub unbias_identity: f64,
    pub unbias_identity_se: f64,
}

pub fn check_regularity<E>(
    family: &Family,
    theta: f64,
    estimator: E,
    n: u64,
    reps: u64,
    key: StreamKey,
) -> Result<RegularityReport, FamilyError>
where
    E: Fn(&[f64]) -> f64 + Sync + Send,
{
    if n == 0 || reps == 0 {
        return Err(FamilyError::EmptySample);
    }
    // Probe once so unsupported-score families fail fast.
    let probe = family.draw(theta, &mut key.stream(u64::MAX))?;
    family.score(probe, theta)?;

    let family = family.clone();
    let fam = &family;
    let est = &estimator;
    let rows = exec::replicate_map(reps, move |r| {
        let mut s = key.stream(r);
        let xs: Vec<f64> = (0..n).map(|_| fam.draw_unchecked(theta, &mut s)).collect();
        let score_sum: f64 = xs
            .iter()
            .map(|&x| fam.score(x, theta).unwrap_or(f64::NAN))
            .sum();
        let theta_hat = est(&xs);
        [score_sum / n as f64, (theta_hat - theta) * score_sum]
    });
    let score_means: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let identities: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let (m1, se1) = mean_and_se(&score_means);
    let (m2, se2) = mean_and_se(&identities);
    Ok(RegularityReport {
        family: family.id(),
        theta,
        n,
        reps,
        score_mean: m1,
        score_mean_se: se1,
        unbias_identity: m2,
        unbias_identity_se: se2,
    })
}

pub fn sample_mean(xs: &[f64]) -> f64 {
    exec::comp_mean(xs)
}
