//! Norm evaluation on analytic distributions (through quadrature) and on
//! empirical samples: Lebesgue-Riesz L_p, Grand Lebesgue G(psi),
//! exponential Orlicz B(phi), the Lorentz quasinorm L_{p,q}, the
//! associate-norm pairing lower estimate, and the exponential tail
//! envelope implied by a finite G(psi_m) norm.
//!
//! Divergence is a first-class outcome: norms return [`NormValue`], never
//! a sentinel float, so the negative results (heavy tails, missing
//! moments) are directly testable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::comp_sum;
use crate::families::{Family, FamilyError};
use crate::quadrature::{integrate, Domain, QuadratureError, QuadratureRequest};
use crate::transforms::{PhiFunction, PsiFunction, TransformError};

pub const DEFAULT_DIVERGENCE_CEILING: f64 = 1e6;
/// Largest |lambda * value| allowed in empirical mgf estimation before the
/// lambda grid is truncated (exp(40) ~ 2.4e17 still sums safely in f64).
pub const EMPIRICAL_MGF_EXPONENT_CAP: f64 = 40.0;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("exponent must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("sample must be nonempty")]
    EmptySample,
    #[error("test dictionary must be nonempty")]
    EmptyDictionary,
    #[error("dictionary entry `{0}` has {1} values, target has {2}; pairing needs a shared replicate stream")]
    LengthMismatch(String, usize, usize),
    #[error("input must be centered: |mean| = {mean} exceeds tolerance {tol}")]
    NotCentered { mean: f64, tol: f64 },
    #[error("evaluation grid escapes the support of psi: {0}")]
    GridOutsidePsi(String),
    #[error("divergent input: {0}")]
    DivergentInput(String),
    #[error("invalid grid spec: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// A norm evaluation outcome. `Divergent` is the explicit infinity state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormValue {
    Finite(f64),
    Divergent,
}

impl NormValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            NormValue::Finite(v) => Some(v),
            NormValue::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, NormValue::Divergent)
    }
}

/// Where a sample came from; enough to regenerate it bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub theta: Option<f64>,
    pub n: u64,
    pub stream: u64,
    pub reps: u64,
}

impl Provenance {
    pub fn synthetic(source: &str) -> Self {
        Provenance {
            source: source.to_string(),
            theta: None,
            n: 0,
            stream: 0,
            reps: 0,
        }
    }
}

/// A realized Monte Carlo sample with a lazily sorted |value| view.
#[derive(Debug)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pub provenance: Provenance,
    sorted_abs: std::sync::OnceLock<Vec<f64>>,
}

impl Clone for EmpiricalSample {
    fn clone(&self) -> Self {
        EmpiricalSample {
            values: self.values.clone(),
            provenance: self.provenance.clone(),
            sorted_abs: std::sync::OnceLock::new(),
        }
    }
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self, NormError> {
        if values.is_empty() {
            return Err(NormError::EmptySample);
        }
        Ok(EmpiricalSample {
            values,
            provenance,
            sorted_abs: std::sync::OnceLock::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absolute values sorted ascending; computed once.
    pub fn sorted_abs(&self) -> &[f64] {
        self.sorted_abs.get_or_init(|| {
            let mut v: Vec<f64> = self.values.iter().map(|x| x.abs()).collect();
            v.sort_by(f64::total_cmp);
            v
        })
    }
}

/// An analytic distribution given as a weight (log-density over a domain)
/// and a value transform, so norms of transformed variables (scores) reuse
/// the same quadrature path.
#[derive(Clone)]
pub struct AnalyticDist {
    pub log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub domain: Domain,
    pub kinks: Vec<f64>,
}

impl AnalyticDist {
    pub fn new(
        log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        domain: Domain,
        kinks: Vec<f64>,
    ) -> Self {
        AnalyticDist {
            log_density,
            value: Arc::new(|x| x),
            domain,
            kinks,
        }
    }

    pub fn standard_normal() -> Self {
        AnalyticDist::new(
            Arc::new(|x: f64| -0.918938533204672741780329736406 - 0.5 * x * x),
            Domain::FullLine,
            vec![],
        )
    }

    /// The score of `family` at `theta`, weighted by its own density.
    pub fn score_of(family: &Family, theta: f64) -> Result<Self, FamilyError> {
        // Probe support so unsupported-score families fail here.
        let probe_x = match family.support(theta) {
            Domain::FullLine => theta,
            Domain::HalfLine { a } => a + theta.abs().max(1.0),
            Domain::Interval { a, b } => 0.5 * (a + b),
        };
        family.score(probe_x, theta)?;
        let f1 = family.clone();
        let f2 = family.clone();
        let mut kinks = family.integrand_kinks(theta);
        kinks.push(theta);
        Ok(AnalyticDist {
            log_density: Arc::new(move |x: f64| {
                f1.log_density(x, theta).unwrap_or(f64::NEG_INFINITY)
            }),
            value: Arc::new(move |x: f64| f2.score(x, theta).unwrap_or(f64::NAN)),
            domain: family.support(theta),
            kinks,
        })
    }

    /// E |T|^p, or `Divergent` when the quadrature does not settle.
    pub fn abs_moment(&self, p: f64) -> Result<NormValue, NormError> {
        let ld = self.log_density.clone();
        let val = self.value.clone();
        let integrand = move |x: f64| {
            let lg = ld(x);
            if lg == f64::NEG_INFINITY {
                return 0.0;
            }
            let t = val(x);
            if t == 0.0 {
                return 0.0;
            }
            (p * t.abs().ln() + lg).exp()
        };
        let req = QuadratureRequest::new(integrand, self.domain)
            .with_tolerance(1e-13, 1e-11)
            .with_max_subdivisions(512)
            .with_split_points(&self.kinks);
        let r = integrate(&req)?;
        if r.converged && r.value.is_finite() {
            Ok(NormValue::Finite(r.value.max(0.0)))
        } else {
            Ok(NormValue::Divergent)
        }
    }

    /// E exp(lambda T); `None` when the integral diverges.
    pub fn mgf(&self, lambda: f64) -> Option<f64> {
        let ld = self.log_density.clone();
        let val = self.value.clone();
        let integrand = move |x: f64| {
            let lg = ld(x);
            if lg == f64::NEG_INFINITY {
                return 0.0;
            }
            (lambda * val(x) + lg).exp()
        };
        let req = QuadratureRequest::new(integrand, self.domain)
            .with_tolerance(1e-13, 1e-11)
            .with_max_subdivisions(512)
            .with_split_points(&self.kinks);
        match integrate(&req) {
            Ok(r) if r.converged && r.value.is_finite() && r.value > 0.0 => Some(r.value),
            _ => None,
        }
    }

    /// E T.
    pub fn mean(&self) -> Result<f64, NormError> {
        let ld = self.log_density.clone();
        let val = self.value.clone();
        let integrand = move |x: f64| {
            let lg = ld(x);
            if lg == f64::NEG_INFINITY {
                return 0.0;
            }
            val(x) * lg.exp()
        };
        let req = QuadratureRequest::new(integrand, self.domain)
            .with_tolerance(1e-12, 1e-10)
            .with_max_subdivisions(512)
            .with_split_points(&self.kinks);
        let r = integrate(&req)?;
        if r.converged {
            Ok(r.value)
        } else {
            Err(NormError::DivergentInput("mean integral did not converge".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// Lebesgue-Riesz
// ---------------------------------------------------------------------------

/// (E|T|^p)^{1/p} for an analytic distribution.
pub fn lp_norm_analytic(dist: &AnalyticDist, p: f64) -> Result<NormValue, NormError> {
    if !(p >= 1.0) {
        return Err(NormError::BadExponent(p));
    }
    Ok(match dist.abs_moment(p)? {
        NormValue::Finite(m) => NormValue::Finite(m.powf(1.0 / p)),
        NormValue::Divergent => NormValue::Divergent,
    })
}

/// Plug-in (mean |v|^p)^{1/p}.
pub fn lp_norm_empirical(values: &[f64], p: f64) -> Result<f64, NormError> {
    if !(p >= 1.0) {
        return Err(NormError::BadExponent(p));
    }
    if values.is_empty() {
        return Err(NormError::EmptySample);
    }
    let s = comp_sum(values.iter().map(|v| v.abs().powf(p)));
    Ok((s / values.len() as f64).powf(1.0 / p))
}

/// Plug-in norm plus a delete-one jackknife standard error.
pub fn lp_norm_empirical_with_se(values: &[f64], p: f64) -> Result<(f64, f64), NormError> {
    let norm = lp_norm_empirical(values, p)?;
    let r = values.len();
    if r < 2 {
        return Ok((norm, f64::NAN));
    }
    let pows: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    let s = comp_sum(pows.iter().copied());
    let loo: Vec<f64> = pows
        .iter()
        .map(|w| ((s - w) / (r - 1) as f64).powf(1.0 / p))
        .collect();
    let loo_mean = comp_sum(loo.iter().copied()) / r as f64;
    let ss = comp_sum(loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)));
    let se = ((r - 1) as f64 / r as f64 * ss).sqrt();
    Ok((norm, se))
}

// ---------------------------------------------------------------------------
// Moment curves and Grand Lebesgue
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSource {
    Analytic,
    Empirical,
}

/// p -> |T|_p on a finite grid. Entries may be infinite where the moment
/// diverges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCurve {
    pub p_grid: Vec<f64>,
    pub moment_norms: Vec<f64>,
    pub source: CurveSource,
}

impl MomentCurve {
    pub fn from_analytic(dist: &AnalyticDist, p_grid: &[f64]) -> Result<Self, NormError> {
        let moment_norms = p_grid
            .iter()
            .map(|&p| {
                Ok(match lp_norm_analytic(dist, p)? {
                    NormValue::Finite(v) => v,
                    NormValue::Divergent => f64::INFINITY,
                })
            })
            .collect::<Result<Vec<f64>, NormError>>()?;
        let c = MomentCurve {
            p_grid: p_grid.to_vec(),
            moment_norms,
            source: CurveSource::Analytic,
        };
        c.assert_lyapunov(1e-10)?;
        Ok(c)
    }

    pub fn from_empirical(sample: &EmpiricalSample, p_grid: &[f64]) -> Result<Self, NormError> {
        let moment_norms = p_grid
            .iter()
            .map(|&p| lp_norm_empirical(sample.values(), p))
            .collect::<Result<Vec<f64>, NormError>>()?;
        let c = MomentCurve {
            p_grid: p_grid.to_vec(),
            moment_norms,
            source: CurveSource::Empirical,
        };
        // The plug-in curve obeys the power-mean inequality exactly;
        // anything beyond rounding is a bug.
        c.assert_lyapunov(1e-9)?;
        Ok(c)
    }

    /// Build from a closed-form norm function (test oracle path).
    pub fn from_closed_form<F: Fn(f64) -> f64>(f: F, p_grid: &[f64]) -> Result<Self, NormError> {
        let c = MomentCurve {
            p_grid: p_grid.to_vec(),
            moment_norms: p_grid.iter().map(|&p| f(p)).collect(),
            source: CurveSource::Analytic,
        };
        c.assert_lyapunov(1e-10)?;
        Ok(c)
    }

    /// Lyapunov monotonicity of p -> |T|_p on a probability space.
    fn assert_lyapunov(&self, rel_tol: f64) -> Result<(), NormError> {
        for w in self.p_grid.windows(2).zip(self.moment_norms.windows(2)) {
            let (ps, ms) = w;
            if ms[1] < ms[0] * (1.0 - rel_tol) {
                return Err(NormError::DivergentInput(format!(
                    "moment curve decreases from p={} ({}) to p={} ({})",
                    ps[0], ms[0], ps[1], ms[1]
                )));
            }
        }
        Ok(())
    }
}

/// Grand Lebesgue norm: sup over the grid of |T|_p / psi(p).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlsEval {
    pub value: NormValue,
    pub argmax_p: f64,
    pub sup_ratio: f64,
    /// The ratio was still rising at the last grid point.
    pub increasing_at_end: bool,
}

pub fn gls_norm(
    curve: &MomentCurve,
    psi: &PsiFunction,
    ceiling: f64,
) -> Result<GlsEval, NormError> {
    if curve.p_grid.is_empty() {
        return Err(NormError::EmptySample);
    }
    for &p in &curve.p_grid {
        if p < psi.support_lo - 1e-12 || p > psi.support_b {
            return Err(NormError::GridOutsidePsi(format!(
                "p = {p} outside ({}, {})",
                psi.support_lo, psi.support_b
            )));
        }
    }
    let mut sup = f64::NEG_INFINITY;
    let mut argmax = curve.p_grid[0];
    let mut ratios = Vec::with_capacity(curve.p_grid.len());
    for (&p, &m) in curve.p_grid.iter().zip(&curve.moment_norms) {
        let ratio = m / psi.eval(p);
        ratios.push(ratio);
        if ratio > sup {
            sup = ratio;
            argmax = p;
        }
    }
    let n = ratios.len();
    let increasing_at_end =
        n >= 2 && ratios[n - 1] > ratios[n - 2] * (1.0 + 1e-12);
    // A ceiling breach on an unbounded p-range is the divergence signal;
    // `increasing_at_end` is reported alongside as a diagnostic (plug-in
    // moment curves saturate at max|v|, so their ratio against psi can
    // turn over even when the underlying norm is infinite).
    let divergent =
        !sup.is_finite() || (psi.support_b.is_infinite() && sup > ceiling);
    Ok(GlsEval {
        value: if divergent {
            NormValue::Divergent
        } else {
            NormValue::Finite(sup)
        },
        argmax_p: argmax,
        sup_ratio: sup,
        increasing_at_end,
    })
}

// ---------------------------------------------------------------------------
// Exponential Orlicz B(phi)
// ---------------------------------------------------------------------------

pub enum MgfSource<'a> {
    Analytic(&'a AnalyticDist),
    Empirical(&'a [f64]),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BphiEval {
    pub value: NormValue,
    /// Lambda grid actually used (empirical estimation truncates points
    /// with |lambda| * max|v| beyond the overflow cap).
    pub lambda_grid_used: Vec<f64>,
    pub truncated: bool,
}

/// Luxemburg-style norm of B(phi): the least tau such that
/// E exp(lambda T) <= exp(phi(lambda tau)) across the lambda grid,
/// located by bisection. The input must be centered.
pub fn bphi_norm(
    src: MgfSource<'_>,
    phi: &PhiFunction,
    lambda_grid: &[f64],
    ceiling: f64,
) -> Result<BphiEval, NormError> {
    if lambda_grid.is_empty() {
        return Err(NormError::EmptyDictionary);
    }

    // Centering precondition.
    match &src {
        MgfSource::Analytic(d) => {
            let mean = d.mean()?;
            let tol = 1e-6;
            if mean.abs() > tol {
                return Err(NormError::NotCentered { mean, tol });
            }
        }
        MgfSource::Empirical(values) => {
            if values.is_empty() {
                return Err(NormError::EmptySample);
            }
            let (mean, se) = crate::exec::mean_and_se(values);
            let tol = (5.0 * se).max(1e-9);
            if mean.abs() > tol {
                return Err(NormError::NotCentered { mean, tol });
            }
        }
    }

    // Materialize the mgf on the usable grid. Empirical values are
    // re-centered by their own mean first: the plug-in targets the mgf of
    // the centered law, and the O(1/sqrt(R)) residual mean would otherwise
    // dominate ln mgf at small lambda and inflate the norm without bound.
    let mut lambdas: Vec<f64> = lambda_grid.to_vec();
    let mut truncated = false;
    let centered: Option<Vec<f64>> = match &src {
        MgfSource::Empirical(values) => {
            let m = crate::exec::comp_mean(values);
            Some(values.iter().map(|v| v - m).collect())
        }
        MgfSource::Analytic(_) => None,
    };
    if let Some(values) = &centered {
        let vmax = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let before = lambdas.len();
        lambdas.retain(|l| l.abs() * vmax <= EMPIRICAL_MGF_EXPONENT_CAP);
        truncated = lambdas.len() < before;
        if lambdas.is_empty() {
            return Err(NormError::DivergentInput(
                "all lambda points exceed the empirical mgf overflow cap".into(),
            ));
        }
    }
    let mut mgf_vals = Vec::with_capacity(lambdas.len());
    for &l in &lambdas {
        let v = match (&src, &centered) {
            (MgfSource::Analytic(d), _) => d.mgf(l),
            (MgfSource::Empirical(_), Some(values)) => {
                let s = comp_sum(values.iter().map(|x| (l * x).exp()));
                let m = s / values.len() as f64;
                m.is_finite().then_some(m)
            }
            (MgfSource::Empirical(_), None) => unreachable!(),
        };
        match v {
            Some(m) => mgf_vals.push(m),
            // Divergent mgf at finite lambda: no tau can dominate.
            None => {
                return Ok(BphiEval {
                    value: NormValue::Divergent,
                    lambda_grid_used: lambdas,
                    truncated,
                })
            }
        }
    }

    let feasible = |tau: f64| {
        lambdas
            .iter()
            .zip(&mgf_vals)
            .all(|(&l, &m)| m <= (phi.eval(l * tau)).exp() * (1.0 + 1e-9))
    };

    if feasible(0.0) {
        return Ok(BphiEval {
            value: NormValue::Finite(0.0),
            lambda_grid_used: lambdas,
            truncated,
        });
    }
    if !feasible(ceiling) {
        return Ok(BphiEval {
            value: NormValue::Divergent,
            lambda_grid_used: lambdas,
            truncated,
        });
    }
    let (mut lo, mut hi) = (0.0f64, ceiling);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(BphiEval {
        value: NormValue::Finite(hi),
        lambda_grid_used: lambdas,
        truncated,
    })
}

// ---------------------------------------------------------------------------
// Lorentz quasinorm
// ---------------------------------------------------------------------------

/// Second Lorentz index: finite or infinity ("weak" norm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LorentzQ {
    Finite(f64),
    #[serde(with = "lorentz_inf")]
    Infinity,
}

mod lorentz_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let t = String::deserialize(d)?;
        if t == "inf" || t == "infinity" {
            Ok(())
        } else {
            Err(de::Error::custom("expected \"inf\""))
        }
    }
}

pub enum TailSource<'a> {
    /// Analytic tail function x -> P(|T| >= x) with an optional finite
    /// support bound (the tail must vanish beyond it).
    Analytic {
        tail: &'a dyn Fn(f64) -> f64,
        x_max: Option<f64>,
    },
    Empirical(&'a EmpiricalSample),
}

/// L_{p,q} quasinorm from the tail function:
/// finite q: (integral of tail(x)^{q/p} d(x^q))^{1/q};
/// q = infinity: sup_x x tail(x)^{1/p}.
/// The empirical evaluator integrates the step tail exactly.
pub fn lorentz_quasinorm(
    src: TailSource<'_>,
    p: f64,
    q: LorentzQ,
) -> Result<NormValue, NormError> {
    if !(p >= 1.0) {
        return Err(NormError::BadExponent(p));
    }
    if let LorentzQ::Finite(qv) = q {
        if !(qv >= 1.0) {
            return Err(NormError::BadExponent(qv));
        }
    }
    match src {
        TailSource::Empirical(sample) => {
            let sorted = sample.sorted_abs();
            let r = sorted.len() as f64;
            match q {
                LorentzQ::Finite(qv) => {
                    // Exact layer-cake over the order statistics: between
                    // consecutive points the tail is constant.
                    let mut prev = 0.0f64;
                    let terms = sorted.iter().enumerate().map(|(k, &b)| {
                        let tail = (sorted.len() - k) as f64 / r;
                        let t = tail.powf(qv / p) * (b.powf(qv) - prev.powf(qv));
                        prev = b;
                        t
                    });
                    let total = comp_sum(terms);
                    Ok(NormValue::Finite(total.powf(1.0 / qv)))
                }
                LorentzQ::Infinity => {
                    let mut sup = 0.0f64;
                    for (k, &b) in sorted.iter().enumerate() {
                        // P(|T| >= b) counts every value >= b; with ties,
                        // the first occurrence gives the largest count.
                        if k > 0 && sorted[k - 1] == b {
                            continue;
                        }
                        let tail = (sorted.len() - k) as f64 / r;
                        sup = sup.max(b * tail.powf(1.0 / p));
                    }
                    Ok(NormValue::Finite(sup))
                }
            }
        }
        TailSource::Analytic { tail, x_max } => match q {
            LorentzQ::Finite(qv) => {
                let integrand = move |x: f64| {
                    if x <= 0.0 {
                        return 0.0;
                    }
                    let t = tail(x).clamp(0.0, 1.0);
                    if t == 0.0 {
                        return 0.0;
                    }
                    t.powf(qv / p) * qv * x.powf(qv - 1.0)
                };
                let domain = match x_max {
                    Some(b) => Domain::Interval { a: 0.0, b },
                    None => Domain::HalfLine { a: 0.0 },
                };
                let req = QuadratureRequest::new(integrand, domain)
                    .with_tolerance(1e-12, 1e-10)
                    .with_max_subdivisions(512);
                let r = integrate(&req)?;
                if r.converged && r.value.is_finite() {
                    Ok(NormValue::Finite(r.value.max(0.0).powf(1.0 / qv)))
                } else {
                    Ok(NormValue::Divergent)
                }
            }
            LorentzQ::Infinity => {
                // Coarse scan then local ternary refinement around the best
                // cell; adequate for the smooth unimodal tails used here.
                let hi = x_max.unwrap_or_else(|| {
                    let mut x = 1.0;
                    while tail(x) > 1e-14 && x < 1e12 {
                        x *= 2.0;
                    }
                    x
                });
                let obj = |x: f64| x * tail(x).clamp(0.0, 1.0).powf(1.0 / p);
                let grid = 2048;
                let mut best_i = 0usize;
                let mut best = 0.0f64;
                for i in 0..=grid {
                    let x = hi * i as f64 / grid as f64;
                    let v = obj(x);
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                let mut lo = hi * best_i.saturating_sub(1) as f64 / grid as f64;
                let mut hi2 = hi * (best_i + 1).min(grid) as f64 / grid as f64;
                for _ in 0..200 {
                    let m1 = lo + (hi2 - lo) / 3.0;
                    let m2 = hi2 - (hi2 - lo) / 3.0;
                    if obj(m1) < obj(m2) {
                        lo = m1;
                    } else {
                        hi2 = m2;
                    }
                }
                let x = 0.5 * (lo + hi2);
                Ok(NormValue::Finite(obj(x).max(best)))
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnriClass {
    StrongNormal,
    NotStrongNormal,
}

/// Classification of L_{p,q}: strong normal iff min(p, q) > 2, or q = 2
/// with p >= 2.
pub fn lorentz_snri_classify(p: f64, q: f64) -> Result<SnriClass, NormError> {
    if !(p >= 1.0) {
        return Err(NormError::BadExponent(p));
    }
    if !(q >= 1.0) {
        return Err(NormError::BadExponent(q));
    }
    let r = p.min(q);
    Ok(if r > 2.0 || (q == 2.0 && p >= 2.0) {
        SnriClass::StrongNormal
    } else {
        SnriClass::NotStrongNormal
    })
}

// ---------------------------------------------------------------------------
// Associate-norm pairing lower estimate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingEntry {
    pub label: String,
    /// E (zeta tau) over the shared replicates.
    pub pairing: f64,
    /// ||zeta||_Y.
    pub norm: f64,
    /// |pairing| / norm — a certified lower estimate of ||tau||_{Y'}.
    pub estimate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: f64,
    pub best: String,
    pub entries: Vec<PairingEntry>,
}

/// max over the dictionary of |E(zeta tau)| / ||zeta||_Y. Every finite
/// value is a valid lower estimate of the associate norm of tau by the
/// generalized Holder inequality.
pub fn associate_pairing_lb(
    target: &[f64],
    dictionary: &[(String, Vec<f64>)],
    norm: &NormSpec,
) -> Result<PairingResult, NormError> {
    if dictionary.is_empty() {
        return Err(NormError::EmptyDictionary);
    }
    if target.is_empty() {
        return Err(NormError::EmptySample);
    }
    let mut entries = Vec::with_capacity(dictionary.len());
    for (label, zeta) in dictionary {
        if zeta.len() != target.len() {
            return Err(NormError::LengthMismatch(
                label.clone(),
                zeta.len(),
                target.len(),
            ));
        }
        let pairing = comp_sum(zeta.iter().zip(target).map(|(z, t)| z * t))
            / target.len() as f64;
        let sample = EmpiricalSample::new(zeta.clone(), Provenance::synthetic(label))?;
        let norm_val = match norm.evaluate_empirical(&sample)?.value {
            NormValue::Finite(v) => v,
            NormValue::Divergent => f64::INFINITY,
        };
        let estimate = if norm_val > 0.0 {
            pairing.abs() / norm_val
        } else {
            0.0
        };
        entries.push(PairingEntry {
            label: label.clone(),
            pairing,
            norm: norm_val,
            estimate,
        });
    }
    let best = entries
        .iter()
        .max_by(|a, b| a.estimate.total_cmp(&b.estimate))
        .expect("nonempty");
    Ok(PairingResult {
        value: best.estimate,
        best: best.label.clone(),
        entries: entries.clone(),
    })
}

// ---------------------------------------------------------------------------
// Exponential tail envelope from a finite G(psi_m) norm
// ---------------------------------------------------------------------------

/// Envelope x -> exp(-c x^m) implied by |T|_p <= tau p^{1/m} for p >= 2.
///
/// Chernoff through moments: P(|T| > x) <= inf_p (tau p^{1/m} / x)^p; the
/// optimum p* = (x/tau)^m / e gives exp(-(x/tau)^m / (e m)), valid once
/// p* >= 2, i.e. x >= tau (2e)^{1/m}. So c = 1 / (e m tau^m) and the
/// envelope is certified beyond `threshold_x`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub norm: f64,
    pub m: f64,
    pub c: f64,
    pub threshold_x: f64,
}

impl TailEnvelope {
    pub fn bound(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if self.c.is_infinite() {
            return 0.0;
        }
        (-self.c * x.powf(self.m)).exp()
    }
}

pub fn gls_tail_bound(norm: NormValue, m: f64) -> Result<TailEnvelope, NormError> {
    if !(m > 0.0) {
        return Err(NormError::BadExponent(m));
    }
    let tau = match norm {
        NormValue::Finite(v) => v,
        NormValue::Divergent => {
            return Err(NormError::DivergentInput(
                "tail envelope needs a finite G(psi_m) norm".into(),
            ))
        }
    };
    let c = 1.0 / (std::f64::consts::E * m * tau.powf(m));
    let threshold_x = tau * (2.0 * std::f64::consts::E).powf(1.0 / m);
    Ok(TailEnvelope {
        norm: tau,
        m,
        c,
        threshold_x,
    })
}

// ---------------------------------------------------------------------------
// Serializable norm specification
// ---------------------------------------------------------------------------

/// Grid specification for sup/inf searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: GridScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScale {
    Linear,
    Geometric,
}

impl GridSpec {
    pub fn geometric(lo: f64, hi: f64, points: usize) -> Self {
        GridSpec {
            lo,
            hi,
            points,
            scale: GridScale::Geometric,
        }
    }

    pub fn materialize(&self) -> Result<Vec<f64>, NormError> {
        if self.points < 2 || !(self.lo < self.hi) {
            return Err(NormError::BadGrid(format!("{self:?}")));
        }
        if self.scale == GridScale::Geometric && !(self.lo > 0.0) {
            return Err(NormError::BadGrid("geometric grid needs lo > 0".into()));
        }
        let n = self.points;
        Ok((0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    GridScale::Linear => self.lo + t * (self.hi - self.lo),
                    GridScale::Geometric => self.lo * (self.hi / self.lo).powf(t),
                }
            })
            .collect())
    }
}

/// Default p-grid for GLS evaluation: 64 geometric points on
/// [max(2, lo), min(B, 256)], stopping just short of a finite B.
pub fn default_p_grid(psi: &PsiFunction) -> GridSpec {
    let lo = psi.support_lo.max(2.0);
    let hi = if psi.support_b.is_finite() {
        psi.support_b * (1.0 - 1e-9)
    } else {
        256.0
    };
    GridSpec::geometric(lo, hi, 64)
}

/// Default symmetric lambda grid for B(phi) evaluation: 32 geometric
/// magnitudes per sign spanning four decades below the domain edge.
pub fn default_lambda_grid(phi: &PhiFunction) -> Vec<f64> {
    let hi = if phi.lambda0.is_finite() {
        phi.lambda0 * (1.0 - 1e-9)
    } else {
        8.0
    };
    let lo = hi * 1e-4;
    let pos: Vec<f64> = (0..32)
        .map(|i| lo * (hi / lo).powf(i as f64 / 31.0))
        .collect();
    let mut grid: Vec<f64> = pos.iter().map(|l| -l).rev().collect();
    grid.extend(pos);
    grid
}

/// Serializable psi choice for configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiSpec {
    /// "psi_m(M)" | "const(C)" | "const(C,B)"
    Named(String),
    Grid { points: Vec<[f64; 2]> },
}

impl PsiSpec {
    pub fn materialize(&self) -> Result<PsiFunction, NormError> {
        match self {
            PsiSpec::Named(name) => parse_psi_named(name).map_err(NormError::Transform),
            PsiSpec::Grid { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                PsiFunction::from_grid(&pts).map_err(NormError::Transform)
            }
        }
    }
}

fn parse_psi_named(name: &str) -> Result<PsiFunction, TransformError> {
    let name = name.trim();
    if let Some(args) = name.strip_prefix("psi_m(").and_then(|s| s.strip_suffix(')')) {
        let m: f64 = args
            .trim()
            .parse()
            .map_err(|_| TransformError::BadPsi(format!("psi_m argument `{args}`")))?;
        return PsiFunction::psi_m(m);
    }
    if let Some(args) = name.strip_prefix("const(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let c: f64 = parts[0]
            .parse()
            .map_err(|_| TransformError::BadPsi(format!("const argument `{args}`")))?;
        let b = if parts.len() > 1 {
            parts[1]
                .parse()
                .map_err(|_| TransformError::BadPsi(format!("const bound `{args}`")))?
        } else {
            f64::INFINITY
        };
        return PsiFunction::constant(c, b);
    }
    Err(TransformError::BadPsi(format!("unknown psi form `{name}`")))
}

/// Serializable phi choice for configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    /// "phi_2" | "power(Q)"
    Named(String),
    Grid { points: Vec<[f64; 2]> },
}

impl PhiSpec {
    pub fn materialize(&self) -> Result<PhiFunction, NormError> {
        match self {
            PhiSpec::Named(name) => parse_phi_named(name).map_err(NormError::Transform),
            PhiSpec::Grid { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                PhiFunction::from_grid(&pts).map_err(NormError::Transform)
            }
        }
    }
}

fn parse_phi_named(name: &str) -> Result<PhiFunction, TransformError> {
    let name = name.trim();
    if name == "phi_2" {
        return Ok(PhiFunction::phi2());
    }
    if let Some(args) = name.strip_prefix("power(").and_then(|s| s.strip_suffix(')')) {
        let q: f64 = args
            .trim()
            .parse()
            .map_err(|_| TransformError::BadPhi(format!("power argument `{args}`")))?;
        return PhiFunction::power(q);
    }
    Err(TransformError::BadPhi(format!("unknown phi form `{name}`")))
}

/// A tagged norm choice with its evaluation parameters; serializable in
/// scenario configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormSpec {
    Lp {
        p: f64,
    },
    Gls {
        psi: PsiSpec,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        ceiling: Option<f64>,
    },
    Bphi {
        phi: PhiSpec,
        #[serde(default)]
        grid: Option<GridSpec>,
        #[serde(default)]
        ceiling: Option<f64>,
    },
    Lorentz {
        p: f64,
        q: LorentzQ,
    },
}

/// Outcome of a norm evaluation with search diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEval {
    pub value: NormValue,
    /// Argmax p (GLS) or other search diagnostic, when applicable.
    pub argmax: Option<f64>,
    pub increasing_at_end: bool,
}

impl NormSpec {
    pub fn lp(p: f64) -> Self {
        NormSpec::Lp { p }
    }

    pub fn describe(&self) -> String {
        match self {
            NormSpec::Lp { p } => format!("L_{p}"),
            NormSpec::Gls { psi, .. } => match psi {
                PsiSpec::Named(n) => format!("G({n})"),
                PsiSpec::Grid { .. } => "G(grid)".into(),
            },
            NormSpec::Bphi { phi, .. } => match phi {
                PhiSpec::Named(n) => format!("B({n})"),
                PhiSpec::Grid { .. } => "B(grid)".into(),
            },
            NormSpec::Lorentz { p, q } => match q {
                LorentzQ::Finite(qv) => format!("L_{{{p},{qv}}}"),
                LorentzQ::Infinity => format!("L_{{{p},inf}}"),
            },
        }
    }

    /// Evaluate on an empirical sample.
    pub fn evaluate_empirical(&self, sample: &EmpiricalSample) -> Result<NormEval, NormError> {
        match self {
            NormSpec::Lp { p } => Ok(NormEval {
                value: NormValue::Finite(lp_norm_empirical(sample.values(), *p)?),
                argmax: None,
                increasing_at_end: false,
            }),
            NormSpec::Gls { psi, grid, ceiling } => {
                let psi_fn = psi.materialize()?;
                let grid = grid.unwrap_or_else(|| default_p_grid(&psi_fn)).materialize()?;
                let curve = MomentCurve::from_empirical(sample, &grid)?;
                let eval = gls_norm(
                    &curve,
                    &psi_fn,
                    ceiling.unwrap_or(DEFAULT_DIVERGENCE_CEILING),
                )?;
                Ok(NormEval {
                    value: eval.value,
                    argmax: Some(eval.argmax_p),
                    increasing_at_end: eval.increasing_at_end,
                })
            }
            NormSpec::Bphi { phi, grid, ceiling } => {
                let phi_fn = phi.materialize()?;
                let lambdas = match grid {
                    Some(g) => g.materialize()?,
                    None => default_lambda_grid(&phi_fn),
                };
                let eval = bphi_norm(
                    MgfSource::Empirical(sample.values()),
                    &phi_fn,
                    &lambdas,
                    ceiling.unwrap_or(DEFAULT_DIVERGENCE_CEILING),
                )?;
                Ok(NormEval {
                    value: eval.value,
                    argmax: None,
                    increasing_at_end: eval.truncated,
                })
            }
            NormSpec::Lorentz { p, q } => {
                let v = lorentz_quasinorm(TailSource::Empirical(sample), *p, *q)?;
                Ok(NormEval {
                    value: v,
                    argmax: None,
                    increasing_at_end: false,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::special;

    fn sample_from(values: Vec<f64>) -> EmpiricalSample {
        EmpiricalSample::new(values, Provenance::synthetic("test")).unwrap()
    }

    #[test]
    fn analytic_lp_norms_of_standard_normal() {
        let z = AnalyticDist::standard_normal();
        let two = lp_norm_analytic(&z, 2.0).unwrap().finite().unwrap();
        assert!((two - 1.0).abs() < 1e-9);
        let four = lp_norm_analytic(&z, 4.0).unwrap().finite().unwrap();
        assert!((four - 3.0f64.powf(0.25)).abs() < 1e-9);
        // Fractional moment against the gamma oracle.
        let frac = lp_norm_analytic(&z, 4.0 / 3.0).unwrap().finite().unwrap();
        assert!((frac - special::gaussian_abs_norm(4.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn weibull_moment_matches_gamma_formula() {
        // m = 2: E|W|^2 = Gamma(2) = 1.
        let m = 2.0;
        let fam = Family::weibull_tail(m).unwrap();
        let dist = AnalyticDist::new(
            Arc::new(move |x: f64| fam.log_density(x, 0.0).unwrap_or(f64::NEG_INFINITY)),
            Domain::FullLine,
            vec![0.0],
        );
        let got = lp_norm_analytic(&dist, 2.0).unwrap().finite().unwrap();
        assert!((got - 1.0).abs() < 1e-8, "got {got}");
        let p = 3.0;
        let want = special::weibull_tail_abs_norm(p, m);
        let got = lp_norm_analytic(&dist, p).unwrap().finite().unwrap();
        assert!((got - want).abs() < 1e-8 * want, "got {got} want {want}");
    }

    #[test]
    fn empirical_lp_plug_in() {
        let s = vec![1.0, -2.0, 2.0, -1.0];
        let n = lp_norm_empirical(&s, 2.0).unwrap();
        assert!((n - (2.5f64).sqrt()).abs() < 1e-14);
        assert!(lp_norm_empirical(&s, 0.5).is_err());
        assert!(lp_norm_empirical(&[], 2.0).is_err());
    }

    #[test]
    fn jackknife_se_shrinks_with_sample_size() {
        let key = StreamKey::new(5, 0);
        let mut stream = key.stream(0);
        let small: Vec<f64> = (0..500).map(|_| stream.standard_normal()).collect();
        let big: Vec<f64> = (0..50_000).map(|_| stream.standard_normal()).collect();
        let (_, se_small) = lp_norm_empirical_with_se(&small, 2.0).unwrap();
        let (_, se_big) = lp_norm_empirical_with_se(&big, 2.0).unwrap();
        assert!(se_big < se_small);
        // Theoretical SE of the L2 norm ~ sqrt(Var(Z^2)/n)/2 = 1/sqrt(2n).
        let want = 1.0 / (2.0 * 50_000.0f64).sqrt();
        assert!((se_big - want).abs() < 0.3 * want, "se {se_big} want {want}");
    }

    #[test]
    fn gls_norm_gaussian_with_sqrt_psi() {
        // (E|Z|^p)^{1/p} / sqrt(p) is maximal at p = 2 with value 1/sqrt(2).
        let psi = PsiFunction::psi_m(2.0).unwrap();
        let grid = GridSpec::geometric(2.0, 64.0, 64).materialize().unwrap();
        let curve =
            MomentCurve::from_closed_form(special::gaussian_abs_norm, &grid).unwrap();
        let eval = gls_norm(&curve, &psi, DEFAULT_DIVERGENCE_CEILING).unwrap();
        let v = eval.value.finite().unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9, "v {v}");
        assert!((eval.argmax_p - 2.0).abs() < 1e-12);
        assert!(!eval.increasing_at_end);
    }

    #[test]
    fn gls_norm_of_its_own_natural_function_is_one() {
        let psi = PsiFunction::psi_m(3.0).unwrap();
        let grid = GridSpec::geometric(2.0, 100.0, 48).materialize().unwrap();
        let curve = MomentCurve::from_closed_form(|p| psi.eval(p), &grid).unwrap();
        let eval = gls_norm(&curve, &psi, DEFAULT_DIVERGENCE_CEILING).unwrap();
        assert!((eval.value.finite().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gls_divergence_flag_for_heavy_tails() {
        // Stable(1.75) draws: plug-in moments grow with p without bound.
        let fam = Family::symmetric_stable(1.75).unwrap();
        let key = StreamKey::new(17, 3);
        let draws = fam.sample(0.0, 100_000, &mut key.stream(0)).unwrap();
        let sample = sample_from(draws);
        let psi = PsiFunction::psi_m(2.0).unwrap();
        let grid = GridSpec::geometric(2.0, 256.0, 64).materialize().unwrap();
        let curve = MomentCurve::from_empirical(&sample, &grid).unwrap();
        let eval = gls_norm(&curve, &psi, 20.0).unwrap();
        assert!(eval.value.is_divergent(), "{eval:?}");
        assert!(eval.sup_ratio > 20.0);

        // A Gaussian sample with the same ceiling stays finite.
        let gkey = StreamKey::new(18, 3);
        let mut s = gkey.stream(0);
        let gs: Vec<f64> = (0..100_000).map(|_| s.standard_normal()).collect();
        let gcurve = MomentCurve::from_empirical(&sample_from(gs), &grid).unwrap();
        let geval = gls_norm(&gcurve, &psi, 20.0).unwrap();
        assert!(!geval.value.is_divergent());
    }

    #[test]
    fn gls_grid_refinement_stabilizes() {
        // Boundary-argmax case: the supremum sits at p = 2, which every
        // geometric grid contains, so refinement leaves the value alone.
        let psi2 = PsiFunction::psi_m(2.0).unwrap();
        let at = |points: usize| {
            let grid = GridSpec::geometric(2.0, 64.0, points).materialize().unwrap();
            let curve =
                MomentCurve::from_closed_form(special::gaussian_abs_norm, &grid).unwrap();
            gls_norm(&curve, &psi2, 1e6).unwrap().value.finite().unwrap()
        };
        assert!((at(32) - at(128)).abs() < 1e-12);

        // Interior-argmax case: a synthetic nondecreasing curve against a
        // valley-shaped psi puts the maximum at p = sqrt(120) ~ 10.95;
        // successive refinements approach the analytic supremum from
        // below with shrinking increments.
        let psi = PsiFunction::from_eval(
            crate::transforms::FunctionForm::Analytic("valley".into()),
            1.0,
            f64::INFINITY,
            Arc::new(|p: f64| 1.0 + (p - 10.0) * (p - 10.0) / 20.0),
        )
        .unwrap();
        let at = |points: usize| {
            let grid = GridSpec::geometric(2.0, 64.0, points).materialize().unwrap();
            let curve = MomentCurve::from_closed_form(|p| p, &grid).unwrap();
            gls_norm(&curve, &psi, 1e6).unwrap().value.finite().unwrap()
        };
        let (v17, v33, v65) = (at(17), at(33), at(65));
        let pstar = 120.0f64.sqrt();
        let exact = pstar / (1.0 + (pstar - 10.0) * (pstar - 10.0) / 20.0);
        assert!(v17 <= v33 + 1e-12 && v33 <= v65 + 1e-12, "{v17} {v33} {v65}");
        assert!((exact - v65) <= (exact - v17) + 1e-12);
        assert!((v65 - exact).abs() < 5e-3 * exact, "v65 {v65} exact {exact}");
    }

    #[test]
    fn bphi_lambda_grid_refinement_tightens_rademacher() {
        // The binding constraint for the fair sign against phi_2 sits at
        // lambda -> 0; denser grids near zero push the norm toward 1.
        let phi = PhiFunction::phi2();
        let values: Vec<f64> = (0..2000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let norm_with = |lo: f64| {
            let grid: Vec<f64> = (0..24)
                .map(|i| lo * (8.0f64 / lo).powf(i as f64 / 23.0))
                .collect();
            bphi_norm(MgfSource::Empirical(&values), &phi, &grid, 1e6)
                .unwrap()
                .value
                .finite()
                .unwrap()
        };
        let coarse = norm_with(0.5);
        let fine = norm_with(1e-3);
        assert!((fine - 1.0).abs() <= (coarse - 1.0).abs());
        assert!((fine - 1.0).abs() < 1e-4, "fine {fine}");
    }

    #[test]
    fn gls_grid_outside_support_rejected() {
        let psi = PsiFunction::constant(1.0, 8.0).unwrap();
        let grid = GridSpec::geometric(2.0, 16.0, 8).materialize().unwrap();
        let curve = MomentCurve::from_closed_form(|_| 1.0, &grid).unwrap();
        assert!(matches!(
            gls_norm(&curve, &psi, 1e6),
            Err(NormError::GridOutsidePsi(_))
        ));
    }

    #[test]
    fn bphi_norm_of_standard_normal_is_one() {
        let z = AnalyticDist::standard_normal();
        let phi = PhiFunction::phi2();
        let grid = default_lambda_grid(&phi);
        let eval = bphi_norm(MgfSource::Analytic(&z), &phi, &grid, 1e6).unwrap();
        let v = eval.value.finite().unwrap();
        assert!((v - 1.0).abs() < 1e-5, "norm {v}");
    }

    #[test]
    fn bphi_norm_of_rademacher_is_one() {
        // cosh(l) <= exp((l tau)^2 / 2) for all l iff tau >= 1, with the
        // binding constraint at l -> 0.
        let phi = PhiFunction::phi2();
        let mut grid = default_lambda_grid(&phi);
        // Refine toward zero where the constraint binds.
        grid.extend([1e-3, 5e-4, -1e-3, -5e-4]);
        let values: Vec<f64> = (0..10_000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let eval = bphi_norm(MgfSource::Empirical(&values), &phi, &grid, 1e6).unwrap();
        let v = eval.value.finite().unwrap();
        assert!((v - 1.0).abs() < 1e-4, "norm {v}");
    }

    #[test]
    fn bphi_norm_of_zero_variable_is_zero() {
        let phi = PhiFunction::phi2();
        let grid = default_lambda_grid(&phi);
        let values = vec![0.0; 100];
        let eval = bphi_norm(MgfSource::Empirical(&values), &phi, &grid, 1e6).unwrap();
        assert_eq!(eval.value, NormValue::Finite(0.0));
    }

    #[test]
    fn bphi_rejects_uncentered_input() {
        let phi = PhiFunction::phi2();
        let grid = default_lambda_grid(&phi);
        let values: Vec<f64> = (0..1000).map(|i| 1.0 + (i % 2) as f64).collect();
        assert!(matches!(
            bphi_norm(MgfSource::Empirical(&values), &phi, &grid, 1e6),
            Err(NormError::NotCentered { .. })
        ));
    }

    #[test]
    fn bphi_truncates_large_lambda_on_empirical_input() {
        let phi = PhiFunction::phi2();
        let grid = vec![-100.0, -1.0, 1.0, 100.0];
        let values: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 2.0 } else { -2.0 })
            .collect();
        let eval = bphi_norm(MgfSource::Empirical(&values), &phi, &grid, 1e6).unwrap();
        assert!(eval.truncated);
        assert_eq!(eval.lambda_grid_used.len(), 2);
    }

    #[test]
    fn lorentz_weak_norm_of_uniform() {
        // sup_x x (1 - x) = 1/4 at x = 1/2.
        let tail = |x: f64| (1.0 - x).clamp(0.0, 1.0);
        let v = lorentz_quasinorm(
            TailSource::Analytic {
                tail: &tail,
                x_max: Some(1.0),
            },
            1.0,
            LorentzQ::Infinity,
        )
        .unwrap()
        .finite()
        .unwrap();
        assert!((v - 0.25).abs() < 1e-10, "v {v}");
    }

    #[test]
    fn lorentz_point_mass_weak_norm() {
        let c = 1.7;
        let sample = sample_from(vec![c; 100]);
        let v = lorentz_quasinorm(TailSource::Empirical(&sample), 2.0, LorentzQ::Infinity)
            .unwrap()
            .finite()
            .unwrap();
        assert!((v - c).abs() < 1e-14);
    }

    #[test]
    fn lorentz_pp_matches_lp_on_shared_samples() {
        let key = StreamKey::new(3, 9);
        let mut s = key.stream(0);
        let values: Vec<f64> = (0..5000).map(|_| s.standard_normal()).collect();
        let sample = sample_from(values.clone());
        for p in [1.0, 2.0, 3.0] {
            let lor = lorentz_quasinorm(
                TailSource::Empirical(&sample),
                p,
                LorentzQ::Finite(p),
            )
            .unwrap()
            .finite()
            .unwrap();
            let lp = lp_norm_empirical(&values, p).unwrap();
            let ulps = ulp_distance(lor, lp);
            assert!(ulps <= 4, "p={p}: lorentz {lor} lp {lp} ({ulps} ulps)");
        }
    }

    fn ulp_distance(a: f64, b: f64) -> u64 {
        let (ia, ib) = (a.to_bits() as i64, b.to_bits() as i64);
        (ia - ib).unsigned_abs()
    }

    #[test]
    fn lorentz_analytic_pp_matches_lp() {
        // Exponential(1): tail e^{-x}; |X|_p = Gamma(p+1)^{1/p}.
        let tail = |x: f64| (-x).exp();
        for p in [1.0, 2.0] {
            let lor = lorentz_quasinorm(
                TailSource::Analytic {
                    tail: &tail,
                    x_max: None,
                },
                p,
                LorentzQ::Finite(p),
            )
            .unwrap()
            .finite()
            .unwrap();
            let want = (special::ln_gamma(p + 1.0) / p).exp();
            assert!((lor - want).abs() < 1e-8, "p={p}: {lor} want {want}");
        }
    }

    #[test]
    fn snri_classification_table() {
        use SnriClass::*;
        assert_eq!(lorentz_snri_classify(3.0, 4.0).unwrap(), StrongNormal);
        assert_eq!(lorentz_snri_classify(5.0, 2.0).unwrap(), StrongNormal);
        assert_eq!(lorentz_snri_classify(2.0, 2.0).unwrap(), StrongNormal);
        assert_eq!(lorentz_snri_classify(1.5, 2.0).unwrap(), NotStrongNormal);
        assert_eq!(lorentz_snri_classify(4.0, 1.5).unwrap(), NotStrongNormal);
        assert_eq!(lorentz_snri_classify(2.0, 3.0).unwrap(), NotStrongNormal);
        assert!(lorentz_snri_classify(0.5, 2.0).is_err());
    }

    #[test]
    fn pairing_self_duality_of_l2() {
        let key = StreamKey::new(21, 2);
        let mut s = key.stream(0);
        let zeta: Vec<f64> = (0..20_000).map(|_| s.standard_normal()).collect();
        let dict = vec![("self".to_string(), zeta.clone())];
        let res = associate_pairing_lb(&zeta, &dict, &NormSpec::lp(2.0)).unwrap();
        // E zeta^2 / |zeta|_2 = |zeta|_2 ~ 1.
        assert!((res.value - 1.0).abs() < 0.02, "value {}", res.value);
        assert_eq!(res.best, "self");
    }

    #[test]
    fn pairing_of_constant_with_centered_target_vanishes() {
        let key = StreamKey::new(22, 2);
        let mut s = key.stream(0);
        let target: Vec<f64> = (0..20_000).map(|_| s.standard_normal()).collect();
        let dict = vec![("one".to_string(), vec![1.0; target.len()])];
        let res = associate_pairing_lb(&target, &dict, &NormSpec::lp(2.0)).unwrap();
        assert!(res.value < 0.02, "value {}", res.value);
    }

    #[test]
    fn pairing_never_exceeds_true_associate_norm() {
        // Y = L_p; the associate norm of a standard normal target is
        // |Z|_q with q = p/(p-1). Dictionary entries are Hermite-style
        // transforms realized on the shared stream.
        let key = StreamKey::new(23, 2);
        let mut s = key.stream(0);
        let z: Vec<f64> = (0..50_000).map(|_| s.standard_normal()).collect();
        for p in [2.0, 3.0, 4.0] {
            let q = p / (p - 1.0);
            let truth = special::gaussian_abs_norm(q);
            let dict = vec![
                ("identity".to_string(), z.clone()),
                (
                    "he2".to_string(),
                    z.iter().map(|v| v * v - 1.0).collect::<Vec<f64>>(),
                ),
                (
                    "he3".to_string(),
                    z.iter().map(|v| v * v * v - 3.0 * v).collect::<Vec<f64>>(),
                ),
            ];
            let res = associate_pairing_lb(&z, &dict, &NormSpec::lp(p)).unwrap();
            assert!(
                res.value <= truth * 1.02,
                "p={p}: pairing {} exceeds associate norm {truth}",
                res.value
            );
        }
    }

    #[test]
    fn pairing_requires_dictionary_and_shared_length() {
        let target = vec![1.0, 2.0];
        assert!(matches!(
            associate_pairing_lb(&target, &[], &NormSpec::lp(2.0)),
            Err(NormError::EmptyDictionary)
        ));
        let dict = vec![("bad".to_string(), vec![1.0])];
        assert!(matches!(
            associate_pairing_lb(&target, &dict, &NormSpec::lp(2.0)),
            Err(NormError::LengthMismatch(..))
        ));
    }

    #[test]
    fn tail_envelope_dominates_weibull_and_gaussian() {
        // Weibull-tail(4): true tail exp(-x^4).
        let m = 4.0;
        let grid = GridSpec::geometric(2.0, 3.9, 32).materialize().unwrap();
        let curve =
            MomentCurve::from_closed_form(|p| special::weibull_tail_abs_norm(p, m), &grid)
                .unwrap();
        let psi = PsiFunction::psi_m(m).unwrap();
        let norm = gls_norm(&curve, &psi, 1e6).unwrap().value;
        let env = gls_tail_bound(norm, m).unwrap();
        for x in [1.0, 1.5, 2.0] {
            let true_tail = (-(x as f64).powf(m)).exp();
            assert!(
                env.bound(x) >= true_tail,
                "x={x}: envelope {} below tail {true_tail}",
                env.bound(x)
            );
        }

        // Standard normal with m = 2.
        let grid = GridSpec::geometric(2.0, 64.0, 64).materialize().unwrap();
        let curve = MomentCurve::from_closed_form(special::gaussian_abs_norm, &grid).unwrap();
        let psi2 = PsiFunction::psi_m(2.0).unwrap();
        let norm = gls_norm(&curve, &psi2, 1e6).unwrap().value;
        let env = gls_tail_bound(norm, 2.0).unwrap();
        for x in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let true_tail = special::normal_two_sided_tail(x);
            assert!(
                env.bound(x) >= true_tail,
                "x={x}: envelope {} below tail {true_tail}",
                env.bound(x)
            );
        }

        // Zero variable: infinite decay rate, envelope still dominates the
        // identically-zero tail.
        let env = gls_tail_bound(NormValue::Finite(0.0), 2.0).unwrap();
        assert_eq!(env.bound(1.0), 0.0);
        assert!(gls_tail_bound(NormValue::Divergent, 2.0).is_err());
    }

    #[test]
    fn norm_spec_serde_round_trip() {
        let specs = vec![
            NormSpec::lp(2.0),
            NormSpec::Gls {
                psi: PsiSpec::Named("psi_m(2)".into()),
                grid: Some(GridSpec::geometric(2.0, 64.0, 64)),
                ceiling: None,
            },
            NormSpec::Bphi {
                phi: PhiSpec::Named("phi_2".into()),
                grid: None,
                ceiling: Some(100.0),
            },
            NormSpec::Lorentz {
                p: 2.0,
                q: LorentzQ::Infinity,
            },
            NormSpec::Lorentz {
                p: 2.0,
                q: LorentzQ::Finite(2.0),
            },
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: NormSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec, "{json}");
        }
    }

    #[test]
    fn homogeneity_of_all_norms() {
        let key = StreamKey::new(31, 4);
        let mut s = key.stream(0);
        let base: Vec<f64> = (0..20_000).map(|_| s.standard_normal()).collect();
        let specs = [
            NormSpec::lp(2.0),
            NormSpec::lp(3.0),
            NormSpec::Gls {
                psi: PsiSpec::Named("psi_m(2)".into()),
                grid: Some(GridSpec::geometric(2.0, 16.0, 16)),
                ceiling: None,
            },
            NormSpec::Lorentz {
                p: 2.0,
                q: LorentzQ::Infinity,
            },
        ];
        for spec in &specs {
            let v0 = spec
                .evaluate_empirical(&sample_from(base.clone()))
                .unwrap()
                .value
                .finite()
                .unwrap();
            for c in [-2.0, 0.5, 3.0] {
                let scaled: Vec<f64> = base.iter().map(|x| c * x).collect();
                let v = spec
                    .evaluate_empirical(&sample_from(scaled))
                    .unwrap()
                    .value
                    .finite()
                    .unwrap();
                assert!(
                    (v - c.abs() * v0).abs() <= 1e-8 * v0.max(1.0),
                    "{}: c={c} v={v} want {}",
                    spec.describe(),
                    c.abs() * v0
                );
            }
        }
    }
}
