//! Seeded simulation engine: CLT-norm estimation, divergence probing,
//! estimator deviation norms, maximum-likelihood estimation, empirical
//! Rosenthal ratios, and end-to-end bound verification.
//!
//! Replicates are keyed by `(seed, scenario hash, replicate index)`
//! through counter-based substreams and collected in index order, so a
//! run is bit-identical for any worker count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundError};
use crate::exec::{self, ols_slope};
use crate::families::{Family, FamilyError};
use crate::norms::{
    associate_pairing_lb, lp_norm_empirical_with_se, EmpiricalSample, NormError, NormSpec,
    NormValue, PairingResult, PhiSpec, Provenance, PsiSpec,
};
use crate::rng::{fnv1a, Stream, StreamKey};
use crate::special;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("unknown distribution identifier `{0}`")]
    UnknownDist(String),
    #[error("n_grid must be nonempty and strictly ascending")]
    BadNGrid,
    #[error("verification runs need reps >= 1000, got {0}")]
    TooFewReps(u64),
    #[error("distribution must be centered: sample mean {mean} exceeds {tol}")]
    NotCentered { mean: f64, tol: f64 },
    #[error("estimator failed on {failures} of {reps} replicates (rate above 0.1%)")]
    EstimatorFailures { failures: u64, reps: u64 },
    #[error("likelihood equation has no sign change inside the parameter domain")]
    NoBracket,
    #[error("{0} has no moments of order {1}")]
    NoMoment(String, f64),
    #[error("scenario invalid: {0}")]
    BadScenario(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

// ---------------------------------------------------------------------------
// Raw centered source distributions for norm/CLT experiments
// ---------------------------------------------------------------------------

/// Distributions used directly as summands (as opposed to parametric
/// families with a score structure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceDist {
    StdNormal,
    Rademacher,
    CenteredExponential,
    Uniform01,
    SymmetricStable { alpha: f64 },
    WeibullTail { m: f64 },
    PointMass { c: f64 },
}

impl SourceDist {
    pub fn parse(id: &str) -> Result<Self, MonteCarloError> {
        let id = id.trim();
        match id {
            "normal" | "std-normal" => return Ok(SourceDist::StdNormal),
            "rademacher" => return Ok(SourceDist::Rademacher),
            "centered-exponential" => return Ok(SourceDist::CenteredExponential),
            "uniform01" => return Ok(SourceDist::Uniform01),
            _ => {}
        }
        let call = |name: &str| -> Option<f64> {
            id.strip_prefix(name)?
                .strip_prefix('(')?
                .strip_suffix(')')?
                .trim()
                .parse()
                .ok()
        };
        if let Some(alpha) = call("symmetric-stable") {
            return Ok(SourceDist::SymmetricStable { alpha });
        }
        if let Some(m) = call("weibull-tail") {
            return Ok(SourceDist::WeibullTail { m });
        }
        if let Some(c) = call("point-mass") {
            return Ok(SourceDist::PointMass { c });
        }
        Err(MonteCarloError::UnknownDist(id.to_string()))
    }

    pub fn id(&self) -> String {
        match self {
            SourceDist::StdNormal => "normal".into(),
            SourceDist::Rademacher => "rademacher".into(),
            SourceDist::CenteredExponential => "centered-exponential".into(),
            SourceDist::Uniform01 => "uniform01".into(),
            SourceDist::SymmetricStable { alpha } => format!("symmetric-stable({alpha})"),
            SourceDist::WeibullTail { m } => format!("weibull-tail({m})"),
            SourceDist::PointMass { c } => format!("point-mass({c})"),
        }
    }

    pub fn draw(&self, s: &mut Stream) -> f64 {
        match self {
            SourceDist::StdNormal => s.standard_normal(),
            SourceDist::Rademacher => s.rademacher(),
            SourceDist::CenteredExponential => s.exponential() - 1.0,
            SourceDist::Uniform01 => s.uniform_open01(),
            SourceDist::SymmetricStable { alpha } => Family::SymmetricStable { alpha: *alpha }
                .draw_unchecked(0.0, s),
            SourceDist::WeibullTail { m } => {
                Family::WeibullTail { m: *m }.draw_unchecked(0.0, s)
            }
            SourceDist::PointMass { c } => *c,
        }
    }

    /// Closed-form or quadrature |X|_p; error when no such moment exists.
    pub fn analytic_lp(&self, p: f64) -> Result<f64, MonteCarloError> {
        match self {
            SourceDist::StdNormal => Ok(special::gaussian_abs_norm(p)),
            SourceDist::Rademacher => Ok(1.0),
            SourceDist::WeibullTail { m } => Ok(special::weibull_tail_abs_norm(p, *m)),
            SourceDist::PointMass { c } => Ok(c.abs()),
            SourceDist::CenteredExponential => {
                let dist = crate::norms::AnalyticDist::new(
                    std::sync::Arc::new(|x: f64| {
                        if x < -1.0 {
                            f64::NEG_INFINITY
                        } else {
                            -(x + 1.0)
                        }
                    }),
                    crate::quadrature::Domain::HalfLine { a: -1.0 },
                    vec![0.0],
                );
                match crate::norms::lp_norm_analytic(&dist, p)? {
                    NormValue::Finite(v) => Ok(v),
                    NormValue::Divergent => Err(MonteCarloError::NoMoment(self.id(), p)),
                }
            }
            SourceDist::Uniform01 => {
                // E X^p = 1/(p+1).
                Ok((1.0 / (p + 1.0)).powf(1.0 / p))
            }
            SourceDist::SymmetricStable { alpha } => {
                Err(MonteCarloError::NoMoment(self.id(), p.max(*alpha)))
            }
        }
    }

    /// Monte Carlo centering check at the stated tolerance (5 standard
    /// errors of a pre-sample, floored at 1e-9).
    fn check_centered(&self, key: StreamKey) -> Result<(), MonteCarloError> {
        let mut s = key.stream(u64::MAX - 1);
        let pre: Vec<f64> = (0..10_000).map(|_| self.draw(&mut s)).collect();
        let (mean, se) = exec::mean_and_se(&pre);
        let tol = (5.0 * se).max(1e-9);
        if mean.abs() > tol {
            return Err(MonteCarloError::NotCentered { mean, tol });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Scenario and report types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    SampleMean,
    Mle,
}

/// Norm pairing for a verification run: the three lower-bound routes pair
/// a strong norm on the score with its associate norm on the deviation;
/// `Upper` measures the MLE deviation directly in a strong norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormPairing {
    Lp { q: f64 },
    Gls { psi: PsiSpec },
    Bphi { phi: PhiSpec },
    Upper { norm: NormSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub family: String,
    pub theta0: f64,
    pub estimator: Estimator,
    pub pairing: NormPairing,
    pub n_grid: Vec<u64>,
    pub reps: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MonteCarloError::BadNGrid);
        }
        if self.reps < 1000 {
            return Err(MonteCarloError::TooFewReps(self.reps));
        }
        match (&self.estimator, &self.pairing) {
            (Estimator::SampleMean, NormPairing::Upper { .. }) => Err(
                MonteCarloError::BadScenario(
                    "upper mode measures the MLE; use estimator = \"mle\"".into(),
                ),
            ),
            (Estimator::Mle, NormPairing::Upper { .. }) => Ok(()),
            (Estimator::Mle, _) => Err(MonteCarloError::BadScenario(
                "lower-bound mode needs the built-in unbiased estimator (sample-mean)".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Stable 64-bit hash of the canonical serialized form; keys all
    /// substreams of a run.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("scenario serializes");
        fnv1a(json.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    HoldsWithinNoise,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerN {
    pub n: u64,
    pub lhs: f64,
    pub se: Option<f64>,
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing: Option<PairingResult>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrendDiag {
    pub slope: f64,
    pub slope_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub scenario: Scenario,
    pub statement_norm: String,
    /// Lower-bound right-hand side; absent in upper mode.
    pub rhs_bound: Option<f64>,
    pub per_n: Vec<PerN>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend: Option<TrendDiag>,
}

impl BoundReport {
    /// Flat per-n rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lhs,se,margin\n");
        for row in &self.per_n {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.n,
                row.lhs,
                row.se.map(|v| v.to_string()).unwrap_or_default(),
                row.margin.map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Maximum likelihood estimation
// ---------------------------------------------------------------------------

/// Root of the score-sum equation. Families whose likelihood equation has
/// a closed-form solution (Gaussian location, exponential scale: the
/// sample mean) use it directly; the generic path brackets a sign change
/// of the score sum and bisects, then polishes with Newton steps when the
/// derivative is informative.
pub fn mle_estimate(family: &Family, sample: &[f64]) -> Result<f64, MonteCarloError> {
    if sample.is_empty() {
        return Err(MonteCarloError::Family(FamilyError::EmptySample));
    }
    match family {
        Family::GaussianShift | Family::ExponentialScale => Ok(exec::comp_mean(sample)),
        _ => mle_estimate_root(family, sample),
    }
}

/// Generic root-finding path, exposed for cross-validation against the
/// closed forms.
pub fn mle_estimate_root(family: &Family, sample: &[f64]) -> Result<f64, MonteCarloError> {
    if sample.is_empty() {
        return Err(MonteCarloError::Family(FamilyError::EmptySample));
    }
    let score_sum = |theta: f64| -> f64 {
        exec::comp_sum(
            sample
                .iter()
                .map(|&x| family.score(x, theta).unwrap_or(f64::NAN)),
        )
    };
    let (dlo, dhi) = family.param_domain();
    let mean = exec::comp_mean(sample);
    let (mut lo, mut hi) = match family.kind() {
        crate::families::FamilyKind::Scale => {
            let g = mean.abs().max(1e-6);
            ((g / 64.0).max(dlo * (1.0 + 1e-12) + 1e-300), g * 64.0)
        }
        _ => {
            let (mn, mx) = sample
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                    (a.min(x), b.max(x))
                });
            (mn - 1.0, mx + 1.0)
        }
    };
    // The score sum decreases in theta for the built-in likelihoods;
    // expand until it straddles zero.
    let mut flo = score_sum(lo);
    let mut fhi = score_sum(hi);
    let mut guard = 0;
    while flo < 0.0 && guard < 60 {
        lo = if dlo.is_finite() {
            0.5 * (lo + dlo)
        } else {
            lo - (hi - lo).abs().max(1.0)
        };
        flo = score_sum(lo);
        guard += 1;
    }
    guard = 0;
    while fhi > 0.0 && guard < 60 {
        hi = if dhi.is_finite() {
            0.5 * (hi + dhi)
        } else {
            hi + (hi - lo).abs().max(1.0)
        };
        fhi = score_sum(hi);
        guard += 1;
    }
    if !(flo >= 0.0 && fhi <= 0.0) || flo.is_nan() || fhi.is_nan() {
        return Err(MonteCarloError::NoBracket);
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = score_sum(mid);
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    let mut root = 0.5 * (lo + hi);

    // Newton polish where the score sum is differentiable.
    let h = 1e-7 * root.abs().max(1.0);
    for _ in 0..8 {
        let f = score_sum(root);
        let d = (score_sum(root + h) - score_sum(root - h)) / (2.0 * h);
        if !d.is_finite() || d.abs() < 1e-12 {
            break;
        }
        let next = root - f / d;
        if !(next > lo && next < hi) {
            break;
        }
        if score_sum(next).abs() >= f.abs() {
            break;
        }
        root = next;
    }
    Ok(root)
}

fn estimate(
    estimator: Estimator,
    family: &Family,
    sample: &[f64],
) -> Result<f64, MonteCarloError> {
    match estimator {
        Estimator::SampleMean => Ok(exec::comp_mean(sample)),
        Estimator::Mle => mle_estimate(family, sample),
    }
}

// ---------------------------------------------------------------------------
// Deviation norms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationNorm {
    pub value: NormValue,
    /// Jackknife standard error (L_p norms only).
    pub se: Option<f64>,
    pub failures: u64,
    pub reps: u64,
}

/// Per-replicate deviations sqrt(n) (est - theta0), with the normalized
/// score sum when requested (pairing dictionaries need it on the same
/// stream).
fn simulate_deviations(
    family: &Family,
    theta0: f64,
    estimator: Estimator,
    n: u64,
    reps: u64,
    key: StreamKey,
    with_scores: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>, u64), MonteCarloError> {
    let fam = family.clone();
    let rows: Vec<Result<(f64, f64), ()>> = exec::replicate_map(reps, move |r| {
        let mut s = key.stream(r);
        let xs: Vec<f64> = (0..n).map(|_| fam.draw_unchecked(theta0, &mut s)).collect();
        let est = estimate(estimator, &fam, &xs).map_err(|_| ())?;
        let dev = (n as f64).sqrt() * (est - theta0);
        let t = if with_scores {
            exec::comp_sum(xs.iter().map(|&x| fam.score(x, theta0).unwrap_or(f64::NAN)))
                / (n as f64).sqrt()
        } else {
            0.0
        };
        Ok((dev, t))
    });
    let failures = rows.iter().filter(|r| r.is_err()).count() as u64;
    if failures * 1000 > reps {
        return Err(MonteCarloError::EstimatorFailures { failures, reps });
    }
    let mut devs = Vec::with_capacity(rows.len());
    let mut scores = with_scores.then(|| Vec::with_capacity(rows.len()));
    for row in rows.into_iter().flatten() {
        devs.push(row.0);
        if let Some(sc) = scores.as_mut() {
            sc.push(row.1);
        }
    }
    Ok((devs, scores, failures))
}

/// Monte Carlo Y-norm of sqrt(n) (est - theta0) over `reps` replicates.
pub fn deviation_norm(
    family: &Family,
    theta0: f64,
    estimator: Estimator,
    n: u64,
    norm: &NormSpec,
    reps: u64,
    key: StreamKey,
) -> Result<DeviationNorm, MonteCarloError> {
    let (devs, _, failures) =
        simulate_deviations(family, theta0, estimator, n, reps, key, false)?;
    let (value, se) = match norm {
        NormSpec::Lp { p } => {
            let (v, se) = lp_norm_empirical_with_se(&devs, *p)?;
            (NormValue::Finite(v), Some(se))
        }
        _ => {
            let sample = EmpiricalSample::new(
                devs,
                Provenance {
                    source: family.id(),
                    theta: Some(theta0),
                    n,
                    stream: key.raw(),
                    reps,
                },
            )?;
            (norm.evaluate_empirical(&sample)?.value, None)
        }
    };
    Ok(DeviationNorm {
        value,
        se,
        failures,
        reps,
    })
}

// ---------------------------------------------------------------------------
// CLT norm estimation and divergence probing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltNormEstimate {
    pub dist: String,
    pub norm: String,
    pub n_grid: Vec<u64>,
    /// Per-n empirical norm of the normalized sum; `None` marks an
    /// explicit divergence flag from the norm evaluator.
    pub per_n: Vec<Option<f64>>,
    /// Running supremum over the grid prefix.
    pub running_sup: Vec<f64>,
    pub sup: f64,
    /// Log-log growth fit of norm vs n.
    pub growth_exponent: f64,
    pub growth_exponent_se: f64,
    /// Set when the fitted slope exceeds three of its standard errors, or
    /// when any norm evaluation diverged outright.
    pub divergence: bool,
}

pub fn clt_norm_estimate(
    dist: &SourceDist,
    norm: &NormSpec,
    n_grid: &[u64],
    reps: u64,
    seed: u64,
) -> Result<CltNormEstimate, MonteCarloError> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MonteCarloError::BadNGrid);
    }
    let context = fnv1a(format!("clt:{}:{}", dist.id(), norm.describe()).as_bytes());
    let base = StreamKey::new(seed, context);
    dist.check_centered(base)?;

    let mut per_n: Vec<Option<f64>> = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let key = base.child(i as u64 + 1);
        let d = dist.clone();
        let sums = exec::replicate_map(reps, move |r| {
            let mut s = key.stream(r);
            let total: f64 = (0..n).map(|_| d.draw(&mut s)).sum();
            total / (n as f64).sqrt()
        });
        let sample = EmpiricalSample::new(
            sums,
            Provenance {
                source: dist.id(),
                theta: None,
                n,
                stream: key.raw(),
                reps,
            },
        )?;
        per_n.push(norm.evaluate_empirical(&sample)?.value.finite());
    }

    let mut running_sup = Vec::with_capacity(per_n.len());
    let mut sup = 0.0f64;
    for v in &per_n {
        sup = sup.max(v.unwrap_or(f64::INFINITY));
        running_sup.push(sup);
    }

    let pts: Vec<(f64, f64)> = n_grid
        .iter()
        .zip(&per_n)
        .filter_map(|(&n, v)| v.map(|v| ((n as f64).ln(), v.max(1e-300).ln())))
        .collect();
    let (growth, growth_se) = if pts.len() >= 3 {
        let fit = ols_slope(&pts);
        (fit.slope, fit.slope_se)
    } else {
        (f64::NAN, f64::NAN)
    };
    let any_divergent = per_n.iter().any(|v| v.is_none());
    let divergence =
        any_divergent || (growth.is_finite() && growth > 3.0 * growth_se.max(1e-12));
    Ok(CltNormEstimate {
        dist: dist.id(),
        norm: norm.describe(),
        n_grid: n_grid.to_vec(),
        per_n,
        running_sup,
        sup,
        growth_exponent: growth,
        growth_exponent_se: growth_se,
        divergence,
    })
}

/// Default replicate count for a norm: 1e5 for moderate exponents, 1e6
/// once any p-grid point exceeds 8 (heavy moment noise).
pub fn default_reps_for(norm: &NormSpec) -> u64 {
    let heavy = match norm {
        NormSpec::Lp { p } => *p > 8.0,
        NormSpec::Lorentz { p, q } => {
            *p > 8.0
                || match q {
                    crate::norms::LorentzQ::Finite(qv) => *qv > 8.0,
                    crate::norms::LorentzQ::Infinity => false,
                }
        }
        NormSpec::Gls { psi, grid, .. } => {
            let hi = match grid {
                Some(g) => g.hi,
                None => match psi.materialize() {
                    Ok(f) => crate::norms::default_p_grid(&f).hi,
                    Err(_) => 8.0,
                },
            };
            hi > 8.0
        }
        NormSpec::Bphi { .. } => false,
    };
    if heavy {
        1_000_000
    } else {
        100_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WnriVerdict {
    WnriConsistent,
    DivergenceDetected,
}

/// Empirical probe of the weak-normality property: consistent when the
/// normalized-sum norms stay flat over the n-grid, divergence when they
/// grow with statistical significance.
pub fn wnri_probe(
    dist: &SourceDist,
    norm: &NormSpec,
    n_grid: &[u64],
    reps: u64,
    seed: u64,
) -> Result<(WnriVerdict, CltNormEstimate), MonteCarloError> {
    let est = clt_norm_estimate(dist, norm, n_grid, reps, seed)?;
    let verdict = if est.divergence {
        WnriVerdict::DivergenceDetected
    } else {
        WnriVerdict::WnriConsistent
    };
    Ok((verdict, est))
}

// ---------------------------------------------------------------------------
// Empirical Rosenthal ratio check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RosenthalCheck {
    pub dist: String,
    pub p: f64,
    pub n_grid: Vec<u64>,
    /// Per-n |sum|_p / (R(p) sqrt(n) |eta|_p).
    pub ratios: Vec<f64>,
    pub ratio_ses: Vec<f64>,
    pub max_ratio: f64,
    pub rosenthal: f64,
    pub base_norm: f64,
}

pub fn rosenthal_empirical_check(
    dist: &SourceDist,
    p: f64,
    n_grid: &[u64],
    reps: u64,
    seed: u64,
) -> Result<RosenthalCheck, MonteCarloError> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MonteCarloError::BadNGrid);
    }
    let r_const = bounds::rosenthal_bound(p)?;
    let base_norm = dist.analytic_lp(p)?;
    let context = fnv1a(format!("rosenthal:{}:{}", dist.id(), p).as_bytes());
    let base = StreamKey::new(seed, context);
    dist.check_centered(base)?;

    let mut ratios = Vec::with_capacity(n_grid.len());
    let mut ratio_ses = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let key = base.child(i as u64 + 1);
        let d = dist.clone();
        let sums = exec::replicate_map(reps, move |r| {
            let mut s = key.stream(r);
            (0..n).map(|_| d.draw(&mut s)).sum::<f64>()
        });
        let (norm, se) = lp_norm_empirical_with_se(&sums, p)?;
        let denom = r_const * (n as f64).sqrt() * base_norm;
        ratios.push(norm / denom);
        ratio_ses.push(se / denom);
    }
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RosenthalCheck {
        dist: dist.id(),
        p,
        n_grid: n_grid.to_vec(),
        ratios,
        ratio_ses,
        max_ratio,
        rosenthal: r_const,
        base_norm,
    })
}

// ---------------------------------------------------------------------------
// End-to-end bound verification
// ---------------------------------------------------------------------------

/// Run a scenario end to end. Lower-bound mode computes the right-hand
/// side analytically and the left-hand side by Monte Carlo: directly in
/// L_q for the Lebesgue pairing, through the associate pairing estimate
/// (score sum plus low-order Hermite transforms of it) for the Grand
/// Lebesgue and exponential Orlicz pairings, where the verdict is either
/// `Holds` or `Inconclusive` (a lower estimate below the bound proves
/// nothing). Upper mode checks that the normalized MLE deviation in the
/// strong norm carries no positive log-log trend.
pub fn verify_bound(scenario: &Scenario) -> Result<BoundReport, MonteCarloError> {
    let family = Family::parse(&scenario.family)?;
    verify_bound_with(&family, scenario)
}

/// As [`verify_bound`], with the family supplied directly (config-defined
/// tabulated families). The scenario's family id must match.
pub fn verify_bound_with(
    family: &Family,
    scenario: &Scenario,
) -> Result<BoundReport, MonteCarloError> {
    scenario.validate()?;
    if family.id() != scenario.family {
        return Err(MonteCarloError::BadScenario(format!(
            "scenario names family `{}` but `{}` was supplied",
            scenario.family,
            family.id()
        )));
    }
    let family = family.clone();
    let hash = scenario.hash();
    let base = StreamKey::new(scenario.seed, hash);

    match &scenario.pairing {
        NormPairing::Lp { q } => {
            let rhs = bounds::lower_bound_lp(&family, scenario.theta0, *q)?;
            let norm = NormSpec::lp(*q);
            let mut per_n = Vec::new();
            for (i, &n) in scenario.n_grid.iter().enumerate() {
                let key = base.child(i as u64 + 1);
                let dev = deviation_norm(
                    &family,
                    scenario.theta0,
                    scenario.estimator,
                    n,
                    &norm,
                    scenario.reps,
                    key,
                )?;
                let lhs = dev.value.finite().unwrap_or(f64::INFINITY);
                per_n.push(PerN {
                    n,
                    lhs,
                    se: dev.se,
                    margin: Some(lhs - rhs.bound),
                    pairing: None,
                });
            }
            let verdict = lower_bound_verdict(&per_n, rhs.bound);
            Ok(BoundReport {
                scenario: scenario.clone(),
                statement_norm: format!("L_{q}"),
                rhs_bound: Some(rhs.bound),
                per_n,
                verdict,
                trend: None,
            })
        }
        NormPairing::Gls { psi } => {
            let psi_fn = psi.materialize()?;
            let rhs = bounds::lower_bound_gls(&family, scenario.theta0, &psi_fn)?;
            let strong_norm = NormSpec::Gls {
                psi: psi.clone(),
                grid: None,
                ceiling: None,
            };
            let (per_n, verdict) =
                pairing_lhs(scenario, &family, base, &strong_norm, rhs.bound)?;
            Ok(BoundReport {
                scenario: scenario.clone(),
                statement_norm: rhs.statement_norm.clone(),
                rhs_bound: Some(rhs.bound),
                per_n,
                verdict,
                trend: None,
            })
        }
        NormPairing::Bphi { phi } => {
            let phi_fn = phi.materialize()?;
            let rhs = bounds::lower_bound_bphi(&family, scenario.theta0, &phi_fn)?;
            let strong_norm = NormSpec::Bphi {
                phi: phi.clone(),
                grid: None,
                ceiling: None,
            };
            let (per_n, verdict) =
                pairing_lhs(scenario, &family, base, &strong_norm, rhs.bound)?;
            Ok(BoundReport {
                scenario: scenario.clone(),
                statement_norm: rhs.statement_norm.clone(),
                rhs_bound: Some(rhs.bound),
                per_n,
                verdict,
                trend: None,
            })
        }
        NormPairing::Upper { norm } => {
            let mut per_n = Vec::new();
            for (i, &n) in scenario.n_grid.iter().enumerate() {
                let key = base.child(i as u64 + 1);
                let dev = deviation_norm(
                    &family,
                    scenario.theta0,
                    scenario.estimator,
                    n,
                    norm,
                    scenario.reps,
                    key,
                )?;
                let lhs = dev.value.finite().unwrap_or(f64::INFINITY);
                per_n.push(PerN {
                    n,
                    lhs,
                    se: dev.se,
                    margin: None,
                    pairing: None,
                });
            }
            let pts: Vec<(f64, f64)> = per_n
                .iter()
                .map(|r| ((r.n as f64).ln(), r.lhs.max(1e-300).ln()))
                .collect();
            let fit = ols_slope(&pts);
            // Residual slope SEs are nearly dof-free on short grids; fold
            // in the per-n jackknife errors (on the log scale) and use the
            // larger of the two.
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let log_ses: Vec<f64> = per_n
                .iter()
                .map(|r| r.se.unwrap_or(0.0) / r.lhs.max(1e-300))
                .collect();
            let slope_se = fit
                .slope_se
                .max(exec::slope_se_from_point_ses(&xs, &log_ses));
            let verdict = if fit.slope <= 3.0 * slope_se.max(1e-12) {
                Verdict::Holds
            } else {
                Verdict::Violated
            };
            Ok(BoundReport {
                scenario: scenario.clone(),
                statement_norm: norm.describe(),
                rhs_bound: None,
                per_n,
                verdict,
                trend: Some(TrendDiag {
                    slope: fit.slope,
                    slope_se,
                }),
            })
        }
    }
}

/// Associate-norm left-hand side for the GLS/Bphi pairings: the certified
/// pairing lower estimate against the score-sum dictionary.
fn pairing_lhs(
    scenario: &Scenario,
    family: &Family,
    base: StreamKey,
    strong_norm: &NormSpec,
    rhs: f64,
) -> Result<(Vec<PerN>, Verdict), MonteCarloError> {
    let mut per_n = Vec::new();
    let mut all_hold = true;
    for (i, &n) in scenario.n_grid.iter().enumerate() {
        let key = base.child(i as u64 + 1);
        let (devs, scores, _) = simulate_deviations(
            family,
            scenario.theta0,
            scenario.estimator,
            n,
            scenario.reps,
            key,
            true,
        )?;
        let t = scores.expect("scores requested");
        // Standardize before forming Hermite transforms, then re-center
        // empirically so the dictionary is admissible for every norm.
        let (t_mean, _) = exec::mean_and_se(&t);
        let t_sd = {
            let ss = exec::comp_sum(t.iter().map(|v| (v - t_mean) * (v - t_mean)));
            (ss / (t.len() as f64 - 1.0)).sqrt()
        };
        let tn: Vec<f64> = t.iter().map(|v| (v - t_mean) / t_sd).collect();
        let he2_raw: Vec<f64> = tn.iter().map(|v| v * v - 1.0).collect();
        let he3_raw: Vec<f64> = tn.iter().map(|v| v * v * v - 3.0 * v).collect();
        let center = |mut v: Vec<f64>| {
            let m = exec::comp_mean(&v);
            v.iter_mut().for_each(|x| *x -= m);
            v
        };
        let dict = vec![
            ("score-sum".to_string(), t),
            ("hermite-2".to_string(), center(he2_raw)),
            ("hermite-3".to_string(), center(he3_raw)),
        ];
        let pairing = associate_pairing_lb(&devs, &dict, strong_norm)?;
        let lhs = pairing.value;
        if lhs < rhs {
            all_hold = false;
        }
        per_n.push(PerN {
            n,
            lhs,
            se: None,
            margin: Some(lhs - rhs),
            pairing: Some(pairing),
        });
    }
    let verdict = if all_hold {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    };
    Ok((per_n, verdict))
}

fn lower_bound_verdict(per_n: &[PerN], rhs: f64) -> Verdict {
    let all_hold = per_n.iter().all(|r| r.lhs >= rhs);
    if all_hold {
        return Verdict::Holds;
    }
    let within_noise = per_n
        .iter()
        .all(|r| r.lhs + 3.0 * r.se.unwrap_or(0.0) >= rhs);
    if within_noise {
        Verdict::HoldsWithinNoise
    } else {
        Verdict::Violated
    }
}
