//! Function-level machinery for the generalized norms: moment generating
//! functions psi(p) for Grand Lebesgue spaces, exponent functions
//! phi(lambda) for exponential Orlicz spaces, the Young-Fenchel conjugate,
//! the sum-stabilized envelope phi_bar, the Rosenthal-weighted psi_R, and
//! the natural (minimal) generating functions of a parametric family.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::rosenthal_bound;
use crate::families::{Family, FamilyError, FamilyKind};
use crate::quadrature::{integrate, Domain, QuadratureRequest};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("invalid psi function: {0}")]
    BadPsi(String),
    #[error("invalid phi function: {0}")]
    BadPhi(String),
    #[error("phi has unbounded curvature at 0; not admissible as an analytic form")]
    InfiniteCurvature,
    #[error("phi_bar diverges at lambda {lambda}: n*phi(lambda/sqrt(n)) still growing at n = {n_max}")]
    PhiBarDivergent { lambda: f64, n_max: u64 },
    #[error("natural function undefined: {0}")]
    NaturalUndefined(String),
    #[error("operation requires lambda0 = infinity, but phi is only defined for |lambda| < {0}")]
    FiniteLambda0(f64),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// How a generating function was constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionForm {
    Analytic(String),
    Grid,
    Natural(String),
}

impl fmt::Display for FunctionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionForm::Analytic(name) => write!(f, "{name}"),
            FunctionForm::Grid => write!(f, "grid"),
            FunctionForm::Natural(fam) => write!(f, "natural({fam})"),
        }
    }
}

/// Generating function psi(p) of a Grand Lebesgue space, positive and
/// continuous on (support_lo, support_b).
#[derive(Clone)]
pub struct PsiFunction {
    pub form: FunctionForm,
    pub support_lo: f64,
    /// Open upper end of the p-range; `f64::INFINITY` when unbounded.
    pub support_b: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiFunction")
            .field("form", &self.form)
            .field("support_lo", &self.support_lo)
            .field("support_b", &self.support_b)
            .finish()
    }
}

impl PsiFunction {
    pub fn from_eval(
        form: FunctionForm,
        support_lo: f64,
        support_b: f64,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self, TransformError> {
        if !(support_lo >= 1.0) || !(support_b > support_lo) {
            return Err(TransformError::BadPsi(format!(
                "support ({support_lo}, {support_b}) is not an interval above 1"
            )));
        }
        Ok(PsiFunction {
            form,
            support_lo,
            support_b,
            eval,
        })
    }

    /// psi_m(p) = p^{1/m} on [2, inf).
    pub fn psi_m(m: f64) -> Result<Self, TransformError> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(TransformError::BadPsi(format!("psi_m exponent {m}")));
        }
        Self::from_eval(
            FunctionForm::Analytic(format!("psi_m({m})")),
            2.0,
            f64::INFINITY,
            Arc::new(move |p: f64| p.powf(1.0 / m)),
        )
    }

    /// Constant generating function on (1, b).
    pub fn constant(c: f64, b: f64) -> Result<Self, TransformError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(TransformError::BadPsi(format!("constant level {c}")));
        }
        Self::from_eval(
            FunctionForm::Analytic(format!("const({c})")),
            1.0,
            b,
            Arc::new(move |_| c),
        )
    }

    /// Piecewise-linear tabulation on strictly increasing p-knots.
    pub fn from_grid(points: &[(f64, f64)]) -> Result<Self, TransformError> {
        if points.len() < 2 {
            return Err(TransformError::BadPsi("need at least 2 knots".into()));
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(TransformError::BadPsi("knots must strictly increase".into()));
            }
        }
        if points.iter().any(|&(p, v)| !(p >= 1.0) || !(v > 0.0) || !v.is_finite()) {
            return Err(TransformError::BadPsi(
                "knots must have p >= 1 and positive finite values".into(),
            ));
        }
        let pts: Vec<(f64, f64)> = points.to_vec();
        let lo = pts[0].0;
        let hi = pts[pts.len() - 1].0;
        Self::from_eval(
            FunctionForm::Grid,
            lo,
            hi,
            Arc::new(move |p: f64| piecewise_linear(&pts, p)),
        )
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        (self.eval)(p)
    }
}

/// Exponent function phi(lambda) of an exponential Orlicz space: even,
/// convex, phi(0) = 0, defined for |lambda| < lambda0.
#[derive(Clone)]
pub struct PhiFunction {
    pub form: FunctionForm,
    /// Open half-width of the lambda domain; `f64::INFINITY` when global.
    pub lambda0: f64,
    pub second_deriv_at_0: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFunction")
            .field("form", &self.form)
            .field("lambda0", &self.lambda0)
            .field("second_deriv_at_0", &self.second_deriv_at_0)
            .finish()
    }
}

impl PhiFunction {
    /// Strict analytic constructor: rejects unbounded curvature at the
    /// origin. `eval` is consulted on |lambda| only, so the function is
    /// even by construction.
    pub fn analytic(
        name: &str,
        lambda0: f64,
        second_deriv_at_0: f64,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self, TransformError> {
        if !second_deriv_at_0.is_finite() || second_deriv_at_0 < 0.0 {
            return Err(TransformError::InfiniteCurvature);
        }
        if !(lambda0 > 0.0) {
            return Err(TransformError::BadPhi(format!("lambda0 {lambda0}")));
        }
        Ok(PhiFunction {
            form: FunctionForm::Analytic(name.to_string()),
            lambda0,
            second_deriv_at_0,
            eval,
        })
    }

    /// Escape hatch for internally derived functions (conjugates,
    /// envelopes) that need no admissibility re-check.
    pub fn from_eval_unchecked(
        form: FunctionForm,
        lambda0: f64,
        second_deriv_at_0: f64,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Self {
        PhiFunction {
            form,
            lambda0,
            second_deriv_at_0,
            eval,
        }
    }

    /// phi_2(lambda) = lambda^2 / 2, the subgaussian exponent.
    pub fn phi2() -> Self {
        PhiFunction {
            form: FunctionForm::Analytic("phi_2".into()),
            lambda0: f64::INFINITY,
            second_deriv_at_0: 1.0,
            eval: Arc::new(|l: f64| 0.5 * l * l),
        }
    }

    /// |lambda|^q. Admissible as an analytic form only for q >= 2; the
    /// curvature at 0 is infinite for q < 2.
    pub fn power(q: f64) -> Result<Self, TransformError> {
        if !(q.is_finite() && q > 1.0) {
            return Err(TransformError::BadPhi(format!("power exponent {q}")));
        }
        if q < 2.0 {
            return Err(TransformError::InfiniteCurvature);
        }
        let second = if q == 2.0 { 2.0 } else { 0.0 };
        Ok(PhiFunction {
            form: FunctionForm::Analytic(format!("power({q})")),
            lambda0: f64::INFINITY,
            second_deriv_at_0: second,
            eval: Arc::new(move |l: f64| l.abs().powf(q)),
        })
    }

    /// Tabulated form on lambda >= 0 knots starting at (0, 0). This path
    /// bypasses the curvature admissibility check but still requires
    /// discrete convexity.
    pub fn from_grid(points: &[(f64, f64)]) -> Result<Self, TransformError> {
        if points.len() < 3 {
            return Err(TransformError::BadPhi("need at least 3 knots".into()));
        }
        if points[0].0 != 0.0 || points[0].1.abs() > 1e-12 {
            return Err(TransformError::BadPhi("first knot must be (0, 0)".into()));
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(TransformError::BadPhi("knots must strictly increase".into()));
            }
        }
        if points.iter().any(|&(_, v)| !v.is_finite() || v < -1e-12) {
            return Err(TransformError::BadPhi("values must be finite and nonnegative".into()));
        }
        // Discrete convexity: chord slopes nondecreasing.
        let mut prev_slope = f64::NEG_INFINITY;
        for w in points.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if slope < prev_slope - 1e-9 * slope.abs().max(1.0) {
                return Err(TransformError::BadPhi("tabulated phi is not convex".into()));
            }
            prev_slope = slope;
        }
        let pts: Vec<(f64, f64)> = points.to_vec();
        let lambda0 = pts[pts.len() - 1].0;
        let second = 2.0 * pts[1].1 / (pts[1].0 * pts[1].0);
        Ok(PhiFunction {
            form: FunctionForm::Grid,
            lambda0,
            second_deriv_at_0: second,
            eval: Arc::new(move |l: f64| piecewise_linear(&pts, l.abs())),
        })
    }

    #[inline]
    pub fn eval(&self, lambda: f64) -> f64 {
        (self.eval)(lambda.abs())
    }
}

fn piecewise_linear(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len();
    if x <= pts[0].0 {
        return pts[0].1;
    }
    if x >= pts[n - 1].0 {
        // Extrapolate along the last chord.
        let (x0, y0) = pts[n - 2];
        let (x1, y1) = pts[n - 1];
        return y1 + (x - x1) * (y1 - y0) / (x1 - x0);
    }
    let i = match pts.binary_search_by(|p| p.0.total_cmp(&x)) {
        Ok(i) => return pts[i].1,
        Err(i) => i - 1,
    };
    let (x0, y0) = pts[i];
    let (x1, y1) = pts[i + 1];
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

/// One point of a convex conjugate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConjugatePoint {
    pub u: f64,
    pub value: f64,
    pub maximizer: f64,
    /// Set when the supremum was still climbing at the search boundary
    /// (finite lambda0 or the expansion cap).
    pub at_boundary: bool,
}

/// Young-Fenchel transform phi*(u) = sup_lambda (lambda u - phi(lambda))
/// evaluated on a u-grid. The per-point search is a bracketed ternary
/// descent on the concave objective.
pub fn young_fenchel(
    phi: &PhiFunction,
    u_grid: &[f64],
) -> Result<Vec<ConjugatePoint>, TransformError> {
    if u_grid.is_empty() {
        return Err(TransformError::BadPhi("empty u grid".into()));
    }
    Ok(u_grid.iter().map(|&u| conjugate_at(phi, u)).collect())
}

/// Single conjugate evaluation. Even in u because phi is even.
pub fn conjugate_at(phi: &PhiFunction, u: f64) -> ConjugatePoint {
    const EXPANSION_CAP: f64 = 1e9;
    let ua = u.abs();
    let h = |l: f64| l * ua - phi.eval(l);
    let cap = if phi.lambda0.is_finite() {
        phi.lambda0 * (1.0 - 1e-12)
    } else {
        EXPANSION_CAP
    };

    // Expand the bracket by doubling while the objective still grows.
    let mut hi = 1.0f64.min(cap);
    let mut best = h(hi);
    let mut at_boundary = false;
    loop {
        let next = (hi * 2.0).min(cap);
        if next <= hi {
            // Already at the cap and still climbing.
            at_boundary = h(cap) > best + 1e-15 * best.abs().max(1.0) || {
                // Probe the slope just inside the cap.
                let probe = cap * (1.0 - 1e-9);
                h(cap) > h(probe)
            };
            hi = cap;
            break;
        }
        let v = h(next);
        if v > best {
            best = v;
            hi = next;
        } else {
            hi = next;
            break;
        }
    }

    // Ternary descent on [0, hi].
    let mut lo = 0.0f64;
    let mut hi2 = hi;
    for _ in 0..200 {
        if hi2 - lo < 1e-14 * hi2.max(1.0) {
            break;
        }
        let m1 = lo + (hi2 - lo) / 3.0;
        let m2 = hi2 - (hi2 - lo) / 3.0;
        if h(m1) < h(m2) {
            lo = m1;
        } else {
            hi2 = m2;
        }
    }
    let lam = 0.5 * (lo + hi2);
    let mut value = h(lam);
    // sup over lambda >= 0 includes lambda = 0 giving -phi(0) = 0 for
    // admissible phi; never report below it.
    if h(0.0) > value {
        value = h(0.0);
    }
    ConjugatePoint {
        u,
        value,
        maximizer: lam,
        at_boundary,
    }
}

/// The conjugate as an evaluable function (used for double conjugation).
pub fn conjugate_fn(phi: &PhiFunction) -> PhiFunction {
    let phi = phi.clone();
    let form = FunctionForm::Analytic(format!("conjugate({})", phi.form));
    PhiFunction::from_eval_unchecked(
        form,
        f64::INFINITY,
        f64::NAN,
        Arc::new(move |u: f64| conjugate_at(&phi, u).value),
    )
}

/// One point of the envelope phi_bar(lambda) = sup_n n phi(lambda/sqrt(n)).
#[derive(Debug, Clone, Copy)]
pub struct PhiBarPoint {
    pub value: f64,
    pub argmax_n: u64,
    /// The sequence was still improving when n_max was reached.
    pub diverged: bool,
}

/// Evaluate phi_bar at one lambda. The integer supremum is scanned densely
/// up to 64 and then by doublings; the scan stops once the running maximum
/// has been stable for 8 consecutive doublings. Improvements below a
/// relative 1e-12 are treated as rounding noise and do not move the
/// maximum, which keeps fixed points (phi_2) exact.
pub fn phi_bar_at(phi: &PhiFunction, lambda: f64, n_max: u64) -> PhiBarPoint {
    let term = |n: u64| {
        let nf = n as f64;
        nf * phi.eval(lambda / nf.sqrt())
    };
    let improves = |best: f64, v: f64| v > best + 1e-12 * best.abs().max(1e-300);

    let mut best = term(1);
    let mut argmax = 1u64;
    for n in 2..=64u64.min(n_max) {
        let v = term(n);
        if improves(best, v) {
            best = v;
            argmax = n;
        }
    }
    let mut stable = 0u32;
    let mut n = 64u64;
    let mut diverged = false;
    while stable < 8 {
        n = n.saturating_mul(2);
        if n > n_max {
            diverged = stable == 0;
            break;
        }
        let v = term(n);
        if improves(best, v) {
            best = v;
            argmax = n;
            stable = 0;
        } else {
            stable += 1;
        }
    }
    PhiBarPoint {
        value: best,
        argmax_n: argmax,
        diverged,
    }
}

pub const PHI_BAR_DEFAULT_N_MAX: u64 = 1 << 20;

/// phi_bar as a function, after probing the given lambdas for divergence.
pub fn phi_bar(
    phi: &PhiFunction,
    n_max: u64,
    probe_lambdas: &[f64],
) -> Result<PhiFunction, TransformError> {
    for &l in probe_lambdas {
        let pt = phi_bar_at(phi, l, n_max);
        if pt.diverged {
            return Err(TransformError::PhiBarDivergent { lambda: l, n_max });
        }
    }
    let src = phi.clone();
    let form = FunctionForm::Analytic(format!("phi_bar({})", phi.form));
    Ok(PhiFunction::from_eval_unchecked(
        form,
        phi.lambda0,
        phi.second_deriv_at_0,
        Arc::new(move |l: f64| phi_bar_at(&src, l, n_max).value),
    ))
}

/// psi_R(p) = R(p) psi(p) with the Rosenthal growth constant. Defined for
/// p >= 2; evaluations below 2 return NaN.
pub fn psi_r(psi: &PsiFunction) -> Result<PsiFunction, TransformError> {
    if psi.support_b <= 2.0 {
        return Err(TransformError::BadPsi(
            "psi_R needs support reaching past p = 2".into(),
        ));
    }
    let src = psi.clone();
    PsiFunction::from_eval(
        FunctionForm::Analytic(format!("psi_R({})", psi.form)),
        2.0f64.max(psi.support_lo),
        psi.support_b,
        Arc::new(move |p: f64| match rosenthal_bound(p) {
            Ok(r) => r * src.eval(p),
            Err(_) => f64::NAN,
        }),
    )
}

/// Natural generating function of the score family: psi_0(p) is the
/// supremum over theta of the p-norm of the score under g(., theta). For
/// shift families the integral is theta-free; for scale families it
/// factors into theta^{-1} times a theta-free integral, so the supremum
/// sits at the left end of the theta range.
pub fn natural_psi(
    family: &Family,
    theta_grid: &[f64],
) -> Result<PsiFunction, TransformError> {
    validate_theta_grid(family, theta_grid)?;
    let fam = family.clone();
    let support_b = match family {
        Family::WeibullTail { m } => *m,
        _ => f64::INFINITY,
    };
    let theta_min = theta_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let thetas = theta_grid.to_vec();
    let eval: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match family.kind() {
        FamilyKind::Shift => {
            let theta_ref = theta_grid[0];
            Arc::new(move |p: f64| score_norm_at(&fam, theta_ref, p))
        }
        FamilyKind::Scale => Arc::new(move |p: f64| {
            scale_reduced_norm(&fam, p).map(|v| v / theta_min).unwrap_or(f64::INFINITY)
        }),
        FamilyKind::General => Arc::new(move |p: f64| {
            thetas
                .iter()
                .map(|&t| score_norm_at(&fam, t, p))
                .fold(0.0, f64::max)
        }),
    };
    let psi = PsiFunction::from_eval(
        FunctionForm::Natural(family.id()),
        1.0,
        support_b,
        eval,
    )?;
    // The construction is admissible only if some p > 2 is finite.
    let probe_p = if support_b.is_finite() {
        2.0 + 0.25 * (support_b - 2.0).max(0.0)
    } else {
        2.5
    };
    let probe = psi.eval(probe_p);
    if !probe.is_finite() || probe <= 0.0 {
        return Err(TransformError::NaturalUndefined(format!(
            "score moment of order {probe_p} for {} does not converge",
            family.id()
        )));
    }
    Ok(psi)
}

/// Direct evaluation of the defining supremum (no structural shortcuts);
/// kept as the validation path for the factored forms.
pub fn natural_psi_direct(
    family: &Family,
    theta_grid: &[f64],
    p: f64,
) -> Result<f64, TransformError> {
    validate_theta_grid(family, theta_grid)?;
    Ok(theta_grid
        .iter()
        .map(|&t| score_norm_at(family, t, p))
        .fold(0.0, f64::max))
}

/// (integral of |l(x, theta)|^p g(x, theta) dx)^{1/p}; infinity when the
/// quadrature does not converge.
fn score_norm_at(family: &Family, theta: f64, p: f64) -> f64 {
    let fam = family.clone();
    let integrand = move |x: f64| {
        let lg = match fam.log_density(x, theta) {
            Ok(v) => v,
            Err(_) => return 0.0,
        };
        if lg == f64::NEG_INFINITY {
            return 0.0;
        }
        let l = match fam.score(x, theta) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        if l == 0.0 {
            return 0.0;
        }
        (p * l.abs().ln() + lg).exp()
    };
    let mut hints = family.integrand_kinks(theta);
    if family.kind() == FamilyKind::Shift {
        hints.push(theta);
    }
    let req = QuadratureRequest::new(integrand, family.support(theta))
        .with_tolerance(1e-13, 1e-11)
        .with_max_subdivisions(512)
        .with_split_points(&hints);
    match integrate(&req) {
        Ok(r) if r.converged && r.value.is_finite() && r.value >= 0.0 => r.value.powf(1.0 / p),
        _ => f64::INFINITY,
    }
}

/// Theta-free factor of the scale-family natural function:
/// (integral of |h(y) + y h'(y)|^p h(y)^{1-p} dy)^{1/p}. For the
/// exponential carrier h(y) = e^{-y} the integrand reduces to
/// |1 - y|^p e^{-y}.
fn scale_reduced_norm(family: &Family, p: f64) -> Result<f64, TransformError> {
    match family {
        Family::ExponentialScale => {
            let integrand = move |y: f64| {
                if y < 0.0 {
                    return 0.0;
                }
                let d = (1.0 - y).abs();
                if d == 0.0 {
                    return 0.0;
                }
                (p * d.ln() - y).exp()
            };
            let req = QuadratureRequest::new(integrand, Domain::HalfLine { a: 0.0 })
                .with_tolerance(1e-13, 1e-11)
                .with_max_subdivisions(512)
                .with_split_points(&[1.0]);
            let r = integrate(&req).expect("valid request");
            if r.converged && r.value.is_finite() {
                Ok(r.value.powf(1.0 / p))
            } else {
                Err(TransformError::NaturalUndefined(format!(
                    "scale integrand of order {p} did not converge"
                )))
            }
        }
        _ => Err(TransformError::NaturalUndefined(format!(
            "{} is not a scale family",
            family.id()
        ))),
    }
}

fn validate_theta_grid(family: &Family, theta_grid: &[f64]) -> Result<(), TransformError> {
    if theta_grid.is_empty() {
        return Err(TransformError::NaturalUndefined("empty theta grid".into()));
    }
    for &t in theta_grid {
        if !family.theta_in_domain(t) {
            return Err(TransformError::Family(FamilyError::ThetaOutOfDomain {
                family: family.id(),
                theta: t,
            }));
        }
    }
    // Fail fast for score-free families.
    match family {
        Family::SymmetricStable { .. } => Err(TransformError::Family(
            FamilyError::UnsupportedScore { family: family.id() },
        )),
        _ => Ok(()),
    }
}

/// Result of the constructive exponential Orlicz exponent for a family.
#[derive(Debug, Clone)]
pub struct NaturalPhi {
    pub phi: PhiFunction,
    /// Largest |lambda| for which the score moment generating function was
    /// finite on the requested grid.
    pub lambda0: f64,
    /// True when some requested lambdas were dropped because the mgf
    /// diverged there.
    pub truncated: bool,
}

/// phi_0(lambda) = sup_theta log E exp(lambda l(X, theta)) under g(., theta),
/// symmetrized over the sign of lambda so the result is an even admissible
/// exponent (for symmetric scores the symmetrization changes nothing).
pub fn natural_phi(
    family: &Family,
    theta_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<NaturalPhi, TransformError> {
    validate_theta_grid(family, theta_grid)?;
    let mut lambdas: Vec<f64> = lambda_grid
        .iter()
        .map(|l| l.abs())
        .filter(|l| *l > 0.0)
        .collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    if lambdas.is_empty() {
        return Err(TransformError::BadPhi("empty lambda grid".into()));
    }

    let mut points: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut truncated = false;
    let mut lambda0 = f64::INFINITY;
    'grid: for &l in &lambdas {
        let mut best = f64::NEG_INFINITY;
        for &sign in &[1.0, -1.0] {
            for &theta in theta_grid {
                match score_log_mgf(family, theta, sign * l) {
                    Some(v) => best = best.max(v),
                    None => {
                        truncated = true;
                        lambda0 = l;
                        break 'grid;
                    }
                }
            }
        }
        points.push((l, best));
    }
    if points.len() < 3 {
        return Err(TransformError::BadPhi(
            "score mgf diverges everywhere on the lambda grid (Cramer condition fails)".into(),
        ));
    }
    let phi = PhiFunction::from_grid(&points)?;
    Ok(NaturalPhi {
        phi,
        lambda0: if truncated {
            lambda0
        } else {
            *lambdas.last().unwrap()
        },
        truncated,
    })
}

/// log E exp(lambda l(X, theta)); None when the integral diverges.
pub(crate) fn score_log_mgf(family: &Family, theta: f64, lambda: f64) -> Option<f64> {
    let fam = family.clone();
    let integrand = move |x: f64| {
        let lg = match fam.log_density(x, theta) {
            Ok(v) => v,
            Err(_) => return 0.0,
        };
        if lg == f64::NEG_INFINITY {
            return 0.0;
        }
        let l = match fam.score(x, theta) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        (lambda * l + lg).exp()
    };
    let hints = family.integrand_kinks(theta);
    let req = QuadratureRequest::new(integrand, family.support(theta))
        .with_tolerance(1e-13, 1e-11)
        .with_max_subdivisions(512)
        .with_split_points(&hints);
    match integrate(&req) {
        Ok(r) if r.converged && r.value.is_finite() && r.value > 0.0 => Some(r.value.ln()),
        _ => None,
    }
}

/// psi_phi(p) = p / phi^{-1}(p) for phi strictly increasing on [0, inf)
/// with lambda0 = infinity; the inverse is computed by bisection.
pub fn psi_from_phi(phi: &PhiFunction) -> Result<PsiFunction, TransformError> {
    if phi.lambda0.is_finite() {
        return Err(TransformError::FiniteLambda0(phi.lambda0));
    }
    let src = phi.clone();
    PsiFunction::from_eval(
        FunctionForm::Analytic(format!("psi_phi({})", phi.form)),
        2.0,
        f64::INFINITY,
        Arc::new(move |p: f64| {
            let inv = inverse_monotone(&src, p);
            p / inv
        }),
    )
}

fn inverse_monotone(phi: &PhiFunction, target: f64) -> f64 {
    let mut hi = 1.0f64;
    let mut guard = 0;
    while phi.eval(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi.eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special;

    #[test]
    fn conjugate_of_quadratic_is_itself() {
        let phi = PhiFunction::phi2();
        for u in [-5.0, -1.5, 0.0, 0.3, 2.0, 5.0] {
            let pt = conjugate_at(&phi, u);
            assert!(!pt.at_boundary);
            assert!(
                (pt.value - 0.5 * u * u).abs() < 1e-8,
                "u={u} got {}",
                pt.value
            );
        }
    }

    #[test]
    fn conjugate_of_quartic_closed_form() {
        // sup_l (l u - l^4) at l* = (u/4)^{1/3}: value 3 (u/4)^{4/3}.
        let phi = PhiFunction::power(4.0).unwrap();
        for u in [0.1, 0.5, 1.0, 4.0, 10.0] {
            let want = 3.0 * (u / 4.0f64).powf(4.0 / 3.0);
            let got = conjugate_at(&phi, u).value;
            assert!((got - want).abs() < 1e-6 * want.max(1.0), "u={u} got {got} want {want}");
        }
    }

    #[test]
    fn double_conjugate_recovers_phi() {
        for phi in [PhiFunction::phi2(), PhiFunction::power(4.0).unwrap()] {
            let star = conjugate_fn(&phi);
            let star2 = conjugate_fn(&star);
            for l in [0.25, 0.7, 1.3, 2.4] {
                let want = phi.eval(l);
                let got = star2.eval(l);
                assert!(
                    (got - want).abs() < 1e-6 * want.max(1.0),
                    "{:?} at {l}: got {got} want {want}",
                    phi.form
                );
            }
        }
    }

    #[test]
    fn conjugate_is_convex_on_grid() {
        let phi = PhiFunction::power(4.0).unwrap();
        let grid: Vec<f64> = (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect();
        let pts = young_fenchel(&phi, &grid).unwrap();
        for w in pts.windows(3) {
            let mid = 0.5 * (w[0].value + w[2].value);
            assert!(w[1].value <= mid + 1e-9, "midpoint convexity at u={}", w[1].u);
        }
    }

    #[test]
    fn phi_bar_fixed_point_is_exact() {
        let phi = PhiFunction::phi2();
        for l in [0.1, 0.3, 1.0, 2.7, 6.0] {
            let pt = phi_bar_at(&phi, l, PHI_BAR_DEFAULT_N_MAX);
            assert!(!pt.diverged);
            assert_eq!(pt.value.to_bits(), phi.eval(l).to_bits(), "lambda {l}");
        }
    }

    #[test]
    fn phi_bar_of_quartic_peaks_at_one_copy() {
        // n (lambda/sqrt(n))^4 = lambda^4 / n, decreasing in n.
        let phi = PhiFunction::power(4.0).unwrap();
        let pt = phi_bar_at(&phi, 2.0, PHI_BAR_DEFAULT_N_MAX);
        assert_eq!(pt.argmax_n, 1);
        assert!((pt.value - 16.0).abs() < 1e-12);
    }

    #[test]
    fn phi_bar_flags_subquadratic_growth() {
        // |lambda|^{3/2}: rejected by the strict constructor, enters as a
        // tabulation; n phi(lambda/sqrt(n)) = n^{1/4} |lambda|^{3/2} -> inf.
        assert!(matches!(
            PhiFunction::power(1.5),
            Err(TransformError::InfiniteCurvature)
        ));
        let pts: Vec<(f64, f64)> = (0..=64)
            .map(|i| {
                let l = 0.125 * i as f64;
                (l, l.powf(1.5))
            })
            .collect();
        let phi = PhiFunction::from_grid(&pts).unwrap();
        let pt = phi_bar_at(&phi, 1.0, 1 << 16);
        assert!(pt.diverged);
        assert!(matches!(
            phi_bar(&phi, 1 << 16, &[1.0]),
            Err(TransformError::PhiBarDivergent { .. })
        ));
    }

    #[test]
    fn phi_bar_dominates_source_and_gaussian_floor() {
        let phi = PhiFunction::power(4.0).unwrap();
        let bar = phi_bar(&phi, PHI_BAR_DEFAULT_N_MAX, &[0.5, 1.0, 3.0]).unwrap();
        for l in [0.5, 1.0, 3.0] {
            assert!(bar.eval(l) >= phi.eval(l) - 1e-12);
            let floor = 0.5 * phi.second_deriv_at_0 * l * l;
            assert!(bar.eval(l) >= floor * (1.0 - 1e-9));
        }
    }

    #[test]
    fn psi_r_scales_by_rosenthal_constant() {
        let one = PsiFunction::constant(1.0, 8.0).unwrap();
        let pr = psi_r(&one).unwrap();
        // R(4) = 1.77638 * 4 / (e ln 4).
        let want = 1.77638 * 4.0 / (std::f64::consts::E * 4.0f64.ln());
        assert!((pr.eval(4.0) - want).abs() < 1e-12);
        // R(2) = 1 exactly.
        let half = PsiFunction::psi_m(2.0).unwrap();
        let pr2 = psi_r(&half).unwrap();
        assert_eq!(pr2.eval(2.0).to_bits(), 2.0f64.sqrt().to_bits());
    }

    #[test]
    fn natural_psi_gaussian_matches_moment_oracle() {
        let psi = natural_psi(&Family::GaussianShift, &[0.0]).unwrap();
        assert!((psi.eval(2.0) - 1.0).abs() < 1e-9);
        assert!((psi.eval(4.0) - 3.0f64.powf(0.25)).abs() < 1e-9);
        for p in [2.0, 2.5, 3.0, 4.0, 6.0] {
            let want = special::gaussian_abs_norm(p);
            assert!((psi.eval(p) - want).abs() < 1e-8 * want, "p={p}");
        }
    }

    #[test]
    fn natural_psi_laplace_is_one() {
        let psi = natural_psi(&Family::LaplaceShift, &[0.0]).unwrap();
        for p in [2.0, 3.0, 5.0, 8.0, 16.0] {
            assert!((psi.eval(p) - 1.0).abs() < 1e-8, "p={p} got {}", psi.eval(p));
        }
    }

    #[test]
    fn natural_psi_shift_families_are_theta_invariant() {
        let a = natural_psi(&Family::GaussianShift, &[0.0]).unwrap();
        let b = natural_psi(&Family::GaussianShift, &[1.7]).unwrap();
        for p in [2.0, 3.0, 4.5] {
            assert!((a.eval(p) - b.eval(p)).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn natural_psi_scale_reduction_matches_direct_integral() {
        let grid = [1.0, 1.25, 1.5, 1.75, 2.0];
        let psi = natural_psi(&Family::ExponentialScale, &grid).unwrap();
        assert!((psi.eval(2.0) - 1.0).abs() < 1e-8, "psi0(2) = {}", psi.eval(2.0));
        for p in [2.0, 2.5, 3.0, 4.0] {
            let direct = natural_psi_direct(&Family::ExponentialScale, &grid, p).unwrap();
            assert!(
                (psi.eval(p) - direct).abs() < 1e-8 * direct.max(1.0),
                "p={p}: reduced {} direct {direct}",
                psi.eval(p)
            );
        }
    }

    #[test]
    fn natural_psi_rejects_stable() {
        let st = Family::symmetric_stable(1.5).unwrap();
        assert!(natural_psi(&st, &[0.0]).is_err());
    }

    #[test]
    fn natural_phi_gaussian_is_half_square() {
        let lambdas: Vec<f64> = (1..=16).map(|i| 0.25 * i as f64).collect();
        let nat = natural_phi(&Family::GaussianShift, &[0.0], &lambdas).unwrap();
        assert!(!nat.truncated);
        for &l in &lambdas {
            assert!(
                (nat.phi.eval(l) - 0.5 * l * l).abs() < 1e-7 * (0.5 * l * l).max(1.0),
                "lambda {l}"
            );
        }
    }

    #[test]
    fn natural_phi_laplace_is_log_cosh() {
        let lambdas: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
        let nat = natural_phi(&Family::LaplaceShift, &[0.0], &lambdas).unwrap();
        for &l in &lambdas {
            let want = l.cosh().ln();
            assert!((nat.phi.eval(l) - want).abs() < 1e-7, "lambda {l}");
        }
    }

    #[test]
    fn natural_phi_truncates_on_mgf_divergence() {
        // Exponential-scale score mgf diverges at lambda >= theta = 1.
        let lambdas = [0.25, 0.5, 0.75, 1.5, 2.0];
        let nat = natural_phi(&Family::ExponentialScale, &[1.0], &lambdas).unwrap();
        assert!(nat.truncated);
        assert!(nat.lambda0 <= 1.5);
        assert!((nat.phi.eval(0.0)).abs() < 1e-12);
    }

    #[test]
    fn psi_from_phi_closed_forms() {
        let psi = psi_from_phi(&PhiFunction::phi2()).unwrap();
        // p / sqrt(2p) = sqrt(p/2).
        for p in [2.0, 4.0, 9.0] {
            assert!((psi.eval(p) - (p / 2.0).sqrt()).abs() < 1e-9, "p={p}");
        }
        let psi4 = psi_from_phi(&PhiFunction::power(4.0).unwrap()).unwrap();
        for p in [2.0, 4.0, 16.0] {
            assert!((psi4.eval(p) - p.powf(0.75)).abs() < 1e-8, "p={p}");
        }
        // lambda^2 at p = 4 inverts to 2, so psi = 2.
        let sq = PhiFunction::analytic(
            "lambda_sq",
            f64::INFINITY,
            2.0,
            std::sync::Arc::new(|l: f64| l * l),
        )
        .unwrap();
        let psi_sq = psi_from_phi(&sq).unwrap();
        assert!((psi_sq.eval(4.0) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn psi_from_phi_requires_global_domain() {
        let pts: Vec<(f64, f64)> = vec![(0.0, 0.0), (0.5, 0.2), (1.0, 0.9)];
        let phi = PhiFunction::from_grid(&pts).unwrap();
        assert!(matches!(
            psi_from_phi(&phi),
            Err(TransformError::FiniteLambda0(_))
        ));
    }
}
