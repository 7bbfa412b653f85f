//! Generalized Fisher information: the norm of the score variable under
//! g(., theta), evaluated in any supported norm family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{Family, FamilyError};
use crate::norms::{
    bphi_norm, default_lambda_grid, default_p_grid, gls_norm, lp_norm_analytic, AnalyticDist,
    GridSpec, MgfSource, MomentCurve, NormError, NormValue, DEFAULT_DIVERGENCE_CEILING,
};
use crate::transforms::{PhiFunction, PsiFunction};

#[derive(Debug, Error)]
pub enum FisherError {
    #[error("exponent must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("aggregation constant must be >= 1, got {0}")]
    BadAggregationConstant(f64),
    #[error("per-observation informations must be nonnegative and finite")]
    BadInformationVector,
    #[error("score moment generating function diverges at lambda = {0}")]
    CramerConditionFails(f64),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisherMethod {
    Quadrature,
    MonteCarlo { reps: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherReport {
    pub family: String,
    pub theta: f64,
    pub norm: String,
    pub value: NormValue,
    pub method: FisherMethod,
    /// Quadrature error estimate or Monte Carlo standard error.
    pub error_estimate: Option<f64>,
    /// Search diagnostic: the p attaining the GLS supremum, when the norm
    /// evaluation is a grid search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_p: Option<f64>,
}

/// i_p(theta) = (integral of |g'_theta|^p g^{1-p} d mu)^{1/p}, which equals
/// the L_p norm of the score under g(., theta).
pub fn fisher_p(family: &Family, theta: f64, p: f64) -> Result<FisherReport, FisherError> {
    if !(p >= 1.0) {
        return Err(FisherError::BadExponent(p));
    }
    let dist = AnalyticDist::score_of(family, theta)?;
    let value = match family.closed_form_score_norm(p, theta) {
        Some(v) => NormValue::Finite(v),
        None => lp_norm_analytic(&dist, p)?,
    };
    Ok(FisherReport {
        family: family.id(),
        theta,
        norm: format!("L_{p}"),
        value,
        method: FisherMethod::Quadrature,
        error_estimate: None,
        argmax_p: None,
    })
}

/// Grand Lebesgue information: GLS norm of the score.
pub fn fisher_gls(
    family: &Family,
    theta: f64,
    psi: &PsiFunction,
    p_grid: Option<GridSpec>,
) -> Result<FisherReport, FisherError> {
    let dist = AnalyticDist::score_of(family, theta)?;
    let grid = p_grid.unwrap_or_else(|| default_p_grid(psi)).materialize()?;
    let curve = match family.closed_form_score_norm(2.0, theta) {
        // When the whole curve has a closed form, use it directly.
        Some(_) if grid.iter().all(|&p| family.closed_form_score_norm(p, theta).is_some()) => {
            MomentCurve::from_closed_form(
                |p| family.closed_form_score_norm(p, theta).unwrap(),
                &grid,
            )?
        }
        _ => MomentCurve::from_analytic(&dist, &grid)?,
    };
    let eval = gls_norm(&curve, psi, DEFAULT_DIVERGENCE_CEILING)?;
    Ok(FisherReport {
        family: family.id(),
        theta,
        norm: format!("G({})", psi.form),
        value: eval.value,
        method: FisherMethod::Quadrature,
        error_estimate: None,
        argmax_p: Some(eval.argmax_p),
    })
}

/// Exponential Orlicz information: B(phi) norm of the score.
pub fn fisher_bphi(
    family: &Family,
    theta: f64,
    phi: &PhiFunction,
    lambda_grid: Option<&[f64]>,
) -> Result<FisherReport, FisherError> {
    let dist = AnalyticDist::score_of(family, theta)?;
    let default_grid;
    let grid = match lambda_grid {
        Some(g) => g,
        None => {
            default_grid = default_lambda_grid(phi);
            &default_grid
        }
    };
    // The uniform Cramer condition: the mgf must be finite across the grid.
    for &l in grid {
        if dist.mgf(l).is_none() {
            return Err(FisherError::CramerConditionFails(l));
        }
    }
    let eval = bphi_norm(
        MgfSource::Analytic(&dist),
        phi,
        grid,
        DEFAULT_DIVERGENCE_CEILING,
    )?;
    Ok(FisherReport {
        family: family.id(),
        theta,
        norm: format!("B({})", phi.form),
        value: eval.value,
        method: FisherMethod::Quadrature,
        error_estimate: None,
        argmax_p: None,
    })
}

/// Aggregated sample information bound K sqrt(sum i^2), reported next to
/// the naive triangle bound sum i for comparison.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AggregatedInformation {
    pub rosenthal_route: f64,
    pub triangle_route: f64,
    pub k: f64,
}

pub fn sample_fisher_agg(
    per_observation: &[f64],
    k: f64,
) -> Result<AggregatedInformation, FisherError> {
    if !(k >= 1.0) {
        return Err(FisherError::BadAggregationConstant(k));
    }
    if per_observation.is_empty()
        || per_observation.iter().any(|i| !i.is_finite() || *i < 0.0)
    {
        return Err(FisherError::BadInformationVector);
    }
    let sum_sq: f64 = crate::exec::comp_sum(per_observation.iter().map(|i| i * i));
    let sum: f64 = crate::exec::comp_sum(per_observation.iter().copied());
    Ok(AggregatedInformation {
        rosenthal_route: k * sum_sq.sqrt(),
        triangle_route: sum,
        k,
    })
}
