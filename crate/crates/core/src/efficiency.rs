//! Hosios diagnostics for the perfect segmentation and the split that decentralizes the first best.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Prior, SurplusSplit};
use crate::meeting::MeetingFunction;
use crate::planner::first_best_benchmark;

pub const HOSIOS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HosiosReport {
    pub holds: bool,
    /// First-best multiplier of the perfect segmentation.
    pub eta_ps: f64,
    /// `η/β`: types at or below it are idle in the first best.
    pub cutoff: f64,
    /// The buyer share the split implies at the cutoff (see [`check_hosios`]).
    pub lambda_at_cutoff: f64,
    pub max_violation_below: f64,
    pub max_violation_above: f64,
}

/// Tests whether `split` makes the perfect-segmentation equilibrium first best.
///
/// Above the cutoff the split must be proportional to `ε(f(θ/η))`; below it,
/// `λ(θ)θ` must not exceed `λ(c)c`. On a grid the cutoff generally falls
/// between types, so `λ(c)` is taken as the proportionality constant revealed
/// by the first active type, `λ(θ_j)/ε(f(θ_j/η))`. This is the value the
/// equilibrium itself pins down (`u* = λ(c)η`), and it coincides with the
/// share at the cutoff whenever the split is continuous and satisfies the
/// condition.
pub fn check_hosios(prior: &Prior, mf: &MeetingFunction, k: f64, split: &SurplusSplit) -> Result<HosiosReport> {
    check_hosios_with_tol(prior, mf, k, split, HOSIOS_TOL)
}

/// [`check_hosios`] with a caller-chosen tolerance on both violations.
pub fn check_hosios_with_tol(
    prior: &Prior,
    mf: &MeetingFunction,
    k: f64,
    split: &SurplusSplit,
    tol: f64,
) -> Result<HosiosReport> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be finite and non-negative, got {tol}")));
    }
    split.check_nontrivial(prior)?;
    let lambda = split.values_on(prior)?;
    let fb = first_best_benchmark(prior, mf, k)?;
    let eta = fb.eta;
    let cutoff = eta / mf.beta();
    let grid = prior.grid();
    let first_active = fb
        .active
        .iter()
        .position(|&a| a)
        .ok_or_else(|| Error::solver("perfect first best has no active type"))?;
    let eps = |j: usize| -> Result<f64> { mf.elasticity(fb.tightness.values()[j]) };
    let lambda_c = lambda[first_active] / eps(first_active)?;
    let mut below = f64::NEG_INFINITY;
    let mut above: f64 = 0.0;
    for j in 0..grid.len() {
        if fb.active[j] {
            above = above.max((lambda[j] - lambda_c * eps(j)?).abs());
        } else {
            below = below.max(lambda[j] * grid[j] - lambda_c * cutoff);
        }
    }
    let max_violation_below = below.max(0.0);
    Ok(HosiosReport {
        holds: max_violation_below <= tol && above <= tol,
        eta_ps: eta,
        cutoff,
        lambda_at_cutoff: lambda_c,
        max_violation_below,
        max_violation_above: above,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HosiosSplit {
    pub split: SurplusSplit,
    pub eta_ps: f64,
    /// Some share exceeded one and was clamped; the result then fails the condition.
    pub clamped: bool,
}

/// Builds `λ(θ) = λ_c ε(f(θ/η))` above the cutoff and `λ(θ) = λ_c` below it.
pub fn hosios_compatible_split(prior: &Prior, mf: &MeetingFunction, k: f64, lambda_at_cutoff: f64) -> Result<HosiosSplit> {
    if !(lambda_at_cutoff > 0.0 && lambda_at_cutoff <= 1.0) {
        return Err(Error::invalid(format!("lambda_at_cutoff must lie in (0, 1], got {lambda_at_cutoff}")));
    }
    let fb = first_best_benchmark(prior, mf, k)?;
    let mut clamped = false;
    let mut values = Vec::with_capacity(prior.len());
    for (j, &active) in fb.active.iter().enumerate() {
        let raw = if active {
            lambda_at_cutoff * mf.elasticity(fb.tightness.values()[j])?
        } else {
            lambda_at_cutoff
        };
        if raw > 1.0 {
            clamped = true;
        }
        values.push(raw.clamp(0.0, 1.0));
    }
    Ok(HosiosSplit { split: SurplusSplit::table(values)?, eta_ps: fb.eta, clamped })
}
