//! First-best tightness for a fixed segmentation and the first-best benchmark.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{lower_censorship_segmentation, perfect_segmentation, Prior, Segmentation, TightnessAllocation};
use crate::meeting::MeetingFunction;
use crate::numeric::{bisect, compensated_sum};

const PSI_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerOutcome {
    /// Shadow value of a buyer, in `(0, β)`.
    pub eta: f64,
    pub tightness: TightnessAllocation,
    pub total_surplus: f64,
    pub active: Vec<bool>,
    pub feasibility_residual: f64,
}

pub(crate) fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("buyer mass k must be positive and finite, got {k}")))
    }
}

/// `k Σ_s w_s m(τ_s) E_s[θ]`. Feasibility is not required.
pub fn surplus(prior: &Prior, seg: &Segmentation, mf: &MeetingFunction, tightness: &TightnessAllocation, k: f64) -> Result<f64> {
    let means = seg.posterior_means(prior)?;
    weighted_meetings(seg, mf, tightness, &means, k)
}

/// `k Σ_s w_s m(τ_s) v_s` for per-submarket values `v`.
pub(crate) fn weighted_meetings(
    seg: &Segmentation,
    mf: &MeetingFunction,
    tightness: &TightnessAllocation,
    values: &[f64],
    k: f64,
) -> Result<f64> {
    if tightness.values().len() != seg.len() {
        return Err(Error::invalid(format!(
            "tightness has {} entries for {} submarkets",
            tightness.values().len(),
            seg.len()
        )));
    }
    let mut terms = Vec::with_capacity(seg.len());
    for ((sm, &t), v) in seg.submarkets().iter().zip(tightness.values()).zip(values) {
        terms.push(sm.weight * mf.m(t)? * v);
    }
    Ok(k * compensated_sum(terms))
}

/// First-best tightness of a single submarket with mean type `mean` at multiplier `eta`.
pub fn planner_tightness(mf: &MeetingFunction, mean: f64, eta: f64) -> Result<f64> {
    if mf.beta() * mean > eta {
        mf.f(mean / eta)
    } else {
        Ok(0.0)
    }
}

fn psi(mf: &MeetingFunction, weights: &[f64], means: &[f64], k: f64, eta: f64) -> f64 {
    let terms = weights.iter().zip(means).map(|(w, &e)| match planner_tightness(mf, e, eta) {
        Ok(t) => w * t,
        Err(_) => f64::NAN,
    });
    k * compensated_sum(terms) - 1.0
}

/// Solves the planner's problem for a fixed segmentation: finds the multiplier
/// `η` equating `k Σ w_s f(E_s[θ]/η) 1[β E_s[θ] > η]` to one.
pub fn solve_first_best(prior: &Prior, seg: &Segmentation, mf: &MeetingFunction, k: f64) -> Result<PlannerOutcome> {
    check_k(k)?;
    let means = seg.posterior_means(prior)?;
    if means.iter().all(|&e| e <= 0.0) {
        return Err(Error::Infeasible("every submarket has zero mean type".into()));
    }
    let weights = seg.weights();
    let beta = mf.beta();
    let h = |eta: f64| psi(mf, &weights, &means, k, eta);
    let root = bisect(h, 1e-12 * beta, beta, |_, r| r.abs() <= PSI_TOL)?;
    let mut eta = root.x;
    // A submarket sitting exactly on the activity boundary: prefer the exact boundary value.
    for &e in &means {
        let b = beta * e;
        if b > 0.0 && b < beta && (b - eta).abs() <= 1e-8 * beta && h(b).abs() <= PSI_TOL {
            eta = b;
            break;
        }
    }
    let residual = h(eta);
    if !(residual.abs() <= PSI_TOL) {
        return Err(Error::solver(format!("first-best multiplier residual {residual:e} above tolerance")));
    }
    outcome_at(prior, seg, mf, k, &means, eta)
}

fn outcome_at(prior: &Prior, seg: &Segmentation, mf: &MeetingFunction, k: f64, means: &[f64], eta: f64) -> Result<PlannerOutcome> {
    let tau = means.iter().map(|&e| planner_tightness(mf, e, eta)).collect::<Result<Vec<_>>>()?;
    let active = tau.iter().map(|&t| t > 0.0).collect();
    let tightness = TightnessAllocation(tau);
    let feasibility_residual = tightness.feasibility_residual(seg, k)?;
    if feasibility_residual.abs() > FEASIBILITY_TOL {
        return Err(Error::solver(format!("first-best allocation misses feasibility by {feasibility_residual:e}")));
    }
    let total_surplus = surplus(prior, seg, mf, &tightness, k)?;
    Ok(PlannerOutcome { eta, tightness, total_surplus, active, feasibility_residual })
}

/// First best of the perfect segmentation, which weakly dominates every other segmentation.
pub fn first_best_benchmark(prior: &Prior, mf: &MeetingFunction, k: f64) -> Result<PlannerOutcome> {
    solve_first_best(prior, &perfect_segmentation(prior), mf, k)
}

/// Pools every type with `θ ≤ η/β` of the perfect benchmark and separates the
/// rest; attains the same surplus as the perfect segmentation.
pub fn lower_censorship_benchmark(prior: &Prior, mf: &MeetingFunction, k: f64) -> Result<(Segmentation, PlannerOutcome)> {
    let perfect = first_best_benchmark(prior, mf, k)?;
    let seg = lower_censorship_segmentation(prior, perfect.eta / mf.beta())?;
    let outcome = solve_first_best(prior, &seg, mf, k)?;
    Ok((seg, outcome))
}
