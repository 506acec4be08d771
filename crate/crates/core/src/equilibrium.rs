//! Search equilibrium of a segmentation via the scalar fixed point in the reservation value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Prior, Segmentation, SurplusSplit, TightnessAllocation};
use crate::meeting::MeetingFunction;
use crate::numeric::{bisect, compensated_sum};
use crate::planner::{check_k, surplus, weighted_meetings};

const FIXED_POINT_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOutcome {
    /// Buyers' reservation value.
    pub u_star: f64,
    pub tightness: TightnessAllocation,
    pub buyer_payoff: f64,
    pub total_surplus: f64,
    pub active: Vec<bool>,
    /// `Φ(u*) − u*`.
    pub fixed_point_residual: f64,
    pub feasibility_residual: f64,
}

/// Tightness at which a buyer is indifferent between a submarket with buyer
/// value `v = E[λθ]` and the reservation value `u`; zero where even the
/// first buyer cannot earn `u`.
pub fn best_response(mf: &MeetingFunction, v: f64, u: f64) -> f64 {
    if mf.beta() * v > u {
        mf.g_raw(v / u)
    } else {
        0.0
    }
}

pub fn best_response_tightness(mf: &MeetingFunction, means_lambda_theta: &[f64], u: f64) -> Result<Vec<f64>> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::domain(format!("reservation value must be positive, got {u}")));
    }
    Ok(means_lambda_theta.iter().map(|&v| best_response(mf, v, u)).collect())
}

/// `Φ(u) = k Σ_s w_s m(φ_s(u)) v_s`, the buyer payoff generated when every
/// submarket is filled to indifference at `u`.
pub fn reservation_map(mf: &MeetingFunction, weights: &[f64], buyer_values: &[f64], k: f64, u: f64) -> f64 {
    k * compensated_sum(
        weights
            .iter()
            .zip(buyer_values)
            .map(|(w, &v)| w * mf.m_raw(best_response(mf, v, u)) * v),
    )
}

/// Solves `Φ(u) = u` on `(0, β max_s E_s[λθ])` and returns the equilibrium allocation.
pub fn solve_equilibrium(
    prior: &Prior,
    seg: &Segmentation,
    mf: &MeetingFunction,
    k: f64,
    split: &SurplusSplit,
) -> Result<EquilibriumOutcome> {
    check_k(k)?;
    split.check_nontrivial(prior)?;
    let values = seg.expectations(prior, &split.buyer_values_on(prior)?)?;
    let vmax = values.iter().copied().fold(0.0, f64::max);
    if vmax <= 0.0 {
        return Err(Error::Assumption("non-triviality: no submarket offers buyers a positive value".into()));
    }
    let weights = seg.weights();
    let h = |u: f64| reservation_map(mf, &weights, &values, k, u) - u;
    let hi = mf.beta() * vmax;
    let lo = 1e-14 * hi;
    if h(lo) <= 0.0 {
        return Err(Error::solver("reservation map is not above the diagonal near zero"));
    }
    let root = bisect(h, lo, hi, |u, r| r.abs() <= FIXED_POINT_TOL && r.abs() <= 1e-10 * u)?;
    let u0 = root.x;
    // Near a submarket's activity boundary the best response can rise from zero
    // faster than floating point resolves u (urn-ball g grows like 1/ln), so
    // boundary candidates fix u there and take that submarket's tightness from
    // feasibility instead.
    let mut candidates = Vec::new();
    for &v in &values {
        let b = mf.beta() * v;
        if b > lo && b < hi && (b - u0).abs() <= 1e-7 * hi && !candidates.iter().any(|(u, _): &(f64, Vec<f64>)| (*u - b).abs() <= f64::EPSILON * b) {
            if let Some(c) = boundary_candidate(mf, &weights, &values, k, b) {
                candidates.push(c);
            }
        }
    }
    candidates.push((u0, values.iter().map(|&v| best_response(mf, v, u0)).collect()));
    let mut last_err = None;
    for (u, tau) in candidates {
        match outcome_at(prior, seg, mf, k, &values, u, tau) {
            Ok(o) => return Ok(o),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::solver("no equilibrium candidate")))
}

/// Allocation with `u` pinned at the boundary `b = β v_s` of the submarkets
/// whose buyer value equals `v_s`; those absorb whatever buyer mass the
/// others leave over. Returns `None` when that remainder is negative.
fn boundary_candidate(mf: &MeetingFunction, weights: &[f64], values: &[f64], k: f64, b: f64) -> Option<(f64, Vec<f64>)> {
    let on_boundary: Vec<bool> = values.iter().map(|&v| (mf.beta() * v - b).abs() <= f64::EPSILON * b).collect();
    let mut tau: Vec<f64> =
        values.iter().zip(&on_boundary).map(|(&v, &on)| if on { 0.0 } else { best_response(mf, v, b) }).collect();
    let used = compensated_sum(weights.iter().zip(&tau).map(|(w, t)| w * t));
    let left = 1.0 / k - used;
    let boundary_weight = compensated_sum(weights.iter().zip(&on_boundary).filter(|(_, on)| **on).map(|(w, _)| *w));
    if left.abs() <= 1e-13 / k {
        return Some((b, tau));
    }
    if left < 0.0 {
        return None;
    }
    let t = left / boundary_weight;
    for (x, &on) in tau.iter_mut().zip(&on_boundary) {
        if on {
            *x = t;
        }
    }
    // the true root lies strictly below the boundary, by less than an ulp
    Some((f64::from_bits(b.to_bits() - 1), tau))
}

fn outcome_at(
    prior: &Prior,
    seg: &Segmentation,
    mf: &MeetingFunction,
    k: f64,
    values: &[f64],
    u: f64,
    tau: Vec<f64>,
) -> Result<EquilibriumOutcome> {
    for (&t, &v) in tau.iter().zip(values) {
        let ok = if t > 0.0 {
            mf.beta() * v > u && (mf.m_raw(t) / t * v - u).abs() <= FIXED_POINT_TOL.max(1e-9 * u)
        } else {
            mf.beta() * v <= u
        };
        if !ok {
            return Err(Error::solver(format!("indifference fails in a submarket at u = {u}")));
        }
    }
    let active = tau.iter().map(|&t| t > 0.0).collect();
    let tightness = TightnessAllocation(tau);
    let buyer_payoff = weighted_meetings(seg, mf, &tightness, values, k)?;
    let fixed_point_residual = buyer_payoff - u;
    let feasibility_residual = tightness.feasibility_residual(seg, k)?;
    if fixed_point_residual.abs() > FIXED_POINT_TOL || feasibility_residual.abs() > FEASIBILITY_TOL {
        return Err(Error::solver(format!(
            "equilibrium residuals too large: fixed point {fixed_point_residual:e}, feasibility {feasibility_residual:e}"
        )));
    }
    let total_surplus = surplus(prior, seg, mf, &tightness, k)?;
    Ok(EquilibriumOutcome { u_star: u, tightness, buyer_payoff, total_surplus, active, fixed_point_residual, feasibility_residual })
}

/// Buyers' ex-ante payoff `k Σ_s w_s m(τ_s) E_s[λθ]` of an allocation.
pub fn buyer_payoff_of(
    prior: &Prior,
    seg: &Segmentation,
    mf: &MeetingFunction,
    tightness: &TightnessAllocation,
    split: &SurplusSplit,
    k: f64,
) -> Result<f64> {
    let values = seg.expectations(prior, &split.buyer_values_on(prior)?)?;
    weighted_meetings(seg, mf, tightness, &values, k)
}
