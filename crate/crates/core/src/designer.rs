//! Constrained-efficient segmentations under a constant surplus split.
//!
//! With a convex odds map the optimum pools every type below a cutoff into an
//! idle low submarket and every type above it into one active high submarket.
//! The cutoff for a reservation value `u` is where the tangent of
//! `x ↦ g(ℓx/u)` at the high pool's mean crosses zero; the outer problem picks
//! the `u` at which that segmentation exactly absorbs the buyer mass.

use serde::Serialize;

use crate::equilibrium::{best_response, solve_equilibrium, EquilibriumOutcome};
use crate::error::{Error, Result};
use crate::market::{binary_segmentation, perfect_segmentation, pooled_segmentation, Prior, Segmentation, SurplusSplit};
use crate::meeting::{Curvature, MeetingFunction};
use crate::numeric::{bisect, compensated_sum};
use crate::oracle::{find_u_bar, lp_value, LpSolution};
use crate::planner::check_k;

const OUTER_TOL: f64 = 1e-10;
const ENVELOPE_TOL: f64 = 1e-9;
const MEAN_TOL: f64 = 1e-10;
const CERTIFICATE_PROBE: usize = 1000;

/// Mass and mean of a pool of types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pool {
    pub mass: f64,
    pub mean: f64,
}

/// A distribution of seller types that can be cut into a low and a high pool.
///
/// Cuts are indexed by a piece `p` and a share `w ∈ [0, 1]` of that piece sent
/// to the low pool along with every piece below it. On a grid each atom is a
/// piece; a continuum is a single piece.
pub trait SellerTypes {
    fn piece_count(&self) -> usize;
    fn high_pool(&self, piece: usize, w: f64) -> Pool;
    fn low_pool(&self, piece: usize, w: f64) -> Option<Pool>;
    /// Lowest type left in the high pool (the limit from below at `w = 1`).
    fn boundary(&self, piece: usize, w: f64) -> f64;
    fn support(&self) -> (f64, f64);
    fn mean(&self) -> f64;
    /// `(E[θ | θ ≤ x], E[θ | θ ≥ x])`, with an atom at `x` counted on both sides.
    fn conditional_means(&self, x: f64) -> Result<(f64, f64)>;
    /// `E[(a + bθ) 1{θ ≥ c}]`.
    fn truncated_linear(&self, c: f64, a: f64, b: f64) -> f64;
}

/// Uniform types on `[0, 1]`; the continuum limit of midpoint grids.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UniformContinuum;

impl SellerTypes for UniformContinuum {
    fn piece_count(&self) -> usize {
        1
    }

    fn high_pool(&self, _: usize, w: f64) -> Pool {
        Pool { mass: 1.0 - w, mean: 0.5 * (1.0 + w) }
    }

    fn low_pool(&self, _: usize, w: f64) -> Option<Pool> {
        (w > 0.0).then_some(Pool { mass: w, mean: 0.5 * w })
    }

    fn boundary(&self, _: usize, w: f64) -> f64 {
        w
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn mean(&self) -> f64 {
        0.5
    }

    fn conditional_means(&self, x: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("type {x} outside [0, 1]")));
        }
        Ok((0.5 * x, 0.5 * (1.0 + x)))
    }

    fn truncated_linear(&self, c: f64, a: f64, b: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        a * (1.0 - c) + 0.5 * b * (1.0 - c * c)
    }
}

/// Grid prior with tail sums cached for cheap pool evaluation.
#[derive(Debug, Clone)]
pub struct GridTypes<'a> {
    prior: &'a Prior,
    tail_mass: Vec<f64>,
    tail_moment: Vec<f64>,
    head_mass: Vec<f64>,
    head_moment: Vec<f64>,
}

impl<'a> GridTypes<'a> {
    pub fn new(prior: &'a Prior) -> Self {
        let n = prior.len();
        let (grid, w) = (prior.grid(), prior.weights());
        // tail_*[j]: types strictly above j; head_*[j]: types strictly below j
        let tail_mass = (0..n).map(|j| compensated_sum(w[j + 1..].iter().copied())).collect();
        let tail_moment = (0..n).map(|j| compensated_sum((j + 1..n).map(|i| w[i] * grid[i]))).collect();
        let head_mass = (0..n).map(|j| compensated_sum(w[..j].iter().copied())).collect();
        let head_moment = (0..n).map(|j| compensated_sum((0..j).map(|i| w[i] * grid[i]))).collect();
        GridTypes { prior, tail_mass, tail_moment, head_mass, head_moment }
    }

    pub fn prior(&self) -> &Prior {
        self.prior
    }
}

impl SellerTypes for GridTypes<'_> {
    fn piece_count(&self) -> usize {
        self.prior.len()
    }

    fn high_pool(&self, j: usize, w: f64) -> Pool {
        let (mu, th) = (self.prior.weights()[j], self.prior.grid()[j]);
        let mass = self.tail_mass[j] + (1.0 - w) * mu;
        let moment = self.tail_moment[j] + (1.0 - w) * mu * th;
        if mass > 0.0 {
            Pool { mass, mean: moment / mass }
        } else {
            Pool { mass: 0.0, mean: th }
        }
    }

    fn low_pool(&self, j: usize, w: f64) -> Option<Pool> {
        let (mu, th) = (self.prior.weights()[j], self.prior.grid()[j]);
        let mass = self.head_mass[j] + w * mu;
        (mass > 0.0).then(|| Pool { mass, mean: (self.head_moment[j] + w * mu * th) / mass })
    }

    fn boundary(&self, j: usize, _: f64) -> f64 {
        self.prior.grid()[j]
    }

    fn support(&self) -> (f64, f64) {
        let g = self.prior.grid();
        (g[0], g[g.len() - 1])
    }

    fn mean(&self) -> f64 {
        self.prior.mean()
    }

    fn conditional_means(&self, x: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return Err(Error::domain(format!("type {x} outside the grid range [{lo}, {hi}]")));
        }
        let (grid, w) = (self.prior.grid(), self.prior.weights());
        let mean_where = |keep: &dyn Fn(f64) -> bool| {
            let mass = compensated_sum(grid.iter().zip(w).filter(|(g, _)| keep(**g)).map(|(_, w)| *w));
            let moment = compensated_sum(grid.iter().zip(w).filter(|(g, _)| keep(**g)).map(|(g, w)| g * w));
            moment / mass
        };
        Ok((mean_where(&|g| g <= x), mean_where(&|g| g >= x)))
    }

    fn truncated_linear(&self, c: f64, a: f64, b: f64) -> f64 {
        compensated_sum(
            self.prior
                .grid()
                .iter()
                .zip(self.prior.weights())
                .filter(|(g, _)| **g >= c)
                .map(|(g, w)| w * (a + b * g)),
        )
    }
}

/// How the cutoff splits the types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// Every type sits in the high pool.
    Pooled,
    /// The cutoff lands inside a piece, which is shared between the pools.
    Split,
    /// The cutoff falls strictly between two grid types.
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cutoff {
    pub kind: CutoffKind,
    pub theta_c: f64,
    /// Zero of the tangent to `x ↦ g(ℓx/u)` at the high mean.
    pub tangent_zero: f64,
    pub piece: usize,
    /// Share of `piece` assigned to the low pool.
    pub low_share: f64,
    pub low: Option<Pool>,
    pub high: Pool,
    /// Tangent line evaluated at `theta_c`.
    pub gap: f64,
}

fn check_ell(ell: f64) -> Result<()> {
    if ell > 0.0 && ell <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("constant split ell must lie in (0, 1], got {ell}")))
    }
}

/// `φ(x, u)`: the buyer-payoff weight of a submarket with mean type `x`.
fn payoff_weight(mf: &MeetingFunction, ell: f64, u: f64, x: f64) -> f64 {
    best_response(mf, ell * x, u)
}

/// Tangent of `x ↦ g(ℓx/u)` at `x̄`: returns `(value, slope)`.
fn tangent(mf: &MeetingFunction, ell: f64, u: f64, xbar: f64) -> (f64, f64) {
    let y = ell * xbar / u;
    (mf.g_raw(y), mf.g_prime_raw(y) * ell / u)
}

/// Zero of the tangent at the high mean, `+∞` when the high pool cannot attract buyers.
fn tangent_zero(mf: &MeetingFunction, ell: f64, u: f64, xbar: f64) -> f64 {
    if mf.beta() * ell * xbar <= u {
        return f64::INFINITY;
    }
    let (value, slope) = tangent(mf, ell, u, xbar);
    if slope.is_infinite() {
        xbar
    } else {
        xbar - value / slope
    }
}

/// `X̲(x)` and `X̄(x)` of a grid prior.
pub fn conditional_means(types: &impl SellerTypes, x: f64) -> Result<(f64, f64)> {
    types.conditional_means(x)
}

/// `G_u(θ) = g(ℓX̄/u) + g'(ℓX̄/u)(ℓ/u)(θ − X̄)` with `X̄ = X̄(θ)`.
pub fn g_u(mf: &MeetingFunction, types: &impl SellerTypes, ell: f64, u: f64, theta: f64) -> Result<f64> {
    check_ell(ell)?;
    let (_, xbar) = types.conditional_means(theta)?;
    if mf.beta() * ell * xbar < u {
        return Err(Error::domain(format!("high conditional mean {xbar} at {theta} is below u/(βℓ)")));
    }
    let (value, slope) = tangent(mf, ell, u, xbar);
    Ok(value + slope * (theta - xbar))
}

/// Lowest cut at which the boundary type reaches the tangent zero of the high pool.
pub fn find_cutoff(mf: &MeetingFunction, types: &impl SellerTypes, ell: f64, u: f64) -> Result<Cutoff> {
    check_ell(ell)?;
    let (_, top) = types.support();
    let u_max = mf.beta() * ell * top;
    if !(u > 0.0 && u < u_max) {
        return Err(Error::domain(format!("u must lie in (0, {u_max}), got {u}")));
    }
    let d = |p: usize, w: f64| types.boundary(p, w) - tangent_zero(mf, ell, u, types.high_pool(p, w).mean);
    let finish = |kind: CutoffKind, p: usize, w: f64, theta_c: Option<f64>| -> Cutoff {
        let high = types.high_pool(p, w);
        let zero = tangent_zero(mf, ell, u, high.mean);
        let theta_c = theta_c.unwrap_or_else(|| types.boundary(p, w));
        let (value, slope) = tangent(mf, ell, u, high.mean);
        Cutoff {
            kind,
            theta_c,
            tangent_zero: zero,
            piece: p,
            low_share: w,
            low: types.low_pool(p, w),
            high,
            gap: value + slope * (theta_c - high.mean),
        }
    };
    if d(0, 0.0) >= 0.0 {
        return Ok(finish(CutoffKind::Pooled, 0, 0.0, None));
    }
    for p in 0..types.piece_count() {
        let left = d(p, 0.0);
        if left >= 0.0 {
            // the previous piece ended below zero: the cutoff sits between types
            let zero = tangent_zero(mf, ell, u, types.high_pool(p, 0.0).mean);
            return Ok(finish(CutoffKind::Gap, p, 0.0, Some(zero)));
        }
        if d(p, 1.0) < 0.0 {
            continue;
        }
        let root = bisect(|w| d(p, w), 0.0, 1.0, |_, r| r.abs() <= 1e-15)?;
        let w = if d(p, root.x) < 0.0 { next_up(root.x).min(1.0) } else { root.x };
        if w >= 1.0 {
            continue;
        }
        return Ok(finish(CutoffKind::Split, p, w, None));
    }
    Err(Error::solver(format!("no cutoff found at u = {u}")))
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Buyer mass absorbed by the cutoff segmentation at `u`: `k · mass_H · g(ℓ x̄/u)`.
pub fn outer_value(mf: &MeetingFunction, types: &impl SellerTypes, k: f64, ell: f64, u: f64) -> Result<f64> {
    let c = find_cutoff(mf, types, ell, u)?;
    Ok(k * c.high.mass * payoff_weight(mf, ell, u, c.high.mean))
}

/// Solves `V̂(u) = 1` for the cutoff construction.
pub fn solve_u_bar(mf: &MeetingFunction, types: &impl SellerTypes, k: f64, ell: f64) -> Result<(f64, Cutoff)> {
    check_k(k)?;
    check_ell(ell)?;
    let u_max = mf.beta() * ell * types.support().1;
    let h = |u: f64| outer_value(mf, types, k, ell, u).map_or(f64::NAN, |v| v - 1.0);
    let lo = 1e-12 * u_max;
    let hi = u_max * (1.0 - 1e-12);
    let root = bisect(h, lo, hi, |_, r| r.abs() <= OUTER_TOL)?;
    if !(root.fx.abs() <= OUTER_TOL) {
        return Err(Error::solver(format!("outer feasibility residual {:e}", root.fx)));
    }
    Ok((root.x, find_cutoff(mf, types, ell, root.x)?))
}

/// Segmentation realizing a cutoff on a grid prior.
pub fn cutoff_segmentation(prior: &Prior, cutoff: &Cutoff) -> Result<Segmentation> {
    let (p, w) = (cutoff.piece, cutoff.low_share);
    if w > 0.0 {
        Ok(binary_segmentation(prior, p + 1, Some(w))?.segmentation)
    } else if p > 0 {
        Ok(binary_segmentation(prior, p, None)?.segmentation)
    } else {
        Ok(pooled_segmentation(prior))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CertificateChecks {
    pub a_envelope: bool,
    pub b_support: bool,
    pub c_mean: bool,
}

/// Convex price function `p(x) = 0` below `theta_c` and the tangent line above it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceCertificate {
    pub theta_c: f64,
    pub slope: f64,
    /// Point of tangency (the high pool's mean) and the value there.
    pub anchor: f64,
    pub anchor_value: f64,
    pub checks: CertificateChecks,
    pub worst_envelope_violation: f64,
    pub worst_support_violation: f64,
    pub mean_gap: f64,
}

impl PriceCertificate {
    pub fn price(&self, x: f64) -> f64 {
        if x < self.theta_c {
            0.0
        } else {
            self.anchor_value + self.slope * (x - self.anchor)
        }
    }

    pub fn passes(&self) -> bool {
        self.checks.a_envelope && self.checks.b_support && self.checks.c_mean
    }
}

/// Builds the price function for the pools in `cutoff` and evaluates the three
/// optimality checks without failing.
pub fn price_certificate(
    mf: &MeetingFunction,
    types: &impl SellerTypes,
    ell: f64,
    u: f64,
    cutoff: &Cutoff,
    theta_c: f64,
) -> Result<PriceCertificate> {
    check_ell(ell)?;
    if !(u > 0.0) {
        return Err(Error::domain("u must be positive"));
    }
    let anchor = cutoff.high.mean;
    let (anchor_value, slope) = tangent(mf, ell, u, anchor);
    let mut cert = PriceCertificate {
        theta_c,
        slope,
        anchor,
        anchor_value,
        checks: CertificateChecks { a_envelope: false, b_support: false, c_mean: false },
        worst_envelope_violation: 0.0,
        worst_support_violation: 0.0,
        mean_gap: 0.0,
    };
    let phi = |x: f64| payoff_weight(mf, ell, u, x);
    let scale = anchor_value.abs().max(1.0);
    cert.worst_envelope_violation = (0..CERTIFICATE_PROBE)
        .map(|i| i as f64 / (CERTIFICATE_PROBE - 1) as f64)
        .chain(std::iter::once(anchor))
        .map(|x| phi(x) - cert.price(x))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let mut support = vec![anchor];
    if let Some(low) = cutoff.low {
        support.push(low.mean);
    }
    cert.worst_support_violation = support.iter().map(|&x| (cert.price(x) - phi(x)).abs()).fold(0.0, f64::max);
    let prior_side = types.truncated_linear(theta_c, anchor_value - slope * anchor, slope);
    let pooled_side = cutoff.high.mass * cert.price(anchor) + cutoff.low.map_or(0.0, |l| l.mass * cert.price(l.mean));
    cert.mean_gap = (prior_side - pooled_side).abs();
    cert.checks = CertificateChecks {
        a_envelope: cert.worst_envelope_violation <= ENVELOPE_TOL * scale,
        b_support: cert.worst_support_violation <= ENVELOPE_TOL * scale,
        c_mean: cert.mean_gap <= MEAN_TOL * scale,
    };
    Ok(cert)
}

/// Like [`price_certificate`], but any failed check is an error.
pub fn certify(
    mf: &MeetingFunction,
    types: &impl SellerTypes,
    ell: f64,
    u: f64,
    cutoff: &Cutoff,
    theta_c: f64,
) -> Result<PriceCertificate> {
    let cert = price_certificate(mf, types, ell, u, cutoff, theta_c)?;
    if cert.passes() {
        Ok(cert)
    } else {
        Err(Error::CertificateFailed {
            a_envelope: cert.checks.a_envelope,
            b_support: cert.checks.b_support,
            c_mean: cert.checks.c_mean,
            worst_violation: cert.worst_envelope_violation.max(cert.worst_support_violation).max(cert.mean_gap),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignStructure {
    Perfect,
    Binary,
    Pooled,
    LinearProgram,
}

/// The cutoff construction evaluated alongside the perfect segmentation when the odds map is affine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryAlternative {
    pub u_bar: f64,
    pub surplus: f64,
    pub cutoff: Cutoff,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignOutcome {
    pub curvature: Curvature,
    pub structure: DesignStructure,
    /// Absent when the linear-program fallback only yields a distribution of means.
    pub segmentation: Option<Segmentation>,
    pub u_bar: f64,
    pub cutoff: Option<Cutoff>,
    pub equilibrium: Option<EquilibriumOutcome>,
    pub surplus: f64,
    pub certificate: Option<PriceCertificate>,
    pub alternative: Option<BinaryAlternative>,
    pub lp: Option<LpSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    /// Skip classification and use this curvature class.
    pub curvature: Option<Curvature>,
    /// Fall back to the linear program when the class is `Neither`.
    pub oracle_fallback: bool,
    /// Linear-program mesh; defaults to four times the grid size.
    pub mesh: Option<usize>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { curvature: None, oracle_fallback: true, mesh: None }
    }
}

pub fn design(prior: &Prior, mf: &MeetingFunction, k: f64, ell: f64) -> Result<DesignOutcome> {
    design_with(prior, mf, k, ell, &DesignOptions::default())
}

pub fn design_with(prior: &Prior, mf: &MeetingFunction, k: f64, ell: f64, options: &DesignOptions) -> Result<DesignOutcome> {
    check_k(k)?;
    check_ell(ell)?;
    let curvature = match options.curvature {
        Some(c) => c,
        None => mf.classify_odds(&MeetingFunction::default_probe_grid())?.class,
    };
    let split = SurplusSplit::constant(ell)?;
    match curvature {
        Curvature::Concave | Curvature::Affine => {
            let seg = perfect_segmentation(prior);
            let eq = solve_equilibrium(prior, &seg, mf, k, &split)?;
            let (alternative, certificate) = if curvature == Curvature::Affine {
                let types = GridTypes::new(prior);
                let (u_bin, cutoff) = solve_u_bar(mf, &types, k, ell)?;
                let cert = certify(mf, &types, ell, u_bin, &cutoff, cutoff.tangent_zero)?;
                let alt = BinaryAlternative { u_bar: u_bin, surplus: u_bin / ell, cutoff };
                (Some(alt), Some(cert))
            } else {
                (None, None)
            };
            Ok(DesignOutcome {
                curvature,
                structure: DesignStructure::Perfect,
                segmentation: Some(seg),
                u_bar: eq.u_star,
                cutoff: None,
                surplus: eq.total_surplus,
                equilibrium: Some(eq),
                certificate,
                alternative,
                lp: None,
            })
        }
        Curvature::Convex => {
            let types = GridTypes::new(prior);
            let (u_bar, cutoff) = solve_u_bar(mf, &types, k, ell)?;
            let seg = cutoff_segmentation(prior, &cutoff)?;
            let eq = solve_equilibrium(prior, &seg, mf, k, &split)?;
            if (eq.u_star - u_bar).abs() > 1e-8 {
                return Err(Error::solver(format!(
                    "designed segmentation has u* = {} but u_bar = {u_bar}",
                    eq.u_star
                )));
            }
            let cert = certify(mf, &types, ell, u_bar, &cutoff, cutoff.tangent_zero)?;
            let structure = if cutoff.kind == CutoffKind::Pooled { DesignStructure::Pooled } else { DesignStructure::Binary };
            Ok(DesignOutcome {
                curvature,
                structure,
                segmentation: Some(seg),
                u_bar,
                cutoff: Some(cutoff),
                surplus: eq.total_surplus,
                equilibrium: Some(eq),
                certificate: Some(cert),
                alternative: None,
                lp: None,
            })
        }
        Curvature::Neither => {
            if !options.oracle_fallback {
                return Err(Error::Unsupported(
                    "odds map is neither concave nor convex and the linear-program fallback is disabled".into(),
                ));
            }
            let mesh = options.mesh.unwrap_or(4 * prior.len());
            let u_bar = find_u_bar(mf, prior, ell, mesh)?;
            let lp = lp_value(mf, prior, ell, u_bar, mesh)?;
            Ok(DesignOutcome {
                curvature,
                structure: DesignStructure::LinearProgram,
                segmentation: None,
                u_bar,
                cutoff: None,
                equilibrium: None,
                surplus: u_bar / ell,
                certificate: None,
                alternative: None,
                lp: Some(lp),
            })
        }
    }
}

/// Cutoff design for uniform types on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuumDesign {
    pub u_bar: f64,
    pub cutoff: Cutoff,
    pub tau_high: f64,
    pub surplus: f64,
    pub certificate: PriceCertificate,
}

pub fn design_uniform_continuum(mf: &MeetingFunction, k: f64, ell: f64) -> Result<ContinuumDesign> {
    let types = UniformContinuum;
    let (u_bar, cutoff) = solve_u_bar(mf, &types, k, ell)?;
    let tau_high = payoff_weight(mf, ell, u_bar, cutoff.high.mean);
    let surplus = k * cutoff.high.mass * mf.m(tau_high)? * cutoff.high.mean;
    let certificate = certify(mf, &types, ell, u_bar, &cutoff, cutoff.tangent_zero)?;
    Ok(ContinuumDesign { u_bar, cutoff, tau_high, surplus, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{posterior_mean_distribution, verify_mpc};

    fn ces1() -> MeetingFunction {
        MeetingFunction::ces(1.0, 1.0, 1.0).unwrap()
    }

    fn urn() -> MeetingFunction {
        MeetingFunction::urn_ball(1.0, 1.0).unwrap()
    }

    #[test]
    fn conditional_mean_examples() {
        assert_eq!(UniformContinuum.conditional_means(0.5).unwrap(), (0.25, 0.75));
        let p = Prior::uniform(4).unwrap();
        let t = GridTypes::new(&p);
        let (lo, hi) = t.conditional_means(0.375).unwrap();
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 0.625).abs() < 1e-15);
        assert_eq!(t.conditional_means(0.875).unwrap().1, 0.875);
        assert!(t.conditional_means(0.9).is_err());
        assert!(t.conditional_means(0.1).is_err());
    }

    #[test]
    fn affine_g_u_is_linear() {
        for &u in &[0.2, 0.3, 0.5] {
            for &th in &[0.0, 0.3, 0.7, 1.0] {
                let g = g_u(&ces1(), &UniformContinuum, 1.0, u, th).unwrap();
                assert!((g - (th / u - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn g_u_below_threshold_is_a_domain_error() {
        assert!(matches!(g_u(&ces1(), &UniformContinuum, 1.0, 0.9, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn urn_ball_g_u_increasing() {
        let vals: Vec<f64> =
            (0..100).map(|i| g_u(&urn(), &UniformContinuum, 1.0, 0.2, i as f64 / 99.0).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn affine_cutoff_equals_u() {
        let c = find_cutoff(&ces1(), &UniformContinuum, 1.0, 0.3).unwrap();
        assert!((c.theta_c - 0.3).abs() < 1e-12);
        let (lo, hi) = UniformContinuum.conditional_means(c.theta_c).unwrap();
        assert!((lo - 0.15).abs() < 1e-12 && (hi - 0.65).abs() < 1e-12);
        assert!(c.gap.abs() <= 1e-9);
        assert!(find_cutoff(&ces1(), &UniformContinuum, 1.0, 0.0).is_err());
        assert!(find_cutoff(&ces1(), &UniformContinuum, 1.0, 1.0).is_err());
    }

    #[test]
    fn affine_continuum_design() {
        let d = design_uniform_continuum(&ces1(), 1.0, 1.0).unwrap();
        let ubar = 2.0 - 3f64.sqrt();
        assert!((d.u_bar - ubar).abs() < 1e-9);
        assert!((d.cutoff.theta_c - ubar).abs() < 1e-9);
        assert!((d.cutoff.high.mean - 0.6339746).abs() < 1e-7);
        assert!((d.tau_high - (1.0 - ubar) / (2.0 * ubar)).abs() < 1e-8);
        assert!((d.surplus - ubar).abs() < 1e-9);
        assert!(d.certificate.passes());
    }

    #[test]
    fn wrong_cutoff_fails_mean_check() {
        let d = design_uniform_continuum(&ces1(), 1.0, 1.0).unwrap();
        let r = certify(&ces1(), &UniformContinuum, 1.0, d.u_bar, &d.cutoff, d.cutoff.theta_c + 0.1);
        match r {
            Err(Error::CertificateFailed { c_mean, .. }) => assert!(!c_mean),
            other => panic!("expected certificate failure, got {other:?}"),
        }
    }

    #[test]
    fn concave_design_is_perfect() {
        let p = Prior::uniform(101).unwrap();
        let mf = MeetingFunction::ces(1.0, 1.0, 0.5).unwrap();
        let d = design(&p, &mf, 1.0, 1.0).unwrap();
        assert_eq!(d.curvature, Curvature::Concave);
        assert_eq!(d.structure, DesignStructure::Perfect);
        assert_eq!(d.segmentation.unwrap().len(), 101);
    }

    #[test]
    fn urn_ball_design_is_binary_and_certified() {
        let p = Prior::uniform(101).unwrap();
        let d = design(&p, &urn(), 1.0, 1.0).unwrap();
        assert_eq!(d.curvature, Curvature::Convex);
        assert_eq!(d.structure, DesignStructure::Binary);
        let eq = d.equilibrium.as_ref().unwrap();
        assert_eq!(eq.active, vec![false, true]);
        assert!((eq.u_star - d.u_bar).abs() <= 1e-8);
        assert!((d.surplus - d.u_bar).abs() <= 1e-8);
        assert!(d.certificate.as_ref().unwrap().passes());
        let seg = d.segmentation.unwrap();
        let h = posterior_mean_distribution(&seg, &p).unwrap();
        assert!(verify_mpc(&h, &p).unwrap().holds);
        let c = d.cutoff.unwrap();
        let low = c.low.unwrap();
        assert!(mf_threshold_sandwich(&urn(), 1.0, d.u_bar, low.mean, c.high.mean));
    }

    fn mf_threshold_sandwich(mf: &MeetingFunction, ell: f64, u: f64, lo: f64, hi: f64) -> bool {
        let t = u / (mf.beta() * ell);
        lo <= t && t < hi
    }

    #[test]
    fn affine_grid_design_ties() {
        let p = Prior::uniform(101).unwrap();
        let d = design(&p, &ces1(), 1.0, 1.0).unwrap();
        assert_eq!(d.curvature, Curvature::Affine);
        let alt = d.alternative.unwrap();
        assert!((alt.surplus - d.surplus).abs() <= 1e-9);
        assert!(d.certificate.unwrap().passes());
    }

    #[test]
    fn neither_without_fallback_is_unsupported() {
        let p = Prior::uniform(5).unwrap();
        let opts = DesignOptions { curvature: Some(Curvature::Neither), oracle_fallback: false, mesh: None };
        assert!(matches!(design_with(&p, &urn(), 1.0, 1.0, &opts), Err(Error::Unsupported(_))));
        assert!(design(&p, &urn(), 1.0, 0.0).is_err());
    }
}
