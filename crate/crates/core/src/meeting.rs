//! Bilateral meeting functions and the derived maps the solvers need.
//!
//! A meeting function `m(t)` gives the probability that a seller meets a
//! buyer in a submarket of tightness `t` (buyers per seller). Two parametric
//! families are supported:
//!
//! * CES: `m(t) = αβt / (α^ρ + (βt)^ρ)^{1/ρ}`
//! * urn-ball: `m(t) = βt (1 − exp(−α / (βt)))`
//!
//! Besides `m` itself the solvers use `m'`, the elasticity `m'(t) t / m(t)`,
//! and two inverses on `[1/β, ∞)`:
//!
//! * `f`, the inverse of `t ↦ 1/m'(t)` (planner first-order condition),
//! * `g`, the inverse of the odds map `t ↦ t/m(t)` (buyer indifference).
//!
//! CES admits closed forms for both inverses and the urn-ball family for `g`;
//! the urn-ball `f` is found by bracketed bisection. The bisection route is
//! exposed for every family so the closed forms can be cross-checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Parameters of a meeting-function family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Family {
    Ces { alpha: f64, beta: f64, rho: f64 },
    #[serde(rename = "urnball")]
    UrnBall { alpha: f64, beta: f64 },
}

/// A validated meeting function. `alpha = m(∞)`, `beta = lim m(t)/t` as `t → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct MeetingFunction {
    family: Family,
}

impl TryFrom<Family> for MeetingFunction {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        let (alpha, beta) = match family {
            Family::Ces { alpha, beta, rho } => {
                if !(rho.is_finite() && rho > 0.0) {
                    return Err(Error::invalid(format!("CES rho must be positive, got {rho}")));
                }
                (alpha, beta)
            }
            Family::UrnBall { alpha, beta } => (alpha, beta),
        };
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(MeetingFunction { family })
    }
}

impl From<MeetingFunction> for Family {
    fn from(mf: MeetingFunction) -> Family {
        mf.family
    }
}

/// Which inverse a bisection should compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inverse {
    /// `f`: inverse of `t ↦ 1/m'(t)`.
    MarginalOdds,
    /// `g`: inverse of `t ↦ t/m(t)`.
    Odds,
}

/// Curvature class of the odds map `t ↦ t/m(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Concave,
    Convex,
    Affine,
    Neither,
}

/// Extremal slope changes of `t/m(t)` over a probe grid, relative to the largest slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDifferences {
    pub min: f64,
    pub max: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsCurvature {
    pub class: Curvature,
    pub evidence: SecondDifferences,
}

const BRACKET_LO: f64 = 1e-12;
const BRACKET_CAP: f64 = 1e12;

impl MeetingFunction {
    pub fn ces(alpha: f64, beta: f64, rho: f64) -> Result<Self> {
        Family::Ces { alpha, beta, rho }.try_into()
    }

    pub fn urn_ball(alpha: f64, beta: f64) -> Result<Self> {
        Family::UrnBall { alpha, beta }.try_into()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        match self.family {
            Family::Ces { alpha, .. } | Family::UrnBall { alpha, .. } => alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match self.family {
            Family::Ces { beta, .. } | Family::UrnBall { beta, .. } => beta,
        }
    }

    /// Seller meeting probability `m(t)`; `t = +∞` yields `alpha`.
    pub fn m(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("tightness must be nonnegative, got {t}")));
        }
        Ok(self.m_raw(t))
    }

    pub(crate) fn m_raw(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if t == f64::INFINITY {
            return self.alpha();
        }
        match self.family {
            Family::Ces { alpha, beta, rho } => alpha * beta * t / ces_norm(alpha, beta * t, rho),
            Family::UrnBall { alpha, beta } => {
                let x = alpha / (beta * t);
                beta * t * -(-x).exp_m1()
            }
        }
    }

    /// `m'(t)` for `t > 0`.
    pub fn m_prime(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("m' needs t > 0, got {t}")));
        }
        Ok(self.m_prime_raw(t))
    }

    pub(crate) fn m_prime_raw(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.beta();
        }
        match self.family {
            Family::Ces { alpha, beta, rho } => {
                let n = ces_norm(alpha, beta * t, rho);
                beta * (alpha / n).powf(1.0 + rho)
            }
            Family::UrnBall { alpha, beta } => beta * one_minus_one_plus_x_exp(alpha / (beta * t)),
        }
    }

    /// Elasticity `m'(t) t / m(t)`, strictly inside `(0, 1)`.
    pub fn elasticity(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("elasticity needs t > 0, got {t}")));
        }
        Ok(self.elasticity_raw(t))
    }

    pub(crate) fn elasticity_raw(&self, t: f64) -> f64 {
        match self.family {
            Family::Ces { alpha, beta, rho } => {
                // m' t / m = (α/N)^ρ
                let n = ces_norm(alpha, beta * t, rho);
                (alpha / n).powf(rho)
            }
            Family::UrnBall { alpha, beta } => {
                let x = alpha / (beta * t);
                one_minus_one_plus_x_exp(x) / -(-x).exp_m1()
            }
        }
    }

    /// Odds map `t/m(t)`; equals `1/beta` at `t = 0`.
    pub fn odds(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("odds need finite t >= 0, got {t}")));
        }
        Ok(self.odds_raw(t))
    }

    pub(crate) fn odds_raw(&self, t: f64) -> f64 {
        match self.family {
            Family::Ces { alpha, beta, rho } => ces_norm(alpha, beta * t, rho) / (alpha * beta),
            Family::UrnBall { alpha, beta } => {
                if t == 0.0 {
                    return 1.0 / beta;
                }
                let x = alpha / (beta * t);
                1.0 / (beta * -(-x).exp_m1())
            }
        }
    }

    /// Slope of the odds map, `(m(t) − t m'(t)) / m(t)²`.
    pub(crate) fn odds_slope(&self, t: f64) -> f64 {
        match self.family {
            Family::Ces { alpha, beta, rho } => {
                if t == 0.0 {
                    return if rho < 1.0 {
                        f64::INFINITY
                    } else if rho == 1.0 {
                        1.0 / alpha
                    } else {
                        0.0
                    };
                }
                let bt = beta * t;
                let n = ces_norm(alpha, bt, rho);
                let m = alpha * bt / n;
                (bt / n).powf(rho) / m
            }
            Family::UrnBall { alpha, beta } => {
                if t == 0.0 {
                    return 0.0;
                }
                let x = alpha / (beta * t);
                let m = self.m_raw(t);
                // m − t m' = α e^{−x}
                (2.0 * -m.ln() - x).exp() * alpha
            }
        }
    }

    fn check_inverse_domain(&self, y: f64, name: &str) -> Result<()> {
        let lo = 1.0 / self.beta();
        if !(y >= lo) || !y.is_finite() {
            return Err(Error::domain(format!("{name}(y) needs finite y >= 1/beta = {lo}, got {y}")));
        }
        Ok(())
    }

    /// `f(y)`: the tightness with `1/m'(t) = y`; `f(1/beta) = 0`.
    pub fn f(&self, y: f64) -> Result<f64> {
        self.check_inverse_domain(y, "f")?;
        match self.family {
            Family::Ces { alpha, beta, rho } => {
                let z = rho / (1.0 + rho) * (beta * y).ln();
                Ok(alpha / beta * (ln_expm1(z) / rho).exp())
            }
            Family::UrnBall { .. } => self.invert_by_bisection(Inverse::MarginalOdds, y),
        }
    }

    /// `g(y)`: the tightness with `t/m(t) = y`; `g(1/beta) = 0`.
    pub fn g(&self, y: f64) -> Result<f64> {
        self.check_inverse_domain(y, "g")?;
        Ok(self.g_raw(y))
    }

    pub(crate) fn g_raw(&self, y: f64) -> f64 {
        match self.family {
            Family::Ces { alpha, beta, rho } => {
                let z = rho * (beta * y).ln();
                alpha / beta * (ln_expm1(z) / rho).exp()
            }
            Family::UrnBall { alpha, beta } => {
                // 1 − e^{−x} = 1/(βy)  ⇒  x = −ln(1 − 1/(βy)), t = α/(βx)
                let x = -(-1.0 / (beta * y)).ln_1p();
                alpha / (beta * x)
            }
        }
    }

    /// `g'(y)` by the inverse-function rule `1 / (d/dt t/m(t))` at `t = g(y)`.
    pub fn g_prime(&self, y: f64) -> Result<f64> {
        self.check_inverse_domain(y, "g'")?;
        Ok(self.g_prime_raw(y))
    }

    pub(crate) fn g_prime_raw(&self, y: f64) -> f64 {
        let t = self.g_raw(y);
        match self.family {
            Family::UrnBall { alpha, beta } if t > 0.0 => {
                let x = alpha / (beta * t);
                let m = self.m_raw(t);
                (2.0 * m.ln() + x - alpha.ln()).exp()
            }
            _ => 1.0 / self.odds_slope(t),
        }
    }

    /// Inverts `1/m'` or `t/m` by bisection on `t`, independent of any closed form.
    ///
    /// The bracket starts at `[1e-12, 1]` and its upper end grows
    /// geometrically until it straddles the root, capped at `1e12`.
    pub fn invert_by_bisection(&self, which: Inverse, y: f64) -> Result<f64> {
        self.check_inverse_domain(y, "inverse")?;
        let target = 1.0 / y;
        // Both reciprocals are decreasing in t: 1/(1/m') = m', 1/(t/m) = m/t.
        let h = |t: f64| -> f64 {
            let v = match which {
                Inverse::MarginalOdds => self.m_prime_raw(t),
                Inverse::Odds => {
                    if t == 0.0 {
                        self.beta()
                    } else {
                        self.m_raw(t) / t
                    }
                }
            };
            v - target
        };
        if h(0.0) <= 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = if h(BRACKET_LO) <= 0.0 {
            (0.0, BRACKET_LO)
        } else {
            let mut hi = 1.0;
            while h(hi) > 0.0 {
                if hi >= BRACKET_CAP {
                    return Err(Error::solver(format!("inverse at y={y:e} exceeds t={BRACKET_CAP:e}")));
                }
                hi = (hi * 16.0).min(BRACKET_CAP);
            }
            (BRACKET_LO, hi)
        };
        let root = bisect(h, lo, hi, |_, _| false)?;
        Ok(root.x)
    }

    /// 64 geometric points on `[1e-3, 1e3]`.
    pub fn default_probe_grid() -> Vec<f64> {
        let n = 64;
        (0..n)
            .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
            .collect()
    }

    /// Classifies the curvature of `t ↦ t/m(t)` from slope changes on `probe`.
    ///
    /// CES carries a known answer (concave for `ρ ≤ 1`, convex for `ρ ≥ 1`,
    /// affine at `ρ = 1`), which overrides the numerical class.
    pub fn classify_odds(&self, probe: &[f64]) -> Result<OddsCurvature> {
        if probe.len() < 16 {
            return Err(Error::invalid(format!("probe grid needs >= 16 points, got {}", probe.len())));
        }
        if probe.windows(2).any(|w| !(w[0] < w[1])) || !(probe[0] > 0.0) {
            return Err(Error::invalid("probe grid must be positive and strictly increasing"));
        }
        if probe[0] > 1e-3 || probe[probe.len() - 1] < 1e3 {
            return Err(Error::invalid("probe grid must span at least [1e-3, 1e3]"));
        }
        let h: Vec<f64> = probe.iter().map(|&t| self.odds_raw(t)).collect();
        let slopes: Vec<f64> = (0..probe.len() - 1)
            .map(|i| (h[i + 1] - h[i]) / (probe[i + 1] - probe[i]))
            .collect();
        let scale = slopes.iter().fold(f64::MIN_POSITIVE, |a, s| a.max(s.abs()));
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in slopes.windows(2) {
            let d = (w[1] - w[0]) / scale;
            min = min.min(d);
            max = max.max(d);
        }
        let tol = 1e-9;
        let concave = max <= tol;
        let convex = min >= -tol;
        let numeric = match (concave, convex) {
            (true, true) => Curvature::Affine,
            (true, false) => Curvature::Concave,
            (false, true) => Curvature::Convex,
            (false, false) => Curvature::Neither,
        };
        let class = match self.family {
            Family::Ces { rho, .. } if rho < 1.0 => Curvature::Concave,
            Family::Ces { rho, .. } if rho > 1.0 => Curvature::Convex,
            Family::Ces { .. } => Curvature::Affine,
            Family::UrnBall { .. } => numeric,
        };
        Ok(OddsCurvature { class, evidence: SecondDifferences { min, max, scale } })
    }
}

/// `(a^ρ + b^ρ)^{1/ρ}` without overflow.
fn ces_norm(a: f64, b: f64, rho: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == 0.0 {
        return hi;
    }
    let r = (lo / hi).powf(rho);
    hi * (r.ln_1p() / rho).exp()
}

/// `ln(e^z − 1)` for `z > 0`.
fn ln_expm1(z: f64) -> f64 {
    if z > 30.0 {
        z + (-(-z).exp()).ln_1p()
    } else {
        z.exp_m1().ln()
    }
}

/// `1 − (1 + x) e^{−x}`, accurate for small `x`.
fn one_minus_one_plus_x_exp(x: f64) -> f64 {
    if x < 0.5 {
        // Σ_{n≥2} (−1)^n (n−1)/n! xⁿ
        let mut term = x * x / 2.0; // x^n / n!
        let mut sum = 0.0;
        let mut n = 2.0;
        loop {
            let add = term * (n - 1.0);
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
            n += 1.0;
            term *= -x / n;
        }
        sum
    } else {
        1.0 - (1.0 + x) * (-x).exp()
    }
}
