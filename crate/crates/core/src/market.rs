//! Seller-type priors, surplus splits and market segmentations on a finite type grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-10;
const MPC_TOL: f64 = 1e-10;

/// Finite distribution of seller types on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prior {
    grid: Vec<f64>,
    weights: Vec<f64>,
}

impl Prior {
    pub fn new(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("prior needs at least one type"));
        }
        if grid.len() != weights.len() {
            return Err(Error::invalid(format!(
                "prior grid has {} points but {} weights",
                grid.len(),
                weights.len()
            )));
        }
        if grid.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("prior grid must lie in [0, 1]"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("prior grid must be strictly increasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("prior weights must be positive"));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("prior weights sum to {total}, not 1")));
        }
        Ok(Prior { grid, weights })
    }

    /// Midpoint grid `(j − 0.5)/n` with equal weights.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform prior needs n >= 1"));
        }
        let grid = (1..=n).map(|j| (j as f64 - 0.5) / n as f64).collect();
        Prior::new(grid, vec![1.0 / n as f64; n])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.grid.iter().zip(&self.weights).map(|(x, w)| x * w))
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        compensated_sum(self.grid.iter().zip(&self.weights).filter(|(g, _)| **g <= x).map(|(_, w)| *w))
            .min(1.0)
    }

    /// `E[max(0, b − θ)]`, the integral of the CDF from 0 to `b`.
    pub fn hinge(&self, b: f64) -> f64 {
        compensated_sum(self.grid.iter().zip(&self.weights).map(|(x, w)| w * (b - x).max(0.0)))
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.grid.iter().zip(&self.weights).map(|(x, w)| w * f(*x)))
    }
}

/// Buyer share `λ(θ)` of the match surplus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SurplusSplit {
    Constant { ell: f64 },
    Table { values: Vec<f64> },
}

impl SurplusSplit {
    pub fn constant(ell: f64) -> Result<Self> {
        let s = SurplusSplit::Constant { ell };
        s.check_range()?;
        Ok(s)
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        let s = SurplusSplit::Table { values };
        s.check_range()?;
        Ok(s)
    }

    fn check_range(&self) -> Result<()> {
        let ok = match self {
            SurplusSplit::Constant { ell } => (0.0..=1.0).contains(ell),
            SurplusSplit::Table { values } => values.iter().all(|v| (0.0..=1.0).contains(v)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("surplus shares must lie in [0, 1]"))
        }
    }

    /// `λ(θ_j)` on every grid point of `prior`.
    pub fn values_on(&self, prior: &Prior) -> Result<Vec<f64>> {
        self.check_range()?;
        match self {
            SurplusSplit::Constant { ell } => Ok(vec![*ell; prior.len()]),
            SurplusSplit::Table { values } => {
                if values.len() != prior.len() {
                    return Err(Error::invalid(format!(
                        "lambda table has {} entries for a grid of {}",
                        values.len(),
                        prior.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    /// Buyers must capture a positive share from a set of types with positive mass.
    pub fn check_nontrivial(&self, prior: &Prior) -> Result<()> {
        let lambda = self.values_on(prior)?;
        let mass: f64 = prior
            .weights()
            .iter()
            .zip(prior.grid())
            .zip(&lambda)
            .filter(|((_, th), l)| **l > 0.0 && **th > 0.0)
            .map(|((w, _), _)| *w)
            .sum();
        if mass > 0.0 {
            Ok(())
        } else {
            Err(Error::Assumption("non-triviality: buyers capture no surplus from any type".into()))
        }
    }

    /// Prices `p(θ_j) = (1 − λ(θ_j)) θ_j`.
    pub fn prices_on(&self, prior: &Prior) -> Result<Vec<f64>> {
        let lambda = self.values_on(prior)?;
        Ok(prior.grid().iter().zip(lambda).map(|(th, l)| (1.0 - l) * th).collect())
    }

    /// `λ(θ_j) θ_j` on the grid.
    pub fn buyer_values_on(&self, prior: &Prior) -> Result<Vec<f64>> {
        let lambda = self.values_on(prior)?;
        Ok(prior.grid().iter().zip(lambda).map(|(th, l)| l * th).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submarket {
    pub weight: f64,
    pub posterior: Vec<f64>,
}

/// Weighted collection of submarkets, each a posterior over the prior grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    submarkets: Vec<Submarket>,
}

impl Segmentation {
    pub fn new(submarkets: Vec<Submarket>) -> Result<Self> {
        if submarkets.is_empty() {
            return Err(Error::invalid("segmentation needs at least one submarket"));
        }
        let n = submarkets[0].posterior.len();
        for (s, sm) in submarkets.iter().enumerate() {
            if !(sm.weight > 0.0 && sm.weight.is_finite()) {
                return Err(Error::invalid(format!("submarket {s} has non-positive weight")));
            }
            if sm.posterior.len() != n {
                return Err(Error::invalid("submarket posteriors have different lengths"));
            }
            if sm.posterior.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::invalid(format!("submarket {s} has a negative posterior entry")));
            }
            let total = compensated_sum(sm.posterior.iter().copied());
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::invalid(format!("submarket {s} posterior sums to {total}")));
            }
        }
        let total = compensated_sum(submarkets.iter().map(|s| s.weight));
        if (total - 1.0).abs() > CONSISTENCY_TOL {
            return Err(Error::invalid(format!("submarket weights sum to {total}")));
        }
        Ok(Segmentation { submarkets })
    }

    /// Builds the segmentation induced by a stochastic kernel: `kernel[j][s]` is
    /// the probability that a type-`j` seller is sent to submarket `s`.
    /// Submarkets that receive no mass are dropped.
    pub fn from_kernel(prior: &Prior, kernel: &[Vec<f64>]) -> Result<Self> {
        if kernel.len() != prior.len() {
            return Err(Error::invalid("kernel needs one row per grid point"));
        }
        let s_count = kernel.first().map_or(0, Vec::len);
        if s_count == 0 || kernel.iter().any(|row| row.len() != s_count) {
            return Err(Error::invalid("kernel rows must share a positive length"));
        }
        for row in kernel {
            if row.iter().any(|p| !(*p >= 0.0)) || (compensated_sum(row.iter().copied()) - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("kernel rows must be probability vectors"));
            }
        }
        let mut submarkets = Vec::new();
        for s in 0..s_count {
            let joint: Vec<f64> = prior.weights().iter().zip(kernel).map(|(w, row)| w * row[s]).collect();
            let weight = compensated_sum(joint.iter().copied());
            if weight <= 0.0 {
                continue;
            }
            let posterior = joint.iter().map(|x| x / weight).collect();
            submarkets.push(Submarket { weight, posterior });
        }
        Segmentation::new(submarkets)
    }

    /// Deterministic segmentation: each block of grid indices becomes one submarket.
    pub fn from_partition(prior: &Prior, blocks: &[Vec<usize>]) -> Result<Self> {
        let n = prior.len();
        let mut seen = vec![false; n];
        let mut kernel = vec![vec![0.0; blocks.len()]; n];
        for (b, block) in blocks.iter().enumerate() {
            for &j in block {
                if j >= n || seen[j] {
                    return Err(Error::invalid("partition blocks must cover each grid index exactly once"));
                }
                seen[j] = true;
                kernel[j][b] = 1.0;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("partition blocks must cover each grid index exactly once"));
        }
        Segmentation::from_kernel(prior, &kernel)
    }

    pub fn submarkets(&self) -> &[Submarket] {
        &self.submarkets
    }

    pub fn len(&self) -> usize {
        self.submarkets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.submarkets.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.submarkets.iter().map(|s| s.weight).collect()
    }

    fn check_aligned(&self, prior: &Prior) -> Result<()> {
        if self.submarkets[0].posterior.len() != prior.len() {
            return Err(Error::invalid(format!(
                "segmentation posteriors have {} entries for a grid of {}",
                self.submarkets[0].posterior.len(),
                prior.len()
            )));
        }
        Ok(())
    }

    /// `E_ν[v(θ)]` per submarket for grid-aligned values `v`.
    pub fn expectations(&self, prior: &Prior, values: &[f64]) -> Result<Vec<f64>> {
        self.check_aligned(prior)?;
        if values.len() != prior.len() {
            return Err(Error::invalid("values must be aligned to the prior grid"));
        }
        Ok(self
            .submarkets
            .iter()
            .map(|s| compensated_sum(s.posterior.iter().zip(values).map(|(p, v)| p * v)))
            .collect())
    }

    /// Posterior mean type per submarket.
    pub fn posterior_means(&self, prior: &Prior) -> Result<Vec<f64>> {
        self.expectations(prior, prior.grid())
    }
}

/// Buyers-per-seller ratio in each submarket, aligned to a segmentation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessAllocation(pub Vec<f64>);

impl TightnessAllocation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `k Σ_s w_s τ_s − 1`; zero for a feasible allocation.
    pub fn feasibility_residual(&self, seg: &Segmentation, k: f64) -> Result<f64> {
        if self.0.len() != seg.len() {
            return Err(Error::invalid("tightness must have one entry per submarket"));
        }
        Ok(k * compensated_sum(seg.submarkets().iter().zip(&self.0).map(|(s, t)| s.weight * t)) - 1.0)
    }

    /// Buyer mass `k τ_s w_s` sent to each submarket.
    pub fn buyer_masses(&self, seg: &Segmentation, k: f64) -> Vec<f64> {
        seg.submarkets().iter().zip(&self.0).map(|(s, t)| k * t * s.weight).collect()
    }
}

/// Every grid point in its own submarket.
pub fn perfect_segmentation(prior: &Prior) -> Segmentation {
    let n = prior.len();
    let submarkets = (0..n)
        .map(|j| {
            let mut posterior = vec![0.0; n];
            posterior[j] = 1.0;
            Submarket { weight: prior.weights()[j], posterior }
        })
        .collect();
    Segmentation { submarkets }
}

/// A single submarket carrying the prior.
pub fn pooled_segmentation(prior: &Prior) -> Segmentation {
    Segmentation { submarkets: vec![Submarket { weight: 1.0, posterior: prior.weights().to_vec() }] }
}

/// Two-submarket segmentation with its posterior means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinarySegmentation {
    pub segmentation: Segmentation,
    pub low_mean: f64,
    pub high_mean: f64,
}

/// Pools grid points `1..cutoff_index` (1-based) into a low submarket and the
/// rest into a high one; `split` is the share of the boundary type sent low.
pub fn binary_segmentation(prior: &Prior, cutoff_index: usize, split: Option<f64>) -> Result<BinarySegmentation> {
    let n = prior.len();
    let split = split.unwrap_or(1.0);
    if !(1..=n).contains(&cutoff_index) {
        return Err(Error::invalid(format!("cutoff_index must lie in 1..={n}, got {cutoff_index}")));
    }
    if !(0.0..=1.0).contains(&split) {
        return Err(Error::invalid(format!("split must lie in [0, 1], got {split}")));
    }
    let c = cutoff_index - 1;
    let low_share = |j: usize| -> f64 {
        match j.cmp(&c) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => split,
            std::cmp::Ordering::Greater => 0.0,
        }
    };
    let kernel: Vec<Vec<f64>> = (0..n).map(|j| vec![low_share(j), 1.0 - low_share(j)]).collect();
    let low_mass: f64 = (0..n).map(|j| prior.weights()[j] * kernel[j][0]).sum();
    let high_mass: f64 = (0..n).map(|j| prior.weights()[j] * kernel[j][1]).sum();
    if low_mass <= 0.0 || high_mass <= 0.0 {
        return Err(Error::invalid("binary cutoff leaves a submarket empty"));
    }
    let segmentation = Segmentation::from_kernel(prior, &kernel)?;
    let means = segmentation.posterior_means(prior)?;
    Ok(BinarySegmentation { segmentation, low_mean: means[0], high_mean: means[1] })
}

/// Pools every type `θ ≤ threshold` into one submarket and separates the rest.
pub fn lower_censorship_segmentation(prior: &Prior, threshold: f64) -> Result<Segmentation> {
    let low: Vec<usize> = (0..prior.len()).filter(|&j| prior.grid()[j] <= threshold).collect();
    let mut blocks = Vec::new();
    if !low.is_empty() {
        blocks.push(low);
    }
    blocks.extend((0..prior.len()).filter(|&j| prior.grid()[j] > threshold).map(|j| vec![j]));
    Segmentation::from_partition(prior, &blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyCheck {
    pub consistent: bool,
    pub max_residual: f64,
}

/// Bayes plausibility: `Σ_s w_s ν_s = μ` componentwise within `1e-10`.
pub fn verify_consistency(prior: &Prior, seg: &Segmentation) -> Result<ConsistencyCheck> {
    seg.check_aligned(prior)?;
    let max_residual = (0..prior.len())
        .map(|j| {
            let mix = compensated_sum(seg.submarkets().iter().map(|s| s.weight * s.posterior[j]));
            (mix - prior.weights()[j]).abs()
        })
        .fold(0.0, f64::max);
    Ok(ConsistencyCheck { consistent: max_residual <= CONSISTENCY_TOL, max_residual })
}

/// A distribution of posterior means: sorted support points with masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDistribution {
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
}

impl MeanDistribution {
    pub fn mean(&self) -> f64 {
        compensated_sum(self.points.iter().zip(&self.masses).map(|(x, m)| x * m))
    }

    pub fn hinge(&self, b: f64) -> f64 {
        compensated_sum(self.points.iter().zip(&self.masses).map(|(x, m)| m * (b - x).max(0.0)))
    }
}

/// Posterior-mean distribution of a segmentation; coincident means are merged.
pub fn posterior_mean_distribution(seg: &Segmentation, prior: &Prior) -> Result<MeanDistribution> {
    let means = seg.posterior_means(prior)?;
    let mut pairs: Vec<(f64, f64)> = means.into_iter().zip(seg.weights()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut masses: Vec<f64> = Vec::with_capacity(pairs.len());
    for (x, m) in pairs {
        match points.last() {
            Some(&last) if (x - last).abs() <= 1e-12 => {
                *masses.last_mut().unwrap() += m;
            }
            _ => {
                points.push(x);
                masses.push(m);
            }
        }
    }
    Ok(MeanDistribution { points, masses })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpcCheck {
    pub holds: bool,
    pub mean_gap: f64,
    /// Largest `∫_0^x H − ∫_0^x F` over the breakpoints.
    pub worst_excess: f64,
}

/// Checks that `candidate` is a mean-preserving contraction of the prior.
///
/// Both integrated CDFs are piecewise linear with kinks only at support
/// points, so comparing them on the union of breakpoints is exact.
pub fn verify_mpc(candidate: &MeanDistribution, prior: &Prior) -> Result<MpcCheck> {
    if candidate.points.len() != candidate.masses.len() || candidate.points.is_empty() {
        return Err(Error::invalid("candidate needs matching, non-empty points and masses"));
    }
    if candidate.points.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain("candidate points must lie in [0, 1]"));
    }
    if candidate.masses.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::invalid("candidate masses must be nonnegative"));
    }
    let total = compensated_sum(candidate.masses.iter().copied());
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("candidate masses sum to {total}")));
    }
    let mean_gap = (candidate.mean() - prior.mean()).abs();
    let worst_excess = prior
        .grid()
        .iter()
        .chain(&candidate.points)
        .chain(std::iter::once(&1.0))
        .map(|&b| candidate.hinge(b) - prior.hinge(b))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MpcCheck { holds: mean_gap <= MPC_TOL && worst_excess <= MPC_TOL, mean_gap, worst_excess })
}
