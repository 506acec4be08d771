//! Brute-force verifiers: the linear program over mean-preserving contractions
//! and exhaustive enumeration of partitional segmentations on small grids.

pub mod simplex;

use serde::Serialize;

use crate::equilibrium::{best_response, solve_equilibrium};
use crate::error::{Error, Result};
use crate::market::{MeanDistribution, Prior, Segmentation, SurplusSplit};
use crate::meeting::MeetingFunction;
use crate::numeric::bisect;
use simplex::{maximize, LinearProgram};

const GAP_TOL: f64 = 1e-9;
const U_BAR_TOL: f64 = 1e-8;
pub const MAX_ENUMERATION_SIZE: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub u: f64,
    /// `V(u)`: the largest buyer mass a contraction of the prior can absorb at `u`.
    pub value: f64,
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
    pub support: Vec<f64>,
    pub support_masses: Vec<f64>,
    pub duality_gap: f64,
}

impl LpSolution {
    pub fn distribution(&self) -> MeanDistribution {
        MeanDistribution { points: self.support.clone(), masses: self.support_masses.clone() }
    }
}

/// Prior grid merged with `mesh` equally spaced points on `[0, 1]`.
pub fn lp_points(prior: &Prior, mesh: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = prior.grid().to_vec();
    if mesh >= 2 {
        pts.extend((0..mesh).map(|i| i as f64 / (mesh - 1) as f64));
    }
    sort_dedup(pts)
}

fn sort_dedup(mut pts: Vec<f64>) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    pts
}

fn check_u(mf: &MeetingFunction, ell: f64, u: f64) -> Result<()> {
    if !(ell > 0.0 && ell <= 1.0) {
        return Err(Error::invalid(format!("constant split ell must lie in (0, 1], got {ell}")));
    }
    let hi = mf.beta() * ell;
    if !(u > 0.0 && u < hi) {
        return Err(Error::domain(format!("u must lie in (0, {hi}), got {u}")));
    }
    Ok(())
}

/// Solves the linear program over mean distributions on the refined point set.
pub fn lp_value(mf: &MeetingFunction, prior: &Prior, ell: f64, u: f64, mesh: usize) -> Result<LpSolution> {
    if mesh < prior.len() {
        return Err(Error::invalid(format!("mesh {mesh} is smaller than the prior grid {}", prior.len())));
    }
    lp_value_on(mf, prior, ell, u, &lp_points(prior, mesh))
}

/// Same program on an explicit set of candidate means.
pub fn lp_value_on(mf: &MeetingFunction, prior: &Prior, ell: f64, u: f64, points: &[f64]) -> Result<LpSolution> {
    check_u(mf, ell, u)?;
    if points.is_empty() || points.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::invalid("candidate points must be non-empty and lie in [0, 1]"));
    }
    let points = sort_dedup(points.to_vec());
    let breakpoints = sort_dedup(points.iter().chain(prior.grid()).copied().collect());
    let c: Vec<f64> = points.iter().map(|&x| best_response(mf, ell * x, u)).collect();
    let a_ub: Vec<Vec<f64>> =
        breakpoints.iter().map(|&b| points.iter().map(|&x| (b - x).max(0.0)).collect()).collect();
    let b_ub: Vec<f64> = breakpoints.iter().map(|&b| prior.hinge(b)).collect();
    let lp = LinearProgram {
        c,
        a_ub,
        b_ub,
        a_eq: vec![vec![1.0; points.len()], points.clone()],
        b_eq: vec![1.0, prior.mean()],
    };
    let r = maximize(&lp)?;
    let scale = r.objective.abs().max(1.0);
    if r.duality_gap > GAP_TOL * scale || r.dual_infeasibility > GAP_TOL * scale || r.primal_infeasibility > GAP_TOL {
        return Err(Error::solver(format!(
            "linear program did not certify: gap {:e}, dual infeasibility {:e}, primal infeasibility {:e}",
            r.duality_gap, r.dual_infeasibility, r.primal_infeasibility
        )));
    }
    let (support, support_masses) = points.iter().zip(&r.x).filter(|(_, &h)| h > 1e-12).map(|(x, h)| (*x, *h)).unzip();
    Ok(LpSolution {
        u,
        value: r.objective,
        points,
        masses: r.x,
        support,
        support_masses,
        duality_gap: r.duality_gap,
    })
}

/// Bisection for `V(u) = 1`, the highest reservation value any segmentation can sustain.
pub fn find_u_bar(mf: &MeetingFunction, prior: &Prior, ell: f64, mesh: usize) -> Result<f64> {
    find_u_bar_scaled(mf, prior, 1.0, ell, mesh)
}

/// As [`find_u_bar`] with buyer mass `k`: solves `k V(u) = 1`.
pub fn find_u_bar_scaled(mf: &MeetingFunction, prior: &Prior, k: f64, ell: f64, mesh: usize) -> Result<f64> {
    let hi = mf.beta() * ell * prior.grid()[prior.len() - 1];
    let mut failure = None;
    let h = |u: f64| match lp_value(mf, prior, ell, u, mesh) {
        Ok(s) => k * s.value - 1.0,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let root = bisect(h, 1e-9 * hi, hi * (1.0 - 1e-12), |_, r| r.abs() <= U_BAR_TOL);
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root?;
    if root.fx.abs() > U_BAR_TOL {
        return Err(Error::solver(format!("V(u) = 1 residual {:e} above tolerance", root.fx)));
    }
    Ok(root.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// Only partitions into blocks of consecutive grid points.
    Interval,
    /// Every set partition.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpSolution {
    pub segmentation: Segmentation,
    /// Restricted-growth encoding: `labels[j]` is the block of grid point `j`.
    pub labels: Vec<usize>,
    pub u_star: f64,
    pub surplus: f64,
    pub candidates: usize,
}

/// Calls `visit` on every restricted-growth string of length `n`, in lexicographic order.
fn for_each_partition(n: usize, mode: PartitionMode, visit: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(
        labels: &mut Vec<usize>,
        n: usize,
        max: usize,
        mode: PartitionMode,
        visit: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if labels.len() == n {
            return visit(labels);
        }
        let start = match mode {
            PartitionMode::Interval => max,
            PartitionMode::Exhaustive => 0,
        };
        for l in start..=max + 1 {
            labels.push(l);
            rec(labels, n, max.max(l), mode, visit)?;
            labels.pop();
        }
        Ok(())
    }
    let mut labels = vec![0];
    rec(&mut labels, n, 0, mode, visit)
}

/// Maximizes equilibrium surplus over partitional segmentations of a small grid.
pub fn enumerate_bp(
    prior: &Prior,
    mf: &MeetingFunction,
    k: f64,
    split: &SurplusSplit,
    mode: PartitionMode,
) -> Result<BpSolution> {
    let n = prior.len();
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::Size(format!("enumeration supports at most {MAX_ENUMERATION_SIZE} grid points, got {n}")));
    }
    split.check_nontrivial(prior)?;
    let mut best: Option<BpSolution> = None;
    let mut candidates = 0;
    for_each_partition(n, mode, &mut |labels| {
        candidates += 1;
        let blocks = labels_to_blocks(labels);
        let seg = Segmentation::from_partition(prior, &blocks)?;
        let eq = solve_equilibrium(prior, &seg, mf, k, split)?;
        let improves = best.as_ref().is_none_or(|b| eq.total_surplus > b.surplus + 1e-12 * b.surplus.abs().max(1.0));
        if improves {
            best = Some(BpSolution {
                segmentation: seg,
                labels: labels.to_vec(),
                u_star: eq.u_star,
                surplus: eq.total_surplus,
                candidates: 0,
            });
        }
        Ok(())
    })?;
    let mut best = best.ok_or_else(|| Error::solver("no partition evaluated"))?;
    best.candidates = candidates;
    Ok(best)
}

fn labels_to_blocks(labels: &[usize]) -> Vec<Vec<usize>> {
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut blocks = vec![Vec::new(); count];
    for (j, &l) in labels.iter().enumerate() {
        blocks[l].push(j);
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877];
        for n in 1..=7 {
            let mut all = 0;
            let mut intervals = 0;
            for_each_partition(n, PartitionMode::Exhaustive, &mut |_| {
                all += 1;
                Ok(())
            })
            .unwrap();
            for_each_partition(n, PartitionMode::Interval, &mut |l| {
                assert!(l.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
                intervals += 1;
                Ok(())
            })
            .unwrap();
            assert_eq!(all, bell[n]);
            assert_eq!(intervals, 1 << (n - 1));
        }
    }

    #[test]
    fn size_limit() {
        let p = Prior::uniform(13).unwrap();
        let mf = MeetingFunction::ces(1.0, 1.0, 1.0).unwrap();
        let r = enumerate_bp(&p, &mf, 1.0, &SurplusSplit::constant(1.0).unwrap(), PartitionMode::Interval);
        assert!(matches!(r, Err(Error::Size(_))));
    }

    #[test]
    fn two_types_tie() {
        let p = Prior::uniform(2).unwrap();
        let mf = MeetingFunction::ces(1.0, 1.0, 1.0).unwrap();
        let r = enumerate_bp(&p, &mf, 1.0, &SurplusSplit::constant(1.0).unwrap(), PartitionMode::Exhaustive).unwrap();
        assert_eq!(r.candidates, 2);
        assert!((r.u_star - 0.25).abs() < 1e-9);
        // the pooled encoding comes first lexicographically
        assert_eq!(r.labels, vec![0, 0]);
    }

    #[test]
    fn single_type() {
        let p = Prior::uniform(1).unwrap();
        let mf = MeetingFunction::urn_ball(1.0, 1.0).unwrap();
        let r = enumerate_bp(&p, &mf, 1.0, &SurplusSplit::constant(1.0).unwrap(), PartitionMode::Interval).unwrap();
        assert_eq!(r.candidates, 1);
        assert_eq!(r.segmentation.len(), 1);
    }

    #[test]
    fn pooled_point_set() {
        let p = Prior::uniform(4).unwrap();
        let mf = MeetingFunction::ces(1.0, 1.0, 1.0).unwrap();
        let s = lp_value_on(&mf, &p, 1.0, 0.2, &[0.5]).unwrap();
        assert!((s.value - (0.5 / 0.2 - 1.0)).abs() < 1e-12);
        assert_eq!(s.support, vec![0.5]);
    }

    #[test]
    fn prior_is_feasible_so_value_dominates_it() {
        let p = Prior::uniform(10).unwrap();
        let mf = MeetingFunction::urn_ball(1.0, 1.0).unwrap();
        let u = 0.3;
        let s = lp_value(&mf, &p, 1.0, u, 40).unwrap();
        let of_prior = p.expect(|x| best_response(&mf, x, u));
        assert!(s.value >= of_prior - 1e-12);
        assert!(crate::market::verify_mpc(&s.distribution(), &p).unwrap().holds);
        assert!(lp_value(&mf, &p, 1.0, u, 5).is_err());
        assert!(lp_value(&mf, &p, 1.0, 1.5, 40).is_err());
    }
}
