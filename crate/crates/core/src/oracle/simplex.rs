//! Dense two-phase tableau simplex for small linear programs.
//!
//! Solves `max cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.
//! The final basis is re-solved from the original data by LU factorization,
//! so the reported primal and dual vectors do not carry tableau round-off,
//! and the duality gap is measured against them.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

const PIVOT_TOL: f64 = 1e-9;
const RATIO_RELAX: f64 = 1e-12;
const COST_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals_ub: Vec<f64>,
    pub duals_eq: Vec<f64>,
    /// `|bᵀy − cᵀx|` for the refined primal and dual vectors.
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `(rows + 1) × (cols + 1)`; the last row holds reduced costs, the last column the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        self.t[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for (x, pr) in row.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Sets the objective row to the reduced costs of maximizing `cost · x`.
    fn load_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let obj = self.rows * w;
        for j in 0..w {
            self.t[obj + j] = if j < self.cols { -cost[j] } else { 0.0 };
        }
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.t[obj + j] += cb * self.t[i * w + j];
                }
            }
        }
    }

    /// Two-pass (Harris) ratio test: bound the step with slightly relaxed
    /// right-hand sides, then take the largest pivot among rows within it.
    /// In Bland mode the smallest basic index breaks ties instead.
    fn ratio_test(&self, c: usize, bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > PIVOT_TOL {
                bound = bound.min((self.rhs(i).max(0.0) + RATIO_RELAX) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut leave: Option<usize> = None;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > PIVOT_TOL && self.rhs(i).max(0.0) / a <= bound {
                let better = match leave {
                    None => true,
                    Some(l) if bland => self.basis[i] < self.basis[l],
                    Some(l) => a > self.at(l, c),
                };
                if better {
                    leave = Some(i);
                }
            }
        }
        leave
    }

    /// Runs primal simplex iterations; `allowed` masks the columns that may enter.
    fn optimize(&mut self, allowed: &[bool], max_pivots: usize) -> Result<()> {
        let mut streak = 0;
        loop {
            if self.pivots > max_pivots {
                return Err(Error::solver("simplex exceeded its pivot budget"));
            }
            let bland = streak >= DEGENERATE_STREAK;
            let obj = self.rows;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..self.cols {
                if !allowed[j] {
                    continue;
                }
                let d = self.at(obj, j);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let leave = self.ratio_test(c, bland);
            let Some(r) = leave else {
                return Err(Error::solver("linear program is unbounded"));
            };
            streak = if self.rhs(r).max(0.0) / self.at(r, c) <= 1e-14 { streak + 1 } else { 0 };
            self.pivot(r, c);
        }
    }
}

/// Dense LU with partial pivoting; solves `M z = rhs` (or `Mᵀ z = rhs`).
fn lu_solve(m: &[Vec<f64>], rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = if transpose {
        (0..n).map(|i| (0..n).map(|j| m[j][i]).collect()).collect()
    } else {
        m.to_vec()
    };
    let mut b = rhs.to_vec();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .ok_or_else(|| Error::solver("empty basis"))?;
        if a[p][col].abs() < 1e-14 {
            return Err(Error::solver("singular basis matrix"));
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s = compensated_sum((i + 1..n).map(|j| a[i][j] * z[j]));
        z[i] = (b[i] - s) / a[i][i];
    }
    Ok(z)
}

pub fn maximize(lp: &LinearProgram) -> Result<LpResult> {
    let n = lp.c.len();
    let (m_ub, m_eq) = (lp.a_ub.len(), lp.a_eq.len());
    if lp.b_ub.len() != m_ub || lp.b_eq.len() != m_eq {
        return Err(Error::invalid("constraint rows and right-hand sides differ in length"));
    }
    if lp.a_ub.iter().chain(&lp.a_eq).any(|r| r.len() != n) {
        return Err(Error::invalid("constraint rows must have one entry per variable"));
    }
    let m = m_ub + m_eq;
    // Row data with sign flipped where needed to make the right-hand side nonnegative.
    // Columns: structural, one slack per ≤ row, one artificial per row that lacks a unit slack.
    let mut flipped = vec![false; m];
    let mut needs_art = vec![false; m];
    for i in 0..m {
        let b = if i < m_ub { lp.b_ub[i] } else { lp.b_eq[i - m_ub] };
        flipped[i] = b < 0.0;
        needs_art[i] = i >= m_ub || flipped[i];
    }
    let art_index: Vec<Option<usize>> = {
        let mut next = n + m_ub;
        needs_art
            .iter()
            .map(|&need| {
                need.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let cols = n + m_ub + needs_art.iter().filter(|&&x| x).count();
    let w = cols + 1;
    let mut tab = Tableau { rows: m, cols, t: vec![0.0; (m + 1) * w], basis: vec![0; m], pivots: 0 };
    for i in 0..m {
        let (row, b) = if i < m_ub { (&lp.a_ub[i], lp.b_ub[i]) } else { (&lp.a_eq[i - m_ub], lp.b_eq[i - m_ub]) };
        let s = if flipped[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            tab.t[i * w + j] = s * row[j];
        }
        if i < m_ub {
            tab.t[i * w + n + i] = s;
        }
        tab.t[i * w + cols] = s * b;
        tab.basis[i] = match art_index[i] {
            Some(a) => {
                tab.t[i * w + a] = 1.0;
                a
            }
            None => n + i,
        };
    }
    let max_pivots = 50 * (m + cols) + 1000;
    let is_art = |j: usize| j >= n + m_ub;
    if needs_art.iter().any(|&x| x) {
        let phase1: Vec<f64> = (0..cols).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.load_objective(&phase1);
        tab.optimize(&vec![true; cols], max_pivots)?;
        let infeas = -tab.at(m, cols);
        if infeas > FEAS_TOL {
            return Err(Error::Infeasible(format!("linear program is infeasible (phase one residual {infeas:e})")));
        }
        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            if is_art(tab.basis[i]) {
                if let Some(j) = (0..n + m_ub).find(|&j| tab.at(i, j).abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.c);
    tab.load_objective(&cost);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    tab.optimize(&allowed, max_pivots)?;

    // Refine from the original data: B x_B = b and Bᵀ y = c_B.
    let column = |j: usize| -> Vec<f64> {
        (0..m)
            .map(|i| {
                if j < n {
                    if i < m_ub {
                        lp.a_ub[i][j]
                    } else {
                        lp.a_eq[i - m_ub][j]
                    }
                } else if j < n + m_ub {
                    if i == j - n {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    // artificial columns act on the original, unflipped row
                    let row = art_index.iter().position(|&a| a == Some(j)).unwrap();
                    if i == row {
                        if flipped[i] {
                            -1.0
                        } else {
                            1.0
                        }
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    };
    let b: Vec<f64> = lp.b_ub.iter().chain(&lp.b_eq).copied().collect();
    let bcols: Vec<Vec<f64>> = tab.basis.iter().map(|&j| column(j)).collect();
    // bmat[i][r] = entry i of basic column r
    let bmat: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|r| bcols[r][i]).collect()).collect();
    let xb = lu_solve(&bmat, &b, false)?;
    let cb: Vec<f64> = tab.basis.iter().map(|&j| if j < n { lp.c[j] } else { 0.0 }).collect();
    let y = lu_solve(&bmat, &cb, true)?;
    let mut x = vec![0.0; n];
    for (r, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = xb[r].max(0.0);
        }
    }
    let objective = compensated_sum(lp.c.iter().zip(&x).map(|(c, x)| c * x));
    let dual_objective = compensated_sum(b.iter().zip(&y).map(|(b, y)| b * y));
    let mut primal_infeasibility: f64 = 0.0;
    for i in 0..m {
        let row = if i < m_ub { &lp.a_ub[i] } else { &lp.a_eq[i - m_ub] };
        let lhs = compensated_sum(row.iter().zip(&x).map(|(a, x)| a * x));
        let viol = if i < m_ub { lhs - b[i] } else { (lhs - b[i]).abs() };
        primal_infeasibility = primal_infeasibility.max(viol);
    }
    let mut dual_infeasibility: f64 = 0.0;
    for j in 0..n {
        let col = column(j);
        let ay = compensated_sum(col.iter().zip(&y).map(|(a, y)| a * y));
        dual_infeasibility = dual_infeasibility.max(lp.c[j] - ay);
    }
    for &yi in &y[..m_ub] {
        dual_infeasibility = dual_infeasibility.max(-yi);
    }
    Ok(LpResult {
        x,
        objective,
        duals_ub: y[..m_ub].to_vec(),
        duals_eq: y[m_ub..].to_vec(),
        duality_gap: (dual_objective - objective).abs(),
        primal_infeasibility,
        dual_infeasibility,
        pivots: tab.pivots,
    })
}
