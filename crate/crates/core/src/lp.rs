//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Problems have the form `min c'x  s.t.  A x ≤ b,  lb ≤ x ≤ ub`, where `lb`
//! may be `-∞` and `ub` may be `+∞`. Sizes here are tiny (a few dozen
//! variables, at most a few hundred rows) so a dense tableau is adequate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-8;
/// Entries below this magnitude are never used as pivots.
pub const PIVOT_TOL: f64 = 1e-10;
/// Phase-1 objective at or below this value means "feasible".
pub const PHASE1_TOL: f64 = 1e-9;

const COST_TOL: f64 = 1e-11;
/// After this many consecutive degenerate pivots, ratio ties fall back to
/// Bland's smallest-index rule, which cannot cycle.
const DEGENERATE_RUN: usize = 50;
/// Reduced cost below which a column without pivot rows proves unboundedness.
const UNBOUNDED_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Solution when `Optimal`, empty otherwise.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Phase-1 optimum (sum of artificial variables).
    pub infeasibility: f64,
    /// Total pivots over both phases.
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub witness: Option<Vec<f64>>,
    pub infeasibility: f64,
    pub pivots: usize,
}

impl LinearProgram {
    /// `A x ≤ b` with `x ≥ 0` and a zero objective.
    pub fn feasibility(a: Vec<Vec<f64>>, b: Vec<f64>, lb: Vec<f64>, ub: Vec<f64>) -> Self {
        let n = lb.len();
        Self {
            c: vec![0.0; n],
            a,
            b,
            lb,
            ub,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.c.len();
        if self.lb.len() != n || self.ub.len() != n {
            return Err(Error::Dimension(format!(
                "{n} objective coefficients but {} lower / {} upper bounds",
                self.lb.len(),
                self.ub.len()
            )));
        }
        if self.a.len() != self.b.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} right-hand sides",
                self.a.len(),
                self.b.len()
            )));
        }
        if let Some((r, row)) = self.a.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(Error::Dimension(format!(
                "row {r} has {} entries, expected {n}",
                row.len()
            )));
        }
        for j in 0..n {
            let (l, u) = (self.lb[j], self.ub[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::InvalidArgument(format!(
                    "bad bounds for x{j}: [{l}, {u}]"
                )));
            }
        }
        let finite = self
            .c
            .iter()
            .chain(&self.b)
            .chain(self.a.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite LP data".into()));
        }
        Ok(())
    }
}

/// How an original variable is expressed in nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// `x = lb + y`
    Shift { lb: f64, col: usize },
    /// `x = ub - y`
    Flip { ub: f64, col: usize },
    /// `x = y⁺ - y⁻`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    map: Vec<ColMap>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let n = lp.num_vars();
    let mut map = Vec::with_capacity(n);
    let mut cols = 0;
    for j in 0..n {
        let (l, u) = (lp.lb[j], lp.ub[j]);
        let m = if l.is_finite() {
            ColMap::Shift { lb: l, col: cols }
        } else if u.is_finite() {
            ColMap::Flip { ub: u, col: cols }
        } else {
            cols += 1;
            ColMap::Split {
                pos: cols - 1,
                neg: cols,
            }
        };
        cols += 1;
        map.push(m);
    }

    let transform = |row: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; cols];
        let mut offset = 0.0;
        for (j, &v) in row.iter().enumerate() {
            match map[j] {
                ColMap::Shift { lb, col } => {
                    out[col] += v;
                    offset += v * lb;
                }
                ColMap::Flip { ub, col } => {
                    out[col] -= v;
                    offset += v * ub;
                }
                ColMap::Split { pos, neg } => {
                    out[pos] += v;
                    out[neg] -= v;
                }
            }
        }
        (out, offset)
    };

    let (c, _) = transform(&lp.c);
    let mut a = Vec::with_capacity(lp.a.len() + n);
    let mut b = Vec::with_capacity(lp.b.len() + n);
    for (row, &rhs) in lp.a.iter().zip(&lp.b) {
        let (r, off) = transform(row);
        a.push(r);
        b.push(rhs - off);
    }
    // Finite upper bound on a shifted column: y ≤ ub - lb.
    for j in 0..n {
        if let ColMap::Shift { lb, col } = map[j] {
            if lp.ub[j].is_finite() {
                let mut r = vec![0.0; cols];
                r[col] = 1.0;
                a.push(r);
                b.push(lp.ub[j] - lb);
            }
        }
    }
    StandardForm { c, a, b, map }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Initial rows, for rebuilding `rows` from the basis.
    orig: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let inv = 1.0 / self.rows[pr][pc];
        for v in self.rows[pr].iter_mut() {
            *v *= inv;
        }
        self.rows[pr][pc] = 1.0;
        let pivot_row = self.rows[pr].clone();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Recomputes `rows = B⁻¹·orig` for the current basis, discarding the
    /// round-off accumulated by pivoting. The old rows are kept when `B` is
    /// singular or the new basic solution fits the original system worse.
    fn refactor(&mut self) {
        let m = self.rows.len();
        if m == 0 {
            return;
        }
        let b = DMatrix::from_fn(m, m, |r, c| self.orig[r][self.basis[c]]);
        let rhs = DMatrix::from_fn(m, self.width + 1, |r, c| self.orig[r][c]);
        let Some(sol) = b.lu().solve(&rhs) else {
            return;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return;
        }
        let fresh: Vec<f64> = (0..m).map(|r| sol[(r, self.width)]).collect();
        let current: Vec<f64> = (0..m).map(|r| self.rhs(r)).collect();
        if self.misfit(&fresh) > self.misfit(&current) {
            return;
        }
        for (r, row) in self.rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = sol[(r, c)];
            }
            row[self.basis[r]] = 1.0;
        }
    }

    /// Residual of the original rows plus negativity at basic values `xb`.
    fn misfit(&self, xb: &[f64]) -> f64 {
        let residual = self
            .orig
            .iter()
            .map(|row| {
                let lhs: f64 = self.basis.iter().zip(xb).map(|(&j, x)| row[j] * x).sum();
                (lhs - row[self.width]).abs()
            })
            .fold(0.0, f64::max);
        xb.iter().fold(residual, |acc, &x| acc.max(-x))
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut red = cost.to_vec();
        red.push(0.0);
        for (r, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb != 0.0 {
                for (v, t) in red.iter_mut().zip(&self.rows[r]) {
                    *v -= cb * t;
                }
            }
        }
        red
    }

    /// Leaving row for entering column `enter` by the minimum-ratio test.
    /// Among tied rows the largest pivot wins, or the smallest basic index
    /// when `bland_ties` is set.
    fn leaving_row(&self, enter: usize, bland_ties: bool) -> Option<usize> {
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows.len() {
            let coef = self.rows[r][enter];
            if coef > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                        let better_tie = if bland_ties {
                            self.basis[r] < self.basis[lr]
                        } else {
                            coef > self.rows[lr][enter]
                        };
                        if ratio < lratio && !tie || tie && better_tie {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        leave.map(|(r, _)| r)
    }

    /// Minimizes `cost` over the columns flagged in `allowed` using Bland's rule.
    /// With `bounded` set the objective is known to be bounded below, so a
    /// column without an admissible pivot is always round-off.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], bounded: bool) -> Result<PhaseOutcome> {
        let mut degenerate_run = 0;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Numerical("simplex pivot limit exceeded".into()));
            }
            // Recomputed every pivot: incremental updates drift once entries
            // span many orders of magnitude.
            let red = self.reduced_costs(cost);
            let bland_ties = degenerate_run >= DEGENERATE_RUN;
            let mut step = None;
            for j in (0..self.width).filter(|&j| allowed[j] && red[j] < -COST_TOL) {
                match self.leaving_row(j, bland_ties) {
                    Some(r) => {
                        step = Some((r, j));
                        break;
                    }
                    // A column with no admissible pivot is a ray only if its
                    // reduced cost is clearly negative; otherwise it is noise.
                    None if !bounded && red[j] < -UNBOUNDED_TOL => {
                        return Ok(PhaseOutcome::Unbounded)
                    }
                    None => {}
                }
            }
            let Some((pr, enter)) = step else {
                return Ok(PhaseOutcome::Optimal);
            };
            if self.rhs(pr) <= FEAS_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            // A basic value pushed below zero by round-off is degenerate;
            // pivoting on it as is would carry the error into other rows.
            let w = self.width;
            if self.rows[pr][w] < 0.0 {
                self.rows[pr][w] = 0.0;
            }
            self.pivot(pr, enter);
        }
    }
}

struct PhaseOne {
    tableau: Tableau,
    infeasibility: f64,
    n_struct: usize,
    n_art: usize,
}

fn phase_one(sf: &StandardForm) -> Result<PhaseOne> {
    let m = sf.a.len();
    let k = sf.c.len();
    let neg_rows: Vec<usize> = (0..m).filter(|&r| sf.b[r] < 0.0).collect();
    let n_art = neg_rows.len();
    let width = k + m + n_art;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = 0;
    for r in 0..m {
        let mut row = vec![0.0; width + 1];
        let sign = if sf.b[r] < 0.0 { -1.0 } else { 1.0 };
        for (j, &v) in sf.a[r].iter().enumerate() {
            row[j] = sign * v;
        }
        row[k + r] = sign;
        row[width] = sign * sf.b[r];
        if sign < 0.0 {
            row[k + m + art] = 1.0;
            basis.push(k + m + art);
            art += 1;
        } else {
            basis.push(k + r);
        }
        rows.push(row);
    }
    let mut tableau = Tableau {
        orig: rows.clone(),
        rows,
        basis,
        width,
        pivots: 0,
    };
    let mut cost = vec![0.0; width];
    for c in cost[k + m..].iter_mut() {
        *c = 1.0;
    }
    let allowed = vec![true; width];
    if n_art > 0 {
        // Phase 1 is bounded below by zero.
        tableau.optimize(&cost, &allowed, true)?;
        // Re-optimize from a clean factorization in case drift hid an
        // improving column or faked a zero objective.
        tableau.refactor();
        tableau.optimize(&cost, &allowed, true)?;
    }
    let infeasibility: f64 = (0..m)
        .filter(|&r| tableau.basis[r] >= k + m)
        .map(|r| tableau.rhs(r).max(0.0))
        .sum();
    Ok(PhaseOne {
        tableau,
        infeasibility,
        n_struct: k,
        n_art,
    })
}

fn recover(sf: &StandardForm, tab: &Tableau) -> Vec<f64> {
    let mut y = vec![0.0; sf.c.len()];
    for (r, &bv) in tab.basis.iter().enumerate() {
        if bv < y.len() {
            y[bv] = tab.rhs(r).max(0.0);
        }
    }
    sf.map
        .iter()
        .map(|m| match *m {
            ColMap::Shift { lb, col } => lb + y[col],
            ColMap::Flip { ub, col } => ub - y[col],
            ColMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect()
}

/// Solves the LP to optimality, or reports infeasibility/unboundedness.
pub fn solve(lp: &LinearProgram) -> Result<LpResult> {
    lp.check()?;
    let sf = standardize(lp);
    let PhaseOne {
        mut tableau,
        infeasibility,
        n_struct,
        n_art,
    } = phase_one(&sf)?;
    if infeasibility > PHASE1_TOL {
        return Ok(LpResult {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
            infeasibility,
            pivots: tableau.pivots,
        });
    }

    let m = sf.a.len();
    let first_art = n_struct + m;
    // Drive zero-level artificials out of the basis where possible; rows where
    // that fails are redundant and stay inert.
    for r in 0..m {
        if tableau.basis[r] >= first_art {
            if let Some(j) = (0..first_art).find(|&j| tableau.rows[r][j].abs() > PIVOT_TOL) {
                tableau.pivot(r, j);
            }
        }
    }

    let mut cost = sf.c.clone();
    cost.resize(tableau.width, 0.0);
    let mut allowed = vec![true; tableau.width];
    for a in allowed[first_art..first_art + n_art].iter_mut() {
        *a = false;
    }
    let outcome = tableau.optimize(&cost, &allowed, false)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            infeasibility,
            pivots: tableau.pivots,
        });
    }
    tableau.refactor();
    let x = recover(&sf, &tableau);
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>();
    Ok(LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
        infeasibility,
        pivots: tableau.pivots,
    })
}

/// Phase-1 feasibility of `{x : A x ≤ b, lb ≤ x ≤ ub}`.
pub fn feasible(a: &[Vec<f64>], b: &[f64], lb: &[f64], ub: &[f64]) -> Result<Feasibility> {
    let lp = LinearProgram::feasibility(a.to_vec(), b.to_vec(), lb.to_vec(), ub.to_vec());
    lp.check()?;
    let sf = standardize(&lp);
    let p1 = phase_one(&sf)?;
    let feasible = p1.infeasibility <= PHASE1_TOL;
    Ok(Feasibility {
        feasible,
        witness: feasible.then(|| recover(&sf, &p1.tableau)),
        infeasibility: p1.infeasibility,
        pivots: p1.tableau.pivots,
    })
}

/// Largest violation of `A x ≤ b` and of the bounds at `x`.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let rows =
        lp.a.iter()
            .zip(&lp.b)
            .map(|(row, &b)| row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - b);
    let bounds = x
        .iter()
        .zip(lp.lb.iter().zip(&lp.ub))
        .flat_map(|(&x, (&l, &u))| [l - x, x - u]);
    rows.chain(bounds).fold(0.0, f64::max)
}
