//! Dense two-phase simplex for `min cᵀx  s.t.  Ax ≤ b, lo ≤ x ≤ hi`.
//!
//! Phase one uses a single artificial column (the classic "most infeasible
//! row" start), so its optimum is exactly the smallest uniform relaxation
//! `t` with `Ax ≤ b + t·1` feasible. The problem is declared infeasible when
//! that relaxation exceeds the tolerance.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Mat, Vector};

/// Per-variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub const FREE: Bound = Bound { lower: None, upper: None };
    pub const NONNEG: Bound = Bound { lower: Some(0.0), upper: None };

    pub fn between(lower: f64, upper: f64) -> Self {
        Bound { lower: Some(lower), upper: Some(upper) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vector,
    pub a: Mat,
    pub b: Vector,
    /// Empty means every variable is free.
    pub bounds: Vec<Bound>,
}

impl LinearProgram {
    pub fn new(c: Vector, a: Mat, b: Vector) -> Result<Self> {
        check_dim("LP constraint columns", c.len(), a.ncols())?;
        check_dim("LP right-hand side", a.nrows(), b.len())?;
        Ok(LinearProgram { c, a, b, bounds: Vec::new() })
    }

    /// Pure feasibility problem (zero objective).
    pub fn feasibility(a: Mat, b: Vector) -> Result<Self> {
        let n = a.ncols();
        Self::new(Vector::zeros(n), a, b)
    }

    pub fn with_bounds(mut self, bounds: Vec<Bound>) -> Result<Self> {
        check_dim("LP bounds", self.c.len(), bounds.len())?;
        self.bounds = bounds;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn bound(&self, j: usize) -> Bound {
        self.bounds.get(j).copied().unwrap_or(Bound::FREE)
    }
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
    /// Primal solution; empty unless `status == Optimal`.
    pub x: Vector,
    pub objective: f64,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Feasibility tolerance on constraint violation.
    pub tol: f64,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { tol: 1e-7, max_pivots: 10_000 }
    }
}

impl LpOptions {
    pub fn with_tol(tol: f64) -> Self {
        LpOptions { tol, ..Default::default() }
    }
}

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const BLAND_AFTER: usize = 50;

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lo + col
    Shift { col: usize, lo: f64 },
    /// x = hi - col
    Mirror { col: usize, hi: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    /// `(rows + 1) × (cols + 1)`, row-major; last row is the reduced-cost row,
    /// last column the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        self.data[pr * w + pc] = 1.0;
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let apply = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for c in 0..w {
                    row[c] -= f * prow[c];
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(apply);
        after.chunks_mut(w).for_each(apply);
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Installs `costs` as the objective, expressed in the current basis.
    fn set_objective(&mut self, costs: &[f64]) {
        let w = self.cols + 1;
        let base = self.rows * w;
        for c in 0..w {
            self.data[base + c] = if c < self.cols { costs[c] } else { 0.0 };
        }
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.data[base + c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        -self.at(self.rows, self.cols)
    }

    /// Runs the simplex loop over the allowed columns. Returns `false` if the
    /// objective is unbounded below.
    fn optimize(&mut self, allowed: &[bool], max_pivots: usize) -> Result<bool> {
        let mut degenerate_streak = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Err(Error::NumericalFailure(String::from("simplex pivot limit exceeded")));
            }
            let bland = degenerate_streak >= BLAND_AFTER;
            let mut entering = None;
            let mut best = -COST_TOL;
            for c in 0..self.cols {
                if !allowed[c] {
                    continue;
                }
                let rc = self.at(self.rows, c);
                if rc < -COST_TOL {
                    if bland {
                        entering = Some(c);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        entering = Some(c);
                    }
                }
            }
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio, a)),
                        Some((lr, lratio, la)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            let better = if tie {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    a > la
                                }
                            } else {
                                ratio < lratio
                            };
                            if better {
                                leave = Some((r, ratio, a));
                            }
                        }
                    }
                }
            }
            let Some((pr, ratio, _)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-14 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solves the linear program with a dense two-phase simplex.
pub fn solve_lp(p: &LinearProgram, opts: &LpOptions) -> Result<LpResult> {
    let n = p.num_vars();
    check_dim("LP constraint columns", n, p.a.ncols())?;
    check_dim("LP right-hand side", p.a.nrows(), p.b.len())?;
    if !p.bounds.is_empty() {
        check_dim("LP bounds", n, p.bounds.len())?;
    }

    // Map each variable onto nonnegative columns.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new(); // (column, upper bound on column)
    for j in 0..n {
        let bd = p.bound(j);
        match (bd.lower, bd.upper) {
            (Some(lo), hi) => {
                if let Some(hi) = hi {
                    if hi < lo - opts.tol {
                        return Ok(infeasible());
                    }
                    extra_rows.push((ncols, (hi - lo).max(0.0)));
                }
                maps.push(VarMap::Shift { col: ncols, lo });
                ncols += 1;
            }
            (None, Some(hi)) => {
                maps.push(VarMap::Mirror { col: ncols, hi });
                ncols += 1;
            }
            (None, None) => {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
    }

    let m_orig = p.a.nrows();
    let rows = m_orig + extra_rows.len();
    let slack0 = ncols;
    let art = ncols + rows;
    let cols = art + 1;
    let w = cols + 1;
    let mut t = Tableau {
        rows,
        cols,
        data: vec![0.0; (rows + 1) * w],
        basis: (0..rows).map(|r| slack0 + r).collect(),
        pivots: 0,
    };
    let mut costs = vec![0.0; cols];
    for j in 0..n {
        let cj = p.c[j];
        match maps[j] {
            VarMap::Shift { col, .. } => costs[col] = cj,
            VarMap::Mirror { col, .. } => costs[col] = -cj,
            VarMap::Split { pos, neg } => {
                costs[pos] = cj;
                costs[neg] = -cj;
            }
        }
    }
    for r in 0..m_orig {
        let mut rhs = p.b[r];
        for j in 0..n {
            let a = p.a[(r, j)];
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    t.data[r * w + col] += a;
                    rhs -= a * lo;
                }
                VarMap::Mirror { col, hi } => {
                    t.data[r * w + col] -= a;
                    rhs -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    t.data[r * w + pos] += a;
                    t.data[r * w + neg] -= a;
                }
            }
        }
        t.data[r * w + slack0 + r] = 1.0;
        t.data[r * w + art] = -1.0;
        t.data[r * w + cols] = rhs;
    }
    for (k, &(col, ub)) in extra_rows.iter().enumerate() {
        let r = m_orig + k;
        t.data[r * w + col] = 1.0;
        t.data[r * w + slack0 + r] = 1.0;
        t.data[r * w + art] = -1.0;
        t.data[r * w + cols] = ub;
    }
    if !p.b.iter().all(|v| v.is_finite()) || !p.a.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(String::from("LP data must be finite")));
    }

    // Phase one.
    let mut allowed = vec![true; cols];
    let (min_row, min_rhs) = (0..rows)
        .map(|r| (r, t.rhs(r)))
        .fold((usize::MAX, 0.0), |acc, (r, v)| if v < acc.1 { (r, v) } else { acc });
    if min_row != usize::MAX && min_rhs < 0.0 {
        t.pivot(min_row, art);
        let mut phase1 = vec![0.0; cols];
        phase1[art] = 1.0;
        t.set_objective(&phase1);
        t.optimize(&allowed, opts.max_pivots)?;
        let relax = t.objective_value();
        if relax > opts.tol {
            return Ok(infeasible());
        }
        if let Some(r) = t.basis.iter().position(|&b| b == art) {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..art {
                let a = t.at(r, c).abs();
                if a > 1e-9 && best.map_or(true, |(_, ba)| a > ba) {
                    best = Some((c, a));
                }
            }
            if let Some((c, _)) = best {
                t.pivot(r, c);
                for rr in 0..rows {
                    let v = t.rhs(rr);
                    if v < 0.0 {
                        t.data[rr * w + cols] = 0.0;
                    }
                }
            }
        }
    }
    allowed[art] = false;
    // Art column must not re-enter; remove its influence on basic rows that
    // still carry it by zeroing the column (the row, if any, is redundant).
    if t.basis.iter().all(|&b| b != art) {
        for r in 0..=rows {
            t.data[r * w + art] = 0.0;
        }
    }

    // Phase two.
    t.set_objective(&costs);
    let bounded = t.optimize(&allowed, opts.max_pivots)?;
    if !bounded {
        return Ok(LpResult { status: LpStatus::Unbounded, x: Vector::zeros(0), objective: f64::NEG_INFINITY });
    }

    let mut colval = vec![0.0; cols];
    for r in 0..rows {
        colval[t.basis[r]] = t.rhs(r).max(0.0);
    }
    let x = Vector::from_iterator(
        n,
        maps.iter().map(|m| match *m {
            VarMap::Shift { col, lo } => lo + colval[col],
            VarMap::Mirror { col, hi } => hi - colval[col],
            VarMap::Split { pos, neg } => colval[pos] - colval[neg],
        }),
    );
    let objective = p.c.dot(&x);
    Ok(LpResult { status: LpStatus::Optimal, x, objective })
}

fn infeasible() -> LpResult {
    LpResult { status: LpStatus::Infeasible, x: Vector::zeros(0), objective: f64::INFINITY }
}

/// Is `{x : Ax ≤ b}` nonempty (at the LP tolerance)?
pub fn is_feasible(a: &Mat, b: &Vector, opts: &LpOptions) -> Result<bool> {
    let lp = LinearProgram::feasibility(a.clone(), b.clone())?;
    Ok(solve_lp(&lp, opts)?.status != LpStatus::Infeasible)
}
