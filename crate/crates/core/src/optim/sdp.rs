//! Small dense semidefinite programs in LMI form.
//!
//! Problems are stated over scalar decision variables `y`:
//!
//! ```text
//! minimize  cᵀy
//! s.t.      F_k(y) = C_k + Σ_l y_l A_kl ⪰ 0      (one per LMI block)
//!           aᵣᵀy ≤ bᵣ,  eᵣᵀy = fᵣ
//! ```
//!
//! and solved with an infeasible-start primal-dual path-following method
//! (HKM search direction, Mehrotra predictor-corrector). Linear inequalities
//! are carried as one diagonal block. Equalities are eliminated up front
//! through a null-space parametrization.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::linalg::{eye, max_psd_step, min_eigenvalue, symmetrize, Mat, Vector};
#[allow(unused_imports)] // method resolution differs once std is linked
use num_traits::Float;

/// `C + Σ y_v A_v` with constant coefficient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    pub constant: Mat,
    pub terms: Vec<(usize, Mat)>,
}

impl AffineMatrix {
    pub fn constant(m: Mat) -> Self {
        AffineMatrix { constant: m, terms: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(eye(n))
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn add(&self, other: &AffineMatrix) -> AffineMatrix {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        AffineMatrix { constant: &self.constant + &other.constant, terms }.merged()
    }

    pub fn sub(&self, other: &AffineMatrix) -> AffineMatrix {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> AffineMatrix {
        AffineMatrix {
            constant: &self.constant * s,
            terms: self.terms.iter().map(|(v, m)| (*v, m * s)).collect(),
        }
    }

    /// `m · self`
    pub fn left_mul(&self, m: &Mat) -> AffineMatrix {
        AffineMatrix {
            constant: m * &self.constant,
            terms: self.terms.iter().map(|(v, a)| (*v, m * a)).collect(),
        }
    }

    /// `self · m`
    pub fn right_mul(&self, m: &Mat) -> AffineMatrix {
        AffineMatrix {
            constant: &self.constant * m,
            terms: self.terms.iter().map(|(v, a)| (*v, a * m)).collect(),
        }
    }

    pub fn transpose(&self) -> AffineMatrix {
        AffineMatrix {
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(v, a)| (*v, a.transpose())).collect(),
        }
    }

    /// Assembles a block matrix; every row of blocks must agree in height and
    /// every column in width.
    pub fn block(rows: &[Vec<AffineMatrix>]) -> Result<AffineMatrix> {
        if rows.is_empty() {
            return Ok(Self::zeros(0, 0));
        }
        let ncb = rows[0].len();
        let heights: Vec<usize> = rows.iter().map(|r| r.first().map_or(0, |b| b.nrows())).collect();
        let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
        for (bi, r) in rows.iter().enumerate() {
            if r.len() != ncb {
                return Err(Error::InvalidArgument(String::from("ragged block matrix")));
            }
            for (bj, b) in r.iter().enumerate() {
                if b.nrows() != heights[bi] || b.ncols() != widths[bj] {
                    return Err(Error::InvalidArgument(format!(
                        "block ({bi},{bj}) has shape {}x{}, expected {}x{}",
                        b.nrows(),
                        b.ncols(),
                        heights[bi],
                        widths[bj]
                    )));
                }
            }
        }
        let total_r: usize = heights.iter().sum();
        let total_c: usize = widths.iter().sum();
        let mut constant = Mat::zeros(total_r, total_c);
        let mut terms: BTreeMap<usize, Mat> = BTreeMap::new();
        let mut r0 = 0;
        for (bi, r) in rows.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in r.iter().enumerate() {
                constant.view_mut((r0, c0), (heights[bi], widths[bj])).copy_from(&b.constant);
                for (v, a) in &b.terms {
                    let e = terms.entry(*v).or_insert_with(|| Mat::zeros(total_r, total_c));
                    let mut view = e.view_mut((r0, c0), (heights[bi], widths[bj]));
                    view += a;
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        Ok(AffineMatrix { constant, terms: terms.into_iter().collect() })
    }

    pub fn evaluate(&self, y: &Vector) -> Mat {
        let mut m = self.constant.clone();
        for (v, a) in &self.terms {
            m += a * y[*v];
        }
        m
    }

    fn merged(self) -> AffineMatrix {
        let mut map: BTreeMap<usize, Mat> = BTreeMap::new();
        for (v, a) in self.terms {
            match map.get_mut(&v) {
                Some(m) => *m += a,
                None => {
                    map.insert(v, a);
                }
            }
        }
        AffineMatrix {
            constant: self.constant,
            terms: map.into_iter().filter(|(_, a)| a.iter().any(|x| *x != 0.0)).collect(),
        }
    }
}

/// Symmetric `n×n` matrix variable stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymVar {
    pub offset: usize,
    pub n: usize,
}

impl SymVar {
    pub fn len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Scalar index of entry `(a, b)` (either order).
    pub fn index(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        // row-major upper triangle
        self.offset + i * self.n - i * (i + 1) / 2 + j
    }

    pub fn expr(&self) -> AffineMatrix {
        let n = self.n;
        let mut terms = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in i..n {
                let mut m = Mat::zeros(n, n);
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
                terms.push((self.index(i, j), m));
            }
        }
        AffineMatrix { constant: Mat::zeros(n, n), terms }
    }

    pub fn value(&self, y: &Vector) -> Mat {
        Mat::from_fn(self.n, self.n, |i, j| y[self.index(i, j)])
    }
}

/// General `rows×cols` matrix variable, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatVar {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MatVar {
    pub fn index(&self, r: usize, c: usize) -> usize {
        self.offset + r * self.cols + c
    }

    pub fn expr(&self) -> AffineMatrix {
        let mut terms = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut m = Mat::zeros(self.rows, self.cols);
                m[(r, c)] = 1.0;
                terms.push((self.index(r, c), m));
            }
        }
        AffineMatrix { constant: Mat::zeros(self.rows, self.cols), terms }
    }

    pub fn value(&self, y: &Vector) -> Mat {
        Mat::from_fn(self.rows, self.cols, |r, c| y[self.index(r, c)])
    }
}

/// `Σ coef·y_v + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(v: usize) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: usize, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn evaluate(&self, y: &Vector) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * y[*v]).sum::<f64>()
    }

    /// Trace inner product `⟨W, X⟩` for constant symmetric `W` and variable `X`.
    pub fn trace_product(w: &Mat, x: &SymVar) -> Self {
        let mut e = LinExpr::default();
        for i in 0..x.n {
            for j in i..x.n {
                let c = if i == j { w[(i, i)] } else { w[(i, j)] + w[(j, i)] };
                if c != 0.0 {
                    e.terms.push((x.index(i, j), c));
                }
            }
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lmi {
    pub expr: AffineMatrix,
    /// Strict constraints are enforced as `F(y) ⪰ ε_psd·I`.
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub eps_psd: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { eps_psd: 1e-6, max_iter: 200, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    n_vars: usize,
    objective: LinExpr,
    lmis: Vec<Lmi>,
    inequalities: Vec<(LinExpr, f64)>,
    equalities: Vec<(LinExpr, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub y: Vector,
    pub objective: f64,
    pub iterations: usize,
    /// Smallest eigenvalue over all LMI blocks at `y`, after subtracting the
    /// strictness margin for strict blocks.
    pub min_block_eigenvalue: f64,
    /// Largest violation of the linear inequalities at `y`.
    pub max_linear_violation: f64,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    pub fn lmis(&self) -> &[Lmi] {
        &self.lmis
    }

    pub fn inequalities(&self) -> &[(LinExpr, f64)] {
        &self.inequalities
    }

    pub fn add_scalar(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn add_nonneg_scalar(&mut self) -> usize {
        let v = self.add_scalar();
        self.add_le(LinExpr { terms: vec![(v, -1.0)], constant: 0.0 }, 0.0);
        v
    }

    pub fn add_symmetric(&mut self, n: usize) -> SymVar {
        let s = SymVar { offset: self.n_vars, n };
        self.n_vars += s.len();
        s
    }

    /// Symmetric variable with every entry constrained to be nonnegative.
    pub fn add_nonneg_symmetric(&mut self, n: usize) -> SymVar {
        let s = self.add_symmetric(n);
        for v in s.offset..s.offset + s.len() {
            self.add_le(LinExpr { terms: vec![(v, -1.0)], constant: 0.0 }, 0.0);
        }
        s
    }

    pub fn add_matrix(&mut self, rows: usize, cols: usize) -> MatVar {
        let m = MatVar { offset: self.n_vars, rows, cols };
        self.n_vars += rows * cols;
        m
    }

    pub fn add_lmi(&mut self, expr: AffineMatrix, strict: bool) -> Result<usize> {
        if expr.nrows() != expr.ncols() {
            return Err(Error::InvalidArgument(String::from("LMI block must be square")));
        }
        let asym = |m: &Mat| (m - m.transpose()).amax();
        let scale = 1.0 + expr.constant.amax();
        if asym(&expr.constant) > 1e-12 * scale || expr.terms.iter().any(|(_, a)| asym(a) > 1e-12 * (1.0 + a.amax())) {
            return Err(Error::InvalidArgument(String::from("LMI block is not symmetric")));
        }
        if let Some((v, _)) = expr.terms.iter().find(|(v, _)| *v >= self.n_vars) {
            return Err(Error::InvalidArgument(format!("unknown variable {v}")));
        }
        let expr = AffineMatrix {
            constant: symmetrize(&expr.constant),
            terms: expr.terms.iter().map(|(v, a)| (*v, symmetrize(a))).collect(),
        }
        .merged();
        self.lmis.push(Lmi { expr, strict });
        Ok(self.lmis.len() - 1)
    }

    /// `expr ≤ rhs`
    pub fn add_le(&mut self, expr: LinExpr, rhs: f64) {
        self.inequalities.push((expr, rhs));
    }

    /// `expr = rhs`
    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64) {
        self.equalities.push((expr, rhs));
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    /// Smallest block eigenvalue (margin-adjusted) and largest linear
    /// violation at `y`.
    pub fn residuals(&self, y: &Vector, eps_psd: f64) -> (f64, f64) {
        let mut min_eig = f64::INFINITY;
        for l in &self.lmis {
            let mut f = l.expr.evaluate(y);
            if l.strict {
                f -= eye(f.nrows()) * eps_psd;
            }
            if f.nrows() > 0 {
                min_eig = min_eig.min(min_eigenvalue(&f));
            }
        }
        let mut viol = 0.0f64;
        for (e, rhs) in &self.inequalities {
            viol = viol.max(e.evaluate(y) - rhs);
        }
        for (e, rhs) in &self.equalities {
            viol = viol.max((e.evaluate(y) - rhs).abs());
        }
        (min_eig, viol)
    }

    pub fn solve(&self, opts: &SdpOptions) -> Result<SdpSolution> {
        let p = self.n_vars;
        // Equality elimination y = y0 + N z.
        let (y0, basis) = if self.equalities.is_empty() {
            (Vector::zeros(p), None)
        } else {
            let mut aeq = Mat::zeros(self.equalities.len(), p);
            let mut beq = Vector::zeros(self.equalities.len());
            for (r, (e, rhs)) in self.equalities.iter().enumerate() {
                for (v, c) in &e.terms {
                    aeq[(r, *v)] += c;
                }
                beq[r] = rhs - e.constant;
            }
            let (y0, n) = nullspace_parametrization(&aeq, &beq)?;
            (y0, Some(n))
        };

        let map_terms = |c: &Mat, terms: &[(usize, Mat)]| -> (Mat, Vec<(usize, Mat)>) {
            let mut constant = c.clone();
            for (v, a) in terms {
                if y0[*v] != 0.0 {
                    constant += a * y0[*v];
                }
            }
            match &basis {
                None => (constant, terms.to_vec()),
                Some(n) => {
                    let mut out: Vec<(usize, Mat)> = Vec::new();
                    for w in 0..n.ncols() {
                        let mut acc = Mat::zeros(c.nrows(), c.ncols());
                        let mut any = false;
                        for (v, a) in terms {
                            let k = n[(*v, w)];
                            if k.abs() > 1e-14 {
                                acc += a * k;
                                any = true;
                            }
                        }
                        if any {
                            out.push((w, acc));
                        }
                    }
                    (constant, out)
                }
            }
        };
        let nz = basis.as_ref().map_or(p, |n| n.ncols());

        let mut blocks = Vec::with_capacity(self.lmis.len());
        for l in &self.lmis {
            let mut c = l.expr.constant.clone();
            if l.strict {
                c -= eye(c.nrows()) * opts.eps_psd;
            }
            let (c, a) = map_terms(&c, &l.expr.terms);
            if c.nrows() > 0 {
                blocks.push(Block { c, a });
            }
        }
        let mut lp = LpBlock { c: Vec::new(), rows: Vec::new() };
        for (e, rhs) in &self.inequalities {
            // s = rhs - e(y) ≥ 0
            let c = Mat::from_element(1, 1, rhs - e.constant);
            let terms: Vec<(usize, Mat)> = e.terms.iter().map(|(v, k)| (*v, Mat::from_element(1, 1, -k))).collect();
            let (c, a) = map_terms(&c, &terms);
            lp.c.push(c[(0, 0)]);
            lp.rows.push(merge_row(a.iter().map(|(v, m)| (*v, m[(0, 0)]))));
        }
        let mut obj = Vector::zeros(nz);
        for (v, c) in &self.objective.terms {
            match &basis {
                None => obj[*v] += c,
                Some(n) => {
                    for w in 0..nz {
                        obj[w] += c * n[(*v, w)];
                    }
                }
            }
        }

        let raw = StandardForm { b: obj, blocks, lp }.solve(opts)?;
        let y = match &basis {
            None => raw.y,
            Some(n) => &y0 + n * &raw.y,
        };
        let (min_block_eigenvalue, max_linear_violation) = self.residuals(&y, opts.eps_psd);
        Ok(SdpSolution {
            objective: self.objective.evaluate(&y),
            y,
            iterations: raw.iterations,
            min_block_eigenvalue,
            max_linear_violation,
        })
    }
}

fn merge_row(it: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, c) in it {
        *m.entry(v).or_insert(0.0) += c;
    }
    m.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

/// Particular solution and null-space basis of `A y = b`.
fn nullspace_parametrization(a: &Mat, b: &Vector) -> Result<(Vector, Mat)> {
    let p = a.ncols();
    let svd = a.clone().svd(true, true);
    let (Some(u), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return Err(Error::NumericalFailure(String::from("SVD failed")));
    };
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = 1e-10 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > cut).count();
    let mut y0 = Vector::zeros(p);
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        if s > cut {
            let coef = u.column(k).dot(b) / s;
            y0 += vt.row(k).transpose() * coef;
        }
    }
    if (a * &y0 - b).amax() > 1e-8 * (1.0 + b.amax()) {
        return Err(Error::Infeasible);
    }
    // Null space: remaining right singular vectors (full V needed).
    let full = if vt.nrows() < p {
        // pad with a complement via QR of [Vtᵀ | I]
        let mut aug = Mat::zeros(p, vt.nrows() + p);
        aug.view_mut((0, 0), (p, vt.nrows())).copy_from(&vt.transpose());
        aug.view_mut((0, vt.nrows()), (p, p)).copy_from(&eye(p));
        let q = aug.qr().q();
        q.columns(0, p).into_owned()
    } else {
        vt.transpose()
    };
    let ns = full.columns(rank, p - rank).into_owned();
    Ok((y0, ns))
}

struct Block {
    c: Mat,
    a: Vec<(usize, Mat)>,
}

struct LpBlock {
    c: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

struct StandardForm {
    b: Vector,
    blocks: Vec<Block>,
    lp: LpBlock,
}

struct RawSolution {
    y: Vector,
    iterations: usize,
}

struct Iterate {
    x: Vec<Mat>,
    s: Vec<Mat>,
    xl: Vec<f64>,
    sl: Vec<f64>,
    y: Vector,
}

struct Direction {
    dx: Vec<Mat>,
    ds: Vec<Mat>,
    dxl: Vec<f64>,
    dsl: Vec<f64>,
    dy: Vector,
}

impl StandardForm {
    fn dim(&self) -> f64 {
        (self.blocks.iter().map(|b| b.c.nrows()).sum::<usize>() + self.lp.c.len()) as f64
    }

    fn solve(&self, opts: &SdpOptions) -> Result<RawSolution> {
        let p = self.b.len();
        let nn = self.dim();
        if nn == 0.0 {
            if self.b.iter().any(|c| *c != 0.0) {
                return Err(Error::Unbounded);
            }
            return Ok(RawSolution { y: Vector::zeros(p), iterations: 0 });
        }

        let fro = |m: &Mat| m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut it = Iterate { x: Vec::new(), s: Vec::new(), xl: Vec::new(), sl: Vec::new(), y: Vector::zeros(p) };
        for blk in &self.blocks {
            let n = blk.c.nrows() as f64;
            let mut xi = 10.0f64.max(n.sqrt());
            let mut eta = 10.0f64.max(n.sqrt()).max(fro(&blk.c));
            for (l, a) in &blk.a {
                let na = fro(a);
                xi = xi.max(n * (1.0 + self.b[*l].abs()) / (1.0 + na));
                eta = eta.max(na);
            }
            it.x.push(eye(blk.c.nrows()) * xi);
            it.s.push(eye(blk.c.nrows()) * eta);
        }
        for (r, row) in self.lp.rows.iter().enumerate() {
            let mut xi = 10.0f64;
            let mut eta = 10.0f64.max(self.lp.c[r].abs());
            for (l, a) in row {
                xi = xi.max((1.0 + self.b[*l].abs()) / (1.0 + a.abs()));
                eta = eta.max(a.abs());
            }
            it.xl.push(xi);
            it.sl.push(eta);
        }

        let bnorm = self.b.norm();
        let cnorm = (self.blocks.iter().map(|b| fro(&b.c).powi(2)).sum::<f64>()
            + self.lp.c.iter().map(|c| c * c).sum::<f64>())
        .sqrt();

        for iter in 0..opts.max_iter {
            // Residuals.
            let mut rp = self.b.clone();
            for (k, blk) in self.blocks.iter().enumerate() {
                for (l, a) in &blk.a {
                    rp[*l] -= a.dot(&it.x[k]);
                }
            }
            for (r, row) in self.lp.rows.iter().enumerate() {
                for (l, a) in row {
                    rp[*l] -= a * it.xl[r];
                }
            }
            let mut rd: Vec<Mat> = Vec::with_capacity(self.blocks.len());
            for (k, blk) in self.blocks.iter().enumerate() {
                let mut m = &blk.c - &it.s[k];
                for (l, a) in &blk.a {
                    m += a * it.y[*l];
                }
                rd.push(m);
            }
            let rdl: Vec<f64> = self
                .lp
                .rows
                .iter()
                .enumerate()
                .map(|(r, row)| self.lp.c[r] + row.iter().map(|(l, a)| a * it.y[*l]).sum::<f64>() - it.sl[r])
                .collect();

            let gap: f64 = it.x.iter().zip(&it.s).map(|(x, s)| x.dot(s)).sum::<f64>()
                + it.xl.iter().zip(&it.sl).map(|(x, s)| x * s).sum::<f64>();
            let mu = gap / nn;
            let pobj = -(self.blocks.iter().zip(&it.x).map(|(b, x)| b.c.dot(x)).sum::<f64>()
                + self.lp.c.iter().zip(&it.xl).map(|(c, x)| c * x).sum::<f64>());
            let dobj = self.b.dot(&it.y);
            let pinf = rp.norm() / (1.0 + bnorm);
            let dinf = (rd.iter().map(|m| fro(m).powi(2)).sum::<f64>() + rdl.iter().map(|v| v * v).sum::<f64>()).sqrt()
                / (1.0 + cnorm);
            let relgap = gap.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
            if pinf < opts.tol && dinf < opts.tol && relgap < opts.tol {
                return Ok(RawSolution { y: it.y.clone(), iterations: iter });
            }

            // Infeasibility heuristics: diverging primal with positive
            // objective certifies an empty LMI set; diverging y with falling
            // objective certifies unboundedness.
            let xnorm: f64 =
                it.x.iter().map(|x| x.trace()).sum::<f64>() + it.xl.iter().sum::<f64>();
            if iter > 5 && xnorm > 1e8 && pobj / xnorm > 1e-8 {
                let ax = (&self.b - &rp).norm();
                if ax / xnorm < 1e-7 {
                    return Err(Error::Infeasible);
                }
            }
            let ynorm = it.y.norm();
            if iter > 5 && ynorm > 1e10 && dobj / ynorm < -1e-8 && dinf < 1e-6 {
                return Err(Error::Unbounded);
            }

            // Schur complement.
            let mut sinv = Vec::with_capacity(self.blocks.len());
            for s in &it.s {
                let inv = s
                    .clone()
                    .cholesky()
                    .map(|c| c.inverse())
                    .ok_or_else(|| Error::NumericalFailure(String::from("dual slack lost definiteness")))?;
                sinv.push(symmetrize(&inv));
            }
            let mut h = Mat::zeros(p, p);
            for (k, blk) in self.blocks.iter().enumerate() {
                let g: Vec<Mat> = blk.a.iter().map(|(_, a)| &it.x[k] * a * &sinv[k]).collect();
                for (gi, (l, _)) in g.iter().zip(&blk.a) {
                    for (m, am) in &blk.a {
                        if m < l {
                            continue;
                        }
                        let v = gi.dot(am);
                        h[(*l, *m)] += v;
                        if m != l {
                            h[(*m, *l)] += v;
                        }
                    }
                }
            }
            for (r, row) in self.lp.rows.iter().enumerate() {
                let w = it.xl[r] / it.sl[r];
                for (l, a) in row {
                    for (m, b) in row {
                        h[(*l, *m)] += w * a * b;
                    }
                }
            }
            let hmax = (0..p).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1.0);
            for i in 0..p {
                h[(i, i)] += 1e-14 * hmax;
            }
            let chol = h.clone().cholesky();
            let lu = if chol.is_none() { Some(h.clone().lu()) } else { None };
            let solve_h = |rhs: &Vector| -> Option<Vector> {
                match (&chol, &lu) {
                    (Some(c), _) => Some(c.solve(rhs)),
                    (None, Some(l)) => l.solve(rhs),
                    _ => None,
                }
            };

            let direction = |targets: &[Mat], targets_l: &[f64]| -> Option<Direction> {
                let mut rhs = -&rp;
                for (k, blk) in self.blocks.iter().enumerate() {
                    let t = &targets[k] - &it.x[k] * &rd[k] * &sinv[k];
                    for (l, a) in &blk.a {
                        rhs[*l] += a.dot(&t);
                    }
                }
                for (r, row) in self.lp.rows.iter().enumerate() {
                    let t = targets_l[r] - it.xl[r] * rdl[r] / it.sl[r];
                    for (l, a) in row {
                        rhs[*l] += a * t;
                    }
                }
                let dy = solve_h(&rhs)?;
                let mut ds = Vec::with_capacity(self.blocks.len());
                let mut dx = Vec::with_capacity(self.blocks.len());
                for (k, blk) in self.blocks.iter().enumerate() {
                    let mut d = rd[k].clone();
                    for (l, a) in &blk.a {
                        d += a * dy[*l];
                    }
                    let x = &targets[k] - &it.x[k] * &d * &sinv[k];
                    dx.push(symmetrize(&x));
                    ds.push(d);
                }
                let mut dsl = Vec::with_capacity(self.lp.rows.len());
                let mut dxl = Vec::with_capacity(self.lp.rows.len());
                for (r, row) in self.lp.rows.iter().enumerate() {
                    let d = rdl[r] + row.iter().map(|(l, a)| a * dy[*l]).sum::<f64>();
                    dxl.push(targets_l[r] - it.xl[r] * d / it.sl[r]);
                    dsl.push(d);
                }
                Some(Direction { dx, ds, dxl, dsl, dy })
            };
            let steps = |d: &Direction| -> (f64, f64) {
                let mut ap = f64::INFINITY;
                let mut ad = f64::INFINITY;
                for k in 0..self.blocks.len() {
                    ap = ap.min(max_psd_step(&it.x[k], &d.dx[k]));
                    ad = ad.min(max_psd_step(&it.s[k], &d.ds[k]));
                }
                for r in 0..self.lp.rows.len() {
                    if d.dxl[r] < 0.0 {
                        ap = ap.min(-it.xl[r] / d.dxl[r]);
                    }
                    if d.dsl[r] < 0.0 {
                        ad = ad.min(-it.sl[r] / d.dsl[r]);
                    }
                }
                (ap, ad)
            };

            // Predictor.
            let t_aff: Vec<Mat> = it.x.iter().map(|x| -x).collect();
            let t_aff_l: Vec<f64> = it.xl.iter().map(|x| -x).collect();
            let Some(aff) = direction(&t_aff, &t_aff_l) else {
                return Err(Error::NumericalFailure(String::from("singular Schur complement")));
            };
            let (ap, ad) = steps(&aff);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mut gap_aff = 0.0;
            for k in 0..self.blocks.len() {
                let xa = &it.x[k] + &aff.dx[k] * ap;
                let sa = &it.s[k] + &aff.ds[k] * ad;
                gap_aff += xa.dot(&sa);
            }
            for r in 0..self.lp.rows.len() {
                gap_aff += (it.xl[r] + ap * aff.dxl[r]) * (it.sl[r] + ad * aff.dsl[r]);
            }
            let sigma = (gap_aff / gap).max(0.0).min(1.0).powi(3);

            // Corrector.
            let t_cor: Vec<Mat> = (0..self.blocks.len())
                .map(|k| &sinv[k] * (sigma * mu) - &it.x[k] - &aff.dx[k] * &aff.ds[k] * &sinv[k])
                .collect();
            let t_cor_l: Vec<f64> = (0..self.lp.rows.len())
                .map(|r| (sigma * mu - aff.dxl[r] * aff.dsl[r]) / it.sl[r] - it.xl[r])
                .collect();
            let Some(dir) = direction(&t_cor, &t_cor_l) else {
                return Err(Error::NumericalFailure(String::from("singular Schur complement")));
            };
            let (ap, ad) = steps(&dir);
            let gamma = 0.95;
            let ap = (gamma * ap).min(1.0);
            let ad = (gamma * ad).min(1.0);
            for k in 0..self.blocks.len() {
                it.x[k] += &dir.dx[k] * ap;
                it.s[k] += &dir.ds[k] * ad;
                it.x[k] = symmetrize(&it.x[k]);
                it.s[k] = symmetrize(&it.s[k]);
            }
            for r in 0..self.lp.rows.len() {
                it.xl[r] += ap * dir.dxl[r];
                it.sl[r] += ad * dir.dsl[r];
            }
            it.y += &dir.dy * ad;
            if !it.y.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalFailure(String::from("iterate diverged")));
            }
        }
        Err(Error::NumericalFailure(format!("interior-point method did not converge in {} iterations", opts.max_iter)))
    }
}
