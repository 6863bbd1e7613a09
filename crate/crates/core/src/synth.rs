//! Gain and certificate synthesis by cone-complementarity linearization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::certify::{
    homogeneous_rows, state_constants, input_constants, verify_certificate, zoom_rate, LyapunovFunction,
    PwqCertificate, QuantizationMode, StabilityConstants, TuningParams,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{eye, min_eigenvalue, symmetrize, Mat, Vector};
use crate::model::{AffineController, InputPolytope, PwaSystem, UniformQuantizer};
use crate::optim::lp::LpOptions;
use crate::optim::sdp::{AffineMatrix, LinExpr, MatVar, SdpOptions, SdpProblem, SymVar};
use crate::polytope::HPolytope;
use crate::reach::{
    confinement_constraints, input_constraints, successor_map, successors_controller_free, Channel,
    ConfinementConstraint, Method, SuccessorMap,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Asymptotic,
    Iss { nu1: f64, nu2: f64 },
}

impl Variant {
    pub fn iss_default() -> Self {
        Variant::Iss { nu1: 2.0, nu2: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfinementTarget {
    pub cell: usize,
    pub target: HPolytope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub max_iter: usize,
    /// Tolerance on `Σ 2·tr(P_iQ_i) − 2ns`.
    pub ccl_tol: f64,
    /// Slack subtracted from every confinement right-hand side.
    pub margin: f64,
    pub max_rounds: usize,
    pub lp: LpOptions,
    pub sdp: SdpOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            max_iter: 50,
            ccl_tol: 1e-4,
            margin: 1e-4,
            max_rounds: 5,
            lp: LpOptions::default(),
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisProblem {
    pub system: PwaSystem,
    pub input: Option<InputPolytope>,
    pub delta: f64,
    pub channel: Channel,
    pub variant: Variant,
    pub confinements: Vec<ConfinementTarget>,
    pub map: SuccessorMap,
    /// Cells asking for an affine Lyapunov piece; not synthesizable here.
    pub affine_cells: Vec<usize>,
}

impl SynthesisProblem {
    pub fn new(system: PwaSystem, delta: f64, channel: Channel, variant: Variant) -> Self {
        let map = SuccessorMap::full(system.num_cells());
        SynthesisProblem { system, input: None, delta, channel, variant, confinements: Vec::new(), map, affine_cells: Vec::new() }
    }

    pub fn confine(mut self, cell: usize, target: HPolytope) -> Self {
        self.confinements.push(ConfinementTarget { cell, target });
        self
    }

    pub fn with_input(mut self, input: InputPolytope) -> Self {
        self.input = Some(input);
        self
    }
}

/// The assembled SDP together with the handles of its matrix variables.
#[derive(Debug, Clone)]
pub struct LmiSystem {
    pub sdp: SdpProblem,
    pub p: Vec<SymVar>,
    pub q: Vec<SymVar>,
    pub k: Vec<MatVar>,
    pub multipliers: Vec<((usize, usize), Option<SymVar>)>,
    pub decrease_blocks: usize,
    pub coupling_blocks: usize,
    pub positivity_blocks: usize,
    pub linear_rows: usize,
    pub confinements: Vec<ConfinementConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub controller: AffineController,
    pub p: Vec<Mat>,
    /// Exact inverses of `p`.
    pub q: Vec<Mat>,
    pub multipliers: Vec<((usize, usize), Mat)>,
    /// `Σ tr(P_iQ_i)` at the last solver iterate, before substitution.
    pub trace: f64,
    /// `Σ 2·tr(P_iQ_i) − 2ns` after substituting `Q_i = P_i⁻¹`.
    pub residual: f64,
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub certificate: PwqCertificate,
    pub map: SuccessorMap,
    pub rounds: usize,
}

fn check_problem(prob: &SynthesisProblem) -> Result<()> {
    let sys = &prob.system;
    if let Some(&i) = prob.affine_cells.first() {
        return Err(Error::Unsupported(format!(
            "cell {i} asks for an affine Lyapunov piece; synthesis covers quadratic pieces with g_i = 0 only"
        )));
    }
    if prob.map.sets.len() != sys.num_cells() {
        return Err(Error::DimensionMismatch { context: "successor map", expected: sys.num_cells(), found: prob.map.sets.len() });
    }
    match prob.variant {
        Variant::Asymptotic => {
            for (i, c) in sys.cells().iter().enumerate() {
                if c.f.amax() > 0.0 || c.d.amax() > 0.0 {
                    return Err(Error::Unsupported(format!("cell {i} has f_i or D_i nonzero; use the ISS variant")));
                }
            }
        }
        Variant::Iss { nu1, nu2 } => {
            if !(nu1 > 0.0 && nu2 > 0.0 && nu1 * nu2 > 1.0) {
                return Err(Error::InvalidArgument(format!("need ν₁, ν₂ > 0 with ν₁ν₂ > 1, got {nu1}, {nu2}")));
            }
        }
    }
    for t in &prob.confinements {
        if t.cell >= sys.num_cells() {
            return Err(Error::InvalidArgument(format!("confinement names cell {} of {}", t.cell, sys.num_cells())));
        }
        check_dim("confinement target", sys.state_dim(), t.target.dim())?;
    }
    Ok(())
}

fn closed_loop_expr(sys: &PwaSystem, k: &MatVar, i: usize) -> AffineMatrix {
    let c = sys.cell(i);
    AffineMatrix::constant(c.a.clone()).add(&k.expr().left_mul(&c.b))
}

/// Every LMI and linear row for the current successor map. Confinement rows
/// are taken from `prob.confinements` plus `x⁺ ∈ X` when `X` is bounded.
pub fn build_lmis(prob: &SynthesisProblem, opts: &SynthesisOptions) -> Result<LmiSystem> {
    check_problem(prob)?;
    let sys = &prob.system;
    let (n, m, s) = (sys.state_dim(), sys.input_dim(), sys.num_cells());
    let mut sdp = SdpProblem::new();
    let p: Vec<SymVar> = (0..s).map(|_| sdp.add_symmetric(n)).collect();
    let q: Vec<SymVar> = (0..s).map(|_| sdp.add_symmetric(n)).collect();
    let k: Vec<MatVar> = (0..s).map(|_| sdp.add_matrix(m, n)).collect();
    let id = AffineMatrix::identity(n);
    let zero = AffineMatrix::zeros(n, n);
    let mut multipliers = Vec::new();
    let mut decrease_blocks = 0;
    for (i, j) in prob.map.pairs() {
        let e = homogeneous_rows(sys, i);
        let mv = (e.nrows() > 0).then(|| sdp.add_nonneg_symmetric(e.nrows()));
        let mut lead = p[i].expr();
        if let Some(mv) = &mv {
            lead = lead.sub(&mv.expr().left_mul(&e.transpose()).right_mul(&e));
        }
        let abar = closed_loop_expr(sys, &k[i], i);
        let abt = abar.transpose();
        let qj = q[j].expr();
        let block = match prob.variant {
            Variant::Asymptotic => AffineMatrix::block(&[vec![lead, abt], vec![abar, qj]])?,
            Variant::Iss { nu1, nu2 } => {
                let neg = abt.scale(-1.0);
                AffineMatrix::block(&[
                    vec![lead, neg.clone(), neg, abt],
                    vec![abar.scale(-1.0), qj.scale(nu1), qj.scale(-1.0), zero.clone()],
                    vec![abar.scale(-1.0), qj.scale(-1.0), qj.scale(nu2), zero.clone()],
                    vec![abar, zero.clone(), zero.clone(), qj],
                ])?
            }
        };
        sdp.add_lmi(block, true)?;
        decrease_blocks += 1;
        multipliers.push(((i, j), mv));
    }
    let mut coupling_blocks = 0;
    for i in 0..s {
        sdp.add_lmi(AffineMatrix::block(&[vec![p[i].expr(), id.clone()], vec![id.clone(), q[i].expr()]])?, false)?;
        coupling_blocks += 1;
    }
    // cells outside the map still need definite pieces
    let mut positivity_blocks = 0;
    for i in 0..s {
        if prob.map.successors(i).is_empty() {
            sdp.add_lmi(p[i].expr(), true)?;
            positivity_blocks += 1;
        }
        if !prob.map.pairs().any(|(_, j)| j == i) {
            sdp.add_lmi(q[i].expr(), true)?;
            positivity_blocks += 1;
        }
    }
    let mut confinements = Vec::new();
    for t in &prob.confinements {
        confinements.push(confinement_constraints(sys, t.cell, &t.target, prob.delta, prob.channel, &opts.lp)?);
    }
    if sys.total_space().bounding_box(&opts.lp).is_ok() {
        for i in 0..s {
            confinements.push(confinement_constraints(sys, i, sys.total_space(), prob.delta, prob.channel, &opts.lp)?);
        }
    }
    if let Some(u) = &prob.input {
        for i in 0..s {
            confinements.push(input_constraints(sys, i, u, prob.delta, prob.channel, &opts.lp)?);
        }
    }
    let mut linear_rows = 0;
    for c in &confinements {
        for row in &c.rows {
            let mut e = LinExpr::default();
            for r in 0..m {
                for col in 0..n {
                    let v = row.k_coeff[(r, col)];
                    if v != 0.0 {
                        e.add_term(k[c.source].index(r, col), v);
                    }
                }
            }
            // g_i = 0 throughout synthesis
            if e.terms.is_empty() {
                if row.rhs < 0.0 {
                    return Err(Error::Infeasible);
                }
                continue;
            }
            sdp.add_le(e, row.rhs - opts.margin);
            linear_rows += 1;
        }
    }
    Ok(LmiSystem { sdp, p, q, k, multipliers, decrease_blocks, coupling_blocks, positivity_blocks, linear_rows, confinements })
}

fn sym_inverse(p: &Mat) -> Result<Mat> {
    let c = symmetrize(p).cholesky().ok_or_else(|| Error::NumericalFailure("P is not positive definite".into()))?;
    Ok(symmetrize(&c.inverse()))
}

/// Decrease check with `Q_j = P_j⁻¹` substituted, in pre-Schur form.
fn decrease_holds(prob: &SynthesisProblem, lmi: &LmiSystem, y: &Vector, ps: &[Mat]) -> bool {
    let sys = &prob.system;
    let n = sys.state_dim();
    if ps.iter().any(|p| min_eigenvalue(&symmetrize(p)) <= 0.0) {
        return false;
    }
    for ((i, j), mv) in &lmi.multipliers {
        let (i, j) = (*i, *j);
        let c = sys.cell(i);
        let abar = &c.a + &c.b * lmi.k[i].value(y);
        let mut g = &ps[i] - abar.transpose() * &ps[j] * &abar;
        if let Some(mv) = mv {
            let e = homogeneous_rows(sys, i);
            g -= e.transpose() * mv.value(y).map(|x| x.max(0.0)) * &e;
        }
        let h = match prob.variant {
            Variant::Asymptotic => g,
            Variant::Iss { nu1, nu2 } => {
                let cross = -(abar.transpose() * &ps[j]);
                let mut h = Mat::zeros(3 * n, 3 * n);
                h.view_mut((0, 0), (n, n)).copy_from(&g);
                h.view_mut((0, n), (n, n)).copy_from(&cross);
                h.view_mut((0, 2 * n), (n, n)).copy_from(&cross);
                h.view_mut((n, n), (n, n)).copy_from(&(&ps[j] * nu1));
                h.view_mut((n, 2 * n), (n, n)).copy_from(&(-&ps[j]));
                h.view_mut((2 * n, 2 * n), (n, n)).copy_from(&(&ps[j] * nu2));
                symmetrize(&h)
            }
        };
        let scale = 1.0 + ps[i].amax() + ps[j].amax();
        if min_eigenvalue(&symmetrize(&h)) <= 1e-10 * scale {
            return false;
        }
    }
    true
}

/// Cone-complementarity iteration from `P = Q = I` on a fixed successor map.
pub fn ccl_solve(prob: &SynthesisProblem, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    let mut lmi = build_lmis(prob, opts)?;
    let sys = &prob.system;
    let (n, s) = (sys.state_dim(), sys.num_cells());
    let target = 2.0 * (n * s) as f64;
    let mut p_lin = vec![eye(n); s];
    let mut q_lin = vec![eye(n); s];
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    let mut trace = f64::NAN;
    for it in 1..=opts.max_iter {
        let mut obj = LinExpr::default();
        for i in 0..s {
            let a = LinExpr::trace_product(&q_lin[i], &lmi.p[i]);
            let b = LinExpr::trace_product(&p_lin[i], &lmi.q[i]);
            obj.terms.extend(a.terms);
            obj.terms.extend(b.terms);
        }
        lmi.sdp.minimize(obj);
        let sol = lmi.sdp.solve(&opts.sdp)?;
        let ps: Vec<Mat> = lmi.p.iter().map(|v| symmetrize(&v.value(&sol.y))).collect();
        let qs: Vec<Mat> = lmi.q.iter().map(|v| symmetrize(&v.value(&sol.y))).collect();
        trace = (0..s).map(|i| (&ps[i] * &qs[i]).trace()).sum();
        history.push(sol.objective);
        let converged = 2.0 * trace <= target + opts.ccl_tol;
        if decrease_holds(prob, &lmi, &sol.y, &ps) {
            return finish(prob, &lmi, &sol.y, ps, trace, it, history, opts);
        }
        if converged {
            return Err(Error::VerificationFailed(format!(
                "trace reached {:.6e} but the substituted decrease blocks are not definite",
                2.0 * trace
            )));
        }
        if sol.objective < best - 1e-8 {
            best = sol.objective;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                return Err(Error::CclStalled { iterations: it, trace: 2.0 * trace });
            }
        }
        p_lin = ps;
        q_lin = qs;
    }
    Err(Error::CclStalled { iterations: opts.max_iter, trace: 2.0 * trace })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &SynthesisProblem,
    lmi: &LmiSystem,
    y: &Vector,
    ps: Vec<Mat>,
    trace: f64,
    iterations: usize,
    history: Vec<f64>,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let sys = &prob.system;
    let (n, m, s) = (sys.state_dim(), sys.input_dim(), sys.num_cells());
    let qs = ps.iter().map(sym_inverse).collect::<Result<Vec<_>>>()?;
    let mut y = y.clone();
    for i in 0..s {
        for a in 0..n {
            for b in a..n {
                y[lmi.q[i].index(a, b)] = qs[i][(a, b)];
            }
        }
    }
    for ((_, _), mv) in &lmi.multipliers {
        if let Some(mv) = mv {
            for a in 0..mv.n {
                for b in a..mv.n {
                    let idx = mv.index(a, b);
                    y[idx] = y[idx].max(0.0);
                }
            }
        }
    }
    let (min_eig, viol) = lmi.sdp.residuals(&y, 0.0);
    if min_eig < -1e-7 {
        return Err(Error::VerificationFailed(format!("substituted LMI block has eigenvalue {min_eig:.3e}")));
    }
    let k: Vec<Mat> = lmi.k.iter().map(|v| v.value(&y)).collect();
    let g = vec![Vector::zeros(m); s];
    for c in &lmi.confinements {
        if !c.satisfied(&k[c.source], &g[c.source], opts.lp.tol.max(viol.max(0.0))) {
            return Err(Error::VerificationFailed(format!("confinement of cell {} violated", c.source + 1)));
        }
    }
    let residual = (0..s).map(|i| 2.0 * (&ps[i] * &qs[i]).trace()).sum::<f64>() - 2.0 * (n * s) as f64;
    let controller = AffineController::new(k, g)?;
    let certificate = verify_certificate(sys, &controller, &LyapunovFunction::quadratic(ps.clone()), &prob.map, &opts.sdp)
        .map_err(|e| Error::VerificationFailed(format!("{e}")))?;
    let multipliers = lmi
        .multipliers
        .iter()
        .map(|(pair, mv)| (*pair, mv.map(|v| v.value(&y)).unwrap_or_else(|| Mat::zeros(0, 0))))
        .collect();
    Ok(SynthesisResult {
        controller,
        p: ps,
        q: qs,
        multipliers,
        trace,
        residual,
        iterations,
        objective_history: history,
        certificate,
        map: prob.map.clone(),
        rounds: 1,
    })
}

/// Seed map: controller-free successors, narrowed to cells meeting the
/// declared targets.
pub fn initial_map(prob: &SynthesisProblem, opts: &SynthesisOptions) -> Result<SuccessorMap> {
    let sys = &prob.system;
    let input = prob.input.clone().unwrap_or_else(|| InputPolytope::unconstrained(sys.input_dim()));
    let mut sets = Vec::with_capacity(sys.num_cells());
    for i in 0..sys.num_cells() {
        let t = successors_controller_free(sys, &input, i, prob.delta, &opts.lp)?;
        let mut keep = Vec::new();
        for j in t.successors {
            let cell = &sys.cell(j).region;
            let mut ok = true;
            for c in prob.confinements.iter().filter(|c| c.cell == i) {
                let r = cell.intersect(&c.target)?.interior_radius(&opts.lp).unwrap_or(0.0);
                if !(r > opts.lp.tol) {
                    ok = false;
                    break;
                }
            }
            if ok {
                keep.push(j);
            }
        }
        sets.push(keep);
    }
    Ok(SuccessorMap { sets })
}

/// Outer loop: solve on the assumed map, recompute the disturbance-aware
/// successors with the new gains, enlarge the map on violation.
pub fn synthesize(prob: &SynthesisProblem, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    check_problem(prob)?;
    let mut work = prob.clone();
    work.map = initial_map(prob, opts)?;
    for round in 1..=opts.max_rounds {
        let mut res = ccl_solve(&work, opts)?;
        res.rounds = round;
        let actual = successor_map(&work.system, &res.controller, work.delta, work.channel, Method::SbarExact, None, &opts.lp)?;
        if actual.is_subset_of(&work.map) {
            return Ok(res);
        }
        work.map.absorb(&actual);
    }
    Err(Error::FixpointDiverged { rounds: opts.max_rounds })
}

/// Quadratic certificate for fixed gains with `I ⪯ P_i ⪯ κI`, maximizing
/// the common decrease rate.
pub fn lyapunov_search(
    sys: &PwaSystem,
    ctrl: &AffineController,
    map: &SuccessorMap,
    kappa: f64,
    opts: &SdpOptions,
) -> Result<LyapunovFunction> {
    let (n, s) = (sys.state_dim(), sys.num_cells());
    let mut sdp = SdpProblem::new();
    let p: Vec<SymVar> = (0..s).map(|_| sdp.add_symmetric(n)).collect();
    let gam = sdp.add_scalar();
    let id = AffineMatrix::identity(n);
    for pv in &p {
        sdp.add_lmi(pv.expr().sub(&id), false)?;
        sdp.add_lmi(id.scale(kappa).sub(&pv.expr()), false)?;
    }
    for (i, j) in map.pairs() {
        let (abar, _) = ctrl.closed_loop(sys, i);
        let e = homogeneous_rows(sys, i);
        let mut g = p[i].expr().sub(&p[j].expr().left_mul(&abar.transpose()).right_mul(&abar));
        if e.nrows() > 0 {
            let mv = sdp.add_nonneg_symmetric(e.nrows());
            g = g.sub(&mv.expr().left_mul(&e.transpose()).right_mul(&e));
        }
        g = g.sub(&AffineMatrix { constant: Mat::zeros(n, n), terms: vec![(gam, eye(n))] });
        sdp.add_lmi(g, false)?;
    }
    sdp.add_le(LinExpr::var(gam), kappa);
    sdp.minimize(LinExpr { terms: vec![(gam, -1.0)], constant: 0.0 });
    let sol = sdp.solve(opts)?;
    if !(sol.y[gam] > 0.0) {
        return Err(Error::Infeasible);
    }
    Ok(LyapunovFunction::quadratic(p.iter().map(|v| symmetrize(&v.value(&sol.y))).collect()))
}

pub const KAPPA_GRID: [f64; 7] = [1.5, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateSearch {
    pub certificate: PwqCertificate,
    pub constants: StabilityConstants,
    pub kappa: f64,
    pub omega: Option<f64>,
}

/// Scans the conditioning bound and keeps the certificate with the
/// smallest zoom rate (or the largest gap slack when none passes).
pub fn find_certificate(
    sys: &PwaSystem,
    ctrl: &AffineController,
    map: &SuccessorMap,
    q: &UniformQuantizer,
    mode: QuantizationMode,
    params: TuningParams,
    opts: &SdpOptions,
) -> Result<CertificateSearch> {
    let mut best: Option<(f64, CertificateSearch)> = None;
    let mut last_err = Error::Infeasible;
    for &kappa in KAPPA_GRID.iter() {
        let v = match lyapunov_search(sys, ctrl, map, kappa, opts) {
            Ok(v) => v,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let cert = match verify_certificate(sys, ctrl, &v, map, opts) {
            Ok(c) => c,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let consts = match mode {
            QuantizationMode::Input => input_constants(&cert, sys, ctrl, q, params)?,
            QuantizationMode::State => state_constants(&cert, sys, ctrl, q, params)?,
        };
        let omega = zoom_rate(&consts).ok();
        // rank by Ω when defined, then by the normalized gap
        let r = consts.radius;
        let inner = consts.inner_radius();
        let score = omega.unwrap_or_else(|| 1e6 + consts.beta * inner * inner / (consts.alpha * r * r));
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, CertificateSearch { certificate: cert, constants: consts, kappa, omega }));
        }
    }
    best.map(|(_, c)| c).ok_or(last_err)
}

/// Short description of a result for logs.
pub fn summary(res: &SynthesisResult) -> String {
    format!("rounds {} iterations {} trace {:.6} residual {:.2e}", res.rounds, res.iterations, res.trace, res.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::check_conditions;
    use crate::model::fixtures::{printed_gains, six_mode};
    use crate::model::Cell;
    use nalgebra::dmatrix;

    fn one_cell(a: Mat, b: Mat) -> PwaSystem {
        let n = a.nrows();
        let m = b.ncols();
        let sq = HPolytope::hypercube(n, 1.0);
        let cell = Cell { region: sq.clone(), a, b, f: Vector::zeros(n), d: Mat::zeros(n, 0) };
        PwaSystem::new(n, m, 0, sq, vec![cell]).unwrap()
    }

    fn spectral_radius(a: &Mat) -> f64 {
        a.clone().complex_eigenvalues().iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max)
    }

    #[test]
    fn one_cell_structure() {
        let sys = one_cell(eye(2) * 0.5, Mat::zeros(2, 1));
        let prob = SynthesisProblem::new(sys, 0.0, Channel::Physical, Variant::Asymptotic);
        let l = build_lmis(&prob, &SynthesisOptions::default()).unwrap();
        assert_eq!((l.decrease_blocks, l.coupling_blocks, l.positivity_blocks), (1, 1, 0));
        assert!(l.multipliers.iter().all(|(_, m)| m.is_none()));
        assert_eq!(l.sdp.lmis()[0].expr.nrows(), 4);
    }

    #[test]
    fn two_cells_full_map_counts() {
        let left = HPolytope::new(dmatrix![1.0; -1.0], nalgebra::dvector![0.0, 1.0]).unwrap();
        let right = HPolytope::new(dmatrix![-1.0; 1.0], nalgebra::dvector![0.0, 1.0]).unwrap();
        let mk = |r: HPolytope| Cell { region: r, a: dmatrix![0.5], b: dmatrix![1.0], f: Vector::zeros(1), d: Mat::zeros(1, 0) };
        let sys = PwaSystem::new(1, 1, 0, HPolytope::hypercube(1, 1.0), vec![mk(left), mk(right)]).unwrap();
        let prob = SynthesisProblem::new(sys, 0.0, Channel::Physical, Variant::Asymptotic);
        let l = build_lmis(&prob, &SynthesisOptions::default()).unwrap();
        assert_eq!((l.decrease_blocks, l.coupling_blocks), (4, 2));
        let iss = SynthesisProblem { variant: Variant::iss_default(), ..prob };
        let l = build_lmis(&iss, &SynthesisOptions::default()).unwrap();
        assert_eq!(l.sdp.lmis()[0].expr.nrows(), 4);
    }

    #[test]
    fn stable_single_cell_is_feasible() {
        let sys = one_cell(eye(2) * 0.5, eye(2));
        let prob = SynthesisProblem::new(sys.clone(), 0.0, Channel::Physical, Variant::Asymptotic);
        let res = ccl_solve(&prob, &SynthesisOptions::default()).unwrap();
        assert!(res.iterations <= 10);
        let (abar, _) = res.controller.closed_loop(&sys, 0);
        assert!(spectral_radius(&abar) < 1.0);
        assert!(res.residual.abs() <= 1e-6);
        for w in res.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
    }

    #[test]
    fn unstabilizable_scalar_fails() {
        let sys = one_cell(dmatrix![2.0], dmatrix![0.0]);
        let prob = SynthesisProblem::new(sys, 0.0, Channel::Physical, Variant::Asymptotic);
        match ccl_solve(&prob, &SynthesisOptions::default()) {
            Err(Error::CclStalled { .. }) | Err(Error::Infeasible) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_nu_and_affine_cells_rejected() {
        let sys = one_cell(eye(1) * 0.5, eye(1));
        let prob = SynthesisProblem::new(sys, 0.0, Channel::Physical, Variant::Iss { nu1: 0.5, nu2: 1.0 });
        assert!(matches!(build_lmis(&prob, &SynthesisOptions::default()), Err(Error::InvalidArgument(_))));
        let mut prob = SynthesisProblem { variant: Variant::Asymptotic, ..prob };
        prob.affine_cells.push(0);
        assert!(matches!(build_lmis(&prob, &SynthesisOptions::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn iss_variant_on_a_stable_system() {
        let sys = one_cell(eye(2) * 0.3, eye(2));
        let prob = SynthesisProblem::new(sys.clone(), 0.0, Channel::Physical, Variant::iss_default());
        let res = ccl_solve(&prob, &SynthesisOptions::default()).unwrap();
        let (abar, _) = res.controller.closed_loop(&sys, 0);
        assert!(spectral_radius(&abar) < 1.0);
    }

    #[test]
    fn printed_gains_admit_a_certificate() {
        let sys = six_mode();
        let ctrl = printed_gains();
        let map = successor_map(&sys, &ctrl, 0.01, Channel::State, Method::SbarExact, None, &LpOptions::default()).unwrap();
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        let found = find_certificate(&sys, &ctrl, &map, &q, QuantizationMode::State, TuningParams::default(), &SdpOptions::default())
            .unwrap();
        std::println!("kappa {} omega {:?} alpha {} beta {}", found.kappa, found.omega, found.certificate.alpha, found.certificate.beta);
        assert!(found.omega.unwrap() < 1.0);
        assert!(check_conditions(&found.constants, &sys, &ctrl).gap_ok);
    }

    #[test]
    fn six_mode_synthesis() {
        let sys = six_mode();
        let x2 = sys.cell(1).region.clone();
        let x4 = sys.cell(3).region.clone();
        let prob = SynthesisProblem::new(sys.clone(), 0.01, Channel::State, Variant::Asymptotic).confine(0, x2).confine(2, x4);
        let res = synthesize(&prob, &SynthesisOptions::default()).unwrap();
        let lp = LpOptions::default();
        let c = &res.controller;
        assert!(crate::reach::confinement_check(&sys, c, 0, &sys.cell(1).region, 0.01, Channel::State, &lp).unwrap());
        assert!(crate::reach::confinement_check(&sys, c, 2, &sys.cell(3).region, 0.01, Channel::State, &lp).unwrap());
        for i in 0..6 {
            assert!(crate::reach::confinement_check(&sys, c, i, sys.total_space(), 0.01, Channel::State, &lp).unwrap());
        }
        let actual = successor_map(&sys, c, 0.01, Channel::State, Method::SbarExact, None, &lp).unwrap();
        assert!(actual.is_subset_of(&res.map));
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        let consts = state_constants(&res.certificate, &sys, c, &q, TuningParams::default()).unwrap();
        assert!(zoom_rate(&consts).unwrap() < 1.0);
    }
}
