//! One-step successor-mode over-approximations and vertex confinement LPs.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{AffineController, InputPolytope, PwaSystem};
use crate::optim::lp::{solve_lp, Bound, LinearProgram, LpOptions, LpStatus};
use crate::polytope::{HPolytope, VertexList};

/// Which matrix carries the bounded disturbance `d`, `|d|∞ ≤ Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// `D_i d`
    Physical,
    /// `B_i e` for input quantization error `e`
    Input,
    /// `B_iK_i e` for state quantization error `e`
    State,
}

impl Channel {
    pub fn matrix(&self, sys: &PwaSystem, ctrl: Option<&AffineController>, i: usize) -> Result<Mat> {
        let c = sys.cell(i);
        Ok(match self {
            Channel::Physical => c.d.clone(),
            Channel::Input => c.b.clone(),
            Channel::State => {
                let k = ctrl.ok_or_else(|| Error::InvalidArgument("state channel needs a controller".into()))?;
                &c.b * &k.k[i]
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SbarExact,
    StildeFast,
    TControllerFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorSet {
    pub source: usize,
    /// Sorted, duplicate free.
    pub successors: Vec<usize>,
    pub method: Method,
    pub delta: f64,
    pub channel: Channel,
}

impl SuccessorSet {
    pub fn contains(&self, j: usize) -> bool {
        self.successors.binary_search(&j).is_ok()
    }

    pub fn is_subset_of(&self, other: &SuccessorSet) -> bool {
        self.successors.iter().all(|j| other.contains(*j))
    }
}

/// Successor sets for every cell, indexed by source.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorMap {
    pub sets: Vec<Vec<usize>>,
}

impl SuccessorMap {
    pub fn full(s: usize) -> Self {
        SuccessorMap { sets: vec![(0..s).collect(); s] }
    }

    pub fn from_sets(sets: &[SuccessorSet]) -> Self {
        SuccessorMap { sets: sets.iter().map(|s| s.successors.clone()).collect() }
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.sets[i].binary_search(&j).is_ok()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sets.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |j| (i, *j)))
    }

    pub fn is_subset_of(&self, other: &SuccessorMap) -> bool {
        self.pairs().all(|(i, j)| other.contains(i, j))
    }

    /// Adds every pair of `other`; returns whether anything changed.
    pub fn absorb(&mut self, other: &SuccessorMap) -> bool {
        let mut changed = false;
        for (i, j) in other.pairs() {
            if let Err(pos) = self.sets[i].binary_search(&j) {
                self.sets[i].insert(pos, j);
                changed = true;
            }
        }
        changed
    }
}

fn pair_error(source: usize, target: usize, inner: Error) -> Error {
    Error::PairLp { source, target, inner: Box::new(inner) }
}

/// Feasibility of `U_i x ≤ v_i`, `U_j(Āx + f̄ + D d) ≤ v_j`, `|d|∞ ≤ Δ`.
fn image_meets(
    cell: &HPolytope,
    abar: &Mat,
    fbar: &Vector,
    d: &Mat,
    delta: f64,
    target: &HPolytope,
    opts: &LpOptions,
) -> Result<bool> {
    let n = cell.dim();
    let nd = d.ncols();
    let (ri, rj) = (cell.num_rows(), target.num_rows());
    let mut a = Mat::zeros(ri + rj, n + nd);
    let mut b = Vector::zeros(ri + rj);
    a.view_mut((0, 0), (ri, n)).copy_from(cell.u());
    b.rows_mut(0, ri).copy_from(cell.v());
    a.view_mut((ri, 0), (rj, n)).copy_from(&(target.u() * abar));
    a.view_mut((ri, n), (rj, nd)).copy_from(&(target.u() * d));
    b.rows_mut(ri, rj).copy_from(&(target.v() - target.u() * fbar));
    let mut bounds = vec![Bound::FREE; n];
    bounds.extend(core::iter::repeat_n(Bound::between(-delta, delta), nd));
    let lp = LinearProgram::new(Vector::zeros(n + nd), a, b)?.with_bounds(bounds)?;
    Ok(solve_lp(&lp, opts)?.status == LpStatus::Optimal)
}

/// Disturbance-aware successor set with one LP per target cell.
pub fn successors_exact(
    sys: &PwaSystem,
    ctrl: &AffineController,
    i: usize,
    delta: f64,
    channel: Channel,
    opts: &LpOptions,
) -> Result<SuccessorSet> {
    let (abar, fbar) = ctrl.closed_loop(sys, i);
    let d = channel.matrix(sys, Some(ctrl), i)?;
    let mut successors = Vec::new();
    for j in 0..sys.num_cells() {
        let hit = image_meets(&sys.cell(i).region, &abar, &fbar, &d, delta, &sys.cell(j).region, opts)
            .map_err(|e| pair_error(i, j, e))?;
        if hit {
            successors.push(j);
        }
    }
    Ok(SuccessorSet { source: i, successors, method: Method::SbarExact, delta, channel })
}

/// Cheaper variant: the disturbance enters as a fixed slack `Δ·|U_jD|1`.
pub fn successors_fast(
    sys: &PwaSystem,
    ctrl: &AffineController,
    i: usize,
    delta: f64,
    channel: Channel,
    opts: &LpOptions,
) -> Result<SuccessorSet> {
    let (abar, fbar) = ctrl.closed_loop(sys, i);
    let d = channel.matrix(sys, Some(ctrl), i)?;
    let cell = &sys.cell(i).region;
    let mut successors = Vec::new();
    for j in 0..sys.num_cells() {
        let target = &sys.cell(j).region;
        let slack = row_abs_sums(&(target.u() * &d)) * delta;
        let relaxed = HPolytope::new(target.u().clone(), target.v() + slack)?;
        let hit = image_meets(cell, &abar, &fbar, &Mat::zeros(sys.state_dim(), 0), 0.0, &relaxed, opts)
            .map_err(|e| pair_error(i, j, e))?;
        if hit {
            successors.push(j);
        }
    }
    Ok(SuccessorSet { source: i, successors, method: Method::StildeFast, delta, channel })
}

pub fn row_abs_sums(m: &Mat) -> Vector {
    Vector::from_fn(m.nrows(), |r, _| m.row(r).iter().map(|x| x.abs()).sum())
}

/// Successors valid for every controller whose inputs stay in `input`.
/// The physical channel `D_i` carries the disturbance.
pub fn successors_controller_free(
    sys: &PwaSystem,
    input: &InputPolytope,
    i: usize,
    delta: f64,
    opts: &LpOptions,
) -> Result<SuccessorSet> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    check_dim("input polytope", m, input.set.dim())?;
    let c = sys.cell(i);
    let nd = c.d.ncols();
    let (ri, rr) = (c.region.num_rows(), input.set.num_rows());
    let mut successors = Vec::new();
    for j in 0..sys.num_cells() {
        let t = &sys.cell(j).region;
        let rj = t.num_rows();
        let mut a = Mat::zeros(ri + rr + rj, n + m + nd);
        let mut b = Vector::zeros(ri + rr + rj);
        a.view_mut((0, 0), (ri, n)).copy_from(c.region.u());
        b.rows_mut(0, ri).copy_from(c.region.v());
        a.view_mut((ri, n), (rr, m)).copy_from(input.set.u());
        b.rows_mut(ri, rr).copy_from(input.set.v());
        let o = ri + rr;
        a.view_mut((o, 0), (rj, n)).copy_from(&(t.u() * &c.a));
        a.view_mut((o, n), (rj, m)).copy_from(&(t.u() * &c.b));
        a.view_mut((o, n + m), (rj, nd)).copy_from(&(t.u() * &c.d));
        b.rows_mut(o, rj).copy_from(&(t.v() - t.u() * &c.f));
        let mut bounds = vec![Bound::FREE; n + m];
        bounds.extend(core::iter::repeat_n(Bound::between(-delta, delta), nd));
        let lp = LinearProgram::new(Vector::zeros(n + m + nd), a, b)
            .and_then(|lp| lp.with_bounds(bounds))
            .map_err(|e| pair_error(i, j, e))?;
        let res = solve_lp(&lp, opts).map_err(|e| pair_error(i, j, e))?;
        if res.status == LpStatus::Optimal {
            successors.push(j);
        }
    }
    Ok(SuccessorSet { source: i, successors, method: Method::TControllerFree, delta, channel: Channel::Physical })
}

pub fn successor_map(
    sys: &PwaSystem,
    ctrl: &AffineController,
    delta: f64,
    channel: Channel,
    method: Method,
    input: Option<&InputPolytope>,
    opts: &LpOptions,
) -> Result<SuccessorMap> {
    let mut sets = Vec::with_capacity(sys.num_cells());
    for i in 0..sys.num_cells() {
        sets.push(match method {
            Method::SbarExact => successors_exact(sys, ctrl, i, delta, channel, opts)?,
            Method::StildeFast => successors_fast(sys, ctrl, i, delta, channel, opts)?,
            Method::TControllerFree => {
                let u = input.cloned().unwrap_or_else(|| InputPolytope::unconstrained(sys.input_dim()));
                successors_controller_free(sys, &u, i, delta, opts)?
            }
        });
    }
    Ok(SuccessorMap::from_sets(&sets))
}

/// Corners of `{d : |d|∞ ≤ Δ}`; collapses to the origin when `Δ = 0` or
/// the channel has no columns.
pub fn box_corners(dim: usize, delta: f64) -> Vec<Vector> {
    if dim == 0 || delta == 0.0 {
        return vec![Vector::zeros(dim)];
    }
    (0..1usize << dim)
        .map(|mask| Vector::from_fn(dim, |k, _| if mask >> k & 1 == 1 { delta } else { -delta }))
        .collect()
}

/// One scalar inequality `⟨k_coeff, K⟩ + g_coeffᵀg ≤ rhs` in the unknown gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfinementRow {
    pub k_coeff: Mat,
    pub g_coeff: Vector,
    pub rhs: f64,
}

impl ConfinementRow {
    pub fn evaluate(&self, k: &Mat, g: &Vector) -> f64 {
        self.k_coeff.dot(k) + self.g_coeff.dot(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfinementConstraint {
    pub source: usize,
    pub target: HPolytope,
    pub rows: Vec<ConfinementRow>,
}

impl ConfinementConstraint {
    /// Largest violation at the given gains (negative when strictly met).
    pub fn max_violation(&self, k: &Mat, g: &Vector) -> f64 {
        self.rows.iter().map(|r| r.evaluate(k, g) - r.rhs).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn satisfied(&self, k: &Mat, g: &Vector, tol: f64) -> bool {
        self.rows.iter().all(|r| r.evaluate(k, g) <= r.rhs + tol)
    }
}

/// Rows of `Φ(Aξ + BKξ̃ + f + Bg + D d) ≤ φ`, where `ξ̃ = ξ + d` for the state
/// channel and `ξ` otherwise.
#[allow(clippy::too_many_arguments)]
fn vertex_rows(
    target: &HPolytope,
    a: &Mat,
    b: &Mat,
    f: &Vector,
    fixed_d: Option<&Mat>,
    through_gain: bool,
    verts: &VertexList,
    corners: &[Vector],
) -> Vec<ConfinementRow> {
    let mut rows = Vec::with_capacity(verts.len() * corners.len() * target.num_rows());
    for xi in verts.iter() {
        for d in corners {
            for r in 0..target.num_rows() {
                let phi = target.u().row(r).transpose();
                let bt_phi = b.transpose() * &phi;
                let arg = if through_gain { xi + d } else { xi.clone() };
                let mut rhs = target.v()[r] - phi.dot(&(a * xi + f));
                if let Some(dm) = fixed_d {
                    rhs -= phi.dot(&(dm * d));
                }
                rows.push(ConfinementRow { k_coeff: &bt_phi * arg.transpose(), g_coeff: bt_phi, rhs });
            }
        }
    }
    rows
}

/// Linear-in-gain conditions confining the one-step image of cell `i` to `Z`.
pub fn confinement_constraints(
    sys: &PwaSystem,
    i: usize,
    z: &HPolytope,
    delta: f64,
    channel: Channel,
    opts: &LpOptions,
) -> Result<ConfinementConstraint> {
    check_dim("confinement target", sys.state_dim(), z.dim())?;
    let c = sys.cell(i);
    let verts = c.region.vertices(opts)?;
    let (fixed, through, nd) = match channel {
        Channel::Physical => (Some(c.d.clone()), false, c.d.ncols()),
        Channel::Input => (Some(c.b.clone()), false, c.b.ncols()),
        Channel::State => (None, true, sys.state_dim()),
    };
    let corners = box_corners(nd, delta);
    let rows = vertex_rows(z, &c.a, &c.b, &c.f, fixed.as_ref(), through, &verts, &corners);
    Ok(ConfinementConstraint { source: i, target: z.clone(), rows })
}

/// Input-admissibility `R(Kξ + g + e) ≤ r` over the cell vertices, with the
/// quantization error `e` routed by the channel (`e = Kd` for the state
/// channel, `e = d` for the input channel, none for the physical one).
pub fn input_constraints(
    sys: &PwaSystem,
    i: usize,
    input: &InputPolytope,
    delta: f64,
    channel: Channel,
    opts: &LpOptions,
) -> Result<ConfinementConstraint> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    check_dim("input polytope", m, input.set.dim())?;
    let verts = sys.cell(i).region.vertices(opts)?;
    let eye_m = crate::linalg::eye(m);
    let a0 = Mat::zeros(m, n);
    let f0 = Vector::zeros(m);
    let (fixed, through, nd) = match channel {
        Channel::Physical => (None, false, 0),
        Channel::Input => (Some(eye_m.clone()), false, m),
        Channel::State => (None, true, n),
    };
    let corners = box_corners(nd, delta);
    let rows = vertex_rows(&input.set, &a0, &eye_m, &f0, fixed.as_ref(), through, &verts, &corners);
    Ok(ConfinementConstraint { source: i, target: input.set.clone(), rows })
}

/// Forward evaluation of the confinement condition for fixed gains.
pub fn confinement_check(
    sys: &PwaSystem,
    ctrl: &AffineController,
    i: usize,
    z: &HPolytope,
    delta: f64,
    channel: Channel,
    opts: &LpOptions,
) -> Result<bool> {
    check_dim("confinement target", sys.state_dim(), z.dim())?;
    let verts = sys.cell(i).region.vertices(opts)?;
    let (abar, fbar) = ctrl.closed_loop(sys, i);
    let d = channel.matrix(sys, Some(ctrl), i)?;
    for xi in verts.iter() {
        let base = &abar * xi + &fbar;
        for dv in box_corners(d.ncols(), delta) {
            if !z.contains(&(&base + &d * dv), opts.tol)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Whether the controller keeps the applied input (including the channel's
/// quantization error) inside `input` on the whole cell.
pub fn input_respected(
    sys: &PwaSystem,
    ctrl: &AffineController,
    i: usize,
    input: &InputPolytope,
    delta: f64,
    channel: Channel,
    opts: &LpOptions,
) -> Result<bool> {
    let c = input_constraints(sys, i, input, delta, channel, opts)?;
    Ok(c.satisfied(&ctrl.k[i], &ctrl.g[i], opts.tol))
}

/// Emptiness of `(M1 ⊕ {Dd : |d|∞ ≤ Δ}) ∩ M2` as a single LP.
pub fn minkowski_swap_empty(m1: &HPolytope, m2: &HPolytope, d: &Mat, delta: f64, opts: &LpOptions) -> Result<bool> {
    check_dim("Minkowski operands", m1.dim(), m2.dim())?;
    check_dim("disturbance channel rows", m1.dim(), d.nrows())?;
    let n = m1.dim();
    Ok(!image_meets(m1, &crate::linalg::eye(n), &Vector::zeros(n), d, delta, m2, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{printed_gains, six_mode};
    use crate::model::Cell;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn opts() -> LpOptions {
        LpOptions::default()
    }

    #[test]
    fn printed_gain_cell_one_maps_into_cell_two() {
        let sys = six_mode();
        let s = successors_exact(&sys, &printed_gains(), 0, 0.01, Channel::State, &opts()).unwrap();
        assert!(s.successors.iter().all(|j| *j == 1), "{:?}", s.successors);
        let fast = successors_fast(&sys, &printed_gains(), 0, 0.01, Channel::State, &opts()).unwrap();
        assert!(s.is_subset_of(&fast));
    }

    #[test]
    fn identity_dynamics_keep_their_cell() {
        let sq = HPolytope::hypercube(2, 1.0);
        let cell = Cell { region: sq.clone(), a: crate::linalg::eye(2), b: Mat::zeros(2, 1), f: Vector::zeros(2), d: Mat::zeros(2, 0) };
        let sys = PwaSystem::new(2, 1, 0, sq, vec![cell]).unwrap();
        let ctrl = AffineController::linear(vec![Mat::zeros(1, 2)]);
        let s = successors_exact(&sys, &ctrl, 0, 0.0, Channel::Physical, &opts()).unwrap();
        assert_eq!(s.successors, vec![0]);
    }

    #[test]
    fn fast_equals_exact_without_disturbance() {
        let sys = six_mode();
        for i in 0..sys.num_cells() {
            let e = successors_exact(&sys, &printed_gains(), i, 0.0, Channel::Physical, &opts()).unwrap();
            let f = successors_fast(&sys, &printed_gains(), i, 0.0, Channel::Physical, &opts()).unwrap();
            assert_eq!(e.successors, f.successors);
        }
    }

    #[test]
    fn slack_is_abs_row_sum_times_delta() {
        let s = row_abs_sums(&dmatrix![1.0, -2.0]) * 0.1;
        assert!((s[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn controller_free_with_free_input_reaches_everything() {
        // B = I has full row rank, so every cell is reachable
        let sq = HPolytope::hypercube(2, 1.0);
        let left = HPolytope::new(dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0], dvector![0.0, 1.0, 1.0, 1.0]).unwrap();
        let right = HPolytope::new(dmatrix![-1.0, 0.0; 1.0, 0.0; 0.0, 1.0; 0.0, -1.0], dvector![0.0, 1.0, 1.0, 1.0]).unwrap();
        let mk = |r: HPolytope| Cell { region: r, a: crate::linalg::eye(2) * 0.5, b: crate::linalg::eye(2), f: Vector::zeros(2), d: Mat::zeros(2, 0) };
        let sys = PwaSystem::new(2, 2, 0, sq, vec![mk(left), mk(right)]).unwrap();
        let t = successors_controller_free(&sys, &InputPolytope::unconstrained(2), 0, 0.0, &opts()).unwrap();
        assert_eq!(t.successors, vec![0, 1]);
    }

    #[test]
    fn controller_free_with_zero_input_is_autonomous() {
        let sys = six_mode();
        let zero = InputPolytope::new(dmatrix![1.0; -1.0], dvector![0.0, 0.0], &opts()).unwrap();
        let ctrl = AffineController::linear(vec![Mat::zeros(1, 2); 6]);
        for i in 0..6 {
            let t = successors_controller_free(&sys, &zero, i, 0.0, &opts()).unwrap();
            let s = successors_exact(&sys, &ctrl, i, 0.0, Channel::Physical, &opts()).unwrap();
            assert_eq!(t.successors, s.successors);
        }
    }

    #[test]
    fn controller_free_contains_exact_for_printed_gains() {
        let sys = six_mode();
        let u = InputPolytope::new(dmatrix![1.0; -1.0], dvector![10.0, 10.0], &opts()).unwrap();
        let ctrl = printed_gains();
        assert!(input_respected(&sys, &ctrl, 0, &u, 0.0, Channel::Physical, &opts()).unwrap());
        let t = successors_controller_free(&sys, &u, 0, 0.0, &opts()).unwrap();
        let s = successors_exact(&sys, &ctrl, 0, 0.0, Channel::Physical, &opts()).unwrap();
        assert!(s.is_subset_of(&t));
    }

    #[test]
    fn printed_gains_satisfy_design_confinements() {
        let sys = six_mode();
        let ctrl = printed_gains();
        let o = opts();
        assert!(confinement_check(&sys, &ctrl, 0, &sys.cell(1).region, 0.01, Channel::State, &o).unwrap());
        assert!(confinement_check(&sys, &ctrl, 2, &sys.cell(3).region, 0.01, Channel::State, &o).unwrap());
        for i in 0..6 {
            assert!(confinement_check(&sys, &ctrl, i, sys.total_space(), 0.01, Channel::State, &o).unwrap());
        }
    }

    #[test]
    fn zero_map_confines_to_anything_containing_origin() {
        let sq = HPolytope::hypercube(2, 1.0);
        let cell = Cell { region: sq.clone(), a: Mat::zeros(2, 2), b: Mat::zeros(2, 1), f: Vector::zeros(2), d: Mat::zeros(2, 1) };
        let sys = PwaSystem::new(2, 1, 1, sq.clone(), vec![cell]).unwrap();
        let ctrl = AffineController::linear(vec![Mat::zeros(1, 2)]);
        let z = HPolytope::hypercube(2, 0.1);
        assert!(confinement_check(&sys, &ctrl, 0, &z, 0.3, Channel::Physical, &opts()).unwrap());
    }

    #[test]
    fn constraint_count_is_vertices_times_corners_times_rows() {
        let sq = HPolytope::hypercube(2, 1.0);
        let cell = Cell { region: sq.clone(), a: crate::linalg::eye(2), b: dmatrix![0.0; 1.0], f: Vector::zeros(2), d: dmatrix![1.0; 0.0] };
        let sys = PwaSystem::new(2, 1, 1, sq, vec![cell]).unwrap();
        let z = HPolytope::new(dmatrix![1.0, 0.0; 0.0, 1.0; -1.0, -1.0], dvector![2.0, 2.0, 2.0]).unwrap();
        let c = confinement_constraints(&sys, 0, &z, 0.1, Channel::Physical, &opts()).unwrap();
        assert_eq!(c.rows.len(), 24);
        let c0 = confinement_constraints(&sys, 0, &z, 0.0, Channel::Physical, &opts()).unwrap();
        assert_eq!(c0.rows.len(), 12);
    }

    #[test]
    fn emitted_rows_reproduce_forward_check() {
        let sys = six_mode();
        let ctrl = printed_gains();
        for (i, j) in [(0usize, 1usize), (2, 3), (4, 0), (1, 2)] {
            for ch in [Channel::State, Channel::Input] {
                let z = &sys.cell(j).region;
                let rows = confinement_constraints(&sys, i, z, 0.01, ch, &opts()).unwrap();
                let via_rows = rows.satisfied(&ctrl.k[i], &ctrl.g[i], 1e-7);
                let direct = confinement_check(&sys, &ctrl, i, z, 0.01, ch, &opts()).unwrap();
                assert_eq!(via_rows, direct, "pair ({i},{j}) channel {ch:?}");
            }
        }
    }

    #[test]
    fn minkowski_examples() {
        let sq = HPolytope::hypercube(2, 1.0);
        let i2 = crate::linalg::eye(2);
        assert!(!minkowski_swap_empty(&sq, &sq, &i2, 0.2, &opts()).unwrap());
        let left = HPolytope::new(dmatrix![1.0, 0.0], dvector![0.0]).unwrap();
        let right = HPolytope::new(dmatrix![-1.0, 0.0], dvector![-1.0]).unwrap();
        assert!(minkowski_swap_empty(&left, &right, &i2, 0.4, &opts()).unwrap());
        assert!(minkowski_swap_empty(&right, &left, &i2, 0.4, &opts()).unwrap());
        assert!(!minkowski_swap_empty(&left, &right, &i2, 1.2, &opts()).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn successor_sets_grow_with_delta(d1 in 0.0f64..0.2, extra in 0.0f64..0.2, i in 0usize..6) {
            let sys = six_mode();
            let ctrl = printed_gains();
            let small = successors_exact(&sys, &ctrl, i, d1, Channel::State, &opts()).unwrap();
            let big = successors_exact(&sys, &ctrl, i, d1 + extra, Channel::State, &opts()).unwrap();
            prop_assert!(small.is_subset_of(&big));
        }
    }
}
