//! H-representation polyhedra `{x : Ux ≤ v}`.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{check_dim, Error, Result};
use crate::linalg::{inf_norm, Mat, Vector};
use crate::optim::lp::{solve_lp, Bound, LinearProgram, LpOptions, LpStatus};
#[allow(unused_imports)] // method resolution differs once std is linked
use num_traits::Float;

/// Feasibility tolerance used when accepting a candidate vertex.
pub const VERTEX_FEAS_TOL: f64 = 1e-9;
/// Two vertices closer than this in ∞-norm are merged.
pub const VERTEX_DEDUP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    u: Mat,
    v: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexList {
    pub vertices: Vec<Vector>,
    pub dedup_tol: f64,
}

impl VertexList {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Vector> {
        self.vertices.iter()
    }

    /// Componentwise min and max over the vertices.
    pub fn bounds(&self) -> Option<(Vector, Vector)> {
        let first = self.vertices.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &self.vertices[1..] {
            for k in 0..p.len() {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }
}

impl HPolytope {
    pub fn new(u: Mat, v: Vector) -> Result<Self> {
        check_dim("polytope rows", u.nrows(), v.len())?;
        if u.iter().chain(v.iter()).any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("polytope data contains NaN".into()));
        }
        Ok(HPolytope { u, v })
    }

    pub fn whole_space(n: usize) -> Self {
        HPolytope { u: Mat::zeros(0, n), v: Vector::zeros(0) }
    }

    /// `{x : |x|∞ ≤ r}`
    pub fn hypercube(n: usize, r: f64) -> Self {
        Self::box_around(&Vector::zeros(n), r)
    }

    /// `{x : |x − c|∞ ≤ r}`
    pub fn box_around(c: &Vector, r: f64) -> Self {
        let n = c.len();
        let mut u = Mat::zeros(2 * n, n);
        let mut v = Vector::zeros(2 * n);
        for k in 0..n {
            u[(2 * k, k)] = 1.0;
            v[2 * k] = c[k] + r;
            u[(2 * k + 1, k)] = -1.0;
            v[2 * k + 1] = r - c[k];
        }
        HPolytope { u, v }
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn u(&self) -> &Mat {
        &self.u
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        check_dim("point", self.dim(), x.len())?;
        let ux = &self.u * x;
        Ok((0..ux.len()).all(|r| ux[r] <= self.v[r] + tol))
    }

    pub fn is_empty(&self, opts: &LpOptions) -> Result<bool> {
        if self.num_rows() == 0 {
            return Ok(false);
        }
        let lp = LinearProgram::feasibility(self.u.clone(), self.v.clone())?;
        Ok(solve_lp(&lp, opts)?.status == LpStatus::Infeasible)
    }

    /// Stacks the rows of both polytopes.
    pub fn intersect(&self, other: &HPolytope) -> Result<HPolytope> {
        check_dim("intersect", self.dim(), other.dim())?;
        let (r1, r2, n) = (self.num_rows(), other.num_rows(), self.dim());
        let mut u = Mat::zeros(r1 + r2, n);
        u.view_mut((0, 0), (r1, n)).copy_from(&self.u);
        u.view_mut((r1, 0), (r2, n)).copy_from(&other.u);
        let mut v = Vector::zeros(r1 + r2);
        v.rows_mut(0, r1).copy_from(&self.v);
        v.rows_mut(r1, r2).copy_from(&other.v);
        Ok(HPolytope { u, v })
    }

    /// Per-coordinate extent via `2n` LPs.
    pub fn bounding_box(&self, opts: &LpOptions) -> Result<(Vector, Vector)> {
        let n = self.dim();
        let mut lo = Vector::zeros(n);
        let mut hi = Vector::zeros(n);
        for k in 0..n {
            for sign in [1.0, -1.0] {
                let mut c = Vector::zeros(n);
                c[k] = sign;
                let r = solve_lp(&LinearProgram::new(c, self.u.clone(), self.v.clone())?, opts)?;
                match r.status {
                    LpStatus::Infeasible => return Err(Error::Empty),
                    LpStatus::Unbounded => return Err(Error::Unbounded),
                    LpStatus::Optimal => {
                        if sign > 0.0 {
                            lo[k] = r.x[k];
                        } else {
                            hi[k] = r.x[k];
                        }
                    }
                }
            }
        }
        Ok((lo, hi))
    }

    /// Radius of the largest ∞-ball inside the polytope; negative or zero
    /// when the interior is empty.
    pub fn interior_radius(&self, opts: &LpOptions) -> Result<f64> {
        let n = self.dim();
        let rows = self.num_rows();
        if rows == 0 {
            return Ok(f64::INFINITY);
        }
        // maximize r: U x + r·|U|1 ≤ v, r ≤ 1 (cap keeps the LP bounded)
        let mut a = Mat::zeros(rows, n + 1);
        a.view_mut((0, 0), (rows, n)).copy_from(&self.u);
        for r in 0..rows {
            a[(r, n)] = self.u.row(r).iter().map(|x| x.abs()).sum::<f64>();
        }
        let mut c = Vector::zeros(n + 1);
        c[n] = -1.0;
        let mut bounds = vec![Bound::FREE; n];
        bounds.push(Bound { lower: None, upper: Some(1.0) });
        let lp = LinearProgram::new(c, a, self.v.clone())?.with_bounds(bounds)?;
        let res = solve_lp(&lp, opts)?;
        match res.status {
            LpStatus::Optimal => Ok(res.x[n]),
            LpStatus::Infeasible => Ok(f64::NEG_INFINITY),
            LpStatus::Unbounded => Err(Error::NumericalFailure("interior radius LP unbounded".into())),
        }
    }

    /// Extreme points by brute force over all `n`-subsets of rows.
    pub fn vertices(&self, opts: &LpOptions) -> Result<VertexList> {
        let n = self.dim();
        if self.is_empty(opts)? {
            return Err(Error::Empty);
        }
        self.bounding_box(opts)?;
        let rows = self.num_rows();
        let mut out: Vec<Vector> = Vec::new();
        if n == 0 {
            return Ok(VertexList { vertices: vec![Vector::zeros(0)], dedup_tol: VERTEX_DEDUP_TOL });
        }
        let scale: Vec<f64> = (0..rows).map(|r| self.u.row(r).norm().max(1e-300)).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        if rows >= n {
            loop {
                let mut a = Mat::zeros(n, n);
                let mut b = Vector::zeros(n);
                for (k, &r) in idx.iter().enumerate() {
                    a.row_mut(k).copy_from(&(self.u.row(r) / scale[r]));
                    b[k] = self.v[r] / scale[r];
                }
                if let Some(x) = solve_square(&a, &b) {
                    let ux = &self.u * &x;
                    let ok = (0..rows).all(|r| ux[r] - self.v[r] <= VERTEX_FEAS_TOL * (1.0 + scale[r]));
                    if ok && !out.iter().any(|p| inf_norm(&(p - &x)) <= VERTEX_DEDUP_TOL) {
                        out.push(x);
                    }
                }
                if !next_combination(&mut idx, rows) {
                    break;
                }
            }
        }
        if out.is_empty() {
            return Err(Error::NumericalFailure("no vertices found for a nonempty bounded polytope".into()));
        }
        Ok(VertexList { vertices: out, dedup_tol: VERTEX_DEDUP_TOL })
    }

    /// ∞-norm Chebyshev center: minimises the worst ∞-distance to the
    /// vertices. The optimal radius is unique but the center need not be;
    /// the midpoint of the vertex bounding box is returned, which is always
    /// optimal.
    pub fn chebyshev_center_inf(&self, opts: &LpOptions) -> Result<(Vector, f64)> {
        let verts = self.vertices(opts)?;
        chebyshev_center_of(&verts, opts)
    }

    /// `max_{x∈P} |ξ − x|∞`, attained at a vertex.
    pub fn max_inf_distance(&self, xi: &Vector, opts: &LpOptions) -> Result<f64> {
        check_dim("query point", self.dim(), xi.len())?;
        let verts = self.vertices(opts)?;
        Ok(max_vertex_distance(&verts, xi))
    }
}

pub fn max_vertex_distance(verts: &VertexList, xi: &Vector) -> f64 {
    verts.iter().map(|p| inf_norm(&(xi - p))).fold(0.0, f64::max)
}

/// Chebyshev LP over an explicit vertex list.
pub fn chebyshev_center_of(verts: &VertexList, opts: &LpOptions) -> Result<(Vector, f64)> {
    let Some(first) = verts.vertices.first() else {
        return Err(Error::Empty);
    };
    let n = first.len();
    let np = verts.len();
    // variables (ξ, δ); rows ξ − δ1 ≤ v_p and −ξ − δ1 ≤ −v_p
    let mut a = Mat::zeros(2 * n * np, n + 1);
    let mut b = Vector::zeros(2 * n * np);
    let mut r = 0;
    for p in verts.iter() {
        for k in 0..n {
            a[(r, k)] = 1.0;
            a[(r, n)] = -1.0;
            b[r] = p[k];
            a[(r + 1, k)] = -1.0;
            a[(r + 1, n)] = -1.0;
            b[r + 1] = -p[k];
            r += 2;
        }
    }
    let mut c = Vector::zeros(n + 1);
    c[n] = 1.0;
    let mut bounds = vec![Bound::FREE; n];
    bounds.push(Bound::NONNEG);
    let res = solve_lp(&LinearProgram::new(c, a, b)?.with_bounds(bounds)?, opts)?;
    if res.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure("Chebyshev LP did not reach an optimum".into()));
    }
    let delta = res.x[n];
    let (lo, hi) = verts.bounds().ok_or(Error::Empty)?;
    let mid = (&lo + &hi) * 0.5;
    let mid_radius = max_vertex_distance(verts, &mid);
    if mid_radius <= delta + 1e-9 * (1.0 + delta) {
        Ok((mid, mid_radius))
    } else {
        let xi = res.x.rows(0, n).into_owned();
        let r = max_vertex_distance(verts, &xi);
        Ok((xi, r))
    }
}

fn solve_square(a: &Mat, b: &Vector) -> Option<Vector> {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin / smax < 1e-11 {
        return None;
    }
    a.clone().lu().solve(b)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn x1() -> HPolytope {
        HPolytope::new(
            dmatrix![1.0, -1.0; 1.0, 1.0; -1.0, 0.0; 1.0, 0.0],
            dvector![0.0, 0.0, 1.0, -0.3],
        )
        .unwrap()
    }

    fn opts() -> LpOptions {
        LpOptions::default()
    }

    #[test]
    fn membership() {
        let sq = HPolytope::hypercube(2, 1.0);
        assert!(sq.contains(&dvector![0.0, 0.0], 0.0).unwrap());
        assert!(x1().contains(&dvector![-0.5, 0.1], 0.0).unwrap());
        assert!(!x1().contains(&dvector![0.5, 0.0], 0.0).unwrap());
        assert!(sq.contains(&dvector![0.0], 0.0).is_err());
    }

    #[test]
    fn emptiness() {
        let p = HPolytope::new(dmatrix![1.0; -1.0], dvector![1.0, -2.0]).unwrap();
        assert!(p.is_empty(&opts()).unwrap());
        assert!(!x1().is_empty(&opts()).unwrap());
        assert!(!HPolytope::whole_space(3).is_empty(&opts()).unwrap());
    }

    #[test]
    fn intersection_of_half_lines() {
        let p = HPolytope::new(dmatrix![1.0], dvector![1.0]).unwrap();
        let q = HPolytope::new(dmatrix![-1.0], dvector![0.0]).unwrap();
        let r = p.intersect(&q).unwrap();
        assert_eq!(r.num_rows(), 2);
        assert!(r.contains(&dvector![0.5], 0.0).unwrap());
        assert!(!r.contains(&dvector![1.5], 0.0).unwrap());
        assert_eq!(p.intersect(&HPolytope::whole_space(1)).unwrap(), p);
    }

    #[test]
    fn square_vertices() {
        let v = HPolytope::hypercube(2, 1.0).vertices(&opts()).unwrap();
        assert_eq!(v.len(), 4);
        for p in v.iter() {
            assert_relative_eq!(p[0].abs(), 1.0);
            assert_relative_eq!(p[1].abs(), 1.0);
        }
    }

    #[test]
    fn x1_vertices_match_pairwise_solves() {
        let v = x1().vertices(&opts()).unwrap();
        let expected = [dvector![-0.3, 0.3], dvector![-0.3, -0.3], dvector![-1.0, 1.0], dvector![-1.0, -1.0]];
        assert_eq!(v.len(), 4);
        for e in &expected {
            assert!(v.iter().any(|p| inf_norm(&(p - e)) < 1e-9), "missing {e}");
        }
    }

    #[test]
    fn unbounded_and_empty_are_errors() {
        let half = HPolytope::new(dmatrix![1.0, 0.0], dvector![1.0]).unwrap();
        assert_eq!(half.vertices(&opts()).unwrap_err(), Error::Unbounded);
        let empty = HPolytope::new(dmatrix![1.0; -1.0], dvector![1.0, -2.0]).unwrap();
        assert_eq!(empty.vertices(&opts()).unwrap_err(), Error::Empty);
    }

    #[test]
    fn chebyshev_centers() {
        let (c, r) = HPolytope::hypercube(2, 1.0).chebyshev_center_inf(&opts()).unwrap();
        assert_relative_eq!(c, dvector![0.0, 0.0], epsilon = 1e-12);
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
        let seg = HPolytope::new(
            dmatrix![0.0, 1.0; 0.0, -1.0; 1.0, 0.0; -1.0, 0.0],
            dvector![0.0, 0.0, 2.0, 0.0],
        )
        .unwrap();
        let (c, r) = seg.chebyshev_center_inf(&opts()).unwrap();
        assert_relative_eq!(c, dvector![1.0, 0.0], epsilon = 1e-12);
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chebyshev_x1_against_grid_search() {
        let p = x1();
        let (_, r) = p.chebyshev_center_inf(&opts()).unwrap();
        // grid oracle over the bounding box [-1,-0.3]×[-1,1], step 1e-3
        let verts = p.vertices(&opts()).unwrap();
        let mut best = f64::INFINITY;
        let mut best_pt = dvector![0.0, 0.0];
        let (nx, ny) = (700, 2000);
        for i in 0..=nx {
            for j in 0..=ny {
                let q = dvector![-1.0 + i as f64 * 1e-3, -1.0 + j as f64 * 1e-3];
                let d = max_vertex_distance(&verts, &q);
                if d < best {
                    best = d;
                    best_pt = q;
                }
            }
        }
        assert!((r - best).abs() <= 2e-3, "{r} vs {best} at {best_pt}");
    }

    #[test]
    fn max_distance_examples() {
        let sq = HPolytope::hypercube(2, 1.0);
        assert_relative_eq!(sq.max_inf_distance(&dvector![0.0, 0.0], &opts()).unwrap(), 1.0);
        assert_relative_eq!(sq.max_inf_distance(&dvector![2.0, 0.0], &opts()).unwrap(), 3.0);
    }

    #[test]
    fn interior_radius_detects_shared_faces() {
        let x3 = HPolytope::new(-x1().u().clone(), x1().v().clone()).unwrap();
        let meet = x1().intersect(&x3).unwrap();
        assert!(meet.interior_radius(&opts()).unwrap() <= 1e-9);
        assert_relative_eq!(HPolytope::hypercube(2, 1.0).interior_radius(&opts()).unwrap(), 1.0, epsilon = 1e-9);
    }

    /// Random bounded polytope: a box intersected with a few random cuts
    /// that keep the origin inside.
    pub(crate) fn random_polytope(rng: &mut ChaCha8Rng, n: usize) -> HPolytope {
        let extra = rng.random_range(1..5);
        let mut p = HPolytope::hypercube(n, rng.random_range(0.5..2.0));
        let mut u = Mat::zeros(extra, n);
        let mut v = Vector::zeros(extra);
        for r in 0..extra {
            for k in 0..n {
                u[(r, k)] = rng.random_range(-1.0..1.0);
            }
            v[r] = rng.random_range(0.1..1.0);
        }
        p = p.intersect(&HPolytope::new(u, v).unwrap()).unwrap();
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hypercube_has_two_pow_n_vertices(n in 1usize..5, r in 0.1f64..3.0) {
            let v = HPolytope::hypercube(n, r).vertices(&opts()).unwrap();
            prop_assert_eq!(v.len(), 1 << n);
        }

        #[test]
        fn intersection_is_contained_in_both(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_polytope(&mut rng, 2);
            let q = random_polytope(&mut rng, 2);
            let r = p.intersect(&q).unwrap();
            for _ in 0..200 {
                let x = dvector![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                if r.contains(&x, 0.0).unwrap() {
                    prop_assert!(p.contains(&x, 0.0).unwrap() && q.contains(&x, 0.0).unwrap());
                }
            }
        }

        #[test]
        fn chebyshev_radius_is_optimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..4);
            let p = random_polytope(&mut rng, n);
            let (_, r) = p.chebyshev_center_inf(&opts()).unwrap();
            for _ in 0..20 {
                let xi = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                prop_assert!(r <= p.max_inf_distance(&xi, &opts()).unwrap() + 1e-9);
            }
        }

        #[test]
        fn sampled_distance_never_exceeds_vertex_max(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_polytope(&mut rng, 2);
            let xi = dvector![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let verts = p.vertices(&opts()).unwrap();
            let dmax = p.max_inf_distance(&xi, &opts()).unwrap();
            prop_assert!(verts.iter().any(|q| inf_norm(&(&xi - q)) == dmax));
            let (lo, hi) = verts.bounds().unwrap();
            for _ in 0..500 {
                let x = dvector![rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
                if p.contains(&x, 0.0).unwrap() {
                    prop_assert!(inf_norm(&(&xi - &x)) <= dmax + 1e-12);
                }
            }
        }
    }
}
