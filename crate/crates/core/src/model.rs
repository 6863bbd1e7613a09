//! PWA plant, affine feedback and the uniform zooming quantizer.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{euclid, Mat, Vector};
use crate::optim::lp::LpOptions;
use crate::polytope::HPolytope;
#[allow(unused_imports)] // method resolution differs once std is linked
use num_traits::Float;

/// Boundary tolerance used for mode selection and disjointness.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Closure of the cell.
    pub region: HPolytope,
    pub a: Mat,
    pub b: Mat,
    pub f: Vector,
    /// Disturbance channel, `n × d` (zero columns when `d = 0`).
    pub d: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwaSystem {
    cells: Vec<Cell>,
    state_dim: usize,
    input_dim: usize,
    disturbance_dim: usize,
    total: HPolytope,
}

impl PwaSystem {
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        disturbance_dim: usize,
        total: HPolytope,
        cells: Vec<Cell>,
    ) -> Result<Self> {
        let n = state_dim;
        if cells.is_empty() {
            return Err(Error::InvalidModel("system has no cells".into()));
        }
        check_dim("total space dimension", n, total.dim())?;
        for (i, c) in cells.iter().enumerate() {
            let bad = |what: &str| Error::InvalidModel(format!("cell {i}: {what} has the wrong shape"));
            if c.region.dim() != n {
                return Err(bad("region"));
            }
            if c.a.shape() != (n, n) {
                return Err(bad("A"));
            }
            if c.b.shape() != (n, input_dim) {
                return Err(bad("B"));
            }
            if c.f.len() != n {
                return Err(bad("f"));
            }
            if c.d.shape() != (n, disturbance_dim) {
                return Err(bad("D"));
            }
        }
        let sys = PwaSystem { cells, state_dim, input_dim, disturbance_dim, total };
        for i in 0..sys.cells.len() {
            if sys.contains_origin(i) && sys.cells[i].f.amax() > 0.0 {
                return Err(Error::InvalidModel(format!("cell {i} contains the origin but has nonzero f")));
            }
        }
        Ok(sys)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn disturbance_dim(&self) -> usize {
        self.disturbance_dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn total_space(&self) -> &HPolytope {
        &self.total
    }

    /// Whether `0 ∈ Cl(X_i)`.
    pub fn contains_origin(&self, i: usize) -> bool {
        self.cells[i].region.v().iter().all(|v| *v >= -TIE_TOL)
    }

    /// Lowest-index cell whose closure contains `x`.
    pub fn mode_of(&self, x: &Vector) -> Result<usize> {
        check_dim("state", self.state_dim, x.len())?;
        if !self.total.contains(x, TIE_TOL)? {
            return Err(Error::OutOfDomain);
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.region.contains(x, TIE_TOL)? {
                return Ok(i);
            }
        }
        Err(Error::OutOfDomain)
    }

    /// Sampled coverage test plus pairwise interior-disjointness.
    ///
    /// Coverage is skipped when the total space is unbounded.
    pub fn audit(&self, samples: usize, seed: u64, opts: &LpOptions) -> Result<()> {
        for i in 0..self.cells.len() {
            for j in i + 1..self.cells.len() {
                let meet = self.cells[i].region.intersect(&self.cells[j].region)?;
                if meet.interior_radius(opts)? > TIE_TOL {
                    return Err(Error::InvalidModel(format!("cells {i} and {j} overlap")));
                }
            }
        }
        let (lo, hi) = match self.total.bounding_box(opts) {
            Ok(b) => b,
            Err(Error::Unbounded) => return Ok(()),
            Err(e) => return Err(e),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < samples && attempts < samples * 100 {
            attempts += 1;
            let x = Vector::from_fn(self.state_dim, |k, _| {
                if hi[k] > lo[k] {
                    rng.random_range(lo[k]..=hi[k])
                } else {
                    lo[k]
                }
            });
            if !self.total.contains(&x, 0.0)? {
                continue;
            }
            drawn += 1;
            if self.mode_of(&x).is_err() {
                return Err(Error::InvalidModel(format!("point {:?} of X lies in no cell", x.as_slice())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineController {
    pub k: Vec<Mat>,
    pub g: Vec<Vector>,
}

impl AffineController {
    pub fn new(k: Vec<Mat>, g: Vec<Vector>) -> Result<Self> {
        check_dim("controller pieces", k.len(), g.len())?;
        Ok(AffineController { k, g })
    }

    /// Linear feedback `u = K_i x` on every cell.
    pub fn linear(k: Vec<Mat>) -> Self {
        let g = k.iter().map(|k| Vector::zeros(k.nrows())).collect();
        AffineController { k, g }
    }

    pub fn validate(&self, sys: &PwaSystem) -> Result<()> {
        check_dim("controller pieces", sys.num_cells(), self.k.len())?;
        for i in 0..self.k.len() {
            if self.k[i].shape() != (sys.input_dim(), sys.state_dim()) {
                return Err(Error::InvalidModel(format!("K of cell {i} has the wrong shape")));
            }
            check_dim("controller offset", sys.input_dim(), self.g[i].len())?;
            if sys.contains_origin(i) && self.g[i].amax() > 0.0 {
                return Err(Error::InvalidModel(format!("cell {i} contains the origin but has nonzero g")));
            }
        }
        Ok(())
    }

    pub fn input(&self, i: usize, x: &Vector) -> Vector {
        &self.k[i] * x + &self.g[i]
    }

    /// `(A_i + B_iK_i, f_i + B_ig_i)`
    pub fn closed_loop(&self, sys: &PwaSystem, i: usize) -> (Mat, Vector) {
        let c = sys.cell(i);
        (&c.a + &c.b * &self.k[i], &c.f + &c.b * &self.g[i])
    }
}

/// Origin-centred uniform grid of cell width `2Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformQuantizer {
    pub delta: f64,
    pub range: f64,
}

impl UniformQuantizer {
    pub fn new(delta: f64, range: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("quantization level must be positive, got {delta}")));
        }
        if !(range > delta && range.is_finite()) {
            return Err(Error::InvalidArgument(format!("range {range} must exceed the level {delta}")));
        }
        Ok(UniformQuantizer { delta, range })
    }

    /// Nearest grid center per component; ties go toward −∞.
    pub fn quantize(&self, xi: &Vector) -> Vector {
        let w = 2.0 * self.delta;
        xi.map(|t| w * (t / w - 0.5).ceil())
    }

    /// `μ·q(ξ/μ)`
    pub fn quantize_zoomed(&self, mu: f64, xi: &Vector) -> Vector {
        self.quantize(&(xi / mu)) * mu
    }

    /// Outside the range `|ξ| ≤ μM` the error bound no longer holds.
    pub fn saturates(&self, mu: f64, xi: &Vector) -> bool {
        euclid(xi) > mu * self.range
    }

    /// Quantization region containing the transmitted value `q` at zoom `μ`.
    pub fn region(&self, mu: f64, q: &Vector) -> HPolytope {
        HPolytope::box_around(q, mu * self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomState {
    pub mu: f64,
    pub level: u32,
}

impl ZoomState {
    pub fn new(mu0: f64) -> Result<Self> {
        if !(mu0 > 0.0) {
            return Err(Error::InvalidArgument("initial zoom must be positive".into()));
        }
        Ok(ZoomState { mu: mu0, level: 0 })
    }

    pub fn zoom(&mut self, omega: f64) {
        self.mu *= omega;
        self.level += 1;
    }
}

impl Default for ZoomState {
    fn default() -> Self {
        ZoomState { mu: 1.0, level: 0 }
    }
}

/// Admissible inputs `{u : Ru ≤ r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPolytope {
    pub set: HPolytope,
}

impl InputPolytope {
    pub fn new(r_mat: Mat, r: Vector, opts: &LpOptions) -> Result<Self> {
        let set = HPolytope::new(r_mat, r)?;
        if set.is_empty(opts)? {
            return Err(Error::InvalidModel("input polytope is empty".into()));
        }
        Ok(InputPolytope { set })
    }

    pub fn unconstrained(m: usize) -> Self {
        InputPolytope { set: HPolytope::whole_space(m) }
    }
}
