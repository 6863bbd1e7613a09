//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // method resolution differs once std is linked
use num_traits::Float;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    if m.nrows() == 0 {
        return Vector::zeros(0);
    }
    let mut ev = symmetrize(m).symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    ev
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral norm (largest singular value), via the eigenvalues of `MᵀM`.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() < m.ncols() { m * m.transpose() } else { m.transpose() * m };
    max_eigenvalue(&gram).max(0.0).sqrt()
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn euclid(v: &Vector) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `t ∈ [0, ∞]` with `X + t·dX ⪰ 0`, assuming `X ≻ 0`.
pub fn max_psd_step(x: &Mat, dx: &Mat) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let w = &linv * dx * linv.transpose();
    let lam = min_eigenvalue(&w);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

/// Identity of size `n`.
pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}
