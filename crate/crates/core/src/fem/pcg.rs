//! Jacobi-preconditioned conjugate gradients on the free dofs.

use crate::error::{Result, TopOptError};
use crate::scalar::{dot, norm2, Scalar};

use super::sparse::SparseSymMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgSettings {
    pub rel_tol: f64,
    /// Iteration cap as a multiple of `sqrt(free dofs)`.
    pub max_iter_factor: f64,
}

impl Default for PcgSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_iter_factor: 50.0 }
    }
}

/// Solves `A x = b` restricted to dofs with `free[i] == true`; other entries of `x`
/// are left untouched and must already hold their final values with `b` lifted.
pub fn pcg<T: Scalar>(
    a: &SparseSymMatrix<T>,
    b: &[T],
    free: &[bool],
    x: &mut [T],
    settings: PcgSettings,
) -> Result<usize> {
    let n = a.dim();
    let n_free = free.iter().filter(|&&f| f).count();
    let max_iter = (settings.max_iter_factor * (n_free as f64).sqrt()).ceil().max(10.0) as usize;
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .zip(free)
        .map(|(d, &f)| if f { d.recip() } else { T::zero() })
        .collect();
    let mask = |v: &mut [T]| {
        for (vi, &f) in v.iter_mut().zip(free) {
            if !f {
                *vi = T::zero();
            }
        }
    };
    let mut xf: Vec<T> = x.iter().zip(free).map(|(&v, &f)| if f { v } else { T::zero() }).collect();
    let mut r = vec![T::zero(); n];
    a.matvec(&xf, &mut r);
    for i in 0..n {
        r[i] = if free[i] { b[i] - r[i] } else { T::zero() };
    }
    let mut bf = b.to_vec();
    mask(&mut bf);
    let bnorm = norm2(&bf);
    if bnorm == T::zero() {
        for i in 0..n {
            if free[i] {
                x[i] = T::zero();
            }
        }
        return Ok(0);
    }
    let tol = T::lit(settings.rel_tol) * bnorm;
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut it = 0;
    while norm2(&r) > tol {
        if it >= max_iter {
            return Err(TopOptError::NoConvergence {
                iterations: it,
                residual: (norm2(&r) / bnorm).to_f64_lossy(),
            });
        }
        a.matvec(&p, &mut ap);
        mask(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(TopOptError::Singular(format!(
                "conjugate gradients broke down at iteration {it} (p^T A p = {pap})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            xf[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    for i in 0..n {
        if free[i] {
            x[i] = xf[i];
        }
    }
    Ok(it)
}
