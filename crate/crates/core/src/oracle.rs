//! Brute-force reference implementations for tests and diagnostics.
//!
//! Nothing here shares numerical kernels with the main path: element matrices come
//! from closed-form expressions, systems are solved densely, and sorting replaces
//! selection.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TopOptError};
use crate::grid::Grid;
use crate::optimizer::ConstraintMode;

/// Dense solves refuse larger systems.
pub const DENSE_MAX_DOFS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub value: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, value: f64, oracle: f64, tol: f64) -> Self {
        let abs_err = (value - oracle).abs();
        let rel_err = abs_err / oracle.abs().max(1e-30);
        Self { quantity: quantity.into(), value, oracle, abs_err, rel_err, tol, pass: rel_err <= tol }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: value {:.12e}, oracle {:.12e}, rel err {:.3e} (tol {:.1e})",
            if self.pass { "ok  " } else { "FAIL" },
            self.quantity,
            self.value,
            self.oracle,
            self.rel_err,
            self.tol
        )
    }
}

/// Central difference `(f(x + t d) - f(x - t d)) / 2t`.
pub fn fd_gradient<F>(mut f: F, chi: &[f64], direction: &[f64], t: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let plus: Vec<f64> = chi.iter().zip(direction).map(|(c, d)| c + t * d).collect();
    let minus: Vec<f64> = chi.iter().zip(direction).map(|(c, d)| c - t * d).collect();
    Ok((f(&plus)? - f(&minus)?) / (2.0 * t))
}

/// Directly built 2D Gaussian weights (no separability) on `[-r, r]^2` cells,
/// normalized to sum 1.
fn gaussian_2d(h: f64, eps: f64) -> (isize, Vec<f64>) {
    let r = (4.0 * eps / h + 1e-9).floor() as isize;
    let mut w = Vec::new();
    for dj in -r..=r {
        for di in -r..=r {
            let d2 = ((di * di + dj * dj) as f64) * h * h;
            w.push((-d2 / (2.0 * eps * eps)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (r, w)
}

/// Returns the domain pair sum `1/2 sum_{x,y in domain} w |chi_x - chi_y|` and the
/// weight each cell sends outside the domain, times its value.
fn pair_sums(grid: &Grid<f64>, chi: &[f64], eps: f64) -> (f64, f64) {
    let (r, w) = gaussian_2d(grid.h(), eps);
    let side = (2 * r + 1) as usize;
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let mut inside = 0.0;
    let mut outside = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let a = chi[(j * nx + i) as usize];
            for dj in -r..=r {
                for di in -r..=r {
                    let wt = w[((dj + r) as usize) * side + (di + r) as usize];
                    let (x, y) = (i + di, j + dj);
                    if x < 0 || y < 0 || x >= nx || y >= ny {
                        outside += wt * a;
                        continue;
                    }
                    inside += 0.5 * wt * (a - chi[(y * nx + x) as usize]).abs();
                }
            }
        }
    }
    (inside, outside)
}

/// `1/2 sum_{x,y in domain} G(x - y) |chi_x - chi_y| h^4` with 2D Gaussian weights
/// built directly (no separability), truncated at `4 eps` per axis.
pub fn perimeter_double_sum(grid: &Grid<f64>, chi: &[f64], eps: f64) -> f64 {
    // G_eps h^2 is the normalized discrete weight
    pair_sums(grid, chi, eps).0 * grid.h() * grid.h()
}

/// The nonlocal perimeter in its defining pairwise form over the whole plane, with
/// the design extended by zero: `1/2 sum_{x,y} G(x - y) |chi_x - chi_y| h^4`.
/// Convex in `chi`; equals `h^2 (sum chi - sum (G * chi) chi)` on binary fields.
pub fn perimeter_zero_extended(grid: &Grid<f64>, chi: &[f64], eps: f64) -> f64 {
    let (inside, outside) = pair_sums(grid, chi, eps);
    (inside + outside) * grid.h() * grid.h()
}

/// Threshold projection by full sort.
pub fn projection_bruteforce(chi_bar: &[f64], beta: f64, mode: ConstraintMode) -> Vec<f64> {
    let n = chi_bar.len();
    let k = ((beta * n as f64) * (1.0 + 1e-12)).floor() as usize;
    let k = k.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| chi_bar[b].partial_cmp(&chi_bar[a]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    match mode {
        ConstraintMode::Equality => {
            for &i in &idx[..k] {
                out[i] = 1.0;
            }
        }
        ConstraintMode::Inequality => {
            // smallest c with #{chi > c} <= k is the (k+1)-th largest value
            if k >= n {
                out.iter_mut().for_each(|o| *o = 1.0);
            } else {
                let c = chi_bar[idx[k]];
                for (o, &v) in out.iter_mut().zip(chi_bar) {
                    if v > c {
                        *o = 1.0;
                    }
                }
            }
        }
    }
    out
}

/// Closed-form unit-modulus plane-stress Q1 stiffness (dofs `(ux, uy)` per corner,
/// corners counterclockwise from bottom-left).
pub fn closed_form_elastic_ke(nu: f64) -> DMatrix<f64> {
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    let idx = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let f = 1.0 / (1.0 - nu * nu);
    DMatrix::from_fn(8, 8, |i, j| f * k[idx[i][j]])
}

/// Closed-form Q1 Laplace stiffness.
pub fn closed_form_scalar_ke() -> DMatrix<f64> {
    let s = [[4.0, -1.0, -2.0, -1.0], [-1.0, 4.0, -1.0, -2.0], [-2.0, -1.0, 4.0, -1.0], [-1.0, -2.0, -1.0, 4.0]];
    DMatrix::from_fn(4, 4, |i, j| s[i][j] / 6.0)
}

/// Dense global matrix `sum_e coeff_e K_e`.
pub fn dense_assemble(grid: &Grid<f64>, coeff: &[f64], ke: &DMatrix<f64>) -> DMatrix<f64> {
    let dpn = ke.nrows() / 4;
    let (nx, ny) = (grid.nx(), grid.ny());
    let n = (nx + 1) * (ny + 1) * dpn;
    let mut k = DMatrix::zeros(n, n);
    for j in 0..ny {
        for i in 0..nx {
            let e = j * nx + i;
            let corners = [
                j * (nx + 1) + i,
                j * (nx + 1) + i + 1,
                (j + 1) * (nx + 1) + i + 1,
                (j + 1) * (nx + 1) + i,
            ];
            let dofs: Vec<usize> = corners.iter().flat_map(|&c| (0..dpn).map(move |d| c * dpn + d)).collect();
            for a in 0..4 * dpn {
                for b in 0..4 * dpn {
                    k[(dofs[a], dofs[b])] += coeff[e] * ke[(a, b)];
                }
            }
        }
    }
    k
}

/// Dense Cholesky solve with Dirichlet elimination.
pub fn dense_solve(k: &DMatrix<f64>, rhs: &[f64], dirichlet: &[(usize, f64)]) -> Result<Vec<f64>> {
    let n = k.nrows();
    if n > DENSE_MAX_DOFS {
        return Err(TopOptError::Usage(format!("dense oracle limited to {DENSE_MAX_DOFS} dofs, got {n}")));
    }
    let mut fixed = vec![None; n];
    for &(d, v) in dirichlet {
        fixed[d] = Some(v);
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let m = free.len();
    let kff = DMatrix::from_fn(m, m, |a, b| k[(free[a], free[b])]);
    let b = DVector::from_fn(m, |a, _| {
        let i = free[a];
        let lift: f64 = (0..n).filter_map(|c| fixed[c].map(|v| k[(i, c)] * v)).sum();
        rhs[i] - lift
    });
    let diag: Vec<f64> = (0..m).map(|i| kff[(i, i)]).collect();
    let chol = kff
        .cholesky()
        .ok_or_else(|| TopOptError::Singular("dense oracle: matrix is not positive definite".into()))?;
    let l = chol.l_dirty();
    for i in 0..m {
        if l[(i, i)] * l[(i, i)] < 1e-12 * diag[i].abs() {
            return Err(TopOptError::Singular(format!("dense oracle: vanishing pivot at row {i}")));
        }
    }
    let xf = chol.solve(&b);
    let mut x = vec![0.0; n];
    for (i, v) in fixed.iter().enumerate() {
        if let Some(v) = v {
            x[i] = *v;
        }
    }
    for (a, &i) in free.iter().enumerate() {
        x[i] = xf[a];
    }
    Ok(x)
}
