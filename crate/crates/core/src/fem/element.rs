//! Q1 element matrices by 2x2 Gauss quadrature.

use crate::scalar::Scalar;

/// Reference-square corner coordinates in counterclockwise order.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

pub(crate) fn gauss_points<T: Scalar>() -> [(T, T); 4] {
    let g = T::lit(1.0 / 3f64.sqrt());
    [(-g, -g), (g, -g), (g, g), (-g, g)]
}

/// Physical shape-function gradients `[dN/dx; dN/dy]` at a reference point.
pub(crate) fn shape_gradients<T: Scalar>(xi: T, eta: T, h: T) -> [[T; 4]; 2] {
    let quarter = T::lit(0.25);
    let scale = T::lit(2.0) / h;
    let mut g = [[T::zero(); 4]; 2];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        let (xa, ya) = (T::lit(xa), T::lit(ya));
        g[0][a] = quarter * xa * (T::one() + ya * eta) * scale;
        g[1][a] = quarter * ya * (T::one() + xa * xi) * scale;
    }
    g
}

/// Strain-displacement matrix (Voigt, engineering shear) at a reference point.
pub(crate) fn strain_matrix<T: Scalar>(xi: T, eta: T, h: T) -> [[T; 8]; 3] {
    let g = shape_gradients(xi, eta, h);
    let mut b = [[T::zero(); 8]; 3];
    for a in 0..4 {
        b[0][2 * a] = g[0][a];
        b[1][2 * a + 1] = g[1][a];
        b[2][2 * a] = g[1][a];
        b[2][2 * a + 1] = g[0][a];
    }
    b
}

/// Plane-stress elasticity matrix with unit Young's modulus.
pub fn plane_stress<T: Scalar>(nu: T) -> [[T; 3]; 3] {
    let f = (T::one() - nu * nu).recip();
    [
        [f, f * nu, T::zero()],
        [f * nu, f, T::zero()],
        [T::zero(), T::zero(), f * (T::one() - nu) * T::lit(0.5)],
    ]
}

/// Inverse of [`plane_stress`], acting on stresses to give engineering strains.
pub fn plane_stress_inverse<T: Scalar>(nu: T) -> [[T; 3]; 3] {
    [
        [T::one(), -nu, T::zero()],
        [-nu, T::one(), T::zero()],
        [T::zero(), T::zero(), T::lit(2.0) * (T::one() + nu)],
    ]
}

/// 8x8 unit-modulus plane-stress stiffness, row-major. Dofs are `(ux, uy)` per
/// corner in counterclockwise order.
pub fn element_stiffness_elastic<T: Scalar>(nu: T, h: T) -> Vec<T> {
    let d = plane_stress(nu);
    let det = h * h * T::lit(0.25);
    let mut k = vec![T::zero(); 64];
    for (xi, eta) in gauss_points::<T>() {
        let b = strain_matrix(xi, eta, h);
        let mut db = [[T::zero(); 8]; 3];
        for r in 0..3 {
            for c in 0..8 {
                db[r][c] = (0..3).map(|s| d[r][s] * b[s][c]).sum();
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                let v: T = (0..3).map(|r| b[r][i] * db[r][j]).sum();
                k[i * 8 + j] += v * det;
            }
        }
    }
    symmetrize(&mut k, 8);
    k
}

/// 4x4 Laplace stiffness for unit conductivity, row-major.
pub fn element_stiffness_scalar<T: Scalar>(h: T) -> Vec<T> {
    let det = h * h * T::lit(0.25);
    let mut k = vec![T::zero(); 16];
    for (xi, eta) in gauss_points::<T>() {
        let g = shape_gradients(xi, eta, h);
        for i in 0..4 {
            for j in 0..4 {
                k[i * 4 + j] += (g[0][i] * g[0][j] + g[1][i] * g[1][j]) * det;
            }
        }
    }
    symmetrize(&mut k, 4);
    k
}

fn symmetrize<T: Scalar>(k: &mut [T], n: usize) {
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let m = (k[i * n + j] + k[j * n + i]) * half;
            k[i * n + j] = m;
            k[j * n + i] = m;
        }
    }
}
