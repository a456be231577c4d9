//! Discrete Gaussian smoothing and the nonlocal perimeter built on it.

use crate::error::{Result, TopOptError};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Truncation radius of the kernel in units of its smoothing length.
pub const TRUNCATION: f64 = 4.0;

/// Separable Gaussian kernel sampled at cell centres, truncated at `4 eps` and
/// normalized so the 2D weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    eps: T,
    h: T,
    radius: usize,
    weights: Vec<T>,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(eps: T, h: T) -> Result<Self> {
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(TopOptError::Config(format!("smoothing length must be positive, got {eps}")));
        }
        if !(h > T::zero() && h.is_finite()) {
            return Err(TopOptError::Config(format!("cell size must be positive, got {h}")));
        }
        let r_cells = (T::lit(TRUNCATION) * eps / h + T::lit(1e-9)).floor();
        let radius = r_cells.to_usize().ok_or_else(|| TopOptError::Config("kernel radius overflow".into()))?;
        let two = T::lit(2.0);
        let mut weights: Vec<T> = (0..=2 * radius)
            .map(|k| {
                let d = (T::from_usize_lossy(k) - T::from_usize_lossy(radius)) * h;
                (-(d * d) / (two * eps * eps)).exp()
            })
            .collect();
        let total: T = weights.iter().copied().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { eps, h, radius, weights })
    }

    pub fn for_grid(grid: &Grid<T>, eps: T) -> Result<Self> {
        Self::new(eps, grid.h())
    }

    pub fn eps(&self) -> T {
        self.eps
    }
    pub fn h(&self) -> T {
        self.h
    }
    /// Truncation radius in cells.
    pub fn radius(&self) -> usize {
        self.radius
    }
    pub fn truncation_radius(&self) -> T {
        T::lit(TRUNCATION) * self.eps
    }
    /// Normalized 1D weights for offsets `-radius..=radius`.
    pub fn weights_1d(&self) -> &[T] {
        &self.weights
    }

    /// 2D weight for a cell offset.
    #[inline]
    pub fn weight(&self, di: isize, dj: isize) -> T {
        let r = self.radius as isize;
        if di.abs() > r || dj.abs() > r {
            return T::zero();
        }
        self.weights[(di + r) as usize] * self.weights[(dj + r) as usize]
    }

    pub fn center_weight(&self) -> T {
        self.weight(0, 0)
    }
}

fn check_len<T>(grid: &Grid<T>, len: usize) -> Result<()>
where
    T: Scalar,
{
    if len != grid.n_elems() {
        return Err(TopOptError::Usage(format!(
            "field has {len} values but the grid has {} elements",
            grid.n_elems()
        )));
    }
    Ok(())
}

/// Zero-extended convolution `G_eps * field` by two 1D passes.
pub fn convolve<T: Scalar>(grid: &Grid<T>, field: &[T], k: &KernelSpec<T>) -> Result<Vec<T>> {
    check_len(grid, field.len())?;
    Ok(convolve_unchecked(grid.nx(), grid.ny(), field, k))
}

pub(crate) fn convolve_unchecked<T: Scalar>(nx: usize, ny: usize, field: &[T], k: &KernelSpec<T>) -> Vec<T> {
    let r = k.radius;
    let w = &k.weights;
    let mut tmp = vec![T::zero(); nx * ny];
    for j in 0..ny {
        let row = &field[j * nx..(j + 1) * nx];
        let out = &mut tmp[j * nx..(j + 1) * nx];
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(nx - 1);
            let mut s = T::zero();
            for (src, &x) in row.iter().enumerate().take(hi + 1).skip(lo) {
                s += w[src + r - i] * x;
            }
            *o = s;
        }
    }
    let mut out = vec![T::zero(); nx * ny];
    for j in 0..ny {
        let lo = j.saturating_sub(r);
        let hi = (j + r).min(ny - 1);
        for src in lo..=hi {
            let wk = w[src + r - j];
            let from = &tmp[src * nx..(src + 1) * nx];
            let to = &mut out[j * nx..(j + 1) * nx];
            for (o, &x) in to.iter_mut().zip(from) {
                *o += wk * x;
            }
        }
    }
    out
}

/// Nonlocal perimeter `h^2 (sum chi - sum (G*chi) chi)` with zero extension
/// outside the domain. On binary fields this equals the pairwise form
/// `h^2 [1/2 sum_xy w |chi_x - chi_y| + sum_x chi_x (1 - (G*1)_x)]`.
pub fn perimeter_value<T: Scalar>(grid: &Grid<T>, chi: &[T], k: &KernelSpec<T>) -> Result<T> {
    check_len(grid, chi.len())?;
    if chi.iter().any(|&c| !(c >= T::zero() && c <= T::one())) {
        return Err(TopOptError::Domain("perimeter needs design values in [0, 1]".into()));
    }
    let g = convolve_unchecked(grid.nx(), grid.ny(), chi, k);
    let mut s = T::zero();
    for (&c, &gc) in chi.iter().zip(&g) {
        s += c - gc * c;
    }
    Ok((s * grid.cell_area()).max(T::zero()))
}

/// Subgradient field `chi - G*chi` (per unit area).
pub fn perimeter_subgrad<T: Scalar>(grid: &Grid<T>, chi: &[T], k: &KernelSpec<T>) -> Result<Vec<T>> {
    let g = convolve(grid, chi, k)?;
    Ok(chi.iter().zip(&g).map(|(&c, &gc)| c - gc).collect())
}

/// Gamma-limit constant `2 / int G_1(x) |x_2| dx` for the unit Gaussian truncated
/// at `truncation` (in units of the smoothing length), by composite Simpson.
pub fn c_g_constant(truncation: f64) -> f64 {
    const N: usize = 4000;
    let step = truncation / N as f64;
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut s = f(0.0) + f(truncation);
        for i in 1..N {
            let t = i as f64 * step;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        s * step / 3.0
    };
    let phi = |t: f64| (-0.5 * t * t).exp();
    // even integrands: the ratio over [-r, r] equals the ratio over [0, r]
    let first_moment = simpson(&|t| t * phi(t));
    let mass = simpson(&phi);
    2.0 / (first_moment / mass)
}

impl<T: Scalar> KernelSpec<T> {
    pub fn c_g(&self) -> f64 {
        c_g_constant(TRUNCATION)
    }
}
