use crate::error::{Result, TopOptError};
use crate::grid::{FieldKind, Grid};
use crate::scalar::Scalar;

use super::element::{element_stiffness_elastic, element_stiffness_scalar};

/// Symmetric sparse matrix stored as full CSR (both triangles), columns sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseSymMatrix<T> {
    /// Builds from a sorted pattern and matching values.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if row_ptr.len() != n + 1 || col_idx.len() != values.len() || row_ptr[n] != values.len() {
            return Err(TopOptError::Assembly("inconsistent CSR arrays".into()));
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub(crate) fn values(&self) -> &[T] {
        &self.values
    }
    pub(crate) fn row_start(&self, i: usize) -> usize {
        self.row_ptr[i]
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(i);
            let mut s = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Bilinear form `x^T A y`.
    pub fn form(&self, x: &[T], y: &[T]) -> T {
        let ay = self.mul(y);
        x.iter().zip(&ay).map(|(&a, &b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(T::one()))
        })
    }

    pub fn scale(&mut self, a: T) {
        for v in &mut self.values {
            *v *= a;
        }
    }
}

/// Grid, dof layout, matrix pattern and unit element matrix for one field type.
/// Assembly reuses the precomputed scatter slots.
#[derive(Debug, Clone)]
pub struct FemSpace<T> {
    grid: Grid<T>,
    field: FieldKind,
    ke: Vec<T>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    slots: Vec<usize>,
}

impl<T: Scalar> FemSpace<T> {
    pub fn elastic(grid: &Grid<T>, nu: T) -> Self {
        Self::with_element_matrix(grid, FieldKind::Vector, element_stiffness_elastic(nu, grid.h()))
    }

    pub fn scalar(grid: &Grid<T>) -> Self {
        Self::with_element_matrix(grid, FieldKind::Scalar, element_stiffness_scalar(grid.h()))
    }

    pub fn with_element_matrix(grid: &Grid<T>, field: FieldKind, ke: Vec<T>) -> Self {
        let dpn = field.dofs_per_node();
        let nd = 4 * dpn;
        assert_eq!(ke.len(), nd * nd, "element matrix size does not match field");
        let (nx, ny) = (grid.nx(), grid.ny());
        let ndof = grid.n_nodes() * dpn;
        let mut row_ptr = Vec::with_capacity(ndof + 1);
        let mut col_idx = Vec::with_capacity(ndof * 9 * dpn);
        row_ptr.push(0);
        for n in 0..grid.n_nodes() {
            let (i, j) = grid.node_ij(n);
            for _c in 0..dpn {
                for jj in j.saturating_sub(1)..=(j + 1).min(ny) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(nx) {
                        let m = grid.node(ii, jj);
                        for c2 in 0..dpn {
                            col_idx.push(m * dpn + c2);
                        }
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let mut slots = Vec::with_capacity(grid.n_elems() * nd * nd);
        for e in 0..grid.n_elems() {
            let dofs = elem_dofs(grid, e, dpn);
            for &ga in &dofs[..nd] {
                let cols = &col_idx[row_ptr[ga]..row_ptr[ga + 1]];
                for &gb in &dofs[..nd] {
                    let k = cols.binary_search(&gb).expect("pattern covers element couplings");
                    slots.push(row_ptr[ga] + k);
                }
            }
        }
        Self { grid: grid.clone(), field, ke, row_ptr, col_idx, slots }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn field(&self) -> FieldKind {
        self.field
    }
    pub fn dofs_per_node(&self) -> usize {
        self.field.dofs_per_node()
    }
    pub fn n_dofs(&self) -> usize {
        self.grid.n_nodes() * self.dofs_per_node()
    }
    pub fn element_matrix(&self) -> &[T] {
        &self.ke
    }
    pub fn elem_dofs(&self, e: usize) -> [usize; 8] {
        elem_dofs(&self.grid, e, self.dofs_per_node())
    }

    /// Gathers the element's local dof values.
    pub fn gather(&self, x: &[T], e: usize) -> [T; 8] {
        let d = self.elem_dofs(e);
        let mut out = [T::zero(); 8];
        for k in 0..4 * self.dofs_per_node() {
            out[k] = x[d[k]];
        }
        out
    }

    /// Element bilinear form `x_e^T K_e y_e` with the unit element matrix.
    pub fn element_form(&self, x: &[T], y: &[T], e: usize) -> T {
        let nd = 4 * self.dofs_per_node();
        let xe = self.gather(x, e);
        let ye = self.gather(y, e);
        let mut s = T::zero();
        for a in 0..nd {
            let mut r = T::zero();
            for b in 0..nd {
                r += self.ke[a * nd + b] * ye[b];
            }
            s += xe[a] * r;
        }
        s
    }

    /// Global matrix `sum_e coeff_e K_e`.
    pub fn assemble(&self, coeff: &[T]) -> Result<SparseSymMatrix<T>> {
        if coeff.len() != self.grid.n_elems() {
            return Err(TopOptError::Assembly(format!(
                "coefficient field has {} values, grid has {} elements",
                coeff.len(),
                self.grid.n_elems()
            )));
        }
        if let Some((e, c)) = coeff.iter().enumerate().find(|(_, &c)| !(c > T::zero() && c.is_finite())) {
            return Err(TopOptError::Assembly(format!("nonpositive coefficient {c} at element {e}")));
        }
        let nd2 = self.ke.len();
        let mut values = vec![T::zero(); self.col_idx.len()];
        for (e, &c) in coeff.iter().enumerate() {
            let slots = &self.slots[e * nd2..(e + 1) * nd2];
            for (&s, &k) in slots.iter().zip(&self.ke) {
                values[s] += c * k;
            }
        }
        SparseSymMatrix::from_csr(self.n_dofs(), self.row_ptr.clone(), self.col_idx.clone(), values)
    }
}

fn elem_dofs<T: Scalar>(grid: &Grid<T>, e: usize, dpn: usize) -> [usize; 8] {
    let nodes = grid.elem_nodes(e);
    let mut d = [0usize; 8];
    for (a, &n) in nodes.iter().enumerate() {
        for c in 0..dpn {
            d[a * dpn + c] = n * dpn + c;
        }
    }
    d
}

/// Assembles `sum_e coeff_e K_e` for an arbitrary unit element matrix.
pub fn assemble<T: Scalar>(
    grid: &Grid<T>,
    field: FieldKind,
    coeff: &[T],
    element_matrix: &[T],
) -> Result<SparseSymMatrix<T>> {
    let nd = 4 * field.dofs_per_node();
    if element_matrix.len() != nd * nd {
        return Err(TopOptError::Assembly("element matrix size does not match field".into()));
    }
    FemSpace::with_element_matrix(grid, field, element_matrix.to_vec()).assemble(coeff)
}
