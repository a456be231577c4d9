use std::fmt;
use std::sync::Arc;

use faer::prelude::SpSolver;
use faer::sparse::linalg::solvers::{Cholesky, SymbolicCholesky};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TopOptError};
use crate::scalar::{norm2, Scalar};

use super::pcg::{pcg, PcgSettings};
use super::sparse::SparseSymMatrix;

/// Relative residual above which a direct solve is reported as singular.
const DIRECT_RESIDUAL_TOL: f64 = 1e-3;

/// Free dofs above which `Auto` switches to conjugate gradients.
const AUTO_DIRECT_MAX_DOFS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Sparse Cholesky unless the system is very large.
    #[default]
    Auto,
    Direct,
    Pcg,
}

/// Symbolic Cholesky analysis (fill-reducing ordering and elimination tree) of
/// the free-dof block. Valid for every matrix with the same pattern and the same
/// constrained dofs.
pub struct FactorPlan {
    n: usize,
    free: Vec<usize>,
    free_mask: Vec<bool>,
    /// CSR value index of each stored lower-triangle entry, column by column.
    src: Vec<usize>,
    pattern: SymbolicSparseColMat<usize>,
    analysis: SymbolicCholesky<usize>,
}

impl fmt::Debug for FactorPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorPlan").field("n", &self.n).field("n_free", &self.free.len()).field("nnz", &self.src.len()).finish()
    }
}

impl FactorPlan {
    pub fn new<T: Scalar>(matrix: &SparseSymMatrix<T>, constrained: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = matrix.dim();
        let mut free_mask = vec![true; n];
        for d in constrained {
            if d >= n {
                return Err(TopOptError::Usage(format!("constrained dof {d} out of range")));
            }
            free_mask[d] = false;
        }
        let free: Vec<usize> = (0..n).filter(|&d| free_mask[d]).collect();
        let mut pos = vec![usize::MAX; n];
        for (p, &d) in free.iter().enumerate() {
            pos[d] = p;
        }
        let mut col_ptr = Vec::with_capacity(free.len() + 1);
        let mut rows = Vec::new();
        let mut src = Vec::new();
        col_ptr.push(0);
        for (p, &d) in free.iter().enumerate() {
            // symmetric storage: row d of the CSR is column d
            let start = matrix.row_start(d);
            let (cols, _) = matrix.row(d);
            for (k, &c) in cols.iter().enumerate() {
                let q = pos[c];
                if q != usize::MAX && q >= p {
                    rows.push(q);
                    src.push(start + k);
                }
            }
            col_ptr.push(rows.len());
        }
        let m = free.len();
        let pattern = SymbolicSparseColMat::new_checked(m, m, col_ptr, None, rows);
        let analysis = SymbolicCholesky::try_new(pattern.as_ref(), Side::Lower)
            .map_err(|e| TopOptError::Assembly(format!("symbolic factorization failed: {e:?}")))?;
        Ok(Self { n, free, free_mask, src, pattern, analysis })
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }
}

enum Method {
    Direct(Cholesky<usize, f64>),
    Pcg(PcgSettings),
}

/// A matrix with Dirichlet dofs eliminated, factored once and reusable for many
/// right-hand sides.
pub struct PreparedSystem<T> {
    matrix: SparseSymMatrix<T>,
    dirichlet: Vec<(usize, T)>,
    plan: Arc<FactorPlan>,
    method: Method,
}

impl<T: Scalar> PreparedSystem<T> {
    pub fn new(matrix: SparseSymMatrix<T>, dirichlet: &[(usize, T)], kind: SolverKind) -> Result<Self> {
        let plan = Arc::new(FactorPlan::new(&matrix, dirichlet.iter().map(|&(d, _)| d))?);
        Self::with_plan(matrix, dirichlet, plan, kind)
    }

    /// Reuses a symbolic analysis built for the same pattern and constrained dofs.
    pub fn with_plan(
        matrix: SparseSymMatrix<T>,
        dirichlet: &[(usize, T)],
        plan: Arc<FactorPlan>,
        kind: SolverKind,
    ) -> Result<Self> {
        let mut seen = vec![false; plan.n];
        let mut distinct = 0;
        for &(d, _) in dirichlet {
            if d < plan.n && !seen[d] {
                seen[d] = true;
                distinct += 1;
            }
        }
        if plan.n != matrix.dim()
            || distinct != plan.n - plan.n_free()
            || dirichlet.iter().any(|&(d, _)| d >= plan.n || plan.free_mask[d])
        {
            return Err(TopOptError::Usage("factor plan does not match the system".into()));
        }
        let use_pcg = match kind {
            SolverKind::Pcg => true,
            SolverKind::Direct => false,
            SolverKind::Auto => plan.n_free() > AUTO_DIRECT_MAX_DOFS,
        };
        let method = if use_pcg {
            Method::Pcg(PcgSettings::default())
        } else {
            let all = matrix.values();
            let vals: Vec<f64> = plan.src.iter().map(|&k| all[k].to_f64_lossy()).collect();
            let a = SparseColMatRef::<usize, f64>::new(plan.pattern.as_ref(), &vals);
            let chol = Cholesky::try_new_with_symbolic(plan.analysis.clone(), a, Side::Lower).map_err(|_| {
                TopOptError::Singular("stiffness matrix is not positive definite on the free dofs".into())
            })?;
            Method::Direct(chol)
        };
        Ok(Self { matrix, dirichlet: dirichlet.to_vec(), plan, method })
    }

    pub fn matrix(&self) -> &SparseSymMatrix<T> {
        &self.matrix
    }

    pub fn n_free(&self) -> usize {
        self.plan.n_free()
    }

    /// Solves with prescribed Dirichlet values; returns the full nodal vector.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.matrix.dim();
        if rhs.len() != n {
            return Err(TopOptError::Usage("right-hand side length mismatch".into()));
        }
        let mut x = vec![T::zero(); n];
        for &(d, v) in &self.dirichlet {
            x[d] = v;
        }
        // lifting: b_f = f_f - K_fc g
        let mut lifted = rhs.to_vec();
        if self.dirichlet.iter().any(|&(_, v)| v != T::zero()) {
            let kg = self.matrix.mul(&x);
            for &d in &self.plan.free {
                lifted[d] -= kg[d];
            }
        }
        match &self.method {
            Method::Direct(chol) => {
                let free = &self.plan.free;
                let mut b = Mat::<f64>::from_fn(free.len(), 1, |p, _| lifted[free[p]].to_f64_lossy());
                chol.solve_in_place(b.as_mut());
                for (p, &d) in free.iter().enumerate() {
                    let v = b.read(p, 0);
                    if !v.is_finite() {
                        return Err(TopOptError::Singular("direct solve produced a non-finite value".into()));
                    }
                    x[d] = T::lit(v);
                }
                // an unconstrained null space factors silently; catch it here
                let res = self.relative_residual(&x, rhs).to_f64_lossy();
                if !(res <= DIRECT_RESIDUAL_TOL) {
                    return Err(TopOptError::Singular(format!("direct solve residual {res:e} too large")));
                }
            }
            Method::Pcg(settings) => {
                pcg(&self.matrix, &lifted, &self.plan.free_mask, &mut x, *settings)?;
            }
        }
        Ok(x)
    }

    /// `||A x - b|| / ||b||` over the free dofs.
    pub fn relative_residual(&self, x: &[T], rhs: &[T]) -> T {
        let ax = self.matrix.mul(x);
        let mut r = Vec::with_capacity(self.n_free());
        let mut b = Vec::with_capacity(self.n_free());
        for &d in &self.plan.free {
            r.push(ax[d] - rhs[d]);
            b.push(rhs[d]);
        }
        let bn = norm2(&b);
        if bn == T::zero() {
            norm2(&r)
        } else {
            norm2(&r) / bn
        }
    }
}

/// One-shot solve.
pub fn solve_linear<T: Scalar>(
    a: &SparseSymMatrix<T>,
    b: &[T],
    constraints: &[(usize, T)],
    kind: SolverKind,
) -> Result<Vec<T>> {
    PreparedSystem::new(a.clone(), constraints, kind)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FemSpace;
    use crate::grid::Grid;

    fn laplacian(n: usize) -> SparseSymMatrix<f64> {
        let g = Grid::<f64>::unit(n, n).unwrap();
        FemSpace::scalar(&g).assemble(&vec![1.0; n * n]).unwrap()
    }

    #[test]
    fn lifting_reproduces_linear_field() {
        // T = x is harmonic; prescribe it on the left and right edges
        let n = 6;
        let g = Grid::<f64>::unit(n, n).unwrap();
        let k = laplacian(n);
        let mut bc = Vec::new();
        for j in 0..=n {
            bc.push((g.node(0, j), 0.0));
            bc.push((g.node(n, j), 1.0));
        }
        for kind in [SolverKind::Direct, SolverKind::Pcg] {
            let x = solve_linear(&k, &vec![0.0; k.dim()], &bc, kind).unwrap();
            for node in 0..g.n_nodes() {
                assert!((x[node] - g.node_coords(node)[0]).abs() < 1e-9, "{kind:?}");
            }
        }
    }

    #[test]
    fn plan_is_reusable_across_coefficients() {
        let n = 5;
        let g = Grid::<f64>::unit(n, n).unwrap();
        let space = FemSpace::scalar(&g);
        let bc: Vec<(usize, f64)> = (0..=n).map(|j| (g.node(0, j), 0.0)).collect();
        let k1 = space.assemble(&vec![1.0; n * n]).unwrap();
        let plan = Arc::new(FactorPlan::new(&k1, bc.iter().map(|b| b.0)).unwrap());
        let f = vec![1.0; g.n_nodes()];
        let coeff: Vec<f64> = (0..n * n).map(|e| 1.0 + e as f64).collect();
        let k2 = space.assemble(&coeff).unwrap();
        let a = PreparedSystem::with_plan(k2.clone(), &bc, plan, SolverKind::Direct).unwrap().solve(&f).unwrap();
        let b = PreparedSystem::new(k2, &bc, SolverKind::Direct).unwrap().solve(&f).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn unconstrained_laplacian_is_rejected() {
        let k = laplacian(4);
        // a load with nonzero resultant has no solution without constraints
        let mut f = vec![0.0; k.dim()];
        f[0] = 1.0;
        assert!(matches!(solve_linear(&k, &f, &[], SolverKind::Direct), Err(TopOptError::Singular(_))));
    }

    #[test]
    fn mismatched_plan_is_rejected() {
        let k = laplacian(3);
        let plan = Arc::new(FactorPlan::new(&k, [0usize]).unwrap());
        assert!(matches!(
            PreparedSystem::with_plan(k, &[(1, 0.0)], plan, SolverKind::Direct),
            Err(TopOptError::Usage(_))
        ));
    }
}
