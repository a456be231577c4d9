//! State and adjoint solves for both physics.

use crate::error::{Result, TopOptError};
use crate::grid::{resolve_boundary, FieldKind, Grid, LoadCase, ResolvedBoundary, Segment};
use crate::material::{ElasticMaterial, HeatCoefficients, HeatMaterial};
use crate::scalar::Scalar;

use super::element::{gauss_points, plane_stress, plane_stress_inverse, strain_matrix};
use std::sync::Arc;

use super::solve::{FactorPlan, PreparedSystem, SolverKind};
use super::sparse::FemSpace;

fn check_design<T: Scalar>(grid: &Grid<T>, chi: &[T]) -> Result<()> {
    if chi.len() != grid.n_elems() {
        return Err(TopOptError::Usage(format!(
            "design has {} values, grid has {} elements",
            chi.len(),
            grid.n_elems()
        )));
    }
    if let Some((e, c)) = chi.iter().enumerate().find(|(_, &c)| !(c >= T::zero() && c <= T::one())) {
        return Err(TopOptError::Domain(format!("design value {c} at element {e} outside [0, 1]")));
    }
    Ok(())
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Per-element stresses at the four Gauss points, Voigt order `(xx, yy, xy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField<T> {
    pub gauss: Vec<[[T; 3]; 4]>,
}

impl<T: Scalar> StressField<T> {
    pub fn zeros(n_elems: usize) -> Self {
        Self { gauss: vec![[[T::zero(); 3]; 4]; n_elems] }
    }

    pub fn len(&self) -> usize {
        self.gauss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gauss.is_empty()
    }

    /// Centroid value; for Q1 fields this is the Gauss-point average.
    pub fn centroid(&self, e: usize) -> [T; 3] {
        let q = T::lit(0.25);
        let g = &self.gauss[e];
        [0, 1, 2].map(|c| (g[0][c] + g[1][c] + g[2][c] + g[3][c]) * q)
    }

    /// Symmetric 2x2 stress tensor at the element centroid.
    pub fn tensor(&self, e: usize) -> [[T; 2]; 2] {
        let [xx, yy, xy] = self.centroid(e);
        [[xx, xy], [xy, yy]]
    }

    /// `int_e D^{-1} sigma : other` over element `e` with the unit-modulus compliance.
    pub fn pairing(&self, other: &StressField<T>, e: usize, nu: T, h: T) -> T {
        let dinv = plane_stress_inverse(nu);
        let det = h * h * T::lit(0.25);
        let mut s = T::zero();
        for (a, b) in self.gauss[e].iter().zip(&other.gauss[e]) {
            for r in 0..3 {
                let strain: T = (0..3).map(|k| dinv[r][k] * a[k]).sum();
                s += strain * b[r];
            }
        }
        s * det
    }
}

/// `sigma = coeff_e * D * B * x_e` at each Gauss point.
pub fn compute_stress<T: Scalar>(space: &FemSpace<T>, x: &[T], coeff: &[T], nu: T) -> StressField<T> {
    let grid = space.grid();
    let d = plane_stress(nu);
    let bs: Vec<[[T; 8]; 3]> = gauss_points::<T>()
        .iter()
        .map(|&(xi, eta)| strain_matrix(xi, eta, grid.h()))
        .collect();
    let mut out = StressField::zeros(grid.n_elems());
    for (e, slot) in out.gauss.iter_mut().enumerate() {
        let xe = space.gather(x, e);
        for (g, b) in bs.iter().enumerate() {
            let mut strain = [T::zero(); 3];
            for r in 0..3 {
                strain[r] = (0..8).map(|k| b[r][k] * xe[k]).sum();
            }
            for r in 0..3 {
                slot[g][r] = coeff[e] * (0..3).map(|k| d[r][k] * strain[k]).sum::<T>();
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct MechState<T> {
    /// Response to the input load.
    pub u: Vec<T>,
    /// Response to the output load (adjoint).
    pub v: Vec<T>,
    /// Element stiffness coefficients the states were solved with.
    pub coeff: Vec<T>,
    pub l_in_u: T,
    pub l_out_u: T,
    pub l_in_v: T,
    pub l_out_v: T,
}

impl<T: Scalar> MechState<T> {
    /// `|l_in(v) - l_out(u)| / |l_out(u)|`.
    pub fn reciprocity_error(&self) -> T {
        let d = (self.l_in_v - self.l_out_u).abs();
        d / self.l_out_u.abs().max(T::lit(1e-300).max(T::min_positive_value()))
    }
}

/// Elasticity discretization with resolved boundary data.
#[derive(Debug, Clone)]
pub struct MechModel<T> {
    space: FemSpace<T>,
    material: ElasticMaterial<T>,
    boundary: ResolvedBoundary<T>,
    f_in: Vec<T>,
    f_out: Vec<T>,
    plan: Arc<FactorPlan>,
    solver: SolverKind,
}

/// Rejects vector Dirichlet sets that leave a rigid mode (two translations and
/// the infinitesimal rotation) free.
fn check_rigid_modes<T: Scalar>(grid: &Grid<T>, dirichlet: &[(usize, T)]) -> Result<()> {
    let n = grid.n_nodes() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for node in 0..grid.n_nodes() {
        let [x, y] = grid.node_coords(node);
        cx += x.to_f64_lossy() / n;
        cy += y.to_f64_lossy() / n;
    }
    let mut gram = [[0.0f64; 3]; 3];
    for &(d, _) in dirichlet {
        let [x, y] = grid.node_coords(d / 2);
        let (x, y) = (x.to_f64_lossy() - cx, y.to_f64_lossy() - cy);
        let row = if d % 2 == 0 { [1.0, 0.0, -y] } else { [0.0, 1.0, x] };
        for a in 0..3 {
            for b in 0..3 {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    let det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1])
        - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
        + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
    let trace = (gram[0][0] + gram[1][1] + gram[2][2]) / 3.0;
    if trace <= 0.0 || det <= 1e-12 * trace.powi(3) {
        return Err(TopOptError::Singular("Dirichlet conditions do not remove all rigid body motions".into()));
    }
    Ok(())
}

impl<T: Scalar> MechModel<T> {
    pub fn new(grid: &Grid<T>, material: ElasticMaterial<T>, bcs: &[Segment<T>], solver: SolverKind) -> Result<Self> {
        material.validate()?;
        let boundary = resolve_boundary(grid, bcs, FieldKind::Vector)?;
        let space = FemSpace::elastic(grid, material.nu);
        let f_in = boundary.load_vector(grid.n_nodes(), FieldKind::Vector, LoadCase::In);
        let f_out = boundary.load_vector(grid.n_nodes(), FieldKind::Vector, LoadCase::Out);
        check_rigid_modes(grid, &boundary.dirichlet)?;
        let unit = space.assemble(&vec![T::one(); grid.n_elems()])?;
        let plan = Arc::new(FactorPlan::new(&unit, boundary.dirichlet.iter().map(|&(d, _)| d))?);
        Ok(Self { space, material, boundary, f_in, f_out, plan, solver })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.space.grid()
    }
    pub fn space(&self) -> &FemSpace<T> {
        &self.space
    }
    pub fn material(&self) -> &ElasticMaterial<T> {
        &self.material
    }
    pub fn boundary(&self) -> &ResolvedBoundary<T> {
        &self.boundary
    }
    pub fn f_in(&self) -> &[T] {
        &self.f_in
    }
    pub fn f_out(&self) -> &[T] {
        &self.f_out
    }
    pub fn l_in(&self, x: &[T]) -> T {
        dot(&self.f_in, x)
    }
    pub fn l_out(&self, x: &[T]) -> T {
        dot(&self.f_out, x)
    }

    pub fn stiffness_field(&self, chi_eps: &[T]) -> Result<Vec<T>> {
        check_design(self.grid(), chi_eps)?;
        Ok(chi_eps.iter().map(|&c| self.material.stiffness(c)).collect())
    }

    pub fn prepare(&self, coeff: &[T]) -> Result<PreparedSystem<T>> {
        let k = self.space.assemble(coeff)?;
        PreparedSystem::with_plan(k, &self.boundary.dirichlet, Arc::clone(&self.plan), self.solver)
    }

    /// State and adjoint solves sharing one factorization.
    pub fn solve(&self, chi_eps: &[T]) -> Result<MechState<T>> {
        let coeff = self.stiffness_field(chi_eps)?;
        let sys = self.prepare(&coeff)?;
        let u = sys.solve(&self.f_in)?;
        let v = sys.solve(&self.f_out)?;
        Ok(MechState {
            l_in_u: self.l_in(&u),
            l_out_u: self.l_out(&u),
            l_in_v: self.l_in(&v),
            l_out_v: self.l_out(&v),
            u,
            v,
            coeff,
        })
    }

    pub fn stress(&self, x: &[T], coeff: &[T]) -> StressField<T> {
        compute_stress(&self.space, x, coeff, self.material.nu)
    }
}

pub fn solve_state_mech<T: Scalar>(
    grid: &Grid<T>,
    chi_eps: &[T],
    mat: &ElasticMaterial<T>,
    bcs: &[Segment<T>],
) -> Result<Vec<T>> {
    let m = MechModel::new(grid, *mat, bcs, SolverKind::Auto)?;
    let coeff = m.stiffness_field(chi_eps)?;
    m.prepare(&coeff)?.solve(&m.f_in)
}

pub fn solve_adjoint_mech<T: Scalar>(
    grid: &Grid<T>,
    chi_eps: &[T],
    mat: &ElasticMaterial<T>,
    bcs: &[Segment<T>],
) -> Result<Vec<T>> {
    let m = MechModel::new(grid, *mat, bcs, SolverKind::Auto)?;
    let coeff = m.stiffness_field(chi_eps)?;
    m.prepare(&coeff)?.solve(&m.f_out)
}

#[derive(Debug, Clone)]
pub struct HeatState<T> {
    /// Temperature for the full source.
    pub t_star: Vec<T>,
    /// Temperature for the source scaled by `lambda / (lambda + 2)`.
    pub t: Vec<T>,
    pub coeffs: Vec<HeatCoefficients<T>>,
    /// Nodal source vector at this design.
    pub f_q: Vec<T>,
    /// `int q(chi) T*`.
    pub objective: T,
}

#[derive(Debug, Clone)]
pub struct HeatModel<T> {
    space: FemSpace<T>,
    material: HeatMaterial<T>,
    boundary: ResolvedBoundary<T>,
    plan: Arc<FactorPlan>,
    solver: SolverKind,
}

impl<T: Scalar> HeatModel<T> {
    pub fn new(grid: &Grid<T>, material: HeatMaterial<T>, bcs: &[Segment<T>], solver: SolverKind) -> Result<Self> {
        material.validate()?;
        let boundary = resolve_boundary(grid, bcs, FieldKind::Scalar)?;
        let space = FemSpace::scalar(grid);
        if boundary.dirichlet.is_empty() {
            return Err(TopOptError::Singular("heat problem needs at least one temperature condition".into()));
        }
        let unit = space.assemble(&vec![T::one(); grid.n_elems()])?;
        let plan = Arc::new(FactorPlan::new(&unit, boundary.dirichlet.iter().map(|&(d, _)| d))?);
        Ok(Self { space, material, boundary, plan, solver })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.space.grid()
    }
    pub fn space(&self) -> &FemSpace<T> {
        &self.space
    }
    pub fn material(&self) -> &HeatMaterial<T> {
        &self.material
    }
    pub fn boundary(&self) -> &ResolvedBoundary<T> {
        &self.boundary
    }

    pub fn coefficients(&self, chi_eps: &[T]) -> Result<Vec<HeatCoefficients<T>>> {
        check_design(self.grid(), chi_eps)?;
        Ok(chi_eps.iter().map(|&c| self.material.coefficients_unchecked(c)).collect())
    }

    /// Nodal load of an element-wise constant source (a quarter of each cell to each corner).
    pub fn source_vector(&self, q: &[T]) -> Vec<T> {
        let grid = self.grid();
        let w = grid.cell_area() * T::lit(0.25);
        let mut f = vec![T::zero(); grid.n_nodes()];
        for (e, &qe) in q.iter().enumerate() {
            for n in grid.elem_nodes(e) {
                f[n] += qe * w;
            }
        }
        f
    }

    pub fn prepare(&self, kappa: &[T]) -> Result<PreparedSystem<T>> {
        let k = self.space.assemble(kappa)?;
        PreparedSystem::with_plan(k, &self.boundary.dirichlet, Arc::clone(&self.plan), self.solver)
    }

    /// Full and scaled temperature solves sharing one factorization.
    pub fn solve(&self, chi_eps: &[T], lambda: T) -> Result<HeatState<T>> {
        if !(lambda > T::zero()) {
            return Err(TopOptError::Domain(format!("penalty weight must be positive, got {lambda}")));
        }
        let coeffs = self.coefficients(chi_eps)?;
        let kappa: Vec<T> = coeffs.iter().map(|c| c.kappa).collect();
        let q: Vec<T> = coeffs.iter().map(|c| c.q).collect();
        let f_q = self.source_vector(&q);
        let sys = self.prepare(&kappa)?;
        let t_star = sys.solve(&f_q)?;
        let factor = lambda / (lambda + T::lit(2.0));
        let scaled: Vec<T> = f_q.iter().map(|&f| f * factor).collect();
        let t = sys.solve(&scaled)?;
        Ok(HeatState { objective: dot(&f_q, &t_star), t_star, t, coeffs, f_q })
    }

    /// Element average of a nodal field.
    pub fn element_mean(&self, x: &[T], e: usize) -> T {
        let n = self.grid().elem_nodes(e);
        (x[n[0]] + x[n[1]] + x[n[2]] + x[n[3]]) * T::lit(0.25)
    }
}

pub fn solve_heat_state<T: Scalar>(
    grid: &Grid<T>,
    chi_eps: &[T],
    mat: &HeatMaterial<T>,
    bcs: &[Segment<T>],
) -> Result<Vec<T>> {
    Ok(HeatModel::new(grid, *mat, bcs, SolverKind::Auto)?.solve(chi_eps, T::one())?.t_star)
}

pub fn solve_heat_scaled<T: Scalar>(
    grid: &Grid<T>,
    chi_eps: &[T],
    mat: &HeatMaterial<T>,
    bcs: &[Segment<T>],
    lambda: T,
) -> Result<Vec<T>> {
    Ok(HeatModel::new(grid, *mat, bcs, SolverKind::Auto)?.solve(chi_eps, lambda)?.t)
}
