//! Q1 finite elements on the structured grid.

mod element;
mod pcg;
mod solve;
mod sparse;
mod state;

pub use element::{element_stiffness_elastic, element_stiffness_scalar, plane_stress, plane_stress_inverse};
pub use pcg::{pcg, PcgSettings};
pub use solve::{solve_linear, FactorPlan, PreparedSystem, SolverKind};
pub use sparse::{assemble, FemSpace, SparseSymMatrix};
pub use state::{
    compute_stress, solve_adjoint_mech, solve_heat_scaled, solve_heat_state, solve_state_mech, HeatModel, HeatState,
    MechModel, MechState, StressField,
};
