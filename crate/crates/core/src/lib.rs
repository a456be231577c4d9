//! Penalty-method topology optimization for compliant mechanisms and heat
//! dissipation on structured grids.
//!
//! The numerical core is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod design_io;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod grid;
pub mod material;
pub mod objective;
pub mod optimizer;
pub mod oracle;
pub mod perimeter;
pub mod problems;
pub mod scalar;

pub use error::{Result, TopOptError};
pub use scalar::Scalar;

pub type Grid = grid::Grid<f64>;
pub type GridSpec = grid::GridSpec<f64>;
pub type Segment = grid::Segment<f64>;
pub type ElasticMaterial = material::ElasticMaterial<f64>;
pub type HeatMaterial = material::HeatMaterial<f64>;
pub type KernelSpec = perimeter::KernelSpec<f64>;
pub type PenaltyParams = objective::PenaltyParams<f64>;
pub type MechObjective = objective::MechObjective<f64>;
pub type HeatObjective = objective::HeatObjective<f64>;
pub type MechModel = fem::MechModel<f64>;
pub type HeatModel = fem::HeatModel<f64>;
pub type DensityField = optimizer::DensityField<f64>;
pub type OptimizationResult = optimizer::OptimizationResult<f64>;
