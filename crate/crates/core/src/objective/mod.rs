//! Penalized objectives and their design sensitivities.

mod heat;
mod mech;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TopOptError};
use crate::grid::Grid;
use crate::optimizer::ConstraintMode;
use crate::scalar::Scalar;

pub use heat::{HeatObjective, HeatSnapshot};
pub use mech::{MechObjective, MechSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// Penalty on the stress-based inner problem.
    #[default]
    Stress,
    /// Penalty on the displacement energies, driven by the adjoint sensitivity.
    DisplacementAdjoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams<T> {
    pub lambda: T,
    pub gamma: T,
    /// Smoothing and perimeter length.
    pub eps: T,
    /// Volume fraction bound.
    pub beta: T,
    /// Line-search termination area.
    pub delta: T,
    pub constraint: ConstraintMode,
    pub formulation: Formulation,
    pub max_iters: usize,
}

impl<T: Scalar> PenaltyParams<T> {
    /// Defaults tied to a grid: `eps = h`, `delta = h^2`.
    pub fn for_grid(grid: &Grid<T>, lambda: T, gamma: T, beta: T) -> Self {
        Self {
            lambda,
            gamma,
            eps: grid.h(),
            beta,
            delta: grid.cell_area(),
            constraint: ConstraintMode::Inequality,
            formulation: Formulation::Stress,
            max_iters: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(TopOptError::Validation(what.to_string()));
        if !(self.lambda > T::zero() && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return bad("gamma must be nonnegative");
        }
        if !(self.eps > T::zero() && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.delta > T::zero() && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        Ok(())
    }

    /// The stress-form equivalence needs `lambda > 1/2`; smaller values are allowed
    /// but reported.
    pub fn warn_if_weak(&self) {
        if self.formulation == Formulation::Stress && self.lambda <= T::lit(0.5) {
            log::warn!("lambda = {} <= 1/2: the stress penalty is not guaranteed to be exact", self.lambda);
        }
    }
}

/// Components of a penalized objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown<T> {
    pub total: T,
    /// Physical part (mutual energy for mechanisms, scaled heat compliance for heat).
    pub physical: T,
    /// Penalty residual, zero at inner minimizers.
    pub penalty: T,
    /// `(gamma / eps) * P`.
    pub perimeter_term: T,
    /// Raw nonlocal perimeter `P`.
    pub perimeter: T,
    /// Volume fraction.
    pub volume: T,
}

impl<T: Scalar> ObjectiveBreakdown<T> {
    pub(crate) fn new(physical: T, penalty: T, perimeter: T, weight: T, volume: T) -> Self {
        let perimeter_term = weight * perimeter;
        Self { total: physical + penalty + perimeter_term, physical, penalty, perimeter_term, perimeter, volume }
    }
}

pub(crate) fn volume_fraction<T: Scalar>(chi: &[T]) -> T {
    chi.iter().copied().sum::<T>() / T::from_usize_lossy(chi.len())
}
