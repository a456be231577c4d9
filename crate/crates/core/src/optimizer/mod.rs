//! Projected gradient descent with threshold projection and bisection line search.

mod driver;
mod line_search;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TopOptError};
use crate::scalar::Scalar;

pub use driver::{optimize, IterateRecord, OptimizationResult, Physics, RunStats, Termination};
pub use line_search::{line_search, LineSearchOutcome, LineSearchState, MAX_TRIALS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    /// Volume at most `beta`.
    #[default]
    Inequality,
    /// Exactly `floor(beta N)` cells of material.
    Equality,
}

/// Per-element design values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    values: Vec<T>,
    binary: bool,
}

impl<T: Scalar> DensityField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((e, v)) = values.iter().enumerate().find(|(_, &v)| !(v >= T::zero() && v <= T::one())) {
            return Err(TopOptError::Domain(format!("design value {v} at element {e} outside [0, 1]")));
        }
        let binary = values.iter().all(|&v| v == T::zero() || v == T::one());
        Ok(Self { values, binary })
    }

    pub fn uniform(n: usize, value: T) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn is_binary(&self) -> bool {
        self.binary
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn volume_fraction(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_usize_lossy(self.values.len())
    }
}

/// `chi - r d`, without clamping.
pub fn gradient_step<T: Scalar>(chi: &[T], d: &[T], r: T) -> Vec<T> {
    chi.iter().zip(d).map(|(&c, &g)| c - r * g).collect()
}

/// Number of material cells allowed for volume fraction `beta`.
pub fn cell_budget(beta: f64, n: usize) -> usize {
    (((beta * n as f64) * (1.0 + 1e-12)).floor() as usize).min(n)
}

fn desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Volume-constrained threshold projection onto binary fields.
///
/// Inequality mode keeps `{chi_bar > c}` for the smallest `c` whose superlevel set
/// fits the budget. Equality mode keeps exactly the budget, breaking ties by
/// ascending element index.
pub fn project_volume<T: Scalar>(chi_bar: &[T], beta: T, mode: ConstraintMode) -> Vec<T> {
    let n = chi_bar.len();
    let k = cell_budget(beta.to_f64_lossy(), n);
    let mut out = vec![T::zero(); n];
    if n == 0 {
        return out;
    }
    match mode {
        ConstraintMode::Inequality => {
            if k >= n {
                out.iter_mut().for_each(|o| *o = T::one());
                return out;
            }
            let mut vals = chi_bar.to_vec();
            let (_, &mut c, _) = vals.select_nth_unstable_by(k, |a, b| desc(*a, *b));
            for (o, &v) in out.iter_mut().zip(chi_bar) {
                if v > c {
                    *o = T::one();
                }
            }
        }
        ConstraintMode::Equality => {
            if k == 0 {
                return out;
            }
            let mut idx: Vec<usize> = (0..n).collect();
            if k < n {
                idx.select_nth_unstable_by(k, |&a, &b| desc(chi_bar[a], chi_bar[b]).then(a.cmp(&b)));
            }
            for &i in &idx[..k] {
                out[i] = T::one();
            }
        }
    }
    out
}

/// Initial lower step bound `1 / (2 max |d|)`; `None` when `d` vanishes.
pub fn r_min_init<T: Scalar>(d: &[T]) -> Option<T> {
    let m = d.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if m > T::zero() && m.is_finite() {
        Some(T::lit(0.5) / m)
    } else {
        None
    }
}
