use std::time::Instant;

use crate::error::Result;
use crate::grid::Grid;
use crate::objective::{HeatObjective, HeatSnapshot, MechObjective, MechSnapshot, ObjectiveBreakdown, PenaltyParams};
use crate::scalar::Scalar;

use super::line_search::{line_search, LineSearchOutcome};
use super::{cell_budget, ConstraintMode};

/// What the optimizer needs from a physics model.
pub trait Physics<T: Scalar> {
    type Snapshot;

    fn grid(&self) -> &Grid<T>;
    fn params(&self) -> &PenaltyParams<T>;
    /// Inner minimizers at `chi` (state solves, perimeter, volume).
    fn snapshot(&self, chi: &[T]) -> Result<Self::Snapshot>;
    /// `L` at the design of `fresh` with inner variables taken from `frozen`.
    fn frozen_objective(&self, frozen: &Self::Snapshot, fresh: &Self::Snapshot) -> Result<ObjectiveBreakdown<T>>;
    fn descent_field(&self, chi: &[T], snap: &Self::Snapshot) -> Result<Vec<T>>;
    fn physical_objective(&self, snap: &Self::Snapshot) -> T;
    /// Relative reciprocity defect of the state pair, when the physics has one.
    fn reciprocity_error(&self, _snap: &Self::Snapshot) -> Option<T> {
        None
    }
}

impl<T: Scalar> Physics<T> for MechObjective<T> {
    type Snapshot = MechSnapshot<T>;

    fn grid(&self) -> &Grid<T> {
        MechObjective::grid(self)
    }
    fn params(&self) -> &PenaltyParams<T> {
        MechObjective::params(self)
    }
    fn snapshot(&self, chi: &[T]) -> Result<Self::Snapshot> {
        MechObjective::snapshot(self, chi)
    }
    fn frozen_objective(&self, frozen: &Self::Snapshot, fresh: &Self::Snapshot) -> Result<ObjectiveBreakdown<T>> {
        self.eval_l(frozen, fresh)
    }
    fn descent_field(&self, chi: &[T], snap: &Self::Snapshot) -> Result<Vec<T>> {
        MechObjective::descent_field(self, chi, snap)
    }
    fn physical_objective(&self, snap: &Self::Snapshot) -> T {
        MechObjective::physical_objective(self, snap)
    }
    fn reciprocity_error(&self, snap: &Self::Snapshot) -> Option<T> {
        Some(snap.state.reciprocity_error())
    }
}

impl<T: Scalar> Physics<T> for HeatObjective<T> {
    type Snapshot = HeatSnapshot<T>;

    fn grid(&self) -> &Grid<T> {
        HeatObjective::grid(self)
    }
    fn params(&self) -> &PenaltyParams<T> {
        HeatObjective::params(self)
    }
    fn snapshot(&self, chi: &[T]) -> Result<Self::Snapshot> {
        HeatObjective::snapshot(self, chi)
    }
    fn frozen_objective(&self, frozen: &Self::Snapshot, fresh: &Self::Snapshot) -> Result<ObjectiveBreakdown<T>> {
        self.eval_l(frozen, fresh)
    }
    fn descent_field(&self, chi: &[T], snap: &Self::Snapshot) -> Result<Vec<T>> {
        HeatObjective::descent_field(self, chi, snap)
    }
    fn physical_objective(&self, snap: &Self::Snapshot) -> T {
        HeatObjective::physical_objective(self, snap)
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iter: usize,
    pub l_total: f64,
    pub j_physical: f64,
    /// Raw nonlocal perimeter.
    pub perimeter: f64,
    pub volume: f64,
    pub r: f64,
    pub trials: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// The line search found no admissible decrease.
    Converged,
    /// The descent field vanished identically.
    Stationary,
    IterationBudget,
    SolverFailure(String),
}

impl Termination {
    pub fn reason(&self) -> &str {
        match self {
            Termination::Converged => "converged",
            Termination::Stationary => "stationary",
            Termination::IterationBudget => "iteration budget",
            Termination::SolverFailure(_) => "solver failure",
        }
    }
}

/// Invariant monitors accumulated during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub snapshots: usize,
    pub projections: usize,
    pub max_reciprocity_error: f64,
    /// Largest amount by which a projection exceeded its volume allowance.
    pub max_volume_violation: f64,
    pub total_trials: usize,
    /// Trials beyond the first in each line search.
    pub line_search_steps: usize,
    /// Largest `fresh L - frozen L` over accepted steps (should not be positive).
    pub max_fresh_excess: f64,
}

impl RunStats {
    pub(crate) fn record_snapshot<T: Scalar, P: Physics<T>>(&mut self, phys: &P, snap: &P::Snapshot) {
        self.snapshots += 1;
        if let Some(e) = phys.reciprocity_error(snap) {
            let e = e.to_f64_lossy();
            self.max_reciprocity_error = self.max_reciprocity_error.max(if e.is_nan() { f64::INFINITY } else { e });
        }
    }

    pub(crate) fn record_projection<T: Scalar>(&mut self, chi: &[T], beta: f64, mode: ConstraintMode) {
        self.projections += 1;
        let n = chi.len() as f64;
        let count = chi.iter().filter(|&&c| c == T::one()).count();
        let volume = count as f64 / n;
        let v = match mode {
            ConstraintMode::Inequality => (count.saturating_sub(cell_budget(beta, chi.len())) as f64 / n)
                .max(volume - beta * (1.0 + 1e-12)),
            ConstraintMode::Equality => (volume - beta).abs() - 1.0 / n,
        };
        self.max_volume_violation = self.max_volume_violation.max(v.max(0.0));
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<T> {
    pub design: Vec<T>,
    pub history: Vec<IterateRecord>,
    pub initial: Option<ObjectiveBreakdown<T>>,
    pub final_breakdown: Option<ObjectiveBreakdown<T>>,
    pub final_physical: Option<T>,
    pub termination: Termination,
    pub stats: RunStats,
}

impl<T: Scalar> OptimizationResult<T> {
    /// Whether recorded objective values strictly decrease, starting from the initial value.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial.map(|b| b.total.to_f64_lossy()).unwrap_or(f64::INFINITY);
        for rec in &self.history {
            if !(rec.l_total < prev) {
                return false;
            }
            prev = rec.l_total;
        }
        true
    }
}

/// Outer descent loop. `on_iterate` sees every accepted iterate and its design.
pub fn optimize<T, P, F>(phys: &P, chi0: Vec<T>, mut on_iterate: F) -> OptimizationResult<T>
where
    T: Scalar,
    P: Physics<T>,
    F: FnMut(&IterateRecord, &[T]),
{
    let start = Instant::now();
    let max_iters = phys.params().max_iters;
    let mut stats = RunStats::default();
    let mut result = OptimizationResult {
        design: chi0,
        history: Vec::new(),
        initial: None,
        final_breakdown: None,
        final_physical: None,
        termination: Termination::IterationBudget,
        stats: RunStats::default(),
    };
    if max_iters == 0 {
        return result;
    }
    let fail = |mut result: OptimizationResult<T>, stats: RunStats, e: crate::error::TopOptError| {
        log::error!("optimization aborted: {e}");
        result.termination = Termination::SolverFailure(e.to_string());
        result.stats = stats;
        result
    };
    let mut snap = match phys.snapshot(&result.design) {
        Ok(s) => s,
        Err(e) => return fail(result, stats, e),
    };
    stats.record_snapshot(phys, &snap);
    let mut current = match phys.frozen_objective(&snap, &snap) {
        Ok(b) => b,
        Err(e) => return fail(result, stats, e),
    };
    result.initial = Some(current);
    result.final_breakdown = Some(current);
    result.final_physical = Some(phys.physical_objective(&snap));

    for iter in 1..=max_iters {
        let d = match phys.descent_field(&result.design, &snap) {
            Ok(d) => d,
            Err(e) => return fail(result, stats, e),
        };
        let outcome = match line_search(phys, &result.design, &snap, current.total, &d, &mut stats) {
            Ok(o) => o,
            Err(e) => return fail(result, stats, e),
        };
        match outcome {
            LineSearchOutcome::Stalled { trials } => {
                stats.total_trials += trials;
                stats.line_search_steps += trials;
                result.termination = if trials == 0 { Termination::Stationary } else { Termination::Converged };
                log::info!("iteration {iter}: line search stalled after {trials} trials");
                result.stats = stats;
                return result;
            }
            LineSearchOutcome::Accepted { chi, snapshot, breakdown, frozen_total, r, trials } => {
                stats.total_trials += trials;
                stats.line_search_steps += trials - 1;
                stats.max_fresh_excess =
                    stats.max_fresh_excess.max((breakdown.total - frozen_total).to_f64_lossy());
                let j = phys.physical_objective(&snapshot);
                let rec = IterateRecord {
                    iter,
                    l_total: breakdown.total.to_f64_lossy(),
                    j_physical: j.to_f64_lossy(),
                    perimeter: breakdown.perimeter.to_f64_lossy(),
                    volume: breakdown.volume.to_f64_lossy(),
                    r: r.to_f64_lossy(),
                    trials,
                    wall_time: start.elapsed().as_secs_f64(),
                };
                log::debug!(
                    "iteration {iter}: L = {:.10e}, J = {:.6e}, volume = {:.4}, trials = {trials}",
                    rec.l_total,
                    rec.j_physical,
                    rec.volume
                );
                on_iterate(&rec, &chi);
                result.history.push(rec);
                result.design = chi;
                snap = snapshot;
                current = breakdown;
                result.final_breakdown = Some(current);
                result.final_physical = Some(j);
            }
        }
    }
    result.termination = Termination::IterationBudget;
    result.stats = stats;
    result
}
