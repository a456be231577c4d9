use crate::error::{Result, TopOptError};
use crate::objective::ObjectiveBreakdown;
use crate::scalar::Scalar;

use super::driver::{Physics, RunStats};
use super::{gradient_step, project_volume, r_min_init};

/// Bisection trials per line search.
pub const MAX_TRIALS: usize = 60;
/// Relative tolerance under which two objective values count as equal.
const EQUAL_REL: f64 = 1e-14;
/// Growth of the upper step bound when the interval is too small to move the design.
const R_MAX_GROWTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchState<T> {
    pub r_min: T,
    pub r_max: T,
    pub r: T,
    pub trials: usize,
}

impl<T: Scalar> LineSearchState<T> {
    pub fn new(r_min: T) -> Self {
        let r_max = r_min * T::lit(1000.0);
        Self { r_min, r_max, r: (r_min + r_max) * T::lit(0.5), trials: 0 }
    }

    fn next(&mut self) -> T {
        self.r = (self.r_min + self.r_max) * T::lit(0.5);
        self.trials += 1;
        self.r
    }
}

#[derive(Debug, Clone)]
pub enum LineSearchOutcome<T, S> {
    Accepted {
        chi: Vec<T>,
        snapshot: S,
        /// `L` at the new design with fresh inner minimizers.
        breakdown: ObjectiveBreakdown<T>,
        /// `L` at the new design with the previous inner variables.
        frozen_total: T,
        r: T,
        trials: usize,
    },
    /// No admissible decrease; the design stays put.
    Stalled { trials: usize },
}

/// Bisection line search along `-d` with threshold projection.
pub fn line_search<T: Scalar, P: Physics<T>>(
    phys: &P,
    chi_k: &[T],
    snap_k: &P::Snapshot,
    l_k: T,
    d: &[T],
    stats: &mut RunStats,
) -> Result<LineSearchOutcome<T, P::Snapshot>> {
    let Some(r_min) = r_min_init(d) else {
        return Ok(LineSearchOutcome::Stalled { trials: 0 });
    };
    let params = phys.params();
    let area = phys.grid().cell_area();
    let mut ls = LineSearchState::new(r_min);
    let mut unchanged = 0usize;
    let equal_tol = T::lit(EQUAL_REL) * l_k.abs();
    while ls.trials < MAX_TRIALS {
        let r = ls.next();
        let trial = project_volume(&gradient_step(chi_k, d, r), params.beta, params.constraint);
        stats.record_projection(&trial, params.beta.to_f64_lossy(), params.constraint);
        let moved = trial.iter().zip(chi_k).map(|(&a, &b)| (a - b).abs()).sum::<T>() * area;
        if moved == T::zero() {
            ls.r_min = r;
            unchanged += 1;
            if unchanged >= 2 {
                ls.r_max = ls.r_max * T::lit(R_MAX_GROWTH);
                unchanged = 0;
            }
            continue;
        }
        unchanged = 0;
        let fresh = phys
            .snapshot(&trial)
            .map_err(|e| TopOptError::Trial { trial: ls.trials, source: Box::new(e) })?;
        stats.record_snapshot(phys, &fresh);
        let frozen = phys.frozen_objective(snap_k, &fresh)?;
        let fresh_l = phys.frozen_objective(&fresh, &fresh)?;
        let diff = frozen.total - l_k;
        if diff.abs() <= equal_tol {
            if moved > params.delta {
                ls.r_max = r;
                continue;
            }
            return Ok(LineSearchOutcome::Stalled { trials: ls.trials });
        }
        if diff < T::zero() && fresh_l.total < l_k {
            return Ok(LineSearchOutcome::Accepted {
                chi: trial,
                snapshot: fresh,
                breakdown: fresh_l,
                frozen_total: frozen.total,
                r,
                trials: ls.trials,
            });
        }
        ls.r_max = r;
        if moved <= params.delta {
            return Ok(LineSearchOutcome::Stalled { trials: ls.trials });
        }
    }
    Ok(LineSearchOutcome::Stalled { trials: ls.trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::objective::PenaltyParams;
    use crate::optimizer::{optimize, Termination};

    /// `L(chi) = sum w_e (chi_e - t_e)^2` with no inner variables.
    struct Quadratic {
        grid: Grid<f64>,
        params: PenaltyParams<f64>,
        target: Vec<f64>,
    }

    impl Quadratic {
        fn new(target: Vec<f64>, beta: f64) -> Self {
            let grid = Grid::<f64>::unit(target.len() / 2, 2).unwrap();
            let params = PenaltyParams::for_grid(&grid, 1.0, 0.0, beta);
            Self { grid, params, target }
        }
    }

    impl Physics<f64> for Quadratic {
        type Snapshot = Vec<f64>;
        fn grid(&self) -> &Grid<f64> {
            &self.grid
        }
        fn params(&self) -> &PenaltyParams<f64> {
            &self.params
        }
        fn snapshot(&self, chi: &[f64]) -> Result<Vec<f64>> {
            Ok(chi.to_vec())
        }
        fn frozen_objective(&self, _frozen: &Vec<f64>, fresh: &Vec<f64>) -> Result<ObjectiveBreakdown<f64>> {
            let v: f64 = fresh.iter().zip(&self.target).map(|(c, t)| (c - t) * (c - t)).sum();
            Ok(ObjectiveBreakdown::new(v, 0.0, 0.0, 0.0, 0.0))
        }
        fn descent_field(&self, chi: &[f64], _snap: &Vec<f64>) -> Result<Vec<f64>> {
            Ok(chi.iter().zip(&self.target).map(|(c, t)| 2.0 * (c - t)).collect())
        }
        fn physical_objective(&self, snap: &Vec<f64>) -> f64 {
            self.frozen_objective(snap, snap).unwrap().total
        }
    }

    fn value(q: &Quadratic, chi: &[f64]) -> f64 {
        q.frozen_objective(&chi.to_vec(), &chi.to_vec()).unwrap().total
    }

    #[test]
    fn zero_field_returns_without_trials() {
        let q = Quadratic::new(vec![1.0, 0.0, 0.0, 1.0], 0.5);
        let chi = vec![1.0, 0.0, 0.0, 1.0];
        let out = line_search(&q, &chi, &chi, 0.0, &[0.0; 4], &mut RunStats::default()).unwrap();
        assert!(matches!(out, LineSearchOutcome::Stalled { trials: 0 }));
    }

    #[test]
    fn accepted_step_decreases_objective() {
        let q = Quadratic::new(vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0], 0.5);
        let chi = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let l0 = value(&q, &chi);
        let d = q.descent_field(&chi, &chi).unwrap();
        match line_search(&q, &chi, &chi, l0, &d, &mut RunStats::default()).unwrap() {
            LineSearchOutcome::Accepted { chi: next, breakdown, trials, .. } => {
                assert!(breakdown.total < l0);
                assert_eq!(breakdown.total, value(&q, &next));
                assert!(trials >= 1 && trials <= MAX_TRIALS);
            }
            other => panic!("expected a step, got {other:?}"),
        }
    }

    #[test]
    fn uniform_field_never_moves_a_binary_design() {
        // a constant shift keeps the order of cells, so every trial projects back
        let q = Quadratic::new(vec![0.5; 6], 0.5);
        let chi = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let l0 = value(&q, &chi);
        let out = line_search(&q, &chi, &chi, l0, &[0.7; 6], &mut RunStats::default()).unwrap();
        assert!(matches!(out, LineSearchOutcome::Stalled { trials: MAX_TRIALS }));
    }

    #[test]
    fn state_bisects() {
        let mut s = LineSearchState::<f64>::new(0.5);
        assert_eq!(s.r_max, 500.0);
        let r = s.next();
        assert_eq!(r, 250.25);
        s.r_max = r;
        let width = s.r_max - s.r_min;
        s.next();
        s.r_min = s.r;
        assert!((s.r_max - s.r_min - width / 2.0).abs() < 1e-12);
        assert_eq!(s.trials, 2);
    }

    #[test]
    fn optimizer_reaches_the_target_and_repeats_exactly() {
        let target = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let q = Quadratic::new(target.clone(), 0.4);
        let chi0 = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let a = optimize(&q, chi0.clone(), |_, _| {});
        // the budget of 3 cells fits the target exactly
        assert_eq!(a.design, target);
        assert!(a.is_monotone());
        // the field vanishes at the target
        assert_eq!(a.termination, Termination::Stationary);
        let b = optimize(&q, chi0, |_, _| {});
        assert_eq!(a.history.iter().map(|r| r.l_total).collect::<Vec<_>>(), b.history.iter().map(|r| r.l_total).collect::<Vec<_>>());
        assert_eq!(a.design, b.design);
    }

    #[test]
    fn zero_budget_returns_initial_design() {
        let mut q = Quadratic::new(vec![0.0, 1.0, 0.0, 0.0], 0.5);
        q.params.max_iters = 0;
        let r = optimize(&q, vec![1.0, 0.0, 0.0, 0.0], |_, _| panic!("no iterations expected"));
        assert_eq!(r.design, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(r.history.is_empty());
    }
}
