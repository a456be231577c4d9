use crate::error::{Result, TopOptError};
use crate::fem::{HeatModel, HeatState};
use crate::grid::Grid;
use crate::perimeter::{convolve, perimeter_value, KernelSpec};
use crate::scalar::Scalar;

use super::{volume_fraction, ObjectiveBreakdown, PenaltyParams};

#[derive(Debug, Clone)]
pub struct HeatSnapshot<T> {
    pub chi_eps: Vec<T>,
    pub state: HeatState<T>,
    /// Per-element `int |grad T|^2` for the scaled temperature.
    pub grad2_t: Vec<T>,
    /// Per-element mean of the scaled temperature.
    pub mean_t: Vec<T>,
    pub grad2_t_star: Vec<T>,
    pub mean_t_star: Vec<T>,
    pub perimeter: T,
    pub volume: T,
}

/// Heat-dissipation objective on a fixed discretization.
#[derive(Debug, Clone)]
pub struct HeatObjective<T> {
    model: HeatModel<T>,
    kernel: KernelSpec<T>,
    params: PenaltyParams<T>,
}

impl<T: Scalar> HeatObjective<T> {
    pub fn new(model: HeatModel<T>, params: PenaltyParams<T>) -> Result<Self> {
        params.validate()?;
        let kernel = KernelSpec::for_grid(model.grid(), params.eps)?;
        Ok(Self { model, kernel, params })
    }

    pub fn model(&self) -> &HeatModel<T> {
        &self.model
    }
    pub fn grid(&self) -> &Grid<T> {
        self.model.grid()
    }
    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }
    pub fn params(&self) -> &PenaltyParams<T> {
        &self.params
    }

    pub fn smooth(&self, chi: &[T]) -> Result<Vec<T>> {
        let mut s = convolve(self.grid(), chi, &self.kernel)?;
        for v in &mut s {
            *v = v.max(T::zero()).min(T::one());
        }
        Ok(s)
    }

    fn scale(&self) -> T {
        self.params.lambda / (self.params.lambda + T::lit(2.0))
    }

    pub fn snapshot(&self, chi: &[T]) -> Result<HeatSnapshot<T>> {
        let chi_eps = self.smooth(chi)?;
        let state = self.model.solve(&chi_eps, self.params.lambda)?;
        let n = self.grid().n_elems();
        let space = self.model.space();
        let mut snap = HeatSnapshot {
            chi_eps,
            grad2_t: Vec::with_capacity(n),
            mean_t: Vec::with_capacity(n),
            grad2_t_star: Vec::with_capacity(n),
            mean_t_star: Vec::with_capacity(n),
            perimeter: perimeter_value(self.grid(), chi, &self.kernel)?,
            volume: volume_fraction(chi),
            state,
        };
        for e in 0..n {
            snap.grad2_t.push(space.element_form(&snap.state.t, &snap.state.t, e));
            snap.mean_t.push(self.model.element_mean(&snap.state.t, e));
            snap.grad2_t_star.push(space.element_form(&snap.state.t_star, &snap.state.t_star, e));
            snap.mean_t_star.push(self.model.element_mean(&snap.state.t_star, e));
        }
        Ok(snap)
    }

    /// `L` at the design of `fresh` with the temperature frozen at `frozen`:
    /// `(1 + lambda/2) int kappa |grad T|^2 - lambda int q T - lambda m(chi)` plus the
    /// perimeter, where `m = min (1/2 int kappa |grad S|^2 - int q S) = -J/2`.
    /// Its minimum over `T` is `lambda / (lambda + 2) * J`.
    pub fn eval_l(&self, frozen: &HeatSnapshot<T>, fresh: &HeatSnapshot<T>) -> Result<ObjectiveBreakdown<T>> {
        let n = self.grid().n_elems();
        if frozen.grad2_t.len() != n || fresh.chi_eps.len() != n {
            return Err(TopOptError::Usage("snapshot does not belong to this grid".into()));
        }
        let lambda = self.params.lambda;
        let h2 = self.grid().cell_area();
        let half = T::lit(0.5);
        let mut energy = T::zero();
        let mut work = T::zero();
        for (e, c) in fresh.state.coeffs.iter().enumerate() {
            energy += c.kappa * frozen.grad2_t[e];
            work += c.q * h2 * frozen.mean_t[e];
        }
        let min_energy = -half * fresh.state.objective;
        let core = (T::one() + half * lambda) * energy - lambda * work - lambda * min_energy;
        let physical = self.scale() * fresh.state.objective;
        Ok(ObjectiveBreakdown::new(
            physical,
            core - physical,
            fresh.perimeter,
            self.params.gamma / self.params.eps,
            fresh.volume,
        ))
    }

    /// Descent field per unit area; the source term of `m` enters with the
    /// unscaled temperature.
    pub fn descent_field(&self, chi: &[T], snap: &HeatSnapshot<T>) -> Result<Vec<T>> {
        let lambda = self.params.lambda;
        let half = T::lit(0.5);
        let h2 = self.grid().cell_area();
        let inv_area = h2.recip();
        let sens: Vec<T> = snap
            .state
            .coeffs
            .iter()
            .enumerate()
            .map(|(e, c)| {
                let state_part = c.dkappa * snap.grad2_t[e] * (T::one() + half * lambda) - lambda * c.dq * h2 * snap.mean_t[e];
                let inner_part = half * c.dkappa * snap.grad2_t_star[e] - c.dq * h2 * snap.mean_t_star[e];
                (state_part - lambda * inner_part) * inv_area
            })
            .collect();
        let mut d = convolve(self.grid(), &sens, &self.kernel)?;
        let w = self.params.gamma / self.params.eps;
        if w != T::zero() {
            let g = convolve(self.grid(), chi, &self.kernel)?;
            for ((di, &c), &gc) in d.iter_mut().zip(chi).zip(&g) {
                *di += w * (c - gc);
            }
        }
        Ok(d)
    }

    /// `J = int q(chi) T*`.
    pub fn physical_objective(&self, snap: &HeatSnapshot<T>) -> T {
        snap.state.objective
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::check_gradient;
    use crate::problems::{builtin, Overrides, Problem};

    fn heat(n: usize, gamma: f64, p: Option<f64>) -> HeatObjective<f64> {
        let mut c = builtin("heat").unwrap();
        Overrides { nx: Some(n), gamma: Some(gamma), p, ..Default::default() }.apply(&mut c).unwrap();
        match c.build().unwrap() {
            Problem::Heat(h) => h,
            Problem::Mech(_) => unreachable!(),
        }
    }

    #[test]
    fn scaled_solve_scales_gradients() {
        let obj = heat(10, 0.1, None);
        let snap = obj.snapshot(&vec![0.5; 100]).unwrap();
        let f: f64 = 0.1 / 2.1;
        assert!((f * f - 2.2676e-3).abs() < 1e-6);
        for e in 0..100 {
            assert!((snap.grad2_t[e] - f * f * snap.grad2_t_star[e]).abs() <= 1e-10 * snap.grad2_t_star[e].max(1e-300));
        }
    }

    #[test]
    fn penalty_vanishes_at_inner_minimizer() {
        let obj = heat(12, 0.1, None);
        let chi: Vec<f64> = (0..144).map(|e| if (e * 7) % 5 < 2 { 1.0 } else { 0.0 }).collect();
        let snap = obj.snapshot(&chi).unwrap();
        let b = obj.eval_l(&snap, &snap).unwrap();
        assert!(b.penalty.abs() <= 1e-9 * b.total.abs(), "{b:?}");
        assert!((b.physical - 0.1 / 2.1 * obj.physical_objective(&snap)).abs() <= 1e-12 * b.physical.abs());
    }

    #[test]
    fn frozen_temperature_overestimates() {
        let obj = heat(12, 0.1, None);
        let a = obj.snapshot(&vec![0.3; 144]).unwrap();
        let chi: Vec<f64> = (0..144).map(|e| if e % 12 < 5 { 1.0 } else { 0.0 }).collect();
        let b = obj.snapshot(&chi).unwrap();
        let frozen = obj.eval_l(&a, &b).unwrap().total;
        let fresh = obj.eval_l(&b, &b).unwrap().total;
        assert!(fresh <= frozen + 1e-12 * frozen.abs());
    }

    #[test]
    fn descent_field_matches_finite_differences() {
        for p in [None, Some(0.5), Some(-1.0)] {
            let obj = heat(8, 0.0, p);
            let report = check_gradient(&obj, 6, 1e-5, 9).unwrap();
            assert!(report.max_rel_error < 1e-4, "p = {p:?}: {report:?}");
        }
    }
}
