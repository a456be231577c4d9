use crate::error::{Result, TopOptError};
use crate::fem::{MechModel, MechState, StressField};
use crate::grid::Grid;
use crate::perimeter::{convolve, perimeter_value, KernelSpec};
use crate::scalar::Scalar;

use super::{volume_fraction, Formulation, ObjectiveBreakdown, PenaltyParams};

/// Inner minimizers and derived element integrals at one design.
#[derive(Debug, Clone)]
pub struct MechSnapshot<T> {
    pub chi_eps: Vec<T>,
    pub state: MechState<T>,
    /// Stress of the input-load response.
    pub sigma: StressField<T>,
    /// Stress of the output-load response.
    pub rho: StressField<T>,
    /// Per-element `int E0^{-1} sigma : rho`.
    pub mutual: Vec<T>,
    /// Per-element `int E0^{-1} (sigma : sigma + rho : rho)`.
    pub self_energy: Vec<T>,
    /// Per-element unit-modulus strain energies of `u` and `v`.
    pub strain_energy_u: Vec<T>,
    pub strain_energy_v: Vec<T>,
    /// `G = min g~ = l_in(u) + l_out(v)`.
    pub g_value: T,
    pub perimeter: T,
    pub volume: T,
}

/// Compliant-mechanism objective on a fixed discretization.
#[derive(Debug, Clone)]
pub struct MechObjective<T> {
    model: MechModel<T>,
    kernel: KernelSpec<T>,
    params: PenaltyParams<T>,
}

impl<T: Scalar> MechObjective<T> {
    pub fn new(model: MechModel<T>, params: PenaltyParams<T>) -> Result<Self> {
        params.validate()?;
        params.warn_if_weak();
        let kernel = KernelSpec::for_grid(model.grid(), params.eps)?;
        Ok(Self { model, kernel, params })
    }

    pub fn model(&self) -> &MechModel<T> {
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
        // guard against rounding just outside [0, 1]
        for v in &mut s {
            *v = v.max(T::zero()).min(T::one());
        }
        Ok(s)
    }

    /// Solves both state problems at a smoothed design and evaluates `G`.
    pub fn eval_g(&self, chi_eps: &[T]) -> Result<(T, MechSnapshot<T>)> {
        let state = self.model.solve(chi_eps)?;
        let (nu, h) = (self.model.material().nu, self.grid().h());
        let sigma = self.model.stress(&state.u, &state.coeff);
        let rho = self.model.stress(&state.v, &state.coeff);
        let n = self.grid().n_elems();
        let space = self.model.space();
        let mut mutual = Vec::with_capacity(n);
        let mut self_energy = Vec::with_capacity(n);
        let mut strain_energy_u = Vec::with_capacity(n);
        let mut strain_energy_v = Vec::with_capacity(n);
        for e in 0..n {
            mutual.push(sigma.pairing(&rho, e, nu, h));
            self_energy.push(sigma.pairing(&sigma, e, nu, h) + rho.pairing(&rho, e, nu, h));
            strain_energy_u.push(space.element_form(&state.u, &state.u, e));
            strain_energy_v.push(space.element_form(&state.v, &state.v, e));
        }
        let g_value = state.l_in_u + state.l_out_v;
        let snap = MechSnapshot {
            chi_eps: chi_eps.to_vec(),
            state,
            sigma,
            rho,
            mutual,
            self_energy,
            strain_energy_u,
            strain_energy_v,
            g_value,
            perimeter: T::zero(),
            volume: T::zero(),
        };
        Ok((g_value, snap))
    }

    /// Inner minimizers at `chi` together with its perimeter and volume.
    pub fn snapshot(&self, chi: &[T]) -> Result<MechSnapshot<T>> {
        let chi_eps = self.smooth(chi)?;
        let (_, mut snap) = self.eval_g(&chi_eps)?;
        snap.perimeter = perimeter_value(self.grid(), chi, &self.kernel)?;
        snap.volume = volume_fraction(chi);
        Ok(snap)
    }

    fn perimeter_weight(&self) -> T {
        self.params.gamma / self.params.eps
    }

    /// `L` at the design of `fresh` with the inner variables frozen at `frozen`.
    /// `fresh` supplies the smoothed design, the re-solved `G` term, and the perimeter.
    pub fn eval_l(&self, frozen: &MechSnapshot<T>, fresh: &MechSnapshot<T>) -> Result<ObjectiveBreakdown<T>> {
        let n = self.grid().n_elems();
        if frozen.mutual.len() != n || fresh.chi_eps.len() != n {
            return Err(TopOptError::Usage("snapshot does not belong to this grid".into()));
        }
        let mat = self.model.material();
        let lambda = self.params.lambda;
        let half = T::lit(0.5);
        let (physical, penalty) = match self.params.formulation {
            Formulation::Stress => {
                let mut mutual = T::zero();
                let mut energy = T::zero();
                for e in 0..n {
                    let a = mat.compliance(fresh.chi_eps[e]);
                    mutual += a * frozen.mutual[e];
                    energy += a * frozen.self_energy[e];
                }
                (mutual, lambda * (energy - fresh.g_value))
            }
            Formulation::DisplacementAdjoint => {
                let mut a_uu = T::zero();
                let mut a_vv = T::zero();
                for e in 0..n {
                    let c = mat.stiffness(fresh.chi_eps[e]);
                    a_uu += c * frozen.strain_energy_u[e];
                    a_vv += c * frozen.strain_energy_v[e];
                }
                let g_in = half * a_uu - frozen.state.l_in_u;
                let g_out = half * a_vv - frozen.state.l_out_v;
                let min_energy = -half * fresh.g_value;
                (fresh.state.l_out_u, lambda * (g_in + g_out - min_energy))
            }
        };
        Ok(ObjectiveBreakdown::new(physical, penalty, fresh.perimeter, self.perimeter_weight(), fresh.volume))
    }

    /// Descent field per unit area at the design of `snap`:
    /// `G * (A'(chi_eps) E0^{-1} sigma : rho / h^2) + (gamma/eps)(chi - G * chi)`.
    pub fn descent_field(&self, chi: &[T], snap: &MechSnapshot<T>) -> Result<Vec<T>> {
        let mat = self.model.material();
        let inv_area = self.grid().cell_area().recip();
        let sens: Vec<T> = snap
            .chi_eps
            .iter()
            .zip(&snap.mutual)
            .map(|(&c, &m)| mat.compliance_deriv(c) * m * inv_area)
            .collect();
        let mut d = convolve(self.grid(), &sens, &self.kernel)?;
        let w = self.perimeter_weight();
        if w != T::zero() {
            let g = convolve(self.grid(), chi, &self.kernel)?;
            for ((di, &c), &gc) in d.iter_mut().zip(chi).zip(&g) {
                *di += w * (c - gc);
            }
        }
        Ok(d)
    }

    /// `J = l_out(u)`.
    pub fn physical_objective(&self, snap: &MechSnapshot<T>) -> T {
        snap.state.l_out_u
    }
}
