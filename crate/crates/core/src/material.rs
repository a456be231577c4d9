//! Design-to-coefficient interpolation laws.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TopOptError};
use crate::scalar::Scalar;

/// Below this |p| the power mean is replaced by its geometric-mean limit.
const P_ZERO: f64 = 1e-8;

fn check_unit<T: Scalar>(chi: T) -> Result<()> {
    if chi >= T::zero() && chi <= T::one() {
        Ok(())
    } else {
        Err(TopOptError::Domain(format!("design value {chi} outside [0, 1]")))
    }
}

/// Power-mean interpolation `[(k1^p - k2^p) chi + k2^p]^(1/p)` between `k2` (chi = 0)
/// and `k1` (chi = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmifParams<T> {
    pub k1: T,
    pub k2: T,
    pub p: T,
}

impl<T: Scalar> GmifParams<T> {
    pub fn new(k1: T, k2: T, p: T) -> Result<Self> {
        let g = Self { k1, k2, p };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > T::zero() && self.k2 > T::zero()) || !self.k1.is_finite() || !self.k2.is_finite() {
            return Err(TopOptError::Domain(format!(
                "interpolation endpoints must be positive, got k1 = {}, k2 = {}",
                self.k1, self.k2
            )));
        }
        if !self.p.is_finite() {
            return Err(TopOptError::Domain("interpolation exponent must be finite".into()));
        }
        Ok(())
    }

    fn is_geometric(&self) -> bool {
        self.p.abs() < T::lit(P_ZERO)
    }

    /// Value without range checks; callers guarantee `chi` in [0, 1].
    #[inline]
    pub fn eval_unchecked(&self, chi: T) -> T {
        if self.is_geometric() {
            self.k1.powf(chi) * self.k2.powf(T::one() - chi)
        } else {
            let a = self.k1.powf(self.p);
            let b = self.k2.powf(self.p);
            ((a - b) * chi + b).powf(self.p.recip())
        }
    }

    #[inline]
    pub fn deriv_unchecked(&self, chi: T) -> T {
        if self.is_geometric() {
            self.eval_unchecked(chi) * (self.k1 / self.k2).ln()
        } else {
            let a = self.k1.powf(self.p);
            let b = self.k2.powf(self.p);
            let base = (a - b) * chi + b;
            base.powf(self.p.recip() - T::one()) * (a - b) / self.p
        }
    }
}

pub fn gmif_eval<T: Scalar>(g: &GmifParams<T>, chi: T) -> Result<T> {
    g.validate()?;
    check_unit(chi)?;
    Ok(g.eval_unchecked(chi))
}

pub fn gmif_deriv<T: Scalar>(g: &GmifParams<T>, chi: T) -> Result<T> {
    g.validate()?;
    check_unit(chi)?;
    Ok(g.deriv_unchecked(chi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElasticInterp<T> {
    /// `E = (E_max - E_min) chi + E_min`.
    LinearStiffness,
    /// Compliance affine in chi: `1/E = (1/E_max - 1/E_min) chi + 1/E_min`.
    LinearCompliance,
    Gmif(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticMaterial<T> {
    pub e_max: T,
    pub e_min: T,
    pub nu: T,
    pub interp: ElasticInterp<T>,
}

impl<T: Scalar> ElasticMaterial<T> {
    pub fn new(e_max: T, e_min: T, nu: T, interp: ElasticInterp<T>) -> Result<Self> {
        let m = Self { e_max, e_min, nu, interp };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_min > T::zero() && self.e_min < self.e_max && self.e_max.is_finite()) {
            return Err(TopOptError::Validation(format!(
                "elastic moduli must satisfy 0 < e-min < e-max, got e-min = {}, e-max = {}",
                self.e_min, self.e_max
            )));
        }
        if !(self.nu >= T::zero() && self.nu < T::lit(0.5)) {
            return Err(TopOptError::Validation(format!(
                "Poisson ratio must lie in [0, 0.5), got {}",
                self.nu
            )));
        }
        if let ElasticInterp::Gmif(p) = self.interp {
            self.gmif(p).validate()?;
        }
        Ok(())
    }

    fn gmif(&self, p: T) -> GmifParams<T> {
        GmifParams { k1: self.e_max, k2: self.e_min, p }
    }

    /// Stiffness coefficient multiplying the unit-modulus elasticity tensor.
    #[inline]
    pub fn stiffness(&self, chi: T) -> T {
        match self.interp {
            ElasticInterp::LinearStiffness => (self.e_max - self.e_min) * chi + self.e_min,
            ElasticInterp::LinearCompliance => compliance_a_unchecked(self, chi).recip(),
            ElasticInterp::Gmif(p) => self.gmif(p).eval_unchecked(chi),
        }
    }

    #[inline]
    pub fn stiffness_deriv(&self, chi: T) -> T {
        match self.interp {
            ElasticInterp::LinearStiffness => self.e_max - self.e_min,
            ElasticInterp::LinearCompliance => {
                let a = compliance_a_unchecked(self, chi);
                -(self.e_max.recip() - self.e_min.recip()) / (a * a)
            }
            ElasticInterp::Gmif(p) => self.gmif(p).deriv_unchecked(chi),
        }
    }

    /// Compliance coefficient `1 / stiffness`.
    #[inline]
    pub fn compliance(&self, chi: T) -> T {
        match self.interp {
            ElasticInterp::LinearCompliance => compliance_a_unchecked(self, chi),
            _ => self.stiffness(chi).recip(),
        }
    }

    #[inline]
    pub fn compliance_deriv(&self, chi: T) -> T {
        match self.interp {
            ElasticInterp::LinearCompliance => self.e_max.recip() - self.e_min.recip(),
            _ => {
                let c = self.stiffness(chi);
                -self.stiffness_deriv(chi) / (c * c)
            }
        }
    }
}

#[inline]
fn compliance_a_unchecked<T: Scalar>(mat: &ElasticMaterial<T>, chi: T) -> T {
    // convex-combination form keeps both endpoints exact
    chi / mat.e_max + (T::one() - chi) / mat.e_min
}

/// Affine compliance extension `A(chi) = (1/E_max - 1/E_min) chi + 1/E_min`.
pub fn compliance_a<T: Scalar>(mat: &ElasticMaterial<T>, chi: T) -> Result<T> {
    check_unit(chi)?;
    Ok(compliance_a_unchecked(mat, chi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConductivityInterp<T> {
    Linear,
    Gmif(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatMaterial<T> {
    pub kappa1: T,
    pub kappa2: T,
    pub q1: T,
    pub q2: T,
    pub interp_kappa: ConductivityInterp<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCoefficients<T> {
    pub kappa: T,
    pub q: T,
    pub dkappa: T,
    pub dq: T,
}

impl<T: Scalar> HeatMaterial<T> {
    pub fn new(kappa1: T, kappa2: T, q1: T, q2: T, interp_kappa: ConductivityInterp<T>) -> Result<Self> {
        let m = Self { kappa1, kappa2, q1, q2, interp_kappa };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa1 > self.kappa2 && self.kappa2 > T::zero() && self.kappa1.is_finite()) {
            return Err(TopOptError::Validation(format!(
                "conductivities must satisfy kappa1 > kappa2 > 0, got {} and {}",
                self.kappa1, self.kappa2
            )));
        }
        if !(self.q2 > self.q1 && self.q1 > T::zero() && self.q2.is_finite()) {
            return Err(TopOptError::Validation(format!(
                "heat sources must satisfy q2 > q1 > 0, got q1 = {}, q2 = {}",
                self.q1, self.q2
            )));
        }
        if let ConductivityInterp::Gmif(p) = self.interp_kappa {
            GmifParams { k1: self.kappa1, k2: self.kappa2, p }.validate()?;
        }
        Ok(())
    }

    #[inline]
    pub fn coefficients_unchecked(&self, chi: T) -> HeatCoefficients<T> {
        let (kappa, dkappa) = match self.interp_kappa {
            ConductivityInterp::Linear => {
                (self.kappa1 * chi + self.kappa2 * (T::one() - chi), self.kappa1 - self.kappa2)
            }
            ConductivityInterp::Gmif(p) => {
                let g = GmifParams { k1: self.kappa1, k2: self.kappa2, p };
                (g.eval_unchecked(chi), g.deriv_unchecked(chi))
            }
        };
        HeatCoefficients {
            kappa,
            q: self.q1 * chi + self.q2 * (T::one() - chi),
            dkappa,
            dq: self.q1 - self.q2,
        }
    }
}

pub fn heat_coefficients<T: Scalar>(mat: &HeatMaterial<T>, chi: T) -> Result<HeatCoefficients<T>> {
    check_unit(chi)?;
    Ok(mat.coefficients_unchecked(chi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mech() -> ElasticMaterial<f64> {
        let e_max = 5000.0 * 8.0 / 3.0;
        ElasticMaterial::new(e_max, 1e-5 * e_max, 0.3, ElasticInterp::LinearCompliance).unwrap()
    }

    #[test]
    fn compliance_endpoints_and_midpoint() {
        let m = mech();
        assert_eq!(compliance_a(&m, 1.0).unwrap(), 1.0 / m.e_max);
        assert_eq!(compliance_a(&m, 0.0).unwrap(), 1.0 / m.e_min);
        let mid = 0.5 * (1.0 / m.e_max + 1.0 / m.e_min);
        assert_relative_eq!(compliance_a(&m, 0.5).unwrap(), mid, max_relative = 1e-15);
        assert!(compliance_a(&m, 1.2).is_err());
        assert!(compliance_a(&m, -0.1).is_err());
    }

    #[test]
    fn compliance_matches_linear_stiffness_at_endpoints() {
        let m = mech();
        for chi in [0.0, 1.0] {
            let lin = (m.e_max - m.e_min) * chi + m.e_min;
            assert_relative_eq!(1.0 / compliance_a(&m, chi).unwrap(), lin, max_relative = 1e-14);
        }
    }

    #[test]
    fn gmif_examples() {
        let arith = GmifParams::new(10.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(gmif_eval(&arith, 0.5).unwrap(), 5.5, max_relative = 1e-15);
        let harm = GmifParams::new(10.0, 1.0, -1.0).unwrap();
        assert_relative_eq!(gmif_eval(&harm, 0.5).unwrap(), 1.0 / 0.55, max_relative = 1e-14);
        for p in [-1.0, -0.3, 0.0, 1e-10, 0.4, 1.0] {
            let g = GmifParams::new(10.0, 1.0, p).unwrap();
            assert_relative_eq!(gmif_eval(&g, 1.0).unwrap(), 10.0, max_relative = 1e-14);
            assert_relative_eq!(gmif_eval(&g, 0.0).unwrap(), 1.0, max_relative = 1e-14);
        }
        assert!(GmifParams::new(0.0, 1.0, 1.0).is_err());
        assert!(GmifParams::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn gmif_derivative_matches_finite_differences() {
        for p in [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0] {
            let g = GmifParams::new(10.0, 1.0, p).unwrap();
            for k in 1..=9 {
                let chi = k as f64 / 10.0;
                let t = 1e-6;
                let fd = (g.eval_unchecked(chi + t) - g.eval_unchecked(chi - t)) / (2.0 * t);
                assert_relative_eq!(gmif_deriv(&g, chi).unwrap(), fd, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn geometric_limit_is_continuous() {
        let g0 = GmifParams::new(10.0, 1.0, 0.0).unwrap();
        let gs = GmifParams::new(10.0, 1.0, 1e-6).unwrap();
        assert_relative_eq!(g0.eval_unchecked(0.3), gs.eval_unchecked(0.3), max_relative = 1e-5);
    }

    #[test]
    fn heat_coefficient_examples() {
        let m = HeatMaterial::new(10.0, 1.0, 1.0, 100.0, ConductivityInterp::Linear).unwrap();
        let c1 = heat_coefficients(&m, 1.0).unwrap();
        assert_eq!((c1.kappa, c1.q), (10.0, 1.0));
        let c0 = heat_coefficients(&m, 0.0).unwrap();
        assert_eq!((c0.kappa, c0.q), (1.0, 100.0));
        assert_relative_eq!(heat_coefficients(&m, 0.5).unwrap().kappa, 5.5);
        assert_eq!(c0.dq, -99.0);
        let h = HeatMaterial::new(10.0, 1.0, 1.0, 100.0, ConductivityInterp::Gmif(-1.0)).unwrap();
        assert_relative_eq!(heat_coefficients(&h, 0.5).unwrap().kappa, 1.0 / 0.55, max_relative = 1e-14);
        assert!(HeatMaterial::new(1.0, 10.0, 1.0, 100.0, ConductivityInterp::<f64>::Linear).is_err());
        assert!(HeatMaterial::new(10.0, 1.0, 100.0, 1.0, ConductivityInterp::<f64>::Linear).is_err());
    }

    #[test]
    fn elastic_interp_derivatives() {
        for interp in [
            ElasticInterp::LinearStiffness,
            ElasticInterp::LinearCompliance,
            ElasticInterp::Gmif(-0.5),
            ElasticInterp::Gmif(0.5),
        ] {
            let m = ElasticMaterial::new(100.0, 0.01, 0.3, interp).unwrap();
            for k in 1..10 {
                let chi = k as f64 / 10.0;
                let t = 1e-6;
                let fd = (m.stiffness(chi + t) - m.stiffness(chi - t)) / (2.0 * t);
                assert_relative_eq!(m.stiffness_deriv(chi), fd, max_relative = 1e-7);
                let fd = (m.compliance(chi + t) - m.compliance(chi - t)) / (2.0 * t);
                assert_relative_eq!(m.compliance_deriv(chi), fd, max_relative = 1e-6);
                assert_relative_eq!(m.compliance(chi) * m.stiffness(chi), 1.0, max_relative = 1e-14);
            }
        }
        assert!(ElasticMaterial::new(1.0, 2.0, 0.3, ElasticInterp::LinearCompliance).is_err());
        assert!(ElasticMaterial::new(2.0, 1.0, 0.5, ElasticInterp::LinearCompliance).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let g = GmifParams::<f32>::new(10.0, 1.0, -1.0).unwrap();
        assert!((gmif_eval(&g, 0.5f32).unwrap() - 1.0 / 0.55).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn gmif_strictly_increasing(p in -1.0f64..=1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let g = GmifParams::new(10.0, 1.0, p).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(g.eval_unchecked(lo) < g.eval_unchecked(hi));
            prop_assert!(g.deriv_unchecked(0.5 * (lo + hi)) > 0.0);
        }

        #[test]
        fn gmif_nondecreasing_in_p(chi in 0.01f64..0.99) {
            let ps = [-1.0, -0.5, 0.0, 0.5, 1.0];
            let vals: Vec<f64> = ps.iter().map(|&p| GmifParams::new(10.0, 1.0, p).unwrap().eval_unchecked(chi)).collect();
            for w in vals.windows(2) {
                prop_assert!(w[0] <= w[1] * (1.0 + 1e-14));
            }
        }

        #[test]
        fn compliance_is_affine(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let m = mech();
            let mid = compliance_a(&m, 0.5 * (a + b)).unwrap();
            let avg = 0.5 * (compliance_a(&m, a).unwrap() + compliance_a(&m, b).unwrap());
            // rounding is relative to the largest term, 1/e_min
            prop_assert!((mid - avg).abs() <= 4.0 * f64::EPSILON / m.e_min);
        }
    }
}
