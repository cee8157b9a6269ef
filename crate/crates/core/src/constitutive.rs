//! Active, incompressible, transversely isotropic strain energy with the
//! collagen coupling constraint.
//!
//! The strain energy per unit reference volume is
//!
//! ```text
//! W = -p/2 (I3 - 1) + W_pas + β W_act + δ_A (-q/2) h(I4, I6)
//! W_pas = C1p (exp(Q) - 1)
//! Q     = C2p (I1-3)² + C3p (I1-3)(I4-1) + C4p (I4-1)²
//! W_act = C1a (I1-3)(I4-1) + C2a (I1-3)² + C3a (I4-1)² + C4a (I1-3)
//! h     = 1 - I6^½ + (π-2)(1 - I4^-¼) a/D
//! ```
//!
//! plus a beating tension `β T0` along the deformed fiber. The coupling term
//! (`δ_A = 1`) is only present while solving the free-contraction state; its
//! reaction stresses are then frozen as the pseudo-active tensions and
//! re-applied along the deformed fiber and strut directions in the loaded state.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{KinematicState, Mat3};

/// Largest admissible exponent in the passive law before `exp` overflows.
pub const Q_OVERFLOW_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub c1p_kpa: f64,
    pub c2p: f64,
    pub c3p: f64,
    pub c4p: f64,
    pub c1a_kpa: f64,
    pub c2a_kpa: f64,
    pub c3a_kpa: f64,
    pub c4a_kpa: f64,
    /// Maximal beating tension.
    pub t0_kpa: f64,
    /// Myocyte radius over strut period, `a / (4a + d)`.
    pub a_over_d: f64,
}

impl MaterialParams {
    /// Lin-Yin rabbit myocardium constants with the given beating tension and geometry.
    pub fn lin_yin(t0_kpa: f64, a_over_d: f64) -> Self {
        MaterialParams {
            c1p_kpa: 0.292,
            c2p: 0.321,
            c3p: -0.260,
            c4p: 0.201,
            c1a_kpa: -3.870,
            c2a_kpa: 4.830,
            c3a_kpa: 2.512,
            c4a_kpa: 0.951,
            t0_kpa,
            a_over_d,
        }
    }

    /// `T0 = 35 kPa`, `a/D = 0.2`.
    pub fn control() -> Self {
        Self::lin_yin(35.0, 0.2)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c1p_kpa,
            self.c2p,
            self.c3p,
            self.c4p,
            self.c1a_kpa,
            self.c2a_kpa,
            self.c3a_kpa,
            self.c4a_kpa,
            self.t0_kpa,
            self.a_over_d,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("material parameters must be finite".into()));
        }
        if !(self.c1p_kpa > 0.0) {
            return Err(Error::Config(format!("c1p_kpa must be > 0, got {}", self.c1p_kpa)));
        }
        if !(self.a_over_d > 0.0 && self.a_over_d < 0.25) {
            return Err(Error::Config(format!(
                "a_over_d must lie in (0, 0.25), got {}",
                self.a_over_d
            )));
        }
        Ok(())
    }

    fn coupling_factor(&self) -> f64 {
        (PI - 2.0) * self.a_over_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationState {
    pub beta: f64,
    /// True while solving the free-contraction state.
    pub free_contraction: bool,
}

impl ActivationState {
    pub fn new(beta: f64, free_contraction: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("activation must lie in [0, 1], got {beta}")));
        }
        Ok(ActivationState { beta, free_contraction })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultiplierPair {
    /// Incompressibility pressure (kPa).
    pub p: f64,
    /// Coupling-constraint multiplier (kPa).
    pub q: f64,
}

/// Constraint reaction tensions frozen at the free-contraction state (kPa).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PseudoActiveTensions {
    pub t_f: f64,
    pub t_cf: f64,
}

fn check_positive(i4: f64, i6: f64) -> Result<()> {
    if !(i4 > 0.0 && i6 > 0.0) {
        return Err(Error::Domain(format!(
            "fiber invariants must be positive, got I4 = {i4}, I6 = {i6}"
        )));
    }
    Ok(())
}

/// Collagen coupling constraint; zero on the constraint manifold.
pub fn constraint_h(i4: f64, i6: f64, a_over_d: f64) -> Result<f64> {
    check_positive(i4, i6)?;
    Ok(1.0 - i6.sqrt() + (PI - 2.0) * (1.0 - i4.powf(-0.25)) * a_over_d)
}

fn exponent_q(i1: f64, i4: f64, m: &MaterialParams) -> Result<f64> {
    let (a, b) = (i1 - 3.0, i4 - 1.0);
    let q = m.c2p * a * a + m.c3p * a * b + m.c4p * b * b;
    if !(q <= Q_OVERFLOW_GUARD) {
        return Err(Error::EnergyOverflow { q });
    }
    Ok(q)
}

pub fn passive_energy(i1: f64, i4: f64, m: &MaterialParams) -> Result<f64> {
    let q = exponent_q(i1, i4, m)?;
    Ok(m.c1p_kpa * q.exp_m1())
}

pub fn active_energy(i1: f64, i4: f64, m: &MaterialParams) -> f64 {
    let (a, b) = (i1 - 3.0, i4 - 1.0);
    m.c1a_kpa * a * b + m.c2a_kpa * a * a + m.c3a_kpa * b * b + m.c4a_kpa * a
}

/// First derivatives of the elastic energy `W* = W_pas + β W_act` with respect
/// to `I1`, `I4`, and of the constraint `h` with respect to `I4`, `I6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDerivatives {
    pub w1: f64,
    pub w4: f64,
    pub h4: f64,
    pub h6: f64,
}

impl EnergyDerivatives {
    /// Total invariant derivatives `(∂W/∂I1, ∂W/∂I4, ∂W/∂I6)` including the
    /// coupling energy `-q h / 2` when `free_contraction` is set.
    pub fn with_coupling(&self, q: f64, free_contraction: bool) -> (f64, f64, f64) {
        if free_contraction {
            (self.w1, self.w4 - 0.5 * q * self.h4, -0.5 * q * self.h6)
        } else {
            (self.w1, self.w4, 0.0)
        }
    }
}

pub fn energy_derivatives(i1: f64, i4: f64, i6: f64, beta: f64, m: &MaterialParams) -> Result<EnergyDerivatives> {
    check_positive(i4, i6)?;
    let q = exponent_q(i1, i4, m)?;
    let (a, b) = (i1 - 3.0, i4 - 1.0);
    let e = m.c1p_kpa * q.exp();
    let pas1 = e * (2.0 * m.c2p * a + m.c3p * b);
    let pas4 = e * (m.c3p * a + 2.0 * m.c4p * b);
    let act1 = m.c1a_kpa * b + 2.0 * m.c2a_kpa * a + m.c4a_kpa;
    let act4 = m.c1a_kpa * a + 2.0 * m.c3a_kpa * b;
    Ok(EnergyDerivatives {
        w1: pas1 + beta * act1,
        w4: pas4 + beta * act4,
        h4: 0.25 * m.coupling_factor() * i4.powf(-1.25),
        h6: -0.5 / i6.sqrt(),
    })
}

/// `T_f = -q h4 I4`, `T_cf = -q h6 I6`.
pub fn pseudo_active_tensions(q: f64, i4: f64, i6: f64, a_over_d: f64) -> Result<PseudoActiveTensions> {
    check_positive(i4, i6)?;
    let k = (PI - 2.0) * a_over_d;
    Ok(PseudoActiveTensions {
        t_f: -q * 0.25 * k * i4.powf(-0.25),
        t_cf: 0.5 * q * i6.sqrt(),
    })
}

fn inverse_c(state: &KinematicState) -> Result<Mat3> {
    state
        .c
        .try_inverse()
        .ok_or_else(|| Error::Singular("right Cauchy-Green tensor".into()))
}

/// Second Piola-Kirchhoff components `P^IJ` in the free-contraction state.
pub fn pk2_state_a(state: &KinematicState, multipliers: MultiplierPair, beta: f64, m: &MaterialParams) -> Result<Mat3> {
    let d = energy_derivatives(state.i1, state.i4, state.i6, beta, m)?;
    let mut p = -multipliers.p * inverse_c(state)? + Mat3::identity() * (2.0 * d.w1);
    p[(0, 0)] += 2.0 * d.w4 - multipliers.q * d.h4 + beta * m.t0_kpa / state.c[(0, 0)];
    p[(1, 1)] -= multipliers.q * d.h6;
    Ok(symmetrize(p))
}

/// Second Piola-Kirchhoff components `P^IJ` in the loaded state.
pub fn pk2_state_c(
    state: &KinematicState,
    p: f64,
    beta: f64,
    tensions: PseudoActiveTensions,
    m: &MaterialParams,
) -> Result<Mat3> {
    let d = energy_derivatives(state.i1, state.i4, state.i6, beta, m)?;
    let mut s = -p * inverse_c(state)? + Mat3::identity() * (2.0 * d.w1);
    s[(0, 0)] += 2.0 * d.w4 + (beta * m.t0_kpa + tensions.t_f) / state.c[(0, 0)];
    s[(1, 1)] += tensions.t_cf / state.c[(1, 1)];
    Ok(symmetrize(s))
}

fn symmetrize(m: Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Contravariant world components of the Cauchy stress, `τ = J⁻¹ Φ P Φᵀ`.
pub fn cauchy_from_pk2(state: &KinematicState, pk2: &Mat3) -> Result<Mat3> {
    let f = state.phi.components();
    let j = state.i3.sqrt();
    if !(j > 0.0) || f.determinant() == 0.0 {
        return Err(Error::Singular("deformation gradient".into()));
    }
    Ok(symmetrize(f * pk2 * f.transpose() / j))
}

/// Inverse of [`cauchy_from_pk2`].
pub fn pk2_from_cauchy(state: &KinematicState, tau: &Mat3) -> Result<Mat3> {
    let f = state.phi.components();
    let inv = f
        .try_inverse()
        .ok_or_else(|| Error::Singular("deformation gradient".into()))?;
    Ok(symmetrize(inv * tau * inv.transpose() * state.i3.sqrt()))
}

/// Physical Cauchy normal stresses along the deformed body directions
/// `g_I / |g_I|`: `σ_II = (C P C)_II / (J C_II)`.
pub fn physical_normal_stresses(state: &KinematicState, pk2: &Mat3) -> [f64; 3] {
    let cpc = state.c * pk2 * state.c;
    let j = state.i3.sqrt();
    [0, 1, 2].map(|i| cpc[(i, i)] / (j * state.c[(i, i)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{deformation_gradient, strain_state, CoordinateChart, Vec3};
    use proptest::prelude::*;

    fn state_of(f: Mat3) -> KinematicState {
        strain_state(&deformation_gradient(&f), CoordinateChart::Cartesian, &Vec3::zeros()).unwrap()
    }

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(a, b, c))
    }

    #[test]
    fn constraint_values() {
        assert_eq!(constraint_h(1.0, 1.0, 0.13).unwrap(), 0.0);
        assert!((constraint_h(1.0, 1.21, 0.2).unwrap() + 0.1).abs() < 1e-15);
        let expected = (PI - 2.0) * 0.5 * 0.2;
        assert!((constraint_h(16.0, 1.0, 0.2).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.11416).abs() < 1e-5);
        assert!(constraint_h(0.0, 1.0, 0.2).is_err());
        assert!(constraint_h(1.0, -1.0, 0.2).is_err());
    }

    #[test]
    fn energies_vanish_at_reference() {
        let m = MaterialParams::control();
        assert_eq!(passive_energy(3.0, 1.0, &m).unwrap(), 0.0);
        assert_eq!(active_energy(3.0, 1.0, &m), 0.0);
    }

    /// Independent one-line evaluation of the passive and active laws.
    fn energies_by_hand(i1: f64, i4: f64) -> (f64, f64) {
        let (x, y) = (i1 - 3.0, i4 - 1.0);
        let q = 0.321 * x.powi(2) - 0.260 * x * y + 0.201 * y.powi(2);
        let pas = 0.292 * (q.exp() - 1.0);
        let act = -3.870 * x * y + 4.830 * x.powi(2) + 2.512 * y.powi(2) + 0.951 * x;
        (pas, act)
    }

    #[test]
    fn equibiaxial_energies() {
        let m = MaterialParams::control();
        let i1 = 2.0 * 1.44 + 1.0 / (1.44 * 1.44);
        let (pas, act) = energies_by_hand(i1, 1.44);
        assert!((passive_energy(i1, 1.44, &m).unwrap() - pas).abs() < 1e-15);
        assert!((active_energy(i1, 1.44, &m) - act).abs() < 1e-14);
        assert!((pas - 0.0118).abs() < 5e-5, "{pas}");
        assert!((act - 0.848).abs() < 5e-4, "{act}");
    }

    #[test]
    fn active_energy_is_linear_in_coefficients() {
        let m = MaterialParams::control();
        let mut m2 = m;
        m2.c1a_kpa *= 2.0;
        m2.c2a_kpa *= 2.0;
        m2.c3a_kpa *= 2.0;
        m2.c4a_kpa *= 2.0;
        for (i1, i4) in [(3.3, 1.2), (3.05, 0.7), (4.0, 2.0)] {
            assert_eq!(active_energy(i1, i4, &m2), 2.0 * active_energy(i1, i4, &m));
        }
    }

    #[test]
    fn overflow_guard_trips() {
        let m = MaterialParams::control();
        assert!(matches!(
            passive_energy(3.0, 100.0, &m),
            Err(Error::EnergyOverflow { .. })
        ));
        assert!(energy_derivatives(3.0, 100.0, 1.0, 0.0, &m).is_err());
    }

    #[test]
    fn reference_derivatives() {
        let m = MaterialParams::control();
        let d = energy_derivatives(3.0, 1.0, 1.0, 0.0, &m).unwrap();
        assert_eq!((d.w1, d.w4), (0.0, 0.0));
        let d = energy_derivatives(3.0, 1.0, 1.0, 1.0, &m).unwrap();
        assert_eq!((d.w1, d.w4), (0.951, 0.0));
        let d = energy_derivatives(3.0, 1.0, 4.0, 1.0, &m).unwrap();
        assert_eq!(d.h6, -0.25);
    }

    #[test]
    fn tensions_values() {
        let t = pseudo_active_tensions(0.0, 1.3, 0.9, 0.2).unwrap();
        assert_eq!((t.t_f, t.t_cf), (0.0, 0.0));
        let t = pseudo_active_tensions(2.0, 1.0, 1.0, 0.2).unwrap();
        assert!((t.t_cf - 1.0).abs() < 1e-15);
        assert!((t.t_f + 2.0 * (PI - 2.0) * 0.05).abs() < 1e-15);
        assert!((t.t_f + 0.11416).abs() < 1e-5);
        let t3 = pseudo_active_tensions(6.0, 1.0, 1.0, 0.2).unwrap();
        assert!((t3.t_cf - 3.0 * t.t_cf).abs() < 1e-15);
        assert!(pseudo_active_tensions(1.0, 0.0, 1.0, 0.2).is_err());
    }

    #[test]
    fn tensions_are_reaction_of_coupling_energy() {
        // T = 2 ∂(-q h/2)/∂I · I, checked against finite differences of h
        let (q, i4, i6, ad) = (3.7, 0.6, 0.95, 0.15);
        let eps = 1e-6;
        let dh4 = (constraint_h(i4 + eps, i6, ad).unwrap() - constraint_h(i4 - eps, i6, ad).unwrap()) / (2.0 * eps);
        let dh6 = (constraint_h(i4, i6 + eps, ad).unwrap() - constraint_h(i4, i6 - eps, ad).unwrap()) / (2.0 * eps);
        let t = pseudo_active_tensions(q, i4, i6, ad).unwrap();
        assert!((t.t_f - (-q * dh4 * i4)).abs() < 1e-8);
        assert!((t.t_cf - (-q * dh6 * i6)).abs() < 1e-8);
    }

    #[test]
    fn pk2_a_reference() {
        let m = MaterialParams::control();
        let k = state_of(Mat3::identity());
        let p = pk2_state_a(&k, MultiplierPair::default(), 0.0, &m).unwrap();
        assert_eq!(p, Mat3::zeros());
        let p = pk2_state_a(&k, MultiplierPair::default(), 1.0, &m).unwrap();
        assert!((p[(0, 0)] - (2.0 * 0.951 + 35.0)).abs() < 1e-13);
        assert!((p[(1, 1)] - 2.0 * 0.951).abs() < 1e-13);
    }

    #[test]
    fn pk2_a_isolates_coupling_term() {
        let m = MaterialParams::control();
        let k = state_of(diag(0.8, 1.05, 1.0 / 0.84));
        let mp = MultiplierPair { p: 3.0, q: 0.0 };
        let base = pk2_state_a(&k, mp, 0.6, &m).unwrap();
        let q = 5.5;
        let with_q = pk2_state_a(&k, MultiplierPair { p: 3.0, q }, 0.6, &m).unwrap();
        let d = energy_derivatives(k.i1, k.i4, k.i6, 0.6, &m).unwrap();
        assert!((with_q[(1, 1)] - base[(1, 1)] + q * d.h6).abs() < 1e-14);
        assert!((with_q[(0, 0)] - base[(0, 0)] + q * d.h4).abs() < 1e-14);
        assert_eq!(with_q[(2, 2)], base[(2, 2)]);
    }

    #[test]
    fn pk2_c_reference_and_difference() {
        let m = MaterialParams::control();
        let k = state_of(Mat3::identity());
        let zero = PseudoActiveTensions::default();
        assert_eq!(pk2_state_c(&k, 0.0, 0.0, zero, &m).unwrap(), Mat3::zeros());

        let t = PseudoActiveTensions { t_f: -1.3, t_cf: 4.2 };
        let beta = 0.7;
        // choose p so that P^33 vanishes
        let d = energy_derivatives(3.0, 1.0, 1.0, beta, &m).unwrap();
        let p = 2.0 * d.w1;
        let s = pk2_state_c(&k, p, beta, t, &m).unwrap();
        assert!(s[(2, 2)].abs() < 1e-14);
        let expected = 2.0 * d.w4 + beta * m.t0_kpa + t.t_f - t.t_cf;
        assert!((s[(0, 0)] - s[(1, 1)] - expected).abs() < 1e-13);
    }

    #[test]
    fn pk2_c_matches_pk2_a_with_frozen_tensions() {
        let m = MaterialParams::control();
        let k = state_of(diag(0.75, 0.97, 1.0 / (0.75 * 0.97)));
        let mp = MultiplierPair { p: 12.0, q: 30.0 };
        let a = pk2_state_a(&k, mp, 0.9, &m).unwrap();
        let t = pseudo_active_tensions(mp.q, k.i4, k.i6, m.a_over_d).unwrap();
        let c = pk2_state_c(&k, mp.p, 0.9, t, &m).unwrap();
        assert!((a - c).abs().max() < 1e-13);
    }

    #[test]
    fn cauchy_push_forward() {
        let m = MaterialParams::control();
        let k = state_of(Mat3::identity());
        let p = pk2_state_a(&k, MultiplierPair { p: 1.0, q: 2.0 }, 0.5, &m).unwrap();
        assert_eq!(cauchy_from_pk2(&k, &p).unwrap(), p);

        let (l1, l2) = (1.3, 0.9);
        let l3 = 1.0 / (l1 * l2);
        let k = state_of(diag(l1, l2, l3));
        let p = pk2_state_c(&k, 2.0, 0.3, PseudoActiveTensions { t_f: 1.0, t_cf: 2.0 }, &m).unwrap();
        let tau = cauchy_from_pk2(&k, &p).unwrap();
        for (i, l) in [l1, l2, l3].into_iter().enumerate() {
            assert!((tau[(i, i)] - l * l * p[(i, i)]).abs() < 1e-13);
        }
        let s = physical_normal_stresses(&k, &p);
        for i in 0..3 {
            assert!((s[i] - tau[(i, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniaxial_passive_stretch_has_positive_fiber_stress() {
        let m = MaterialParams::control();
        let l = 1.2_f64;
        let lt = 1.0 / l.sqrt();
        let k = state_of(diag(l, lt, lt));
        let d = energy_derivatives(k.i1, k.i4, k.i6, 0.0, &m).unwrap();
        // σ33 = 0 fixes p; σ22 = σ33 by symmetry
        let p = 2.0 * d.w1 * lt * lt;
        let s = pk2_state_c(&k, p, 0.0, PseudoActiveTensions::default(), &m).unwrap();
        assert!(s[(2, 2)].abs() < 1e-14 && s[(1, 1)].abs() < 1e-14);
        assert!(s[(0, 0)] > 0.0);
    }

    #[test]
    fn constraint_slopes() {
        // ∂h/∂λcf = -1 and ∂h/∂λf > 0 across admissible stretches
        for lf in [0.4, 0.7, 1.0, 1.3, 2.0] {
            for lcf in [0.6, 1.0, 1.5] {
                let eps = 1e-6;
                let h = |a: f64, b: f64| constraint_h(a * a, b * b, 0.2).unwrap();
                let dcf = (h(lf, lcf + eps) - h(lf, lcf - eps)) / (2.0 * eps);
                let df = (h(lf + eps, lcf) - h(lf - eps, lcf)) / (2.0 * eps);
                assert!((dcf + 1.0).abs() < 1e-8);
                assert!(df > 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn pk2_a_round_trips_through_cauchy(
            vals in proptest::collection::vec(-0.25f64..0.25, 9),
            p in -20.0f64..20.0, q in -20.0f64..20.0, beta in 0.0f64..1.0,
        ) {
            let mut f = Mat3::identity();
            for (k, v) in vals.iter().enumerate() {
                f[(k / 3, k % 3)] += v;
            }
            prop_assume!(f.determinant() > 0.2);
            let k = state_of(f);
            let m = MaterialParams::control();
            let s = pk2_state_a(&k, MultiplierPair { p, q }, beta, &m).unwrap();
            prop_assert_eq!(s, s.transpose());
            let tau = cauchy_from_pk2(&k, &s).unwrap();
            let back = pk2_from_cauchy(&k, &tau).unwrap();
            let again = cauchy_from_pk2(&k, &back).unwrap();
            let scale = tau.abs().max().max(1.0);
            prop_assert!((again - tau).abs().max() <= 1e-13 * scale);
        }
    }
}
