//! Homogeneous diagonal deformations of the slab.
//!
//! With `C = diag(λ1², λ2², λ3²)` every PK2 component is diagonal and reads
//! `P^{ii} = -p / λi² + a_i`, where `a_i` collects the elastic, active and
//! coupling terms. Traction-free faces and incompressibility then reduce each
//! experiment to one scalar equation.

use crate::constitutive::{energy_derivatives, pseudo_active_tensions, MaterialParams, PseudoActiveTensions};
use crate::error::{Error, Result};

use super::numeric::{bracket_near, find_root};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlabScenario {
    FreeContraction,
    /// Prescribed stretch along body axis `axis`, the other faces free.
    Uniaxial {
        axis: usize,
        stretch: f64,
    },
    /// Equal prescribed stretch along the fiber and strut axes.
    Equibiaxial {
        stretch: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousSolution {
    /// `(λ1, λ2, λ3)`: fiber, strut, thickness.
    pub stretches: [f64; 3],
    pub p: f64,
    /// Coupling multiplier (free contraction only; zero otherwise).
    pub q: f64,
    /// Diagonal PK2 components.
    pub pk2: [f64; 3],
    /// Physical Cauchy normal stresses `σ_ii = λi² P^{ii}`.
    pub sigma: [f64; 3],
    /// Tensions of the free-contraction state at the same activation.
    pub tensions: PseudoActiveTensions,
}

#[derive(Debug, Clone, Copy)]
pub(super) enum Law {
    StateA { q: f64 },
    StateC { tensions: PseudoActiveTensions },
}

/// `a_i` of `P^{ii} = -p / λi² + a_i`.
pub(super) fn elastic_parts(l: [f64; 3], beta: f64, law: Law, m: &MaterialParams) -> Result<[f64; 3]> {
    let c = l.map(|v| v * v);
    let d = energy_derivatives(c[0] + c[1] + c[2], c[0], c[1], beta, m)?;
    let mut a = [2.0 * d.w1; 3];
    a[0] += 2.0 * d.w4 + beta * m.t0_kpa / c[0];
    match law {
        Law::StateA { q } => {
            a[0] -= q * d.h4;
            a[1] -= q * d.h6;
        }
        Law::StateC { tensions } => {
            a[0] += tensions.t_f / c[0];
            a[1] += tensions.t_cf / c[1];
        }
    }
    Ok(a)
}

fn finish(l: [f64; 3], p: f64, q: f64, a: [f64; 3], tensions: PseudoActiveTensions) -> HomogeneousSolution {
    let pk2 = [0, 1, 2].map(|i| a[i] - p / (l[i] * l[i]));
    let sigma = [0, 1, 2].map(|i| l[i] * l[i] * pk2[i]);
    HomogeneousSolution {
        stretches: l,
        p,
        q,
        pk2,
        sigma,
        tensions,
    }
}

/// Strut stretch on the constraint manifold `h = 0`.
fn strut_on_manifold(l1: f64, m: &MaterialParams) -> f64 {
    1.0 + (std::f64::consts::PI - 2.0) * (1.0 - l1.powf(-0.5)) * m.a_over_d
}

const SCAN_STEP: f64 = 1e-3;

fn free_contraction(beta: f64, m: &MaterialParams, coupling: bool) -> Result<HomogeneousSolution> {
    // all quantities as functions of the fiber stretch
    let resolve = |l1: f64| -> Result<(f64, [f64; 3], f64, [f64; 3])> {
        if coupling {
            let l2 = strut_on_manifold(l1, m);
            if !(l2 > 0.0) {
                return Err(Error::Domain(format!("strut stretch {l2} at λ1 = {l1}")));
            }
            let l = [l1, l2, 1.0 / (l1 * l2)];
            let d = energy_derivatives(l1 * l1 + l2 * l2 + l[2] * l[2], l1 * l1, l2 * l2, beta, m)?;
            let p = 2.0 * d.w1 * l[2] * l[2];
            let q = (2.0 * d.w1 - p / (l2 * l2)) / d.h6;
            let a = elastic_parts(l, beta, Law::StateA { q }, m)?;
            Ok((a[0] - p / (l1 * l1), l, q, a))
        } else {
            let t = l1.powf(-0.5);
            let l = [l1, t, t];
            let a = elastic_parts(l, beta, Law::StateA { q: 0.0 }, m)?;
            let p = a[2] * t * t;
            Ok((a[0] - p / (l1 * l1), l, 0.0, a))
        }
    };
    let g = |l1: f64| resolve(l1).map(|r| r.0);
    let (lo, hi) = bracket_near(&g, 1.0, SCAN_STEP, 0.2, 2.0)?;
    let l1 = if lo == hi { lo } else { find_root(g, lo, hi)? };
    let (_, l, q, a) = resolve(l1)?;
    let p = a[2] * l[2] * l[2];
    let tensions = if coupling {
        pseudo_active_tensions(q, l[0] * l[0], l[1] * l[1], m.a_over_d)?
    } else {
        PseudoActiveTensions::default()
    };
    Ok(finish(l, p, q, a, tensions))
}

pub fn slab_solve(
    scenario: SlabScenario,
    beta: f64,
    params: &MaterialParams,
    coupling: bool,
) -> Result<HomogeneousSolution> {
    params.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("activation must lie in [0, 1], got {beta}")));
    }
    let a_state = free_contraction(beta, params, coupling)?;
    let law = Law::StateC {
        tensions: a_state.tensions,
    };
    match scenario {
        SlabScenario::FreeContraction => Ok(a_state),
        SlabScenario::Equibiaxial { stretch } => {
            check_stretch(stretch)?;
            let l = [stretch, stretch, 1.0 / (stretch * stretch)];
            let a = elastic_parts(l, beta, law, params)?;
            let p = a[2] * l[2] * l[2];
            Ok(finish(l, p, 0.0, a, a_state.tensions))
        }
        SlabScenario::Uniaxial { axis, stretch } => {
            check_stretch(stretch)?;
            if axis > 2 {
                return Err(Error::Config(format!("axis must be 0..=2, got {axis}")));
            }
            let (j, k) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let stretches = |lj: f64| {
                let mut l = [0.0; 3];
                l[axis] = stretch;
                l[j] = lj;
                l[k] = 1.0 / (stretch * lj);
                l
            };
            let g = |lj: f64| -> Result<f64> {
                let l = stretches(lj);
                let a = elastic_parts(l, beta, law, params)?;
                let p = a[k] * l[k] * l[k];
                Ok(a[j] - p / (lj * lj))
            };
            let guess = stretch.powf(-0.5);
            let (lo, hi) = bracket_near(&g, guess, SCAN_STEP * guess, 0.1 * guess, 10.0 * guess)?;
            let lj = if lo == hi { lo } else { find_root(g, lo, hi)? };
            let l = stretches(lj);
            let a = elastic_parts(l, beta, law, params)?;
            let p = a[k] * l[k] * l[k];
            Ok(finish(l, p, 0.0, a, a_state.tensions))
        }
    }
}

fn check_stretch(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("stretch must be positive, got {s}")));
    }
    Ok(())
}
