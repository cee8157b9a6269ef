//! Axisymmetric inflation-extension of an incompressible thick-walled tube
//! with circumferential fibers and axial struts.
//!
//! The deformation `r(R) = sqrt(r_i² + (R² - R_i²) / λz)`, `z = λz Z` is
//! isochoric by construction. Radial equilibrium integrated across the wall
//! with `σ_rr(r_o) = 0`, `σ_rr(r_i) = -P` gives
//!
//! ```text
//! ∫ (σθθ - σrr) / r dr = P
//! ```
//!
//! and zero net axial force, after integrating `∫ σrr r dr` by parts, reads
//!
//! ```text
//! ∫ (σzz - (σθθ + σrr) / 2) r dr + P r_i² / 2 = 0.
//! ```

use crate::constitutive::{MaterialParams, PseudoActiveTensions};
use crate::error::{Error, Result};

use super::numeric::{bracket_near, find_root, gauss_legendre};
use super::slab::{elastic_parts, Law};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderGeometry {
    pub r_int: f64,
    pub r_ext: f64,
    pub length: f64,
}

impl CylinderGeometry {
    /// Reference tube of the autoregulation experiment (cm).
    pub fn artery() -> Self {
        CylinderGeometry {
            r_int: 0.2,
            r_ext: 0.35,
            length: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    /// Reference radius.
    pub big_r: f64,
    pub r: f64,
    pub sigma_rr: f64,
    pub sigma_tt: f64,
    pub sigma_zz: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderSolution {
    pub geometry: CylinderGeometry,
    pub r_int: f64,
    pub r_ext: f64,
    pub lambda_z: f64,
    pub height: f64,
    pub profile: Vec<ProfilePoint>,
}

impl CylinderSolution {
    /// Deformed radius of the material cylinder at reference radius `big_r`.
    pub fn radius(&self, big_r: f64) -> f64 {
        let ri = self.geometry.r_int;
        (self.r_int * self.r_int + (big_r * big_r - ri * ri) / self.lambda_z).sqrt()
    }
}

const PRESSURE_STEPS: usize = 24;

/// Quadrature panels across the wall.
pub const DEFAULT_PANELS: usize = 32;

struct Wall<'a, T: Fn(f64) -> PseudoActiveTensions> {
    g: CylinderGeometry,
    beta: f64,
    params: &'a MaterialParams,
    tensions: &'a T,
    panels: usize,
}

impl<T: Fn(f64) -> PseudoActiveTensions> Wall<'_, T> {
    fn radius(&self, ri: f64, lz: f64, big_r: f64) -> Result<f64> {
        let r2 = ri * ri + (big_r * big_r - self.g.r_int * self.g.r_int) / lz;
        if !(r2 > 0.0) {
            return Err(Error::Domain(format!("deformed radius² = {r2}")));
        }
        Ok(r2.sqrt())
    }

    /// `(r, [σθθ, σzz, σrr] at p = 0)`.
    fn stresses(&self, ri: f64, lz: f64, big_r: f64) -> Result<(f64, [f64; 3])> {
        let r = self.radius(ri, lz, big_r)?;
        let l = [r / big_r, lz, big_r / (r * lz)];
        let a = elastic_parts(
            l,
            self.beta,
            Law::StateC {
                tensions: (self.tensions)(big_r),
            },
            self.params,
        )?;
        Ok((r, [0, 1, 2].map(|i| l[i] * l[i] * a[i])))
    }

    /// `∫ (σθθ - σrr) / r dr` from `big_r` to the outer wall.
    fn hoop_integral(&self, ri: f64, lz: f64, from: f64) -> Result<f64> {
        let f = |big_r: f64| -> Result<f64> {
            let (r, s) = self.stresses(ri, lz, big_r)?;
            Ok((s[0] - s[2]) / r * big_r / (r * lz))
        };
        gauss_legendre(&f, from, self.g.r_ext, self.panels)
    }

    fn axial_force(&self, ri: f64, lz: f64, pressure: f64) -> Result<f64> {
        let f = |big_r: f64| -> Result<f64> {
            let (_, s) = self.stresses(ri, lz, big_r)?;
            Ok((s[1] - 0.5 * (s[0] + s[2])) * big_r / lz)
        };
        Ok(gauss_legendre(&f, self.g.r_int, self.g.r_ext, self.panels)? + 0.5 * pressure * ri * ri)
    }

    /// Root of the radial balance nearest `start`.
    fn inner_radius(&self, lz: f64, pressure: f64, start: f64) -> Result<f64> {
        let g = |ri: f64| Ok(self.hoop_integral(ri, lz, self.g.r_int)? - pressure);
        let r0 = self.g.r_int;
        let (lo, hi) = bracket_near(&g, start, 2e-3 * r0, 0.05 * r0, 5.0 * r0)?;
        if lo == hi {
            return Ok(lo);
        }
        find_root(g, lo, hi)
    }
}

/// Solves for `(r_int, λz)` under lumen pressure `pressure` (kPa) with zero net
/// axial force; `tensions` gives the frozen tensions at each reference radius.
pub fn cylinder_solve<T>(
    geometry: CylinderGeometry,
    pressure: f64,
    beta: f64,
    params: &MaterialParams,
    tensions: &T,
    panels: usize,
) -> Result<CylinderSolution>
where
    T: Fn(f64) -> PseudoActiveTensions,
{
    params.validate()?;
    if !(pressure >= 0.0 && pressure.is_finite()) {
        return Err(Error::Domain(format!("pressure must be ≥ 0, got {pressure}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("activation must lie in [0, 1], got {beta}")));
    }
    if !(geometry.r_int > 0.0 && geometry.r_ext > geometry.r_int && geometry.length > 0.0) {
        return Err(Error::Domain(format!("invalid tube geometry {geometry:?}")));
    }
    let wall = Wall {
        g: geometry,
        beta,
        params,
        tensions,
        panels: panels.max(1),
    };
    // The pressure-radius response of an activated tube can pass a limit
    // point, so follow the branch reached by loading from zero pressure.
    let mut r_int = geometry.r_int;
    let mut lambda_z = 1.0;
    let steps = if pressure > 0.0 { PRESSURE_STEPS } else { 0 };
    for k in 0..=steps {
        let pk = if steps == 0 {
            0.0
        } else {
            pressure * k as f64 / steps as f64
        };
        let start = r_int;
        let force = |lz: f64| -> Result<f64> {
            let ri = wall.inner_radius(lz, pk, start)?;
            wall.axial_force(ri, lz, pk)
        };
        let (lo, hi) = bracket_near(&force, lambda_z, 2e-3, 0.2, 5.0)?;
        lambda_z = if lo == hi { lo } else { find_root(force, lo, hi)? };
        r_int = wall.inner_radius(lambda_z, pk, start)?;
    }
    if !(r_int > 0.0) {
        return Err(Error::Domain(format!("non-physical inner radius {r_int}")));
    }
    let samples = 4 * wall.panels;
    let profile = (0..=samples)
        .map(|k| {
            let big_r = geometry.r_int + (geometry.r_ext - geometry.r_int) * k as f64 / samples as f64;
            let (r, s) = wall.stresses(r_int, lambda_z, big_r)?;
            let sigma_rr = -wall.hoop_integral(r_int, lambda_z, big_r)?;
            let p = s[2] - sigma_rr;
            Ok(ProfilePoint {
                big_r,
                r,
                sigma_rr,
                sigma_tt: s[0] - p,
                sigma_zz: s[1] - p,
                p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CylinderSolution {
        geometry,
        r_int,
        r_ext: wall.radius(r_int, lambda_z, geometry.r_ext)?,
        lambda_z,
        height: geometry.length * lambda_z,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none(_: f64) -> PseudoActiveTensions {
        PseudoActiveTensions::default()
    }

    #[test]
    fn unloaded_passive_tube_is_undeformed() {
        let s = cylinder_solve(
            CylinderGeometry::artery(),
            0.0,
            0.0,
            &MaterialParams::control(),
            &none,
            DEFAULT_PANELS,
        )
        .unwrap();
        assert_eq!(s.lambda_z, 1.0);
        assert_eq!(s.r_int, 0.2);
        assert!(s.profile.iter().all(|p| p.sigma_rr == 0.0));
    }

    #[test]
    fn pressure_inflates_and_boundary_values_hold() {
        let m = MaterialParams::control();
        let s = cylinder_solve(CylinderGeometry::artery(), 8.0, 0.0, &m, &none, DEFAULT_PANELS).unwrap();
        assert!(s.r_int > 0.2);
        let first = s.profile.first().unwrap();
        let last = s.profile.last().unwrap();
        assert!((first.sigma_rr + 8.0).abs() < 1e-10, "{}", first.sigma_rr);
        assert_eq!(last.sigma_rr, 0.0);
        // incompressibility map
        let g = s.geometry;
        let lhs = s.r_ext * s.r_ext - s.r_int * s.r_int;
        assert!((lhs - (g.r_ext * g.r_ext - g.r_int * g.r_int) / s.lambda_z).abs() < 1e-14);
    }

    #[test]
    fn activation_contracts_the_ring() {
        let m = MaterialParams::control();
        let s = cylinder_solve(CylinderGeometry::artery(), 0.0, 1.0, &m, &none, DEFAULT_PANELS).unwrap();
        assert!(s.r_int < 0.2);
    }

    #[test]
    fn halving_the_panel_width_leaves_profiles_unchanged() {
        let m = MaterialParams::control();
        let a = cylinder_solve(CylinderGeometry::artery(), 18.0, 0.5, &m, &none, DEFAULT_PANELS).unwrap();
        let b = cylinder_solve(CylinderGeometry::artery(), 18.0, 0.5, &m, &none, 2 * DEFAULT_PANELS).unwrap();
        for pa in &a.profile {
            let pb = b.profile.iter().find(|p| (p.big_r - pa.big_r).abs() < 1e-15).unwrap();
            assert!((pa.sigma_rr - pb.sigma_rr).abs() < 1e-10);
        }
    }
}
