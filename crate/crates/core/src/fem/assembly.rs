//! Residual assembly for the mixed Q1–Q0 system.
//!
//! Row layout matches [`DofMap`]: nodal rows (covariant world components of
//! the virtual work, kPa·cm²), then per-element incompressibility rows
//! `V_e⁻¹ ∫ (I3 - 1) dV`, then per-element coupling rows `V_e⁻¹ ∫ h dV`
//! when the coupling constraint is active.
//!
//! The nodal rows pair with the chart coordinates `θ^γ` of the nodes: the
//! test field of row `(n, γ)` is `ψ_n g_γ`, so with `s = Φ P` and
//! `M = Φ P Φᵀ`
//!
//! ```text
//! R_{n,γ} = ∫ g_{γα} s^{αI} ∂ψ_n/∂X^I + ½ ψ_n M^{αβ} ∂g_{αβ}/∂θ^γ dV
//! ```
//!
//! which is the coordinate gradient of the discrete stored energy whenever
//! the stress derives from one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dofs::{DofMap, DofState, Slot};
use super::mesh::{Mesh, ReferencePoint};
use super::shape::{face_axes, face_gauss_points, face_nodes, shape_eval};
use crate::constitutive::{
    constraint_h, physical_normal_stresses, pk2_state_a, pk2_state_c, pseudo_active_tensions, MaterialParams,
    MultiplierPair, PseudoActiveTensions,
};
use crate::error::{Error, Result};
use crate::tensor::{
    christoffel, covariant_basis, deformation_gradient, metric_at, strain_state, CoordinateChart, KinematicState, Mat3,
    Vec3,
};

/// Tensions at the eight Gauss points of one element.
pub type ElementTensions = [PseudoActiveTensions; 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    /// Scalar pressure (kPa) on the deformed face, pushing into the body.
    FollowerPressure(f64),
    /// Covariant world components per unit reference area (kPa).
    ReferenceTraction([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoad {
    pub set: String,
    pub kind: LoadKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// Free contraction: no surface loads; coupling rows present iff the map has them.
    FreeContraction { beta: f64 },
    /// Loaded state with frozen tensions per element and Gauss point.
    Loaded { beta: f64, tensions: Vec<ElementTensions> },
}

impl Stage {
    pub fn beta(&self) -> f64 {
        match self {
            Stage::FreeContraction { beta } | Stage::Loaded { beta, .. } => *beta,
        }
    }
}

/// Kinematics at one Gauss point of the current configuration.
#[derive(Debug, Clone, Copy)]
pub struct GaussState {
    /// Deformed world point `θ`.
    pub position: Vec3,
    pub kin: KinematicState,
    pub reference: ReferencePoint,
}

pub(crate) fn gauss_states(
    mesh: &Mesh,
    e: usize,
    coords: &[Vec3],
    reference: &[ReferencePoint; 8],
) -> Result<[GaussState; 8]> {
    let xs = mesh.element_nodes(e, coords);
    let mut out = Vec::with_capacity(8);
    for (g, rp) in reference.iter().enumerate() {
        let mut position = Vec3::zeros();
        let mut phi = Mat3::zeros();
        for n in 0..8 {
            position += rp.psi[n] * xs[n];
            phi += xs[n] * rp.dpsi_dx[n].transpose();
        }
        let kin = strain_state(&deformation_gradient(&phi), mesh.chart, &position).map_err(|err| locate(err, e, g))?;
        out.push(GaussState {
            position,
            kin,
            reference: *rp,
        });
    }
    Ok(out.try_into().expect("eight Gauss points"))
}

fn locate(err: Error, element: usize, point: usize) -> Error {
    match err {
        Error::InvertedElement { det, .. } => Error::InvertedElement { element, point, det },
        Error::Domain(msg) => Error::Domain(format!("element {element}, point {point}: {msg}")),
        other => other,
    }
}

/// Cartesian tangent vectors `∂y/∂ξ_a`, `∂y/∂ξ_b` of a face at `xi`, ordered so
/// that their cross product is the outward area vector.
pub fn face_tangents(chart: CoordinateChart, xs: &[Vec3; 8], xi: &Vec3, face: usize) -> (Vec3, Vec3) {
    let (_, a, b, _) = face_axes(face);
    let s = shape_eval(xi);
    let mut position = Vec3::zeros();
    let mut jac = Mat3::zeros();
    for n in 0..8 {
        position += s.psi[n] * xs[n];
        jac += xs[n] * s.dpsi[n].transpose();
    }
    let basis = covariant_basis(chart, &position);
    (basis * jac.column(a), basis * jac.column(b))
}

/// External nodal loads (covariant components, kPa·cm²) of a follower pressure
/// on a face set, evaluated in the configuration `coords`.
pub fn follower_pressure_loads(mesh: &Mesh, coords: &[Vec3], set: &str, pressure: f64) -> Result<Vec<(usize, Vec3)>> {
    if !pressure.is_finite() {
        return Err(Error::Config(format!("pressure on '{set}' is not finite")));
    }
    let mut out = Vec::new();
    for f in mesh.face_set(set)? {
        let xs = mesh.element_nodes(f.element, coords);
        let mut nodal = [Vec3::zeros(); 8];
        for (xi, w) in face_gauss_points(f.face) {
            let (ta, tb) = face_tangents(mesh.chart, &xs, &xi, f.face);
            let area = ta.cross(&tb);
            let norm = area.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::DegenerateFace {
                    element: f.element,
                    face: f.face,
                });
            }
            let s = shape_eval(&xi);
            let position: Vec3 = (0..8).map(|n| s.psi[n] * xs[n]).sum();
            let tangent = covariant_basis(mesh.chart, &position);
            let force = -pressure * w * (tangent.transpose() * area);
            for k in face_nodes(f.face) {
                nodal[k] += s.psi[k] * force;
            }
        }
        for k in face_nodes(f.face) {
            out.push((mesh.elements[f.element][k], nodal[k]));
        }
    }
    Ok(out)
}

fn reference_traction_loads(mesh: &Mesh, set: &str, traction: [f64; 3]) -> Result<Vec<(usize, Vec3)>> {
    let s_vec = Vec3::from(traction);
    let mut out = Vec::new();
    for f in mesh.face_set(set)? {
        let xs = mesh.element_nodes(f.element, &mesh.nodes);
        for (xi, w) in face_gauss_points(f.face) {
            let (ta, tb) = face_tangents(mesh.chart, &xs, &xi, f.face);
            let da = ta.cross(&tb).norm() * w;
            let s = shape_eval(&xi);
            for k in face_nodes(f.face) {
                out.push((mesh.elements[f.element][k], s.psi[k] * da * s_vec));
            }
        }
    }
    Ok(out)
}

/// Element contribution: nodal virtual-work rows plus raw constraint integrals.
struct ElementRows {
    nodal: [Vec3; 8],
    volume_change: f64,
    coupling: f64,
}

/// A fully specified discrete problem whose residual the solver drives to zero.
#[derive(Debug, Clone)]
pub struct Assembly<'m> {
    pub mesh: &'m Mesh,
    pub map: DofMap,
    pub params: MaterialParams,
    pub stage: Stage,
    pub loads: Vec<BoundaryLoad>,
    reference: Vec<[ReferencePoint; 8]>,
    volumes: Vec<f64>,
}

impl<'m> Assembly<'m> {
    pub fn new(
        mesh: &'m Mesh,
        map: DofMap,
        params: MaterialParams,
        stage: Stage,
        loads: Vec<BoundaryLoad>,
    ) -> Result<Self> {
        params.validate()?;
        if !(0.0..=1.0).contains(&stage.beta()) {
            return Err(Error::Domain(format!(
                "activation must lie in [0, 1], got {}",
                stage.beta()
            )));
        }
        if let Stage::Loaded { tensions, .. } = &stage {
            if tensions.len() != mesh.element_count() {
                return Err(Error::Config(format!(
                    "{} tension sets for {} elements",
                    tensions.len(),
                    mesh.element_count()
                )));
            }
            if map.coupling {
                return Err(Error::Config("loaded state carries no coupling unknowns".into()));
            }
        }
        for l in &loads {
            mesh.face_set(&l.set)?;
        }
        let reference = (0..mesh.element_count())
            .map(|e| mesh.reference_points(e))
            .collect::<Result<Vec<_>>>()?;
        let volumes = reference.iter().map(|r| r.iter().map(|p| p.dv).sum()).collect();
        Ok(Assembly {
            mesh,
            map,
            params,
            stage,
            loads,
            reference,
            volumes,
        })
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.volumes[e]
    }

    pub fn gauss_states(&self, e: usize, coords: &[Vec3]) -> Result<[GaussState; 8]> {
        gauss_states(self.mesh, e, coords, &self.reference[e])
    }

    /// PK2 components at one Gauss point.
    pub fn pk2(&self, e: usize, g: usize, kin: &KinematicState, state: &DofState) -> Result<Mat3> {
        match &self.stage {
            Stage::FreeContraction { beta } => {
                let q = state.q.as_ref().map_or(0.0, |q| q[e]);
                pk2_state_a(kin, MultiplierPair { p: state.p[e], q }, *beta, &self.params)
            }
            Stage::Loaded { beta, tensions } => pk2_state_c(kin, state.p[e], *beta, tensions[e][g], &self.params),
        }
    }

    fn element_rows(&self, e: usize, state: &DofState) -> Result<ElementRows> {
        let points = self.gauss_states(e, &state.coords)?;
        let mut nodal = [Vec3::zeros(); 8];
        let mut volume_change = 0.0;
        let mut coupling = 0.0;
        for (g, gp) in points.iter().enumerate() {
            let pk2 = self.pk2(e, g, &gp.kin, state).map_err(|err| locate(err, e, g))?;
            let phi = gp.kin.phi.components();
            // s[(α, I)] = Φ_J^α P^{JI}
            let s = phi * pk2;
            let gs = metric_at(self.mesh.chart, &gp.position)?.covariant * s;
            // ½ M^{αβ} ∂_γ g_{αβ} = Σ_{δ,β} (g M)_{δβ} Γ^δ_{γβ}
            let gm = gs * phi.transpose();
            let gamma = christoffel(self.mesh.chart, &gp.position)?;
            let mut k = Vec3::zeros();
            for (d, gd) in gamma.iter().enumerate() {
                for (c, gdc) in gd.iter().enumerate() {
                    for (b, v) in gdc.iter().enumerate() {
                        k[c] += gm[(d, b)] * v;
                    }
                }
            }
            let rp = &gp.reference;
            for n in 0..8 {
                nodal[n] += rp.dv * (gs * rp.dpsi_dx[n] + rp.psi[n] * k);
            }
            volume_change += rp.dv * (gp.kin.i3 - 1.0);
            if self.map.coupling {
                coupling += rp.dv
                    * constraint_h(gp.kin.i4, gp.kin.i6, self.params.a_over_d).map_err(|err| locate(err, e, g))?;
            }
        }
        Ok(ElementRows {
            nodal,
            volume_change,
            coupling,
        })
    }

    /// Residual at the unknown vector `x`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.residual_of(&self.map.to_state(x))
    }

    pub fn residual_of(&self, state: &DofState) -> Result<Vec<f64>> {
        let rows = (0..self.mesh.element_count())
            .into_par_iter()
            .map(|e| self.element_rows(e, state))
            .collect::<Result<Vec<_>>>()?;
        let mut r = vec![0.0; self.map.unknown_count()];
        // fixed summation order keeps the result bitwise reproducible
        for (e, rows) in rows.iter().enumerate() {
            for (k, f) in rows.nodal.iter().enumerate() {
                self.scatter(&mut r, self.mesh.elements[e][k], f, 1.0);
            }
            r[self.map.pressure_row(e)] = rows.volume_change / self.volumes[e];
            if let Some(row) = self.map.coupling_row(e) {
                r[row] = rows.coupling / self.volumes[e];
            }
        }
        if matches!(self.stage, Stage::Loaded { .. }) {
            for (node, f) in self.external_loads(&state.coords)? {
                self.scatter(&mut r, node, &f, -1.0);
            }
        }
        Ok(r)
    }

    fn scatter(&self, r: &mut [f64], node: usize, f: &Vec3, sign: f64) {
        for (c, slot) in self.map.slots[node].iter().enumerate() {
            if let Slot::Free(i) = *slot {
                r[i] += sign * f[c];
            }
        }
    }

    /// External nodal loads in the configuration `coords`, in face-set order.
    pub fn external_loads(&self, coords: &[Vec3]) -> Result<Vec<(usize, Vec3)>> {
        let mut out = Vec::new();
        for l in &self.loads {
            match l.kind {
                LoadKind::FollowerPressure(p) => out.extend(follower_pressure_loads(self.mesh, coords, &l.set, p)?),
                LoadKind::ReferenceTraction(t) => out.extend(reference_traction_loads(self.mesh, &l.set, t)?),
            }
        }
        Ok(out)
    }

    /// Raw per-element integrals `(∫ (I3 - 1) dV, ∫ h dV)`.
    pub fn constraint_integrals(&self, state: &DofState) -> Result<Vec<(f64, f64)>> {
        (0..self.mesh.element_count())
            .map(|e| {
                let mut vol = 0.0;
                let mut h = 0.0;
                for gp in self.gauss_states(e, &state.coords)? {
                    vol += gp.reference.dv * (gp.kin.i3 - 1.0);
                    h += gp.reference.dv * constraint_h(gp.kin.i4, gp.kin.i6, self.params.a_over_d)?;
                }
                Ok((vol, h))
            })
            .collect()
    }

    /// Pseudo-active tensions at every Gauss point from a converged free-contraction state.
    pub fn element_tensions(&self, state: &DofState) -> Result<Vec<ElementTensions>> {
        (0..self.mesh.element_count())
            .map(|e| {
                let q = state.q.as_ref().map_or(0.0, |q| q[e]);
                let points = self.gauss_states(e, &state.coords)?;
                let mut out = [PseudoActiveTensions::default(); 8];
                for (t, gp) in out.iter_mut().zip(points.iter()) {
                    *t = pseudo_active_tensions(q, gp.kin.i4, gp.kin.i6, self.params.a_over_d)?;
                }
                Ok(out)
            })
            .collect()
    }

    /// Volume-averaged physical normal Cauchy stresses `(σ11, σ22, σ33)` per element.
    pub fn element_stresses(&self, state: &DofState) -> Result<Vec<[f64; 3]>> {
        (0..self.mesh.element_count())
            .map(|e| {
                let mut acc = [0.0; 3];
                for (g, gp) in self.gauss_states(e, &state.coords)?.iter().enumerate() {
                    let pk2 = self.pk2(e, g, &gp.kin, state)?;
                    let s = physical_normal_stresses(&gp.kin, &pk2);
                    for i in 0..3 {
                        acc[i] += gp.reference.dv * s[i];
                    }
                }
                Ok(acc.map(|v| v / self.volumes[e]))
            })
            .collect()
    }

    /// Deformed volume `Σ ∫ sqrt(I3) dV`.
    pub fn deformed_volume(&self, state: &DofState) -> Result<f64> {
        let mut v = 0.0;
        for e in 0..self.mesh.element_count() {
            for gp in self.gauss_states(e, &state.coords)? {
                v += gp.reference.dv * gp.kin.i3.sqrt();
            }
        }
        Ok(v)
    }

    pub fn reference_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::dofs::Constraint;
    use crate::fem::mesh::{build_cylinder_mesh, build_slab_mesh};
    use std::f64::consts::PI;

    fn slab_pins() -> Vec<Constraint> {
        vec![
            Constraint::Pin {
                set: "xmin".into(),
                component: 0,
            },
            Constraint::Pin {
                set: "ymin".into(),
                component: 1,
            },
            Constraint::Pin {
                set: "zmin".into(),
                component: 2,
            },
        ]
    }

    #[test]
    fn reference_state_has_zero_residual() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 2, 2, 1).unwrap();
        let map = DofMap::new(&mesh, &slab_pins(), true).unwrap();
        let asm = Assembly::new(
            &mesh,
            map,
            MaterialParams::control(),
            Stage::FreeContraction { beta: 0.0 },
            vec![],
        )
        .unwrap();
        let r = asm.residual_of(&DofState::reference(&mesh, true)).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));

        let mesh = build_cylinder_mesh(0.2, 0.35, 2.0, 2, 1, 2, 0.2).unwrap();
        let map = DofMap::new(&mesh, &[], false).unwrap();
        let asm = Assembly::new(
            &mesh,
            map,
            MaterialParams::control(),
            Stage::FreeContraction { beta: 0.0 },
            vec![],
        )
        .unwrap();
        let r = asm.residual_of(&DofState::reference(&mesh, false)).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn homogeneous_patch_interior_rows_vanish() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 3, 3, 2).unwrap();
        let map = DofMap::new(&mesh, &[], false).unwrap();
        let lam = [1.1, 0.97, 1.0 / (1.1 * 0.97)];
        let mut state = DofState::reference(&mesh, false);
        for x in &mut state.coords {
            for i in 0..3 {
                x[i] *= lam[i];
            }
        }
        state.p = vec![0.73; mesh.element_count()];
        let asm = Assembly::new(
            &mesh,
            map.clone(),
            MaterialParams::control(),
            Stage::FreeContraction { beta: 0.4 },
            vec![],
        )
        .unwrap();
        let r = asm.residual_of(&state).unwrap();
        let boundary: std::collections::BTreeSet<usize> = mesh
            .faces
            .keys()
            .flat_map(|k| mesh.face_set_nodes(k).unwrap())
            .collect();
        let mut checked = 0;
        for n in 0..mesh.node_count() {
            if boundary.contains(&n) {
                continue;
            }
            for slot in map.slots[n] {
                if let Slot::Free(i) = slot {
                    assert!(r[i].abs() < 1e-12, "node {n}: {}", r[i]);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
        for e in 0..mesh.element_count() {
            assert!(r[map.pressure_row(e)].abs() < 1e-14);
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let mesh = build_cylinder_mesh(0.2, 0.35, 2.0, 3, 1, 2, 0.3).unwrap();
        let map = DofMap::new(&mesh, &[], false).unwrap();
        let tensions = vec![[PseudoActiveTensions { t_f: -0.3, t_cf: 1.2 }; 8]; mesh.element_count()];
        let loads = vec![BoundaryLoad {
            set: "inner".into(),
            kind: LoadKind::FollowerPressure(8.0),
        }];
        let asm = Assembly::new(
            &mesh,
            map,
            MaterialParams::control(),
            Stage::Loaded { beta: 0.7, tensions },
            loads,
        )
        .unwrap();
        let mut state = DofState::reference(&mesh, false);
        for (i, x) in state.coords.iter_mut().enumerate() {
            x[0] *= 1.0 + 0.01 * (i % 5) as f64;
            x[2] *= 0.98;
        }
        let a = asm.residual_of(&state).unwrap();
        for _ in 0..5 {
            let b = asm.residual_of(&state).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn closed_cube_pressure_has_zero_resultant() {
        let mut mesh = build_slab_mesh(1.0, 1.0, 1.0, 1, 1, 1).unwrap();
        let all: Vec<_> = mesh.faces.values().flatten().copied().collect();
        mesh.faces.insert("all".into(), all);
        let mut coords = mesh.nodes.clone();
        // distort into a general hexahedron
        coords[7] += Vec3::new(0.2, -0.1, 0.3);
        coords[2] += Vec3::new(-0.1, 0.05, 0.0);
        let loads = follower_pressure_loads(&mesh, &coords, "all", 3.0).unwrap();
        let total: Vec3 = loads.iter().map(|(_, f)| f).sum();
        assert!(total.norm() < 1e-12, "{total}");
        assert!(follower_pressure_loads(&mesh, &coords, "all", 0.0)
            .unwrap()
            .iter()
            .all(|(_, f)| f.norm() == 0.0));
    }

    #[test]
    fn flat_face_resultant_is_pressure_times_area() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 1, 1, 1).unwrap();
        let mut coords = mesh.nodes.clone();
        for x in &mut coords {
            x[0] *= 1.3;
            x[1] *= 0.9;
        }
        let loads = follower_pressure_loads(&mesh, &coords, "zmax", 2.0).unwrap();
        let total: Vec3 = loads.iter().map(|(_, f)| f).sum();
        // pushes into the body along -z
        assert!((total - Vec3::new(0.0, 0.0, -2.0 * 1.3 * 0.9)).norm() < 1e-14);
    }

    #[test]
    fn cylinder_pressure_is_radial() {
        let mesh = build_cylinder_mesh(0.2, 0.35, 2.0, 1, 1, 1, PI / 8.0).unwrap();
        let loads = follower_pressure_loads(&mesh, &mesh.nodes, "inner", 1.0).unwrap();
        let radial: f64 = loads.iter().map(|(_, f)| f[0]).sum();
        // inner face normal points to -r, so the load pushes outward
        let area = 0.2 * PI / 8.0 * 2.0;
        assert!((radial - area).abs() < 1e-12, "{radial} vs {area}");
        assert!(loads.iter().all(|(_, f)| f[1].abs() < 1e-15 && f[2].abs() < 1e-15));
    }

    #[test]
    fn free_contraction_suppresses_loads() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 1, 1, 1).unwrap();
        let map = DofMap::new(&mesh, &slab_pins(), true).unwrap();
        let loads = vec![BoundaryLoad {
            set: "xmax".into(),
            kind: LoadKind::FollowerPressure(5.0),
        }];
        let with = Assembly::new(
            &mesh,
            map.clone(),
            MaterialParams::control(),
            Stage::FreeContraction { beta: 0.3 },
            loads,
        )
        .unwrap();
        let without = Assembly::new(
            &mesh,
            map,
            MaterialParams::control(),
            Stage::FreeContraction { beta: 0.3 },
            vec![],
        )
        .unwrap();
        let state = DofState::reference(&mesh, true);
        assert_eq!(with.residual_of(&state).unwrap(), without.residual_of(&state).unwrap());
    }

    #[test]
    fn inverted_element_is_located() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 2, 1, 1).unwrap();
        let map = DofMap::new(&mesh, &[], false).unwrap();
        let asm = Assembly::new(
            &mesh,
            map,
            MaterialParams::control(),
            Stage::FreeContraction { beta: 0.0 },
            vec![],
        )
        .unwrap();
        let mut state = DofState::reference(&mesh, false);
        for x in &mut state.coords {
            if x[0] > 0.9 {
                x[0] = 0.1;
            }
        }
        match asm.residual_of(&state) {
            Err(Error::InvertedElement { element, .. }) => assert_eq!(element, 1),
            other => panic!("expected inversion, got {other:?}"),
        }
    }
}
