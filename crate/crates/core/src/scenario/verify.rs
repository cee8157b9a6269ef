//! Finite-element solutions against the semi-analytic oracles.
//!
//! Errors are taken over degrees of freedom: the L² figure is the root mean
//! square of the differences, the ∞ figure their largest magnitude. Slab
//! comparisons include the element multipliers, tube comparisons the nodal
//! `(r, z)` values.

use serde::Serialize;

use crate::constitutive::{MaterialParams, PseudoActiveTensions};
use crate::error::{Error, Result};
use crate::fem::{BoundaryLoad, DofState, LoadKind, Mesh};
use crate::oracle::cylinder::DEFAULT_PANELS;
use crate::oracle::{
    cylinder_solve, slab_solve, CylinderGeometry, CylinderSolution, HomogeneousSolution, SlabScenario,
};
use crate::solver::{continuation_sweep, solve_state_a, SchedulePoint, SweepStep};

use super::config::{Geometry, Loading, ScenarioConfig, ScenarioKind};
use super::run::{mesh_for, schedule_point, setup, solve_cell, table_cells, uniaxial_stretch};

/// Slab agreement threshold.
pub const SLAB_THRESHOLD: f64 = 1e-8;
/// Tube agreement threshold at the default sector mesh.
pub const TUBE_THRESHOLD: f64 = 1e-6;
/// Activation levels of the free-contraction comparison.
pub const FREE_CONTRACTION_BETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Lumen pressures (kPa) of the passive tube comparison.
pub const TUBE_PRESSURES: [f64; 3] = [0.0, 8.0, 18.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCase {
    pub label: String,
    pub l2: f64,
    pub linf: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub scenario: &'static str,
    pub cases: Vec<VerifyCase>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `(L², ∞)` norms of `a - b`.
pub fn dof_errors(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let mut sq = 0.0;
    let mut inf = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
        inf = inf.max(d.abs());
    }
    ((sq / a.len().max(1) as f64).sqrt(), inf)
}

fn case(label: String, fe: &[f64], exact: &[f64], threshold: f64) -> VerifyCase {
    let (l2, linf) = dof_errors(fe, exact);
    VerifyCase {
        label,
        l2,
        linf,
        threshold,
        passed: l2 <= threshold,
    }
}

/// FE and oracle values of the slab dofs: every node coordinate, then `p`
/// and `q` per element. The oracle places node `X` at `diag(λ) X`.
pub fn slab_dofs(mesh: &Mesh, state: &DofState, exact: &HomogeneousSolution) -> (Vec<f64>, Vec<f64>) {
    let mut fe = Vec::new();
    let mut ex = Vec::new();
    for (x, big_x) in state.coords.iter().zip(&mesh.nodes) {
        for i in 0..3 {
            fe.push(x[i]);
            ex.push(exact.stretches[i] * big_x[i]);
        }
    }
    fe.extend(&state.p);
    ex.extend(std::iter::repeat_n(exact.p, state.p.len()));
    if let Some(q) = &state.q {
        fe.extend(q);
        ex.extend(std::iter::repeat_n(exact.q, q.len()));
    }
    (fe, ex)
}

/// FE and oracle nodal `(r, z)` of a tube sector.
pub fn tube_dofs(mesh: &Mesh, state: &DofState, exact: &CylinderSolution) -> (Vec<f64>, Vec<f64>) {
    let mut fe = Vec::new();
    let mut ex = Vec::new();
    for (x, big_x) in state.coords.iter().zip(&mesh.nodes) {
        fe.extend([x[0], x[2]]);
        ex.extend([exact.radius(big_x[0]), exact.lambda_z * big_x[2]]);
    }
    (fe, ex)
}

pub fn verify(config: &ScenarioConfig) -> Result<VerifyReport> {
    config.validate()?;
    let cases = match config.scenario {
        ScenarioKind::FreeContraction => free_contraction(config)?,
        ScenarioKind::Uniaxial => uniaxial(config)?,
        ScenarioKind::EquibiaxialTable => equibiaxial(config)?,
        ScenarioKind::CylinderAutoregulation => passive_tube(config)?,
    };
    Ok(VerifyReport {
        scenario: config.scenario.name(),
        cases,
    })
}

fn free_contraction(config: &ScenarioConfig) -> Result<Vec<VerifyCase>> {
    let mesh = mesh_for(config)?;
    let mut cases = Vec::new();
    for coupling in [true, false] {
        let setup = setup(config, &mesh, config.material, coupling);
        for beta in FREE_CONTRACTION_BETAS {
            let fe = solve_state_a(&setup, beta, None, &config.solver)?;
            let exact = slab_solve(SlabScenario::FreeContraction, beta, &config.material, coupling)?;
            let (a, b) = slab_dofs(&mesh, &fe.state, &exact);
            cases.push(case(
                format!("free contraction β={beta} coupling={coupling}"),
                &a,
                &b,
                SLAB_THRESHOLD,
            ));
        }
    }
    Ok(cases)
}

fn state_c_case(
    mesh: &Mesh,
    step: &SweepStep,
    scenario: SlabScenario,
    params: &MaterialParams,
    coupling: bool,
    label: String,
) -> Result<VerifyCase> {
    let exact = slab_solve(scenario, step.state_a.beta, params, coupling)?;
    let (a, b) = slab_dofs(mesh, &step.state_c.state, &exact);
    Ok(case(label, &a, &b, SLAB_THRESHOLD))
}

fn uniaxial(config: &ScenarioConfig) -> Result<Vec<VerifyCase>> {
    let mesh = mesh_for(config)?;
    let setup = setup(config, &mesh, config.material, config.coupling);
    let schedule: Vec<_> = config
        .schedule()
        .into_iter()
        .enumerate()
        .map(|(k, s)| schedule_point(config, k, s))
        .collect();
    let outcome = continuation_sweep(&setup, &schedule, &config.solver);
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    outcome
        .steps
        .iter()
        .map(|step| {
            let (axis, stretch) = uniaxial_stretch(&config.loading, step.s).unwrap();
            state_c_case(
                &mesh,
                step,
                SlabScenario::Uniaxial { axis, stretch },
                &config.material,
                config.coupling,
                format!(
                    "uniaxial λ={stretch} β={} coupling={}",
                    step.state_a.beta, config.coupling
                ),
            )
        })
        .collect()
}

fn equibiaxial(config: &ScenarioConfig) -> Result<Vec<VerifyCase>> {
    let Loading::EquibiaxialStretch { stretch } = config.loading else {
        return Err(Error::Config(
            "equibiaxial verification needs an equibiaxial stretch".into(),
        ));
    };
    let mesh = mesh_for(config)?;
    table_cells(config)
        .into_iter()
        .map(|cell| {
            let step = solve_cell(config, &mesh, cell)?;
            let params = MaterialParams {
                a_over_d: cell.a_over_d,
                t0_kpa: cell.t0_kpa,
                ..config.material
            };
            state_c_case(
                &mesh,
                &step,
                SlabScenario::Equibiaxial { stretch },
                &params,
                cell.coupling,
                format!(
                    "equibiaxial a/D={} T0={} coupling={}",
                    cell.a_over_d, cell.t0_kpa, cell.coupling
                ),
            )
        })
        .collect()
}

/// Passive tube without coupling under the listed lumen pressures.
fn passive_tube(config: &ScenarioConfig) -> Result<Vec<VerifyCase>> {
    let Geometry::Cylinder {
        r_int_cm,
        r_ext_cm,
        length_cm,
        ..
    } = config.geometry
    else {
        return Err(Error::Config("tube verification needs a cylinder geometry".into()));
    };
    let geometry = CylinderGeometry {
        r_int: r_int_cm,
        r_ext: r_ext_cm,
        length: length_cm,
    };
    let mesh = mesh_for(config)?;
    let setup = setup(config, &mesh, config.material, false);
    let none = |_: f64| PseudoActiveTensions::default();
    TUBE_PRESSURES
        .iter()
        .map(|&p| {
            let point = SchedulePoint {
                s: 0.0,
                beta: 0.0,
                loads: vec![BoundaryLoad {
                    set: "inner".into(),
                    kind: LoadKind::FollowerPressure(p),
                }],
                prescribed: Vec::new(),
            };
            let mut outcome = continuation_sweep(&setup, &[point], &config.solver);
            if let Some(e) = outcome.failure {
                return Err(e);
            }
            let step = outcome.steps.remove(0);
            let exact = cylinder_solve(geometry, p, 0.0, &config.material, &none, DEFAULT_PANELS)?;
            let (a, b) = tube_dofs(&mesh, &step.state_c.state, &exact);
            let [nr, nphi, nz] = config.mesh_divisions;
            Ok(case(
                format!("passive tube P={p} kPa mesh {nr}x{nphi}x{nz}"),
                &a,
                &b,
                TUBE_THRESHOLD,
            ))
        })
        .collect()
}
