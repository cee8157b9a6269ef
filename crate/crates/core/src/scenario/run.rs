//! Runs a scenario through the two-step pipeline and tabulates observables.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::fem::{build_cylinder_mesh, build_slab_mesh, BoundaryLoad, Constraint, LoadKind, Mesh};
use crate::solver::{continuation_sweep, SchedulePoint, Setup, SolveReport, SweepStep};
use crate::tensor::Vec3;

use super::config::{Geometry, Loading, ScenarioConfig, ScenarioKind};
use super::table::{Column, ResultTable};

pub const CSV_NAME: &str = "results.csv";
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn mesh_for(config: &ScenarioConfig) -> Result<Mesh> {
    let [n1, n2, n3] = config.mesh_divisions;
    match config.geometry {
        Geometry::Slab { lx_cm, ly_cm, lz_cm } => build_slab_mesh(lx_cm, ly_cm, lz_cm, n1, n2, n3),
        Geometry::Cylinder {
            r_int_cm,
            r_ext_cm,
            length_cm,
            sector_angle_rad,
        } => build_cylinder_mesh(r_int_cm, r_ext_cm, length_cm, n1, n2, n3, sector_angle_rad),
    }
}

/// Symmetry conditions that remove rigid motions without adding stress.
pub fn rigid_constraints(geometry: &Geometry) -> Vec<Constraint> {
    let pin = |set: &str, component| Constraint::Pin {
        set: set.into(),
        component,
    };
    match geometry {
        Geometry::Slab { .. } => vec![pin("xmin", 0), pin("ymin", 1), pin("zmin", 2)],
        Geometry::Cylinder { .. } => vec![
            pin("phi_min", 1),
            pin("phi_max", 1),
            pin("bottom", 2),
            Constraint::Tie {
                set: "top".into(),
                component: 2,
            },
        ],
    }
}

pub fn setup<'m>(config: &ScenarioConfig, mesh: &'m Mesh, params: MaterialParams, coupling: bool) -> Setup<'m> {
    let rigid = rigid_constraints(&config.geometry);
    Setup {
        mesh,
        params,
        coupling,
        free_constraints: rigid.clone(),
        loaded_constraints: rigid,
    }
}

fn slab_lengths(geometry: &Geometry) -> [f64; 3] {
    match *geometry {
        Geometry::Slab { lx_cm, ly_cm, lz_cm } => [lx_cm, ly_cm, lz_cm],
        Geometry::Cylinder { .. } => [f64::NAN; 3],
    }
}

const MAX_FACES: [&str; 3] = ["xmax", "ymax", "zmax"];

/// Target stretch of the uniaxial ramp at `s`.
pub fn uniaxial_stretch(loading: &Loading, s: f64) -> Option<(usize, f64)> {
    match *loading {
        Loading::UniaxialStretch { axis, from, to } => Some((axis, from + s * (to - from))),
        _ => None,
    }
}

pub fn schedule_point(config: &ScenarioConfig, k: usize, s: f64) -> SchedulePoint {
    let beta = config.beta_at(k, s);
    let lengths = slab_lengths(&config.geometry);
    let prescribe = |axis: usize, stretch: f64| Constraint::Prescribe {
        set: MAX_FACES[axis].into(),
        component: axis,
        value: stretch * lengths[axis],
    };
    let mut point = SchedulePoint {
        s,
        beta,
        loads: Vec::new(),
        prescribed: Vec::new(),
    };
    match config.loading {
        Loading::None => {}
        Loading::UniaxialStretch { .. } => {
            let (axis, stretch) = uniaxial_stretch(&config.loading, s).unwrap();
            point.prescribed.push(prescribe(axis, stretch));
        }
        Loading::EquibiaxialStretch { stretch } => {
            point.prescribed = vec![prescribe(0, stretch), prescribe(1, stretch)];
        }
        Loading::PressureSinSquared { .. } | Loading::PressureSinSquaredMmhg { .. } => {
            let p = config.loading.pressure_kpa(s).unwrap();
            point.loads.push(BoundaryLoad {
                set: "inner".into(),
                kind: LoadKind::FollowerPressure(p),
            });
        }
    }
    point
}

/// Deformed extent over reference extent along each axis.
pub fn slab_stretches(coords: &[Vec3], lengths: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| {
        let (lo, hi) = coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c[i]), hi.max(c[i]))
        });
        (hi - lo) / lengths[i]
    })
}

/// Mean of coordinate `component` over the nodes of a face set.
pub fn face_mean(mesh: &Mesh, coords: &[Vec3], set: &str, component: usize) -> Result<f64> {
    let nodes = mesh.face_set_nodes(set)?;
    Ok(nodes.iter().map(|&n| coords[n][component]).sum::<f64>() / nodes.len() as f64)
}

/// `(r_int, r_ext, height)` of a tube configuration.
pub fn tube_measures(mesh: &Mesh, coords: &[Vec3]) -> Result<[f64; 3]> {
    Ok([
        face_mean(mesh, coords, "inner", 0)?,
        face_mean(mesh, coords, "outer", 0)?,
        face_mean(mesh, coords, "top", 2)? - face_mean(mesh, coords, "bottom", 2)?,
    ])
}

fn volume_mean(mesh: &Mesh, values: impl Iterator<Item = f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut vol = 0.0;
    for (e, v) in values.enumerate() {
        let w = mesh.element_volume(e)?;
        sum += w * v;
        vol += w;
    }
    Ok(sum / vol)
}

pub fn mean_stresses(mesh: &Mesh, report: &SolveReport) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = volume_mean(mesh, report.stresses.iter().map(|s| s[i]))?;
    }
    Ok(out)
}

/// Element-mean `(q, T_f, T_cf)` of a state-A report.
fn mean_coupling(mesh: &Mesh, report: &SolveReport) -> Result<[f64; 3]> {
    let q = match &report.state.q {
        Some(q) => volume_mean(mesh, q.iter().copied())?,
        None => 0.0,
    };
    let avg = |f: fn(&crate::constitutive::PseudoActiveTensions) -> f64| {
        volume_mean(
            mesh,
            report
                .tensions
                .iter()
                .map(|t| t.iter().map(f).sum::<f64>() / t.len() as f64),
        )
    };
    Ok([q, avg(|t| t.t_f)?, avg(|t| t.t_cf)?])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStats {
    pub converged: bool,
    pub iterations: usize,
    pub increments: usize,
    pub residual_norm: f64,
    /// Largest `|V_e⁻¹ ∫ (I3 - 1) dV|`.
    pub max_volume_residual: f64,
    /// Largest `|V_e⁻¹ ∫ h dV|` (state A with coupling only).
    pub max_coupling_residual: Option<f64>,
    pub volume_change: f64,
}

impl StageStats {
    fn of(report: &SolveReport, coupling_row: bool) -> Self {
        let max = |f: fn(&(f64, f64)) -> f64| report.constraint_residuals.iter().map(f).fold(0.0f64, f64::max);
        StageStats {
            converged: report.converged,
            iterations: report.iterations,
            increments: report.increments,
            residual_norm: report.residual_norm,
            max_volume_residual: max(|c| c.0.abs()),
            max_coupling_residual: coupling_row.then(|| max(|c| c.1.abs())),
            volume_change: report.volume_change,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub label: String,
    pub beta: f64,
    pub state_a: StageStats,
    pub state_c: StageStats,
    /// State C reached from the reference instead of from state A.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub state_c_from_reference: bool,
}

fn point_stats(label: String, step: &SweepStep, coupling: bool) -> PointStats {
    PointStats {
        label,
        beta: step.state_a.beta,
        state_a: StageStats::of(&step.state_a, coupling),
        state_c: StageStats::of(&step.state_c, false),
        state_c_from_reference: step.state_c_from_reference,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub table: ResultTable,
    pub points: Vec<PointStats>,
    /// First solve failure; rows before it are kept.
    pub failure: Option<Error>,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: &'static str,
    pub length_unit: &'static str,
    pub stress_unit: &'static str,
    /// Unit of the configured pressure schedule; tabulated pressures are in kPa.
    pub pressure_unit: Option<&'static str>,
    pub csv: &'static str,
    pub columns: &'a [Column],
    pub rows: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub config: &'a ScenarioConfig,
    pub points: &'a [PointStats],
}

impl ScenarioRun {
    pub fn converged(&self) -> bool {
        self.failure.is_none() && self.points.iter().all(|p| p.state_a.converged && p.state_c.converged)
    }

    pub fn manifest(&self) -> Manifest<'_> {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario: self.config.scenario.name(),
            length_unit: "cm",
            stress_unit: "kPa",
            pressure_unit: self.config.loading.pressure_unit(),
            csv: CSV_NAME,
            columns: &self.table.columns,
            rows: self.table.rows.len(),
            converged: self.converged(),
            failure: self.failure.as_ref().map(|e| e.to_string()),
            config: &self.config,
            points: &self.points,
        }
    }

    /// Writes `results.csv` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(CSV_NAME);
        let manifest = dir.join(MANIFEST_NAME);
        fs::write(&csv, self.table.to_csv()?)?;
        let mut text = serde_json::to_string_pretty(&self.manifest())?;
        text.push('\n');
        fs::write(&manifest, text)?;
        Ok((csv, manifest))
    }
}

/// Runs the configured scenario. Configuration problems are errors; solve
/// failures end the run early and are reported in [`ScenarioRun::failure`].
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    match config.scenario {
        ScenarioKind::EquibiaxialTable => run_table(config),
        _ => run_sweep(config),
    }
}

fn columns(kind: ScenarioKind) -> &'static [(&'static str, &'static str)] {
    match kind {
        ScenarioKind::FreeContraction => &[
            ("s", "1"),
            ("beta", "1"),
            ("lambda_f", "1"),
            ("lambda_cf", "1"),
            ("lambda_cf_prime", "1"),
            ("q_kpa", "kPa"),
            ("t_f_kpa", "kPa"),
            ("t_cf_kpa", "kPa"),
            ("sigma_11_kpa", "kPa"),
            ("sigma_22_kpa", "kPa"),
            ("residual_a", "kPa*cm^2"),
            ("residual_c", "kPa*cm^2"),
        ],
        ScenarioKind::Uniaxial => &[
            ("s", "1"),
            ("beta", "1"),
            ("stretch", "1"),
            ("lambda_f", "1"),
            ("lambda_cf", "1"),
            ("lambda_cf_prime", "1"),
            ("sigma_11_kpa", "kPa"),
            ("sigma_22_kpa", "kPa"),
            ("sigma_33_kpa", "kPa"),
            ("residual_a", "kPa*cm^2"),
            ("residual_c", "kPa*cm^2"),
        ],
        ScenarioKind::EquibiaxialTable => &[
            ("a_over_d", "1"),
            ("coupling", "1"),
            ("t0_kpa", "kPa"),
            ("beta", "1"),
            ("lambda_f_a", "1"),
            ("lambda_cf_a", "1"),
            ("sigma_11_kpa", "kPa"),
            ("sigma_22_kpa", "kPa"),
            ("ratio_percent", "%"),
            ("residual_a", "kPa*cm^2"),
            ("residual_c", "kPa*cm^2"),
        ],
        ScenarioKind::CylinderAutoregulation => &[
            ("s", "1"),
            ("beta", "1"),
            ("pressure_kpa", "kPa"),
            ("r_int_cm", "cm"),
            ("r_ext_cm", "cm"),
            ("thickness_cm", "cm"),
            ("height_cm", "cm"),
            ("r_int_a_cm", "cm"),
            ("r_ext_a_cm", "cm"),
            ("height_a_cm", "cm"),
            ("residual_a", "kPa*cm^2"),
            ("residual_c", "kPa*cm^2"),
        ],
    }
}

fn sweep_row(config: &ScenarioConfig, mesh: &Mesh, step: &SweepStep) -> Result<Vec<f64>> {
    let (a, c) = (&step.state_a, &step.state_c);
    let residuals = [a.residual_norm, c.residual_norm];
    let lengths = slab_lengths(&config.geometry);
    let row = match config.scenario {
        ScenarioKind::FreeContraction => {
            let l = slab_stretches(&c.state.coords, lengths);
            let [q, tf, tcf] = mean_coupling(mesh, a)?;
            let s = mean_stresses(mesh, c)?;
            vec![step.s, a.beta, l[0], l[1], l[2], q, tf, tcf, s[0], s[1]]
        }
        ScenarioKind::Uniaxial => {
            let (_, stretch) = uniaxial_stretch(&config.loading, step.s).unwrap_or((0, f64::NAN));
            let l = slab_stretches(&c.state.coords, lengths);
            let s = mean_stresses(mesh, c)?;
            vec![step.s, a.beta, stretch, l[0], l[1], l[2], s[0], s[1], s[2]]
        }
        ScenarioKind::CylinderAutoregulation => {
            let p = config.loading.pressure_kpa(step.s).unwrap_or(f64::NAN);
            let [ri, ro, h] = tube_measures(mesh, &c.state.coords)?;
            let [ria, roa, ha] = tube_measures(mesh, &a.state.coords)?;
            vec![step.s, a.beta, p, ri, ro, ro - ri, h, ria, roa, ha]
        }
        ScenarioKind::EquibiaxialTable => unreachable!("tables are not swept"),
    };
    Ok(row.into_iter().chain(residuals).collect())
}

fn run_sweep(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let mesh = mesh_for(config)?;
    let setup = setup(config, &mesh, config.material, config.coupling);
    let schedule: Vec<SchedulePoint> = config
        .schedule()
        .into_iter()
        .enumerate()
        .map(|(k, s)| schedule_point(config, k, s))
        .collect();
    let outcome = continuation_sweep(&setup, &schedule, &config.solver);
    let mut table = ResultTable::new(columns(config.scenario));
    let mut points = Vec::with_capacity(outcome.steps.len());
    for step in &outcome.steps {
        table.push(sweep_row(config, &mesh, step)?)?;
        points.push(point_stats(format!("s={}", step.s), step, config.coupling));
    }
    Ok(ScenarioRun {
        config: config.clone(),
        table,
        points,
        failure: outcome.failure,
    })
}

/// One cell of the equibiaxial table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cell {
    pub a_over_d: f64,
    pub t0_kpa: f64,
    pub coupling: bool,
}

pub(crate) fn table_cells(config: &ScenarioConfig) -> Vec<Cell> {
    let Some(grid) = &config.table else { return Vec::new() };
    let mut cells = Vec::new();
    if config.coupling {
        for &a_over_d in &grid.a_over_d {
            cells.extend(grid.t0_kpa.iter().map(|&t0_kpa| Cell {
                a_over_d,
                t0_kpa,
                coupling: true,
            }));
        }
    }
    if grid.unconstrained_row {
        let a_over_d = config.material.a_over_d;
        cells.extend(grid.t0_kpa.iter().map(|&t0_kpa| Cell {
            a_over_d,
            t0_kpa,
            coupling: false,
        }));
    }
    cells
}

pub(crate) fn solve_cell(config: &ScenarioConfig, mesh: &Mesh, cell: Cell) -> Result<SweepStep> {
    let params = MaterialParams {
        a_over_d: cell.a_over_d,
        t0_kpa: cell.t0_kpa,
        ..config.material
    };
    let setup = setup(config, mesh, params, cell.coupling);
    let point = schedule_point(config, 0, 1.0);
    let mut outcome = continuation_sweep(&setup, &[point], &config.solver);
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(outcome.steps.remove(0)),
    }
}

fn run_table(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let mesh = mesh_for(config)?;
    let lengths = slab_lengths(&config.geometry);
    let cells = table_cells(config);
    let solved: Vec<Result<SweepStep>> = cells.par_iter().map(|&cell| solve_cell(config, &mesh, cell)).collect();
    let mut table = ResultTable::new(columns(config.scenario));
    let mut points = Vec::new();
    let mut failure = None;
    for (cell, result) in cells.iter().zip(solved) {
        let step = match result {
            Ok(step) => step,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let la = slab_stretches(&step.state_a.state.coords, lengths);
        let s = mean_stresses(&mesh, &step.state_c)?;
        table.push(vec![
            cell.a_over_d,
            if cell.coupling { 1.0 } else { 0.0 },
            cell.t0_kpa,
            step.state_a.beta,
            la[0],
            la[1],
            s[0],
            s[1],
            100.0 * s[1] / s[0],
            step.state_a.residual_norm,
            step.state_c.residual_norm,
        ])?;
        let label = format!("a/D={} T0={} coupling={}", cell.a_over_d, cell.t0_kpa, cell.coupling);
        points.push(point_stats(label, &step, cell.coupling));
    }
    Ok(ScenarioRun {
        config: config.clone(),
        table,
        points,
        failure,
    })
}
