//! Built-in experiments, their configuration, tabulated output and oracle
//! comparisons.

pub mod config;
pub mod run;
pub mod table;
pub mod verify;

pub use config::{
    parse_divisions, sin_squared, Activation, Geometry, Loading, ScenarioConfig, ScenarioKind, TableGrid, KPA_PER_MMHG,
};
pub use run::{
    face_mean, mean_stresses, mesh_for, rigid_constraints, run_scenario, schedule_point, setup, slab_stretches,
    tube_measures, uniaxial_stretch, Manifest, PointStats, ScenarioRun, StageStats, CSV_NAME, MANIFEST_NAME,
};
pub use table::{Column, ResultTable};
pub use verify::{dof_errors, slab_dofs, tube_dofs, verify, VerifyCase, VerifyReport, SLAB_THRESHOLD, TUBE_THRESHOLD};
