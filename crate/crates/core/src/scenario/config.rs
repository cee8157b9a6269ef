//! Scenario configuration (JSON, schema in `docs/config.schema.json`).

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::solver::SolverConfig;

/// kPa per mmHg.
pub const KPA_PER_MMHG: f64 = 0.133_322_387_415;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    FreeContraction,
    Uniaxial,
    EquibiaxialTable,
    CylinderAutoregulation,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::FreeContraction,
        ScenarioKind::Uniaxial,
        ScenarioKind::EquibiaxialTable,
        ScenarioKind::CylinderAutoregulation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FreeContraction => "free-contraction",
            ScenarioKind::Uniaxial => "uniaxial",
            ScenarioKind::EquibiaxialTable => "equibiaxial-table",
            ScenarioKind::CylinderAutoregulation => "cylinder-autoregulation",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ScenarioKind::FreeContraction => "slab free contraction over β = sin²(πs)",
            ScenarioKind::Uniaxial => "slab uniaxial stretch along the fibers at fixed activation",
            ScenarioKind::EquibiaxialTable => "equibiaxial stresses at λ = 1.2 over an (a/D, T0) grid",
            ScenarioKind::CylinderAutoregulation => "tube sector under P = 8 + 10 sin²(πt) kPa with β = sin²(πt)",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Slab {
        lx_cm: f64,
        ly_cm: f64,
        lz_cm: f64,
    },
    Cylinder {
        r_int_cm: f64,
        r_ext_cm: f64,
        length_cm: f64,
        sector_angle_rad: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    /// `β(s) = sin²(πs)`.
    SinSquared,
    Constant {
        beta: f64,
    },
    /// One value per schedule point.
    Samples {
        beta: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Loading {
    None,
    /// Stretch along body axis `axis` moving linearly from `from` to `to` over the schedule.
    UniaxialStretch {
        axis: usize,
        from: f64,
        to: f64,
    },
    EquibiaxialStretch {
        stretch: f64,
    },
    /// Lumen pressure `base + amplitude · sin²(πt)`.
    PressureSinSquared {
        base_kpa: f64,
        amplitude_kpa: f64,
    },
    PressureSinSquaredMmhg {
        base_mmhg: f64,
        amplitude_mmhg: f64,
    },
}

impl Loading {
    /// Pressure at schedule coordinate `t`, in kPa.
    pub fn pressure_kpa(&self, t: f64) -> Option<f64> {
        let wave = sin_squared(t);
        match *self {
            Loading::PressureSinSquared {
                base_kpa,
                amplitude_kpa,
            } => Some(base_kpa + amplitude_kpa * wave),
            Loading::PressureSinSquaredMmhg {
                base_mmhg,
                amplitude_mmhg,
            } => Some(KPA_PER_MMHG * (base_mmhg + amplitude_mmhg * wave)),
            _ => None,
        }
    }

    pub fn pressure_unit(&self) -> Option<&'static str> {
        match self {
            Loading::PressureSinSquared { .. } => Some("kPa"),
            Loading::PressureSinSquaredMmhg { .. } => Some("mmHg"),
            _ => None,
        }
    }
}

/// Parameter grid of the equibiaxial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableGrid {
    pub a_over_d: Vec<f64>,
    pub t0_kpa: Vec<f64>,
    /// Add a row solved without the coupling constraint.
    pub unconstrained_row: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub geometry: Geometry,
    pub material: MaterialParams,
    /// Element counts along the three reference axes.
    pub mesh_divisions: [usize; 3],
    pub activation: Activation,
    pub schedule_points: usize,
    pub loading: Loading,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableGrid>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub coupling: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

const SCHEDULE_POINTS: usize = 21;

fn thin_slab() -> Geometry {
    Geometry::Slab {
        lx_cm: 1.0,
        ly_cm: 1.0,
        lz_cm: 0.1,
    }
}

impl ScenarioConfig {
    /// Default configuration of a builtin scenario.
    pub fn builtin(kind: ScenarioKind) -> Self {
        let base = ScenarioConfig {
            scenario: kind,
            geometry: thin_slab(),
            material: MaterialParams::control(),
            mesh_divisions: [1, 1, 1],
            activation: Activation::SinSquared,
            schedule_points: SCHEDULE_POINTS,
            loading: Loading::None,
            table: None,
            solver: SolverConfig::default(),
            coupling: true,
            output_dir: None,
        };
        match kind {
            ScenarioKind::FreeContraction => base,
            ScenarioKind::Uniaxial => ScenarioConfig {
                activation: Activation::Constant { beta: 0.0 },
                loading: Loading::UniaxialStretch {
                    axis: 0,
                    from: 1.0,
                    to: 1.4,
                },
                ..base
            },
            ScenarioKind::EquibiaxialTable => ScenarioConfig {
                activation: Activation::Constant { beta: 1.0 },
                schedule_points: 1,
                loading: Loading::EquibiaxialStretch { stretch: 1.2 },
                table: Some(TableGrid {
                    a_over_d: vec![0.10, 0.15, 0.20],
                    t0_kpa: vec![5.0, 15.0, 25.0, 35.0, 45.0],
                    unconstrained_row: true,
                }),
                ..base
            },
            ScenarioKind::CylinderAutoregulation => ScenarioConfig {
                geometry: Geometry::Cylinder {
                    r_int_cm: 0.2,
                    r_ext_cm: 0.35,
                    length_cm: 2.0,
                    sector_angle_rad: 0.1,
                },
                mesh_divisions: [8, 1, 2],
                loading: Loading::PressureSinSquared {
                    base_kpa: 8.0,
                    amplitude_kpa: 10.0,
                },
                ..base
            },
        }
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.material.validate()?;
        self.solver.validate()?;
        if self.mesh_divisions.iter().any(|&n| n == 0 || n > MAX_DIVISIONS) {
            return bad(format!(
                "mesh divisions must lie in 1..={MAX_DIVISIONS}, got {:?}",
                self.mesh_divisions
            ));
        }
        if self.schedule_points == 0 {
            return bad("schedule_points must be ≥ 1".into());
        }
        match self.geometry {
            Geometry::Slab { lx_cm, ly_cm, lz_cm } => {
                if ![lx_cm, ly_cm, lz_cm].iter().all(|v| *v > 0.0 && v.is_finite()) {
                    return bad(format!("slab dimensions must be positive, got {:?}", self.geometry));
                }
            }
            Geometry::Cylinder {
                r_int_cm,
                r_ext_cm,
                length_cm,
                sector_angle_rad,
            } => {
                if !(r_int_cm > 0.0 && r_ext_cm > r_int_cm && r_ext_cm.is_finite()) {
                    return bad(format!("need 0 < r_int_cm < r_ext_cm, got {r_int_cm}, {r_ext_cm}"));
                }
                if !(length_cm > 0.0 && length_cm.is_finite()) {
                    return bad(format!("length_cm must be positive, got {length_cm}"));
                }
                if !(sector_angle_rad > 0.0 && sector_angle_rad <= 2.0 * PI) {
                    return bad(format!("sector_angle_rad must lie in (0, 2π], got {sector_angle_rad}"));
                }
            }
        }
        let in_unit = |b: f64| (0.0..=1.0).contains(&b);
        match &self.activation {
            Activation::SinSquared => {}
            Activation::Constant { beta } => {
                if !in_unit(*beta) {
                    return bad(format!("activation must lie in [0, 1], got {beta}"));
                }
            }
            Activation::Samples { beta } => {
                if beta.len() != self.schedule_points {
                    return bad(format!(
                        "{} activation samples for {} schedule points",
                        beta.len(),
                        self.schedule_points
                    ));
                }
                if let Some(b) = beta.iter().find(|b| !in_unit(**b)) {
                    return bad(format!("activation must lie in [0, 1], got {b}"));
                }
            }
        }
        let slab = matches!(self.geometry, Geometry::Slab { .. });
        let stretch_ok = |s: f64| s > 0.0 && s.is_finite();
        match self.loading {
            Loading::None => {}
            Loading::UniaxialStretch { axis, from, to } => {
                if axis > 2 || !stretch_ok(from) || !stretch_ok(to) {
                    return bad(format!("invalid uniaxial stretch {:?}", self.loading));
                }
            }
            Loading::EquibiaxialStretch { stretch } => {
                if !stretch_ok(stretch) {
                    return bad(format!("invalid equibiaxial stretch {stretch}"));
                }
            }
            Loading::PressureSinSquared {
                base_kpa: a,
                amplitude_kpa: b,
            }
            | Loading::PressureSinSquaredMmhg {
                base_mmhg: a,
                amplitude_mmhg: b,
            } => {
                if !(a >= 0.0 && b >= 0.0 && (a + b).is_finite()) {
                    return bad(format!("pressures must be finite and ≥ 0, got {a}, {b}"));
                }
            }
        }
        let expected_slab = !matches!(self.scenario, ScenarioKind::CylinderAutoregulation);
        if slab != expected_slab {
            return bad(format!("scenario {} does not run on this geometry", self.scenario));
        }
        let loading_ok = match self.scenario {
            ScenarioKind::FreeContraction => matches!(self.loading, Loading::None),
            ScenarioKind::Uniaxial => matches!(self.loading, Loading::UniaxialStretch { .. }),
            ScenarioKind::EquibiaxialTable => matches!(self.loading, Loading::EquibiaxialStretch { .. }),
            ScenarioKind::CylinderAutoregulation => self.loading.pressure_kpa(0.0).is_some(),
        };
        if !loading_ok {
            return bad(format!(
                "loading {:?} does not fit scenario {}",
                self.loading, self.scenario
            ));
        }
        match (&self.table, self.scenario) {
            (Some(grid), ScenarioKind::EquibiaxialTable) => {
                if grid.t0_kpa.is_empty() || (grid.a_over_d.is_empty() && !grid.unconstrained_row) {
                    return bad("table grid is empty".into());
                }
                for &a in &grid.a_over_d {
                    MaterialParams {
                        a_over_d: a,
                        ..self.material
                    }
                    .validate()?;
                }
                if grid.t0_kpa.iter().any(|t| !t.is_finite()) {
                    return bad("table t0_kpa values must be finite".into());
                }
            }
            (None, ScenarioKind::EquibiaxialTable) => return bad("equibiaxial-table needs a table grid".into()),
            (Some(_), _) => return bad(format!("scenario {} takes no table grid", self.scenario)),
            (None, _) => {}
        }
        Ok(())
    }

    /// Schedule coordinates `s_k = k / (n - 1)` (a single point sits at `s = 1`).
    pub fn schedule(&self) -> Vec<f64> {
        let n = self.schedule_points;
        if n == 1 {
            return vec![1.0];
        }
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    pub fn beta_at(&self, k: usize, s: f64) -> f64 {
        match &self.activation {
            Activation::SinSquared => sin_squared(s),
            Activation::Constant { beta } => *beta,
            Activation::Samples { beta } => beta[k],
        }
    }
}

/// `sin²(πt)`, exactly zero at both ends of `[0, 1]`.
pub fn sin_squared(t: f64) -> f64 {
    let t = t.rem_euclid(1.0);
    (PI * t.min(1.0 - t)).sin().powi(2)
}

/// Upper bound on elements per axis accepted from user input.
pub const MAX_DIVISIONS: usize = 512;

/// Parses `"nx,ny,nz"`.
pub fn parse_divisions(text: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "expected three comma-separated counts, got '{text}'"
        )));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad element count '{p}': {e}")))?;
        if *o == 0 || *o > MAX_DIVISIONS {
            return Err(Error::Config(format!(
                "element counts must lie in 1..={MAX_DIVISIONS}, got {o}"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_round_trip() {
        for kind in ScenarioKind::ALL {
            let c = ScenarioConfig::builtin(kind);
            c.validate().unwrap();
            let back = ScenarioConfig::from_json(&c.to_json().unwrap()).unwrap();
            assert_eq!(back, c);
            assert_eq!(kind.name().parse::<ScenarioKind>().unwrap(), kind);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(
            &ScenarioConfig::builtin(ScenarioKind::FreeContraction)
                .to_json()
                .unwrap(),
        )
        .unwrap();
        v["colour"] = serde_json::json!("red");
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        v.as_object_mut().unwrap().remove("colour");
        v["material"]["t0"] = serde_json::json!(35.0);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn ranges_are_checked() {
        let mut c = ScenarioConfig::builtin(ScenarioKind::Uniaxial);
        c.activation = Activation::Constant { beta: 1.5 };
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::builtin(ScenarioKind::CylinderAutoregulation);
        c.geometry = Geometry::Slab {
            lx_cm: 1.0,
            ly_cm: 1.0,
            lz_cm: 0.1,
        };
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::builtin(ScenarioKind::FreeContraction);
        c.activation = Activation::Samples { beta: vec![0.0, 0.5] };
        assert!(c.validate().is_err());
        c.material.a_over_d = 0.3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedule_and_waves() {
        let c = ScenarioConfig::builtin(ScenarioKind::CylinderAutoregulation);
        let s = c.schedule();
        assert_eq!(s.len(), 21);
        assert_eq!((s[0], s[20]), (0.0, 1.0));
        assert!((c.beta_at(10, s[10]) - 1.0).abs() < 1e-15);
        assert_eq!((c.beta_at(0, 0.0), c.beta_at(20, 1.0)), (0.0, 0.0));
        assert!((sin_squared(0.3) - sin_squared(0.7)).abs() < 1e-15);
        assert!((c.loading.pressure_kpa(0.5).unwrap() - 18.0).abs() < 1e-12);
        let mmhg = Loading::PressureSinSquaredMmhg {
            base_mmhg: 60.0,
            amplitude_mmhg: 0.0,
        };
        assert!((mmhg.pressure_kpa(0.3).unwrap() - 7.999_343_244_9).abs() < 1e-9);
    }

    #[test]
    fn divisions() {
        assert_eq!(parse_divisions("8,1,2").unwrap(), [8, 1, 2]);
        assert_eq!(parse_divisions(" 4 , 4,1").unwrap(), [4, 4, 1]);
        for bad in ["", "1,2", "1,2,3,4", "0,1,1", "a,b,c", "-1,1,1", "1,1,100000"] {
            assert!(parse_divisions(bad).is_err(), "{bad}");
        }
    }
}
