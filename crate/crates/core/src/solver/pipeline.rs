//! The two-step procedure: free contraction (state A) at activation `β`,
//! then the loaded state C with the state-A tensions frozen, both reached by
//! warm-started continuation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constitutive::{MaterialParams, PseudoActiveTensions};
use crate::error::{Error, Result};
use crate::fem::assembly::{Assembly, BoundaryLoad, ElementTensions, LoadKind, Stage};
use crate::fem::dofs::{Constraint, DofMap, DofState};
use crate::fem::mesh::Mesh;

use super::nonlinear::{solve_nonlinear, NonlinearReport, SolverConfig};

/// Geometry, material and essential conditions shared by both states.
#[derive(Debug, Clone)]
pub struct Setup<'m> {
    pub mesh: &'m Mesh,
    pub params: MaterialParams,
    /// Solve the coupling constraint in state A. When off, the `q` unknowns
    /// and their rows are removed and all tensions are zero.
    pub coupling: bool,
    /// Rigid-mode removal for the free contraction.
    pub free_constraints: Vec<Constraint>,
    /// Essential conditions of the loaded state; `Prescribe` values are
    /// reached by continuation from the starting configuration.
    pub loaded_constraints: Vec<Constraint>,
}

/// Activation, frozen tensions and surface loads of a loaded state.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedState {
    pub beta: f64,
    pub tensions: Vec<ElementTensions>,
    pub loads: Vec<BoundaryLoad>,
}

impl LoadedState {
    /// The state-A equilibrium seen as a loaded state with no surface loads.
    pub fn unloaded(beta: f64, tensions: Vec<ElementTensions>) -> Self {
        LoadedState {
            beta,
            tensions,
            loads: Vec::new(),
        }
    }

    fn lerp(&self, to: &LoadedState, t: f64) -> Result<LoadedState> {
        if self.tensions.len() != to.tensions.len() {
            return Err(Error::Config("tension fields differ in length".into()));
        }
        let mix = |a: f64, b: f64| a + t * (b - a);
        let tensions = self
            .tensions
            .iter()
            .zip(&to.tensions)
            .map(|(a, b)| {
                let mut out = *a;
                for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
                    *o = PseudoActiveTensions {
                        t_f: mix(x.t_f, y.t_f),
                        t_cf: mix(x.t_cf, y.t_cf),
                    };
                }
                out
            })
            .collect();
        let loads = to
            .loads
            .iter()
            .map(|l| {
                let start = self.loads.iter().find(|s| s.set == l.set).map(|s| &s.kind);
                let kind = match (&l.kind, start) {
                    (LoadKind::FollowerPressure(b), Some(LoadKind::FollowerPressure(a))) => {
                        LoadKind::FollowerPressure(mix(*a, *b))
                    }
                    (LoadKind::FollowerPressure(b), None) => LoadKind::FollowerPressure(t * b),
                    (LoadKind::ReferenceTraction(b), Some(LoadKind::ReferenceTraction(a))) => {
                        LoadKind::ReferenceTraction([0, 1, 2].map(|i| mix(a[i], b[i])))
                    }
                    (LoadKind::ReferenceTraction(b), None) => LoadKind::ReferenceTraction(b.map(|v| t * v)),
                    _ => {
                        return Err(Error::Config(format!(
                            "load kind on '{}' changes along the path",
                            l.set
                        )))
                    }
                };
                Ok(BoundaryLoad {
                    set: l.set.clone(),
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedState {
            beta: mix(self.beta, to.beta),
            tensions,
            loads,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    /// Nonlinear iterations summed over all continuation increments.
    pub iterations: usize,
    pub increments: usize,
    pub residual_norm: f64,
    pub beta: f64,
    pub state: DofState,
    /// State A: tensions computed from the solution. State C: tensions applied.
    pub tensions: Vec<ElementTensions>,
    /// Element-mean physical Cauchy stresses `(σ11, σ22, σ33)` in the fiber frame.
    pub stresses: Vec<[f64; 3]>,
    /// Per element `(V_e⁻¹ ∫ (I3 - 1) dV, V_e⁻¹ ∫ h dV)`.
    pub constraint_residuals: Vec<(f64, f64)>,
    /// `(v - V) / V` over the whole mesh.
    pub volume_change: f64,
}

fn report(asm: &Assembly, state: DofState, nl: &Progress, tensions: Vec<ElementTensions>) -> Result<SolveReport> {
    let constraint_residuals = asm
        .constraint_integrals(&state)?
        .into_iter()
        .enumerate()
        .map(|(e, (v, h))| (v / asm.element_volume(e), h / asm.element_volume(e)))
        .collect();
    let v0 = asm.reference_volume();
    Ok(SolveReport {
        converged: nl.converged,
        iterations: nl.iterations,
        increments: nl.increments,
        residual_norm: nl.residual_norm,
        beta: asm.stage.beta(),
        stresses: asm.element_stresses(&state)?,
        constraint_residuals,
        volume_change: (asm.deformed_volume(&state)? - v0) / v0,
        tensions,
        state,
    })
}

struct Progress {
    converged: bool,
    iterations: usize,
    increments: usize,
    residual_norm: f64,
}

const MIN_INCREMENT: f64 = 1e-6;

/// Drives `build(t)` from `t = 0` (where `start` is assumed close to
/// equilibrium) to `t = 1`, halving the increment on failure.
fn continuation<'m, B>(build: B, start: &DofState, config: &SolverConfig) -> Result<(Assembly<'m>, DofState, Progress)>
where
    B: Fn(f64) -> Result<Assembly<'m>>,
{
    let target = build(1.0)?;
    let mut x = target.map.to_unknowns(start);
    let mut progress = Progress {
        converged: false,
        iterations: 0,
        increments: 0,
        residual_norm: f64::INFINITY,
    };
    // already in equilibrium (β = 0, or a re-solve from a converged state)
    let r0 = target.residual(&x)?;
    let n0 = r0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n0 <= config.tolerance {
        progress.converged = true;
        progress.residual_norm = n0;
        let state = target.map.to_state(&x);
        return Ok((target, state, progress));
    }
    let base = 1.0 / config.continuation_steps as f64;
    let mut dt = base;
    let mut t = 0.0;
    let mut previous: Option<(f64, Vec<f64>)> = None;
    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let asm = if t_next == 1.0 { target.clone() } else { build(t_next)? };
        let f = |y: &[f64]| asm.residual(y);
        let mut guesses = Vec::with_capacity(2);
        if let Some((tp, xp)) = &previous {
            let k = (t_next - t) / (t - tp);
            guesses.push(x.iter().zip(xp).map(|(a, b)| a + k * (a - b)).collect::<Vec<_>>());
        }
        guesses.push(x.clone());
        let mut accepted: Option<NonlinearReport> = None;
        let mut last_reason = String::from("no admissible starting point");
        for guess in guesses {
            match solve_nonlinear(&f, &guess, config) {
                Ok(r) => {
                    progress.iterations += r.iterations;
                    if r.converged {
                        accepted = Some(r);
                        break;
                    }
                    last_reason = format!("residual {:.3e} after {} iterations", r.residual_norm, r.iterations);
                }
                Err(e @ Error::NonFiniteResidual { .. }) => return Err(e),
                Err(e) => last_reason = e.to_string(),
            }
        }
        match accepted {
            Some(r) => {
                previous = Some((t, std::mem::replace(&mut x, r.x)));
                t = t_next;
                progress.increments += 1;
                progress.residual_norm = r.residual_norm;
                dt = (dt * 1.5).min(base);
            }
            None => {
                dt *= 0.5;
                if dt < MIN_INCREMENT {
                    return Err(Error::Continuation {
                        s: t_next,
                        reason: last_reason,
                    });
                }
            }
        }
    }
    progress.converged = true;
    let state = target.map.to_state(&x);
    Ok((target, state, progress))
}

/// Relative singular-value cutoff for directions of `(p, q)` the residual
/// does not see.
const NULL_RANK_CUTOFF: f64 = 1e-10;

/// The residual is linear in the multipliers at fixed geometry. When the
/// equilibrium rows leave some combinations of `(p, q)` undetermined, the
/// solver would return whichever member of that family its path led to; pick
/// instead the one with the least volume-weighted `Σ V_e q_e²`.
fn minimum_norm_multipliers(asm: &Assembly, state: &DofState) -> Result<Option<DofState>> {
    let Some(q) = &state.q else { return Ok(None) };
    let ne = q.len();
    let base = asm.residual_of(state)?;
    let columns = (0..2 * ne)
        .into_par_iter()
        .map(|j| {
            let mut s = state.clone();
            match &mut s.q {
                Some(q) if j >= ne => q[j - ne] += 1.0,
                _ => s.p[j] += 1.0,
            }
            Ok(asm
                .residual_of(&s)?
                .iter()
                .zip(&base)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = base.len().max(2 * ne);
    let jm = DMatrix::from_fn(rows, 2 * ne, |i, j| columns[j].get(i).copied().unwrap_or(0.0));
    let svd = jm.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Singular("multiplier SVD did not converge".into()))?;
    let smax = svd.singular_values.max();
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= NULL_RANK_CUTOFF * smax)
        .collect();
    if null.is_empty() {
        return Ok(None);
    }
    // minimise |W^½ (q + N_q c)| over c
    let w: Vec<f64> = (0..ne).map(|e| asm.element_volume(e).sqrt()).collect();
    let a = DMatrix::from_fn(ne, null.len(), |e, k| w[e] * v_t[(null[k], ne + e)]);
    let b = DVector::from_fn(ne, |e, _| -w[e] * q[e]);
    let c = a
        .svd(true, true)
        .solve(&b, NULL_RANK_CUTOFF)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let mut out = state.clone();
    for (k, &row) in null.iter().enumerate() {
        for e in 0..ne {
            out.p[e] += c[k] * v_t[(row, e)];
            if let Some(q) = &mut out.q {
                q[e] += c[k] * v_t[(row, ne + e)];
            }
        }
    }
    Ok(Some(out))
}

fn zero_tensions(mesh: &Mesh) -> Vec<ElementTensions> {
    vec![[PseudoActiveTensions::default(); 8]; mesh.element_count()]
}

/// Free contraction at `beta`, continued from `from = (state, β)` or from the
/// reference configuration at `β = 0`.
pub fn solve_state_a(
    setup: &Setup,
    beta: f64,
    from: Option<(&DofState, f64)>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let map = DofMap::new(setup.mesh, &setup.free_constraints, setup.coupling)?;
    let reference = DofState::reference(setup.mesh, setup.coupling);
    let (start, beta0) = from.unwrap_or((&reference, 0.0));
    let build = |t: f64| {
        Assembly::new(
            setup.mesh,
            map.clone(),
            setup.params,
            Stage::FreeContraction {
                beta: beta0 + t * (beta - beta0),
            },
            Vec::new(),
        )
    };
    let (asm, mut state, mut progress) = continuation(build, start, config)?;
    if let Some(projected) = minimum_norm_multipliers(&asm, &state)? {
        let x0 = asm.map.to_unknowns(&projected);
        let polished = solve_nonlinear(&|y: &[f64]| asm.residual(y), &x0, config)?;
        if !polished.converged {
            return Err(Error::Continuation {
                s: 1.0,
                reason: format!("multiplier selection left residual {:.3e}", polished.residual_norm),
            });
        }
        progress.iterations += polished.iterations;
        progress.residual_norm = polished.residual_norm;
        state = asm.map.to_state(&polished.x);
    }
    let tensions = if setup.coupling {
        asm.element_tensions(&state)?
    } else {
        zero_tensions(setup.mesh)
    };
    report(&asm, state, &progress, tensions)
}

/// Loaded state continued from `(start, from)` to `to`. Prescribed values of
/// the loaded constraints move linearly from their positions in `start`.
pub fn solve_state_c(
    setup: &Setup,
    start: &DofState,
    from: &LoadedState,
    to: &LoadedState,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let origins = setup
        .loaded_constraints
        .iter()
        .map(|c| match c {
            Constraint::Prescribe { set, component, .. } => {
                let nodes = setup.mesh.face_set_nodes(set)?;
                Ok(nodes.first().map(|&n| start.coords[n][*component]))
            }
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let start = DofState {
        q: None,
        ..start.clone()
    };
    let build = |t: f64| {
        let constraints: Vec<Constraint> = setup
            .loaded_constraints
            .iter()
            .zip(&origins)
            .map(|(c, origin)| match (c, origin) {
                (Constraint::Prescribe { set, component, value }, Some(v0)) => Constraint::Prescribe {
                    set: set.clone(),
                    component: *component,
                    value: v0 + t * (value - v0),
                },
                _ => c.clone(),
            })
            .collect();
        let map = DofMap::new(setup.mesh, &constraints, false)?;
        let s = from.lerp(to, t)?;
        Assembly::new(
            setup.mesh,
            map,
            setup.params,
            Stage::Loaded {
                beta: s.beta,
                tensions: s.tensions,
            },
            s.loads,
        )
    };
    let (asm, state, progress) = continuation(build, &start, config)?;
    report(&asm, state, &progress, to.tensions.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePoint {
    pub s: f64,
    pub beta: f64,
    pub loads: Vec<BoundaryLoad>,
    /// Extra essential conditions of the loaded state at this point.
    pub prescribed: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepStep {
    pub s: f64,
    pub state_a: SolveReport,
    pub state_c: SolveReport,
    /// State C was reached from the reference configuration because the load
    /// path from state A ran into a limit point.
    pub state_c_from_reference: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub steps: Vec<SweepStep>,
    /// First failure, tagged with its schedule coordinate; earlier steps are kept.
    pub failure: Option<Error>,
}

/// Runs the two-step procedure at every schedule point. State A warm-starts
/// from the previous point's state A; state C starts from the new state A.
/// When that load path fails (a pressurized tube can snap through to an
/// inflated branch), state C is retried from the reference configuration with
/// activation, tensions and loads ramped together.
pub fn continuation_sweep(setup: &Setup, schedule: &[SchedulePoint], config: &SolverConfig) -> SweepOutcome {
    let mut steps: Vec<SweepStep> = Vec::with_capacity(schedule.len());
    for (k, point) in schedule.iter().enumerate() {
        if k > 0 && !(point.s >= schedule[k - 1].s) {
            return SweepOutcome {
                steps,
                failure: Some(Error::Config(format!("schedule not ordered at s = {}", point.s))),
            };
        }
        let result = (|| {
            let prev = steps.last().map(|st| (&st.state_a.state, st.state_a.beta));
            let a = solve_state_a(setup, point.beta, prev, config)?;
            let from = LoadedState::unloaded(point.beta, a.tensions.clone());
            let to = LoadedState {
                loads: point.loads.clone(),
                ..from.clone()
            };
            let mut loaded = setup.clone();
            loaded.loaded_constraints.extend(point.prescribed.iter().cloned());
            let (c, state_c_from_reference) = match solve_state_c(&loaded, &a.state, &from, &to, config) {
                Ok(c) => (c, false),
                Err(Error::Continuation { .. }) if !to.loads.is_empty() => {
                    let zero = LoadedState::unloaded(0.0, zero_tensions(setup.mesh));
                    let reference = DofState::reference(setup.mesh, false);
                    (solve_state_c(&loaded, &reference, &zero, &to, config)?, true)
                }
                Err(e) => return Err(e),
            };
            Ok(SweepStep {
                s: point.s,
                state_a: a,
                state_c: c,
                state_c_from_reference,
            })
        })();
        match result {
            Ok(step) => steps.push(step),
            Err(e) => {
                let failure = match e {
                    Error::Continuation { reason, .. } => Error::Continuation { s: point.s, reason },
                    other => Error::Continuation {
                        s: point.s,
                        reason: other.to_string(),
                    },
                };
                return SweepOutcome {
                    steps,
                    failure: Some(failure),
                };
            }
        }
    }
    SweepOutcome { steps, failure: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_slab_mesh;

    fn slab_setup(mesh: &Mesh, coupling: bool) -> Setup<'_> {
        let pins = vec![
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
        ];
        Setup {
            mesh,
            params: MaterialParams::control(),
            coupling,
            free_constraints: pins.clone(),
            loaded_constraints: pins,
        }
    }

    #[test]
    fn zero_activation_is_exact_identity() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 1, 1, 1).unwrap();
        let setup = slab_setup(&mesh, true);
        let a = solve_state_a(&setup, 0.0, None, &SolverConfig::default()).unwrap();
        assert!(a.converged);
        assert_eq!(a.state.coords, mesh.nodes);
        assert_eq!(a.state.p, vec![0.0]);
        assert_eq!(a.state.q, Some(vec![0.0]));
        assert!(a.tensions[0].iter().all(|t| *t == PseudoActiveTensions::default()));
    }

    #[test]
    fn free_contraction_shortens_fibers() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 1, 1, 1).unwrap();
        for coupling in [false, true] {
            let setup = slab_setup(&mesh, coupling);
            let a = solve_state_a(&setup, 0.5, None, &SolverConfig::default()).unwrap();
            assert!(a.converged && a.residual_norm <= 1e-12);
            let x = a.state.coords.iter().map(|c| c[0]).fold(0.0, f64::max);
            assert!(x < 1.0, "fiber stretch {x}");
            assert!(a.volume_change.abs() < 1e-8);
        }
    }

    #[test]
    fn sweep_keeps_prior_steps_on_failure() {
        let mesh = build_slab_mesh(1.0, 1.0, 0.1, 1, 1, 1).unwrap();
        let setup = slab_setup(&mesh, false);
        let schedule = vec![
            SchedulePoint {
                s: 0.0,
                beta: 0.0,
                loads: vec![],
                prescribed: vec![],
            },
            SchedulePoint {
                s: 0.1,
                beta: 0.1,
                loads: vec![],
                prescribed: vec![],
            },
            SchedulePoint {
                s: 0.2,
                beta: 2.0,
                loads: vec![],
                prescribed: vec![],
            },
        ];
        let out = continuation_sweep(&setup, &schedule, &SolverConfig::default());
        assert_eq!(out.steps.len(), 2);
        assert!(matches!(out.failure, Some(Error::Continuation { s, .. }) if s == 0.2));
    }
}
