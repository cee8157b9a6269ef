//! Nonlinear solvers and the two-step free-contraction / loaded pipeline.

pub mod nonlinear;
pub mod pipeline;

pub use nonlinear::{fd_jacobian, solve_nonlinear, Backend, NonlinearReport, SolverConfig};
pub use pipeline::{
    continuation_sweep, solve_state_a, solve_state_c, LoadedState, SchedulePoint, Setup, SolveReport, SweepOutcome,
    SweepStep,
};
