//! Heterogeneous multiscale integrators for dissipative stiff ODEs.
//!
//! The general scheme couples a chain-form Runge-Kutta macro solver on the
//! slow variable with a few explicit micro steps on the fast variable before
//! each macro stage. The boosting algorithm (BA), HMM1 and HMM2 are presets
//! of that scheme; see [`integrator`].

pub mod convergence;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod integrator;
pub mod micro;
pub mod reference;
pub mod system;
pub mod tableau;

pub use convergence::{
    fit_loglog, predict_bound, run_sweep, BoundBreakdown, BoundTerm, ConvergenceFit, LogLogFit,
    SweepOutcome, SweepRow, SweepSpec, Vary,
};
pub use error::{HmmError, Result};
pub use experiment::{
    emit_config, parse_config, ConfigFile, Experiment, Preset, SweepSection, TableauChoice,
};
pub use integrator::{
    check_practical_assumptions, hmm_step, integrate, integrate_rescaled, make_preset,
    AssumptionKind, AssumptionReport, HmmSchedule, Integrator, Method, PresetLabel, StageDistance,
    StepOutput, TrajectoryRecord,
};
pub use micro::{micro_flow, relaxation_steps_needed, rho_factor, MicroConfig, MicroSolver};
pub use reference::{
    default_reference_step, final_error, reference_solution, ReferenceConfig, ReferenceSolution,
};
pub use system::{
    builtin_system, reduced_field, BuiltinSystem, BuiltinSystemKind, LipschitzData, Manifold,
    MultiscaleSystem,
};
pub use tableau::{builtin_tableau, BuiltinTableau, ChainTableau, TableauViolation};
