//! Single runs, assumption checks and CSV output for the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::convergence::{predict_bound, BoundBreakdown, SweepOutcome};
use crate::error::{HmmError, Result};
use crate::experiment::Experiment;
use crate::integrator::{
    check_practical_assumptions, integrate, AssumptionReport, TrajectoryRecord,
};
use crate::reference::{final_error, reference_solution, ReferenceConfig};
use crate::system::{builtin_system, LipschitzData, MultiscaleSystem};
use crate::tableau::BuiltinTableau;

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub trajectory: TrajectoryRecord,
    pub reference_step: f64,
    pub reference_final: f64,
    pub final_error: f64,
    pub bound: BoundBreakdown,
}

pub fn run_experiment(exp: &Experiment) -> Result<RunReport> {
    exp.validate()?;
    let system = builtin_system(exp.system, exp.epsilon)?;
    let schedule = exp.schedule()?;
    let (x0, y0) = system.default_initial_condition();
    let trajectory = integrate(&system, &schedule, x0, y0, exp.diagnostics)?;
    let reference_step = exp.reference_step_or_default();
    let reference = reference_solution(
        &system,
        &ReferenceConfig {
            tableau: BuiltinTableau::Rk4Classic.tableau(),
            step: reference_step,
            manifold: exp.reference_manifold,
        },
        x0,
        exp.t_end,
    )?;
    let err = final_error(&trajectory, &reference)?;
    let bound = predict_bound(
        exp.method,
        exp.macro_tableau.order(),
        exp.micro_tableau.order(),
        exp.epsilon,
        exp.dt_ratio,
        exp.m,
        exp.dt,
    );
    Ok(RunReport {
        reference_final: reference.at(trajectory.final_time())?,
        trajectory,
        reference_step,
        final_error: err,
        bound,
    })
}

/// Evaluates the practical assumption for `exp`.
///
/// `lipschitz` defaults to the system's shipped bounds, `d0` to the distance
/// of the default initial condition from `h0`.
pub fn check_experiment(
    exp: &Experiment,
    lipschitz: Option<LipschitzData>,
    d0: Option<f64>,
) -> Result<AssumptionReport> {
    exp.validate()?;
    let system = builtin_system(exp.system, exp.epsilon)?;
    let lip = lipschitz
        .or_else(|| system.lipschitz())
        .ok_or(HmmError::InvalidParameter {
            field: "lipschitz",
            reason: format!(
                "system `{}` ships no Lipschitz data; supply l_f, c_f and l_h",
                exp.system
            ),
        })?;
    let d0 = d0.unwrap_or_else(|| {
        let (x0, y0) = system.default_initial_condition();
        y0 - system.manifold_h0(x0)
    });
    Ok(check_practical_assumptions(
        &system,
        &exp.schedule()?,
        &lip,
        d0,
    ))
}

pub fn trajectory_csv(rec: &TrajectoryRecord) -> String {
    let mut s = String::from("step,t,x,y\n");
    for (i, ((t, x), y)) in rec.times.iter().zip(&rec.slow).zip(&rec.fast).enumerate() {
        writeln!(s, "{i},{},{},{}", fmt_num(*t), fmt_num(*x), fmt_num(*y)).unwrap();
    }
    s
}

/// `None` when the trajectory was integrated without diagnostics.
pub fn diagnostics_csv(rec: &TrajectoryRecord) -> Option<String> {
    let d = rec.stage_distances.as_ref()?;
    let mut s = String::from("step,stage,d_before,d_after\n");
    for sd in d {
        writeln!(
            s,
            "{},{},{},{}",
            sd.step,
            sd.stage,
            fmt_num(sd.before),
            fmt_num(sd.after)
        )
        .unwrap();
    }
    Some(s)
}

pub fn sweep_csv(outcome: &SweepOutcome) -> String {
    let mut s = String::from("method,P,p,epsilon,delta_t,M,macro_step,n_steps,error\n");
    for r in &outcome.rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.macro_order,
            r.micro_order,
            fmt_num(r.epsilon),
            fmt_num(r.delta_t),
            r.m,
            fmt_num(r.macro_step),
            r.n_steps,
            fmt_num(r.error)
        )
        .unwrap();
    }
    writeln!(
        s,
        "# slope={} intercept={} r2={}",
        fmt_num(outcome.fit.slope),
        fmt_num(outcome.fit.intercept),
        fmt_num(outcome.fit.r_squared)
    )
    .unwrap();
    s
}

/// `out.csv` -> `out_<suffix>.csv`.
pub fn suffixed_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

pub fn format_bound(b: &BoundBreakdown) -> String {
    let mut s = format!(
        "bound terms (up to constant): macro={} relax={} eps={} dominant={}",
        fmt_num(b.term_macro),
        fmt_num(b.term_relax),
        fmt_num(b.term_eps),
        b.dominant
    );
    if !b.within_hypothesis {
        s.push_str(" [first-order macro solver: outside the bound's hypothesis]");
    }
    s
}
