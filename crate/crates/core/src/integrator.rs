//! The general heterogeneous multiscale scheme.
//!
//! One macro step from `(x_n, y_n)` with a chain tableau `(a, b)` of `S` stages:
//!
//! ```text
//! for j = 1..S:
//!     xj      = x_n                    (j = 1)
//!             = x_n + a_j k_{j-1}      (j > 1)
//!     yj_0    = y_n                    (j = 1)
//!             = y1_{M_1}               (j > 1)
//!     yj_{Mj} = micro flow of M_j steps from yj_0 at frozen xj
//!     k_j     = dt f(xj, yj_{Mj})
//! x_{n+1} = x_n + sum_j b_j k_j
//! y_{n+1} = y1_{M_1}
//! ```
//!
//! The boosting algorithm (BA), HMM1 and HMM2 differ only in the per-stage
//! micro step counts `M_j` and the macro step size.

use std::fmt;
use std::str::FromStr;

use crate::error::{HmmError, Result};
use crate::micro::{rho_factor, MicroSolver};
use crate::system::{LipschitzData, MultiscaleSystem};
use crate::tableau::ChainTableau;

/// Tolerance when checking that a step count computed from real parameters is integral.
pub const STEP_COUNT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Boosting algorithm: `M = (1, 0, .., 0)` with macro step `Dt / M`.
    Ba,
    /// Relax for `M` micro steps before every stage.
    Hmm1,
    /// Relax for `M` micro steps before the first stage only.
    Hmm2,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Hmm1, Method::Hmm2, Method::Ba];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ba => "ba",
            Self::Hmm1 => "hmm1",
            Self::Hmm2 => "hmm2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ba" => Ok(Self::Ba),
            "hmm1" => Ok(Self::Hmm1),
            "hmm2" => Ok(Self::Hmm2),
            other => Err(HmmError::InvalidParameter {
                field: "method",
                reason: format!("unknown method `{other}` (expected ba, hmm1 or hmm2)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetLabel {
    Ba,
    Hmm1,
    Hmm2,
    Custom,
}

impl From<Method> for PresetLabel {
    fn from(m: Method) -> Self {
        match m {
            Method::Ba => Self::Ba,
            Method::Hmm1 => Self::Hmm1,
            Method::Hmm2 => Self::Hmm2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmSchedule {
    macro_tableau: ChainTableau,
    micro: MicroSolver,
    stage_micro_steps: Vec<usize>,
    macro_step: f64,
    n_steps: usize,
    label: PresetLabel,
}

impl HmmSchedule {
    pub fn new(
        macro_tableau: ChainTableau,
        micro: MicroSolver,
        stage_micro_steps: Vec<usize>,
        macro_step: f64,
        n_steps: usize,
        label: PresetLabel,
    ) -> Result<Self> {
        let violations = macro_tableau.validate();
        if !violations.is_empty() {
            return Err(HmmError::InvalidTableau(violations));
        }
        if !(macro_step > 0.0 && macro_step.is_finite()) {
            return Err(HmmError::InvalidParameter {
                field: "macro_step",
                reason: format!("must be positive, got {macro_step}"),
            });
        }
        let invalid = |reason: String| HmmError::InvalidParameter {
            field: "stage_micro_steps",
            reason,
        };
        if stage_micro_steps.len() != macro_tableau.stages() {
            return Err(invalid(format!(
                "{} entries for a {}-stage macro tableau",
                stage_micro_steps.len(),
                macro_tableau.stages()
            )));
        }
        let m1 = stage_micro_steps[0];
        if m1 < 1 {
            return Err(invalid(
                "the first stage needs at least one micro step".into(),
            ));
        }
        let rest = &stage_micro_steps[1..];
        let ok = match label {
            PresetLabel::Ba => m1 == 1 && rest.iter().all(|&m| m == 0),
            PresetLabel::Hmm1 => rest.iter().all(|&m| m == m1),
            PresetLabel::Hmm2 => rest.iter().all(|&m| m == 0),
            PresetLabel::Custom => true,
        };
        if !ok {
            return Err(invalid(format!(
                "{stage_micro_steps:?} does not match the {label:?} pattern"
            )));
        }
        Ok(Self {
            macro_tableau,
            micro,
            stage_micro_steps,
            macro_step,
            n_steps,
            label,
        })
    }

    pub fn macro_tableau(&self) -> &ChainTableau {
        &self.macro_tableau
    }

    pub fn micro(&self) -> &MicroSolver {
        &self.micro
    }

    pub fn stage_micro_steps(&self) -> &[usize] {
        &self.stage_micro_steps
    }

    pub fn macro_step(&self) -> f64 {
        self.macro_step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn label(&self) -> PresetLabel {
        self.label
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.macro_step
    }

    pub fn with_n_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }
}

fn integral_count(what: &'static str, value: f64) -> Result<usize> {
    let rounded = value.round();
    if !value.is_finite() || rounded < 0.0 || (value - rounded).abs() > STEP_COUNT_TOL {
        return Err(HmmError::NonIntegralSteps { what, value });
    }
    Ok(rounded as usize)
}

/// Schedule for one of the three named methods.
///
/// `dt` is the HMM macro step; the boosting algorithm runs `M` times as many
/// steps of size `dt / M` to the same final time `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn make_preset(
    method: Method,
    macro_tableau: ChainTableau,
    micro_tableau: ChainTableau,
    epsilon: f64,
    dt_ratio: f64,
    m: usize,
    dt: f64,
    t_end: f64,
) -> Result<HmmSchedule> {
    if m < 1 {
        return Err(HmmError::InvalidParameter {
            field: "M",
            reason: "must be at least 1".into(),
        });
    }
    for (field, v) in [
        ("epsilon", epsilon),
        ("dt_ratio", dt_ratio),
        ("Dt", dt),
        ("T", t_end),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(HmmError::InvalidParameter {
                field,
                reason: format!("must be positive, got {v}"),
            });
        }
    }
    let micro = MicroSolver::new(micro_tableau, dt_ratio * epsilon)?;
    let stages = macro_tableau.stages();
    let n = integral_count("T/Dt", t_end / dt)?;
    let (steps, macro_step, n_steps) = match method {
        Method::Ba => {
            let mut steps = vec![0; stages];
            steps[0] = 1;
            let n_ba = integral_count("T*M/Dt", t_end * m as f64 / dt)?;
            (steps, dt / m as f64, n_ba)
        }
        Method::Hmm1 => (vec![m; stages], dt, n),
        Method::Hmm2 => {
            let mut steps = vec![0; stages];
            steps[0] = m;
            (steps, dt, n)
        }
    };
    HmmSchedule::new(
        macro_tableau,
        micro,
        steps,
        macro_step,
        n_steps,
        method.into(),
    )
}

/// Manifold distances `d = y - h0(x_frozen)` before and after one stage's micro relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageDistance {
    pub step: usize,
    pub stage: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub x: f64,
    pub y: f64,
    /// `(d_0, d_{M_j})` for each stage, when requested.
    pub distances: Option<Vec<(f64, f64)>>,
    pub slow_evals: u64,
    pub fast_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub slow: Vec<f64>,
    pub fast: Vec<f64>,
    pub stage_distances: Option<Vec<StageDistance>>,
    pub slow_evals: u64,
    pub fast_evals: u64,
}

impl TrajectoryRecord {
    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory always holds the initial state")
    }

    pub fn final_slow(&self) -> f64 {
        *self
            .slow
            .last()
            .expect("trajectory always holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A system paired with a schedule whose micro solver is stable for it.
pub struct Integrator<'a, S: MultiscaleSystem + ?Sized> {
    system: &'a S,
    schedule: &'a HmmSchedule,
}

impl<'a, S: MultiscaleSystem + ?Sized> Integrator<'a, S> {
    pub fn new(system: &'a S, schedule: &'a HmmSchedule) -> Result<Self> {
        schedule.micro.check_stability(system.epsilon())?;
        Ok(Self { system, schedule })
    }

    pub fn step(&self, x_n: f64, y_n: f64, collect_diagnostics: bool) -> Result<StepOutput> {
        if !(x_n.is_finite() && y_n.is_finite()) {
            return Err(HmmError::InvalidParameter {
                field: "state",
                reason: format!("non-finite state ({x_n}, {y_n})"),
            });
        }
        let sys = self.system;
        let tab = &self.schedule.macro_tableau;
        let dt = self.schedule.macro_step;
        let mut fast_evals = 0u64;
        let mut distances = collect_diagnostics.then(|| Vec::with_capacity(tab.stages()));

        let mut incr = 0.0;
        let mut k_prev = 0.0;
        let mut y_handoff = y_n;
        let stages = tab
            .nodes()
            .iter()
            .zip(tab.weights())
            .zip(&self.schedule.stage_micro_steps);
        for (j, ((&a, &b), &m_j)) in stages.enumerate() {
            let x_frozen = if j == 0 { x_n } else { x_n + a * k_prev };
            let y_start = if j == 0 { y_n } else { y_handoff };
            let y_relaxed = self
                .schedule
                .micro
                .flow_counted(sys, x_frozen, y_start, m_j, &mut fast_evals)
                .map_err(|e| match e {
                    HmmError::MicroBlowUp { micro_step } => HmmError::MacroBlowUp {
                        macro_step: None,
                        stage: j + 1,
                        micro_step: Some(micro_step),
                    },
                    other => other,
                })?;
            if j == 0 {
                y_handoff = y_relaxed;
            }
            if let Some(d) = distances.as_mut() {
                let h = sys.manifold_h0(x_frozen);
                d.push((y_start - h, y_relaxed - h));
            }
            let k = dt * sys.slow_field(x_frozen, y_relaxed);
            if !k.is_finite() {
                return Err(HmmError::MacroBlowUp {
                    macro_step: None,
                    stage: j + 1,
                    micro_step: None,
                });
            }
            incr += b * k;
            k_prev = k;
        }

        Ok(StepOutput {
            x: x_n + incr,
            y: y_handoff,
            distances,
            slow_evals: tab.stages() as u64,
            fast_evals,
        })
    }

    pub fn integrate(
        &self,
        x0: f64,
        y0: f64,
        collect_diagnostics: bool,
    ) -> Result<TrajectoryRecord> {
        let n = self.schedule.n_steps;
        let dt = self.schedule.macro_step;
        let mut rec = TrajectoryRecord {
            times: Vec::with_capacity(n + 1),
            slow: Vec::with_capacity(n + 1),
            fast: Vec::with_capacity(n + 1),
            stage_distances: collect_diagnostics.then(Vec::new),
            slow_evals: 0,
            fast_evals: 0,
        };
        rec.times.push(0.0);
        rec.slow.push(x0);
        rec.fast.push(y0);

        let (mut x, mut y) = (x0, y0);
        for i in 0..n {
            let out = self.step(x, y, collect_diagnostics).map_err(|e| match e {
                HmmError::MacroBlowUp {
                    stage, micro_step, ..
                } => HmmError::MacroBlowUp {
                    macro_step: Some(i + 1),
                    stage,
                    micro_step,
                },
                other => other,
            })?;
            x = out.x;
            y = out.y;
            rec.slow_evals += out.slow_evals;
            rec.fast_evals += out.fast_evals;
            if let (Some(all), Some(d)) = (rec.stage_distances.as_mut(), out.distances) {
                all.extend(
                    d.into_iter()
                        .enumerate()
                        .map(|(j, (before, after))| StageDistance {
                            step: i,
                            stage: j + 1,
                            before,
                            after,
                        }),
                );
            }
            rec.times.push((i + 1) as f64 * dt);
            rec.slow.push(x);
            rec.fast.push(y);
        }
        Ok(rec)
    }
}

/// One macro step; see the module docs.
pub fn hmm_step<S: MultiscaleSystem + ?Sized>(
    system: &S,
    schedule: &HmmSchedule,
    x_n: f64,
    y_n: f64,
    collect_diagnostics: bool,
) -> Result<StepOutput> {
    Integrator::new(system, schedule)?.step(x_n, y_n, collect_diagnostics)
}

pub fn integrate<S: MultiscaleSystem + ?Sized>(
    system: &S,
    schedule: &HmmSchedule,
    x0: f64,
    y0: f64,
    collect_diagnostics: bool,
) -> Result<TrajectoryRecord> {
    Integrator::new(system, schedule)?.integrate(x0, y0, collect_diagnostics)
}

/// The boosting algorithm read as a time rescaling: replace `eps` by
/// `dt eps / delta_t` and advance the coupled `(x, y)` system with the macro
/// tableau at step `dt`, where `dt` and `delta_t` are the schedule's macro and
/// micro steps.
///
/// Unlike the `ba` preset, which relaxes `y` before the first slow
/// evaluation, every stage here evaluates both fields at the same point.
/// The two agree only to first order; no micro solver is involved.
pub fn integrate_rescaled<S: MultiscaleSystem + ?Sized>(
    system: &S,
    schedule: &HmmSchedule,
    x0: f64,
    y0: f64,
) -> Result<TrajectoryRecord> {
    let tab = &schedule.macro_tableau;
    let dt = schedule.macro_step;
    let speed = schedule.micro.delta_t() / dt;
    let n = schedule.n_steps;
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(n + 1),
        slow: Vec::with_capacity(n + 1),
        fast: Vec::with_capacity(n + 1),
        stage_distances: None,
        slow_evals: 0,
        fast_evals: 0,
    };
    rec.times.push(0.0);
    rec.slow.push(x0);
    rec.fast.push(y0);
    let (mut x, mut y) = (x0, y0);
    for i in 0..n {
        let (mut dx, mut dy) = (0.0, 0.0);
        let (mut kx, mut ky) = (0.0, 0.0);
        for (j, (&a, &b)) in tab.nodes().iter().zip(tab.weights()).enumerate() {
            let (xs, ys) = if j == 0 {
                (x, y)
            } else {
                (x + a * kx, y + a * ky)
            };
            kx = dt * system.slow_field(xs, ys);
            ky = dt * speed * system.fast_field(xs, ys);
            dx += b * kx;
            dy += b * ky;
        }
        x += dx;
        y += dy;
        if !(x.is_finite() && y.is_finite()) {
            return Err(HmmError::MacroBlowUp {
                macro_step: Some(i + 1),
                stage: tab.stages(),
                micro_step: None,
            });
        }
        rec.slow_evals += tab.stages() as u64;
        rec.fast_evals += tab.stages() as u64;
        rec.times.push((i + 1) as f64 * dt);
        rec.slow.push(x);
        rec.fast.push(y);
    }
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionKind {
    /// `rho^M |d0| < L_h C_f Dt`
    PerMacroStep,
    /// `rho^n |d0| < L_h C_f Dt eps / delta_t`
    Boosting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub kind: AssumptionKind,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Checks that the micro solver damps the initial manifold distance `d0`
/// below the drift of the slow manifold over one macro step.
pub fn check_practical_assumptions<S: MultiscaleSystem + ?Sized>(
    system: &S,
    schedule: &HmmSchedule,
    lipschitz: &LipschitzData,
    d0: f64,
) -> AssumptionReport {
    let eps = system.epsilon();
    let micro = schedule.micro();
    let rho = rho_factor(micro.order(), -micro.delta_t() / eps).abs();
    let drift = lipschitz.l_h() * lipschitz.c_f() * schedule.macro_step();
    let (kind, lhs, rhs) = match schedule.label() {
        PresetLabel::Ba => (
            AssumptionKind::Boosting,
            pow_usize(rho, schedule.n_steps()) * d0.abs(),
            drift * eps / micro.delta_t(),
        ),
        _ => (
            AssumptionKind::PerMacroStep,
            pow_usize(rho, schedule.stage_micro_steps()[0]) * d0.abs(),
            drift,
        ),
    };
    AssumptionReport {
        kind,
        lhs,
        rhs,
        pass: lhs < rhs,
    }
}

fn pow_usize(base: f64, n: usize) -> f64 {
    match i32::try_from(n) {
        Ok(n) => base.powi(n),
        Err(_) => base.powf(n as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{builtin_system, BuiltinSystemKind};

    #[test]
    fn rescaled_boosting_agrees_to_first_order() {
        let eps = 1e-5;
        let sys = builtin_system(BuiltinSystemKind::MichaelisMenten, eps).unwrap();
        let (x0, y0) = sys.default_initial_condition();
        let mut last = f64::INFINITY;
        for dt in [0.1, 0.05, 0.025] {
            let s = make_preset(
                Method::Ba,
                BuiltinTableau::Rk2Heun.tableau(),
                BuiltinTableau::Euler.tableau(),
                eps,
                0.2,
                30,
                dt,
                5.0,
            )
            .unwrap();
            let ba = integrate(&sys, &s, x0, y0, false).unwrap();
            let rs = integrate_rescaled(&sys, &s, x0, y0).unwrap();
            assert_eq!(rs.len(), ba.len());
            assert_eq!(rs.fast_evals, 2 * 1500 * (0.1 / dt) as u64);
            let gap = (rs.final_slow() - ba.final_slow()).abs();
            assert!(gap > 0.0 && gap < 0.6 * last, "dt={dt}: gap {gap}");
            last = gap;
        }
    }
    use crate::tableau::BuiltinTableau;

    struct Decay;

    impl MultiscaleSystem for Decay {
        fn name(&self) -> &str {
            "decay"
        }
        fn epsilon(&self) -> f64 {
            0.1
        }
        fn slow_field(&self, x: f64, _y: f64) -> f64 {
            -x
        }
        fn fast_field(&self, x: f64, y: f64) -> f64 {
            (x * x - y) / 0.1
        }
        fn manifold_h0(&self, x: f64) -> f64 {
            x * x
        }
        fn manifold_h_eps(&self, x: f64) -> f64 {
            x * x
        }
    }

    fn schedule(
        label: PresetLabel,
        steps: Vec<usize>,
        macro_step: f64,
        n: usize,
        micro_dt: f64,
    ) -> HmmSchedule {
        HmmSchedule::new(
            BuiltinTableau::Rk2Heun.tableau(),
            MicroSolver::new(BuiltinTableau::Euler.tableau(), micro_dt).unwrap(),
            steps,
            macro_step,
            n,
            label,
        )
        .unwrap()
    }

    #[test]
    fn y_independent_field_reduces_to_heun() {
        let s = schedule(PresetLabel::Hmm1, vec![3, 3], 0.1, 1, 0.02);
        let out = hmm_step(&Decay, &s, 1.0, 5.0, false).unwrap();
        assert!((out.x - 0.905).abs() < 1e-15);
    }

    #[test]
    fn boosting_step_on_linear_toy() {
        let sys = builtin_system(BuiltinSystemKind::LinearToy, 0.1).unwrap();
        let s = schedule(PresetLabel::Ba, vec![1, 0], 0.05, 1, 0.02);
        let out = hmm_step(&sys, &s, 1.0, 1.2, true).unwrap();
        assert!((out.y - 1.16).abs() < 1e-15);
        assert!((out.x - 0.942).abs() < 1e-15);
        let d = out.distances.unwrap();
        assert!((d[0].0 - 0.2).abs() < 1e-15);
        assert!((d[0].1 - 0.16).abs() < 1e-15);
        // stage 2 frozen at x = 0.942 with y unchanged
        assert!((d[1].0 - (1.16 - 0.942)).abs() < 1e-15);
        assert_eq!(d[1].0, d[1].1);
    }

    #[test]
    fn schedule_invariants() {
        let micro = || MicroSolver::new(BuiltinTableau::Euler.tableau(), 0.01).unwrap();
        let new = |steps: Vec<usize>, label| {
            HmmSchedule::new(
                BuiltinTableau::Rk2Heun.tableau(),
                micro(),
                steps,
                0.1,
                3,
                label,
            )
        };
        assert!(new(vec![1, 0], PresetLabel::Ba).is_ok());
        assert!(new(vec![2, 0], PresetLabel::Ba).is_err());
        assert!(new(vec![4, 4], PresetLabel::Hmm1).is_ok());
        assert!(new(vec![4, 3], PresetLabel::Hmm1).is_err());
        assert!(new(vec![4, 0], PresetLabel::Hmm2).is_ok());
        assert!(new(vec![4, 1], PresetLabel::Hmm2).is_err());
        assert!(new(vec![0, 4], PresetLabel::Custom).is_err());
        assert!(new(vec![4], PresetLabel::Custom).is_err());
        assert!(new(vec![2, 7], PresetLabel::Custom).is_ok());
    }

    fn preset(method: Method, m: usize, dt: f64, t: f64) -> Result<HmmSchedule> {
        make_preset(
            method,
            BuiltinTableau::Rk2Heun.tableau(),
            BuiltinTableau::Euler.tableau(),
            1e-5,
            0.2,
            m,
            dt,
            t,
        )
    }

    #[test]
    fn preset_step_counts() {
        let ba = preset(Method::Ba, 30, 0.1, 5.0).unwrap();
        assert!((ba.macro_step() - 1.0 / 300.0).abs() < 1e-18);
        assert_eq!(ba.n_steps(), 1500);
        assert_eq!(ba.stage_micro_steps(), &[1, 0]);

        let h1 = preset(Method::Hmm1, 30, 0.5, 5.0).unwrap();
        assert_eq!(h1.n_steps(), 10);
        assert_eq!(h1.stage_micro_steps(), &[30, 30]);

        let h2 = preset(Method::Hmm2, 30, 0.01, 5.0).unwrap();
        assert_eq!(h2.n_steps(), 500);
        assert_eq!(h2.stage_micro_steps(), &[30, 0]);
        assert!((h2.micro().delta_t() - 2e-6).abs() < 1e-20);
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(
            preset(Method::Hmm1, 30, 0.3, 5.0),
            Err(HmmError::NonIntegralSteps { .. })
        ));
        assert!(matches!(
            preset(Method::Hmm1, 0, 0.1, 5.0),
            Err(HmmError::InvalidParameter { field: "M", .. })
        ));
        // T/Dt integral but T*M/Dt is not: 1.5 * 3 / 0.5 = 9 is fine, 1.0 * 1 / 0.4 is not
        assert!(preset(Method::Ba, 3, 0.5, 1.5).is_ok());
        assert!(preset(Method::Ba, 1, 0.4, 1.0).is_err());
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let sys = builtin_system(BuiltinSystemKind::LinearToy, 0.1).unwrap();
        let s = schedule(PresetLabel::Hmm2, vec![2, 0], 0.1, 0, 0.02);
        let rec = integrate(&sys, &s, 1.0, 1.1, false).unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(rec.slow, vec![1.0]);
        assert_eq!(rec.fast, vec![1.1]);
        assert_eq!((rec.slow_evals, rec.fast_evals), (0, 0));
    }

    #[test]
    fn evaluation_counts() {
        let sys = builtin_system(BuiltinSystemKind::LinearToy, 0.1).unwrap();
        let s = schedule(PresetLabel::Hmm1, vec![7, 7], 0.1, 9, 0.02);
        let rec = integrate(&sys, &s, 1.0, 1.1, false).unwrap();
        assert_eq!(rec.slow_evals, 9 * 2);
        assert_eq!(rec.fast_evals, 9 * 2 * 7);

        let s = HmmSchedule::new(
            BuiltinTableau::Rk4Classic.tableau(),
            MicroSolver::new(BuiltinTableau::Rk2Heun.tableau(), 0.02).unwrap(),
            vec![5, 0, 0, 0],
            0.1,
            4,
            PresetLabel::Hmm2,
        )
        .unwrap();
        let rec = integrate(&sys, &s, 1.0, 1.1, false).unwrap();
        assert_eq!(rec.slow_evals, 4 * 4);
        assert_eq!(rec.fast_evals, 4 * 5 * 2);
    }

    #[test]
    fn times_are_multiples_of_the_step() {
        let sys = builtin_system(BuiltinSystemKind::MichaelisMenten, 1e-5).unwrap();
        let s = preset(Method::Ba, 30, 0.1, 5.0).unwrap();
        let (x0, y0) = sys.default_initial_condition();
        let rec = integrate(&sys, &s, x0, y0, false).unwrap();
        assert_eq!(rec.len(), 1501);
        for (i, &t) in rec.times.iter().enumerate() {
            assert_eq!(t, i as f64 * s.macro_step());
        }
        assert!((rec.final_time() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_micro_solver_is_rejected() {
        let sys = builtin_system(BuiltinSystemKind::LinearToy, 1e-3).unwrap();
        let s = schedule(PresetLabel::Hmm2, vec![2, 0], 0.1, 5, 0.01);
        assert!(matches!(
            integrate(&sys, &s, 1.0, 1.0, false),
            Err(HmmError::UnstableMicro { .. })
        ));
    }

    #[test]
    fn practical_assumption_examples() {
        let sys = builtin_system(BuiltinSystemKind::LinearToy, 1e-5).unwrap();
        let unit = LipschitzData::new(1.0, 1.0, 1.0).unwrap();

        // rho^30 with rho = 0.8 is ~1.2e-3 < 0.1
        let h1 = preset(Method::Hmm1, 30, 0.1, 5.0).unwrap();
        let r = check_practical_assumptions(&sys, &h1, &unit, 1.0);
        assert_eq!(r.kind, AssumptionKind::PerMacroStep);
        assert!(r.pass);
        assert!((r.rhs - 0.1).abs() < 1e-15);

        // M = 1: 0.8 >= 0.01
        let h1 = preset(Method::Hmm1, 1, 0.01, 5.0).unwrap();
        let r = check_practical_assumptions(&sys, &h1, &unit, 1.0);
        assert!(!r.pass);
        assert!((r.lhs - 0.8).abs() < 1e-15);

        // rho = 0.5 from p = 2, z = -1: 0.5 >= 0.1
        let h2 = make_preset(
            Method::Hmm2,
            BuiltinTableau::Rk2Heun.tableau(),
            BuiltinTableau::Rk2Heun.tableau(),
            1e-5,
            1.0,
            1,
            0.1,
            5.0,
        )
        .unwrap();
        let r = check_practical_assumptions(&sys, &h2, &unit, 1.0);
        assert!(!r.pass);
        assert_eq!(r.lhs, 0.5);
    }

    #[test]
    fn boosting_assumption_with_eps_close_start() {
        let eps = 1e-5;
        let sys = builtin_system(BuiltinSystemKind::MichaelisMenten, eps).unwrap();
        let lip = sys.lipschitz().unwrap();
        let ba = preset(Method::Ba, 30, 0.1, 5.0).unwrap();
        let (x0, y0) = sys.default_initial_condition();
        let d0 = y0 - sys.manifold_h0(x0);
        let r = check_practical_assumptions(&sys, &ba, &lip, d0);
        assert_eq!(r.kind, AssumptionKind::Boosting);
        assert!(r.pass);
        // L_h C_f (0.1/30) eps / (0.2 eps) = 3 / 60
        assert!((r.rhs - 0.05).abs() < 1e-12);
        assert!(r.lhs < 1e-100);
    }
}
