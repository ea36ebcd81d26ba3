//! Parameter sweeps, log-log regression and a-priori error-bound terms.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{HmmError, Result};
use crate::experiment::Experiment;
use crate::integrator::Method;
use crate::micro::rho_factor;
use crate::reference::{default_reference_step, final_error, reference_solution, ReferenceConfig};
use crate::system::builtin_system;
use crate::system::MultiscaleSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vary {
    MacroStep,
    Epsilon,
}

impl Vary {
    pub fn name(self) -> &'static str {
        match self {
            Self::MacroStep => "macro_step",
            Self::Epsilon => "epsilon",
        }
    }
}

impl fmt::Display for Vary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Vary {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro_step" | "Dt" | "dt" => Ok(Self::MacroStep),
            "epsilon" | "eps" => Ok(Self::Epsilon),
            other => Err(HmmError::InvalidParameter {
                field: "vary",
                reason: format!(
                    "unknown sweep variable `{other}` (expected macro_step or epsilon)"
                ),
            }),
        }
    }
}

/// A one-parameter sweep around a base experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Experiment,
    pub vary: Vary,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| HmmError::InvalidParameter {
            field: "values",
            reason,
        };
        if self.values.len() < 2 {
            return Err(HmmError::TooFewPoints(self.values.len()));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid(format!("sweep values must be positive, got {v}")));
        }
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(invalid("sweep values must be strictly monotone".into()));
        }
        for &v in &self.values {
            self.point(v)?.schedule()?;
        }
        Ok(())
    }

    /// The base experiment with the swept parameter set to `value`.
    pub fn point(&self, value: f64) -> Result<Experiment> {
        let mut e = self.base.clone();
        match self.vary {
            Vary::MacroStep => e.dt = value,
            Vary::Epsilon => e.epsilon = value,
        }
        e.validate()?;
        Ok(e)
    }
}

/// One completed sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub macro_order: u32,
    pub micro_order: u32,
    pub epsilon: f64,
    pub delta_t: f64,
    pub m: usize,
    pub macro_step: f64,
    pub n_steps: usize,
    pub parameter: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fit: ConvergenceFit,
}

/// Ordinary least squares of `ln(error)` on `ln(parameter)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(HmmError::TooFewPoints(points.len()));
    }
    if let Some(&(p, e)) = points
        .iter()
        .find(|(p, e)| !(*p > 0.0 && *e > 0.0 && p.is_finite() && e.is_finite()))
    {
        return Err(HmmError::NonPositivePoint(p, e));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(p, e)| (p.ln(), e.ln())).collect();
    let mean_x = logs.iter().map(|l| l.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|l| l.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|l| (l.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|l| (l.0 - mean_x) * (l.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(HmmError::InvalidParameter {
            field: "points",
            reason: "all parameter values coincide".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = logs.iter().map(|l| (l.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|l| (l.1 - (intercept + slope * l.0)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

fn run_point(exp: &Experiment, parameter: f64, reference_step: Option<f64>) -> Result<SweepRow> {
    let system = builtin_system(exp.system, exp.epsilon)?;
    let schedule = exp.schedule()?;
    let (x0, y0) = system.default_initial_condition();
    let traj = crate::integrator::integrate(&system, &schedule, x0, y0, false)?;
    let step = reference_step.unwrap_or_else(|| exp.reference_step_or_default());
    let reference = reference_solution(
        &system,
        &ReferenceConfig {
            tableau: crate::tableau::BuiltinTableau::Rk4Classic.tableau(),
            step,
            manifold: exp.reference_manifold,
        },
        x0,
        exp.t_end,
    )?;
    let error = final_error(&traj, &reference)?;
    if !(error > 0.0 && error.is_finite()) {
        return Err(HmmError::DegenerateSweep {
            value: parameter,
            error,
        });
    }
    Ok(SweepRow {
        method: exp.method,
        macro_order: exp.macro_tableau.order(),
        micro_order: exp.micro_tableau.order(),
        epsilon: exp.epsilon,
        delta_t: schedule.micro().delta_t(),
        m: exp.m,
        macro_step: schedule.macro_step(),
        n_steps: schedule.n_steps(),
        parameter,
        error,
    })
}

/// Integrates every sweep point, measures its final-time error against the
/// reduced reference, and fits the log-log slope.
///
/// A macro-step sweep shares one reference fine enough for its smallest
/// macro step; an epsilon sweep needs a reference per point.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let points: Vec<Experiment> = spec
        .values
        .iter()
        .map(|&v| spec.point(v))
        .collect::<Result<_>>()?;

    let shared_step = match (spec.vary, spec.base.reference_step) {
        (_, Some(s)) => Some(s),
        (Vary::MacroStep, None) => {
            let smallest = points
                .iter()
                .map(|e| e.schedule().map(|s| s.macro_step()))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Some(default_reference_step(spec.base.t_end, smallest))
        }
        (Vary::Epsilon, None) => None,
    };

    let rows: Vec<SweepRow> = points
        .par_iter()
        .zip(spec.values.par_iter())
        .map(|(e, &v)| run_point(e, v, shared_step))
        .collect::<Result<_>>()?;

    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.parameter, r.error)).collect();
    let f = fit_loglog(&pts)?;
    Ok(SweepOutcome {
        rows,
        fit: ConvergenceFit {
            points: pts,
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundTerm {
    Macro,
    Relax,
    Eps,
}

impl BoundTerm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Macro => "term_macro",
            Self::Relax => "term_relax",
            Self::Eps => "term_eps",
        }
    }
}

impl fmt::Display for BoundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three terms of the a-priori error bound, up to an unknown constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundBreakdown {
    pub term_macro: f64,
    pub term_relax: f64,
    pub term_eps: f64,
    pub dominant: BoundTerm,
    /// False for first-order macro solvers, which the bound does not cover.
    pub within_hypothesis: bool,
}

impl BoundBreakdown {
    pub fn total(&self) -> f64 {
        self.term_macro + self.term_relax + self.term_eps
    }
}

/// Bound terms with the constant taken as 1:
///
/// * BA:   `(Dt/M)^P`, `(Dt/M) eps / delta_t`, `eps`
/// * HMM1: `Dt^P`, `Dt rho^M`, `eps`
/// * HMM2: `Dt^P`, `Dt`, `eps`
///
/// with `rho = rho_factor(p, -dt_ratio)` and `delta_t = dt_ratio * eps`.
pub fn predict_bound(
    method: Method,
    macro_order: u32,
    micro_order: u32,
    epsilon: f64,
    dt_ratio: f64,
    m: usize,
    dt: f64,
) -> BoundBreakdown {
    let p_macro = macro_order as i32;
    let (term_macro, term_relax) = match method {
        Method::Ba => {
            let step = dt / m as f64;
            (step.powi(p_macro), step / dt_ratio)
        }
        Method::Hmm1 => {
            let rho = rho_factor(micro_order, -dt_ratio).abs();
            (dt.powi(p_macro), dt * rho.powi(m as i32))
        }
        Method::Hmm2 => (dt.powi(p_macro), dt),
    };
    let term_eps = epsilon;
    let mut dominant = BoundTerm::Macro;
    let mut best = term_macro;
    if term_relax > best {
        dominant = BoundTerm::Relax;
        best = term_relax;
    }
    if term_eps > best {
        dominant = BoundTerm::Eps;
    }
    BoundBreakdown {
        term_macro,
        term_relax,
        term_eps,
        dominant,
        within_hypothesis: macro_order > 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_power_laws() {
        let f = fit_loglog(&[(0.1, 0.01), (0.2, 0.04), (0.4, 0.16)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let f = fit_loglog(&[(0.1, 0.3), (0.2, 0.6)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3.0f64.ln()).abs() < 1e-12);

        let f = fit_loglog(&[(1.0, 0.7), (2.0, 0.7), (4.0, 0.7)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_loglog(&[(0.1, 0.2)]),
            Err(HmmError::TooFewPoints(1))
        ));
        assert!(matches!(
            fit_loglog(&[(0.1, 0.2), (0.2, 0.0)]),
            Err(HmmError::NonPositivePoint(_, _))
        ));
        assert!(fit_loglog(&[(-0.1, 0.2), (0.2, 0.1)]).is_err());
        assert!(fit_loglog(&[(0.1, 0.2), (0.1, 0.3)]).is_err());
    }

    #[test]
    fn fit_imperfect_data_has_r2_below_one() {
        let f = fit_loglog(&[(1.0, 1.0), (2.0, 3.0), (4.0, 5.0), (8.0, 30.0)]).unwrap();
        assert!(f.r_squared > 0.0 && f.r_squared < 1.0);
    }

    #[test]
    fn bound_examples() {
        let b = predict_bound(Method::Hmm2, 2, 1, 1e-5, 0.2, 30, 0.1);
        assert!((b.term_macro - 0.01).abs() < 1e-15);
        assert_eq!(b.term_relax, 0.1);
        assert_eq!(b.term_eps, 1e-5);
        assert_eq!(b.dominant, BoundTerm::Relax);

        let b = predict_bound(Method::Ba, 2, 1, 1e-5, 0.2, 30, 0.1);
        assert!((b.term_macro - 1.111_111e-5).abs() < 1e-10);
        assert!((b.term_relax - 1.666_667e-2).abs() < 1e-8);
        assert_eq!(b.dominant, BoundTerm::Relax);

        let b = predict_bound(Method::Hmm1, 2, 1, 1e-5, 0.2, 30, 0.1);
        let powered: f64 = (0..30).fold(1.0, |acc, _| acc * 0.8);
        assert!((b.term_relax - 0.1 * powered).abs() < 1e-15);
        assert!((b.term_relax - 1.238e-4).abs() < 1e-7);
        assert_eq!(b.dominant, BoundTerm::Macro);
        assert!(b.within_hypothesis);
    }

    #[test]
    fn bound_ties_and_hypothesis_flag() {
        // Dt^P = Dt when P = 1: tie goes to the macro term
        let b = predict_bound(Method::Hmm2, 1, 1, 1e-5, 0.2, 30, 0.1);
        assert_eq!(b.dominant, BoundTerm::Macro);
        assert!(!b.within_hypothesis);
        let b = predict_bound(Method::Hmm2, 2, 1, 0.5, 0.2, 30, 0.1);
        assert_eq!(b.dominant, BoundTerm::Eps);
    }

    #[test]
    fn vary_parses() {
        assert_eq!("epsilon".parse::<Vary>().unwrap(), Vary::Epsilon);
        assert_eq!("macro_step".parse::<Vary>().unwrap(), Vary::MacroStep);
        assert!("M".parse::<Vary>().is_err());
    }
}
