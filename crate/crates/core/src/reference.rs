//! Reference solution of the reduced slow dynamics and the final-time error.

use crate::error::{HmmError, Result};
use crate::integrator::TrajectoryRecord;
use crate::system::{reduced_field, Manifold, MultiscaleSystem};
use crate::tableau::{BuiltinTableau, ChainTableau};

/// Relative slack, in units of the reference step, when matching a query time to the grid.
const GRID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub tableau: ChainTableau,
    pub step: f64,
    pub manifold: Manifold,
}

impl ReferenceConfig {
    /// RK4 on `h_eps` with the given step.
    pub fn rk4(step: f64) -> Self {
        Self {
            tableau: BuiltinTableau::Rk4Classic.tableau(),
            step,
            manifold: Manifold::HEps,
        }
    }
}

/// Largest step not above `min(1e-4, smallest_macro_step / 100)` that divides `t_end`.
pub fn default_reference_step(t_end: f64, smallest_macro_step: f64) -> f64 {
    let bound = (smallest_macro_step / 100.0).min(1e-4);
    t_end / (t_end / bound).ceil()
}

/// Reduced trajectory `X(i * step)` for `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    step: f64,
    values: Vec<f64>,
}

impl ReferenceSolution {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// `X(t)`; `t` must be a grid point within the computed range.
    pub fn at(&self, t: f64) -> Result<f64> {
        let k = t / self.step;
        let idx = k.round();
        if !k.is_finite() || idx < 0.0 || (k - idx).abs() > GRID_TOL * idx.max(1.0) {
            return Err(HmmError::GridMismatch { t, step: self.step });
        }
        self.values
            .get(idx as usize)
            .copied()
            .ok_or(HmmError::GridMismatch { t, step: self.step })
    }
}

/// Integrates `X' = f(X, h(X))` from `x0` up to (at least) `t_end`.
pub fn reference_solution<S: MultiscaleSystem + ?Sized>(
    system: &S,
    config: &ReferenceConfig,
    x0: f64,
    t_end: f64,
) -> Result<ReferenceSolution> {
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(HmmError::InvalidParameter {
            field: "reference_step",
            reason: format!("must be positive, got {}", config.step),
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(HmmError::InvalidParameter {
            field: "t_end",
            reason: format!("must be non-negative, got {t_end}"),
        });
    }
    let violations = config.tableau.validate();
    if !violations.is_empty() {
        return Err(HmmError::InvalidTableau(violations));
    }
    reduced_field(system, x0, config.manifold)?;

    let ratio = t_end / config.step;
    let n = if (ratio - ratio.round()).abs() <= GRID_TOL * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let mut values = Vec::with_capacity(n + 1);
    values.push(x0);
    let mut x = x0;
    for _ in 0..n {
        let mut failure = None;
        x = config.tableau.step(x, config.step, |u| {
            reduced_field(system, u, config.manifold).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        values.push(x);
    }
    Ok(ReferenceSolution {
        step: config.step,
        values,
    })
}

/// `|x^n - X(t^n)|` at the trajectory's final time.
pub fn final_error(trajectory: &TrajectoryRecord, reference: &ReferenceSolution) -> Result<f64> {
    let x_ref = reference.at(trajectory.final_time())?;
    Ok((trajectory.final_slow() - x_ref).abs())
}
