//! Micro solver: explicit chain Runge-Kutta steps on the fast equation with
//! the slow variable frozen, and its linear amplification factor.

use crate::error::{HmmError, Result};
use crate::system::MultiscaleSystem;
use crate::tableau::ChainTableau;

/// Tableau and step size of the micro solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroSolver {
    tableau: ChainTableau,
    delta_t: f64,
}

impl MicroSolver {
    pub fn new(tableau: ChainTableau, delta_t: f64) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(HmmError::InvalidParameter {
                field: "delta_t",
                reason: format!("micro step must be positive, got {delta_t}"),
            });
        }
        let violations = tableau.validate();
        if !violations.is_empty() {
            return Err(HmmError::InvalidTableau(violations));
        }
        Ok(Self { tableau, delta_t })
    }

    pub fn tableau(&self) -> &ChainTableau {
        &self.tableau
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn order(&self) -> u32 {
        self.tableau.order()
    }

    /// Linear amplification factor for a system with scale `epsilon`.
    pub fn rho(&self, epsilon: f64) -> f64 {
        rho_factor(self.order(), -self.delta_t / epsilon)
    }

    /// Fails when `|rho(-delta_t/eps)| >= 1`.
    pub fn check_stability(&self, epsilon: f64) -> Result<()> {
        let rho = self.rho(epsilon);
        if rho.abs() < 1.0 {
            Ok(())
        } else {
            Err(HmmError::UnstableMicro { rho_abs: rho.abs() })
        }
    }

    /// Applies `steps` micro steps at frozen `x`, adding the number of fast-field
    /// evaluations to `fast_evals`.
    pub fn flow_counted<S: MultiscaleSystem + ?Sized>(
        &self,
        system: &S,
        x: f64,
        y0: f64,
        steps: usize,
        fast_evals: &mut u64,
    ) -> Result<f64> {
        let mut y = y0;
        for m in 0..steps {
            y = self
                .tableau
                .step(y, self.delta_t, |y| system.fast_field(x, y));
            if !y.is_finite() {
                return Err(HmmError::MicroBlowUp { micro_step: m + 1 });
            }
        }
        *fast_evals += (steps * self.tableau.stages()) as u64;
        Ok(y)
    }

    pub fn flow<S: MultiscaleSystem + ?Sized>(
        &self,
        system: &S,
        x: f64,
        y0: f64,
        steps: usize,
    ) -> Result<f64> {
        let mut n = 0;
        self.flow_counted(system, x, y0, steps, &mut n)
    }
}

/// Micro solver plus a step count.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroConfig {
    pub solver: MicroSolver,
    pub steps: usize,
}

impl MicroConfig {
    pub fn new(tableau: ChainTableau, delta_t: f64, steps: usize) -> Result<Self> {
        Ok(Self {
            solver: MicroSolver::new(tableau, delta_t)?,
            steps,
        })
    }
}

/// The fast variable after `config.steps` micro steps from `y0` at frozen `x_frozen`.
pub fn micro_flow<S: MultiscaleSystem + ?Sized>(
    system: &S,
    config: &MicroConfig,
    x_frozen: f64,
    y0: f64,
) -> Result<f64> {
    config.solver.flow(system, x_frozen, y0, config.steps)
}

/// Truncated exponential `sum_{j=0}^p z^j / j!`, summed in ascending `j`.
pub fn rho_factor(p: u32, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=p {
        term *= z / f64::from(j);
        sum += term;
    }
    sum
}

/// Smallest `M` with `|rho_factor(p, z)|^M <= target`.
pub fn relaxation_steps_needed(p: u32, z: f64, target: f64) -> Result<u64> {
    let rho = rho_factor(p, z).abs();
    if rho >= 1.0 {
        return Err(HmmError::UnstableMicro { rho_abs: rho });
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(HmmError::InvalidParameter {
            field: "target",
            reason: format!("must lie in (0, 1), got {target}"),
        });
    }
    if rho == 0.0 {
        return Ok(1);
    }
    let mut m = 1;
    let mut power = rho;
    while power > target {
        power *= rho;
        m += 1;
    }
    Ok(m)
}
