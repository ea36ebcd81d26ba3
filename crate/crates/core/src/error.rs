use thiserror::Error;

use crate::tableau::TableauViolation;

pub type Result<T> = std::result::Result<T, HmmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HmmError {
    #[error("invalid tableau: {}", format_violations(.0))]
    InvalidTableau(Vec<TableauViolation>),

    #[error("x = {x} is outside the valid domain [{lo}, {hi}] of system `{system}`")]
    Domain {
        system: String,
        x: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-integral step count: {what} = {value}")]
    NonIntegralSteps { what: &'static str, value: f64 },

    #[error("micro solver is unstable: |rho| = {rho_abs} >= 1")]
    UnstableMicro { rho_abs: f64 },

    #[error("micro solver blow-up at micro step {micro_step}")]
    MicroBlowUp { micro_step: usize },

    #[error("non-finite increment at macro step {macro_step:?}, stage {stage}{}", micro_suffix(*.micro_step))]
    MacroBlowUp {
        macro_step: Option<usize>,
        stage: usize,
        micro_step: Option<usize>,
    },

    #[error("time {t} is not on the reference grid (step {step})")]
    GridMismatch { t: f64, step: f64 },

    #[error("degenerate sweep: error {error} at parameter value {value}")]
    DegenerateSweep { value: f64, error: f64 },

    #[error("log-log fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("log-log fit needs strictly positive coordinates, got ({0}, {1})")]
    NonPositivePoint(f64, f64),
}

fn format_violations(v: &[TableauViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn micro_suffix(micro_step: Option<usize>) -> String {
    match micro_step {
        Some(m) => format!(" (micro step {m})"),
        None => String::new(),
    }
}

impl HmmError {
    /// Errors caused by the inputs rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Self::InvalidTableau(_)
                | Self::Domain { .. }
                | Self::InvalidParameter { .. }
                | Self::NonIntegralSteps { .. }
                | Self::UnstableMicro { .. }
                | Self::TooFewPoints(_)
        )
    }
}
