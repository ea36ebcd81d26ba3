//! Chain-structured explicit Runge-Kutta tableaus.
//!
//! A chain tableau with nodes `a` and weights `b` advances `u' = f(u)` by
//!
//! ```text
//! k1 = h f(u)
//! kj = h f(u + a_j k_{j-1})      j = 2..S
//! u_next = u + sum_j b_j kj
//! ```
//!
//! Each increment depends only on the previous one. For autonomous scalar
//! problems this covers forward Euler, Heun's RK2 and the classical RK4.

use std::fmt;
use std::str::FromStr;

use crate::error::{HmmError, Result};

/// Tolerance on `|sum(b) - 1|`.
pub const WEIGHT_SUM_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinTableau {
    Euler,
    Rk2Heun,
    Rk4Classic,
}

impl BuiltinTableau {
    pub const ALL: [BuiltinTableau; 3] = [Self::Euler, Self::Rk2Heun, Self::Rk4Classic];

    /// Short name used on the command line and in config files.
    pub fn short_name(self) -> &'static str {
        match self {
            Self::Euler => "euler",
            Self::Rk2Heun => "rk2",
            Self::Rk4Classic => "rk4",
        }
    }

    pub fn tableau(self) -> ChainTableau {
        let (order, nodes, weights) = match self {
            Self::Euler => (1, vec![0.0], vec![1.0]),
            Self::Rk2Heun => (2, vec![0.0, 1.0], vec![0.5, 0.5]),
            Self::Rk4Classic => (
                4,
                vec![0.0, 0.5, 0.5, 1.0],
                vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            ),
        };
        ChainTableau {
            order,
            nodes,
            weights,
        }
    }
}

impl fmt::Display for BuiltinTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BuiltinTableau {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Self::Euler),
            "rk2" | "rk2_heun" | "heun" => Ok(Self::Rk2Heun),
            "rk4" | "rk4_classic" => Ok(Self::Rk4Classic),
            other => Err(HmmError::InvalidParameter {
                field: "tableau",
                reason: format!("unknown tableau `{other}` (expected euler, rk2 or rk4)"),
            }),
        }
    }
}

pub fn builtin_tableau(name: BuiltinTableau) -> ChainTableau {
    name.tableau()
}

/// One violated tableau constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum TableauViolation {
    ZeroOrder,
    NoStages,
    LengthMismatch { nodes: usize, weights: usize },
    NonFinite { index: usize },
    FirstNodeNonZero(f64),
    NodeOutOfRange { index: usize, value: f64 },
    WeightOutOfRange { index: usize, value: f64 },
    WeightSum(f64),
}

impl fmt::Display for TableauViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroOrder => write!(f, "order must be positive"),
            Self::NoStages => write!(f, "tableau has no stages"),
            Self::LengthMismatch { nodes, weights } => {
                write!(f, "{nodes} nodes but {weights} weights")
            }
            Self::NonFinite { index } => write!(f, "non-finite coefficient in stage {}", index + 1),
            Self::FirstNodeNonZero(a) => write!(f, "first node must be 0, got {a}"),
            Self::NodeOutOfRange { index, value } => {
                write!(f, "node {} = {value} outside [0, 1]", index + 1)
            }
            Self::WeightOutOfRange { index, value } => {
                write!(
                    f,
                    "weight {} = {value} outside the admissible range",
                    index + 1
                )
            }
            Self::WeightSum(s) => write!(f, "weights sum to {s}, expected 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTableau {
    order: u32,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChainTableau {
    /// Builds a tableau and rejects it unless every constraint holds.
    pub fn new(order: u32, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let t = Self::unchecked(order, nodes, weights);
        let violations = t.validate();
        if violations.is_empty() {
            Ok(t)
        } else {
            Err(HmmError::InvalidTableau(violations))
        }
    }

    /// Builds a tableau without checking it; see [`ChainTableau::validate`].
    pub fn unchecked(order: u32, nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        Self {
            order,
            nodes,
            weights,
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    /// Returns every violated constraint; an empty vector means the tableau is valid.
    ///
    /// Weights must lie strictly inside (0, 1) when there is more than one
    /// stage. A single-stage tableau must have weight exactly 1.
    pub fn validate(&self) -> Vec<TableauViolation> {
        let mut out = Vec::new();
        if self.order == 0 {
            out.push(TableauViolation::ZeroOrder);
        }
        if self.nodes.is_empty() || self.weights.is_empty() {
            out.push(TableauViolation::NoStages);
            return out;
        }
        if self.nodes.len() != self.weights.len() {
            out.push(TableauViolation::LengthMismatch {
                nodes: self.nodes.len(),
                weights: self.weights.len(),
            });
        }
        for (i, (a, b)) in self.nodes.iter().zip(&self.weights).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                out.push(TableauViolation::NonFinite { index: i });
            }
        }
        if !out.is_empty() {
            return out;
        }

        if self.nodes[0] != 0.0 {
            out.push(TableauViolation::FirstNodeNonZero(self.nodes[0]));
        }
        for (i, &a) in self.nodes.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                out.push(TableauViolation::NodeOutOfRange { index: i, value: a });
            }
        }
        let single = self.weights.len() == 1;
        for (i, &b) in self.weights.iter().enumerate() {
            let ok = if single { b == 1.0 } else { b > 0.0 && b < 1.0 };
            if !ok {
                out.push(TableauViolation::WeightOutOfRange { index: i, value: b });
            }
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            out.push(TableauViolation::WeightSum(sum));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// One chain-form step of size `h` on `u' = f(u)`.
    ///
    /// The first stage evaluates `f` at `u` itself, never at `u + 0 * k0`.
    pub fn step<F>(&self, u: f64, h: f64, mut f: F) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        let mut incr = 0.0;
        let mut k_prev = 0.0;
        for (j, (&a, &b)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let arg = if j == 0 { u } else { u + a * k_prev };
            let k = h * f(arg);
            incr += b * k;
            k_prev = k;
        }
        u + incr
    }
}
