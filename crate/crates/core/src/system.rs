//! Two-timescale systems with one slow variable `x` and one fast variable `y`:
//!
//! ```text
//! x' = f(x, y)
//! y' = g(x, y)          (g carries the 1/eps factor)
//! ```
//!
//! with an approximate slow manifold `y = h0(x)`, its O(eps) refinement
//! `y = h_eps(x)`, and the reduced dynamics `X' = f(X, h(X))`.

use std::fmt;
use std::str::FromStr;

use crate::error::{HmmError, Result};

/// Lipschitz and size bounds on the slow field and the approximate manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzData {
    l_f: f64,
    c_f: f64,
    l_h: f64,
}

impl LipschitzData {
    pub fn new(l_f: f64, c_f: f64, l_h: f64) -> Result<Self> {
        for (field, v) in [("l_f", l_f), ("c_f", c_f), ("l_h", l_h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HmmError::InvalidParameter {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self { l_f, c_f, l_h })
    }

    pub fn l_f(&self) -> f64 {
        self.l_f
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn l_h(&self) -> f64 {
        self.l_h
    }

    /// Upper bound `l_f (1 + l_h)` on the Lipschitz constant of the reduced field.
    pub fn l_reduced(&self) -> f64 {
        self.l_f * (1.0 + self.l_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Manifold {
    H0,
    HEps,
}

impl FromStr for Manifold {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h0" => Ok(Self::H0),
            "h_eps" | "heps" => Ok(Self::HEps),
            other => Err(HmmError::InvalidParameter {
                field: "manifold",
                reason: format!("unknown manifold `{other}` (expected h0 or h_eps)"),
            }),
        }
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::H0 => "h0",
            Self::HEps => "h_eps",
        })
    }
}

/// A scalar slow/fast system. Implement this to integrate your own model.
pub trait MultiscaleSystem: Send + Sync {
    fn name(&self) -> &str;

    fn epsilon(&self) -> f64;

    /// Slow vector field `f(x, y)`.
    fn slow_field(&self, x: f64, y: f64) -> f64;

    /// Full right-hand side of the fast equation, including the `1/eps` factor.
    fn fast_field(&self, x: f64, y: f64) -> f64;

    fn manifold_h0(&self, x: f64) -> f64;

    fn manifold_h_eps(&self, x: f64) -> f64;

    /// Closed interval of admissible slow values.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Constant `K` with `|h_eps(x) - h0(x)| <= K eps` on the domain, if bounded.
    fn manifold_gap_constant(&self) -> Option<f64> {
        None
    }

    fn lipschitz(&self) -> Option<LipschitzData> {
        None
    }

    /// `(1, h_eps(1))`.
    fn default_initial_condition(&self) -> (f64, f64) {
        (1.0, self.manifold_h_eps(1.0))
    }

    fn manifold(&self, which: Manifold, x: f64) -> f64 {
        match which {
            Manifold::H0 => self.manifold_h0(x),
            Manifold::HEps => self.manifold_h_eps(x),
        }
    }
}

/// `f(x, h(x))` with `h` chosen by `manifold`.
pub fn reduced_field<S: MultiscaleSystem + ?Sized>(
    system: &S,
    x: f64,
    manifold: Manifold,
) -> Result<f64> {
    let (lo, hi) = system.domain();
    if !(x >= lo && x <= hi) {
        return Err(HmmError::Domain {
            system: system.name().to_string(),
            x,
            lo,
            hi,
        });
    }
    Ok(system.slow_field(x, system.manifold(manifold, x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinSystemKind {
    /// `x' = -y`, `y' = (x - y)/eps`; reduces to `X' = -(1+eps) X` on `h_eps`.
    LinearToy,
    /// `x' = -x + (x + 0.5) y`, `y' = (x - (x + 1) y)/eps`.
    MichaelisMenten,
}

impl BuiltinSystemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LinearToy => "linear_toy",
            Self::MichaelisMenten => "michaelis_menten",
        }
    }
}

impl fmt::Display for BuiltinSystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinSystemKind {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_toy" | "linear" => Ok(Self::LinearToy),
            "michaelis_menten" | "mm" => Ok(Self::MichaelisMenten),
            other => Err(HmmError::InvalidParameter {
                field: "system",
                reason: format!(
                    "unknown system `{other}` (expected linear_toy or michaelis_menten)"
                ),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinSystem {
    kind: BuiltinSystemKind,
    epsilon: f64,
}

pub fn builtin_system(kind: BuiltinSystemKind, epsilon: f64) -> Result<BuiltinSystem> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(HmmError::InvalidParameter {
            field: "epsilon",
            reason: format!("must be positive and finite, got {epsilon}"),
        });
    }
    Ok(BuiltinSystem { kind, epsilon })
}

impl BuiltinSystem {
    pub fn kind(&self) -> BuiltinSystemKind {
        self.kind
    }
}

impl MultiscaleSystem for BuiltinSystem {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn slow_field(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            BuiltinSystemKind::LinearToy => -y,
            BuiltinSystemKind::MichaelisMenten => -x + (x + 0.5) * y,
        }
    }

    fn fast_field(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            BuiltinSystemKind::LinearToy => (-y + x) / self.epsilon,
            BuiltinSystemKind::MichaelisMenten => (x - (x + 1.0) * y) / self.epsilon,
        }
    }

    fn manifold_h0(&self, x: f64) -> f64 {
        match self.kind {
            BuiltinSystemKind::LinearToy => x,
            BuiltinSystemKind::MichaelisMenten => x / (x + 1.0),
        }
    }

    fn manifold_h_eps(&self, x: f64) -> f64 {
        match self.kind {
            BuiltinSystemKind::LinearToy => (1.0 + self.epsilon) * x,
            BuiltinSystemKind::MichaelisMenten => {
                // truncated after the O(eps) term
                x / (x + 1.0) + self.epsilon * x / (2.0 * (x + 1.0).powi(4))
            }
        }
    }

    fn domain(&self) -> (f64, f64) {
        match self.kind {
            BuiltinSystemKind::LinearToy => (f64::NEG_INFINITY, f64::INFINITY),
            BuiltinSystemKind::MichaelisMenten => (0.0, 2.0),
        }
    }

    fn manifold_gap_constant(&self) -> Option<f64> {
        match self.kind {
            BuiltinSystemKind::LinearToy => None,
            // max of x / (2 (x+1)^4) on [0, 2], attained at x = 1/3
            BuiltinSystemKind::MichaelisMenten => Some(27.0 / 512.0),
        }
    }

    fn lipschitz(&self) -> Option<LipschitzData> {
        match self.kind {
            BuiltinSystemKind::LinearToy => None,
            // Over-estimates on x in [0, 2], y in [0, 1].
            BuiltinSystemKind::MichaelisMenten => Some(LipschitzData {
                l_f: 3.0,
                c_f: 3.0,
                l_h: 1.0,
            }),
        }
    }
}
