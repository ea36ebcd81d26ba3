//! Experiment configuration, named presets and the config file format.
//!
//! A config file is TOML with one required `[experiment]` table and optional
//! `[sweep]` and `[lipschitz]` tables:
//!
//! ```toml
//! [experiment]
//! system = "michaelis_menten"
//! method = "hmm1"
//! macro = "rk2"                 # or { order = 2, nodes = [0.0, 1.0], weights = [0.5, 0.5] }
//! micro = "euler"
//! epsilon = 1e-5
//! dt_ratio = 0.2
//! M = 30
//! Dt = 0.1
//! T = 5.0
//! diagnostics = false
//!
//! [sweep]
//! vary = "macro_step"
//! values = [0.5, 0.25, 0.1, 0.05, 0.025, 0.01]
//! methods = ["hmm1", "hmm2", "ba"]
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::convergence::{SweepSpec, Vary};
use crate::error::{HmmError, Result};
use crate::integrator::{make_preset, HmmSchedule, Method};
use crate::reference::default_reference_step;
use crate::system::{BuiltinSystemKind, LipschitzData, Manifold};
use crate::tableau::{BuiltinTableau, ChainTableau};

#[derive(Debug, Clone, PartialEq)]
pub enum TableauChoice {
    Builtin(BuiltinTableau),
    Custom(ChainTableau),
}

impl TableauChoice {
    pub fn tableau(&self) -> ChainTableau {
        match self {
            Self::Builtin(b) => b.tableau(),
            Self::Custom(t) => t.clone(),
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            Self::Builtin(b) => b.tableau().order(),
            Self::Custom(t) => t.order(),
        }
    }
}

impl From<BuiltinTableau> for TableauChoice {
    fn from(b: BuiltinTableau) -> Self {
        Self::Builtin(b)
    }
}

impl fmt::Display for TableauChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Builtin(b) => write!(f, "{b}"),
            Self::Custom(t) => write!(f, "custom(order {}, {} stages)", t.order(), t.stages()),
        }
    }
}

/// Everything needed to build, run and score one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub system: BuiltinSystemKind,
    pub method: Method,
    pub macro_tableau: TableauChoice,
    pub micro_tableau: TableauChoice,
    pub epsilon: f64,
    /// Micro step as a fraction of epsilon.
    pub dt_ratio: f64,
    pub m: usize,
    /// HMM macro step; the boosting algorithm uses `dt / m`.
    pub dt: f64,
    pub t_end: f64,
    /// Defaults to [`default_reference_step`] when unset.
    pub reference_step: Option<f64>,
    pub reference_manifold: Manifold,
    pub diagnostics: bool,
    pub output: Option<String>,
}

impl Default for Experiment {
    fn default() -> Self {
        Preset::Experiment1.experiment()
    }
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("epsilon", self.epsilon),
            ("dt_ratio", self.dt_ratio),
            ("Dt", self.dt),
            ("T", self.t_end),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HmmError::InvalidParameter {
                    field,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if let Some(s) = self.reference_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(HmmError::InvalidParameter {
                    field: "reference_step",
                    reason: format!("must be positive, got {s}"),
                });
            }
        }
        self.schedule().map(|_| ())
    }

    pub fn schedule(&self) -> Result<HmmSchedule> {
        make_preset(
            self.method,
            self.macro_tableau.tableau(),
            self.micro_tableau.tableau(),
            self.epsilon,
            self.dt_ratio,
            self.m,
            self.dt,
            self.t_end,
        )
    }

    pub fn reference_step_or_default(&self) -> f64 {
        self.reference_step.unwrap_or_else(|| {
            let macro_step = match self.method {
                Method::Ba => self.dt / self.m.max(1) as f64,
                _ => self.dt,
            };
            default_reference_step(self.t_end, macro_step)
        })
    }
}

/// Named parameter sets for the three Michaelis-Menten convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Macro-step sweep with well-resolved relaxation (`M = 30`).
    Experiment1,
    /// Macro-step sweep with under-resolved relaxation (`M = 10`).
    Experiment2,
    /// Epsilon sweep at `Dt = 0.1`.
    Experiment3,
}

pub const MACRO_STEP_GRID: [f64; 6] = [0.5, 0.25, 0.1, 0.05, 0.025, 0.01];
pub const EPSILON_GRID: [f64; 5] = [0.01, 0.02, 0.04, 0.06, 0.1];

impl Preset {
    pub const ALL: [Preset; 3] = [Self::Experiment1, Self::Experiment2, Self::Experiment3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Experiment1 => "experiment1",
            Self::Experiment2 => "experiment2",
            Self::Experiment3 => "experiment3",
        }
    }

    pub fn experiment(self) -> Experiment {
        let m = match self {
            Self::Experiment2 => 10,
            _ => 30,
        };
        Experiment {
            system: BuiltinSystemKind::MichaelisMenten,
            method: Method::Hmm1,
            macro_tableau: BuiltinTableau::Rk2Heun.into(),
            micro_tableau: BuiltinTableau::Euler.into(),
            epsilon: 1e-5,
            dt_ratio: 0.2,
            m,
            dt: 0.1,
            t_end: 5.0,
            reference_step: None,
            reference_manifold: Manifold::HEps,
            diagnostics: false,
            output: None,
        }
    }

    pub fn vary(self) -> Vary {
        match self {
            Self::Experiment3 => Vary::Epsilon,
            _ => Vary::MacroStep,
        }
    }

    pub fn values(self) -> Vec<f64> {
        match self {
            Self::Experiment3 => EPSILON_GRID.to_vec(),
            _ => MACRO_STEP_GRID.to_vec(),
        }
    }

    pub fn sweep(self, method: Method) -> SweepSpec {
        let mut base = self.experiment();
        base.method = method;
        SweepSpec {
            base,
            vary: self.vary(),
            values: self.values(),
        }
    }

    /// Slopes reported for the published figures, per method.
    pub fn published_slopes(self) -> &'static [(Method, f64)] {
        match self {
            Self::Experiment1 => &[
                (Method::Hmm1, 2.07),
                (Method::Hmm2, 1.06),
                (Method::Ba, 1.00),
            ],
            Self::Experiment2 => &[
                (Method::Hmm1, 1.13),
                (Method::Hmm2, 1.05),
                (Method::Ba, 0.98),
            ],
            Self::Experiment3 => &[(Method::Hmm1, 1.02), (Method::Ba, 1.05)],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experiment1" => Ok(Self::Experiment1),
            "experiment2" => Ok(Self::Experiment2),
            "experiment3" => Ok(Self::Experiment3),
            other => Err(HmmError::InvalidParameter {
                field: "preset",
                reason: format!("unknown preset `{other}`"),
            }),
        }
    }
}

/// Parsed contents of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: Experiment,
    pub sweep: Option<SweepSection>,
    pub lipschitz: Option<LipschitzData>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub vary: Vary,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawTableau {
    Name(String),
    Custom {
        order: u32,
        nodes: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    system: String,
    method: String,
    #[serde(rename = "macro")]
    macro_tableau: RawTableau,
    #[serde(rename = "micro")]
    micro_tableau: RawTableau,
    epsilon: f64,
    dt_ratio: f64,
    #[serde(rename = "M")]
    m: i64,
    #[serde(rename = "Dt")]
    dt: f64,
    #[serde(rename = "T")]
    t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_step: Option<f64>,
    #[serde(default = "default_manifold")]
    reference_manifold: String,
    #[serde(default)]
    diagnostics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<String>,
}

fn default_manifold() -> String {
    Manifold::HEps.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    vary: String,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLipschitz {
    l_f: f64,
    c_f: f64,
    l_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    experiment: RawExperiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lipschitz: Option<RawLipschitz>,
}

fn tableau_from_raw(raw: RawTableau) -> Result<TableauChoice> {
    match raw {
        RawTableau::Name(n) => Ok(TableauChoice::Builtin(n.parse()?)),
        RawTableau::Custom {
            order,
            nodes,
            weights,
        } => Ok(TableauChoice::Custom(ChainTableau::new(
            order, nodes, weights,
        )?)),
    }
}

fn tableau_to_raw(t: &TableauChoice) -> RawTableau {
    match t {
        TableauChoice::Builtin(b) => RawTableau::Name(b.short_name().to_string()),
        TableauChoice::Custom(t) => RawTableau::Custom {
            order: t.order(),
            nodes: t.nodes().to_vec(),
            weights: t.weights().to_vec(),
        },
    }
}

/// Parses a config file and validates the experiment.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| HmmError::InvalidParameter {
        field: "config",
        reason: e.to_string(),
    })?;
    let r = raw.experiment;
    if r.m < 0 {
        return Err(HmmError::InvalidParameter {
            field: "M",
            reason: format!("must be positive, got {}", r.m),
        });
    }
    let experiment = Experiment {
        system: r.system.parse()?,
        method: r.method.parse()?,
        macro_tableau: tableau_from_raw(r.macro_tableau)?,
        micro_tableau: tableau_from_raw(r.micro_tableau)?,
        epsilon: r.epsilon,
        dt_ratio: r.dt_ratio,
        m: r.m as usize,
        dt: r.dt,
        t_end: r.t_end,
        reference_step: r.reference_step,
        reference_manifold: r.reference_manifold.parse()?,
        diagnostics: r.diagnostics,
        output: r.output,
    };
    experiment.validate()?;
    let sweep = raw
        .sweep
        .map(|s| -> Result<SweepSection> {
            Ok(SweepSection {
                vary: s.vary.parse()?,
                values: s.values,
                methods: s.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?,
            })
        })
        .transpose()?;
    let lipschitz = raw
        .lipschitz
        .map(|l| LipschitzData::new(l.l_f, l.c_f, l.l_h))
        .transpose()?;
    Ok(ConfigFile {
        experiment,
        sweep,
        lipschitz,
    })
}

/// Serializes a config; `parse_config(&emit_config(c)) == c` for valid configs.
pub fn emit_config(config: &ConfigFile) -> String {
    let e = &config.experiment;
    let raw = RawFile {
        experiment: RawExperiment {
            system: e.system.name().to_string(),
            method: e.method.name().to_string(),
            macro_tableau: tableau_to_raw(&e.macro_tableau),
            micro_tableau: tableau_to_raw(&e.micro_tableau),
            epsilon: e.epsilon,
            dt_ratio: e.dt_ratio,
            m: e.m as i64,
            dt: e.dt,
            t_end: e.t_end,
            reference_step: e.reference_step,
            reference_manifold: e.reference_manifold.to_string(),
            diagnostics: e.diagnostics,
            output: e.output.clone(),
        },
        sweep: config.sweep.as_ref().map(|s| RawSweep {
            vary: s.vary.name().to_string(),
            values: s.values.clone(),
            methods: s.methods.iter().map(|m| m.name().to_string()).collect(),
        }),
        lipschitz: config.lipschitz.map(|l| RawLipschitz {
            l_f: l.l_f(),
            c_f: l.c_f(),
            l_h: l.l_h(),
        }),
    };
    toml::to_string(&raw).expect("config structs always serialize")
}

impl Preset {
    /// Full config file for this preset, including its sweep.
    pub fn config(self) -> ConfigFile {
        ConfigFile {
            experiment: self.experiment(),
            sweep: Some(SweepSection {
                vary: self.vary(),
                values: self.values(),
                methods: Method::ALL.to_vec(),
            }),
            lipschitz: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand_to_published_parameters() {
        let e1 = Preset::Experiment1.experiment();
        assert_eq!(e1.system, BuiltinSystemKind::MichaelisMenten);
        assert_eq!(
            (e1.epsilon, e1.dt_ratio, e1.m, e1.t_end),
            (1e-5, 0.2, 30, 5.0)
        );
        assert_eq!(
            e1.macro_tableau,
            TableauChoice::Builtin(BuiltinTableau::Rk2Heun)
        );
        assert_eq!(
            e1.micro_tableau,
            TableauChoice::Builtin(BuiltinTableau::Euler)
        );

        let e2 = Preset::Experiment2.experiment();
        assert_eq!(e2.m, 10);
        assert_eq!(Preset::Experiment2.values(), MACRO_STEP_GRID.to_vec());

        let e3 = Preset::Experiment3.sweep(Method::Ba);
        assert_eq!(e3.vary, Vary::Epsilon);
        assert_eq!((e3.base.dt, e3.base.m), (0.1, 30));
        assert_eq!(e3.base.schedule().unwrap().n_steps(), 1500);
        assert_eq!(
            Preset::Experiment3
                .experiment()
                .schedule()
                .unwrap()
                .n_steps(),
            50
        );
    }

    #[test]
    fn macro_grid_divides_final_time() {
        for &dt in &MACRO_STEP_GRID {
            let mut e = Preset::Experiment1.experiment();
            e.dt = dt;
            for m in Method::ALL {
                e.method = m;
                assert!(e.validate().is_ok(), "{m} at {dt}");
            }
        }
    }

    #[test]
    fn config_round_trip_for_presets() {
        for p in Preset::ALL {
            let c = p.config();
            let text = emit_config(&c);
            assert_eq!(parse_config(&text).unwrap(), c, "{text}");
        }
    }

    #[test]
    fn custom_tableau_and_lipschitz_sections() {
        let text = r#"
[experiment]
system = "linear_toy"
method = "hmm2"
macro = { order = 2, nodes = [0.0, 0.5], weights = [0.25, 0.75] }
micro = "rk4"
epsilon = 0.01
dt_ratio = 0.5
M = 4
Dt = 0.25
T = 1.0
reference_step = 0.001
reference_manifold = "h0"
diagnostics = true
output = "out.csv"

[lipschitz]
l_f = 1.0
c_f = 2.0
l_h = 1.0
"#;
        let c = parse_config(text).unwrap();
        assert!(
            matches!(c.experiment.macro_tableau, TableauChoice::Custom(ref t) if t.nodes() == [0.0, 0.5])
        );
        assert_eq!(c.experiment.reference_manifold, Manifold::H0);
        assert_eq!(c.lipschitz.unwrap().c_f(), 2.0);
        assert!(c.experiment.diagnostics);
        assert_eq!(parse_config(&emit_config(&c)).unwrap(), c);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let base = emit_config(&Preset::Experiment1.config());
        let bad_dt = base.replace("Dt = 0.1", "Dt = 0.3");
        assert!(matches!(
            parse_config(&bad_dt),
            Err(HmmError::NonIntegralSteps { .. })
        ));
        let bad_eps = base.replace("epsilon = 0.00001", "epsilon = -1.0");
        assert_ne!(bad_eps, base);
        assert!(matches!(
            parse_config(&bad_eps),
            Err(HmmError::InvalidParameter {
                field: "epsilon",
                ..
            })
        ));
        let bad_tab = base.replace(
            "micro = \"euler\"",
            "micro = { order = 1, nodes = [0.5], weights = [1.0] }",
        );
        assert!(matches!(
            parse_config(&bad_tab),
            Err(HmmError::InvalidTableau(_))
        ));
        assert!(parse_config("[experiment]\nsystem = 3").is_err());
    }

    #[test]
    fn default_reference_step_respects_boosting_step() {
        let mut e = Preset::Experiment1.experiment();
        e.method = Method::Ba;
        e.dt = 0.01;
        assert!(e.reference_step_or_default() <= 0.01 / 30.0 / 100.0);
        e.reference_step = Some(1e-3);
        assert_eq!(e.reference_step_or_default(), 1e-3);
    }
}
