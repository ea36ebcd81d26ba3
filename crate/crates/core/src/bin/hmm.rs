use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hmm_core::convergence::{run_sweep, SweepSpec, Vary};
use hmm_core::experiment::{
    emit_config, parse_config, ConfigFile, Experiment, Preset, TableauChoice,
};
use hmm_core::harness::{
    check_experiment, diagnostics_csv, fmt_num, format_bound, run_experiment, suffixed_path,
    sweep_csv, trajectory_csv,
};
use hmm_core::{HmmError, LipschitzData, Method};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hmm",
    version,
    about = "Heterogeneous multiscale integrators for stiff dissipative ODEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write the trajectory CSV.
    Run(CommonArgs),
    /// Sweep the macro step or epsilon and fit the log-log error slope.
    Sweep(SweepArgs),
    /// Evaluate the practical relaxation assumption for a configuration.
    Check(CheckArgs),
    /// List the named experiment presets, or print one as a config file.
    Presets {
        /// Preset to print as a config file.
        name: Option<String>,
    },
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file with an [experiment] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// experiment1, experiment2 or experiment3.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// michaelis_menten or linear_toy.
    #[arg(long)]
    system: Option<String>,
    /// ba, hmm1 or hmm2.
    #[arg(long)]
    method: Option<String>,
    /// Scale separation epsilon.
    #[arg(long = "eps", allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Micro step as a fraction of epsilon.
    #[arg(long, allow_negative_numbers = true)]
    dt_ratio: Option<f64>,
    /// Micro steps per relaxation (the boosting algorithm: macro steps per Dt).
    #[arg(long = "M", allow_negative_numbers = true)]
    m: Option<i64>,
    /// HMM macro step.
    #[arg(long = "Dt", allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Macro tableau: euler, rk2 or rk4.
    #[arg(long = "macro")]
    macro_tableau: Option<String>,
    /// Micro tableau: euler, rk2 or rk4.
    #[arg(long = "micro")]
    micro_tableau: Option<String>,
    /// Step of the RK4 reference solve of the reduced system.
    #[arg(long)]
    reference_step: Option<f64>,
    /// Also write per-stage manifold distances to <out>_diagnostics.csv.
    #[arg(long)]
    diagnostics: bool,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Swept parameter: macro_step or epsilon.
    #[arg(long)]
    vary: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Lipschitz constant of f; with --c-f and --l-h overrides the shipped data.
    #[arg(long)]
    l_f: Option<f64>,
    /// Bound on |f|.
    #[arg(long)]
    c_f: Option<f64>,
    /// Lipschitz constant of h0.
    #[arg(long)]
    l_h: Option<f64>,
    /// Initial manifold distance; defaults to that of the default initial condition.
    #[arg(long)]
    d0: Option<f64>,
}

enum Failure {
    Hmm(HmmError),
    Io(String),
}

impl From<HmmError> for Failure {
    fn from(e: HmmError) -> Self {
        Self::Hmm(e)
    }
}

fn load(common: &CommonArgs) -> Result<(ConfigFile, Option<Preset>), Failure> {
    let (mut cfg, preset) = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
            (parse_config(&text)?, None)
        }
        (None, Some(name)) => {
            let p: Preset = name.parse()?;
            (p.config(), Some(p))
        }
        (None, None) => {
            let mut c = Preset::Experiment1.config();
            c.sweep = None;
            (c, None)
        }
    };
    apply_overrides(&mut cfg.experiment, common)?;
    cfg.experiment.validate()?;
    Ok((cfg, preset))
}

fn apply_overrides(e: &mut Experiment, a: &CommonArgs) -> Result<(), HmmError> {
    if let Some(s) = &a.system {
        e.system = s.parse()?;
    }
    if let Some(m) = &a.method {
        e.method = m.parse()?;
    }
    if let Some(v) = a.epsilon {
        e.epsilon = v;
    }
    if let Some(v) = a.dt_ratio {
        e.dt_ratio = v;
    }
    if let Some(v) = a.m {
        if v < 1 {
            return Err(HmmError::InvalidParameter {
                field: "M",
                reason: format!("must be at least 1, got {v}"),
            });
        }
        e.m = v as usize;
    }
    if let Some(v) = a.dt {
        e.dt = v;
    }
    if let Some(v) = a.t_end {
        e.t_end = v;
    }
    if let Some(t) = &a.macro_tableau {
        e.macro_tableau = TableauChoice::Builtin(t.parse()?);
    }
    if let Some(t) = &a.micro_tableau {
        e.micro_tableau = TableauChoice::Builtin(t.parse()?);
    }
    if let Some(v) = a.reference_step {
        e.reference_step = Some(v);
    }
    if a.diagnostics {
        e.diagnostics = true;
    }
    if let Some(p) = &a.out {
        e.output = Some(p.display().to_string());
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(args: &CommonArgs) -> Result<ExitCode, Failure> {
    let (cfg, _) = load(args)?;
    let exp = &cfg.experiment;
    let report = run_experiment(exp)?;
    let out = PathBuf::from(
        exp.output
            .clone()
            .unwrap_or_else(|| "trajectory.csv".into()),
    );
    write(&out, &trajectory_csv(&report.trajectory))?;
    println!("wrote {} ({} rows)", out.display(), report.trajectory.len());
    if let Some(diag) = diagnostics_csv(&report.trajectory) {
        let p = suffixed_path(&out, "diagnostics");
        write(&p, &diag)?;
        println!("wrote {}", p.display());
    }
    println!(
        "method={} system={} final t={} x={} reference X={} (step {})",
        exp.method,
        exp.system,
        fmt_num(report.trajectory.final_time()),
        fmt_num(report.trajectory.final_slow()),
        fmt_num(report.reference_final),
        fmt_num(report.reference_step)
    );
    println!("final error |x - X| = {}", fmt_num(report.final_error));
    println!(
        "field evaluations: slow={} fast={}",
        report.trajectory.slow_evals, report.trajectory.fast_evals
    );
    println!("{}", format_bound(&report.bound));
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, Failure> {
    let (cfg, preset) = load(&args.common)?;
    let section = cfg.sweep.clone();
    let vary = match (&args.vary, &section) {
        (Some(v), _) => v.parse()?,
        (None, Some(s)) => s.vary,
        (None, None) => Vary::MacroStep,
    };
    let values = match (&args.values, &section) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) => s.values.clone(),
        (None, None) => {
            return Err(HmmError::InvalidParameter {
                field: "values",
                reason: "no sweep values given (use --values, a [sweep] section or --preset)"
                    .into(),
            }
            .into())
        }
    };
    let methods: Vec<Method> = match (&args.common.method, &section) {
        (Some(_), _) => vec![cfg.experiment.method],
        (None, Some(s)) if !s.methods.is_empty() => s.methods.clone(),
        _ => vec![cfg.experiment.method],
    };
    let default_name = preset.map_or("sweep".to_string(), |p| p.name().to_string());
    let out = PathBuf::from(
        cfg.experiment
            .output
            .clone()
            .unwrap_or_else(|| format!("{default_name}.csv")),
    );

    let mut results = Vec::new();
    for &method in &methods {
        let mut base = cfg.experiment.clone();
        base.method = method;
        let spec = SweepSpec {
            base,
            vary,
            values: values.clone(),
        };
        results.push((method, run_sweep(&spec)?));
    }
    for (method, outcome) in &results {
        let path = if methods.len() > 1 {
            suffixed_path(&out, method.name())
        } else {
            out.clone()
        };
        write(&path, &sweep_csv(outcome))?;
        println!(
            "{method}: slope={} intercept={} r2={} -> {}",
            fmt_num(outcome.fit.slope),
            fmt_num(outcome.fit.intercept),
            fmt_num(outcome.fit.r_squared),
            path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: &CheckArgs) -> Result<ExitCode, Failure> {
    let (cfg, _) = load(&args.common)?;
    let lipschitz = match (args.l_f, args.c_f, args.l_h) {
        (None, None, None) => cfg.lipschitz,
        (l_f, c_f, l_h) => {
            let base = cfg.lipschitz;
            let pick = |v: Option<f64>, f: fn(&LipschitzData) -> f64| v.or(base.as_ref().map(f));
            match (
                pick(l_f, LipschitzData::l_f),
                pick(c_f, LipschitzData::c_f),
                pick(l_h, LipschitzData::l_h),
            ) {
                (Some(a), Some(b), Some(c)) => Some(LipschitzData::new(a, b, c)?),
                _ => {
                    return Err(HmmError::InvalidParameter {
                        field: "lipschitz",
                        reason: "--l-f, --c-f and --l-h must be given together".into(),
                    }
                    .into())
                }
            }
        }
    };
    let r = check_experiment(&cfg.experiment, lipschitz, args.d0)?;
    let verdict = if r.pass { "pass" } else { "fail" };
    println!("assumption: {:?}", r.kind);
    println!("lhs = {}", fmt_num(r.lhs));
    println!("rhs = {}", fmt_num(r.rhs));
    println!("{verdict} (lhs {} rhs)", if r.pass { "<" } else { ">=" });
    Ok(if r.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_presets(name: Option<&str>) -> Result<ExitCode, Failure> {
    match name {
        Some(n) => {
            let p: Preset = n.parse()?;
            print!("{}", emit_config(&p.config()));
        }
        None => {
            for p in Preset::ALL {
                let e = p.experiment();
                println!(
                    "{p}: system={} eps={} dt_ratio={} M={} Dt={} T={} macro={} micro={} vary={} values={:?}",
                    e.system,
                    fmt_num(e.epsilon),
                    fmt_num(e.dt_ratio),
                    e.m,
                    fmt_num(e.dt),
                    fmt_num(e.t_end),
                    e.macro_tableau,
                    e.micro_tableau,
                    p.vary(),
                    p.values()
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Hmm(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERIC
            })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
