#![allow(dead_code, clippy::needless_range_loop)]

use hmm_core::{
    builtin_system, hmm_step, micro_flow, rho_factor, BuiltinSystemKind, BuiltinTableau,
    ChainTableau, HmmSchedule, MicroConfig, MicroSolver, MultiscaleSystem, PresetLabel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x' = f(x, y)`, `eps y' = -y + h0(x)`.
pub struct BaseForm {
    pub eps: f64,
    pub f: fn(f64, f64) -> f64,
    pub h0: fn(f64) -> f64,
}

impl MultiscaleSystem for BaseForm {
    fn name(&self) -> &str {
        "base_form"
    }
    fn epsilon(&self) -> f64 {
        self.eps
    }
    fn slow_field(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
    fn fast_field(&self, x: f64, y: f64) -> f64 {
        (-y + (self.h0)(x)) / self.eps
    }
    fn manifold_h0(&self, x: f64) -> f64 {
        (self.h0)(x)
    }
    fn manifold_h_eps(&self, x: f64) -> f64 {
        (self.h0)(x)
    }
}

/// Slow field independent of `y`; the fast field is arbitrary (and nonlinear).
pub struct SlowOnly {
    pub eps: f64,
    pub g: fn(f64) -> f64,
}

impl MultiscaleSystem for SlowOnly {
    fn name(&self) -> &str {
        "slow_only"
    }
    fn epsilon(&self) -> f64 {
        self.eps
    }
    fn slow_field(&self, x: f64, _y: f64) -> f64 {
        (self.g)(x)
    }
    fn fast_field(&self, x: f64, y: f64) -> f64 {
        (x.sin() - y - 0.1 * y * y * y) / self.eps
    }
    fn manifold_h0(&self, x: f64) -> f64 {
        x.sin()
    }
    fn manifold_h_eps(&self, x: f64) -> f64 {
        x.sin()
    }
}

/// `|a - b|` in units of `f64::EPSILON * scale`.
pub fn ulps_at(a: f64, b: f64, scale: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / (f64::EPSILON * scale)
}

/// `|a - b|` in units of the spacing at the larger magnitude.
pub fn ulps(a: f64, b: f64) -> f64 {
    ulps_at(a, b, a.abs().max(b.abs()))
}

/// Plain tableau description so the oracle does not touch the library types.
pub struct Tab {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// One chain Runge-Kutta step, written out by hand.
fn chain_rk(tab: &Tab, u: f64, h: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let s = tab.a.len();
    let mut k = vec![0.0; s];
    k[0] = h * f(u);
    for j in 1..s {
        k[j] = h * f(u + tab.a[j] * k[j - 1]);
    }
    let mut sum = 0.0;
    for j in 0..s {
        sum += tab.b[j] * k[j];
    }
    u + sum
}

/// Straight transcription of one macro step of the multiscale scheme.
///
/// Every micro iterate `y[j][m]` is stored; stage `j > 1` restarts from the
/// last stage-1 iterate and the new fast value is that same iterate.
#[allow(clippy::too_many_arguments)]
pub fn oracle_step(
    sys: &dyn MultiscaleSystem,
    macro_tab: &Tab,
    micro_tab: &Tab,
    micro_dt: f64,
    m_steps: &[usize],
    dt: f64,
    xn: f64,
    yn: f64,
) -> (f64, f64) {
    let s = macro_tab.a.len();
    let mut k: Vec<f64> = Vec::new();
    let mut y: Vec<Vec<f64>> = Vec::new();
    for j in 0..s {
        let xj = if j == 0 {
            xn
        } else {
            xn + macro_tab.a[j] * k[j - 1]
        };
        let y0 = if j == 0 { yn } else { y[0][m_steps[0]] };
        let mut yj = vec![y0];
        for m in 0..m_steps[j] {
            let next = chain_rk(micro_tab, yj[m], micro_dt, &|v| sys.fast_field(xj, v));
            yj.push(next);
        }
        k.push(dt * sys.slow_field(xj, yj[m_steps[j]]));
        y.push(yj);
    }
    let mut x_next = xn;
    let mut sum = 0.0;
    for j in 0..s {
        sum += macro_tab.b[j] * k[j];
    }
    x_next += sum;
    (x_next, y[0][m_steps[0]])
}

pub fn euler() -> Tab {
    Tab {
        a: vec![0.0],
        b: vec![1.0],
    }
}

pub fn heun() -> Tab {
    Tab {
        a: vec![0.0, 1.0],
        b: vec![0.5, 0.5],
    }
}

pub fn rk4_chain() -> Tab {
    Tab {
        a: vec![0.0, 0.5, 0.5, 1.0],
        b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    }
}

/// A random valid chain tableau and its hand-written twin.
fn random_tableau(rng: &mut ChaCha8Rng, max_stages: usize) -> (ChainTableau, Tab) {
    let s = rng.random_range(1..=max_stages);
    let mut a = vec![0.0];
    for _ in 1..s {
        a.push(rng.random_range(0.0..=1.0));
    }
    let b = if s == 1 {
        vec![1.0]
    } else {
        let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut b: Vec<f64> = raw[..s - 1].iter().map(|w| w / total).collect();
        let head: f64 = b.iter().sum();
        b.push(1.0 - head);
        b
    };
    let tab = ChainTableau::new(s as u32, a.clone(), b.clone()).expect("valid random tableau");
    (tab, Tab { a, b })
}

fn random_system(rng: &mut ChaCha8Rng) -> Box<dyn MultiscaleSystem> {
    let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
    match rng.random_range(0..4) {
        0 => Box::new(builtin_system(BuiltinSystemKind::MichaelisMenten, eps).unwrap()),
        1 => Box::new(builtin_system(BuiltinSystemKind::LinearToy, eps).unwrap()),
        2 => Box::new(BaseForm {
            eps,
            f: |x, y| -x * y + 0.3 * y.sin(),
            h0: |x| 1.0 / (1.0 + x * x),
        }),
        _ => Box::new(BaseForm {
            eps,
            f: |x, y| (x - y).cos() - x,
            h0: |x| 0.5 * x.exp(),
        }),
    }
}

/// Worst ulp deviation between `hmm_step` and [`oracle_step`] over `n`
/// random (system, schedule, state) instances.
pub fn oracle_deviation(seed: u64, n: usize) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..n {
        let sys = random_system(&mut rng);
        let (macro_tab, macro_twin) = random_tableau(&mut rng, 4);
        let (micro_tab, micro_twin) = random_tableau(&mut rng, 4);
        let s = macro_tab.stages();
        let micro_dt = rng.random_range(0.05..0.6) * sys.epsilon();
        let label = match rng.random_range(0..3) {
            0 => PresetLabel::Hmm1,
            1 => PresetLabel::Hmm2,
            _ => PresetLabel::Custom,
        };
        let m = rng.random_range(1..=40);
        let steps: Vec<usize> = match label {
            PresetLabel::Hmm1 => vec![m; s],
            PresetLabel::Hmm2 => std::iter::once(m)
                .chain(std::iter::repeat_n(0, s - 1))
                .collect(),
            _ => std::iter::once(m)
                .chain((1..s).map(|_| rng.random_range(0..=40)))
                .collect(),
        };
        let dt = rng.random_range(0.001..0.5);
        let micro = MicroSolver::new(micro_tab, micro_dt).map_err(|e| e.to_string())?;
        let schedule = HmmSchedule::new(macro_tab, micro, steps.clone(), dt, 1, label)
            .map_err(|e| e.to_string())?;
        let xn = rng.random_range(0.1..1.9);
        let yn = sys.manifold_h0(xn) + rng.random_range(-0.5..0.5);

        let out = hmm_step(sys.as_ref(), &schedule, xn, yn, false)
            .map_err(|e| format!("case {case}: {e}"))?;
        let (xo, yo) = oracle_step(
            sys.as_ref(),
            &macro_twin,
            &micro_twin,
            micro_dt,
            &steps,
            dt,
            xn,
            yn,
        );
        worst = worst.max(ulps(out.x, xo)).max(ulps(out.y, yo));
    }
    Ok(worst)
}

/// Over `m <= 50` and a few starting points: the worst deviation of
/// `y_m - h0` from `rho^m (y_0 - h0)` in ulps of the fast variable's
/// magnitude `max(|y_0 - h0|, |h0|)`, and the worst single-step deviation
/// from `d_{m+1} = rho d_m`.
pub fn contraction_deviation(
    sys: &dyn MultiscaleSystem,
    p: u32,
    tab: BuiltinTableau,
    ratio: f64,
) -> (f64, f64) {
    let eps = sys.epsilon();
    let rho = rho_factor(p, -ratio);
    let mut cumulative: f64 = 0.0;
    let mut stepwise: f64 = 0.0;
    for &(x, y0) in &[(0.7, 1.9), (-1.3, -0.2), (2.0, 2.0 + 1e-3)] {
        let h = sys.manifold_h0(x);
        let d0 = y0 - h;
        let scale = d0.abs().max(h.abs());
        let mut prev = y0;
        for m in 0..=50 {
            let cfg = MicroConfig::new(tab.tableau(), ratio * eps, m).unwrap();
            let ym = micro_flow(sys, &cfg, x, y0).unwrap();
            cumulative = cumulative.max(ulps_at(ym - h, rho.powi(m as i32) * d0, scale));
            if m > 0 {
                let s = (prev - h).abs().max(h.abs());
                stepwise = stepwise.max(ulps_at(ym - h, rho * (prev - h), s));
            }
            prev = ym;
        }
    }
    (cumulative, stepwise)
}

/// Base-form systems used for the contraction checks.
pub fn contraction_systems() -> Vec<Box<dyn MultiscaleSystem>> {
    vec![
        Box::new(BaseForm {
            eps: 1e-3,
            f: |x, y| -x * y,
            h0: |_| 0.0,
        }),
        Box::new(BaseForm {
            eps: 1e-5,
            f: |x, y| -x * y,
            h0: |x| 0.3 + x * x,
        }),
        Box::new(BaseForm {
            eps: 0.04,
            f: |x, _| -x,
            h0: |x| -2.0 * x.cos(),
        }),
        Box::new(builtin_system(BuiltinSystemKind::LinearToy, 1e-4).unwrap()),
    ]
}

pub const CONTRACTION_TABLEAUS: [(u32, BuiltinTableau); 3] = [
    (1, BuiltinTableau::Euler),
    (2, BuiltinTableau::Rk2Heun),
    (4, BuiltinTableau::Rk4Classic),
];
pub const CONTRACTION_RATIOS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
