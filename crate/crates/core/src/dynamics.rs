//! Canonical equations in the t and s parametrizations, their numerical
//! integration, and drift monitoring of quantities along a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{ConventionalState, ExtendedState, ParameterKind, Tangent, Trajectory};
use crate::systems::{ConventionalHamiltonian, ExtendedHamiltonian};

/// Constraint values above this trigger an off-shell warning.
pub const OFF_SHELL_WARN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    #[serde(rename = "rk4", alias = "rk4_fixed")]
    Rk4Fixed,
    /// Dormand–Prince 5(4) with step-size control.
    #[serde(rename = "rk45", alias = "rk45_adaptive")]
    Rk45Adaptive,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" | "rk4_fixed" => Ok(Method::Rk4Fixed),
            "rk45" | "rk45_adaptive" => Ok(Method::Rk45Adaptive),
            _ => Err(Error::config(format!("unknown method `{s}` (rk4 | rk45)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub method: Method,
    /// Fixed step, or the initial step for the adaptive method.
    pub step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4Fixed,
            step: 1e-3,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 10_000_000,
        }
    }
}

impl StepperConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn rk45(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive,
            step: 1e-3,
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// RK4 over `span` in `steps` equal steps.
    pub fn rk4_steps(span: f64, steps: usize) -> Self {
        Self::rk4(span.abs() / steps.max(1) as f64)
    }

    /// Absolute tolerance multiplied by an energy scale such as mc².
    pub fn scaled(mut self, energy_scale: f64) -> Self {
        self.abs_tol *= energy_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.step) {
            return Err(Error::config(format!("step must be > 0, got {}", self.step)));
        }
        if !pos(self.abs_tol) || !pos(self.rel_tol) {
            return Err(Error::config(format!(
                "tolerances must be > 0, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be > 0"));
        }
        Ok(())
    }
}

/// Right-hand side of the conventional canonical equations:
/// dq/dt = ∂H/∂p, dp/dt = −∂H/∂q, de/dt = ∂H/∂t, with dt/dt = 1.
pub fn conventional_rhs(h: &dyn ConventionalHamiltonian, state: &ConventionalState) -> Result<Tangent> {
    let g = h.gradient(&state.q, &state.p, state.t)?;
    Ok(Tangent {
        dq: g.dp,
        dp: g.dq.into_iter().map(|d| -d).collect(),
        dt: 1.0,
        de: g.dt,
    })
}

/// Right-hand side of the extended canonical equations:
/// dq/ds = ∂He/∂p, dp/ds = −∂He/∂q, dt/ds = −∂He/∂e, de/ds = ∂He/∂t.
pub fn extended_rhs(he: &dyn ExtendedHamiltonian, xstate: &ExtendedState) -> Result<Tangent> {
    Ok(Tangent::hamiltonian_field(&he.gradient(xstate)?))
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Integrate `dy/dλ = field(λ, y)` from `start` over `span`, calling `record`
/// with (λ, y) at the initial point and after every accepted step.
fn integrate_raw<F, R>(
    field: F,
    y0: Vec<f64>,
    start: f64,
    span: f64,
    cfg: &StepperConfig,
    mut record: R,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    R: FnMut(f64, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::config(format!("span must be > 0, got {span}")));
    }
    record(start, &y0)?;
    match cfg.method {
        Method::Rk4Fixed => rk4(&field, y0, start, span, cfg, &mut record),
        Method::Rk45Adaptive => dopri5(&field, y0, start, span, cfg, &mut record),
    }
}

fn ensure_finite(y: &[f64], param: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("state at parameter {param}")))
    }
}

fn rk4<F, R>(
    field: &F,
    mut y: Vec<f64>,
    start: f64,
    span: f64,
    cfg: &StepperConfig,
    record: &mut R,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    R: FnMut(f64, &[f64]) -> Result<()>,
{
    // round to the nearest whole step count so that span/step = n is not bumped by rounding
    let ratio = span / cfg.step;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio {
        ratio.round()
    } else {
        ratio.ceil()
    }
    .max(1.0) as usize;
    if n > cfg.max_steps {
        return Err(Error::MaxSteps(cfg.max_steps));
    }
    let h = span / n as f64;
    // Kahan compensation of the state update; keeps accumulated rounding
    // below the truncation error for long fixed-step runs
    let mut comp = vec![0.0; y.len()];
    for k in 0..n {
        let lam = start + k as f64 * h;
        let k1 = field(lam, &y)?;
        let k2 = field(lam + 0.5 * h, &axpy(&y, 0.5 * h, &k1))?;
        let k3 = field(lam + 0.5 * h, &axpy(&y, 0.5 * h, &k2))?;
        let k4 = field(lam + h, &axpy(&y, h, &k3))?;
        for (i, yi) in y.iter_mut().enumerate() {
            let inc = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - comp[i];
            let sum = *yi + inc;
            comp[i] = (sum - *yi) - inc;
            *yi = sum;
        }
        let next = if k + 1 == n {
            start + span
        } else {
            start + (k + 1) as f64 * h
        };
        ensure_finite(&y, next)?;
        record(next, &y)?;
    }
    Ok(y)
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri5<F, R>(
    field: &F,
    mut y: Vec<f64>,
    start: f64,
    span: f64,
    cfg: &StepperConfig,
    record: &mut R,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    R: FnMut(f64, &[f64]) -> Result<()>,
{
    let end = start + span;
    let dim = y.len();
    let mut lam = start;
    let mut h = cfg.step.min(span);
    let mut steps = 0usize;
    let mut k: Vec<Vec<f64>> = vec![Vec::new(); 7];

    while lam < end {
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps(cfg.max_steps));
        }
        steps += 1;
        let last = lam + h >= end;
        if last {
            h = end - lam;
        }
        k[0] = field(lam, &y)?;
        for stage in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..dim {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[stage] = field(lam + C[stage] * h, &ys)?;
        }
        let mut y5 = y.clone();
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] += h * d5;
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y5[i].abs());
            let e = h * (d5 - d4) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / dim as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
        } else if err <= 1.0 {
            lam = if last { end } else { lam + h };
            y = y5;
            ensure_finite(&y, lam)?;
            record(lam, &y)?;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h <= 1e-14 * lam.abs().max(1.0) {
            return Err(Error::StepUnderflow(lam));
        }
    }
    Ok(y)
}

/// Integrate an autonomous vector field on extended phase space over `span`,
/// starting at parameter 0. The residual column is filled by `residual`.
pub fn integrate_field<F, G>(
    field: F,
    initial: &ExtendedState,
    span: f64,
    cfg: &StepperConfig,
    kind: ParameterKind,
    residual: G,
) -> Result<Trajectory>
where
    F: Fn(&ExtendedState) -> Result<Tangent>,
    G: Fn(&ExtendedState) -> Result<f64>,
{
    let mut traj = Trajectory::new(kind);
    integrate_raw(
        |_, y| Ok(field(&ExtendedState::from_slice(y)?)?.to_vec()),
        initial.to_vec(),
        0.0,
        span,
        cfg,
        |lam, y| {
            let x = ExtendedState::from_slice(y)?;
            let r = residual(&x)?;
            traj.push(lam, x, r)
        },
    )?;
    Ok(traj)
}

/// End point of the flow of `field` over `span`, without storing samples.
pub fn flow_endpoint<F>(
    field: F,
    initial: &ExtendedState,
    span: f64,
    cfg: &StepperConfig,
) -> Result<ExtendedState>
where
    F: Fn(&ExtendedState) -> Result<Tangent>,
{
    let y = integrate_raw(
        |_, y| Ok(field(&ExtendedState::from_slice(y)?)?.to_vec()),
        initial.to_vec(),
        0.0,
        span,
        cfg,
        |_, _| Ok(()),
    )?;
    ExtendedState::from_slice(&y)
}

/// Solve the conventional canonical equations over `t_span` starting at `initial.t`.
///
/// The `e` column holds the running value H(q, p, t). The energy is also
/// integrated through de/dt = ∂H/∂t; the residual column reports
/// H(q, p, t) − e_integrated, which stays at zero up to integration error.
pub fn integrate_conventional(
    h: &dyn ConventionalHamiltonian,
    initial: &ConventionalState,
    t_span: f64,
    cfg: &StepperConfig,
) -> Result<Trajectory> {
    let n = initial.dim();
    if n != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: n,
        });
    }
    let mut y0 = initial.q.clone();
    y0.extend_from_slice(&initial.p);
    y0.push(h.eval(&initial.q, &initial.p, initial.t)?);

    let mut traj = Trajectory::new(ParameterKind::TimeT);
    integrate_raw(
        |t, y| {
            let g = h.gradient(&y[..n], &y[n..2 * n], t)?;
            let mut v = g.dp;
            v.extend(g.dq.iter().map(|d| -d));
            v.push(g.dt);
            Ok(v)
        },
        y0,
        initial.t,
        t_span,
        cfg,
        |t, y| {
            let (q, p) = (y[..n].to_vec(), y[n..2 * n].to_vec());
            let e = h.eval(&q, &p, t)?;
            let r = e - y[2 * n];
            traj.push(t, ExtendedState { q, p, t, e }, r)
        },
    )?;
    Ok(traj)
}

/// Solve the extended canonical equations over `s_span`, with s starting at 0.
///
/// Off-shell initial states are integrated as given; He then stays at its
/// initial nonzero value.
pub fn integrate_extended(
    he: &dyn ExtendedHamiltonian,
    initial: &ExtendedState,
    s_span: f64,
    cfg: &StepperConfig,
) -> Result<Trajectory> {
    if initial.dim() != he.dim() {
        return Err(Error::DimensionMismatch {
            expected: he.dim(),
            got: initial.dim(),
        });
    }
    let r0 = he.eval(initial)?;
    if r0.abs() > OFF_SHELL_WARN {
        tracing::warn!(
            residual = r0,
            system = he.name(),
            "initial extended state is off shell"
        );
    }
    integrate_field(
        |x| extended_rhs(he, x),
        initial,
        s_span,
        cfg,
        ParameterKind::EvolutionS,
        |x| he.eval(x),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub quantity: String,
    pub initial: f64,
    pub max_abs_deviation: f64,
    /// `None` when the initial value is zero and the quantity moves.
    pub max_rel_deviation: Option<f64>,
    /// Parameter at which the largest deviation occurs.
    pub at_param: f64,
}

/// Track how far `quantity` strays from its initial value along `trajectory`.
pub fn monitor<F>(trajectory: &Trajectory, name: &str, quantity: F) -> Result<DriftReport>
where
    F: Fn(&ExtendedState) -> Result<f64>,
{
    let first = trajectory
        .first()
        .ok_or_else(|| Error::domain("monitor", "empty trajectory"))?;
    let initial = quantity(&first.state)?;
    let mut max_abs = 0.0;
    let mut at = first.param;
    for s in trajectory.samples() {
        let d = (quantity(&s.state)? - initial).abs();
        if d > max_abs {
            max_abs = d;
            at = s.param;
        }
    }
    let rel = if initial != 0.0 {
        Some(max_abs / initial.abs())
    } else if max_abs == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(DriftReport {
        quantity: name.to_string(),
        initial,
        max_abs_deviation: max_abs,
        max_rel_deviation: rel,
        at_param: at,
    })
}
