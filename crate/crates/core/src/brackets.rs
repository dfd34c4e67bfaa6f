//! Phase-space gradients, the extended Poisson bracket and conservation scans.
//!
//! Sign convention for f, g on extended phase space:
//!
//! ```text
//! [f, g] = Σᵢ (∂f/∂qⁱ ∂g/∂pᵢ − ∂f/∂pᵢ ∂g/∂qⁱ) − ∂f/∂t ∂g/∂e + ∂f/∂e ∂g/∂t
//! ```
//!
//! so that [qⁱ, pⱼ] = δᵢⱼ and [t, e] = −1. Conservation is tested as
//! [He, I] = 0, with He in the first slot.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{ConventionalState, ExtendedState, Gradient};
use crate::systems::ConventionalHamiltonian;

/// Default base step of central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A scalar function on extended phase space.
pub trait ExtendedFunction: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, x: &ExtendedState) -> Result<f64>;
    /// Exact partial derivatives, if the function provides them.
    fn analytic_gradient(&self, _x: &ExtendedState) -> Option<Result<Gradient>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    #[serde(alias = "fd")]
    CentralDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientScheme {
    pub mode: GradientMode,
    pub fd_step: f64,
}

impl Default for GradientScheme {
    fn default() -> Self {
        Self::analytic()
    }
}

impl GradientScheme {
    pub fn analytic() -> Self {
        Self {
            mode: GradientMode::Analytic,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn central_difference() -> Self {
        Self {
            mode: GradientMode::CentralDifference,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

fn central_difference(f: &dyn ExtendedFunction, x: &ExtendedState, base: f64) -> Result<Gradient> {
    if !(base > 0.0 && base.is_finite()) {
        return Err(Error::config(format!("fd_step must be > 0, got {base}")));
    }
    let y = x.to_vec();
    let mut d = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let h = base * y[i].abs().max(1.0);
        let mut plus = y.clone();
        let mut minus = y.clone();
        plus[i] += h;
        minus[i] -= h;
        let fp = f.eval(&ExtendedState::from_slice(&plus)?)?;
        let fm = f.eval(&ExtendedState::from_slice(&minus)?)?;
        // divide by the step actually represented in floating point
        d.push((fp - fm) / (plus[i] - minus[i]));
    }
    let n = x.dim();
    Ok(Gradient {
        dq: d[..n].to_vec(),
        dp: d[n..2 * n].to_vec(),
        dt: d[2 * n],
        de: d[2 * n + 1],
    })
}

/// Partial derivatives of `f` at `x`: analytic when requested and available,
/// otherwise second-order central differences with step fd_step·max(1, |xᵢ|).
pub fn gradient(f: &dyn ExtendedFunction, x: &ExtendedState, scheme: &GradientScheme) -> Result<Gradient> {
    if scheme.mode == GradientMode::Analytic {
        if let Some(g) = f.analytic_gradient(x) {
            return g;
        }
    }
    central_difference(f, x, scheme.fd_step)
}

/// Bracket of two gradients under the convention in the module docs.
pub fn bracket_of_gradients(gf: &Gradient, gg: &Gradient) -> f64 {
    let mut s = 0.0;
    for i in 0..gf.dq.len() {
        s += gf.dq[i] * gg.dp[i] - gf.dp[i] * gg.dq[i];
    }
    s - gf.dt * gg.de + gf.de * gg.dt
}

/// The extended Poisson bracket [f, g] at `x`.
pub fn extended_poisson(
    f: &dyn ExtendedFunction,
    g: &dyn ExtendedFunction,
    x: &ExtendedState,
    scheme: &GradientScheme,
) -> Result<f64> {
    Ok(bracket_of_gradients(
        &gradient(f, x, scheme)?,
        &gradient(g, x, scheme)?,
    ))
}

/// dI/dt along the flow of a conventional H, for an on-shell state:
/// ∂I/∂t + ∂I/∂e ∂H/∂t + Σᵢ (∂I/∂qⁱ ∂H/∂pᵢ − ∂I/∂pᵢ ∂H/∂qⁱ).
///
/// For the standard lift this equals −[He, I].
pub fn total_time_derivative(
    i: &dyn ExtendedFunction,
    h: &dyn ConventionalHamiltonian,
    x: &ExtendedState,
    scheme: &GradientScheme,
) -> Result<f64> {
    let gi = gradient(i, x, scheme)?;
    let gh = h.gradient(&x.q, &x.p, x.t)?;
    let mut s = gi.dt + gi.de * gh.dt;
    for k in 0..gi.dq.len() {
        s += gi.dq[k] * gh.dp[k] - gi.dp[k] * gh.dq[k];
    }
    Ok(s)
}

/// Seeded generator of on-shell states: (q, p, t) uniform in a box, then e = H(q, p, t).
#[derive(Clone)]
pub struct OnShellSampler {
    hamiltonian: Arc<dyn ConventionalHamiltonian>,
    pub bounds: SamplerBounds,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerBounds {
    /// Each qᵢ and pᵢ is drawn from [−box_half_width, box_half_width].
    pub box_half_width: f64,
    /// Draws with |q| below this are rejected.
    pub min_radius: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for SamplerBounds {
    fn default() -> Self {
        Self {
            box_half_width: 2.0,
            min_radius: 0.1,
            t_min: 0.0,
            t_max: 2.0 * PI,
        }
    }
}

impl OnShellSampler {
    pub fn new(hamiltonian: Arc<dyn ConventionalHamiltonian>, seed: u64) -> Self {
        Self {
            hamiltonian,
            bounds: SamplerBounds::default(),
            seed,
        }
    }

    pub fn with_bounds(mut self, bounds: SamplerBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// The first `count` draws. Each item is the lifted state, or the lift
    /// error when H cannot be evaluated at the drawn point.
    pub fn draw(&self, count: usize) -> Vec<Result<ExtendedState>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.hamiltonian.dim();
        let w = self.bounds.box_half_width;
        (0..count)
            .map(|_| {
                let q = loop {
                    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-w..=w)).collect();
                    if q.iter().map(|v| v * v).sum::<f64>().sqrt() >= self.bounds.min_radius {
                        break q;
                    }
                };
                let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-w..=w)).collect();
                let t = rng.gen_range(self.bounds.t_min..=self.bounds.t_max);
                let c = ConventionalState::new(q, p, t)?;
                crate::phase_space::lift(&c, self.hamiltonian.as_ref())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanStats {
    pub max: f64,
    pub mean: f64,
    /// Samples evaluated successfully.
    pub count: usize,
    /// Samples skipped because of domain errors.
    pub failures: usize,
}

/// Evaluate |[He, I]| at `count` on-shell samples.
pub fn conservation_scan(
    invariant: &dyn ExtendedFunction,
    he: &dyn ExtendedFunction,
    sampler: &OnShellSampler,
    count: usize,
    scheme: &GradientScheme,
) -> ScanStats {
    let values: Vec<Option<f64>> = sampler
        .draw(count)
        .into_par_iter()
        .map(|x| {
            let x = x.ok()?;
            extended_poisson(he, invariant, &x, scheme).ok().map(f64::abs)
        })
        .collect();
    // sequential reduction keeps the mean independent of thread scheduling
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let max = ok.iter().copied().fold(0.0, f64::max);
    let mean = if ok.is_empty() {
        0.0
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    };
    ScanStats {
        max,
        mean,
        count: ok.len(),
        failures: values.len() - ok.len(),
    }
}

/// ExtendedFunction backed by closures; useful for ad hoc observables.
pub struct FnFunction<F, G = fn(&ExtendedState) -> Result<Gradient>> {
    name: String,
    value: F,
    grad: Option<G>,
}

impl<F> FnFunction<F>
where
    F: Fn(&ExtendedState) -> Result<f64> + Send + Sync,
{
    pub fn new(name: &str, value: F) -> Self {
        Self {
            name: name.to_string(),
            value,
            grad: None,
        }
    }
}

impl<F, G> FnFunction<F, G>
where
    F: Fn(&ExtendedState) -> Result<f64> + Send + Sync,
    G: Fn(&ExtendedState) -> Result<Gradient> + Send + Sync,
{
    pub fn with_gradient(name: &str, value: F, grad: G) -> Self {
        Self {
            name: name.to_string(),
            value,
            grad: Some(grad),
        }
    }
}

impl<F, G> ExtendedFunction for FnFunction<F, G>
where
    F: Fn(&ExtendedState) -> Result<f64> + Send + Sync,
    G: Fn(&ExtendedState) -> Result<Gradient> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        (self.value)(x)
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        self.grad.as_ref().map(|g| g(x))
    }
}

/// One of the canonical coordinates as a function on extended phase space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Q(usize),
    P(usize),
    T,
    E,
}

impl Coordinate {
    fn label(&self) -> String {
        match self {
            Coordinate::Q(i) => format!("q{}", i + 1),
            Coordinate::P(i) => format!("p{}", i + 1),
            Coordinate::T => "t".into(),
            Coordinate::E => "e".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoordinateFunction {
    coord: Coordinate,
    name: String,
}

impl CoordinateFunction {
    pub fn new(coord: Coordinate) -> Self {
        Self {
            name: coord.label(),
            coord,
        }
    }
}

impl ExtendedFunction for CoordinateFunction {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        let n = x.dim();
        let out_of_range = |i: usize| Error::DimensionMismatch {
            expected: i + 1,
            got: n,
        };
        match self.coord {
            Coordinate::Q(i) => x.q.get(i).copied().ok_or_else(|| out_of_range(i)),
            Coordinate::P(i) => x.p.get(i).copied().ok_or_else(|| out_of_range(i)),
            Coordinate::T => Ok(x.t),
            Coordinate::E => Ok(x.e),
        }
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        let mut g = Gradient::zeros(x.dim());
        let n = x.dim();
        match self.coord {
            Coordinate::Q(i) | Coordinate::P(i) if i >= n => {
                return Some(Err(Error::DimensionMismatch {
                    expected: i + 1,
                    got: n,
                }))
            }
            Coordinate::Q(i) => g.dq[i] = 1.0,
            Coordinate::P(i) => g.dp[i] = 1.0,
            Coordinate::T => g.dt = 1.0,
            Coordinate::E => g.de = 1.0,
        }
        Some(Ok(g))
    }
}
