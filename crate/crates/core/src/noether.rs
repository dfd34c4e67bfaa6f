//! Symmetry transformations generated by constants of motion.
//!
//! An invariant I(q, p, t, e) generates the infinitesimal canonical map
//!
//! ```text
//! δqⁱ = δε ∂I/∂pᵢ    δpᵢ = −δε ∂I/∂qⁱ    δt = −δε ∂I/∂e    δe = δε ∂I/∂t
//! ```
//!
//! and the map is a symmetry of the dynamics exactly when [He, I] = 0.
//! Finite transformations are the flow of this vector field in ε.
//!
//! The rule is applied uniformly. For the energy-dependent Runge–Lenz form it
//! gives δp₂ = −δε p₁p₂; self-conservation and shell preservation of the
//! resulting flow confirm the sign.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::brackets::{
    conservation_scan, gradient, Coordinate, CoordinateFunction, ExtendedFunction, GradientScheme,
    OnShellSampler, ScanStats,
};
use crate::dynamics::{extended_rhs, flow_endpoint, StepperConfig};
use crate::error::{Error, Result};
use crate::phase_space::{ExtendedState, Gradient, Tangent};
use crate::systems::{ExtendedHamiltonian, System, SINGULARITY_GUARD};

/// Default number of RK4 steps for a finite transformation.
pub const FLOW_STEPS: usize = 1000;

/// A candidate constant of motion, used as the seed of a symmetry.
#[derive(Clone)]
pub struct Invariant {
    function: Arc<dyn ExtendedFunction>,
    depends_on_e: bool,
}

impl std::fmt::Debug for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Invariant")
            .field("name", &self.function.name())
            .field("depends_on_e", &self.depends_on_e)
            .finish()
    }
}

/// How [`Invariant::admit`] checks a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissionPolicy {
    pub samples: usize,
    pub tol: f64,
    pub scheme: GradientScheme,
    pub seed: u64,
    /// When false, a failing check is logged and the invariant admitted anyway.
    pub enforce: bool,
}

impl Default for AdmissionPolicy {
    fn default() -> Self {
        Self {
            samples: 32,
            tol: 1e-5,
            scheme: GradientScheme::central_difference(),
            seed: 0,
            enforce: true,
        }
    }
}

impl Invariant {
    /// Wrap a function without checking conservation.
    pub fn unchecked(function: Arc<dyn ExtendedFunction>, depends_on_e: bool) -> Self {
        Self {
            function,
            depends_on_e,
        }
    }

    /// Wrap a function after checking [He, I] = 0 on on-shell samples of `system`.
    pub fn admit(
        function: Arc<dyn ExtendedFunction>,
        depends_on_e: bool,
        system: &System,
        policy: &AdmissionPolicy,
    ) -> Result<Self> {
        let inv = Self::unchecked(function, depends_on_e);
        let sampler = OnShellSampler::new(system.conventional.clone(), policy.seed);
        let report = canonicity_check(
            &inv,
            system.extended.as_ref(),
            &sampler,
            policy.samples,
            policy.tol,
            &policy.scheme,
        );
        if !report.passed {
            if policy.enforce {
                return Err(Error::NotConserved {
                    name: inv.name().to_string(),
                    max: report.stats.max,
                    tol: policy.tol,
                });
            }
            tracing::warn!(
                invariant = inv.name(),
                max = report.stats.max,
                "admitting an invariant that fails the conservation check"
            );
        }
        Ok(inv)
    }

    /// The extended Hamiltonian itself; its symmetry is the shift in s.
    pub fn from_hamiltonian(he: Arc<dyn ExtendedHamiltonian>) -> Self {
        Self::unchecked(he, true)
    }

    /// True iff ∂I/∂e is not identically zero, i.e. the symmetry shifts time.
    pub fn depends_on_e(&self) -> bool {
        self.depends_on_e
    }

    pub fn function(&self) -> &Arc<dyn ExtendedFunction> {
        &self.function
    }
}

impl ExtendedFunction for Invariant {
    fn name(&self) -> &str {
        self.function.name()
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        self.function.eval(x)
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        self.function.analytic_gradient(x)
    }
}

fn planar(what: &str, x: &ExtendedState) -> Result<()> {
    if x.dim() != 2 {
        return Err(Error::domain(what, format!("needs n = 2, got {}", x.dim())));
    }
    Ok(())
}

/// L = p₁q₂ − p₂q₁.
#[derive(Debug, Clone, Copy)]
pub struct AngularMomentum;

impl ExtendedFunction for AngularMomentum {
    fn name(&self) -> &str {
        "angular-momentum"
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        planar("angular momentum", x)?;
        Ok(x.p[0] * x.q[1] - x.p[1] * x.q[0])
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        Some(planar("angular momentum", x).map(|_| Gradient {
            dq: vec![-x.p[1], x.p[0]],
            dp: vec![x.q[1], -x.q[0]],
            dt: 0.0,
            de: 0.0,
        }))
    }
}

pub fn angular_momentum() -> Invariant {
    Invariant::unchecked(Arc::new(AngularMomentum), false)
}

/// First Runge–Lenz component −q₁p₂² + q₂p₁p₂ + μq₁/r, for constant μ.
#[derive(Debug, Clone, Copy)]
pub struct RungeLenz {
    pub mu: f64,
}

impl RungeLenz {
    fn radius(x: &ExtendedState) -> Result<f64> {
        planar("runge-lenz", x)?;
        let r = x.q[0].hypot(x.q[1]);
        if r < SINGULARITY_GUARD {
            return Err(Error::Singularity {
                what: "runge-lenz".into(),
                r,
                guard: SINGULARITY_GUARD,
            });
        }
        Ok(r)
    }
}

impl ExtendedFunction for RungeLenz {
    fn name(&self) -> &str {
        "runge-lenz"
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        let r = Self::radius(x)?;
        let (q, p) = (&x.q, &x.p);
        Ok(-q[0] * p[1] * p[1] + q[1] * p[0] * p[1] + self.mu * q[0] / r)
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        Some(Self::radius(x).map(|r| {
            let (q, p) = (&x.q, &x.p);
            let k = self.mu / (r * r * r);
            Gradient {
                dq: vec![-p[1] * p[1] + k * q[1] * q[1], p[0] * p[1] - k * q[0] * q[1]],
                dp: vec![q[1] * p[1], -2.0 * q[0] * p[1] + q[1] * p[0]],
                dt: 0.0,
                de: 0.0,
            }
        }))
    }
}

pub fn runge_lenz(mu: f64) -> Invariant {
    Invariant::unchecked(Arc::new(RungeLenz { mu }), false)
}

/// The same Runge–Lenz component with μ/r eliminated through e = H:
/// ½q₁p₁² + q₂p₁p₂ − ½q₁p₂² − q₁e. Agrees with [`RungeLenz`] on shell only.
#[derive(Debug, Clone, Copy)]
pub struct RungeLenzExtended;

impl ExtendedFunction for RungeLenzExtended {
    fn name(&self) -> &str {
        "runge-lenz-extended"
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        planar("runge-lenz-extended", x)?;
        let (q, p) = (&x.q, &x.p);
        Ok(0.5 * q[0] * p[0] * p[0] + q[1] * p[0] * p[1] - 0.5 * q[0] * p[1] * p[1] - q[0] * x.e)
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        Some(planar("runge-lenz-extended", x).map(|_| {
            let (q, p) = (&x.q, &x.p);
            Gradient {
                dq: vec![0.5 * p[0] * p[0] - 0.5 * p[1] * p[1] - x.e, p[0] * p[1]],
                dp: vec![q[0] * p[0] + q[1] * p[1], q[1] * p[0] - q[0] * p[1]],
                dt: 0.0,
                de: -q[0],
            }
        }))
    }
}

pub fn runge_lenz_extended() -> Invariant {
    Invariant::unchecked(Arc::new(RungeLenzExtended), true)
}

/// A canonical coordinate as a (generally non-conserved) generator, for controls.
pub fn coordinate(coord: Coordinate) -> Invariant {
    Invariant::unchecked(Arc::new(CoordinateFunction::new(coord)), coord == Coordinate::E)
}

/// Built-in generators by name. `mu` is the constant coupling used by `runge-lenz`.
pub fn builtin_invariant(name: &str, system: &System, mu: f64) -> Result<Invariant> {
    match name {
        "angular-momentum" => Ok(angular_momentum()),
        "runge-lenz" => Ok(runge_lenz(mu)),
        "runge-lenz-extended" => Ok(runge_lenz_extended()),
        "hamiltonian" | "he" => Ok(Invariant::from_hamiltonian(system.extended.clone())),
        "energy" | "e" => Ok(coordinate(Coordinate::E)),
        "t" => Ok(coordinate(Coordinate::T)),
        other => {
            let parse_index = |s: &str| s.parse::<usize>().ok().filter(|&i| i >= 1);
            if let Some(i) = other.strip_prefix('q').and_then(parse_index) {
                Ok(coordinate(Coordinate::Q(i - 1)))
            } else if let Some(i) = other.strip_prefix('p').and_then(parse_index) {
                Ok(coordinate(Coordinate::P(i - 1)))
            } else {
                Err(Error::config(format!(
                    "unknown invariant `{other}` (angular-momentum, runge-lenz, \
                     runge-lenz-extended, hamiltonian, energy, t, q<i>, p<i>)"
                )))
            }
        }
    }
}

/// First-order change of the canonical variables for a given δε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDelta {
    pub eps: f64,
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dt: f64,
    pub de: f64,
}

/// The generator vector field (∂I/∂p, −∂I/∂q, −∂I/∂e, ∂I/∂t).
pub fn generator_field(
    i: &dyn ExtendedFunction,
    x: &ExtendedState,
    scheme: &GradientScheme,
) -> Result<Tangent> {
    Ok(Tangent::hamiltonian_field(&gradient(i, x, scheme)?))
}

/// Apply the infinitesimal symmetry generated by `i` with parameter `eps`.
pub fn infinitesimal_transform(
    i: &dyn ExtendedFunction,
    x: &ExtendedState,
    eps: f64,
    scheme: &GradientScheme,
) -> Result<(ExtendedState, SymmetryDelta)> {
    let v = generator_field(i, x, scheme)?;
    let delta = SymmetryDelta {
        eps,
        dq: v.dq.iter().map(|d| eps * d).collect(),
        dp: v.dp.iter().map(|d| eps * d).collect(),
        dt: eps * v.dt,
        de: eps * v.de,
    };
    Ok((x.advanced(eps, &v), delta))
}

/// RK4 with [`FLOW_STEPS`] steps over |eps|.
pub fn default_flow_config(eps: f64) -> StepperConfig {
    StepperConfig::rk4_steps(eps, FLOW_STEPS)
}

/// The finite symmetry: flow of the generator field of `i` over parameter `eps`.
pub fn finite_transform(
    i: &dyn ExtendedFunction,
    x: &ExtendedState,
    eps: f64,
    cfg: &StepperConfig,
) -> Result<ExtendedState> {
    if eps == 0.0 {
        return Ok(x.clone());
    }
    let scheme = GradientScheme::analytic();
    if eps > 0.0 {
        flow_endpoint(|y| generator_field(i, y, &scheme), x, eps, cfg)
    } else {
        flow_endpoint(
            |y| {
                let v = generator_field(i, y, &scheme)?;
                Ok(Tangent {
                    dq: v.dq.iter().map(|d| -d).collect(),
                    dp: v.dp.iter().map(|d| -d).collect(),
                    dt: -v.dt,
                    de: -v.de,
                })
            },
            x,
            -eps,
            cfg,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicityReport {
    pub invariant: String,
    pub stats: ScanStats,
    pub tol: f64,
    pub passed: bool,
}

/// The Noether gate: I generates a symmetry iff max |[He, I]| ≤ tol on shell.
pub fn canonicity_check(
    i: &dyn ExtendedFunction,
    he: &dyn ExtendedFunction,
    sampler: &OnShellSampler,
    count: usize,
    tol: f64,
    scheme: &GradientScheme,
) -> CanonicityReport {
    let stats = conservation_scan(i, he, sampler, count, scheme);
    CanonicityReport {
        invariant: i.name().to_string(),
        passed: stats.count > 0 && stats.max <= tol,
        stats,
        tol,
    }
}

/// ‖Φ_I^ε(Φ_He^Δs(x₀)) − Φ_He^Δs(Φ_I^ε(x₀))‖∞ over (q, p, t, e).
///
/// Vanishes (to integration error) when the symmetry maps solutions to solutions.
pub fn flow_commutation_check(
    i: &dyn ExtendedFunction,
    he: &dyn ExtendedHamiltonian,
    x0: &ExtendedState,
    eps: f64,
    delta_s: f64,
    dynamics_cfg: &StepperConfig,
    flow_cfg: &StepperConfig,
) -> Result<f64> {
    let evolve = |x: &ExtendedState| flow_endpoint(|y| extended_rhs(he, y), x, delta_s, dynamics_cfg);
    let a = finite_transform(i, &evolve(x0)?, eps, flow_cfg)?;
    let b = evolve(&finite_transform(i, x0, eps, flow_cfg)?)?;
    Ok(a.max_abs_diff(&b))
}

/// Like [`flow_commutation_check`], but compares the transformed end point
/// with the orbit through the transformed start point, at the orbit parameter
/// where the time coordinates match.
///
/// Generators that commute with He only on the constraint shell (such as
/// [`RungeLenzExtended`]) map solutions to solutions up to a shift of s; this
/// residual is insensitive to that shift.
pub fn orbit_commutation_check(
    i: &dyn ExtendedFunction,
    he: &dyn ExtendedHamiltonian,
    x0: &ExtendedState,
    eps: f64,
    delta_s: f64,
    dynamics_cfg: &StepperConfig,
    flow_cfg: &StepperConfig,
) -> Result<f64> {
    let evolve = |x: &ExtendedState, s: f64| {
        if s == 0.0 {
            Ok(x.clone())
        } else {
            flow_endpoint(|y| extended_rhs(he, y), x, s, dynamics_cfg)
        }
    };
    let target = finite_transform(i, &evolve(x0, delta_s)?, eps, flow_cfg)?;
    let start = finite_transform(i, x0, eps, flow_cfg)?;
    // Newton iteration on t(s) = target.t, with dt/ds = −∂He/∂e
    let mut s = delta_s;
    let mut end = evolve(&start, s)?;
    for _ in 0..8 {
        let rate = -he.gradient(&end)?.de;
        if rate == 0.0 {
            return Err(Error::domain("orbit commutation", "dt/ds vanishes"));
        }
        let step = (end.t - target.t) / rate;
        if s - step <= 0.0 || s.is_nan() {
            return Err(Error::domain(
                "orbit commutation",
                "matching parameter is not positive",
            ));
        }
        s -= step;
        end = evolve(&start, s)?;
        if step.abs() <= 1e-15 * s.abs().max(1.0) {
            break;
        }
    }
    Ok(end.max_abs_diff(&target))
}

/// The configuration-space part of the extended Runge–Lenz symmetry as a
/// local scaled rotation: Q(t + δt) = [1 + A] q(t) with
/// A = δε [[p₁, p₂], [−p₂, p₁]], δt = q₁δε, scaling δφ = p₁δε, angle δψ = p₂δε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledRotation {
    pub dt: f64,
    pub dphi: f64,
    pub dpsi: f64,
    /// 1 + A, row-major.
    pub matrix: [[f64; 2]; 2],
}

impl ScaledRotation {
    pub fn apply_linear(&self, q: &[f64]) -> [f64; 2] {
        let m = &self.matrix;
        [m[0][0] * q[0] + m[0][1] * q[1], m[1][0] * q[0] + m[1][1] * q[1]]
    }

    /// e^{δφ} R(δψ) q, which agrees with the linear form to first order.
    pub fn apply_exponential(&self, q: &[f64]) -> [f64; 2] {
        let s = self.dphi.exp();
        let (sin, cos) = self.dpsi.sin_cos();
        [s * (cos * q[0] + sin * q[1]), s * (-sin * q[0] + cos * q[1])]
    }
}

pub fn scaled_rotation_decomposition(x: &ExtendedState, eps: f64) -> Result<ScaledRotation> {
    planar("scaled rotation", x)?;
    let (p1, p2) = (x.p[0], x.p[1]);
    Ok(ScaledRotation {
        dt: x.q[0] * eps,
        dphi: p1 * eps,
        dpsi: p2 * eps,
        matrix: [[1.0 + eps * p1, eps * p2], [-eps * p2, 1.0 + eps * p1]],
    })
}

/// Generator of a conventional (time-preserving) canonical transformation,
/// f₂ = Σᵢ gᵢ(q, t) Pᵢ + h(q, t).
pub trait PointGenerator: Send + Sync {
    fn dim(&self) -> usize;
    /// g(q, t), the new coordinates.
    fn map(&self, q: &[f64], t: f64) -> Vec<f64>;
    /// ∂gᵢ/∂qʲ.
    fn jacobian(&self, q: &[f64], t: f64) -> DMatrix<f64>;
    /// ∂gᵢ/∂t.
    fn map_dt(&self, q: &[f64], t: f64) -> Vec<f64>;
    fn gauge_dq(&self, q: &[f64], _t: f64) -> Vec<f64> {
        vec![0.0; q.len()]
    }
    fn gauge_dt(&self, _q: &[f64], _t: f64) -> f64 {
        0.0
    }
}

/// f₂ = (M q + v t)·P + a t.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGenerator {
    pub matrix: DMatrix<f64>,
    pub velocity: Vec<f64>,
    pub gauge_rate: f64,
}

impl LinearGenerator {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            velocity: vec![0.0; n],
            gauge_rate: 0.0,
        }
    }

    /// Planar rotation [[cos ε, sin ε], [−sin ε, cos ε]].
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[c, s, -s, c]),
            ..Self::identity(2)
        }
    }

    /// Identity map plus the pure energy offset f₂ ⊃ a·t.
    pub fn gauge(n: usize, rate: f64) -> Self {
        Self {
            gauge_rate: rate,
            ..Self::identity(n)
        }
    }

    /// Galilean shift Q = q + v t.
    pub fn moving_frame(velocity: Vec<f64>) -> Self {
        Self {
            velocity,
            ..Self::identity(0)
        }
        .with_dim()
    }

    fn with_dim(mut self) -> Self {
        let n = self.velocity.len();
        self.matrix = DMatrix::identity(n, n);
        self
    }
}

impl PointGenerator for LinearGenerator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn map(&self, q: &[f64], t: f64) -> Vec<f64> {
        let mq = &self.matrix * DVector::from_column_slice(q);
        mq.iter().zip(&self.velocity).map(|(a, v)| a + v * t).collect()
    }

    fn jacobian(&self, _q: &[f64], _t: f64) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn map_dt(&self, _q: &[f64], _t: f64) -> Vec<f64> {
        self.velocity.clone()
    }

    fn gauge_dt(&self, _q: &[f64], _t: f64) -> f64 {
        self.gauge_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupTransform {
    /// (Q, P, T, E) with T = t and E = e + ∂f₂/∂t.
    pub state: ExtendedState,
    /// ∂f₂/∂t, so that H′ = H + ∂f₂/∂t.
    pub hamiltonian_shift: f64,
}

/// Apply p = ∂f₂/∂q, Q = ∂f₂/∂P, e = E − ∂f₂/∂t, T = t to `x`.
pub fn conventional_subgroup_transform(
    f2: &dyn PointGenerator,
    x: &ExtendedState,
) -> Result<SubgroupTransform> {
    let n = x.dim();
    if f2.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: f2.dim(),
            got: n,
        });
    }
    let jac = f2.jacobian(&x.q, x.t);
    let rhs = DVector::from_iterator(n, x.p.iter().zip(f2.gauge_dq(&x.q, x.t)).map(|(p, h)| p - h));
    // p_j = Σ_i ∂g_i/∂q_j P_i + ∂h/∂q_j
    let new_p = jac
        .transpose()
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|c| c.is_finite()))
        .ok_or_else(|| Error::NonInvertible(x.q.clone()))?;
    let shift: f64 = f2
        .map_dt(&x.q, x.t)
        .iter()
        .zip(new_p.iter())
        .map(|(g, p)| g * p)
        .sum::<f64>()
        + f2.gauge_dt(&x.q, x.t);
    Ok(SubgroupTransform {
        state: ExtendedState {
            q: f2.map(&x.q, x.t),
            p: new_p.iter().copied().collect(),
            t: x.t,
            e: x.e + shift,
        },
        hamiltonian_shift: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brackets::extended_poisson;
    use crate::phase_space::{lift, ConventionalState};
    use crate::systems::{kepler, standard_lift, Coupling};
    use std::f64::consts::PI;

    fn xs(q: &[f64], p: &[f64], t: f64, e: f64) -> ExtendedState {
        ExtendedState::new(q.to_vec(), p.to_vec(), t, e).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn angular_momentum_values() {
        let l = angular_momentum();
        assert_eq!(l.eval(&xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, 0.0)).unwrap(), -1.0);
        assert_eq!(l.eval(&xs(&[1.0, 0.0], &[1.0, 0.0], 0.0, 0.0)).unwrap(), 0.0);
        assert!(!l.depends_on_e());
        assert!(l.eval(&xs(&[1.0], &[0.0], 0.0, 0.0)).is_err());
    }

    #[test]
    fn runge_lenz_values() {
        let rl = runge_lenz(1.0);
        assert_eq!(rl.eval(&xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, 0.0)).unwrap(), 0.0);
        assert!(close(
            rl.eval(&xs(&[1.0, 0.0], &[0.0, 1.2], 0.0, 0.0)).unwrap(),
            -0.44,
            1e-15
        ));
        assert_eq!(rl.eval(&xs(&[0.0, 1.0], &[1.0, 0.0], 0.0, 0.0)).unwrap(), 0.0);
        assert!(matches!(
            rl.eval(&xs(&[0.0, 0.0], &[1.0, 0.0], 0.0, 0.0)),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn runge_lenz_extended_values() {
        let rl = runge_lenz_extended();
        assert!(rl.depends_on_e());
        assert_eq!(rl.eval(&xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, -0.5)).unwrap(), 0.0);
        assert!(close(
            rl.eval(&xs(&[1.0, 0.0], &[0.0, 1.2], 0.0, -0.28)).unwrap(),
            -0.44,
            1e-15
        ));
        assert_eq!(rl.eval(&xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, 0.0)).unwrap(), -0.5);
    }

    #[test]
    fn infinitesimal_rotation() {
        let x = xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, -0.5);
        let (y, d) =
            infinitesimal_transform(&angular_momentum(), &x, 0.01, &GradientScheme::analytic()).unwrap();
        assert_eq!(d.dq, vec![0.0, -0.01]);
        assert_eq!(d.dp, vec![0.01, -0.0]);
        assert_eq!((d.dt, d.de), (0.0, 0.0));
        assert_eq!(y.q, vec![1.0, -0.01]);
    }

    #[test]
    fn infinitesimal_runge_lenz_extended() {
        let x = xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, -0.5);
        let (_, d) =
            infinitesimal_transform(&runge_lenz_extended(), &x, 0.01, &GradientScheme::analytic()).unwrap();
        assert_eq!(d.dq, vec![0.0, -0.01]);
        assert_eq!(d.dp[0], 0.0);
        assert_eq!(d.dp[1], 0.0);
        assert_eq!(d.dt, 0.01);
        assert_eq!(d.de, 0.0);
    }

    #[test]
    fn runge_lenz_extended_dp2_sign() {
        // δp₂ = −δε ∂I/∂q₂ = −δε p₁p₂
        let x = xs(&[0.8, 0.3], &[0.5, 0.9], 0.0, -0.2);
        let (_, d) =
            infinitesimal_transform(&runge_lenz_extended(), &x, 1e-3, &GradientScheme::analytic()).unwrap();
        assert!(close(d.dp[1], -1e-3 * 0.5 * 0.9, 1e-18));
    }

    #[test]
    fn finite_rotation_quarter_turn() {
        let x = xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, -0.5);
        let eps = PI / 2.0;
        let y = finite_transform(&angular_momentum(), &x, eps, &default_flow_config(eps)).unwrap();
        assert!(close(y.q[0], 0.0, 1e-12) && close(y.q[1], -1.0, 1e-12));
        assert!(close(y.p[0], 1.0, 1e-12) && close(y.p[1], 0.0, 1e-12));
        assert_eq!((y.t, y.e), (0.0, -0.5));
    }

    #[test]
    fn finite_transform_zero_and_inverse() {
        let x = xs(&[0.7, -0.2], &[0.3, 1.1], 0.5, -0.4);
        let l = angular_momentum();
        assert_eq!(
            finite_transform(&l, &x, 0.0, &default_flow_config(0.0)).unwrap(),
            x
        );
        let y = finite_transform(&l, &x, 0.8, &default_flow_config(0.8)).unwrap();
        let back = finite_transform(&l, &y, -0.8, &default_flow_config(0.8)).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn canonicity_gate() {
        let timedep = System::kepler(Coupling::Sinusoidal {
            amplitude: 0.1,
            omega: 1.0,
        });
        let autonomous = System::kepler(Coupling::Constant(1.0));
        let fd = GradientScheme::central_difference();
        let check = |i: &Invariant, s: &System| {
            let sampler = OnShellSampler::new(s.conventional.clone(), 1);
            canonicity_check(i, s.extended.as_ref(), &sampler, 50, 1e-5, &fd)
        };
        assert!(check(&angular_momentum(), &timedep).passed);
        assert!(check(&runge_lenz(1.0), &autonomous).passed);
        assert!(check(&runge_lenz_extended(), &autonomous).passed);
        let r = check(&runge_lenz(1.0), &timedep);
        assert!(!r.passed && r.stats.max > 1e-3, "{r:?}");
    }

    #[test]
    fn runge_lenz_bracket_against_expansion() {
        // exact zero for constant μ; only rounding survives
        let h = Arc::new(kepler(Coupling::Constant(1.0)));
        let he = standard_lift(h.clone());
        let sampler = OnShellSampler::new(h, 2);
        for x in sampler.draw(30) {
            let x = x.unwrap();
            let v = extended_poisson(&he, &runge_lenz(1.0), &x, &GradientScheme::analytic()).unwrap();
            assert!(v.abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn admission_enforces_unless_overridden() {
        let autonomous = System::kepler(Coupling::Constant(1.0));
        let policy = AdmissionPolicy::default();
        assert!(Invariant::admit(Arc::new(AngularMomentum), false, &autonomous, &policy).is_ok());
        let q1 = Arc::new(CoordinateFunction::new(Coordinate::Q(0)));
        assert!(matches!(
            Invariant::admit(q1.clone(), false, &autonomous, &policy),
            Err(Error::NotConserved { .. })
        ));
        let lax = AdmissionPolicy {
            enforce: false,
            ..policy
        };
        assert!(Invariant::admit(q1, false, &autonomous, &lax).is_ok());
    }

    #[test]
    fn builtin_lookup() {
        let s = System::kepler(Coupling::Constant(1.0));
        for name in [
            "angular-momentum",
            "runge-lenz",
            "runge-lenz-extended",
            "hamiltonian",
            "energy",
            "q1",
            "p2",
            "t",
        ] {
            builtin_invariant(name, &s, 1.0).unwrap();
        }
        assert!(builtin_invariant("q0", &s, 1.0).is_err());
        assert!(builtin_invariant("spin", &s, 1.0).is_err());
        assert!(builtin_invariant("hamiltonian", &s, 1.0).unwrap().depends_on_e());
    }

    #[test]
    fn scaled_rotation_examples() {
        let x = xs(&[1.0, 0.0], &[0.0, 1.0], 0.0, -0.5);
        let sr = scaled_rotation_decomposition(&x, 0.01).unwrap();
        assert_eq!((sr.dt, sr.dphi, sr.dpsi), (0.01, 0.0, 0.01));
        assert_eq!(sr.apply_linear(&x.q), [1.0, -0.01]);

        let rest = xs(&[0.4, 0.9], &[0.0, 0.0], 0.0, -1.0);
        let sr = scaled_rotation_decomposition(&rest, 0.01).unwrap();
        assert_eq!(sr.matrix, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(sr.dt, 0.4 * 0.01);

        let y = xs(&[0.0, 1.0], &[1.0, 0.0], 0.0, -0.5);
        let sr = scaled_rotation_decomposition(&y, 0.01).unwrap();
        assert_eq!((sr.dt, sr.dphi, sr.dpsi), (0.0, 0.01, 0.0));
        let e = sr.apply_exponential(&y.q);
        assert!(close(e[1], 0.01f64.exp(), 1e-15));
        assert!(scaled_rotation_decomposition(&xs(&[1.0], &[1.0], 0.0, 0.0), 0.1).is_err());
    }

    #[test]
    fn scaled_rotation_matches_runge_lenz_delta() {
        let sampler = OnShellSampler::new(Arc::new(kepler(Coupling::Constant(1.0))), 8);
        for x in sampler.draw(20) {
            let x = x.unwrap();
            let eps = 1e-3;
            let (y, d) =
                infinitesimal_transform(&runge_lenz_extended(), &x, eps, &GradientScheme::analytic())
                    .unwrap();
            let sr = scaled_rotation_decomposition(&x, eps).unwrap();
            let lin = sr.apply_linear(&x.q);
            assert!(close(lin[0], y.q[0], 1e-15) && close(lin[1], y.q[1], 1e-15));
            assert!(close(sr.dt, d.dt, 1e-18));
        }
    }

    #[test]
    fn subgroup_identity_rotation_gauge() {
        let x = xs(&[0.3, -1.2], &[0.7, 0.25], 2.0, -0.6);
        let id = conventional_subgroup_transform(&LinearGenerator::identity(2), &x).unwrap();
        assert_eq!(id.state, x);
        assert_eq!(id.hamiltonian_shift, 0.0);

        let ang = 0.4;
        let rot = conventional_subgroup_transform(&LinearGenerator::rotation(ang), &x).unwrap();
        let (s, c) = ang.sin_cos();
        let r = |v: &[f64]| [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
        for (a, b) in rot.state.q.iter().zip(r(&x.q)) {
            assert!(close(*a, b, 1e-15));
        }
        for (a, b) in rot.state.p.iter().zip(r(&x.p)) {
            assert!(close(*a, b, 1e-15));
        }
        assert_eq!(rot.hamiltonian_shift, 0.0);

        let g = conventional_subgroup_transform(&LinearGenerator::gauge(2, 0.75), &x).unwrap();
        assert_eq!(g.state.q, x.q);
        assert_eq!(g.state.p, x.p);
        assert_eq!(g.state.e, x.e + 0.75);
        assert_eq!(g.hamiltonian_shift, 0.75);
    }

    #[test]
    fn subgroup_moving_frame_and_singular() {
        let x = xs(&[1.0, 0.0], &[0.5, -0.5], 3.0, 0.25);
        let f = LinearGenerator::moving_frame(vec![0.1, 0.2]);
        let out = conventional_subgroup_transform(&f, &x).unwrap();
        assert!(close(out.state.q[0], 1.3, 1e-15) && close(out.state.q[1], 0.6, 1e-15));
        assert_eq!(out.state.p, x.p);
        assert!(close(out.hamiltonian_shift, 0.05 - 0.1, 1e-16));

        let singular = LinearGenerator {
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            ..LinearGenerator::identity(2)
        };
        assert!(matches!(
            conventional_subgroup_transform(&singular, &x),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn he_generator_is_euler_step() {
        let h = Arc::new(kepler(Coupling::Constant(1.0)));
        let he: Arc<dyn ExtendedHamiltonian> = Arc::new(standard_lift(h.clone()));
        let x = lift(
            &ConventionalState::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0).unwrap(),
            h.as_ref(),
        )
        .unwrap();
        let gen = Invariant::from_hamiltonian(he.clone());
        let (y, _) = infinitesimal_transform(&gen, &x, 1e-3, &GradientScheme::analytic()).unwrap();
        let v = extended_rhs(he.as_ref(), &x).unwrap();
        let euler = ExtendedState {
            q: x.q.iter().zip(&v.dq).map(|(a, b)| a + 1e-3 * b).collect(),
            p: x.p.iter().zip(&v.dp).map(|(a, b)| a + 1e-3 * b).collect(),
            t: x.t + 1e-3 * v.dt,
            e: x.e + 1e-3 * v.de,
        };
        assert_eq!(y, euler);
    }
}
