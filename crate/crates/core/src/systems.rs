//! Concrete Hamiltonians and the lift of a conventional Hamiltonian H(q, p, t)
//! to the extended form He = H − e.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brackets::ExtendedFunction;
use crate::error::{Error, Result};
use crate::phase_space::{ExtendedState, Gradient};

/// Radius below which inverse-power potentials refuse to evaluate.
pub const SINGULARITY_GUARD: f64 = 1e-8;

/// Central-difference step for couplings without an analytic derivative.
pub const COUPLING_FD_STEP: f64 = 1e-6;

/// A Hamiltonian H(q, p, t) with its partial derivatives.
pub trait ConventionalHamiltonian: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn eval(&self, q: &[f64], p: &[f64], t: f64) -> Result<f64>;
    /// (∂H/∂q, ∂H/∂p, ∂H/∂t); the `de` slot is always zero.
    fn gradient(&self, q: &[f64], p: &[f64], t: f64) -> Result<Gradient>;
}

/// A Hamiltonian He(q, p, t, e) on extended phase space.
///
/// Physical states satisfy He = 0; that condition is preserved by the flow
/// rather than enforced.
pub trait ExtendedHamiltonian: ExtendedFunction {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &ExtendedState) -> Result<Gradient>;
}

fn radius(what: &str, q: &[f64]) -> Result<f64> {
    let r = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r < SINGULARITY_GUARD {
        return Err(Error::Singularity {
            what: what.to_string(),
            r,
            guard: SINGULARITY_GUARD,
        });
    }
    Ok(r)
}

fn check_dim(expected: usize, q: &[f64], p: &[f64]) -> Result<()> {
    for got in [q.len(), p.len()] {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    Ok(())
}

/// Serializable description of a coupling strength μ(t).
///
/// Text form: `const:<v>` for μ = v, `sin:<a>,<ω>` for μ = 1 + a·sin(ωt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CouplingSpec {
    Constant(f64),
    Sinusoidal { amplitude: f64, omega: f64 },
}

impl fmt::Display for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingSpec::Constant(v) => write!(f, "const:{v}"),
            CouplingSpec::Sinusoidal { amplitude, omega } => write!(f, "sin:{amplitude},{omega}"),
        }
    }
}

impl FromStr for CouplingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("bad coupling `{s}`, expected const:<v> or sin:<a>,<w>"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "const" => Ok(CouplingSpec::Constant(num(rest)?)),
            "sin" => {
                let (a, w) = rest.split_once(',').ok_or_else(bad)?;
                Ok(CouplingSpec::Sinusoidal {
                    amplitude: num(a)?,
                    omega: num(w)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for CouplingSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CouplingSpec> for String {
    fn from(c: CouplingSpec) -> String {
        c.to_string()
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Gravitational coupling μ(t) of the Kepler system.
#[derive(Clone)]
pub enum Coupling {
    Constant(f64),
    /// μ(t) = 1 + amplitude·sin(omega·t)
    Sinusoidal {
        amplitude: f64,
        omega: f64,
    },
    /// Arbitrary μ(t); without `derivative`, μ′ is taken by central differences.
    Custom {
        mu: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Constant(v) => write!(f, "Constant({v})"),
            Coupling::Sinusoidal { amplitude, omega } => {
                write!(f, "Sinusoidal {{ amplitude: {amplitude}, omega: {omega} }}")
            }
            Coupling::Custom { derivative, .. } => {
                write!(f, "Custom {{ analytic_derivative: {} }}", derivative.is_some())
            }
        }
    }
}

impl From<CouplingSpec> for Coupling {
    fn from(spec: CouplingSpec) -> Self {
        match spec {
            CouplingSpec::Constant(v) => Coupling::Constant(v),
            CouplingSpec::Sinusoidal { amplitude, omega } => Coupling::Sinusoidal { amplitude, omega },
        }
    }
}

impl Coupling {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Coupling::Constant(v) => *v,
            Coupling::Sinusoidal { amplitude, omega } => 1.0 + amplitude * (omega * t).sin(),
            Coupling::Custom { mu, .. } => mu(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Coupling::Constant(_) => 0.0,
            Coupling::Sinusoidal { amplitude, omega } => amplitude * omega * (omega * t).cos(),
            Coupling::Custom {
                derivative: Some(d), ..
            } => d(t),
            Coupling::Custom { mu, .. } => {
                let h = COUPLING_FD_STEP * t.abs().max(1.0);
                (mu(t + h) - mu(t - h)) / (2.0 * h)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coupling::Constant(_))
    }
}

/// Planar Kepler problem H = ½|p|² − μ(t)/r.
#[derive(Debug, Clone)]
pub struct Kepler {
    coupling: Coupling,
    name: String,
}

pub fn kepler(coupling: Coupling) -> Kepler {
    let name = if coupling.is_constant() {
        "kepler"
    } else {
        "kepler-timedep"
    };
    Kepler {
        coupling,
        name: name.to_string(),
    }
}

impl Kepler {
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }
}

impl ConventionalHamiltonian for Kepler {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, q: &[f64], p: &[f64], t: f64) -> Result<f64> {
        check_dim(2, q, p)?;
        let r = radius("kepler", q)?;
        let kinetic = 0.5 * p[0] * p[0] + 0.5 * p[1] * p[1];
        Ok(kinetic - self.coupling.value(t) / r)
    }

    fn gradient(&self, q: &[f64], p: &[f64], t: f64) -> Result<Gradient> {
        check_dim(2, q, p)?;
        let r = radius("kepler", q)?;
        let mu = self.coupling.value(t);
        let r3 = r * r * r;
        Ok(Gradient {
            dq: vec![mu * q[0] / r3, mu * q[1] / r3],
            dp: p.to_vec(),
            dt: -self.coupling.derivative(t) / r,
            de: 0.0,
        })
    }
}

/// H = |p|²/(2m) in n dimensions.
#[derive(Debug, Clone)]
pub struct FreeParticle {
    n: usize,
    mass: f64,
}

impl FreeParticle {
    pub fn new(n: usize) -> Self {
        Self { n, mass: 1.0 }
    }

    pub fn with_mass(n: usize, mass: f64) -> Self {
        Self { n, mass }
    }
}

impl ConventionalHamiltonian for FreeParticle {
    fn name(&self) -> &str {
        "free"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, q: &[f64], p: &[f64], _t: f64) -> Result<f64> {
        check_dim(self.n, q, p)?;
        Ok(p.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.mass))
    }

    fn gradient(&self, q: &[f64], p: &[f64], _t: f64) -> Result<Gradient> {
        check_dim(self.n, q, p)?;
        Ok(Gradient {
            dq: vec![0.0; self.n],
            dp: p.iter().map(|v| v / self.mass).collect(),
            dt: 0.0,
            de: 0.0,
        })
    }
}

/// He = H(q, p, t) − e, i.e. the extended Hamiltonian in the gauge dt/ds = 1.
#[derive(Clone)]
pub struct StandardLift {
    inner: Arc<dyn ConventionalHamiltonian>,
    name: String,
}

pub fn standard_lift(h: Arc<dyn ConventionalHamiltonian>) -> StandardLift {
    let name = format!("{}-lifted", h.name());
    StandardLift { inner: h, name }
}

impl StandardLift {
    pub fn conventional(&self) -> &Arc<dyn ConventionalHamiltonian> {
        &self.inner
    }
}

impl ExtendedFunction for StandardLift {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        Ok(self.inner.eval(&x.q, &x.p, x.t)? - x.e)
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        Some(ExtendedHamiltonian::gradient(self, x))
    }
}

impl ExtendedHamiltonian for StandardLift {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn gradient(&self, x: &ExtendedState) -> Result<Gradient> {
        let mut g = self.inner.gradient(&x.q, &x.p, x.t)?;
        g.de = -1.0;
        Ok(g)
    }
}

/// External scalar potential V(q, t).
pub trait Potential: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, q: &[f64], t: f64) -> Result<f64>;
    fn grad_q(&self, q: &[f64], t: f64) -> Result<Vec<f64>>;
    fn dt(&self, q: &[f64], t: f64) -> Result<f64>;
}

/// Serializable potential choice. Text form: `zero`, `const:<v>`, `coulomb:<k>` (V = −k/r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PotentialSpec {
    Zero,
    Constant(f64),
    Coulomb(f64),
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Zero => write!(f, "zero"),
            PotentialSpec::Constant(v) => write!(f, "const:{v}"),
            PotentialSpec::Coulomb(k) => write!(f, "coulomb:{k}"),
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::config(format!(
                "bad potential `{s}`, expected zero, const:<v> or coulomb:<k>"
            ))
        };
        if s.trim() == "zero" {
            return Ok(PotentialSpec::Zero);
        }
        let (kind, v) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "const" => Ok(PotentialSpec::Constant(v)),
            "coulomb" => Ok(PotentialSpec::Coulomb(v)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for PotentialSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PotentialSpec> for String {
    fn from(p: PotentialSpec) -> String {
        p.to_string()
    }
}

impl PotentialSpec {
    pub fn build(self) -> Arc<dyn Potential> {
        match self {
            PotentialSpec::Zero => Arc::new(ConstantPotential(0.0)),
            PotentialSpec::Constant(v) => Arc::new(ConstantPotential(v)),
            PotentialSpec::Coulomb(k) => Arc::new(Coulomb { strength: k }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential(pub f64);

impl Potential for ConstantPotential {
    fn name(&self) -> &str {
        "const"
    }
    fn eval(&self, _q: &[f64], _t: f64) -> Result<f64> {
        Ok(self.0)
    }
    fn grad_q(&self, q: &[f64], _t: f64) -> Result<Vec<f64>> {
        Ok(vec![0.0; q.len()])
    }
    fn dt(&self, _q: &[f64], _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// V = −strength / r.
#[derive(Debug, Clone, Copy)]
pub struct Coulomb {
    pub strength: f64,
}

impl Potential for Coulomb {
    fn name(&self) -> &str {
        "coulomb"
    }
    fn eval(&self, q: &[f64], _t: f64) -> Result<f64> {
        Ok(-self.strength / radius("coulomb potential", q)?)
    }
    fn grad_q(&self, q: &[f64], _t: f64) -> Result<Vec<f64>> {
        let r = radius("coulomb potential", q)?;
        let r3 = r * r * r;
        Ok(q.iter().map(|v| self.strength * v / r3).collect())
    }
    fn dt(&self, _q: &[f64], _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

fn check_mass_speed(mass: f64, c: f64) -> Result<()> {
    if !(mass > 0.0 && c > 0.0 && mass.is_finite() && c.is_finite()) {
        return Err(Error::config(format!(
            "relativistic particle needs m > 0 and c > 0, got m = {mass}, c = {c}"
        )));
    }
    Ok(())
}

/// Relativistic point particle in proper-time parametrization:
/// He = [|p|² − ((e − V)/c)²]/(2m) + ½mc².
///
/// On shell, dt/ds = −∂He/∂e = (e − V)/(mc²) = γ.
#[derive(Clone)]
pub struct RelativisticExtended {
    mass: f64,
    c: f64,
    n: usize,
    potential: Arc<dyn Potential>,
}

pub fn relativistic_extended(
    mass: f64,
    c: f64,
    potential: Arc<dyn Potential>,
    n: usize,
) -> Result<RelativisticExtended> {
    check_mass_speed(mass, c)?;
    Ok(RelativisticExtended {
        mass,
        c,
        n,
        potential,
    })
}

impl RelativisticExtended {
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn speed_of_light(&self) -> f64 {
        self.c
    }

    /// Rest energy mc², the natural energy scale of the system.
    pub fn rest_energy(&self) -> f64 {
        self.mass * self.c * self.c
    }
}

impl ExtendedFunction for RelativisticExtended {
    fn name(&self) -> &str {
        "relativistic"
    }

    fn eval(&self, x: &ExtendedState) -> Result<f64> {
        check_dim(self.n, &x.q, &x.p)?;
        let v = self.potential.eval(&x.q, x.t)?;
        let p2: f64 = x.p.iter().map(|v| v * v).sum();
        let w = (x.e - v) / self.c;
        Ok((p2 - w * w) / (2.0 * self.mass) + 0.5 * self.mass * self.c * self.c)
    }

    fn analytic_gradient(&self, x: &ExtendedState) -> Option<Result<Gradient>> {
        Some(ExtendedHamiltonian::gradient(self, x))
    }
}

impl ExtendedHamiltonian for RelativisticExtended {
    fn dim(&self) -> usize {
        self.n
    }

    fn gradient(&self, x: &ExtendedState) -> Result<Gradient> {
        check_dim(self.n, &x.q, &x.p)?;
        let v = self.potential.eval(&x.q, x.t)?;
        // (e − V)/(mc²) multiplies every derivative of V
        let k = (x.e - v) / self.rest_energy();
        Ok(Gradient {
            dq: self
                .potential
                .grad_q(&x.q, x.t)?
                .into_iter()
                .map(|g| k * g)
                .collect(),
            dp: x.p.iter().map(|v| v / self.mass).collect(),
            dt: k * self.potential.dt(&x.q, x.t)?,
            de: -k,
        })
    }
}

/// The equivalent conventional Hamiltonian H = √(|p|²c² + m²c⁴) + V(q, t).
#[derive(Clone)]
pub struct RelativisticConventional {
    mass: f64,
    c: f64,
    n: usize,
    potential: Arc<dyn Potential>,
}

pub fn relativistic_conventional(
    mass: f64,
    c: f64,
    potential: Arc<dyn Potential>,
    n: usize,
) -> Result<RelativisticConventional> {
    check_mass_speed(mass, c)?;
    Ok(RelativisticConventional {
        mass,
        c,
        n,
        potential,
    })
}

impl RelativisticConventional {
    fn kinetic(&self, p: &[f64]) -> f64 {
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let mc2 = self.mass * self.c * self.c;
        (p2 * self.c * self.c + mc2 * mc2).sqrt()
    }
}

impl ConventionalHamiltonian for RelativisticConventional {
    fn name(&self) -> &str {
        "relativistic-conventional"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, q: &[f64], p: &[f64], t: f64) -> Result<f64> {
        check_dim(self.n, q, p)?;
        Ok(self.kinetic(p) + self.potential.eval(q, t)?)
    }

    fn gradient(&self, q: &[f64], p: &[f64], t: f64) -> Result<Gradient> {
        check_dim(self.n, q, p)?;
        let kin = self.kinetic(p);
        let c2 = self.c * self.c;
        Ok(Gradient {
            dq: self.potential.grad_q(q, t)?,
            dp: p.iter().map(|v| v * c2 / kin).collect(),
            dt: self.potential.dt(q, t)?,
            de: 0.0,
        })
    }
}

/// Solve He = 0 for e on the branch e − V > 0.
pub fn energy_branch(he: &RelativisticExtended, q: &[f64], p: &[f64], t: f64) -> Result<f64> {
    check_dim(he.n, q, p)?;
    let v = he.potential.eval(q, t)?;
    let p2: f64 = p.iter().map(|v| v * v).sum();
    let mc = he.mass * he.c;
    Ok(v + he.c * (p2 + mc * mc).sqrt())
}

/// A system as used by the drivers: a conventional Hamiltonian, the extended
/// Hamiltonian whose zero set holds the physical states, and an energy scale
/// for tolerance control.
#[derive(Clone)]
pub struct System {
    pub name: String,
    pub conventional: Arc<dyn ConventionalHamiltonian>,
    pub extended: Arc<dyn ExtendedHamiltonian>,
    pub energy_scale: f64,
}

impl System {
    /// Kepler system in the standard lift.
    pub fn kepler(coupling: Coupling) -> Self {
        let h: Arc<dyn ConventionalHamiltonian> = Arc::new(kepler(coupling));
        Self::lifted(h)
    }

    pub fn lifted(h: Arc<dyn ConventionalHamiltonian>) -> Self {
        Self {
            name: h.name().to_string(),
            extended: Arc::new(standard_lift(h.clone())),
            conventional: h,
            energy_scale: 1.0,
        }
    }

    pub fn relativistic(mass: f64, c: f64, potential: Arc<dyn Potential>, n: usize) -> Result<Self> {
        let he = relativistic_extended(mass, c, potential.clone(), n)?;
        let h = relativistic_conventional(mass, c, potential, n)?;
        Ok(Self {
            name: "relativistic".into(),
            energy_scale: he.rest_energy(),
            conventional: Arc::new(h),
            extended: Arc::new(he),
        })
    }

    pub fn dim(&self) -> usize {
        self.conventional.dim()
    }
}

/// Parameters understood by the built-in system factories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Kepler coupling; `None` picks the system's own default.
    pub mu: Option<CouplingSpec>,
    pub mass: f64,
    pub c: f64,
    pub potential: PotentialSpec,
    /// Configuration-space dimension for dimension-agnostic systems.
    pub dim: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            mu: None,
            mass: 1.0,
            c: 1.0,
            potential: PotentialSpec::Zero,
            dim: 2,
        }
    }
}

pub type SystemFactory = Arc<dyn Fn(&SystemParams) -> Result<System> + Send + Sync>;

/// Name → factory table; holds `kepler`, `kepler-timedep`, `relativistic` and
/// `free` by default and accepts user registrations.
#[derive(Clone)]
pub struct SystemRegistry {
    factories: BTreeMap<String, SystemFactory>,
}

impl Default for SystemRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl SystemRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("kepler", |p: &SystemParams| {
            let spec = p.mu.unwrap_or(CouplingSpec::Constant(1.0));
            Ok(System::kepler(spec.into()))
        });
        reg.register("kepler-timedep", |p: &SystemParams| {
            let spec = p.mu.unwrap_or(CouplingSpec::Sinusoidal {
                amplitude: 0.1,
                omega: 1.0,
            });
            Ok(System::kepler(spec.into()))
        });
        reg.register("relativistic", |p: &SystemParams| {
            System::relativistic(p.mass, p.c, p.potential.build(), p.dim)
        });
        reg.register("free", |p: &SystemParams| {
            Ok(System::lifted(Arc::new(FreeParticle::with_mass(p.dim, p.mass))))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&SystemParams) -> Result<System> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &SystemParams) -> Result<System> {
        let f = self.factories.get(name).ok_or_else(|| {
            Error::config(format!(
                "unknown system `{name}` (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        f(params)
    }
}
