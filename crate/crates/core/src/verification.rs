//! End-to-end property checks of the extended formalism on the Kepler and
//! relativistic examples. Each criterion runs a small experiment and compares
//! the measured numbers against fixed bounds.
//!
//! Checks marked informational are printed for context and do not affect
//! the verdict.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brackets::{conservation_scan, Coordinate, ExtendedFunction, GradientScheme, OnShellSampler};
use crate::dynamics::{extended_rhs, integrate_conventional, integrate_extended, monitor, StepperConfig};
use crate::error::Result;
use crate::noether::{
    angular_momentum, coordinate, default_flow_config, finite_transform, flow_commutation_check,
    infinitesimal_transform, orbit_commutation_check, runge_lenz, runge_lenz_extended,
    scaled_rotation_decomposition, Invariant,
};
use crate::phase_space::{lift, ConventionalState, ExtendedState, Trajectory};
use crate::systems::{
    energy_branch, relativistic_conventional, relativistic_extended, ConventionalHamiltonian, Coupling,
    ExtendedHamiltonian, PotentialSpec, System,
};

pub const CRITERIA: usize = 10;

const SPAN_10_ORBITS: f64 = 20.0 * PI;
const STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    /// Bitwise identical; `value` is the number of differing components.
    Identical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub passed: bool,
    pub informational: bool,
}

impl Check {
    pub fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            value,
            bound,
            relation: Relation::AtMost,
            passed: value <= bound,
            informational: false,
        }
    }

    pub fn at_least(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            value,
            bound,
            relation: Relation::AtLeast,
            passed: value >= bound,
            informational: false,
        }
    }

    pub fn identical(label: impl Into<String>, differing: usize) -> Self {
        Self {
            label: label.into(),
            value: differing as f64,
            bound: 0.0,
            relation: Relation::Identical,
            passed: differing == 0,
            informational: false,
        }
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match (self.informational, self.passed) {
            (true, _) => "info",
            (false, true) => "ok",
            (false, false) => "FAIL",
        };
        match self.relation {
            Relation::AtMost => write!(
                f,
                "[{tag}] {}: {:.3e} <= {:.1e}",
                self.label, self.value, self.bound
            ),
            Relation::AtLeast => write!(
                f,
                "[{tag}] {}: {:.3e} >= {:.1e}",
                self.label, self.value, self.bound
            ),
            Relation::Identical => write!(f, "[{tag}] {}: {} differing components", self.label, self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: String,
    pub checks: Vec<Check>,
    /// Set when the experiment itself failed to run.
    pub error: Option<String>,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().filter(|c| !c.informational).all(|c| c.passed)
    }

    /// One summary line, e.g. `PASS  C3 angular momentum conservation`.
    pub fn summary(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        format!("{verdict}  C{:<2} {}", self.id, self.title)
    }
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "constraint He = 0 conserved along the extended flow",
        2 => "conventional and standard-lift runs agree, t(s) = s",
        3 => "angular momentum conserved, energy drifts for time-dependent mu",
        4 => "Runge-Lenz value, conservation and agreement of both forms",
        5 => "bracket gate [He, I] = 0 admits invariants, rejects q1",
        6 => "infinitesimal Runge-Lenz symmetry: time shift and scaled rotation",
        7 => "symmetry flows commute with the dynamics",
        8 => "finite rotation generated by angular momentum",
        9 => "relativistic particle: proper time, energy branch, reparametrization",
        10 => "He generates the s-shift: one explicit Euler step",
        _ => "unknown criterion",
    }
}

/// Run one criterion by number (1..=10).
pub fn run(id: usize) -> CriterionOutcome {
    let result = match id {
        1 => constraint_conservation(),
        2 => gauge_equivalence(),
        3 => angular_momentum_conservation(),
        4 => runge_lenz_conservation(),
        5 => noether_gate(),
        6 => symmetry_rules(),
        7 => flow_commutation(),
        8 => finite_rotation(),
        9 => relativistic_consistency(),
        10 => s_shift_symmetry(),
        _ => Err(crate::Error::config(format!("no criterion {id}"))),
    };
    let (checks, error) = match result {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionOutcome {
        id,
        title: title(id).to_string(),
        checks,
        error,
    }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=CRITERIA).map(run).collect()
}

fn kepler_system() -> System {
    System::kepler(Coupling::Constant(1.0))
}

fn timedep_system() -> System {
    System::kepler(Coupling::Sinusoidal {
        amplitude: 0.1,
        omega: 1.0,
    })
}

fn on_shell(system: &System, q: [f64; 2], p: [f64; 2]) -> Result<ExtendedState> {
    lift(
        &ConventionalState::new(q.to_vec(), p.to_vec(), 0.0)?,
        system.conventional.as_ref(),
    )
}

fn eccentric(system: &System) -> Result<ExtendedState> {
    on_shell(system, [1.0, 0.0], [0.0, 1.2])
}

fn circular(system: &System) -> Result<ExtendedState> {
    on_shell(system, [1.0, 0.0], [0.0, 1.0])
}

fn max_abs_constraint(he: &dyn ExtendedHamiltonian, tr: &Trajectory) -> Result<f64> {
    Ok(monitor(tr, "He", |x| he.eval(x))?.max_abs_deviation)
}

fn constraint_conservation() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let x0 = eccentric(&sys)?;
    let he = sys.extended.as_ref();
    let drift = |step: f64| -> Result<f64> {
        max_abs_constraint(
            he,
            &integrate_extended(he, &x0, SPAN_10_ORBITS, &StepperConfig::rk4(step))?,
        )
    };
    let (coarse, base, fine) = (drift(2.0 * STEP)?, drift(STEP)?, drift(0.5 * STEP)?);
    Ok(vec![
        Check::at_most("max |He| over 20pi, rk4 h=1e-3", base, 1e-8),
        Check::at_least("drift(h=1e-3) / drift(h=5e-4)", base / fine, 12.0),
        Check::at_least("drift(h=2e-3) / drift(h=1e-3)", coarse / base, 12.0).info(),
    ])
}

fn gauge_equivalence() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let x0 = eccentric(&sys)?;
    let cfg = StepperConfig::rk4(STEP);
    let conv = integrate_conventional(
        sys.conventional.as_ref(),
        &ConventionalState::new(x0.q.clone(), x0.p.clone(), x0.t)?,
        SPAN_10_ORBITS,
        &cfg,
    )?;
    let ext = integrate_extended(sys.extended.as_ref(), &x0, SPAN_10_ORBITS, &cfg)?;
    let mut qp = 0.0f64;
    let mut ts = 0.0f64;
    for (a, b) in conv.samples().iter().zip(ext.samples()) {
        for (u, v) in a
            .state
            .q
            .iter()
            .chain(&a.state.p)
            .zip(b.state.q.iter().chain(&b.state.p))
        {
            qp = qp.max((u - v).abs());
        }
        qp = qp.max((a.state.t - b.state.t).abs());
        ts = ts.max((b.state.t - b.param).abs());
    }
    Ok(vec![
        Check::identical("sample count mismatch", usize::from(conv.len() != ext.len())),
        Check::at_most("max |(q,p,t)_conv - (q,p,t)_ext|", qp, 1e-8),
        Check::at_most("max |t(s) - s|", ts, 1e-8),
    ])
}

fn angular_momentum_conservation() -> Result<Vec<Check>> {
    let l = angular_momentum();
    let cfg = StepperConfig::rk4(STEP);
    let mut checks = Vec::new();
    for (label, sys) in [
        ("autonomous", kepler_system()),
        ("mu(t)=1+0.1 sin t", timedep_system()),
    ] {
        let tr = integrate_extended(sys.extended.as_ref(), &eccentric(&sys)?, SPAN_10_ORBITS, &cfg)?;
        let d = monitor(&tr, "L", |x| l.eval(x))?;
        checks.push(Check::at_most(
            format!("L drift, {label}"),
            d.max_abs_deviation,
            1e-8,
        ));
        if !sys.name.ends_with("timedep") {
            continue;
        }
        let e = monitor(&tr, "e", |x| Ok(x.e))?;
        checks.push(Check::at_least(
            format!("e drift, {label}"),
            e.max_abs_deviation,
            1e-3,
        ));
    }
    Ok(checks)
}

fn runge_lenz_conservation() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let x0 = eccentric(&sys)?;
    let (rl, rlx) = (runge_lenz(1.0), runge_lenz_extended());
    let tr = integrate_extended(
        sys.extended.as_ref(),
        &x0,
        SPAN_10_ORBITS,
        &StepperConfig::rk4(STEP),
    )?;
    let drift = monitor(&tr, "RL", |x| rl.eval(x))?;
    let mut agree = 0.0f64;
    for s in tr.samples() {
        agree = agree.max((rl.eval(&s.state)? - rlx.eval(&s.state)?).abs());
    }
    Ok(vec![
        Check::at_most(
            "|RL(eccentric IC) - (-0.44)|",
            (rl.eval(&x0)? + 0.44).abs(),
            1e-12,
        ),
        Check::at_most("RL drift over 20pi", drift.max_abs_deviation, 1e-7),
        Check::at_most("max |RL_e-form - RL| on trajectory", agree, 1e-12),
    ])
}

fn noether_gate() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let sampler = OnShellSampler::new(sys.conventional.clone(), 42);
    let he = sys.extended.as_ref();
    let mut checks = Vec::new();
    let candidates = [angular_momentum(), runge_lenz(1.0), runge_lenz_extended()];
    for inv in &candidates {
        for (scheme, bound, tag) in [
            (GradientScheme::central_difference(), 1e-5, "fd"),
            (GradientScheme::analytic(), 1e-10, "analytic"),
        ] {
            let st = conservation_scan(inv, he, &sampler, 100, &scheme);
            checks.push(Check::identical(
                format!("{} {tag}: skipped samples", inv.name()),
                st.failures,
            ));
            checks.push(Check::at_most(
                format!("{} {tag}: max |[He, I]|", inv.name()),
                st.max,
                bound,
            ));
        }
    }
    let q1 = coordinate(Coordinate::Q(0));
    for (scheme, tag) in [
        (GradientScheme::central_difference(), "fd"),
        (GradientScheme::analytic(), "analytic"),
    ] {
        let st = conservation_scan(&q1, he, &sampler, 100, &scheme);
        checks.push(Check::at_least(
            format!("q1 control {tag}: max |[He, q1]|"),
            st.max,
            1e-1,
        ));
    }
    Ok(checks)
}

fn symmetry_rules() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let x = circular(&sys)?;
    let rlx = runge_lenz_extended();
    let scheme = GradientScheme::analytic();
    let mut dt_err = 0.0f64;
    let mut linear_err = 0.0f64;
    let mut flow_ratio = Vec::new();
    let mut exp_ratio = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let (y, delta) = infinitesimal_transform(&rlx, &x, eps, &scheme)?;
        let sr = scaled_rotation_decomposition(&x, eps)?;
        dt_err = dt_err
            .max((delta.dt - eps * x.q[0]).abs())
            .max((sr.dt - eps * x.q[0]).abs());
        let lin = sr.apply_linear(&x.q);
        linear_err = linear_err
            .max((lin[0] - y.q[0]).abs())
            .max((lin[1] - y.q[1]).abs());

        let finite = finite_transform(&rlx, &x, eps, &default_flow_config(eps))?;
        flow_ratio.push(finite.max_abs_diff(&y) / (eps * eps));
        let ex = sr.apply_exponential(&x.q);
        exp_ratio.push((ex[0] - lin[0]).abs().max((ex[1] - lin[1]).abs()) / (eps * eps));
    }
    let spread = |v: &[f64]| {
        let hi = v.iter().copied().fold(f64::MIN, f64::max);
        let lo = v.iter().copied().fold(f64::MAX, f64::min);
        hi / lo
    };
    Ok(vec![
        Check::at_most("max |dt - eps q1|", dt_err, 1e-15),
        Check::at_most("max |(1 + A) q - (q + dq)|", linear_err, 1e-15),
        Check::at_most(
            "spread of |finite - infinitesimal| / eps^2",
            spread(&flow_ratio),
            2.0,
        ),
        Check::at_most(
            "spread of |exp(A) q - (1 + A) q| / eps^2",
            spread(&exp_ratio),
            2.0,
        ),
    ])
}

fn flow_commutation() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let x0 = eccentric(&sys)?;
    let he = sys.extended.as_ref();
    let cfg = StepperConfig::rk4(STEP);
    let residual = |inv: &Invariant, eps: f64| {
        flow_commutation_check(inv, he, &x0, eps, 1.0, &cfg, &default_flow_config(eps))
    };
    let orbit = orbit_commutation_check(
        &runge_lenz_extended(),
        he,
        &x0,
        1e-2,
        1.0,
        &cfg,
        &default_flow_config(1e-2),
    )?;
    Ok(vec![
        Check::at_most(
            "angular momentum, eps=0.3, ds=1",
            residual(&angular_momentum(), 0.3)?,
            1e-8,
        ),
        Check::at_most(
            "runge-lenz-extended, eps=1e-2, ds=1",
            residual(&runge_lenz_extended(), 1e-2)?,
            1e-8,
        ),
        Check::at_least(
            "q1 control, eps=0.3, ds=1",
            residual(&coordinate(Coordinate::Q(0)), 0.3)?,
            1e-3,
        ),
        Check::at_most(
            "runge-lenz (mu/r form), eps=1e-2, ds=1",
            residual(&runge_lenz(1.0), 1e-2)?,
            1e-8,
        )
        .info(),
        Check::at_most("runge-lenz-extended, orbit-matched residual", orbit, 1e-8).info(),
    ])
}

fn finite_rotation() -> Result<Vec<Check>> {
    let sys = kepler_system();
    let eps = PI / 2.0;
    let (s, c) = eps.sin_cos();
    let rot = |v: &[f64]| [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
    let mut checks = Vec::new();
    for (label, x) in [("circular", circular(&sys)?), ("eccentric", eccentric(&sys)?)] {
        let y = finite_transform(&angular_momentum(), &x, eps, &default_flow_config(eps))?;
        let (rq, rp) = (rot(&x.q), rot(&x.p));
        let err = (0..2)
            .map(|i| (y.q[i] - rq[i]).abs().max((y.p[i] - rp[i]).abs()))
            .fold((y.t - x.t).abs().max((y.e - x.e).abs()), f64::max);
        checks.push(Check::at_most(
            format!("eps=pi/2 vs closed-form rotation, {label}"),
            err,
            1e-9,
        ));
    }
    Ok(checks)
}

fn relativistic_consistency() -> Result<Vec<Check>> {
    let free = relativistic_extended(1.0, 1.0, PotentialSpec::Zero.build(), 2)?;
    let x = ExtendedState::new(vec![0.0, 0.0], vec![0.6, 0.8], 0.0, SQRT_2)?;
    let rate = extended_rhs(&free, &x)?.dt;
    let mut checks = vec![Check::at_most("|dt/ds - sqrt 2|", (rate - SQRT_2).abs(), 1e-12)];

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut branch_err = 0.0f64;
    for spec in [
        PotentialSpec::Zero,
        PotentialSpec::Coulomb(1.0),
        PotentialSpec::Constant(5.0),
    ] {
        let he = relativistic_extended(1.0, 1.0, spec.build(), 2)?;
        let h = relativistic_conventional(1.0, 1.0, spec.build(), 2)?;
        for _ in 0..100 {
            let q = [rng.gen_range(0.2..3.0), rng.gen_range(-3.0..3.0)];
            // |p| <= 10
            let (pm, ang) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..2.0 * PI));
            let p = [pm * ang.cos(), pm * ang.sin()];
            let t = rng.gen_range(0.0..10.0);
            branch_err = branch_err.max((energy_branch(&he, &q, &p, t)? - h.eval(&q, &p, t)?).abs());
        }
    }
    checks.push(Check::at_most(
        "max |energy_branch - H_conv| (300 points)",
        branch_err,
        1e-12,
    ));

    for spec in [PotentialSpec::Zero, PotentialSpec::Coulomb(0.5)] {
        let sys = System::relativistic(1.0, 1.0, spec.build(), 2)?;
        let x0 = on_shell(&sys, [1.0, 0.0], [0.6, 0.8])?;
        let cfg = StepperConfig::rk4(STEP);
        let ext = integrate_extended(sys.extended.as_ref(), &x0, 5.0, &cfg)?;
        let t_end = ext.last().map(|s| s.state.t).unwrap_or(0.0);
        let conv = integrate_conventional(
            sys.conventional.as_ref(),
            &ConventionalState::new(x0.q.clone(), x0.p.clone(), 0.0)?,
            t_end,
            &cfg,
        )?;
        let mut err = 0.0f64;
        for s in ext.samples() {
            let t = s.state.t.min(t_end);
            let y = conv.interpolate(t)?;
            for (u, v) in s.state.q.iter().chain(&s.state.p).zip(y.q.iter().chain(&y.p)) {
                err = err.max((u - v).abs());
            }
        }
        checks.push(Check::at_most(
            format!("extended at t(s) vs conventional, V={spec}"),
            err,
            1e-6,
        ));
    }
    Ok(checks)
}

fn s_shift_symmetry() -> Result<Vec<Check>> {
    let kep = kepler_system();
    let rel = System::relativistic(1.0, 1.0, PotentialSpec::Coulomb(0.5).build(), 2)?;
    let mut checks = Vec::new();
    for (label, sys, x) in [
        ("kepler circular", &kep, circular(&kep)?),
        ("kepler eccentric", &kep, eccentric(&kep)?),
        ("relativistic", &rel, on_shell(&rel, [1.0, 0.0], [0.6, 0.8])?),
    ] {
        let gen = Invariant::from_hamiltonian(sys.extended.clone());
        let ds = 1e-3;
        let (shifted, _) = infinitesimal_transform(&gen, &x, ds, &GradientScheme::analytic())?;
        let v = extended_rhs(sys.extended.as_ref(), &x)?;
        let euler: Vec<f64> = x
            .to_vec()
            .iter()
            .zip(v.to_vec())
            .map(|(a, b)| a + ds * b)
            .collect();
        let differing = shifted
            .to_vec()
            .iter()
            .zip(&euler)
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();
        checks.push(Check::identical(
            format!("{label}: transform vs Euler step"),
            differing,
        ));
    }
    Ok(checks)
}
