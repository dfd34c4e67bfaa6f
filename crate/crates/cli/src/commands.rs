use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;

use extham_core::brackets::{conservation_scan, ExtendedFunction, OnShellSampler};
use extham_core::dynamics::{
    integrate_conventional, integrate_extended, monitor, DriftReport, StepperConfig,
};
use extham_core::noether::{
    builtin_invariant, finite_transform, flow_commutation_check, infinitesimal_transform,
    orbit_commutation_check, scaled_rotation_decomposition, Invariant,
};
use extham_core::phase_space::{lift, ConventionalState, ExtendedState, Trajectory};
use extham_core::systems::{CouplingSpec, System, SystemRegistry};
use extham_core::verification::{self, Check};

use crate::config::{Parametrization, ScenarioConfig, TransformMode};
use crate::report::{BracketEntry, CheckReport, SimulationSummary, SymmetryEntry};
use crate::CliError;

fn build_system(cfg: &ScenarioConfig) -> Result<System, CliError> {
    Ok(SystemRegistry::with_builtins().build(&cfg.system, &cfg.system_params())?)
}

/// The constant coupling used by the `runge-lenz` invariant; for a
/// time-dependent coupling this is its mean value 1, and the invariant is
/// then expected to fail.
fn runge_lenz_mu(cfg: &ScenarioConfig) -> f64 {
    match cfg.mu {
        Some(CouplingSpec::Constant(v)) => v,
        _ => 1.0,
    }
}

fn invariants(cfg: &ScenarioConfig, system: &System) -> Result<Vec<Invariant>, CliError> {
    let mu = runge_lenz_mu(cfg);
    cfg.invariants
        .iter()
        .map(|name| builtin_invariant(name, system, mu).map_err(CliError::from))
        .collect()
}

fn initial_state(cfg: &ScenarioConfig, system: &System) -> Result<ExtendedState, CliError> {
    let conv = ConventionalState::new(cfg.q.clone(), cfg.p.clone(), cfg.t0)?;
    let mut x = lift(&conv, system.conventional.as_ref())?;
    if let Some(e) = cfg.e {
        x.e = e;
    }
    Ok(x)
}

/// Energy-like quantities are compared on the system's energy scale.
fn drift_bound(cfg: &ScenarioConfig, system: &System, name: &str) -> f64 {
    match name {
        "hamiltonian" | "he" | "energy" | "e" => cfg.drift_tol * system.energy_scale,
        _ => cfg.drift_tol,
    }
}

fn write_csv(traj: &Trajectory, cfg: &ScenarioConfig) -> Result<(), CliError> {
    if let Some(path) = &cfg.out_csv {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        traj.write_csv(BufWriter::new(file))
            .map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn run_simulate(cfg: ScenarioConfig) -> Result<CheckReport, CliError> {
    let system = build_system(&cfg)?;
    let invs = invariants(&cfg, &system)?;
    let stepper = cfg.stepper.scaled(system.energy_scale);
    let x0 = initial_state(&cfg, &system)?;
    let traj = match cfg.param {
        Parametrization::T => {
            if cfg.e.is_some() {
                tracing::warn!("initial e is ignored by the conventional parametrization");
            }
            let state = ConventionalState::new(x0.q.clone(), x0.p.clone(), x0.t)?;
            integrate_conventional(system.conventional.as_ref(), &state, cfg.span, &stepper)?
        }
        Parametrization::S => integrate_extended(system.extended.as_ref(), &x0, cfg.span, &stepper)?,
    };
    write_csv(&traj, &cfg)?;

    let mut report = CheckReport::new("simulate", None);
    if let (Some(first), Some(last)) = (traj.first(), traj.last()) {
        report.simulation = Some(SimulationSummary {
            samples: traj.len(),
            param_end: last.param,
            t_end: last.state.t,
            mean_dt_dparam: (last.state.t - first.state.t) / (last.param - first.param),
        });
    }
    let residual_name = match cfg.param {
        Parametrization::S => "He",
        Parametrization::T => "H - e_integrated",
    };
    let residual = monitor_residual(&traj, residual_name);
    report.verdicts.push(Check::at_most(
        format!("{residual_name} drift"),
        residual.max_abs_deviation,
        cfg.drift_tol * system.energy_scale,
    ));
    report.drift.push(residual);
    for inv in &invs {
        let d = monitor(&traj, inv.name(), |x| inv.eval(x))?;
        report.verdicts.push(Check::at_most(
            format!("{} drift", inv.name()),
            d.max_abs_deviation,
            drift_bound(&cfg, &system, inv.name()),
        ));
        report.drift.push(d);
    }
    report.config = Some(cfg);
    Ok(report.finish())
}

/// Drift of the stored residual column, which for the conventional
/// parametrization is not a function of the sample state alone.
fn monitor_residual(traj: &Trajectory, name: &str) -> DriftReport {
    let samples = traj.samples();
    let initial = samples.first().map_or(0.0, |s| s.residual);
    let (mut max_abs, mut at) = (0.0, samples.first().map_or(0.0, |s| s.param));
    for s in samples {
        let d = (s.residual - initial).abs();
        if d > max_abs {
            max_abs = d;
            at = s.param;
        }
    }
    DriftReport {
        quantity: name.to_string(),
        initial,
        max_abs_deviation: max_abs,
        max_rel_deviation: (initial != 0.0).then(|| max_abs / initial.abs()),
        at_param: at,
    }
}

pub fn run_bracket(cfg: ScenarioConfig) -> Result<CheckReport, CliError> {
    let system = build_system(&cfg)?;
    let invs = invariants(&cfg, &system)?;
    let sampler = OnShellSampler::new(system.conventional.clone(), cfg.seed);
    let tol = cfg.bracket_tol() * system.energy_scale;
    let mut report = CheckReport::new("bracket", None);
    for inv in &invs {
        let stats = conservation_scan(inv, system.extended.as_ref(), &sampler, cfg.samples, &cfg.scheme);
        report.verdicts.push(Check::at_least(
            format!("{}: evaluated samples", inv.name()),
            stats.count as f64,
            1.0,
        ));
        report.verdicts.push(Check::at_most(
            format!("{}: max |[He, I]|", inv.name()),
            stats.max,
            tol,
        ));
        report.brackets.push(BracketEntry {
            invariant: inv.name().to_string(),
            stats,
            tol,
        });
    }
    report.config = Some(cfg);
    Ok(report.finish())
}

pub fn run_symmetry(cfg: ScenarioConfig) -> Result<CheckReport, CliError> {
    let system = build_system(&cfg)?;
    let invs = invariants(&cfg, &system)?;
    let x0 = initial_state(&cfg, &system)?;
    let he = system.extended.as_ref();
    let flow_cfg = StepperConfig::rk4_steps(cfg.eps, cfg.flow_steps);
    let dyn_cfg = cfg.stepper.scaled(system.energy_scale);
    let mut report = CheckReport::new("symmetry", None);
    for inv in &invs {
        let (first_order, delta) = infinitesimal_transform(inv, &x0, cfg.eps, &cfg.scheme)?;
        let transformed = match cfg.mode {
            TransformMode::Infinitesimal => first_order,
            TransformMode::Finite => finite_transform(inv, &x0, cfg.eps, &flow_cfg)?,
        };
        let name = inv.name();
        let scaled_rotation = if name == "runge-lenz-extended" && x0.dim() == 2 {
            Some(scaled_rotation_decomposition(&x0, cfg.eps)?)
        } else {
            None
        };
        if cfg.mode == TransformMode::Finite {
            let shift = he.eval(&transformed)? - he.eval(&x0)?;
            report.verdicts.push(Check::at_most(
                format!("{name}: |He change| under finite transform"),
                shift.abs(),
                cfg.drift_tol * system.energy_scale,
            ));
            if name == "angular-momentum" && x0.dim() == 2 {
                report.verdicts.push(Check::at_most(
                    format!("{name}: distance from closed-form rotation"),
                    rotation_residual(&x0, &transformed, cfg.eps),
                    cfg.rotation_tol,
                ));
            }
        }
        let (mut commutation, mut orbit) = (None, None);
        if let Some(ds) = cfg.delta_s {
            let r = flow_commutation_check(inv, he, &x0, cfg.eps, ds, &dyn_cfg, &flow_cfg)?;
            report.verdicts.push(Check::at_most(
                format!("{name}: flow commutation residual"),
                r,
                cfg.commute_tol,
            ));
            commutation = Some(r);
            if inv.depends_on_e() {
                let o = orbit_commutation_check(inv, he, &x0, cfg.eps, ds, &dyn_cfg, &flow_cfg)?;
                report.verdicts.push(
                    Check::at_most(
                        format!("{name}: orbit-matched commutation residual"),
                        o,
                        cfg.commute_tol,
                    )
                    .info(),
                );
                orbit = Some(o);
            }
        }
        report.symmetry.push(SymmetryEntry {
            invariant: name.to_string(),
            initial: x0.clone(),
            delta,
            transformed,
            scaled_rotation,
            commutation_residual: commutation,
            orbit_commutation_residual: orbit,
        });
    }
    report.config = Some(cfg);
    Ok(report.finish())
}

/// ‖y − R(ε)x‖∞ over q and p, with R the rotation generated by q₁p₂ − q₂p₁.
fn rotation_residual(x: &ExtendedState, y: &ExtendedState, eps: f64) -> f64 {
    let (s, c) = (eps % (2.0 * PI)).sin_cos();
    let rot = |v: &[f64]| [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
    let (rq, rp) = (rot(&x.q), rot(&x.p));
    (0..2).fold(0.0f64, |m, k| {
        m.max((y.q[k] - rq[k]).abs()).max((y.p[k] - rp[k]).abs())
    })
}

pub fn run_check(ids: &[usize]) -> Result<CheckReport, CliError> {
    let ids: Vec<usize> = if ids.is_empty() {
        (1..=verification::CRITERIA).collect()
    } else {
        ids.to_vec()
    };
    if let Some(bad) = ids.iter().find(|&&i| !(1..=verification::CRITERIA).contains(&i)) {
        return Err(CliError::Config(format!(
            "no criterion {bad} (1..={})",
            verification::CRITERIA
        )));
    }
    let mut report = CheckReport::new("check", None);
    report.criteria = ids.into_iter().map(verification::run).collect();
    Ok(report.finish())
}
