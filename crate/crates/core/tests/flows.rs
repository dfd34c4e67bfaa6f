//! Properties of the extended flow and of symmetry flows on the Kepler problem.

use std::f64::consts::PI;

use extham_core::brackets::{ExtendedFunction, GradientScheme};
use extham_core::dynamics::{integrate_extended, monitor, StepperConfig};
use extham_core::noether::{
    angular_momentum, default_flow_config, finite_transform, infinitesimal_transform, runge_lenz,
    runge_lenz_extended,
};
use extham_core::phase_space::{constraint_residual, lift, ConventionalState, ExtendedState};
use extham_core::systems::{Coupling, System};
use proptest::prelude::*;

fn kepler() -> System {
    System::kepler(Coupling::Constant(1.0))
}

fn on_shell(sys: &System, q: [f64; 2], p: [f64; 2]) -> ExtendedState {
    lift(
        &ConventionalState::new(q.to_vec(), p.to_vec(), 0.0).unwrap(),
        sys.conventional.as_ref(),
    )
    .unwrap()
}

fn bound_state() -> impl Strategy<Value = ([f64; 2], [f64; 2])> {
    // Radius and speed chosen so the orbit stays bound and away from the origin.
    (0.8f64..1.5, 0.0f64..(2.0 * PI), 0.85f64..1.15, 0.0f64..(2.0 * PI)).prop_map(|(r, a, v, b)| {
        let q = [r * a.cos(), r * a.sin()];
        let speed = v / r.sqrt();
        // mostly tangential velocity with a small radial part
        let dir = a + PI / 2.0 + 0.2 * b.sin();
        (q, [speed * dir.cos(), speed * dir.sin()])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shipped_invariants_are_conserved((q, p) in bound_state()) {
        let sys = kepler();
        let x0 = on_shell(&sys, q, p);
        let tr = integrate_extended(sys.extended.as_ref(), &x0, 2.0 * PI, &StepperConfig::rk4(2e-3)).unwrap();
        for inv in [angular_momentum(), runge_lenz(1.0), runge_lenz_extended()] {
            let d = monitor(&tr, inv.name(), |x| inv.eval(x)).unwrap();
            prop_assert!(d.max_abs_deviation <= 1e-8, "{} drift {}", inv.name(), d.max_abs_deviation);
        }
        let he = monitor(&tr, "He", |x| constraint_residual(x, sys.extended.as_ref())).unwrap();
        prop_assert!(he.max_abs_deviation <= 1e-10);
    }

    #[test]
    fn symmetry_flows_preserve_the_shell((q, p) in bound_state(), eps in -0.3f64..0.3) {
        let sys = kepler();
        let x0 = on_shell(&sys, q, p);
        for inv in [angular_momentum(), runge_lenz(1.0), runge_lenz_extended()] {
            let y = finite_transform(&inv, &x0, eps, &default_flow_config(eps)).unwrap();
            let r = constraint_residual(&y, sys.extended.as_ref()).unwrap();
            prop_assert!(r.abs() <= 1e-10, "{} moved off shell: {}", inv.name(), r);
            // the generator is itself constant along its own flow
            prop_assert!((inv.eval(&y).unwrap() - inv.eval(&x0).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn rotation_closes_over_a_full_turn((q, p) in bound_state(), eps in 0.0f64..(2.0 * PI)) {
        let x0 = on_shell(&kepler(), q, p);
        let l = angular_momentum();
        let y = finite_transform(&l, &x0, eps, &default_flow_config(eps)).unwrap();
        let (s, c) = eps.sin_cos();
        let rot = |v: &[f64]| [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
        let (rq, rp) = (rot(&x0.q), rot(&x0.p));
        for k in 0..2 {
            prop_assert!((y.q[k] - rq[k]).abs() <= 1e-9);
            prop_assert!((y.p[k] - rp[k]).abs() <= 1e-9);
        }
        let back = finite_transform(&l, &y, -eps, &default_flow_config(eps)).unwrap();
        prop_assert!(back.max_abs_diff(&x0) <= 1e-9);
    }
}

#[test]
fn full_turn_is_identity() {
    let x0 = on_shell(&kepler(), [1.0, 0.0], [0.0, 1.2]);
    let y = finite_transform(&angular_momentum(), &x0, 2.0 * PI, &default_flow_config(2.0 * PI)).unwrap();
    assert!(y.max_abs_diff(&x0) <= 1e-9, "{}", y.max_abs_diff(&x0));
}

#[test]
fn finite_transform_agrees_to_first_order() {
    let x0 = on_shell(&kepler(), [0.9, 0.3], [-0.2, 1.1]);
    let scheme = GradientScheme::analytic();
    for inv in [angular_momentum(), runge_lenz(1.0), runge_lenz_extended()] {
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let finite = finite_transform(&inv, &x0, eps, &default_flow_config(eps)).unwrap();
                let (linear, _) = infinitesimal_transform(&inv, &x0, eps, &scheme).unwrap();
                finite.max_abs_diff(&linear) / (eps * eps)
            })
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        assert!(hi / lo <= 2.0, "{}: {ratios:?}", inv.name());
    }
}

#[test]
fn kepler_trajectory_satisfies_newtons_law() {
    let sys = kepler();
    let x0 = on_shell(&sys, [1.0, 0.0], [0.0, 1.2]);
    let tr = integrate_extended(sys.extended.as_ref(), &x0, 2.0 * PI, &StepperConfig::rk4(1e-3)).unwrap();
    let s = tr.samples();
    // the driver rounds the step so an integer number of steps fits the span
    let h = s[1].param - s[0].param;
    let mut worst = 0.0f64;
    for w in s.windows(3) {
        let (a, b, c) = (&w[0].state, &w[1].state, &w[2].state);
        let r3 = b.q[0].hypot(b.q[1]).powi(3);
        for k in 0..2 {
            let acc = (a.q[k] - 2.0 * b.q[k] + c.q[k]) / (h * h);
            worst = worst.max((acc + b.q[k] / r3).abs());
        }
    }
    // second difference truncation is O(h^2) times the fourth derivative
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn standard_lift_keeps_t_locked_to_s() {
    let sys = kepler();
    let x0 = on_shell(&sys, [1.0, 0.0], [0.0, 1.2]);
    let tr = integrate_extended(sys.extended.as_ref(), &x0, 3.0, &StepperConfig::rk4(1e-2)).unwrap();
    for s in tr.samples() {
        assert!((s.state.t - s.param).abs() <= 1e-12);
    }
}
