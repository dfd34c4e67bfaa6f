//! Analytic partial derivatives of every shipped Hamiltonian against central
//! differences of the value, at seeded random points.

use std::sync::Arc;

use extham_core::brackets::{gradient, ExtendedFunction, GradientScheme};
use extham_core::phase_space::ExtendedState;
use extham_core::systems::{
    kepler, relativistic_conventional, relativistic_extended, standard_lift, ConventionalHamiltonian,
    Coupling, ExtendedHamiltonian, FreeParticle, PotentialSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POINTS: usize = 100;
const REL_TOL: f64 = 1e-5;

fn random_point(rng: &mut ChaCha8Rng) -> ExtendedState {
    let q = loop {
        let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if f64::hypot(q[0], q[1]) > 0.3 {
            break q;
        }
    };
    let p = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    ExtendedState::new(q.to_vec(), p, rng.gen_range(0.0..6.0), rng.gen_range(-3.0..3.0)).unwrap()
}

fn close(analytic: &[f64], numeric: &[f64], what: &str) {
    for (a, n) in analytic.iter().zip(numeric) {
        assert!(
            (a - n).abs() <= REL_TOL * a.abs().max(1.0),
            "{what}: analytic {a} vs fd {n}"
        );
    }
}

fn conventional_fd(h: &dyn ConventionalHamiltonian, x: &ExtendedState) -> Vec<f64> {
    let n = x.q.len();
    let mut flat: Vec<f64> = x.q.iter().chain(&x.p).copied().collect();
    flat.push(x.t);
    let eval = |v: &[f64]| h.eval(&v[..n], &v[n..2 * n], v[2 * n]).unwrap();
    (0..flat.len())
        .map(|k| {
            let step = 1e-6 * flat[k].abs().max(1.0);
            let (mut plus, mut minus) = (flat.clone(), flat.clone());
            plus[k] += step;
            minus[k] -= step;
            (eval(&plus) - eval(&minus)) / (2.0 * step)
        })
        .collect()
}

fn conventional_hamiltonians() -> Vec<Arc<dyn ConventionalHamiltonian>> {
    vec![
        Arc::new(kepler(Coupling::Constant(1.0))),
        Arc::new(kepler(Coupling::Sinusoidal {
            amplitude: 0.1,
            omega: 1.0,
        })),
        Arc::new(FreeParticle::with_mass(2, 1.5)),
        Arc::new(relativistic_conventional(1.0, 1.0, PotentialSpec::Zero.build(), 2).unwrap()),
        Arc::new(relativistic_conventional(1.3, 2.0, PotentialSpec::Coulomb(0.5).build(), 2).unwrap()),
    ]
}

fn extended_hamiltonians() -> Vec<Arc<dyn ExtendedHamiltonian>> {
    let mut v: Vec<Arc<dyn ExtendedHamiltonian>> = conventional_hamiltonians()
        .into_iter()
        .map(|h| Arc::new(standard_lift(h)) as Arc<dyn ExtendedHamiltonian>)
        .collect();
    for spec in [
        PotentialSpec::Zero,
        PotentialSpec::Constant(0.7),
        PotentialSpec::Coulomb(0.5),
    ] {
        v.push(Arc::new(
            relativistic_extended(1.3, 2.0, spec.build(), 2).unwrap(),
        ));
    }
    v
}

#[test]
fn conventional_partials_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for h in conventional_hamiltonians() {
        for _ in 0..POINTS {
            let x = random_point(&mut rng);
            let g = h.gradient(&x.q, &x.p, x.t).unwrap();
            let mut analytic = g.dq.clone();
            analytic.extend(&g.dp);
            analytic.push(g.dt);
            close(&analytic, &conventional_fd(h.as_ref(), &x), h.name());
            assert_eq!(g.de, 0.0);
        }
    }
}

#[test]
fn extended_partials_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fd = GradientScheme::central_difference();
    for he in extended_hamiltonians() {
        for _ in 0..POINTS {
            let x = random_point(&mut rng);
            let analytic = he.gradient(&x).unwrap().to_vec();
            let f: &dyn ExtendedFunction = he.as_ref();
            let numeric = gradient(f, &x, &fd).unwrap().to_vec();
            close(&analytic, &numeric, f.name());
        }
    }
}
