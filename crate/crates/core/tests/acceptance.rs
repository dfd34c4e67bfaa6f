//! One test per acceptance criterion. Run with `--nocapture` to see the
//! measured numbers behind each verdict.

use extham_core::verification::run;

fn criterion(id: usize) {
    let o = run(id);
    println!("{}", o.summary());
    for c in &o.checks {
        println!("      {c}");
    }
    if let Some(e) = &o.error {
        println!("      error: {e}");
    }
    assert!(o.passed(), "{}", o.summary());
}

#[test]
fn c01_constraint_conserved_with_fourth_order_drift() {
    criterion(1);
}

#[test]
fn c02_conventional_and_lifted_runs_agree() {
    criterion(2);
}

#[test]
fn c03_angular_momentum_conserved() {
    criterion(3);
}

#[test]
fn c04_runge_lenz_conserved() {
    criterion(4);
}

#[test]
fn c05_bracket_gate_admits_and_rejects() {
    criterion(5);
}

#[test]
fn c06_runge_lenz_symmetry_rules() {
    criterion(6);
}

#[test]
fn c07_symmetry_flows_commute_with_dynamics() {
    criterion(7);
}

#[test]
fn c08_finite_rotation() {
    criterion(8);
}

#[test]
fn c09_relativistic_consistency() {
    criterion(9);
}

#[test]
fn c10_he_generates_s_shift() {
    criterion(10);
}
