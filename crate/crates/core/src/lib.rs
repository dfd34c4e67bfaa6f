//! Hamiltonian dynamics in extended phase space, where time t and energy e
//! form an additional canonical pair, together with the machinery to turn
//! constants of motion into symmetry transformations and to check them.
//!
//! Modules, bottom up:
//! - [`phase_space`]: states, trajectories, the lift e = H(q, p, t)
//! - [`systems`]: Kepler and relativistic Hamiltonians, He = H − e
//! - [`dynamics`]: canonical equations in t and s, RK4 / RK45, drift monitors
//! - [`brackets`]: gradients, the extended Poisson bracket, conservation scans
//! - [`noether`]: invariants, infinitesimal and finite symmetries, gates
//! - [`verification`]: the end-to-end property checks run by `extham check`

pub mod brackets;
pub mod dynamics;
pub mod error;
pub mod noether;
pub mod phase_space;
pub mod systems;
pub mod verification;

pub use error::{Error, Result};
