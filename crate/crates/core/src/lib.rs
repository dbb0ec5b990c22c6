//! Explicitly time-dependent spin Hamiltonians, multistate Landau-Zener
//! scattering matrices, and checks of the Kramers-partner no-scattering
//! property: for half-integer total spin and `Θ H(t) Θ⁻¹ = H(-t)` on a
//! symmetric interval, `⟨ΘΨ|U(T,-T)|Ψ⟩ = 0` for every initial state `Ψ`.

pub mod analysis;
pub mod error;
pub mod hamiltonian;
pub mod hamspec;
pub mod linalg;
pub mod models;
pub mod propagator;
pub mod spin;

pub use error::{Error, Result};
pub use hamiltonian::{Hamiltonian, HamiltonianTerm, LinearSweep, SpinFactor, TimeDependent, TimePolynomial};
pub use linalg::{ComplexMatrix, StateVector};
pub use spin::{Axis, Spin, SpinSystem, TimeReversalOp};
