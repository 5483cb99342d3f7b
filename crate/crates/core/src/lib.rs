//! Simulation library for coherence-protected nonadiabatic geometric gates.
//!
//! The library is organized around the pipeline used by the experiments:
//!
//! * [`linalg`] — dense complex operators and states on 2-, 4- and
//!   8-dimensional Hilbert spaces, Hermitian exponentials, tensor products.
//! * [`noise`] — stochastic dephasing fields: quasi-static Gaussian offsets
//!   and Ornstein–Uhlenbeck trajectories with reproducible substreams.
//! * [`gate`] — Bloch-sphere loop paths, the piecewise geometric Hamiltonian,
//!   the periodic dressing drive, geometric-phase bookkeeping and pulse
//!   synthesis for target one- and two-qubit gates.
//! * [`dynamics`] — time-ordered unitary propagation, Lindblad master
//!   equation integration, rotating-frame and Magnus diagnostics, and the
//!   toy-bath factorization check.
//! * [`experiments`] — Monte-Carlo free-induction-decay and gate-fidelity
//!   studies with seed-deterministic averaging.
//! * [`verify`] — the programmatic invariant suite behind `geomgate verify`.
//!
//! Unit convention: time in microseconds, Hamiltonian coefficients in
//! rad/us. A quantity quoted as "f MHz" enters formulas literally as written
//! (e.g. a detuning term `pi * Delta * sigma_z` with Delta = 1 contributes
//! pi rad/us), so 1 MHz of detuning is one oscillation per microsecond.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod gate;
pub mod linalg;
pub mod noise;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
