//! Construction of quasi-periodic invariant tori of quasi-periodically forced
//! ODEs near an elliptic-type degenerate equilibrium (zero eigenvalue plus a
//! purely imaginary pair, with the missing hyperbolicity supplied by a cubic
//! term `Ω1 v1³`).
//!
//! The library implements a KAM iteration on truncated Fourier–Taylor vector
//! fields: each step solves a chain of small-divisor homological equations for
//! a near-identity change of variables, translates the degenerate direction to
//! kill the un-removable drift, excludes resonant parameter values
//! (Melnikov conditions), and composes the change into the running transform
//! chain. The iteration contracts superlinearly (`ε ↦ ε^{9/8}` schedule) and
//! the composed chain evaluated at the origin is the torus embedding.
//!
//! The concrete validation target is the delayed van der Pol oscillator at its
//! zero-Hopf point: [`vdp`] reduces it to the 3D center system consumed by the
//! engine, and [`verify`] checks the emitted torus against direct ODE and DDE
//! integration.

pub mod error;
pub mod fourier;
pub mod field;
pub mod grid;
pub mod resonance;
pub mod homological;
pub mod translate;
pub mod sysspec;
pub mod vdp;
pub mod engine;
pub mod integrate;
pub mod verify;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
