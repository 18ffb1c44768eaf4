//! Numerical hyperbolicity analysis for maps and flows.
//!
//! The crate is organised around five pieces:
//!
//! * [`dynamics`]: systems (maps and nonsingular flows), their evolution,
//!   tangent cocycles and suspension flows.
//! * [`frame`]: transversal projection, Gram-Schmidt frame flows and the
//!   instantaneous growth rates of frame columns.
//! * [`measures`]: finitely supported measures and the bounded-Lipschitz
//!   distance between them.
//! * [`shadowing`]: recurrence detection, Newton refinement of periodic
//!   orbits, shadowing checks and exact enumeration for toral automorphisms.
//! * [`hyperbolicity`]: Lyapunov spectra, periodic-orbit exponent bounds,
//!   index checks, Oseledets splittings and contraction certificates.

pub mod dynamics;
pub mod error;
pub mod frame;
pub mod hyperbolicity;
pub mod linalg;
pub mod measures;
pub mod shadowing;

pub use error::{Error, Result};

/// Toolkit version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
