//! Numerical toolkit for the torsion problem Δu = 2 in a planar sector cone,
//! with u = 0 on the curved boundary Γ0 and u_ν = 0 on the cone walls Γ1.

pub mod constants;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod identities;
pub mod mesh;
pub mod quad;
pub mod quantities;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
