//! Numerical laboratory for the vanishing-viscosity limit of superquadratic
//! state-constrained Hamilton-Jacobi equations
//!
//! ```text
//! lambda u + |Du|^p            = f   in the domain, supersolution up to the boundary
//! lambda u + |Du|^p - eps Lap u = f   maximal solution
//! ```
//!
//! with `p > 2`. The crate solves both problems on analytic domains, sweeps
//! `eps`, measures `u^eps - u` and checks it against explicit two-sided bounds.

mod banded;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod hj_first_order;
pub mod hj_viscous;
pub mod analysis;
pub mod experiments;
mod scheme;

pub use error::{Error, Result};
pub use geometry::{build_grid, Domain, Grid, GridFunction, NodeClass};
pub use hamiltonian::{data_library, make_exponents, DataFunction, DataParams, Exponents, ProblemSpec};
