//! Numerical laboratory for universal density functionals.
//!
//! The crate evaluates and cross-checks the classical strictly correlated
//! limit (multi-marginal transport), the convex kinetic functional on
//! periodic grids, Wigner-crystal lattice energies, small-lattice quantum
//! functionals obtained by Legendre duality, and a collection of bounds.

pub mod bounds;
pub mod constants;
pub mod dual;
pub mod error;
pub mod fock;
pub mod kinetic;
pub mod lattice;
pub mod model;
pub mod parallel;
pub mod quadrature;
pub mod sce;
pub mod special;
pub mod verify;

pub use error::{LabError, Result};
