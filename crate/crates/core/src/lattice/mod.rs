//! Epstein zeta sums and finite Wigner-crystal energies.

mod crystal;
mod zeta;

pub use crystal::*;
pub use zeta::*;
