//! Finite-element solver for active, incompressible, fiber-reinforced soft
//! tissue with a collagen coupling constraint between fiber and cross-fiber
//! stretches.
//!
//! Lengths are in centimeters and stresses in kilopascals throughout.

pub mod constitutive;
pub mod error;
pub mod fem;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
