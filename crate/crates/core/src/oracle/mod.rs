//! Semi-analytic reference solutions for homogeneous slab experiments and
//! axisymmetric tube inflation, solved without the finite-element machinery.

pub mod cylinder;
pub mod numeric;
pub mod slab;

pub use cylinder::{cylinder_solve, CylinderGeometry, CylinderSolution, ProfilePoint};
pub use slab::{slab_solve, HomogeneousSolution, SlabScenario};
