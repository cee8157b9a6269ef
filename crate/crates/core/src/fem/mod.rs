//! Mixed Q1–Q0 hexahedral finite elements.

pub mod assembly;
pub mod dofs;
pub mod mesh;
pub mod shape;

pub use assembly::{Assembly, BoundaryLoad, ElementTensions, LoadKind, Stage};
pub use dofs::{Constraint, DofMap, DofState};
pub use mesh::{build_cylinder_mesh, build_slab_mesh, FaceRef, FiberFrame, Mesh};
