//! Taylor-Hood finite elements on triangle meshes.

pub mod assembly;
pub mod fields;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use assembly::{
    assemble_p2_scalar, assemble_stokes_darcy, solve, velocity_load, BoundaryConditions, DofLayout, LinearSystem,
    StokesOperator, VelocityProfile,
};
pub use fields::{l2_inner, ScalarFieldP1, VectorFieldP2};
pub use space::FemSpace;
pub use sparse::{Factorization, SparseMatrix, SparsityPattern};
