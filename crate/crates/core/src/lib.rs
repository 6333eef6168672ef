//! Numerical workbench for the planar anisotropic conductivity problem.

pub mod beltrami;
pub mod cgo;
pub mod domains;
pub mod dtn;
pub mod error;
pub mod field_algebra;
pub mod grid;
pub mod io;

pub use error::{Error, Result};
pub use field_algebra::{
    ConductivityModel, ConductivityTensor, DiffeoMap, PlanarMap, SymTensor, TensorField,
};
pub use grid::{ComplexField, Field, GridSpec, RealField};
