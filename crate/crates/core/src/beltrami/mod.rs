//! Singular-integral transforms and Beltrami equation solvers.

mod gmres;
mod linear;
mod principal;
mod sharp;
mod transform;

pub use linear::{composition_residual, solve_linear_beltrami, LinearBeltramiSolution};
pub use principal::{
    boundary_decay, invert_map, isotropize, isotropize_model, solve_principal,
    solve_principal_with, Isotropization, PrincipalSolution, SolverOptions, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
pub use sharp::{solve_principal_sharp, solve_with_geometry, SharpGeometry};
pub use transform::{SpectralTransform, TransformKind};

pub(crate) use gmres::gmres;
pub(crate) use sharp::Site;
