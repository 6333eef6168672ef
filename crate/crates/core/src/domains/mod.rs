//! Non-disc domains reduced to the unit disc: the half plane, the exterior
//! of the disc, partial data on a half disc, and the conductivity
//! representative built from a recovered boundary map.

mod chart;
mod exterior;
mod extension;
mod halfplane;
mod partial;

pub use chart::{halfplane_angle, halfplane_point, ConformalChart};
pub use extension::{
    beurling_ahlfors_extension, beurling_ahlfors_symmetric, build_representative,
    min_jacobian_on_disc, BeurlingAhlfors, CircleHomeomorphism, InverseMap, Representative,
    SymmetricExtension, CIRCLE_SAMPLES, QUASISYMMETRY_WARN,
};
pub use exterior::{exterior_dtn, exterior_to_disc_solve, ExteriorSolution, InvertedConductivity};
pub use halfplane::{halfplane_dtn_fem, halfplane_mesh, halfplane_to_disc_dtn, HalfPlaneDtn};
pub use partial::{
    cauchy_data_from_partial, dtn_from_partial, partial_data, reflect_conductivity, reflection,
    PartialData, ReflectedConductivity,
};
