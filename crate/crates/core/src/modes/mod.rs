//! Truncated azimuthal-mode representation of the velocity.

pub mod forcing;
pub mod profiles;
pub mod state;

pub use forcing::{nonlinear_forcing_convolution, nonlinear_forcing_pseudospectral, ModeForcing};
pub use profiles::{
    build_composite_data, build_single_mode_data, complete_swirl_from_constraint, CompositeData,
    GaussianRing, ProfilePair, SwirlCompletion, CONSTRAINT_TOLERANCE,
};
pub use state::{
    active_components, forbidden_components, mode_divergence, rescale, synthesize,
    synthesize_cartesian, Component, Family, ModeCoefficients, ModeDivergence, VelocityModeSet,
};
