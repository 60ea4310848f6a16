//! Grid densities, discrete variation, and the Ulam discretization of the
//! transfer operator.

mod grid;
mod ulam;

pub use grid::{
    discrete_variation, l1_distance, lp_norm, read_density, write_density, Grid, GridDensity,
    NormConfig,
};
pub use ulam::{
    build_ulam, duality_check, invariant_density, lasota_yorke_diagnostic,
    refined_invariant_density, transfer_perturbation_residual, InvariantDensity, LyDiagnostics,
    UlamOperator,
};
