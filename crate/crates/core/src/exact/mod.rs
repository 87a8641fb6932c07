//! Exact finite-state computations: generators on enumerated state spaces,
//! generator-level duality residuals, absorption probabilities of the dual,
//! stationary laws and transient expectations. These are the oracles the
//! Monte Carlo code is tested against.

mod absorption;
mod duality;
mod matrix;
mod models;
mod space;

pub use absorption::{
    absorption_single_with, absorption_solve_single, dual_absorption_law, dual_absorption_solve, thomas, AbsorptionLaw,
};
pub use duality::{
    boundary_generator_apply, boundary_intertwining_check, dual_generator_apply, intertwining_check,
    max_boundary_residual, max_intertwining_residual, sip_generator_apply,
};
pub use matrix::{
    stationary_residual, stationary_solve, transient_apply, transient_expectation, RateMatrix, DENSE_LIMIT,
    UNIFORMIZATION_TOL,
};
pub use models::{build_generator, truncated_reservoir_expectation, Generator, Model};
pub use space::{capped_vectors, occupation_vectors, occupation_vectors_upto, tuples, StateIndex, MAX_STATES};
