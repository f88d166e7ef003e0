//! Test functions, renormalizing nonlinearities, residuals of the weak
//! formulations, boundary cutoffs and the Hardy quotient.

mod boundary;
mod renorm;
mod residual;
mod test_function;

use thiserror::Error;

pub use boundary::{
    boundary_term_decay, hardy_quotient, hardy_study, smooth_step, smooth_step_slope_bound, BoundaryCutoff,
    BoundaryTermRow, HardyQuotient, HardyStudy,
};
pub use renorm::{growth_exponent, make_renorm, RenormFunction, RenormKind};
pub use residual::{
    check_compatibility, residual, residual_matrix, residual_rows_to_csv, Notion, Problem, ResidualRow,
};
pub use test_function::{SpaceProfile, TestFunction, TimeProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeakFormError {
    #[error("invalid test function: {0}")]
    BadTestFunction(String),
    #[error("invalid renormalizer: {0}")]
    BadRenorm(String),
    #[error("incompatible test function: {0}")]
    Incompatible(String),
    #[error("{0} requires a renormalizing function b")]
    MissingRenorm(&'static str),
    #[error("periodic domains have no boundary")]
    NoBoundary,
    #[error("trajectory has no snapshots")]
    EmptyTrajectory,
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
    #[error(transparent)]
    Velocity(#[from] crate::velocity::VelocityError),
}
