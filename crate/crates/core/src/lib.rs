//! Physics-informed solvers for the stationary Oseen equations on the unit square.

pub mod error;
pub mod fields;
pub mod harness;
pub mod jet;
pub mod losses;
pub mod optim;
pub mod problem;
pub mod recovery_baseline;
pub mod sampling;

pub use error::{Error, Result};

/// Code in the guide under `book/` is compiled and run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/derivatives.md")]
    mod derivatives {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/divergence_free.md")]
    mod divergence_free {}
    #[doc = include_str!("../../../book/src/pressure_recovery.md")]
    mod pressure_recovery {}
    #[doc = include_str!("../../../book/src/interpolation.md")]
    mod interpolation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
