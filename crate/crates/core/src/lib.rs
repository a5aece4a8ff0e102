//! Kernel distances between probability measures, computed three ways: as
//! kernel double sums, as mean squared pairings with sampled Gaussian fields,
//! and as weighted integrals of characteristic-function differences.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fields;
mod fourier;
pub mod kernels;
pub mod measures;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{Convention, CrossTerm, DistanceEstimate, EstimatorKind};
pub use fields::{FieldRealization, FieldSpec, SamplingMethod};
pub use kernels::KernelSpec;
pub use measures::{DistributionSpec, EmpiricalMeasure};
pub use rng::SeedSpec;

// The guide's Rust snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/fourier.md")]
    mod fourier {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
