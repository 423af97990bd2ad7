//! Harmonic-balance solver for time-periodic Jordan-Moore-Gibson-Thompson
//! equations in one space dimension, with their Westervelt and Kuznetsov
//! nonlinearities, energy diagnostics and verification studies.
//!
//! The periodic problem
//!
//! ```text
//! τu_ttt + u_tt − c²Δu − bΔu_t + N(u) + f = 0,   u(t + T) = u(t),
//! ```
//!
//! is discretized by truncated Fourier series in time ([`HarmonicField`]) and
//! second-order finite differences in space ([`spatial`]). Each harmonic
//! decouples into a complex Helmholtz-type system ([`harmonic`]); the
//! nonlinearity is handled by a Picard fixed point ([`nonlinear`]).
//!
//! ```
//! use jmgt_core::{harmonic, studies};
//!
//! let model = studies::example_model(65, 0.1, 2)?;
//! let case = studies::manufactured_case("linear-dirichlet", &model, 1e-3)?;
//! let u = harmonic::solve_linear_mgt(&case.f, &model)?;
//! let err = u.sub(&case.u_star).max_abs();
//! assert!(err < 1e-6);
//! # Ok::<(), jmgt_core::Error>(())
//! ```

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod harmonic;
pub mod krylov;
pub mod model;
pub mod nonlinear;
pub mod oracle;
pub mod output;
pub mod spatial;
pub mod studies;
pub mod tridiag;

pub use error::{ConfigError, Error, Result};
pub use field::{to_harmonics, to_time_samples, HarmonicField, TimeField};
pub use model::{BcKind, BoundaryCondition, Grid, Model, Nonlinearity, PhysicalParams};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/harmonic-balance.md")]
    mod harmonic_balance {}
    #[doc = include_str!("../../../book/src/spatial.md")]
    mod spatial {}
    #[doc = include_str!("../../../book/src/fixed-point.md")]
    mod fixed_point {}
    #[doc = include_str!("../../../book/src/energies.md")]
    mod energies {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
