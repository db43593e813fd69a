//! Compressible Ericksen-Leslie nematic liquid-crystal flow on uniform grids,
//! solved by global-in-time Picard iteration over linearized subproblems.
//!
//! The pipeline per sweep is density transport by characteristics
//! ([`transport`]), an implicit director step and an implicit momentum step
//! ([`parabolic`]), orchestrated by [`picard`]. [`diagnostics`] measures
//! energies, norm bundles and the continuous-dependence and small-data
//! experiments; [`verification`] holds the manufactured-solution studies;
//! [`config`] and [`run`] are the batch front end.

pub mod config;
pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod parabolic;
pub mod picard;
pub mod run;
pub mod transport;
pub mod verification;

pub use constitutive::{ModelParams, PressureLaw};
pub use error::{Error, Result};
pub use field::{DirectorField, Field, FluidState, GridSpec, ScalarField, TimeGrid, Trajectory, VectorField};
pub use picard::{picard_solve, InitialData, PicardConfig, PicardReport};
