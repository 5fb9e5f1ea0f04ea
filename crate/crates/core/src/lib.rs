//! Pseudospectral mild solutions of the three-dimensional stochastic MHD
//! system in Elsässer variables on a periodic box, with numerical checks of
//! the estimates behind the fixed-point construction.

pub mod config;
pub mod driver;
pub mod error;
pub mod fields;
pub mod noise;
pub mod norms;
pub mod operators;
pub mod oseen;
pub mod output;
pub mod quadrature;
pub mod snapshot;
pub mod solver;
pub mod special;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{FieldHistory, ForcingSchedule, ForcingSequence};
pub use noise::NoiseRealization;
pub use norms::NormReport;
pub use spectral::{Grid, GridSpec, SpectralField, SpectralVectorField, TimeMesh};
