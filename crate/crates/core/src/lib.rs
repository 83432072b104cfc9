//! Diffeomorphic morphometry: LDDMM geodesic distances between volumetric
//! shapes and the longitudinal statistics used to analyse them.

pub mod discrimination;
pub mod error;
pub mod lddmm;
pub mod longitudinal;
pub mod mixed;
pub mod pca;
pub mod sampling;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
pub use lddmm::{register, LddmmParams, RegistrationResult, VectorField, VelocityField};
pub use longitudinal::{Group, Measure, MorphTable, SubjectRecord};
pub use stats::{Alternative, TestResult};
pub use volume::{Interpolation, Volume3D};
