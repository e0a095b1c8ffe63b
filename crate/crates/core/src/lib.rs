//! Identifiability analysis for restricted latent class models.
//!
//! The crate builds the Γ indicator matrix from a Q-matrix, a latent class
//! space and per-item model tags, checks the combinatorial identifiability
//! conditions, constructs verified counterexamples for negative verdicts and
//! provides simulation and EM estimation for two-parameter models.

pub mod bits;
pub mod conditions;
pub mod datasets;
pub mod error;
pub mod gamma;
pub mod models;
pub mod par;
pub mod profile;
pub mod qmatrix;
pub mod space;
pub mod spec;
pub mod tmatrix;

pub use error::{Error, Result};
pub use gamma::{build_gamma, EquivalencePartition, GammaMatrix};
pub use profile::{PartialOrderResult, Profile};
pub use qmatrix::QMatrix;
pub use space::LatentClassSpace;
pub use spec::{ItemModel, ModelSpec, MultiFamily};
