//! Iris verification toolkit.
//!
//! The pipeline runs mask-driven delineation and preprocessing
//! ([`preprocess`]), optional rotation augmentation ([`augment`]),
//! embedding ([`embed`]), all-against-all matching ([`verify`]) and
//! EER/decidability evaluation ([`metrics`]). The [`cli`] module wires the
//! stages together around CSV manifests and JSON configs.

pub mod augment;
pub mod cli;
pub mod embed;
pub mod metrics;
mod numfmt;
pub mod preprocess;
pub mod raster;
pub mod synth;
pub mod verify;

pub use numfmt::sig9;
