//! Airport surface-movement trajectory forecasting toolkit.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`ingest`]: track CSV parsing, geofence filtering, 1 Hz resampling, local projection.
//! - [`airmap`]: routing-graph compilation into semantic airport graphs, vectorization
//!   and per-agent local context patches.
//! - [`scorer`]: kinematic and interaction criticality scores, K-agent selection and
//!   selection statistics.
//! - [`scenes`]: scene windowing, assembly in the ego frame, binary scene shards.
//! - [`model`]: the factorized-attention forecaster with a Gaussian-mixture head,
//!   reverse-mode gradients and Adam.
//! - [`bench`]: displacement metrics, day splits, the constant-velocity baseline,
//!   synthetic airports/traffic and benchmark sweeps.
//!
//! Data-parallel loops go through [`exec::Exec`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod airmap;
pub mod bench;
pub mod exec;
pub mod geo;
pub mod ingest;
pub mod model;
pub mod scenes;
pub mod scorer;

pub use exec::Exec;
