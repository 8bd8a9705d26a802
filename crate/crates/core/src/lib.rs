//! Deterministic synthesis of mobile-edge QoS datasets.
//!
//! Vehicle GPS traces and base-station sites (real or synthetic) become a
//! time-aligned edge system of users, servers and services. Server loads
//! are simulated over time, and every invocation gets a response time and
//! a network jitter value.

pub mod config;
pub mod coverage;
pub mod entities;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod io;
pub mod load;
pub mod manifest;
pub mod mobility;
pub mod perturbation;
pub mod pipeline;
pub mod qos;
pub mod rng;
pub mod stats;
pub mod validate;

pub use config::{InvocationMode, SimConfig};
pub use entities::{EdgeServer, ServiceSpec};
pub use error::{Error, Result};
pub use geo::{haversine, GeoPoint};
pub use manifest::RunManifest;
pub use mobility::UserSnapshot;
pub use pipeline::{generate, run, Dataset, Inputs};
pub use validate::{validate_dir, ValidationReport};
