//! Design and simulation toolkit for lens-integrated soft optical waveguide
//! sensors.
//!
//! The pipeline runs from single-layer spectra to optical constants
//! ([`material`]), from the material index to a Cartesian-oval lens profile
//! ([`lensdesign`]), and from the assembled Y-shaped sensor ([`scene`]) through
//! a 2D ray tracer ([`raytrace`]) to rotation sweeps and simulated rotation
//! protocols ([`experiment`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod geom;
pub mod io;
pub mod lensdesign;
pub mod material;
pub mod raytrace;
pub mod report;
pub mod scene;
pub mod svg;

pub use error::{DomainError, Error, Result};
pub use exec::Execution;
