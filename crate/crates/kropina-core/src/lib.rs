//! Numerical engine for strong Kropina spaces: conic Finsler metrics of the
//! form F = |y|_h^2 / (2 h(y, W)) obtained from Zermelo navigation with an
//! h-unit Killing wind W.
//!
//! The crate provides the navigation / alpha-beta correspondence, geodesics
//! through the wind-flow correspondence, a fixed-point solver for the
//! non-symmetric distance, conjugate-point and cut-locus machinery, four
//! closed-form model spaces, and a small expression DSL for defining spaces
//! in JSON documents.

pub mod dsl;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod models;
pub mod oracle;
pub mod projective;
pub mod separation;
pub mod space;
pub mod zermelo;

pub use error::{Error, Result};
