//! Random walks on finitely generated groups.
//!
//! Canonical-form arithmetic for a handful of built-in groups, word norms,
//! exact and truncated convolution powers, drift and entropy estimates, the
//! quasi-harmonic Cesaro construction, an exact model of the free-group
//! boundary, and finite models of stationary actions.

pub mod boundary;
pub mod cache;
pub mod drift;
pub mod error;
pub mod exec;
pub mod group;
pub mod gspace;
pub mod measure;
pub mod metric;
pub mod moments;
pub mod quasi;
pub mod radial;
pub mod sampler;
pub mod selftest;
pub mod weight;

pub use error::{Error, Result};
pub use group::{GeneratorSet, GroupElement, GroupId, Letter};
pub use measure::FiniteMeasure;
pub use metric::{BallTable, ClosedFormNorm, WordNorm};
pub use weight::{ArithmeticMode, Weight};
