//! Analysis toolkit for multi-edge-type doubly-generalized LDPC ensembles on
//! the binary erasure channel: EXIT density evolution, thresholds, local
//! stability of the erasure-free fixed point, and peeling-decoder simulation.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod exit;
pub mod gf2;
pub mod inffunc;
pub mod library;
pub mod peel;
pub mod report;
pub mod stability;

pub use ensemble::{parse_spec, EnsembleSpec, SpecFile};
pub use error::{Error, Result};
