//! IO, file formats, and the Monte Carlo sweep harness around `opra-core`.
//!
//! Everything here is deliberately boring plumbing: CSV datasets, JSON
//! policies and reports, the risk-spec command grammar, run manifests, and
//! the parallel sweep driver. The numerics all live in `opra-core`.

pub mod error;
pub mod io;
pub mod report;
pub mod riskspec;
pub mod sweep;

pub use error::CliError;
