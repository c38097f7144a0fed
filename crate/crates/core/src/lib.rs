//! Sparse topology identification for networks of interacting stochastic
//! processes.
//!
//! For each node the crate looks for the small set of other nodes whose
//! two-sided FIR Wiener predictor leaves the least residual variance. The
//! pipeline is: [`timeseries`] ingestion, [`correlation`] statistics,
//! [`wiener`] projections, [`sparsifiers`] subset selection, and
//! [`graphio`] output. [`netsim`] generates networks with known topology
//! for validation.

pub mod cli;
pub mod correlation;
pub mod error;
pub mod graphio;
pub mod netsim;
pub mod sparsifiers;
pub mod timeseries;
pub mod wiener;

pub use correlation::{estimate_covariances, CovarianceModel};
pub use error::{Error, Result};
pub use graphio::{compare, threshold_edges, ComparisonReport, Topology};
pub use netsim::{random_spec, simulate, EdgeRule, NetworkSpec, SimulationOptions};
pub use sparsifiers::{identify_all, Degree, Method, SelectionResult, SparsifierConfig};
pub use timeseries::{assemble, RawSeries, TimeSeriesSet};
pub use wiener::{project, ProjectionRequest, Ridge, WienerSolution};
