//! Simulation and analysis of divide-and-rebuild purification for thermal
//! graph states under independent `Z` noise.
//!
//! Noisy graph states are tracked as a graph plus a `Z`-error pattern
//! ([`PatternState`]); every rule on patterns is checked against the exact
//! simulator in [`dense`].

pub mod bipartite;
pub mod dense;
pub mod error;
pub mod graph;
pub mod optimality;
pub mod pattern;
pub mod protocol;
pub mod thermal;

pub use bipartite::{BellDiagonal, DistillOutcome, RecurrenceStep};
pub use dense::{Basis, DensityMatrix, Outcome, StateVector};
pub use error::{Error, Result};
pub use graph::{Family, Graph, Relabel};
pub use optimality::{Bipartition, EdgeVerdict, Reconstruction, Verification};
pub use pattern::PatternState;
pub use protocol::{DrppConfig, ExtractionPlan, ProtocolResult, RateReport, ScanRow, Status};
pub use thermal::ThermalModel;
