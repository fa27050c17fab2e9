//! Simulation and verification toolkit for SIR-type epidemics on directed
//! contact networks.
//!
//! * [`netcore`]: networks, parameter maps, datasets, text formats.
//! * [`engine`]: SIR and distancing dynamics, percolation sampling, Monte Carlo.
//! * [`oracle`]: exact enumeration and cut analysis on small graphs.
//! * [`reductions`]: extent-preserving instance transformations.
//! * [`monotonicity`]: comparisons, sweeps, concordance classification.

pub mod engine;
pub mod error;
pub mod monotonicity;
pub mod netcore;
pub mod oracle;
pub mod reductions;

pub use engine::{
    estimate_mean_extent, estimate_mean_extent_seeded, sample_sir_percolation, simulate_fleesir, simulate_sir,
    simulate_with, Distancing, ExtentEstimate, Model, OutcomeRealization, Seeding, TrajectoryRecord, Trigger,
};
pub use error::{Error, Result};
pub use netcore::{dominates, ContactNetwork, EpidemicParams, NodeId, NodeState};
pub use oracle::{exact_fleesir, exact_model, exact_sir, CutDecomposition, ExactResult};
