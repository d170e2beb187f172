//! Flexible queueing networks: topologies, capacity checks, a discrete-event
//! simulator, scheduling policies and experiment drivers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod capacity;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod policies;
pub mod rng;
pub mod sim;
pub mod topology;

pub use capacity::{is_feasible, FeasibilityResult, RateVector, Verdict};
pub use error::{AnalysisError, CapacityError, ExperimentError, SimError, TopologyError};
pub use experiment::{reproduce_figure, run_study, Scenario, StudyResult};
pub use policies::PolicySpec;
pub use sim::{run, Horizon, JobSizeDist, RunConfig, SimResult};
pub use topology::{BipartiteGraph, ClusterPartition, GraphFamily, TopologySpec};
