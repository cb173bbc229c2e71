//! Event detection in a hexagonal-grid wireless sensor network whose sensors
//! may fail to report a detection or raise false alarms.
//!
//! - [`hexgrid`]: node set and adjacency of the grid.
//! - [`probability`]: response probabilities, likelihood coefficients and
//!   exact per-node error probabilities.
//! - [`detectors`]: base-station rules (maximum likelihood, argmax set,
//!   neighbourhood-augmented set, Occam window, Q ratio, Bayesian averaging).
//! - [`simulator`]: seeded two-phase sensing simulation and success metrics.
//! - [`calibration`]: parameter estimates from controlled experiments.
//! - [`records`]: the run-record file format.
//! - [`cli`]: the `wsn-detect` command-line front end.

pub mod calibration;
pub mod cli;
pub mod detectors;
pub mod hexgrid;
pub mod probability;
pub mod records;
pub mod simulator;

pub use detectors::{Evidence, ModelId, Priors, ResponseField, SelectionResult};
pub use hexgrid::{GridTopology, NodeId};
pub use probability::{derive_params, DerivedParams, SensorParams};
pub use simulator::{run_experiment, ExperimentConfig, Scenario, SimulationSummary};
