//! Scenario files, demand series, trajectory tables and calibration metrics.

pub mod config;
pub mod demand;
pub mod metrics;
pub mod trajectory;

pub use config::{load_scenario, parse_scenario, LoadedScenario, NodeTree, Scenario};
pub use demand::{DemandSeries, DemandSet};
pub use metrics::{cvrmse, nmbe, verdict, MetricsReport, Verdict};
pub use trajectory::TrajectoryTable;
