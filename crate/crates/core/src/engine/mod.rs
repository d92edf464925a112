//! State assembly, the coupled right-hand side and time integration.

pub mod integrator;
pub mod layout;
pub mod model;
pub mod simulate;

pub use integrator::{integrate, integrate_with, IntegratorConfig, Method, OdeSystem, Stepper, Trajectory};
pub use layout::StateLayout;
pub use model::{HeldControls, Model, Observation};
pub use simulate::{run_scenario, simulate, SimulationRun, DERIVED_COLUMNS};
