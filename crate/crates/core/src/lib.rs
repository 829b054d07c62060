//! Spatial system dynamics for land-cover change.
//!
//! A stock-and-flow model ([`engine`]) runs in lock-step with a land-cover
//! raster ([`landscape`]): the raster is measured each step, the measurement
//! drives the model's flows, and the flows are written back onto the raster
//! as cell-by-cell growth and decay ([`orchestrator`]). [`daisyworld`] holds
//! the planetary model used to exercise the coupling.

pub mod daisyworld;
pub mod engine;
pub mod io;
pub mod landscape;
pub mod orchestrator;
pub mod scenario;

pub use daisyworld::{Areas, DaisyParams, LuminositySchedule};
pub use engine::{EngineError, SimState, StockFlowModel, VariableDef};
pub use landscape::{AdjacencyStats, Census, LandCode, LandGrid, Neighborhood, Species};
pub use orchestrator::{
    grid_areas, run, run_from_grid, run_nonspatial, Coupling, RunOutput, SimError, SimulationRecord,
};
pub use scenario::{Mode, Scenario, ScenarioError};
