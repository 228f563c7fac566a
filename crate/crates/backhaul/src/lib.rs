//! File formats, scenario orchestration and the command line for
//! [`backhaul_core`].
//!
//! Inputs are five aligned ESRI ASCII grids (elevation, population,
//! vegetation fraction, canopy height, administrative area id) and a CSV
//! of rain classes per administrative area. Outputs are CSV tables and a
//! JSON run manifest.

pub mod ascii_grid;
pub mod commands;
pub mod config;
pub mod error;
pub mod inputs;
pub mod outputs;
pub mod scenario;
pub mod synth;
pub mod table;

pub use backhaul_core as core;
pub use config::ScenarioConfig;
pub use error::{AppError, ErrorKind};
