//! Pseudospectral solver and verification lab for the one-dimensional
//! Boussinesq-Peregrine system with variable bathymetry.

pub mod bathymetry;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod harness;
pub mod littlewood_paley;
pub mod output;
pub mod verify;

pub use bathymetry::{Bathymetry, BathymetryPreset, Params, State, Tolerances};
pub use dynamics::{simulate, SimulationOptions, SystemKind, Trajectory};
pub use elliptic::{Discretization, TbOperator};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
