//! Simulation engine for open quantum many-body dynamics: exact global
//! Redfield equations, their correlation-time expansion into local
//! generators, pseudo-Lindblad forms, and quantum-trajectory unraveling.

pub mod analysis;
pub mod bath;
pub mod error;
pub mod expansion;
pub mod ode;
pub mod lindblad;
pub mod models;
pub mod operator;
pub mod redfield;
pub mod state;
pub mod trajectories;

pub use error::{Error, Result};
