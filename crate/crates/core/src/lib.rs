//! Full- and reduced-order averaged models of a grid-forming inverter under
//! dispatchable virtual oscillator control, with a smooth current-reference
//! limiter, modal analysis and a small simulation engine.

pub mod equilibrium;
pub mod error;
pub mod frames;
pub mod full_order;
pub mod limiter;
pub mod modal;
pub mod params;
pub mod reduced_order;
pub mod roots;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use params::{LineType, ParameterSet};
