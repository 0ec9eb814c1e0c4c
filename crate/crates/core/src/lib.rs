//! Congestion management on a DC load-flow grid simulator.
//!
//! The crate covers the whole decision pipeline: grid and topology model
//! ([`grid`], [`topology`]), load flow and time stepping ([`flow`],
//! [`engine`]), scenarios ([`chronics`], [`scenario`]), remedies
//! ([`redispatch`], [`search`]), the decision agent ([`agent`]) and day-ahead
//! planning ([`planner`]).

pub mod action;
pub mod agent;
pub mod chronics;
pub mod config;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod grid;
pub mod planner;
pub mod redispatch;
pub mod scenario;
pub mod search;
pub mod topology;

pub use action::{Action, ActionSpec, RedispatchOrder, TopologyAction};
pub use chronics::{Chronic, ChronicRow};
pub use config::EngineConfig;
pub use engine::GridState;
pub use error::{Error, Result};
pub use grid::Grid;
pub use topology::{Busbar, Endpoint, TopologyState};
