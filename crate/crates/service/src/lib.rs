//! HTTP+JSON service, file store and command line around the planner
//! and simulator.

pub mod api;
pub mod cli;
pub mod error;
pub mod planner;
pub mod response;
pub mod sim_io;
pub mod store;
