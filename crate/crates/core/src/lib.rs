//! Persona-driven sales-dialogue simulation: persona generation, simulated
//! conversations, metrics, statistics and reports.

pub mod backend;
pub mod domain;
pub mod orchestrator;
pub mod persona;
pub mod thought;
pub mod metrics;
pub mod stats;
pub mod report;
