//! Force-guided grasping for robotic disassembly.
//!
//! The crate bundles the screw algebra and hybrid force-velocity controller,
//! tactile sensing, a quasi-static manipulation simulator, the three grasping
//! strategies with their task-planner and safety wrapper, and a Monte Carlo
//! harness for robustness campaigns.

pub mod control;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod orchestrator;
pub mod sensing;
pub mod strategies;
pub mod world;
