//! Discrete abstractions of coupled multi-agent systems on grid decompositions.
//!
//! The pipeline: a directed interaction graph (`network`) plus interaction
//! kernels with certified bounds (`dynamics`) over a uniform grid
//! (`decomposition`) yields reference trajectories for neighborhood subsystems
//! (`reftraj`), deviation/horizon certificates and validated space-time
//! discretization plans (`bounds`), hybrid feedback laws realizing cell-to-cell
//! transitions (`control`), and per-agent transition systems with sound
//! reachability (`abstraction`).

pub mod abstraction;
pub mod bounds;
pub mod control;
pub mod decomposition;
pub mod dynamics;
pub mod fixtures;
pub mod network;
pub mod reftraj;
pub mod selftest;

pub(crate) mod linalg;
