//! Multi-agent deployment in unknown orthogonal grid worlds.

pub mod baselines;
pub mod bench;
pub mod cadence;
pub mod dadence;
pub mod dealloc;
pub mod dungeon;
pub mod nav;
pub mod quadtree;
pub mod sim;
pub mod trace;
pub mod visibility;
pub mod world;

pub use sim::{run_algorithm, Algorithm, RunConfig, RunMetrics, RunOutput, WorldContext};
pub use world::{Cell, GridWorld, WorldError};
