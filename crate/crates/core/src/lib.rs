//! Position-based multi-agent crowd simulation.
//!
//! Agents are 2D disks advanced by a predict-project-update loop:
//! planner velocities blend into the retained velocity, predicted positions
//! are projected onto short-range frictional contact, anticipatory
//! (time-to-collision) collision, and wall constraints with a Jacobi solver,
//! and velocities derive from the positional change with XSPH cohesion and
//! speed/acceleration limits.
//!
//! The crate is deterministic by construction: for a fixed scenario, seed,
//! and parameter set, trajectories are bitwise identical across runs and
//! thread counts.

pub mod agent;
pub mod constraints;
pub mod grid;
pub mod math;
pub mod metrics;
pub mod obstacle;
pub mod oracle;
pub mod parallel;
pub mod params;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod trajectory;

pub use agent::Agents;
pub use math::Vec2;
pub use obstacle::Obstacle;
pub use params::{effective_radius, validate_params, AvoidanceMode, ParamError, SimParams};
pub use scenario::{parse_scenario, serialize_scenario, Scenario, ScenarioError};
pub use solver::SimState;
