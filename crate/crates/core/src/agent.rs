//! Agent state, structure-of-arrays.

use crate::math::Vec2;
use crate::params::effective_radius;

/// Sentinel goal index for agents that pick the nearest goal of their
/// group's set each step instead of holding a fixed assignment.
pub const GOAL_NEAREST: u32 = u32::MAX;

/// Per-agent state, one array per field so the solver phases stream
/// linearly over memory.
#[derive(Clone, Debug, Default)]
pub struct Agents {
    /// Committed position x^n (becomes x^{n+1} at the end of a step).
    pub pos: Vec<Vec2>,
    /// Committed position at the start of the current/last step.
    pub prev_pos: Vec<Vec2>,
    /// Predicted position x* being projected onto the constraint manifold.
    pub pred: Vec<Vec2>,
    /// Velocity, m/s.
    pub vel: Vec<Vec2>,
    /// Disk radius, meters. Strictly positive.
    pub radius: Vec<f64>,
    /// Inverse mass, 1/kg. Zero means immovable.
    pub inv_mass: Vec<f64>,
    /// Preferred walking speed, m/s.
    pub pref_speed: Vec<f64>,
    /// Assigned goal index into the scenario goal list, or [`GOAL_NEAREST`].
    pub goal_idx: Vec<u32>,
    /// Index of the group this agent was instantiated from.
    pub group_idx: Vec<u32>,
    /// Index into the scenario's distinct species labels.
    pub species_idx: Vec<u32>,
    /// Latched true once the agent first comes within its arrival radius
    /// of its goal.
    pub arrived: Vec<bool>,
}

impl Agents {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            pos: Vec::with_capacity(n),
            prev_pos: Vec::with_capacity(n),
            pred: Vec::with_capacity(n),
            vel: Vec::with_capacity(n),
            radius: Vec::with_capacity(n),
            inv_mass: Vec::with_capacity(n),
            pref_speed: Vec::with_capacity(n),
            goal_idx: Vec::with_capacity(n),
            group_idx: Vec::with_capacity(n),
            species_idx: Vec::with_capacity(n),
            arrived: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        pos: Vec2,
        radius: f64,
        inv_mass: f64,
        pref_speed: f64,
        goal_idx: u32,
        group_idx: u32,
        species_idx: u32,
    ) {
        debug_assert!(radius > 0.0 && inv_mass >= 0.0 && pref_speed >= 0.0);
        self.pos.push(pos);
        self.prev_pos.push(pos);
        self.pred.push(pos);
        self.vel.push(Vec2::default());
        self.radius.push(radius);
        self.inv_mass.push(inv_mass);
        self.pref_speed.push(pref_speed);
        self.goal_idx.push(goal_idx);
        self.group_idx.push(group_idx);
        self.species_idx.push(species_idx);
        self.arrived.push(false);
    }

    /// Collision-check radius of agent `i` (base radius plus safety margin).
    #[inline]
    pub fn eff_radius(&self, i: usize, expansion: f64) -> f64 {
        effective_radius(self.radius[i], expansion)
    }

    /// Largest collision-check radius in the scene; sizes the short-range grid.
    pub fn max_eff_radius(&self, expansion: f64) -> f64 {
        self.radius
            .iter()
            .fold(0.0, |m, &r| m.max(effective_radius(r, expansion)))
    }

    /// True when every stored vector component is finite.
    pub fn all_finite(&self) -> bool {
        self.pos.iter().all(|p| p.is_finite())
            && self.prev_pos.iter().all(|p| p.is_finite())
            && self.pred.iter().all(|p| p.is_finite())
            && self.vel.iter().all(|v| v.is_finite())
    }
}
