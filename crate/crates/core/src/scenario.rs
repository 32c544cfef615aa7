//! Declarative scenario files: agent groups, formations, goals, obstacles,
//! and parameter overrides.
//!
//! Scenarios are JSON documents with a `schema_version` field. Formations
//! are generative (a 10,000-agent benchmark is a few lines), and each file's
//! `description` records the geometry choices it encodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agents, GOAL_NEAREST};
use crate::math::Vec2;
use crate::obstacle::Obstacle;
use crate::params::{validate_params, AvoidanceMode, SimParams};
use crate::rng::{hash3, uniform};
use crate::solver::{GoalBinding, SimState};

pub const SCHEMA_VERSION: u32 = 1;

/// Agent placement pattern for one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Formation {
    /// `rows x cols` lattice with the given spacing, row-major from the
    /// group origin toward +x, +y.
    Grid { rows: u32, cols: u32, spacing: f64 },
    /// Lattice points inside an axis-aligned ellipse centered at
    /// `center` (relative to the group origin).
    Ellipse {
        #[serde(default)]
        center: Vec2,
        semi_axes: Vec2,
        spacing: f64,
    },
    /// Explicit offsets from the group origin.
    Explicit { points: Vec<Vec2> },
}

impl Formation {
    /// Agent positions for a group placed at `origin`, in a fixed
    /// deterministic order.
    pub fn generate(&self, origin: Vec2) -> Vec<Vec2> {
        match *self {
            Formation::Grid { rows, cols, spacing } => {
                let mut out = Vec::with_capacity((rows * cols) as usize);
                for row in 0..rows {
                    for col in 0..cols {
                        out.push(origin + Vec2::new(col as f64 * spacing, row as f64 * spacing));
                    }
                }
                out
            }
            Formation::Ellipse {
                center,
                semi_axes,
                spacing,
            } => {
                let nx = (semi_axes.x / spacing).floor() as i64;
                let ny = (semi_axes.y / spacing).floor() as i64;
                let mut out = Vec::new();
                for iy in -ny..=ny {
                    for ix in -nx..=nx {
                        let p = Vec2::new(ix as f64 * spacing, iy as f64 * spacing);
                        let ex = p.x / semi_axes.x;
                        let ey = p.y / semi_axes.y;
                        if ex * ex + ey * ey <= 1.0 {
                            out.push(origin + center + p);
                        }
                    }
                }
                out
            }
            Formation::Explicit { ref points } => points.iter().map(|&p| origin + p).collect(),
        }
    }
}

/// How a group's agents pick among the group's goal set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalAssignment {
    /// Re-target the nearest goal of the set every step.
    #[default]
    Nearest,
    /// Agent `k` of the group permanently owns `goal_indices[k]`
    /// (requires one goal index per agent).
    OneToOne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub formation: Formation,
    pub origin: Vec2,
    /// Disk radius in meters. With `radius_max` set, each agent samples its
    /// radius uniformly from `[radius, radius_max]`.
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_max: Option<f64>,
    /// Mass in kg (inverse mass is stored per agent).
    pub mass: f64,
    /// Mean preferred speed; per-agent speeds sample uniformly within
    /// +/- 10% of this.
    pub pref_speed: f64,
    /// Indices into the scenario goal list available to this group.
    pub goal_indices: Vec<u32>,
    #[serde(default)]
    pub goal_assignment: GoalAssignment,
    #[serde(default)]
    pub species: String,
}

/// Optional per-scenario overrides of [`SimParams`]; unset fields keep the
/// defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamOverrides {
    pub dt: Option<f64>,
    pub alpha: Option<f64>,
    pub stability_iters: Option<u32>,
    pub solve_iters: Option<u32>,
    pub omega: Option<f64>,
    pub tau0: Option<f64>,
    pub k_longrange: Option<f64>,
    pub xsph_c: Option<f64>,
    pub xsph_h: Option<f64>,
    pub mu_static: Option<f64>,
    pub mu_kinetic: Option<f64>,
    pub v_max: Option<f64>,
    pub a_max: Option<f64>,
    pub radius_expansion: Option<f64>,
    pub longrange_radius: Option<f64>,
    pub avoidance_mode: Option<AvoidanceMode>,
    pub jitter: Option<f64>,
    pub rng_seed: Option<u64>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: SimParams) -> SimParams {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { p.$field = v; })*
            };
        }
        set!(
            dt,
            alpha,
            stability_iters,
            solve_iters,
            omega,
            tau0,
            k_longrange,
            xsph_c,
            xsph_h,
            mu_static,
            mu_kinetic,
            v_max,
            a_max,
            radius_expansion,
            longrange_radius,
            avoidance_mode,
            jitter,
            rng_seed
        );
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Free-form notes; bundled files use this to state their reconstruction
    /// choices (corridor widths, goal placement, counts).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub groups: Vec<GroupSpec>,
    pub goals: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Obstacle>,
    #[serde(default, skip_serializing_if = "is_default_overrides")]
    pub params: ParamOverrides,
    /// Default run length in solver steps.
    pub duration: u64,
}

fn is_default_overrides(p: &ParamOverrides) -> bool {
    *p == ParamOverrides::default()
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("agents {a} and {b} instantiate closer than 1e-6 m apart")]
    Overlap { a: usize, b: usize },
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

/// Parse and validate a scenario document. Unknown fields are rejected;
/// parse errors carry serde_json's line/column.
pub fn parse_scenario(doc: &str) -> Result<Scenario, ScenarioError> {
    let s: Scenario = serde_json::from_str(doc)?;
    s.validate()?;
    Ok(s)
}

/// Canonical serialization (pretty JSON); `parse(serialize(s)) == s`.
pub fn serialize_scenario(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serialization cannot fail")
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.groups.is_empty() {
            return Err(invalid("scenario needs at least one group"));
        }
        if self.goals.is_empty() {
            return Err(invalid("scenario needs at least one goal"));
        }
        if self.goals.iter().any(|g| !g.is_finite()) {
            return Err(invalid("goals must be finite"));
        }
        if self.duration < 1 {
            return Err(invalid("duration must be at least 1 step"));
        }
        for (gi, group) in self.groups.iter().enumerate() {
            let ctx = |field: &str| format!("group {gi} ({}): {field}", group.species);
            if !group.origin.is_finite() {
                return Err(invalid(ctx("origin must be finite")));
            }
            if !(group.radius > 0.0 && group.radius.is_finite()) {
                return Err(invalid(ctx("radius must be positive")));
            }
            if let Some(rmax) = group.radius_max {
                if !(rmax >= group.radius && rmax.is_finite()) {
                    return Err(invalid(ctx("radius_max must be >= radius")));
                }
            }
            if !(group.mass > 0.0 && group.mass.is_finite()) {
                return Err(invalid(ctx("mass must be positive")));
            }
            if !(group.pref_speed >= 0.0 && group.pref_speed.is_finite()) {
                return Err(invalid(ctx("pref_speed must be non-negative")));
            }
            match group.formation {
                Formation::Grid { rows, cols, spacing } => {
                    if rows == 0 || cols == 0 {
                        return Err(invalid(ctx("grid counts must be positive")));
                    }
                    if !(spacing > 0.0) {
                        return Err(invalid(ctx("grid spacing must be positive")));
                    }
                }
                Formation::Ellipse {
                    semi_axes, spacing, ..
                } => {
                    if !(semi_axes.x > 0.0 && semi_axes.y > 0.0) {
                        return Err(invalid(ctx("ellipse semi-axes must be positive")));
                    }
                    if !(spacing > 0.0) {
                        return Err(invalid(ctx("ellipse spacing must be positive")));
                    }
                }
                Formation::Explicit { ref points } => {
                    if points.is_empty() {
                        return Err(invalid(ctx("explicit formation needs points")));
                    }
                    if points.iter().any(|p| !p.is_finite()) {
                        return Err(invalid(ctx("explicit points must be finite")));
                    }
                }
            }
            if group.goal_indices.is_empty() {
                return Err(invalid(ctx("goal_indices must not be empty")));
            }
            if let Some(&bad) = group
                .goal_indices
                .iter()
                .find(|&&g| g as usize >= self.goals.len())
            {
                return Err(invalid(ctx(&format!(
                    "goal index {bad} out of range (have {} goals)",
                    self.goals.len()
                ))));
            }
            let count = group.formation.generate(group.origin).len();
            if count == 0 {
                return Err(invalid(ctx("formation generates no agents")));
            }
            if group.goal_assignment == GoalAssignment::OneToOne
                && group.goal_indices.len() != count
            {
                return Err(invalid(ctx(&format!(
                    "one_to_one assignment needs exactly one goal per agent \
                     ({count} agents, {} goal indices)",
                    group.goal_indices.len()
                ))));
            }
        }
        for (oi, obs) in self.obstacles.iter().enumerate() {
            obs.validate()
                .map_err(|e| invalid(format!("obstacle {oi}: {e}")))?;
        }
        validate_params(self.params.apply(SimParams::default()))
            .map_err(|e| invalid(format!("params: {e}")))?;
        Ok(())
    }

    /// Total number of agents the scenario instantiates.
    pub fn agent_count(&self) -> usize {
        self.groups
            .iter()
            .map(|g| g.formation.generate(g.origin).len())
            .sum()
    }

    /// Parameters with this scenario's overrides applied.
    pub fn effective_params(&self) -> SimParams {
        self.params.apply(SimParams::default())
    }

    /// Place all agents and sample their per-agent properties. Deterministic
    /// for a fixed seed.
    pub fn instantiate(&self, seed: u64) -> Result<Instantiated, ScenarioError> {
        self.validate()?;
        let mut agents = Agents::default();
        let mut bindings = Vec::with_capacity(self.groups.len());
        let mut species_labels: Vec<String> = Vec::new();
        let mut global = 0u64;
        for (gi, group) in self.groups.iter().enumerate() {
            let species_idx = match species_labels.iter().position(|s| *s == group.species) {
                Some(i) => i as u32,
                None => {
                    species_labels.push(group.species.clone());
                    (species_labels.len() - 1) as u32
                }
            };
            let positions = group.formation.generate(group.origin);
            for (k, &p) in positions.iter().enumerate() {
                let radius = match group.radius_max {
                    Some(rmax) => uniform(
                        hash3(seed ^ 0x7261_6469_7573, global, 0),
                        group.radius,
                        rmax,
                    ),
                    None => group.radius,
                };
                let pref = uniform(
                    hash3(seed ^ 0x7370_6565_64, global, 1),
                    0.9 * group.pref_speed,
                    1.1 * group.pref_speed,
                );
                let goal_idx = match group.goal_assignment {
                    GoalAssignment::OneToOne => group.goal_indices[k],
                    GoalAssignment::Nearest => GOAL_NEAREST,
                };
                agents.push(
                    p,
                    radius,
                    1.0 / group.mass,
                    pref,
                    goal_idx,
                    gi as u32,
                    species_idx,
                );
                global += 1;
            }
            bindings.push(GoalBinding {
                goal_indices: group.goal_indices.clone(),
                one_to_one: group.goal_assignment == GoalAssignment::OneToOne,
            });
        }
        check_no_coincident(&agents.pos)?;
        Ok(Instantiated {
            agents,
            bindings,
            species_labels,
            params: self.effective_params(),
        })
    }

    /// Instantiate and wrap into a ready-to-step state. `seed` feeds both
    /// instantiation sampling and the solver's noise streams.
    pub fn to_state(&self, seed: u64) -> Result<SimState, ScenarioError> {
        let mut inst = self.instantiate(seed)?;
        inst.params.rng_seed = seed;
        SimState::new(
            inst.agents,
            self.obstacles.clone(),
            inst.params,
            self.goals.clone(),
            inst.bindings,
            inst.species_labels,
        )
        .map_err(|e| invalid(format!("params: {e}")))
    }
}

/// Output of [`Scenario::instantiate`].
pub struct Instantiated {
    pub agents: Agents,
    pub bindings: Vec<GoalBinding>,
    pub species_labels: Vec<String>,
    pub params: SimParams,
}

/// Reject instantiations with effectively coincident agents. Sweep over the
/// x-sorted positions keeps this near-linear.
fn check_no_coincident(pos: &[Vec2]) -> Result<(), ScenarioError> {
    const TOL: f64 = 1e-6;
    let mut order: Vec<usize> = (0..pos.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        pos[a]
            .x
            .partial_cmp(&pos[b].x)
            .unwrap()
            .then(pos[a].y.partial_cmp(&pos[b].y).unwrap())
    });
    for (si, &i) in order.iter().enumerate() {
        for &j in order[si + 1..].iter() {
            if pos[j].x - pos[i].x > TOL {
                break;
            }
            if (pos[i] - pos[j]).norm() < TOL {
                return Err(ScenarioError::Overlap {
                    a: i.min(j),
                    b: i.max(j),
                });
            }
        }
    }
    Ok(())
}

/// Nearest goal to `pos` among the whole goal list; ties pick the lower
/// index.
pub fn nearest_goal(pos: Vec2, goals: &[Vec2]) -> (Vec2, u32) {
    debug_assert!(!goals.is_empty(), "planner needs at least one goal");
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (k, &g) in goals.iter().enumerate() {
        let d = (g - pos).norm_sq();
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    (goals[best], best as u32)
}

/// Nearest goal among a subset of the goal list, in subset order.
pub fn nearest_goal_of(pos: Vec2, goals: &[Vec2], indices: &[u32]) -> (Vec2, u32) {
    debug_assert!(!indices.is_empty(), "group needs at least one goal");
    let mut best = indices[0];
    let mut best_d = f64::INFINITY;
    for &gi in indices {
        let d = (goals[gi as usize] - pos).norm_sq();
        if d < best_d {
            best_d = d;
            best = gi;
        }
    }
    (goals[best as usize], best)
}

/// Planner primitive: unit vector toward the nearest goal scaled by the
/// preferred speed, or zero once the position is within `arrival_radius`
/// of that goal.
pub fn preferred_velocity(
    pos: Vec2,
    pref_speed: f64,
    arrival_radius: f64,
    goals: &[Vec2],
) -> Vec2 {
    let (goal, _) = nearest_goal(pos, goals);
    let to_goal = goal - pos;
    if to_goal.norm() <= arrival_radius {
        Vec2::default()
    } else {
        to_goal.normalized_or(Vec2::default()) * pref_speed
    }
}
