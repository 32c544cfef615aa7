//! wasm-bindgen surface for the browser demo.
//!
//! Three operations drive the page: construct a simulation from scenario
//! JSON, advance it, and read back flat f32 buffers for canvas rendering.
//! The avoidance mode can be switched live to compare the anticipatory
//! constraint variants on the same crowd.

use wasm_bindgen::prelude::*;

use throng::metrics;
use throng::scenario::parse_scenario;
use throng::solver::SimState;
use throng::Obstacle;

const BUILTIN: &[(&str, &str)] = &[
    (
        "sparse_passing_small",
        include_str!("../../../scenarios/sparse_passing_small.json"),
    ),
    (
        "dense_passing_small",
        include_str!("../../../scenarios/dense_passing_small.json"),
    ),
    ("dense_low", include_str!("../../../scenarios/dense_low.json")),
    (
        "proximal_corridor",
        include_str!("../../../scenarios/proximal_corridor.json"),
    ),
    (
        "bottleneck_480",
        include_str!("../../../scenarios/bottleneck_480.json"),
    ),
    (
        "bears_rabbits",
        include_str!("../../../scenarios/bears_rabbits.json"),
    ),
    (
        "target_locomotion",
        include_str!("../../../scenarios/target_locomotion.json"),
    ),
    (
        "dense_ellipsoid",
        include_str!("../../../scenarios/dense_ellipsoid.json"),
    ),
];

/// Names of the scenarios compiled into the demo.
#[wasm_bindgen]
pub fn builtin_scenario_names() -> Vec<String> {
    BUILTIN.iter().map(|(n, _)| n.to_string()).collect()
}

/// JSON text of a builtin scenario, or empty when unknown.
#[wasm_bindgen]
pub fn builtin_scenario(name: &str) -> String {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, doc)| doc.to_string())
        .unwrap_or_default()
}

fn build_state(
    scenario_json: &str,
    seed: u32,
    mode: Option<&str>,
) -> Result<(SimState, String), String> {
    let scenario = parse_scenario(scenario_json).map_err(|e| e.to_string())?;
    let mut state = scenario.to_state(seed as u64).map_err(|e| e.to_string())?;
    if let Some(mode) = mode {
        state.params.avoidance_mode = mode.parse()?;
    }
    Ok((state, scenario.name))
}

#[wasm_bindgen]
pub struct Sim {
    state: SimState,
    name: String,
    last_step_ms: f64,
}

#[wasm_bindgen]
impl Sim {
    /// Build a simulation from scenario JSON. `mode` optionally overrides
    /// the scenario's avoidance mode (`longrange`, `avoidance`, `none`).
    #[wasm_bindgen(constructor)]
    pub fn new(scenario_json: &str, seed: u32, mode: Option<String>) -> Result<Sim, JsError> {
        let (state, name) =
            build_state(scenario_json, seed, mode.as_deref()).map_err(|e| JsError::new(&e))?;
        Ok(Sim {
            state,
            name,
            last_step_ms: 0.0,
        })
    }

    /// Advance `n` solver steps.
    pub fn step(&mut self, n: u32) {
        for _ in 0..n {
            self.state.step();
        }
    }

    /// Switch the anticipatory constraint variant while running.
    pub fn set_mode(&mut self, mode: &str) -> Result<(), JsError> {
        self.state.params.avoidance_mode = mode.parse().map_err(|e: String| JsError::new(&e))?;
        Ok(())
    }

    /// Record the wall-clock cost of the last batch (set by the page; the
    /// simulator has no clock on wasm).
    pub fn set_last_step_ms(&mut self, ms: f64) {
        self.last_step_ms = ms;
    }

    /// Flat `[x, y, radius, species]` per agent for rendering.
    pub fn agent_data(&self) -> Vec<f32> {
        let a = &self.state.agents;
        let mut out = Vec::with_capacity(a.len() * 4);
        for i in 0..a.len() {
            out.push(a.pos[i].x as f32);
            out.push(a.pos[i].y as f32);
            out.push(a.radius[i] as f32);
            out.push(a.species_idx[i] as f32);
        }
        out
    }

    /// Flat obstacle records, 5 floats each:
    /// `[0, ax, ay, bx, by]` for segments, `[1, cx, cy, r, 0]` for circles.
    pub fn obstacle_data(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.state.obstacles.len() * 5);
        for obs in &self.state.obstacles {
            match *obs {
                Obstacle::Segment { a, b } => {
                    out.extend_from_slice(&[0.0, a.x as f32, a.y as f32, b.x as f32, b.y as f32]);
                }
                Obstacle::Circle { center, radius } => {
                    out.extend_from_slice(&[
                        1.0,
                        center.x as f32,
                        center.y as f32,
                        radius as f32,
                        0.0,
                    ]);
                }
            }
        }
        out
    }

    /// Flat `[x, y]` per goal point.
    pub fn goal_data(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.state.goals.len() * 2);
        for g in &self.state.goals {
            out.push(g.x as f32);
            out.push(g.y as f32);
        }
        out
    }

    pub fn agent_count(&self) -> u32 {
        self.state.agents.len() as u32
    }

    pub fn step_index(&self) -> u32 {
        self.state.step_index as u32
    }

    pub fn name(&self) -> String {
        self.name.clone()
    }

    pub fn mode(&self) -> String {
        self.state.params.avoidance_mode.to_string()
    }

    /// One-line status: simulated time, arrivals, flow, worst overlap.
    pub fn status(&self) -> String {
        let t = self.state.step_index as f64 * self.state.params.dt;
        format!(
            "t {:.1} s | arrived {:.1}% | goalward {:.2} m/s | max overlap {:.3} m | {:.1} ms/step",
            t,
            100.0 * self.state.arrived_fraction(),
            metrics::mean_progress_speed(&self.state.agents, &self.state.current_goal),
            metrics::max_penetration(&self.state.agents),
            self.last_step_ms,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_build_and_step() {
        for name in builtin_scenario_names() {
            let doc = builtin_scenario(&name);
            assert!(!doc.is_empty());
            let (mut state, got) = build_state(&doc, 1, None).unwrap();
            assert_eq!(got, name);
            state.step();
            assert!(state.agents.all_finite(), "{name} produced non-finite state");
        }
    }

    #[test]
    fn mode_override_applies() {
        let doc = builtin_scenario("sparse_passing_small");
        let (state, _) = build_state(&doc, 1, Some("avoidance")).unwrap();
        assert_eq!(state.params.avoidance_mode.to_string(), "avoidance");
        assert!(build_state(&doc, 1, Some("bogus")).is_err());
    }

    #[test]
    fn unknown_builtin_is_empty() {
        assert!(builtin_scenario("nope").is_empty());
    }
}
