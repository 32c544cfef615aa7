//! Per-step and per-run diagnostics.
//!
//! All metrics are pure functions of a state snapshot; nothing here feeds
//! back into the solver. Penetration is measured on base radii — the
//! expansion margin is solver-internal, so reported overlap is the honest
//! external measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agents;
use crate::grid::HashGrid;
use crate::math::Vec2;
use crate::parallel;
use crate::solver::SimState;

/// Diagnostics for one solver step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    /// Largest pairwise overlap of base radii, meters.
    pub max_penetration: f64,
    /// Mean goalward speed over non-arrived agents, m/s.
    pub mean_speed: f64,
    /// Fraction of agents that have reached their goal at least once.
    pub arrived_fraction: f64,
    /// Solver time for the step, milliseconds.
    pub wall_clock_ms: f64,
}

/// Largest pairwise penetration of base (unexpanded) radii, via a grid.
pub fn max_penetration(agents: &Agents) -> f64 {
    let n = agents.len();
    if n < 2 {
        return 0.0;
    }
    let r_max = agents.radius.iter().fold(0.0f64, |m, &r| m.max(r));
    let grid = HashGrid::build(&agents.pos, (4.0 * r_max).max(1e-3));
    let pens = parallel::map_collect(n, |i| {
        let mut worst = 0.0f64;
        let mut nbrs = Vec::new();
        grid.query_into(&agents.pos, i, agents.radius[i] + r_max, &mut nbrs);
        for &j in &nbrs {
            let j = j as usize;
            let pen = (agents.radius[i] + agents.radius[j])
                - (agents.pos[i] - agents.pos[j]).norm();
            worst = worst.max(pen);
        }
        worst
    });
    pens.into_iter().fold(0.0, f64::max)
}

/// Mean velocity component toward each non-arrived agent's current goal.
/// Zero by convention when everyone has arrived.
pub fn mean_progress_speed(agents: &Agents, current_goal: &[Vec2]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..agents.len() {
        if agents.arrived[i] {
            continue;
        }
        let dir = (current_goal[i] - agents.pos[i]).normalized_or(Vec2::default());
        sum += agents.vel[i].dot(dir);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Convenience: compute the step diagnostics for a state, attaching the
/// measured wall-clock time.
pub fn measure_step(state: &SimState, wall_clock_ms: f64) -> StepMetrics {
    StepMetrics {
        step: state.step_index,
        max_penetration: max_penetration(&state.agents),
        mean_speed: mean_progress_speed(&state.agents, &state.current_goal),
        arrived_fraction: state.arrived_fraction(),
        wall_clock_ms,
    }
}

/// Aggregates of a full run, serialized as the run's summary document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub steps: u64,
    pub agent_count: usize,
    pub mean_step_ms: f64,
    pub p95_step_ms: f64,
    /// Two solver steps per 24 fps frame.
    pub mean_frame_ms: f64,
    pub final_arrived_fraction: f64,
    pub peak_max_penetration: f64,
    pub final_mean_speed: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot summarize an empty metrics series")]
    EmptySeries,
}

/// Summarize a series of per-step metrics.
pub fn run_report(agent_count: usize, series: &[StepMetrics]) -> Result<RunReport, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let n = series.len();
    let mean_step_ms = series.iter().map(|m| m.wall_clock_ms).sum::<f64>() / n as f64;
    let mut times: Vec<f64> = series.iter().map(|m| m.wall_clock_ms).collect();
    times.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    // Nearest-rank 95th percentile.
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    let p95_step_ms = times[rank - 1];
    Ok(RunReport {
        steps: n as u64,
        agent_count,
        mean_step_ms,
        p95_step_ms,
        mean_frame_ms: 2.0 * mean_step_ms,
        final_arrived_fraction: series.last().unwrap().arrived_fraction,
        peak_max_penetration: series
            .iter()
            .map(|m| m.max_penetration)
            .fold(0.0, f64::max),
        final_mean_speed: series.last().unwrap().mean_speed,
    })
}
