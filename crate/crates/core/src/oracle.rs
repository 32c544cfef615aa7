//! Reference implementations used as independent test oracles.
//!
//! Nothing here is called by the solver; these exist so tests can check the
//! fast paths against slow, obviously-correct ones.

use crate::agent::Agents;
use crate::math::Vec2;

/// Time-to-collision by explicit trajectory stepping: advance both disks in
/// increments of `delta` until they touch or `tau0` is exceeded. Returns the
/// first time the distance drops to `r_sum` or below.
pub fn brute_force_ttc(
    x_i: Vec2,
    x_j: Vec2,
    v_i: Vec2,
    v_j: Vec2,
    r_sum: f64,
    tau0: f64,
    delta: f64,
) -> Option<f64> {
    let r2 = r_sum * r_sum;
    if (x_i - x_j).norm_sq() <= r2 {
        return Some(0.0);
    }
    let steps = (tau0 / delta).ceil() as u64;
    for s in 1..=steps {
        let t = s as f64 * delta;
        let d = (x_i + v_i * t) - (x_j + v_j * t);
        if d.norm_sq() <= r2 {
            return Some(t);
        }
    }
    None
}

/// All-pairs maximum penetration of base radii.
pub fn max_penetration_brute(agents: &Agents) -> f64 {
    let n = agents.len();
    let mut max_pen: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let pen = (agents.radius[i] + agents.radius[j])
                - (agents.pos[i] - agents.pos[j]).norm();
            max_pen = max_pen.max(pen);
        }
    }
    max_pen.max(0.0)
}
