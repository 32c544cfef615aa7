//! Stateless constraint-projection kernels.
//!
//! Each kernel maps a snapshot of one agent pair (or agent/obstacle pair) to
//! position corrections. Accumulating, averaging, and applying corrections is
//! the solver's job; everything here is a pure function, safe to evaluate
//! from any thread.
//!
//! Pair corrections are split by inverse mass: an agent with `w = 0` never
//! moves, and for any pair `delta_i * w_j == -delta_j * w_i` componentwise.

use crate::math::Vec2;
use crate::obstacle::Obstacle;
use crate::rng::pair_tiebreak_direction;

/// Below this center distance a pair is treated as coincident and separated
/// along a deterministic direction keyed on the index pair.
pub const DEGENERATE_DIST: f64 = 1e-9;

/// Relative velocities with squared norm below this are treated as a
/// constant gap (no collision ever).
pub const TTC_A_EPSILON: f64 = 1e-9;

/// One agent's view of a pair kernel. `radius` is the collision-check
/// radius; callers apply the expansion margin before building this.
#[derive(Clone, Copy, Debug)]
pub struct PairAgent {
    pub index: usize,
    /// Committed position x^n.
    pub prev: Vec2,
    /// Predicted position x*.
    pub pred: Vec2,
    pub radius: f64,
    pub inv_mass: f64,
}

/// Position corrections for both members of a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairCorrection {
    pub delta_i: Vec2,
    pub delta_j: Vec2,
}

/// A resolved short-range contact: the correction plus the geometry the
/// friction projection needs.
#[derive(Clone, Copy, Debug)]
pub struct ContactInfo {
    pub correction: PairCorrection,
    /// Unit normal from `b` toward `a`.
    pub normal: Vec2,
    pub penetration: f64,
}

/// Short-range non-penetration projection on predicted positions, with the
/// contact geometry attached.
///
/// Returns `None` when the pair is separated. Otherwise the corrections move
/// the pair along the center line to exact touching, weighted by inverse
/// mass. Coincident centers separate along a deterministic per-pair axis.
pub fn contact_full(a: PairAgent, b: PairAgent) -> Option<ContactInfo> {
    let w_sum = a.inv_mass + b.inv_mass;
    debug_assert!(w_sum > 0.0, "contact between two immovable agents");
    let diff = a.pred - b.pred;
    let r_sum = a.radius + b.radius;
    let dist_sq = diff.norm_sq();
    if dist_sq >= r_sum * r_sum {
        return None;
    }
    let dist = dist_sq.sqrt();
    let n = if dist < DEGENERATE_DIST {
        let d = pair_tiebreak_direction(a.index, b.index);
        if a.index < b.index {
            d
        } else {
            -d
        }
    } else {
        diff / dist
    };
    let overlap = r_sum - dist;
    Some(ContactInfo {
        correction: PairCorrection {
            delta_i: n * (overlap * a.inv_mass / w_sum),
            delta_j: -n * (overlap * b.inv_mass / w_sum),
        },
        normal: n,
        penetration: overlap,
    })
}

/// [`contact_full`] without the geometry.
pub fn contact_project(a: PairAgent, b: PairAgent) -> Option<PairCorrection> {
    contact_full(a, b).map(|c| c.correction)
}

/// Kinematic friction for a pair the contact projection found overlapping.
///
/// `penetration` and contact normal `n` come from that contact. The
/// tangential part of the pair's relative displacement over the step is
/// removed entirely inside the static-friction cone, otherwise scaled by
/// `min(mu_k * penetration / |tangential|, 1)`.
pub fn friction_project(
    a: PairAgent,
    b: PairAgent,
    penetration: f64,
    n: Vec2,
    mu_static: f64,
    mu_kinetic: f64,
) -> PairCorrection {
    let w_sum = a.inv_mass + b.inv_mass;
    debug_assert!(w_sum > 0.0 && penetration > 0.0);
    let rel = (a.pred - a.prev) - (b.pred - b.prev);
    let tangential = rel - n * rel.dot(n);
    let t_norm = tangential.norm();
    if t_norm < 1e-15 {
        return PairCorrection::default();
    }
    let corr = if t_norm < mu_static * penetration {
        tangential
    } else {
        tangential * (mu_kinetic * penetration / t_norm).min(1.0)
    };
    PairCorrection {
        delta_i: -corr * (a.inv_mass / w_sum),
        delta_j: corr * (b.inv_mass / w_sum),
    }
}

/// Earliest time two constant-velocity disks of summed radius `r_sum` touch.
///
/// With `x = x_i - x_j`, `v = v_i - v_j`, the contact condition
/// `|x + t v| = r_sum` gives `t = (b - sqrt(b^2 - a c)) / a` for
/// `a = |v|^2`, `b = -x.v`, `c = |x|^2 - r_sum^2`. Only predicted contacts
/// strictly inside `(0, tau0)` are reported; already-overlapping pairs
/// (`c < 0`) are the short-range constraint's regime and map to `None`,
/// as do parallel trajectories and receding pairs.
pub fn time_to_collision(
    x_i: Vec2,
    x_j: Vec2,
    v_i: Vec2,
    v_j: Vec2,
    r_sum: f64,
    tau0: f64,
) -> Option<f64> {
    let x = x_i - x_j;
    let v = v_i - v_j;
    let a = v.norm_sq();
    if a <= TTC_A_EPSILON {
        return None;
    }
    let b = -x.dot(v);
    let c = x.norm_sq() - r_sum * r_sum;
    if c < 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let tau = (b - disc.sqrt()) / a;
    if tau > 0.0 && tau < tau0 {
        Some(tau)
    } else {
        None
    }
}

/// Snap `tau` to the last whole time step before predicted contact:
/// `tau_hat = dt * floor(tau / dt)`.
#[inline]
pub fn discretize_tau(tau: f64, dt: f64) -> f64 {
    dt * (tau / dt).floor()
}

/// Stiffness of the anticipatory constraint, decaying with the square of
/// the discretized time to collision: `k * exp(-tau_hat^2 / tau0)`.
#[inline]
pub fn longrange_stiffness(tau_hat: f64, tau0: f64, k: f64) -> f64 {
    k * (-(tau_hat * tau_hat) / tau0).exp()
}

/// Shared first half of the anticipatory kernels: extrapolate the pair to
/// the colliding future positions and project the contact there.
struct FutureContact {
    tau_hat: f64,
    tau_tilde: f64,
    /// Contact normal at the future positions.
    n: Vec2,
    /// Future-position corrections resolving the future overlap (unscaled).
    corr_i: Vec2,
    corr_j: Vec2,
    /// Per-agent velocities (x* - x^n)/dt used for the extrapolation.
    v_i: Vec2,
    v_j: Vec2,
}

fn future_contact(a: PairAgent, b: PairAgent, dt: f64, tau0: f64) -> Option<FutureContact> {
    let w_sum = a.inv_mass + b.inv_mass;
    if w_sum <= 0.0 {
        return None;
    }
    let v_i = (a.pred - a.prev) / dt;
    let v_j = (b.pred - b.prev) / dt;
    let r_sum = a.radius + b.radius;
    let tau = time_to_collision(a.prev, b.prev, v_i, v_j, r_sum, tau0)?;
    let tau_hat = discretize_tau(tau, dt);
    let tau_tilde = dt + tau_hat;
    let xt_i = a.prev + v_i * tau_tilde;
    let xt_j = b.prev + v_j * tau_tilde;
    let diff = xt_i - xt_j;
    let dist = diff.norm();
    let overlap = r_sum - dist;
    if overlap <= 0.0 {
        return None;
    }
    let n = if dist < DEGENERATE_DIST {
        let d = pair_tiebreak_direction(a.index, b.index);
        if a.index < b.index {
            d
        } else {
            -d
        }
    } else {
        diff / dist
    };
    Some(FutureContact {
        tau_hat,
        tau_tilde,
        n,
        corr_i: n * (overlap * a.inv_mass / w_sum),
        corr_j: -n * (overlap * b.inv_mass / w_sum),
        v_i,
        v_j,
    })
}

/// Anticipatory non-penetration constraint on extrapolated future positions.
///
/// The correction resolving the overlap at the colliding future positions is
/// applied to the predicted positions directly, scaled only by the
/// time-decaying stiffness. Because the future positions amplify a predicted
/// velocity change by `tau_tilde / dt`, this deliberately over-corrects the
/// future state; the exponential stiffness and the solver's delta averaging
/// keep it stable, and the surplus is what bends trajectories early enough
/// to read as anticipation.
pub fn longrange_project(
    a: PairAgent,
    b: PairAgent,
    dt: f64,
    tau0: f64,
    k: f64,
) -> Option<PairCorrection> {
    let fc = future_contact(a, b, dt, tau0)?;
    let gain = longrange_stiffness(fc.tau_hat, tau0, k);
    Some(PairCorrection {
        delta_i: fc.corr_i * gain,
        delta_j: fc.corr_j * gain,
    })
}

/// Tangential-only variant of the anticipatory constraint, also returning
/// the future contact normal (for orthogonality monitoring).
///
/// Resolves the future collision, computes the pair's relative displacement
/// from time `tau_hat` to `tau_tilde` through the corrected future
/// positions, and distributes only its tangential component (relative to
/// the future contact normal), so agents sidestep rather than brake. The
/// returned corrections are orthogonal to the contact normal.
pub fn avoidance_project_full(
    a: PairAgent,
    b: PairAgent,
    dt: f64,
    tau0: f64,
    k: f64,
) -> Option<(PairCorrection, Vec2)> {
    let fc = future_contact(a, b, dt, tau0)?;
    // Relative displacement between tau_hat and tau_tilde, with the future
    // contact resolved: each agent moves dt*v plus its share of the resolve.
    let d = (fc.v_i - fc.v_j) * dt + (fc.corr_i - fc.corr_j);
    let mut d_t = d - fc.n * d.dot(fc.n);
    // Second projection pass scrubs the rounding residual so the
    // orthogonality guarantee holds even for near-normal d.
    d_t -= fc.n * d_t.dot(fc.n);
    if d_t.norm_sq() <= 1e-24 * d.norm_sq() {
        return None;
    }
    let w_sum = a.inv_mass + b.inv_mass;
    let s = longrange_stiffness(fc.tau_hat, tau0, k);
    Some((
        PairCorrection {
            delta_i: d_t * (s * a.inv_mass / w_sum),
            delta_j: -d_t * (s * b.inv_mass / w_sum),
        },
        fc.n,
    ))
}

/// [`avoidance_project_full`] without the normal.
pub fn avoidance_project(
    a: PairAgent,
    b: PairAgent,
    dt: f64,
    tau0: f64,
    k: f64,
) -> Option<PairCorrection> {
    avoidance_project_full(a, b, dt, tau0, k).map(|(c, _)| c)
}

/// Euclidean closest point on an obstacle's surface.
///
/// Segment results clamp to the endpoints; circle results lie on the circle
/// boundary (a query at the exact center resolves to `center + radius*(1,0)`).
pub fn closest_point_on_obstacle(p: Vec2, obs: &Obstacle) -> Vec2 {
    match *obs {
        Obstacle::Segment { a, b } => {
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            a + ab * t
        }
        Obstacle::Circle { center, radius } => {
            let dir = (p - center).normalized_or(Vec2::new(1.0, 0.0));
            center + dir * radius
        }
    }
}

/// Contact plus friction against a static obstacle.
///
/// The closest surface point acts as an immovable particle of radius zero,
/// so the agent absorbs the full correction. Returns zero when the agent
/// does not penetrate the obstacle's `r`-neighborhood.
pub fn wall_project(
    pred: Vec2,
    prev: Vec2,
    r: f64,
    obs: &Obstacle,
    mu_static: f64,
    mu_kinetic: f64,
) -> Vec2 {
    // Signed distance from the agent center to the obstacle surface
    // (negative inside a circle), and the outward normal there.
    let (dist, n) = match *obs {
        Obstacle::Segment { .. } => {
            let p = closest_point_on_obstacle(pred, obs);
            let diff = pred - p;
            let d = diff.norm();
            let n = if d < DEGENERATE_DIST {
                // Agent center on the wall: push back toward where it came from.
                (prev - p).normalized_or(Vec2::new(1.0, 0.0))
            } else {
                diff / d
            };
            (d, n)
        }
        Obstacle::Circle { center, radius } => {
            let diff = pred - center;
            let d = diff.norm();
            let n = diff.normalized_or(Vec2::new(1.0, 0.0));
            (d - radius, n)
        }
    };
    let penetration = r - dist;
    if penetration <= 0.0 {
        return Vec2::default();
    }
    let contact = n * penetration;
    // Friction against the static surface: tangential part of the agent's
    // own displacement this step.
    let rel = pred - prev;
    let tangential = rel - n * rel.dot(n);
    let t_norm = tangential.norm();
    let friction = if t_norm < 1e-15 {
        Vec2::default()
    } else if t_norm < mu_static * penetration {
        -tangential
    } else {
        -tangential * (mu_kinetic * penetration / t_norm).min(1.0)
    };
    contact + friction
}
