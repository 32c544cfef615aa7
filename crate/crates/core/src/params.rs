//! Solver parameters and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which anticipatory constraint runs between distant agent pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvoidanceMode {
    /// Non-penetration constraint on extrapolated future positions.
    #[default]
    #[serde(rename = "longrange")]
    LongRange,
    /// Tangential-only variant: agents sidestep instead of braking.
    Avoidance,
    /// No anticipatory constraint; short-range contact only.
    None,
}

impl std::str::FromStr for AvoidanceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "longrange" => Ok(AvoidanceMode::LongRange),
            "avoidance" => Ok(AvoidanceMode::Avoidance),
            "none" => Ok(AvoidanceMode::None),
            other => Err(format!(
                "unknown mode `{other}` (expected longrange|avoidance|none)"
            )),
        }
    }
}

impl std::fmt::Display for AvoidanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AvoidanceMode::LongRange => "longrange",
            AvoidanceMode::Avoidance => "avoidance",
            AvoidanceMode::None => "none",
        })
    }
}

/// All solver constants for one simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    /// Time step in seconds.
    pub dt: f64,
    /// Planning/inertia blending factor in [0, 1].
    pub alpha: f64,
    /// Pre-solve iterations fixing residual overlap from the previous step.
    pub stability_iters: u32,
    /// Main constraint-projection iterations per step.
    pub solve_iters: u32,
    /// Jacobi delta-averaging relaxation coefficient.
    pub omega: f64,
    /// Horizon in seconds beyond which predicted collisions are ignored.
    pub tau0: f64,
    /// Base stiffness of the anticipatory constraint, in (0, 1].
    pub k_longrange: f64,
    /// XSPH cohesion strength.
    pub xsph_c: f64,
    /// XSPH kernel support radius in meters.
    pub xsph_h: f64,
    /// Static friction coefficient.
    pub mu_static: f64,
    /// Kinetic friction coefficient.
    pub mu_kinetic: f64,
    /// Hard speed cap, m/s.
    pub v_max: f64,
    /// Hard acceleration cap, m/s^2.
    pub a_max: f64,
    /// Fractional radius inflation used only during collision checks.
    pub radius_expansion: f64,
    /// Neighbor query radius for the anticipatory constraint, meters.
    pub longrange_radius: f64,
    /// Anticipatory constraint variant.
    pub avoidance_mode: AvoidanceMode,
    /// Preferred-velocity jitter amplitude as a fraction of preferred speed.
    /// Breaks exact head-on symmetry; set to 0 for mirror-exact runs.
    pub jitter: f64,
    /// Base seed for all deterministic noise streams.
    pub rng_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1.0 / 48.0,
            alpha: 0.0385,
            stability_iters: 1,
            solve_iters: 6,
            omega: 1.2,
            tau0: 20.0,
            k_longrange: 0.24,
            xsph_c: 217.0,
            xsph_h: 7.0,
            mu_static: 0.2,
            mu_kinetic: 0.2,
            v_max: 3.0,
            a_max: 20.0,
            radius_expansion: 0.05,
            longrange_radius: 6.0,
            avoidance_mode: AvoidanceMode::LongRange,
            jitter: 0.01,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("dt must be positive")]
    NonPositiveDt,
    #[error("alpha must lie in [0, 1]")]
    AlphaOutOfRange,
    #[error("solve_iters must be at least 1")]
    ZeroIterations,
    #[error("friction coefficients must be non-negative")]
    NegativeFriction,
    #[error("omega must be positive")]
    NonPositiveOmega,
    #[error("tau0 must be positive")]
    NonPositiveTau0,
    #[error("k_longrange must lie in (0, 1]")]
    StiffnessOutOfRange,
    #[error("xsph_h must be positive")]
    NonPositiveKernelRadius,
    #[error("xsph_c must be non-negative")]
    NegativeCohesion,
    #[error("v_max must be positive")]
    NonPositiveSpeedCap,
    #[error("a_max must be positive")]
    NonPositiveAccelCap,
    #[error("radius_expansion must be non-negative")]
    NegativeRadiusExpansion,
    #[error("longrange_radius must be positive")]
    NonPositiveLongRangeRadius,
    #[error("jitter must be non-negative")]
    NegativeJitter,
    #[error("parameter {0} must be finite")]
    NonFinite(&'static str),
}

/// Check every invariant, returning the parameters unchanged when valid.
/// The first violated field determines the error.
pub fn validate_params(p: SimParams) -> Result<SimParams, ParamError> {
    for (name, v) in [
        ("dt", p.dt),
        ("alpha", p.alpha),
        ("omega", p.omega),
        ("tau0", p.tau0),
        ("k_longrange", p.k_longrange),
        ("xsph_c", p.xsph_c),
        ("xsph_h", p.xsph_h),
        ("mu_static", p.mu_static),
        ("mu_kinetic", p.mu_kinetic),
        ("v_max", p.v_max),
        ("a_max", p.a_max),
        ("radius_expansion", p.radius_expansion),
        ("longrange_radius", p.longrange_radius),
        ("jitter", p.jitter),
    ] {
        if !v.is_finite() {
            return Err(ParamError::NonFinite(name));
        }
    }
    if p.dt <= 0.0 {
        return Err(ParamError::NonPositiveDt);
    }
    if !(0.0..=1.0).contains(&p.alpha) {
        return Err(ParamError::AlphaOutOfRange);
    }
    if p.solve_iters < 1 {
        return Err(ParamError::ZeroIterations);
    }
    if p.mu_static < 0.0 || p.mu_kinetic < 0.0 {
        return Err(ParamError::NegativeFriction);
    }
    if p.omega <= 0.0 {
        return Err(ParamError::NonPositiveOmega);
    }
    if p.tau0 <= 0.0 {
        return Err(ParamError::NonPositiveTau0);
    }
    if p.k_longrange <= 0.0 || p.k_longrange > 1.0 {
        return Err(ParamError::StiffnessOutOfRange);
    }
    if p.xsph_h <= 0.0 {
        return Err(ParamError::NonPositiveKernelRadius);
    }
    if p.xsph_c < 0.0 {
        return Err(ParamError::NegativeCohesion);
    }
    if p.v_max <= 0.0 {
        return Err(ParamError::NonPositiveSpeedCap);
    }
    if p.a_max <= 0.0 {
        return Err(ParamError::NonPositiveAccelCap);
    }
    if p.radius_expansion < 0.0 {
        return Err(ParamError::NegativeRadiusExpansion);
    }
    if p.longrange_radius <= 0.0 {
        return Err(ParamError::NonPositiveLongRangeRadius);
    }
    if p.jitter < 0.0 {
        return Err(ParamError::NegativeJitter);
    }
    Ok(p)
}

/// Radius inflated by the collision-check safety margin. Never used for
/// rendering or reported metrics.
#[inline]
pub fn effective_radius(r: f64, expansion: f64) -> f64 {
    r * (1.0 + expansion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid_and_match_reference_settings() {
        let p = validate_params(SimParams::default()).unwrap();
        assert_eq!(p.dt, 1.0 / 48.0);
        assert_eq!(p.alpha, 0.0385);
        assert_eq!(p.stability_iters, 1);
        assert_eq!(p.solve_iters, 6);
        assert_eq!(p.omega, 1.2);
        assert_eq!(p.tau0, 20.0);
        assert_eq!(p.xsph_h, 7.0);
        assert_eq!(p.xsph_c, 217.0);
        assert_eq!(p.radius_expansion, 0.05);
    }

    #[test]
    fn zero_dt_rejected() {
        let p = SimParams {
            dt: 0.0,
            ..Default::default()
        };
        assert_eq!(validate_params(p), Err(ParamError::NonPositiveDt));
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let p = SimParams {
            alpha: 1.5,
            ..Default::default()
        };
        assert_eq!(validate_params(p), Err(ParamError::AlphaOutOfRange));
    }

    #[test]
    fn zero_solve_iters_rejected() {
        let p = SimParams {
            solve_iters: 0,
            ..Default::default()
        };
        assert_eq!(validate_params(p), Err(ParamError::ZeroIterations));
    }

    #[test]
    fn negative_friction_rejected() {
        let p = SimParams {
            mu_kinetic: -0.1,
            ..Default::default()
        };
        assert_eq!(validate_params(p), Err(ParamError::NegativeFriction));
    }

    #[test]
    fn effective_radius_examples() {
        assert!((effective_radius(0.5, 0.05) - 0.525).abs() < 1e-12);
        assert_eq!(effective_radius(0.5, 0.0), 0.5);
        assert!((effective_radius(2.5, 0.05) - 2.625).abs() < 1e-12);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "longrange".parse::<AvoidanceMode>().unwrap(),
            AvoidanceMode::LongRange
        );
        assert_eq!(
            "avoidance".parse::<AvoidanceMode>().unwrap(),
            AvoidanceMode::Avoidance
        );
        assert_eq!("none".parse::<AvoidanceMode>().unwrap(), AvoidanceMode::None);
        assert!("xyz".parse::<AvoidanceMode>().is_err());
    }

    proptest! {
        #[test]
        fn effective_radius_monotone(
            r1 in 0.01f64..10.0, r2 in 0.01f64..10.0,
            e1 in 0.0f64..1.0, e2 in 0.0f64..1.0,
        ) {
            let (rlo, rhi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let (elo, ehi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(effective_radius(rlo, elo) <= effective_radius(rhi, elo));
            prop_assert!(effective_radius(rlo, elo) <= effective_radius(rlo, ehi));
            prop_assert_eq!(effective_radius(rlo, 0.0), rlo);
        }
    }
}
