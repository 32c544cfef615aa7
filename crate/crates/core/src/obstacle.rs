//! Static wall geometry. Obstacles carry infinite mass: collision response
//! moves only the agent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Segment { a: Vec2, b: Vec2 },
    Circle { center: Vec2, radius: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum ObstacleError {
    #[error("segment endpoints must be distinct")]
    DegenerateSegment,
    #[error("circle radius must be positive")]
    NonPositiveRadius,
    #[error("obstacle coordinates must be finite")]
    NonFinite,
}

impl Obstacle {
    pub fn validate(&self) -> Result<(), ObstacleError> {
        match *self {
            Obstacle::Segment { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    Err(ObstacleError::NonFinite)
                } else if (a - b).norm_sq() == 0.0 {
                    Err(ObstacleError::DegenerateSegment)
                } else {
                    Ok(())
                }
            }
            Obstacle::Circle { center, radius } => {
                if !center.is_finite() || !radius.is_finite() {
                    Err(ObstacleError::NonFinite)
                } else if radius <= 0.0 {
                    Err(ObstacleError::NonPositiveRadius)
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let p = Vec2::new(1.0, 2.0);
        assert_eq!(
            Obstacle::Segment { a: p, b: p }.validate(),
            Err(ObstacleError::DegenerateSegment)
        );
        assert_eq!(
            Obstacle::Circle {
                center: p,
                radius: 0.0
            }
            .validate(),
            Err(ObstacleError::NonPositiveRadius)
        );
        assert!(Obstacle::Segment {
            a: p,
            b: Vec2::new(3.0, 2.0)
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn serde_tagged() {
        let o: Obstacle = serde_json::from_str(
            r#"{"kind":"segment","a":[0.0,0.0],"b":[2.0,0.0]}"#,
        )
        .unwrap();
        assert_eq!(
            o,
            Obstacle::Segment {
                a: Vec2::new(0.0, 0.0),
                b: Vec2::new(2.0, 0.0)
            }
        );
        let c: Obstacle =
            serde_json::from_str(r#"{"kind":"circle","center":[1.0,1.0],"radius":2.0}"#).unwrap();
        assert!(matches!(c, Obstacle::Circle { .. }));
    }
}
