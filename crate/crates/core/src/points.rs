//! Candidate and participant scoring math.

use serde::{Deserialize, Serialize};

/// Net point of a candidate: each upvote counts +1, each downvote −1.
pub fn candidate_point(upvotes: u32, downvotes: u32) -> i64 {
    i64::from(upvotes) - i64::from(downvotes)
}

/// Level function selector. `Linear` is the default curve
/// `floor(0.4 * (2x + 130 - 20))`; a logarithmic alternative can be
/// configured for deployments that prefer slower late-game leveling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "lowercase")]
pub enum LevelCurve {
    #[default]
    Linear,
    Logarithmic { scale: f64, offset: f64 },
}

/// Level for a participant point total, floored to an integer.
///
/// The linear curve is evaluated in exact integer arithmetic:
/// `floor(0.4 * (2x + 110)) = floor((8x + 440) / 10)`.
pub fn level_for_points(points: i64, curve: &LevelCurve) -> i64 {
    match curve {
        LevelCurve::Linear => (8 * points + 440).div_euclid(10),
        LevelCurve::Logarithmic { scale, offset } => {
            let x = points.max(0) as f64;
            (scale * (1.0 + x).ln() + offset).floor() as i64
        }
    }
}

/// Level under the default (linear) curve.
pub fn default_level(points: i64) -> i64 {
    level_for_points(points, &LevelCurve::Linear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_worked_example() {
        // 3 upvotes and 1 downvote net out at 2.
        assert_eq!(candidate_point(3, 1), 2);
    }

    #[test]
    fn point_edge_tallies() {
        assert_eq!(candidate_point(0, 0), 0);
        assert_eq!(candidate_point(4, 4), 0);
        assert_eq!(candidate_point(0, 3), -3);
    }

    #[test]
    fn level_printed_formula_values() {
        assert_eq!(default_level(0), 44);
        assert_eq!(default_level(70), 100);
    }

    #[test]
    fn level_floors_fractions() {
        // floor(0.8 * 1 + 44) = floor(44.8); exact rational check: 448/10.
        let exact_floor = 448i64.div_euclid(10);
        assert_eq!(exact_floor, 44);
        assert_eq!(default_level(1), exact_floor);
    }

    #[test]
    fn level_handles_negative_totals() {
        assert_eq!(default_level(-100), (8 * -100i64 + 440).div_euclid(10));
        assert!(default_level(-100) <= default_level(0));
    }

    #[test]
    fn logarithmic_curve_is_selectable() {
        let curve = LevelCurve::Logarithmic {
            scale: 10.0,
            offset: 1.0,
        };
        assert_eq!(level_for_points(0, &curve), 1);
        assert!(level_for_points(1000, &curve) > level_for_points(10, &curve));
    }
}
