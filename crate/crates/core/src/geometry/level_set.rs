use serde::{Deserialize, Serialize};

use super::Point;
use crate::autodiff::{SpatialJet, Tape};

/// Closed-form level-set functions whose zero sets are material interfaces.
/// The normal of an interface points toward `{phi > 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LevelSet {
    /// `|x|^2 - radius_sq`
    Circle { radius_sq: f64 },
    /// `x_1`
    LineX1,
    /// `x_2`
    LineX2,
    /// `scale * (x - center)` on the real line.
    Point1D { center: f64, scale: f64 },
}

impl LevelSet {
    pub fn value(&self, x: Point) -> f64 {
        match *self {
            LevelSet::Circle { radius_sq } => x[0] * x[0] + x[1] * x[1] - radius_sq,
            LevelSet::LineX1 => x[0],
            LevelSet::LineX2 => x[1],
            LevelSet::Point1D { center, scale } => scale * (x[0] - center),
        }
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        match *self {
            LevelSet::Circle { .. } => [2.0 * x[0], 2.0 * x[1]],
            LevelSet::LineX1 => [1.0, 0.0],
            LevelSet::LineX2 => [0.0, 1.0],
            LevelSet::Point1D { scale, .. } => [scale, 0.0],
        }
    }

    /// Unit normal `grad phi / |grad phi|`.
    pub fn normal(&self, x: Point) -> [f64; 2] {
        let g = self.gradient(x);
        let n = g[0].hypot(g[1]);
        [g[0] / n, g[1] / n]
    }

    /// The level-set function as a jet of the given coordinate jets.
    pub fn jet(&self, tape: &mut Tape, coords: &[SpatialJet]) -> SpatialJet {
        match *self {
            LevelSet::Circle { radius_sq } => {
                let a = coords[0].mul(tape, &coords[0]);
                let b = coords[1].mul(tape, &coords[1]);
                let s = a.add(tape, &b);
                s.add_const(tape, -radius_sq)
            }
            LevelSet::LineX1 => coords[0].clone(),
            LevelSet::LineX2 => coords[1].clone(),
            LevelSet::Point1D { center, scale } => {
                let s = coords[0].add_const(tape, -center);
                s.scale(tape, scale)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gradient_norm_on_interfaces() {
        let c = LevelSet::Circle { radius_sq: 0.25 };
        for k in 0..16 {
            let th = 2.0 * PI * k as f64 / 16.0;
            let x = [0.5 * th.cos(), 0.5 * th.sin()];
            assert!(c.value(x).abs() < 1e-15);
            let g = c.gradient(x);
            assert!((g[0].hypot(g[1]) - 1.0).abs() < 1e-14);
            let n = c.normal(x);
            // outward: toward phi > 0
            assert!(c.value([x[0] + 1e-3 * n[0], x[1] + 1e-3 * n[1]]) > 0.0);
        }
        for ls in [LevelSet::LineX1, LevelSet::LineX2] {
            let g = ls.gradient([0.0, 0.0]);
            assert_eq!(g[0].hypot(g[1]), 1.0);
        }
    }
}
