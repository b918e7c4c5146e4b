use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// `(0, pi)`
    Interval,
    /// `(-1, 1)^2`
    Square,
    /// `(-1, 1)^2 \ [-1, 0]^2`
    LShape,
}

/// Straight boundary piece from `a` to `b` (a single point in 1D when `a == b`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn at(&self, t: f64) -> Point {
        [
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        ]
    }
}

fn seg(a: Point, b: Point) -> Segment {
    Segment { a, b }
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        match self {
            Domain::Interval => x[0] > 0.0 && x[0] < PI,
            Domain::Square => x[0].abs() < 1.0 && x[1].abs() < 1.0,
            Domain::LShape => {
                x[0].abs() < 1.0 && x[1].abs() < 1.0 && !(x[0] <= 0.0 && x[1] <= 0.0)
            }
        }
    }

    /// Bounding box `[lo, hi]` used by rejection sampling and grids.
    pub fn bounds(&self) -> (Point, Point) {
        match self {
            Domain::Interval => ([0.0, 0.0], [PI, 0.0]),
            _ => ([-1.0, -1.0], [1.0, 1.0]),
        }
    }

    /// Pieces that partition the boundary. The square is split into eight
    /// half-sides so that every quadrant owns two of them.
    pub fn boundary_segments(&self) -> Vec<Segment> {
        match self {
            Domain::Interval => vec![seg([0.0, 0.0], [0.0, 0.0]), seg([PI, 0.0], [PI, 0.0])],
            Domain::Square => vec![
                seg([0.0, -1.0], [1.0, -1.0]),
                seg([1.0, -1.0], [1.0, 0.0]),
                seg([1.0, 0.0], [1.0, 1.0]),
                seg([1.0, 1.0], [0.0, 1.0]),
                seg([0.0, 1.0], [-1.0, 1.0]),
                seg([-1.0, 1.0], [-1.0, 0.0]),
                seg([-1.0, 0.0], [-1.0, -1.0]),
                seg([-1.0, -1.0], [0.0, -1.0]),
            ],
            Domain::LShape => vec![
                seg([0.0, -1.0], [1.0, -1.0]),
                seg([1.0, -1.0], [1.0, 1.0]),
                seg([1.0, 1.0], [-1.0, 1.0]),
                seg([-1.0, 1.0], [-1.0, 0.0]),
                seg([-1.0, 0.0], [0.0, 0.0]),
                seg([0.0, 0.0], [0.0, -1.0]),
            ],
        }
    }

    /// Sub-boxes used for stratified interior sampling (quadrants in 2D).
    pub fn strata(&self) -> Vec<(Point, Point)> {
        match self {
            Domain::Interval => vec![([0.0, 0.0], [PI / 2.0, 0.0]), ([PI / 2.0, 0.0], [PI, 0.0])],
            Domain::Square => vec![
                ([0.0, 0.0], [1.0, 1.0]),
                ([-1.0, 0.0], [0.0, 1.0]),
                ([-1.0, -1.0], [0.0, 0.0]),
                ([0.0, -1.0], [1.0, 0.0]),
            ],
            Domain::LShape => vec![
                ([0.0, 0.0], [1.0, 1.0]),
                ([-1.0, 0.0], [0.0, 1.0]),
                ([0.0, -1.0], [1.0, 0.0]),
            ],
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Interval => PI,
            Domain::Square => 4.0,
            Domain::LShape => 3.0,
        }
    }
}
