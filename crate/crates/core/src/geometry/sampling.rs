use std::f64::consts::PI;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Domain, Point, Segment};

/// Pieces of a one-dimensional set that can be sampled by arc length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Curve {
    Arc {
        center: Point,
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
    Segment(Segment),
    Point(Point),
}

impl Curve {
    pub fn length(&self) -> f64 {
        match self {
            Curve::Arc {
                radius,
                theta0,
                theta1,
                ..
            } => radius * (theta1 - theta0),
            Curve::Segment(s) => s.length(),
            Curve::Point(_) => 0.0,
        }
    }

    /// Circle of the given radius split into its four quadrant arcs.
    pub fn quadrant_arcs(center: Point, radius: f64) -> Vec<Curve> {
        (0..4)
            .map(|k| Curve::Arc {
                center,
                radius,
                theta0: k as f64 * PI / 2.0,
                theta1: (k + 1) as f64 * PI / 2.0,
            })
            .collect()
    }

    fn at(&self, t: f64) -> Point {
        match *self {
            Curve::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let th = theta0 + t * (theta1 - theta0);
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
            Curve::Segment(s) => s.at(t),
            Curve::Point(p) => p,
        }
    }
}

/// Splits `n` into `k` near-equal counts, the first `n % k` getting one extra.
pub fn split(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Seeded ChaCha stream; the same `(seed, stream)` gives the same points on
/// every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.open01()
    }

    fn in_box(&mut self, lo: Point, hi: Point, dim: usize) -> Point {
        let x = self.range(lo[0], hi[0]);
        let y = if dim == 2 { self.range(lo[1], hi[1]) } else { 0.0 };
        [x, y]
    }

    /// Uniform interior points; stratified mode puts equal counts in every
    /// stratum (quadrant) of the domain.
    pub fn interior(&mut self, domain: Domain, n: usize, stratified: bool) -> Vec<Point> {
        let dim = domain.dim();
        let mut out = Vec::with_capacity(n);
        if stratified {
            let strata = domain.strata();
            for ((lo, hi), count) in strata.iter().zip(split(n, strata.len())) {
                for _ in 0..count {
                    out.push(self.in_box(*lo, *hi, dim));
                }
            }
        } else {
            let (lo, hi) = domain.bounds();
            while out.len() < n {
                let p = self.in_box(lo, hi, dim);
                if domain.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Arc-length uniform points on a union of curves. Stratified mode puts
    /// equal counts on every piece. Points within `1e-12` of an excluded
    /// center are redrawn.
    pub fn on_curves(&mut self, pieces: &[Curve], n: usize, stratified: bool, exclude: &[Point]) -> Vec<Point> {
        let mut out = Vec::with_capacity(n);
        let counts = if stratified {
            split(n, pieces.len())
        } else {
            let lengths: Vec<f64> = pieces.iter().map(Curve::length).collect();
            let total: f64 = lengths.iter().sum();
            let mut counts = vec![0; pieces.len()];
            for _ in 0..n {
                let k = if total > 0.0 {
                    let target = self.uniform() * total;
                    let mut acc = 0.0;
                    let mut k = pieces.len() - 1;
                    for (i, l) in lengths.iter().enumerate() {
                        acc += l;
                        if target < acc {
                            k = i;
                            break;
                        }
                    }
                    k
                } else {
                    (self.uniform() * pieces.len() as f64) as usize % pieces.len()
                };
                counts[k] += 1;
            }
            counts
        };
        for (piece, count) in pieces.iter().zip(counts) {
            for _ in 0..count {
                loop {
                    let p = piece.at(self.open01());
                    let near = exclude
                        .iter()
                        .any(|c| (p[0] - c[0]).hypot(p[1] - c[1]) < crate::autodiff::MIN_RADIUS);
                    if !near {
                        out.push(p);
                        break;
                    }
                }
            }
        }
        out
    }

    pub fn boundary(&mut self, domain: Domain, n: usize, stratified: bool, exclude: &[Point]) -> Vec<Point> {
        let pieces: Vec<Curve> = domain.boundary_segments().into_iter().map(|s| {
            if s.length() == 0.0 {
                Curve::Point(s.a)
            } else {
                Curve::Segment(s)
            }
        }).collect();
        self.on_curves(&pieces, n, stratified, exclude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_interior() {
        let mut rng = Rng::new(1, 0);
        let pts = rng.interior(Domain::Interval, 4, false);
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p[0] > 0.0 && p[0] < PI && p[1] == 0.0));
    }

    #[test]
    fn stratified_square_boundary() {
        let mut rng = Rng::new(2, 0);
        let pts = rng.boundary(Domain::Square, 8, true, &[]);
        for side in 0..4 {
            let on_side = pts
                .iter()
                .filter(|p| match side {
                    0 => p[1] == -1.0,
                    1 => p[0] == 1.0,
                    2 => p[1] == 1.0,
                    _ => p[0] == -1.0,
                })
                .count();
            assert_eq!(on_side, 2);
        }
    }

    #[test]
    fn stratified_interior_quadrants() {
        let mut rng = Rng::new(3, 0);
        let pts = rng.interior(Domain::Square, 1000, true);
        for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            let c = pts.iter().filter(|p| p[0] * sx > 0.0 && p[1] * sy > 0.0).count();
            assert_eq!(c, 250);
        }
    }

    #[test]
    fn lshape_interior_in_domain() {
        let mut rng = Rng::new(4, 0);
        for stratified in [false, true] {
            let pts = rng.interior(Domain::LShape, 500, stratified);
            assert!(pts.iter().all(|p| Domain::LShape.contains(*p)));
        }
    }

    #[test]
    fn reproducible() {
        let a = Rng::new(7, 3).interior(Domain::Square, 50, false);
        let b = Rng::new(7, 3).interior(Domain::Square, 50, false);
        let c = Rng::new(7, 4).interior(Domain::Square, 50, false);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn excluded_center() {
        let mut rng = Rng::new(5, 0);
        let chord = [Curve::Segment(Segment {
            a: [0.0, -1.0],
            b: [0.0, 1.0],
        })];
        let pts = rng.on_curves(&chord, 200, false, &[[0.0, 0.0]]);
        assert!(pts.iter().all(|p| p[1].abs() >= 1e-12 && p[0] == 0.0));
    }

    #[test]
    fn circle_radius_and_angles() {
        let mut rng = Rng::new(11, 0);
        let circle = [Curve::Arc {
            center: [0.0, 0.0],
            radius: 0.5,
            theta0: 0.0,
            theta1: 2.0 * PI,
        }];
        let pts = rng.on_curves(&circle, 1000, false, &[]);
        let mean_r = pts.iter().map(|p| p[0].hypot(p[1])).sum::<f64>() / 1000.0;
        assert!((mean_r - 0.5).abs() < 1e-14);
        // Kolmogorov-Smirnov distance of the angles against U(0, 2 pi)
        let mut th: Vec<f64> = pts
            .iter()
            .map(|p| p[1].atan2(p[0]).rem_euclid(2.0 * PI) / (2.0 * PI))
            .collect();
        th.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = th.len() as f64;
        let ks = th
            .iter()
            .enumerate()
            .map(|(i, &f)| ((i as f64 + 1.0) / n - f).abs().max((f - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS = {ks}");
    }
}
