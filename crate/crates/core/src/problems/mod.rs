//! Benchmark transmission problems `sigma Laplacian u = f` with homogeneous
//! Dirichlet data and known exact solutions.

mod sturm_liouville;

pub use sturm_liouville::{fem_exponent, normalized_det, sector_matrix, sector_of, SturmLiouvilleSolution};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::autodiff::{JetOrder, SpatialJet, Tape};
use crate::error::{Error, Result};
use crate::geometry::{polar_jets, Curve, Domain, LevelSet, Point, Segment, SideSpec};

/// Conductivities of the material-vertex benchmark, counter-clockwise from the
/// first quadrant.
pub const MATERIAL_SIGMA: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
/// Scale of the singular profile in the material-vertex benchmark.
pub const MATERIAL_A1: f64 = 3.584;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// `(0, pi)` with a conductivity jump at `pi/2`.
    Transmission1d,
    /// `(-1, 1)^2` with a circular interface `|x| = 1/2`.
    Interface,
    /// L-shaped domain with a re-entrant corner at the origin.
    LShape,
    /// `(-1, 1)^2` with a different conductivity in every quadrant.
    MaterialVertex,
}

/// Exact solution and gradient at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactValue {
    pub u: f64,
    pub grad: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Conductivity of every subdomain, indexed by [`Problem::region`].
    pub sigma: Vec<f64>,
    pub interfaces: Vec<LevelSet>,
    /// Points where the solution is singular.
    pub centers: Vec<Point>,
    /// Exact singular exponent, if the solution has one.
    pub lambda_exact: Option<f64>,
    pub singular: Option<SturmLiouvilleSolution>,
}

impl Problem {
    /// `sigma u'' = -4 sin(2x)` on `(0, pi)` with `sigma = 1` left and `3`
    /// right of `pi/2`; `u = sin(2x) / sigma`.
    pub fn transmission_1d() -> Self {
        Self {
            kind: ProblemKind::Transmission1d,
            domain: Domain::Interval,
            sigma: vec![1.0, 3.0],
            // |phi'| = 1/2, so the jump of u' is the interface output itself.
            interfaces: vec![LevelSet::Point1D {
                center: FRAC_PI_2,
                scale: 0.5,
            }],
            centers: Vec::new(),
            lambda_exact: None,
            singular: None,
        }
    }

    /// `sigma = 1` inside the circle `|x| = 1/2`, `3` outside, and
    /// `u = (x1^2 - 1)(x2^2 - 1)(4|x|^2 - 1)^2 / sigma`.
    pub fn interface() -> Self {
        Self {
            kind: ProblemKind::Interface,
            domain: Domain::Square,
            sigma: vec![1.0, 3.0],
            interfaces: vec![LevelSet::Circle { radius_sq: 0.25 }],
            centers: Vec::new(),
            lambda_exact: None,
            singular: None,
        }
    }

    /// `u = r^(2/3) sin(2/3 (theta + pi/2)) (x1^2 - 1)(x2^2 - 1)` with the
    /// polar angle in `[-pi/2, pi]`.
    pub fn lshape() -> Self {
        Self {
            kind: ProblemKind::LShape,
            domain: Domain::LShape,
            sigma: vec![1.0],
            interfaces: Vec::new(),
            centers: vec![[0.0, 0.0]],
            lambda_exact: Some(2.0 / 3.0),
            singular: None,
        }
    }

    /// `u = cos(pi x1 / 2) cos(pi x2 / 2) s(x)` where `s` is the singular
    /// solution of the vertex with quadrant conductivities `1, 2, 3, 4`.
    pub fn material_vertex() -> Result<Self> {
        let s = SturmLiouvilleSolution::solve(MATERIAL_SIGMA)?.with_a1(MATERIAL_A1);
        Ok(Self {
            kind: ProblemKind::MaterialVertex,
            domain: Domain::Square,
            sigma: MATERIAL_SIGMA.to_vec(),
            interfaces: vec![LevelSet::LineX1, LevelSet::LineX2],
            centers: vec![[0.0, 0.0]],
            lambda_exact: Some(s.lambda),
            singular: Some(s),
        })
    }

    pub fn from_kind(kind: ProblemKind) -> Result<Self> {
        Ok(match kind {
            ProblemKind::Transmission1d => Self::transmission_1d(),
            ProblemKind::Interface => Self::interface(),
            ProblemKind::LShape => Self::lshape(),
            ProblemKind::MaterialVertex => Self::material_vertex()?,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Subdomain of `x` with the interface sides chosen by `side`.
    pub fn region_on(&self, x: Point, side: &SideSpec) -> usize {
        let positive = |p: usize| side.sign(p, self.interfaces[p].value(x)) >= 0.0;
        match self.kind {
            ProblemKind::LShape => 0,
            ProblemKind::Transmission1d | ProblemKind::Interface => usize::from(positive(0)),
            ProblemKind::MaterialVertex => match (positive(0), positive(1)) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            },
        }
    }

    pub fn region(&self, x: Point) -> usize {
        self.region_on(x, &SideSpec::natural())
    }

    pub fn sigma_at(&self, x: Point) -> f64 {
        self.sigma[self.region(x)]
    }

    /// Curves making up interface `p`, split so that stratified sampling puts
    /// the same number of points in every quadrant.
    pub fn interface_curves(&self, p: usize) -> Vec<Curve> {
        let o = [0.0, 0.0];
        let half = |b: Point| Curve::Segment(Segment { a: o, b });
        match (self.kind, p) {
            (ProblemKind::Transmission1d, 0) => vec![Curve::Point([FRAC_PI_2, 0.0])],
            (ProblemKind::Interface, 0) => Curve::quadrant_arcs(o, 0.5),
            (ProblemKind::MaterialVertex, 0) => vec![half([0.0, 1.0]), half([0.0, -1.0])],
            (ProblemKind::MaterialVertex, 1) => vec![half([1.0, 0.0]), half([-1.0, 0.0])],
            _ => panic!("problem has no interface {p}"),
        }
    }

    /// The exact solution as a jet, each point evaluated with the closed form
    /// of the subdomain given in `regions`. Points on an interface can thus be
    /// evaluated as one-sided limits.
    pub fn exact_jet(&self, tape: &mut Tape, points: &[Point], regions: &[usize], order: JetOrder) -> Result<SpatialJet> {
        assert_eq!(points.len(), regions.len());
        let dim = self.dim();
        let xs = SpatialJet::coordinates(tape, points, dim, order);
        let per_region = |tape: &mut Tape, f: &dyn Fn(usize) -> f64| {
            tape.row_const(regions.iter().map(|&k| f(k)).collect())
        };
        let inv_sigma = per_region(tape, &|k| 1.0 / self.sigma[k]);
        match self.kind {
            ProblemKind::Transmission1d => {
                let s = xs[0].scale(tape, 2.0).sin(tape);
                Ok(s.mul_var(tape, inv_sigma))
            }
            ProblemKind::Interface => {
                let x2 = xs[0].mul(tape, &xs[0]);
                let y2 = xs[1].mul(tape, &xs[1]);
                let a = x2.add_const(tape, -1.0);
                let b = y2.add_const(tape, -1.0);
                let rho = x2.add(tape, &y2);
                let c = rho.scale(tape, 4.0).add_const(tape, -1.0);
                let ab = a.mul(tape, &b);
                let cc = c.mul(tape, &c);
                let q = ab.mul(tape, &cc);
                Ok(q.mul_var(tape, inv_sigma))
            }
            ProblemKind::LShape => {
                let s0 = self.singular_from_coords(tape, &xs, points, regions)?;
                let qx = xs[0].mul(tape, &xs[0]).add_const(tape, -1.0);
                let qy = xs[1].mul(tape, &xs[1]).add_const(tape, -1.0);
                let q = qx.mul(tape, &qy);
                Ok(s0.mul(tape, &q))
            }
            ProblemKind::MaterialVertex => {
                let s = self.singular_from_coords(tape, &xs, points, regions)?;
                let cx = xs[0].scale(tape, FRAC_PI_2).cos(tape);
                let cy = xs[1].scale(tape, FRAC_PI_2).cos(tape);
                let c = cx.mul(tape, &cy);
                Ok(c.mul(tape, &s))
            }
        }
    }

    /// The singular function alone (`s0` for the corner, `s*` for the
    /// material vertex); `None` for problems without a singular point.
    pub fn singular_jet(
        &self,
        tape: &mut Tape,
        points: &[Point],
        regions: &[usize],
        order: JetOrder,
    ) -> Result<Option<SpatialJet>> {
        if self.centers.is_empty() {
            return Ok(None);
        }
        let xs = SpatialJet::coordinates(tape, points, 2, order);
        self.singular_from_coords(tape, &xs, points, regions).map(Some)
    }

    fn singular_from_coords(
        &self,
        tape: &mut Tape,
        xs: &[SpatialJet],
        points: &[Point],
        regions: &[usize],
    ) -> Result<SpatialJet> {
        let (r, _) = polar_jets(tape, xs, points, self.centers[0], 0)?;
        match self.kind {
            ProblemKind::LShape => {
                let theta = SpatialJet::atan2(&xs[1], &xs[0], tape, None)?;
                let arg = theta.scale(tape, 2.0 / 3.0).add_const(tape, PI / 3.0);
                let ang = arg.sin(tape);
                let radial = r.powf(tape, 2.0 / 3.0)?;
                Ok(radial.mul(tape, &ang))
            }
            ProblemKind::MaterialVertex => {
                let sol = self.singular.as_ref().expect("material problem carries its singular solution");
                let lambda = sol.lambda;
                let offsets = points
                    .iter()
                    .zip(regions)
                    .map(|(p, &k)| {
                        let t = p[1].atan2(p[0]);
                        let lo = k as f64 * FRAC_PI_2 - 1e-9;
                        let hi = (k + 1) as f64 * FRAC_PI_2 + 1e-9;
                        if (lo..=hi).contains(&t) {
                            0.0
                        } else {
                            2.0 * PI
                        }
                    })
                    .collect();
                let offsets = tape.row_const(offsets);
                let theta = SpatialJet::atan2(&xs[1], &xs[0], tape, Some(offsets))?;
                let lt = theta.scale(tape, lambda);
                let a = tape.row_const(regions.iter().map(|&k| sol.a[k]).collect());
                let b = tape.row_const(regions.iter().map(|&k| sol.b[k]).collect());
                let sa = lt.sin(tape).mul_var(tape, a);
                let cb = lt.cos(tape).mul_var(tape, b);
                let ang = sa.add(tape, &cb);
                let radial = r.powf(tape, lambda)?;
                Ok(radial.mul(tape, &ang))
            }
            _ => unreachable!("problem without singular point"),
        }
    }

    fn natural_regions(&self, points: &[Point]) -> Vec<usize> {
        points.iter().map(|&p| self.region(p)).collect()
    }

    /// Exact values and gradients.
    pub fn exact(&self, points: &[Point]) -> Result<Vec<ExactValue>> {
        let mut tape = Tape::new();
        let regions = self.natural_regions(points);
        let j = self.exact_jet(&mut tape, points, &regions, JetOrder::Gradient)?;
        let u = tape.value(j.u);
        let gx = tape.value(j.grad[0]);
        let gy = if self.dim() == 2 { Some(tape.value(j.grad[1])) } else { None };
        Ok((0..points.len())
            .map(|i| ExactValue {
                u: u[i],
                grad: [gx[i], gy.map_or(0.0, |g| g[i])],
            })
            .collect())
    }

    /// Source term `f = sigma Laplacian u`.
    pub fn source(&self, points: &[Point]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let regions = self.natural_regions(points);
        let j = self.exact_jet(&mut tape, points, &regions, JetOrder::Laplacian)?;
        let lap = j.laplacian(&mut tape);
        Ok(tape
            .value(lap)
            .iter()
            .zip(&regions)
            .map(|(l, &k)| self.sigma[k] * l)
            .collect())
    }

    /// `sigma+ d_nu u+ - sigma- d_nu u-` of the exact solution at points of
    /// interface `p`, with `nu` pointing toward `{phi_p > 0}`.
    pub fn exact_flux_jump(&self, points: &[Point], p: usize) -> Result<Vec<f64>> {
        let ls = self
            .interfaces
            .get(p)
            .ok_or_else(|| Error::Domain(format!("problem has no interface {p}")))?;
        let flux = |sign: f64| -> Result<Vec<f64>> {
            let side = SideSpec::natural().force(p, sign);
            let regions: Vec<usize> = points.iter().map(|&x| self.region_on(x, &side)).collect();
            let mut tape = Tape::new();
            let j = self.exact_jet(&mut tape, points, &regions, JetOrder::Gradient)?;
            Ok(points
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let n = ls.normal(x);
                    let d: f64 = j.grad.iter().enumerate().map(|(k, &g)| tape.value(g)[i] * n[k]).sum();
                    self.sigma[regions[i]] * d
                })
                .collect())
        };
        let plus = flux(1.0)?;
        let minus = flux(-1.0)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| a - b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_d_values() {
        let p = Problem::transmission_1d();
        let e = p.exact(&[[PI / 4.0, 0.0], [3.0 * PI / 4.0, 0.0]]).unwrap();
        assert!((e[0].u - 1.0).abs() < 1e-15);
        assert!((e[1].u + 1.0 / 3.0).abs() < 1e-15);
        let jump = p.exact_flux_jump(&[[FRAC_PI_2, 0.0]], 0).unwrap();
        assert!(jump[0].abs() < 1e-12);
    }

    #[test]
    fn interface_values() {
        let p = Problem::interface();
        let e = p.exact(&[[0.0, 0.0], [0.5, 0.0], [0.3, 0.4]]).unwrap();
        assert_eq!(e[0].u, 1.0);
        assert!(e[1].u.abs() < 1e-15 && e[2].u.abs() < 1e-15);
        assert_eq!(p.region([0.0, 0.0]), 0);
        assert_eq!(p.region([0.9, 0.0]), 1);
    }

    #[test]
    fn lshape_vanishes_on_corner_legs() {
        let p = Problem::lshape();
        let e = p.exact(&[[-0.5, 0.0], [0.0, -0.5], [0.5, 1.0], [1.0, 0.3]]).unwrap();
        for v in e {
            assert!(v.u.abs() < 1e-15, "{v:?}");
        }
        assert_eq!(p.lambda_exact, Some(2.0 / 3.0));
    }

    #[test]
    fn material_sigma_and_sectors() {
        let p = Problem::material_vertex().unwrap();
        assert_eq!(p.sigma_at([0.5, 0.5]), 1.0);
        assert_eq!(p.sigma_at([-0.5, 0.5]), 2.0);
        assert_eq!(p.sigma_at([-0.5, -0.5]), 3.0);
        assert_eq!(p.sigma_at([0.5, -0.5]), 4.0);
        let up = SideSpec::natural().force(0, 1.0);
        let down = SideSpec::natural().force(0, -1.0);
        assert_eq!(p.region_on([0.0, 0.5], &up), 0);
        assert_eq!(p.region_on([0.0, 0.5], &down), 1);
        assert_eq!(p.region_on([0.0, -0.5], &down), 2);
        assert_eq!(p.region_on([0.0, -0.5], &up), 3);
    }

    #[test]
    fn material_profile_is_continuous_across_axes() {
        let p = Problem::material_vertex().unwrap();
        let pts = [[0.0, 0.5], [0.0, -0.3], [0.7, 0.0], [-0.2, 0.0]];
        for (i, x) in pts.iter().enumerate() {
            let q = if i < 2 { 0 } else { 1 };
            let mut vals = Vec::new();
            for s in [1.0, -1.0] {
                let k = p.region_on(*x, &SideSpec::natural().force(q, s));
                let mut t = Tape::new();
                let j = p.exact_jet(&mut t, &[*x], &[k], JetOrder::Value).unwrap();
                vals.push(t.scalar(j.u));
            }
            assert!((vals[0] - vals[1]).abs() < 1e-12, "{x:?}: {vals:?}");
        }
    }
}
