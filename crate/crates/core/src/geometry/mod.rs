//! Level sets, cutoff and weight functions, polar coordinates, domains and samplers.

mod cutoff;
mod domain;
mod level_set;
mod sampling;

pub use cutoff::{eta0, Cutoff};
pub use domain::{Domain, Segment};
pub use level_set::LevelSet;
pub use sampling::{split, Curve, Rng};

use crate::autodiff::{self, SpatialJet, Tape, MIN_RADIUS};
use crate::error::{Error, Result};

/// A point in the plane. One-dimensional problems use `x[0]` and keep `x[1] = 0`.
pub type Point = [f64; 2];

/// Which side of each interface an evaluation uses. Interfaces without an
/// override take the side given by the sign of their level set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SideSpec {
    forced: Vec<(usize, f64)>,
}

impl SideSpec {
    pub fn natural() -> Self {
        Self::default()
    }

    /// Evaluates interface `p` as a limit from `{phi_p > 0}` (`sign = 1`) or
    /// `{phi_p < 0}` (`sign = -1`).
    pub fn force(mut self, p: usize, sign: f64) -> Self {
        assert!(sign == 1.0 || sign == -1.0, "side must be +1 or -1");
        self.forced.retain(|(q, _)| *q != p);
        self.forced.push((p, sign));
        self
    }

    pub fn forced(&self, p: usize) -> Option<f64> {
        self.forced.iter().find(|(q, _)| *q == p).map(|(_, s)| *s)
    }

    pub fn is_natural(&self) -> bool {
        self.forced.is_empty()
    }

    /// The effective sign of interface `p` given the level-set value there.
    pub fn sign(&self, p: usize, phi: f64) -> f64 {
        self.forced(p).unwrap_or_else(|| autodiff::sign0(phi))
    }
}

pub fn norm(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// Weight functions that tame the non-integrable residuals of singular units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// `min(40 |x|^2, 1)` for the re-entrant corner PDE term.
    LShape,
    /// `min(40 |x|^2, 1)` for the material-vertex PDE term.
    MaterialArea,
    /// `min(40 |x|, 1)` for the material-vertex interface term.
    MaterialLine,
}

pub fn weight_omega(kind: WeightKind, x: Point) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    match kind {
        WeightKind::LShape | WeightKind::MaterialArea => (40.0 * r2).min(1.0),
        WeightKind::MaterialLine => (40.0 * r2.sqrt()).min(1.0),
    }
}

/// Radius and unit-direction jets about `center`, built from coordinate jets.
pub fn polar_jets(
    tape: &mut Tape,
    coords: &[SpatialJet],
    points: &[Point],
    center: Point,
    center_index: usize,
) -> Result<(SpatialJet, [SpatialJet; 2])> {
    if let Some(p) = points
        .iter()
        .find(|p| !((p[0] - center[0]).hypot(p[1] - center[1]) >= MIN_RADIUS))
    {
        return Err(Error::AtCenter {
            center: center_index,
            x: p[0],
            y: p[1],
        });
    }
    let dx = coords[0].add_const(tape, -center[0]);
    let dy = coords[1].add_const(tape, -center[1]);
    let r2 = {
        let a = dx.mul(tape, &dx);
        let b = dy.mul(tape, &dy);
        a.add(tape, &b)
    };
    let r = r2.sqrt(tape)?;
    let inv = r.recip(tape)?;
    let ex = dx.mul(tape, &inv);
    let ey = dy.mul(tape, &inv);
    Ok((r, [ex, ey]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::JetOrder;

    #[test]
    fn weights() {
        assert_eq!(weight_omega(WeightKind::LShape, [0.0, 0.0]), 0.0);
        assert_eq!(weight_omega(WeightKind::LShape, [1.0, 0.0]), 1.0);
        assert!((weight_omega(WeightKind::MaterialLine, [0.01, 0.0]) - 0.4).abs() < 1e-15);
        assert!((weight_omega(WeightKind::MaterialArea, [0.1, 0.0]) - 0.4).abs() < 1e-15);
        // |x|^2 > 0.025 is unweighted
        assert_eq!(weight_omega(WeightKind::LShape, [0.16, 0.0]), 1.0);
    }

    #[test]
    fn polar_axes() {
        let mut t = Tape::new();
        let pts = [[1.0, 0.0], [0.0, 2.0]];
        let c = SpatialJet::coordinates(&mut t, &pts, 2, JetOrder::Hessian);
        let (r, e) = polar_jets(&mut t, &c, &pts, [0.0, 0.0], 0).unwrap();
        assert_eq!(t.value(r.u), &[1.0, 2.0]);
        assert_eq!(t.value(e[0].u), &[1.0, 0.0]);
        assert_eq!(t.value(e[1].u), &[0.0, 1.0]);
        assert_eq!(t.value(r.ux())[0], 1.0);
        assert_eq!(t.value(r.uy())[1], 1.0);
        // d2r/dx2 = y^2/r^3
        assert!((t.value(r.uxx())[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polar_center_is_an_error() {
        let mut t = Tape::new();
        let pts = [[0.25, 0.25]];
        let c = SpatialJet::coordinates(&mut t, &pts, 2, JetOrder::Gradient);
        assert!(matches!(
            polar_jets(&mut t, &c, &pts, [0.25, 0.25], 3),
            Err(Error::AtCenter { center: 3, .. })
        ));
    }
}
