//! Scalar field architectures built from MLPs.
//!
//! * classical: `u = w(x)`
//! * interface: `u = w_0 + sum_p w_p |phi_p|`
//! * corner: `u = w_0 + sum_i eta_i w_i + sum_i eta_i r_i^lambda_i phi_i(xhat_i)`
//! * material vertex: `u = w + eta r^lambda phi(xhat)` where
//!   `w = w10 + w20 eta + sum_p (w1p + w2p eta) |phi_p|` and `phi` is itself an
//!   interface field of `xhat` whose kinks lie on the same interfaces.
//!
//! Here `r_i = |x - x_i|`, `xhat_i = (x - x_i) / r_i` and `eta_i = eta(r_i)`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{JetOrder, ParamId, ParamStore, SpatialJet, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::{norm, polar_jets, Cutoff, LevelSet, Point, Rng};
use crate::network::{Activation, Mlp};

pub use crate::geometry::SideSpec;

/// Points with `|phi| < ON_INTERFACE` cannot be evaluated with the natural side.
pub const ON_INTERFACE: f64 = 1e-14;
/// One-sided evaluation requires `|phi| < NEAR_INTERFACE`.
pub const NEAR_INTERFACE: f64 = 1e-9;
/// Initial value of every trainable exponent.
pub const LAMBDA_INIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Classical,
    Interface,
    Corner,
    MaterialVertex,
}

/// `eta(r) r^lambda phi(xhat)` about `center`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularUnit {
    pub center: Point,
    pub lambda: ParamId,
    pub angular: Mlp,
    /// Level sets in `xhat` coordinates with the index of the global interface
    /// they coincide with.
    pub angular_interfaces: Vec<(LevelSet, usize)>,
}

/// One row of a singular report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularRow {
    pub theta: f64,
    pub phi: f64,
    /// `sigma(theta) d phi / d theta`
    pub flux: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Field {
    kind: FieldKind,
    dim: usize,
    net: Mlp,
    level_sets: Vec<LevelSet>,
    cutoff: Cutoff,
    units: Vec<SingularUnit>,
    #[serde(skip)]
    params: ParamStore,
}

fn check_outputs(sizes: &[usize], want: usize, what: &str) -> Result<()> {
    match sizes.last() {
        Some(&n) if n == want => Ok(()),
        _ => Err(Error::InvalidShape(format!(
            "{what} network {sizes:?} must have {want} outputs"
        ))),
    }
}

impl Field {
    pub fn classical(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_outputs(sizes, 1, "classical")?;
        let mut params = ParamStore::new();
        let mut rng = Rng::new(seed, 0);
        let net = Mlp::new(&mut params, "w", sizes, activation, &mut rng)?;
        Ok(Self {
            kind: FieldKind::Classical,
            dim: sizes[0],
            net,
            level_sets: Vec::new(),
            cutoff: Cutoff::default(),
            units: Vec::new(),
            params,
        })
    }

    pub fn interface(sizes: &[usize], activation: Activation, level_sets: Vec<LevelSet>, seed: u64) -> Result<Self> {
        check_outputs(sizes, level_sets.len() + 1, "interface")?;
        let mut params = ParamStore::new();
        let mut rng = Rng::new(seed, 0);
        let net = Mlp::new(&mut params, "w", sizes, activation, &mut rng)?;
        Ok(Self {
            kind: FieldKind::Interface,
            dim: sizes[0],
            net,
            level_sets,
            cutoff: Cutoff::default(),
            units: Vec::new(),
            params,
        })
    }

    /// One singular unit per center, `w` with `centers.len() + 1` outputs.
    pub fn corner(
        w_sizes: &[usize],
        angular_sizes: &[usize],
        centers: &[Point],
        cutoff: Cutoff,
        seed: u64,
    ) -> Result<Self> {
        check_outputs(w_sizes, centers.len() + 1, "corner")?;
        check_outputs(angular_sizes, 1, "angular")?;
        let mut params = ParamStore::new();
        let mut rng = Rng::new(seed, 0);
        let net = Mlp::new(&mut params, "w", w_sizes, Activation::Tanh, &mut rng)?;
        let units = centers
            .iter()
            .enumerate()
            .map(|(i, &center)| {
                let angular = Mlp::new(&mut params, &format!("phi{i}"), angular_sizes, Activation::Tanh, &mut rng)?;
                let lambda = params.add(&format!("lambda{i}"), 1, 1, vec![LAMBDA_INIT]);
                Ok(SingularUnit {
                    center,
                    lambda,
                    angular,
                    angular_interfaces: Vec::new(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            kind: FieldKind::Corner,
            dim: 2,
            net,
            level_sets: Vec::new(),
            cutoff,
            units,
            params,
        })
    }

    /// A vertex at the origin where the coordinate axes `x1 = 0` and `x2 = 0`
    /// separate four materials. `w_sizes` needs `2P + 2 = 6` outputs and
    /// `angular_sizes` `P + 1 = 3`.
    pub fn material_vertex(w_sizes: &[usize], angular_sizes: &[usize], cutoff: Cutoff, seed: u64) -> Result<Self> {
        let level_sets = vec![LevelSet::LineX1, LevelSet::LineX2];
        let p = level_sets.len();
        check_outputs(w_sizes, 2 * p + 2, "material-vertex")?;
        check_outputs(angular_sizes, p + 1, "angular")?;
        let mut params = ParamStore::new();
        let mut rng = Rng::new(seed, 0);
        let net = Mlp::new(&mut params, "w", w_sizes, Activation::Tanh, &mut rng)?;
        let angular = Mlp::new(&mut params, "phi0", angular_sizes, Activation::Tanh, &mut rng)?;
        let lambda = params.add("lambda0", 1, 1, vec![LAMBDA_INIT]);
        let unit = SingularUnit {
            center: [0.0, 0.0],
            lambda,
            angular,
            // For a vertex at the origin, xhat_p = 0 exactly where x_p = 0.
            angular_interfaces: level_sets.iter().copied().zip(0..).collect(),
        };
        Ok(Self {
            kind: FieldKind::MaterialVertex,
            dim: 2,
            net,
            level_sets,
            cutoff,
            units: vec![unit],
            params,
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn level_sets(&self) -> &[LevelSet] {
        &self.level_sets
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn units(&self) -> &[SingularUnit] {
        &self.units
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Replaces the parameters, e.g. after loading a checkpoint. Every block
    /// the field refers to must exist with the right shape.
    pub fn set_params(&mut self, params: ParamStore) -> Result<()> {
        if !self.params.is_empty() && params.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        let blocks = params.blocks();
        for (id, rows, cols) in self.block_shapes() {
            match blocks.get(id.0) {
                Some(b) if b.rows == rows && b.cols == cols => {}
                Some(b) => {
                    return Err(Error::InvalidShape(format!(
                        "block {} is {}x{}, expected {rows}x{cols}",
                        b.name, b.rows, b.cols
                    )))
                }
                None => return Err(Error::InvalidShape(format!("missing parameter block {}", id.0))),
            }
        }
        if blocks.iter().map(|b| b.len()).sum::<usize>() != params.len() {
            return Err(Error::InvalidShape("blocks do not cover the parameter vector".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Shapes of every parameter block the field uses.
    fn block_shapes(&self) -> Vec<(ParamId, usize, usize)> {
        let mlp = |net: &Mlp, out: &mut Vec<(ParamId, usize, usize)>| {
            for (&(a, b), w) in net.layers().iter().zip(net.sizes().windows(2)) {
                out.push((a, w[1], w[0]));
                out.push((b, w[1], 1));
            }
        };
        let mut out = Vec::new();
        mlp(&self.net, &mut out);
        for u in &self.units {
            mlp(&u.angular, &mut out);
            out.push((u.lambda, 1, 1));
        }
        out
    }

    /// Number of trainable scalars, exponents included.
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.units.iter().map(|u| self.params.get(u.lambda)[0]).collect()
    }

    /// Sign rows `sign(phi_p)` (or the forced side) for the level sets
    /// `level_sets`, whose entries are tagged with global interface indices.
    fn sign_rows(
        tape: &mut Tape,
        points: &[Point],
        phis: &[SpatialJet],
        global: &[usize],
        side: &SideSpec,
    ) -> Result<Vec<Var>> {
        phis.iter()
            .zip(global)
            .map(|(phi, &p)| {
                let vals = tape.value(phi.u);
                let forced = side.forced(p);
                let mut signs = Vec::with_capacity(vals.len());
                for (x, &v) in points.iter().zip(vals) {
                    match forced {
                        Some(s) => {
                            if v.abs() >= NEAR_INTERFACE {
                                return Err(Error::NotOnInterface {
                                    interface: p,
                                    x: x[0],
                                    y: x[1],
                                    value: v,
                                });
                            }
                            signs.push(s);
                        }
                        None => {
                            if !(v.abs() >= ON_INTERFACE) {
                                return Err(Error::OnInterface {
                                    interface: p,
                                    x: x[0],
                                    y: x[1],
                                    value: v,
                                });
                            }
                            signs.push(v.signum());
                        }
                    }
                }
                Ok(tape.row_const(signs))
            })
            .collect()
    }

    /// `rows[0] + sum_p rows[p + 1] |phi_p|` with the given sign rows.
    fn combine_interface(tape: &mut Tape, rows: &[SpatialJet], phis: &[SpatialJet], signs: &[Var]) -> SpatialJet {
        let mut u = rows[0].clone();
        for ((row, phi), &s) in rows[1..].iter().zip(phis).zip(signs) {
            let a = phi.abs_with_signs(tape, s);
            let t = row.mul(tape, &a);
            u = u.add(tape, &t);
        }
        u
    }

    /// Evaluates the angular function of `unit` at points given directly in
    /// `xhat` coordinates, once per requested side.
    pub fn angular_sides(
        &self,
        tape: &mut Tape,
        unit: usize,
        xhat: &[Point],
        order: JetOrder,
        sides: &[SideSpec],
    ) -> Result<Vec<SpatialJet>> {
        let u = self.units.get(unit).ok_or(Error::NoSingularUnit)?;
        let coords = SpatialJet::coordinates(tape, xhat, 2, order);
        self.angular_from_coords(tape, u, xhat, &coords, sides)
    }

    fn angular_from_coords(
        &self,
        tape: &mut Tape,
        unit: &SingularUnit,
        xhat_points: &[Point],
        xhat: &[SpatialJet],
        sides: &[SideSpec],
    ) -> Result<Vec<SpatialJet>> {
        let rows = unit.angular.forward_rows(tape, &self.params, xhat);
        let phis: Vec<SpatialJet> = unit.angular_interfaces.iter().map(|(ls, _)| ls.jet(tape, xhat)).collect();
        let global: Vec<usize> = unit.angular_interfaces.iter().map(|(_, p)| *p).collect();
        sides
            .iter()
            .map(|side| {
                let signs = Self::sign_rows(tape, xhat_points, &phis, &global, side)?;
                Ok(Self::combine_interface(tape, &rows, &phis, &signs))
            })
            .collect()
    }

    /// Evaluates the field at `points`, once per requested side. Networks are
    /// evaluated once and shared between the sides.
    pub fn eval_sides(
        &self,
        tape: &mut Tape,
        points: &[Point],
        order: JetOrder,
        sides: &[SideSpec],
    ) -> Result<Vec<SpatialJet>> {
        let xs = SpatialJet::coordinates(tape, points, self.dim, order);
        let rows = self.net.forward_rows(tape, &self.params, &xs);
        let phis: Vec<SpatialJet> = self.level_sets.iter().map(|ls| ls.jet(tape, &xs)).collect();
        let global: Vec<usize> = (0..phis.len()).collect();
        let signs: Vec<Vec<Var>> = sides
            .iter()
            .map(|side| Self::sign_rows(tape, points, &phis, &global, side))
            .collect::<Result<_>>()?;

        // Singular parts: (cutoff, per-side eta r^lambda phi).
        let mut etas = Vec::with_capacity(self.units.len());
        let mut singular: Vec<Vec<SpatialJet>> = Vec::with_capacity(self.units.len());
        for (i, unit) in self.units.iter().enumerate() {
            let (r, xhat) = polar_jets(tape, &xs, points, unit.center, i)?;
            let eta = self.cutoff.jet(tape, &r);
            let lambda = tape.param(&self.params, unit.lambda);
            let rl = r.pow_param(tape, lambda)?;
            let er = eta.mul(tape, &rl);
            let xhat_points: Vec<Point> = points
                .iter()
                .map(|p| {
                    let d = [p[0] - unit.center[0], p[1] - unit.center[1]];
                    let n = norm(d);
                    [d[0] / n, d[1] / n]
                })
                .collect();
            let phi = self.angular_from_coords(tape, unit, &xhat_points, &xhat, sides)?;
            singular.push(phi.iter().map(|ph| er.mul(tape, ph)).collect());
            etas.push(eta);
        }

        let mut out = Vec::with_capacity(sides.len());
        for (k, sign) in signs.iter().enumerate() {
            let mut u = match self.kind {
                FieldKind::Classical | FieldKind::Interface => Self::combine_interface(tape, &rows, &phis, sign),
                FieldKind::Corner => {
                    let mut u = rows[0].clone();
                    for (eta, w) in etas.iter().zip(&rows[1..]) {
                        let t = eta.mul(tape, w);
                        u = u.add(tape, &t);
                    }
                    u
                }
                FieldKind::MaterialVertex => {
                    let p = phis.len();
                    let eta = &etas[0];
                    let blend = |tape: &mut Tape, j: usize| {
                        let t = rows[p + 1 + j].mul(tape, eta);
                        rows[j].add(tape, &t)
                    };
                    let parts: Vec<SpatialJet> = (0..=p).map(|j| blend(tape, j)).collect();
                    Self::combine_interface(tape, &parts, &phis, sign)
                }
            };
            for s in &singular {
                u = u.add(tape, &s[k]);
            }
            out.push(u);
        }
        Ok(out)
    }

    pub fn eval(&self, tape: &mut Tape, points: &[Point], order: JetOrder) -> Result<SpatialJet> {
        Ok(self.eval_sides(tape, points, order, &[SideSpec::natural()])?.remove(0))
    }

    /// Flux jump `sigma+ d_nu u+ - sigma- d_nu u-` across interface `p`
    /// (described by `ls`), with `nu` pointing toward `{phi_p > 0}`.
    #[allow(clippy::too_many_arguments)]
    pub fn jump_normal(
        &self,
        tape: &mut Tape,
        points: &[Point],
        p: usize,
        ls: &LevelSet,
        sigma_plus: &[f64],
        sigma_minus: &[f64],
    ) -> Result<Var> {
        let sides = [SideSpec::natural().force(p, 1.0), SideSpec::natural().force(p, -1.0)];
        let j = self.eval_sides(tape, points, JetOrder::Gradient, &sides)?;
        Ok(directional_jump(tape, &j[0], &j[1], points, ls, self.dim, sigma_plus, sigma_minus))
    }

    /// Angular profile, its flux `sigma(theta) d/dtheta phi` and the current
    /// exponent of `unit` at the angles `thetas` (which should avoid the
    /// angular interfaces).
    pub fn singular_report(
        &self,
        unit: usize,
        thetas: &[f64],
        sigma: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<SingularRow>> {
        if self.units.is_empty() {
            return Err(Error::NoSingularUnit);
        }
        let xhat: Vec<Point> = thetas.iter().map(|t| [t.cos(), t.sin()]).collect();
        let mut tape = Tape::new();
        let j = self
            .angular_sides(&mut tape, unit, &xhat, JetOrder::Gradient, &[SideSpec::natural()])?
            .remove(0);
        let (v, gx, gy) = (tape.value(j.u), tape.value(j.grad[0]), tape.value(j.grad[1]));
        Ok(thetas
            .iter()
            .enumerate()
            .map(|(i, &t)| SingularRow {
                theta: t,
                phi: v[i],
                flux: sigma(t) * (-t.sin() * gx[i] + t.cos() * gy[i]),
            })
            .collect())
    }
}

/// `sigma+ nu . grad u+ - sigma- nu . grad u-` as a row node.
#[allow(clippy::too_many_arguments)]
pub(crate) fn directional_jump(
    tape: &mut Tape,
    plus: &SpatialJet,
    minus: &SpatialJet,
    points: &[Point],
    ls: &LevelSet,
    dim: usize,
    sigma_plus: &[f64],
    sigma_minus: &[f64],
) -> Var {
    let normals: Vec<[f64; 2]> = points.iter().map(|&x| ls.normal(x)).collect();
    let nu: Vec<Var> = (0..dim)
        .map(|k| tape.row_const(normals.iter().map(|n| n[k]).collect()))
        .collect();
    let dp = plus.directional(tape, &nu);
    let dm = minus.directional(tape, &nu);
    let sp = tape.row_const(sigma_plus.to_vec());
    let sm = tape.row_const(sigma_minus.to_vec());
    let a = tape.mul(sp, dp);
    let b = tape.mul(sm, dm);
    tape.sub(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn zero(field: &mut Field) {
        field.params_mut().values_mut().iter_mut().for_each(|v| *v = 0.0);
    }

    /// Sets the last-layer bias of the main network and zeroes its last weights,
    /// making every output a constant.
    fn constant_outputs(field: &mut Field, c: &[f64]) {
        let (wid, bid) = *field.net.layers().last().unwrap();
        let wb = field.params.block(wid).clone();
        let bb = field.params.block(bid).clone();
        let vals = field.params.values_mut();
        vals[wb.offset..wb.offset + wb.len()].iter_mut().for_each(|v| *v = 0.0);
        vals[bb.offset..bb.offset + bb.len()].copy_from_slice(c);
    }

    #[test]
    fn interface_constant_outputs() {
        let mut f = Field::interface(&[2, 4, 2], Activation::Tanh, vec![LevelSet::Circle { radius_sq: 0.25 }], 1).unwrap();
        constant_outputs(&mut f, &[0.3, 2.0]);
        let mut t = Tape::new();
        let u = f.eval(&mut t, &[[1.0, 0.0]], JetOrder::Value).unwrap();
        assert!((t.scalar(u.u) - (0.3 + 0.75 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn on_interface_is_an_error() {
        let f = Field::interface(&[2, 4, 2], Activation::Tanh, vec![LevelSet::Circle { radius_sq: 0.25 }], 1).unwrap();
        let mut t = Tape::new();
        assert!(matches!(
            f.eval(&mut t, &[[0.5, 0.0]], JetOrder::Value),
            Err(Error::OnInterface { .. })
        ));
        let side = SideSpec::natural().force(0, 1.0);
        assert!(matches!(
            f.eval_sides(&mut t, &[[0.2, 0.0]], JetOrder::Value, &[side]),
            Err(Error::NotOnInterface { .. })
        ));
    }

    #[test]
    fn corner_zero_nets() {
        let mut f = Field::corner(&[2, 5, 2], &[2, 5, 1], &[[0.0, 0.0]], Cutoff::default(), 3).unwrap();
        zero(&mut f);
        let mut t = Tape::new();
        let u = f.eval(&mut t, &[[0.1, 0.2], [0.6, -0.3]], JetOrder::Hessian).unwrap();
        for v in std::iter::once(u.u).chain(u.grad.iter().copied()).chain(u.second.iter().copied()) {
            assert!(t.value(v).iter().all(|&z| z == 0.0));
        }
        assert!(matches!(
            f.eval(&mut t, &[[0.0, 0.0]], JetOrder::Value),
            Err(Error::AtCenter { center: 0, .. })
        ));
    }

    #[test]
    fn one_d_substitution_and_limits() {
        let ls = LevelSet::Point1D {
            center: FRAC_PI_2,
            scale: 0.5,
        };
        let mut f = Field::interface(&[1, 1, 2], Activation::Tanh, vec![ls], 0).unwrap();
        constant_outputs(&mut f, &[0.0, 2.0]);
        let mut t = Tape::new();
        let x = FRAC_PI_2 + 0.1;
        let u = f.eval(&mut t, &[[x, 0.0]], JetOrder::Gradient).unwrap();
        assert!((t.scalar(u.u) - 2.0 * 0.05).abs() < 1e-15);
        constant_outputs(&mut f, &[0.0, 1.0]);
        let mut t = Tape::new();
        let sides = [SideSpec::natural().force(0, 1.0), SideSpec::natural().force(0, -1.0)];
        let j = f.eval_sides(&mut t, &[[FRAC_PI_2, 0.0]], JetOrder::Gradient, &sides).unwrap();
        assert_eq!(t.scalar(j[0].ux()), 0.5);
        assert_eq!(t.scalar(j[1].ux()), -0.5);
    }

    #[test]
    fn parameter_counts() {
        let c = Field::corner(&[2, 30, 30, 30, 2], &[2, 15, 15, 15, 1], &[[0.0, 0.0]], Cutoff::default(), 0).unwrap();
        assert_eq!(c.param_count(), 2012 + 541 + 1);
        let m = Field::material_vertex(&[2, 30, 30, 30, 6], &[2, 15, 15, 15, 3], Cutoff::default(), 0).unwrap();
        assert_eq!(m.param_count(), 2710);
        let k = Field::classical(&[1, 20, 20, 20, 1], Activation::Tanh, 0).unwrap();
        assert_eq!(k.param_count(), 901);
        assert_eq!(m.lambdas(), vec![LAMBDA_INIT]);
    }

    #[test]
    fn wrong_output_count() {
        assert!(Field::corner(&[2, 5, 3], &[2, 5, 1], &[[0.0, 0.0]], Cutoff::default(), 0).is_err());
        assert!(Field::material_vertex(&[2, 5, 6], &[2, 5, 1], Cutoff::default(), 0).is_err());
    }

    #[test]
    fn singular_unit_vanishes_outside_cutoff() {
        let mut f = Field::corner(&[2, 5, 2], &[2, 5, 1], &[[0.0, 0.0]], Cutoff::default(), 3).unwrap();
        let (wid, bid) = *f.net.layers().last().unwrap();
        for id in [wid, bid] {
            let b = f.params.block(id).clone();
            f.params.values_mut()[b.offset..b.offset + b.len()].iter_mut().for_each(|v| *v = 0.0);
        }
        let mut t = Tape::new();
        let u = f.eval(&mut t, &[[0.95, 0.0], [0.7, 0.7]], JetOrder::Hessian).unwrap();
        assert!(t.value(u.u).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn singular_report_passes_lambda_through() {
        let f = Field::corner(&[2, 5, 2], &[2, 5, 1], &[[0.0, 0.0]], Cutoff::default(), 3).unwrap();
        let rows = f.singular_report(0, &[0.1, 1.0, 2.0], &|_| 1.0).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(f.lambdas()[0], 0.5);
        let c = Field::classical(&[2, 3, 1], Activation::Tanh, 0).unwrap();
        assert!(matches!(c.singular_report(0, &[0.1], &|_| 1.0), Err(Error::NoSingularUnit)));
    }
}
