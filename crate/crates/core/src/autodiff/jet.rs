//! Second-order spatial jets whose components live on a [`Tape`].
//!
//! A jet carries the value of a field together with its spatial gradient and
//! either the full Hessian or only its trace. All arithmetic goes through the
//! tape, so every component is differentiable with respect to the parameters.

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Smallest radius at which singular power functions are evaluated.
pub const MIN_RADIUS: f64 = 1e-12;

/// How many spatial derivatives a jet tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JetOrder {
    Value,
    Gradient,
    /// Gradient plus the Laplacian only.
    Laplacian,
    /// Gradient plus the full (symmetric) Hessian.
    Hessian,
}

impl JetOrder {
    pub fn has_gradient(self) -> bool {
        self >= JetOrder::Gradient
    }

    fn second_len(self, dim: usize) -> usize {
        match self {
            JetOrder::Value | JetOrder::Gradient => 0,
            JetOrder::Laplacian => 1,
            JetOrder::Hessian => dim * (dim + 1) / 2,
        }
    }
}

/// Upper-triangular Hessian slots, row by row.
fn hessian_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[(0, 0)],
        2 => &[(0, 0), (0, 1), (1, 1)],
        _ => panic!("unsupported spatial dimension {dim}"),
    }
}

/// Value, gradient and second derivatives of a field (or a matrix of fields)
/// over a batch of points.
#[derive(Clone, Debug)]
pub struct SpatialJet {
    pub dim: usize,
    pub order: JetOrder,
    pub u: Var,
    /// `d/dx_i`, present when `order >= Gradient`.
    pub grad: Vec<Var>,
    /// `[lap]` in Laplacian mode; `[xx]` (1D) or `[xx, xy, yy]` (2D) in Hessian mode.
    pub second: Vec<Var>,
}

impl SpatialJet {
    /// Coordinate functions `x_k` at the given points: unit first derivatives,
    /// zero second derivatives, all tape constants.
    pub fn coordinates(tape: &mut Tape, points: &[Point], dim: usize, order: JetOrder) -> Vec<Self> {
        let n = points.len();
        (0..dim)
            .map(|k| {
                let u = tape.row_const(points.iter().map(|p| p[k]).collect());
                let grad = if order.has_gradient() {
                    (0..dim)
                        .map(|i| tape.fill(1, n, if i == k { 1.0 } else { 0.0 }))
                        .collect()
                } else {
                    Vec::new()
                };
                let second = (0..order.second_len(dim)).map(|_| tape.fill(1, n, 0.0)).collect();
                SpatialJet {
                    dim,
                    order,
                    u,
                    grad,
                    second,
                }
            })
            .collect()
    }

    /// A field that does not vary in space (derivatives identically zero).
    pub fn constant(tape: &mut Tape, u: Var, dim: usize, order: JetOrder) -> Self {
        let (r, c) = tape.shape(u);
        let grad = if order.has_gradient() {
            (0..dim).map(|_| tape.fill(r, c, 0.0)).collect()
        } else {
            Vec::new()
        };
        let second = (0..order.second_len(dim)).map(|_| tape.fill(r, c, 0.0)).collect();
        SpatialJet {
            dim,
            order,
            u,
            grad,
            second,
        }
    }

    pub fn value<'t>(&self, tape: &'t Tape) -> &'t [f64] {
        tape.value(self.u)
    }

    pub fn ux(&self) -> Var {
        self.grad[0]
    }

    pub fn uy(&self) -> Var {
        self.grad[1]
    }

    fn hess_slot(&self, i: usize, j: usize) -> Var {
        assert_eq!(self.order, JetOrder::Hessian, "jet does not carry a Hessian");
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = hessian_pairs(self.dim).iter().position(|&p| p == (i, j)).unwrap();
        self.second[k]
    }

    pub fn uxx(&self) -> Var {
        if self.order == JetOrder::Laplacian && self.dim == 1 {
            return self.second[0];
        }
        self.hess_slot(0, 0)
    }

    pub fn uxy(&self) -> Var {
        self.hess_slot(0, 1)
    }

    pub fn uyy(&self) -> Var {
        self.hess_slot(1, 1)
    }

    pub fn laplacian(&self, tape: &mut Tape) -> Var {
        match self.order {
            JetOrder::Laplacian => self.second[0],
            JetOrder::Hessian if self.dim == 1 => self.second[0],
            JetOrder::Hessian => tape.add(self.second[0], self.second[2]),
            _ => panic!("jet carries no second derivatives"),
        }
    }

    fn same_layout(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "jets of different dimension");
        assert_eq!(self.order, other.order, "jets of different order");
    }

    fn zip_with(&self, other: &Self, tape: &mut Tape, f: impl Fn(&mut Tape, Var, Var) -> Var) -> Self {
        self.same_layout(other);
        SpatialJet {
            dim: self.dim,
            order: self.order,
            u: f(tape, self.u, other.u),
            grad: self.grad.iter().zip(&other.grad).map(|(&a, &b)| f(tape, a, b)).collect(),
            second: self.second.iter().zip(&other.second).map(|(&a, &b)| f(tape, a, b)).collect(),
        }
    }

    fn map_all(&self, tape: &mut Tape, f: impl Fn(&mut Tape, Var) -> Var) -> Self {
        SpatialJet {
            dim: self.dim,
            order: self.order,
            u: f(tape, self.u),
            grad: self.grad.iter().map(|&a| f(tape, a)).collect(),
            second: self.second.iter().map(|&a| f(tape, a)).collect(),
        }
    }

    pub fn add(&self, tape: &mut Tape, other: &Self) -> Self {
        self.zip_with(other, tape, |t, a, b| t.add(a, b))
    }

    pub fn sub(&self, tape: &mut Tape, other: &Self) -> Self {
        self.zip_with(other, tape, |t, a, b| t.sub(a, b))
    }

    pub fn scale(&self, tape: &mut Tape, c: f64) -> Self {
        self.map_all(tape, |t, a| t.scale(a, c))
    }

    pub fn neg(&self, tape: &mut Tape) -> Self {
        self.scale(tape, -1.0)
    }

    pub fn add_const(&self, tape: &mut Tape, c: f64) -> Self {
        SpatialJet {
            u: tape.add_const(self.u, c),
            ..self.clone()
        }
    }

    /// Multiplies every component by a spatially constant node, e.g. a
    /// trainable scalar or a per-point constant row.
    pub fn mul_var(&self, tape: &mut Tape, s: Var) -> Self {
        self.map_all(tape, |t, a| t.mul(a, s))
    }

    /// Product rule to second order.
    pub fn mul(&self, tape: &mut Tape, other: &Self) -> Self {
        self.same_layout(other);
        let (a, b) = (self, other);
        let u = tape.mul(a.u, b.u);
        let mut grad = Vec::with_capacity(a.grad.len());
        for (&ai, &bi) in a.grad.iter().zip(&b.grad) {
            let l = tape.mul(ai, b.u);
            let r = tape.mul(a.u, bi);
            grad.push(tape.add(l, r));
        }
        let second = match a.order {
            JetOrder::Value | JetOrder::Gradient => Vec::new(),
            JetOrder::Laplacian => {
                let l = tape.mul(a.second[0], b.u);
                let r = tape.mul(a.u, b.second[0]);
                let mut s = tape.add(l, r);
                let mut cross = None;
                for (&ai, &bi) in a.grad.iter().zip(&b.grad) {
                    let p = tape.mul(ai, bi);
                    cross = Some(match cross {
                        None => p,
                        Some(c) => tape.add(c, p),
                    });
                }
                if let Some(c) = cross {
                    let c2 = tape.scale(c, 2.0);
                    s = tape.add(s, c2);
                }
                vec![s]
            }
            JetOrder::Hessian => hessian_pairs(a.dim)
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| {
                    let l = tape.mul(a.second[k], b.u);
                    let r = tape.mul(a.u, b.second[k]);
                    let s = tape.add(l, r);
                    let c1 = tape.mul(a.grad[i], b.grad[j]);
                    let s = tape.add(s, c1);
                    let c2 = tape.mul(a.grad[j], b.grad[i]);
                    tape.add(s, c2)
                })
                .collect(),
        };
        SpatialJet {
            dim: a.dim,
            order: a.order,
            u,
            grad,
            second,
        }
    }

    /// Chain rule for `f(z)` given tape nodes for `f(z)`, `f'(z)` and `f''(z)`
    /// evaluated at the value component. `fpp = None` means `f'' = 0`.
    pub fn chain(&self, tape: &mut Tape, f: Var, fp: Var, fpp: Option<Var>) -> Self {
        let z = self;
        let grad: Vec<Var> = z.grad.iter().map(|&zi| tape.mul(fp, zi)).collect();
        let second = match z.order {
            JetOrder::Value | JetOrder::Gradient => Vec::new(),
            JetOrder::Laplacian => {
                let mut s = tape.mul(fp, z.second[0]);
                if let Some(fpp) = fpp {
                    let mut sq = None;
                    for &zi in &z.grad {
                        let p = tape.mul(zi, zi);
                        sq = Some(match sq {
                            None => p,
                            Some(c) => tape.add(c, p),
                        });
                    }
                    let w = tape.mul(fpp, sq.unwrap());
                    s = tape.add(s, w);
                }
                vec![s]
            }
            JetOrder::Hessian => hessian_pairs(z.dim)
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| {
                    let s = tape.mul(fp, z.second[k]);
                    match fpp {
                        Some(fpp) => {
                            let zz = tape.mul(z.grad[i], z.grad[j]);
                            let w = tape.mul(fpp, zz);
                            tape.add(s, w)
                        }
                        None => s,
                    }
                })
                .collect(),
        };
        SpatialJet {
            dim: z.dim,
            order: z.order,
            u: f,
            grad,
            second,
        }
    }

    fn needs_second(&self) -> bool {
        matches!(self.order, JetOrder::Laplacian | JetOrder::Hessian)
    }

    pub fn tanh(&self, tape: &mut Tape) -> Self {
        let t = tape.tanh(self.u);
        if !self.order.has_gradient() {
            return SpatialJet { u: t, ..self.clone() };
        }
        let t2 = tape.square(t);
        let tneg = tape.neg(t2);
        let fp = tape.add_const(tneg, 1.0);
        let fpp = if self.needs_second() {
            let p = tape.mul(t, fp);
            Some(tape.scale(p, -2.0))
        } else {
            None
        };
        self.chain(tape, t, fp, fpp)
    }

    pub fn sin(&self, tape: &mut Tape) -> Self {
        let s = tape.sin(self.u);
        let c = tape.cos(self.u);
        let fpp = tape.neg(s);
        self.chain(tape, s, c, Some(fpp))
    }

    pub fn cos(&self, tape: &mut Tape) -> Self {
        let s = tape.sin(self.u);
        let c = tape.cos(self.u);
        let fp = tape.neg(s);
        let fpp = tape.neg(c);
        self.chain(tape, c, fp, Some(fpp))
    }

    pub fn exp(&self, tape: &mut Tape) -> Self {
        let e = tape.exp(self.u);
        self.chain(tape, e, e, Some(e))
    }

    fn check_positive(&self, tape: &Tape, what: &str) -> Result<()> {
        if let Some(v) = tape.value(self.u).iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain(format!("{what} of non-positive value {v}")));
        }
        Ok(())
    }

    pub fn ln(&self, tape: &mut Tape) -> Result<Self> {
        self.check_positive(tape, "ln")?;
        let f = tape.ln(self.u);
        let fp = tape.powf(self.u, -1.0);
        let fp2 = tape.square(fp);
        let fpp = tape.neg(fp2);
        Ok(self.chain(tape, f, fp, Some(fpp)))
    }

    pub fn sqrt(&self, tape: &mut Tape) -> Result<Self> {
        self.check_positive(tape, "sqrt")?;
        let f = tape.sqrt(self.u);
        let inv = tape.powf(f, -1.0);
        let fp = tape.scale(inv, 0.5);
        let q = tape.div(fp, self.u);
        let fpp = tape.scale(q, -0.5);
        Ok(self.chain(tape, f, fp, Some(fpp)))
    }

    /// `z^p` for a fixed real exponent; requires a positive base.
    pub fn powf(&self, tape: &mut Tape, p: f64) -> Result<Self> {
        self.check_positive(tape, "pow")?;
        let f = tape.powf(self.u, p);
        let d = tape.powf(self.u, p - 1.0);
        let fp = tape.scale(d, p);
        let d2 = tape.powf(self.u, p - 2.0);
        let fpp = tape.scale(d2, p * (p - 1.0));
        Ok(self.chain(tape, f, fp, Some(fpp)))
    }

    pub fn recip(&self, tape: &mut Tape) -> Result<Self> {
        if let Some(v) = tape.value(self.u).iter().find(|v| **v == 0.0 || !v.is_finite()) {
            return Err(Error::Domain(format!("division by {v}")));
        }
        let f = tape.powf(self.u, -1.0);
        let f2 = tape.square(f);
        let fp = tape.neg(f2);
        let f3 = tape.mul(f2, f);
        let fpp = tape.scale(f3, 2.0);
        Ok(self.chain(tape, f, fp, Some(fpp)))
    }

    pub fn div(&self, tape: &mut Tape, other: &Self) -> Result<Self> {
        let r = other.recip(tape)?;
        Ok(self.mul(tape, &r))
    }

    /// `|z|` with the sign of every entry prescribed by `signs` (a tape
    /// constant broadcastable against the value). Used for one-sided limits.
    pub fn abs_with_signs(&self, tape: &mut Tape, signs: Var) -> Self {
        debug_assert!(!tape.needs_grad(signs));
        self.mul_var(tape, signs)
    }

    /// `|z|` with `sign(0) = 0`.
    pub fn abs(&self, tape: &mut Tape) -> Self {
        let (r, c) = tape.shape(self.u);
        let signs = tape.value(self.u).iter().map(|&v| sign0(v)).collect();
        let s = tape.constant(r, c, signs);
        self.abs_with_signs(tape, s)
    }

    /// ReLU with second derivative taken as zero everywhere.
    pub fn relu(&self, tape: &mut Tape) -> Self {
        let (r, c) = tape.shape(self.u);
        let step = tape.value(self.u).iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let step = tape.constant(r, c, step);
        let f = tape.mul(self.u, step);
        self.chain(tape, f, step, None)
    }

    /// `r^lambda` for a trainable exponent, evaluated as `exp(lambda ln r)`.
    pub fn pow_param(&self, tape: &mut Tape, lambda: Var) -> Result<Self> {
        if let Some(v) = tape.value(self.u).iter().find(|v| !(**v >= MIN_RADIUS)) {
            return Err(Error::Domain(format!("power of base {v} below {MIN_RADIUS:e}")));
        }
        let l = self.ln(tape)?;
        let e = l.mul_var(tape, lambda);
        Ok(e.exp(tape))
    }

    /// Two-argument chain rule for `g(a, b)` with partials supplied as nodes
    /// `[g, g_a, g_b, g_aa, g_ab, g_bb]`.
    fn bivariate(a: &Self, b: &Self, tape: &mut Tape, g: [Var; 6]) -> Self {
        a.same_layout(b);
        let [gv, ga, gb, gaa, gab, gbb] = g;
        let grad: Vec<Var> = a
            .grad
            .iter()
            .zip(&b.grad)
            .map(|(&ai, &bi)| {
                let l = tape.mul(ga, ai);
                let r = tape.mul(gb, bi);
                tape.add(l, r)
            })
            .collect();
        let second_term = |tape: &mut Tape, i: usize, j: usize| {
            let aa = tape.mul(a.grad[i], a.grad[j]);
            let mut s = tape.mul(gaa, aa);
            let ab = tape.mul(a.grad[i], b.grad[j]);
            let ba = tape.mul(a.grad[j], b.grad[i]);
            let x = tape.add(ab, ba);
            let x = tape.mul(gab, x);
            s = tape.add(s, x);
            let bb = tape.mul(b.grad[i], b.grad[j]);
            let y = tape.mul(gbb, bb);
            tape.add(s, y)
        };
        let second = match a.order {
            JetOrder::Value | JetOrder::Gradient => Vec::new(),
            JetOrder::Laplacian => {
                let mut s = None;
                for i in 0..a.dim {
                    let t = second_term(tape, i, i);
                    s = Some(match s {
                        None => t,
                        Some(c) => tape.add(c, t),
                    });
                }
                let l = tape.mul(ga, a.second[0]);
                let r = tape.mul(gb, b.second[0]);
                let s = tape.add(s.unwrap(), l);
                vec![tape.add(s, r)]
            }
            JetOrder::Hessian => hessian_pairs(a.dim)
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| {
                    let s = second_term(tape, i, j);
                    let l = tape.mul(ga, a.second[k]);
                    let r = tape.mul(gb, b.second[k]);
                    let s = tape.add(s, l);
                    tape.add(s, r)
                })
                .collect(),
        };
        SpatialJet {
            dim: a.dim,
            order: a.order,
            u: gv,
            grad,
            second,
        }
    }

    /// Polar angle `atan2(y, x)` of the point `(x, y)` given by two jets,
    /// shifted by `offsets` (a per-entry constant, e.g. `2 pi` on branch cuts).
    pub fn atan2(y: &Self, x: &Self, tape: &mut Tape, offsets: Option<Var>) -> Result<Self> {
        let (r, c) = tape.shape(y.u);
        let yv = tape.value(y.u).to_vec();
        let xv = tape.value(x.u).to_vec();
        if xv.iter().zip(&yv).any(|(a, b)| a * a + b * b == 0.0) {
            return Err(Error::Domain("atan2 at the origin".into()));
        }
        let theta: Vec<f64> = yv.iter().zip(&xv).map(|(b, a)| b.atan2(*a)).collect();
        // The angle value is stored as a constant, so parameter dependence of
        // the inputs would be lost.
        assert!(
            !tape.needs_grad(x.u) && !tape.needs_grad(y.u),
            "atan2 is only defined for parameter-free inputs"
        );
        let mut gv = tape.constant(r, c, theta);
        if let Some(o) = offsets {
            gv = tape.add(gv, o);
        }
        let xx = tape.square(x.u);
        let yy = tape.square(y.u);
        let rho = tape.add(xx, yy);
        let inv = tape.powf(rho, -1.0);
        let inv2 = tape.square(inv);
        let ny = tape.neg(y.u);
        let ga = tape.mul(ny, inv);
        let gb = tape.mul(x.u, inv);
        let xy = tape.mul(x.u, y.u);
        let xy2 = tape.scale(xy, 2.0);
        let gaa = tape.mul(xy2, inv2);
        let gbb = tape.neg(gaa);
        let d = tape.sub(yy, xx);
        let gab = tape.mul(d, inv2);
        Ok(Self::bivariate(x, y, tape, [gv, ga, gb, gaa, gab, gbb]))
    }

    /// Component-wise vertical stacking of row jets into a matrix jet.
    pub fn stack(tape: &mut Tape, parts: &[SpatialJet]) -> Self {
        let first = &parts[0];
        for p in parts {
            first.same_layout(p);
        }
        let pick = |tape: &mut Tape, f: &dyn Fn(&SpatialJet) -> Var| {
            let vs: Vec<Var> = parts.iter().map(f).collect();
            tape.stack(&vs)
        };
        let u = pick(tape, &|j| j.u);
        let grad = (0..first.grad.len()).map(|i| pick(tape, &|j| j.grad[i])).collect();
        let second = (0..first.second.len()).map(|i| pick(tape, &|j| j.second[i])).collect();
        SpatialJet {
            dim: first.dim,
            order: first.order,
            u,
            grad,
            second,
        }
    }

    pub fn row(&self, tape: &mut Tape, i: usize) -> Self {
        self.map_all(tape, |t, a| t.row(a, i))
    }

    /// `nu . grad u` for per-point constant direction rows `nu = (nu_x, nu_y)`.
    pub fn directional(&self, tape: &mut Tape, nu: &[Var]) -> Var {
        assert!(self.order.has_gradient());
        let mut acc = None;
        for (&g, &n) in self.grad.iter().zip(nu) {
            let p = tape.mul(g, n);
            acc = Some(match acc {
                None => p,
                Some(a) => tape.add(a, p),
            });
        }
        acc.unwrap()
    }
}

/// Sign with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
