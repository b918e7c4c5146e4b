//! PINNs and H^1-fit losses assembled from field jets.
//!
//! Every component is a mean (or a fixed sum) of pointwise squares; the total
//! is `sum_k alpha_k sqrt(L_k)`. Batches are cut into fixed-size chunks that
//! are evaluated on separate tapes, possibly in parallel, and reduced in chunk
//! order so the result does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architectures::Field;
use crate::autodiff::{JetOrder, ParamStore, SpatialJet, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::{split, weight_omega, LevelSet, Point, Rng, SideSpec, WeightKind};
use crate::problems::{Problem, ProblemKind};

/// Guard added inside the square roots of the total.
pub const SQRT_GUARD: f64 = 1e-30;
/// Points per tape.
pub const CHUNK: usize = 250;

/// Anything that can be evaluated like a trained field.
pub trait Evaluate: Sync {
    fn dim(&self) -> usize;
    fn params(&self) -> &ParamStore;
    fn eval_sides(&self, tape: &mut Tape, points: &[Point], order: JetOrder, sides: &[SideSpec])
        -> Result<Vec<SpatialJet>>;
    /// Angular profile of the first singular unit at points on the unit circle.
    fn angular_sides(&self, tape: &mut Tape, xhat: &[Point], order: JetOrder, sides: &[SideSpec])
        -> Result<Vec<SpatialJet>>;
    fn has_singular_unit(&self) -> bool;
}

impl Evaluate for Field {
    fn dim(&self) -> usize {
        Field::dim(self)
    }

    fn params(&self) -> &ParamStore {
        Field::params(self)
    }

    fn eval_sides(&self, tape: &mut Tape, points: &[Point], order: JetOrder, sides: &[SideSpec])
        -> Result<Vec<SpatialJet>> {
        Field::eval_sides(self, tape, points, order, sides)
    }

    fn angular_sides(&self, tape: &mut Tape, xhat: &[Point], order: JetOrder, sides: &[SideSpec])
        -> Result<Vec<SpatialJet>> {
        Field::angular_sides(self, tape, 0, xhat, order, sides)
    }

    fn has_singular_unit(&self) -> bool {
        !self.units().is_empty()
    }
}

/// The exact solution of a problem dressed up as a field without parameters.
pub struct ExactSolution<'a> {
    problem: &'a Problem,
    empty: ParamStore,
}

impl<'a> ExactSolution<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        Self {
            problem,
            empty: ParamStore::new(),
        }
    }

    fn regions(&self, points: &[Point], side: &SideSpec) -> Vec<usize> {
        points.iter().map(|&x| self.problem.region_on(x, side)).collect()
    }
}

impl Evaluate for ExactSolution<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn params(&self) -> &ParamStore {
        &self.empty
    }

    fn eval_sides(&self, tape: &mut Tape, points: &[Point], order: JetOrder, sides: &[SideSpec])
        -> Result<Vec<SpatialJet>> {
        sides
            .iter()
            .map(|side| {
                let regions = self.regions(points, side);
                self.problem.exact_jet(tape, points, &regions, order)
            })
            .collect()
    }

    fn angular_sides(&self, tape: &mut Tape, xhat: &[Point], order: JetOrder, sides: &[SideSpec])
        -> Result<Vec<SpatialJet>> {
        sides
            .iter()
            .map(|side| {
                let regions = self.regions(xhat, side);
                self.problem
                    .singular_jet(tape, xhat, &regions, order)?
                    .ok_or(Error::NoSingularUnit)
            })
            .collect()
    }

    fn has_singular_unit(&self) -> bool {
        !self.problem.centers.is_empty()
    }
}

/// Collocation points of one iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub interior: Vec<Point>,
    /// Points on every interface, indexed like `Problem::interfaces`.
    pub interface: Vec<Vec<Point>>,
    pub boundary: Vec<Point>,
}

impl Batch {
    /// Draws `n[0]` interior, `n[1]` interface and `n[2]` boundary points.
    /// The 1D problem always uses the interface point `pi/2` and the two
    /// boundary points `0` and `pi`.
    pub fn sample(problem: &Problem, n: [usize; 3], rng: &mut Rng, stratified: bool) -> Self {
        let interior = rng.interior(problem.domain, n[0], stratified);
        if problem.kind == ProblemKind::Transmission1d {
            let (lo, hi) = problem.domain.bounds();
            return Self {
                interior,
                interface: vec![vec![[std::f64::consts::FRAC_PI_2, 0.0]]],
                boundary: vec![lo, hi],
            };
        }
        let counts = split(n[1], problem.interfaces.len().max(1));
        let interface = counts
            .iter()
            .take(problem.interfaces.len())
            .enumerate()
            .map(|(p, &k)| rng.on_curves(&problem.interface_curves(p), k, stratified, &problem.centers))
            .collect();
        let boundary = rng.boundary(problem.domain, n[2], stratified, &problem.centers);
        Self {
            interior,
            interface,
            boundary,
        }
    }

    /// An H^1-fit batch: interior points only.
    pub fn interior_only(problem: &Problem, n: usize, rng: &mut Rng, stratified: bool) -> Self {
        Self {
            interior: rng.interior(problem.domain, n, stratified),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Strong-form residual, interface and boundary penalties.
    Pinns,
    /// `sqrt(mean |u - u*|^2 + |grad u - grad u*|^2)`.
    H1Fit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Pde,
    Interface,
    Bc,
    BcPhi,
    H1,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Pde => "pde",
            Component::Interface => "interface",
            Component::Bc => "bc",
            Component::BcPhi => "bc_phi",
            Component::H1 => "h1",
        }
    }
}

/// `alpha_1 .. alpha_4`, one per component in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossWeights(pub Vec<f64>);

impl LossWeights {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        if self.0.iter().any(|a| !(*a >= 0.0)) || !self.0.iter().any(|a| *a > 0.0) {
            return Err(Error::Domain(format!("loss weights {:?} must be nonnegative, not all zero", self.0)));
        }
        Ok(())
    }
}

/// A loss functional for a given problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss {
    kind: LossKind,
    problem: ProblemKind,
    components: Vec<Component>,
    weights: LossWeights,
    /// Weight PDE residuals near the singular point.
    weighted: bool,
}

/// Loss values for one batch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossValue {
    pub components: Vec<Component>,
    /// Components before the square root.
    pub raw: Vec<f64>,
    pub total: f64,
    /// Gradient of `total` with respect to the parameters (empty when not requested).
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl LossValue {
    /// Components after the square root.
    pub fn rooted(&self) -> Vec<f64> {
        self.raw.iter().map(|r| r.sqrt()).collect()
    }
}

/// A differentiable partial sum of one component.
struct Term {
    component: usize,
    value: Var,
}

struct Job<'b> {
    kind: JobKind,
    points: &'b [Point],
    interface: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum JobKind {
    Pde,
    Jump,
    Bc,
    BcPhi,
    H1,
}

fn add_jobs<'b>(
    jobs: &mut Vec<Job<'b>>,
    divisors: &mut [f64],
    kind: JobKind,
    component: Option<usize>,
    points: &'b [Point],
    interface: usize,
) {
    let Some(c) = component else { return };
    divisors[c] += points.len() as f64;
    for chunk in points.chunks(CHUNK) {
        jobs.push(Job {
            kind,
            points: chunk,
            interface,
        });
    }
}

impl Loss {
    /// The PINNs loss of `problem`. `bc_phi` adds the singular-profile
    /// penalty on problems with a singular point.
    pub fn pinns(problem: &Problem, bc_phi: bool) -> Self {
        use Component::*;
        let s10 = 10f64.sqrt();
        let (components, weights) = match problem.kind {
            ProblemKind::Transmission1d => (vec![Pde, Interface, Bc], vec![1.0, 1.0, 1.0]),
            ProblemKind::Interface => (vec![Pde, Interface, Bc], vec![1.0, s10, 10.0]),
            ProblemKind::LShape if bc_phi => (vec![Pde, Bc, BcPhi], vec![1.0, 10.0, 1.0]),
            ProblemKind::LShape => (vec![Pde, Bc], vec![1.0, 10.0]),
            ProblemKind::MaterialVertex if bc_phi => (vec![Pde, Interface, Bc, BcPhi], vec![1.0, s10, 10.0, 1.0]),
            ProblemKind::MaterialVertex => (vec![Pde, Interface, Bc], vec![1.0, s10, 10.0]),
        };
        Self {
            kind: LossKind::Pinns,
            problem: problem.kind,
            components,
            weights: LossWeights(weights),
            weighted: !problem.centers.is_empty(),
        }
    }

    pub fn h1_fit(problem: &Problem) -> Self {
        Self {
            kind: LossKind::H1Fit,
            problem: problem.kind,
            components: vec![Component::H1],
            weights: LossWeights(vec![1.0]),
            weighted: false,
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn with_weights(mut self, weights: LossWeights) -> Result<Self> {
        weights.validate(self.components.len())?;
        self.weights = weights;
        Ok(self)
    }

    /// Turns off the PDE weight near the singular point.
    pub fn unweighted(mut self) -> Self {
        self.weighted = false;
        self
    }

    fn slot(&self, c: Component) -> Option<usize> {
        self.components.iter().position(|&k| k == c)
    }

    fn pde_weight(&self) -> Option<WeightKind> {
        if !self.weighted {
            return None;
        }
        match self.problem {
            ProblemKind::LShape => Some(WeightKind::LShape),
            ProblemKind::MaterialVertex => Some(WeightKind::MaterialArea),
            _ => None,
        }
    }

    fn jump_weight(&self) -> Option<WeightKind> {
        (self.problem == ProblemKind::MaterialVertex).then_some(WeightKind::MaterialLine)
    }

    /// Evaluates the loss on `batch`; with `with_grad` also its parameter gradient.
    pub fn evaluate(&self, model: &dyn Evaluate, problem: &Problem, batch: &Batch, with_grad: bool) -> Result<LossValue> {
        if problem.kind != self.problem {
            return Err(Error::Domain(format!(
                "loss built for {:?} applied to {:?}",
                self.problem, problem.kind
            )));
        }
        let mut jobs = Vec::new();
        let mut divisors = vec![0.0; self.components.len()];
        let bc_phi_points = self.bc_phi_points();
        match self.kind {
            LossKind::H1Fit => add_jobs(&mut jobs, &mut divisors, JobKind::H1, Some(0), &batch.interior, 0),
            LossKind::Pinns => {
                let pde = self.slot(Component::Pde);
                add_jobs(&mut jobs, &mut divisors, JobKind::Pde, pde, &batch.interior, 0);
                if let Some(c) = self.slot(Component::Interface) {
                    for (p, pts) in batch.interface.iter().enumerate() {
                        add_jobs(&mut jobs, &mut divisors, JobKind::Jump, Some(c), pts, p);
                    }
                }
                let bc = self.slot(Component::Bc);
                add_jobs(&mut jobs, &mut divisors, JobKind::Bc, bc, &batch.boundary, 0);
                if let Some(c) = self.slot(Component::BcPhi) {
                    add_jobs(&mut jobs, &mut divisors, JobKind::BcPhi, Some(c), &bc_phi_points, 0);
                }
            }
        }
        // Sums rather than means where the functional says so.
        if self.problem == ProblemKind::Transmission1d {
            if let Some(c) = self.slot(Component::Bc) {
                divisors[c] = 1.0;
            }
        }
        if self.problem == ProblemKind::LShape {
            if let Some(c) = self.slot(Component::BcPhi) {
                divisors[c] = 1.0;
            }
        }
        for (c, d) in divisors.iter_mut().enumerate() {
            if *d == 0.0 {
                return Err(Error::Domain(format!(
                    "no points for loss component {}",
                    self.components[c].name()
                )));
            }
        }

        let forward = |job: &Job| -> Result<(Tape, Term)> {
            let mut tape = Tape::new();
            let term = self.job_term(&mut tape, model, problem, job)?;
            Ok((tape, term))
        };
        let done: Vec<(Tape, Term)> = jobs.par_iter().map(forward).collect::<Result<_>>()?;

        let mut raw = vec![0.0; self.components.len()];
        for (tape, term) in &done {
            raw[term.component] += tape.scalar(term.value);
        }
        for (r, d) in raw.iter_mut().zip(&divisors) {
            *r /= d;
        }
        let total = raw
            .iter()
            .zip(&self.weights.0)
            .map(|(r, a)| a * (r + SQRT_GUARD).sqrt())
            .sum();

        let grad = if with_grad {
            let n = model.params().len();
            let seeds: Vec<f64> = raw
                .iter()
                .zip(&self.weights.0)
                .zip(&divisors)
                .map(|((r, a), d)| a / (2.0 * (r + SQRT_GUARD).sqrt()) / d)
                .collect();
            let parts: Vec<Vec<f64>> = done
                .par_iter()
                .map(|(tape, term)| tape.gradient(&[(term.value, seeds[term.component])], n))
                .collect();
            let mut g = vec![0.0; n];
            for part in parts {
                for (a, b) in g.iter_mut().zip(part) {
                    *a += b;
                }
            }
            g
        } else {
            Vec::new()
        };

        Ok(LossValue {
            components: self.components.clone(),
            raw,
            total,
            grad,
        })
    }

    /// Points and interface indices of the singular-profile penalty.
    fn bc_phi_points(&self) -> Vec<Point> {
        match self.problem {
            ProblemKind::LShape => vec![[-1.0, 0.0], [0.0, -1.0]],
            ProblemKind::MaterialVertex => vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            _ => Vec::new(),
        }
    }

    fn job_term(&self, tape: &mut Tape, model: &dyn Evaluate, problem: &Problem, job: &Job) -> Result<Term> {
        let pts = job.points;
        let natural = [SideSpec::natural()];
        let (component, value) = match job.kind {
            JobKind::Pde => {
                let u = model.eval_sides(tape, pts, JetOrder::Laplacian, &natural)?.remove(0);
                let sq = pde_integrand(tape, &u, problem, pts, self.pde_weight())?;
                (Component::Pde, tape.sum(sq))
            }
            JobKind::Jump => {
                let p = job.interface;
                let ls = problem.interfaces[p];
                let j = jump(tape, model, problem, pts, p, &ls, false)?;
                let mut sq = tape.square(j);
                if let Some(w) = self.jump_weight() {
                    let om = tape.row_const(pts.iter().map(|&x| weight_omega(w, x)).collect());
                    sq = tape.mul(sq, om);
                }
                (Component::Interface, tape.sum(sq))
            }
            JobKind::Bc => {
                let u = model.eval_sides(tape, pts, JetOrder::Value, &natural)?.remove(0);
                let sq = tape.square(u.u);
                (Component::Bc, tape.sum(sq))
            }
            JobKind::BcPhi => match self.problem {
                ProblemKind::LShape => {
                    let phi = model.angular_sides(tape, pts, JetOrder::Value, &natural)?.remove(0);
                    let sq = tape.square(phi.u);
                    (Component::BcPhi, tape.sum(sq))
                }
                _ => {
                    let mut parts = Vec::new();
                    for &x in pts {
                        // (1, 0) and (-1, 0) lie on x2 = 0, the others on x1 = 0.
                        let (p, ls) = if x[1] == 0.0 {
                            (1, LevelSet::LineX2)
                        } else {
                            (0, LevelSet::LineX1)
                        };
                        let j = jump(tape, model, problem, &[x], p, &ls, true)?;
                        parts.push(tape.square(j));
                    }
                    let all = tape.stack(&parts);
                    (Component::BcPhi, tape.sum(all))
                }
            },
            JobKind::H1 => {
                let u = model.eval_sides(tape, pts, JetOrder::Gradient, &natural)?.remove(0);
                let exact = problem.exact(pts)?;
                let us = tape.row_const(exact.iter().map(|e| e.u).collect());
                let d = tape.sub(u.u, us);
                let mut sq = tape.square(d);
                for (k, &g) in u.grad.iter().enumerate() {
                    let gs = tape.row_const(exact.iter().map(|e| e.grad[k]).collect());
                    let d = tape.sub(g, gs);
                    let s = tape.square(d);
                    sq = tape.add(sq, s);
                }
                (Component::H1, tape.sum(sq))
            }
        };
        let component = self
            .slot(component)
            .expect("jobs are only created for active components");
        Ok(Term { component, value })
    }
}

/// `omega (sigma Laplacian u - f)^2` per point.
fn pde_integrand(
    tape: &mut Tape,
    u: &SpatialJet,
    problem: &Problem,
    pts: &[Point],
    weight: Option<WeightKind>,
) -> Result<Var> {
    let lap = u.laplacian(tape);
    let sigma = tape.row_const(pts.iter().map(|&x| problem.sigma_at(x)).collect());
    let f = tape.row_const(problem.source(pts)?);
    let slap = tape.mul(sigma, lap);
    let r = tape.sub(slap, f);
    let mut sq = tape.square(r);
    if let Some(w) = weight {
        let om = tape.row_const(pts.iter().map(|&x| weight_omega(w, x)).collect());
        sq = tape.mul(sq, om);
    }
    Ok(sq)
}

/// Flux jump across interface `p` of the field (or of its angular profile).
fn jump(
    tape: &mut Tape,
    model: &dyn Evaluate,
    problem: &Problem,
    pts: &[Point],
    p: usize,
    ls: &LevelSet,
    angular: bool,
) -> Result<Var> {
    let sides = [SideSpec::natural().force(p, 1.0), SideSpec::natural().force(p, -1.0)];
    let j = if angular {
        model.angular_sides(tape, pts, JetOrder::Gradient, &sides)?
    } else {
        model.eval_sides(tape, pts, JetOrder::Gradient, &sides)?
    };
    let sigma = |side: &SideSpec| -> Vec<f64> {
        pts.iter().map(|&x| problem.sigma[problem.region_on(x, side)]).collect()
    };
    let (sp, sm) = (sigma(&sides[0]), sigma(&sides[1]));
    Ok(crate::architectures::directional_jump(
        tape,
        &j[0],
        &j[1],
        pts,
        ls,
        model.dim(),
        &sp,
        &sm,
    ))
}

/// Pointwise PDE integrand `omega (sigma Laplacian u - f)^2` of `model`, with
/// or without the weight near the singular point.
pub fn pde_residuals(model: &dyn Evaluate, problem: &Problem, points: &[Point], weighted: bool) -> Result<Vec<f64>> {
    let weight = if weighted {
        match problem.kind {
            ProblemKind::LShape => Some(WeightKind::LShape),
            ProblemKind::MaterialVertex => Some(WeightKind::MaterialArea),
            _ => None,
        }
    } else {
        None
    };
    let mut tape = Tape::new();
    let u = model.eval_sides(&mut tape, points, JetOrder::Laplacian, &[SideSpec::natural()])?.remove(0);
    let sq = pde_integrand(&mut tape, &u, problem, points, weight)?;
    Ok(tape.value(sq).to_vec())
}
