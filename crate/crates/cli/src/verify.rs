//! Invariant checks that run without training.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use anyhow::Result;
use clap::ValueEnum;
use serde::Serialize;

use reconn_core::autodiff::fd_check;
use reconn_core::geometry::{weight_omega, Domain, LevelSet, WeightKind};
use reconn_core::problems::{fem_exponent, normalized_det, sector_of, MATERIAL_A1, MATERIAL_SIGMA};
use reconn_core::{
    Activation, Cutoff, Error, Field, JetOrder, Point, Problem, ProblemKind, Rng, SideSpec, SturmLiouvilleSolution, Tape,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Autodiff,
    Geometry,
    ExactSolutions,
    Eigen,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value < tolerance` (NaN fails).
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value < tolerance,
        }
    }

    /// A yes/no check, reported as 0 (holds) or 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::below(name, if ok { 0.0 } else { 1.0 }, 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run(suite: Suite) -> Result<SuiteReport> {
    let start = Instant::now();
    let checks = match suite {
        Suite::Autodiff => autodiff()?,
        Suite::Geometry => geometry()?,
        Suite::ExactSolutions => exact_solutions()?,
        Suite::Eigen => eigen()?,
    };
    Ok(SuiteReport {
        suite,
        passed: checks.iter().all(|c| c.passed),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    })
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

// ---------------------------------------------------------------- autodiff

/// Step of the finite-difference reference.
pub const FD_STEP: f64 = 1e-5;
const FD_CASES: usize = 100;

/// A random field of one of the four kinds with a point at which it is smooth,
/// plus that point's distance to the nearest kink.
fn fd_case(i: usize, rng: &mut Rng) -> Result<(Field, Point, f64)> {
    let h = 4 + i % 5;
    let cutoff = Cutoff::default();
    let kink_radius = |r: f64| r.min((r - cutoff.delta1).abs()).min((r - cutoff.delta2).abs());
    Ok(match i % 4 {
        0 => {
            let f = Field::classical(&[2, h, h, 1], Activation::Tanh, i as u64)?;
            (f, [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)], 1.0)
        }
        1 => {
            let ls = LevelSet::Circle { radius_sq: 0.25 };
            let f = Field::interface(&[2, h, h, 2], Activation::Tanh, vec![ls], i as u64)?;
            loop {
                let x = [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)];
                let d = ((x[0].hypot(x[1])) - 0.5).abs();
                if d > 1e-3 {
                    break (f, x, d);
                }
            }
        }
        2 => {
            let f = Field::corner(&[2, h, 2], &[2, h, 1], &[[0.0, 0.0]], cutoff, i as u64)?;
            loop {
                let x = [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)];
                let d = kink_radius(x[0].hypot(x[1]));
                if Domain::LShape.contains(x) && d > 1e-3 {
                    break (f, x, d);
                }
            }
        }
        _ => {
            let f = Field::material_vertex(&[2, h, 6], &[2, h, 3], cutoff, i as u64)?;
            loop {
                let x = [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)];
                let d = kink_radius(x[0].hypot(x[1])).min(x[0].abs()).min(x[1].abs());
                if d > 1e-3 {
                    break (f, x, d);
                }
            }
        }
    })
}

/// Largest relative AD-vs-FD deviation over random fields and points.
pub fn fd_sweep(cases: usize) -> Result<[f64; 4]> {
    let mut rng = Rng::new(2024, 7);
    let mut worst = [0.0f64; 4];
    for i in 0..cases {
        let (field, x, clearance) = fd_case(i, &mut rng)?;
        let eval = |t: &mut Tape, store: &reconn_core::ParamStore, pts: &[Point], order: JetOrder| {
            let mut f = field.clone();
            f.set_params(store.clone())?;
            f.eval(t, pts, order)
        };
        let r = fd_check(eval, field.params(), 2, x, FD_STEP, clearance)?;
        if let Some(v) = r.precondition_violation {
            anyhow::bail!("fd case {i}: {v}");
        }
        for (w, v) in worst.iter_mut().zip([r.grad, r.laplacian, r.param_grad, r.param_laplacian]) {
            *w = w.max(v);
        }
    }
    Ok(worst)
}

/// Compares the gradient jump of an interface field across the circle with
/// `2 |grad phi| u_1` and with one-sided finite differences at offset `h`.
/// Returns the largest relative deviations (AD one-sided, FD probes).
pub fn jump_identity(points: usize, h: f64) -> Result<(f64, f64)> {
    let ls = LevelSet::Circle { radius_sq: 0.25 };
    let field = Field::interface(&[2, 12, 12, 2], Activation::Tanh, vec![ls], 17)?;
    let (mut dev_ad, mut dev_fd, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..points {
        let t = 2.0 * PI * (k as f64 + 0.5) / points as f64;
        let nu = [t.cos(), t.sin()];
        let x = [0.5 * nu[0], 0.5 * nu[1]];
        // Analytic: d_nu |phi| = +-|grad phi| = +-1 on |x| = 1/2.
        let mut tape = Tape::new();
        let xs = reconn_core::SpatialJet::coordinates(&mut tape, &[x], 2, JetOrder::Value);
        let rows = field.net().forward_rows(&mut tape, field.params(), &xs);
        let u1 = tape.scalar(rows[1].u);
        let grad_phi = ls.gradient(x);
        let analytic = 2.0 * grad_phi[0].hypot(grad_phi[1]) * u1;

        let mut tape = Tape::new();
        let sides = [SideSpec::natural().force(0, 1.0), SideSpec::natural().force(0, -1.0)];
        let j = field.eval_sides(&mut tape, &[x], JetOrder::Gradient, &sides)?;
        let dn = |jet: &reconn_core::SpatialJet| {
            nu[0] * tape.scalar(jet.grad[0]) + nu[1] * tape.scalar(jet.grad[1])
        };
        let ad = dn(&j[0]) - dn(&j[1]);

        let value = |s: f64| -> Result<f64> {
            let mut t = Tape::new();
            let p = [x[0] + s * nu[0], x[1] + s * nu[1]];
            let u = field.eval(&mut t, &[p], JetOrder::Value)?;
            Ok(t.scalar(u.u))
        };
        let plus = (value(2.0 * h)? - value(h)?) / h;
        let minus = (value(-h)? - value(-2.0 * h)?) / h;
        let fd = plus - minus;

        scale = scale.max(analytic.abs());
        dev_ad = dev_ad.max((ad - analytic).abs());
        dev_fd = dev_fd.max((fd - analytic).abs());
    }
    Ok((dev_ad / scale, dev_fd / scale))
}

fn autodiff() -> Result<Vec<Check>> {
    let worst = fd_sweep(FD_CASES)?;
    let names = ["fd_gradient", "fd_laplacian", "fd_param_gradient", "fd_param_laplacian"];
    let mut checks: Vec<Check> = names
        .iter()
        .zip(worst)
        .map(|(n, v)| Check::below(*n, v, 1e-5))
        .collect();
    let (ad, fd) = jump_identity(100, 1e-6)?;
    checks.push(Check::below("jump_identity_one_sided_ad", ad, 1e-10));
    checks.push(Check::below("jump_identity_fd_probes", fd, 1e-4));
    Ok(checks)
}

// ---------------------------------------------------------------- geometry

/// One-sided limit from probes at offsets `eps, 2 eps, 3 eps` by quadratic
/// extrapolation to offset 0.
fn limit(f: impl Fn(f64) -> f64, eps: f64) -> f64 {
    3.0 * f(eps) - 3.0 * f(2.0 * eps) + f(3.0 * eps)
}

/// Jumps of `eta`, `eta'` and `eta''` (in units of the transition width) at
/// `r`, from one-sided limits probed with step `eps`.
pub fn cutoff_jumps(c: Cutoff, r: f64, eps: f64) -> [f64; 3] {
    let w = c.delta2 - c.delta1;
    let comp = |k: usize, x: f64| {
        let (v, d1, d2) = c.eval(x);
        [v, d1 * w, d2 * w * w][k]
    };
    [0, 1, 2].map(|k| (limit(|e| comp(k, r + e), eps) - limit(|e| comp(k, r - e), eps)).abs())
}

fn geometry() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let c = Cutoff::default();
    for (label, r) in [("delta1", c.delta1), ("delta2", c.delta2)] {
        let j = cutoff_jumps(c, r, 1e-4);
        for (k, name) in ["eta", "eta_d1", "eta_d2"].iter().enumerate() {
            checks.push(Check::below(format!("cutoff_{name}_jump_at_{label}"), j[k], 1e-6));
        }
    }
    checks.push(Check::below("cutoff_inside", (c.eval(0.3).0 - 1.0).abs(), 1e-15));
    checks.push(Check::below("cutoff_outside", c.eval(0.95).0.abs(), 1e-15));

    checks.push(Check::below("omega_at_origin", weight_omega(WeightKind::LShape, [0.0, 0.0]), 1e-300));
    checks.push(Check::below("omega_plateau", (weight_omega(WeightKind::LShape, [1.0, 0.0]) - 1.0).abs(), 1e-15));
    checks.push(Check::below(
        "omega2_at_0.01",
        (weight_omega(WeightKind::MaterialLine, [0.01, 0.0]) - 0.4).abs(),
        1e-12,
    ));

    let circle = LevelSet::Circle { radius_sq: 0.25 };
    let n = circle.normal([0.0, 0.5]);
    checks.push(Check::below("circle_normal", (n[0]).abs() + (n[1] - 1.0).abs(), 1e-15));

    let mut rng = Rng::new(5, 0);
    let pts = rng.boundary(Domain::Square, 8, true, &[]);
    let per_side = (0..4)
        .map(|s| {
            pts.iter()
                .filter(|p| match s {
                    0 => p[1] == -1.0,
                    1 => p[0] == 1.0,
                    2 => p[1] == 1.0,
                    _ => p[0] == -1.0,
                })
                .count()
        })
        .collect::<Vec<_>>();
    checks.push(Check::holds("stratified_boundary_two_per_side", per_side == vec![2; 4]));
    let inside = rng.interior(Domain::LShape, 1000, false);
    checks.push(Check::holds(
        "lshape_samples_inside",
        inside.iter().all(|&x| Domain::LShape.contains(x)),
    ));

    let mut tape = Tape::new();
    let field = Field::corner(&[2, 3, 2], &[2, 3, 1], &[[0.0, 0.0]], c, 1)?;
    let at_center = field.eval(&mut tape, &[[0.0, 0.0]], JetOrder::Value);
    checks.push(Check::holds("center_is_rejected", matches!(at_center, Err(Error::AtCenter { .. }))));
    Ok(checks)
}

// ---------------------------------------------------------- exact solutions

/// Laplacian of the exact solution from hand-derived closed forms.
pub fn oracle_laplacian(p: &Problem, x: Point) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    match p.kind {
        ProblemKind::Transmission1d => -4.0 * (2.0 * x1).sin() / p.sigma_at(x),
        ProblemKind::Interface => {
            let rho = x1 * x1 + x2 * x2;
            let (a, b) = (x1 * x1 - 1.0, x2 * x2 - 1.0);
            let c = (4.0 * rho - 1.0).powi(2);
            let (cx, cy) = (16.0 * x1 * (4.0 * rho - 1.0), 16.0 * x2 * (4.0 * rho - 1.0));
            let lap_c = 32.0 * (4.0 * rho - 1.0) + 128.0 * rho;
            let lap = 2.0 * b * c + 2.0 * a * c + a * b * lap_c + 2.0 * (2.0 * x1 * b * cx + 2.0 * x2 * a * cy);
            lap / p.sigma_at(x)
        }
        ProblemKind::LShape => {
            let r = x1.hypot(x2);
            let t = x2.atan2(x1);
            let arg = 2.0 * t / 3.0 + PI / 3.0;
            let s0 = r.powf(2.0 / 3.0) * arg.sin();
            let dr = 2.0 / 3.0 * r.powf(-1.0 / 3.0) * arg.sin();
            let dt = 2.0 / 3.0 * r.powf(-1.0 / 3.0) * arg.cos();
            let (sx, sy) = (t.cos() * dr - t.sin() * dt, t.sin() * dr + t.cos() * dt);
            let (qx, qy) = (2.0 * x1 * (x2 * x2 - 1.0), 2.0 * x2 * (x1 * x1 - 1.0));
            let lap_q = 2.0 * (x2 * x2 - 1.0) + 2.0 * (x1 * x1 - 1.0);
            s0 * lap_q + 2.0 * (sx * qx + sy * qy)
        }
        ProblemKind::MaterialVertex => {
            let sol = p.singular.as_ref().expect("material problem has a profile");
            let l = sol.lambda;
            let r = x1.hypot(x2);
            let t = x2.atan2(x1).rem_euclid(2.0 * PI);
            let (phi, dphi) = sol.profile(sector_of(t), t);
            let s = r.powf(l) * phi;
            let dr = l * r.powf(l - 1.0) * phi;
            let dt = r.powf(l - 1.0) * dphi;
            let (sx, sy) = (t.cos() * dr - t.sin() * dt, t.sin() * dr + t.cos() * dt);
            let k = FRAC_PI_2;
            let c = (k * x1).cos() * (k * x2).cos();
            let (cx, cy) = (-k * (k * x1).sin() * (k * x2).cos(), -k * (k * x1).cos() * (k * x2).sin());
            -2.0 * k * k * c * s + 2.0 * (cx * sx + cy * sy)
        }
    }
}

/// Largest `|sigma Laplacian u* - f|`, interface flux jump and boundary value.
pub fn exact_solution_errors(p: &Problem, n: usize, seed: u64) -> Result<[f64; 3]> {
    let mut rng = Rng::new(seed, 3);
    let clear = |x: Point| {
        p.interfaces.iter().all(|ls| ls.value(x).abs() > 1e-6)
            && p.centers.iter().all(|c| (x[0] - c[0]).hypot(x[1] - c[1]) > 1e-6)
    };
    let interior: Vec<Point> = rng
        .interior(p.domain, 2 * n, false)
        .into_iter()
        .filter(|&x| clear(x))
        .take(n)
        .collect();
    let f = p.source(&interior)?;
    let residual = max_abs(
        interior
            .iter()
            .zip(&f)
            .map(|(&x, fx)| p.sigma_at(x) * oracle_laplacian(p, x) - fx),
    );
    let mut jump = 0.0f64;
    for q in 0..p.interfaces.len() {
        let pts = if p.kind == ProblemKind::Transmission1d {
            vec![[FRAC_PI_2, 0.0]]
        } else {
            rng.on_curves(&p.interface_curves(q), 100, true, &p.centers)
        };
        jump = jump.max(max_abs(p.exact_flux_jump(&pts, q)?));
    }
    let boundary = rng.boundary(p.domain, 100, false, &p.centers);
    let bvals = if p.kind == ProblemKind::Transmission1d {
        p.exact(&[[0.0, 0.0], [PI, 0.0]])?
    } else {
        p.exact(&boundary)?
    };
    let bmax = max_abs(bvals.iter().map(|e| e.u));
    Ok([residual, jump, bmax])
}

fn exact_solutions() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for kind in [
        ProblemKind::Transmission1d,
        ProblemKind::Interface,
        ProblemKind::LShape,
        ProblemKind::MaterialVertex,
    ] {
        let p = Problem::from_kind(kind)?;
        let name = serde_json::to_value(kind)?.as_str().unwrap_or("problem").to_string();
        let [res, jump, bnd] = exact_solution_errors(&p, 1000, 99)?;
        checks.push(Check::below(format!("{name}_residual"), res, 1e-10));
        if !p.interfaces.is_empty() {
            checks.push(Check::below(format!("{name}_flux_jump"), jump, 1e-10));
        }
        checks.push(Check::below(format!("{name}_boundary"), bnd, 1e-12));
    }
    Ok(checks)
}

// ------------------------------------------------------------------- eigen

/// Coefficients of the benchmark profile with `a1 = 3.584`.
pub const REFERENCE_A: [f64; 4] = [3.584, 3.285, 2.474, 2.115];
pub const REFERENCE_B: [f64; 4] = [-2.003, -0.6678, -1.0495, -0.5861];
pub const REFERENCE_LAMBDA: f64 = 0.8599;

fn eigen() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let start = Instant::now();
    let s = SturmLiouvilleSolution::solve(MATERIAL_SIGMA)?.with_a1(MATERIAL_A1);
    checks.push(Check::below("solve_seconds", start.elapsed().as_secs_f64(), 1.0));
    checks.push(Check::below("lambda", (s.lambda - REFERENCE_LAMBDA).abs(), 5e-4));
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    let coef = s
        .a
        .iter()
        .zip(&REFERENCE_A)
        .chain(s.b.iter().zip(&REFERENCE_B))
        .map(|(x, y)| rel(*x, *y))
        .fold(0.0, f64::max);
    checks.push(Check::below("coefficients_relative", coef, 1e-2));
    checks.push(Check::below("matching_residual", max_abs(s.matching_residuals()), 1e-10));
    checks.push(Check::below("det_at_root", normalized_det(MATERIAL_SIGMA, s.lambda).abs(), 1e-10));
    let (lo, hi) = (
        normalized_det(MATERIAL_SIGMA, s.lambda - 1e-6),
        normalized_det(MATERIAL_SIGMA, s.lambda + 1e-6),
    );
    checks.push(Check::holds("det_sign_change", lo * hi < 0.0));
    checks.push(Check::holds("single_root", s.other_roots.is_empty()));

    let start = Instant::now();
    let fem = fem_exponent(MATERIAL_SIGMA, 1024);
    checks.push(Check::below("fem_seconds", start.elapsed().as_secs_f64(), 5.0));
    checks.push(Check::below("fem_cross_check", (fem - s.lambda).abs(), 1e-3));
    let e1 = (fem_exponent(MATERIAL_SIGMA, 128) - s.lambda).abs();
    let e2 = (fem_exponent(MATERIAL_SIGMA, 256) - s.lambda).abs();
    checks.push(Check::below("fem_convergence_order", ((e1 / e2).log2() - 2.0).abs(), 0.3));
    checks.push(Check::below("fem_constant_sigma", (fem_exponent([1.0; 4], 256) - 1.0).abs(), 1e-3));

    let rotated = SturmLiouvilleSolution::solve([4.0, 1.0, 2.0, 3.0])?;
    checks.push(Check::below("rotation_invariance", (rotated.lambda - s.lambda).abs(), 1e-10));
    checks.push(Check::holds(
        "constant_sigma_has_no_root",
        matches!(SturmLiouvilleSolution::solve([1.0; 4]), Err(Error::NoRootInUnitInterval)),
    ));
    Ok(checks)
}
