//! Relative L^2 errors of a field and its gradient on midpoint grids.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{JetOrder, Tape};
use crate::error::Result;
use crate::geometry::Point;
use crate::losses::Evaluate;
use crate::problems::Problem;

pub const CSV_HEADER: &str = "x1,x2,u_nn,u_exact,gnorm_nn,gnorm_exact,err_u,err_grad";

/// Uniform midpoint grid with `n` cells per direction over the bounding box
/// of the domain; cells outside the domain are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
}

impl GridSpec {
    /// `10^4` cells in 1D, `256^2` in 2D.
    pub fn default_for(problem: &Problem) -> Self {
        Self {
            n: if problem.dim() == 1 { 10_000 } else { 256 },
        }
    }

    pub fn points(&self, problem: &Problem) -> Vec<Point> {
        let (lo, hi) = problem.domain.bounds();
        let mid = |k: usize, i: usize| lo[k] + (i as f64 + 0.5) * (hi[k] - lo[k]) / self.n as f64;
        if problem.dim() == 1 {
            return (0..self.n).map(|i| [mid(0, i), 0.0]).collect();
        }
        (0..self.n)
            .flat_map(|j| (0..self.n).map(move |i| (i, j)))
            .map(|(i, j)| [mid(0, i), mid(1, j)])
            .filter(|&x| problem.domain.contains(x))
            .collect()
    }
}

/// Relative errors in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rel_l2_u: f64,
    pub rel_l2_grad: f64,
    pub grid: GridSpec,
    pub points: usize,
}

/// One grid point of a dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRow {
    pub x: Point,
    pub u_nn: f64,
    pub u_exact: f64,
    pub grad_nn: [f64; 2],
    pub grad_exact: [f64; 2],
}

impl GridRow {
    pub fn err_u(&self) -> f64 {
        (self.u_nn - self.u_exact).abs()
    }

    pub fn err_grad(&self) -> f64 {
        let d = [self.grad_nn[0] - self.grad_exact[0], self.grad_nn[1] - self.grad_exact[1]];
        d[0].hypot(d[1])
    }
}

const ROWS_PER_TAPE: usize = 1024;

/// Field and exact values at every grid point, in row-major grid order.
pub fn grid_dump(model: &dyn Evaluate, problem: &Problem, grid: GridSpec) -> Result<Vec<GridRow>> {
    let points = grid.points(problem);
    let parts: Vec<Vec<GridRow>> = points
        .par_chunks(ROWS_PER_TAPE)
        .map(|chunk| -> Result<Vec<GridRow>> {
            let mut tape = Tape::new();
            let j = model.eval_sides(&mut tape, chunk, JetOrder::Gradient, &[Default::default()])?.remove(0);
            let exact = problem.exact(chunk)?;
            let u = tape.value(j.u);
            let g: Vec<&[f64]> = j.grad.iter().map(|&v| tape.value(v)).collect();
            Ok(chunk
                .iter()
                .zip(exact)
                .enumerate()
                .map(|(i, (&x, e))| GridRow {
                    x,
                    u_nn: u[i],
                    u_exact: e.u,
                    grad_nn: [g[0][i], g.get(1).map_or(0.0, |gy| gy[i])],
                    grad_exact: e.grad,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Midpoint-rule relative errors from a dump. Sums run in grid order.
pub fn report_from_rows(rows: &[GridRow], grid: GridSpec) -> ErrorReport {
    let (mut du, mut nu, mut dg, mut ng) = (0.0, 0.0, 0.0, 0.0);
    for r in rows {
        du += r.err_u().powi(2);
        nu += r.u_exact.powi(2);
        dg += r.err_grad().powi(2);
        ng += r.grad_exact[0].powi(2) + r.grad_exact[1].powi(2);
    }
    ErrorReport {
        rel_l2_u: 100.0 * (du / nu).sqrt(),
        rel_l2_grad: 100.0 * (dg / ng).sqrt(),
        grid,
        points: rows.len(),
    }
}

pub fn relative_l2(model: &dyn Evaluate, problem: &Problem, grid: GridSpec) -> Result<ErrorReport> {
    let rows = grid_dump(model, problem, grid)?;
    Ok(report_from_rows(&rows, grid))
}

pub fn write_csv<W: Write>(rows: &[GridRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let gn = r.grad_nn[0].hypot(r.grad_nn[1]);
        let ge = r.grad_exact[0].hypot(r.grad_exact[1]);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.x[0],
            r.x[1],
            r.u_nn,
            r.u_exact,
            gn,
            ge,
            r.err_u(),
            r.err_grad()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{ParamStore, SpatialJet};
    use crate::geometry::SideSpec;
    use crate::losses::ExactSolution;

    /// `u* (a + b x1) + c`
    struct Warped<'a> {
        exact: ExactSolution<'a>,
        a: f64,
        b: f64,
        c: f64,
    }

    impl<'a> Warped<'a> {
        fn new(p: &'a Problem, a: f64, b: f64, c: f64) -> Self {
            Self {
                exact: ExactSolution::new(p),
                a,
                b,
                c,
            }
        }
    }

    impl Evaluate for Warped<'_> {
        fn dim(&self) -> usize {
            self.exact.dim()
        }
        fn params(&self) -> &ParamStore {
            self.exact.params()
        }
        fn eval_sides(&self, tape: &mut Tape, points: &[Point], order: JetOrder, sides: &[SideSpec])
            -> Result<Vec<SpatialJet>> {
            let js = self.exact.eval_sides(tape, points, order, sides)?;
            let x = SpatialJet::coordinates(tape, points, self.dim(), order);
            let m = x[0].scale(tape, self.b).add_const(tape, self.a);
            Ok(js
                .iter()
                .map(|j| j.mul(tape, &m).add_const(tape, self.c))
                .collect())
        }
        fn angular_sides(&self, tape: &mut Tape, xhat: &[Point], order: JetOrder, sides: &[SideSpec])
            -> Result<Vec<SpatialJet>> {
            self.exact.angular_sides(tape, xhat, order, sides)
        }
        fn has_singular_unit(&self) -> bool {
            false
        }
    }

    #[test]
    fn exact_field_has_no_error() {
        let p = Problem::interface();
        let r = relative_l2(&ExactSolution::new(&p), &p, GridSpec { n: 64 }).unwrap();
        assert_eq!((r.rel_l2_u, r.rel_l2_grad), (0.0, 0.0));
    }

    #[test]
    fn scaling_gives_one_percent() {
        let p = Problem::material_vertex().unwrap();
        let r = relative_l2(&Warped::new(&p, 1.01, 0.0, 0.0), &p, GridSpec { n: 64 }).unwrap();
        assert!((r.rel_l2_u - 1.0).abs() < 1e-10 && (r.rel_l2_grad - 1.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn constant_offset_has_no_gradient_error() {
        let p = Problem::transmission_1d();
        let r = relative_l2(&Warped::new(&p, 1.0, 0.0, 0.3), &p, GridSpec::default_for(&p)).unwrap();
        assert_eq!(r.rel_l2_grad, 0.0);
        assert!(r.rel_l2_u > 0.0);
        assert_eq!(r.points, 10_000);
    }

    #[test]
    fn small_grid_and_mask() {
        let p = Problem::interface();
        assert_eq!(grid_dump(&ExactSolution::new(&p), &p, GridSpec { n: 2 }).unwrap().len(), 4);
        let l = Problem::lshape();
        let pts = GridSpec { n: 16 }.points(&l);
        assert_eq!(pts.len(), 3 * 64);
        assert!(pts.iter().all(|x| x[0] > 0.0 || x[1] > 0.0));
    }

    #[test]
    fn csv_layout() {
        let p = Problem::interface();
        let rows = grid_dump(&ExactSolution::new(&p), &p, GridSpec { n: 2 }).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("-0.5,-0.5,"));
        assert_eq!(lines[1].split(',').count(), 8);
    }

    #[test]
    fn quadrature_is_resolved() {
        for p in [Problem::lshape(), Problem::material_vertex().unwrap()] {
            let f = Warped::new(&p, 1.0, 0.1, 0.0);
            let a = relative_l2(&f, &p, GridSpec { n: 128 }).unwrap();
            let b = relative_l2(&f, &p, GridSpec { n: 256 }).unwrap();
            assert!((a.rel_l2_u / b.rel_l2_u - 1.0).abs() < 5e-3, "{a:?} {b:?}");
            assert!((a.rel_l2_grad / b.rel_l2_grad - 1.0).abs() < 5e-3, "{a:?} {b:?}");
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let p = Problem::material_vertex().unwrap();
        let f = Warped::new(&p, 1.0, 0.1, 0.02);
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| relative_l2(&f, &p, GridSpec { n: 100 }).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
