//! Exact solutions checked against finite differences of themselves.

use reconn_core::geometry::Domain;
use reconn_core::{Point, Problem, ProblemKind, Rng};

const H: f64 = 1e-4;

fn u(p: &Problem, x: Point) -> f64 {
    p.exact(&[x]).unwrap()[0].u
}

/// Five-point Laplacian (three-point in 1D).
fn fd_laplacian(p: &Problem, x: Point) -> f64 {
    let c = u(p, x);
    let d1 = u(p, [x[0] + H, x[1]]) - 2.0 * c + u(p, [x[0] - H, x[1]]);
    if p.dim() == 1 {
        return d1 / (H * H);
    }
    let d2 = u(p, [x[0], x[1] + H]) - 2.0 * c + u(p, [x[0], x[1] - H]);
    (d1 + d2) / (H * H)
}

/// Interior points at least `clearance` away from interfaces, centers and the
/// boundary.
fn smooth_points(p: &Problem, n: usize, clearance: f64) -> Vec<Point> {
    let mut rng = Rng::new(11, 0);
    let far = |x: Point| {
        let near_boundary = p
            .domain
            .boundary_segments()
            .iter()
            .any(|s| dist_to_segment(x, s.a, s.b) < clearance);
        !near_boundary
            && p.interfaces.iter().all(|ls| ls.value(x).abs() > clearance)
            && p.centers.iter().all(|c| (x[0] - c[0]).hypot(x[1] - c[1]) > clearance)
    };
    rng.interior(p.domain, 20 * n, false)
        .into_iter()
        .filter(|&x| p.dim() == 1 || far(x))
        .filter(|&x| p.dim() == 2 || (x[0] - std::f64::consts::FRAC_PI_2).abs() > clearance)
        .take(n)
        .collect()
}

fn dist_to_segment(x: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (x[0] - a[0] - t * dx).hypot(x[1] - a[1] - t * dy)
}

fn all() -> Vec<Problem> {
    [
        ProblemKind::Transmission1d,
        ProblemKind::Interface,
        ProblemKind::LShape,
        ProblemKind::MaterialVertex,
    ]
    .into_iter()
    .map(|k| Problem::from_kind(k).unwrap())
    .collect()
}

#[test]
fn source_matches_fd_laplacian() {
    for p in all() {
        let pts = smooth_points(&p, 200, 0.05);
        assert_eq!(pts.len(), 200);
        let f = p.source(&pts).unwrap();
        for (x, fx) in pts.iter().zip(f) {
            let lhs = p.sigma_at(*x) * fd_laplacian(&p, *x);
            assert!((lhs - fx).abs() < 1e-5 * (1.0 + fx.abs()), "{:?} at {x:?}: {lhs} vs {fx}", p.kind);
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    for p in all() {
        for x in smooth_points(&p, 100, 0.02) {
            let g = p.exact(&[x]).unwrap()[0].grad;
            let gx = (u(&p, [x[0] + 1e-6, x[1]]) - u(&p, [x[0] - 1e-6, x[1]])) / 2e-6;
            assert!((g[0] - gx).abs() < 1e-6 * (1.0 + gx.abs()), "{:?} at {x:?}", p.kind);
            if p.dim() == 2 {
                let gy = (u(&p, [x[0], x[1] + 1e-6]) - u(&p, [x[0], x[1] - 1e-6])) / 2e-6;
                assert!((g[1] - gy).abs() < 1e-6 * (1.0 + gy.abs()), "{:?} at {x:?}", p.kind);
            }
        }
    }
}

#[test]
fn solution_is_continuous_across_interfaces() {
    for p in all().into_iter().filter(|p| p.dim() == 2 && !p.interfaces.is_empty()) {
        let mut rng = Rng::new(3, 0);
        for q in 0..p.interfaces.len() {
            for x in rng.on_curves(&p.interface_curves(q), 50, false, &p.centers) {
                let n = p.interfaces[q].normal(x);
                let a = u(&p, [x[0] + 1e-9 * n[0], x[1] + 1e-9 * n[1]]);
                let b = u(&p, [x[0] - 1e-9 * n[0], x[1] - 1e-9 * n[1]]);
                assert!((a - b).abs() < 1e-7, "{:?} at {x:?}", p.kind);
            }
        }
    }
}

#[test]
fn material_gradient_jumps_but_flux_does_not() {
    let p = Problem::material_vertex().unwrap();
    let x = [0.0, 0.3];
    let l = p.exact(&[[-1e-9, 0.3]]).unwrap()[0].grad[0];
    let r = p.exact(&[[1e-9, 0.3]]).unwrap()[0].grad[0];
    assert!((l - r).abs() > 1e-2, "normal derivative should jump at {x:?}");
    let fl = p.sigma_at([-1e-9, 0.3]) * l;
    let fr = p.sigma_at([1e-9, 0.3]) * r;
    assert!((fl - fr).abs() < 1e-6);
}

#[test]
fn lshape_excludes_the_cut_quadrant() {
    let p = Problem::lshape();
    assert_eq!(p.domain, Domain::LShape);
    assert!(!p.domain.contains([-0.5, -0.5]));
    assert!(p.domain.contains([0.5, -0.5]));
    assert!(p.domain.contains([-0.5, 0.5]));
}
