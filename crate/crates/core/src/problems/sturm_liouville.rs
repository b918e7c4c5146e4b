//! Singular exponents of a material vertex where four quadrants of constant
//! conductivity meet.
//!
//! On each sector `k` the angular profile is `a_k sin(lambda t) + b_k cos(lambda t)`
//! (global angle `t`). Continuity of the profile and of `sigma * d/dt` at the
//! four sector boundaries gives a linear system `M(lambda) c = 0` in
//! `c = (a_1..a_4, b_1..b_4)`, which has a nontrivial solution iff
//! `det M(lambda) = 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Mat8 = SMatrix<f64, 8, 8>;

/// Uniform scan points used to bracket roots of the determinant.
const SCAN_POINTS: usize = 200;
const SCAN_LO: f64 = 0.01;
const SCAN_HI: f64 = 0.99;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SturmLiouvilleSolution {
    pub lambda: f64,
    pub sigma: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
    /// Further sign changes of the determinant found in `(0, 1)`, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub other_roots: Vec<f64>,
}

/// Sector of the angle `theta` in `[0, 2 pi)`.
pub fn sector_of(theta: f64) -> usize {
    ((theta.rem_euclid(2.0 * PI) / FRAC_PI_2) as usize).min(3)
}

/// Sector boundary angles: `pi/2, pi, 3pi/2` and the wrap `2pi == 0`.
fn boundaries() -> [f64; 4] {
    [FRAC_PI_2, PI, 1.5 * PI, 2.0 * PI]
}

/// The `8 x 8` continuity matrix. Rows `0..4` match values, rows `4..8`
/// match fluxes at the boundaries; the common factor `lambda` of the flux
/// rows is dropped.
pub fn sector_matrix(sigma: [f64; 4], lambda: f64) -> Mat8 {
    let mut m = Mat8::zeros();
    for (j, &t) in boundaries().iter().enumerate() {
        let left = j;
        let right = (j + 1) % 4;
        let (s, c) = (lambda * t).sin_cos();
        // On the right of the wrap the angle restarts at 0.
        let (sr, cr) = if right == 0 { (0.0, 1.0) } else { (s, c) };
        m[(j, left)] = s;
        m[(j, 4 + left)] = c;
        m[(j, right)] -= sr;
        m[(j, 4 + right)] -= cr;
        m[(4 + j, left)] = sigma[left] * c;
        m[(4 + j, 4 + left)] = -sigma[left] * s;
        m[(4 + j, right)] -= sigma[right] * cr;
        m[(4 + j, 4 + right)] += sigma[right] * sr;
    }
    m
}

/// Determinant of the sector matrix with every row scaled to unit length.
pub fn normalized_det(sigma: [f64; 4], lambda: f64) -> f64 {
    let mut m = sector_matrix(sigma, lambda);
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    m.lu().determinant()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Null vector of a matrix whose kernel is one-dimensional, via Gaussian
/// elimination with full pivoting.
fn kernel(m: &Mat8) -> Result<SVector<f64, 8>> {
    let lu = m.full_piv_lu();
    let u = lu.u();
    let scale = u[(0, 0)].abs().max(f64::MIN_POSITIVE);
    let rank = (0..8).filter(|&i| u[(i, i)].abs() > 1e-8 * scale).count();
    if rank != 7 {
        return Err(Error::KernelRankError { nullity: 8 - rank });
    }
    // Back substitution on the leading 7 x 7 block with the free variable 1.
    let mut y = SVector::<f64, 8>::zeros();
    y[7] = 1.0;
    for i in (0..7).rev() {
        let s: f64 = (i + 1..8).map(|k| u[(i, k)] * y[k]).sum();
        y[i] = -s / u[(i, i)];
    }
    let mut x = y;
    lu.q().inv_permute_rows(&mut x);
    Ok(x)
}

impl SturmLiouvilleSolution {
    /// Smallest singular exponent in `(0, 1)` with its coefficients, scaled to
    /// unit Euclidean norm and `a_1 >= 0`.
    pub fn solve(sigma: [f64; 4]) -> Result<Self> {
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain(format!("conductivities must be positive, got {sigma:?}")));
        }
        let det = |l: f64| normalized_det(sigma, l);
        let grid: Vec<f64> = (0..SCAN_POINTS)
            .map(|i| SCAN_LO + (SCAN_HI - SCAN_LO) * i as f64 / (SCAN_POINTS - 1) as f64)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&l| det(l)).collect();
        let mut roots = Vec::new();
        for i in 0..SCAN_POINTS - 1 {
            if vals[i] == 0.0 {
                roots.push(grid[i]);
            } else if vals[i] * vals[i + 1] < 0.0 {
                roots.push(bisect(det, grid[i], grid[i + 1]));
            }
        }
        let Some(&lambda) = roots.first() else {
            return Err(Error::NoRootInUnitInterval);
        };
        let v = kernel(&sector_matrix(sigma, lambda))?;
        let mut v = v / v.norm();
        if v[0] < 0.0 || (v[0] == 0.0 && v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)) {
            v = -v;
        }
        Ok(Self {
            lambda,
            sigma,
            a: [v[0], v[1], v[2], v[3]],
            b: [v[4], v[5], v[6], v[7]],
            other_roots: roots[1..].to_vec(),
        })
    }

    /// The same profile rescaled so that `a_1` equals `a1`.
    pub fn with_a1(&self, a1: f64) -> Self {
        let k = a1 / self.a[0];
        Self {
            a: self.a.map(|x| x * k),
            b: self.b.map(|x| x * k),
            ..self.clone()
        }
    }

    /// `phi(theta)` and `phi'(theta)` using the coefficients of `sector`.
    pub fn profile(&self, sector: usize, theta: f64) -> (f64, f64) {
        let l = self.lambda;
        let (s, c) = (l * theta).sin_cos();
        (
            self.a[sector] * s + self.b[sector] * c,
            l * (self.a[sector] * c - self.b[sector] * s),
        )
    }

    /// Residuals of the value and flux matching at the four sector boundaries.
    pub fn matching_residuals(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (j, &t) in boundaries().iter().enumerate() {
            let right = (j + 1) % 4;
            let tr = if right == 0 { 0.0 } else { t };
            let (vl, dl) = self.profile(j, t);
            let (vr, dr) = self.profile(right, tr);
            out[j] = vl - vr;
            out[4 + j] = self.sigma[j] * dl - self.sigma[right] * dr;
        }
        out
    }
}

/// Smallest nonzero exponent `lambda` of the periodic eigenproblem
/// `-(sigma phi')' = lambda^2 sigma phi` on `(0, 2 pi)`, from linear finite
/// elements with `n` equal elements (`n` a multiple of 4 so the sector
/// boundaries are mesh nodes).
///
/// The eigenvalue is located by bisection on the Sylvester inertia of
/// `K - mu M`, which is cyclic tridiagonal.
pub fn fem_exponent(sigma: [f64; 4], n: usize) -> f64 {
    assert!(n >= 8 && n.is_multiple_of(4), "element count must be a multiple of 4");
    let h = 2.0 * PI / n as f64;
    let sig: Vec<f64> = (0..n).map(|e| sigma[e * 4 / n]).collect();
    // Number of eigenvalues below `mu`.
    let below = |mu: f64| {
        let mut diag = vec![0.0; n];
        // off[i] couples node i and i+1 (mod n).
        let mut off = vec![0.0; n];
        for e in 0..n {
            let k = sig[e] / h;
            let m = sig[e] * h / 6.0;
            diag[e] += k - mu * 2.0 * m;
            diag[(e + 1) % n] += k - mu * 2.0 * m;
            off[e] += -k - mu * m;
        }
        cyclic_negative_pivots(&diag, &off)
    };
    // Bracket the second eigenvalue (the first is 0, constants).
    let mut hi = 1.0;
    while below(hi) < 2 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-15 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi)).sqrt()
}

/// Number of negative pivots in the `LDL^T` factorization of the symmetric
/// cyclic tridiagonal matrix with diagonal `d` and couplings `e[i] = A[i][i+1 mod n]`.
fn cyclic_negative_pivots(d: &[f64], e: &[f64]) -> usize {
    let n = d.len();
    let last = n - 1;
    let tiny = f64::EPSILON * d.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let fix = |p: f64| if p.abs() < tiny { -tiny } else { p };
    let mut neg = 0;
    let mut pivot = fix(d[0]);
    // Entry (i, last) of the partially reduced matrix.
    let mut col = e[last];
    let mut corner = d[last];
    for i in 1..last {
        if pivot < 0.0 {
            neg += 1;
        }
        let link = e[i - 1];
        corner -= col * col / pivot;
        let next_col = if i == last - 1 { e[i] } else { 0.0 } - link * col / pivot;
        pivot = fix(d[i] - link * link / pivot);
        col = next_col;
    }
    if pivot < 0.0 {
        neg += 1;
    }
    corner -= col * col / pivot;
    if fix(corner) < 0.0 {
        neg += 1;
    }
    neg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_exponent() {
        let s = SturmLiouvilleSolution::solve([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.lambda - 0.8599).abs() < 5e-4, "lambda = {}", s.lambda);
        assert!(s.other_roots.is_empty());
        assert!(s.matching_residuals().iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn constant_conductivity_has_no_singularity() {
        assert!(matches!(
            SturmLiouvilleSolution::solve([1.0; 4]),
            Err(Error::NoRootInUnitInterval)
        ));
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(SturmLiouvilleSolution::solve([1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn sectors() {
        assert_eq!(sector_of(0.1), 0);
        assert_eq!(sector_of(2.0), 1);
        assert_eq!(sector_of(4.0), 2);
        assert_eq!(sector_of(6.0), 3);
        assert_eq!(sector_of(-0.1), 3);
    }

    #[test]
    fn inertia_of_small_cyclic_matrix() {
        // Circulant [2 -1 0 -1; ...]: eigenvalues 0, 2, 2, 4.
        let d = [2.0; 4];
        let e = [-1.0; 4];
        let shifted = |mu: f64| {
            let dd: Vec<f64> = d.iter().map(|x| x - mu).collect();
            cyclic_negative_pivots(&dd, &e)
        };
        assert_eq!(shifted(-0.5), 0);
        assert_eq!(shifted(1.0), 1);
        assert_eq!(shifted(3.0), 3);
        assert_eq!(shifted(5.0), 4);
    }

    #[test]
    fn fem_constant_conductivity() {
        let l = fem_exponent([2.0; 4], 256);
        assert!((l - 1.0).abs() < 1e-3, "{l}");
    }
}
