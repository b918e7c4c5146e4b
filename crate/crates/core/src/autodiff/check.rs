use serde::Serialize;

use super::{JetOrder, ParamStore, SpatialJet, Tape};
use crate::error::Result;
use crate::geometry::Point;

/// Largest relative deviations between AD and central finite differences.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FdReport {
    pub grad: f64,
    pub laplacian: f64,
    /// Parameter gradient of `u(x)`.
    pub param_grad: f64,
    /// Parameter gradient of `Laplacian u(x)`.
    pub param_laplacian: f64,
    /// Set when `x` is closer than `10 * step` to a kink or singular point.
    pub precondition_violation: Option<String>,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        self.grad
            .max(self.laplacian)
            .max(self.param_grad)
            .max(self.param_laplacian)
    }
}

/// `max |a - b| / max |b|`, falling back to the absolute deviation when `b` vanishes.
pub(crate) fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if den > 1e-12 {
        num / den
    } else {
        num
    }
}

/// Compares the jets produced by `eval` against central finite differences
/// around `x`, both in space and in the parameters.
///
/// `eval(tape, store, points, order)` must return a single-row jet.
/// `clearance` is the distance from `x` to the nearest interface or singular
/// point.
pub fn fd_check<F>(eval: F, store: &ParamStore, dim: usize, x: Point, step: f64, clearance: f64) -> Result<FdReport>
where
    F: Fn(&mut Tape, &ParamStore, &[Point], JetOrder) -> Result<SpatialJet>,
{
    let mut report = FdReport::default();
    if clearance <= 10.0 * step {
        report.precondition_violation = Some(format!(
            "point ({}, {}) is {clearance:e} from a kink, need more than {:e}",
            x[0],
            x[1],
            10.0 * step
        ));
    }

    let mut tape = Tape::new();
    let jet = eval(&mut tape, store, &[x], JetOrder::Hessian)?;
    let lap = jet.laplacian(&mut tape);
    let ad_grad: Vec<f64> = jet.grad.iter().map(|&g| tape.scalar(g)).collect();
    let ad_lap = tape.scalar(lap);
    let n = store.len();
    let ad_pu = tape.gradient(&[(jet.u, 1.0)], n);
    let ad_plap = tape.gradient(&[(lap, 1.0)], n);

    let shifted = |k: usize, h: f64| {
        let mut p = x;
        p[k] += h;
        p
    };
    let value_at = |s: &ParamStore, p: Point| -> Result<f64> {
        let mut t = Tape::new();
        let j = eval(&mut t, s, &[p], JetOrder::Value)?;
        Ok(t.scalar(j.u))
    };
    let grad_at = |p: Point| -> Result<Vec<f64>> {
        let mut t = Tape::new();
        let j = eval(&mut t, store, &[p], JetOrder::Gradient)?;
        Ok(j.grad.iter().map(|&g| t.scalar(g)).collect())
    };
    let lap_at = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let j = eval(&mut t, s, &[x], JetOrder::Hessian)?;
        let l = j.laplacian(&mut t);
        Ok(t.scalar(l))
    };

    let mut fd_grad = Vec::with_capacity(dim);
    let mut fd_lap = 0.0;
    for k in 0..dim {
        let (p, m) = (shifted(k, step), shifted(k, -step));
        fd_grad.push((value_at(store, p)? - value_at(store, m)?) / (2.0 * step));
        fd_lap += (grad_at(p)?[k] - grad_at(m)?[k]) / (2.0 * step);
    }
    report.grad = rel_dev(&ad_grad, &fd_grad);
    report.laplacian = rel_dev(&[ad_lap], &[fd_lap]);

    let mut fd_pu = vec![0.0; n];
    let mut fd_plap = vec![0.0; n];
    let mut s = store.clone();
    for i in 0..n {
        let v0 = s.values()[i];
        s.values_mut()[i] = v0 + step;
        let (up, lp) = (value_at(&s, x)?, lap_at(&s)?);
        s.values_mut()[i] = v0 - step;
        let (um, lm) = (value_at(&s, x)?, lap_at(&s)?);
        s.values_mut()[i] = v0;
        fd_pu[i] = (up - um) / (2.0 * step);
        fd_plap[i] = (lp - lm) / (2.0 * step);
    }
    report.param_grad = rel_dev(&ad_pu, &fd_pu);
    report.param_laplacian = rel_dev(&ad_plap, &fd_plap);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `c * x^2 y` with a single trainable coefficient `c`.
    fn poly(t: &mut Tape, s: &ParamStore, pts: &[Point], order: JetOrder) -> Result<SpatialJet> {
        let c = t.param(s, super::super::ParamId(0));
        let xy = SpatialJet::coordinates(t, pts, 2, order);
        let x2 = xy[0].mul(t, &xy[0]);
        Ok(x2.mul(t, &xy[1]).mul_var(t, c))
    }

    #[test]
    fn polynomial_field() {
        let mut store = ParamStore::new();
        store.add("c", 1, 1, vec![1.5]);
        let r = fd_check(poly, &store, 2, [0.7, -0.4], 1e-4, 1.0).unwrap();
        assert!(r.max() < 1e-6, "{r:?}");
        assert!(r.precondition_violation.is_none());
    }

    #[test]
    fn reports_precondition() {
        let mut store = ParamStore::new();
        store.add("c", 1, 1, vec![1.0]);
        let r = fd_check(poly, &store, 2, [0.1, 0.2], 1e-4, 5e-4).unwrap();
        assert!(r.precondition_violation.is_some());
    }
}
