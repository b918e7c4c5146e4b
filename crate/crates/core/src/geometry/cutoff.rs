use serde::{Deserialize, Serialize};

use crate::autodiff::{SpatialJet, Tape};

/// Quintic smoothstep `eta_0` with its first two derivatives: 1 for `t < 0`,
/// 0 for `t > 1`, globally C^2.
pub fn eta0(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (1.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        quintic(t)
    }
}

fn quintic(t: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        -6.0 * t3 * t2 + 15.0 * t2 * t2 - 10.0 * t3 + 1.0,
        -30.0 * t2 * t2 + 60.0 * t3 - 30.0 * t2,
        -120.0 * t3 + 180.0 * t2 - 60.0 * t,
    )
}

/// Radial cutoff: 1 for `r <= delta1`, 0 for `r >= delta2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub delta1: f64,
    pub delta2: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self {
            delta1: 0.5,
            delta2: 0.9,
        }
    }
}

impl Cutoff {
    pub fn new(delta1: f64, delta2: f64) -> Self {
        assert!(
            0.0 < delta1 && delta1 < delta2,
            "cutoff radii must satisfy 0 < delta1 < delta2"
        );
        Self { delta1, delta2 }
    }

    /// `(eta, eta', eta'')` at radius `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let w = self.delta2 - self.delta1;
        let (v, d1, d2) = eta0((r - self.delta1) / w);
        (v, d1 / w, d2 / (w * w))
    }

    /// `eta(r)` as a jet of a parameter-free radius jet.
    pub fn jet(&self, tape: &mut Tape, r: &SpatialJet) -> SpatialJet {
        assert!(!tape.needs_grad(r.u), "cutoff expects a parameter-free radius");
        let (rows, cols) = tape.shape(r.u);
        let vals: Vec<(f64, f64, f64)> = tape.value(r.u).iter().map(|&x| self.eval(x)).collect();
        let f = tape.constant(rows, cols, vals.iter().map(|v| v.0).collect());
        if !r.order.has_gradient() {
            return SpatialJet { u: f, ..r.clone() };
        }
        let fp = tape.constant(rows, cols, vals.iter().map(|v| v.1).collect());
        let fpp = tape.constant(rows, cols, vals.iter().map(|v| v.2).collect());
        r.chain(tape, f, fp, Some(fpp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_anchor_values() {
        assert_eq!(eta0(0.0).0, 1.0);
        assert_eq!(eta0(1.0).0, 0.0);
        assert!((eta0(0.5).0 - 0.5).abs() < 1e-15);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((eta0(t).0 + eta0(1.0 - t).0 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn plateaus() {
        let c = Cutoff::new(0.5, 0.9);
        assert_eq!(c.eval(0.4).0, 1.0);
        assert_eq!(c.eval(0.95).0, 0.0);
    }

    #[test]
    fn polynomial_meets_plateaus() {
        assert_eq!(quintic(0.0), (1.0, 0.0, 0.0));
        assert_eq!(quintic(1.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn derivatives_match_fd() {
        let c = Cutoff::default();
        let h = 1e-6;
        for k in (1..40).filter(|k| k % 32 != 4) {
            let r = 0.45 + k as f64 * 0.0125;
            let (_, d1, d2) = c.eval(r);
            let fd1 = (c.eval(r + h).0 - c.eval(r - h).0) / (2.0 * h);
            let fd2 = (c.eval(r + h).1 - c.eval(r - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6);
            assert!((d2 - fd2).abs() < 1e-4);
        }
    }
}
