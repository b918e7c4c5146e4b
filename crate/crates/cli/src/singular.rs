//! The `singular-solve` subcommand.

use anyhow::{bail, Result};
use serde::Serialize;

use reconn_core::problems::fem_exponent;
use reconn_core::SturmLiouvilleSolution;

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub sigma: [f64; 4],
    pub lambda: f64,
    pub a: [f64; 4],
    pub b: [f64; 4],
    /// Further sign changes of the determinant in `(0, 1)`, if any.
    pub other_roots: Vec<f64>,
    pub max_matching_residual: f64,
    /// Exponent from a periodic finite-element discretization, as a cross-check.
    pub lambda_fem: f64,
}

/// Parses `"1,2,3,4"` (commas or whitespace) into four conductivities.
pub fn parse_sigma(parts: &[String]) -> Result<[f64; 4]> {
    let values: Vec<f64> = parts
        .iter()
        .flat_map(|p| p.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| anyhow::anyhow!("bad conductivity {t:?}")))
        .collect::<Result<_>>()?;
    match <[f64; 4]>::try_from(values.as_slice()) {
        Ok(s) => Ok(s),
        Err(_) => bail!("expected four conductivities, got {}", values.len()),
    }
}

pub fn solve(sigma: [f64; 4]) -> Result<SolveOutput> {
    let s = SturmLiouvilleSolution::solve(sigma)?;
    let s = if sigma == reconn_core::problems::MATERIAL_SIGMA {
        s.with_a1(reconn_core::problems::MATERIAL_A1)
    } else {
        s
    };
    let res = s.matching_residuals().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(SolveOutput {
        sigma,
        lambda: s.lambda,
        a: s.a,
        b: s.b,
        other_roots: s.other_roots.clone(),
        max_matching_residual: res,
        lambda_fem: fem_exponent(sigma, 1024),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_forms() {
        assert_eq!(parse_sigma(&["1,2,3,4".into()]).unwrap(), [1.0, 2.0, 3.0, 4.0]);
        let v: Vec<String> = ["1", "2", "3", "4.5"].iter().map(|s| s.to_string()).collect();
        assert_eq!(parse_sigma(&v).unwrap(), [1.0, 2.0, 3.0, 4.5]);
        assert!(parse_sigma(&["1,2,3".into()]).is_err());
        assert!(parse_sigma(&["1,x,3,4".into()]).is_err());
    }
}
