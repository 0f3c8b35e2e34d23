//! Cross-checks of the solvers against closed forms.

use serde::Serialize;

use crate::error::Result;
use crate::presets;
use crate::spectral;
use crate::survival;

/// Relative tolerance of the closed-form suite.
pub const ANALYTIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        let rel_error = (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        Check {
            name: name.into(),
            expected,
            actual,
            rel_error,
            tolerance,
            pass: rel_error <= tolerance,
        }
    }
}

/// Flat worlds `(b_u, b_v, d, c)`: resident and a fitter mutant.
pub const CONSTANT_WORLDS: &[(f64, f64, f64, f64)] = &[(2.0, 3.0, 1.0, 10.0), (4.0, 5.5, 1.0, 5.0), (1.5, 2.5, 0.5, 2.0)];

/// The grid value farthest from `target`.
fn worst(values: &[f64], target: f64) -> f64 {
    values
        .iter()
        .copied()
        .max_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(f64::NAN)
}

/// Closed-form checks on spatially flat worlds:
/// `H = b - d`, `g = (b - d)/(c |X|)`, `kappa = c`, `phi* = (b - d)/b`
/// and `phi^{vu} = (H^v - H^u)/b^v`.
pub fn constant_world_suite(n_nodes: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &(b_u, b_v, d, c) in CONSTANT_WORLDS {
        let spec = presets::flat_pair_world(presets::RESIDENT_TRAIT, presets::MUTANT_TRAIT, b_u, b_v, d, c);
        let (u, v) = (presets::RESIDENT_TRAIT, presets::MUTANT_TRAIT);
        let tag = format!("b={b_u},d={d},c={c}");
        let len = spec.domain.len();
        let eig_u = spectral::principal_eigen(&spec, u, n_nodes)?;
        let eig_v = spectral::principal_eigen(&spec, v, n_nodes)?;
        checks.push(Check::new(format!("H[{tag}]"), b_u - d, eig_u.h, ANALYTIC_TOL));
        let g0 = (b_u - d) / (c * len);
        checks.push(Check::new(format!("g[{tag}]"), g0, worst(&eig_u.g.density, g0), ANALYTIC_TOL));
        checks.push(Check::new(format!("kappa[{tag}]"), c, spectral::kappa(&spec, u, &eig_u)?, ANALYTIC_TOL));

        let grid = eig_u.grid();
        let b = vec![b_u; grid.n];
        let dd = vec![d; grid.n];
        let star = survival::solve_phi_star(grid, spec.diffusion(u), &b, &dd)?;
        let p0 = (b_u - d) / b_u;
        checks.push(Check::new(format!("phi_star[{tag}]"), p0, worst(&star.phi, p0), ANALYTIC_TOL));

        let inv = survival::solve_phi_vu(&spec, v, &eig_u)?;
        let expected = ((b_v - d) - (b_u - d)) / b_v;
        checks.push(Check::new(format!("H_mutant[{tag},b_v={b_v}]"), b_v - d, eig_v.h, ANALYTIC_TOL));
        checks.push(Check::new(format!("phi_vu[{tag},b_v={b_v}]"), expected, worst(&inv.profile.phi, expected), ANALYTIC_TOL));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_suite_passes() {
        let checks = constant_world_suite(128).unwrap();
        assert_eq!(checks.len(), 6 * CONSTANT_WORLDS.len());
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn check_flags_large_errors() {
        assert!(!Check::new("x", 1.0, 1.1, 1e-6).pass);
        assert!(Check::new("x", 2.0, 2.0 + 1e-9, 1e-6).pass);
    }
}
