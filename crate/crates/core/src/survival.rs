//! Survival probability of a branching diffusion:
//! the positive solution of `m phi'' + (b - d) phi - b phi^2 = 0` with
//! Neumann ends, and the invasion probability of a mutant in a resident
//! equilibrium.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{solve_tridiagonal, Grid};
use crate::model::ModelSpec;
use crate::spectral::{self, EigenSolution, TIE_TOL};

const NEWTON_CAP: usize = 100;
const MONOTONE_CAP: usize = 200_000;

#[derive(Debug, Clone)]
pub struct SurvivalProfile {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub residual_inf: f64,
    pub viable: bool,
    /// The principal eigenvalue fell within the tie tolerance of zero.
    pub degenerate: bool,
    /// Principal eigenvalue of `m D + b - d`.
    pub eigenvalue: f64,
}

impl SurvivalProfile {
    pub fn at(&self, x: f64) -> f64 {
        self.grid.interpolate_linear(&self.phi, x)
    }

    fn extinct(grid: Grid, eigenvalue: f64, degenerate: bool) -> Self {
        SurvivalProfile {
            grid,
            phi: vec![0.0; grid.n],
            residual_inf: 0.0,
            viable: false,
            degenerate,
            eigenvalue,
        }
    }
}

/// Invasion probability of `v` with its scalar diagnostics.
#[derive(Debug, Clone)]
pub struct InvasionProfile {
    pub profile: SurvivalProfile,
    pub c_vu: f64,
    pub fitness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvasionHeader {
    pub resident: f64,
    pub mutant: f64,
    #[serde(rename = "C_vu")]
    pub c_vu: f64,
    pub fitness: f64,
    pub viable: bool,
    pub degenerate: bool,
    pub residual_inf: f64,
}

fn residual(grid: Grid, m: f64, r: &[f64], b: &[f64], phi: &[f64], out: &mut [f64]) -> f64 {
    grid.apply_laplacian(m, phi, out);
    let mut worst: f64 = 0.0;
    for i in 0..grid.n {
        out[i] += r[i] * phi[i] - b[i] * phi[i] * phi[i];
        worst = worst.max(out[i].abs());
    }
    worst
}

struct Problem<'a> {
    grid: Grid,
    m: f64,
    r: Vec<f64>,
    b: &'a [f64],
    tol: f64,
}

impl Problem<'_> {
    /// Damped Newton from `phi`; `None` when it stalls.
    fn newton(&self, mut phi: Vec<f64>) -> Result<Option<(Vec<f64>, f64)>> {
        let n = self.grid.n;
        let (lower, lap, upper) = self.grid.laplacian_bands(self.m);
        let mut f = vec![0.0; n];
        let mut trial_f = vec![0.0; n];
        let mut res = residual(self.grid, self.m, &self.r, self.b, &phi, &mut f);
        for _ in 0..NEWTON_CAP {
            if res <= self.tol {
                return Ok(Some((phi, res)));
            }
            let diag: Vec<f64> = (0..n)
                .map(|i| lap[i] + self.r[i] - 2.0 * self.b[i] * phi[i])
                .collect();
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let step = match solve_tridiagonal(&lower, &diag, &upper, &rhs) {
                Ok(s) => s,
                Err(_) => return Ok(None),
            };
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p + alpha * s).collect();
                let tr = residual(self.grid, self.m, &self.r, self.b, &trial, &mut trial_f);
                if tr < res {
                    phi = trial;
                    std::mem::swap(&mut f, &mut trial_f);
                    res = tr;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    return Ok((res <= 1e3 * self.tol).then_some((phi, res)));
                }
            }
        }
        Ok((res <= self.tol).then_some((phi, res)))
    }

    /// Decreasing monotone iteration from the supersolution `phi = 1`.
    fn monotone(&self, sigma: f64) -> Result<Vec<f64>> {
        let n = self.grid.n;
        let (lower, lap, upper) = self.grid.laplacian_bands(self.m);
        let lower: Vec<f64> = lower.iter().map(|v| -v).collect();
        let upper: Vec<f64> = upper.iter().map(|v| -v).collect();
        let diag: Vec<f64> = lap.iter().map(|v| sigma - v).collect();
        let mut phi = vec![1.0; n];
        for _ in 0..MONOTONE_CAP {
            let rhs: Vec<f64> = (0..n)
                .map(|i| (self.r[i] + sigma) * phi[i] - self.b[i] * phi[i] * phi[i])
                .collect();
            let next = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
            let change = next.iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            phi = next;
            if change <= 1e-9 {
                break;
            }
        }
        Ok(phi)
    }
}

fn in_band(phi: &[f64]) -> bool {
    phi.iter().all(|p| *p > 0.0 && *p <= 1.0 + 1e-12)
}

fn solve_with_threshold(
    grid: Grid,
    m: f64,
    b_eff: &[f64],
    d_eff: &[f64],
    tie: impl Fn(f64) -> (bool, bool),
) -> Result<SurvivalProfile> {
    if b_eff.len() != grid.n || d_eff.len() != grid.n {
        return Err(Error::Config("rate arrays must match the grid".into()));
    }
    if let Some(b) = b_eff.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::Validation(format!("effective birth rate {b} is negative")));
    }
    let r: Vec<f64> = b_eff.iter().zip(d_eff).map(|(b, d)| b - d).collect();
    let eigenvalue = spectral::principal_eigenvalue(grid, m, &r);
    let (viable, degenerate) = tie(eigenvalue);
    if !viable {
        return Ok(SurvivalProfile::extinct(grid, eigenvalue, degenerate));
    }
    let b_max = b_eff.iter().copied().fold(0.0, f64::max);
    let problem = Problem {
        grid,
        m,
        r,
        b: b_eff,
        tol: 1e-11 * b_max.max(1.0),
    };
    let start: Vec<f64> = (0..grid.n)
        .map(|i| {
            let guess = if b_eff[i] > 0.0 { problem.r[i].max(0.0) / b_eff[i] } else { 0.0 };
            guess.clamp(1e-6, 1.0)
        })
        .collect();

    let mut solved = problem.newton(start)?.filter(|(phi, _)| in_band(phi));
    if solved.is_none() {
        let sigma = (0..grid.n).map(|i| b_eff[i] + d_eff[i]).fold(0.0, f64::max).max(1.0);
        let rough = problem.monotone(sigma)?;
        solved = problem.newton(rough)?.filter(|(phi, _)| in_band(phi));
    }
    let Some((mut phi, res)) = solved else {
        return Err(Error::numerical(
            "survival equation: no positive solution in [0, 1] found",
            f64::NAN,
        ));
    };
    if res > 1e-8 * b_max.max(1.0) {
        return Err(Error::numerical("survival equation: Newton stagnated", res));
    }
    phi.iter_mut().for_each(|p| *p = p.min(1.0));
    Ok(SurvivalProfile {
        grid,
        phi,
        residual_inf: res,
        viable: true,
        degenerate,
        eigenvalue,
    })
}

/// Survival probability of a branching diffusion with birth `b_eff`,
/// death `d_eff` and diffusivity `m`, sampled on `grid`.
pub fn solve_phi_star(grid: Grid, m: f64, b_eff: &[f64], d_eff: &[f64]) -> Result<SurvivalProfile> {
    let b_max = b_eff.iter().copied().fold(0.0, f64::max);
    let tol = TIE_TOL * b_max.max(1.0);
    solve_with_threshold(grid, m, b_eff, d_eff, |h| (h > tol, h.abs() <= tol))
}

/// Probability that a single `v` mutant founds a surviving lineage in the
/// equilibrium of resident `u`, as a function of its birth place.
pub fn solve_phi_vu(spec: &ModelSpec, v: f64, eig_u: &EigenSolution) -> Result<InvasionProfile> {
    let k_uu = spectral::kappa(spec, eig_u.trait_value, eig_u)?;
    let grid = eig_u.grid();
    let c_vu = spectral::competition_load(spec, v, eig_u);
    let b: Vec<f64> = grid.nodes().iter().map(|&x| spec.birth(x, v)).collect();
    let d: Vec<f64> = grid.nodes().iter().map(|&x| spec.death(x, v) + c_vu).collect();
    let m = spec.diffusion(v);
    // fitness = kappa^{uu} (H^v - C_vu) and H^v - C_vu is the eigenvalue
    // of the shifted operator.
    let r: Vec<f64> = b.iter().zip(&d).map(|(bi, di)| bi - di).collect();
    let shifted = spectral::principal_eigenvalue(grid, m, &r);
    let fitness = k_uu * shifted;
    let h_v = shifted + c_vu;
    let tie = spectral::tie_tolerance(spec, eig_u.h, h_v);
    let profile = solve_with_threshold(grid, m, &b, &d, |lambda| {
        let f = k_uu * lambda;
        (f > tie, f.abs() <= tie)
    })?;
    Ok(InvasionProfile {
        profile,
        c_vu,
        fitness,
    })
}

impl InvasionProfile {
    pub fn header(&self, resident: f64, mutant: f64) -> InvasionHeader {
        InvasionHeader {
            resident,
            mutant,
            c_vu: self.c_vu,
            fitness: self.fitness,
            viable: self.profile.viable,
            degenerate: self.profile.degenerate,
            residual_inf: self.profile.residual_inf,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;
    use crate::presets;
    use crate::spectral::principal_eigen;
    use proptest::prelude::*;

    fn unit(n: usize) -> Grid {
        Grid::uniform(Interval::UNIT, n).unwrap()
    }

    #[test]
    fn constant_supercritical_solution() {
        let g = unit(65);
        let p = solve_phi_star(g, 0.01, &vec![2.0; 65], &vec![1.0; 65]).unwrap();
        assert!(p.viable);
        for v in &p.phi {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn subcritical_solution_is_zero() {
        let g = unit(65);
        let p = solve_phi_star(g, 0.01, &vec![1.0; 65], &vec![2.0; 65]).unwrap();
        assert!(!p.viable);
        assert!(p.phi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negative_birth_is_rejected() {
        let g = unit(17);
        let mut b = vec![1.0; 17];
        b[3] = -0.1;
        assert!(matches!(solve_phi_star(g, 0.01, &b, &vec![0.5; 17]), Err(Error::Validation(_))));
    }

    #[test]
    fn linear_birth_profile_is_sandwiched() {
        let g = unit(257);
        let b: Vec<f64> = g.nodes().iter().map(|x| 2.0 + x).collect();
        let p = solve_phi_star(g, 0.01, &b, &vec![1.0; 257]).unwrap();
        assert!(p.viable && p.residual_inf <= 1e-8 * 3.0);
        // Between the survival of the worst and best constant worlds.
        for v in &p.phi {
            assert!(*v > 0.5 - 1e-9 && *v < 2.0 / 3.0 + 1e-9);
        }
        assert!(p.phi.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn constant_world_invasion_probability() {
        let spec = presets::two_trait_world();
        let eig = principal_eigen(&spec, 0.2, 65).unwrap();
        let inv = solve_phi_vu(&spec, 0.8, &eig).unwrap();
        assert!((inv.c_vu - 1.0).abs() < 1e-12);
        assert!((inv.fitness - 10.0).abs() < 1e-9);
        for v in &inv.profile.phi {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let back = principal_eigen(&spec, 0.8, 65).unwrap();
        let none = solve_phi_vu(&spec, 0.2, &back).unwrap();
        assert!(!none.profile.viable);
        assert!(none.profile.phi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn neutral_mutant_is_degenerate() {
        let spec = presets::niche_gradient();
        let eig = principal_eigen(&spec, 0.6, 256).unwrap();
        let inv = solve_phi_vu(&spec, 0.6, &eig).unwrap();
        assert!(!inv.profile.viable && inv.profile.degenerate);
    }

    #[test]
    fn niche_invasion_profile_is_a_probability() {
        let spec = presets::niche_gradient();
        let eig = principal_eigen(&spec, 0.6, 512).unwrap();
        let inv = solve_phi_vu(&spec, 0.515, &eig).unwrap();
        assert!(inv.fitness > 0.0);
        assert!(inv.profile.viable);
        assert!(inv.profile.phi.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!(inv.profile.residual_inf <= 1e-8 * 4.0);
    }

    #[test]
    fn viability_matches_fitness_sign() {
        let spec = presets::niche_gradient();
        let eig = principal_eigen(&spec, 0.6, 256).unwrap();
        for v in [0.3, 0.45, 0.515, 0.55, 0.65, 0.8] {
            let inv = solve_phi_vu(&spec, v, &eig).unwrap();
            let f = spectral::invasion_fitness(&spec, v, 0.6, 256).unwrap();
            assert!((inv.fitness - f).abs() <= 1e-9 * (1.0 + f.abs()), "v={v}: {} vs {f}", inv.fitness);
            assert_eq!(inv.profile.viable, f > spectral::tie_tolerance(&spec, eig.h, 4.0));
        }
    }

    #[test]
    fn monotone_fallback_agrees_with_newton() {
        let g = unit(129);
        let b: Vec<f64> = g.nodes().iter().map(|x| 2.0 + x).collect();
        let d = vec![1.0; 129];
        let newton = solve_phi_star(g, 0.01, &b, &d).unwrap();
        let r: Vec<f64> = b.iter().zip(&d).map(|(a, c)| a - c).collect();
        let problem = Problem { grid: g, m: 0.01, r, b: &b, tol: 1e-11 };
        let mono = problem.monotone(4.0).unwrap();
        for (a, c) in newton.phi.iter().zip(&mono) {
            assert!((a - c).abs() < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn more_death_means_less_survival(
            b in proptest::collection::vec(0.5f64..4.0, 33),
            d in proptest::collection::vec(0.0f64..1.5, 33),
            m in 1e-3f64..0.1,
        ) {
            let g = unit(33);
            let low = solve_phi_star(g, m, &b, &d).unwrap();
            let more: Vec<f64> = d.iter().map(|v| v + 0.1).collect();
            let high = solve_phi_star(g, m, &b, &more).unwrap();
            for (p, q) in low.phi.iter().zip(&high.phi) {
                prop_assert!(*q <= *p + 1e-9);
                prop_assert!((0.0..=1.0).contains(p));
            }
        }
    }
}
