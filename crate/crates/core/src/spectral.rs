//! Principal eigenpair of `m D + (b - d)` with Neumann ends, equilibrium
//! profiles, interaction coefficients and invasion fitness.
//!
//! With trapezoid weights `W` the discrete operator `A = m D + diag(r)` is
//! self-adjoint in the weighted inner product, so `S = W^{1/2} A W^{-1/2}`
//! is a symmetric tridiagonal matrix with positive off-diagonal entries.
//! Its largest eigenvalue is located by Sturm-sequence bisection and the
//! eigenvector by inverse iteration with a shift just above it; the shifted
//! matrix is then an M-matrix, so the iterates stay positive.

use serde::Serialize;

use crate::domain::GridMeasure;
use crate::error::{Error, Result};
use crate::grid::{solve_tridiagonal, Grid};
use crate::model::ModelSpec;

/// Smallest accepted grid.
pub const MIN_NODES: usize = 16;

/// Relative tie tolerance on invasion fitness, in units of `c_max max(H^u, H^v)`.
pub const TIE_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub trait_value: f64,
    pub h: f64,
    pub g: GridMeasure,
    pub viable: bool,
    /// `|int c(u,y,u) g(y) dy - H|`.
    pub normalization_residual: f64,
    /// `||m g'' + (b - d) g - H g||_inf / ||g||_inf` on the grid.
    pub operator_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenHeader {
    #[serde(rename = "trait")]
    pub trait_value: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub mass: f64,
    pub normalization_residual: f64,
    pub operator_residual: f64,
    pub viable: bool,
    pub nodes: usize,
}

impl EigenSolution {
    pub fn mass(&self) -> f64 {
        self.g.mass()
    }

    pub fn grid(&self) -> Grid {
        self.g.grid
    }

    pub fn header(&self) -> EigenHeader {
        EigenHeader {
            trait_value: self.trait_value,
            h: self.h,
            mass: self.mass(),
            normalization_residual: self.normalization_residual,
            operator_residual: self.operator_residual,
            viable: self.viable,
            nodes: self.g.grid.n,
        }
    }

    fn require_viable(&self) -> Result<()> {
        if self.viable {
            Ok(())
        } else {
            Err(Error::Degenerate(format!(
                "trait {} has no positive equilibrium (H = {})",
                self.trait_value, self.h
            )))
        }
    }
}

/// Principal eigenpair of the weighted-symmetric operator.
#[derive(Debug, Clone)]
pub struct PrincipalPair {
    pub lambda: f64,
    /// Positive eigenvector normalized to unit weighted `L^2` norm.
    pub vector: Vec<f64>,
    pub residual: f64,
}

struct SymTridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples `i` and `i + 1`.
    off: Vec<f64>,
}

fn symmetrize(grid: Grid, m: f64, r: &[f64]) -> SymTridiagonal {
    let n = grid.n;
    let k = m / (grid.h() * grid.h());
    let diag = r.iter().map(|ri| ri - 2.0 * k).collect();
    let mut off = vec![k; n - 1];
    off[0] = std::f64::consts::SQRT_2 * k;
    off[n - 2] = std::f64::consts::SQRT_2 * k;
    SymTridiagonal { diag, off }
}

impl SymTridiagonal {
    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - lambda;
        for i in 0..self.diag.len() {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - lambda - e * e / q;
            }
            if q == 0.0 {
                q = -f64::EPSILON * (1.0 + lambda.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    fn largest_eigenvalue(&self) -> f64 {
        let n = self.diag.len();
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) < n {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solve `(sigma I - S) y = rhs`.
    fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let diag: Vec<f64> = self.diag.iter().map(|a| sigma - a).collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n - 1 {
            upper[i] = -self.off[i];
            lower[i + 1] = -self.off[i];
        }
        solve_tridiagonal(&lower, &diag, &upper, rhs)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest eigenvalue and positive eigenvector of `m D + diag(r)` on `grid`.
pub fn principal_pair(grid: Grid, m: f64, r: &[f64]) -> Result<PrincipalPair> {
    let n = grid.n;
    let s = symmetrize(grid, m, r);
    let lambda0 = s.largest_eigenvalue();
    let scale = s.diag.iter().map(|a| a.abs()).fold(0.0, f64::max) + 2.0 * s.off.iter().copied().fold(0.0, f64::max);
    let sigma = lambda0 + 1e-9 * scale.max(1.0);

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sv = vec![0.0; n];
    let mut lambda = lambda0;
    let mut residual = f64::INFINITY;
    for _ in 0..50 {
        let mut y = s.solve_shifted(sigma, &v)?;
        let norm = norm2(&y);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::numerical("inverse iteration produced a non-finite vector", residual));
        }
        y.iter_mut().for_each(|t| *t /= norm);
        let change = y.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = y;
        s.apply(&v, &mut sv);
        lambda = v.iter().zip(&sv).map(|(a, b)| a * b).sum();
        residual = sv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max);
        if change <= 1e-14 && residual <= 1e-11 * scale.max(1.0) {
            break;
        }
    }
    if residual > 1e-8 * scale.max(1.0) {
        return Err(Error::numerical("principal eigenvector did not converge", residual));
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|t| *t = -*t);
    }
    // Back to nodal values, unit weighted L2 norm.
    let w = grid.weights();
    let vector: Vec<f64> = v.iter().zip(&w).map(|(a, wi)| (a / wi.sqrt()).max(0.0)).collect();
    Ok(PrincipalPair {
        lambda,
        vector,
        residual,
    })
}

/// Largest eigenvalue of `m D + diag(r)` on `grid`.
pub fn principal_eigenvalue(grid: Grid, m: f64, r: &[f64]) -> f64 {
    symmetrize(grid, m, r).largest_eigenvalue()
}

/// `-(m int |g'|^2 - int r g^2) / int g^2` with the discrete forms.
pub fn rayleigh_quotient(grid: Grid, m: f64, r: &[f64], g: &[f64]) -> f64 {
    let h = grid.h();
    let grad: f64 = g.windows(2).map(|p| (p[1] - p[0]).powi(2) / h).sum();
    let pot: f64 = (0..grid.n).map(|i| grid.weight(i) * r[i] * g[i] * g[i]).sum();
    let norm: f64 = (0..grid.n).map(|i| grid.weight(i) * g[i] * g[i]).sum();
    -(m * grad - pot) / norm
}

fn growth_rates(spec: &ModelSpec, grid: Grid, u: f64) -> Vec<f64> {
    (0..grid.n)
        .map(|i| {
            let x = grid.x(i);
            spec.birth(x, u) - spec.death(x, u)
        })
        .collect()
}

/// Principal eigenvalue `H^u` and equilibrium `g^u` normalized by
/// `int c(u,y,u) g = H` (or unit `L^2` when `H <= 0`).
pub fn principal_eigen(spec: &ModelSpec, u: f64, n_nodes: usize) -> Result<EigenSolution> {
    if n_nodes < MIN_NODES {
        return Err(Error::Config(format!("n_nodes must be at least {MIN_NODES}, got {n_nodes}")));
    }
    if !spec.trait_space.contains(u) {
        return Err(Error::Domain {
            what: "u",
            value: u,
            lo: spec.trait_space.min,
            hi: spec.trait_space.max,
        });
    }
    let grid = Grid::uniform(spec.domain, n_nodes)?;
    let m = spec.diffusion(u);
    let r = growth_rates(spec, grid, u);
    let pair = principal_pair(grid, m, &r)?;
    let h = pair.lambda;
    let mut g = pair.vector;

    let mut out = vec![0.0; grid.n];
    grid.apply_laplacian(m, &g, &mut out);
    let gmax = g.iter().copied().fold(0.0, f64::max);
    let operator_residual = (0..grid.n)
        .map(|i| (out[i] + (r[i] - h) * g[i]).abs())
        .fold(0.0, f64::max)
        / gmax;

    if h <= 0.0 {
        return Ok(EigenSolution {
            trait_value: u,
            h,
            g: GridMeasure { grid, density: g },
            viable: false,
            normalization_residual: f64::NAN,
            operator_residual,
        });
    }
    let cg: f64 = (0..grid.n)
        .map(|i| grid.weight(i) * spec.competition(u, grid.x(i), u) * g[i])
        .sum();
    if !(cg > 0.0) {
        return Err(Error::Degenerate(format!(
            "self-competition of trait {u} vanishes on the equilibrium support"
        )));
    }
    let factor = h / cg;
    g.iter_mut().for_each(|t| *t *= factor);
    let normalized: f64 = (0..grid.n)
        .map(|i| grid.weight(i) * spec.competition(u, grid.x(i), u) * g[i])
        .sum();
    Ok(EigenSolution {
        trait_value: u,
        h,
        g: GridMeasure { grid, density: g },
        viable: true,
        normalization_residual: (normalized - h).abs(),
        operator_residual,
    })
}

/// `int c(v,y,u) g^u(y) dy`: competition felt by a `v` individual.
pub fn competition_load(spec: &ModelSpec, v: f64, eig_u: &EigenSolution) -> f64 {
    let grid = eig_u.grid();
    (0..grid.n)
        .map(|i| grid.weight(i) * spec.competition(v, grid.x(i), eig_u.trait_value) * eig_u.g.density[i])
        .sum()
}

/// `kappa^{vu} = int c(v,y,u) g^u / int g^u`.
pub fn kappa(spec: &ModelSpec, v: f64, eig_u: &EigenSolution) -> Result<f64> {
    eig_u.require_viable()?;
    let mass = eig_u.mass();
    if !(mass > 0.0) {
        return Err(Error::Degenerate(format!(
            "equilibrium of trait {} has zero mass",
            eig_u.trait_value
        )));
    }
    Ok(competition_load(spec, v, eig_u) / mass)
}

/// `H^v kappa^{uu} - H^u kappa^{vu}` from precomputed eigen solutions.
pub fn fitness_from(spec: &ModelSpec, h_v: f64, v: f64, eig_u: &EigenSolution) -> Result<f64> {
    let k_uu = kappa(spec, eig_u.trait_value, eig_u)?;
    let k_vu = kappa(spec, v, eig_u)?;
    Ok(h_v * k_uu - eig_u.h * k_vu)
}

/// Invasion fitness of a `v` mutant in a `u` resident equilibrium.
pub fn invasion_fitness(spec: &ModelSpec, v: f64, u: f64, n_nodes: usize) -> Result<f64> {
    let eig_u = principal_eigen(spec, u, n_nodes)?;
    let eig_v = principal_eigen(spec, v, n_nodes)?;
    fitness_from(spec, eig_v.h, v, &eig_u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairCase {
    #[serde(rename = "Case1_no_invasion")]
    Case1NoInvasion,
    #[serde(rename = "Case2_fixation")]
    Case2Fixation,
    #[serde(rename = "Coexistence_violation")]
    CoexistenceViolation,
    #[serde(rename = "MutantNonviableAlone")]
    MutantNonviableAlone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairClassification {
    pub case: PairCase,
    pub fitness_vu: f64,
    /// Only computed when the mutant invades.
    pub fitness_uv: Option<f64>,
    /// Some fitness fell within the tie tolerance.
    pub degenerate: bool,
}

pub fn tie_tolerance(spec: &ModelSpec, h_u: f64, h_v: f64) -> f64 {
    TIE_TOL * spec.bounds.c_max * h_u.max(h_v).abs()
}

/// Classification from the two eigen solutions.
pub fn classify_from(spec: &ModelSpec, eig_u: &EigenSolution, eig_v: &EigenSolution) -> Result<PairClassification> {
    eig_u.require_viable()?;
    let tie = tie_tolerance(spec, eig_u.h, eig_v.h);
    let fitness_vu = fitness_from(spec, eig_v.h, eig_v.trait_value, eig_u)?;
    if !eig_v.viable {
        return Ok(PairClassification {
            case: PairCase::MutantNonviableAlone,
            fitness_vu,
            fitness_uv: None,
            degenerate: false,
        });
    }
    if fitness_vu <= tie {
        return Ok(PairClassification {
            case: PairCase::Case1NoInvasion,
            fitness_vu,
            fitness_uv: None,
            degenerate: fitness_vu.abs() <= tie,
        });
    }
    let fitness_uv = fitness_from(spec, eig_u.h, eig_u.trait_value, eig_v)?;
    let (case, degenerate) = if fitness_uv < -tie {
        (PairCase::Case2Fixation, false)
    } else {
        (PairCase::CoexistenceViolation, fitness_uv.abs() <= tie)
    };
    Ok(PairClassification {
        case,
        fitness_vu,
        fitness_uv: Some(fitness_uv),
        degenerate,
    })
}

pub fn classify_pair(spec: &ModelSpec, u: f64, v: f64, n_nodes: usize) -> Result<PairClassification> {
    let eig_u = principal_eigen(spec, u, n_nodes)?;
    let eig_v = principal_eigen(spec, v, n_nodes)?;
    classify_from(spec, &eig_u, &eig_v)
}
