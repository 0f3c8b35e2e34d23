//! Large-population limit for finitely many traits:
//!
//! `d/dt xi_u = m_u xi_u'' + (b_u - d_u - C_u) xi_u`,
//! `C_u = sum_v int c(u, y, v) xi_v(y) dy`, with Neumann ends.
//!
//! Diffusion is treated with a theta scheme (Crank-Nicolson by default) and
//! the reaction explicitly with a Heun predictor-corrector, which keeps the
//! scheme second order and leaves discrete equilibria exactly stationary.

use serde::Serialize;

use crate::domain::GridMeasure;
use crate::error::{Error, Result};
use crate::flat;
use crate::grid::{solve_tridiagonal, Grid};
use crate::model::ModelSpec;

/// Traits whose mass falls below this are removed.
pub const EXTINCTION_MASS: f64 = 1e-10;

/// Safety factor of the explicit-reaction step bound.
pub const DT_FACTOR: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub grid: Grid,
    pub traits: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub time: f64,
}

impl PdeState {
    pub fn new(grid: Grid, traits: Vec<f64>, densities: Vec<Vec<f64>>) -> Result<Self> {
        if traits.len() != densities.len() {
            return Err(Error::Config("one density per trait is required".into()));
        }
        for d in &densities {
            GridMeasure::new(grid, d.clone())?;
        }
        Ok(PdeState {
            grid,
            traits,
            densities,
            time: 0.0,
        })
    }

    pub fn single(measure: &GridMeasure, u: f64) -> Self {
        PdeState {
            grid: measure.grid,
            traits: vec![u],
            densities: vec![measure.density.clone()],
            time: 0.0,
        }
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.grid.integrate(&self.densities[k])
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.traits.len()).map(|k| self.mass(k)).sum()
    }

    pub fn measure(&self, k: usize) -> GridMeasure {
        GridMeasure {
            grid: self.grid,
            density: self.densities[k].clone(),
        }
    }

    pub fn trait_index(&self, u: f64) -> Option<usize> {
        self.traits.iter().position(|t| *t == u)
    }

    fn sup_norm(&self) -> f64 {
        self.densities.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Coefficients sampled on the grid for a fixed trait set.
struct Coefficients {
    growth: Vec<Vec<f64>>,
    diffusion: Vec<f64>,
    /// `kernel[k][l][i] = w_i c(u_k, y_i, u_l)`.
    kernel: Vec<Vec<Vec<f64>>>,
}

impl Coefficients {
    fn new(spec: &ModelSpec, grid: Grid, traits: &[f64]) -> Self {
        let nodes = grid.nodes();
        let growth = traits
            .iter()
            .map(|&u| nodes.iter().map(|&x| spec.birth(x, u) - spec.death(x, u)).collect())
            .collect();
        let diffusion = traits.iter().map(|&u| spec.diffusion(u)).collect();
        let kernel = traits
            .iter()
            .map(|&u| {
                traits
                    .iter()
                    .map(|&v| {
                        (0..grid.n)
                            .map(|i| grid.weight(i) * spec.competition(u, nodes[i], v))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Coefficients {
            growth,
            diffusion,
            kernel,
        }
    }

    fn load(&self, k: usize, densities: &[Vec<f64>]) -> f64 {
        self.kernel[k]
            .iter()
            .zip(densities)
            .map(|(w, xi)| w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    fn reaction(&self, densities: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..densities.len())
            .map(|k| {
                let c = self.load(k, densities);
                self.growth[k]
                    .iter()
                    .zip(&densities[k])
                    .map(|(r, xi)| (r - c) * xi)
                    .collect()
            })
            .collect()
    }
}

/// Largest admissible step for the current state.
pub fn dt_max(state: &PdeState, spec: &ModelSpec) -> f64 {
    let b = spec.bounds;
    DT_FACTOR / (b.b_max + b.d_max + b.c_max * state.total_mass()).max(f64::MIN_POSITIVE)
}

fn theta_step(state: &PdeState, coef: &Coefficients, dt: f64, theta: f64) -> Result<PdeState> {
    let grid = state.grid;
    let n = grid.n;
    let explicit = |k: usize, xi: &[f64]| -> Vec<f64> {
        let mut lap = vec![0.0; n];
        grid.apply_laplacian(coef.diffusion[k], xi, &mut lap);
        xi.iter().zip(&lap).map(|(a, l)| a + (1.0 - theta) * dt * l).collect()
    };
    let solve = |k: usize, rhs: &[f64]| -> Result<Vec<f64>> {
        let (lower, diag, upper) = grid.laplacian_bands(coef.diffusion[k]);
        let lower: Vec<f64> = lower.iter().map(|v| -theta * dt * v).collect();
        let upper: Vec<f64> = upper.iter().map(|v| -theta * dt * v).collect();
        let diag: Vec<f64> = diag.iter().map(|v| 1.0 - theta * dt * v).collect();
        solve_tridiagonal(&lower, &diag, &upper, rhs)
    };

    let base: Vec<Vec<f64>> = (0..state.traits.len())
        .map(|k| explicit(k, &state.densities[k]))
        .collect();
    let r0 = coef.reaction(&state.densities);
    let predictor = base
        .iter()
        .zip(&r0)
        .enumerate()
        .map(|(k, (b, r))| {
            let rhs: Vec<f64> = b.iter().zip(r).map(|(a, c)| a + dt * c).collect();
            solve(k, &rhs)
        })
        .collect::<Result<Vec<_>>>()?;
    let r1 = coef.reaction(&predictor);
    let densities = base
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let rhs: Vec<f64> = (0..n).map(|i| b[i] + 0.5 * dt * (r0[k][i] + r1[k][i])).collect();
            solve(k, &rhs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut next = PdeState {
        grid,
        traits: state.traits.clone(),
        densities,
        time: state.time + dt,
    };
    let floor = -1e-12 * next.sup_norm().max(1.0);
    for d in next.densities.iter_mut().flatten() {
        if d.is_nan() {
            return Err(Error::numerical("limit equation diverged (NaN density)", f64::NAN));
        }
        if *d < floor {
            return Err(Error::numerical(
                "negative density: step size too large for this initial datum",
                *d,
            ));
        }
        *d = d.max(0.0);
    }
    Ok(next)
}

/// One Crank-Nicolson / Heun step of size `dt <= dt_max`.
pub fn step(state: &PdeState, dt: f64, spec: &ModelSpec) -> Result<PdeState> {
    step_theta(state, dt, spec, 0.5)
}

/// One theta-scheme step (`theta = 1` is backward Euler for diffusion).
pub fn step_theta(state: &PdeState, dt: f64, spec: &ModelSpec, theta: f64) -> Result<PdeState> {
    let limit = dt_max(state, spec);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Config(format!("time step {dt} outside (0, dt_max = {limit}]")));
    }
    if !(0.5..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta = {theta} outside [0.5, 1]")));
    }
    let coef = Coefficients::new(spec, state.grid, &state.traits);
    theta_step(state, &coef, dt, theta)
}

/// Sup-norm of the right-hand side, per trait.
pub fn steady_residual(state: &PdeState, spec: &ModelSpec) -> Vec<f64> {
    let coef = Coefficients::new(spec, state.grid, &state.traits);
    let reaction = coef.reaction(&state.densities);
    let mut lap = vec![0.0; state.grid.n];
    (0..state.traits.len())
        .map(|k| {
            state.grid.apply_laplacian(coef.diffusion[k], &state.densities[k], &mut lap);
            lap.iter()
                .zip(&reaction[k])
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub theta: f64,
    /// Leading steps replaced by two backward-Euler half steps each.
    pub startup_steps: usize,
    pub observe_every: Option<f64>,
    pub snapshot_every: Option<f64>,
    /// Reference measures per trait for flat-distance observations.
    pub references: Vec<(f64, GridMeasure)>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            theta: 0.5,
            startup_steps: 2,
            observe_every: None,
            snapshot_every: None,
            references: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeObservation {
    pub t: f64,
    #[serde(rename = "trait")]
    pub trait_value: f64,
    pub mass: f64,
    pub flat_to_reference: Option<f64>,
    pub steady_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PdeLog {
    pub observations: Vec<PdeObservation>,
    pub snapshots: Vec<PdeState>,
    /// `(time, trait)` of traits removed below [`EXTINCTION_MASS`].
    pub removed: Vec<(f64, f64)>,
    pub steps: usize,
}

fn observe(state: &PdeState, spec: &ModelSpec, opts: &IntegrateOptions, log: &mut PdeLog) -> Result<()> {
    let residuals = steady_residual(state, spec);
    for (k, &u) in state.traits.iter().enumerate() {
        let flat_to_reference = match opts.references.iter().find(|(t, _)| *t == u) {
            Some((_, reference)) => Some(
                flat::flat_distance(
                    &state.measure(k).to_atoms(),
                    &reference.to_atoms(),
                    2 * state.grid.n.max(reference.grid.n),
                )?,
            ),
            None => None,
        };
        log.observations.push(PdeObservation {
            t: state.time,
            trait_value: u,
            mass: state.mass(k),
            flat_to_reference,
            steady_residual: residuals[k],
        });
    }
    Ok(())
}

fn on_cadence(t_prev: f64, t: f64, every: Option<f64>) -> bool {
    match every {
        Some(e) if e > 0.0 => (t / e + 1e-9).floor() > (t_prev / e + 1e-9).floor(),
        _ => false,
    }
}

/// Integrate to `t_end` with macro step `dt`, splitting steps that exceed
/// the stability bound.
pub fn integrate(
    state: &PdeState,
    spec: &ModelSpec,
    t_end: f64,
    dt: f64,
    opts: &IntegrateOptions,
) -> Result<(PdeState, PdeLog)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if t_end < state.time {
        return Err(Error::Config(format!(
            "t_end = {t_end} precedes the current time {}",
            state.time
        )));
    }
    let mut log = PdeLog::default();
    let mut cur = state.clone();
    let mut coef = Coefficients::new(spec, cur.grid, &cur.traits);
    if opts.observe_every.is_some() {
        observe(&cur, spec, opts, &mut log)?;
    }
    if opts.snapshot_every.is_some() {
        log.snapshots.push(cur.clone());
    }
    let b_max = spec.bounds.b_max;
    let mut macro_steps = 0usize;
    while cur.time < t_end {
        let remaining = t_end - cur.time;
        let mut h = dt.min(remaining);
        if remaining - h <= 1e-12 * t_end.abs().max(1.0) {
            h = remaining;
        }
        let limit = dt_max(&cur, spec);
        let pieces = (h / limit).ceil().max(1.0) as usize;
        let sub = h / pieces as f64;
        let t_prev = cur.time;
        for _ in 0..pieces {
            let mass_before = cur.total_mass();
            cur = if macro_steps < opts.startup_steps && opts.theta < 1.0 {
                let half = theta_step(&cur, &coef, 0.5 * sub, 1.0)?;
                theta_step(&half, &coef, 0.5 * sub, 1.0)?
            } else {
                theta_step(&cur, &coef, sub, opts.theta)?
            };
            log.steps += 1;
            let bound = mass_before * (b_max * sub).exp() * (1.0 + 1e-9) + 1e-300;
            if cur.total_mass() > bound {
                return Err(Error::numerical(
                    "mass grew faster than the birth-rate bound allows",
                    cur.total_mass() - bound,
                ));
            }
        }
        if pieces == 1 || h == remaining {
            cur.time = t_prev + h;
        }
        macro_steps += 1;

        let before = cur.traits.len();
        let mut k = 0;
        while k < cur.traits.len() {
            if cur.mass(k) < EXTINCTION_MASS {
                log.removed.push((cur.time, cur.traits[k]));
                cur.traits.remove(k);
                cur.densities.remove(k);
            } else {
                k += 1;
            }
        }
        if cur.traits.len() != before {
            coef = Coefficients::new(spec, cur.grid, &cur.traits);
        }

        let last = cur.time >= t_end;
        if on_cadence(t_prev, cur.time, opts.observe_every) || (last && opts.observe_every.is_some()) {
            observe(&cur, spec, opts, &mut log)?;
        }
        if on_cadence(t_prev, cur.time, opts.snapshot_every) {
            log.snapshots.push(cur.clone());
        }
    }
    Ok((cur, log))
}
