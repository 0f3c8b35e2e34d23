//! The trait substitution sequence: a jump process over monomorphic
//! equilibria, simulated by thinning the mutation-attempt clock.
//!
//! Attempts arrive at rate `beta(u) = int p b g^u`. The founding location
//! is drawn with density proportional to `p b g^u`, the mutant trait from
//! the kernel, and the attempt succeeds with probability `phi^{vu}(x0)`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::domain::GridSampler;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::{self, EigenSolution, PairCase, PairClassification};
use crate::survival::{self, InvasionProfile};

/// Default granularity of the trait cache.
pub const DEFAULT_TRAIT_ROUND: f64 = 1e-4;

/// Everything that depends on the resident trait alone.
#[derive(Debug)]
pub struct TraitData {
    pub eig: EigenSolution,
    /// Attempted mutation rate `int p b g`.
    pub beta: f64,
    sampler: Option<GridSampler>,
}

#[derive(Debug)]
pub struct PairData {
    pub classification: PairClassification,
    pub profile: Option<InvasionProfile>,
}

#[derive(Debug, Clone)]
pub struct TssState {
    pub trait_value: f64,
    pub data: Arc<TraitData>,
    /// Time on the mutation scale (microscopic time times `K q`).
    pub time: f64,
}

impl TssState {
    pub fn eig(&self) -> &EigenSolution {
        &self.data.eig
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Acceptance {
    pub probability: f64,
    pub case: PairCase,
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TssJump {
    pub t_jump: f64,
    pub u_from: f64,
    pub u_to: f64,
    pub x0: f64,
    pub phi: f64,
    pub fitness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TssTrajectory {
    pub u0: f64,
    pub jumps: Vec<TssJump>,
    pub attempts: u64,
    pub t_end: f64,
    pub final_trait: f64,
}

impl TssTrajectory {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for j in &self.jumps {
            w.serialize(j)?;
        }
        if self.jumps.is_empty() {
            w.write_record(["t_jump", "u_from", "u_to", "x0", "phi", "fitness"])?;
        }
        w.flush()?;
        Ok(())
    }
}

type Cache<K, V> = RwLock<HashMap<K, Arc<V>>>;

/// Solver with shared caches; usable from several threads at once.
pub struct Tss<'a> {
    spec: &'a ModelSpec,
    n_nodes: usize,
    round: f64,
    traits: Cache<u64, TraitData>,
    pairs: Cache<(u64, u64), PairData>,
}

impl<'a> Tss<'a> {
    /// `round = 0` disables trait snapping.
    pub fn new(spec: &'a ModelSpec, n_nodes: usize, round: f64) -> Result<Self> {
        if !(round >= 0.0) || !round.is_finite() {
            return Err(Error::Config(format!("trait rounding must be nonnegative, got {round}")));
        }
        Ok(Tss {
            spec,
            n_nodes,
            round,
            traits: RwLock::new(HashMap::new()),
            pairs: RwLock::new(HashMap::new()),
        })
    }

    /// Trait snapped to the cache lattice and clamped to the trait space.
    pub fn snap(&self, u: f64) -> f64 {
        let ts = self.spec.trait_space;
        if self.round == 0.0 {
            return u;
        }
        let inv = 1.0 / self.round;
        ((u * inv).round() / inv).clamp(ts.min, ts.max)
    }

    pub fn cached_traits(&self) -> usize {
        self.traits.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn trait_data(&self, u: f64) -> Result<Arc<TraitData>> {
        let key = u.to_bits();
        if let Some(d) = self.traits.read().ok().and_then(|m| m.get(&key).cloned()) {
            return Ok(d);
        }
        let eig = spectral::principal_eigen(self.spec, u, self.n_nodes)?;
        let grid = eig.grid();
        let flux: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(&eig.g.density)
            .map(|(&x, g)| self.spec.mutation_prob(x, u) * self.spec.birth(x, u) * g)
            .collect();
        let beta = if eig.viable { grid.integrate(&flux) } else { 0.0 };
        let sampler = if beta > 0.0 {
            Some(GridSampler::new(grid, &flux)?)
        } else {
            None
        };
        let data = Arc::new(TraitData { eig, beta, sampler });
        if let Ok(mut m) = self.traits.write() {
            m.entry(key).or_insert_with(|| data.clone());
        }
        Ok(data)
    }

    pub fn state(&self, u0: f64) -> Result<TssState> {
        let u = self.snap(u0);
        let data = self.trait_data(u)?;
        if !data.eig.viable {
            return Err(Error::ModelAssumption(format!(
                "initial trait {u} is not viable (H = {})",
                data.eig.h
            )));
        }
        Ok(TssState {
            trait_value: u,
            data,
            time: 0.0,
        })
    }

    pub fn attempted_mutation_rate(&self, state: &TssState) -> f64 {
        state.data.beta
    }

    /// Founding location and (snapped) mutant trait of one attempt.
    pub fn sample_attempt<R: Rng + ?Sized>(&self, state: &TssState, rng: &mut R) -> Result<(f64, f64)> {
        let Some(sampler) = &state.data.sampler else {
            return Err(Error::Degenerate(format!(
                "trait {} never mutates (zero attempt rate)",
                state.trait_value
            )));
        };
        let x0 = sampler.sample(rng);
        let v = self
            .spec
            .mutation_kernel
            .sample(x0, state.trait_value, self.spec.trait_space, rng);
        Ok((x0, self.snap(v)))
    }

    pub fn pair_data(&self, u: &TraitData, v: f64) -> Result<Arc<PairData>> {
        let key = (u.eig.trait_value.to_bits(), v.to_bits());
        if let Some(d) = self.pairs.read().ok().and_then(|m| m.get(&key).cloned()) {
            return Ok(d);
        }
        let eig_v = &self.trait_data(v)?.eig;
        let classification = spectral::classify_from(self.spec, &u.eig, eig_v)?;
        let profile = match classification.case {
            PairCase::Case2Fixation => Some(survival::solve_phi_vu(self.spec, v, &u.eig)?),
            _ => None,
        };
        let data = Arc::new(PairData {
            classification,
            profile,
        });
        if let Ok(mut m) = self.pairs.write() {
            m.entry(key).or_insert_with(|| data.clone());
        }
        Ok(data)
    }

    /// Success probability of a `v` mutant founded at `x0`.
    pub fn accept_attempt(&self, state: &TssState, x0: f64, v: f64) -> Result<Acceptance> {
        let u = state.trait_value;
        let pair = self.pair_data(&state.data, v)?;
        let c = pair.classification;
        let probability = match c.case {
            PairCase::Case1NoInvasion | PairCase::MutantNonviableAlone => 0.0,
            PairCase::Case2Fixation => pair.profile.as_ref().map_or(0.0, |p| p.profile.at(x0).clamp(0.0, 1.0)),
            PairCase::CoexistenceViolation => {
                return Err(Error::ModelAssumption(format!(
                    "traits u = {u} and v = {v} can coexist: fitness(v|u) = {}, fitness(u|v) = {}",
                    c.fitness_vu,
                    c.fitness_uv.unwrap_or(f64::NAN)
                )));
            }
        };
        Ok(Acceptance {
            probability,
            case: c.case,
            fitness: c.fitness_vu,
        })
    }

    /// Run the substitution sequence from `u0` up to time `t_end`.
    pub fn simulate<R: Rng + ?Sized>(&self, u0: f64, t_end: f64, rng: &mut R) -> Result<TssTrajectory> {
        let mut state = self.state(u0)?;
        let mut jumps = Vec::new();
        let mut attempts = 0u64;
        loop {
            let beta = self.attempted_mutation_rate(&state);
            if !(beta > 0.0) {
                break;
            }
            let e: f64 = rng.sample(Exp1);
            let t = state.time + e / beta;
            if t > t_end {
                break;
            }
            state.time = t;
            attempts += 1;
            let (x0, v) = self.sample_attempt(&state, rng)?;
            if v == state.trait_value {
                continue;
            }
            let acc = self.accept_attempt(&state, x0, v)?;
            if acc.probability > 0.0 && rng.random::<f64>() < acc.probability {
                jumps.push(TssJump {
                    t_jump: t,
                    u_from: state.trait_value,
                    u_to: v,
                    x0,
                    phi: acc.probability,
                    fitness: acc.fitness,
                });
                state = TssState {
                    trait_value: v,
                    data: self.trait_data(v)?,
                    time: t,
                };
            }
        }
        Ok(TssTrajectory {
            u0: self.snap(u0),
            jumps,
            attempts,
            t_end,
            final_trait: state.trait_value,
        })
    }
}

/// One trajectory with a fresh solver.
pub fn simulate_tss<R: Rng + ?Sized>(spec: &ModelSpec, u0: f64, t_end: f64, n_nodes: usize, rng: &mut R) -> Result<TssTrajectory> {
    Tss::new(spec, n_nodes, DEFAULT_TRAIT_ROUND)?.simulate(u0, t_end, rng)
}
