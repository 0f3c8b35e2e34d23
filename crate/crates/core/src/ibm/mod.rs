//! Exact-event simulation of the individual-based model.
//!
//! Events are generated by thinning a Poisson clock of rate
//! `N (b_max + d_max + c_max N / K)`. Positions are advanced lazily: each
//! individual remembers when it was last moved, and is moved to the current
//! time only when it is selected or observed. A single reflected Gaussian
//! fold is exact in law for one-dimensional reflected Brownian motion, so
//! no intermediate steps are needed unless a cap is configured.

pub mod branching;
pub mod experiments;

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::domain::{EmpiricalMeasure, GridSampler};
use crate::error::{Error, Result};
use crate::model::{FunctionHandle, Interval, ModelSpec};
use crate::spectral::EigenSolution;

pub use branching::{run_branching, BranchingOutcome, BranchingRates, Verdict};

/// Default population cap.
pub const HARD_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub x: f64,
    pub u: f64,
    /// Time at which `x` was last brought up to date.
    pub t_last: f64,
    /// Lineage label inherited by offspring.
    pub tag: u32,
}

/// Move a reflected Brownian particle for time `dt`, in steps of at most
/// `cap` when given.
#[inline]
pub fn move_particle<R: Rng + ?Sized>(x: f64, m: f64, dt: f64, cap: Option<f64>, domain: Interval, rng: &mut R) -> f64 {
    if dt <= 0.0 || m == 0.0 {
        return x;
    }
    match cap {
        Some(c) if dt > c => {
            let steps = (dt / c).ceil() as usize;
            let h = dt / steps as f64;
            (0..steps).fold(x, |y, _| crate::domain::brownian_step(y, m, h, domain, rng))
        }
        _ => crate::domain::brownian_step(x, m, dt, domain, rng),
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub k: f64,
    pub time: f64,
}

impl Population {
    pub fn new(k: f64) -> Self {
        Population {
            individuals: Vec::new(),
            k,
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.len() as f64 / self.k
    }

    pub fn push(&mut self, x: f64, u: f64, tag: u32) {
        self.individuals.push(Individual {
            x,
            u,
            t_last: self.time,
            tag,
        });
    }

    /// `round(K * mass)` individuals of trait `u` drawn from the equilibrium.
    pub fn add_equilibrium<R: Rng + ?Sized>(&mut self, eig: &EigenSolution, tag: u32, rng: &mut R) -> Result<()> {
        let sampler = GridSampler::new(eig.grid(), &eig.g.density)?;
        let count = (self.k * eig.mass()).round() as usize;
        for _ in 0..count {
            let x = sampler.sample(rng);
            self.push(x, eig.trait_value, tag);
        }
        Ok(())
    }

    /// Bring every position up to `self.time`.
    pub fn sync<R: Rng + ?Sized>(&mut self, spec: &ModelSpec, cap: Option<f64>, rng: &mut R) {
        let t = self.time;
        for ind in &mut self.individuals {
            ind.x = move_particle(ind.x, spec.diffusion(ind.u), t - ind.t_last, cap, spec.domain, rng);
            ind.t_last = t;
        }
    }

    /// Current empirical measure; positions must be synchronized.
    pub fn empirical(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.individuals.iter().map(|i| (i.x, i.u)).collect(), self.k)
    }

    pub fn count_tag(&self, tag: u32) -> usize {
        self.individuals.iter().filter(|i| i.tag == tag).count()
    }

    pub fn count_trait(&self, u: f64) -> usize {
        self.individuals.iter().filter(|i| i.u == u).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Extinction,
    /// First birth of a mutant.
    FirstMutation,
    /// Total mass at least the given value.
    MassAtLeast(f64),
    /// Only one lineage tag left (or none).
    Monomorphic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TEnd,
    Extinction,
    FirstMutation,
    MassReached,
    Monomorphic,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    MutantBirth,
    Death,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub index: usize,
    pub x: f64,
    /// Trait of the parent (births) or of the deceased.
    pub u: f64,
    pub child_u: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EventLog {
    pub events: Vec<EventRecord>,
    pub stop: StopReason,
    pub first_mutation: Option<f64>,
    pub accepted: u64,
    pub phantom: u64,
}

/// Callback run on a synchronized population.
pub trait Observer {
    /// Return `true` to stop the simulation.
    fn observe(&mut self, pop: &Population) -> bool;
}

impl<F: FnMut(&Population) -> bool> Observer for F {
    fn observe(&mut self, pop: &Population) -> bool {
        self(pop)
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub t_end: f64,
    /// Largest single motion increment; `None` moves in one exact step.
    pub dt_motion: Option<f64>,
    pub hard_cap: usize,
    pub record_events: bool,
    pub stop_rules: Vec<StopRule>,
    /// Observer cadence (the observer also runs at the start and the end).
    pub observe_every: Option<f64>,
    /// Also run the observer after every accepted event.
    pub observe_events: bool,
}

impl SimOptions {
    pub fn until(t_end: f64) -> Self {
        SimOptions {
            t_end,
            dt_motion: None,
            hard_cap: HARD_CAP,
            record_events: false,
            stop_rules: Vec::new(),
            observe_every: None,
            observe_events: false,
        }
    }

    pub fn stop_on(mut self, rule: StopRule) -> Self {
        self.stop_rules.push(rule);
        self
    }

    pub fn observe_every(mut self, every: f64) -> Self {
        self.observe_every = Some(every);
        self
    }
}

enum Pressure {
    Constant(f64),
    /// `c` depends on the traits only: keep counts per trait.
    TraitOnly(Vec<(f64, usize)>),
    General,
}

const TRAIT_TABLE_LIMIT: usize = 256;

impl Pressure {
    fn new(spec: &ModelSpec, pop: &Population) -> Self {
        match &spec.competition {
            FunctionHandle::Constant { value } => Pressure::Constant(*value),
            c if !c.depends_on_space() => {
                let mut table: Vec<(f64, usize)> = Vec::new();
                for ind in &pop.individuals {
                    match table.iter_mut().find(|e| e.0 == ind.u) {
                        Some(e) => e.1 += 1,
                        None => table.push((ind.u, 1)),
                    }
                }
                if table.len() > TRAIT_TABLE_LIMIT {
                    Pressure::General
                } else {
                    Pressure::TraitOnly(table)
                }
            }
            _ => Pressure::General,
        }
    }

    fn add(&mut self, u: f64) {
        if let Pressure::TraitOnly(table) = self {
            match table.iter_mut().find(|e| e.0 == u) {
                Some(e) => e.1 += 1,
                None => table.push((u, 1)),
            }
            if table.len() > TRAIT_TABLE_LIMIT {
                *self = Pressure::General;
            }
        }
    }

    fn remove(&mut self, u: f64) {
        if let Pressure::TraitOnly(table) = self {
            if let Some(pos) = table.iter().position(|e| e.0 == u) {
                table[pos].1 -= 1;
                if table[pos].1 == 0 {
                    table.swap_remove(pos);
                }
            }
        }
    }
}

/// Simulate until `opts.t_end` or a stop rule fires; `pop` holds the final
/// state (positions synchronized).
pub fn simulate<R: Rng + ?Sized>(
    pop: &mut Population,
    spec: &ModelSpec,
    opts: &SimOptions,
    rng: &mut R,
    mut observer: Option<&mut dyn Observer>,
) -> Result<EventLog> {
    if let Some(c) = opts.dt_motion {
        if !(c > 0.0) {
            return Err(Error::Config(format!("dt_motion must be positive, got {c}")));
        }
    }
    if let Some(e) = opts.observe_every {
        if !(e > 0.0) {
            return Err(Error::Config(format!("observation cadence must be positive, got {e}")));
        }
    }
    let k = pop.k;
    let bounds = spec.bounds;
    let q = spec.scaling.q_k;
    let cap = opts.dt_motion;
    let domain = spec.domain;
    let mut pressure = Pressure::new(spec, pop);
    let mut tag_counts: Vec<usize> = Vec::new();
    for ind in &pop.individuals {
        bump(&mut tag_counts, ind.tag);
    }
    let mut log = EventLog {
        events: Vec::new(),
        stop: StopReason::TEnd,
        first_mutation: None,
        accepted: 0,
        phantom: 0,
    };
    let has = |rule: StopRule| opts.stop_rules.contains(&rule);
    let mass_target = opts.stop_rules.iter().find_map(|r| match r {
        StopRule::MassAtLeast(m) => Some(*m),
        _ => None,
    });
    let mut next_obs = opts.observe_every.map(|e| pop.time + e);

    if let Some(obs) = observer.as_deref_mut() {
        pop.sync(spec, cap, rng);
        if obs.observe(pop) {
            log.stop = StopReason::Observer;
            return Ok(log);
        }
    }

    loop {
        let n = pop.len();
        if n == 0 && has(StopRule::Extinction) {
            log.stop = StopReason::Extinction;
            break;
        }
        let per_capita = bounds.b_max + bounds.d_max + bounds.c_max * n as f64 / k;
        let lambda = n as f64 * per_capita;
        let t_new = if n == 0 || !(lambda > 0.0) {
            f64::INFINITY
        } else {
            let e: f64 = rng.sample(Exp1);
            let t = pop.time + e / lambda;
            if t > pop.time { t } else { pop.time.next_up() }
        };

        while let (Some(t_obs), Some(every)) = (next_obs, opts.observe_every) {
            if t_obs > t_new.min(opts.t_end) {
                break;
            }
            pop.time = t_obs;
            next_obs = Some(t_obs + every);
            if let Some(obs) = observer.as_deref_mut() {
                pop.sync(spec, cap, rng);
                if obs.observe(pop) {
                    log.stop = StopReason::Observer;
                    return Ok(log);
                }
            }
        }
        if t_new > opts.t_end {
            pop.time = opts.t_end;
            break;
        }
        pop.time = t_new;

        let i = rng.random_range(0..n);
        let mut ind = pop.individuals[i];
        ind.x = move_particle(ind.x, spec.diffusion(ind.u), t_new - ind.t_last, cap, domain, rng);
        ind.t_last = t_new;
        pop.individuals[i] = ind;

        let b = spec.birth(ind.x, ind.u);
        let draw = rng.random::<f64>() * per_capita;
        if draw < b {
            let mutate = q > 0.0 && rng.random::<f64>() < q * spec.mutation_prob(ind.x, ind.u);
            let child_u = if mutate {
                spec.mutation_kernel.sample(ind.x, ind.u, spec.trait_space, rng)
            } else {
                ind.u
            };
            pop.individuals.push(Individual {
                x: ind.x,
                u: child_u,
                t_last: t_new,
                tag: ind.tag,
            });
            pressure.add(child_u);
            bump(&mut tag_counts, ind.tag);
            log.accepted += 1;
            if opts.record_events {
                log.events.push(EventRecord {
                    t: t_new,
                    kind: if mutate { EventKind::MutantBirth } else { EventKind::Birth },
                    index: i,
                    x: ind.x,
                    u: ind.u,
                    child_u: Some(child_u),
                });
            }
            if pop.len() > opts.hard_cap {
                return Err(Error::Capacity(format!(
                    "population exceeded the cap of {} individuals at t = {t_new}",
                    opts.hard_cap
                )));
            }
            if mutate && log.first_mutation.is_none() {
                log.first_mutation = Some(t_new);
                if has(StopRule::FirstMutation) {
                    log.stop = StopReason::FirstMutation;
                    break;
                }
            }
            if mass_target.is_some_and(|m| pop.mass() >= m) {
                log.stop = StopReason::MassReached;
                break;
            }
        } else {
            let comp = match &pressure {
                Pressure::Constant(c) => c * n as f64 / k,
                Pressure::TraitOnly(table) => {
                    table
                        .iter()
                        .map(|(v, count)| spec.competition(ind.u, ind.x, *v) * *count as f64)
                        .sum::<f64>()
                        / k
                }
                Pressure::General => {
                    pop.sync(spec, cap, rng);
                    let me = pop.individuals[i];
                    pop.individuals
                        .iter()
                        .map(|j| spec.competition(me.u, j.x, j.u))
                        .sum::<f64>()
                        / k
                }
            };
            let x = pop.individuals[i].x;
            if draw < b + spec.death(x, ind.u) + comp {
                pop.individuals.swap_remove(i);
                pressure.remove(ind.u);
                tag_counts[ind.tag as usize] -= 1;
                log.accepted += 1;
                if opts.record_events {
                    log.events.push(EventRecord {
                        t: t_new,
                        kind: EventKind::Death,
                        index: i,
                        x,
                        u: ind.u,
                        child_u: None,
                    });
                }
                if has(StopRule::Monomorphic) && tag_counts.iter().filter(|c| **c > 0).count() <= 1 {
                    log.stop = StopReason::Monomorphic;
                    break;
                }
            } else {
                log.phantom += 1;
                continue;
            }
        }
        if opts.observe_events {
            if let Some(obs) = observer.as_deref_mut() {
                pop.sync(spec, cap, rng);
                if obs.observe(pop) {
                    log.stop = StopReason::Observer;
                    return Ok(log);
                }
            }
        }
    }
    pop.sync(spec, cap, rng);
    if log.stop == StopReason::TEnd {
        if let Some(obs) = observer.as_deref_mut() {
            if obs.observe(pop) {
                log.stop = StopReason::Observer;
            }
        }
    }
    Ok(log)
}

fn bump(counts: &mut Vec<usize>, tag: u32) {
    let t = tag as usize;
    if counts.len() <= t {
        counts.resize(t + 1, 0);
    }
    counts[t] += 1;
}

/// Mass per distinct trait, sorted by trait.
pub fn trait_masses(pop: &Population) -> Vec<(f64, f64)> {
    let mut traits: Vec<f64> = pop.individuals.iter().map(|i| i.u).collect();
    traits.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for u in traits {
        match out.last_mut() {
            Some(last) if last.0 == u => last.1 += 1.0 / pop.k,
            _ => out.push((u, 1.0 / pop.k)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FunctionHandle, ModelConfig};
    use crate::presets;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_world(b: f64, d: f64, c: f64) -> ModelSpec {
        let mut config: ModelConfig = presets::constant_world().to_config();
        config.birth = FunctionHandle::constant(b);
        config.death = FunctionHandle::constant(d);
        config.competition = FunctionHandle::constant(c);
        ModelSpec::from_config(config).unwrap()
    }

    fn uniform_population(n: usize, k: f64, u: f64, rng: &mut ChaCha8Rng) -> Population {
        let mut pop = Population::new(k);
        for _ in 0..n {
            pop.push(rng.random::<f64>(), u, 0);
        }
        pop
    }

    #[test]
    fn empty_population_stays_empty() {
        let spec = presets::constant_world();
        let mut pop = Population::new(100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let log = simulate(&mut pop, &spec, &SimOptions::until(10.0), &mut rng, None).unwrap();
        assert!(pop.is_empty());
        assert!(log.events.is_empty());
        assert_eq!(pop.time, 10.0);
    }

    #[test]
    fn bad_motion_cap_is_a_config_error() {
        let spec = presets::constant_world();
        let mut pop = Population::new(100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = SimOptions {
            dt_motion: Some(0.0),
            ..SimOptions::until(1.0)
        };
        assert!(matches!(simulate(&mut pop, &spec, &opts, &mut rng, None), Err(Error::Config(_))));
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let spec = presets::constant_world().with_scaling(500, 0.05).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut pop = uniform_population(50, 500.0, 0.2, &mut rng);
            let opts = SimOptions {
                record_events: true,
                ..SimOptions::until(5.0)
            };
            let log = simulate(&mut pop, &spec, &opts, &mut rng, None).unwrap();
            (log.events, pop.individuals)
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert!(!a.is_empty());
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }

    #[test]
    fn event_times_increase_and_mass_moves_by_one_individual() {
        let spec = presets::constant_world().with_scaling(200, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pop = uniform_population(20, 200.0, 0.2, &mut rng);
        let opts = SimOptions {
            record_events: true,
            ..SimOptions::until(20.0)
        };
        let log = simulate(&mut pop, &spec, &opts, &mut rng, None).unwrap();
        assert!(log.events.windows(2).all(|w| w[1].t > w[0].t));
        let mut n = 20i64;
        for e in &log.events {
            let before = n;
            n += if e.kind == EventKind::Death { -1 } else { 1 };
            assert_eq!((n - before).abs(), 1);
            if e.kind == EventKind::MutantBirth {
                assert_eq!(e.child_u, Some(0.8));
            }
        }
        assert_eq!(n as usize, pop.len());
        assert!(pop.individuals.iter().all(|i| spec.domain.contains(i.x)));
    }

    #[test]
    fn linear_birth_death_moments() {
        // Without competition the size is a linear birth-death process:
        // E N_t = N0 e^{(b-d)t}, Var N_t = N0 (b+d)/(b-d) e^{(b-d)t} (e^{(b-d)t} - 1).
        let spec = flat_world(1.0, 0.5, 0.0);
        let reps = 10_000;
        let sizes: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(stats::replicate_seed(3, r));
                let mut pop = uniform_population(100, 1000.0, 0.2, &mut rng);
                simulate(&mut pop, &spec, &SimOptions::until(1.0), &mut rng, None).unwrap();
                pop.len() as f64
            })
            .collect();
        let g = 0.5f64;
        let mean = 100.0 * g.exp();
        let var = 100.0 * 1.5 / 0.5 * g.exp() * (g.exp() - 1.0);
        let m = stats::mean(&sizes);
        let v = stats::variance(&sizes);
        assert!((m - mean).abs() < 3.0 * (var / reps as f64).sqrt(), "mean {m} vs {mean}");
        // Sample variance of a near-Gaussian: sd ~ var sqrt(2/n).
        assert!((v - var).abs() < 4.0 * var * (2.0 / reps as f64).sqrt(), "var {v} vs {var}");
    }

    #[test]
    fn logistic_world_settles_at_its_equilibrium_mass() {
        let spec = presets::constant_world().with_scaling(10_000, 0.0).unwrap();
        let means: Vec<f64> = (0..20)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(stats::replicate_seed(11, s));
                let mut pop = uniform_population(1000, 10_000.0, 0.2, &mut rng);
                let mut samples = Vec::new();
                let mut obs = |p: &Population| {
                    if p.time >= 50.0 {
                        samples.push(p.mass());
                    }
                    false
                };
                let opts = SimOptions::until(100.0).observe_every(1.0);
                simulate(&mut pop, &spec, &opts, &mut rng, Some(&mut obs)).unwrap();
                stats::mean(&samples)
            })
            .collect();
        let m = stats::mean(&means);
        assert!(m > 0.095 && m < 0.105, "mean mass {m}");
    }

    #[test]
    fn trait_only_competition_uses_per_trait_counts() {
        let spec = presets::coexistence_world().with_scaling(2000, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pop = Population::new(2000.0);
        for _ in 0..100 {
            pop.push(rng.random::<f64>(), 0.2, 0);
            pop.push(rng.random::<f64>(), 0.8, 1);
        }
        simulate(&mut pop, &spec, &SimOptions::until(30.0), &mut rng, None).unwrap();
        // Coexistence at n_u = n_v = 1/11 of carrying capacity.
        let nu = pop.count_trait(0.2) as f64 / 2000.0;
        let nv = pop.count_trait(0.8) as f64 / 2000.0;
        assert!((nu - 1.0 / 11.0).abs() < 0.03 && (nv - 1.0 / 11.0).abs() < 0.03, "{nu} {nv}");
    }

    #[test]
    fn hard_cap_raises_capacity_error() {
        let spec = flat_world(2.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pop = uniform_population(10, 100.0, 0.2, &mut rng);
        let opts = SimOptions {
            hard_cap: 500,
            ..SimOptions::until(100.0)
        };
        assert!(matches!(simulate(&mut pop, &spec, &opts, &mut rng, None), Err(Error::Capacity(_))));
    }

    #[test]
    fn neutral_labels_do_not_change_the_dynamics() {
        // One time-averaged mass per seed keeps the KS samples independent.
        let spec = presets::constant_world().with_scaling(1000, 0.0).unwrap();
        let run = |seed: u64, split: bool| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pop = Population::new(1000.0);
            for j in 0..50 {
                pop.push(rng.random::<f64>(), 0.2, u32::from(split && j % 2 == 0));
            }
            let mut out = Vec::new();
            let mut obs = |p: &Population| {
                out.push(p.mass());
                false
            };
            let opts = SimOptions::until(10.0).observe_every(0.5);
            simulate(&mut pop, &spec, &opts, &mut rng, Some(&mut obs)).unwrap();
            out
        };
        assert_eq!(run(1, false), run(1, true));
        let summary = |split: bool, base: u64| -> Vec<f64> {
            (0..20).map(|s| stats::mean(&run(stats::replicate_seed(base, s), split))).collect()
        };
        let (_, p) = stats::ks_two_sample(&summary(false, 6), &summary(true, 5));
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn equilibrium_sample_has_the_right_size() {
        let spec = presets::niche_gradient();
        let eig = crate::spectral::principal_eigen(&spec, 0.6, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pop = Population::new(5000.0);
        pop.add_equilibrium(&eig, 0, &mut rng).unwrap();
        assert_eq!(pop.len(), (5000.0 * eig.mass()).round() as usize);
        let mean_x = pop.individuals.iter().map(|i| i.x).sum::<f64>() / pop.len() as f64;
        assert!((mean_x - 0.6).abs() < 0.02, "{mean_x}");
    }
}
