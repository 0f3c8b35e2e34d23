//! Replicated experiments on the microscopic model.
//!
//! Every replicate owns a ChaCha8 stream seeded from `(seed, index)`, so
//! results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::branching::{run_branching, BranchingOutcome, BranchingRates, Verdict};
use super::{simulate, Population, SimOptions, StopReason, StopRule};
use crate::domain::{atoms_to_grid, GridMeasure, GridSampler, TraitWindow};
use crate::error::{Error, Result};
use crate::flat;
use crate::grid::Grid;
use crate::model::{Interval, ModelSpec};
use crate::pde::{self, PdeState};
use crate::spectral::{self, PairCase};
use crate::stats::{self, LinearFit};

pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stats::replicate_seed(seed, index))
}

/// Run `f` on replicates `0..n`, in parallel when available.
pub fn map_replicates<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync + Send,
{
    let run = |i: usize| {
        let mut rng = replicate_rng(seed, i as u64);
        f(i as u64, &mut rng)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(run).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalEstimate {
    pub x0: f64,
    pub p_hat: f64,
    /// Three binomial standard errors.
    pub halfwidth: f64,
    pub replicates: usize,
    pub reached: usize,
    pub extinct: usize,
    pub timed_out: usize,
}

/// Frequency with which a lineage started at `x0` reaches `ceil(epsilon K)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_survival_mc(
    x0: f64,
    rates: &BranchingRates,
    m: f64,
    domain: Interval,
    replicates: usize,
    k: f64,
    epsilon: f64,
    t_max: f64,
    seed: u64,
) -> Result<SurvivalEstimate> {
    if replicates < 100 {
        return Err(Error::Config(format!("need at least 100 replicates, got {replicates}")));
    }
    let outcomes = map_replicates(replicates, seed, |_, rng| {
        run_branching(x0, rates, m, domain, k, epsilon, t_max, rng)
    })?;
    let count = |v: Verdict| outcomes.iter().filter(|o| o.verdict == v).count();
    let reached = count(Verdict::ReachedThreshold);
    let p_hat = reached as f64 / replicates as f64;
    Ok(SurvivalEstimate {
        x0,
        p_hat,
        halfwidth: stats::binomial_halfwidth(p_hat, replicates, 3.0),
        replicates,
        reached,
        extinct: count(Verdict::Extinct),
        timed_out: count(Verdict::TimedOut),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthPoint {
    pub k: f64,
    pub log_threshold: f64,
    pub mean_hitting_time: f64,
    pub reached: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthTimeResult {
    pub points: Vec<GrowthPoint>,
    pub fit: LinearFit,
}

/// Mean time to reach `ceil(epsilon K)` among surviving lineages, for each
/// `K`, regressed against `log(epsilon K)`.
#[allow(clippy::too_many_arguments)]
pub fn growth_time_experiment(
    x0: f64,
    rates: &BranchingRates,
    m: f64,
    domain: Interval,
    ks: &[f64],
    epsilon: f64,
    replicates: usize,
    t_max: f64,
    seed: u64,
) -> Result<GrowthTimeResult> {
    let mut points = Vec::with_capacity(ks.len());
    for (j, &k) in ks.iter().enumerate() {
        let outcomes: Vec<BranchingOutcome> = map_replicates(replicates, stats::replicate_seed(seed, 1000 + j as u64), |_, rng| {
            run_branching(x0, rates, m, domain, k, epsilon, t_max, rng)
        })?;
        let times: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.verdict == Verdict::ReachedThreshold)
            .map(|o| o.hitting_time)
            .collect();
        if times.is_empty() {
            return Err(Error::Degenerate(format!("no lineage reached the threshold at K = {k}")));
        }
        points.push(GrowthPoint {
            k,
            log_threshold: (epsilon * k).ceil().ln(),
            mean_hitting_time: stats::mean(&times),
            reached: times.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.log_threshold).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_hitting_time).collect();
    let fit = stats::linear_regression(&xs, &ys);
    Ok(GrowthTimeResult { points, fit })
}

/// Resident equilibrium of trait `u` with lineage tag 0.
pub fn equilibrium_population(spec: &ModelSpec, u: f64, k: f64, n_nodes: usize, rng: &mut ChaCha8Rng) -> Result<Population> {
    let eig = spectral::principal_eigen(spec, u, n_nodes)?;
    if !eig.viable {
        return Err(Error::ModelAssumption(format!("trait {u} is not viable alone")));
    }
    let mut pop = Population::new(k);
    pop.add_equilibrium(&eig, 0, rng)?;
    Ok(pop)
}

#[derive(Debug, Clone, Serialize)]
pub struct DimorphicResult {
    pub replicates: usize,
    pub fixations: usize,
    pub losses: usize,
    pub unresolved: usize,
    pub frequency: f64,
    pub halfwidth: f64,
    /// 10%, 50% and 90% quantiles of the time to monomorphism.
    pub theta0_quantiles: [f64; 3],
}

/// One `v` mutant at `x0` in the `u` equilibrium, mutations off, run until
/// one trait is lost.
#[allow(clippy::too_many_arguments)]
pub fn dimorphic_invasion_experiment(
    spec: &ModelSpec,
    u: f64,
    v: f64,
    x0: f64,
    k: f64,
    replicates: usize,
    t_max: f64,
    n_nodes: usize,
    seed: u64,
) -> Result<DimorphicResult> {
    let class = spectral::classify_pair(spec, u, v, n_nodes)?;
    if !matches!(class.case, PairCase::Case1NoInvasion | PairCase::Case2Fixation) {
        return Err(Error::ModelAssumption(format!(
            "pair ({u}, {v}) is classified {:?}; the dimorphic experiment needs invasion to imply fixation",
            class.case
        )));
    }
    if !spec.domain.contains(x0) {
        return Err(Error::Domain {
            what: "x0".into(),
            value: x0,
            lo: spec.domain.min,
            hi: spec.domain.max,
        });
    }
    let eig = spectral::principal_eigen(spec, u, n_nodes)?;
    let spec = spec.with_scaling(k.round() as u64, 0.0)?;
    let opts = SimOptions::until(t_max).stop_on(StopRule::Monomorphic);
    let runs = map_replicates(replicates, seed, |_, rng| {
        let mut pop = Population::new(k);
        pop.add_equilibrium(&eig, 0, rng)?;
        pop.push(x0, v, 1);
        let log = simulate(&mut pop, &spec, &opts, rng, None)?;
        let outcome = match log.stop {
            StopReason::Monomorphic if pop.count_tag(1) > 0 => Some(true),
            StopReason::Monomorphic => Some(false),
            _ => None,
        };
        Ok((outcome, pop.time))
    })?;
    let fixations = runs.iter().filter(|r| r.0 == Some(true)).count();
    let losses = runs.iter().filter(|r| r.0 == Some(false)).count();
    let theta: Vec<f64> = runs.iter().filter(|r| r.0.is_some()).map(|r| r.1).collect();
    let frequency = fixations as f64 / replicates as f64;
    let q = |p| if theta.is_empty() { f64::NAN } else { stats::quantile(&theta, p) };
    Ok(DimorphicResult {
        replicates,
        fixations,
        losses,
        unresolved: replicates - fixations - losses,
        frequency,
        halfwidth: stats::binomial_halfwidth(frequency, replicates, 3.0),
        theta0_quantiles: [q(0.1), q(0.5), q(0.9)],
    })
}

/// `int p(x,u) b(x,u) g(x) dx` for the equilibrium `g` of trait `u`.
pub fn mutation_flux(spec: &ModelSpec, eig: &spectral::EigenSolution) -> f64 {
    let grid = eig.grid();
    let u = eig.trait_value;
    let f: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&eig.g.density)
        .map(|(&x, g)| spec.mutation_prob(x, u) * spec.birth(x, u) * g)
        .collect();
    grid.integrate(&f)
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstMutationResult {
    pub beta: f64,
    /// `K q S_1` for the uncensored replicates.
    pub rescaled: Vec<f64>,
    pub censored: usize,
    pub replicates: usize,
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
    /// Median of the unrescaled first-mutation times.
    pub median_time: Option<f64>,
}

/// Law of the first mutant birth from the `u` equilibrium, compared with
/// the exponential law of rate `int p b g`.
#[allow(clippy::too_many_arguments)]
pub fn first_mutation_law_experiment(
    spec: &ModelSpec,
    u: f64,
    k: f64,
    q: f64,
    replicates: usize,
    t_max: f64,
    n_nodes: usize,
    seed: u64,
) -> Result<FirstMutationResult> {
    if !(q > 0.0) {
        return Err(Error::Config(format!("the mutation scale must be positive, got {q}")));
    }
    let eig = spectral::principal_eigen(spec, u, n_nodes)?;
    if !eig.viable {
        return Err(Error::ModelAssumption(format!("trait {u} is not viable alone")));
    }
    let beta = mutation_flux(spec, &eig);
    let spec = spec.with_scaling(k.round() as u64, q)?;
    let opts = SimOptions::until(t_max).stop_on(StopRule::FirstMutation);
    let times = map_replicates(replicates, seed, |_, rng| {
        let mut pop = Population::new(k);
        pop.add_equilibrium(&eig, 0, rng)?;
        Ok(simulate(&mut pop, &spec, &opts, rng, None)?.first_mutation)
    })?;
    let hits: Vec<f64> = times.iter().flatten().copied().collect();
    let rescaled: Vec<f64> = hits.iter().map(|t| k * q * t).collect();
    let (ks_statistic, ks_p_value) = if rescaled.is_empty() || !(beta > 0.0) {
        (None, None)
    } else {
        let (d, p) = stats::ks_one_sample(&rescaled, |t| 1.0 - (-beta * t).exp());
        (Some(d), Some(p))
    };
    Ok(FirstMutationResult {
        beta,
        censored: replicates - hits.len(),
        median_time: (!hits.is_empty()).then(|| stats::median(&hits)),
        rescaled,
        replicates,
        ks_statistic,
        ks_p_value,
    })
}

/// Nodes of the equilibrium reference used by the residence-time experiment.
pub const RESIDENCE_NODES: usize = 201;

#[derive(Debug, Clone, Serialize)]
pub struct ResidencePoint {
    pub k: f64,
    pub median: f64,
    pub times: Vec<f64>,
    pub truncated: usize,
}

/// First time the `u` empirical measure is at flat distance at least
/// `gamma` from the equilibrium, truncated at `t_max`; checked after every
/// accepted event.
#[allow(clippy::too_many_arguments)]
pub fn residence_time_experiment(
    spec: &ModelSpec,
    u: f64,
    gamma: f64,
    ks: &[f64],
    seeds: usize,
    t_max: f64,
    seed: u64,
) -> Result<Vec<ResidencePoint>> {
    let eig = spectral::principal_eigen(spec, u, RESIDENCE_NODES)?;
    if !eig.viable {
        return Err(Error::ModelAssumption(format!("trait {u} is not viable alone")));
    }
    let reference = eig.g.to_atoms();
    let window = Some(TraitWindow::exact(u));
    let mut out = Vec::with_capacity(ks.len());
    for (j, &k) in ks.iter().enumerate() {
        let spec_k = spec.with_scaling(k.round() as u64, 0.0)?;
        let opts = SimOptions {
            observe_events: true,
            ..SimOptions::until(t_max)
        };
        let cap = (k * eig.mass() * 4.0) as usize + 4 * RESIDENCE_NODES + flat::DEFAULT_ATOM_CAP;
        let runs = map_replicates(seeds, stats::replicate_seed(seed, 2000 + j as u64), |_, rng| {
            let mut pop = Population::new(k);
            pop.add_equilibrium(&eig, 0, rng)?;
            let mut failure = None;
            let mut observer = |p: &Population| {
                let atoms = p.empirical().spatial_atoms(window);
                match flat::flat_distance(&atoms, &reference, cap) {
                    Ok(d) => d >= gamma,
                    Err(e) => {
                        failure = Some(e);
                        true
                    }
                }
            };
            let log = simulate(&mut pop, &spec_k, &opts, rng, Some(&mut observer))?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok((pop.time, log.stop == StopReason::Observer))
        })?;
        let times: Vec<f64> = runs.iter().map(|r| r.0).collect();
        out.push(ResidencePoint {
            k,
            median: stats::median(&times),
            truncated: runs.iter().filter(|r| !r.1).count(),
            times,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeConsistency {
    pub distance: f64,
    pub error_bound: f64,
    pub pde_mass: f64,
    pub ibm_mass: f64,
}

/// Flat distance at `t_end` between the seed-averaged empirical measure
/// and the limit PDE, both started from `initial` (trait `u`, mutations off).
#[allow(clippy::too_many_arguments)]
pub fn pde_consistency_experiment(
    spec: &ModelSpec,
    u: f64,
    initial: &GridMeasure,
    k: f64,
    seeds: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<PdeConsistency> {
    let (state, _) = pde::integrate(&PdeState::single(initial, u), spec, t_end, dt, &Default::default())?;
    let limit = state
        .trait_index(u)
        .map(|i| state.measure(i))
        .unwrap_or_else(|| GridMeasure::zeros(initial.grid));
    let sampler = GridSampler::new(initial.grid, &initial.density)?;
    let count = (k * initial.mass()).round() as usize;
    let spec_k = spec.with_scaling(k.round() as u64, 0.0)?;
    let runs = map_replicates(seeds, seed, |_, rng| {
        let mut pop = Population::new(k);
        for _ in 0..count {
            pop.push(sampler.sample(rng), u, 0);
        }
        simulate(&mut pop, &spec_k, &SimOptions::until(t_end), rng, None)?;
        Ok(pop.individuals.iter().map(|i| i.x).collect::<Vec<f64>>())
    })?;
    let weight = 1.0 / (k * seeds as f64);
    let atoms: Vec<(f64, f64)> = runs.iter().flatten().map(|&x| (x, weight)).collect();
    let ibm_mass = atoms.len() as f64 * weight;
    let d = flat::flat_distance_coarse(&atoms, &limit.to_atoms(), spec.domain)?;
    Ok(PdeConsistency {
        distance: d.value,
        error_bound: d.error_bound,
        pde_mass: limit.mass(),
        ibm_mass,
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SubstitutionResult {
    pub runs: usize,
    pub completed: usize,
    pub forward: usize,
    pub reversed: usize,
    pub incomplete: usize,
}

/// Repeated microscopic runs from the `u` equilibrium with mutations on.
/// A run completes when `v` holds at least `dominance` of the population;
/// it is then followed for `post_window` to detect a return of `u`.
#[allow(clippy::too_many_arguments)]
pub fn substitution_experiment(
    spec: &ModelSpec,
    u: f64,
    v: f64,
    k: f64,
    q: f64,
    target_completed: usize,
    max_runs: usize,
    t_max: f64,
    post_window: f64,
    dominance: f64,
    n_nodes: usize,
    seed: u64,
) -> Result<SubstitutionResult> {
    let eig = spectral::principal_eigen(spec, u, n_nodes)?;
    let spec_k = spec.with_scaling(k.round() as u64, q)?;
    let share = |p: &Population, w: f64| {
        if p.is_empty() {
            0.0
        } else {
            p.count_trait(w) as f64 / p.len() as f64
        }
    };
    let one = |rng: &mut ChaCha8Rng| -> Result<(bool, bool)> {
        let mut pop = Population::new(k);
        pop.add_equilibrium(&eig, 0, rng)?;
        let mut took_over = |p: &Population| share(p, v) >= dominance;
        let opts = SimOptions::until(t_max).observe_every(0.1);
        simulate(&mut pop, &spec_k, &opts, rng, Some(&mut took_over))?;
        if share(&pop, v) < dominance {
            return Ok((false, false));
        }
        let mut came_back = |p: &Population| share(p, u) >= dominance;
        let opts = SimOptions::until(pop.time + post_window).observe_every(0.1);
        let log = simulate(&mut pop, &spec_k, &opts, rng, Some(&mut came_back))?;
        Ok((true, log.stop == StopReason::Observer))
    };
    let mut result = SubstitutionResult::default();
    let batch = 16;
    while result.completed < target_completed && result.runs < max_runs {
        let n = batch.min(max_runs - result.runs);
        let base = result.runs as u64;
        let outcomes = map_replicates(n, stats::replicate_seed(seed, base), |_, rng| one(rng))?;
        for (done, back) in outcomes {
            if result.completed >= target_completed {
                break;
            }
            result.runs += 1;
            if done {
                result.completed += 1;
                if back {
                    result.reversed += 1;
                } else {
                    result.forward += 1;
                }
            } else {
                result.incomplete += 1;
            }
        }
    }
    Ok(result)
}

/// Spatial support width of an equilibrium record.
pub const SUPPORT_NODES: usize = 101;
pub const SUPPORT_FRACTION: f64 = 0.05;
/// Half-width of the trait window around the dominant trait.
pub const DOMINANCE_WINDOW: f64 = 0.025;
pub const DOMINANCE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumRecord {
    pub t: f64,
    pub dominant: f64,
    pub dominance: f64,
    pub support: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Substitution {
    pub t: f64,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Figure1Result {
    pub records: Vec<EquilibriumRecord>,
    pub substitutions: Vec<Substitution>,
    #[serde(skip)]
    pub snapshots: Vec<(f64, Vec<(f64, f64)>)>,
    pub final_time: f64,
    pub events: u64,
}

impl Figure1Result {
    pub fn first_substitution_lower(&self) -> Option<bool> {
        self.substitutions.first().map(|s| s.to < s.from)
    }

    pub fn support_widened(&self) -> Option<bool> {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) if a.dominant != b.dominant => Some(b.support > a.support),
            _ => None,
        }
    }
}

/// Most frequent exact trait, its share within the dominance window, and
/// the support width of the individuals in that window.
pub fn equilibrium_statistics(pop: &Population, domain: Interval) -> Option<(f64, f64, usize)> {
    let masses = super::trait_masses(pop);
    let (dominant, _) = masses.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))?;
    let window = TraitWindow {
        lo: dominant - DOMINANCE_WINDOW,
        hi: dominant + DOMINANCE_WINDOW,
    };
    let inside = pop.individuals.iter().filter(|i| window.contains(i.u)).count();
    let dominance = inside as f64 / pop.len() as f64;
    let atoms = pop.empirical().spatial_atoms(Some(window));
    let grid = Grid::uniform(domain, SUPPORT_NODES).ok()?;
    let support = atoms_to_grid(&atoms, grid).support_width(SUPPORT_FRACTION);
    Some((dominant, dominance, support))
}

/// Long microscopic run from `K` individuals at `(x0, u0)`, recording
/// equilibria every `record_every` once `t >= settle`.
#[allow(clippy::too_many_arguments)]
pub fn figure1_experiment(
    spec: &ModelSpec,
    x0: f64,
    u0: f64,
    k: f64,
    q: f64,
    t_end: f64,
    settle: f64,
    record_every: f64,
    snapshot_times: &[f64],
    seed: u64,
) -> Result<Figure1Result> {
    let spec_k = spec.with_scaling(k.round() as u64, q)?;
    let mut rng = replicate_rng(seed, 0);
    let mut pop = Population::new(k);
    for _ in 0..k.round() as usize {
        pop.push(x0, u0, 0);
    }
    let mut result = Figure1Result::default();
    let mut pending: Vec<f64> = snapshot_times.to_vec();
    pending.sort_by(f64::total_cmp);
    let domain = spec.domain;
    let mut observer = |p: &Population| {
        while pending.first().is_some_and(|t| *t <= p.time + 1e-9) {
            pending.remove(0);
            result
                .snapshots
                .push((p.time, p.individuals.iter().map(|i| (i.x, i.u)).collect()));
        }
        if p.time + 1e-9 < settle {
            return p.is_empty();
        }
        if let Some((dominant, dominance, support)) = equilibrium_statistics(p, domain) {
            if dominance >= DOMINANCE_LEVEL {
                if let Some(prev) = result.records.last() {
                    if prev.dominant != dominant {
                        result.substitutions.push(Substitution {
                            t: p.time,
                            from: prev.dominant,
                            to: dominant,
                        });
                    }
                }
                result.records.push(EquilibriumRecord {
                    t: p.time,
                    dominant,
                    dominance,
                    support,
                    mass: p.mass(),
                });
            }
        }
        p.is_empty()
    };
    let opts = SimOptions::until(t_end).observe_every(record_every);
    let log = simulate(&mut pop, &spec_k, &opts, &mut rng, Some(&mut observer))?;
    result.final_time = pop.time;
    result.events = log.accepted;
    Ok(result)
}
