//! Command-line front end: subcommand dispatch, output files and run
//! metadata.
//!
//! Every run writes into `--out`:
//! `manifest.json` (the resolved invocation), `config.json` (the model),
//! `run_metadata.json` (config hash, seed, version, wall time) and the
//! subcommand's CSV/JSON results. CSV bodies depend only on the
//! arguments and the seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::domain::{write_grid_csv, GridMeasure};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ibm::branching::BranchingRates;
use crate::ibm::experiments::{self, replicate_rng};
use crate::ibm::{self, Population, SimOptions, StopRule};
use crate::model::{self, ModelSpec};
use crate::pde::{self, IntegrateOptions, PdeState};
use crate::presets;
use crate::spectral;
use crate::survival;
use crate::tss::Tss;
use crate::verify;

#[derive(Debug, Parser, Serialize)]
#[command(name = "evo-tss", version, about = "Spatial eco-evolutionary laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Model configuration (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in model: niche, constant, two-trait, coexistence, linear-birth.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "evo-tss-out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for replicate ensembles.
    #[arg(long, global = true, env = "EVO_TSS_JOBS")]
    pub jobs: Option<usize>,
    /// Grid nodes of the eigen/survival/PDE solvers.
    #[arg(long, global = true, default_value_t = 512)]
    pub nodes: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Principal eigenpair and equilibrium profile of one trait.
    Eigen {
        #[arg(long, default_value_t = 0.6)]
        u: f64,
    },
    /// Survival or invasion probability profile.
    Survival {
        #[arg(long)]
        resident_u: f64,
        /// Without a mutant the resident's own branching survival is solved.
        #[arg(long)]
        mutant_v: Option<f64>,
    },
    /// Integrate the reaction-diffusion limit.
    Pde {
        #[arg(long, value_delimiter = ',', required = true)]
        traits: Vec<f64>,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        snapshot_every: f64,
        /// Uniform initial mass of each trait.
        #[arg(long, default_value_t = 0.05)]
        initial_mass: f64,
    },
    /// Simulate the individual-based model.
    Ibm(IbmArgs),
    /// Monte Carlo survival of a branching diffusion.
    Branching {
        /// Constant birth rate (defaults to the model's birth at --u).
        #[arg(long)]
        b: Option<f64>,
        /// Constant death rate (defaults to the model's death at --u).
        #[arg(long)]
        d: Option<f64>,
        #[arg(long, default_value_t = 0.6)]
        u: f64,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 10_000.0)]
        k: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1000.0)]
        t_max: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
        x0: Vec<f64>,
    },
    /// Simulate the trait substitution sequence.
    Tss {
        #[arg(long)]
        u0: f64,
        #[arg(long, default_value_t = 1000.0)]
        t_end: f64,
        #[arg(long, default_value_t = crate::tss::DEFAULT_TRAIT_ROUND)]
        trait_round: f64,
    },
    /// Cross-level verification suites.
    Verify {
        #[arg(long, default_value = "constant-world")]
        suite: String,
    },
    /// Long microscopic run from a point population, with equilibrium records.
    Figure1 {
        #[arg(long, default_value_t = 20_000.0)]
        k: f64,
        #[arg(long, default_value_t = 1e-4)]
        qk: f64,
        #[arg(long, default_value_t = 5000.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
        #[arg(long, default_value_t = 0.6)]
        u0: f64,
        #[arg(long, default_value_t = 10.0)]
        record_every: f64,
        #[arg(long, default_value_t = 20.0)]
        settle: f64,
        /// Snapshot epochs (defaults to six epochs spread over the run).
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct IbmArgs {
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub qk: Option<f64>,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    /// Cap on a single motion increment (exact motion when absent).
    #[arg(long)]
    pub dt_motion: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub snapshot_every: f64,
    /// extinction, s1 or mass:X; may be repeated.
    #[arg(long)]
    pub stop_on: Vec<String>,
    /// Initial trait.
    #[arg(long, default_value_t = 0.6)]
    pub u0: f64,
    /// Start every individual at this location instead of the equilibrium.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Initial count (defaults to K at a point, K times the mass at equilibrium).
    #[arg(long)]
    pub n0: Option<usize>,
    /// Write the per-event log.
    #[arg(long)]
    pub events: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment_id: String,
    config_path: Option<&'a Path>,
    preset: Option<&'a str>,
    parameters: &'a Command,
    seeds: Vec<u64>,
    output_dir: &'a Path,
    snapshot_cadence: Option<f64>,
    nodes: usize,
}

#[derive(Debug, Serialize)]
struct RunMetadata {
    subcommand: String,
    config_sha256: String,
    seed: u64,
    version: &'static str,
    jobs: usize,
    wall_time_s: f64,
    warnings: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eigen { .. } => "eigen",
            Command::Survival { .. } => "survival",
            Command::Pde { .. } => "pde",
            Command::Ibm(_) => "ibm",
            Command::Branching { .. } => "branching",
            Command::Tss { .. } => "tss",
            Command::Verify { .. } => "verify",
            Command::Figure1 { .. } => "figure1",
        }
    }

    fn cadence(&self) -> Option<f64> {
        match self {
            Command::Pde { snapshot_every, .. } => Some(*snapshot_every),
            Command::Ibm(a) => Some(a.snapshot_every),
            Command::Figure1 { record_every, .. } => Some(*record_every),
            _ => None,
        }
    }
}

fn load_spec(common: &Common, command: &Command) -> Result<ModelSpec> {
    if let Some(path) = &common.config {
        return model::parse_config(&fs::read_to_string(path)?);
    }
    let default = match command {
        Command::Figure1 { .. } | Command::Eigen { .. } | Command::Pde { .. } => "niche",
        Command::Tss { .. } | Command::Survival { .. } => "two-trait",
        Command::Branching { .. } => "linear-birth",
        _ => "constant",
    };
    let name = common.preset.as_deref().unwrap_or(default);
    presets::by_name(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset {name:?}; expected one of {}",
            presets::PRESET_NAMES.join(", ")
        ))
    })
}

/// Heuristic check of the rare-mutation window `K q log K >= 1`, `q <= K^{-1/2}`.
pub fn scaling_warnings(k: f64, q: f64) -> Vec<String> {
    let mut out = Vec::new();
    if q > 0.0 && k * q * k.ln() < 1.0 {
        out.push(format!("K q log K = {:.3} < 1: mutations too rare for the substitution limit", k * q * k.ln()));
    }
    if q > k.powf(-0.5) {
        out.push(format!("q = {q} exceeds K^(-1/2) = {:.3e}: mutations may be too frequent for separated time scales", k.powf(-0.5)));
    }
    out
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(dir, name)?);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse the arguments of the current process and run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run one parsed invocation.
pub fn run(cli: &Cli) -> Result<()> {
    let jobs = cli.common.jobs.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| run_in_pool(cli, jobs))
}

fn run_in_pool(cli: &Cli, jobs: usize) -> Result<()> {
    let start = Instant::now();
    let common = &cli.common;
    let spec = load_spec(common, &cli.command)?;
    let out = &common.out;
    fs::create_dir_all(out)?;

    let config_text = model::render(&spec);
    fs::write(out.join("config.json"), &config_text)?;
    let manifest = Manifest {
        experiment_id: format!("{}-{}", cli.command.name(), common.seed),
        config_path: common.config.as_deref(),
        preset: common.preset.as_deref(),
        parameters: &cli.command,
        seeds: vec![common.seed],
        output_dir: out,
        snapshot_cadence: cli.command.cadence(),
        nodes: common.nodes,
    };
    write_json(out, "manifest.json", &manifest)?;

    let warnings = dispatch(&cli.command, &spec, common)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let meta = RunMetadata {
        subcommand: cli.command.name().into(),
        config_sha256: format!("{:x}", Sha256::digest(config_text.as_bytes())),
        seed: common.seed,
        version: env!("CARGO_PKG_VERSION"),
        jobs,
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings,
    };
    write_json(out, "run_metadata.json", &meta)
}

fn dispatch(command: &Command, spec: &ModelSpec, common: &Common) -> Result<Vec<String>> {
    let out = common.out.as_path();
    let n = common.nodes;
    let seed = common.seed;
    let mut warnings = Vec::new();
    match command {
        Command::Eigen { u } => {
            let eig = spectral::principal_eigen(spec, *u, n)?;
            let grid = eig.grid();
            write_rows(out, "eigen.csv", &["x", "g"], grid.nodes().into_iter().zip(eig.g.density.iter().copied()))?;
            write_json(out, "eigen.json", &eig.header())?;
            if !eig.viable {
                warnings.push(format!("trait {u} is not viable (H = {})", eig.h));
            }
        }
        Command::Survival { resident_u, mutant_v } => {
            let eig = spectral::principal_eigen(spec, *resident_u, n)?;
            let grid = eig.grid();
            let (profile, header) = match mutant_v {
                Some(v) => {
                    let inv = survival::solve_phi_vu(spec, *v, &eig)?;
                    let header = serde_json::to_value(inv.header(*resident_u, *v))?;
                    (inv.profile, header)
                }
                None => {
                    let u = *resident_u;
                    let b: Vec<f64> = grid.nodes().iter().map(|&x| spec.birth(x, u)).collect();
                    let d: Vec<f64> = grid.nodes().iter().map(|&x| spec.death(x, u)).collect();
                    let p = survival::solve_phi_star(grid, spec.diffusion(u), &b, &d)?;
                    let header = serde_json::json!({
                        "resident": u,
                        "C_vu": 0.0,
                        "eigenvalue": p.eigenvalue,
                        "viable": p.viable,
                        "degenerate": p.degenerate,
                        "residual_inf": p.residual_inf,
                    });
                    (p, header)
                }
            };
            write_rows(out, "survival.csv", &["x", "phi"], grid.nodes().into_iter().zip(profile.phi.iter().copied()))?;
            write_json(out, "survival.json", &header)?;
        }
        Command::Pde {
            traits,
            t_end,
            dt,
            snapshot_every,
            initial_mass,
        } => {
            let grid = Grid::uniform(spec.domain, n)?;
            let level = initial_mass / spec.domain.len();
            let state = PdeState::new(grid, traits.clone(), vec![vec![level; n]; traits.len()])?;
            let mut references = Vec::new();
            for &u in traits {
                let eig = spectral::principal_eigen(spec, u, n)?;
                if eig.viable {
                    references.push((u, eig.g));
                }
            }
            let opts = IntegrateOptions {
                observe_every: Some(*snapshot_every),
                snapshot_every: Some(*snapshot_every),
                references,
                ..Default::default()
            };
            let (last, log) = pde::integrate(&state, spec, *t_end, *dt, &opts)?;
            let mut w = csv::Writer::from_writer(create(out, "pde_snapshots.csv")?);
            w.write_record(["t", "trait", "x", "density"])?;
            for snap in std::iter::once(&state).chain(&log.snapshots) {
                for (k, &u) in snap.traits.iter().enumerate() {
                    for (i, &x) in snap.grid.nodes().iter().enumerate() {
                        w.serialize((snap.time, u, x, snap.densities[k][i]))?;
                    }
                }
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(create(out, "pde_observations.csv")?);
            for o in &log.observations {
                w.serialize(o)?;
            }
            w.flush()?;
            let finals: Vec<(f64, GridMeasure)> = last.traits.iter().enumerate().map(|(k, &u)| (u, last.measure(k))).collect();
            let blocks: Vec<(f64, &GridMeasure)> = finals.iter().map(|(u, m)| (*u, m)).collect();
            write_grid_csv(create(out, "pde_final.csv")?, &blocks)?;
            write_json(
                out,
                "pde.json",
                &serde_json::json!({
                    "t": last.time,
                    "steps": log.steps,
                    "traits": last.traits,
                    "masses": (0..last.traits.len()).map(|k| last.mass(k)).collect::<Vec<_>>(),
                    "removed": log.removed,
                    "extinction_mass": pde::EXTINCTION_MASS,
                }),
            )?;
        }
        Command::Ibm(args) => warnings.extend(run_ibm(args, spec, out, n, seed)?),
        Command::Branching {
            b,
            d,
            u,
            replicates,
            k,
            epsilon,
            t_max,
            x0,
        } => {
            let (u, b0, d0) = (*u, *b, *d);
            let birth = move |x: f64| b0.unwrap_or_else(|| spec.birth(x, u));
            let death = move |x: f64| d0.unwrap_or_else(|| spec.death(x, u));
            let rates = BranchingRates::sampled(&birth, &death, spec.domain);
            let m = spec.diffusion(u);
            let grid = Grid::uniform(spec.domain, n)?;
            let bs: Vec<f64> = grid.nodes().iter().map(|&x| birth(x)).collect();
            let ds: Vec<f64> = grid.nodes().iter().map(|&x| death(x)).collect();
            let star = survival::solve_phi_star(grid, m, &bs, &ds)?;
            let mut rows = Vec::new();
            for (j, &x) in x0.iter().enumerate() {
                let est = experiments::estimate_survival_mc(
                    x,
                    &rates,
                    m,
                    spec.domain,
                    *replicates,
                    *k,
                    *epsilon,
                    *t_max,
                    crate::stats::replicate_seed(seed, j as u64),
                )?;
                rows.push((
                    est.x0,
                    est.p_hat,
                    est.halfwidth,
                    (est.p_hat - est.halfwidth).max(0.0),
                    (est.p_hat + est.halfwidth).min(1.0),
                    est.replicates,
                    est.reached,
                    est.extinct,
                    est.timed_out,
                    star.at(x),
                ));
            }
            write_rows(
                out,
                "branching.csv",
                &["x0", "p_hat", "halfwidth", "ci_lo", "ci_hi", "replicates", "reached", "extinct", "timed_out", "phi_star"],
                rows,
            )?;
        }
        Command::Tss { u0, t_end, trait_round } => {
            let tss = Tss::new(spec, n, *trait_round)?;
            let mut rng = replicate_rng(seed, 0);
            let traj = tss.simulate(*u0, *t_end, &mut rng)?;
            traj.write_csv(create(out, "tss.csv")?)?;
            write_json(
                out,
                "tss.json",
                &serde_json::json!({
                    "u0": traj.u0,
                    "t_end": traj.t_end,
                    "jumps": traj.jumps.len(),
                    "attempts": traj.attempts,
                    "final_trait": traj.final_trait,
                    "trait_round": trait_round,
                    "time_scale": "microscopic time times K q_K",
                }),
            )?;
        }
        Command::Verify { suite } => {
            let checks = match suite.as_str() {
                "constant-world" => verify::constant_world_suite(n.min(1024))?,
                other => {
                    return Err(Error::Config(format!("unknown suite {other:?}; expected constant-world")));
                }
            };
            write_rows(out, "verify.csv", &["name", "expected", "actual", "rel_error", "tolerance", "pass"], &checks)?;
            for c in &checks {
                println!("{} {} (expected {}, got {}, rel {:.2e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.expected, c.actual, c.rel_error);
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(Error::numerical(format!("{failed} of {} checks failed", checks.len()), f64::NAN));
            }
        }
        Command::Figure1 {
            k,
            qk,
            t_end,
            x0,
            u0,
            record_every,
            settle,
            snapshots,
        } => {
            warnings.extend(scaling_warnings(*k, *qk));
            let epochs: Vec<f64> = if snapshots.is_empty() {
                let mut e = vec![settle.min(*t_end)];
                e.extend((1..=5).map(|i| t_end * i as f64 / 5.0));
                e
            } else {
                snapshots.clone()
            };
            let res = experiments::figure1_experiment(spec, *x0, *u0, *k, *qk, *t_end, *settle, *record_every, &epochs, seed)?;
            let mut w = csv::Writer::from_writer(create(out, "figure1_snapshots.csv")?);
            w.write_record(["t", "x", "u"])?;
            for (t, particles) in &res.snapshots {
                for &(x, u) in particles {
                    w.serialize((t, x, u))?;
                }
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(create(out, "figure1_records.csv")?);
            for r in &res.records {
                w.serialize(r)?;
            }
            w.flush()?;
            write_rows(out, "figure1_substitutions.csv", &["t", "from", "to"], res.substitutions.iter().map(|s| (s.t, s.from, s.to)))?;
            write_json(
                out,
                "figure1.json",
                &serde_json::json!({
                    "final_time": res.final_time,
                    "accepted_events": res.events,
                    "equilibrium_records": res.records.len(),
                    "substitutions": res.substitutions.len(),
                    "first_substitution_lower": res.first_substitution_lower(),
                    "support_widened": res.support_widened(),
                }),
            )?;
        }
    }
    Ok(warnings)
}

fn parse_stop_rule(text: &str) -> Result<StopRule> {
    match text {
        "extinction" => Ok(StopRule::Extinction),
        "s1" => Ok(StopRule::FirstMutation),
        "monomorphic" => Ok(StopRule::Monomorphic),
        _ => match text.strip_prefix("mass:").map(str::parse::<f64>) {
            Some(Ok(m)) if m > 0.0 => Ok(StopRule::MassAtLeast(m)),
            _ => Err(Error::Config(format!(
                "unknown stop rule {text:?}; expected extinction, s1, monomorphic or mass:X"
            ))),
        },
    }
}

fn run_ibm(args: &IbmArgs, spec: &ModelSpec, out: &Path, n_nodes: usize, seed: u64) -> Result<Vec<String>> {
    let k = args.k.unwrap_or(spec.scaling.k as f64);
    let q = args.qk.unwrap_or(spec.scaling.q_k);
    if !(k >= 1.0) {
        return Err(Error::Config(format!("K must be at least 1, got {k}")));
    }
    let warnings = scaling_warnings(k, q);
    let spec = spec.with_scaling(k.round() as u64, q)?;
    let mut rng = replicate_rng(seed, 0);
    let mut pop = Population::new(k);
    match args.x0 {
        Some(x0) => {
            if !spec.domain.contains(x0) {
                return Err(Error::Domain {
                    what: "x0",
                    value: x0,
                    lo: spec.domain.min,
                    hi: spec.domain.max,
                });
            }
            for _ in 0..args.n0.unwrap_or(k.round() as usize) {
                pop.push(x0, args.u0, 0);
            }
        }
        None => {
            let eig = spectral::principal_eigen(&spec, args.u0, n_nodes)?;
            if !eig.viable {
                return Err(Error::ModelAssumption(format!("trait {} is not viable alone", args.u0)));
            }
            match args.n0 {
                Some(count) => {
                    let sampler = crate::domain::GridSampler::new(eig.grid(), &eig.g.density)?;
                    for _ in 0..count {
                        pop.push(sampler.sample(&mut rng), args.u0, 0);
                    }
                }
                None => pop.add_equilibrium(&eig, 0, &mut rng)?,
            }
        }
    }
    let opts = SimOptions {
        t_end: args.t_end,
        dt_motion: args.dt_motion,
        record_events: args.events,
        stop_rules: args.stop_on.iter().map(|s| parse_stop_rule(s)).collect::<Result<_>>()?,
        observe_every: Some(args.snapshot_every),
        ..SimOptions::until(args.t_end)
    };
    let mut snap = csv::Writer::from_writer(create(out, "ibm_snapshots.csv")?);
    snap.write_record(["t", "x", "u"])?;
    let mut masses = csv::Writer::from_writer(create(out, "ibm_masses.csv")?);
    masses.write_record(["t", "trait", "mass"])?;
    let mut failure: Option<Error> = None;
    let mut observer = |p: &Population| {
        let mut write = || -> Result<()> {
            for i in &p.individuals {
                snap.serialize((p.time, i.x, i.u))?;
            }
            for (u, m) in ibm::trait_masses(p) {
                masses.serialize((p.time, u, m))?;
            }
            Ok(())
        };
        match write() {
            Ok(()) => false,
            Err(e) => {
                failure = Some(e);
                true
            }
        }
    };
    let log = ibm::simulate(&mut pop, &spec, &opts, &mut rng, Some(&mut observer))?;
    if let Some(e) = failure {
        return Err(e);
    }
    snap.flush()?;
    masses.flush()?;
    if args.events {
        let mut w = csv::Writer::from_writer(create(out, "ibm_events.csv")?);
        w.write_record(["t", "kind", "parent", "x", "u", "child_u"])?;
        for e in &log.events {
            let kind = match e.kind {
                ibm::EventKind::Birth => "birth",
                ibm::EventKind::MutantBirth => "mutant_birth",
                ibm::EventKind::Death => "death",
            };
            w.serialize((e.t, kind, e.index, e.x, e.u, e.child_u))?;
        }
        w.flush()?;
    }
    write_json(
        out,
        "ibm.json",
        &serde_json::json!({
            "stop": log.stop,
            "t": pop.time,
            "final_size": pop.len(),
            "final_mass": pop.mass(),
            "first_mutation": log.first_mutation,
            "accepted_events": log.accepted,
            "phantom_events": log.phantom,
            "K": k,
            "q_K": q,
        }),
    )?;
    Ok(warnings)
}
