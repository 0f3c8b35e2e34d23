//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod support;

use std::time::{Duration, Instant};

use evo_tss::domain::GridMeasure;
use evo_tss::flat;
use evo_tss::grid::Grid;
use evo_tss::ibm::branching::BranchingRates;
use evo_tss::ibm::experiments::{self, map_replicates};
use evo_tss::model::Interval;
use evo_tss::presets;
use evo_tss::spectral;
use evo_tss::stats;
use evo_tss::survival;
use evo_tss::tss::{Tss, DEFAULT_TRAIT_ROUND};
use evo_tss::verify;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: &[Criterion] = &[
        ("constant-world analytic suite", Duration::from_secs(1), constant_world),
        ("eigen and survival grid convergence", Duration::from_secs(10), grid_convergence),
        ("survival probability vs branching Monte Carlo", Duration::from_secs(300), survival_cross_validation),
        ("growth-time law", Duration::from_secs(300), growth_time),
        ("fixation probability", Duration::from_secs(600), fixation_probability),
        ("first-mutation law", Duration::from_secs(600), first_mutation_law),
        ("limit PDE consistency", Duration::from_secs(600), pde_consistency),
        ("residence-time monotonicity", Duration::MAX, residence_time),
        ("substitution sequence vs microscopic runs", Duration::MAX, tss_vs_microscopic),
        ("niche-world phenomenology", Duration::MAX, niche_phenomenology),
        ("flat-metric oracle equivalence", Duration::from_secs(10), flat_metric_oracle),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(" / budget {:.0?}", budget)
        };
        println!(
            "{} {name}: {}{} [{:.2?}{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            if in_time { "" } else { " (over time budget)" },
            elapsed,
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn constant_world() -> Outcome {
    let checks = verify::constant_world_suite(512).expect("suite runs");
    let worst = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    let bad: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    outcome(
        bad.is_empty(),
        format!("{} checks, worst relative error {worst:.2e}, failing {bad:?}", checks.len()),
    )
}

fn grid_convergence() -> Outcome {
    let spec = presets::niche_gradient();
    let (u, v) = (0.6, 0.515);
    let ns = [512, 1024, 2048];
    let eigs: Vec<_> = ns.iter().map(|&n| spectral::principal_eigen(&spec, u, n).unwrap()).collect();
    let h: Vec<f64> = eigs.iter().map(|e| e.h).collect();
    let h_ratio = (h[0] - h[1]).abs() / (h[1] - h[2]).abs();
    let phis: Vec<_> = eigs.iter().map(|e| survival::solve_phi_vu(&spec, v, e).unwrap().profile).collect();
    // Compare each profile with the next finer one at the coarser nodes.
    let diff = |a: usize| {
        let (coarse, fine) = (&phis[a], &phis[a + 1]);
        coarse
            .grid
            .nodes()
            .iter()
            .zip(&coarse.phi)
            .map(|(&x, p)| (p - fine.grid.interpolate_cubic(&fine.phi, x)).abs())
            .fold(0.0, f64::max)
    };
    let phi_ratio = diff(0) / diff(1);
    outcome(
        (3.5..=4.5).contains(&h_ratio) && (3.0..=5.0).contains(&phi_ratio),
        format!("H ratio {h_ratio:.3} (want [3.5, 4.5]), phi ratio {phi_ratio:.3} (want [3, 5]); H(2048) = {:.8}", h[2]),
    )
}

fn survival_cross_validation() -> Outcome {
    let birth = |x: f64| 2.0 + x;
    let death = |_: f64| 1.0;
    let m = 0.01;
    let domain = Interval::UNIT;
    let rates = BranchingRates::sampled(&birth, &death, domain);
    let grid = Grid::uniform(domain, 1025).unwrap();
    let b: Vec<f64> = grid.nodes().iter().map(|&x| birth(x)).collect();
    let d = vec![1.0; grid.n];
    let star = survival::solve_phi_star(grid, m, &b, &d).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, x0) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let est = experiments::estimate_survival_mc(x0, &rates, m, domain, 10_000, 1e4, 0.1, 1e3, 100 + j as u64).unwrap();
        let target = star.at(x0);
        let ok = (est.p_hat - target).abs() <= est.halfwidth && est.timed_out == 0;
        pass &= ok;
        parts.push(format!("x0={x0}: MC {:.4} ± {:.4} vs phi* {:.4}", est.p_hat, est.halfwidth, target));
    }
    outcome(pass, parts.join("; "))
}

fn growth_time() -> Outcome {
    let birth = |_: f64| 2.0;
    let death = |_: f64| 1.0;
    let rates = BranchingRates::sampled(&birth, &death, Interval::UNIT);
    let h = 1.0;
    let r = experiments::growth_time_experiment(0.5, &rates, 0.01, Interval::UNIT, &[1e3, 1e4, 1e5], 0.1, 1000, 1e3, 200).unwrap();
    let slope = r.fit.slope;
    outcome(
        (slope - 1.0 / h).abs() <= 0.2 / h,
        format!(
            "slope {slope:.4} ± {:.4} vs 1/H = {:.1} (means {:?})",
            r.fit.slope_stderr,
            1.0 / h,
            r.points.iter().map(|p| (p.k, (p.mean_hitting_time * 1e3).round() / 1e3)).collect::<Vec<_>>()
        ),
    )
}

fn fixation_probability() -> Outcome {
    let spec = presets::two_trait_world();
    let r = experiments::dimorphic_invasion_experiment(&spec, 0.2, 0.8, 0.5, 5000.0, 2000, 1e4, 128, 300).unwrap();
    let band = stats::binomial_halfwidth(1.0 / 3.0, 2000, 3.0);
    outcome(
        (r.frequency - 1.0 / 3.0).abs() <= band && r.unresolved == 0,
        format!("v fixed in {}/{} = {:.4}, target 1/3 ± {band:.4}", r.fixations, r.replicates, r.frequency),
    )
}

fn first_mutation_law() -> Outcome {
    let spec = presets::constant_world();
    let r = experiments::first_mutation_law_experiment(&spec, 0.2, 2000.0, 1e-3, 500, 1e4, 128, 400).unwrap();
    let p = r.ks_p_value.unwrap_or(0.0);
    outcome(
        p > 0.01 && (r.beta - 0.02).abs() < 1e-9 && r.censored == 0,
        format!(
            "beta {:.6}, KS D = {:.4}, p = {p:.4} (need > 0.01), censored {}",
            r.beta,
            r.ks_statistic.unwrap_or(f64::NAN),
            r.censored
        ),
    )
}

fn pde_consistency() -> Outcome {
    let spec = presets::niche_gradient();
    let grid = Grid::uniform(spec.domain, 513).unwrap();
    let initial = GridMeasure::new(grid, vec![0.5; grid.n]).unwrap();
    let r = experiments::pde_consistency_experiment(&spec, 0.6, &initial, 5000.0, 10, 10.0, 0.01, 500).unwrap();
    let bound = r.distance + r.error_bound;
    outcome(
        bound <= 0.05 * r.pde_mass,
        format!(
            "flat distance {:.5} (+ coarsening bound {:.5}) vs 0.05 x mass = {:.5}; IBM mass {:.4}, PDE mass {:.4}",
            r.distance,
            r.error_bound,
            0.05 * r.pde_mass,
            r.ibm_mass,
            r.pde_mass
        ),
    )
}

fn residence_time() -> Outcome {
    let spec = presets::constant_world();
    let gamma = 0.05 * 0.1;
    let r = experiments::residence_time_experiment(&spec, 0.2, gamma, &[500.0, 1000.0, 2000.0], 20, 100.0, 600).unwrap();
    let medians: Vec<f64> = r.iter().map(|p| p.median).collect();
    outcome(
        medians.windows(2).all(|w| w[1] > w[0]),
        format!("medians over K = 500, 1000, 2000: {medians:.4?}"),
    )
}

fn tss_vs_microscopic() -> Outcome {
    let spec = presets::two_trait_world();
    let tss = Tss::new(&spec, 128, DEFAULT_TRAIT_ROUND).unwrap();
    let runs = 1000;
    let firsts = map_replicates(runs, 700, |_, rng| {
        let traj = tss.simulate(presets::RESIDENT_TRAIT, 1e6, rng)?;
        Ok(traj.jumps.first().map(|j| j.t_jump))
    })
    .unwrap();
    let times: Vec<f64> = firsts.iter().flatten().copied().collect();
    let mean = stats::mean(&times);
    let band = 3.0 * 150.0 / (runs as f64).sqrt();
    let rate_ok = times.len() == runs && (mean - 150.0).abs() <= band;

    let s = experiments::substitution_experiment(&spec, 0.2, 0.8, 2000.0, 1e-3, 100, 1000, 5000.0, 200.0, 0.99, 128, 701).unwrap();
    let sub_ok = s.completed == 100 && s.forward as f64 >= 0.95 * s.completed as f64;
    outcome(
        rate_ok && sub_ok,
        format!(
            "TSS first jump mean {mean:.2} vs 150 ± {band:.2}; microscopic: {} forward, {} reversed of {} completed ({} runs)",
            s.forward, s.reversed, s.completed, s.runs
        ),
    )
}

fn niche_phenomenology() -> Outcome {
    let spec = presets::niche_gradient();
    let r = experiments::figure1_experiment(&spec, 0.5, 0.6, 20_000.0, 1e-4, 5000.0, 20.0, 10.0, &[], 800).unwrap();
    let lower = r.first_substitution_lower();
    let wider = r.support_widened();
    let first = r.substitutions.first();
    let (a, b) = (r.records.first(), r.records.last());
    outcome(
        lower == Some(true) && wider == Some(true),
        format!(
            "first substitution {:?}; support {:?} -> {:?} nodes (traits {:?} -> {:?}); {} substitutions",
            first.map(|s| (s.from, (s.to * 1e4).round() / 1e4)),
            a.map(|x| x.support),
            b.map(|x| x.support),
            a.map(|x| x.dominant),
            b.map(|x| (x.dominant * 1e4).round() / 1e4),
            r.substitutions.len()
        ),
    )
}

fn flat_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let atoms = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
            let n = rng.random_range(1..=10);
            (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>() * 0.5)).collect()
        };
        let mu = atoms(&mut rng);
        let mut nu = atoms(&mut rng);
        // Shared locations exercise cancelling atoms.
        if rng.random::<f64>() < 0.3 {
            nu[0].0 = mu[0].0;
        }
        let fast = flat::flat_distance_lp(&mu, &nu);
        let oracle = support::flat_distance_simplex(&mu, &nu);
        worst = worst.max((fast - oracle).abs());
    }
    outcome(worst <= 1e-9, format!("200 pairs, worst |DP - simplex| = {worst:.2e}"))
}
