//! Branching diffusion: independent reflected walkers that branch at rate
//! `b(x)` and die at rate `d(x)`, with no competition.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::move_particle;
use crate::error::{Error, Result};
use crate::model::Interval;

/// Spatial rates of a branching diffusion together with their suprema.
pub struct BranchingRates<'a> {
    pub birth: &'a (dyn Fn(f64) -> f64 + Sync),
    pub death: &'a (dyn Fn(f64) -> f64 + Sync),
    pub b_max: f64,
    pub d_max: f64,
}

impl<'a> BranchingRates<'a> {
    /// Bounds taken as the maxima over a fine sample of the domain, padded
    /// slightly so that Lipschitz rates are never exceeded between samples.
    pub fn sampled(birth: &'a (dyn Fn(f64) -> f64 + Sync), death: &'a (dyn Fn(f64) -> f64 + Sync), domain: Interval) -> Self {
        let n = 4097;
        let (mut b_max, mut d_max) = (0.0f64, 0.0f64);
        for x in domain.linspace(n) {
            b_max = b_max.max(birth(x));
            d_max = d_max.max(death(x));
        }
        BranchingRates {
            birth,
            death,
            b_max: b_max * (1.0 + 1e-6) + 1e-12,
            d_max: d_max * (1.0 + 1e-6) + 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Extinct,
    ReachedThreshold,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchingOutcome {
    pub verdict: Verdict,
    pub hitting_time: f64,
    pub peak_size: usize,
    pub final_size: usize,
}

/// One lineage started by a single individual at `x0`, run until
/// extinction, `ceil(epsilon K)` individuals, or `t_max`.
#[allow(clippy::too_many_arguments)]
pub fn run_branching<R: Rng + ?Sized>(
    x0: f64,
    rates: &BranchingRates,
    m: f64,
    domain: Interval,
    k: f64,
    epsilon: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<BranchingOutcome> {
    if !(epsilon * k >= 2.0) {
        return Err(Error::Config(format!("epsilon K must be at least 2, got {}", epsilon * k)));
    }
    if !domain.contains(x0) {
        return Err(Error::Domain {
            what: "x0".into(),
            value: x0,
            lo: domain.min,
            hi: domain.max,
        });
    }
    let threshold = (epsilon * k).ceil() as usize;
    let per_capita = rates.b_max + rates.d_max;
    // (position, time of last update)
    let mut walkers: Vec<(f64, f64)> = vec![(x0, 0.0)];
    let mut t = 0.0f64;
    let mut peak = 1usize;
    loop {
        let n = walkers.len();
        if n == 0 {
            return Ok(BranchingOutcome {
                verdict: Verdict::Extinct,
                hitting_time: t,
                peak_size: peak,
                final_size: 0,
            });
        }
        if n >= threshold {
            return Ok(BranchingOutcome {
                verdict: Verdict::ReachedThreshold,
                hitting_time: t,
                peak_size: peak,
                final_size: n,
            });
        }
        let e: f64 = rng.sample(Exp1);
        let t_new = t + e / (n as f64 * per_capita);
        if t_new > t_max {
            return Ok(BranchingOutcome {
                verdict: Verdict::TimedOut,
                hitting_time: t_max,
                peak_size: peak,
                final_size: n,
            });
        }
        t = if t_new > t { t_new } else { t.next_up() };
        let i = rng.random_range(0..n);
        let (x_old, t_last) = walkers[i];
        let x = move_particle(x_old, m, t - t_last, None, domain, rng);
        walkers[i] = (x, t);
        let draw = rng.random::<f64>() * per_capita;
        let b = (rates.birth)(x);
        if draw < b {
            walkers.push((x, t));
            peak = peak.max(walkers.len());
        } else if draw < b + (rates.death)(x) {
            walkers.swap_remove(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn subcritical_lineages_always_die() {
        let b = |_: f64| 1.0;
        let d = |_: f64| 2.0;
        let rates = BranchingRates::sampled(&b, &d, Interval::UNIT);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let out = run_branching(0.5, &rates, 0.01, Interval::UNIT, 1e4, 0.1, 1e6, &mut rng).unwrap();
            assert_eq!(out.verdict, Verdict::Extinct);
            assert_eq!(out.final_size, 0);
            assert!(out.hitting_time.is_finite());
        }
    }

    #[test]
    fn threshold_is_the_ceiling_of_epsilon_k() {
        let rates = BranchingRates {
            birth: &|_| 5.0,
            death: &|_| 0.0,
            b_max: 5.0,
            d_max: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = run_branching(0.2, &rates, 0.01, Interval::UNIT, 25.0, 0.1, 100.0, &mut rng).unwrap();
        assert_eq!(out.verdict, Verdict::ReachedThreshold);
        assert_eq!(out.final_size, 3);
        assert_eq!(out.peak_size, 3);
    }

    #[test]
    fn tiny_threshold_is_rejected() {
        let b = |_: f64| 2.0;
        let d = |_: f64| 1.0;
        let rates = BranchingRates::sampled(&b, &d, Interval::UNIT);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = run_branching(0.5, &rates, 0.01, Interval::UNIT, 10.0, 0.1, 1.0, &mut rng);
        assert!(matches!(r, Err(Error::Config(_))));
        let r = run_branching(1.5, &rates, 0.01, Interval::UNIT, 1e4, 0.1, 1.0, &mut rng);
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn supercritical_survival_matches_one_minus_d_over_b() {
        let b = |_: f64| 2.0;
        let d = |_: f64| 1.0;
        let rates = BranchingRates::sampled(&b, &d, Interval::UNIT);
        let reps = 4000;
        let hits = (0..reps)
            .filter(|&r| {
                let mut rng = ChaCha8Rng::seed_from_u64(stats::replicate_seed(9, r));
                let out = run_branching(0.5, &rates, 0.01, Interval::UNIT, 1e3, 0.1, 200.0, &mut rng).unwrap();
                out.verdict == Verdict::ReachedThreshold
            })
            .count();
        let p = hits as f64 / reps as f64;
        assert!((p - 0.5).abs() < stats::binomial_halfwidth(0.5, reps as usize, 3.0), "{p}");
    }

    #[test]
    fn timeout_reports_the_horizon() {
        let b = |_: f64| 1.0;
        let d = |_: f64| 1.0;
        let rates = BranchingRates::sampled(&b, &d, Interval::UNIT);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_branching(0.5, &rates, 0.01, Interval::UNIT, 1e6, 0.5, 1e-6, &mut rng).unwrap();
        assert_eq!(out.verdict, Verdict::TimedOut);
        assert_eq!(out.hitting_time, 1e-6);
        assert_eq!(out.final_size, 1);
    }
}
