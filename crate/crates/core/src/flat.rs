//! Bounded-Lipschitz ("flat") distance between finite measures on the line:
//!
//! `d(mu, nu) = sup { |<f, mu - nu>| : |f| <= 1, Lip(f) <= 1 }`.
//!
//! For atomic measures the supremum is a linear program over the values of
//! `f` at the sorted atom locations. In one dimension only neighbouring
//! Lipschitz constraints matter, so the program is solved exactly by a
//! forward sweep over concave piecewise-linear value functions.

use crate::domain::{atoms_to_grid, Atoms};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::Interval;

/// Default cap on the combined number of atoms for the exact solver.
pub const DEFAULT_ATOM_CAP: usize = 2000;

/// Nodes of the common grid used by the coarsening pipeline.
pub const COARSE_NODES: usize = 512;

/// Distance together with a bound on the discretization error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatDistance {
    pub value: f64,
    /// Zero when the atoms were compared exactly.
    pub error_bound: f64,
}

/// Exact distance between two atomic measures.
///
/// Fails with a capacity error when the two supports together hold more
/// than `cap` atoms; use [`flat_distance_coarse`] for large measures.
pub fn flat_distance(mu: &[(f64, f64)], nu: &[(f64, f64)], cap: usize) -> Result<f64> {
    if mu.len() + nu.len() > cap {
        return Err(Error::Capacity(format!(
            "{} atoms exceed the exact flat-distance cap of {cap}; coarsen both measures to a grid first",
            mu.len() + nu.len()
        )));
    }
    let signed = signed_atoms(mu, nu);
    if let Some(v) = equal_mass_shortcut(&signed) {
        return Ok(v);
    }
    Ok(dual_sweep(&signed))
}

/// Exact distance by the dual sweep alone, without the equal-mass shortcut.
pub fn flat_distance_lp(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> f64 {
    dual_sweep(&signed_atoms(mu, nu))
}

/// Distance after depositing both measures on a common grid over `domain`.
///
/// Measures small enough for the exact solver are compared directly.
pub fn flat_distance_coarse(mu: &[(f64, f64)], nu: &[(f64, f64)], domain: Interval) -> Result<FlatDistance> {
    if mu.len() + nu.len() <= DEFAULT_ATOM_CAP {
        return Ok(FlatDistance {
            value: flat_distance(mu, nu, DEFAULT_ATOM_CAP)?,
            error_bound: 0.0,
        });
    }
    let grid = Grid::uniform(domain, COARSE_NODES)?;
    let cm = atoms_to_grid(mu, grid).to_atoms();
    let cn = atoms_to_grid(nu, grid).to_atoms();
    let mass = |a: &[(f64, f64)]| a.iter().map(|p| p.1).sum::<f64>();
    Ok(FlatDistance {
        value: flat_distance(&cm, &cn, 2 * COARSE_NODES)?,
        error_bound: grid.h() * (mass(mu) + mass(nu)),
    })
}

/// `mu - nu` as sorted `(x, signed mass)` with coincident atoms merged.
fn signed_atoms(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut all: Vec<(f64, f64)> = mu
        .iter()
        .copied()
        .chain(nu.iter().map(|&(x, w)| (x, -w)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(all.len());
    for (x, s) in all {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 += s,
            _ => merged.push((x, s)),
        }
    }
    merged
}

/// `int |F_mu - F_nu|` when it is provably the optimum.
fn equal_mass_shortcut(signed: &[(f64, f64)]) -> Option<f64> {
    let (first, last) = (signed.first()?, signed.last()?);
    let net: f64 = signed.iter().map(|p| p.1).sum();
    let scale: f64 = signed.iter().map(|p| p.1.abs()).sum();
    if net.abs() > 1e-12 * scale.max(1.0) || last.0 - first.0 > 2.0 {
        return None;
    }
    // A potential with slopes +-1 spans at most the diameter <= 2, so it
    // can be shifted into the [-1, 1] band.
    let mut cdf = 0.0;
    let mut total = 0.0;
    for w in signed.windows(2) {
        cdf += w[0].1;
        total += cdf.abs() * (w[1].0 - w[0].0);
    }
    Some(total)
}

/// Concave piecewise-linear function on `[-1, 1]`, as breakpoints.
type Pl = Vec<(f64, f64)>;

fn eval_pl(v: &Pl, f: f64) -> f64 {
    let j = v.partition_point(|p| p.0 < f);
    if j == 0 {
        return v[0].1;
    }
    if j == v.len() {
        return v[v.len() - 1].1;
    }
    let (a, b) = (v[j - 1], v[j]);
    a.1 + (b.1 - a.1) * (f - a.0) / (b.0 - a.0)
}

fn push_pl(out: &mut Pl, p: (f64, f64)) {
    if let Some(last) = out.last() {
        if p.0 <= last.0 {
            return;
        }
    }
    out.push(p);
}

/// `W(f) = max { V(f') : |f - f'| <= g, f' in [-1, 1] }` for concave `V`.
fn widen(v: &Pl, g: f64) -> Pl {
    let (k, &(a, vmax)) = v
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .1.total_cmp(&y.1 .1).then(y.0.cmp(&x.0)))
        .expect("nonempty");
    if g >= 2.0 {
        return vec![(-1.0, vmax), (1.0, vmax)];
    }
    let mut out = Vec::with_capacity(v.len() + 3);
    if a - g > -1.0 {
        push_pl(&mut out, (-1.0, eval_pl(v, -1.0 + g)));
        for &(f, val) in &v[..=k] {
            if f - g > -1.0 {
                push_pl(&mut out, (f - g, val));
            }
        }
    } else {
        push_pl(&mut out, (-1.0, vmax));
    }
    if a + g < 1.0 {
        push_pl(&mut out, (a + g, vmax));
        for &(f, val) in &v[k + 1..] {
            if f + g < 1.0 {
                push_pl(&mut out, (f + g, val));
            }
        }
        push_pl(&mut out, (1.0, eval_pl(v, 1.0 - g)));
    } else {
        push_pl(&mut out, (1.0, vmax));
    }
    out
}

/// `max sum_i s_i f_i` subject to `|f_i| <= 1`, `|f_i - f_{i-1}| <= x_i - x_{i-1}`.
fn dual_sweep(signed: &[(f64, f64)]) -> f64 {
    let Some(&(x0, s0)) = signed.first() else {
        return 0.0;
    };
    let mut v: Pl = vec![(-1.0, -s0), (1.0, s0)];
    let mut prev = x0;
    for &(x, s) in &signed[1..] {
        v = widen(&v, x - prev);
        for p in v.iter_mut() {
            p.1 += s * p.0;
        }
        prev = x;
    }
    v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).max(0.0)
}

/// Atoms of a measure given as a list of locations with a common weight.
pub fn uniform_atoms(xs: &[f64], weight: f64) -> Atoms {
    xs.iter().map(|&x| (x, weight)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn unit_atoms_cost_their_distance() {
        let d = flat_distance(&[(0.2, 1.0)], &[(0.7, 1.0)], DEFAULT_ATOM_CAP).unwrap();
        assert!(close(d, 0.5), "{d}");
        assert!(close(flat_distance_lp(&[(0.2, 1.0)], &[(0.7, 1.0)]), 0.5));
    }

    #[test]
    fn far_unit_atoms_cost_two() {
        assert!(close(flat_distance_lp(&[(0.0, 1.0)], &[(5.0, 1.0)]), 2.0));
    }

    #[test]
    fn mass_difference_costs_the_difference() {
        let d = flat_distance(&[(0.5, 1.0)], &[(0.5, 2.0)], DEFAULT_ATOM_CAP).unwrap();
        assert!(close(d, 1.0), "{d}");
    }

    #[test]
    fn destruction_beats_transport_when_cheaper() {
        // Moving mass 1 over distance 1.5 costs 1.5, but creating and
        // destroying it costs 2; a small atom far away is better destroyed.
        let d = flat_distance_lp(&[(0.0, 0.3)], &[(3.0, 0.3)]);
        assert!(close(d, 0.6), "{d}");
    }

    #[test]
    fn cap_is_enforced() {
        let mu: Atoms = (0..1500).map(|i| (i as f64 / 1500.0, 1e-3)).collect();
        let err = flat_distance(&mu, &mu, DEFAULT_ATOM_CAP).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        assert!(err.to_string().contains("coarsen"));
    }

    #[test]
    fn coarse_pipeline_reports_its_error_bound() {
        let mu: Atoms = (0..3000).map(|i| (i as f64 / 3000.0, 1e-3)).collect();
        let nu: Atoms = (0..3000).map(|i| ((i as f64 + 0.5) / 3000.0, 1e-3)).collect();
        let d = flat_distance_coarse(&mu, &nu, Interval::UNIT).unwrap();
        let h = 1.0 / (COARSE_NODES - 1) as f64;
        assert!((d.error_bound - 6.0 * h).abs() < 1e-12);
        assert!(d.value <= 3.0 * (0.5 / 3000.0) + d.error_bound);
    }

    proptest! {
        #[test]
        fn identical_measures_are_at_distance_zero(
            atoms in proptest::collection::vec((0.0f64..1.0, 0.0f64..2.0), 0..20)
        ) {
            prop_assert!(flat_distance_lp(&atoms, &atoms).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_bounded_by_total_mass(
            mu in proptest::collection::vec((-1.0f64..3.0, 0.0f64..1.0), 0..12),
            nu in proptest::collection::vec((-1.0f64..3.0, 0.0f64..1.0), 0..12),
        ) {
            let a = flat_distance_lp(&mu, &nu);
            let b = flat_distance_lp(&nu, &mu);
            prop_assert!(close(a, b));
            let total: f64 = mu.iter().chain(&nu).map(|p| p.1).sum();
            prop_assert!(a <= total + 1e-12);
        }

        #[test]
        fn triangle_inequality(
            a in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8),
            b in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8),
            c in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8),
        ) {
            let ab = flat_distance_lp(&a, &b);
            let bc = flat_distance_lp(&b, &c);
            let ac = flat_distance_lp(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn equal_masses_are_bounded_by_transport_cost(
            xs in proptest::collection::vec(0.0f64..1.0, 1..10),
            ys in proptest::collection::vec(0.0f64..1.0, 1..10),
        ) {
            // Rescale both to unit mass and compare to the CDF integral.
            let mu = uniform_atoms(&xs, 1.0 / xs.len() as f64);
            let nu = uniform_atoms(&ys, 1.0 / ys.len() as f64);
            let lp = flat_distance_lp(&mu, &nu);
            let mut pts: Vec<(f64, f64)> = mu.iter().copied()
                .chain(nu.iter().map(|&(x, w)| (x, -w))).collect();
            pts.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut cdf = 0.0;
            let mut w1 = 0.0;
            for w in pts.windows(2) {
                cdf += w[0].1;
                w1 += cdf.abs() * (w[1].0 - w[0].0);
            }
            prop_assert!(lp <= w1 + 1e-12);
            // On a set of diameter <= 1 the band constraint is inactive.
            prop_assert!((lp - w1).abs() <= 1e-9);
        }
    }
}
