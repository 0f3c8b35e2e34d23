use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Interval;

/// Weights of a discrete mutation kernel: either one law shared by every
/// parent trait, or one row per parent trait (rows indexed like `traits`,
/// the parent is matched to its nearest listed trait).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiscreteWeights {
    Shared(Vec<f64>),
    PerParent(Vec<Vec<f64>>),
}

/// Law of a mutant's trait given the parent's location and trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelHandle {
    /// Gaussian centred on the parent trait, conditioned on the trait space.
    TruncatedGaussian { sigma: f64 },
    /// Atoms at `traits` with the given weights.
    Discrete {
        traits: Vec<f64>,
        weights: DiscreteWeights,
    },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl KernelHandle {
    /// Probability mass of `N(u, sigma^2)` inside the trait space.
    pub fn conditioning_mass(sigma: f64, u: f64, traits: Interval) -> f64 {
        std_normal_cdf((traits.max - u) / sigma) - std_normal_cdf((traits.min - u) / sigma)
    }

    /// Density (or atom weight for discrete kernels) of mutant trait `v`.
    pub fn density(&self, _x: f64, u: f64, v: f64, traits: Interval) -> f64 {
        match self {
            KernelHandle::TruncatedGaussian { sigma } => {
                if v < traits.min || v > traits.max {
                    return 0.0;
                }
                let z = (v - u) / sigma;
                let phi = (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                phi / Self::conditioning_mass(*sigma, u, traits)
            }
            KernelHandle::Discrete { traits: atoms, .. } => {
                let row = self.discrete_row(u).unwrap_or(&[]);
                atoms
                    .iter()
                    .zip(row)
                    .filter(|(a, _)| **a == v)
                    .map(|(_, w)| *w)
                    .sum()
            }
        }
    }

    fn discrete_row(&self, u: f64) -> Option<&[f64]> {
        match self {
            KernelHandle::Discrete { traits, weights } => match weights {
                DiscreteWeights::Shared(w) => Some(w),
                DiscreteWeights::PerParent(rows) => {
                    let idx = nearest(traits, u);
                    Some(&rows[idx])
                }
            },
            _ => None,
        }
    }

    /// Draw a mutant trait for a parent at `(x, u)`.
    pub fn sample<R: Rng + ?Sized>(&self, _x: f64, u: f64, traits: Interval, rng: &mut R) -> f64 {
        match self {
            KernelHandle::TruncatedGaussian { sigma } => loop {
                let z: f64 = rng.sample(StandardNormal);
                let v = u + sigma * z;
                if v >= traits.min && v <= traits.max {
                    return v;
                }
            },
            KernelHandle::Discrete { traits: atoms, .. } => {
                let row = self.discrete_row(u).expect("discrete kernel has rows");
                let total: f64 = row.iter().sum();
                let mut target = rng.random::<f64>() * total;
                for (a, w) in atoms.iter().zip(row) {
                    if target < *w {
                        return *a;
                    }
                    target -= w;
                }
                // Roundoff: return the last atom with positive weight.
                atoms
                    .iter()
                    .zip(row)
                    .rev()
                    .find(|(_, w)| **w > 0.0)
                    .map(|(a, _)| *a)
                    .unwrap_or(u)
            }
        }
    }

    /// Mean mutant trait from parent trait `u`.
    pub fn mean(&self, u: f64, traits: Interval) -> f64 {
        match self {
            KernelHandle::TruncatedGaussian { sigma } => {
                let a = (traits.min - u) / sigma;
                let b = (traits.max - u) / sigma;
                let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let z = std_normal_cdf(b) - std_normal_cdf(a);
                u + sigma * (pdf(a) - pdf(b)) / z
            }
            KernelHandle::Discrete { traits: atoms, .. } => {
                let row = self.discrete_row(u).unwrap_or(&[]);
                atoms.iter().zip(row).map(|(a, w)| a * w).sum()
            }
        }
    }

    /// Upper bound of the kernel density (atom weight for discrete kernels).
    pub fn max_density(&self, traits: Interval) -> f64 {
        match self {
            KernelHandle::TruncatedGaussian { sigma } => {
                // The conditioning mass is smallest at the trait-space ends.
                let z_min = Self::conditioning_mass(*sigma, traits.min, traits)
                    .min(Self::conditioning_mass(*sigma, traits.max, traits));
                1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt() * z_min)
            }
            KernelHandle::Discrete { weights, .. } => match weights {
                DiscreteWeights::Shared(w) => w.iter().copied().fold(0.0, f64::max),
                DiscreteWeights::PerParent(rows) => {
                    rows.iter().flatten().copied().fold(0.0, f64::max)
                }
            },
        }
    }

    pub(crate) fn check_shape(&self, traits: Interval) -> Result<(), String> {
        match self {
            KernelHandle::TruncatedGaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(format!("mutation_kernel: sigma must be positive, got {sigma}"));
                }
                Ok(())
            }
            KernelHandle::Discrete { traits: atoms, weights } => {
                if atoms.is_empty() {
                    return Err("mutation_kernel: discrete kernel needs at least one trait".into());
                }
                if let Some(a) = atoms.iter().find(|a| !traits.contains(**a)) {
                    return Err(format!("mutation_kernel: atom {a} outside the trait space"));
                }
                let rows: Vec<&[f64]> = match weights {
                    DiscreteWeights::Shared(w) => vec![w.as_slice()],
                    DiscreteWeights::PerParent(r) => {
                        if r.len() != atoms.len() {
                            return Err("mutation_kernel: per-parent weights need one row per trait".into());
                        }
                        r.iter().map(|x| x.as_slice()).collect()
                    }
                };
                for row in rows {
                    if row.len() != atoms.len() {
                        return Err("mutation_kernel: weight row length must match traits".into());
                    }
                    if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                        return Err("mutation_kernel: weights must be nonnegative".into());
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-8 {
                        return Err(format!("mutation_kernel: weights sum to {s}, expected 1"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn nearest(points: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if (p - t).abs() < (points[best] - t).abs() {
            best = i;
        }
    }
    best
}
