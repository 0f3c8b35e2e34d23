//! Ready-made models used by the CLI, the demo and the test suites.

use crate::model::{
    Axis, DiscreteWeights, FunctionHandle, Interval, KernelHandle, ModelConfig, ModelSpec,
    Scaling,
};

/// Resident and mutant traits of [`two_trait_world`].
pub const RESIDENT_TRAIT: f64 = 0.2;
pub const MUTANT_TRAIT: f64 = 0.8;

fn build(config: ModelConfig) -> ModelSpec {
    ModelSpec::from_config(config).expect("preset is valid")
}

/// Generalist/specialist niche world: birth `max{4 - 160 u (x-u)^2, 0}`,
/// death 1, competition 10, diffusion 0.003, Gaussian mutations of
/// standard deviation 0.05, `K = 100 000`, `q_K = 1e-5`.
///
/// The mutation probability `p` is taken to be 1.
pub fn niche_gradient() -> ModelSpec {
    build(ModelConfig {
        domain: Interval::UNIT.into(),
        trait_space: Interval::UNIT.into(),
        birth: FunctionHandle::TruncatedParabola { a: 4.0, b: 160.0 },
        death: FunctionHandle::constant(1.0),
        competition: FunctionHandle::constant(10.0),
        diffusion: FunctionHandle::constant(0.003),
        mutation_prob: FunctionHandle::constant(1.0),
        mutation_kernel: KernelHandle::TruncatedGaussian { sigma: 0.05 },
        scaling: Scaling::new(100_000, 1e-5),
        bounds: None,
    })
}

/// Spatially flat logistic world: b = 2, d = 1, c = 10, m = 0.01, p = 0.1.
/// Mutations send the trait to 0.8.
pub fn constant_world() -> ModelSpec {
    build(ModelConfig {
        domain: Interval::UNIT.into(),
        trait_space: Interval::UNIT.into(),
        birth: FunctionHandle::constant(2.0),
        death: FunctionHandle::constant(1.0),
        competition: FunctionHandle::constant(10.0),
        diffusion: FunctionHandle::constant(0.01),
        mutation_prob: FunctionHandle::constant(0.1),
        mutation_kernel: KernelHandle::Discrete {
            traits: vec![MUTANT_TRAIT],
            weights: DiscreteWeights::Shared(vec![1.0]),
        },
        scaling: Scaling::new(10_000, 1e-3),
        bounds: None,
    })
}

/// Flat world whose birth rate depends on the trait only.
///
/// Birth interpolates linearly in `u` through `(resident, b_resident)` and
/// `(mutant, b_mutant)` (constant outside), death is `d`, competition `c`.
/// The mutation kernel swaps the two traits.
pub fn flat_pair_world(
    resident: f64,
    mutant: f64,
    b_resident: f64,
    b_mutant: f64,
    d: f64,
    c: f64,
) -> ModelSpec {
    let (lo, hi, b_lo, b_hi) = if resident < mutant {
        (resident, mutant, b_resident, b_mutant)
    } else {
        (mutant, resident, b_mutant, b_resident)
    };
    let mut grid = vec![lo, hi];
    let mut values = vec![b_lo, b_hi];
    if lo > 0.0 {
        grid.insert(0, 0.0);
        values.insert(0, b_lo);
    }
    if hi < 1.0 {
        grid.push(1.0);
        values.push(b_hi);
    }
    build(ModelConfig {
        domain: Interval::UNIT.into(),
        trait_space: Interval::UNIT.into(),
        birth: FunctionHandle::PiecewiseLinear {
            axis: Axis::U,
            grid,
            values,
        },
        death: FunctionHandle::constant(d),
        competition: FunctionHandle::constant(c),
        diffusion: FunctionHandle::constant(0.01),
        mutation_prob: FunctionHandle::constant(0.1),
        mutation_kernel: KernelHandle::Discrete {
            traits: vec![lo, hi],
            weights: DiscreteWeights::PerParent(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
        },
        scaling: Scaling::new(2_000, 1e-3),
        bounds: None,
    })
}

/// Two-trait world: resident 0.2 with b = 2, mutant 0.8 with b = 3,
/// d = 1, c = 10, p = 0.1, and a kernel sending each trait to the other.
pub fn two_trait_world() -> ModelSpec {
    flat_pair_world(RESIDENT_TRAIT, MUTANT_TRAIT, 2.0, 3.0, 1.0, 10.0)
}

/// Two traits with equal growth but strong self-competition
/// (c = 10 within a trait, 1 across): both invade each other.
pub fn coexistence_world() -> ModelSpec {
    let mut config = two_trait_world().to_config();
    config.birth = FunctionHandle::constant(2.0);
    config.competition = FunctionHandle::TraitTable {
        traits: vec![RESIDENT_TRAIT, MUTANT_TRAIT],
        values: vec![vec![10.0, 1.0], vec![1.0, 10.0]],
    };
    build(config)
}

/// Birth `2 + x`, death 1, diffusion 0.01: a heterogeneous branching world.
pub fn linear_birth_world() -> ModelSpec {
    let mut config = constant_world().to_config();
    config.birth = FunctionHandle::Linear {
        c0: 2.0,
        cx: 1.0,
        cu: 0.0,
        cv: 0.0,
    };
    build(config)
}

/// Look a preset up by its CLI name.
pub fn by_name(name: &str) -> Option<ModelSpec> {
    match name {
        "niche" => Some(niche_gradient()),
        "constant" => Some(constant_world()),
        "two-trait" => Some(two_trait_world()),
        "coexistence" => Some(coexistence_world()),
        "linear-birth" => Some(linear_birth_world()),
        _ => None,
    }
}

pub const PRESET_NAMES: &[&str] = &["niche", "constant", "two-trait", "coexistence", "linear-birth"];
