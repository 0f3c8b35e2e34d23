//! Model coefficients, their bounds, and the JSON configuration document.
//!
//! A [`ModelSpec`] is built once from a [`ModelConfig`] and never mutated
//! afterwards; every solver and simulator takes it by shared reference.

mod function;
mod kernel;

pub use function::{Axis, FunctionHandle};
pub use kernel::{DiscreteWeights, KernelHandle};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { min: 0.0, max: 1.0 };

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::Validation(format!("invalid interval [{min}, {max}]")));
        }
        Ok(Interval { min, max })
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.max - self.min
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        t >= self.min && t <= self.max
    }

    /// `n` equally spaced points including both ends.
    pub fn linspace(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let step = self.len() / (n.max(2) - 1) as f64;
        (0..n).map(move |i| {
            if i + 1 == n {
                self.max
            } else {
                self.min + i as f64 * step
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalDoc {
    #[serde(rename = "type")]
    pub kind: IntervalKind,
    pub min: f64,
    pub max: f64,
}

impl From<Interval> for IntervalDoc {
    fn from(i: Interval) -> Self {
        IntervalDoc {
            kind: IntervalKind::Interval,
            min: i.min,
            max: i.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    RareMutation,
}

/// Population scale `K` and mutation scale `q_K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaling {
    #[serde(rename = "type")]
    pub kind: ScalingKind,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "q_K")]
    pub q_k: f64,
}

impl Scaling {
    pub fn new(k: u64, q_k: f64) -> Self {
        Scaling {
            kind: ScalingKind::RareMutation,
            k,
            q_k,
        }
    }
}

/// Optional user-declared bounds, checked against samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_min: Option<f64>,
}

/// The configuration document, exactly as it appears in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub domain: IntervalDoc,
    pub trait_space: IntervalDoc,
    pub birth: FunctionHandle,
    pub death: FunctionHandle,
    pub competition: FunctionHandle,
    pub diffusion: FunctionHandle,
    pub mutation_prob: FunctionHandle,
    pub mutation_kernel: KernelHandle,
    pub scaling: Scaling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsDoc>,
}

/// Scalar bounds of the coefficients.
///
/// The maxima are guaranteed bounds (used for thinning); the minima are the
/// sampled minima unless a bound was declared in the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub b_max: f64,
    pub b_min: f64,
    pub d_max: f64,
    pub c_max: f64,
    pub c_min: f64,
    pub m_max: f64,
    pub k_max: f64,
}

/// Informational output of validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Finite-difference estimates of the Lipschitz constant in space.
    pub lipschitz_birth: f64,
    pub lipschitz_death: f64,
    pub lipschitz_competition: f64,
    pub notes: Vec<String>,
}

/// Which coefficient [`ModelSpec::eval`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    Birth,
    Death,
    Competition,
    Diffusion,
    MutationProb,
    MutationKernel,
}

/// Validated model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub domain: Interval,
    pub trait_space: Interval,
    pub birth: FunctionHandle,
    pub death: FunctionHandle,
    pub competition: FunctionHandle,
    pub diffusion: FunctionHandle,
    pub mutation_prob: FunctionHandle,
    pub mutation_kernel: KernelHandle,
    pub scaling: Scaling,
    pub bounds: Bounds,
    pub report: ValidationReport,
    declared: Option<BoundsDoc>,
}

/// Points per axis when checking invariants by sampling.
pub const SAMPLES_PER_AXIS: usize = 101;

impl ModelSpec {
    pub fn from_config(config: ModelConfig) -> Result<Self> {
        let domain = Interval::new(config.domain.min, config.domain.max)?;
        let trait_space = Interval::new(config.trait_space.min, config.trait_space.max)?;

        for (name, f) in [
            ("birth", &config.birth),
            ("death", &config.death),
            ("competition", &config.competition),
            ("diffusion", &config.diffusion),
            ("mutation_prob", &config.mutation_prob),
        ] {
            f.check_shape(name).map_err(Error::Validation)?;
            f.check_span(name, domain, trait_space).map_err(Error::Validation)?;
        }
        config
            .mutation_kernel
            .check_shape(trait_space)
            .map_err(Error::Validation)?;
        if config.scaling.k == 0 {
            return Err(Error::Validation("scaling: K must be a positive integer".into()));
        }
        if !(0.0..=1.0).contains(&config.scaling.q_k) {
            return Err(Error::Validation(format!(
                "scaling: q_K = {} outside [0, 1]",
                config.scaling.q_k
            )));
        }

        let mut spec = ModelSpec {
            domain,
            trait_space,
            bounds: Bounds {
                b_max: config.birth.upper_bound(domain, trait_space),
                b_min: 0.0,
                d_max: config.death.upper_bound(domain, trait_space),
                c_max: config.competition.upper_bound(domain, trait_space),
                c_min: 0.0,
                m_max: config.diffusion.upper_bound(domain, trait_space),
                k_max: config.mutation_kernel.max_density(trait_space),
            },
            birth: config.birth,
            death: config.death,
            competition: config.competition,
            diffusion: config.diffusion,
            mutation_prob: config.mutation_prob,
            mutation_kernel: config.mutation_kernel,
            scaling: config.scaling,
            report: ValidationReport::default(),
            declared: config.bounds,
        };
        spec.validate_by_sampling()?;
        Ok(spec)
    }

    fn validate_by_sampling(&mut self) -> Result<()> {
        let xs: Vec<f64> = self.domain.linspace(SAMPLES_PER_AXIS).collect();
        let us: Vec<f64> = self.trait_space.linspace(SAMPLES_PER_AXIS).collect();
        let bounds = self.bounds;
        let mut b_min = f64::INFINITY;
        let mut c_min = f64::INFINITY;
        let mut lip = [0.0f64; 3];
        let dx = xs[1] - xs[0];

        for &u in &us {
            let m = self.diffusion.eval(0.0, u, 0.0);
            if !(m > 0.0 && m <= bounds.m_max * (1.0 + 1e-12)) {
                return Err(Error::Validation(format!(
                    "diffusion bound violated: m({u}) = {m} (need 0 < m <= {})",
                    bounds.m_max
                )));
            }
            let mut prev: Option<(f64, f64)> = None;
            for &x in &xs {
                let b = self.birth.eval(x, u, 0.0);
                let d = self.death.eval(x, u, 0.0);
                let p = self.mutation_prob.eval(x, u, 0.0);
                if !(b >= 0.0 && b <= bounds.b_max) {
                    return Err(Error::Validation(format!(
                        "birth bound violated: b({x}, {u}) = {b} (need 0 <= b <= {})",
                        bounds.b_max
                    )));
                }
                if let Some(decl) = self.declared.and_then(|d| d.b_min) {
                    if !(b > decl) {
                        return Err(Error::Validation(format!(
                            "birth lower bound violated: b({x}, {u}) = {b} <= b_min = {decl}"
                        )));
                    }
                }
                if !(d >= 0.0 && d <= bounds.d_max) {
                    return Err(Error::Validation(format!(
                        "death bound violated: d({x}, {u}) = {d} (need 0 <= d <= {})",
                        bounds.d_max
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Validation(format!(
                        "mutation probability bound violated: p({x}, {u}) = {p} outside [0, 1]"
                    )));
                }
                b_min = b_min.min(b);
                if let Some((pb, pd)) = prev {
                    lip[0] = lip[0].max((b - pb).abs() / dx);
                    lip[1] = lip[1].max((d - pd).abs() / dx);
                }
                prev = Some((b, d));
            }
            if let KernelHandle::TruncatedGaussian { sigma } = self.mutation_kernel {
                let n = quadrature_points(sigma, self.trait_space);
                let mass = simpson(|v| self.mutation_kernel.density(0.0, u, v, self.trait_space), self.trait_space, n);
                if (mass - 1.0).abs() > 1e-8 {
                    return Err(Error::Validation(format!(
                        "mutation kernel mass {mass} at u = {u} differs from 1"
                    )));
                }
            }
        }

        for &u in &us {
            for &v in &us {
                let mut prev: Option<f64> = None;
                for &y in &xs {
                    let c = self.competition.eval(y, u, v);
                    if !(c >= 0.0 && c <= bounds.c_max) {
                        return Err(Error::Validation(format!(
                            "competition bound violated: c(u={u}, y={y}, v={v}) = {c} (need 0 <= c <= {})",
                            bounds.c_max
                        )));
                    }
                    c_min = c_min.min(c);
                    if let Some(pc) = prev {
                        lip[2] = lip[2].max((c - pc).abs() / dx);
                    }
                    prev = Some(c);
                }
            }
        }

        self.bounds.b_min = self.declared.and_then(|d| d.b_min).unwrap_or(b_min);
        self.bounds.c_min = c_min;
        self.report.lipschitz_birth = lip[0];
        self.report.lipschitz_death = lip[1];
        self.report.lipschitz_competition = lip[2];
        if b_min <= 0.0 {
            self.report
                .notes
                .push(format!("birth rate reaches {b_min} on the sampling grid"));
        }
        if xs.iter().all(|&x| us.iter().all(|&u| self.death.eval(x, u, 0.0) == 0.0)) {
            self.report.notes.push("death rate is identically zero".into());
        }
        Ok(())
    }

    /// Back to the configuration document.
    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            domain: self.domain.into(),
            trait_space: self.trait_space.into(),
            birth: self.birth.clone(),
            death: self.death.clone(),
            competition: self.competition.clone(),
            diffusion: self.diffusion.clone(),
            mutation_prob: self.mutation_prob.clone(),
            mutation_kernel: self.mutation_kernel.clone(),
            scaling: self.scaling,
            bounds: self.declared,
        }
    }

    /// Same model with a different scaling pair.
    pub fn with_scaling(&self, k: u64, q_k: f64) -> Result<Self> {
        let mut config = self.to_config();
        config.scaling = Scaling::new(k, q_k);
        ModelSpec::from_config(config)
    }

    /// Checked evaluation of one coefficient.
    ///
    /// `args` is `(x, u)` for birth, death and mutation probability,
    /// `(u, y, v)` for competition, `(u)` for diffusion and `(x, u, v)`
    /// for the mutation kernel density.
    pub fn eval(&self, which: Coefficient, args: &[f64]) -> Result<f64> {
        let want = match which {
            Coefficient::Birth | Coefficient::Death | Coefficient::MutationProb => 2,
            Coefficient::Competition | Coefficient::MutationKernel => 3,
            Coefficient::Diffusion => 1,
        };
        if args.len() != want {
            return Err(Error::Config(format!(
                "{which:?} takes {want} arguments, got {}",
                args.len()
            )));
        }
        let space = |what, t: f64| check_in(what, t, self.domain);
        let tr = |what, t: f64| check_in(what, t, self.trait_space);
        Ok(match which {
            Coefficient::Birth => self.birth(space("x", args[0])?, tr("u", args[1])?),
            Coefficient::Death => self.death(space("x", args[0])?, tr("u", args[1])?),
            Coefficient::MutationProb => {
                self.mutation_prob(space("x", args[0])?, tr("u", args[1])?)
            }
            Coefficient::Competition => {
                self.competition(tr("u", args[0])?, space("y", args[1])?, tr("v", args[2])?)
            }
            Coefficient::Diffusion => self.diffusion(tr("u", args[0])?),
            Coefficient::MutationKernel => self.mutation_kernel.density(
                space("x", args[0])?,
                tr("u", args[1])?,
                tr("v", args[2])?,
                self.trait_space,
            ),
        })
    }

    #[inline]
    pub fn birth(&self, x: f64, u: f64) -> f64 {
        self.birth.eval(x, u, 0.0)
    }

    #[inline]
    pub fn death(&self, x: f64, u: f64) -> f64 {
        self.death.eval(x, u, 0.0)
    }

    /// `c(u, y, v)`: pressure exerted by `(y, v)` on an individual of trait `u`.
    #[inline]
    pub fn competition(&self, u: f64, y: f64, v: f64) -> f64 {
        self.competition.eval(y, u, v)
    }

    #[inline]
    pub fn diffusion(&self, u: f64) -> f64 {
        self.diffusion.eval(0.0, u, 0.0)
    }

    #[inline]
    pub fn mutation_prob(&self, x: f64, u: f64) -> f64 {
        self.mutation_prob.eval(x, u, 0.0)
    }
}

fn check_in(what: &'static str, t: f64, dom: Interval) -> Result<f64> {
    if dom.contains(t) {
        Ok(t)
    } else {
        Err(Error::Domain {
            what,
            value: t,
            lo: dom.min,
            hi: dom.max,
        })
    }
}

/// Odd Simpson point count resolving a Gaussian of width `sigma`.
fn quadrature_points(sigma: f64, dom: Interval) -> usize {
    let n = ((60.0 * dom.len() / sigma).ceil() as usize).clamp(2000, 200_000);
    n | 1
}

fn simpson(f: impl Fn(f64) -> f64, dom: Interval, n: usize) -> f64 {
    let h = dom.len() / (n - 1) as f64;
    let mut s = f(dom.min) + f(dom.max);
    for i in 1..n - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(dom.min + i as f64 * h);
    }
    s * h / 3.0
}

/// Parse and validate a JSON configuration document.
pub fn parse_config(text: &str) -> Result<ModelSpec> {
    let config: ModelConfig =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    ModelSpec::from_config(config)
}

/// Pretty JSON rendering that [`parse_config`] reads back.
pub fn render(spec: &ModelSpec) -> String {
    serde_json::to_string_pretty(&spec.to_config()).expect("config serializes")
}
