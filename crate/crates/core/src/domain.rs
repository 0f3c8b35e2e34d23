//! Spatial geometry, reflected Brownian motion and finite measures on the
//! spatial domain.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::Interval;

/// Mirror-fold `x` into `domain` (period `2 L` reflection map).
#[inline]
pub fn reflect(x: f64, domain: Interval) -> f64 {
    if domain.contains(x) {
        return x;
    }
    let len = domain.len();
    let y = (x - domain.min).rem_euclid(2.0 * len);
    let folded = if y > len { 2.0 * len - y } else { y };
    (domain.min + folded).clamp(domain.min, domain.max)
}

/// One reflected Euler step of `dX = sqrt(2 m) dB`.
///
/// In one dimension the fold of a free Gaussian increment has exactly the
/// transition law of reflected Brownian motion, whatever the step size.
#[inline]
pub fn brownian_step<R: Rng + ?Sized>(x: f64, m: f64, dt: f64, domain: Interval, rng: &mut R) -> f64 {
    if m == 0.0 || dt == 0.0 {
        return x;
    }
    let z: f64 = rng.sample(StandardNormal);
    reflect(x + (2.0 * m * dt).sqrt() * z, domain)
}

/// Atoms `(location, mass)` of a finite measure on the line.
pub type Atoms = Vec<(f64, f64)>;

/// Trait window `[lo, hi]` selecting particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl TraitWindow {
    pub fn exact(u: f64) -> Self {
        TraitWindow { lo: u, hi: u }
    }

    #[inline]
    pub fn contains(&self, u: f64) -> bool {
        u >= self.lo && u <= self.hi
    }
}

/// `(1/K) sum_i delta_(x_i, u_i)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmpiricalMeasure {
    pub particles: Vec<(f64, f64)>,
    pub k: f64,
}

impl EmpiricalMeasure {
    pub fn new(particles: Vec<(f64, f64)>, k: f64) -> Self {
        EmpiricalMeasure { particles, k }
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.k
    }

    pub fn mass(&self) -> f64 {
        self.particles.len() as f64 / self.k
    }

    /// Spatial marginal of the particles whose trait lies in `filter`.
    pub fn spatial_atoms(&self, filter: Option<TraitWindow>) -> Atoms {
        let w = self.weight();
        self.particles
            .iter()
            .filter(|(_, u)| filter.is_none_or(|f| f.contains(*u)))
            .map(|&(x, _)| (x, w))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "u", "weight"])?;
        let weight = self.weight();
        for &(x, u) in &self.particles {
            w.serialize((x, u, weight))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut particles = Vec::new();
        let mut weight = None;
        for row in r.deserialize() {
            let (x, u, w): (f64, f64, f64) = row?;
            particles.push((x, u));
            weight = Some(w);
        }
        let k = weight.map(|w| 1.0 / w).unwrap_or(1.0);
        Ok(EmpiricalMeasure { particles, k })
    }
}

/// Density values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub grid: Grid,
    pub density: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Grid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.n {
            return Err(Error::Config(format!(
                "density has {} values for a grid of {} nodes",
                density.len(),
                grid.n
            )));
        }
        if let Some(v) = density.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Validation(format!("density value {v} is negative or NaN")));
        }
        Ok(GridMeasure { grid, density })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridMeasure {
            grid,
            density: vec![0.0; grid.n],
        }
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.density)
    }

    /// Node masses placed at the nodes.
    pub fn to_atoms(&self) -> Atoms {
        self.density
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(i, d)| (self.grid.x(i), d * self.grid.weight(i)))
            .collect()
    }

    /// Nodes whose density is at least `fraction` of the peak.
    pub fn support_width(&self, fraction: f64) -> usize {
        let peak = self.density.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return 0;
        }
        self.density.iter().filter(|d| **d >= fraction * peak).count()
    }
}

/// Inverse-CDF sampler for a nonnegative grid function interpolated
/// linearly between nodes.
#[derive(Debug, Clone)]
pub struct GridSampler {
    grid: Grid,
    values: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridSampler {
    pub fn new(grid: Grid, values: &[f64]) -> Result<Self> {
        let h = grid.h();
        let mut cdf = Vec::with_capacity(grid.n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) || values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Degenerate("cannot sample from a density without positive mass".into()));
        }
        Ok(GridSampler {
            grid,
            values: values.to_vec(),
            cdf,
        })
    }

    pub fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.total();
        let j = self.cdf.partition_point(|c| *c <= target).clamp(1, self.grid.n - 1) - 1;
        let (a, b) = (self.values[j], self.values[j + 1]);
        let h = self.grid.h();
        // Cell mass below s*h is h (a s + (b - a) s^2 / 2).
        let r = (target - self.cdf[j]) / h;
        let s = if (b - a).abs() <= 1e-12 * (a + b) {
            if a + b > 0.0 { 2.0 * r / (a + b) } else { 0.5 }
        } else {
            (-a + (a * a + 2.0 * (b - a) * r).max(0.0).sqrt()) / (b - a)
        };
        (self.grid.x(j) + s.clamp(0.0, 1.0) * h).clamp(self.grid.domain.min, self.grid.domain.max)
    }
}

/// Long-format grid rows `(trait, x, density)`.
pub fn write_grid_csv<W: Write>(out: W, blocks: &[(f64, &GridMeasure)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trait", "x", "density"])?;
    for (u, m) in blocks {
        for (i, d) in m.density.iter().enumerate() {
            w.serialize((u, m.grid.x(i), d))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
struct GridRow {
    #[serde(rename = "trait")]
    trait_value: f64,
    x: f64,
    density: f64,
}

/// Read blocks written by [`write_grid_csv`]; every block must be uniform.
pub fn read_grid_csv<R: Read>(input: R) -> Result<Vec<(f64, GridMeasure)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut blocks: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for row in r.deserialize() {
        let row: GridRow = row?;
        match blocks.last_mut() {
            Some((u, xs, ds)) if *u == row.trait_value => {
                xs.push(row.x);
                ds.push(row.density);
            }
            _ => blocks.push((row.trait_value, vec![row.x], vec![row.density])),
        }
    }
    blocks
        .into_iter()
        .map(|(u, xs, ds)| {
            let domain = Interval::new(xs[0], xs[xs.len() - 1])?;
            let grid = Grid::uniform(domain, xs.len())?;
            Ok((u, GridMeasure::new(grid, ds)?))
        })
        .collect()
}

/// Deposit particles on the grid with linear (cloud-in-cell) shape functions.
///
/// Node masses are divided by the trapezoid weights, so the trapezoid
/// integral of the result equals the particle mass.
pub fn empirical_to_grid(emp: &EmpiricalMeasure, grid: Grid, filter: Option<TraitWindow>) -> GridMeasure {
    let atoms = emp.spatial_atoms(filter);
    atoms_to_grid(&atoms, grid)
}

pub fn atoms_to_grid(atoms: &[(f64, f64)], grid: Grid) -> GridMeasure {
    let mut mass = vec![0.0; grid.n];
    for &(x, w) in atoms {
        let (i, t) = grid.locate(x);
        mass[i] += w * (1.0 - t);
        mass[i + 1] += w * t;
    }
    let density = mass
        .iter()
        .enumerate()
        .map(|(i, m)| m / grid.weight(i))
        .collect();
    GridMeasure { grid, density }
}
