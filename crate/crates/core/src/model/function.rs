use serde::{Deserialize, Serialize};

use super::Interval;

/// Argument a one-dimensional table interpolates along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Spatial coordinate (`x`, or `y` for the competition kernel).
    X,
    /// Trait of the focal individual.
    U,
    /// Trait of the competitor (competition kernel only).
    V,
}

/// A model coefficient as a function of up to three coordinates.
///
/// Every coefficient is evaluated through [`FunctionHandle::eval`] with the
/// argument triple `(x, u, v)`. Birth, death and mutation probability use
/// `(x, u)`; the competition kernel `c(u, y, v)` is evaluated with `x = y`;
/// diffusion depends on `u` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionHandle {
    Constant {
        value: f64,
    },
    /// `max{A - B*u*(x-u)^2, 0}`
    TruncatedParabola {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
    },
    /// `c0 + cx*x + cu*u + cv*v`
    Linear {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cx: f64,
        #[serde(default)]
        cu: f64,
        #[serde(default)]
        cv: f64,
    },
    /// Piecewise linear interpolation along one axis, constant beyond the ends.
    PiecewiseLinear {
        axis: Axis,
        grid: Vec<f64>,
        values: Vec<f64>,
    },
    /// Bilinear interpolation over `(u, v)` on a square trait grid.
    TraitTable {
        traits: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl FunctionHandle {
    pub fn constant(value: f64) -> Self {
        FunctionHandle::Constant { value }
    }

    #[inline]
    pub fn eval(&self, x: f64, u: f64, v: f64) -> f64 {
        match self {
            FunctionHandle::Constant { value } => *value,
            FunctionHandle::TruncatedParabola { a, b } => {
                let dx = x - u;
                (a - b * u * dx * dx).max(0.0)
            }
            FunctionHandle::Linear { c0, cx, cu, cv } => c0 + cx * x + cu * u + cv * v,
            FunctionHandle::PiecewiseLinear { axis, grid, values } => {
                let t = match axis {
                    Axis::X => x,
                    Axis::U => u,
                    Axis::V => v,
                };
                interp_clamped(grid, values, t)
            }
            FunctionHandle::TraitTable { traits, values } => bilinear(traits, values, u, v),
        }
    }

    /// Whether the value can change with the spatial argument.
    pub fn depends_on_space(&self) -> bool {
        match self {
            FunctionHandle::Constant { .. } | FunctionHandle::TraitTable { .. } => false,
            FunctionHandle::TruncatedParabola { a: _, b } => *b != 0.0,
            FunctionHandle::Linear { cx, .. } => *cx != 0.0,
            FunctionHandle::PiecewiseLinear { axis, .. } => *axis == Axis::X,
        }
    }

    /// A guaranteed upper bound over the box `space x traits x traits`.
    pub fn upper_bound(&self, space: Interval, traits: Interval) -> f64 {
        match self {
            FunctionHandle::Constant { value } => *value,
            FunctionHandle::TruncatedParabola { a, b } => {
                // -B*u*(x-u)^2 <= 0 whenever B*u >= 0 on the trait box.
                if *b * traits.min >= 0.0 && *b * traits.max >= 0.0 {
                    a.max(0.0)
                } else {
                    let reach = (space.max - traits.min)
                        .abs()
                        .max((space.min - traits.max).abs());
                    let worst = b.abs() * traits.min.abs().max(traits.max.abs());
                    (a + worst * reach * reach).max(0.0)
                }
            }
            FunctionHandle::Linear { c0, cx, cu, cv } => {
                c0 + (cx * space.min).max(cx * space.max)
                    + (cu * traits.min).max(cu * traits.max)
                    + (cv * traits.min).max(cv * traits.max)
            }
            FunctionHandle::PiecewiseLinear { values, .. } => {
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
            FunctionHandle::TraitTable { values, .. } => values
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Structural checks that do not need sampling.
    pub(crate) fn check_shape(&self, name: &str) -> Result<(), String> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name}: {what} is not finite"))
            }
        };
        match self {
            FunctionHandle::Constant { value } => finite(*value, "value"),
            FunctionHandle::TruncatedParabola { a, b } => {
                finite(*a, "A")?;
                finite(*b, "B")
            }
            FunctionHandle::Linear { c0, cx, cu, cv } => {
                for (v, w) in [(c0, "c0"), (cx, "cx"), (cu, "cu"), (cv, "cv")] {
                    finite(*v, w)?;
                }
                Ok(())
            }
            FunctionHandle::PiecewiseLinear { grid, values, .. } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(format!(
                        "{name}: piecewise_linear needs matching grid/values of length >= 2"
                    ));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(format!("{name}: piecewise_linear grid must be strictly increasing"));
                }
                values.iter().try_for_each(|v| finite(*v, "table value"))
            }
            FunctionHandle::TraitTable { traits, values } => {
                if traits.is_empty() || values.len() != traits.len() {
                    return Err(format!("{name}: trait_table needs a square table over its traits"));
                }
                if values.iter().any(|row| row.len() != traits.len()) {
                    return Err(format!("{name}: trait_table rows must match the trait count"));
                }
                if traits.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(format!("{name}: trait_table traits must be strictly increasing"));
                }
                values.iter().flatten().try_for_each(|v| finite(*v, "table value"))
            }
        }
    }

    /// Piecewise-linear tables must cover the declared interval of their axis.
    pub(crate) fn check_span(&self, name: &str, space: Interval, traits: Interval) -> Result<(), String> {
        if let FunctionHandle::PiecewiseLinear { axis, grid, .. } = self {
            let dom = if *axis == Axis::X { space } else { traits };
            let (first, last) = (grid[0], grid[grid.len() - 1]);
            if first > dom.min + 1e-12 || last < dom.max - 1e-12 {
                return Err(format!(
                    "{name}: piecewise_linear grid [{first}, {last}] does not span [{}, {}]",
                    dom.min, dom.max
                ));
            }
        }
        Ok(())
    }
}

fn interp_clamped(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let n = grid.len();
    if t <= grid[0] {
        return values[0];
    }
    if t >= grid[n - 1] {
        return values[n - 1];
    }
    let j = grid.partition_point(|&g| g <= t).min(n - 1);
    let (g0, g1) = (grid[j - 1], grid[j]);
    lerp(values[j - 1], values[j], (t - g0) / (g1 - g0))
}

/// Linear interpolation that never leaves `[min(a, b), max(a, b)]`.
#[inline]
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    (a + (b - a) * w).clamp(a.min(b), a.max(b))
}

fn bracket(traits: &[f64], t: f64) -> (usize, usize, f64) {
    let n = traits.len();
    if n == 1 || t <= traits[0] {
        return (0, 0, 0.0);
    }
    if t >= traits[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let j = traits.partition_point(|&g| g <= t).min(n - 1);
    let w = (t - traits[j - 1]) / (traits[j] - traits[j - 1]);
    (j - 1, j, w)
}

fn bilinear(traits: &[f64], values: &[Vec<f64>], u: f64, v: f64) -> f64 {
    let (i0, i1, wu) = bracket(traits, u);
    let (j0, j1, wv) = bracket(traits, v);
    let row = |i: usize| lerp(values[i][j0], values[i][j1], wv);
    lerp(row(i0), row(i1), wu)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Interval = Interval { min: 0.0, max: 1.0 };

    #[test]
    fn truncated_parabola_peaks_on_the_diagonal() {
        let b = FunctionHandle::TruncatedParabola { a: 4.0, b: 160.0 };
        assert_eq!(b.eval(0.6, 0.6, 0.0), 4.0);
        assert_eq!(b.eval(0.0, 0.6, 0.0), 0.0);
        assert_eq!(b.upper_bound(UNIT, UNIT), 4.0);
    }

    #[test]
    fn piecewise_table_interpolates_and_clamps() {
        let f = FunctionHandle::PiecewiseLinear {
            axis: Axis::U,
            grid: vec![0.0, 0.2, 0.8, 1.0],
            values: vec![2.0, 2.0, 3.0, 3.0],
        };
        assert_eq!(f.eval(0.3, 0.2, 0.0), 2.0);
        assert_eq!(f.eval(0.3, 0.8, 0.0), 3.0);
        assert!((f.eval(0.3, 0.5, 0.0) - 2.5).abs() < 1e-15);
        assert_eq!(f.eval(0.0, 1.5, 0.0), 3.0);
        assert!(!f.depends_on_space());
    }

    #[test]
    fn trait_table_hits_its_nodes() {
        let c = FunctionHandle::TraitTable {
            traits: vec![0.2, 0.8],
            values: vec![vec![10.0, 1.0], vec![1.0, 10.0]],
        };
        assert_eq!(c.eval(0.5, 0.2, 0.2), 10.0);
        assert_eq!(c.eval(0.5, 0.2, 0.8), 1.0);
        assert_eq!(c.eval(0.5, 0.8, 0.2), 1.0);
        assert_eq!(c.upper_bound(UNIT, UNIT), 10.0);
    }

    #[test]
    fn linear_bound_uses_box_corners() {
        let f = FunctionHandle::Linear { c0: 2.0, cx: 1.0, cu: -1.0, cv: 0.0 };
        assert_eq!(f.upper_bound(UNIT, UNIT), 3.0);
    }

    #[test]
    fn unsorted_table_is_rejected() {
        let f = FunctionHandle::PiecewiseLinear {
            axis: Axis::X,
            grid: vec![0.0, 0.5, 0.4],
            values: vec![1.0, 1.0, 1.0],
        };
        assert!(f.check_shape("birth").is_err());
    }
}
