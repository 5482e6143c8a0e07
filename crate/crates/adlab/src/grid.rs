//! Discrete parameter/design grids and probability distributions over them.
//!
//! Parameter space and design space are both finite grids built from linear,
//! endpoint-inclusive axes. A [`GridDistribution`] is a validated probability
//! vector over grid points; posteriors, priors, and predictive weights all use
//! it. Validation happens at construction so the numeric routines can assume
//! well-formed inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks on probability vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// One linearly spaced, endpoint-inclusive axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    /// Axis name; model validation binds parameter roles to these names.
    pub name: String,
    /// Lower endpoint (included).
    pub lo: f64,
    /// Upper endpoint (included).
    pub hi: f64,
    /// Number of points, at least 2.
    pub count: usize,
}

impl AxisSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Result<Self> {
        let spec = AxisSpec {
            name: name.into(),
            lo,
            hi,
            count,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidAxis {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.name.is_empty() {
            return fail("axis name must not be empty");
        }
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return fail("endpoints must be finite");
        }
        if self.lo >= self.hi {
            return fail("lower endpoint must be strictly below upper endpoint");
        }
        if self.count < 2 {
            return fail("need at least 2 points");
        }
        Ok(())
    }

    /// Spacing between adjacent points.
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    /// All points: `lo + i·(hi−lo)/(count−1)` for `i = 0..count`.
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lo + i as f64 * step).collect()
    }
}

/// Cartesian product of parameter axes, row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    axes: Vec<AxisSpec>,
    coords: Vec<f64>,
}

impl ParameterGrid {
    /// Builds the full product grid from the given axes.
    pub fn build(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptyInput {
                what: "parameter axes",
            });
        }
        for axis in &axes {
            axis.validate()?;
        }
        let dim = axes.len();
        let axis_points: Vec<Vec<f64>> = axes.iter().map(AxisSpec::points).collect();
        let n_points: usize = axes.iter().map(|a| a.count).product();
        let mut coords = Vec::with_capacity(n_points * dim);
        let mut index = vec![0usize; dim];
        for _ in 0..n_points {
            for (d, &i) in index.iter().enumerate() {
                coords.push(axis_points[d][i]);
            }
            // Odometer increment, last axis fastest.
            for d in (0..dim).rev() {
                index[d] += 1;
                if index[d] < axes[d].count {
                    break;
                }
                index[d] = 0;
            }
        }
        Ok(ParameterGrid { axes, coords })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn n_points(&self) -> usize {
        self.coords.len() / self.axes.len()
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    /// Coordinates of grid point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let dim = self.dim();
        &self.coords[i * dim..(i + 1) * dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }
}

/// Finite, ascending list of candidate designs.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    points: Vec<f64>,
}

impl DesignGrid {
    /// Builds the design list from a linear axis.
    pub fn from_axis(axis: &AxisSpec) -> Result<Self> {
        axis.validate()?;
        Ok(DesignGrid {
            points: axis.points(),
        })
    }

    /// Builds the design list from explicit points (ascending, distinct).
    /// Unlike axes, a single-design list is allowed here; degenerate design
    /// spaces are useful for exercising the selection machinery.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput {
                what: "design points",
            });
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidAxis {
                    name: "design".into(),
                    reason: format!("points must be ascending and distinct at index {i}"),
                });
            }
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidAxis {
                name: "design".into(),
                reason: "points must be finite".into(),
            });
        }
        Ok(DesignGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn value(&self, j: usize) -> f64 {
        self.points[j]
    }
}

/// A probability distribution over the points of a grid.
///
/// Construction validates that weights are probabilities summing to one
/// within [`NORMALIZATION_TOLERANCE`], so downstream numerics never see an
/// unnormalized vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    weights: Vec<f64>,
}

impl GridDistribution {
    /// Uniform distribution over `n` points.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput {
                what: "distribution support",
            });
        }
        let w = 1.0 / n as f64;
        Ok(GridDistribution {
            weights: vec![w; n],
        })
    }

    /// Validates and wraps an explicit weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput {
                what: "distribution support",
            });
        }
        let mut sum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeight { index: i, value: w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized {
                what: "distribution weights",
                sum,
            });
        }
        Ok(GridDistribution { weights })
    }

    /// Wraps weights already known to be normalized (internal fast path).
    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        debug_assert!(
            (weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "internal distribution not normalized"
        );
        GridDistribution { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shannon entropy in nats, with the `0·ln 0 = 0` convention.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.weights)
    }

    /// Weight-averaged coordinates: the posterior-mean parameter estimate.
    pub fn posterior_mean(&self, grid: &ParameterGrid) -> Result<Vec<f64>> {
        if grid.n_points() != self.weights.len() {
            return Err(Error::LengthMismatch {
                what: "distribution vs. parameter grid",
                expected: grid.n_points(),
                got: self.weights.len(),
            });
        }
        let dim = grid.dim();
        let mut mean = vec![0.0; dim];
        for (w, point) in self.weights.iter().zip(grid.iter_points()) {
            for (m, &x) in mean.iter_mut().zip(point) {
                *m += w * x;
            }
        }
        Ok(mean)
    }
}

/// Entropy in nats of a weight slice, `0·ln 0 = 0`.
pub(crate) fn entropy_of(weights: &[f64]) -> f64 {
    let mut h = 0.0;
    for &w in weights {
        if w > 0.0 {
            h -= w * w.ln();
        }
    }
    h
}

/// Max minus min of a non-empty value list.
pub fn range_width(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput {
            what: "range_width input",
        });
    }
    let mut lo = values[0];
    let mut hi = values[0];
    for &v in &values[1..] {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    Ok(hi - lo)
}
