//! Observation models: how a participant with parameters θ responds to a
//! presented design d.
//!
//! Three models are built in:
//!
//! * **Gap acceptance** — accept/reject a gap of d seconds; acceptance
//!   probability `Φ((d − t_cr)/σ)` with θ = (t_cr, σ), σ > 0.
//! * **Visual psychometric** — detect/miss a stimulus of intensity d;
//!   detection probability `Φ(10^(10^s·(d − b)))` with threshold b and slope
//!   s, which lives in [0.5, 1] by construction.
//! * **Memory retention** — recall count out of a word list after lag d;
//!   each word is retained with probability `a·e^(−b·d)` and the observed
//!   count is binomial over the list size.
//!
//! The [`LikelihoodTensor`] pre-evaluates `p(y | θ, d)` over a parameter grid
//! × design grid × response space, in layouts chosen for the posterior-update
//! and information-gain kernels downstream.

use crate::error::{Error, Result};
use crate::grid::{DesignGrid, ParameterGrid, NORMALIZATION_TOLERANCE};

/// Standard normal CDF via the complementary error function.
///
/// Absolute error is far below 1e-12 across the real line; ±∞ map to the
/// exact limits so extreme psychometric slopes stay well defined.
pub fn standard_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Ordered list of integer response labels a model can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSpace {
    labels: Vec<u32>,
}

impl ResponseSpace {
    /// Binary failure/success labels `{0, 1}`.
    pub fn binary() -> Self {
        ResponseSpace { labels: vec![0, 1] }
    }

    /// Count labels `{0, 1, …, max_count}`.
    pub fn counts(max_count: usize) -> Self {
        ResponseSpace {
            labels: (0..=max_count as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Index of a label, or an out-of-range error.
    pub fn index_of(&self, label: u32) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::ResponseOutOfRange {
                response: label,
                count: self.labels.len(),
            })
    }
}

/// An observation model with two free parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseModel {
    /// θ = (t_cr, σ): accept a gap of d seconds with probability
    /// `Φ((d − t_cr)/σ)`.
    GapAcceptance,
    /// Detect a stimulus of intensity d with probability
    /// `Φ(10^(10^s·(d − b)))`. `threshold_axis` says which θ component is the
    /// threshold b; the other is the slope s.
    VisualPsychometric { threshold_axis: usize },
    /// Recall `y` of `word_count` words after lag d, each retained with
    /// probability `a·e^(−b·d)`; θ = (a, b).
    MemoryRetention { word_count: usize },
}

impl ResponseModel {
    /// Short name used in error messages and file naming.
    pub fn name(&self) -> &'static str {
        match self {
            ResponseModel::GapAcceptance => "gap acceptance",
            ResponseModel::VisualPsychometric { .. } => "visual psychometric",
            ResponseModel::MemoryRetention { .. } => "memory retention",
        }
    }

    /// Expected axis names, in axis order.
    pub fn parameter_names(&self) -> [String; 2] {
        match self {
            ResponseModel::GapAcceptance => ["t_cr".into(), "sigma".into()],
            ResponseModel::VisualPsychometric { threshold_axis } => {
                if *threshold_axis == 0 {
                    ["b".into(), "s".into()]
                } else {
                    ["s".into(), "b".into()]
                }
            }
            ResponseModel::MemoryRetention { .. } => ["a".into(), "b".into()],
        }
    }

    /// The response space this model draws from.
    pub fn response_space(&self) -> ResponseSpace {
        match self {
            ResponseModel::GapAcceptance | ResponseModel::VisualPsychometric { .. } => {
                ResponseSpace::binary()
            }
            ResponseModel::MemoryRetention { word_count } => ResponseSpace::counts(*word_count),
        }
    }

    /// Per-trial (binary models) or per-word (memory) success probability.
    pub fn success_probability(&self, theta: &[f64], design: f64) -> Result<f64> {
        if theta.len() != 2 {
            return Err(Error::LengthMismatch {
                what: "model parameters",
                expected: 2,
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) || !design.is_finite() {
            return Err(Error::Domain {
                model: self.name(),
                reason: format!("non-finite parameters {theta:?} or design {design}"),
            });
        }
        match self {
            ResponseModel::GapAcceptance => {
                let (t_cr, sigma) = (theta[0], theta[1]);
                if sigma <= 0.0 {
                    return Err(Error::Domain {
                        model: self.name(),
                        reason: format!("sigma must be positive, got {sigma}"),
                    });
                }
                Ok(standard_normal_cdf((design - t_cr) / sigma))
            }
            ResponseModel::VisualPsychometric { threshold_axis } => {
                let b = theta[*threshold_axis];
                let s = theta[1 - *threshold_axis];
                // 10^(10^s·(d−b)); overflow to +∞ gives Φ(∞)=1, underflow to
                // 0 gives Φ(0)=0.5, both the correct limits.
                let arg = 10f64.powf(10f64.powf(s) * (design - b));
                Ok(standard_normal_cdf(arg))
            }
            ResponseModel::MemoryRetention { .. } => {
                let (a, b) = (theta[0], theta[1]);
                let p = a * (-b * design).exp();
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain {
                        model: self.name(),
                        reason: format!(
                            "retention probability {p} outside [0, 1] at a={a}, b={b}, lag={design}"
                        ),
                    });
                }
                Ok(p)
            }
        }
    }

    /// Probability of one particular response label.
    pub fn likelihood(&self, theta: &[f64], design: f64, response: u32) -> Result<f64> {
        let space = self.response_space();
        let index = space.index_of(response)?;
        Ok(self.response_pmf(theta, design)?[index])
    }

    /// Full response pmf at (θ, d), in response-space order. Sums to one
    /// within a few ulps.
    pub fn response_pmf(&self, theta: &[f64], design: f64) -> Result<Vec<f64>> {
        let p = self.success_probability(theta, design)?;
        match self {
            ResponseModel::GapAcceptance | ResponseModel::VisualPsychometric { .. } => {
                Ok(vec![1.0 - p, p])
            }
            ResponseModel::MemoryRetention { word_count } => Ok(binomial_pmf(*word_count, p)),
        }
    }
}

/// Binomial pmf over `0..=n` successes with per-trial probability `p`.
///
/// Degenerate `p` gives exact point masses; otherwise terms are computed in
/// log space, which keeps tails accurate and the total within 1e-12 of one.
fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let (ln_p, ln_q) = (p.ln(), (1.0 - p).ln());
    let mut ln_choose = 0.0;
    for (k, slot) in pmf.iter_mut().enumerate() {
        if k > 0 {
            // ln C(n,k) = ln C(n,k−1) + ln((n−k+1)/k)
            ln_choose += ((n - k + 1) as f64 / k as f64).ln();
        }
        *slot = (ln_choose + k as f64 * ln_p + (n - k) as f64 * ln_q).exp();
    }
    pmf
}

/// Pre-evaluated likelihoods `p(y | θ_i, d_j)` over a grid, a design list,
/// and a response space.
///
/// Storage is branch-major (`[design][response][point]`) because posterior
/// updates and predictive sums walk all points for one (design, response)
/// pair. A per-(point, design) sum `Σ_y p·ln p` is cached for the
/// information-gain kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTensor {
    n_points: usize,
    n_designs: usize,
    n_responses: usize,
    /// `branch_major[(j·n_y + k)·n_p + i] = p(y_k | θ_i, d_j)`
    branch_major: Vec<f64>,
    /// `plogp[j·n_p + i] = Σ_k p(y_k|θ_i,d_j)·ln p(y_k|θ_i,d_j)` (≤ 0)
    plogp: Vec<f64>,
}

impl LikelihoodTensor {
    /// Evaluates the model over `grid × designs × response space`.
    pub fn build(
        model: &ResponseModel,
        grid: &ParameterGrid,
        designs: &DesignGrid,
    ) -> Result<Self> {
        let space = model.response_space();
        let (n_p, n_d, n_y) = (grid.n_points(), designs.len(), space.len());
        let mut branch_major = vec![0.0; n_p * n_d * n_y];
        let mut plogp = vec![0.0; n_p * n_d];
        for (j, &d) in designs.points().iter().enumerate() {
            for (i, theta) in grid.iter_points().enumerate() {
                let pmf = model.response_pmf(theta, d).map_err(|e| match e {
                    Error::Domain { model, reason } => Error::Domain {
                        model,
                        reason: format!("{reason} (grid point {i}, design index {j})"),
                    },
                    other => other,
                })?;
                let mut s = 0.0;
                for (k, &l) in pmf.iter().enumerate() {
                    branch_major[(j * n_y + k) * n_p + i] = l;
                    if l > 0.0 {
                        s += l * l.ln();
                    }
                }
                plogp[j * n_p + i] = s;
            }
        }
        Ok(LikelihoodTensor {
            n_points: n_p,
            n_designs: n_d,
            n_responses: n_y,
            branch_major,
            plogp,
        })
    }

    /// Builds a tensor from explicit rows `rows[i][j] = pmf over y`, given
    /// point-major flattened as `[i][j][k]`. Each pmf row must be a valid
    /// probability vector. Intended for synthetic instances in verification
    /// batteries.
    pub fn from_rows(
        n_points: usize,
        n_designs: usize,
        n_responses: usize,
        rows: Vec<f64>,
    ) -> Result<Self> {
        if n_points == 0 || n_designs == 0 || n_responses == 0 {
            return Err(Error::EmptyInput {
                what: "tensor dimensions",
            });
        }
        if rows.len() != n_points * n_designs * n_responses {
            return Err(Error::LengthMismatch {
                what: "tensor rows",
                expected: n_points * n_designs * n_responses,
                got: rows.len(),
            });
        }
        let mut branch_major = vec![0.0; rows.len()];
        let mut plogp = vec![0.0; n_points * n_designs];
        for i in 0..n_points {
            for j in 0..n_designs {
                let row = &rows[(i * n_designs + j) * n_responses..][..n_responses];
                let mut sum = 0.0;
                let mut s = 0.0;
                for (k, &l) in row.iter().enumerate() {
                    if !l.is_finite() || !(0.0..=1.0).contains(&l) {
                        return Err(Error::InvalidWeight {
                            index: (i * n_designs + j) * n_responses + k,
                            value: l,
                        });
                    }
                    sum += l;
                    branch_major[(j * n_responses + k) * n_points + i] = l;
                    if l > 0.0 {
                        s += l * l.ln();
                    }
                }
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::NotNormalized {
                        what: "likelihood pmf row",
                        sum,
                    });
                }
                plogp[j * n_points + i] = s;
            }
        }
        Ok(LikelihoodTensor {
            n_points,
            n_designs,
            n_responses,
            branch_major,
            plogp,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_designs(&self) -> usize {
        self.n_designs
    }

    pub fn n_responses(&self) -> usize {
        self.n_responses
    }

    /// Single likelihood value `p(y_k | θ_i, d_j)`.
    pub fn likelihood(&self, i: usize, j: usize, k: usize) -> f64 {
        self.branch_major[(j * self.n_responses + k) * self.n_points + i]
    }

    /// All-point slice for one (design, response) branch.
    pub(crate) fn branch(&self, j: usize, k: usize) -> &[f64] {
        &self.branch_major[(j * self.n_responses + k) * self.n_points..][..self.n_points]
    }

    /// All-point slice of `Σ_y p ln p` for one design.
    pub(crate) fn plogp_row(&self, j: usize) -> &[f64] {
        &self.plogp[j * self.n_points..][..self.n_points]
    }
}
