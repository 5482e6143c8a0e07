//! Design-selection strategies over a likelihood tensor.
//!
//! The single-trial utility of a design is the mutual information between the
//! parameters and the response, in nats, under the current posterior. On top
//! of that this module provides:
//!
//! * [`myopic_design`] — argmax of the single-trial utility curve;
//! * [`bellman_solve`] — exact finite-horizon lookahead by backward
//!   induction, returning a response-contingent [`PolicyTree`] that maximizes
//!   the expected (optionally discounted) utility sum over the horizon;
//! * [`step_ahead_design`] — root design of that tree, for strategies that
//!   re-solve every trial;
//! * [`policy_walk`] — descend a tree along observed responses.
//!
//! Lookahead cost grows as `(|D|·|Y|)^T`; [`bellman_solve`] refuses instances
//! whose evaluation tree exceeds a node budget rather than approximating.
//! The last two lookahead levels are evaluated by a batched kernel
//! ([`two_step_scan`]) that works on the posterior's numerically relevant
//! support; neglected weight is below 1e-18 of the maximum, far inside every
//! tolerance this crate promises. Stored distributions are never truncated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{entropy_of, GridDistribution};
use crate::models::LikelihoodTensor;

/// Default cap on lookahead evaluation-tree nodes.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Relative support cutoff used inside the batched two-step kernel.
const SUPPORT_CUTOFF_REL: f64 = 1e-18;

/// How many future trials a lookahead covers, and how strongly later trials
/// are discounted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonSpec {
    lookahead: usize,
    discount: f64,
}

impl HorizonSpec {
    pub fn new(lookahead: usize, discount: f64) -> Result<Self> {
        if lookahead == 0 {
            return Err(Error::InvalidConfig {
                field: "lookahead".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !(discount > 0.0 && discount <= 1.0) || !discount.is_finite() {
            return Err(Error::InvalidConfig {
                field: "discount".into(),
                reason: format!("must be in (0, 1], got {discount}"),
            });
        }
        Ok(HorizonSpec {
            lookahead,
            discount,
        })
    }

    /// Single-trial horizon with no discounting.
    pub fn myopic() -> Self {
        HorizonSpec {
            lookahead: 1,
            discount: 1.0,
        }
    }

    pub fn lookahead(&self) -> usize {
        self.lookahead
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }
}

/// Design-selection strategy for a simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Pick the argmax of the single-trial utility curve every trial.
    Myopic,
    /// Re-solve the T-trial lookahead every trial and execute only the root
    /// design.
    TStepAhead,
    /// Solve the T-trial lookahead every T trials and execute the whole
    /// policy tree, descending along observed responses.
    GlobalTStep,
}

impl Strategy {
    /// Stable lowercase name used in file names and CSV columns.
    pub fn slug(&self) -> &'static str {
        match self {
            Strategy::Myopic => "myopic",
            Strategy::TStepAhead => "t_step_ahead",
            Strategy::GlobalTStep => "global_t_step",
        }
    }
}

/// Response-contingent plan produced by [`bellman_solve`].
///
/// `children[k]` is the subtree to follow after observing response index `k`
/// at this node's design; it is `None` exactly when that response has zero
/// predictive probability (no posterior exists down that branch). Leaves have
/// an empty `children` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTree {
    /// Design index to run at this node.
    pub design: usize,
    /// Expected utility-to-go from this node's posterior.
    pub value: f64,
    pub children: Vec<Option<PolicyTree>>,
}

impl PolicyTree {
    /// Number of decision levels below and including this node.
    pub fn depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .flatten()
            .map(PolicyTree::depth)
            .max()
            .unwrap_or(0)
    }
}

fn check_dist(tensor: &LikelihoodTensor, dist: &GridDistribution) -> Result<()> {
    if dist.len() != tensor.n_points() {
        return Err(Error::LengthMismatch {
            what: "distribution vs. likelihood tensor",
            expected: tensor.n_points(),
            got: dist.len(),
        });
    }
    Ok(())
}

fn check_design(tensor: &LikelihoodTensor, j: usize) -> Result<()> {
    if j >= tensor.n_designs() {
        return Err(Error::IndexOutOfRange {
            what: "design",
            index: j,
            len: tensor.n_designs(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Mutual information between parameters and response for one design, plus
/// the predictive response pmf, in one pass over the full support.
fn mi_and_predictive(tensor: &LikelihoodTensor, w: &[f64], j: usize) -> (f64, Vec<f64>) {
    let ny = tensor.n_responses();
    let mut pred = vec![0.0; ny];
    for (k, slot) in pred.iter_mut().enumerate() {
        *slot = dot(w, tensor.branch(j, k));
    }
    let cond = dot(w, tensor.plogp_row(j));
    (cond + entropy_of(&pred), pred)
}

/// Marginal response pmf `p(y | d_j)` under the given parameter distribution.
pub fn predictive_pmf(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    j: usize,
) -> Result<Vec<f64>> {
    check_dist(tensor, dist)?;
    check_design(tensor, j)?;
    let w = dist.weights();
    Ok((0..tensor.n_responses())
        .map(|k| dot(w, tensor.branch(j, k)))
        .collect())
}

/// Expected information gain (mutual information, in nats) of design `j`
/// under the given parameter distribution.
pub fn mutual_information(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    j: usize,
) -> Result<f64> {
    check_dist(tensor, dist)?;
    check_design(tensor, j)?;
    Ok(mi_and_predictive(tensor, dist.weights(), j).0)
}

/// Posterior update after observing response index `k` at design `j`.
///
/// Fails with an impossible-observation error when the predictive
/// probability of that response is exactly zero.
pub fn bayes_update(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    j: usize,
    k: usize,
) -> Result<GridDistribution> {
    check_dist(tensor, dist)?;
    check_design(tensor, j)?;
    if k >= tensor.n_responses() {
        return Err(Error::IndexOutOfRange {
            what: "response",
            index: k,
            len: tensor.n_responses(),
        });
    }
    let posterior = raw_update(tensor, dist.weights(), j, k).ok_or(
        Error::ImpossibleObservation {
            design_index: j,
            response_index: k,
            trial: None,
        },
    )?;
    Ok(GridDistribution::from_normalized(posterior))
}

/// Unchecked update on raw weights; `None` when the evidence is zero.
fn raw_update(tensor: &LikelihoodTensor, w: &[f64], j: usize, k: usize) -> Option<Vec<f64>> {
    let branch = tensor.branch(j, k);
    let evidence = dot(w, branch);
    if evidence <= 0.0 {
        return None;
    }
    let inv = 1.0 / evidence;
    Some(
        w.iter()
            .zip(branch)
            .map(|(wi, li)| wi * li * inv)
            .collect(),
    )
}

/// Single-trial utility (mutual information) of every design.
pub fn utility_curve(tensor: &LikelihoodTensor, dist: &GridDistribution) -> Result<Vec<f64>> {
    check_dist(tensor, dist)?;
    let w = dist.weights();
    Ok((0..tensor.n_designs())
        .map(|j| mi_and_predictive(tensor, w, j).0)
        .collect())
}

/// Index of the largest value; ties break toward the lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_v = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    (best, best_v)
}

/// Design with the highest single-trial utility (lowest index on ties).
pub fn myopic_design(tensor: &LikelihoodTensor, dist: &GridDistribution) -> Result<usize> {
    let curve = utility_curve(tensor, dist)?;
    Ok(argmax_lowest(&curve).0)
}

/// Everything the last two lookahead levels need, computed in one batched
/// sweep: per-design immediate utility, predictive pmfs, and for every
/// (design, response) branch the best follow-up design with its utility.
#[derive(Debug, Clone)]
pub(crate) struct TwoStepScan {
    /// Immediate utility per design.
    pub immediate: Vec<f64>,
    /// `Σ_y p(y|d)·max_d' u(d' | posterior)` per design, undiscounted.
    pub expected_next: Vec<f64>,
    /// Predictive pmf, `[design·n_y + response]`.
    pub predictive: Vec<f64>,
    /// Best follow-up design per branch (0 where the branch is impossible).
    pub best_next: Vec<usize>,
    /// Utility of that follow-up design per branch.
    pub best_next_value: Vec<f64>,
}

/// Batched evaluation of a full two-trial lookahead from the distribution
/// `w`. All branch posteriors are materialized over the numerically relevant
/// support and pushed through tiled dot-product kernels, which is what makes
/// repeated lookahead affordable at realistic grid sizes.
pub(crate) fn two_step_scan(tensor: &LikelihoodTensor, w: &[f64]) -> TwoStepScan {
    let np = tensor.n_points();
    let nd = tensor.n_designs();
    let ny = tensor.n_responses();
    let nb = nd * ny;

    // Numerically relevant support of w.
    let w_max = w.iter().cloned().fold(0.0, f64::max);
    let cutoff = w_max * SUPPORT_CUTOFF_REL;
    let active: Vec<usize> = (0..np).filter(|&i| w[i] > cutoff).collect();
    let na = active.len();

    // Compact weights, likelihood branches, and Σ p·ln p rows onto it.
    let mut wa = vec![0.0; na];
    for (slot, &i) in wa.iter_mut().zip(&active) {
        *slot = w[i];
    }
    let mut la = vec![0.0; nb * na];
    for b in 0..nb {
        let src = tensor.branch(b / ny, b % ny);
        let dst = &mut la[b * na..][..na];
        for (slot, &i) in dst.iter_mut().zip(&active) {
            *slot = src[i];
        }
    }
    let mut sa = vec![0.0; nd * na];
    for j in 0..nd {
        let src = tensor.plogp_row(j);
        let dst = &mut sa[j * na..][..na];
        for (slot, &i) in dst.iter_mut().zip(&active) {
            *slot = src[i];
        }
    }

    // Immediate utilities and predictive pmfs.
    let mut immediate = vec![0.0; nd];
    let mut predictive = vec![0.0; nb];
    for j in 0..nd {
        let cond = dot(&wa, &sa[j * na..][..na]);
        let mut h = 0.0;
        for k in 0..ny {
            let m = dot(&wa, &la[(j * ny + k) * na..][..na]);
            predictive[j * ny + k] = m;
            if m > 0.0 {
                h -= m * m.ln();
            }
        }
        immediate[j] = cond + h;
    }

    // Branch posteriors (rows of zeros where a branch is impossible).
    let mut post = vec![0.0; nb * na];
    for b in 0..nb {
        let m = predictive[b];
        if m > 0.0 {
            let inv = 1.0 / m;
            let row = &la[b * na..][..na];
            let dst = &mut post[b * na..][..na];
            for i in 0..na {
                dst[i] = wa[i] * row[i] * inv;
            }
        }
    }

    // For every branch posterior: conditional terms against every follow-up
    // design, and predictive masses for every follow-up branch.
    let mut acc = vec![0.0; nb * nd];
    block_dots(&post, nb, &sa, nd, na, &mut acc);
    let mut pred2 = vec![0.0; nb * nb];
    block_dots(&post, nb, &la, nb, na, &mut pred2);

    // Pick the best follow-up per branch and fold into expectations.
    let mut expected_next = vec![0.0; nd];
    let mut best_next = vec![0usize; nb];
    let mut best_next_value = vec![0.0; nb];
    for j in 0..nd {
        let mut en = 0.0;
        for k in 0..ny {
            let b = j * ny + k;
            if predictive[b] <= 0.0 {
                continue;
            }
            let acc_row = &acc[b * nd..][..nd];
            let pred_row = &pred2[b * nb..][..nb];
            let mut best_j = 0;
            let mut best_v = f64::NEG_INFINITY;
            for j2 in 0..nd {
                let mut h = 0.0;
                for &m in &pred_row[j2 * ny..(j2 + 1) * ny] {
                    if m > 0.0 {
                        h -= m * m.ln();
                    }
                }
                let v = acc_row[j2] + h;
                if v > best_v {
                    best_v = v;
                    best_j = j2;
                }
            }
            best_next[b] = best_j;
            best_next_value[b] = best_v;
            en += predictive[b] * best_v;
        }
        expected_next[j] = en;
    }

    TwoStepScan {
        immediate,
        expected_next,
        predictive,
        best_next,
        best_next_value,
    }
}

/// `out[ra·n_b + rb] = dot(a_row_ra, b_row_rb)` for row-major `a` and `b`.
///
/// `b` is repacked into four-row panels so the inner kernel reads one
/// contiguous vector of four `b` values per step instead of gathering from
/// four strided rows, and `a` rows are tiled four at a time. Each of the
/// sixteen accumulators in a tile sums in ascending index order, keeping
/// every entry bit-identical to a plain [`dot`] of the same rows.
fn block_dots(a: &[f64], n_a: usize, b: &[f64], n_b: usize, len: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n_a * n_b);
    const LANES: usize = 4;
    if len == 0 || n_b == 0 {
        out.fill(0.0);
        return;
    }
    let n_panels = n_b.div_ceil(LANES);
    let mut packed = vec![0.0f64; n_panels * len * LANES];
    for (p, panel) in packed.chunks_exact_mut(len * LANES).enumerate() {
        for lane in 0..LANES.min(n_b - p * LANES) {
            let brow = &b[(p * LANES + lane) * len..][..len];
            for (group, &y) in panel.chunks_exact_mut(LANES).zip(brow) {
                group[lane] = y;
            }
        }
    }
    let mut ra = 0;
    while ra + 4 <= n_a {
        let a0 = &a[ra * len..][..len];
        let a1 = &a[(ra + 1) * len..][..len];
        let a2 = &a[(ra + 2) * len..][..len];
        let a3 = &a[(ra + 3) * len..][..len];
        for (p, panel) in packed.chunks_exact(len * LANES).enumerate() {
            let bvs = &panel.as_chunks::<LANES>().0[..len];
            let mut s = [[0.0f64; LANES]; 4];
            for i in 0..len {
                let bv = bvs[i];
                let (x0, x1, x2, x3) = (a0[i], a1[i], a2[i], a3[i]);
                for db in 0..LANES {
                    s[0][db] += x0 * bv[db];
                    s[1][db] += x1 * bv[db];
                    s[2][db] += x2 * bv[db];
                    s[3][db] += x3 * bv[db];
                }
            }
            let cols = LANES.min(n_b - p * LANES);
            for (da, srow) in s.iter().enumerate() {
                out[(ra + da) * n_b + p * LANES..][..cols].copy_from_slice(&srow[..cols]);
            }
        }
        ra += 4;
    }
    while ra < n_a {
        let arow = &a[ra * len..][..len];
        for (p, panel) in packed.chunks_exact(len * LANES).enumerate() {
            let bvs = &panel.as_chunks::<LANES>().0[..len];
            let mut s = [0.0f64; LANES];
            for i in 0..len {
                let bv = bvs[i];
                let x = arow[i];
                for db in 0..LANES {
                    s[db] += x * bv[db];
                }
            }
            let cols = LANES.min(n_b - p * LANES);
            out[ra * n_b + p * LANES..][..cols].copy_from_slice(&s[..cols]);
        }
        ra += 1;
    }
}

/// Number of posterior nodes a full lookahead evaluation visits.
fn eval_node_count(nd: usize, ny: usize, lookahead: usize) -> u128 {
    let branch = (nd as u128).saturating_mul(ny as u128);
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..lookahead {
        total = total.saturating_add(level);
        level = level.saturating_mul(branch);
    }
    total
}

/// Exact finite-horizon lookahead with the default node budget.
pub fn bellman_solve(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    horizon: &HorizonSpec,
) -> Result<PolicyTree> {
    bellman_solve_with_budget(tensor, dist, horizon, DEFAULT_NODE_BUDGET)
}

/// Exact finite-horizon lookahead by backward induction.
///
/// Maximizes `E[Σ_t γ^t u(d_t)]` over all response-contingent policies of
/// the given horizon and returns the maximizing policy tree; no sampling or
/// truncation is involved beyond floating point. Instances whose evaluation
/// tree exceeds `budget` nodes are refused.
pub fn bellman_solve_with_budget(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    horizon: &HorizonSpec,
    budget: u64,
) -> Result<PolicyTree> {
    check_dist(tensor, dist)?;
    let nodes = eval_node_count(tensor.n_designs(), tensor.n_responses(), horizon.lookahead());
    if nodes > budget as u128 {
        return Err(Error::BudgetExceeded {
            nodes,
            budget,
        });
    }
    Ok(solve_rec(
        tensor,
        dist.weights(),
        horizon.lookahead(),
        horizon.discount(),
    ))
}

fn solve_rec(tensor: &LikelihoodTensor, w: &[f64], remaining: usize, discount: f64) -> PolicyTree {
    let ny = tensor.n_responses();
    match remaining {
        1 => {
            let curve: Vec<f64> = (0..tensor.n_designs())
                .map(|j| mi_and_predictive(tensor, w, j).0)
                .collect();
            let (design, value) = argmax_lowest(&curve);
            PolicyTree {
                design,
                value,
                children: Vec::new(),
            }
        }
        2 => {
            let scan = two_step_scan(tensor, w);
            let totals: Vec<f64> = scan
                .immediate
                .iter()
                .zip(&scan.expected_next)
                .map(|(imm, en)| imm + discount * en)
                .collect();
            let (design, value) = argmax_lowest(&totals);
            let children = (0..ny)
                .map(|k| {
                    let b = design * ny + k;
                    (scan.predictive[b] > 0.0).then(|| PolicyTree {
                        design: scan.best_next[b],
                        value: scan.best_next_value[b],
                        children: Vec::new(),
                    })
                })
                .collect();
            PolicyTree {
                design,
                value,
                children,
            }
        }
        _ => {
            let mut best: Option<PolicyTree> = None;
            for j in 0..tensor.n_designs() {
                let (mi, pred) = mi_and_predictive(tensor, w, j);
                let mut value = mi;
                let mut children = Vec::with_capacity(ny);
                for (k, &m) in pred.iter().enumerate() {
                    match raw_update(tensor, w, j, k) {
                        Some(posterior) if m > 0.0 => {
                            let child = solve_rec(tensor, &posterior, remaining - 1, discount);
                            value += discount * m * child.value;
                            children.push(Some(child));
                        }
                        _ => children.push(None),
                    }
                }
                let candidate = PolicyTree {
                    design: j,
                    value,
                    children,
                };
                if best.as_ref().is_none_or(|b| candidate.value > b.value) {
                    best = Some(candidate);
                }
            }
            best.expect("tensor has at least one design")
        }
    }
}

/// Root design of the lookahead solution: what a re-solve-every-trial
/// strategy executes next.
pub fn step_ahead_design(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    horizon: &HorizonSpec,
) -> Result<usize> {
    Ok(bellman_solve(tensor, dist, horizon)?.design)
}

/// Designs visited when following `tree` along the observed response
/// indices: the root design, then one more design per response.
pub fn policy_walk(tree: &PolicyTree, observed: &[usize]) -> Result<Vec<usize>> {
    let mut designs = vec![tree.design];
    let mut node = tree;
    for &k in observed {
        if node.children.is_empty() {
            return Err(Error::WalkPastHorizon {
                responses: observed.len(),
                depth: tree.depth(),
            });
        }
        if k >= node.children.len() {
            return Err(Error::IndexOutOfRange {
                what: "response",
                index: k,
                len: node.children.len(),
            });
        }
        node = node.children[k]
            .as_ref()
            .ok_or(Error::ImpossibleObservation {
                design_index: node.design,
                response_index: k,
                trial: None,
            })?;
        designs.push(node.design);
    }
    Ok(designs)
}
