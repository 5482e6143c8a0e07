//! Why-does-greedy-work diagnostics.
//!
//! The central quantity is the two-trial decomposition of the lookahead
//! objective: for every candidate design d the immediate utility
//! `u(d | p_t)` and the expected best follow-up utility
//! `Σ_y p(y|d)·max_d' u(d' | posterior after (d, y))`. Their sum is what a
//! two-trial lookahead maximizes; the immediate curve alone is what the
//! myopic rule maximizes. [`UtilityStats`] measures how much the myopic
//! choice gives up ([`UtilityStats::ud`]) in absolute and relative terms.
//!
//! [`brute_force_policy_oracle`] evaluates every response-contingent policy
//! explicitly — exponential, deliberately naive, and entirely independent of
//! the backward-induction solver, which is exactly what makes it a useful
//! cross-check.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::GridDistribution;
use crate::models::LikelihoodTensor;
use crate::strategy::{
    argmax_lowest, bayes_update, mutual_information, predictive_pmf, two_step_scan, HorizonSpec,
};

/// Largest policy count the exhaustive oracle will enumerate.
pub const ORACLE_POLICY_LIMIT: u64 = 1_000_000;

/// Per-design split of the two-trial objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Immediate utility of each design under the current distribution.
    pub immediate: Vec<f64>,
    /// Expected best follow-up utility of each design (undiscounted).
    pub expected_next: Vec<f64>,
}

/// How much a two-trial lookahead beats greedy from the same distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityStats {
    /// Two-trial total of the lookahead-optimal design minus the two-trial
    /// total of the myopic design. Non-negative by construction.
    pub ud: f64,
    /// `ud / myopic_max`, or 0 when the curve is degenerate.
    pub rd: f64,
    /// Best immediate utility (what the myopic rule attains).
    pub myopic_max: f64,
    /// Best two-trial total (what the lookahead attains).
    pub global_value: f64,
    /// True when `myopic_max` is not positive, so `rd` is reported as 0.
    pub degenerate: bool,
}

/// Immediate and expected-follow-up utility curves over all designs.
pub fn two_trial_decomposition(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
) -> Result<Decomposition> {
    if dist.len() != tensor.n_points() {
        return Err(Error::LengthMismatch {
            what: "distribution vs. likelihood tensor",
            expected: tensor.n_points(),
            got: dist.len(),
        });
    }
    let scan = two_step_scan(tensor, dist.weights());
    Ok(Decomposition {
        immediate: scan.immediate,
        expected_next: scan.expected_next,
    })
}

/// Derives [`UtilityStats`] from an already-computed decomposition.
///
/// The myopic design's two-trial total uses the same expected-follow-up curve
/// (greedy continues greedily), so `ud` is an exact max-minus-member
/// difference and can never be negative.
pub fn utility_stats(decomposition: &Decomposition) -> UtilityStats {
    let totals: Vec<f64> = decomposition
        .immediate
        .iter()
        .zip(&decomposition.expected_next)
        .map(|(i, e)| i + e)
        .collect();
    let (_, global_value) = argmax_lowest(&totals);
    let (myopic_index, myopic_max) = argmax_lowest(&decomposition.immediate);
    let ud = global_value - totals[myopic_index];
    let degenerate = !(myopic_max > 0.0);
    let rd = if degenerate { 0.0 } else { ud / myopic_max };
    UtilityStats {
        ud,
        rd,
        myopic_max,
        global_value,
        degenerate,
    }
}

/// Two-trial lookahead-vs-greedy statistics from a distribution.
pub fn utility_difference(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
) -> Result<UtilityStats> {
    Ok(utility_stats(&two_trial_decomposition(tensor, dist)?))
}

/// Expected cumulative utility of the best response-contingent policy,
/// found by enumerating every policy explicitly.
///
/// A policy assigns a design to the root and to every response history
/// shorter than the horizon; there are `|D|^(1 + |Y| + … + |Y|^(T−1))` of
/// them, so this is only viable for toy instances — by design. Instances
/// needing more than [`ORACLE_POLICY_LIMIT`] policies are refused.
pub fn brute_force_policy_oracle(
    tensor: &LikelihoodTensor,
    dist: &GridDistribution,
    horizon: &HorizonSpec,
) -> Result<f64> {
    if dist.len() != tensor.n_points() {
        return Err(Error::LengthMismatch {
            what: "distribution vs. likelihood tensor",
            expected: tensor.n_points(),
            got: dist.len(),
        });
    }
    let nd = tensor.n_designs();
    let ny = tensor.n_responses();
    let t_total = horizon.lookahead();

    // Decision nodes: one per response history of length < T.
    let mut level_start = vec![0usize; t_total + 1];
    let mut level_size: usize = 1;
    for level in 0..t_total {
        level_start[level + 1] = level_start[level] + level_size;
        level_size = level_size.saturating_mul(ny);
    }
    let n_nodes = level_start[t_total];
    let policies = (nd as u128).checked_pow(n_nodes as u32).unwrap_or(u128::MAX);
    if policies > ORACLE_POLICY_LIMIT as u128 {
        return Err(Error::OracleTooLarge {
            policies,
            limit: ORACLE_POLICY_LIMIT,
        });
    }

    fn rollout(
        tensor: &LikelihoodTensor,
        dist: &GridDistribution,
        policy: &[usize],
        level_start: &[usize],
        level: usize,
        node: usize,
        t_total: usize,
        discount: f64,
    ) -> Result<f64> {
        let j = policy[node];
        let mut value = mutual_information(tensor, dist, j)?;
        if level + 1 < t_total {
            let pred = predictive_pmf(tensor, dist, j)?;
            let ny = tensor.n_responses();
            let local = node - level_start[level];
            for (k, &m) in pred.iter().enumerate() {
                if m <= 0.0 {
                    continue;
                }
                let child = level_start[level + 1] + local * ny + k;
                let posterior = bayes_update(tensor, dist, j, k)?;
                value += discount
                    * m
                    * rollout(
                        tensor,
                        &posterior,
                        policy,
                        level_start,
                        level + 1,
                        child,
                        t_total,
                        discount,
                    )?;
            }
        }
        Ok(value)
    }

    let mut policy = vec![0usize; n_nodes];
    let mut best = f64::NEG_INFINITY;
    loop {
        let value = rollout(
            tensor,
            dist,
            &policy,
            &level_start,
            0,
            0,
            t_total,
            horizon.discount(),
        )?;
        if value > best {
            best = value;
        }
        // Odometer over policies, base |D|.
        let mut pos = 0;
        loop {
            if pos == n_nodes {
                return Ok(best);
            }
            policy[pos] += 1;
            if policy[pos] < nd {
                break;
            }
            policy[pos] = 0;
            pos += 1;
        }
    }
}

/// Largest |solver − exhaustive-enumeration| deviation over a battery of
/// random small instances, at every lookahead from 1 to `max_lookahead`.
pub fn oracle_battery(instances: usize, max_lookahead: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (tensor, prior) = random_binary_instance(&mut rng);
        for lookahead in 1..=max_lookahead {
            let horizon = HorizonSpec::new(lookahead, 1.0)?;
            let solved = crate::strategy::bellman_solve(&tensor, &prior, &horizon)?.value;
            let enumerated = brute_force_policy_oracle(&tensor, &prior, &horizon)?;
            worst = worst.max((solved - enumerated).abs());
        }
    }
    Ok(worst)
}

/// A random small binary-response instance for verification batteries:
/// 2–4 parameter points, 1–3 designs, success probabilities uniform on
/// (0, 1), and a random (strictly positive) prior.
pub fn random_binary_instance<R: Rng>(rng: &mut R) -> (LikelihoodTensor, GridDistribution) {
    let n_points = rng.random_range(2..=4);
    let n_designs = rng.random_range(1..=3);
    let mut rows = Vec::with_capacity(n_points * n_designs * 2);
    for _ in 0..n_points * n_designs {
        let p: f64 = rng.random();
        rows.push(1.0 - p);
        rows.push(p);
    }
    let tensor = LikelihoodTensor::from_rows(n_points, n_designs, 2, rows)
        .expect("random rows are valid pmfs");
    let mut weights: Vec<f64> = (0..n_points).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let dist = GridDistribution::new(weights).expect("normalized weights");
    (tensor, dist)
}
