//! Replication campaigns against simulated observers.
//!
//! A [`Campaign`] wires a response model, its parameter/design grids, a true
//! parameter vector, and a design-selection strategy into a reproducible
//! batch of replications. Each replication starts from the uniform prior,
//! alternates design selection / simulated observation / posterior update,
//! and records the posterior summary after every trial. [`Campaign::run`]
//! aggregates replications into per-trial performance metrics (MSE of the
//! posterior-mean estimate, cumulative information gain) plus, optionally,
//! the lookahead-vs-greedy diagnostics.
//!
//! Determinism is load-bearing: every trial draws from its own RNG stream
//! keyed by `(seed, replication, trial)`, and aggregation visits replications
//! in index order with compensated summation, so serial and parallel runs
//! produce bit-identical tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{utility_stats, Decomposition};
use crate::error::{Error, Result};
use crate::grid::{range_width, DesignGrid, GridDistribution, ParameterGrid};
use crate::models::{LikelihoodTensor, ResponseModel};
use crate::strategy::{
    argmax_lowest, bayes_update, bellman_solve, myopic_design, step_ahead_design, two_step_scan,
    HorizonSpec, PolicyTree, Strategy,
};

/// Which replications compute the lookahead-vs-greedy diagnostics, and where
/// to snapshot the full per-design curves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsSpec {
    /// Master switch; everything else is ignored when false.
    pub enabled: bool,
    /// Cap on how many replications (the first k) carry diagnostics;
    /// `None` means all of them.
    pub replications: Option<usize>,
    /// Trial numbers (1-based) at which to record the mean per-design
    /// immediate / expected-follow-up curves. Numbers past the campaign
    /// length are ignored.
    pub curve_trials: Vec<usize>,
}

impl DiagnosticsSpec {
    /// Diagnostics for every replication, no curve snapshots.
    pub fn all() -> Self {
        DiagnosticsSpec {
            enabled: true,
            replications: None,
            curve_trials: Vec::new(),
        }
    }
}

/// The scalar knobs of a campaign: how long, how often, and how designs are
/// chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Trials per replication.
    pub trials: usize,
    /// Independent replications.
    pub replications: usize,
    /// Design-selection strategy.
    pub strategy: Strategy,
    /// Lookahead horizon (depth and discount) for the lookahead strategies.
    pub horizon: HorizonSpec,
    /// Base RNG seed; all streams derive from it.
    pub seed: u64,
    /// Lookahead-vs-greedy diagnostics switches.
    pub diagnostics: DiagnosticsSpec,
}

/// One trial's outcome inside a replication.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// 1-based trial number.
    pub trial: usize,
    /// Design value administered.
    pub design: f64,
    /// Observed response label.
    pub response: u32,
    /// Entropy of the updated posterior, in nats.
    pub posterior_entropy: f64,
    /// Posterior-mean parameter estimate after the update.
    pub posterior_mean: Vec<f64>,
}

/// Diagnostics computed from the pre-update distribution of one trial.
#[derive(Debug, Clone, PartialEq)]
struct TrialDiagnostics {
    ud: f64,
    myopic_max: f64,
    width_immediate: f64,
    width_next: f64,
}

/// Per-design curves captured at one trial (either one replication's, or the
/// replication mean).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSnapshot {
    /// 1-based trial number the curves belong to.
    pub trial: usize,
    /// Immediate utility per design.
    pub immediate: Vec<f64>,
    /// Expected best follow-up utility per design.
    pub expected_next: Vec<f64>,
}

/// Everything one replication produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    records: Vec<TrialRecord>,
    diagnostics: Option<ReplicationDiagnostics>,
}

impl ReplicationOutcome {
    /// Per-trial records, in trial order.
    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ReplicationDiagnostics {
    per_trial: Vec<TrialDiagnostics>,
    curves: Vec<CurveSnapshot>,
}

/// Aggregated diagnostics columns for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    /// Mean utility difference (lookahead total minus greedy total), nats.
    pub ud_mean: f64,
    /// Relative utility difference: `ud_mean` divided by the replication
    /// mean of the myopic maximal utility (0 when that mean is not
    /// positive). Dividing means rather than averaging per-replication
    /// ratios keeps near-converged replications, whose best utility is a
    /// hair above zero, from dominating the statistic.
    pub rd_mean: f64,
    /// Mean range width of the immediate-utility curve.
    pub width_immediate: f64,
    /// Mean range width of the expected-follow-up curve.
    pub width_next: f64,
}

/// Aggregated per-trial metrics for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    /// 1-based trial number.
    pub trial: usize,
    /// Mean squared error of each posterior-mean parameter estimate.
    pub mse: Vec<f64>,
    /// Initial entropy minus mean posterior entropy, in nats.
    pub info_gain: f64,
    /// Diagnostics means, when the campaign computed them.
    pub diagnostics: Option<DiagnosticsRow>,
}

/// A campaign's aggregate output: one row per trial plus optional mean
/// per-design curve snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    /// Entropy of the uniform prior, in nats.
    pub initial_entropy: f64,
    /// True parameter vector the observers were simulated from.
    pub true_params: Vec<f64>,
    /// Design values, aligned with curve snapshots.
    pub design_values: Vec<f64>,
    /// Per-trial aggregated metrics, trial order.
    pub rows: Vec<TrialMetrics>,
    /// Mean per-design curves at the requested trials.
    pub curves: Vec<CurveSnapshot>,
    /// How many replications fed the diagnostics means (0 when disabled).
    pub diagnostics_replications: usize,
    /// Smallest utility difference seen across all diagnosed trials.
    pub min_ud: Option<f64>,
}

/// A fully validated, ready-to-run experiment campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    model: ResponseModel,
    parameter_grid: ParameterGrid,
    design_grid: DesignGrid,
    tensor: LikelihoodTensor,
    true_params: Vec<f64>,
    plan: RunPlan,
    /// Sorted, deduplicated, in-range curve snapshot trials.
    snapshot_trials: Vec<usize>,
}

impl Campaign {
    /// Validates the pieces and precomputes the likelihood tensor.
    pub fn new(
        model: ResponseModel,
        parameter_grid: ParameterGrid,
        design_grid: DesignGrid,
        true_params: Vec<f64>,
        plan: RunPlan,
    ) -> Result<Self> {
        if plan.trials == 0 {
            return Err(Error::InvalidConfig {
                field: "trials".into(),
                reason: "must be at least 1".into(),
            });
        }
        if plan.replications == 0 {
            return Err(Error::InvalidConfig {
                field: "replications".into(),
                reason: "must be at least 1".into(),
            });
        }
        if plan.strategy == Strategy::Myopic && plan.horizon.lookahead() != 1 {
            return Err(Error::InvalidConfig {
                field: "lookahead".into(),
                reason: format!(
                    "the myopic strategy requires lookahead 1, got {}",
                    plan.horizon.lookahead()
                ),
            });
        }
        if plan.diagnostics.replications == Some(0) {
            return Err(Error::InvalidConfig {
                field: "diagnostics_replications".into(),
                reason: "must be at least 1 when given".into(),
            });
        }
        if true_params.len() != parameter_grid.dim() {
            return Err(Error::LengthMismatch {
                what: "true parameter vector vs. parameter grid",
                expected: parameter_grid.dim(),
                got: true_params.len(),
            });
        }
        if true_params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "true_params".into(),
                reason: "all components must be finite".into(),
            });
        }
        // The simulated observer must have a valid pmf at every design.
        for &d in design_grid.points() {
            model.response_pmf(&true_params, d)?;
        }
        let tensor = LikelihoodTensor::build(&model, &parameter_grid, &design_grid)?;
        let mut snapshot_trials: Vec<usize> = plan
            .diagnostics
            .curve_trials
            .iter()
            .copied()
            .filter(|&t| t >= 1 && t <= plan.trials)
            .collect();
        snapshot_trials.sort_unstable();
        snapshot_trials.dedup();
        Ok(Campaign {
            model,
            parameter_grid,
            design_grid,
            tensor,
            true_params,
            plan,
            snapshot_trials,
        })
    }

    /// The response model under study.
    pub fn model(&self) -> &ResponseModel {
        &self.model
    }

    /// The parameter grid the posterior lives on.
    pub fn parameter_grid(&self) -> &ParameterGrid {
        &self.parameter_grid
    }

    /// The candidate designs.
    pub fn design_grid(&self) -> &DesignGrid {
        &self.design_grid
    }

    /// The precomputed likelihood tensor.
    pub fn tensor(&self) -> &LikelihoodTensor {
        &self.tensor
    }

    /// The simulated observer's parameter vector.
    pub fn true_params(&self) -> &[f64] {
        &self.true_params
    }

    /// The campaign's scalar knobs.
    pub fn plan(&self) -> &RunPlan {
        &self.plan
    }

    /// How many replications actually carry diagnostics.
    pub fn diagnostics_replications(&self) -> usize {
        if !self.plan.diagnostics.enabled {
            return 0;
        }
        self.plan
            .diagnostics
            .replications
            .unwrap_or(self.plan.replications)
            .min(self.plan.replications)
    }

    /// Runs one replication: uniform prior, then trial-by-trial design
    /// selection, simulated observation, and posterior update.
    pub fn run_replication(&self, replication: usize) -> Result<ReplicationOutcome> {
        let n_points = self.parameter_grid.n_points();
        let space = self.model.response_space();
        let discount = self.plan.horizon.discount();
        let diagnose = self.plan.diagnostics.enabled
            && replication < self.diagnostics_replications();

        let mut posterior = GridDistribution::uniform(n_points)?;
        let mut records = Vec::with_capacity(self.plan.trials);
        let mut diag = diagnose.then(|| ReplicationDiagnostics {
            per_trial: Vec::with_capacity(self.plan.trials),
            curves: Vec::with_capacity(self.snapshot_trials.len()),
        });
        // Response-contingent plan being executed by the block strategy.
        let mut block: Option<PolicyTree> = None;

        for trial_ix in 0..self.plan.trials {
            let trial_no = trial_ix + 1;
            let remaining = self.plan.trials - trial_ix;
            let lookahead_now = self.plan.horizon.lookahead().min(remaining);

            // One batched lookahead sweep serves both the diagnostics and the
            // two-trial re-solving strategy.
            let scan_for_selection =
                self.plan.strategy == Strategy::TStepAhead && lookahead_now == 2;
            let mut scan = (diagnose || scan_for_selection)
                .then(|| two_step_scan(&self.tensor, posterior.weights()));

            let design_index = match self.plan.strategy {
                // Deliberately independent of the diagnostics sweep so that
                // toggling diagnostics can never alter a trajectory.
                Strategy::Myopic => myopic_design(&self.tensor, &posterior)?,
                Strategy::TStepAhead => match lookahead_now {
                    1 => myopic_design(&self.tensor, &posterior)?,
                    2 => {
                        let s = scan.as_ref().expect("scan computed for two-trial lookahead");
                        let totals: Vec<f64> = s
                            .immediate
                            .iter()
                            .zip(&s.expected_next)
                            .map(|(imm, en)| imm + discount * en)
                            .collect();
                        argmax_lowest(&totals).0
                    }
                    t => step_ahead_design(
                        &self.tensor,
                        &posterior,
                        &HorizonSpec::new(t, discount)?,
                    )?,
                },
                Strategy::GlobalTStep => {
                    if block.is_none() {
                        block = Some(bellman_solve(&self.tensor, &posterior, &self.plan.horizon)?);
                    }
                    block.as_ref().expect("freshly solved block plan").design
                }
            };

            if let Some(diag) = diag.as_mut() {
                let s = scan.take().expect("scan computed for diagnostics");
                let deco = Decomposition {
                    immediate: s.immediate,
                    expected_next: s.expected_next,
                };
                let stats = utility_stats(&deco);
                diag.per_trial.push(TrialDiagnostics {
                    ud: stats.ud,
                    myopic_max: stats.myopic_max,
                    width_immediate: range_width(&deco.immediate)?,
                    width_next: range_width(&deco.expected_next)?,
                });
                if self.snapshot_trials.binary_search(&trial_no).is_ok() {
                    diag.curves.push(CurveSnapshot {
                        trial: trial_no,
                        immediate: deco.immediate,
                        expected_next: deco.expected_next,
                    });
                }
            }

            let design_value = self.design_grid.value(design_index);
            let mut rng = trial_rng(self.plan.seed, replication, trial_ix);
            let label = simulate_response(&self.model, &self.true_params, design_value, &mut rng)?;
            let response_index = space.index_of(label)?;

            posterior = match bayes_update(&self.tensor, &posterior, design_index, response_index)
            {
                Ok(updated) => updated,
                Err(Error::ImpossibleObservation {
                    design_index,
                    response_index,
                    ..
                }) => {
                    return Err(Error::ImpossibleObservation {
                        design_index,
                        response_index,
                        trial: Some(trial_no),
                    })
                }
                Err(other) => return Err(other),
            };

            if let Some(tree) = block.take() {
                // Descend the executed branch; a leaf (or a branch the plan
                // deemed unreachable) ends the block, forcing a fresh solve.
                if !tree.children.is_empty() {
                    block = tree.children.into_iter().nth(response_index).flatten();
                }
            }

            records.push(TrialRecord {
                trial: trial_no,
                design: design_value,
                response: label,
                posterior_entropy: posterior.entropy(),
                posterior_mean: posterior.posterior_mean(&self.parameter_grid)?,
            });
        }

        Ok(ReplicationOutcome {
            records,
            diagnostics: diag,
        })
    }

    /// Runs all replications in parallel and aggregates them.
    pub fn run(&self) -> Result<MetricsTable> {
        let outcomes: Vec<ReplicationOutcome> = (0..self.plan.replications)
            .into_par_iter()
            .map(|r| self.run_replication(r))
            .collect::<Result<_>>()?;
        Ok(self.aggregate(&outcomes))
    }

    /// Runs all replications on the current thread and aggregates them.
    /// Bit-identical to [`Campaign::run`].
    pub fn run_serial(&self) -> Result<MetricsTable> {
        let outcomes: Vec<ReplicationOutcome> = (0..self.plan.replications)
            .map(|r| self.run_replication(r))
            .collect::<Result<_>>()?;
        Ok(self.aggregate(&outcomes))
    }

    /// Fixed-order, compensated aggregation of replication outcomes.
    fn aggregate(&self, outcomes: &[ReplicationOutcome]) -> MetricsTable {
        let trials = self.plan.trials;
        let dim = self.parameter_grid.dim();
        let nd = self.design_grid.len();
        let reps = outcomes.len();
        let initial_entropy = GridDistribution::uniform(self.parameter_grid.n_points())
            .expect("grids are non-empty")
            .entropy();

        let mut mse = vec![Kahan::default(); trials * dim];
        let mut entropy = vec![Kahan::default(); trials];
        let mut ud = vec![Kahan::default(); trials];
        let mut myopic_max = vec![Kahan::default(); trials];
        let mut width_imm = vec![Kahan::default(); trials];
        let mut width_next = vec![Kahan::default(); trials];
        let mut curve_imm = vec![Kahan::default(); self.snapshot_trials.len() * nd];
        let mut curve_next = vec![Kahan::default(); self.snapshot_trials.len() * nd];
        let mut diag_reps = 0usize;
        let mut min_ud: Option<f64> = None;

        for outcome in outcomes {
            for record in &outcome.records {
                let t = record.trial - 1;
                for (k, (est, truth)) in record
                    .posterior_mean
                    .iter()
                    .zip(&self.true_params)
                    .enumerate()
                {
                    let err = est - truth;
                    mse[t * dim + k].add(err * err);
                }
                entropy[t].add(record.posterior_entropy);
            }
            let Some(diag) = &outcome.diagnostics else {
                continue;
            };
            diag_reps += 1;
            for (t, row) in diag.per_trial.iter().enumerate() {
                ud[t].add(row.ud);
                myopic_max[t].add(row.myopic_max);
                width_imm[t].add(row.width_immediate);
                width_next[t].add(row.width_next);
                min_ud = Some(match min_ud {
                    Some(m) => m.min(row.ud),
                    None => row.ud,
                });
            }
            for (s, snapshot) in diag.curves.iter().enumerate() {
                for j in 0..nd {
                    curve_imm[s * nd + j].add(snapshot.immediate[j]);
                    curve_next[s * nd + j].add(snapshot.expected_next[j]);
                }
            }
        }

        let rows = (0..trials)
            .map(|t| TrialMetrics {
                trial: t + 1,
                mse: (0..dim).map(|k| mse[t * dim + k].value() / reps as f64).collect(),
                info_gain: initial_entropy - entropy[t].value() / reps as f64,
                diagnostics: (diag_reps > 0).then(|| {
                    let ud_mean = ud[t].value() / diag_reps as f64;
                    let max_mean = myopic_max[t].value() / diag_reps as f64;
                    DiagnosticsRow {
                        ud_mean,
                        rd_mean: if max_mean > 0.0 { ud_mean / max_mean } else { 0.0 },
                        width_immediate: width_imm[t].value() / diag_reps as f64,
                        width_next: width_next[t].value() / diag_reps as f64,
                    }
                }),
            })
            .collect();
        let curves = (diag_reps > 0)
            .then(|| {
                self.snapshot_trials
                    .iter()
                    .enumerate()
                    .map(|(s, &trial)| CurveSnapshot {
                        trial,
                        immediate: (0..nd)
                            .map(|j| curve_imm[s * nd + j].value() / diag_reps as f64)
                            .collect(),
                        expected_next: (0..nd)
                            .map(|j| curve_next[s * nd + j].value() / diag_reps as f64)
                            .collect(),
                    })
                    .collect()
            })
            .unwrap_or_default();

        MetricsTable {
            initial_entropy,
            true_params: self.true_params.clone(),
            design_values: self.design_grid.points().to_vec(),
            rows,
            curves,
            diagnostics_replications: diag_reps,
            min_ud,
        }
    }
}

/// One strategy's aggregated results inside a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    /// The strategy that produced the table.
    pub strategy: Strategy,
    /// Its lookahead depth.
    pub lookahead: usize,
    /// The aggregated campaign output.
    pub table: MetricsTable,
}

/// Runs several campaigns that differ only in strategy/horizon and returns
/// their aligned tables.
pub fn compare_strategies(campaigns: &[Campaign]) -> Result<Vec<StrategyRun>> {
    let Some(first) = campaigns.first() else {
        return Err(Error::EmptyInput {
            what: "campaign list",
        });
    };
    for other in &campaigns[1..] {
        let mismatch = |field: &str| -> Error {
            Error::InvalidConfig {
                field: field.into(),
                reason: "compared campaigns must agree on everything except strategy".into(),
            }
        };
        if other.model != first.model {
            return Err(mismatch("model"));
        }
        if other.parameter_grid != first.parameter_grid {
            return Err(mismatch("parameters"));
        }
        if other.design_grid != first.design_grid {
            return Err(mismatch("design"));
        }
        if other.true_params != first.true_params {
            return Err(mismatch("true_params"));
        }
        if other.plan.trials != first.plan.trials {
            return Err(mismatch("trials"));
        }
        if other.plan.replications != first.plan.replications {
            return Err(mismatch("replications"));
        }
        if other.plan.seed != first.plan.seed {
            return Err(mismatch("seed"));
        }
        if other.plan.diagnostics != first.plan.diagnostics {
            return Err(mismatch("diagnostics"));
        }
    }
    campaigns
        .iter()
        .map(|c| {
            Ok(StrategyRun {
                strategy: c.plan.strategy,
                lookahead: c.plan.horizon.lookahead(),
                table: c.run()?,
            })
        })
        .collect()
}

/// The RNG stream for one trial of one replication. Streams are independent
/// of execution order, which is what makes parallel and serial runs agree.
fn trial_rng(seed: u64, replication: usize, trial: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(replication as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    key[24..32].copy_from_slice(&0x9E37_79B9_7F4A_7C15u64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Draws one response from the model's pmf at the true parameters by
/// inverting the cumulative distribution on a single uniform variate.
pub fn simulate_response<R: Rng>(
    model: &ResponseModel,
    theta_true: &[f64],
    design: f64,
    rng: &mut R,
) -> Result<u32> {
    let pmf = model.response_pmf(theta_true, design)?;
    let space = model.response_space();
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (k, &mass) in pmf.iter().enumerate() {
        cumulative += mass;
        if u < cumulative {
            return Ok(space.label(k));
        }
    }
    // Guard against the cumulative sum falling a few ulps short of 1.
    Ok(space.label(pmf.len() - 1))
}

/// Compensated (Kahan) accumulator so aggregation order microscopically
/// cannot matter.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    compensation: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisSpec;

    fn gap_campaign(plan: RunPlan) -> Campaign {
        let parameter_grid = ParameterGrid::build(vec![
            AxisSpec::new("t_cr", 5.0, 10.0, 8).unwrap(),
            AxisSpec::new("sigma", 1.0, 5.0, 8).unwrap(),
        ])
        .unwrap();
        let design_grid =
            DesignGrid::from_axis(&AxisSpec::new("d", 4.0, 12.0, 9).unwrap()).unwrap();
        Campaign::new(
            ResponseModel::GapAcceptance,
            parameter_grid,
            design_grid,
            vec![7.0, 2.0],
            plan,
        )
        .unwrap()
    }

    fn base_plan(strategy: Strategy, lookahead: usize) -> RunPlan {
        RunPlan {
            trials: 12,
            replications: 6,
            strategy,
            horizon: HorizonSpec::new(lookahead, 1.0).unwrap(),
            seed: 42,
            diagnostics: DiagnosticsSpec::default(),
        }
    }

    #[test]
    fn campaigns_are_deterministic_and_parallel_agrees_with_serial() {
        let campaign = gap_campaign(RunPlan {
            diagnostics: DiagnosticsSpec::all(),
            ..base_plan(Strategy::Myopic, 1)
        });
        let a = campaign.run().unwrap();
        let b = campaign.run().unwrap();
        let c = campaign.run_serial().unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn unit_lookahead_reproduces_the_myopic_trajectory() {
        let myopic = gap_campaign(base_plan(Strategy::Myopic, 1));
        let one_step = gap_campaign(base_plan(Strategy::TStepAhead, 1));
        assert_eq!(myopic.run().unwrap(), one_step.run().unwrap());
    }

    #[test]
    fn diagnostics_never_alter_the_trajectory() {
        for (strategy, lookahead) in [
            (Strategy::Myopic, 1),
            (Strategy::TStepAhead, 2),
            (Strategy::GlobalTStep, 2),
            (Strategy::TStepAhead, 3),
        ] {
            let plain = gap_campaign(base_plan(strategy, lookahead));
            let diagnosed = gap_campaign(RunPlan {
                diagnostics: DiagnosticsSpec::all(),
                ..base_plan(strategy, lookahead)
            });
            let a = plain.run().unwrap();
            let b = diagnosed.run().unwrap();
            for (ra, rb) in a.rows.iter().zip(&b.rows) {
                assert_eq!(ra.mse, rb.mse);
                assert_eq!(ra.info_gain, rb.info_gain);
                assert!(ra.diagnostics.is_none());
                assert!(rb.diagnostics.is_some());
            }
        }
    }

    #[test]
    fn single_design_grids_make_all_strategies_identical_with_zero_ud() {
        let parameter_grid = ParameterGrid::build(vec![
            AxisSpec::new("t_cr", 5.0, 10.0, 6).unwrap(),
            AxisSpec::new("sigma", 1.0, 5.0, 6).unwrap(),
        ])
        .unwrap();
        let design_grid = DesignGrid::from_points(vec![8.0]).unwrap();
        let make = |strategy, lookahead| {
            Campaign::new(
                ResponseModel::GapAcceptance,
                parameter_grid.clone(),
                design_grid.clone(),
                vec![7.0, 2.0],
                RunPlan {
                    trials: 10,
                    replications: 4,
                    strategy,
                    horizon: HorizonSpec::new(lookahead, 1.0).unwrap(),
                    seed: 9,
                    diagnostics: DiagnosticsSpec::all(),
                },
            )
            .unwrap()
        };
        let myopic = make(Strategy::Myopic, 1).run().unwrap();
        let ahead = make(Strategy::TStepAhead, 2).run().unwrap();
        let global = make(Strategy::GlobalTStep, 2).run().unwrap();
        assert_eq!(myopic.rows.len(), ahead.rows.len());
        for ((a, b), c) in myopic.rows.iter().zip(&ahead.rows).zip(&global.rows) {
            assert_eq!(a.mse, b.mse);
            assert_eq!(a.mse, c.mse);
            assert_eq!(a.info_gain, b.info_gain);
            assert_eq!(a.info_gain, c.info_gain);
        }
        assert_eq!(myopic.min_ud, Some(0.0));
        assert_eq!(ahead.min_ud, Some(0.0));
        assert_eq!(global.min_ud, Some(0.0));
    }

    #[test]
    fn block_strategy_follows_its_solved_plan_and_handles_partial_blocks() {
        let campaign = gap_campaign(RunPlan {
            trials: 3,
            replications: 1,
            ..base_plan(Strategy::GlobalTStep, 2)
        });
        let outcome = campaign.run_replication(0).unwrap();
        let records = outcome.records();
        assert_eq!(records.len(), 3);

        // Replay: the first block's two designs must match the tree solved at
        // the uniform prior, following the observed response branch.
        let space = campaign.model().response_space();
        let uniform = GridDistribution::uniform(campaign.parameter_grid().n_points()).unwrap();
        let tree = bellman_solve(
            campaign.tensor(),
            &uniform,
            &HorizonSpec::new(2, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(records[0].design, campaign.design_grid().value(tree.design));
        let y0 = space.index_of(records[0].response).unwrap();
        let child = tree.children[y0].as_ref().unwrap();
        assert_eq!(records[1].design, campaign.design_grid().value(child.design));

        // The final partial block re-solves (depth 2) from the posterior after
        // two updates and executes only its root.
        let p1 = bayes_update(campaign.tensor(), &uniform, tree.design, y0).unwrap();
        let y1 = space.index_of(records[1].response).unwrap();
        let p2 = bayes_update(campaign.tensor(), &p1, child.design, y1).unwrap();
        let fresh = bellman_solve(
            campaign.tensor(),
            &p2,
            &HorizonSpec::new(2, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(records[2].design, campaign.design_grid().value(fresh.design));
    }

    #[test]
    fn diagnostics_replication_cap_averages_over_the_leading_replications() {
        let capped = gap_campaign(RunPlan {
            replications: 6,
            diagnostics: DiagnosticsSpec {
                enabled: true,
                replications: Some(2),
                curve_trials: vec![1, 5],
            },
            ..base_plan(Strategy::Myopic, 1)
        });
        let full = gap_campaign(RunPlan {
            replications: 2,
            diagnostics: DiagnosticsSpec {
                enabled: true,
                replications: None,
                curve_trials: vec![1, 5],
            },
            ..base_plan(Strategy::Myopic, 1)
        });
        let capped_table = capped.run().unwrap();
        let full_table = full.run().unwrap();
        assert_eq!(capped_table.diagnostics_replications, 2);
        // Replication streams are index-keyed, so the first two replications
        // are the same in both campaigns and the diagnostics means agree.
        for (a, b) in capped_table.rows.iter().zip(&full_table.rows) {
            assert_eq!(a.diagnostics, b.diagnostics);
        }
        assert_eq!(capped_table.curves, full_table.curves);
        assert_eq!(capped_table.min_ud, full_table.min_ud);
    }

    #[test]
    fn curve_snapshots_cover_requested_trials_in_order() {
        let campaign = gap_campaign(RunPlan {
            diagnostics: DiagnosticsSpec {
                enabled: true,
                replications: None,
                curve_trials: vec![5, 1, 99, 5],
            },
            ..base_plan(Strategy::Myopic, 1)
        });
        let table = campaign.run().unwrap();
        let trials: Vec<usize> = table.curves.iter().map(|c| c.trial).collect();
        assert_eq!(trials, vec![1, 5]);
        for curve in &table.curves {
            assert_eq!(curve.immediate.len(), campaign.design_grid().len());
            assert_eq!(curve.expected_next.len(), campaign.design_grid().len());
        }
        // Trial 1 curves are deterministic: every replication starts uniform.
        let scan = two_step_scan(
            campaign.tensor(),
            GridDistribution::uniform(campaign.parameter_grid().n_points())
                .unwrap()
                .weights(),
        );
        for j in 0..campaign.design_grid().len() {
            assert!((table.curves[0].immediate[j] - scan.immediate[j]).abs() < 1e-12);
            assert!((table.curves[0].expected_next[j] - scan.expected_next[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_summaries_stay_inside_their_bounds() {
        let campaign = gap_campaign(RunPlan {
            diagnostics: DiagnosticsSpec::all(),
            ..base_plan(Strategy::TStepAhead, 2)
        });
        let initial = (campaign.parameter_grid().n_points() as f64).ln();
        for rep in 0..2 {
            for record in campaign.run_replication(rep).unwrap().records() {
                assert!(record.posterior_entropy >= 0.0);
                assert!(record.posterior_entropy <= initial + 1e-12);
                assert!(record.posterior_mean[0] >= 5.0 && record.posterior_mean[0] <= 10.0);
                assert!(record.posterior_mean[1] >= 1.0 && record.posterior_mean[1] <= 5.0);
                assert!(campaign
                    .design_grid()
                    .points()
                    .contains(&record.design));
            }
        }
    }

    #[test]
    fn entropy_collapses_after_many_trials() {
        let parameter_grid = ParameterGrid::build(vec![
            AxisSpec::new("t_cr", 5.0, 10.0, 20).unwrap(),
            AxisSpec::new("sigma", 1.0, 5.0, 20).unwrap(),
        ])
        .unwrap();
        let design_grid =
            DesignGrid::from_axis(&AxisSpec::new("d", 4.0, 12.0, 25).unwrap()).unwrap();
        let campaign = Campaign::new(
            ResponseModel::GapAcceptance,
            parameter_grid,
            design_grid,
            vec![7.0, 2.004],
            RunPlan {
                trials: 150,
                replications: 1,
                strategy: Strategy::Myopic,
                horizon: HorizonSpec::myopic(),
                seed: 7,
                diagnostics: DiagnosticsSpec::default(),
            },
        )
        .unwrap();
        let outcome = campaign.run_replication(0).unwrap();
        let initial = (400f64).ln();
        let records = outcome.records();
        let last = records.last().unwrap();
        // The per-trial maximum MI falls from ~0.112 to ~0.007 nats over the
        // campaign, which caps the achievable cumulative gain near 2.7 nats;
        // the posterior therefore settles just above half the initial
        // entropy, well past the point where both marginals have collapsed
        // onto a few grid cells.
        assert!(
            last.posterior_entropy < 0.65 * initial,
            "final entropy {} vs initial {initial}",
            last.posterior_entropy
        );
        assert!(initial - last.posterior_entropy > 2.0);
        assert!(last.posterior_entropy < records[9].posterior_entropy);
    }

    #[test]
    fn mse_shrinks_when_the_truth_is_on_the_grid() {
        let parameter_grid = ParameterGrid::build(vec![
            AxisSpec::new("t_cr", 5.0, 10.0, 20).unwrap(),
            AxisSpec::new("sigma", 1.0, 5.0, 20).unwrap(),
        ])
        .unwrap();
        // Exact grid points: index 8 of each axis.
        let truth = vec![
            5.0 + 8.0 * (5.0 / 19.0),
            1.0 + 8.0 * (4.0 / 19.0),
        ];
        let design_grid =
            DesignGrid::from_axis(&AxisSpec::new("d", 4.0, 12.0, 25).unwrap()).unwrap();
        let campaign = Campaign::new(
            ResponseModel::GapAcceptance,
            parameter_grid,
            design_grid,
            truth,
            RunPlan {
                trials: 60,
                replications: 20,
                strategy: Strategy::Myopic,
                horizon: HorizonSpec::myopic(),
                seed: 3,
                diagnostics: DiagnosticsSpec::default(),
            },
        )
        .unwrap();
        let table = campaign.run().unwrap();
        for k in 0..2 {
            assert!(
                table.rows[59].mse[k] < table.rows[9].mse[k],
                "parameter {k}: {} !< {}",
                table.rows[59].mse[k],
                table.rows[9].mse[k]
            );
        }
        assert!(table.rows[59].info_gain > 0.0);
    }

    #[test]
    fn degenerate_simulated_observers_are_deterministic() {
        let mut rng = trial_rng(1, 0, 0);
        let always = ResponseModel::VisualPsychometric { threshold_axis: 0 };
        for _ in 0..200 {
            // Far above threshold the success probability saturates at 1.
            let y = simulate_response(&always, &[0.0, 1.0], 3.0, &mut rng).unwrap();
            assert_eq!(y, 1);
        }
        let never = ResponseModel::MemoryRetention { word_count: 15 };
        for _ in 0..200 {
            // Zero retention probability recalls zero words.
            let y = simulate_response(&never, &[0.0, 0.1], 5.0, &mut rng).unwrap();
            assert_eq!(y, 0);
        }
    }

    #[test]
    fn simulated_responses_match_their_generating_probability() {
        let model = ResponseModel::GapAcceptance;
        let theta = [7.0, 2.004];
        let mut successes = 0u32;
        let n = 100_000;
        for i in 0..n {
            let mut rng = trial_rng(2024, 0, i);
            if simulate_response(&model, &theta, 7.0, &mut rng).unwrap() == 1 {
                successes += 1;
            }
        }
        let mean = f64::from(successes) / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "empirical mean {mean}");
    }

    #[test]
    fn impossible_observations_carry_their_trial_number() {
        // Every grid point saturates to certain success at the only design,
        // while the simulated observer fails about half the time.
        let parameter_grid = ParameterGrid::build(vec![
            AxisSpec::new("b", 0.0, 0.5, 3).unwrap(),
            AxisSpec::new("s", 5.0, 7.0, 3).unwrap(),
        ])
        .unwrap();
        let design_grid = DesignGrid::from_points(vec![3.0]).unwrap();
        let campaign = Campaign::new(
            ResponseModel::VisualPsychometric { threshold_axis: 0 },
            parameter_grid,
            design_grid,
            vec![10.0, 0.0],
            RunPlan {
                trials: 64,
                replications: 1,
                strategy: Strategy::Myopic,
                horizon: HorizonSpec::myopic(),
                seed: 1,
                diagnostics: DiagnosticsSpec::default(),
            },
        )
        .unwrap();
        let err = campaign.run_replication(0).unwrap_err();
        match err {
            Error::ImpossibleObservation { trial, .. } => assert_eq!(trial, Some(1)),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn comparisons_demand_aligned_campaigns() {
        let a = gap_campaign(base_plan(Strategy::Myopic, 1));
        let b = gap_campaign(base_plan(Strategy::TStepAhead, 2));
        let runs = compare_strategies(&[a.clone(), b]).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].strategy, Strategy::Myopic);
        assert_eq!(runs[1].lookahead, 2);

        // Same strategy twice: identical tables.
        let twice = compare_strategies(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(twice[0].table, twice[1].table);

        // A differing seed breaks alignment.
        let mut off_plan = base_plan(Strategy::TStepAhead, 2);
        off_plan.seed = 43;
        let off = gap_campaign(off_plan);
        let err = compare_strategies(&[a, off]).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { .. }));
    }

    #[test]
    fn construction_rejects_inconsistent_plans() {
        let parameter_grid = ParameterGrid::build(vec![
            AxisSpec::new("t_cr", 5.0, 10.0, 4).unwrap(),
            AxisSpec::new("sigma", 1.0, 5.0, 4).unwrap(),
        ])
        .unwrap();
        let design_grid = DesignGrid::from_points(vec![8.0]).unwrap();
        let base = RunPlan {
            trials: 2,
            replications: 1,
            strategy: Strategy::Myopic,
            horizon: HorizonSpec::myopic(),
            seed: 0,
            diagnostics: DiagnosticsSpec::default(),
        };
        let make = |plan: RunPlan, truth: Vec<f64>| {
            Campaign::new(
                ResponseModel::GapAcceptance,
                parameter_grid.clone(),
                design_grid.clone(),
                truth,
                plan,
            )
        };
        assert!(matches!(
            make(RunPlan { trials: 0, ..base.clone() }, vec![7.0, 2.0]),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            make(RunPlan { replications: 0, ..base.clone() }, vec![7.0, 2.0]),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            make(
                RunPlan {
                    strategy: Strategy::Myopic,
                    horizon: HorizonSpec::new(2, 1.0).unwrap(),
                    ..base.clone()
                },
                vec![7.0, 2.0]
            ),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            make(base.clone(), vec![7.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            make(base.clone(), vec![7.0, f64::NAN]),
            Err(Error::InvalidConfig { .. })
        ));
        // Negative sigma: simulated observer outside the model domain.
        assert!(matches!(
            make(base, vec![7.0, -2.0]),
            Err(Error::Domain { .. })
        ));
    }
}
