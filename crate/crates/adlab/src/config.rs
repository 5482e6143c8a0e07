//! Declarative experiment configuration.
//!
//! Campaigns are described by sectioned key-value text (TOML): a `[model]`
//! section naming the response model, one `[[parameters]]` table per grid
//! axis, a `[design]` axis, and a `[run]` section with the simulation knobs.
//! Unknown keys are rejected everywhere. [`parse_config`] performs full
//! semantic validation (a config that parses will compile into a runnable
//! [`Campaign`]); [`emit_config`] round-trips losslessly.
//!
//! Three bundled presets reproduce the published grid/true-parameter settings
//! for the gap-acceptance, visual-psychometric, and memory-retention studies
//! at desk-scale replication counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AxisSpec, DesignGrid, ParameterGrid};
use crate::models::ResponseModel;
use crate::sim::{Campaign, DiagnosticsSpec, RunPlan};
use crate::strategy::{HorizonSpec, Strategy};

/// Which response model a config studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Accept/reject a time gap; θ = (t_cr, sigma).
    GapAcceptance,
    /// Detect a stimulus; θ = {b, s} bound by axis name.
    VisualPsychometric,
    /// Recall words after a lag; θ = (a, b), counts out of `word_count`.
    MemoryRetention,
}

impl ModelKind {
    /// Stable lowercase name used for preset file names.
    pub fn slug(&self) -> &'static str {
        match self {
            ModelKind::GapAcceptance => "gap_acceptance",
            ModelKind::VisualPsychometric => "visual_psychometric",
            ModelKind::MemoryRetention => "memory_retention",
        }
    }
}

/// The `[model]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Response model under study.
    pub kind: ModelKind,
    /// Words presented per memory-retention trial; required for that model
    /// and rejected elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_count: Option<usize>,
}

/// The `[run]` section: everything about how the campaign executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Simulated observer's parameters, aligned with the parameter axes.
    pub true_params: Vec<f64>,
    /// Trials per replication.
    pub trials: usize,
    /// Independent replications.
    pub replications: usize,
    /// Design-selection strategy.
    pub strategy: Strategy,
    /// Lookahead depth for the lookahead strategies; must be 1 for myopic.
    #[serde(default = "default_lookahead")]
    pub lookahead: usize,
    /// Discount factor in (0, 1].
    #[serde(default = "default_discount")]
    pub discount: f64,
    /// Base RNG seed.
    pub seed: u64,
    /// Compute the lookahead-vs-greedy diagnostics.
    #[serde(default)]
    pub diagnostics: bool,
    /// Cap diagnostics to the first k replications (default: all).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics_replications: Option<usize>,
}

fn default_lookahead() -> usize {
    1
}

fn default_discount() -> f64 {
    1.0
}

/// A complete experiment description, as read from configuration text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `[model]` section.
    pub model: ModelSection,
    /// `[[parameters]]` axes, exactly two.
    pub parameters: Vec<AxisSpec>,
    /// `[design]` axis.
    pub design: AxisSpec,
    /// `[run]` section.
    pub run: RunSection,
}

impl ExperimentConfig {
    /// Builds the validated response model implied by `[model]` and the
    /// parameter axis names.
    pub fn model(&self) -> Result<ResponseModel> {
        let names: Vec<&str> = self.parameters.iter().map(|a| a.name.as_str()).collect();
        if names.len() != 2 {
            return Err(Error::InvalidConfig {
                field: "parameters".into(),
                reason: format!("exactly two parameter axes are required, got {}", names.len()),
            });
        }
        match self.model.kind {
            ModelKind::GapAcceptance | ModelKind::VisualPsychometric
                if self.model.word_count.is_some() =>
            {
                Err(Error::InvalidConfig {
                    field: "model.word_count".into(),
                    reason: "only the memory_retention model takes a word count".into(),
                })
            }
            ModelKind::GapAcceptance => {
                if names != ["t_cr", "sigma"] {
                    return Err(Error::InvalidConfig {
                        field: "parameters".into(),
                        reason: format!(
                            "gap_acceptance expects axes named t_cr, sigma; got {names:?}"
                        ),
                    });
                }
                Ok(ResponseModel::GapAcceptance)
            }
            ModelKind::VisualPsychometric => match names.as_slice() {
                ["b", "s"] => Ok(ResponseModel::VisualPsychometric { threshold_axis: 0 }),
                ["s", "b"] => Ok(ResponseModel::VisualPsychometric { threshold_axis: 1 }),
                _ => Err(Error::InvalidConfig {
                    field: "parameters".into(),
                    reason: format!(
                        "visual_psychometric expects axes named b and s (either order); got {names:?}"
                    ),
                }),
            },
            ModelKind::MemoryRetention => {
                if names != ["a", "b"] {
                    return Err(Error::InvalidConfig {
                        field: "parameters".into(),
                        reason: format!(
                            "memory_retention expects axes named a, b; got {names:?}"
                        ),
                    });
                }
                let word_count = self.model.word_count.ok_or_else(|| Error::InvalidConfig {
                    field: "model.word_count".into(),
                    reason: "memory_retention requires a word count".into(),
                })?;
                if word_count == 0 {
                    return Err(Error::InvalidConfig {
                        field: "model.word_count".into(),
                        reason: "must be at least 1".into(),
                    });
                }
                Ok(ResponseModel::MemoryRetention { word_count })
            }
        }
    }

    /// Compiles into a runnable campaign with no curve snapshots.
    pub fn campaign(&self) -> Result<Campaign> {
        self.campaign_with_curve_trials(Vec::new())
    }

    /// Compiles into a runnable campaign that snapshots mean per-design
    /// curves at the given (1-based) trials.
    pub fn campaign_with_curve_trials(&self, curve_trials: Vec<usize>) -> Result<Campaign> {
        let model = self.model()?;
        if let Some(cap) = self.run.diagnostics_replications {
            if cap > self.run.replications {
                return Err(Error::InvalidConfig {
                    field: "run.diagnostics_replications".into(),
                    reason: format!(
                        "cannot exceed replications ({} > {})",
                        cap, self.run.replications
                    ),
                });
            }
        }
        let parameter_grid = ParameterGrid::build(self.parameters.clone())?;
        let design_grid = DesignGrid::from_axis(&self.design)?;
        let plan = RunPlan {
            trials: self.run.trials,
            replications: self.run.replications,
            strategy: self.run.strategy,
            horizon: HorizonSpec::new(self.run.lookahead, self.run.discount)?,
            seed: self.run.seed,
            diagnostics: DiagnosticsSpec {
                enabled: self.run.diagnostics,
                replications: self.run.diagnostics_replications,
                curve_trials,
            },
        };
        Campaign::new(model, parameter_grid, design_grid, self.run.true_params.clone(), plan)
    }
}

/// Parses and fully validates configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::ConfigSyntax {
        detail: e.to_string(),
    })?;
    // Everything semantic is checked by compiling it.
    config.campaign()?;
    Ok(config)
}

/// Serializes a config to text that [`parse_config`] accepts verbatim.
pub fn emit_config(config: &ExperimentConfig) -> String {
    toml::to_string_pretty(config).expect("config structs always serialize")
}

/// The bundled study settings for one model: published grids and true
/// parameters, desk-scale replication counts, diagnostics on.
pub fn preset(kind: ModelKind) -> ExperimentConfig {
    let axis = |name: &str, lo: f64, hi: f64, count: usize| AxisSpec {
        name: name.into(),
        lo,
        hi,
        count,
    };
    match kind {
        ModelKind::GapAcceptance => ExperimentConfig {
            model: ModelSection {
                kind,
                word_count: None,
            },
            parameters: vec![axis("t_cr", 5.0, 10.0, 20), axis("sigma", 1.0, 5.0, 20)],
            design: axis("d", 4.0, 12.0, 25),
            run: RunSection {
                true_params: vec![7.0, 2.004],
                trials: 150,
                replications: 500,
                strategy: Strategy::Myopic,
                lookahead: 1,
                discount: 1.0,
                seed: 1,
                diagnostics: true,
                diagnostics_replications: None,
            },
        },
        ModelKind::VisualPsychometric => ExperimentConfig {
            model: ModelSection {
                kind,
                word_count: None,
            },
            parameters: vec![axis("b", 0.7, 7.0, 50), axis("s", 0.0, 10.0, 50)],
            design: axis("d", 0.0, 3.0, 50),
            run: RunSection {
                true_params: vec![2.3643, 0.6312],
                trials: 200,
                replications: 200,
                strategy: Strategy::Myopic,
                lookahead: 1,
                discount: 1.0,
                seed: 1,
                diagnostics: true,
                diagnostics_replications: None,
            },
        },
        ModelKind::MemoryRetention => ExperimentConfig {
            model: ModelSection {
                kind,
                word_count: Some(15),
            },
            parameters: vec![axis("a", 0.0, 1.0, 20), axis("b", 0.0, 1.0, 20)],
            design: axis("d", 0.0, 50.0, 50),
            run: RunSection {
                true_params: vec![0.7103, 0.0833],
                trials: 80,
                replications: 200,
                strategy: Strategy::Myopic,
                lookahead: 1,
                discount: 1.0,
                seed: 1,
                diagnostics: true,
                diagnostics_replications: None,
            },
        },
    }
}

/// All bundled presets, in a stable order.
pub fn all_presets() -> Vec<ExperimentConfig> {
    vec![
        preset(ModelKind::GapAcceptance),
        preset(ModelKind::VisualPsychometric),
        preset(ModelKind::MemoryRetention),
    ]
}
