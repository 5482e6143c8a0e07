//! CSV emission and run manifests.
//!
//! All emitters build deterministic byte-for-byte output: floating-point
//! columns are printed with 12 significant digits in scientific notation, and
//! the column set never depends on which optional analyses ran (columns for
//! analyses that were off are present but empty).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::sim::{MetricsTable, StrategyRun};

/// Header of the per-trial metrics CSV.
pub const METRICS_HEADER: &str =
    "trial,mse_p1,mse_p2,info_gain,ud_mean,rd_mean,width_immediate,width_next";

/// Header of the per-design curve-snapshot CSV.
pub const CURVES_HEADER: &str = "trial,design,immediate,expected_next";

/// Header of the strategy-comparison CSV.
pub const COMPARISON_HEADER: &str = "trial,strategy,lookahead,mse_p1,mse_p2,info_gain";

/// 12-significant-digit scientific notation; the one float format every CSV
/// uses.
fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Per-trial metrics as CSV text. Diagnostics columns are emitted empty when
/// the campaign did not compute them, keeping the schema fixed.
pub fn metrics_csv(table: &MetricsTable) -> String {
    let mut out = String::with_capacity(64 * (table.rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.trial.to_string());
        for k in 0..2 {
            out.push(',');
            out.push_str(&sig12(row.mse.get(k).copied().unwrap_or(f64::NAN)));
        }
        out.push(',');
        out.push_str(&sig12(row.info_gain));
        match &row.diagnostics {
            Some(diag) => {
                for value in [
                    diag.ud_mean,
                    diag.rd_mean,
                    diag.width_immediate,
                    diag.width_next,
                ] {
                    out.push(',');
                    out.push_str(&sig12(value));
                }
            }
            None => out.push_str(",,,,"),
        }
        out.push('\n');
    }
    out
}

/// Mean per-design curve snapshots as CSV text: one row per (trial, design).
pub fn curves_csv(table: &MetricsTable) -> String {
    let mut out = String::with_capacity(48 * table.curves.len() * table.design_values.len() + 32);
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for snapshot in &table.curves {
        for (j, &design) in table.design_values.iter().enumerate() {
            out.push_str(&snapshot.trial.to_string());
            out.push(',');
            out.push_str(&sig12(design));
            out.push(',');
            out.push_str(&sig12(snapshot.immediate[j]));
            out.push(',');
            out.push_str(&sig12(snapshot.expected_next[j]));
            out.push('\n');
        }
    }
    out
}

/// Aligned per-trial comparison of several strategies as CSV text, in
/// long format (one row per strategy per trial).
pub fn comparison_csv(runs: &[StrategyRun]) -> String {
    let rows: usize = runs.iter().map(|r| r.table.rows.len()).sum();
    let mut out = String::with_capacity(56 * rows + 48);
    out.push_str(COMPARISON_HEADER);
    out.push('\n');
    let trials = runs.iter().map(|r| r.table.rows.len()).max().unwrap_or(0);
    for t in 0..trials {
        for run in runs {
            let Some(row) = run.table.rows.get(t) else {
                continue;
            };
            out.push_str(&row.trial.to_string());
            out.push(',');
            out.push_str(run.strategy.slug());
            out.push(',');
            out.push_str(&run.lookahead.to_string());
            for k in 0..2 {
                out.push(',');
                out.push_str(&sig12(row.mse.get(k).copied().unwrap_or(f64::NAN)));
            }
            out.push(',');
            out.push_str(&sig12(row.info_gain));
            out.push('\n');
        }
    }
    out
}

/// Writes emitted text to disk.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

/// Conventions this engine commits to, echoed into every manifest so output
/// files are interpretable on their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    /// Logarithm base for every entropy/information quantity.
    pub log_base: String,
    /// How the greedy two-step total (the baseline the utility difference
    /// subtracts) is defined.
    pub greedy_second_term: String,
    /// How parameter axes bind to model roles.
    pub axis_roles: String,
    /// How per-replication diagnostics become per-trial means.
    pub diagnostics_averaging: String,
}

impl Conventions {
    /// The fixed conventions of this engine version.
    pub fn standard() -> Self {
        Conventions {
            log_base: "natural logarithm; entropies and utilities are in nats".into(),
            greedy_second_term:
                "expected best follow-up utility over the predictive responses of the \
                 greedy design: sum_y p(y|d_greedy) * max_d' u(d' | posterior(d_greedy, y))"
                    .into(),
            axis_roles: "axes bind to model roles by name (gap_acceptance: t_cr, sigma; \
                         visual_psychometric: b and s in either order; memory_retention: a, b)"
                .into(),
            diagnostics_averaging:
                "utility differences and myopic maximal utilities are averaged across \
                 replications per trial; the reported ratio is mean difference over mean \
                 maximal utility; curve snapshots are averaged pointwise"
                    .into(),
        }
    }
}

/// What a command did: the config it ran, where results went, and under which
/// conventions. Serializes to JSON and round-trips losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Engine name and version.
    pub engine: String,
    /// The subcommand and its arguments, as one display string.
    pub command: String,
    /// Base RNG seed the run used.
    pub seed: u64,
    /// Unix timestamp (seconds) when the run finished.
    pub created_unix: u64,
    /// Full echo of the executed configuration.
    pub config: ExperimentConfig,
    /// Every file the command wrote, relative to the manifest.
    pub outputs: Vec<String>,
    /// Interpretation notes for the outputs.
    pub conventions: Conventions,
}

impl RunManifest {
    /// Builds a manifest around a finished run.
    pub fn new(
        command: impl Into<String>,
        config: ExperimentConfig,
        outputs: Vec<String>,
        created_unix: u64,
    ) -> Self {
        RunManifest {
            engine: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command: command.into(),
            seed: config.run.seed,
            created_unix,
            config,
            outputs,
            conventions: Conventions::standard(),
        }
    }

    /// JSON form of the manifest.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest structs always serialize")
    }

    /// Parses a manifest back from JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::Error::ConfigSyntax {
            detail: format!("manifest: {e}"),
        })
    }
}
