//! Run files: a `[run]` table naming the problem plus a `[train]` table of
//! training settings. A manifest is a run file with results appended, so any
//! manifest can be fed back to `train --config` to reproduce its run.

use std::collections::BTreeMap;
use std::path::Path;

use pinnbias::problems::{catalog, BoundaryMode, Problem, ProblemId};
use pinnbias::trainer::{ConvergenceReport, Status, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub problem: ProblemId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

impl RunSpec {
    pub fn problem(&self) -> Result<Problem<f64>> {
        Ok(catalog(self.problem, self.k, self.boundary)?)
    }
}

/// What `--config` accepts. Unknown top-level sections are ignored so that
/// manifests load as run files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    #[serde(default)]
    pub run: Option<RunSpec>,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_owned(),
            source,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u64>,
    pub final_error: f64,
    pub best_error: f64,
    pub best_iteration: u64,
    pub checkpoints: usize,
}

impl ResultSummary {
    pub fn new(report: &ConvergenceReport, checkpoints: usize) -> Self {
        let iteration = match report.status {
            Status::Converged(i) | Status::Diverged(i) => Some(i),
            Status::BudgetExhausted => None,
        };
        ResultSummary {
            status: report.status.name().to_owned(),
            iteration,
            final_error: report.final_error,
            best_error: report.best_error,
            best_iteration: report.best_iteration,
            checkpoints,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub started: String,
    pub finished: String,
    pub run: RunSpec,
    pub train: TrainConfig,
    pub result: ResultSummary,
    /// Artifact name to path relative to the manifest's directory.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)?;
        std::fs::write(path, text).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_owned(),
            source,
        })
    }
}
