//! Run configuration: one JSON document, overridden field by field from the command line.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lsicert::coupling::ModelSpec;
use lsicert::dynamics::{SimulationOptions, StudyFamily};
use lsicert::error::Error;
use lsicert::oracle::LSI_RESTARTS;
use lsicert::singlespin::STANDARD_MAGNITUDES;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RenormalizeConfig {
    /// Random σ configurations for the Gaussian identity check.
    pub sigma_samples: usize,
    /// Potential table covers `|ψ| ∈ [0, potentialRadius]`.
    pub potential_radius: f64,
    pub potential_rows: usize,
}

impl Default for RenormalizeConfig {
    fn default() -> Self {
        RenormalizeConfig {
            sigma_samples: 20,
            potential_radius: 5.0,
            potential_rows: 101,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpinStudyConfig {
    /// Field magnitudes, applied along three fixed directions.
    pub magnitudes: Vec<f64>,
    /// Optional density table (`{"radius", "nodes", "weights", "gamma"}`) replacing the sphere.
    pub density: Option<PathBuf>,
}

impl Default for SpinStudyConfig {
    fn default() -> Self {
        SpinStudyConfig {
            magnitudes: STANDARD_MAGNITUDES.to_vec(),
            density: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudyConfig {
    pub family: StudyFamily,
    pub sizes: Vec<usize>,
    pub betas: Vec<f64>,
    /// Chain seeds per cell; each is combined with the root seed.
    pub seeds: Vec<u64>,
    pub options: SimulationOptions,
    /// Write per-cell magnetization and energy traces (CSV format only).
    pub export_traces: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            family: StudyFamily::Sk,
            sizes: vec![32, 64, 128],
            betas: vec![0.2],
            seeds: vec![1, 2, 3, 4],
            options: SimulationOptions::default(),
            export_traces: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    pub sizes: Vec<usize>,
    pub samples_per_cell: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            betas: vec![0.1, 0.15, 0.2, 0.225, 0.25, 0.275, 0.3, 0.35],
            sizes: vec![100, 200, 400],
            samples_per_cell: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OracleConfig {
    /// Random certified instances to generate when no model is given.
    pub instances: usize,
    pub max_size: usize,
    pub restarts: usize,
    pub mixture_samples: usize,
    pub duplication_functions: usize,
    /// Include the optimising test function of the LSI search in the report.
    pub dump_optimizer: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            instances: 25,
            max_size: 8,
            restarts: LSI_RESTARTS,
            mixture_samples: 400_000,
            duplication_functions: 1000,
            dump_optimizer: false,
        }
    }
}

/// Effective configuration. Execution details (`out`, `workers`) are not echoed, so the
/// same experiment produces identical output wherever and however widely it runs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub spin_dimension: Option<usize>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub model: Option<ModelSpec>,
    pub renormalize: RenormalizeConfig,
    pub spin_study: SpinStudyConfig,
    pub study: StudyConfig,
    pub sweep: SweepConfig,
    pub oracle: OracleConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn spin_dimension(&self) -> usize {
        self.spin_dimension.unwrap_or(1)
    }
}
