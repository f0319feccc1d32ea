//! Run manifests: everything needed to repeat a study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StepperName {
    Jasdm,
    Em,
}

/// Study parameters, tagged by subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Study {
    Simulate {
        paths: u64,
        dump_noise: bool,
    },
    Convergence {
        delta_exponents: Vec<u32>,
        batches: usize,
        per_batch: usize,
        ref_exponent: u32,
        sup_error: bool,
    },
    MeanReversion {
        t_multiplier: u64,
        paths: u64,
    },
    Moments {
        powers: Vec<f64>,
        paths: u64,
    },
    Audit {
        paths: u64,
        stepper: StepperName,
    },
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Simulate { .. } => "simulate",
            Study::Convergence { .. } => "convergence",
            Study::MeanReversion { .. } => "mean-reversion",
            Study::Moments { .. } => "moments",
            Study::Audit { .. } => "audit",
        }
    }
}

/// Derived scheme settings, recorded for readers of the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub theta: f64,
    pub m: f64,
    pub l: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    #[serde(flatten)]
    pub study: Study,
    pub master_seed: u64,
    /// Model file with every default resolved.
    pub config: ConfigFile,
    pub scheme: SchemeSummary,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
