//! Campaign configuration file. Every field is optional; command-line flags
//! override file values and per-command defaults fill whatever is left.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Subcommand a manifest was written by.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub tableau: TableauSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub campaign: CampaignSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, rename = "assert")]
    pub checks: AssertSection,
    /// Provenance block; ignored as input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableauSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive: Option<bool>,
    /// `strong1`, `weak2`, or `none`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub require: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// A ladder written either as text (`"2^-4..2^-8"`) or as numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Steps {
    Text(String),
    Value(f64),
    Values(Vec<f64>),
}

impl Steps {
    pub fn resolve(&self) -> Result<Vec<f64>, crate::ladder::LadderError> {
        match self {
            Steps::Text(s) => crate::ladder::parse_ladder(s),
            Steps::Value(v) => crate::ladder::parse_ladder(&v.to_string()),
            Steps::Values(v) => {
                let s: Vec<String> = v.iter().map(f64::to_string).collect();
                crate::ladder::parse_ladder(&s.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Steps>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_h: Option<Steps>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phis: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crn: Option<bool>,
    /// Compare each SRK method with its appurtenant companion instead of the
    /// reference solution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_chain: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plots: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
    /// Evolution: terminal RMSE ordering must follow η2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<bool>,
    /// Distribution: errors must decrease with h (one inversion within two
    /// standard errors allowed).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSection {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Config, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// TOML without the manifest block.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.manifest = None;
        toml::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Resolved configuration plus a provenance block; loading it with
    /// `--config` repeats the run.
    pub fn manifest(&self) -> String {
        let mut c = self.clone();
        c.manifest = Some(ManifestSection {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.hash(),
            seed: self.campaign.seed.unwrap_or(0),
        });
        toml::to_string(&c).expect("config serializes")
    }
}
