//! Versioned run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use calibra::hardness::ExperimentConfig;
use calibra::learn::LearnerConfig;
use calibra::{DecisionRule, LossFunction};
use serde::{Deserialize, Serialize};

pub const RUN_SCHEMA: &str = "calibra.run";
pub const RUN_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Generate,
    Audit,
    Learn,
    Rules,
    Omnipredict,
    Hardness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Plotdata,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "plotdata" => Ok(Format::Plotdata),
            other => Err(format!("unknown format {other:?} (json, csv, plotdata)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub size: usize,
    pub k: usize,
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default)]
    pub ordered: bool,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default)]
    pub with_predictor: bool,
}

fn default_groups() -> usize {
    4
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    MaCw,
    MaThreshold,
    McCw,
    McFull,
    Mad,
    Mac,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub metrics: Vec<MetricName>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub rule: Option<DecisionRule>,
    #[serde(default)]
    pub loss: Option<LossFunction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesSpec {
    pub rule: DecisionRule,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmniSpec {
    pub loss: LossFunction,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardnessSpec {
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub rule: Option<DecisionRule>,
    #[serde(default)]
    pub loss: Option<LossFunction>,
}

/// Parsed config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub version: u32,
    #[serde(default)]
    pub command: Option<Command>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub formats: Option<Vec<Format>>,
    #[serde(default)]
    pub learner: Option<LearnerConfig>,
    /// Extra alphas for the learn command's gap-vs-alpha curve.
    #[serde(default)]
    pub sweep_alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub generate: Option<GenerateSpec>,
    #[serde(default)]
    pub audit: Option<AuditSpec>,
    #[serde(default)]
    pub rules: Option<RulesSpec>,
    #[serde(default)]
    pub omnipredict: Option<OmniSpec>,
    #[serde(default)]
    pub hardness: Option<HardnessSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.schema != RUN_SCHEMA || cfg.version != RUN_VERSION {
            bail!("unsupported config schema {} v{} (expected {RUN_SCHEMA} v{RUN_VERSION})", cfg.schema, cfg.version);
        }
        if let Some(inp) = &cfg.input {
            if inp.is_relative() {
                cfg.input = Some(path.parent().unwrap_or(Path::new(".")).join(inp));
            }
        }
        Ok(cfg)
    }

    /// Checks that the section for `cmd` is present and inputs exist.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        if let Some(c) = self.command {
            if c != cmd {
                bail!("config is for command {c:?}, invoked as {cmd:?}");
            }
        }
        if self.seeds.is_empty() {
            bail!("seed list is empty");
        }
        let needs_input = matches!(cmd, Command::Audit | Command::Learn | Command::Omnipredict);
        if needs_input {
            match &self.input {
                Some(p) if p.exists() => {}
                Some(p) => bail!("input {} does not exist", p.display()),
                None => bail!("command {cmd:?} needs an input instance"),
            }
        }
        let present = match cmd {
            Command::Generate => self.generate.is_some(),
            Command::Audit => self.audit.is_some(),
            Command::Learn => self.learner.is_some(),
            Command::Rules => self.rules.is_some(),
            Command::Omnipredict => self.omnipredict.is_some(),
            Command::Hardness => self.hardness.is_some(),
        };
        if !present {
            bail!("config lacks the section for command {cmd:?}");
        }
        Ok(())
    }
}
