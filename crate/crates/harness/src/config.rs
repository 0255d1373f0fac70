//! Versioned TOML experiment configuration.
//!
//! Unknown keys are rejected. Errors name the offending field path.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use devlab::data::GeneratorSpec;
use devlab::postselect::{ArchParams, ScalarEstimate};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub task: String,
    /// Master seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    pub conditions: Conditions,
    pub dataset: GeneratorSpec,
    pub trainer: TrainerSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub crossval: CrossvalSection,
    #[serde(default)]
    pub compare: Option<CompareSection>,
}

/// The three conditions every comparison is made under. Printed verbatim
/// in each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conditions {
    /// Restrictions on the learning framework.
    pub framework: String,
    /// The training experience the system receives.
    pub experience: String,
    /// Bounds on computational resources.
    pub resources: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainerKind {
    Dn,
    Backprop,
    NnThreshold,
}

impl TrainerKind {
    pub fn name(self) -> &'static str {
        match self {
            TrainerKind::Dn => "dn",
            TrainerKind::Backprop => "backprop",
            TrainerKind::NnThreshold => "nn-threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSpec {
    pub kind: TrainerKind,
    /// Hyper-parameters shared by every architecture.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of initial-weight seeds `n`.
    #[serde(default = "one")]
    pub seeds: usize,
    /// Scalars estimated as `mean +- sigma`; each contributes three points.
    #[serde(default)]
    pub scalars: Vec<ScalarEstimate>,
    /// Explicit architectures, used instead of `scalars` when present.
    #[serde(default)]
    pub architectures: Vec<BTreeMap<String, f64>>,
    /// Record per-cell wall time (makes the table non-reproducible).
    #[serde(default)]
    pub record_wall_time: bool,
}

fn one() -> usize {
    1
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            seeds: 1,
            scalars: Vec::new(),
            architectures: Vec::new(),
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    /// `(T, V, T')` fractions; the remainder is the audit set `T''`.
    pub fractions: [f64; 3],
    /// Replace the validation set with the training set, to demonstrate
    /// the degenerate protocol.
    #[serde(default)]
    pub force_validation_overlap: bool,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            fractions: [0.5, 0.2, 0.2],
            force_validation_overlap: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    /// Independent repeats of the luckiest-network audit; 0 disables it.
    #[serde(default)]
    pub repeats: usize,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossvalSection {
    pub folds: usize,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        Self { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub epochs: usize,
    /// Hyper-parameters of the single DN.
    #[serde(default)]
    pub dn: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("config field `{path}`: {}", e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            bail!(
                "config field `schema`: version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            );
        }
        if self.grid.seeds == 0 {
            bail!("config field `grid.seeds`: must be at least 1");
        }
        let [t, v, e] = self.partition.fractions;
        if [t, v, e].iter().any(|f| f.is_nan() || *f <= 0.0) || t + v + e > 1.0 + 1e-12 {
            bail!("config field `partition.fractions`: must be positive with sum <= 1");
        }
        if self.crossval.folds < 2 {
            bail!("config field `crossval.folds`: must be at least 2");
        }
        if self.audit.repeats > 0 && self.audit.repeats < 10 {
            bail!("config field `audit.repeats`: use 0 (off) or at least 10");
        }
        if self.audit.repeats > 0 && t + v + e >= 1.0 - 1e-12 {
            bail!("config field `partition.fractions`: the audit needs a remainder for T''");
        }
        for s in &self.grid.scalars {
            if s.sigma.is_nan() || s.sigma < 0.0 || !s.mean.is_finite() {
                bail!("config field `grid.scalars.{}`: need finite mean and sigma >= 0", s.name);
            }
        }
        Ok(())
    }

    /// Canonical serialization: field order fixed by the schema.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The architecture list: explicit ones if given, else the product of
    /// the scalar grids, each merged over the shared trainer parameters.
    pub fn architectures(&self) -> Vec<ArchParams> {
        let base = ArchParams(self.trainer.params.clone());
        if !self.grid.architectures.is_empty() {
            return self
                .grid
                .architectures
                .iter()
                .map(|a| {
                    let mut p = base.clone();
                    for (k, v) in a {
                        p = p.with(k, *v);
                    }
                    p
                })
                .collect();
        }
        let mut archs = vec![base];
        for s in &self.grid.scalars {
            archs = archs
                .into_iter()
                .flat_map(|a| s.points().into_iter().map(move |v| a.clone().with(&s.name, v)))
                .collect();
        }
        archs
    }

    pub fn fractions(&self) -> (f64, f64, f64) {
        let [t, v, e] = self.partition.fractions;
        (t, v, e)
    }
}
