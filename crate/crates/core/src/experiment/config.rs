use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn default_seed() -> u64 {
    1
}

fn default_workers() -> usize {
    1
}

fn default_p() -> f64 {
    2.0
}

fn default_multiplier() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
}

/// Inline drift given as an expression over `t`, `x(t)`, `y(t)`, `sup|y|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageSpec {
    /// `none`, `gaussian` or `uniform`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(rename = "K")]
    pub lipschitz: f64,
    #[serde(rename = "L")]
    pub growth: f64,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub peak_power: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default = "BudgetSpec::default_outer")]
    pub n_outer: usize,
    #[serde(default = "BudgetSpec::default_inner")]
    pub n_inner: usize,
    #[serde(default = "BudgetSpec::default_n_max")]
    pub n_max: usize,
    #[serde(default = "BudgetSpec::default_extra")]
    pub reference_extra: usize,
}

impl BudgetSpec {
    fn default_outer() -> usize {
        2000
    }
    fn default_inner() -> usize {
        200
    }
    fn default_n_max() -> usize {
        6
    }
    fn default_extra() -> usize {
        10
    }
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            n_outer: Self::default_outer(),
            n_inner: Self::default_inner(),
            n_max: Self::default_n_max(),
            reference_extra: Self::default_extra(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub json: bool,
}

/// Everything a run needs. Parsed from TOML; see `configs/` for examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<MessageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_multiplier")]
    pub mi_multiplier: f64,
    #[serde(default)]
    pub strict: bool,
    pub grid: GridSpec,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// A preset on `T = 1` with default budgets.
    pub fn preset(name: &str, steps: usize) -> Self {
        Self {
            preset: Some(name.to_string()),
            params: BTreeMap::new(),
            drift: None,
            message: None,
            constants: None,
            seed: default_seed(),
            workers: default_workers(),
            p: default_p(),
            mi_multiplier: default_multiplier(),
            strict: false,
            grid: GridSpec { horizon: 1.0, steps },
            budget: BudgetSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 of the canonical TOML form, with the `[output]` section
    /// cleared so the destination does not change the hash.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = OutputSpec::default();
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("field `{name}` {what}")))
            }
        };
        field(
            "grid.horizon",
            self.grid.horizon.is_finite() && self.grid.horizon > 0.0,
            "must be positive",
        )?;
        field("grid.steps", self.grid.steps > 0, "must be positive")?;
        field("budget.n_outer", self.budget.n_outer >= 2, "must be at least 2")?;
        field("budget.n_inner", self.budget.n_inner >= 1, "must be positive")?;
        field("budget.n_max", self.budget.n_max >= 1, "must be positive")?;
        field("p", self.p.is_finite() && self.p >= 1.0, "must be at least 1")?;
        field(
            "mi_multiplier",
            self.mi_multiplier.is_finite() && self.mi_multiplier > 0.0,
            "must be positive",
        )?;
        match (&self.preset, &self.drift) {
            (None, None) => Err(Error::Config("missing field `preset` (or an inline `drift`)".into())),
            (Some(_), Some(_)) => Err(Error::Config("give either `preset` or `drift`, not both".into())),
            (None, Some(_)) if self.constants.is_none() => Err(Error::Config(
                "missing field `constants`: an inline drift must declare K and L".into(),
            )),
            _ => Ok(()),
        }
    }
}
