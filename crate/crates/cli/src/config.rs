use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use affordsim_core::harness::TtaOptions;
use affordsim_core::policy::PolicyKind;
use affordsim_core::{AiaConfig, Category};

/// Run configuration read from TOML or JSON. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub categories: Vec<Category>,
    pub episodes_per_category: usize,
    pub seed: u64,
    pub resolution: [u32; 2],
    pub aia: AiaConfig,
    pub tta: TtaOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Oracle,
            categories: Category::ALL.to_vec(),
            episodes_per_category: 100,
            seed: 0,
            resolution: [336, 336],
            aia: AiaConfig::default(),
            tta: TtaOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            Some("toml") => toml::from_str(&text)?,
            _ => bail!("config must be .toml or .json: {}", path.display()),
        };
        Ok(cfg)
    }
}

/// Parses `WxH`.
pub fn parse_resolution(s: &str) -> Result<[u32; 2]> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .context("resolution must look like 336x336")?;
    let r = [w.trim().parse()?, h.trim().parse()?];
    if r[0] == 0 || r[1] == 0 {
        bail!("resolution must be positive");
    }
    Ok(r)
}

pub fn parse_categories(s: &str) -> Result<Vec<Category>> {
    if s == "all" {
        return Ok(Category::ALL.to_vec());
    }
    s.split(',')
        .map(|c| c.trim().parse::<Category>().map_err(Into::into))
        .collect()
}
