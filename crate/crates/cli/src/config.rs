use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Defaults for subcommand arguments, read from a TOML file. Any flag given
/// on the command line wins over the file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub records: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub shards: Option<u32>,
    pub nodes: Option<u32>,
    pub epsilon: Option<f64>,
    pub seasonal_factor: Option<f64>,
    pub headers: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub rules: Option<PathBuf>,
}

impl PipelineConfig {
    /// Relative paths in the file are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.records,
            &mut cfg.model,
            &mut cfg.index_dir,
            &mut cfg.graph,
            &mut cfg.headers,
            &mut cfg.lexicons,
            &mut cfg.keywords,
            &mut cfg.rules,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shards == Some(0) {
            bail!("config: shards must be at least 1");
        }
        if self.nodes == Some(0) {
            bail!("config: nodes must be at least 1");
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                bail!("config: epsilon must be positive, got {e}");
            }
        }
        if let Some(f) = self.seasonal_factor {
            if !(f > 0.0 && f.is_finite()) {
                bail!("config: seasonal_factor must be positive, got {f}");
            }
        }
        Ok(())
    }
}

/// Flag value, else config value, else an error naming both.
pub fn require<T: Clone>(flag: Option<T>, config: &Option<T>, name: &str) -> Result<T> {
    match flag.or_else(|| config.clone()) {
        Some(v) => Ok(v),
        None => bail!(
            "missing --{} (or `{}` in the config file)",
            name.replace('_', "-"),
            name
        ),
    }
}
