//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! geom.face_eps = 1e-6
//! sequence.cap = 24        # or "none"
//! dataset.augment = cut_and_order
//! annotate.url = http://localhost:8080/v1/describe
//! ```
//!
//! Keys are `section.name`; unknown keys are errors. The annotation API key
//! is read from the environment only.

use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::PipelineConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::Value {
        line,
        key: key.to_string(),
        msg: e.to_string(),
    })
}

/// Applies one setting.
pub fn set(cfg: &mut PipelineConfig, line: usize, key: &str, raw: &str) -> Result<(), ConfigError> {
    let k = cfg;
    match key {
        "geom.boundary_eps" => k.kernel.boundary_eps = value(line, key, raw)?,
        "geom.face_eps" => k.kernel.face_eps = value(line, key, raw)?,
        "geom.mc_samples_overlap" => k.kernel.mc_samples_overlap = value(line, key, raw)?,
        "geom.mc_samples_face" => k.kernel.mc_samples_face = value(line, key, raw)?,
        "geom.seed" => k.kernel.seed = value(line, key, raw)?,
        "decompose.classify_samples" => k.decompose.classify_samples = value(line, key, raw)?,
        "decompose.empty_samples" => k.decompose.empty_samples = value(line, key, raw)?,
        "decompose.merge" => k.decompose.merge = value(line, key, raw)?,
        "decompose.seed" => k.decompose.seed = value(line, key, raw)?,
        "sequence.cap" => {
            k.order_cap = match raw {
                "none" | "inf" | "unlimited" => None,
                _ => Some(value(line, key, raw)?),
            }
        }
        "script.quantize_decimals" => k.quantize_decimals = value(line, key, raw)?,
        "dedup.enabled" => k.dedup = value(line, key, raw)?,
        "render.size" => k.render_size = value(line, key, raw)?,
        "annotate.url" => k.annotate.url = raw.to_string(),
        "annotate.model" => k.annotate.model = raw.to_string(),
        "annotate.prompt" => k.annotate.prompt = raw.to_string(),
        "annotate.timeout_ms" => k.annotate.timeout_ms = value(line, key, raw)?,
        "annotate.retries" => k.annotate.retries = value(line, key, raw)?,
        "annotate.max_concurrent" => k.annotate.max_concurrent = value(line, key, raw)?,
        "annotate.backoff_ms" => k.annotate.backoff_ms = value(line, key, raw)?,
        "annotate.api_key" => {
            return Err(ConfigError::Value {
                line,
                key: key.to_string(),
                msg: format!("set {} in the environment instead", crate::annotate::API_KEY_ENV),
            })
        }
        "dataset.augment" => k.augment = value(line, key, raw)?,
        "dataset.split_ratio" => k.split_ratio = value(line, key, raw)?,
        "dataset.min_cells" => k.min_cells = value(line, key, raw)?,
        "dataset.max_cells" => k.max_cells = value(line, key, raw)?,
        "dataset.seed" => k.seed = value(line, key, raw)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Parses config text on top of the defaults.
pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find(" #") {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, val) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        set(&mut cfg, line, key, val.trim())?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Sets every seed in the configuration.
pub fn apply_seed(cfg: &mut PipelineConfig, seed: u64) {
    cfg.seed = seed;
    cfg.kernel.seed = seed;
    cfg.decompose.seed = seed;
    cfg.decompose.kernel.seed = seed;
}
