//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys
//! are case-sensitive and may appear once. A manifest written after a run
//! uses the same format, so it can be fed back as a config.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key the run commands understand.
pub const KNOWN_KEYS: &[&str] = &[
    "task",
    "dataset",
    "graph",
    "count",
    "n",
    "m",
    "n_points",
    "k_neighbors",
    "n_color_clusters",
    "n_min",
    "n_max",
    "hidden",
    "latent",
    "edge_ratio",
    "node_ratio",
    "keep_ratio",
    "target",
    "strategy",
    "encoder",
    "decode",
    "epochs",
    "patience",
    "batch_size",
    "lr",
    "lr_node",
    "lr_edge",
    "train_ratio",
    "val_ratio",
    "seed",
    "out",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    source: String,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CliError::Config {
                file: source.to_string(),
                line: Some(i + 1),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(err(format!("key `{key}` has no value")));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(err(format!("key `{key}` is set twice")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Error about this config as a whole.
    pub fn error(&self, message: impl Into<String>) -> CliError {
        CliError::Config {
            file: self.source.clone(),
            line: None,
            message: message.into(),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|e: T::Err| self.error(format!("key `{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Config text with every key sorted, preceded by `header` comment lines.
    pub fn render(&self, header: &[String]) -> String {
        let mut out: String = header.iter().map(|h| format!("# {h}\n")).collect();
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
