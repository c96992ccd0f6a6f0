//! Flat key=value config files. Every command accepts --config PATH; values
//! there fill in any flag the user left unset, so flags always win.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use spcatv::{Error, Result};

/// Parsed config file contents. Keys use the flag spelling without the
/// leading dashes, e.g. `global-weight=0.1`.
#[derive(Debug, Default)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    /// Loads `path` if given, otherwise an empty config. Blank lines and
    /// lines starting with `#` are skipped; everything else must be `key=value`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "{}: line {}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::InvalidParameter(format!("config key {key}={raw}: {e}"))),
        }
    }

    /// The flag value when present, else the config-file value, else None.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Like [`resolve`](Self::resolve) with a default for fully unset values.
    pub fn resolve_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.resolve(flag, key)?.unwrap_or(default))
    }

    /// Paths come through FromStr infallibly.
    pub fn resolve_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.map.get(key).map(PathBuf::from))
    }
}

/// Rejects a missing value with a usage error naming the flag.
pub fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("missing required --{flag}")))
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("{what} entry {tok:?}: {e}")))
        })
        .collect()
}
