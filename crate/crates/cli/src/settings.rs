//! Layered settings: command-line flag, then `--config` file, then built-in default.

use std::collections::{BTreeMap, BTreeSet};
use std::cell::RefCell;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use log::warn;
use mme::io::parse_settings;

/// Environment variable consulted for the seed when neither the flag nor the config
/// file sets one.
pub const SEED_ENV: &str = "MME_SEED";

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    read: RefCell<BTreeSet<String>>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let values = parse_settings(&text).map_err(|e| e.with_path(path))?;
        Ok(Self {
            values,
            read: RefCell::default(),
        })
    }

    /// `flag` if given, else the config value for `key`.
    pub fn get<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.read.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}")),
        }
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T>(&self, flag: Option<&str>, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw: Option<String> = self.get(flag.map(str::to_string), key)?;
        raw.map(|s| {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<T>().map_err(|e| anyhow!("`{key}`: cannot parse `{t}`: {e}")))
                .collect()
        })
        .transpose()
    }

    /// Seed from the flag, the config file, then `MME_SEED`, then `default`.
    pub fn seed(&self, flag: Option<u64>, default: u64) -> Result<u64> {
        if let Some(s) = self.get(flag, "seed")? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(raw) => raw.trim().parse().map_err(|e| anyhow!("{SEED_ENV}: cannot parse `{raw}`: {e}")),
            Err(_) => Ok(default),
        }
    }

    /// Warn about config keys no setting looked at.
    pub fn warn_unused(&self) {
        let read = self.read.borrow();
        for key in self.values.keys().filter(|k| !read.contains(*k)) {
            warn!("config key `{key}` is not used by this command");
        }
    }
}
