//! `key = value` option files. Keys are long option names without the
//! leading dashes; underscores and dashes are interchangeable.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    origin: String,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{origin}:{}: expected key = value", i + 1);
            };
            let key = key.trim().replace('_', "-");
            if values.insert(key.clone(), value.trim().to_owned()).is_some() {
                bail!("{origin}:{}: duplicate key {key:?}", i + 1);
            }
        }
        Ok(Self { values, origin: origin.to_owned() })
    }

    /// Rejects keys the running command does not understand.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        if let Some(key) = self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            bail!("{}: unknown key {key:?} (accepted: {})", self.origin, allowed.join(", "));
        }
        Ok(())
    }

    /// The flag value if given, otherwise the file value, otherwise `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("{}: bad value {raw:?} for {key}: {e}", self.origin),
            },
        }
    }

    pub fn pick_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Boolean switches: set on the command line, or `true`/`false` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}
