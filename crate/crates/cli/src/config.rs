//! Flat `key=value` config files. Keys use the long flag names; `-` and `_`
//! are interchangeable. Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

pub const OUT_ENV: &str = "REGCALC_OUT";
pub const DEFAULT_OUT: &str = "regcalc-out";

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        text.parse()
    }

    /// The flag value if given, else the parsed config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(&normalize(key))
            .map(|raw| raw.parse().map_err(|_| CliError::Config(format!("cannot parse {key} = '{raw}'"))))
            .transpose()
    }

    /// Flag, then config `out`, then the environment, then the fixed default.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        Ok(self
            .pick(flag, "out")?
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))
    }
}

impl FromStr for ConfigFile {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { values })
    }
}
