//! `key=value` run configuration. Blank lines and `#` comments are
//! ignored; overrides given on the command line replace file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
enum Origin {
    Line(usize),
    Override,
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    source: String,
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut cfg = Config {
            source: source.to_string(),
            entries: BTreeMap::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{source}:{}: expected key=value, got {line:?}", i + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("{source}:{}: empty key", i + 1)));
            }
            let entry = Entry {
                value: v.trim().to_string(),
                origin: Origin::Line(i + 1),
            };
            if cfg.entries.insert(key.to_string(), entry).is_some() {
                return Err(CliError::Config(format!("{source}:{}: duplicate key {key:?}", i + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Config {
                source: "<none>".into(),
                ..Config::default()
            }),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Config::parse(&text, &p.display().to_string())
            }
        }
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {assignment:?}")))?;
        self.entries.insert(
            k.trim().to_string(),
            Entry {
                value: v.trim().to_string(),
                origin: Origin::Override,
            },
        );
        Ok(())
    }

    fn location(&self, key: &str) -> String {
        match self.entries.get(key).map(|e| &e.origin) {
            Some(Origin::Line(l)) => format!("{}:{l}", self.source),
            Some(Origin::Override) => "--set".to_string(),
            None => self.source.clone(),
        }
    }

    /// Rejects any key not in `allowed`, naming the key and where it was set.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "{}: unknown key {key:?} (allowed: {})",
                    self.location(key),
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.get_str(key)
            .ok_or_else(|| CliError::Config(format!("{}: missing required key {key:?}", self.source)))
    }

    fn invalid(&self, key: &str, what: impl fmt::Display) -> CliError {
        CliError::Config(format!("{}: invalid value for {key:?}: {what}", self.location(key)))
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.get_str(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| self.invalid(key, format!("{v:?} ({e})"))),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: Clone,
        T::Err: fmt::Display,
    {
        match self.get_str(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| self.invalid(key, format!("{s:?} ({e})"))))
                .collect(),
        }
    }

    /// Fails with the key's location unless `ok`.
    pub fn ensure(&self, ok: bool, key: &str, message: &str) -> Result<(), CliError> {
        if ok {
            Ok(())
        } else {
            Err(self.invalid(key, message))
        }
    }
}
