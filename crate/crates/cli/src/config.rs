//! `key = value` configuration files and command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: String, line: usize },
    Flag,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Flag => f.write_str("command line"),
            Origin::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {msg}")]
    At { origin: Origin, msg: String },
    #[error("{0}")]
    Other(String),
}

impl ConfigError {
    fn at(origin: &Origin, msg: impl Into<String>) -> Self {
        ConfigError::At {
            origin: origin.clone(),
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub origin: Origin,
}

/// Raw `key → value` pairs; later insertions override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Entry>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl RawConfig {
    /// Parses file text. Blank lines and `#` comments are skipped; a key may
    /// appear only once per file.
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let origin = Origin::File {
                path: path.to_string(),
                line: idx + 1,
            };
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::at(
                    &origin,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = normalize(k.trim());
            let value = v.trim();
            if !valid_key(&key) {
                return Err(ConfigError::at(&origin, format!("invalid key `{}`", k.trim())));
            }
            if value.is_empty() {
                return Err(ConfigError::at(&origin, format!("key `{key}` has no value")));
            }
            if let Some(prev) = cfg.entries.get(&key) {
                return Err(ConfigError::at(
                    &origin,
                    format!("key `{key}` already set at {}", prev.origin),
                ));
            }
            cfg.entries.insert(
                key,
                Entry {
                    value: value.to_string(),
                    origin,
                },
            );
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Other(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set_flag(&mut self, key: &str, value: &str) {
        self.entries.insert(
            normalize(key),
            Entry {
                value: value.to_string(),
                origin: Origin::Flag,
            },
        );
    }

    pub fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }
}

/// Config keys use dashes; underscores are accepted as a spelling of them.
pub fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

/// One experiment parameter: name, default value, meaning.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

/// Parameters after defaults are filled in and unknown keys rejected.
#[derive(Debug, Clone)]
pub struct Params {
    values: BTreeMap<String, Entry>,
}

impl Params {
    pub fn resolve(mut raw: RawConfig, keys: &[Key], experiment: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for k in keys {
            let entry = raw.take(k.name).unwrap_or(Entry {
                value: k.default.to_string(),
                origin: Origin::Default,
            });
            values.insert(k.name.to_string(), entry);
        }
        if let Some((name, entry)) = raw.entries.into_iter().next() {
            let known: Vec<&str> = keys.iter().map(|k| k.name).collect();
            return Err(ConfigError::at(
                &entry.origin,
                format!(
                    "unknown key `{name}` for experiment {experiment} (known: {})",
                    known.join(", ")
                ),
            ));
        }
        Ok(Params { values })
    }

    /// Resolved values in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn entry(&self, key: &str) -> &Entry {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("parameter `{key}` is not declared for this experiment"))
    }

    fn bad(&self, key: &str, what: &str) -> ConfigError {
        let e = self.entry(key);
        ConfigError::at(
            &e.origin,
            format!("key `{key}`: expected {what}, got `{}`", e.value),
        )
    }

    pub fn str(&self, key: &str) -> &str {
        &self.entry(key).value
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        parse_f64(self.str(key)).ok_or_else(|| self.bad(key, "a finite number"))
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.str(key)
            .parse()
            .map_err(|_| self.bad(key, "a nonnegative integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.str(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.bad(key, "true or false")),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.list(key)
            .map(parse_f64)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.bad(key, "a comma-separated list of numbers"))
    }

    pub fn list(&self, key: &str) -> impl Iterator<Item = &str> {
        self.str(key).split(',').map(str::trim).filter(|s| !s.is_empty())
    }

    /// `key` must be one of `choices`.
    pub fn choice<'a>(&self, key: &str, choices: &[&'a str]) -> Result<&'a str, ConfigError> {
        let v = self.str(key);
        choices
            .iter()
            .find(|c| c.eq_ignore_ascii_case(v))
            .copied()
            .ok_or_else(|| self.bad(key, &format!("one of {}", choices.join(", "))))
    }

    /// Error attributed to where `key` was set.
    pub fn invalid(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError::at(&self.entry(key).origin, format!("key `{key}`: {msg}"))
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[Key] = &[key("roof", "1", "roof"), key("eps", "0.1,0.05", "grid")];

    #[test]
    fn parses_comments_and_lists() {
        let text = "# header\nroof = 2   # trailing\n\neps=0.2, 0.1\n";
        let raw = RawConfig::parse(text, "c.cfg").unwrap();
        let p = Params::resolve(raw, KEYS, "abramov").unwrap();
        assert_eq!(p.f64("roof").unwrap(), 2.0);
        assert_eq!(p.f64_list("eps").unwrap(), vec![0.2, 0.1]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RawConfig::parse("roof = 1\nnonsense\n", "c.cfg").unwrap_err();
        assert_eq!(err.to_string(), "c.cfg:2: expected `key = value`, got `nonsense`");
        let raw = RawConfig::parse("\n\nbogus = 3\n", "c.cfg").unwrap();
        let err = Params::resolve(raw, KEYS, "abramov").unwrap_err().to_string();
        assert!(err.starts_with("c.cfg:3: unknown key `bogus`"), "{err}");
        let raw = RawConfig::parse("roof = abc", "c.cfg").unwrap();
        let p = Params::resolve(raw, KEYS, "abramov").unwrap();
        assert_eq!(
            p.f64("roof").unwrap_err().to_string(),
            "c.cfg:1: key `roof`: expected a finite number, got `abc`"
        );
    }

    #[test]
    fn flags_override_file_values() {
        let mut raw = RawConfig::parse("roof = 2", "c.cfg").unwrap();
        raw.set_flag("roof", "3");
        let p = Params::resolve(raw, KEYS, "abramov").unwrap();
        assert_eq!(p.f64("roof").unwrap(), 3.0);
        assert_eq!(
            p.iter().find(|(k, _)| *k == "roof").unwrap().1.origin,
            Origin::Flag
        );
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = RawConfig::parse("roof = 1\nroof = 2", "c.cfg").unwrap_err();
        assert!(err.to_string().contains("already set at c.cfg:1"));
    }
}
