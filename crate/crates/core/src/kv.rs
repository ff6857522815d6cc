//! Minimal `key: value` / `key = value` text format used by the map
//! metadata, filter and experiment configuration files.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let split = line.find([':', '=']).ok_or_else(|| {
                Error::parse(
                    format!("{source}:{}", lineno + 1),
                    format!("expected `key: value`, got `{line}`"),
                )
            })?;
            let key = line[..split].trim();
            let value = line[split + 1..].trim();
            if key.is_empty() {
                return Err(Error::parse(
                    format!("{source}:{}", lineno + 1),
                    "empty key",
                ));
            }
            entries.insert(key.to_string(), value.to_string());
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::parse(
                    format!("{}:{key}", self.source),
                    format!("cannot parse `{v}`"),
                )
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| {
            Error::parse(self.source.clone(), format!("missing required key `{key}`"))
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Entries of `other` replace or extend these.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Copy holding only the entries whose key is in `keys`.
    pub fn subset(&self, keys: &[&str]) -> KeyValues {
        KeyValues {
            source: self.source.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keys.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_subset() {
        let mut a = KeyValues::parse("x: 1\ny: 2", "a").unwrap();
        let b = KeyValues::parse("y: 3\nz: 4", "b").unwrap();
        a.merge(&b);
        a.set("w", 5);
        assert_eq!(a.keys().collect::<Vec<_>>(), ["w", "x", "y", "z"]);
        assert_eq!(a.require::<i32>("y").unwrap(), 3);
        assert_eq!(a.subset(&["x", "q"]).keys().collect::<Vec<_>>(), ["x"]);
    }

    #[test]
    fn accepts_both_separators_and_comments() {
        let kv = KeyValues::parse("a: 1\n# c\nb = 2.5 # tail\n\n", "t").unwrap();
        assert_eq!(kv.require::<i32>("a").unwrap(), 1);
        assert_eq!(kv.require::<f64>("b").unwrap(), 2.5);
        assert!(kv.get::<f64>("missing").unwrap().is_none());
    }

    #[test]
    fn rejects_garbage() {
        assert!(KeyValues::parse("nonsense", "t").is_err());
        let kv = KeyValues::parse("a: x", "t").unwrap();
        assert!(kv.require::<f64>("a").is_err());
    }
}
