//! Flat key-value config files: one `key = value` per line, `#` comments.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`, got `{1}`")]
    Malformed(usize, String),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}` as {ty}")]
    BadValue { key: String, value: String, ty: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed key-value pairs, insertion-order independent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Malformed(lineno + 1, raw.to_string()))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Malformed(lineno + 1, raw.to_string()));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate(key));
            }
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Overlay `other` on top of self (command-line overrides).
    pub fn merged(&self, other: &KeyValues) -> KeyValues {
        let mut map = self.map.clone();
        for (k, v) in &other.map {
            map.insert(k.clone(), v.clone());
        }
        KeyValues { map }
    }

    /// Rejects keys not present in `schema`.
    pub fn validate_keys<'a>(&self, schema: impl IntoIterator<Item = &'a str>) -> Result<(), ConfigError> {
        let allowed: std::collections::BTreeSet<&str> = schema.into_iter().collect();
        for key in self.map.keys() {
            if !allowed.contains(key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        Ok(())
    }

    /// Renders sorted `key = value` lines; parsing the output reproduces self.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str, ty: &'static str) -> Result<Option<T>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.clone(),
                ty,
            }),
        }
    }

    /// Comma-separated f64 list.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.clone(), ty: "f64 list" }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let kv = KeyValues::parse("# header\nsteps = 100\n\nlr = 0.001 # inline\n").unwrap();
        assert_eq!(kv.get("steps"), Some("100"));
        assert_eq!(kv.get("lr"), Some("0.001"));
    }

    #[test]
    fn rejects_malformed_and_duplicates() {
        assert!(matches!(KeyValues::parse("nonsense\n"), Err(ConfigError::Malformed(1, _))));
        assert!(matches!(KeyValues::parse("a = 1\na = 2\n"), Err(ConfigError::Duplicate(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let kv = KeyValues::parse("a = 1\nzzz = 2\n").unwrap();
        assert!(matches!(kv.validate_keys(["a"]), Err(ConfigError::UnknownKey(k)) if k == "zzz"));
    }

    #[test]
    fn render_roundtrips() {
        let kv = KeyValues::parse("b = 2\na = 1\n").unwrap();
        assert_eq!(KeyValues::parse(&kv.render()).unwrap(), kv);
    }

    #[test]
    fn lists_parse() {
        let kv = KeyValues::parse("sigmas = 0.2, 0.1,0.05\n").unwrap();
        assert_eq!(kv.get_f64_list("sigmas").unwrap().unwrap(), vec![0.2, 0.1, 0.05]);
    }
}
