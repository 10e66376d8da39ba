//! Flat `key = value` text records used for every report the toolkit emits.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvRecord {
    entries: Vec<(String, String)>,
}

impl KvRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Floats are written with 17 significant digits so they round-trip.
    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.entries.push((key.into(), format!("{value:.17e}")));
        self
    }

    /// Appends all entries of `other`, prefixing keys with `prefix.`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &KvRecord) -> &mut Self {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}.{k}"), v.clone()));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rec = KvRecord::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: missing '='", lineno + 1)))?;
            rec.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(rec)
    }
}

impl fmt::Display for KvRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_display_roundtrip() {
        let mut r = KvRecord::new();
        r.push("member", true).push_f64("gamma", 0.1 + 0.2);
        let back = KvRecord::parse(&r.to_string()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get_f64("gamma"), Some(0.1 + 0.2));
    }

    #[test]
    fn missing_equals_is_an_error() {
        assert!(KvRecord::parse("gamma 1.0").is_err());
    }
}
