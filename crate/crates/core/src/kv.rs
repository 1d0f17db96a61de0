//! Flat `key=value` text files with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Formats a real with 17 significant digits in scientific notation.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Ordered key/value document. Keys keep insertion order on output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn push_real(&mut self, key: &str, value: f64) {
        self.push(key, fmt_real(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse::<f64>()
            .map_err(|e| Error::Parse(format!("key `{key}`: `{raw}` is not a real ({e})")))
    }

    pub fn uint(&self, key: &str) -> Result<u64> {
        let raw = self.require(key)?;
        raw.parse::<u64>().map_err(|e| {
            Error::Parse(format!(
                "key `{key}`: `{raw}` is not an unsigned integer ({e})"
            ))
        })
    }

    /// Later duplicates win, matching how `get` resolves them.
    pub fn into_map(self) -> BTreeMap<String, String> {
        self.entries.into_iter().collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key=value", lineno + 1))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
            }
            doc.push(k, v.trim());
        }
        Ok(doc)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let doc = KvDoc::parse("# header\n a = 1.5 \n\nb=2 # trailing\n").unwrap();
        assert_eq!(doc.real("a").unwrap(), 1.5);
        assert_eq!(doc.uint("b").unwrap(), 2);
        assert!(doc.get("c").is_none());
    }

    #[test]
    fn rejects_lines_without_separator() {
        assert!(matches!(KvDoc::parse("oops\n"), Err(Error::Parse(_))));
        assert!(matches!(KvDoc::parse("=3\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_real(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }
}
