//! Flat `key=value` run recipes.
//!
//! A recipe pins every knob of an end-to-end run (target, corpus size,
//! seeds, model shape, budgets) in one file so a run can be reproduced
//! byte-for-byte later. Lines are `key=value`; `#` starts a comment;
//! blank lines are ignored. Values stay strings until a typed getter
//! parses them, so unknown keys pass through untouched.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Parsed recipe: an ordered map of string keys to string values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Recipe {
    entries: BTreeMap<String, String>,
}

impl Recipe {
    pub fn new() -> Recipe {
        Recipe::default()
    }

    /// Parses recipe text. Later duplicates of a key override earlier ones.
    pub fn parse(text: &str) -> Result<Recipe> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::contract(format!(
                    "recipe line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::contract(format!("recipe line {}: empty key", lineno + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Recipe { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Raw string value, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Required string value; errors when the key is missing.
    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::contract(format!("recipe is missing key {key:?}")))
    }

    fn parse_as<T>(&self, key: &str, value: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e| {
            Error::contract(format!("recipe key {key:?}: cannot parse {value:?} ({e})"))
        })
    }

    /// Typed value with a default used when the key is absent.
    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            Some(v) => self.parse_as(key, v),
            None => Ok(default),
        }
    }

    /// Typed value that must be present.
    pub fn require_as<T>(&self, key: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        let v = self.require(key)?;
        self.parse_as(key, v)
    }

    /// Serializes back to `key=value` lines in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k}={v}").expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_overrides() {
        let text = "\n# run pin\ntarget = toy-elf\ncount=2000 # corpus size\n\ncount=4000\n";
        let r = Recipe::parse(text).unwrap();
        assert_eq!(r.get("target"), Some("toy-elf"));
        assert_eq!(r.require_as::<usize>("count").unwrap(), 4000);
        assert_eq!(r.keys().count(), 2);
    }

    #[test]
    fn typed_getters_default_and_fail_loudly() {
        let r = Recipe::parse("hidden=64\nfraction=0.05\n").unwrap();
        assert_eq!(r.get_or("hidden", 8usize).unwrap(), 64);
        assert_eq!(r.get_or("epochs", 24usize).unwrap(), 24);
        assert_eq!(r.get_or("fraction", 0.1f64).unwrap(), 0.05);
        assert!(r.require("missing").is_err());
        let bad = Recipe::parse("hidden=sixty\n").unwrap();
        assert!(bad.require_as::<usize>("hidden").is_err());
    }

    #[test]
    fn malformed_lines_are_rejected_with_line_numbers() {
        let err = Recipe::parse("ok=1\nnot a pair\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(Recipe::parse("=value\n").is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let mut r = Recipe::new();
        r.set("target", "toy-jpg");
        r.set("count", 6000);
        let text = r.to_text();
        assert_eq!(text, "count=6000\ntarget=toy-jpg\n");
        assert_eq!(Recipe::parse(&text).unwrap(), r);
    }
}
