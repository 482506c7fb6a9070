//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment. Values may be scalars, comma
//! lists (`a,b,c`) or inclusive ranges (`start:stop:step`).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Parse(format!("line {line_no}: empty key")));
            }
            if entries
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fails on any key outside `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Parse(format!(
                "unknown key `{k}` (expected one of: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
    }

    pub fn scalar<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|v| parse_scalar(key, v)).transpose()
    }

    pub fn required_scalar<T: FromStr>(&self, key: &str) -> Result<T> {
        parse_scalar(key, self.require(key)?)
    }

    pub fn real_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key).map(|v| parse_real_list(key, v)).transpose()
    }

    pub fn integer_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.raw(key).map(|v| parse_integer_list(key, v)).transpose()
    }
}

fn parse_scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("`{key}`: cannot parse `{v}`")))
}

/// Parses `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_real_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let v = v.trim();
    if v.contains(':') {
        let parts: Vec<f64> = v
            .split(':')
            .map(|p| parse_scalar::<f64>(key, p))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(Error::Parse(format!("`{key}`: range must be start:stop:step")));
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::Parse(format!("`{key}`: empty or malformed range `{v}`")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        if count > 1_000_000 {
            return Err(Error::Parse(format!("`{key}`: range has too many points")));
        }
        return Ok((0..=count).map(|i| start + i as f64 * step).collect());
    }
    let list: Vec<f64> = v
        .split(',')
        .map(|p| parse_scalar::<f64>(key, p))
        .collect::<Result<_>>()?;
    Ok(list)
}

pub fn parse_integer_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let v = v.trim();
    if v.contains(':') {
        let parts: Vec<usize> = v
            .split(':')
            .map(|p| parse_scalar::<usize>(key, p))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(Error::Parse(format!("`{key}`: range must be start:stop:step")));
        };
        if step == 0 || stop < start {
            return Err(Error::Parse(format!("`{key}`: empty or malformed range `{v}`")));
        }
        return Ok((start..=stop).step_by(step).collect());
    }
    v.split(',').map(|p| parse_scalar::<usize>(key, p)).collect()
}
