//! Shared conventions for the line-delimited text artifacts.
//!
//! Reals are written with Rust's shortest round-trip representation, so parsing a
//! written value always recovers the identical `f64`.

use crate::error::{Error, Result};

pub(crate) fn join_reals(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 20);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&x.to_string());
    }
    s
}

pub(crate) fn parse_real(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{what}: cannot parse {s:?} as a real"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("{what}: non-finite value {s:?}"),
        });
    }
    Ok(v)
}

pub(crate) fn parse_reals(s: &str, line: usize, what: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_real(t, line, what)).collect()
}

/// Parses `key=value` lines, ignoring blanks and `#` comments.
pub(crate) fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got {l:?}"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn kv_get<'a>(kv: &'a [(String, String)], key: &str) -> Result<&'a str> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing key {key:?}"),
        })
}
