//! Line-oriented `key = value` text used by config, meta and scenario files.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KvLine {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `text` into key/value pairs. `#` starts a comment anywhere on a line;
/// blank lines are skipped. Duplicate keys are left to the caller.
pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<KvLine>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                reason: "empty key".into(),
            });
        }
        out.push(KvLine {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn parse_value<T: std::str::FromStr>(kv: &KvLine, path: &Path) -> Result<T> {
    kv.value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: kv.line,
        reason: format!("invalid value `{}` for `{}`", kv.value, kv.key),
    })
}
