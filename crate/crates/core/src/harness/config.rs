//! Flat `key = value` configuration files with `[section]` headers.
//!
//! Keys are long CLI flag names without the leading dashes. Entries before
//! any header or under `[common]` apply to every subcommand; entries under a
//! subcommand's own header apply only to it. `#` starts a comment.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub section: Option<String>,
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut section = None;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("config line {line}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(Error::Config(format!("config line {line}: empty section name")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {line}: expected `key = value`")))?;
        let key = key.trim();
        if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
            return Err(Error::Config(format!("config line {line}: bad key `{key}`")));
        }
        entries.push(ConfigEntry {
            section: section.clone(),
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(entries)
}

/// Command-line arguments equivalent to the entries that apply to
/// `subcommand`. `true`/`false` values toggle switches.
pub fn config_args(entries: &[ConfigEntry], subcommand: &str) -> Vec<String> {
    let mut args = Vec::new();
    for e in entries {
        let applies = match e.section.as_deref() {
            None | Some("common") => true,
            Some(s) => s == subcommand,
        };
        if !applies {
            continue;
        }
        match e.value.as_str() {
            "true" => args.push(format!("--{}", e.key)),
            "false" => {}
            v => {
                args.push(format!("--{}", e.key));
                args.push(v.to_string());
            }
        }
    }
    args
}
