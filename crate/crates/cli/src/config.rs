//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names of the selected subcommand, with `_` or `-`
//! as separator. Entries are inserted ahead of the command-line flags, so
//! explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::Context;
use clap::{ArgAction, Command};

use crate::errors::{InputContext, InputError};

pub fn parse(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| InputError::msg(format!("config line {}: expected 'key = value', got '{raw}'", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(InputError::msg(format!("config line {}: empty key", n + 1)).into());
        }
        entries.push((key, value));
    }
    Ok(entries)
}

fn parse_bool(key: &str, value: &str) -> anyhow::Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(InputError::msg(format!("config key '{key}' expects a boolean, got '{value}'")).into()),
    }
}

fn load(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .input()?;
    parse(&text)
}

/// Removes `--config FILE` from `args` and splices the file's entries in
/// right after the subcommand name.
pub fn expand(args: Vec<OsString>, root: &Command) -> anyhow::Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = iter.next().ok_or_else(|| InputError::msg("--config needs a file"))?;
            config = Some(path);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let entries = load(Path::new(&path))?;

    let Some((pos, sub)) = rest
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| root.find_subcommand(a).map(|c| (i, c)))
    else {
        return Err(InputError::msg("--config needs a subcommand").into());
    };
    let explicit = |key: &str| {
        rest[pos + 1..].iter().any(|a| {
            let a = a.to_string_lossy();
            a.strip_prefix("--")
                .is_some_and(|f| f == key || f.strip_prefix(key).is_some_and(|t| t.starts_with('=')))
        })
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| InputError::msg(format!("config key '{key}' is not a flag of '{}'", sub.get_name())))?;
        if explicit(&key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                if parse_bool(&key, &value)? {
                    injected.push(OsString::from(format!("--{key}")));
                }
            }
            ArgAction::SetFalse => {
                if !parse_bool(&key, &value)? {
                    injected.push(OsString::from(format!("--{key}")));
                }
            }
            _ => injected.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}
