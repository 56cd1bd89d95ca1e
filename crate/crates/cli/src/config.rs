//! Config files are merged by turning their entries into extra flags for
//! the invoked subcommand, skipping flags already on the command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};
use qubobench::{Error, Result};
use toml::{Table, Value};

/// Finds `--config FILE` or `--config=FILE` in raw arguments.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Position of the subcommand name in `args` (index 0 is the binary).
fn subcommand_position(cmd: &Command, args: &[OsString]) -> Option<(usize, String)> {
    let names: BTreeSet<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
    let mut skip_next = false;
    for (i, a) in args.iter().enumerate().skip(1) {
        if skip_next {
            skip_next = false;
            continue;
        }
        let s = a.to_string_lossy();
        if s == "--config" {
            skip_next = true;
        } else if !s.starts_with('-') {
            return names.contains(s.as_ref()).then(|| (i, s.into_owned()));
        }
    }
    None
}

fn flag_names_in(args: &[OsString]) -> BTreeSet<String> {
    args.iter()
        .filter_map(|a| {
            let s = a.to_string_lossy();
            let name = s.strip_prefix("--")?;
            Some(name.split('=').next().unwrap_or(name).to_string())
        })
        .collect()
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(x) => Ok(x.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(Error::Config(format!("config key '{key}' must be a scalar or an array of scalars"))),
    }
}

/// Extra arguments for subcommand `sub` from the config table.
fn config_args(cmd: &Command, sub: &str, table: &Table, present: &BTreeSet<String>) -> Result<Vec<OsString>> {
    let subcmd = cmd.find_subcommand(sub).expect("known subcommand");
    let flag_of = |c: &Command, key: &str| {
        let long = key.replace('_', "-");
        c.get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()) && a.get_id() != "config")
            .map(|a| (long, a.get_action().clone()))
    };
    let mut entries: Vec<(String, &Value)> = Vec::new();
    for (key, value) in table {
        if let Value::Table(section) = value {
            if cmd.find_subcommand(key).is_none() {
                return Err(Error::Config(format!("unknown config section [{key}]")));
            }
            if key == sub {
                for (k, v) in section {
                    if flag_of(subcmd, k).is_none() {
                        return Err(Error::Config(format!("unknown key '{k}' in config section [{key}]")));
                    }
                    entries.push((k.clone(), v));
                }
            }
            continue;
        }
        if cmd.get_subcommands().all(|c| flag_of(c, key).is_none()) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        // Section entries take precedence over top-level ones.
        let scoped = matches!(table.get(sub), Some(Value::Table(s)) if s.contains_key(key));
        if flag_of(subcmd, key).is_some() && !scoped {
            entries.push((key.clone(), value));
        }
    }
    let mut out = Vec::new();
    for (key, value) in entries {
        let (long, action) = flag_of(subcmd, &key).expect("checked above");
        if present.contains(&long) {
            continue;
        }
        let flag = OsString::from(format!("--{long}"));
        match action {
            ArgAction::SetTrue => match value {
                Value::Boolean(true) => out.push(flag),
                Value::Boolean(false) => {}
                _ => return Err(Error::Config(format!("config key '{key}' must be true or false"))),
            },
            _ => {
                let values = match value {
                    Value::Array(items) => items.iter().map(|v| scalar(&key, v)).collect::<Result<Vec<_>>>()?,
                    v => vec![scalar(&key, v)?],
                };
                for v in values {
                    out.push(flag.clone());
                    out.push(v.into());
                }
            }
        }
    }
    Ok(out)
}

/// Returns `args` with config entries spliced in right after the
/// subcommand name.
pub fn merge(cmd: &Command, args: Vec<OsString>, config: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", config.display())))?;
    let table: Table = toml::from_str(&text)
        .map_err(|e: toml::de::Error| Error::Config(format!("config {}: {}", config.display(), e.message())))?;
    let Some((pos, sub)) = subcommand_position(cmd, &args) else {
        return Ok(args);
    };
    let present = flag_names_in(&args[pos + 1..]);
    let extra = config_args(cmd, &sub, &table, &present)?;
    let mut merged = args[..=pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}
