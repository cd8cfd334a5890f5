//! `--config` support: values from a JSON object are appended as flags the
//! command line does not already set, so explicit flags always win.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

/// Global options that take a value, so their values are not mistaken for
/// the subcommand name.
const GLOBAL_VALUED: &[&str] = &["--seed", "--config", "--threads"];

fn flag_value<'a>(argv: &'a [OsString], flag: &str) -> Option<&'a str> {
    let eq = format!("{flag}=");
    argv.iter().enumerate().find_map(|(i, a)| {
        let a = a.to_str()?;
        if a == flag {
            argv.get(i + 1)?.to_str()
        } else {
            a.strip_prefix(&eq)
        }
    })
}

fn has_flag(argv: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    argv.iter()
        .filter_map(|a| a.to_str())
        .any(|a| a == flag || a.starts_with(&eq))
}

fn subcommand_name(argv: &[OsString]) -> Option<String> {
    let mut skip = false;
    for a in argv.iter().skip(1) {
        let a = a.to_str()?;
        if skip {
            skip = false;
            continue;
        }
        if GLOBAL_VALUED.contains(&a) {
            skip = true;
        } else if !a.starts_with('-') {
            return Some(a.to_string());
        }
    }
    None
}

/// Long flag names accepted by `subcommand`, including globals.
fn known_flags(subcommand: &str) -> Vec<String> {
    let cmd = Cli::command();
    let mut flags: Vec<String> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    if let Some(sub) = cmd.find_subcommand(subcommand) {
        flags.extend(sub.get_arguments().filter_map(|a| a.get_long().map(str::to_string)));
    }
    flags
}

fn scalar(key: &str, v: &Value) -> CliResult<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::Usage(format!(
            "config key `{key}`: expected a string or number"
        ))),
    }
}

/// Return `argv` extended with flags taken from the `--config` file.
pub fn inject(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = flag_value(&argv, "--config").map(str::to_string) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("config {path}: {e}")))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {path}: {e}")))?;
    let Value::Object(map) = doc else {
        return Err(CliError::Usage(format!("config {path}: expected a JSON object")));
    };
    let Some(sub) = subcommand_name(&argv) else {
        return Ok(argv);
    };
    let known = known_flags(&sub);
    let mut out = argv;
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &map {
        let name = key.replace('_', "-");
        if name == "config" || !known.contains(&name) {
            log::debug!("config key `{key}` does not apply to `{sub}`; ignored");
            continue;
        }
        let flag = format!("--{name}");
        if has_flag(&out, &flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => extra.push(flag.into()),
            Value::Array(items) => {
                if !items.is_empty() {
                    extra.push(flag.into());
                    for it in items {
                        extra.push(scalar(key, it)?.into());
                    }
                }
            }
            Value::Object(_) => {
                return Err(CliError::Usage(format!(
                    "config key `{key}`: nested objects are not supported"
                )))
            }
            v => {
                extra.push(flag.into());
                extra.push(scalar(key, v)?.into());
            }
        }
    }
    // keep a trailing `--` separated positional list intact
    let at = out.iter().position(|a| a == "--").unwrap_or(out.len());
    out.splice(at..at, extra);
    Ok(out)
}
