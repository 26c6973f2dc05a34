//! `key = value` configuration files.
//!
//! Keys are long flag names (`lambda-exp-min` or `lambda_exp_min`). Each entry
//! is turned back into command-line arguments and appended only when the flag
//! was not already given, so explicit flags take precedence.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};
use logitron::dataio::DataError;

use crate::UsageError;

pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => DataError::MissingFile(path.to_path_buf()),
            _ => DataError::Io { path: path.to_path_buf(), source: e },
        })
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(UsageError(format!("{}:{}: expected key = value", path.display(), i + 1)).into());
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn given_on_command_line(m: &ArgMatches, id: &str) -> bool {
    matches!(m.value_source(id), Some(ValueSource::CommandLine))
}

/// Extra arguments for the config entries not overridden on the command line.
pub fn extra_args(
    root: &Command,
    top: &ArgMatches,
    entries: &[(String, String)],
) -> Result<Vec<String>> {
    let (name, sub) = top.subcommand().ok_or_else(|| UsageError("no command given".into()))?;
    let sub_cmd = root
        .find_subcommand(name)
        .ok_or_else(|| UsageError(format!("unknown command {name}")))?;
    let mut out = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(UsageError("config files cannot include other config files".into()).into());
        }
        let (arg, matches) = match sub_cmd.get_arguments().find(|a| a.get_long() == Some(key)) {
            Some(a) => (a, sub),
            None => match root.get_arguments().find(|a| a.get_long() == Some(key)) {
                Some(a) => (a, top),
                None => return Err(UsageError(format!("unknown config key {key:?} for {name}")).into()),
            },
        };
        if given_on_command_line(matches, arg.get_id().as_str()) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "yes" | "1" => out.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                _ => return Err(UsageError(format!("config key {key}: expected true or false, got {value:?}")).into()),
            },
            ArgAction::Count => {
                let n: usize = value
                    .parse()
                    .map_err(|_| UsageError(format!("config key {key}: expected a count, got {value:?}")))?;
                out.extend(std::iter::repeat_n(format!("--{key}"), n));
            }
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}
