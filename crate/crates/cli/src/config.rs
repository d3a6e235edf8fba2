//! `key=value` config files, applied as flags that explicit flags override.

use std::ffi::OsString;
use std::fs;

use clap::{ArgAction, Command};

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got '{line}'", i + 1))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Value of `--config` in raw arguments, if any.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Index of the subcommand token, skipping values of global options.
fn subcommand_index(cmd: &Command, args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if cmd.find_subcommand(s.as_ref()).is_some() {
            return Some(i);
        }
        i += if s.starts_with("--") && !s.contains('=') { 2 } else { 1 };
    }
    None
}

/// Rewrites `args` so config-file settings appear as flags directly after the
/// subcommand, ahead of anything the user typed.
pub fn apply_config_file(mut cmd: Command, args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.to_string_lossy())))?;
    let pairs = parse_config(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.to_string_lossy())))?;
    cmd.build();
    let Some(at) = subcommand_index(&cmd, &args) else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(args[at].to_string_lossy().as_ref()).unwrap();

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        if key == "config" {
            continue;
        }
        let arg = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str()));
        match arg {
            Some(a) if matches!(a.get_action(), ArgAction::SetTrue) => match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => return Err(ConfigError::Parse(format!("{key}: expected true or false, got '{value}'"))),
            },
            Some(_) => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
            None => {
                let known_elsewhere = cmd
                    .get_subcommands()
                    .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
                if !known_elsewhere {
                    return Err(ConfigError::Parse(format!("unknown config key '{key}'")));
                }
            }
        }
    }
    let mut out = args[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}
