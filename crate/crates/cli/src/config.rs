//! `--config <path>` support. Each `[subcommand]` table of the TOML file is
//! turned into `--key=value` tokens placed right after the subcommand name,
//! ahead of the flags typed on the command line. Since every argument
//! overrides itself, explicit flags win and unknown keys are rejected by
//! the ordinary argument parser.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::error::{CliError, CliResult};
use crate::output::require_input;

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(tok) = it.next() {
        let s = tok.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn scalar(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(v) => Some(v.to_string()),
        // `n = 1e5` is a float in TOML; keep integral values parseable as integers
        toml::Value::Float(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(format!("{}", *v as i64)),
        toml::Value::Float(v) => Some(v.to_string()),
        toml::Value::Datetime(d) => Some(d.to_string()),
        _ => None,
    }
}

fn tokens_for(table: &toml::Table, section: &str, path: &PathBuf) -> CliResult<Vec<OsString>> {
    let bad = |reason: String| CliError::Config { path: path.clone(), reason };
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(|v| scalar(v).ok_or_else(|| bad(format!("[{section}] {key}: list items must be scalars"))))
                    .collect::<CliResult<Vec<_>>>()?;
                out.push(format!("{flag}={}", parts.join(",")).into());
            }
            other => match scalar(other) {
                Some(v) => out.push(format!("{flag}={v}").into()),
                None => return Err(bad(format!("[{section}] {key}: nested tables are not supported"))),
            },
        }
    }
    Ok(out)
}

/// Returns `argv` with the matching config table spliced in. `known` lists
/// the valid subcommand names so misspelled tables are reported.
pub fn expand_args(argv: Vec<OsString>, known: &[String]) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    require_input(&path)?;
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
        path: path.clone(),
        reason: e.message().to_string(),
    })?;
    for (name, value) in &doc {
        if !value.is_table() {
            return Err(CliError::Config { path, reason: format!("top-level key `{name}` must be a [subcommand] table") });
        }
        if !known.iter().any(|k| k == name) {
            return Err(CliError::Config { path, reason: format!("unknown subcommand table [{name}]") });
        }
    }
    let Some(idx) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let name = argv[idx].to_string_lossy().into_owned();
    let Some(table) = doc.get(&name).and_then(toml::Value::as_table) else {
        return Ok(argv);
    };
    let injected = tokens_for(table, &name, &path)?;
    let mut out = argv;
    out.splice(idx + 1..idx + 1, injected);
    Ok(out)
}
