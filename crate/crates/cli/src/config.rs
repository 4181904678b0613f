//! `--config FILE` support.
//!
//! The file holds `key = value` lines; `#` starts a comment. Every key is
//! the long name of a flag of the chosen subcommand (`decay-period` or
//! `decay_period`), and `true`/`false` switch boolean flags. The entries are
//! spliced in right after the subcommand, so flags given on the command line
//! win.

use std::ffi::OsString;
use std::fs;

use crate::error::CliError;

pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::with_capacity(args.len());
    let mut files = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => {
                let path = iter.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
                files.push(path);
            }
            Some(s) if s.starts_with("--config=") => files.push(OsString::from(&s["--config=".len()..])),
            _ => out.push(arg),
        }
    }
    if files.is_empty() {
        return Ok(out);
    }
    if out.len() < 2 {
        return Err(CliError::Usage("--config must follow a subcommand".into()));
    }
    let mut injected = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
        injected.extend(parse(&text)?);
    }
    out.splice(2..2, injected);
    Ok(out)
}

fn parse(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut args = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", no + 1)));
        }
        match value {
            "true" => args.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                args.push(OsString::from(format!("--{key}")));
                args.push(OsString::from(value));
            }
        }
    }
    Ok(args)
}
