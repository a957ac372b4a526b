pub mod analyze;
pub mod calibrate;
pub mod heis;
pub mod lam;
pub mod synth;
pub mod tn;

use std::collections::BTreeMap;

use anyhow::Result;
use rankone_core::Error;
use serde::Serialize;

use crate::output::Sink;

/// Print the summary on stdout and store it as `name`.
pub fn emit<T: Serialize>(sink: &mut Sink, name: &str, value: &T) -> Result<()> {
    sink.json(name, value)?;
    stdout_line(&serde_json::to_string_pretty(value)?)
}

/// A closed stdout (e.g. piped into `head`) is not an error.
pub fn stdout_line(s: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{s}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

/// `key=value` pairs; values that parse as numbers go to the first map.
pub fn parse_params(pairs: &[String]) -> Result<(BTreeMap<String, f64>, BTreeMap<String, String>)> {
    let mut nums = BTreeMap::new();
    let mut funcs = BTreeMap::new();
    for p in pairs {
        let (k, v) = p.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got '{p}'")))?;
        match v.parse::<f64>() {
            Ok(x) => nums.insert(k.to_string(), x),
            Err(_) => funcs.insert(k.to_string(), v.to_string()).map(|_| 0.0),
        };
    }
    Ok((nums, funcs))
}

/// Comma-separated list.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| invalid(format!("cannot parse '{t}' in '{s}'"))))
        .collect()
}
