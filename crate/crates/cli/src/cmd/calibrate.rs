use anyhow::Result;
use clap::Args;
use rankone_core::calibration::{calibrate, DEFAULT_N, DEFAULT_SAMPLES};

use super::parse_list;
use crate::config::RunConfig;
use crate::output::Sink;
use crate::Outcome;

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Block sizes, comma separated.
    #[arg(long)]
    n: Option<String>,
}

/// Writes the calibration TOML to stdout (and `calibration.toml`).
pub fn run(a: CalibrateArgs, cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let ns = match &a.n {
        Some(s) => parse_list(s)?,
        None => DEFAULT_N.to_vec(),
    };
    let text = calibrate(cfg.seed, a.samples, &ns).to_toml();
    super::stdout_line(text.trim_end())?;
    sink.write("calibration.toml", text.as_bytes())?;
    Ok(Outcome::Ok)
}
