//! Run configuration: defaults, then a TOML or JSON file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "RANKONE_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance for algebraic identities.
    pub algebraic: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank: f64,
    /// Radius for counting a mesh gradient as "on an atom".
    pub mesh: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { algebraic: 1e-9, rank: 1e-8, mesh: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub cells: usize,
    /// Cells per axis for analyzer and lift grids.
    pub grid: usize,
    pub depth: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { cells: rankone_core::synth::DEFAULT_CELL_BUDGET, grid: 64, depth: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Formats {
    pub csv: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { csv: true, svg: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub budgets: Budgets,
    pub formats: Formats,
    /// Synthesis accuracy δ.
    pub delta: f64,
    pub seed: u64,
    /// Worker thread cap; 0 lets rayon decide. Results do not depend on it.
    #[serde(skip_serializing)]
    pub threads: usize,
    /// Not part of the hashed configuration.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tolerances: Tolerances::default(),
            budgets: Budgets::default(),
            formats: Formats::default(),
            delta: 0.05,
            seed: rankone_core::calibration::DEFAULT_SEED,
            threads: 0,
            out: None,
        }
    }
}

/// Values given on the command line; `None` leaves the file or default.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub depth: Option<usize>,
    pub cell_budget: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub no_svg: bool,
    pub no_csv: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse(&text, p)?
            }
        };
        if let Some(v) = flags.delta {
            cfg.delta = v;
        }
        if let Some(v) = flags.depth {
            cfg.budgets.depth = v;
        }
        if let Some(v) = flags.cell_budget {
            cfg.budgets.cells = v;
        }
        if let Some(v) = flags.grid {
            cfg.budgets.grid = v;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.threads {
            cfg.threads = v;
        }
        if let Some(v) = flags.tol {
            cfg.tolerances.algebraic = v;
        }
        if flags.no_svg {
            cfg.formats.svg = false;
        }
        if flags.no_csv {
            cfg.formats.csv = false;
        }
        cfg.out = flags.out.clone().or(cfg.out).or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [("tolerances.algebraic", t.algebraic), ("tolerances.rank", t.rank), ("tolerances.mesh", t.mesh), ("delta", self.delta)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(rankone_core::Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let b = &self.budgets;
        for (name, v) in [("budgets.cells", b.cells), ("budgets.grid", b.grid)] {
            if v < 1 {
                bail!(rankone_core::Error::InvalidInput(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

fn parse(text: &str, p: &Path) -> Result<RunConfig> {
    let cfg = match p.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(text).map_err(|e| rankone_core::Error::Format(format!("{}: {e}", p.display())))?,
        _ => toml::from_str(text).map_err(|e| rankone_core::Error::Format(format!("{}: {e}", p.display())))?,
    };
    Ok(cfg)
}
