use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use rankone_core::laminate::{example_nu, staircase, Laminate, SplitTree};
use rankone_core::mat::BlockMat;
use rankone_core::tn::certify;
use serde::{Deserialize, Serialize};

use super::tn::family;
use super::{emit, invalid, parse_list};
use crate::config::RunConfig;
use crate::output::{Sink, SCHEMA_VERSION};
use crate::Outcome;

#[derive(Subcommand, Debug)]
pub enum LamCmd {
    /// Build a named laminate with its splitting tree.
    Build(BuildArgs),
    /// Staircase laminate descending a certified T_N cycle.
    Staircase(StairArgs),
    /// Push a laminate forward by left multiplication.
    Push(PushArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Only "nu" is built in.
    #[arg(long, default_value = "nu")]
    example: String,
    /// Block size; matrices are 2n x 2n.
    #[arg(long, default_value_t = 1)]
    n: usize,
}

#[derive(Args, Debug)]
pub struct StairArgs {
    #[arg(long, default_value = "t4")]
    family: String,
    #[arg(long, default_value_t = 3.0)]
    c: f64,
    /// One-based atom whose inner point is the root.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Number of full turns around the cycle.
    #[arg(long, default_value_t = 3)]
    m: usize,
}

#[derive(Args, Debug)]
pub struct PushArgs {
    /// Laminate bundle written by `laminate build` or `laminate staircase`.
    #[arg(long)]
    laminate: PathBuf,
    /// "identity", "swap", or row-major entries separated by commas.
    #[arg(long, default_value = "identity")]
    by: String,
}

/// The file format shared by the laminate and synth commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bundle {
    pub schema_version: u32,
    pub laminate: Laminate<BlockMat>,
    pub tree: Option<SplitTree<BlockMat>>,
    pub barycenter: BlockMat,
}

impl Bundle {
    fn new(laminate: Laminate<BlockMat>, tree: Option<SplitTree<BlockMat>>) -> Self {
        let barycenter = laminate.barycenter();
        Bundle { schema_version: SCHEMA_VERSION, laminate, tree, barycenter }
    }

    pub fn load(path: &std::path::Path, sink: &mut Sink) -> Result<Bundle> {
        let b: Bundle = serde_json::from_str(&sink.read_input(path)?).map_err(rankone_core::Error::from)?;
        if b.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("unsupported schema_version {}", b.schema_version)));
        }
        b.laminate.check()?;
        Ok(b)
    }
}

fn write_bundle(sink: &mut Sink, name: &str, b: &Bundle) -> Result<()> {
    emit(sink, &format!("{name}.json"), b)?;
    sink.csv(&format!("{name}.csv"), |buf| b.laminate.write_csv(buf))
}

#[derive(Serialize)]
struct StairReport {
    schema_version: u32,
    k: usize,
    m: usize,
    atoms: usize,
    residual_mass: f64,
    predicted_residual_mass: f64,
    relative_error: f64,
}

pub fn run(cmd: LamCmd, _cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    match cmd {
        LamCmd::Build(a) => {
            if a.example != "nu" {
                return Err(invalid(format!("unknown laminate '{}' (nu)", a.example)));
            }
            let (lam, tree) = example_nu(a.n)?;
            write_bundle(sink, "laminate", &Bundle::new(lam, Some(tree)))?;
            Ok(Outcome::Ok)
        }
        LamCmd::Staircase(a) => {
            let inp = family(&a.family, a.c)?;
            if a.k == 0 || a.k > inp.len() {
                return Err(invalid(format!("k must be in 1..={}", inp.len())));
            }
            let Some(cert) = certify(&inp) else {
                return Ok(Outcome::Negative);
            };
            let (lam, tree) = staircase(&cert, a.k - 1, a.m)?;
            let root = cert.inner_points[a.k - 1];
            let residual: f64 = lam.atoms.iter().filter(|at| (at.matrix - root).frob() <= 1e-10).map(|at| at.weight).sum();
            let predicted = cert.legs.iter().map(|l| 1.0 - 1.0 / l.kappa).product::<f64>().powi(a.m as i32);
            let to_block = |l: &Laminate<_>| {
                Laminate::from_atoms(l.atoms.iter().map(|at: &rankone_core::laminate::Atom<rankone_core::Mat2>| (at.weight, at.matrix.to_block())).collect())
            };
            write_bundle(sink, "staircase", &Bundle::new(to_block(&lam)?, Some(tree.map(|m| m.to_block()))))?;
            let r = StairReport {
                schema_version: SCHEMA_VERSION,
                k: a.k,
                m: a.m,
                atoms: lam.atoms.len(),
                residual_mass: residual,
                predicted_residual_mass: predicted,
                relative_error: (residual - predicted).abs() / predicted,
            };
            emit(sink, "staircase_report.json", &r)?;
            Ok(Outcome::Ok)
        }
        LamCmd::Push(a) => {
            let b = Bundle::load(&a.laminate, sink)?;
            let n = b.laminate.side / 2;
            let p = match a.by.as_str() {
                "identity" => BlockMat::identity(n),
                "swap" => BlockMat::swap(n),
                s => BlockMat::from_row_major(n, &parse_list::<f64>(s)?)?,
            };
            let pushed = b.laminate.pushforward_left(&p)?;
            // A pushed tree is still a splitting tree: rank-one differences stay rank one.
            let tree = b.tree.as_ref().map(|t| t.map(|m| p.matmul(m)));
            write_bundle(sink, "pushed", &Bundle::new(pushed, tree))?;
            Ok(Outcome::Ok)
        }
    }
}
