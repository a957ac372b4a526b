use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use rankone_core::laminate::{example_nu, Laminate, SplitTree};
use rankone_core::mat::{BlockMat, Mat2};
use rankone_core::synth::export::{write_csv, write_svg};
use rankone_core::synth::{analyze, realize, Cutoff, Domain2, SynthOptions, SynthReport};
use serde::Serialize;

use super::lam::Bundle;
use super::{emit, invalid, parse_list};
use crate::config::RunConfig;
use crate::output::{Sink, SCHEMA_VERSION};
use crate::Outcome;

#[derive(Subcommand, Debug)]
pub enum SynthCmd {
    /// Realize a planar splitting tree as a piecewise-affine map.
    Realize(RealizeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CutoffArg {
    Tight,
    Steep,
}

#[derive(Args, Debug)]
pub struct RealizeArgs {
    /// Laminate bundle with a tree (2x2 matrices); defaults to the built-in nu.
    #[arg(long)]
    laminate: Option<PathBuf>,
    /// Domain as x_min,x_max,y_min,y_max.
    #[arg(long, default_value = "0,1,0,1")]
    domain: String,
    #[arg(long, value_enum, default_value_t = CutoffArg::Steep)]
    cutoff: CutoffArg,
    #[arg(long, default_value_t = 1.0)]
    slope: f64,
}

#[derive(Serialize)]
struct RealizeReport {
    schema_version: u32,
    delta: f64,
    max_depth: usize,
    report: SynthReport,
}

fn to_mat2_laminate(l: &Laminate<BlockMat>) -> Result<Laminate<Mat2>> {
    let atoms = l
        .atoms
        .iter()
        .map(|a| a.matrix.to_mat2().map(|m| (a.weight, m)).ok_or_else(|| invalid("synthesis needs 2x2 matrices")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Laminate::from_atoms(atoms)?)
}

pub fn run(cmd: SynthCmd, cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let SynthCmd::Realize(a) = cmd;
    let (lam, tree): (Laminate<BlockMat>, SplitTree<BlockMat>) = match &a.laminate {
        Some(p) => {
            let b = Bundle::load(p, sink)?;
            let t = b.tree.ok_or_else(|| invalid("laminate bundle has no splitting tree"))?;
            (b.laminate, t)
        }
        None => example_nu(1)?,
    };
    let lam = to_mat2_laminate(&lam)?;
    let tree = tree.to_mat2()?;
    let d = parse_list::<f64>(&a.domain)?;
    if d.len() != 4 {
        return Err(invalid("domain needs four numbers"));
    }
    let dom = Domain2::new(d[0], d[1], d[2], d[3])?;
    let opts = SynthOptions {
        cell_budget: cfg.budgets.cells,
        cutoff: match a.cutoff {
            CutoffArg::Tight => Cutoff::Tight,
            CutoffArg::Steep => Cutoff::Steep,
        },
        cutoff_slope: a.slope,
        ..SynthOptions::new(cfg.delta, cfg.budgets.depth)
    };
    let map = realize(&tree, &dom, &opts)?;
    let radius = cfg.delta;
    let report = analyze(&map, Some(&lam), radius);
    let atoms: Vec<Mat2> = lam.atoms.iter().map(|at| at.matrix).collect();
    sink.json("mesh.json", &map)?;
    sink.svg("cells.svg", |buf| write_svg(&map, &atoms, radius, buf))?;
    sink.csv("cells.csv", |buf| write_csv(&map, &atoms, radius, buf))?;
    emit(
        sink,
        "synth_report.json",
        &RealizeReport { schema_version: SCHEMA_VERSION, delta: cfg.delta, max_depth: cfg.budgets.depth, report },
    )?;
    Ok(Outcome::Ok)
}
