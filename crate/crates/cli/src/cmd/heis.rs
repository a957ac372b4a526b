use anyhow::Result;
use clap::{Args, Subcommand};
use rankone_core::families::{family_by_name, MapFamily};
use rankone_core::heisenberg::*;
use rankone_core::Error;
use serde::Serialize;

use super::{emit, invalid, parse_list, parse_params};
use crate::config::RunConfig;
use crate::output::{Sink, SCHEMA_VERSION};
use crate::Outcome;

#[derive(Subcommand, Debug)]
pub enum HeisCmd {
    /// Contact lift of a planar area-preserving map, with a refinement table.
    Lift(LiftArgs),
    /// Block structure of the lift's differential at one node.
    Check(CheckArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value = "shear")]
    family: String,
    #[arg(long = "param")]
    params: Vec<String>,
    /// Basepoint node i,j where the potential vanishes.
    #[arg(long, default_value = "0,0")]
    base: String,
}

#[derive(Args, Debug)]
pub struct LiftArgs {
    #[command(flatten)]
    common: Common,
    /// Grids N, N/2, ... in the refinement table.
    #[arg(long, default_value_t = 2)]
    levels: usize,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// Node i,j; defaults to the grid center.
    #[arg(long)]
    node: Option<String>,
    /// Tolerance for the V1 and V2 blocks.
    #[arg(long, default_value_t = 1e-8)]
    block_tol: f64,
}

fn planar(c: &Common) -> Result<MapFamily> {
    let (nums, funcs) = parse_params(&c.params)?;
    let f = family_by_name(&c.family, &nums, &funcs)?;
    if f.dim != 2 {
        return Err(invalid(format!("family '{}' is not planar", c.family)));
    }
    Ok(f)
}

fn pair(s: &str) -> Result<[usize; 2]> {
    let v: Vec<usize> = parse_list(s)?;
    match v[..] {
        [i, j] => Ok([i, j]),
        _ => Err(invalid(format!("expected i,j, got '{s}'"))),
    }
}

fn lift_at(f: &MapFamily, c: &Common, n: usize) -> Result<Lift> {
    let grid = PlaneGrid::for_family(f, n)?;
    Ok(lift(f, grid, pair(&c.base)?, LiftOptions::default())?)
}

#[derive(Serialize)]
struct Row {
    cells: usize,
    h: f64,
    theta3_residual: f64,
    /// log ratio against the previous (coarser) row.
    order: Option<f64>,
    fiber_residual: f64,
    center_residual: f64,
    path_residual: f64,
    closedness: f64,
}

#[derive(Serialize)]
struct LiftTable {
    schema_version: u32,
    family: String,
    rows: Vec<Row>,
}

#[derive(Serialize)]
struct CheckReport {
    schema_version: u32,
    family: String,
    cells: usize,
    passes: bool,
    block_tol: f64,
    horizontal_tol: f64,
    report: Option<PansuReport>,
    reason: Option<String>,
}

pub fn run(cmd: HeisCmd, cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    match cmd {
        HeisCmd::Lift(a) => {
            let f = planar(&a.common)?;
            let n = cfg.budgets.grid;
            let levels = a.levels.max(1);
            let sizes: Vec<usize> = (0..levels).rev().map(|k| n >> k).filter(|&m| m >= 2).collect();
            let mut rows: Vec<Row> = Vec::new();
            let mut finest = None;
            for m in sizes {
                let l = lift_at(&f, &a.common, m)?;
                let d = &l.diagnostics;
                let order = rows.last().map(|p| (p.theta3_residual / d.theta3_residual).ln() / (p.h / d.h).ln());
                rows.push(Row {
                    cells: m,
                    h: d.h,
                    theta3_residual: d.theta3_residual,
                    order: order.filter(|o| o.is_finite()),
                    fiber_residual: d.fiber_residual,
                    center_residual: d.center_residual,
                    path_residual: d.path_residual,
                    closedness: d.closedness,
                });
                finest = Some(l);
            }
            let l = finest.ok_or_else(|| invalid("grid too small"))?;
            sink.json("lift.json", &l.descriptor())?;
            let table = LiftTable { schema_version: SCHEMA_VERSION, family: f.name.clone(), rows };
            emit(sink, "lift_table.json", &table)?;
            sink.csv("lift_table.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["cells", "h", "theta3_residual", "order", "fiber_residual", "center_residual", "path_residual", "closedness"])?;
                for r in &table.rows {
                    w.write_record([
                        r.cells.to_string(),
                        r.h.to_string(),
                        r.theta3_residual.to_string(),
                        r.order.map_or(String::new(), |o| o.to_string()),
                        r.fiber_residual.to_string(),
                        r.center_residual.to_string(),
                        r.path_residual.to_string(),
                        r.closedness.to_string(),
                    ])?;
                }
                w.flush()?;
                Ok(())
            })?;
            Ok(Outcome::Ok)
        }
        HeisCmd::Check(a) => {
            let f = planar(&a.common)?;
            let n = cfg.budgets.grid;
            let l = lift_at(&f, &a.common, n)?;
            let node = match &a.node {
                Some(s) => pair(s)?,
                None => [n / 2, n / 2],
            };
            let horizontal_tol = 10.0 * l.diagnostics.h.powi(2);
            let (report, reason) = match pansu_block_check(&l, node, cfg.tolerances.algebraic) {
                Ok(r) => (Some(r), None),
                Err(e @ Error::NotDifferentiableHere(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            let passes = report.as_ref().is_some_and(|r| r.passes(a.block_tol, horizontal_tol));
            let rep = CheckReport {
                schema_version: SCHEMA_VERSION,
                family: f.name.clone(),
                cells: n,
                passes,
                block_tol: a.block_tol,
                horizontal_tol,
                report,
                reason,
            };
            emit(sink, "heis_check.json", &rep)?;
            Ok(if passes { Outcome::Ok } else { Outcome::Negative })
        }
    }
}
