use std::collections::BTreeMap;

use anyhow::Result;
use clap::{Args, Subcommand};
use rankone_core::analyzer::*;
use rankone_core::families::{family_by_name, MapFamily, Scalar};
use serde::Serialize;

use super::{emit, invalid, parse_list, parse_params};
use crate::config::RunConfig;
use crate::output::{Sink, SCHEMA_VERSION};
use crate::Outcome;

#[derive(Subcommand, Debug)]
pub enum AnalyzeCmd {
    /// Pointwise statistics of one gradient field.
    Field(FamilyArgs),
    /// Statistics along a sequence in one parameter.
    Sequence(SequenceArgs),
    /// Split defect with the oscillation bounds.
    Defect(FamilyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// identity, rotation, scaling, folding, shear, oscillation, f_eps.
    #[arg(long, default_value = "oscillation")]
    family: String,
    /// Family parameter key=value (numbers) or key=function name; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Shortcut for --param j=<J>.
    #[arg(long)]
    j: Option<f64>,
    /// Nodes per axis, comma separated; overrides the per-family default.
    #[arg(long)]
    counts: Option<String>,
}

#[derive(Args, Debug)]
pub struct SequenceArgs {
    #[command(flatten)]
    base: FamilyArgs,
    /// Parameter varied along the sequence.
    #[arg(long, default_value = "j")]
    index: String,
    #[arg(long, default_value = "1,2,4,8,16")]
    values: String,
    /// Increasing δ ladder for the determinant sublevel sets.
    #[arg(long, default_value = "0.01,0.1,0.5")]
    deltas: String,
    /// Limit family for the compensated products.
    #[arg(long)]
    limit: Option<String>,
    /// Parameters of the limit family; `dim` defaults to the sequence's.
    #[arg(long = "limit-param")]
    limit_params: Vec<String>,
}

struct Resolved {
    name: String,
    nums: BTreeMap<String, f64>,
    funcs: BTreeMap<String, String>,
    counts: Option<Vec<usize>>,
}

fn resolve(a: &FamilyArgs) -> Result<Resolved> {
    let (mut nums, funcs) = parse_params(&a.params)?;
    if let Some(j) = a.j {
        nums.insert("j".into(), j);
    }
    let counts = a.counts.as_deref().map(parse_list).transpose()?;
    Ok(Resolved { name: a.family.clone(), nums, funcs, counts })
}

/// Tensor grids that skip the axes a family does not depend on.
fn default_counts(name: &str, dim: usize, n: usize) -> Vec<usize> {
    match name {
        "oscillation" => vec![1, n, n, 1],
        "f_eps" => vec![n, 1, n, 1],
        _ => vec![n; dim],
    }
}

fn field_for(r: &Resolved, f: &MapFamily, cfg: &RunConfig) -> Result<GradientField> {
    let counts = r.counts.clone().unwrap_or_else(|| default_counts(&r.name, f.dim, cfg.budgets.grid));
    let grid = GridSpec::from_family(f, counts)?;
    Ok(GradientField::sample(f, &grid)?)
}

#[derive(Serialize)]
struct Norms {
    l1: f64,
    l2: f64,
    linf: f64,
}

#[derive(Serialize)]
struct FieldReport {
    schema_version: u32,
    family: String,
    params: Vec<(String, f64)>,
    counts: Option<Vec<usize>>,
    nodes: usize,
    dist_l: Norms,
    det_min: f64,
    det_max: f64,
    chi_mass: f64,
    chi_constant: bool,
    split_defect: Option<SplitDefect>,
}

#[derive(Serialize)]
struct DefectReport {
    schema_version: u32,
    family: String,
    params: Vec<(String, f64)>,
    counts: Option<Vec<usize>>,
    split_defect: SplitDefect,
    dist_l_max: f64,
    /// ½ ‖h'‖₁ ‖φ - φ̄‖₁ (oscillation only).
    lower_bound: Option<f64>,
    /// ‖h‖∞ ‖φ'‖∞ / j (oscillation only).
    upper_bound: Option<f64>,
    meets_lower_bound: Option<bool>,
    meets_upper_bound: Option<bool>,
}

/// Midpoint rule with `m` points on [0, 1].
fn mean_of(m: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..m).map(|i| f((i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64
}

fn max_of(m: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..=m).map(|i| f(i as f64 / m as f64).abs()).fold(0.0, f64::max)
}

/// (lower, upper·j) for the oscillation family with the given functions.
fn oscillation_bounds(funcs: &BTreeMap<String, String>) -> Result<(f64, f64)> {
    let h = Scalar::by_name(funcs.get("h").map_or("sin2pi", String::as_str))?;
    let phi = Scalar::by_name(funcs.get("phi").map_or("id", String::as_str))?;
    let m = 1 << 14;
    let hp = mean_of(m, |t| h.deriv(t).abs());
    let bar = mean_of(m, |t| phi.eval(t));
    let dev = mean_of(m, |t| (phi.eval(t) - bar).abs());
    Ok((0.5 * hp * dev, max_of(m, |t| h.eval(t)) * max_of(m, |t| phi.deriv(t))))
}

pub fn run(cmd: AnalyzeCmd, cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    match cmd {
        AnalyzeCmd::Field(a) => {
            let r = resolve(&a)?;
            let f = family_by_name(&r.name, &r.nums, &r.funcs)?;
            let g = field_for(&r, &f, cfg)?;
            let dl = g.dist_l();
            let det = g.det();
            let chi = chi_field(&g);
            let rep = FieldReport {
                schema_version: SCHEMA_VERSION,
                family: f.name.clone(),
                params: f.params.clone(),
                counts: g.grid.as_ref().map(|s| s.counts.clone()),
                nodes: g.len(),
                dist_l: Norms { l1: g.lq_norm(&dl, 1.0), l2: g.lq_norm(&dl, 2.0), linf: g.lq_norm(&dl, f64::INFINITY) },
                det_min: det.iter().copied().fold(f64::INFINITY, f64::min),
                det_max: det.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                chi_mass: chi.mass,
                chi_constant: chi.is_constant(),
                split_defect: split_defect(&g).ok(),
            };
            emit(sink, "field.json", &rep)?;
            sink.csv("field.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                let mut header: Vec<String> = (1..=f.dim).map(|k| format!("x{k}")).collect();
                header.extend(["dist_l1", "dist_l2", "det", "chi"].map(String::from));
                w.write_record(&header)?;
                let (d1, d2) = (g.dist_l1(), g.dist_l2());
                for i in 0..g.len() {
                    let mut row: Vec<String> = g.points[i].iter().map(f64::to_string).collect();
                    row.extend([d1[i].to_string(), d2[i].to_string(), det[i].to_string(), chi.values[i].to_string()]);
                    w.write_record(&row)?;
                }
                w.flush()?;
                Ok(())
            })?;
            Ok(Outcome::Ok)
        }
        AnalyzeCmd::Sequence(a) => {
            let r = resolve(&a.base)?;
            let values: Vec<f64> = parse_list(&a.values)?;
            let deltas: Vec<f64> = parse_list(&a.deltas)?;
            let mut seq = Vec::with_capacity(values.len());
            for v in &values {
                let mut nums = r.nums.clone();
                nums.insert(a.index.clone(), *v);
                let f = family_by_name(&r.name, &nums, &r.funcs)?;
                seq.push((*v, field_for(&r, &f, cfg)?));
            }
            let limit = match &a.limit {
                Some(name) => {
                    let (mut nums, funcs) = parse_params(&a.limit_params)?;
                    nums.entry("dim".into()).or_insert(seq[0].1.n as f64 * 2.0);
                    let f = family_by_name(name, &nums, &funcs)?;
                    let grid = seq[0].1.grid.clone().ok_or_else(|| invalid("sequence fields need a grid"))?;
                    Some(GradientField::sample(&f, &grid)?)
                }
                None => None,
            };
            let rep = sequence_report(&seq, &deltas, limit.as_ref(), cfg.tolerances.algebraic)?;
            emit(sink, "sequence.json", &rep)?;
            sink.csv("sequence.csv", |buf| rep.write_csv(buf))?;
            Ok(Outcome::Ok)
        }
        AnalyzeCmd::Defect(a) => {
            let r = resolve(&a)?;
            let f = family_by_name(&r.name, &r.nums, &r.funcs)?;
            let g = field_for(&r, &f, cfg)?;
            let s = split_defect(&g)?;
            let dmax = g.lq_norm(&g.dist_l(), f64::INFINITY);
            let (lower, upper) = if r.name == "oscillation" {
                let (lo, cj) = oscillation_bounds(&r.funcs)?;
                let j = r.nums.get("j").copied().unwrap_or(8.0);
                (Some(lo), Some(cj / j))
            } else {
                (None, None)
            };
            // The grid lower bound carries an O(h) quadrature error.
            let slack = g.grid.as_ref().map_or(0.0, |s| s.h());
            let rep = DefectReport {
                schema_version: SCHEMA_VERSION,
                family: f.name.clone(),
                params: f.params.clone(),
                counts: g.grid.as_ref().map(|s| s.counts.clone()),
                split_defect: s,
                dist_l_max: dmax,
                lower_bound: lower,
                upper_bound: upper,
                meets_lower_bound: lower.map(|lo| s.defect >= lo - slack),
                meets_upper_bound: upper.map(|up| dmax <= up * (1.0 + 1e-12)),
            };
            emit(sink, "defect.json", &rep)?;
            sink.csv("defect.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["family", "split_defect", "lower_bound", "dist_l_max", "upper_bound"])?;
                let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
                w.write_record([rep.family.clone(), s.defect.to_string(), opt(lower), dmax.to_string(), opt(upper)])?;
                w.flush()?;
                Ok(())
            })?;
            let ok = rep.meets_lower_bound.unwrap_or(true) && rep.meets_upper_bound.unwrap_or(true);
            Ok(if ok { Outcome::Ok } else { Outcome::Negative })
        }
    }
}
