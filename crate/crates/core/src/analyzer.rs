//! Grid diagnostics for split and nearly split gradient fields.
//!
//! Nodes are cell centers of a regular box grid. An axis with a single node
//! is "reduced": the field is assumed constant along it and the axis only
//! contributes its length to the quadrature weight. This keeps 4-d families
//! that vary in two coordinates cheap.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::MapFamily;
use crate::mat::BlockMat;
use crate::synth::PiecewiseAffineMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::InvalidInput("grid bounds and counts must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) || counts.contains(&0) {
            return Err(Error::InvalidInput("grid needs lo < hi and positive counts".into()));
        }
        Ok(GridSpec { lo, hi, counts })
    }

    /// [0,1]^d with `counts[k]` nodes on axis k.
    pub fn unit(counts: Vec<usize>) -> Result<Self> {
        let d = counts.len();
        GridSpec::new(vec![0.0; d], vec![1.0; d], counts)
    }

    pub fn from_family(f: &MapFamily, counts: Vec<usize>) -> Result<Self> {
        GridSpec::new(f.domain.iter().map(|b| b[0]).collect(), f.domain.iter().map(|b| b[1]).collect(), counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.counts[k] as f64
    }

    pub fn reduced(&self, k: usize) -> bool {
        self.counts[k] == 1
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        self.lo[k] + (i as f64 + 0.5) * self.spacing(k)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// Largest spacing over resolved axes (the grid's h).
    pub fn h(&self) -> f64 {
        (0..self.dim()).filter(|&k| !self.reduced(k)).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    /// Row-major: axis 0 varies slowest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            out[k] = idx % self.counts[k];
            idx /= self.counts[k];
        }
        out
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().enumerate().map(|(k, &i)| self.coord(k, i)).collect()
    }
}

/// Gradient samples of a map ℝ^{2n} -> ℝ^{2n} with quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub samples: Vec<BlockMat>,
    /// Distance from each node to the map's crease set (∞ if smooth).
    pub crease: Vec<f64>,
    pub grid: Option<GridSpec>,
    /// Sampling scale used to decide which nodes count as smooth.
    pub h: f64,
}

impl GradientField {
    /// Sample a family on a grid: exact Jacobians where the family has them,
    /// central differences with half the grid spacing otherwise.
    pub fn sample(f: &MapFamily, grid: &GridSpec) -> Result<Self> {
        if f.dim % 2 != 0 || f.dim != grid.dim() {
            return Err(Error::InvalidInput(format!("map dimension {} does not match a {}-d grid", f.dim, grid.dim())));
        }
        let h = grid.h();
        let step = if h > 0.0 { 0.5 * (0..grid.dim()).filter(|&k| !grid.reduced(k)).map(|k| grid.spacing(k)).fold(f64::INFINITY, f64::min) } else { 1e-6 };
        let rows: Vec<(Vec<f64>, DMatrix<f64>, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                let j = f.jacobian(&x, step);
                let c = f.crease_distance(&x);
                (x, j, c)
            })
            .collect();
        let w = grid.cell_volume();
        let mut out = GradientField {
            n: f.dim / 2,
            points: Vec::with_capacity(rows.len()),
            weights: vec![w; rows.len()],
            samples: Vec::with_capacity(rows.len()),
            crease: Vec::with_capacity(rows.len()),
            grid: Some(grid.clone()),
            h: if h > 0.0 { h } else { step },
        };
        for (x, j, c) in rows {
            if j.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite gradient at {x:?}")));
            }
            out.points.push(x);
            out.samples.push(BlockMat::from_dmatrix(j)?);
            out.crease.push(c);
        }
        Ok(out)
    }

    /// One node per cell at its centroid, weighted by area, with the
    /// exact cell gradient.
    pub fn from_mesh_cells(map: &PiecewiseAffineMap) -> Self {
        let n = map.cells.len();
        let mut out = GradientField {
            n: 1,
            points: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            samples: Vec::with_capacity(n),
            crease: vec![f64::INFINITY; n],
            grid: None,
            h: 0.0,
        };
        for c in &map.cells {
            let p = crate::synth::geom::centroid(&[map.vertices[c.v[0]], map.vertices[c.v[1]], map.vertices[c.v[2]]]);
            out.points.push(p.to_vec());
            out.weights.push(map.cell_area(c));
            out.samples.push(BlockMat::from_mat2(&c.grad));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn require_grid(&self) -> Result<&GridSpec> {
        self.grid.as_ref().ok_or_else(|| Error::InvalidInput("operation needs a tensor grid".into()))
    }

    /// Nodes farther than `factor · h` from the crease set.
    pub fn is_smooth(&self, i: usize, factor: f64) -> bool {
        self.crease[i] > factor * self.h
    }

    pub fn map_nodes<T: Send>(&self, f: impl Fn(&BlockMat) -> T + Sync + Send) -> Vec<T> {
        self.samples.par_iter().map(f).collect()
    }

    pub fn dist_l(&self) -> Vec<f64> {
        self.map_nodes(|m| m.dist_l1().min(m.dist_l2()))
    }

    pub fn dist_l1(&self) -> Vec<f64> {
        self.map_nodes(BlockMat::dist_l1)
    }

    pub fn dist_l2(&self) -> Vec<f64> {
        self.map_nodes(BlockMat::dist_l2)
    }

    pub fn det(&self) -> Vec<f64> {
        self.map_nodes(BlockMat::det)
    }

    /// (Σ w |v|^q)^{1/q}; q = ∞ gives the max.
    pub fn lq_norm(&self, v: &[f64], q: f64) -> f64 {
        if q.is_infinite() {
            return v.iter().fold(0.0, |m, x| m.max(x.abs()));
        }
        v.iter().zip(&self.weights).map(|(x, w)| w * x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }

    pub fn integral(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.weights).map(|(x, w)| w * x).sum()
    }
}

/// χ = 1 where the gradient is strictly closer to L2 than to L1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiField {
    pub values: Vec<u8>,
    /// Σ w χ / |Ω|.
    pub mass: f64,
}

impl ChiField {
    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

pub fn chi_field(f: &GradientField) -> ChiField {
    let values: Vec<u8> = f.map_nodes(|m| u8::from(m.dist_l2() < m.dist_l1()));
    let mass = values.iter().zip(&f.weights).map(|(&c, w)| c as f64 * w).sum::<f64>() / f.volume();
    ChiField { values, mass }
}

/// Measure of {det < δ} for each δ.
pub fn det_sublevel(f: &GradientField, deltas: &[f64]) -> Vec<f64> {
    let det = f.det();
    deltas
        .iter()
        .map(|&d| det.iter().zip(&f.weights).filter(|(x, _)| **x < d).map(|(_, w)| w).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinorKind {
    /// Both columns in the first factor.
    A,
    /// Both columns in the second factor.
    B,
    Straddle,
}

/// 2×2 minors of the first two rows of every sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorFields {
    /// Column pairs (i, j), i < j, zero-based.
    pub pairs: Vec<(usize, usize)>,
    pub kinds: Vec<MinorKind>,
    /// values[p][node]
    pub values: Vec<Vec<f64>>,
    /// ∫ Σ_straddle |M_ij|.
    pub straddle_residual: f64,
}

impl MinorFields {
    pub fn field(&self, i: usize, j: usize) -> Option<&[f64]> {
        self.pairs.iter().position(|&p| p == (i, j)).map(|k| self.values[k].as_slice())
    }

    /// Per-node Σ M_ij² over pairs of the given kind.
    pub fn sum_sq(&self, kind: MinorKind) -> Vec<f64> {
        let nodes = self.values.first().map_or(0, Vec::len);
        let mut out = vec![0.0; nodes];
        for (k, vals) in self.kinds.iter().zip(&self.values) {
            if *k == kind {
                for (o, v) in out.iter_mut().zip(vals) {
                    *o += v * v;
                }
            }
        }
        out
    }
}

pub fn minor_fields(f: &GradientField) -> Result<MinorFields> {
    let n = f.n;
    if n < 2 {
        return Err(Error::DimensionTooSmall);
    }
    let mut pairs = Vec::new();
    let mut kinds = Vec::new();
    for i in 0..2 * n {
        for j in i + 1..2 * n {
            pairs.push((i, j));
            kinds.push(match (i < n, j < n) {
                (true, true) => MinorKind::A,
                (false, false) => MinorKind::B,
                _ => MinorKind::Straddle,
            });
        }
    }
    let values: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| f.samples.iter().map(|m| m.get(0, i) * m.get(1, j) - m.get(0, j) * m.get(1, i)).collect())
        .collect();
    let straddle_residual = kinds
        .iter()
        .zip(&values)
        .filter(|(k, _)| **k == MinorKind::Straddle)
        .map(|(_, v)| v.iter().zip(&f.weights).map(|(x, w)| w * x.abs()).sum::<f64>())
        .sum();
    Ok(MinorFields { pairs, kinds, values, straddle_residual })
}

/// Tensor-product bump φ(x) = Π_k ψ((x_k - c_k)/r_k), ψ(t) = (1 - t²)⁴ on
/// |t| < 1. Axes with r_k = ∞ are constant factors.
///
/// ψ is only C³, but its derivatives through order 2 vanish at ±1, so the
/// midpoint rule integrates ψ' to O(h⁴). A C^∞ bump needs far more nodes
/// per support before its quadrature error settles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

fn psi(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - t * t;
    (s.powi(4), -8.0 * t * s.powi(3))
}

impl Bump {
    fn factor(&self, k: usize, x: f64) -> (f64, f64) {
        let r = self.radius[k];
        if r.is_infinite() {
            return (1.0, 0.0);
        }
        let (v, d) = psi((x - self.center[k]) / r);
        (v, d / r)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..x.len()).map(|k| self.factor(k, x[k]).0).product()
    }

    pub fn partial(&self, x: &[f64], l: usize) -> f64 {
        (0..x.len()).map(|k| if k == l { self.factor(k, x[k]).1 } else { self.factor(k, x[k]).0 }).product()
    }
}

const BUMP_CENTERS: [f64; 3] = [0.3, 0.5, 0.7];
const BUMP_SCALES: [f64; 2] = [0.25, 0.125];

/// Three centers per resolved axis at two scales; reduced axes are constant.
pub fn bump_dictionary(grid: &GridSpec) -> Vec<Bump> {
    let d = grid.dim();
    let resolved: Vec<usize> = (0..d).filter(|&k| !grid.reduced(k)).collect();
    let combos = 3usize.pow(resolved.len() as u32);
    let mut out = Vec::with_capacity(2 * combos);
    for &s in &BUMP_SCALES {
        for mut c in 0..combos {
            let mut center: Vec<f64> = (0..d).map(|k| 0.5 * (grid.lo[k] + grid.hi[k])).collect();
            let mut radius = vec![f64::INFINITY; d];
            for &k in &resolved {
                let len = grid.hi[k] - grid.lo[k];
                center[k] = grid.lo[k] + BUMP_CENTERS[c % 3] * len;
                radius[k] = s * len;
                c /= 3;
            }
            out.push(Bump { center, radius });
        }
    }
    out
}

/// sup_φ |∫ g ∂_l φ| / ∫|φ| over the bump dictionary: a weak-derivative
/// residual for ∂_l g = 0. Zero for reduced axes by construction.
pub fn independence_residual(grid: &GridSpec, g: &[f64], l: usize) -> Result<f64> {
    if g.len() != grid.len() || l >= grid.dim() {
        return Err(Error::InvalidInput("field length or axis does not match the grid".into()));
    }
    if grid.reduced(l) {
        return Ok(0.0);
    }
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let dict = bump_dictionary(grid);
    let res = dict
        .par_iter()
        .map(|phi| {
            let (mut num, mut den) = (0.0, 0.0);
            for (x, gv) in points.iter().zip(g) {
                num += gv * phi.partial(x, l);
                den += phi.eval(x);
            }
            if den > 0.0 {
                num.abs() / den
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(res)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDefect {
    /// g = (g1(x'), g2(x'')).
    pub direct: f64,
    /// g = (g1(x''), g2(x')).
    pub swapped: f64,
    pub defect: f64,
}

/// L¹ distance from ∇f to a split gradient field, each block replaced by its
/// mean over the factor it may not depend on. Averages are at most twice as
/// far as the best constant, so this bounds the true split distance within a
/// factor 2.
///
/// Needs a tensor grid whose first n axes span the first factor.
pub fn split_defect(f: &GradientField) -> Result<SplitDefect> {
    let grid = f.require_grid()?;
    let n = f.n;
    if grid.dim() != 2 * n {
        return Err(Error::InvalidInput("grid dimension must be 2n".into()));
    }
    let n1: usize = grid.counts[..n].iter().product();
    let n2: usize = grid.counts[n..].iter().product();
    let blocks: Vec<[DMatrix<f64>; 4]> = f.samples.iter().map(|m| [m.a(), m.b(), m.c(), m.d()]).collect();
    // Node index = i' · n2 + i''.
    let mean_over = |blk: usize, over_second: bool| -> Vec<DMatrix<f64>> {
        let (outer, inner) = if over_second { (n1, n2) } else { (n2, n1) };
        (0..outer)
            .map(|o| {
                let mut acc = DMatrix::zeros(n, n);
                for i in 0..inner {
                    let idx = if over_second { o * n2 + i } else { i * n2 + o };
                    acc += &blocks[idx][blk];
                }
                acc / inner as f64
            })
            .collect()
    };
    let a_bar = mean_over(0, true);
    let d_bar = mean_over(3, false);
    let b_bar = mean_over(1, false);
    let c_bar = mean_over(2, true);
    let zero = DMatrix::<f64>::zeros(n, n);
    let mut direct = 0.0;
    let mut swapped = 0.0;
    for (idx, b) in blocks.iter().enumerate() {
        let (i1, i2) = (idx / n2, idx % n2);
        let w = f.weights[idx];
        let fro = |m: [DMatrix<f64>; 4]| m.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
        direct += w * fro([&b[0] - &a_bar[i1], &b[1] - &zero, &b[2] - &zero, &b[3] - &d_bar[i2]]);
        swapped += w * fro([&b[0] - &zero, &b[1] - &b_bar[i2], &b[2] - &c_bar[i1], &b[3] - &zero]);
    }
    Ok(SplitDefect { direct, swapped, defect: direct.min(swapped) })
}

/// ∫ φ det B det C and ∫ φ det A det D for every bump φ in the dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockProducts {
    pub bc: Vec<f64>,
    pub ad: Vec<f64>,
}

pub fn block_products(f: &GradientField, dict: &[Bump]) -> BlockProducts {
    let prods: Vec<(f64, f64)> =
        f.map_nodes(|m| (m.b().determinant() * m.c().determinant(), m.a().determinant() * m.d().determinant()));
    let (bc, ad) = dict
        .par_iter()
        .map(|phi| {
            let (mut s1, mut s2) = (0.0, 0.0);
            for ((x, w), (p, q)) in f.points.iter().zip(&f.weights).zip(&prods) {
                let v = w * phi.eval(x);
                s1 += v * p;
                s2 += v * q;
            }
            (s1, s2)
        })
        .unzip();
    BlockProducts { bc, ad }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductRow {
    pub index: f64,
    /// max_φ |∫φ det B_j det C_j − ∫φ det B det C|.
    pub bc_error: f64,
    pub ad_error: f64,
}

pub fn compensated_products(seq: &[(f64, GradientField)], limit: &GradientField, dict: &[Bump]) -> Vec<ProductRow> {
    let lim = block_products(limit, dict);
    let err = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    seq.iter()
        .map(|(j, f)| {
            let p = block_products(f, dict);
            ProductRow { index: *j, bc_error: err(&p.bc, &lim.bc), ad_error: err(&p.ad, &lim.ad) }
        })
        .collect()
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub index: f64,
    pub exponents: Vec<f64>,
    pub dist_l: Vec<f64>,
    pub dist_l1: Vec<f64>,
    pub dist_l2: Vec<f64>,
    pub dist_l_max: f64,
    pub deltas: Vec<f64>,
    pub sublevel: Vec<f64>,
    pub chi_mass: f64,
    pub chi_constant: bool,
    pub split_defect: Option<f64>,
    pub bc_error: Option<f64>,
    pub ad_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFlags {
    /// ‖dist(∇f_j, L)‖_1 is nonincreasing along the sequence.
    pub dist_l_decreasing: bool,
    /// |E_{j,δ}| at the smallest δ is at most `tol` · |Ω| for the last j.
    pub det_lower_bound: bool,
    /// Which of L1 / L2 is closer in L^1 at the last index (1 or 2).
    pub branch: u8,
    /// ‖dist(∇f_j, L_branch)‖_1 is nonincreasing.
    pub branch_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub schema_version: u32,
    pub rows: Vec<SequenceRow>,
    pub flags: SequenceFlags,
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15)
}

/// Tabulate the hypothesis and conclusion quantities along a sequence.
/// `deltas` must be increasing; `limit` enables the product columns.
pub fn sequence_report(
    seq: &[(f64, GradientField)],
    deltas: &[f64],
    limit: Option<&GradientField>,
    tol: f64,
) -> Result<SequenceReport> {
    if deltas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("δ ladder must be increasing".into()));
    }
    if seq.is_empty() {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    let products = match (limit, seq[0].1.grid.as_ref()) {
        (Some(l), Some(g)) => Some(compensated_products(seq, l, &bump_dictionary(g))),
        _ => None,
    };
    let mut rows = Vec::with_capacity(seq.len());
    for (k, (j, f)) in seq.iter().enumerate() {
        let exps = vec![1.0, 2.0, 2.0 * f.n as f64];
        let (dl, d1, d2) = (f.dist_l(), f.dist_l1(), f.dist_l2());
        let chi = chi_field(f);
        rows.push(SequenceRow {
            index: *j,
            dist_l: exps.iter().map(|&q| f.lq_norm(&dl, q)).collect(),
            dist_l1: exps.iter().map(|&q| f.lq_norm(&d1, q)).collect(),
            dist_l2: exps.iter().map(|&q| f.lq_norm(&d2, q)).collect(),
            dist_l_max: f.lq_norm(&dl, f64::INFINITY),
            exponents: exps,
            deltas: deltas.to_vec(),
            sublevel: det_sublevel(f, deltas),
            chi_mass: chi.mass,
            chi_constant: chi.is_constant(),
            split_defect: f.grid.as_ref().and_then(|_| split_defect(f).ok()).map(|s| s.defect),
            bc_error: products.as_ref().map(|p| p[k].bc_error),
            ad_error: products.as_ref().map(|p| p[k].ad_error),
        });
    }
    let last = rows.last().expect("nonempty");
    let vol = seq.last().map(|(_, f)| f.volume()).unwrap_or(1.0);
    let branch = if last.dist_l2[0] < last.dist_l1[0] { 2 } else { 1 };
    let col = |r: &SequenceRow| if branch == 1 { r.dist_l1[0] } else { r.dist_l2[0] };
    let flags = SequenceFlags {
        dist_l_decreasing: nonincreasing(&rows.iter().map(|r| r.dist_l[0]).collect::<Vec<_>>()),
        det_lower_bound: last.sublevel.first().is_none_or(|&m| m <= tol * vol),
        branch,
        branch_decreasing: nonincreasing(&rows.iter().map(col).collect::<Vec<_>>()),
    };
    Ok(SequenceReport { schema_version: SCHEMA_VERSION, rows, flags })
}

impl SequenceReport {
    /// Long format: one row per (index, statistic, parameter).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "statistic", "param", "value"])?;
        let mut rec = |j: f64, s: &str, p: String, v: f64| out.write_record([j.to_string(), s.to_string(), p, v.to_string()]);
        for r in &self.rows {
            for (k, q) in r.exponents.iter().enumerate() {
                rec(r.index, "dist_l", q.to_string(), r.dist_l[k])?;
                rec(r.index, "dist_l1", q.to_string(), r.dist_l1[k])?;
                rec(r.index, "dist_l2", q.to_string(), r.dist_l2[k])?;
            }
            rec(r.index, "dist_l", "inf".into(), r.dist_l_max)?;
            for (d, m) in r.deltas.iter().zip(&r.sublevel) {
                rec(r.index, "sublevel", d.to_string(), *m)?;
            }
            rec(r.index, "chi_mass", String::new(), r.chi_mass)?;
            for (name, v) in [("split_defect", r.split_defect), ("bc_error", r.bc_error), ("ad_error", r.ad_error)] {
                if let Some(v) = v {
                    rec(r.index, name, String::new(), v)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_round_trip() {
        let g = GridSpec::unit(vec![3, 1, 4]).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.multi_index(7), vec![1, 0, 3]);
        assert_eq!(g.point(0), vec![1.0 / 6.0, 0.5, 0.125]);
        assert_eq!(g.h(), 1.0 / 3.0);
    }

    #[test]
    fn psi_derivative() {
        for t in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let e = 1e-6;
            let fd = (psi(t + e).0 - psi(t - e).0) / (2.0 * e);
            assert!((fd - psi(t).1).abs() < 1e-6);
        }
    }
}
