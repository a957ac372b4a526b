//! Piecewise-affine realization of split trees on planar rectangles.
//!
//! A convex piece carrying the gradient of an internal tree node is
//! laminated by adding `a * min(s, w)`, where `B'' - B' = a ⊗ ξ`, `s` is a
//! sawtooth in `t = x·ξ` with slopes `λ` and `-(1-λ)` and `w` is a concave
//! piecewise-affine cutoff vanishing on the piece boundary. Every crease of
//! `min(s, w)` is cut exactly by half-plane clipping, so each output cell has
//! an exact gradient.

pub mod export;
pub mod geom;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminate::{Laminate, SplitTree};
use crate::mat::{rank_one_decompose, Mat2};
use geom::{area, centroid, clip, dot, edge_normal, Lin, Pt};

pub const DEFAULT_CELL_BUDGET: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain2 {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain2 {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) && x_max > x_min && y_max > y_min;
        if !ok {
            return Err(Error::InvalidInput("domain must be a rectangle with positive area".into()));
        }
        Ok(Domain2 { x_min, x_max, y_min, y_max })
    }

    pub fn unit() -> Self {
        Domain2 { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn polygon(&self) -> Vec<Pt> {
        vec![
            [self.x_min, self.y_min],
            [self.x_max, self.y_min],
            [self.x_max, self.y_max],
            [self.x_min, self.y_max],
        ]
    }

    pub fn on_boundary(&self, p: Pt) -> bool {
        p[0] == self.x_min || p[0] == self.x_max || p[1] == self.y_min || p[1] == self.y_max
    }

    fn snap(&self, p: Pt) -> Pt {
        let eps = 1e-12 * self.width().max(self.height());
        let s = |v: f64, lo: f64, hi: f64| {
            if (v - lo).abs() <= eps {
                lo
            } else if (v - hi).abs() <= eps {
                hi
            } else {
                v
            }
        };
        [s(p[0], self.x_min, self.x_max), s(p[1], self.y_min, self.y_max)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub v: [usize; 3],
    /// Gradient A_c; the map is A_c x + b_c on the cell.
    pub grad: Mat2,
    pub offset: [f64; 2],
    /// Tree node whose matrix this cell carries; `None` on cutoff cells.
    pub node: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffineMap {
    pub domain: Domain2,
    /// Boundary data Ā: f(x) = Āx on the domain boundary.
    pub boundary_matrix: Mat2,
    pub vertices: Vec<Pt>,
    /// Nodal values; boundary vertices carry Āx exactly.
    pub values: Vec<Pt>,
    pub cells: Vec<Cell>,
}

impl PiecewiseAffineMap {
    pub fn cell_area(&self, c: &Cell) -> f64 {
        area(&c.v.map(|i| self.vertices[i]))
    }

    pub fn eval_cell(&self, c: &Cell, x: Pt) -> Pt {
        let g = c.grad.apply(x);
        [g[0] + c.offset[0], g[1] + c.offset[1]]
    }

    pub fn lipschitz(&self) -> f64 {
        self.cells.iter().map(|c| c.grad.op_norm()).fold(0.0, f64::max)
    }

    /// max over boundary vertices of |f(v) - Āv| using the nodal values.
    pub fn boundary_residual(&self) -> f64 {
        self.vertices
            .iter()
            .zip(&self.values)
            .filter(|(p, _)| self.domain.on_boundary(**p))
            .map(|(p, v)| dist2(*v, self.boundary_matrix.apply(*p)))
            .fold(0.0, f64::max)
    }

    /// The same quantity using the affine data of every cell touching the
    /// boundary (round-off only).
    pub fn boundary_affine_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for c in &self.cells {
            for &i in &c.v {
                let p = self.vertices[i];
                if self.domain.on_boundary(p) {
                    r = r.max(dist2(self.eval_cell(c, p), self.boundary_matrix.apply(p)));
                }
            }
        }
        r
    }

    /// (1/|Ω|) Σ |c| A_c.
    pub fn mean_gradient(&self) -> Mat2 {
        let s = self
            .cells
            .iter()
            .fold(Mat2::zero(), |acc, c| acc + c.grad * self.cell_area(c));
        s * (1.0 / self.domain.area())
    }

    pub fn locator(&self) -> Locator {
        Locator::new(self)
    }

    /// Value at `x` from the first cell containing it.
    pub fn eval(&self, loc: &Locator, x: Pt) -> Option<Pt> {
        loc.locate(self, x).map(|c| self.eval_cell(&self.cells[c], x))
    }

    pub fn gradient(&self, loc: &Locator, x: Pt) -> Option<Mat2> {
        loc.locate(self, x).map(|c| self.cells[c].grad)
    }

    /// Distance from `x` to the boundary of the cell containing it.
    pub fn crease_distance(&self, loc: &Locator, x: Pt) -> Option<f64> {
        loc.locate(self, x).map(|c| {
            let t = self.cells[c].v.map(|i| self.vertices[i]);
            (0..3)
                .map(|k| {
                    let (p, q) = (t[k], t[(k + 1) % 3]);
                    let e = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
                    e.abs() / dist2(p, q)
                })
                .fold(f64::INFINITY, f64::min)
        })
    }
}

fn dist2(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Bucket grid over a mesh's domain for point location.
#[derive(Clone, Debug)]
pub struct Locator {
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    pub fn new(map: &PiecewiseAffineMap) -> Self {
        let side = ((map.cells.len() as f64).sqrt().ceil() as usize).clamp(1, 2048);
        let (nx, ny) = (side, side);
        let mut buckets = vec![Vec::new(); nx * ny];
        let d = map.domain;
        let bx = |x: f64| (((x - d.x_min) / d.width() * nx as f64).floor().max(0.0) as usize).min(nx - 1);
        let by = |y: f64| (((y - d.y_min) / d.height() * ny as f64).floor().max(0.0) as usize).min(ny - 1);
        for (ci, c) in map.cells.iter().enumerate() {
            let p = c.v.map(|i| map.vertices[i]);
            let lo = |k: usize| p.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
            let hi = |k: usize| p.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
            for j in by(lo(1))..=by(hi(1)) {
                for i in bx(lo(0))..=bx(hi(0)) {
                    buckets[j * nx + i].push(ci as u32);
                }
            }
        }
        Locator { nx, ny, buckets }
    }

    /// Cells whose closure contains `x`; `tol` bounds the negative
    /// barycentric coordinates.
    pub fn cells_at(&self, map: &PiecewiseAffineMap, x: Pt, tol: f64) -> Vec<usize> {
        let d = map.domain;
        let fx = (x[0] - d.x_min) / d.width() * self.nx as f64;
        let fy = (x[1] - d.y_min) / d.height() * self.ny as f64;
        let mut out = Vec::new();
        if !(fx > -1.0 && fy > -1.0 && fx < self.nx as f64 + 1.0 && fy < self.ny as f64 + 1.0) {
            return out;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        for &ci in &self.buckets[j * self.nx + i] {
            let c = &map.cells[ci as usize];
            if contains(&c.v.map(|k| map.vertices[k]), x, tol) {
                out.push(ci as usize);
            }
        }
        out
    }

    pub fn locate(&self, map: &PiecewiseAffineMap, x: Pt) -> Option<usize> {
        self.cells_at(map, x, 1e-12).first().copied()
    }
}

fn contains(t: &[Pt; 3], x: Pt, tol: f64) -> bool {
    let a2 = 2.0 * area(t);
    if a2 <= 0.0 {
        return false;
    }
    // Barycentric coordinates, each allowed to be -tol.
    (0..3).all(|k| {
        let (p, q) = (t[(k + 1) % 3], t[(k + 2) % 3]);
        let e = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
        e >= -tol * a2
    })
}

/// max over cells, their vertices and edge midpoints, of the disagreement
/// between the cell's affine map and any other cell containing the point;
/// also compares nodal values against every incident cell.
pub fn continuity_residual(map: &PiecewiseAffineMap) -> f64 {
    let loc = map.locator();
    map.cells
        .par_iter()
        .map(|c| {
            let p = c.v.map(|i| map.vertices[i]);
            let mut r: f64 = 0.0;
            for k in 0..3 {
                r = r.max(dist2(map.eval_cell(c, p[k]), map.values[c.v[k]]));
                let q = p[(k + 1) % 3];
                let mid = [0.5 * (p[k][0] + q[0]), 0.5 * (p[k][1] + q[1])];
                for x in [p[k], mid] {
                    let fx = map.eval_cell(c, x);
                    for o in loc.cells_at(map, x, 1e-9) {
                        r = r.max(dist2(fx, map.eval_cell(&map.cells[o], x)));
                    }
                }
            }
            r
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    /// Cutoff slopes keep every cell gradient within δ/2 of [B', B''].
    Tight,
    /// Cutoff slope `cutoff_slope` times the unit normal; thinner layers,
    /// far fewer cells, larger Lipschitz constant.
    Steep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub delta: f64,
    pub max_depth: usize,
    pub cell_budget: usize,
    pub cutoff: Cutoff,
    /// Cutoff slope in [`Cutoff::Steep`] mode.
    pub cutoff_slope: f64,
    /// Target area fraction lost to cutoff cells per tree level; δ/2 if
    /// unset. It is shared among the pieces laminated at that level, so a
    /// level carrying mass m loses at most `loss/m` of each piece (capped).
    pub loss: Option<f64>,
}

impl SynthOptions {
    pub fn new(delta: f64, max_depth: usize) -> Self {
        SynthOptions { delta, max_depth, cell_budget: DEFAULT_CELL_BUDGET, cutoff: Cutoff::Steep, cutoff_slope: 1.0, loss: None }
    }

    fn loss(&self) -> f64 {
        self.loss.unwrap_or(0.5 * self.delta)
    }
}

/// Triangles with area below this times diam² are dropped as slivers.
const SLIVER: f64 = 1e-12;

/// Largest fraction of a single piece given up to its cutoff layer.
const PIECE_LOSS_CAP: f64 = 0.25;

#[derive(Clone, Copy, Debug)]
struct SplitSpec {
    /// Area fraction of this piece allowed in the cutoff layer.
    loss: f64,
    lambda: f64,
    b1: Mat2,
    b2: Mat2,
    a: Pt,
    xi: Pt,
    children: [usize; 2],
}

#[derive(Clone, Debug)]
struct Piece {
    poly: Vec<Pt>,
    grad: Mat2,
    offset: Pt,
    node: Option<usize>,
}

impl Piece {
    fn value(&self, x: Pt) -> Pt {
        let g = self.grad.apply(x);
        [g[0] + self.offset[0], g[1] + self.offset[1]]
    }

    fn triangles(&self) -> usize {
        self.poly.len().saturating_sub(2)
    }
}

fn split_spec(loss: f64, lambda: f64, b1: Mat2, b2: Mat2, children: [usize; 2]) -> Result<SplitSpec> {
    let d = b2 - b1;
    let (a, xi) = rank_one_decompose(&d, 1e-12 * d.frob().max(1.0)).ok_or(Error::NotRankOne)?;
    Ok(SplitSpec { loss, lambda, b1, b2, a, xi, children })
}

fn cutoff_slopes(poly: &[Pt], sp: &SplitSpec, opts: &SynthOptions) -> Vec<(Pt, f64, f64, bool)> {
    let lam = sp.lambda;
    let a_norm = sp.a[0].hypot(sp.a[1]);
    (0..poly.len())
        .map(|i| {
            let (n, len) = edge_normal(poly, i);
            let nx = dot(n, sp.xi);
            let aligned = nx.abs() >= 1.0 - 1e-12;
            let kappa = if aligned {
                if nx > 0.0 {
                    lam
                } else {
                    1.0 - lam
                }
            } else {
                match opts.cutoff {
                    Cutoff::Steep => opts.cutoff_slope,
                    Cutoff::Tight => {
                        let bound = if nx > 0.0 { lam } else { 1.0 - lam };
                        let perp = (1.0 - nx * nx).max(0.0).sqrt();
                        let k1 = if nx.abs() > 0.0 { bound / nx.abs() } else { f64::INFINITY };
                        k1.min(opts.delta / (2.0 * a_norm * perp))
                    }
                }
            };
            (n, len, kappa, aligned)
        })
        .collect()
}

/// Laminates one convex piece carrying the matrix λB' + (1-λ)B''.
fn laminate_piece(piece: &Piece, sp: &SplitSpec, opts: &SynthOptions) -> Result<Vec<Piece>> {
    let poly = &piece.poly;
    let lam = sp.lambda;
    let pa = area(poly);
    let edges = cutoff_slopes(poly, sp, opts);
    let ws: Vec<Lin> = edges
        .iter()
        .enumerate()
        .map(|(i, &(n, _, k, _))| {
            let p = poly[i];
            Lin::new([k * n[0], k * n[1]], -k * dot(n, p))
        })
        .collect();
    let t0 = poly.iter().map(|p| dot(*p, sp.xi)).fold(f64::INFINITY, f64::min);
    let t1 = poly.iter().map(|p| dot(*p, sp.xi)).fold(f64::NEG_INFINITY, f64::max);
    let perim: f64 = edges.iter().filter(|e| !e.3).map(|e| e.1 / e.2).sum();
    let ext = t1 - t0;
    let period = if perim > 0.0 {
        2.0 * sp.loss * pa / (lam * (1.0 - lam) * perim)
    } else {
        ext
    };
    let m = (ext / period).ceil().max(1.0);
    if !(m <= opts.cell_budget as f64) {
        return Err(Error::CellBudgetExceeded { cells: m as usize, budget: opts.cell_budget });
    }
    let m = m as usize;
    let p = ext / m as f64;
    let tau = |k: usize| if k == m { t1 } else { t0 + k as f64 * p };
    let xi = sp.xi;
    let mut out = Vec::new();
    for k in 0..m {
        let (ta, tb) = (tau(k), tau(k + 1));
        let tm = ta + (1.0 - lam) * (tb - ta);
        // Up part: s = λ(t - ta) -> B''; down part: s = (1-λ)(tb - t) -> B'.
        let parts = [
            (ta, tm, Lin::new([lam * xi[0], lam * xi[1]], -lam * ta), sp.b2, sp.children[1]),
            (tm, tb, Lin::new([-(1.0 - lam) * xi[0], -(1.0 - lam) * xi[1]], (1.0 - lam) * tb), sp.b1, sp.children[0]),
        ];
        for (pi, &(lo, hi, ell, target, child)) in parts.iter().enumerate() {
            let mut r = poly.clone();
            if !(k == 0 && pi == 0) {
                r = clip(&r, &Lin::new([-xi[0], -xi[1]], lo));
            }
            if !(k == m - 1 && pi == 1) {
                r = clip(&r, &Lin::new(xi, -hi));
            }
            if r.len() < 3 || area(&r) <= 0.0 {
                continue;
            }
            let h = lam * (1.0 - lam) * p;
            let slack = 1e-12 * h;
            let cands: Vec<usize> = (0..ws.len())
                .filter(|&e| r.iter().any(|&v| ws[e].eval(v) < ell.eval(v) - slack))
                .collect();
            let mut fns = vec![ell];
            fns.extend(cands.iter().map(|&e| ws[e]));
            // Edges much shorter than the piece have inaccurate normals, and
            // their cutoff can dip below zero inside; g = max(0, min(..)).
            let zero = Lin::new([0.0, 0.0], 0.0);
            let dips = fns[1..].iter().any(|w| r.iter().any(|&v| w.eval(v) < -slack));
            let mut regions: Vec<(Vec<Pt>, Lin, bool)> = Vec::with_capacity(2 * fns.len());
            for (ci, f) in fns.iter().enumerate() {
                let mut q = if dips { clip(&r, &zero.sub(f)) } else { r.clone() };
                for (di, g) in fns.iter().enumerate() {
                    if di != ci && q.len() >= 3 {
                        q = clip(&q, &f.sub(g));
                    }
                }
                regions.push((q, *f, ci == 0));
            }
            if dips {
                // {w_j <= 0, w_i >= 0 for i < j}: the pieces where g = 0.
                for j in 1..fns.len() {
                    let mut q = clip(&r, &fns[j]);
                    for prev in &fns[1..j] {
                        if q.len() >= 3 {
                            q = clip(&q, &zero.sub(prev));
                        }
                    }
                    regions.push((q, zero, false));
                }
            }
            for (q, f, is_ell) in regions {
                if q.len() < 3 || area(&q) <= 0.0 {
                    continue;
                }
                let x0 = centroid(&q);
                let base = piece.value(x0);
                let g0 = f.eval(x0);
                let val = [base[0] + sp.a[0] * g0, base[1] + sp.a[1] * g0];
                let (grad, node) = if is_ell {
                    (target, Some(child))
                } else {
                    (piece.grad + Mat2::outer(sp.a, f.g), None)
                };
                let gx = grad.apply(x0);
                out.push(Piece { poly: q, grad, offset: [val[0] - gx[0], val[1] - gx[1]], node });
            }
        }
    }
    Ok(out)
}

fn run(
    root: Mat2,
    specs: &[Option<SplitSpec>],
    dom: &Domain2,
    opts: &SynthOptions,
) -> Result<PiecewiseAffineMap> {
    if !(opts.delta > 0.0 && opts.delta < 1.0) {
        return Err(Error::InvalidInput("δ must lie in (0,1)".into()));
    }
    if !(opts.cutoff_slope > 0.0 && opts.cutoff_slope.is_finite()) || opts.loss.is_some_and(|l| !(l > 0.0)) {
        return Err(Error::InvalidInput("cutoff slope and loss must be positive".into()));
    }
    let mut pieces = vec![Piece { poly: dom.polygon(), grad: root, offset: [0.0, 0.0], node: Some(0) }];
    for _ in 0..opts.max_depth {
        if !pieces.iter().any(|p| p.node.is_some_and(|n| specs[n].is_some())) {
            break;
        }
        let next: Result<Vec<Vec<Piece>>> = pieces
            .par_iter()
            .map(|p| match p.node.and_then(|n| specs[n].as_ref()) {
                Some(sp) => laminate_piece(p, sp, opts),
                None => Ok(vec![p.clone()]),
            })
            .collect();
        pieces = next?.into_iter().flatten().collect();
        let cells: usize = pieces.iter().map(Piece::triangles).sum();
        if cells > opts.cell_budget {
            return Err(Error::CellBudgetExceeded { cells, budget: opts.cell_budget });
        }
    }
    Ok(assemble(pieces, dom, root))
}

fn assemble(pieces: Vec<Piece>, dom: &Domain2, root: Mat2) -> PiecewiseAffineMap {
    let mut index = std::collections::HashMap::new();
    let mut vertices = Vec::new();
    let mut values = Vec::new();
    let mut cells = Vec::new();
    for p in &pieces {
        let ids: Vec<usize> = p
            .poly
            .iter()
            .map(|&x| {
                let x = dom.snap(x);
                *index.entry((x[0].to_bits(), x[1].to_bits())).or_insert_with(|| {
                    vertices.push(x);
                    values.push(if dom.on_boundary(x) { root.apply(x) } else { p.value(x) });
                    vertices.len() - 1
                })
            })
            .collect();
        for k in 1..ids.len().saturating_sub(1) {
            let v = [ids[0], ids[k], ids[k + 1]];
            if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
                continue;
            }
            let t = v.map(|i| vertices[i]);
            let diam = dist2(t[0], t[1]).max(dist2(t[1], t[2])).max(dist2(t[2], t[0]));
            if area(&t) <= SLIVER * diam * diam {
                continue;
            }
            cells.push(Cell { v, grad: p.grad, offset: p.offset, node: p.node });
        }
    }
    PiecewiseAffineMap { domain: *dom, boundary_matrix: root, vertices, values, cells }
}

/// Two-gradient lamination of the rectangle with f = Ax on its boundary.
pub fn simple_lamination(a: Mat2, b1: Mat2, b2: Mat2, lambda: f64, dom: &Domain2, delta: f64) -> Result<PiecewiseAffineMap> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidInput(format!("λ = {lambda} not in (0,1)")));
    }
    let residual = (a - (b1 * lambda + b2 * (1.0 - lambda))).frob();
    if residual > 1e-9 * a.frob().max(b1.frob()).max(b2.frob()).max(1.0) {
        return Err(Error::NotOnSegment { residual });
    }
    let opts = SynthOptions { cutoff: Cutoff::Tight, ..SynthOptions::new(delta, 1) };
    let sp = split_spec(opts.loss(), lambda, b1, b2, [1, 2])?;
    run(a, &[Some(sp), None, None], dom, &opts)
}

/// Realizes a split tree: cells carrying an internal node's matrix are
/// laminated according to that node's split, level by level.
pub fn realize(tree: &SplitTree<Mat2>, dom: &Domain2, opts: &SynthOptions) -> Result<PiecewiseAffineMap> {
    tree.validate()?;
    let depth = tree.node_depths();
    let mut mass = vec![0.0; tree.nodes.len()];
    mass[0] = 1.0;
    for (i, n) in tree.nodes.iter().enumerate() {
        if let Some(b) = n.split {
            mass[b.children[0]] = mass[i] * b.lambda;
            mass[b.children[1]] = mass[i] * (1.0 - b.lambda);
        }
    }
    let mut level_mass = vec![0.0; tree.depth() + 1];
    for (i, n) in tree.nodes.iter().enumerate() {
        if n.split.is_some() {
            level_mass[depth[i]] += mass[i];
        }
    }
    let specs: Vec<Option<SplitSpec>> = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| match n.split {
            None => Ok(None),
            Some(b) => {
                let [c1, c2] = b.children;
                let loss = (opts.loss() / level_mass[depth[i]]).min(PIECE_LOSS_CAP);
                split_spec(loss, b.lambda, tree.nodes[c1].matrix, tree.nodes[c2].matrix, b.children).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    run(*tree.root(), &specs, dom, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub atom: Mat2,
    /// Laminate weight when the bins come from a laminate.
    pub weight: Option<f64>,
    pub area_fraction: f64,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub cells: usize,
    pub vertices: usize,
    pub domain_area: f64,
    pub area_sum: f64,
    pub area_residual: f64,
    pub lipschitz: f64,
    pub boundary_residual: f64,
    pub boundary_affine_residual: f64,
    pub continuity_residual: f64,
    pub mean_gradient: Mat2,
    pub mean_gradient_residual: f64,
    pub det_min: f64,
    pub det_max: f64,
    pub det_mean: f64,
    pub radius: f64,
    pub histogram: Vec<HistBin>,
    /// Area fraction within `radius` of some bin.
    pub on_atom_fraction: f64,
    /// max |area_fraction - weight| over bins (laminate bins only).
    pub max_weight_error: Option<f64>,
}

/// Mesh statistics. With a laminate the histogram bins are its atoms and a
/// cell is counted in the nearest atom within `radius`; otherwise gradients
/// are clustered greedily in cell order.
pub fn analyze(map: &PiecewiseAffineMap, atoms: Option<&Laminate<Mat2>>, radius: f64) -> SynthReport {
    let areas: Vec<f64> = map.cells.iter().map(|c| map.cell_area(c)).collect();
    let area_sum: f64 = areas.iter().sum();
    let dom_area = map.domain.area();
    let mut bins: Vec<HistBin> = match atoms {
        Some(l) => l
            .atoms
            .iter()
            .map(|a| HistBin { atom: a.matrix, weight: Some(a.weight), area_fraction: 0.0, cells: 0 })
            .collect(),
        None => Vec::new(),
    };
    let mut on = 0.0;
    let (mut dmin, mut dmax, mut dsum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for (c, &ar) in map.cells.iter().zip(&areas) {
        let det = c.grad.det();
        dmin = dmin.min(det);
        dmax = dmax.max(det);
        dsum += det * ar;
        let nearest = bins
            .iter()
            .enumerate()
            .map(|(i, b)| (i, (b.atom - c.grad).frob()))
            .min_by(|x, y| x.1.total_cmp(&y.1));
        let slot = match nearest {
            Some((i, d)) if d <= radius => Some(i),
            _ if atoms.is_none() => {
                bins.push(HistBin { atom: c.grad, weight: None, area_fraction: 0.0, cells: 0 });
                Some(bins.len() - 1)
            }
            _ => None,
        };
        if let Some(i) = slot {
            bins[i].area_fraction += ar;
            bins[i].cells += 1;
            on += ar;
        }
    }
    for b in &mut bins {
        b.area_fraction /= dom_area;
    }
    let max_weight_error = atoms.map(|_| {
        bins.iter()
            .map(|b| (b.area_fraction - b.weight.unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    });
    let mean = map.mean_gradient();
    SynthReport {
        cells: map.cells.len(),
        vertices: map.vertices.len(),
        domain_area: dom_area,
        area_sum,
        area_residual: (area_sum - dom_area).abs() / dom_area,
        lipschitz: map.lipschitz(),
        boundary_residual: map.boundary_residual(),
        boundary_affine_residual: map.boundary_affine_residual(),
        continuity_residual: continuity_residual(map),
        mean_gradient: mean,
        mean_gradient_residual: (mean - map.boundary_matrix).frob(),
        det_min: dmin,
        det_max: dmax,
        det_mean: dsum / area_sum,
        radius,
        histogram: bins,
        on_atom_fraction: on / dom_area,
        max_weight_error,
    }
}

/// Index of the nearest laminate atom within `radius`, per cell.
pub fn nearest_atoms(map: &PiecewiseAffineMap, atoms: &[Mat2], radius: f64) -> Vec<Option<usize>> {
    map.cells
        .iter()
        .map(|c| {
            atoms
                .iter()
                .enumerate()
                .map(|(i, a)| (i, (*a - c.grad).frob()))
                .filter(|(_, d)| *d <= radius)
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .map(|(i, _)| i)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_is_affine() {
        let a = Mat2::new(1.0, 2.0, 3.0, 4.0);
        let mut tree = SplitTree::new(a);
        tree.split_node(0, 0.5, a - Mat2::diag(1.0, 0.0), a + Mat2::diag(1.0, 0.0)).unwrap();
        let map = realize(&tree, &Domain2::unit(), &SynthOptions::new(0.1, 0)).unwrap();
        assert_eq!(map.cells.len(), 2);
        assert!(map.cells.iter().all(|c| c.grad == a));
        let rep = analyze(&map, None, 0.1);
        assert_eq!(rep.histogram.len(), 1);
        assert_eq!(rep.boundary_residual, 0.0);
    }

    #[test]
    fn degenerate_domain_is_rejected() {
        assert!(Domain2::new(0.0, 1.0, 0.5, 0.5).is_err());
    }
}
