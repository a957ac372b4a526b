//! Heisenberg group in exponential coordinates, contact-form pullbacks and
//! lifts of area-preserving planar maps.
//!
//! Points (x1, x2, x3) stand for the unitriangular matrix with x1, x2 on the
//! superdiagonal and x3 in the corner; θ3 = dx3 - x1 dx2.

use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::MapFamily;
use crate::mat::{classify_split_mat2, Mat2, SplitClass};

pub type HPoint = [f64; 3];

pub fn group_mul(x: HPoint, y: HPoint) -> HPoint {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1]]
}

pub fn group_inv(x: HPoint) -> HPoint {
    [-x[0], -x[1], -x[2] + x[0] * x[1]]
}

/// Coefficients (c1, c2, c3) of F*θ3 = dF3 - F1 dF2 at a point, given F(x)
/// and its Jacobian there.
pub fn theta3_pullback(fx: HPoint, jac: &Matrix3<f64>) -> [f64; 3] {
    let mut c = [0.0; 3];
    for (k, ck) in c.iter_mut().enumerate() {
        *ck = jac[(2, k)] - fx[0] * jac[(1, k)];
    }
    c
}

/// θ3 at x: (0, -x1, 1).
pub fn theta3(x: HPoint) -> [f64; 3] {
    [0.0, -x[0], 1.0]
}

/// Vertex grid on a rectangle: (n1 + 1) × (n2 + 1) nodes, x1 varying slowest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub cells: [usize; 2],
}

impl PlaneGrid {
    pub fn new(lo: [f64; 2], hi: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) || cells[0] < 2 || cells[1] < 2 {
            return Err(Error::InvalidInput("plane grid needs lo < hi and at least 2 cells per axis".into()));
        }
        Ok(PlaneGrid { lo, hi, cells })
    }

    pub fn square(n: usize) -> Result<Self> {
        PlaneGrid::new([0.0, 0.0], [1.0, 1.0], [n, n])
    }

    pub fn for_family(f: &MapFamily, n: usize) -> Result<Self> {
        PlaneGrid::new([f.domain[0][0], f.domain[1][0]], [f.domain[0][1], f.domain[1][1]], [n, n])
    }

    pub fn nodes(&self) -> [usize; 2] {
        [self.cells[0] + 1, self.cells[1] + 1]
    }

    pub fn len(&self) -> usize {
        self.nodes()[0] * self.nodes()[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> [f64; 2] {
        [(self.hi[0] - self.lo[0]) / self.cells[0] as f64, (self.hi[1] - self.lo[1]) / self.cells[1] as f64]
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nodes()[1] + j
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        // Pin the last node to hi exactly.
        let c = |k: usize, m: usize| if m == self.cells[k] { self.hi[k] } else { self.lo[k] + m as f64 * h[k] };
        [c(0, i), c(1, j)]
    }
}

type FormFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// p dx1 + q dx2 sampled on a vertex grid, optionally with the closure it
/// was sampled from (enables accurate path integrals between nodes).
#[derive(Clone)]
pub struct OneForm2 {
    pub grid: PlaneGrid,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Distance from each node to the source map's crease set.
    pub crease: Vec<f64>,
    source: Option<FormFn>,
}

impl std::fmt::Debug for OneForm2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OneForm2").field("grid", &self.grid).field("exact_source", &self.source.is_some()).finish()
    }
}

impl OneForm2 {
    /// Sample a closure on the grid and keep it for path integration.
    pub fn from_fn(grid: PlaneGrid, f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        let mut form = OneForm2::from_samples(grid, Vec::new(), Vec::new()).expect("empty samples");
        let (p, q): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|k| {
                let n2 = grid.nodes()[1];
                f(grid.point(k / n2, k % n2)).into()
            })
            .unzip();
        form.p = p;
        form.q = q;
        form.crease = vec![f64::INFINITY; grid.len()];
        form.source = Some(Arc::new(f));
        form
    }

    /// Grid data only; path integrals fall back to the trapezoid rule.
    pub fn from_samples(grid: PlaneGrid, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if !(p.is_empty() && q.is_empty()) && (p.len() != grid.len() || q.len() != grid.len()) {
            return Err(Error::InvalidInput("one-form samples do not match the grid".into()));
        }
        Ok(OneForm2 { grid, crease: vec![f64::INFINITY; p.len()], p, q, source: None })
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    fn at(&self, x: [f64; 2]) -> [f64; 2] {
        (self.source.as_ref().expect("source"))(x)
    }
}

/// α with ĥ*θ3 = θ3 + π*α for ĥ(x1, x2, x3) = (h(x1, x2), x3), i.e.
/// α = x1 dx2 - h1 dh2: p = -h1 ∂1h2, q = x1 - h1 ∂2h2.
pub fn alpha_of(h: &MapFamily, grid: PlaneGrid) -> Result<OneForm2> {
    if h.dim != 2 {
        return Err(Error::InvalidInput("alpha needs a planar map".into()));
    }
    let hf = h.clone();
    let step = 1e-6 * grid.h()[0].max(grid.h()[1]).max(1e-3);
    let mut form = OneForm2::from_fn(grid, move |x| {
        let y = hf.eval(&x);
        let j = hf.jacobian(&x, step);
        [-y[0] * j[(1, 0)], x[0] - y[0] * j[(1, 1)]]
    });
    let n2 = grid.nodes()[1];
    form.crease = (0..grid.len()).map(|k| h.crease_distance(&grid.point(k / n2, k % n2))).collect();
    Ok(form)
}

/// Cells whose corners all sit farther than one cell diagonal from a crease.
fn clean_cell(form: &OneForm2, i: usize, j: usize) -> bool {
    let h = form.grid.h();
    let diag = (h[0] * h[0] + h[1] * h[1]).sqrt();
    let g = &form.grid;
    [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].iter().all(|&(a, b)| form.crease[g.idx(a, b)] > diag)
}

/// Circulation of the grid-sampled form around one cell (trapezoid edges)
/// divided by the cell area.
fn cell_curl(form: &OneForm2, i: usize, j: usize) -> f64 {
    let g = &form.grid;
    let h = g.h();
    let (p, q) = (&form.p, &form.q);
    let (a, b, c, d) = (g.idx(i, j), g.idx(i + 1, j), g.idx(i, j + 1), g.idx(i + 1, j + 1));
    (0.5 * (q[b] + q[d]) - 0.5 * (q[a] + q[c])) / h[0] - (0.5 * (p[c] + p[d]) - 0.5 * (p[a] + p[b])) / h[1]
}

/// max over clean cells of the discrete ∂1q - ∂2p.
pub fn closedness_residual(form: &OneForm2) -> f64 {
    let [c1, c2] = form.grid.cells;
    (0..c1)
        .into_par_iter()
        .map(|i| (0..c2).filter(|&j| clean_cell(form, i, j)).map(|j| cell_curl(form, i, j).abs()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

const GAUSS_POINTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub grid: PlaneGrid,
    pub base: [usize; 2],
    /// u with du = -α and u(base) = 0, integrated x1 first then x2.
    pub u: Vec<f64>,
    /// max |u(x1 first) - u(x2 first)|.
    pub path_residual: f64,
    pub closedness: f64,
}

struct Integrator<'a> {
    form: &'a OneForm2,
    rule: Option<GaussLegendre>,
}

impl Integrator<'_> {
    /// ∫ of the form along the grid segment from node (i, j) one step along
    /// `axis` (0: x1, 1: x2).
    fn segment(&self, i: usize, j: usize, axis: usize) -> f64 {
        let g = &self.form.grid;
        let a = g.point(i, j);
        let (i2, j2) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
        let b = g.point(i2, j2);
        match &self.rule {
            Some(rule) => {
                if axis == 0 {
                    rule.integrate(a[0], b[0], |s| self.form.at([s, a[1]])[0])
                } else {
                    rule.integrate(a[1], b[1], |t| self.form.at([a[0], t])[1])
                }
            }
            None => {
                let (k1, k2) = (g.idx(i, j), g.idx(i2, j2));
                let v = if axis == 0 { &self.form.p } else { &self.form.q };
                0.5 * (v[k1] + v[k2]) * (b[axis] - a[axis])
            }
        }
    }

    /// Signed ∫ from index `from` to every index of a grid line along `axis`.
    fn line(&self, fixed: usize, from: usize, axis: usize) -> Vec<f64> {
        let n = self.form.grid.nodes()[axis];
        let mut out = vec![0.0; n];
        let seg = |k: usize| if axis == 0 { self.segment(k, fixed, 0) } else { self.segment(fixed, k, 1) };
        for k in from..n - 1 {
            out[k + 1] = out[k] + seg(k);
        }
        for k in (0..from).rev() {
            out[k] = out[k + 1] - seg(k);
        }
        out
    }
}

fn integrate(form: &OneForm2, base: [usize; 2], x1_first: bool, rule: &Option<GaussLegendre>) -> Vec<f64> {
    let it = Integrator { form, rule: rule.clone() };
    let g = &form.grid;
    let [n1, n2] = g.nodes();
    let mut u = vec![0.0; g.len()];
    if x1_first {
        // Along x1 on the base row, then along x2 on every column.
        let row = it.line(base[1], base[0], 0);
        let cols: Vec<Vec<f64>> = (0..n1).into_par_iter().map(|i| it.line(i, base[1], 1)).collect();
        for i in 0..n1 {
            for j in 0..n2 {
                u[g.idx(i, j)] = -(row[i] + cols[i][j]);
            }
        }
    } else {
        let col = it.line(base[0], base[1], 1);
        let rows: Vec<Vec<f64>> = (0..n2).into_par_iter().map(|j| it.line(j, base[0], 0)).collect();
        for i in 0..n1 {
            for j in 0..n2 {
                u[g.idx(i, j)] = -(col[j] + rows[j][i]);
            }
        }
    }
    u
}

/// Solve du = -α by axis-ordered path integration from `base` (u(base) = 0).
/// Segments use 8-point Gauss–Legendre on the source closure when present,
/// the trapezoid rule on grid samples otherwise.
pub fn potential(form: &OneForm2, base: [usize; 2], threshold: f64) -> Result<Potential> {
    let g = &form.grid;
    if base[0] >= g.nodes()[0] || base[1] >= g.nodes()[1] {
        return Err(Error::InvalidInput("basepoint outside the grid".into()));
    }
    let closedness = closedness_residual(form);
    if closedness > threshold {
        return Err(Error::NotClosed { residual: closedness, threshold });
    }
    let rule = form.source.as_ref().map(|_| GaussLegendre::new(NonZeroUsize::new(GAUSS_POINTS).unwrap()));
    let u = integrate(form, base, true, &rule);
    let v = integrate(form, base, false, &rule);
    let path_residual = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Potential { grid: *g, base, u, path_residual, closedness })
}

/// Second-order derivative of grid data along one axis (central inside,
/// three-point one-sided at the ends).
fn grid_partial(g: &PlaneGrid, u: &[f64], i: usize, j: usize, axis: usize) -> f64 {
    let n = g.nodes()[axis];
    let h = g.h()[axis];
    let at = |k: usize| if axis == 0 { u[g.idx(k, j)] } else { u[g.idx(i, k)] };
    let k = if axis == 0 { i } else { j };
    if k == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(k + 1) - at(k - 1)) / (2.0 * h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftDiagnostics {
    /// max over clean nodes of |f̂*θ3 - θ3| (Euclidean norm of coefficients).
    pub theta3_residual: f64,
    pub theta3_mean: f64,
    /// max |π∘f̂ - f∘π| over the nodes.
    pub fiber_residual: f64,
    /// max |f̂(x + c e3) - f̂(x) - c e3| over nodes and a few shifts.
    pub center_residual: f64,
    pub det_defect: f64,
    pub path_residual: f64,
    pub closedness: f64,
    pub h: f64,
}

/// f̂(x1, x2, x3) = (f(x1, x2), x3 + u(x1, x2)) on a vertex grid.
#[derive(Clone, Debug)]
pub struct Lift {
    pub family: MapFamily,
    pub potential: Potential,
    pub alpha: OneForm2,
    pub diagnostics: LiftDiagnostics,
}

pub const SCHEMA_VERSION: u32 = 1;

/// Serializable description of a lift: grid, u and the planar family name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftDescriptor {
    pub schema_version: u32,
    pub family: String,
    pub params: Vec<(String, f64)>,
    pub potential: Potential,
    pub diagnostics: LiftDiagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    /// Largest allowed |det ∇f - 1| at clean nodes.
    pub det_tol: f64,
    /// Largest allowed closedness residual.
    pub closed_tol: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { det_tol: 1e-8, closed_tol: 0.1 }
    }
}

pub fn lift(f: &MapFamily, grid: PlaneGrid, base: [usize; 2], opts: LiftOptions) -> Result<Lift> {
    let alpha = alpha_of(f, grid)?;
    let n2 = grid.nodes()[1];
    let hmax = grid.h()[0].max(grid.h()[1]);
    let step = 1e-6 * hmax.max(1e-3);
    let det_defect = (0..grid.len())
        .filter(|&k| alpha.crease[k] > hmax)
        .map(|k| (f.jacobian(&grid.point(k / n2, k % n2), step).determinant() - 1.0).abs())
        .fold(0.0, f64::max);
    if det_defect > opts.det_tol {
        return Err(Error::NotAreaPreserving { defect: det_defect });
    }
    let pot = potential(&alpha, base, opts.closed_tol)?;
    let (mut worst, mut sum, mut count) = (0.0f64, 0.0, 0usize);
    for k in 0..grid.len() {
        let (i, j) = (k / n2, k % n2);
        // The stencil spans two nodes on each side.
        if alpha.crease[k] <= 2.0 * hmax * std::f64::consts::SQRT_2 {
            continue;
        }
        let r1 = grid_partial(&grid, &pot.u, i, j, 0) + alpha.p[k];
        let r2 = grid_partial(&grid, &pot.u, i, j, 1) + alpha.q[k];
        let r = r1.hypot(r2);
        worst = worst.max(r);
        sum += r;
        count += 1;
    }
    let mut out = Lift {
        family: f.clone(),
        potential: pot.clone(),
        alpha,
        diagnostics: LiftDiagnostics {
            theta3_residual: worst,
            theta3_mean: if count > 0 { sum / count as f64 } else { 0.0 },
            fiber_residual: 0.0,
            center_residual: 0.0,
            det_defect,
            path_residual: pot.path_residual,
            closedness: pot.closedness,
            h: hmax,
        },
    };
    let (mut fiber, mut center) = (0.0f64, 0.0f64);
    for k in (0..grid.len()).step_by((grid.len() / 257).max(1)) {
        let (i, j) = (k / n2, k % n2);
        let x = grid.point(i, j);
        let y = f.eval(&x);
        for x3 in [-1.0, 0.0, 0.75] {
            let a = out.eval_node(i, j, x3);
            fiber = fiber.max((a[0] - y[0]).abs()).max((a[1] - y[1]).abs());
            for c in [-2.5, 1.0] {
                let b = out.eval_node(i, j, x3 + c);
                center = center.max((b[2] - a[2] - c).abs()).max((b[0] - a[0]).abs()).max((b[1] - a[1]).abs());
            }
        }
    }
    out.diagnostics.fiber_residual = fiber;
    out.diagnostics.center_residual = center;
    Ok(out)
}

impl Lift {
    pub fn grid(&self) -> PlaneGrid {
        self.potential.grid
    }

    pub fn u_at(&self, i: usize, j: usize) -> f64 {
        self.potential.u[self.grid().idx(i, j)]
    }

    pub fn eval_node(&self, i: usize, j: usize, x3: f64) -> HPoint {
        let x = self.grid().point(i, j);
        let y = self.family.eval(&x);
        [y[0], y[1], x3 + self.u_at(i, j)]
    }

    pub fn descriptor(&self) -> LiftDescriptor {
        LiftDescriptor {
            schema_version: SCHEMA_VERSION,
            family: self.family.name.clone(),
            params: self.family.params.clone(),
            potential: self.potential.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Jacobian of f̂ at node (i, j): rows 1-2 from central differences of f
    /// with step `fd`, row 3 from grid differences of u; ∂3 f̂ = e3.
    pub fn jacobian_at(&self, i: usize, j: usize, fd: f64) -> Matrix3<f64> {
        let g = self.grid();
        let x = g.point(i, j);
        let jf = self.family.fd_jacobian(&x, fd);
        let mut m = Matrix3::zeros();
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] = jf[(r, c)];
            }
        }
        m[(2, 0)] = grid_partial(&g, &self.potential.u, i, j, 0);
        m[(2, 1)] = grid_partial(&g, &self.potential.u, i, j, 1);
        m[(2, 2)] = 1.0;
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PansuReport {
    pub node: [usize; 2],
    /// Df̂ in left-invariant frames: M_ab = θ_a(Df̂ X_b).
    pub frame_matrix: [[f64; 3]; 3],
    /// max |V1 block - ∇f|.
    pub v1_error: f64,
    /// max(|M_13|, |M_23|, |M_33 - 1|).
    pub v2_error: f64,
    /// max(|M_31|, |M_32|): horizontal vectors leaving V1.
    pub horizontal_error: f64,
    pub v1_class: SplitClass,
    pub planar_class: SplitClass,
}

impl PansuReport {
    pub fn passes(&self, tol: f64, horizontal_tol: f64) -> bool {
        self.v1_error <= tol && self.v2_error <= tol && self.horizontal_error <= horizontal_tol
    }
}

/// Check that Df̂ at a node preserves V1 and V2 and restricts to ∇f on V1.
pub fn pansu_block_check(l: &Lift, node: [usize; 2], class_tol: f64) -> Result<PansuReport> {
    let g = l.grid();
    let [i, j] = node;
    if i >= g.nodes()[0] || j >= g.nodes()[1] {
        return Err(Error::InvalidInput("node outside the grid".into()));
    }
    let x = g.point(i, j);
    let hmax = g.h()[0].max(g.h()[1]);
    if l.family.crease_distance(&x) <= 2.0 * hmax * std::f64::consts::SQRT_2 {
        return Err(Error::NotDifferentiableHere(format!("node {node:?} is within the crease stencil")));
    }
    let fd = 1e-5 * hmax.max(1e-3) * 100.0;
    let jac = l.jacobian_at(i, j, fd);
    let y = l.eval_node(i, j, 0.0);
    // Columns X1 = ∂1, X2 = ∂2 + x1 ∂3, X3 = ∂3 at x̂; rows θ1, θ2, θ3 at f̂(x̂).
    let frame = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, x[0], 1.0);
    let coframe = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -y[0], 1.0);
    let m = coframe * jac * frame;
    let exact: DMatrix<f64> = l.family.jacobian(&x, fd);
    let v1 = Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let planar = Mat2::new(exact[(0, 0)], exact[(0, 1)], exact[(1, 0)], exact[(1, 1)]);
    let v1_error = (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| (m[(r, c)] - exact[(r, c)]).abs()).fold(0.0, f64::max);
    let mut frame_matrix = [[0.0; 3]; 3];
    for (r, row) in frame_matrix.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    Ok(PansuReport {
        node,
        frame_matrix,
        v1_error,
        v2_error: m[(0, 2)].abs().max(m[(1, 2)].abs()).max((m[(2, 2)] - 1.0).abs()),
        horizontal_error: m[(2, 0)].abs().max(m[(2, 1)].abs()),
        v1_class: classify_split_mat2(&v1, class_tol),
        planar_class: classify_split_mat2(&planar, class_tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_law_examples() {
        assert_eq!(group_mul([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [1.0, 1.0, 1.0]);
        assert_eq!(group_mul([0.0, 1.0, 0.0], [1.0, 0.0, 0.0]), [1.0, 1.0, 0.0]);
        let x = [0.3, -1.2, 2.0];
        assert_eq!(group_mul(x, [0.0; 3]), x);
        assert!(group_mul(x, group_inv(x)).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn grid_partial_is_second_order_at_the_ends() {
        let g = PlaneGrid::square(8).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| g.point(k / 9, k % 9)).map(|x| x[0] * x[0] + 3.0 * x[1]).collect();
        assert!((grid_partial(&g, &u, 0, 3, 0) - 0.0).abs() < 1e-14);
        assert!((grid_partial(&g, &u, 8, 3, 0) - 2.0).abs() < 1e-14);
        assert!((grid_partial(&g, &u, 4, 8, 1) - 3.0).abs() < 1e-13);
    }
}
