//! Dense 2x2 and 2n x 2n matrices with the split structure
//! L = L1 (block diagonal) ∪ L2 (block antidiagonal).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};

/// Default relative tolerance for algebraic identities.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Mat2::new(1.0, 0.0, 0.0, 1.0)
    }

    pub const fn zero() -> Self {
        Mat2::new(0.0, 0.0, 0.0, 0.0)
    }

    /// The coordinate swap (0 1; 1 0).
    pub const fn swap() -> Self {
        Mat2::new(0.0, 1.0, 1.0, 0.0)
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn outer(a: [f64; 2], xi: [f64; 2]) -> Self {
        Mat2::new(a[0] * xi[0], a[0] * xi[1], a[1] * xi[0], a[1] * xi[1])
    }

    #[inline]
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[inline]
    pub fn frob(&self) -> f64 {
        self.frob_sq().sqrt()
    }

    #[inline]
    pub fn frob_sq(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        // sigma_max^2 = (|M|^2 + sqrt(|M|^4 - 4 det^2)) / 2
        let f2 = self.frob_sq();
        let d = self.det();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0);
        ((f2 + disc.sqrt()) / 2.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 {
            return None;
        }
        let m = &self.0;
        Some(Mat2::new(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d))
    }

    pub fn dist_l1(&self) -> f64 {
        self.0[0][1].hypot(self.0[1][0])
    }

    pub fn dist_l2(&self) -> f64 {
        self.0[0][0].hypot(self.0[1][1])
    }

    pub fn to_block(&self) -> BlockMat {
        BlockMat::from_mat2(self)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] - b[0][0],
            a[0][1] - b[0][1],
            a[1][0] - b[1][0],
            a[1][1] - b[1][1],
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self * -1.0
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        let a = &self.0;
        Mat2::new(a[0][0] * s, a[0][1] * s, a[1][0] * s, a[1][1] * s)
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m * self
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// A 2n x 2n matrix viewed through its n x n blocks (A B; C D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct BlockMat {
    n: usize,
    m: DMatrix<f64>,
}

impl BlockMat {
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "block matrix must be 2n x 2n, got {r} x {c}"
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(BlockMat { n: r / 2, m })
    }

    /// Row-major entries of a 2n x 2n matrix.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        let s = 2 * n;
        if n == 0 || data.len() != s * s {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for n = {n}, got {}",
                s * s,
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(s, s, data))
    }

    pub fn from_blocks(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        for blk in [a, b, c, d] {
            if blk.shape() != (n, n) {
                return Err(Error::InvalidInput("blocks must share the same n".into()));
            }
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(a);
        m.view_mut((0, n), (n, n)).copy_from(b);
        m.view_mut((n, 0), (n, n)).copy_from(c);
        m.view_mut((n, n), (n, n)).copy_from(d);
        Self::from_dmatrix(m)
    }

    pub fn from_mat2(m: &Mat2) -> Self {
        BlockMat {
            n: 1,
            m: DMatrix::from_row_slice(2, 2, &m.entries()),
        }
    }

    pub fn identity(n: usize) -> Self {
        BlockMat {
            n,
            m: DMatrix::identity(2 * n, 2 * n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        BlockMat {
            n,
            m: DMatrix::zeros(2 * n, 2 * n),
        }
    }

    /// The map (x', x'') -> (x'', x').
    pub fn swap(n: usize) -> Self {
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, n + i)] = 1.0;
            m[(n + i, i)] = 1.0;
        }
        BlockMat { n, m }
    }

    /// Diagonal matrix with the given 2n diagonal entries.
    pub fn diagonal(d: &[f64]) -> Result<Self> {
        if d.is_empty() || d.len() % 2 != 0 {
            return Err(Error::InvalidInput("diagonal needs 2n entries".into()));
        }
        Self::from_dmatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    /// e_i ⊗ e_j scaled by s (zero-based indices).
    pub fn unit(n: usize, i: usize, j: usize, s: f64) -> Self {
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m[(i, j)] = s;
        BlockMat { n, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        2 * self.n
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.m[(r, c)]
    }

    pub fn to_mat2(&self) -> Option<Mat2> {
        (self.n == 1).then(|| Mat2::new(self.m[(0, 0)], self.m[(0, 1)], self.m[(1, 0)], self.m[(1, 1)]))
    }

    pub fn row_major(&self) -> Vec<f64> {
        let s = self.size();
        let mut out = Vec::with_capacity(s * s);
        for r in 0..s {
            for c in 0..s {
                out.push(self.m[(r, c)]);
            }
        }
        out
    }

    fn block(&self, r0: usize, c0: usize) -> DMatrix<f64> {
        self.m.view((r0 * self.n, c0 * self.n), (self.n, self.n)).into_owned()
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.block(0, 0)
    }
    pub fn b(&self) -> DMatrix<f64> {
        self.block(0, 1)
    }
    pub fn c(&self) -> DMatrix<f64> {
        self.block(1, 0)
    }
    pub fn d(&self) -> DMatrix<f64> {
        self.block(1, 1)
    }

    pub fn det(&self) -> f64 {
        det_dense(&self.m)
    }

    pub fn frob(&self) -> f64 {
        self.m.norm()
    }

    pub fn op_norm(&self) -> f64 {
        singular_values(&self.m)[0]
    }

    fn block_frob_sq(&self, r0: usize, c0: usize) -> f64 {
        self.m.view((r0 * self.n, c0 * self.n), (self.n, self.n)).norm_squared()
    }

    pub fn dist_l1(&self) -> f64 {
        (self.block_frob_sq(0, 1) + self.block_frob_sq(1, 0)).sqrt()
    }

    pub fn dist_l2(&self) -> f64 {
        (self.block_frob_sq(0, 0) + self.block_frob_sq(1, 1)).sqrt()
    }

    /// Frobenius projection onto L1 or L2 (coordinate subspaces).
    pub fn project(&self, onto: SplitTarget) -> BlockMat {
        let n = self.n;
        let mut m = self.m.clone();
        let zero = |m: &mut DMatrix<f64>, r0: usize, c0: usize| {
            m.view_mut((r0 * n, c0 * n), (n, n)).fill(0.0);
        };
        match onto {
            SplitTarget::L1 => {
                zero(&mut m, 0, 1);
                zero(&mut m, 1, 0);
            }
            SplitTarget::L2 => {
                zero(&mut m, 0, 0);
                zero(&mut m, 1, 1);
            }
            SplitTarget::L => return self.project(self.nearer_branch()),
        }
        BlockMat { n, m }
    }

    /// L1 or L2, whichever is closer (ties go to L1).
    pub fn nearer_branch(&self) -> SplitTarget {
        if self.dist_l2() < self.dist_l1() {
            SplitTarget::L2
        } else {
            SplitTarget::L1
        }
    }

    pub fn lin_comb(&self, s: f64, other: &BlockMat, t: f64) -> BlockMat {
        assert_eq!(self.n, other.n, "block sizes differ");
        BlockMat {
            n: self.n,
            m: &self.m * s + &other.m * t,
        }
    }

    pub fn matmul(&self, other: &BlockMat) -> BlockMat {
        assert_eq!(self.n, other.n, "block sizes differ");
        BlockMat {
            n: self.n,
            m: &self.m * &other.m,
        }
    }

    pub fn transpose(&self) -> BlockMat {
        BlockMat {
            n: self.n,
            m: self.m.transpose(),
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for BlockMat {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let s = rows.len();
        if rows.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidInput("block matrix rows must be square".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        if s % 2 != 0 {
            return Err(Error::InvalidInput(format!("odd matrix size {s}")));
        }
        Self::from_row_major(s / 2, &flat)
    }
}

impl From<BlockMat> for Vec<Vec<f64>> {
    fn from(b: BlockMat) -> Self {
        let s = b.size();
        (0..s).map(|r| (0..s).map(|c| b.m[(r, c)]).collect()).collect()
    }
}

impl From<Mat2> for BlockMat {
    fn from(m: Mat2) -> Self {
        BlockMat::from_mat2(&m)
    }
}

/// Determinant by LU with partial pivoting.
pub fn det_dense(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Determinant of the submatrix with the given (zero-based) rows and columns.
pub fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    assert_eq!(rows.len(), cols.len());
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
    det_dense(&sub)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTarget {
    L,
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitClass {
    L1,
    L2,
    NotSplit,
    Zero,
}

/// Returns (a, ξ) with m = a ⊗ ξ and |ξ| = 1 when m has rank one.
///
/// Rank one means |det m| <= tol |m|^2 and |m| > tol.
pub fn rank_one_decompose(m: &Mat2, tol: f64) -> Option<([f64; 2], [f64; 2])> {
    let f2 = m.frob_sq();
    let f = f2.sqrt();
    if f <= tol || m.det().abs() > tol * f2 {
        return None;
    }
    let r0 = m.0[0];
    let r1 = m.0[1];
    let row = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) { r0 } else { r1 };
    let len = row[0].hypot(row[1]);
    let xi = [row[0] / len, row[1] / len];
    let a = [r0[0] * xi[0] + r0[1] * xi[1], r1[0] * xi[0] + r1[1] * xi[1]];
    Some((a, xi))
}

pub fn dist_to(f: &BlockMat, target: SplitTarget) -> f64 {
    match target {
        SplitTarget::L1 => f.dist_l1(),
        SplitTarget::L2 => f.dist_l2(),
        SplitTarget::L => f.dist_l1().min(f.dist_l2()),
    }
}

pub fn dist_to_mat2(f: &Mat2, target: SplitTarget) -> f64 {
    match target {
        SplitTarget::L1 => f.dist_l1(),
        SplitTarget::L2 => f.dist_l2(),
        SplitTarget::L => f.dist_l1().min(f.dist_l2()),
    }
}

fn classify_from(d1: f64, d2: f64, norm: f64, tol: f64) -> SplitClass {
    if norm <= tol {
        return SplitClass::Zero;
    }
    let in1 = d1 <= tol * norm;
    let in2 = d2 <= tol * norm;
    match (in1, in2) {
        (true, true) => {
            if d2 < d1 {
                SplitClass::L2
            } else {
                SplitClass::L1
            }
        }
        (true, false) => SplitClass::L1,
        (false, true) => SplitClass::L2,
        (false, false) => SplitClass::NotSplit,
    }
}

pub fn classify_split(f: &BlockMat, tol: f64) -> SplitClass {
    classify_from(f.dist_l1(), f.dist_l2(), f.frob(), tol)
}

pub fn classify_split_mat2(f: &Mat2, tol: f64) -> SplitClass {
    classify_from(f.dist_l1(), f.dist_l2(), f.frob(), tol)
}

/// All 2x2 minors of an n x 2n matrix with both rows in the first n and one
/// column in each column block, as (i1, i2, j1, j2, value).
pub fn straddling_minors(g: &DMatrix<f64>) -> Vec<(usize, usize, usize, usize, f64)> {
    let n = g.nrows();
    assert_eq!(g.ncols(), 2 * n, "expected an n x 2n matrix");
    let mut out = Vec::new();
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            for j1 in 0..n {
                for j2 in n..2 * n {
                    let v = g[(i1, j1)] * g[(i2, j2)] - g[(i1, j2)] * g[(i2, j1)];
                    out.push((i1, i2, j1, j2, v));
                }
            }
        }
    }
    out
}

/// Membership in L' for an n x 2n matrix G = (A | B): every straddling 2x2
/// minor vanishes within tol |G|^2.
pub fn is_in_lprime(g: &DMatrix<f64>, tol: f64) -> bool {
    let scale = g.norm_squared().max(f64::MIN_POSITIVE);
    straddling_minors(g).iter().all(|m| m.4.abs() <= tol * scale)
}

/// |det F - (-1)^n det B det C| and the calibrated bound
/// c' (|F|^{2n-1} d + d^{2n}) with d = dist(F, L).
pub fn offdiag_det_gap(f: &BlockMat) -> Result<(f64, f64)> {
    let d1 = f.dist_l1();
    let d2 = f.dist_l2();
    if d2 >= d1 {
        return Err(Error::WrongBranch);
    }
    let n = f.n() as i32;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let gap = (f.det() - sign * det_dense(&f.b()) * det_dense(&f.c())).abs();
    let c_prime = Calibration::frozen().offdiag_det.c_prime;
    let fr = f.frob();
    let bound = c_prime * (fr.powi(2 * n - 1) * d2 + d2.powi(2 * n));
    Ok((gap, bound))
}

/// |M(F) - M(F')| and c (|F|^{r-1} d + d^r) for the minor with the given rows
/// and columns, F' the projection of F onto the nearer branch of L.
pub fn minor_expansion_gap(f: &BlockMat, rows: &[usize], cols: &[usize]) -> (f64, f64) {
    let proj = f.project(SplitTarget::L);
    let r = rows.len() as i32;
    let d = dist_to(f, SplitTarget::L);
    let gap = (minor(f.as_dmatrix(), rows, cols) - minor(proj.as_dmatrix(), rows, cols)).abs();
    let c = Calibration::frozen().minor_expansion.c;
    let fr = f.frob();
    (gap, c * (fr.powi(r - 1) * d + d.powi(r)))
}
