//! T_N configurations in 2x2 matrix space: the A^μ kernel criterion, the
//! closed-form μ* for N = 5, inner points, rank-one legs and the large T_5
//! rank condition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{det_dense, singular_values, Mat2, DEFAULT_TOL};

/// Relative threshold on σ_min/σ_max below which a matrix is rank deficient.
pub const RANK_REL_TOL: f64 = 1e-8;

mod one_based {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|i| i + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        if v.contains(&0) {
            return Err(serde::de::Error::custom("permutations are one-based"));
        }
        Ok(v.into_iter().map(|i| i - 1).collect())
    }
}

/// An ordered tuple of 2x2 matrices with a cyclic ordering σ (zero-based
/// internally, one-based in JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TnInputRepr", into = "TnInputRepr")]
pub struct TnInput {
    x: Vec<Mat2>,
    sigma: Vec<usize>,
    pos: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TnInputRepr {
    x: Vec<Mat2>,
    #[serde(with = "one_based")]
    sigma: Vec<usize>,
}

impl TryFrom<TnInputRepr> for TnInput {
    type Error = Error;
    fn try_from(r: TnInputRepr) -> Result<Self> {
        TnInput::new(r.x, Some(r.sigma))
    }
}

impl From<TnInput> for TnInputRepr {
    fn from(t: TnInput) -> Self {
        TnInputRepr { x: t.x, sigma: t.sigma }
    }
}

fn check_permutation(sigma: &[usize], n: usize) -> Result<Vec<usize>> {
    if sigma.len() != n {
        return Err(Error::InvalidInput(format!(
            "permutation has length {}, expected {n}",
            sigma.len()
        )));
    }
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in sigma.iter().enumerate() {
        if i >= n || pos[i] != usize::MAX {
            return Err(Error::InvalidInput(format!("{:?} is not a permutation", sigma)));
        }
        pos[i] = p;
    }
    Ok(pos)
}

/// Parses a one-based permutation such as `[1, 2, 3, 5, 4]`.
pub fn perm_from_one_based(p: &[usize]) -> Result<Vec<usize>> {
    if p.contains(&0) {
        return Err(Error::InvalidInput("permutations are one-based".into()));
    }
    Ok(p.iter().map(|i| i - 1).collect())
}

impl TnInput {
    /// Validates N >= 4, finiteness and det(X_i - X_j) != 0 for i != j.
    pub fn new(x: Vec<Mat2>, sigma: Option<Vec<usize>>) -> Result<Self> {
        let n = x.len();
        if n < 4 {
            return Err(Error::InvalidInput(format!("need N >= 4 matrices, got {n}")));
        }
        if x.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        let scale = x.iter().map(|m| m.frob_sq()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in i + 1..n {
                let d = (x[i] - x[j]).det();
                if d.abs() <= 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "X_{} and X_{} are rank-one connected (det = {d:e})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let sigma = sigma.unwrap_or_else(|| (0..n).collect());
        let pos = check_permutation(&sigma, n)?;
        Ok(TnInput { x, sigma, pos })
    }

    pub fn with_sigma(&self, sigma: Vec<usize>) -> Result<Self> {
        let pos = check_permutation(&sigma, self.x.len())?;
        Ok(TnInput { x: self.x.clone(), sigma, pos })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[Mat2] {
        &self.x
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    /// σ^{-1}(i): the position of atom i in the cyclic order.
    pub fn position(&self, i: usize) -> usize {
        self.pos[i]
    }

    /// The tuple X^σ = (X_{σ(1)}, ..., X_{σ(N)}) with identity ordering.
    pub fn reordered(&self) -> TnInput {
        let x = self.sigma.iter().map(|&i| self.x[i]).collect();
        TnInput::new(x, None).expect("a reordering of a valid input is valid")
    }
}

/// A^{σ,μ}: det(X_i - X_j) above the σ-diagonal, μ det(X_i - X_j) below.
pub fn build_amu(input: &TnInput, mu: f64) -> DMatrix<f64> {
    let n = input.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = (input.x[i] - input.x[j]).det();
            if input.pos[i] < input.pos[j] {
                d
            } else {
                mu * d
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    pub det_a: f64,
}

/// α = product of the cyclic entries A_{σ(1)σ(2)} ... A_{σ(5)σ(1)} of
/// A = A^{σ,1} and β = -det A / (2α).
pub fn t5_alpha_beta(input: &TnInput) -> Result<AlphaBeta> {
    if input.len() != 5 {
        return Err(Error::InvalidInput(format!("N = {} but N = 5 expected", input.len())));
    }
    let a = build_amu(input, 1.0);
    let s = &input.sigma;
    let mut alpha = 1.0;
    for p in 0..5 {
        let e = a[(s[p], s[(p + 1) % 5])];
        if e == 0.0 {
            return Err(Error::DegenerateInput("a cyclic determinant vanishes".into()));
        }
        alpha *= e;
    }
    let det_a = det_dense(&a);
    Ok(AlphaBeta { alpha, beta: -det_a / (2.0 * alpha), det_a })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuStar {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// |det A^{σ,μ*}|.
    pub det_residual: f64,
    /// Frobenius norm of A^{σ,μ*}.
    pub a_norm: f64,
}

/// μ* = 1 + β/2 + ½√(β² + 4β) when β > 0, verified by det A^{σ,μ*} ≈ 0
/// (relative to |A|^5) and a one-dimensional kernel.
pub fn t5_mu_star(input: &TnInput) -> Option<MuStar> {
    let ab = t5_alpha_beta(input).ok()?;
    if !(ab.beta > 0.0) {
        return None;
    }
    let b = ab.beta;
    let mu = 1.0 + b / 2.0 + 0.5 * (b * b + 4.0 * b).sqrt();
    let a = build_amu(input, mu);
    let a_norm = a.norm();
    let det_residual = det_dense(&a).abs();
    if det_residual > 1e-8 * a_norm.powi(5) {
        return None;
    }
    let s = singular_values(&a);
    if s[3] <= RANK_REL_TOL * s[0] {
        return None;
    }
    Some(MuStar { mu, alpha: ab.alpha, beta: ab.beta, det_residual, a_norm })
}

/// The kernel generator of a rank N-1 matrix, normalized to first entry 1,
/// if all its entries are positive.
pub fn kernel_positive(a: &DMatrix<f64>) -> Result<Option<DVector<f64>>> {
    let n = a.nrows();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = svd.singular_values[order[0]];
    if smax == 0.0 {
        return Err(Error::RankDeficient { rank: 0, expected: n - 1 });
    }
    let rank = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > RANK_REL_TOL * smax)
        .count();
    if rank == n {
        return Ok(None);
    }
    if rank < n - 1 {
        return Err(Error::RankDeficient { rank, expected: n - 1 });
    }
    let k = order[n - 1];
    let v: DVector<f64> = v_t.row(k).transpose();
    if v[0] == 0.0 {
        return Ok(None);
    }
    let v = &v / v[0];
    if v.iter().all(|&x| x > 0.0) {
        Ok(Some(v))
    } else {
        Ok(None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub mu_max: f64,
    pub scan_samples: usize,
    pub tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { mu_max: 1e4, scan_samples: 1000, tol: DEFAULT_TOL }
    }
}

/// Roots of μ -> det A^{σ,μ} on (1, μ_max]: sign changes over μ = 1 and
/// log-spaced samples, refined by bisection.
pub fn mu_roots_scan(input: &TnInput, opts: &CertifyOptions) -> Vec<f64> {
    let det_at = |mu: f64| det_dense(&build_amu(input, mu));
    let ns = opts.scan_samples.max(1);
    let lm = opts.mu_max.log10();
    let mut samples = Vec::with_capacity(ns + 1);
    samples.push(1.0);
    samples.extend((1..=ns).map(|i| 10f64.powf(lm * i as f64 / ns as f64)));
    let vals: Vec<f64> = samples.iter().map(|&m| det_at(m)).collect();
    let mut roots = Vec::new();
    for w in 0..samples.len() - 1 {
        let (mut lo, mut hi) = (samples[w], samples[w + 1]);
        let (flo, fhi) = (vals[w], vals[w + 1]);
        if fhi == 0.0 {
            roots.push(hi);
            continue;
        }
        if flo == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        let slo = flo.signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = det_at(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == slo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub c: Mat2,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateResiduals {
    /// |A^{σ,μ} λ| / (|A^{σ,μ}| |λ|).
    pub kernel: f64,
    /// max_k |det(P_k - X_k)|.
    pub rank_one: f64,
    /// max_k |det P_k - Σ_i ξ^{(k)}_i det X_i|.
    pub det_identity: f64,
    /// |Σ C_i| (Frobenius).
    pub leg_sum: f64,
    /// max_p |P_{σ(p)} + κ_p C_p - X_{σ(p)}|.
    pub leg_fit: f64,
    pub min_kappa: f64,
}

/// A verified T_N configuration. Indices of `lambda`, `xi` and
/// `inner_points` refer to atoms; `legs` are listed in σ-order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TnCertificate {
    pub input: TnInput,
    pub mu: f64,
    pub lambda: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub inner_points: Vec<Mat2>,
    pub base: Mat2,
    pub legs: Vec<Leg>,
    pub residuals: CertificateResiduals,
}

/// v^{(k)}_i = λ_i if σ^{-1}(i) >= σ^{-1}(k), μ λ_i otherwise; normalized.
pub fn xi_vector(input: &TnInput, lambda: &[f64], mu: f64, k: usize) -> Vec<f64> {
    let pk = input.position(k);
    let v: Vec<f64> = (0..input.len())
        .map(|i| if input.position(i) >= pk { lambda[i] } else { mu * lambda[i] })
        .collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

impl TnCertificate {
    /// Assembles inner points and legs from (μ, λ) and validates them.
    pub fn assemble(input: &TnInput, mu: f64, lambda: &[f64], tol: f64) -> Option<TnCertificate> {
        let n = input.len();
        if !(mu > 1.0) || lambda.len() != n || lambda.iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let xi: Vec<Vec<f64>> = (0..n).map(|k| xi_vector(input, lambda, mu, k)).collect();
        let inner_points: Vec<Mat2> = xi
            .iter()
            .map(|w| {
                w.iter()
                    .zip(&input.x)
                    .fold(Mat2::zero(), |acc, (&wi, &xi)| acc + xi * wi)
            })
            .collect();
        let s = input.sigma();
        let mut legs = Vec::with_capacity(n);
        for p in 0..n {
            let q = inner_points[s[p]];
            let c = inner_points[s[(p + 1) % n]] - q;
            let d = input.x[s[p]] - q;
            let cc = c.frob_sq();
            if cc == 0.0 {
                return None;
            }
            let kappa = dot(&d, &c) / cc;
            legs.push(Leg { c, kappa });
        }
        let cert = TnCertificate {
            input: input.clone(),
            mu,
            lambda: lambda.to_vec(),
            xi,
            base: inner_points[s[0]],
            inner_points,
            legs,
            residuals: CertificateResiduals::default(),
        };
        let residuals = cert.compute_residuals();
        let cert = TnCertificate { residuals, ..cert };
        cert.is_valid(tol).then_some(cert)
    }

    pub fn compute_residuals(&self) -> CertificateResiduals {
        let input = &self.input;
        let n = input.len();
        let a = build_amu(input, self.mu);
        let lam = DVector::from_column_slice(&self.lambda);
        let kernel = (&a * &lam).norm() / (a.norm() * lam.norm());
        let mut rank_one: f64 = 0.0;
        let mut det_identity: f64 = 0.0;
        for k in 0..n {
            rank_one = rank_one.max((self.inner_points[k] - input.x[k]).det().abs());
            let rhs: f64 = self.xi[k].iter().zip(&input.x).map(|(w, x)| w * x.det()).sum();
            det_identity = det_identity.max((self.inner_points[k].det() - rhs).abs());
        }
        let leg_sum = self.legs.iter().fold(Mat2::zero(), |acc, l| acc + l.c).frob();
        let s = input.sigma();
        let mut leg_fit: f64 = 0.0;
        for (p, leg) in self.legs.iter().enumerate() {
            let recon = self.inner_points[s[p]] + leg.c * leg.kappa;
            leg_fit = leg_fit.max((recon - input.x[s[p]]).frob());
        }
        let min_kappa = self.legs.iter().map(|l| l.kappa).fold(f64::INFINITY, f64::min);
        CertificateResiduals { kernel, rank_one, det_identity, leg_sum, leg_fit, min_kappa }
    }

    /// Checks every certificate invariant at relative tolerance `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.residuals;
        let scale = self.input.x.iter().map(|m| m.frob_sq()).fold(1.0, f64::max);
        let det_scale = self.input.x.iter().map(|m| m.det().abs()).fold(1.0, f64::max);
        r.kernel <= tol
            && r.rank_one <= tol * scale
            && r.det_identity <= tol * det_scale
            && r.leg_sum <= tol * scale.sqrt()
            && r.leg_fit <= tol * scale.sqrt()
            && r.min_kappa > 1.0
    }

    /// Residual mass ρ = Π (1 - 1/κ_i) of one staircase cycle.
    pub fn rho(&self) -> f64 {
        self.legs.iter().map(|l| 1.0 - 1.0 / l.kappa).product()
    }
}

fn dot(a: &Mat2, b: &Mat2) -> f64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| x * y).sum()
}

pub fn certify(input: &TnInput) -> Option<TnCertificate> {
    certify_with(input, &CertifyOptions::default())
}

/// For N = 5 the closed-form μ* is used; otherwise the roots of det A^μ
/// found by [`mu_roots_scan`] are tried in increasing order.
pub fn certify_with(input: &TnInput, opts: &CertifyOptions) -> Option<TnCertificate> {
    if input.len() == 5 {
        let ms = t5_mu_star(input)?;
        return certify_at(input, ms.mu, opts.tol);
    }
    certify_by_scan(input, opts)
}

pub fn certify_by_scan(input: &TnInput, opts: &CertifyOptions) -> Option<TnCertificate> {
    mu_roots_scan(input, opts)
        .into_iter()
        .filter(|&mu| mu > 1.0)
        .find_map(|mu| certify_at(input, mu, opts.tol))
}

/// Certificate at a given root μ of det A^{σ,μ}, if the kernel is positive.
pub fn certify_at(input: &TnInput, mu: f64, tol: f64) -> Option<TnCertificate> {
    let a = build_amu(input, mu);
    let lambda = kernel_positive(&a).ok()??;
    TnCertificate::assemble(input, mu, lambda.as_slice(), tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeT5Report {
    #[serde(serialize_with = "ser_perms", deserialize_with = "de_perms")]
    pub sigmas: Vec<Vec<usize>>,
    pub certificates: Vec<Option<TnCertificate>>,
    /// The five 3x5 matrices B^{(k)}, row-major.
    pub b: Vec<Vec<Vec<f64>>>,
    pub ranks: Vec<usize>,
    pub affine_sigma_ratio: f64,
    pub verdict: bool,
}

fn ser_perms<S: serde::Serializer>(v: &[Vec<usize>], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter()
        .map(|p| p.iter().map(|i| i + 1).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .serialize(s)
}

fn de_perms<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<usize>>, D::Error> {
    let v = Vec::<Vec<usize>>::deserialize(d)?;
    v.into_iter()
        .map(|p| perm_from_one_based(&p).map_err(serde::de::Error::custom))
        .collect()
}

impl LargeT5Report {
    pub fn b_matrix(&self, k: usize) -> DMatrix<f64> {
        let rows = &self.b[k];
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    /// det of the 3x3 submatrix of B^{(k)} on the given columns (zero-based).
    pub fn subdeterminant(&self, k: usize, cols: [usize; 3]) -> f64 {
        let b = self.b_matrix(k);
        let sub = DMatrix::from_fn(3, 3, |i, j| b[(i, cols[j])]);
        det_dense(&sub)
    }
}

/// Large-T5 test: three certified orderings and
/// rank B^{(k)} = 3 for every atom k.
pub fn is_large_t5(x: &[Mat2], sigmas: &[Vec<usize>]) -> Result<LargeT5Report> {
    if x.len() != 5 || sigmas.len() != 3 {
        return Err(Error::InvalidInput("need 5 matrices and 3 orderings".into()));
    }
    let diffs = DMatrix::from_fn(4, 4, |r, c| (x[c] - x[4]).entries()[r]);
    let sv = singular_values(&diffs);
    let ratio = if sv[0] > 0.0 { sv[3] / sv[0] } else { 0.0 };
    if ratio < RANK_REL_TOL {
        return Err(Error::DegenerateInput(format!(
            "affine span is not 4-dimensional (σ_min/σ_max = {ratio:e})"
        )));
    }
    let base = TnInput::new(x.to_vec(), None)?;
    let mut certificates = Vec::with_capacity(3);
    for s in sigmas {
        certificates.push(certify(&base.with_sigma(s.clone())?));
    }
    let mut b = Vec::with_capacity(5);
    let mut ranks = Vec::with_capacity(5);
    if certificates.iter().all(Option::is_some) {
        for k in 0..5 {
            let rows: Vec<Vec<f64>> = certificates
                .iter()
                .map(|c| {
                    let c = c.as_ref().unwrap();
                    let inp = &c.input;
                    (0..5)
                        .map(|j| {
                            if j == k {
                                0.0
                            } else if inp.position(k) < inp.position(j) {
                                c.lambda[j]
                            } else {
                                c.mu * c.lambda[j]
                            }
                        })
                        .collect()
                })
                .collect();
            let m = DMatrix::from_fn(3, 5, |i, j| rows[i][j]);
            ranks.push(crate::mat::numerical_rank(&m, RANK_REL_TOL));
            b.push(rows);
        }
    }
    let verdict = certificates.iter().all(Option::is_some) && ranks.iter().all(|&r| r == 3);
    Ok(LargeT5Report {
        sigmas: sigmas.to_vec(),
        certificates,
        b,
        ranks,
        affine_sigma_ratio: ratio,
        verdict,
    })
}

fn family_base(c: f64) -> [Mat2; 4] {
    [
        Mat2::diag(c, 1.0 / c),
        Mat2::diag(1.0 / c, c),
        Mat2::new(0.0, -c, 1.0 / c, 0.0),
        Mat2::new(0.0, -1.0 / c, c, 0.0),
    ]
}

/// The four-atom family X_1 = diag(c, 1/c), X_2 = diag(1/c, c),
/// X_3 = (0 -c; 1/c 0), X_4 = (0 -1/c; c 0).
pub fn t4_family(c: f64) -> Result<TnInput> {
    if !(c > 1.0) {
        return Err(Error::InvalidInput(format!("family parameter c = {c} must exceed 1")));
    }
    TnInput::new(family_base(c).to_vec(), None)
}

/// The four-atom family plus X_5 = identity.
pub fn t5_family(c: f64) -> Result<TnInput> {
    if !(c > 1.0) {
        return Err(Error::InvalidInput(format!("family parameter c = {c} must exceed 1")));
    }
    let mut x = family_base(c).to_vec();
    x.push(Mat2::identity());
    TnInput::new(x, None)
}

/// The three orderings [1 2 3 5 4], [1 2 4 5 3], [1 2 5 3 4] (zero-based).
pub fn t5_family_sigmas() -> [Vec<usize>; 3] {
    [vec![0, 1, 2, 4, 3], vec![0, 1, 3, 4, 2], vec![0, 1, 4, 2, 3]]
}

pub fn t4_predicate(c: f64) -> bool {
    t4_family(c).ok().and_then(|inp| certify(&inp)).is_some()
}

/// Bisection on c in (1, 10] of "the four-atom family is certified".
pub fn t4_threshold() -> f64 {
    let (mut lo, mut hi) = (1.0, 10.0);
    debug_assert!(t4_predicate(hi));
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if t4_predicate(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_rank_one_connections() {
        let x = vec![Mat2::identity(), Mat2::identity(), Mat2::swap(), Mat2::diag(2.0, 3.0)];
        assert!(TnInput::new(x, None).is_err());
        assert!(t4_family(1.0).is_err());
    }

    #[test]
    fn amu_at_zero_is_upper_in_sigma_order() {
        let inp = t5_family(3.0).unwrap().with_sigma(vec![0, 1, 2, 4, 3]).unwrap();
        let a = build_amu(&inp, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                if inp.position(i) >= inp.position(j) {
                    assert_eq!(a[(i, j)], 0.0);
                } else {
                    assert_ne!(a[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn t4_pattern_at_mu_one() {
        let c = 3.0f64;
        let a = (c - 1.0 / c).powi(2);
        let m = build_amu(&t4_family(c).unwrap(), 1.0);
        let want = [
            [0.0, -a, 2.0, 2.0],
            [-a, 0.0, 2.0, 2.0],
            [2.0, 2.0, 0.0, -a],
            [2.0, 2.0, -a, 0.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((m[(i, j)] - want[i][j]).abs() < 1e-13, "{i}{j}");
            }
        }
    }

    #[test]
    fn one_based_json() {
        let inp = t4_family(3.0).unwrap().with_sigma(vec![1, 0, 2, 3]).unwrap();
        let s = serde_json::to_string(&inp).unwrap();
        assert!(s.contains("\"sigma\":[2,1,3,4]"));
        let back: TnInput = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inp);
    }

    #[test]
    fn predicate_at_two_and_three() {
        assert!(!t4_predicate(2.0));
        assert!(t4_predicate(3.0));
    }
}
