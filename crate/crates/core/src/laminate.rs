//! Laminates of finite order: atomic probability measures on matrices built
//! from a Dirac mass by barycenter-preserving rank-one splittings, together
//! with the tree recording those splittings.

use std::fmt::Debug;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{numerical_rank, BlockMat, Mat2};
use crate::tn::TnCertificate;

/// Atoms closer than this (Frobenius) are merged.
pub const MERGE_TOL: f64 = 1e-10;
/// Relative tolerance for "parent = λB' + (1-λ)B''" and for rank one.
pub const SPLIT_TOL: f64 = 1e-9;

/// Matrix types that can carry laminates.
pub trait LamMatrix: Clone + Debug + PartialEq + Serialize + DeserializeOwned + Send + Sync {
    /// Number of rows (= columns).
    fn side(&self) -> usize;
    fn lin_comb(&self, s: f64, other: &Self, t: f64) -> Self;
    fn frob(&self) -> f64;
    fn det(&self) -> f64;
    fn is_rank_one(&self, tol: f64) -> bool;
    fn left_mul(&self, p: &Self) -> Self;
    fn dist_l1(&self) -> f64;
    fn dist_l2(&self) -> f64;
    fn row_major(&self) -> Vec<f64>;

    fn dist(&self, other: &Self) -> f64 {
        self.lin_comb(1.0, other, -1.0).frob()
    }
}

impl LamMatrix for Mat2 {
    fn side(&self) -> usize {
        2
    }
    fn lin_comb(&self, s: f64, other: &Self, t: f64) -> Self {
        *self * s + *other * t
    }
    fn frob(&self) -> f64 {
        Mat2::frob(self)
    }
    fn det(&self) -> f64 {
        Mat2::det(self)
    }
    fn is_rank_one(&self, tol: f64) -> bool {
        crate::mat::rank_one_decompose(self, tol).is_some()
    }
    fn left_mul(&self, p: &Self) -> Self {
        *p * *self
    }
    fn dist_l1(&self) -> f64 {
        Mat2::dist_l1(self)
    }
    fn dist_l2(&self) -> f64 {
        Mat2::dist_l2(self)
    }
    fn row_major(&self) -> Vec<f64> {
        self.entries().to_vec()
    }
}

impl LamMatrix for BlockMat {
    fn side(&self) -> usize {
        self.size()
    }
    fn lin_comb(&self, s: f64, other: &Self, t: f64) -> Self {
        BlockMat::lin_comb(self, s, other, t)
    }
    fn frob(&self) -> f64 {
        BlockMat::frob(self)
    }
    fn det(&self) -> f64 {
        BlockMat::det(self)
    }
    fn is_rank_one(&self, tol: f64) -> bool {
        if self.frob() <= tol {
            return false;
        }
        numerical_rank(self.as_dmatrix(), tol) == 1
    }
    fn left_mul(&self, p: &Self) -> Self {
        p.matmul(self)
    }
    fn dist_l1(&self) -> f64 {
        BlockMat::dist_l1(self)
    }
    fn dist_l2(&self) -> f64 {
        BlockMat::dist_l2(self)
    }
    fn row_major(&self) -> Vec<f64> {
        BlockMat::row_major(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "M: LamMatrix"))]
pub struct Atom<M> {
    pub weight: f64,
    pub matrix: M,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "M: LamMatrix"))]
pub struct Laminate<M> {
    /// Side length of the matrices (2n).
    pub side: usize,
    pub atoms: Vec<Atom<M>>,
}

fn merge_into<M: LamMatrix>(atoms: &mut Vec<Atom<M>>, weight: f64, matrix: M) {
    if let Some(a) = atoms.iter_mut().find(|a| a.matrix.dist(&matrix) <= MERGE_TOL) {
        a.weight += weight;
    } else {
        atoms.push(Atom { weight, matrix });
    }
}

fn check_split<M: LamMatrix>(parent: &M, lambda: f64, b1: &M, b2: &M) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidInput(format!("split weight λ = {lambda} not in (0,1)")));
    }
    let scale = parent.frob().max(b1.frob()).max(b2.frob()).max(1.0);
    let residual = parent.dist(&b1.lin_comb(lambda, b2, 1.0 - lambda));
    if residual > SPLIT_TOL * scale {
        return Err(Error::NotOnSegment { residual });
    }
    if !b2.lin_comb(1.0, b1, -1.0).is_rank_one(SPLIT_TOL) {
        return Err(Error::NotRankOne);
    }
    Ok(())
}

impl<M: LamMatrix> Laminate<M> {
    pub fn dirac(m: M) -> Self {
        Laminate { side: m.side(), atoms: vec![Atom { weight: 1.0, matrix: m }] }
    }

    /// Builds a laminate from weighted atoms, merging coincident matrices.
    pub fn from_atoms(atoms: Vec<(f64, M)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::InvalidInput("laminate needs at least one atom".into()));
        };
        let side = first.1.side();
        let mut out = Vec::new();
        for (w, m) in atoms {
            if !(w > 0.0) || m.side() != side {
                return Err(Error::InvalidInput("atoms need positive weights and a common size".into()));
            }
            merge_into(&mut out, w, m);
        }
        let lam = Laminate { side, atoms: out };
        lam.check()?;
        Ok(lam)
    }

    pub fn check(&self) -> Result<()> {
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        if self.atoms.iter().any(|a| !(a.weight > 0.0)) {
            return Err(Error::InvalidInput("non-positive atom weight".into()));
        }
        Ok(())
    }

    pub fn barycenter(&self) -> M {
        let mut it = self.atoms.iter();
        let first = it.next().expect("laminates are non-empty");
        let init = first.matrix.lin_comb(first.weight, &first.matrix, 0.0);
        it.fold(init, |acc, a| acc.lin_comb(1.0, &a.matrix, a.weight))
    }

    /// ν' = ν + s(λδ_{B'} + (1-λ)δ_{B''} - δ_{A_j}).
    pub fn split(&self, j: usize, s: f64, lambda: f64, b1: &M, b2: &M) -> Result<Laminate<M>> {
        let atom = self
            .atoms
            .get(j)
            .ok_or_else(|| Error::InvalidInput(format!("no atom with index {j}")))?;
        if s < 0.0 {
            return Err(Error::InvalidInput("negative split mass".into()));
        }
        if s > atom.weight * (1.0 + 1e-15) {
            return Err(Error::MassExceeded { requested: s, available: atom.weight });
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        check_split(&atom.matrix, lambda, b1, b2)?;
        let mut atoms: Vec<Atom<M>> = Vec::with_capacity(self.atoms.len() + 2);
        for (i, a) in self.atoms.iter().enumerate() {
            if i == j {
                let rest = a.weight - s;
                if rest > 1e-15 {
                    atoms.push(Atom { weight: rest, matrix: a.matrix.clone() });
                }
            } else {
                atoms.push(a.clone());
            }
        }
        merge_into(&mut atoms, s * lambda, b1.clone());
        merge_into(&mut atoms, s * (1.0 - lambda), b2.clone());
        Ok(Laminate { side: self.side, atoms })
    }

    /// Atoms P A_i with the same weights.
    pub fn pushforward_left(&self, p: &M) -> Result<Laminate<M>> {
        if p.det().abs() <= 1e-14 * p.frob().powi(p.side() as i32) {
            return Err(Error::Singular);
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { weight: a.weight, matrix: a.matrix.left_mul(p) })
            .collect();
        Ok(Laminate { side: self.side, atoms })
    }

    pub fn mass_where(&self, pred: impl Fn(&M) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(&a.matrix)).map(|a| a.weight).sum()
    }

    /// CSV atom table: weight, row-major entries, det, dist to L1 and L2.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["weight".to_string()];
        for r in 0..self.side {
            for c in 0..self.side {
                header.push(format!("m{}{}", r + 1, c + 1));
            }
        }
        header.extend(["det", "dist_l1", "dist_l2"].map(String::from));
        wr.write_record(&header)?;
        for a in &self.atoms {
            let mut row = vec![a.weight.to_string()];
            row.extend(a.matrix.row_major().iter().map(f64::to_string));
            row.push(a.matrix.det().to_string());
            row.push(a.matrix.dist_l1().to_string());
            row.push(a.matrix.dist_l2().to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Weight of the first child B'.
    pub lambda: f64,
    /// Node indices of B' and B''.
    pub children: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "M: LamMatrix"))]
pub struct TreeNode<M> {
    pub matrix: M,
    pub split: Option<Branch>,
}

/// Splitting tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "M: LamMatrix"))]
pub struct SplitTree<M> {
    pub nodes: Vec<TreeNode<M>>,
}

impl<M: LamMatrix> SplitTree<M> {
    pub fn new(root: M) -> Self {
        SplitTree { nodes: vec![TreeNode { matrix: root, split: None }] }
    }

    pub fn root(&self) -> &M {
        &self.nodes[0].matrix
    }

    pub fn node(&self, i: usize) -> &TreeNode<M> {
        &self.nodes[i]
    }

    /// Splits leaf `i` as λB' + (1-λ)B''; returns the child indices.
    pub fn split_node(&mut self, i: usize, lambda: f64, b1: M, b2: M) -> Result<[usize; 2]> {
        let node = self
            .nodes
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("no node {i}")))?;
        if node.split.is_some() {
            return Err(Error::InvalidInput(format!("node {i} is already split")));
        }
        check_split(&node.matrix, lambda, &b1, &b2)?;
        let k = self.nodes.len();
        self.nodes.push(TreeNode { matrix: b1, split: None });
        self.nodes.push(TreeNode { matrix: b2, split: None });
        self.nodes[i].split = Some(Branch { lambda, children: [k, k + 1] });
        Ok([k, k + 1])
    }

    /// Replaces leaf `at` by a copy of `sub` (whose root must match).
    pub fn attach(&mut self, at: usize, sub: &SplitTree<M>) -> Result<()> {
        if self.nodes[at].split.is_some() {
            return Err(Error::InvalidInput(format!("node {at} is not a leaf")));
        }
        if self.nodes[at].matrix.dist(sub.root()) > MERGE_TOL {
            return Err(Error::InvalidInput("subtree root does not match the leaf".into()));
        }
        let offset = self.nodes.len() - 1;
        let remap = |j: usize| if j == 0 { at } else { j + offset };
        for (j, node) in sub.nodes.iter().enumerate() {
            let split = node.split.map(|b| Branch {
                lambda: b.lambda,
                children: [remap(b.children[0]), remap(b.children[1])],
            });
            if j == 0 {
                self.nodes[at].split = split;
            } else {
                self.nodes.push(TreeNode { matrix: node.matrix.clone(), split });
            }
        }
        Ok(())
    }

    /// Applies `f` to every node matrix (the tree shape is unchanged).
    pub fn map<N: LamMatrix>(&self, f: impl Fn(&M) -> N) -> SplitTree<N> {
        SplitTree {
            nodes: self
                .nodes
                .iter()
                .map(|n| TreeNode { matrix: f(&n.matrix), split: n.split })
                .collect(),
        }
    }

    /// Leaves with their path-product weights, in depth-first order.
    pub fn leaves(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((i, w)) = stack.pop() {
            match self.nodes[i].split {
                None => out.push((i, w)),
                Some(b) => {
                    stack.push((b.children[1], w * (1.0 - b.lambda)));
                    stack.push((b.children[0], w * b.lambda));
                }
            }
        }
        out
    }

    pub fn to_laminate(&self) -> Laminate<M> {
        let mut atoms: Vec<Atom<M>> = Vec::new();
        for (i, w) in self.leaves() {
            merge_into(&mut atoms, w, self.nodes[i].matrix.clone());
        }
        Laminate { side: self.root().side(), atoms }
    }

    pub fn depth(&self) -> usize {
        fn go<M>(t: &SplitTree<M>, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(b) => 1 + go(t, b.children[0]).max(go(t, b.children[1])),
            }
        }
        go(self, 0)
    }

    /// Depth of every node (root = 0).
    pub fn node_depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for i in 0..self.nodes.len() {
            if let Some(b) = self.nodes[i].split {
                d[b.children[0]] = d[i] + 1;
                d[b.children[1]] = d[i] + 1;
            }
        }
        d
    }

    /// Re-checks every split and that each node is reached exactly once.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        seen[0] = true;
        for node in &self.nodes {
            if let Some(b) = node.split {
                for &c in &b.children {
                    if c >= self.nodes.len() || seen[c] {
                        return Err(Error::InvalidInput("malformed split tree".into()));
                    }
                    seen[c] = true;
                }
                let [c1, c2] = b.children;
                check_split(&node.matrix, b.lambda, &self.nodes[c1].matrix, &self.nodes[c2].matrix)?;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("unreachable tree node".into()));
        }
        Ok(())
    }
}

impl SplitTree<BlockMat> {
    /// The same tree on 2x2 matrices; requires n = 1.
    pub fn to_mat2(&self) -> Result<SplitTree<Mat2>> {
        if self.root().n() != 1 {
            return Err(Error::InvalidInput("tree is not on 2x2 matrices".into()));
        }
        Ok(self.map(|m| m.to_mat2().expect("n = 1")))
    }
}

/// The cascade on diagonal sign matrices with barycenter ½ e1⊗e1: first
/// (½,0,..) -> ¼(-1,0,..) + ¾(1,0,..), then each further diagonal entry is
/// split into ∓1 with weight ½.
pub fn sign_cascade(n: usize) -> SplitTree<BlockMat> {
    let s = 2 * n;
    let diag = |d: &[f64]| BlockMat::diagonal(d).expect("2n entries");
    let mut root = vec![0.0; s];
    root[0] = 0.5;
    let mut tree = SplitTree::new(diag(&root));
    let mut neg = vec![0.0; s];
    neg[0] = -1.0;
    let mut pos = vec![0.0; s];
    pos[0] = 1.0;
    let kids = tree
        .split_node(0, 0.25, diag(&neg), diag(&pos))
        .expect("the first cascade split is exact");
    let mut frontier = vec![(kids[0], neg), (kids[1], pos)];
    for i in 1..s {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (node, d) in frontier {
            let mut lo = d.clone();
            lo[i] = -1.0;
            let mut hi = d;
            hi[i] = 1.0;
            let kids = tree
                .split_node(node, 0.5, diag(&lo), diag(&hi))
                .expect("cascade splits are exact");
            next.push((kids[0], lo));
            next.push((kids[1], hi));
        }
        frontier = next;
    }
    tree
}

/// The laminate ν = ½ν1 + ½ν2 supported on split matrices with |det| = 1
/// and barycenter ¼ e1⊗e1 + ¼ e_{n+1}⊗e1, where ν2 is ν1 pushed forward by
/// left multiplication with the block swap.
pub fn example_nu(n: usize) -> Result<(Laminate<BlockMat>, SplitTree<BlockMat>)> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let nu1 = sign_cascade(n);
    let p = BlockMat::swap(n);
    let nu2 = nu1.map(|m| m.left_mul(&p));
    let a_bar = BlockMat::unit(n, 0, 0, 0.25).lin_comb(1.0, &BlockMat::unit(n, n, 0, 0.25), 1.0);
    let mut tree = SplitTree::new(a_bar);
    let kids = tree.split_node(0, 0.5, nu1.root().clone(), nu2.root().clone())?;
    tree.attach(kids[0], &nu1)?;
    tree.attach(kids[1], &nu2)?;
    Ok((tree.to_laminate(), tree))
}

/// Staircase laminate from P_k: repeatedly split the current inner point
/// P_{σ(q+1)} into X_{σ(q)} (weight 1/κ_q) and P_{σ(q)}, descending
/// through the cycle N·M times. `k` is an atom index.
pub fn staircase(cert: &TnCertificate, k: usize, m: usize) -> Result<(Laminate<Mat2>, SplitTree<Mat2>)> {
    let inp = &cert.input;
    let n = inp.len();
    if k >= n || m == 0 {
        return Err(Error::InvalidInput(format!("need k < {n} and M >= 1")));
    }
    let s = inp.sigma();
    let mut p = inp.position(k);
    let mut tree = SplitTree::new(cert.inner_points[k]);
    let mut node = 0;
    for _ in 0..n * m {
        let q = (p + n - 1) % n;
        let lambda = 1.0 / cert.legs[q].kappa;
        let kids = tree.split_node(node, lambda, inp.x()[s[q]], cert.inner_points[s[q]])?;
        node = kids[1];
        p = q;
    }
    Ok((tree.to_laminate(), tree))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> BlockMat {
        BlockMat::diagonal(v).unwrap()
    }

    #[test]
    fn first_cascade_split_weights() {
        let nu = Laminate::dirac(d(&[0.5, 0.0]));
        let nu = nu.split(0, 1.0, 0.25, &d(&[-1.0, 0.0]), &d(&[1.0, 0.0])).unwrap();
        assert_eq!(nu.atoms.len(), 2);
        assert_eq!(nu.atoms[0].weight, 0.25);
        assert_eq!(nu.atoms[1].weight, 0.75);
        assert_eq!(nu.barycenter(), d(&[0.5, 0.0]));
    }

    #[test]
    fn zero_mass_split_is_identity() {
        let nu = Laminate::dirac(d(&[0.5, 0.0]));
        let same = nu.split(0, 0.0, 0.25, &d(&[-1.0, 0.0]), &d(&[1.0, 0.0])).unwrap();
        assert_eq!(same, nu);
    }

    #[test]
    fn split_errors() {
        let nu = Laminate::dirac(Mat2::diag(0.5, 0.0));
        assert!(matches!(
            nu.split(0, 1.0, 0.5, &Mat2::diag(-1.0, 0.0), &Mat2::diag(1.0, 0.0)),
            Err(Error::NotOnSegment { .. })
        ));
        assert_eq!(
            nu.split(0, 1.0, 0.5, &Mat2::diag(0.0, -1.0), &Mat2::diag(1.0, 1.0)),
            Err(Error::NotRankOne)
        );
        assert!(matches!(
            nu.split(0, 1.5, 0.25, &Mat2::diag(-1.0, 0.0), &Mat2::diag(1.0, 0.0)),
            Err(Error::MassExceeded { .. })
        ));
    }

    #[test]
    fn root_split_of_example_is_rank_one() {
        let n = 2;
        let a = BlockMat::unit(n, 0, 0, 0.25).lin_comb(1.0, &BlockMat::unit(n, n, 0, 0.25), 1.0);
        let nu = Laminate::dirac(a);
        let out = nu
            .split(0, 1.0, 0.5, &BlockMat::unit(n, 0, 0, 0.5), &BlockMat::unit(n, n, 0, 0.5))
            .unwrap();
        assert_eq!(out.atoms.len(), 2);
    }

    #[test]
    fn pushforward_identity_and_singular() {
        let (nu, _) = example_nu(1).unwrap();
        assert_eq!(nu.pushforward_left(&BlockMat::identity(1)).unwrap(), nu);
        assert_eq!(nu.pushforward_left(&BlockMat::zeros(1)), Err(Error::Singular));
    }

    #[test]
    fn example_nu_n1_weights() {
        let (nu, tree) = example_nu(1).unwrap();
        tree.validate().unwrap();
        assert_eq!(nu.atoms.len(), 8);
        let mut w: Vec<f64> = nu.atoms.iter().map(|a| a.weight).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![1.0 / 16.0, 1.0 / 16.0, 1.0 / 16.0, 1.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0]);
        assert_eq!(tree.depth(), 3);
    }

    #[test]
    fn attach_rejects_mismatched_root() {
        let mut t = SplitTree::new(Mat2::identity());
        let sub = SplitTree::new(Mat2::swap());
        assert!(t.attach(0, &sub).is_err());
    }
}
