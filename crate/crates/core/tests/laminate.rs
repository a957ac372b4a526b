use proptest::prelude::*;
use rankone_core::laminate::*;
use rankone_core::mat::{BlockMat, Mat2};
use rankone_core::tn::{certify, t4_family, t5_family, t5_family_sigmas};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// ρ for the c = 3 four-point family, from the closed-form λ and μ̄.
fn t4_rho_closed(c: f64) -> f64 {
    let a = (c - 1.0 / c).powi(2);
    let g = a * a / 4.0;
    let mu = (g - 2.0) / 2.0 + 0.5 * ((g - 2.0).powi(2) - 4.0).sqrt();
    let r = a * mu / (2.0 * (1.0 + mu));
    let lam = [1.0, mu, r, mu * r];
    // X_k - P_k = κ_k C_k, so κ_k is an entrywise ratio.
    let inp = t4_family(c).unwrap();
    let x = inp.x();
    let p = |k: usize| -> Mat2 {
        let v: Vec<f64> = (0..4).map(|i| if i >= k { lam[i] } else { mu * lam[i] }).collect();
        let t: f64 = v.iter().sum();
        (0..4).fold(Mat2::zero(), |acc, i| acc + x[i] * (v[i] / t))
    };
    let mut rho = 1.0;
    for k in 0..4 {
        let c = p((k + 1) % 4) - p(k);
        let d = x[k] - p(k);
        let (ce, de) = (c.entries(), d.entries());
        let j = (0..4).max_by(|&i, &j| ce[i].abs().total_cmp(&ce[j].abs())).unwrap();
        rho *= 1.0 - ce[j] / de[j];
    }
    rho
}

#[test]
fn example_nu_barycenter_is_exact_and_atoms_unimodular() {
    for n in 1..=3 {
        let (nu, tree) = example_nu(n).unwrap();
        tree.validate().unwrap();
        let expect = BlockMat::unit(n, 0, 0, 0.25).lin_comb(1.0, &BlockMat::unit(n, n, 0, 0.25), 1.0);
        assert_eq!(nu.barycenter(), expect, "n = {n}");
        assert_eq!(nu.atoms.len(), 2 * 4usize.pow(n as u32));
        let total: f64 = nu.atoms.iter().map(|a| a.weight).sum();
        assert_eq!(total, 1.0);
        for a in &nu.atoms {
            assert_eq!(a.matrix.det().abs(), 1.0);
            assert!(a.matrix.dist_l1() == 0.0 || a.matrix.dist_l2() == 0.0);
            let k = (a.weight * 2f64.powi(2 * n as i32 + 2)).round();
            assert!(k == 1.0 || k == 3.0);
        }
        let m1 = nu.mass_where(|m| m.dist_l1() == 0.0);
        let m2 = nu.mass_where(|m| m.dist_l2() == 0.0);
        assert_eq!((m1, m2), (0.5, 0.5));
        assert!(nu.barycenter().det().abs() != 1.0);
    }
}

#[test]
fn example_nu_halves() {
    let n = 2;
    let nu1 = sign_cascade(n).to_laminate();
    assert_eq!(nu1.barycenter(), BlockMat::unit(n, 0, 0, 0.5));
    let nu2 = nu1.pushforward_left(&BlockMat::swap(n)).unwrap();
    assert_eq!(nu2.barycenter(), BlockMat::unit(n, n, 0, 0.5));
    let neg = nu1.mass_where(|m| m.get(0, 0) == -1.0);
    assert_eq!(neg, 0.25);
}

#[test]
fn every_tree_split_preserves_barycenter() {
    let (_, tree) = example_nu(2).unwrap();
    for node in &tree.nodes {
        if let Some(b) = node.split {
            let [c1, c2] = b.children;
            let recon = tree.nodes[c1].matrix.lin_comb(b.lambda, &tree.nodes[c2].matrix, 1.0 - b.lambda);
            let err = recon.lin_comb(1.0, &node.matrix, -1.0).frob();
            assert!(err <= 1e-12);
        }
    }
}

#[test]
fn tree_leaves_match_sequential_splits() {
    let cert = certify(&t4_family(3.0).unwrap()).unwrap();
    let (lam, tree) = staircase(&cert, 0, 2).unwrap();
    // Replay the same splits through Laminate::split.
    let mut seq = Laminate::dirac(*tree.root());
    let mut node = 0;
    while let Some(b) = tree.nodes[node].split {
        let [c1, c2] = b.children;
        let j = seq
            .atoms
            .iter()
            .position(|a| (a.matrix - tree.nodes[node].matrix).frob() <= MERGE_TOL)
            .unwrap();
        let before = seq.barycenter();
        let s = seq.atoms[j].weight;
        seq = seq.split(j, s, b.lambda, &tree.nodes[c1].matrix, &tree.nodes[c2].matrix).unwrap();
        assert!((seq.barycenter() - before).frob() <= 1e-12);
        node = c2;
    }
    assert_eq!(seq.atoms.len(), lam.atoms.len());
    for a in &lam.atoms {
        let b = seq.atoms.iter().find(|b| (b.matrix - a.matrix).frob() <= MERGE_TOL).unwrap();
        assert!((a.weight - b.weight).abs() <= 1e-14);
    }
}

#[test]
fn staircase_residual_mass() {
    let inp = t4_family(3.0).unwrap();
    let cert = certify(&inp).unwrap();
    let rho = t4_rho_closed(3.0);
    assert!(rel(cert.rho(), rho) < 1e-10);
    assert!(rel(rho, 0.09481222505759888) < 1e-10);
    let mut last = 1.0;
    for m in 1..=4 {
        for k in 0..4 {
            let (lam, tree) = staircase(&cert, k, m).unwrap();
            assert_eq!(tree.depth(), 4 * m);
            let bary = lam.barycenter();
            assert!((bary - cert.inner_points[k]).frob() <= 1e-12, "M = {m}, k = {k}");
            let residual: Vec<_> =
                lam.atoms.iter().filter(|a| !inp.x().iter().any(|x| (*x - a.matrix).frob() <= MERGE_TOL)).collect();
            assert_eq!(residual.len(), 1);
            assert!(rel(residual[0].weight, rho.powi(m as i32)) < 1e-10);
        }
        assert!(rho.powi(m as i32) < last);
        last = rho.powi(m as i32);
    }
}

#[test]
fn staircase_on_t5_certificate() {
    let inp = t5_family(3.0).unwrap().with_sigma(t5_family_sigmas()[2].clone()).unwrap();
    let cert = certify(&inp).unwrap();
    let (lam, _) = staircase(&cert, 2, 3).unwrap();
    assert!((lam.barycenter() - cert.inner_points[2]).frob() <= 1e-12);
    assert!(lam.atoms.len() <= 6);
}

#[test]
fn staircase_rejects_bad_arguments() {
    let cert = certify(&t4_family(3.0).unwrap()).unwrap();
    assert!(staircase(&cert, 4, 1).is_err());
    assert!(staircase(&cert, 0, 0).is_err());
}

#[test]
fn laminate_json_round_trip() {
    let (nu, tree) = example_nu(1).unwrap();
    let s = serde_json::to_string(&nu).unwrap();
    let back: Laminate<BlockMat> = serde_json::from_str(&s).unwrap();
    assert_eq!(back, nu);
    let s = serde_json::to_string(&tree).unwrap();
    let back: SplitTree<BlockMat> = serde_json::from_str(&s).unwrap();
    assert_eq!(back, tree);
    let cert = certify(&t4_family(3.0).unwrap()).unwrap();
    let (lam, _) = staircase(&cert, 1, 2).unwrap();
    let s = serde_json::to_string(&lam).unwrap();
    let back: Laminate<Mat2> = serde_json::from_str(&s).unwrap();
    assert_eq!(back, lam);
}

#[test]
fn csv_table_has_header_and_rows() {
    let (nu, _) = example_nu(1).unwrap();
    let mut buf = Vec::new();
    nu.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "weight,m11,m12,m21,m22,det,dist_l1,dist_l2");
    assert_eq!(lines.len(), 9);
}

#[test]
fn from_atoms_merges_and_validates() {
    let a = Mat2::identity();
    let lam = Laminate::from_atoms(vec![(0.5, a), (0.5, a + Mat2::diag(1e-12, 0.0))]).unwrap();
    assert_eq!(lam.atoms.len(), 1);
    assert!(Laminate::from_atoms(vec![(0.5, a)]).is_err());
    assert!(Laminate::<Mat2>::from_atoms(vec![]).is_err());
}

fn mat2() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-3.0f64..3.0).prop_map(|e| Mat2::new(e[0], e[1], e[2], e[3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn random_rank_one_splits_preserve_barycenter(
        base in mat2(),
        steps in prop::collection::vec((0usize..8, 0.05f64..1.0, 0.05f64..0.95,
            prop::array::uniform2(-2.0f64..2.0), prop::array::uniform2(-2.0f64..2.0)), 1..8),
    ) {
        let mut lam = Laminate::dirac(base);
        for (j, frac, l, a, xi) in steps {
            let j = j % lam.atoms.len();
            let d = Mat2::outer(a, xi);
            prop_assume!(d.frob() > 1e-3);
            let aj = lam.atoms[j].matrix;
            // A_j = l B' + (1-l) B'' with B'' - B' = d.
            let b1 = aj - d * (1.0 - l);
            let b2 = aj + d * l;
            let s = lam.atoms[j].weight * frac;
            let before = lam.barycenter();
            lam = lam.split(j, s, l, &b1, &b2).unwrap();
            prop_assert!((lam.barycenter() - before).frob() <= 1e-12);
            let total: f64 = lam.atoms.iter().map(|a| a.weight).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn pushforward_multiplies_determinants(p in mat2()) {
        prop_assume!(p.det().abs() > 1e-2);
        let (nu, _) = example_nu(1).unwrap();
        let nu = Laminate::from_atoms(nu.atoms.iter().map(|a| (a.weight, a.matrix.to_mat2().unwrap())).collect()).unwrap();
        let pushed = nu.pushforward_left(&p).unwrap();
        for (a, b) in nu.atoms.iter().zip(&pushed.atoms) {
            prop_assert_eq!(a.weight, b.weight);
            prop_assert!((b.matrix.det() - p.det() * a.matrix.det()).abs() <= 1e-12 * (1.0 + p.frob().powi(2)));
        }
        let bary = pushed.barycenter();
        prop_assert!((bary - p * nu.barycenter()).frob() <= 1e-12 * (1.0 + p.frob()));
    }
}
