//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when all
//! pass: `cargo test -p rankone-cli --test acceptance`.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankone_core::analyzer::*;
use rankone_core::families::*;
use rankone_core::heisenberg::*;
use rankone_core::laminate::{example_nu, staircase, Laminate, MERGE_TOL};
use rankone_core::mat::{det_dense, BlockMat, Mat2};
use rankone_core::synth::{analyze, realize, simple_lamination, Domain2, SynthOptions, DEFAULT_CELL_BUDGET};
use rankone_core::tn::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Collects the failed sub-checks of one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn that(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

// c = 3: a = (c - 1/c)^2, b = c + 1/c - 2.
const A: f64 = 64.0 / 9.0;
const B: f64 = 4.0 / 3.0;

fn mu_from_beta(beta: f64) -> f64 {
    1.0 + beta / 2.0 + 0.5 * (beta * beta + 4.0 * beta).sqrt()
}

fn eta_nu() -> (f64, f64) {
    (mu_from_beta(6400.0 / 729.0), mu_from_beta(100.0 / 27.0))
}

fn c1_threshold(c: &mut Check) {
    let t0 = Instant::now();
    let t = t4_threshold();
    let dt = t0.elapsed().as_secs_f64();
    c.that((t - (1.0 + SQRT_2)).abs() <= 1e-6, format!("threshold {t}"));
    c.that(dt < 1.0, format!("runtime {dt:.3}s"));
    c.note(format!("c* = {t:.9}, {:.3}s", dt));
}

fn c2_t5_determinant(c: &mut Check) {
    let t0 = Instant::now();
    let inp = t5_family(3.0).unwrap();
    let det_a = det_dense(&build_amu(&inp, 1.0));
    let closed = 2.0 * A * A * (A * B * B + 4.0 * A - 16.0 * B);
    c.that(rel(closed, 13107200.0 / 6561.0) < 1e-14, "closed form value");
    c.that(rel(det_a, 13107200.0 / 6561.0) <= 1e-10, format!("det A = {det_a}"));
    let [s1, s2, s3] = t5_family_sigmas();
    let al: Vec<f64> = [s1, s2, s3].into_iter().map(|s| t5_alpha_beta(&inp.with_sigma(s).unwrap()).unwrap().alpha).collect();
    let dt = t0.elapsed().as_secs_f64();
    c.that(rel(al[0], -16.0 * A) <= 1e-12, format!("alpha1 {}", al[0]));
    c.that(rel(al[1], -16.0 * A) <= 1e-12, format!("alpha2 {}", al[1]));
    c.that(rel(al[2], -4.0 * A * A * B) <= 1e-12, format!("alpha3 {}", al[2]));
    c.that(dt < 0.1, format!("runtime {dt:.4}s"));
    c.note(format!("rel err det {:.1e}, {:.4}s", rel(det_a, closed), dt));
}

fn c3_kernels(c: &mut Check) {
    let (eta, nu) = eta_nu();
    let (a, b) = (A, B);
    let l1 = vec![
        1.0,
        eta,
        (2.0 / a) * ((a * b / 4.0 - 1.0) * eta + 1.0),
        (2.0 * eta / a) * (a * b / 4.0 - 1.0 + eta),
        (a * b / 4.0 - 2.0) * eta,
    ];
    let mut l2 = l1.clone();
    l2.swap(2, 3);
    let l3 = vec![1.0, nu, b / 2.0 * nu, b / 2.0 * nu * nu, (a * b / 4.0 - 1.0) * nu - 1.0];
    let want = [l1, l2, l3];
    let inp = t5_family(3.0).unwrap();
    let mut mus = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, s) in t5_family_sigmas().into_iter().enumerate() {
        let inp = inp.with_sigma(s).unwrap();
        let Some(ms) = t5_mu_star(&inp) else {
            c.that(false, format!("no mu* for ordering {}", k + 1));
            continue;
        };
        c.that(
            ms.det_residual <= 1e-8 * ms.a_norm.powi(5),
            format!("det residual {:e} at ordering {}", ms.det_residual, k + 1),
        );
        let Ok(Some(lam)) = kernel_positive(&build_amu(&inp, ms.mu)) else {
            c.that(false, format!("no positive kernel for ordering {}", k + 1));
            continue;
        };
        let lam: Vec<f64> = lam.iter().map(|v| v / lam[0]).collect();
        c.that(lam.iter().all(|v| *v > 0.0), "positive entries");
        for i in 0..5 {
            worst = worst.max(rel(lam[i], want[k][i]));
        }
        mus.push(ms.mu);
    }
    c.that(worst <= 1e-9, format!("kernel rel err {worst:e}"));
    if mus.len() == 3 {
        c.that(rel(mus[0], mus[1]) < 1e-12 && mus[1] > mus[2] && mus[2] > 1.0, format!("mu ordering {mus:?}"));
        c.that((mus[0] - 10.6861).abs() < 1e-3 && (mus[2] - 5.5226).abs() < 1e-4, format!("mu values {mus:?}"));
        c.note(format!("eta = {:.6}, nu = {:.6}, kernel rel err {worst:.1e}", mus[0], mus[2]));
    }
}

fn c4_large_t5(c: &mut Check) {
    let inp = t5_family(3.0).unwrap();
    let rep = is_large_t5(inp.x(), &t5_family_sigmas()).unwrap();
    c.that(rep.verdict, "verdict");
    c.that(rep.ranks == vec![3; 5], format!("ranks {:?}", rep.ranks));
    let (eta, nu) = eta_nu();
    let d1 = -(2.0 / A) * (eta * eta - 1.0) * eta * (nu - 1.0);
    let d3 = -(2.0 / A) * eta * eta * nu * (A * B / 4.0 - 2.0) * (eta - 1.0) * (nu - eta);
    // Columns are zero-based; B^(5) follows the determinant of its displayed matrix.
    let cases = [(0, [1, 3, 4], d1), (1, [0, 3, 4], d1), (2, [0, 1, 3], d3), (3, [0, 1, 2], -d3), (4, [0, 1, 2], -d3)];
    let mut worst: f64 = 0.0;
    for (k, cols, want) in cases {
        worst = worst.max(rel(rep.subdeterminant(k, cols), want));
    }
    c.that(worst <= 1e-8, format!("subdeterminant rel err {worst:e}"));
    c.note(format!("ranks {:?}, subdet rel err {worst:.1e}", rep.ranks));
}

fn c5_certificates(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let perms5 = t5_family_sigmas();
    let mut perms4 = Vec::new();
    for p in 0..24usize {
        // All 24 orderings of four atoms, by Lehmer code.
        let mut pool: Vec<usize> = (0..4).collect();
        let mut code = p;
        let mut perm = Vec::new();
        for k in (1..=4).rev() {
            let f: usize = (1..k).product();
            perm.push(pool.remove(code / f));
            code %= f;
        }
        perms4.push(perm);
    }
    let opts = CertifyOptions { mu_max: 1e12, ..CertifyOptions::default() };
    let (mut certified, mut missing) = (0, 0);
    let mut worst = [0.0f64; 3];
    let mut min_kappa = f64::INFINITY;
    while certified + missing < 1000 {
        let cval = rng.gen_range(2.5..6.0);
        let five = rng.gen_bool(0.5);
        let inp = if five {
            // The three orderings are certified for c >= 3.
            t5_family(3.0 + (cval - 2.5) * 3.0 / 3.5).unwrap().with_sigma(perms5[rng.gen_range(0..3)].clone()).unwrap()
        } else {
            t4_family(cval).unwrap().with_sigma(perms4[rng.gen_range(0..24)].clone()).unwrap()
        };
        let Some(cert) = certify_with(&inp, &opts) else {
            missing += 1;
            continue;
        };
        certified += 1;
        let r = cert.compute_residuals();
        worst[0] = worst[0].max(r.rank_one);
        worst[1] = worst[1].max(r.det_identity);
        worst[2] = worst[2].max(r.leg_sum);
        min_kappa = min_kappa.min(r.min_kappa);
    }
    c.that(missing == 0, format!("{missing} valid family inputs not certified"));
    c.that(worst[0] <= 1e-9, format!("det(P_k - X_k) {:e}", worst[0]));
    c.that(worst[1] <= 1e-9, format!("det identity {:e}", worst[1]));
    c.that(worst[2] <= 1e-9, format!("leg sum {:e}", worst[2]));
    c.that(min_kappa > 1.0, format!("min kappa {min_kappa}"));
    let mut structural: f64 = 0.0;
    let mut tuples = 0;
    while tuples < 1000 {
        let x: Vec<Mat2> = (0..5)
            .map(|_| Mat2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let Ok(inp) = TnInput::new(x, None) else { continue };
        tuples += 1;
        let mu = rng.gen_range(0.1..20.0);
        let (a, b) = (build_amu(&inp, mu), build_amu(&inp, 1.0 / mu));
        structural = structural.max((a.transpose() - &b * mu).norm() / a.norm());
        let scale = a.norm().powi(5);
        structural = structural.max((det_dense(&a) - mu.powi(5) * det_dense(&b)).abs() / scale);
    }
    c.that(structural <= 1e-10, format!("structural identities {structural:e}"));
    c.note(format!(
        "{certified} certificates, max residuals {:.1e}/{:.1e}/{:.1e}, min kappa {min_kappa:.3}, structural {structural:.1e}",
        worst[0], worst[1], worst[2]
    ));
}

fn c6_laminates(c: &mut Check) {
    for n in 1..=3 {
        let (nu, tree) = example_nu(n).unwrap();
        let want = BlockMat::unit(n, 0, 0, 0.25).lin_comb(1.0, &BlockMat::unit(n, n, 0, 0.25), 1.0);
        c.that(nu.barycenter() == want, format!("barycenter n = {n}"));
        c.that(nu.atoms.iter().all(|a| a.matrix.det().abs() == 1.0), format!("|det| = 1, n = {n}"));
        for node in &tree.nodes {
            if let Some(b) = node.split {
                let [c1, c2] = b.children;
                let recon = tree.nodes[c1].matrix.lin_comb(b.lambda, &tree.nodes[c2].matrix, 1.0 - b.lambda);
                c.that(recon.lin_comb(1.0, &node.matrix, -1.0).frob() <= 1e-12, format!("split step n = {n}"));
            }
        }
    }
    let inp = t4_family(3.0).unwrap();
    let cert = certify(&inp).unwrap();
    let mut worst: f64 = 0.0;
    for m in 1..=4 {
        let (lam, _) = staircase(&cert, 0, m).unwrap();
        let predicted = cert.legs.iter().map(|l| 1.0 - 1.0 / l.kappa).product::<f64>().powi(m as i32);
        let residual: f64 = lam
            .atoms
            .iter()
            .filter(|a| !inp.x().iter().any(|x| (*x - a.matrix).frob() <= MERGE_TOL))
            .map(|a| a.weight)
            .sum();
        worst = worst.max(rel(residual, predicted));
    }
    c.that(worst <= 1e-10, format!("staircase rel err {worst:e}"));
    c.note(format!("staircase residual mass rel err {worst:.1e}"));
}

fn c7_synthesis(c: &mut Check) {
    let t0 = Instant::now();
    let (nu, tree) = example_nu(1).unwrap();
    let nu = Laminate::from_atoms(nu.atoms.iter().map(|a| (a.weight, a.matrix.to_mat2().unwrap())).collect()).unwrap();
    let delta = 0.05;
    let map = realize(&tree.to_mat2().unwrap(), &Domain2::unit(), &SynthOptions::new(delta, 8));
    let Ok(map) = map else {
        c.that(false, format!("realize failed: {:?}", map.err()));
        return;
    };
    let rep = analyze(&map, Some(&nu), delta);
    let dt = t0.elapsed().as_secs_f64();
    c.that(rep.boundary_residual == 0.0, format!("boundary residual {:e}", rep.boundary_residual));
    c.that(rep.on_atom_fraction >= 0.9, format!("on-atom fraction {}", rep.on_atom_fraction));
    let werr = rep.max_weight_error.unwrap_or(f64::INFINITY);
    c.that(werr <= 0.05, format!("weight error {werr}"));
    c.that(rep.mean_gradient_residual <= 1e-8, format!("mean gradient {:e}", rep.mean_gradient_residual));
    c.that(map.cells.len() <= DEFAULT_CELL_BUDGET, format!("{} cells", map.cells.len()));
    c.that(dt < 60.0, format!("runtime {dt:.1}s"));
    c.note(format!(
        "{} cells, on-atom {:.3}, weight err {werr:.3}, mean grad {:.1e}, {dt:.2}s",
        rep.cells, rep.on_atom_fraction, rep.mean_gradient_residual
    ));
}

fn c8_example_eps(c: &mut Check) {
    let eps = 0.3;
    let target = 2.0 * eps * eps;
    let grid = GridSpec::unit(vec![24, 1, 24, 1]).unwrap();
    let tent = Scalar::new("tent", |t| (t - 0.5).abs(), |t| if t > 0.5 { 1.0 } else { -1.0 });
    let f = f_eps(eps, shear_composition(tent, Scalar::zero())).unwrap();
    let field = GradientField::sample(&f, &grid).unwrap();
    c.that(field.det().iter().all(|d| (d - target).abs() <= 1e-12 * target), "det = 2 eps^2 (shear input)");
    let e = det_sublevel(&field, &[target * (1.0 - 1e-9), target * (1.0 + 1e-9)]);
    c.that(e[0] == 0.0 && (e[1] - 1.0).abs() < 1e-12, format!("sublevel jump {e:?}"));

    let (b1, b2) = (Mat2::identity(), Mat2::swap());
    let mesh = simple_lamination(b1 * 0.5 + b2 * 0.5, b1, b2, 0.5, &Domain2::unit(), 0.05).unwrap();
    let fam = from_mesh(mesh);
    let field = GradientField::sample(&f_eps(eps, fam.clone()).unwrap(), &grid).unwrap();
    let zero = GradientField::sample(&f_eps(0.0, fam.clone()).unwrap(), &grid).unwrap();
    let (mut smooth, mut split, mut bad_det, mut bad_dist) = (0, 0, 0, 0);
    for i in 0..grid.len() {
        if !field.is_smooth(i, 0.0) {
            continue;
        }
        smooth += 1;
        let x = &zero.points[i];
        let g = fam.exact_jacobian(&[x[0], x[2]]).unwrap();
        if (field.samples[i].det() - target * g.determinant()).abs() > 1e-12 * target {
            bad_det += 1;
        }
        if g[(0, 1)] == 0.0 && g[(1, 0)] == 0.0 || g[(0, 0)] == 0.0 && g[(1, 1)] == 0.0 {
            split += 1;
            let s = &zero.samples[i];
            if s.dist_l1().min(s.dist_l2()) != 0.0 {
                bad_dist += 1;
            }
        }
    }
    c.that(bad_det == 0, format!("{bad_det} smooth mesh nodes with det != 2 eps^2 det F"));
    c.that(bad_dist == 0, format!("{bad_dist} split nodes with dist(grad f0, L) > 0"));
    c.that(split > 0, "no split nodes sampled");
    c.note(format!("{smooth} smooth mesh nodes, {split} F-split"));
}

fn c9_oscillation(c: &mut Check) {
    let (h, phi) = (Scalar::sin_2pi(), Scalar::identity());
    let cc = 1.0 / (2.0 * PI);
    let bound = 0.5 * (2.0 / PI) * 0.25;
    let grid = GridSpec::unit(vec![1, 64, 64, 1]).unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut min_defect = f64::INFINITY;
    for j in [1.0, 2.0, 4.0, 8.0] {
        let fam = oscillation_family(j, h.clone(), phi.clone()).unwrap();
        let f = GradientField::sample(&fam, &grid).unwrap();
        let dmax = f.lq_norm(&f.dist_l(), f64::INFINITY);
        worst_ratio = worst_ratio.max(dmax * j / cc);
        let s = split_defect(&f).unwrap();
        min_defect = min_defect.min(s.defect);
    }
    c.that(worst_ratio <= 1.0 + 1e-12, format!("max dist * j / C = {worst_ratio}"));
    c.that(min_defect >= 0.95 * bound, format!("split defect {min_defect} vs bound {bound}"));
    c.note(format!("max j dist/C {worst_ratio:.4}, min defect {min_defect:.4} >= 0.95 x {bound:.4}"));
}

fn c10_heisenberg(c: &mut Check) {
    let shear = shear_composition(Scalar::sin(), Scalar::cos());
    let lifts: Vec<Lift> =
        [128, 256].iter().map(|&n| lift(&shear, PlaneGrid::square(n).unwrap(), [0, 0], LiftOptions::default()).unwrap()).collect();
    let (d0, d1) = (&lifts[0].diagnostics, &lifts[1].diagnostics);
    let order = (d0.theta3_residual / d1.theta3_residual).ln() / (d0.h / d1.h).ln();
    c.that(order >= 1.9, format!("refinement order {order}"));
    let grid = PlaneGrid::square(64).unwrap();
    let scaling = closedness_residual(&alpha_of(&linear2("scaling", Mat2::diag(2.0, 1.0)), grid).unwrap());
    c.that(scaling >= 0.99, format!("scaling d-alpha residual {scaling}"));
    let l = &lifts[1];
    let h2 = l.diagnostics.h.powi(2);
    let mut worst: f64 = 0.0;
    for node in [[1, 1], [40, 200], [128, 128], [255, 3], [200, 77]] {
        match pansu_block_check(l, node, 1e-9) {
            Ok(r) => {
                worst = worst.max(r.v1_error).max(r.v2_error);
                c.that(r.horizontal_error <= 10.0 * h2, format!("horizontal error {} at {node:?}", r.horizontal_error));
            }
            Err(e) => c.that(false, format!("{e}")),
        }
    }
    c.that(worst <= 1e-8, format!("Pansu block error {worst:e}"));
    let other = lift(&shear, PlaneGrid::square(256).unwrap(), [197, 31], LiftOptions::default()).unwrap();
    let diff: Vec<f64> = l.potential.u.iter().zip(&other.potential.u).map(|(x, y)| x - y).collect();
    let spread = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max) - diff.iter().copied().fold(f64::INFINITY, f64::min);
    c.that(spread <= 1e-10, format!("basepoint spread {spread:e}"));
    c.note(format!("order {order:.3}, scaling {scaling:.4}, block err {worst:.1e}, spread {spread:.1e}"));
}

const CLI_COMMANDS: &[&[&str]] = &[
    &["tn", "threshold"],
    &["tn", "large-t5", "--c", "3"],
    &["tn", "check", "--family", "t4", "--c", "2"],
    &["tn", "inner", "--family", "t5", "--c", "3", "--sigma", "1,2,3,5,4"],
    &["laminate", "build", "--example", "nu"],
    &["laminate", "staircase", "--c", "3", "--m", "3"],
    &["synth", "realize", "--delta", "0.05"],
    &["analyze", "defect", "--family", "oscillation", "--j", "8"],
    &["analyze", "sequence", "--values", "1,2,4,8", "--grid", "32", "--limit", "identity"],
    &["heis", "lift", "--family", "shear", "--grid", "256"],
    &["heis", "check", "--family", "shear", "--grid", "128"],
];

fn run_into(args: &[&str], out: &Path, threads: &str) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_rankone"))
        .args(args)
        .args(["--threads", threads, "--out"])
        .arg(out)
        .env_remove("RANKONE_OUT")
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().path()).collect())
        .unwrap_or_else(|_| Vec::new());
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())).collect()
}

fn c11_determinism(c: &mut Check) {
    let root = std::env::temp_dir().join(format!("rankone-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let mut bytes = 0;
    for (k, args) in CLI_COMMANDS.iter().enumerate() {
        let (a, b) = (root.join(format!("{k}a")), root.join(format!("{k}b")));
        // Different thread counts must not change a single byte.
        let (ca, sa) = run_into(args, &a, "1");
        let (cb, sb) = run_into(args, &b, "4");
        c.that(ca == cb && ca != 2, format!("{}: exit codes {ca} {cb}", args.join(" ")));
        c.that(sa == sb, format!("{}: stdout differs", args.join(" ")));
        let (fa, fb) = (snapshot(&a), snapshot(&b));
        c.that(!fa.is_empty() && fa == fb, format!("{}: artifacts differ", args.join(" ")));
        bytes += fa.iter().map(|f| f.1.len()).sum::<usize>();
    }
    let _ = std::fs::remove_dir_all(&root);
    c.note(format!("{} commands, {:.1} MB compared", CLI_COMMANDS.len(), bytes as f64 / 1e6));
}

fn main() {
    let criteria: [(&str, fn(&mut Check)); 11] = [
        ("T4 threshold", c1_threshold),
        ("T5 determinant and alphas", c2_t5_determinant),
        ("kernel closed forms", c3_kernels),
        ("large T5", c4_large_t5),
        ("certificate invariants", c5_certificates),
        ("laminates", c6_laminates),
        ("synthesis", c7_synthesis),
        ("analyzer, f_eps", c8_example_eps),
        ("analyzer, oscillation", c9_oscillation),
        ("Heisenberg lift", c10_heisenberg),
        ("CLI determinism", c11_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = format!("{}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|s| s == &id) {
            continue;
        }
        let mut c = Check::default();
        let t0 = Instant::now();
        f(&mut c);
        let status = if c.failures.is_empty() { "PASS" } else { "FAIL" };
        let detail = if c.failures.is_empty() { c.notes.join("; ") } else { c.failures.join("; ") };
        println!("criterion {id:>2} {status} {name} ({:.2}s): {detail}", t0.elapsed().as_secs_f64());
        failed += !c.failures.is_empty() as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
