//! Constants of the minor estimates, calibrated by random search and frozen
//! in `data/calibration.toml`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mat::{det_dense, minor, BlockMat, SplitTarget};

const FROZEN: &str = include_str!("../data/calibration.toml");

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub ensemble: Ensemble,
    pub minor_expansion: MinorExpansion,
    pub offdiag_det: OffdiagDet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub samples_per_n: usize,
    pub n_values: Vec<usize>,
    pub description: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinorExpansion {
    /// Largest ratio |M(F) - M(F')| / (|F|^{r-1} d + d^r) seen in the ensemble.
    pub observed_max: f64,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OffdiagDet {
    pub observed_max: f64,
    pub c_prime: f64,
}

impl Calibration {
    pub fn frozen() -> &'static Calibration {
        static CAL: OnceLock<Calibration> = OnceLock::new();
        CAL.get_or_init(|| toml::from_str(FROZEN).expect("data/calibration.toml is malformed"))
    }
}

/// Ensemble used for the frozen constants. `calibrate` with these arguments
/// reproduces `data/calibration.toml` exactly (`rankone calibrate`).
pub const DEFAULT_SEED: u64 = 20_240_611;
pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_N: [usize; 3] = [1, 2, 3];
/// Multiplier applied to the observed maxima.
pub const SAFETY: f64 = 2.0;

fn subsets(m: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn go(start: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for k in start..m {
            cur.push(k);
            go(k + 1, m, r, cur, out);
            cur.pop();
        }
    }
    go(0, m, r, &mut cur, &mut out);
    out
}

/// A matrix near L: a random point on one branch plus an off-branch
/// perturbation whose size is log-uniform in [1e-4, 3].
pub fn sample_near_l<R: Rng>(rng: &mut R, n: usize) -> BlockMat {
    let on_l1 = rng.gen_bool(0.5);
    let scale = 10f64.powf(rng.gen_range(-4.0..0.5));
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let diag_block = (i < n) == (j < n);
        let v = rng.gen_range(-1.0..1.0);
        if diag_block == on_l1 {
            v
        } else {
            scale * v
        }
    });
    BlockMat::from_dmatrix(m).expect("finite sample")
}

/// Largest ratio |M(F) - M(F')| / (|F|^{r-1} d + d^r) over every square minor.
pub fn minor_ratio(f: &BlockMat) -> f64 {
    let size = f.size();
    let proj = f.project(SplitTarget::L);
    let d = f.dist_l1().min(f.dist_l2());
    let fr = f.frob();
    let mut worst: f64 = 0.0;
    for r in 1..=size {
        let denom = fr.powi(r as i32 - 1) * d + d.powi(r as i32);
        if denom == 0.0 {
            continue;
        }
        let sets = subsets(size, r);
        for rows in &sets {
            for cols in &sets {
                let gap = (minor(f.as_dmatrix(), rows, cols) - minor(proj.as_dmatrix(), rows, cols)).abs();
                worst = worst.max(gap / denom);
            }
        }
    }
    worst
}

/// |det F - (-1)^n det B det C| / (|F|^{2n-1} d + d^{2n}) on the L2 branch.
pub fn offdiag_ratio(f: &BlockMat) -> Option<f64> {
    let (d1, d2) = (f.dist_l1(), f.dist_l2());
    if d2 >= d1 || d2 == 0.0 {
        return None;
    }
    let n = f.n() as i32;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let gap = (f.det() - sign * det_dense(&f.b()) * det_dense(&f.c())).abs();
    Some(gap / (f.frob().powi(2 * n - 1) * d2 + d2.powi(2 * n)))
}

fn round_up(x: f64) -> f64 {
    (x * 100.0).ceil() / 100.0
}

/// Random search for the two constants.
pub fn calibrate(seed: u64, samples_per_n: usize, n_values: &[usize]) -> Calibration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut minor_max, mut off_max): (f64, f64) = (0.0, 0.0);
    for &n in n_values {
        for _ in 0..samples_per_n {
            let f = sample_near_l(&mut rng, n);
            minor_max = minor_max.max(minor_ratio(&f));
            if let Some(r) = offdiag_ratio(&f) {
                off_max = off_max.max(r);
            }
        }
    }
    Calibration {
        ensemble: Ensemble {
            seed,
            samples_per_n,
            n_values: n_values.to_vec(),
            description: "ChaCha8; one branch of L with entries U(-1,1), off-branch blocks scaled by \
                          10^U(-4,0.5); all square minors"
                .into(),
        },
        minor_expansion: MinorExpansion {
            observed_max: minor_max,
            c: round_up(SAFETY * minor_max),
        },
        offdiag_det: OffdiagDet {
            observed_max: off_max,
            c_prime: round_up(SAFETY * off_max),
        },
    }
}

impl Calibration {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }
}
