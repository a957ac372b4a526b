//! Closed-form map families used as fixtures: the folding map, the
//! Example-2.6 lift f^(ε), the oscillation family and shear compositions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mat::Mat2;
use crate::synth::{Locator, PiecewiseAffineMap};

type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type DistFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// C¹ (or Lipschitz) scalar function with its derivative.
#[derive(Clone)]
pub struct Scalar {
    pub name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scalar({})", self.name)
    }
}

impl Scalar {
    pub fn new(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Scalar { name: name.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (self.df)(t)
    }

    pub fn zero() -> Self {
        Scalar::new("zero", |_| 0.0, |_| 0.0)
    }

    pub fn identity() -> Self {
        Scalar::new("id", |t| t, |_| 1.0)
    }

    pub fn sin() -> Self {
        Scalar::new("sin", f64::sin, f64::cos)
    }

    pub fn cos() -> Self {
        Scalar::new("cos", f64::cos, |t| -t.sin())
    }

    /// sin(2πt)/(2π), 1-periodic with ‖h‖∞ = 1/(2π) and ‖h'‖∞ = 1.
    pub fn sin_2pi() -> Self {
        Scalar::new("sin2pi", |t| (2.0 * PI * t).sin() / (2.0 * PI), |t| (2.0 * PI * t).cos())
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Scalar::zero()),
            "id" => Ok(Scalar::identity()),
            "sin" => Ok(Scalar::sin()),
            "cos" => Ok(Scalar::cos()),
            "sin2pi" => Ok(Scalar::sin_2pi()),
            _ => Err(Error::InvalidInput(format!("unknown scalar function '{name}'"))),
        }
    }
}

/// Piecewise-linear function given by its breakpoints, the slopes on the
/// `knots.len() + 1` intervals, and its value at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pub knots: Vec<f64>,
    pub slopes: Vec<f64>,
    pub value_at_zero: f64,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>, value_at_zero: f64) -> Self {
        PiecewiseLinear { knots, slopes, value_at_zero }
    }

    /// h(t) = |t|.
    pub fn abs() -> Self {
        PiecewiseLinear::new(vec![0.0], vec![-1.0, 1.0], 0.0)
    }

    fn check(&self) -> Result<()> {
        if self.slopes.len() != self.knots.len() + 1 {
            return Err(Error::BadSlopes("need one slope per interval".into()));
        }
        if self.knots.windows(2).any(|w| !(w[0] < w[1])) || self.knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::BadSlopes("knots must be finite and increasing".into()));
        }
        if let Some(s) = self.slopes.iter().find(|s| s.abs() != 1.0) {
            return Err(Error::BadSlopes(format!("slope {s} is not ±1")));
        }
        Ok(())
    }

    fn interval(&self, t: f64) -> usize {
        self.knots.partition_point(|&k| k <= t)
    }

    pub fn slope(&self, t: f64) -> f64 {
        self.slopes[self.interval(t)]
    }

    pub fn eval(&self, t: f64) -> f64 {
        // Integrate h' from 0 to t across the knots in between.
        let (lo, hi, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
        let mut acc = 0.0;
        let mut a = lo;
        for (i, &k) in self.knots.iter().enumerate() {
            if k <= a {
                continue;
            }
            if k >= hi {
                break;
            }
            acc += self.slopes[i] * (k - a);
            a = k;
        }
        acc += self.slopes[self.interval(a)] * (hi - a);
        self.value_at_zero + sign * acc
    }
}

/// A map Ω ⊂ ℝ^d -> ℝ^d with optional exact Jacobian and crease set.
#[derive(Clone)]
pub struct MapFamily {
    pub name: String,
    pub params: Vec<(String, f64)>,
    pub dim: usize,
    /// Box domain, one `[lo, hi]` per axis.
    pub domain: Vec<[f64; 2]>,
    map: VecFn,
    jac: Option<JacFn>,
    crease: Option<DistFn>,
}

impl std::fmt::Debug for MapFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapFamily").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl MapFamily {
    pub fn new(
        name: &str,
        dim: usize,
        domain: Vec<[f64; 2]>,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MapFamily { name: name.into(), params: Vec::new(), dim, domain, map: Arc::new(map), jac: None, crease: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// Distance to the set where the map fails to be differentiable.
    pub fn with_crease(mut self, d: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.crease = Some(Arc::new(d));
        self
    }

    pub fn with_params(mut self, p: Vec<(&str, f64)>) -> Self {
        self.params = p.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    pub fn has_exact_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn exact_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(x))
    }

    /// Central-difference Jacobian with step `h`.
    pub fn fd_jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        let mut y = x.to_vec();
        for j in 0..d {
            y[j] = x[j] + h;
            let fp = self.eval(&y);
            y[j] = x[j] - h;
            let fm = self.eval(&y);
            y[j] = x[j];
            for i in 0..d {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        m
    }

    /// Exact Jacobian if available, central differences otherwise.
    pub fn jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        self.exact_jacobian(x).unwrap_or_else(|| self.fd_jacobian(x, h))
    }

    pub fn crease_distance(&self, x: &[f64]) -> f64 {
        self.crease.as_ref().map_or(f64::INFINITY, |d| d(x))
    }
}

fn unit_box(d: usize) -> Vec<[f64; 2]> {
    vec![[0.0, 1.0]; d]
}

/// f(x, y) = ½ (x + y + h(x - y), x + y - h(x - y)).
pub fn folding_map(h: PiecewiseLinear) -> Result<MapFamily> {
    h.check()?;
    let h = Arc::new(h);
    let (h1, h2, h3) = (h.clone(), h.clone(), h.clone());
    Ok(MapFamily::new("folding", 2, unit_box(2), move |x| {
        let s = x[0] + x[1];
        let t = h1.eval(x[0] - x[1]);
        vec![0.5 * (s + t), 0.5 * (s - t)]
    })
    .with_jacobian(move |x| {
        let d = h2.slope(x[0] - x[1]);
        DMatrix::from_row_slice(2, 2, &[0.5 * (1.0 + d), 0.5 * (1.0 - d), 0.5 * (1.0 - d), 0.5 * (1.0 + d)])
    })
    .with_crease(move |x| {
        let t = x[0] - x[1];
        h3.knots.iter().map(|k| (t - k).abs() / 2f64.sqrt()).fold(f64::INFINITY, f64::min)
    }))
}

/// A planar map wrapped as a family (for f_eps and the lift).
pub fn planar_affine(a: Mat2, b: [f64; 2]) -> MapFamily {
    MapFamily::new("affine", 2, unit_box(2), move |x| {
        let y = a.apply([x[0], x[1]]);
        vec![y[0] + b[0], y[1] + b[1]]
    })
    .with_jacobian(move |_| DMatrix::from_row_slice(2, 2, &a.entries()))
    .with_params(a.entries().iter().enumerate().map(|(i, &v)| (["a11", "a12", "a21", "a22"][i], v)).collect())
}

/// A piecewise-affine mesh as a family; Jacobians are the exact cell
/// gradients and the crease set is the union of cell boundaries.
pub fn from_mesh(map: PiecewiseAffineMap) -> MapFamily {
    let shared = Arc::new((map.locator(), map));
    let d = shared.1.domain;
    let (s1, s2, s3) = (shared.clone(), shared.clone(), shared);
    let eval = move |x: &[f64]| {
        let (loc, m): &(Locator, PiecewiseAffineMap) = &s1;
        m.eval(loc, [x[0], x[1]]).map_or(vec![f64::NAN; 2], |v| v.to_vec())
    };
    MapFamily::new("mesh", 2, vec![[d.x_min, d.x_max], [d.y_min, d.y_max]], eval)
        .with_jacobian(move |x| {
            let (loc, m) = &*s2;
            let g = m.gradient(loc, [x[0], x[1]]).unwrap_or(Mat2::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN));
            DMatrix::from_row_slice(2, 2, &g.entries())
        })
        .with_crease(move |x| {
            let (loc, m) = &*s3;
            m.crease_distance(loc, [x[0], x[1]]).unwrap_or(0.0)
        })
}

/// f^(ε)(x) = (F1(x1,x3), ε x2 - ε x4, F2(x1,x3), ε x2 + ε x4) on (0,1)^4.
pub fn f_eps(eps: f64, f: MapFamily) -> Result<MapFamily> {
    if !(eps >= 0.0) || f.dim != 2 {
        return Err(Error::InvalidInput("need ε >= 0 and a planar F".into()));
    }
    let f = Arc::new(f);
    let (f1, f2, f3) = (f.clone(), f.clone(), f);
    Ok(MapFamily::new("f_eps", 4, unit_box(4), move |x| {
        let y = f1.eval(&[x[0], x[2]]);
        vec![y[0], eps * (x[1] - x[3]), y[1], eps * (x[1] + x[3])]
    })
    .with_jacobian(move |x| {
        let g = f2.jacobian(&[x[0], x[2]], 1e-6);
        let (a, b, c, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            a, 0.0, b, 0.0,
            0.0, eps, 0.0, -eps,
            c, 0.0, d, 0.0,
            0.0, eps, 0.0, eps,
        ]);
        m
    })
    .with_crease(move |x| f3.crease_distance(&[x[0], x[2]]))
    .with_params(vec![("eps", eps)]))
}

/// f_j(x) = (x1 + (1/j) h(j x2) φ(x3), x2, x3, x4) on (0,1)^4.
pub fn oscillation_family(j: f64, h: Scalar, phi: Scalar) -> Result<MapFamily> {
    if !(j >= 1.0) {
        return Err(Error::InvalidInput("j must be at least 1".into()));
    }
    let (h1, p1, h2, p2) = (h.clone(), phi.clone(), h, phi);
    Ok(MapFamily::new("oscillation", 4, unit_box(4), move |x| {
        vec![x[0] + h1.eval(j * x[1]) * p1.eval(x[2]) / j, x[1], x[2], x[3]]
    })
    .with_jacobian(move |x| {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = h2.deriv(j * x[1]) * p2.eval(x[2]);
        m[(0, 2)] = h2.eval(j * x[1]) * p2.deriv(x[2]) / j;
        m
    })
    .with_params(vec![("j", j)]))
}

/// f = S2 ∘ S1 with S1(x,y) = (x + φ(y), y), S2(x,y) = (x, y + ψ(x)).
pub fn shear_composition(phi: Scalar, psi: Scalar) -> MapFamily {
    let (p1, s1, p2, s2) = (phi.clone(), psi.clone(), phi, psi);
    MapFamily::new("shear", 2, unit_box(2), move |x| {
        let u = x[0] + p1.eval(x[1]);
        vec![u, x[1] + s1.eval(u)]
    })
    .with_jacobian(move |x| {
        let u = x[0] + p2.eval(x[1]);
        let (dp, ds) = (p2.deriv(x[1]), s2.deriv(u));
        DMatrix::from_row_slice(2, 2, &[1.0, dp, ds, 1.0 + ds * dp])
    })
}

/// Linear planar map x -> Mx (rotations, scalings, swaps).
pub fn linear2(name: &str, m: Mat2) -> MapFamily {
    MapFamily { name: name.into(), ..planar_affine(m, [0.0, 0.0]) }
}

/// The identity of R^dim on the unit cube.
pub fn identity(dim: usize) -> MapFamily {
    MapFamily::new("identity", dim, vec![[0.0, 1.0]; dim], |x| x.to_vec())
        .with_jacobian(move |_| DMatrix::identity(dim, dim))
}

/// Families addressable by name. Numeric parameters come from `params`;
/// `h`, `phi` and `psi` name scalar functions.
pub fn family_by_name(name: &str, params: &BTreeMap<String, f64>, funcs: &BTreeMap<String, String>) -> Result<MapFamily> {
    let num = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    let func = |k: &str, d: &str| Scalar::by_name(funcs.get(k).map_or(d, String::as_str));
    match name {
        "identity" => match num("dim", 2.0) {
            d if d == 2.0 => Ok(linear2("identity", Mat2::identity())),
            d if d >= 1.0 && d.fract() == 0.0 => Ok(identity(d as usize)),
            d => Err(Error::InvalidInput(format!("identity needs a positive integer dim, got {d}"))),
        },
        "rotation" => Ok(linear2("rotation", Mat2::new(0.0, -1.0, 1.0, 0.0))),
        "scaling" => Ok(linear2("scaling", Mat2::diag(num("s", 2.0), 1.0))),
        "folding" => folding_map(PiecewiseLinear::abs()),
        "shear" => Ok(shear_composition(func("phi", "sin")?, func("psi", "cos")?)),
        "oscillation" => oscillation_family(num("j", 8.0), func("h", "sin2pi")?, func("phi", "id")?),
        "f_eps" => {
            let s = num("s", 3.0);
            f_eps(num("eps", 0.1), planar_affine(Mat2::diag(s, 1.0 / s), [0.0, 0.0]))
        }
        _ => Err(Error::InvalidInput(format!("unknown family '{name}'"))),
    }
}

pub const FAMILY_NAMES: [&str; 7] = ["identity", "rotation", "scaling", "folding", "shear", "oscillation", "f_eps"];
