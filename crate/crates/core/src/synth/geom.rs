//! Convex polygon clipping and affine scalar functions on the plane.

pub type Pt = [f64; 2];

/// Scalar affine function x -> g·x + c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lin {
    pub g: Pt,
    pub c: f64,
}

impl Lin {
    pub fn new(g: Pt, c: f64) -> Self {
        Lin { g, c }
    }

    #[inline]
    pub fn eval(&self, x: Pt) -> f64 {
        self.g[0] * x[0] + self.g[1] * x[1] + self.c
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        Lin { g: [self.g[0] - o.g[0], self.g[1] - o.g[1]], c: self.c - o.c }
    }
}

pub fn dot(a: Pt, b: Pt) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Signed area (positive for counter-clockwise polygons).
pub fn area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

pub fn centroid(poly: &[Pt]) -> Pt {
    let n = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [sx / n, sy / n]
}

/// Part of a convex polygon where `f <= 0`.
pub fn clip(poly: &[Pt], f: &Lin) -> Vec<Pt> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = f.eval(p);
        let fq = f.eval(q);
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    dedup(out)
}

fn dedup(mut v: Vec<Pt>) -> Vec<Pt> {
    v.dedup();
    while v.len() > 1 && v.first() == v.last() {
        v.pop();
    }
    v
}

/// Inward unit normal and length of edge i of a counter-clockwise polygon.
pub fn edge_normal(poly: &[Pt], i: usize) -> (Pt, f64) {
    let p = poly[i];
    let q = poly[(i + 1) % poly.len()];
    let d = [q[0] - p[0], q[1] - p[1]];
    let len = d[0].hypot(d[1]);
    ([-d[1] / len, d[0] / len], len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_in_half() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let half = clip(&sq, &Lin::new([1.0, 0.0], -0.5));
        assert_eq!(area(&half), 0.5);
        let none = clip(&sq, &Lin::new([1.0, 0.0], -2.0));
        assert_eq!(area(&none), 1.0);
        let empty = clip(&sq, &Lin::new([1.0, 0.0], 2.0));
        assert!(empty.is_empty());
    }

    #[test]
    fn inward_normal_of_ccw_square() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(edge_normal(&sq, 0), ([0.0, 1.0], 1.0));
        assert_eq!(edge_normal(&sq, 1).0, [-1.0, 0.0]);
    }
}
