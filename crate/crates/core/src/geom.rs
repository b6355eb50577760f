//! Small fixed-capacity points, tensors and axis-aligned boxes.
//!
//! The toolkit is dimension-generic up to [`MAX_DIM`], but everything is
//! exercised for `d = 1` and `d = 2`. Points and tensors are `Copy` so that
//! evaluators can be called in tight quadrature loops without allocating.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{HomogError, Result};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "dimension {} not supported",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            dim: coords.len(),
            c,
        }
    }

    pub fn splat(dim: usize, v: f64) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        let mut c = [0.0; MAX_DIM];
        c[..dim].iter_mut().for_each(|x| *x = v);
        Point { dim, c }
    }

    pub fn x(v: f64) -> Self {
        Point::new(&[v])
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Point::new(&[x, y])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Point {
        let mut out = *self;
        for k in 0..self.dim {
            out.c[k] = f(k, self.c[k]);
        }
        out
    }

    pub fn zip(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        debug_assert_eq!(self.dim, other.dim);
        self.map(|k, v| f(v, other.c[k]))
    }

    pub fn add(&self, other: &Point) -> Point {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Point {
        self.map(|_, v| v * s)
    }

    pub fn with(&self, k: usize, v: f64) -> Point {
        let mut out = *self;
        out.c[k] = v;
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        debug_assert!(k < self.dim);
        &self.c[k]
    }
}

impl IndexMut<usize> for Point {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        debug_assert!(k < self.dim);
        &mut self.c[k]
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// Square `d x d` matrix; used for coefficient values and averaged tensors.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Tensor {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Tensor {
            dim,
            m: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn scalar(dim: usize, v: f64) -> Self {
        let mut t = Tensor::zeros(dim);
        for k in 0..dim {
            t.m[k][k] = v;
        }
        t
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut t = Tensor::zeros(values.len());
        for (k, v) in values.iter().enumerate() {
            t.m[k][k] = *v;
        }
        t
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut t = Tensor::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len());
            t.m[i][..r.len()].copy_from_slice(r);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = f(self.m[i][j]);
            }
        }
        out
    }

    pub fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = f(self.m[i][j], other.m[i][j]);
            }
        }
        out
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip(other, |a, b| a - b)
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.entries().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Row-major entries.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).flat_map(move |i| (0..self.dim).map(move |j| self.m[i][j]))
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.m[i][j] == 0.0))
    }

    /// `Some(v)` when the tensor is exactly `v * I`.
    pub fn as_isotropic(&self) -> Option<f64> {
        let v = self.m[0][0];
        if self.is_diagonal() && (1..self.dim).all(|k| self.m[k][k] == v) {
            Some(v)
        } else {
            None
        }
    }

    pub fn apply(&self, xi: &[f64]) -> Point {
        let mut out = Point::splat(self.dim, 0.0);
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.m[i][j] * xi[j]).sum();
        }
        out
    }

    pub fn quadratic(&self, xi: &[f64]) -> f64 {
        let ax = self.apply(xi);
        (0..self.dim).map(|i| xi[i] * ax[i]).sum()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..d {
            for j in 0..d {
                a[i][j] = 0.5 * (self.m[i][j] + self.m[j][i]);
            }
        }
        // cyclic Jacobi; d <= 3 so a handful of sweeps is plenty
        for _ in 0..50 {
            let off: f64 = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..d).map(|k| a[k][k]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| self.m[i][..self.dim].to_vec())
            .collect();
        write!(f, "{rows:?}")
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DomainBox {
    pub lower: Point,
    pub upper: Point,
}

impl DomainBox {
    pub fn new(lower: Point, upper: Point) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(HomogError::Parameter(format!(
                "box corners have dimensions {} and {}",
                lower.dim(),
                upper.dim()
            )));
        }
        for k in 0..lower.dim() {
            if !(lower[k] < upper[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(HomogError::Parameter(format!(
                    "box axis {k}: lower {} must be below upper {}",
                    lower[k], upper[k]
                )));
            }
        }
        Ok(DomainBox { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        DomainBox {
            lower: Point::splat(dim, 0.0),
            upper: Point::splat(dim, 1.0),
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        DomainBox::new(Point::x(lo), Point::x(hi))
    }

    /// Cube of side `side` centred at `center`.
    pub fn cube(center: &Point, side: f64) -> Self {
        DomainBox {
            lower: center.map(|_, v| v - 0.5 * side),
            upper: center.map(|_, v| v + 0.5 * side),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn side(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).product()
    }

    pub fn center(&self) -> Point {
        self.lower.zip(&self.upper, |a, b| 0.5 * (a + b))
    }

    pub fn expand(&self, margin: f64) -> DomainBox {
        DomainBox {
            lower: self.lower.map(|_, v| v - margin),
            upper: self.upper.map(|_, v| v + margin),
        }
    }

    /// Closed containment.
    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim() && (0..self.dim()).all(|k| p[k] >= self.lower[k] && p[k] <= self.upper[k])
    }

    /// Closed containment with an absolute slack per axis.
    pub fn contains_with(&self, p: &Point, slack: f64) -> bool {
        p.dim() == self.dim()
            && (0..self.dim()).all(|k| p[k] >= self.lower[k] - slack && p[k] <= self.upper[k] + slack)
    }

    pub fn contains_box(&self, other: &DomainBox, slack: f64) -> bool {
        self.contains_with(&other.lower, slack) && self.contains_with(&other.upper, slack)
    }

    /// Half-open membership `[lower, upper)` per axis.
    pub fn contains_half_open(&self, p: &Point) -> bool {
        (0..self.dim()).all(|k| p[k] >= self.lower[k] && p[k] < self.upper[k])
    }

    /// Nearest point of the closed box.
    pub fn clamp(&self, p: &Point) -> Point {
        p.map(|k, v| v.clamp(self.lower[k], self.upper[k]))
    }

    /// Error naming the first coordinate of `p` outside the closed box.
    pub fn check(&self, p: &Point, what: &str) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(HomogError::Consistency(format!(
                "{what}: point of dimension {} in a {}-dimensional domain",
                p.dim(),
                self.dim()
            )));
        }
        for k in 0..self.dim() {
            let v = p[k];
            if !(v >= self.lower[k] && v <= self.upper[k]) {
                return Err(HomogError::Domain {
                    what: what.to_string(),
                    axis: k,
                    value: v,
                    lower: self.lower[k],
                    upper: self.upper[k],
                });
            }
        }
        Ok(())
    }
}

/// Halton sequence in `[0,1)^d` (bases 2, 3, 5).
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    const BASES: [u64; MAX_DIM] = [2, 3, 5];

    /// `skip` selects the starting index so a seed gives a reproducible but
    /// distinct point set.
    pub fn new(dim: usize, skip: u64) -> Self {
        Halton {
            dim,
            index: skip + 1,
        }
    }

    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let inv = 1.0 / base as f64;
        let mut f = inv;
        let mut r = 0.0;
        while i > 0 {
            r += f * (i % base) as f64;
            i /= base;
            f *= inv;
        }
        r
    }
}

impl Iterator for Halton {
    type Item = Point;
    fn next(&mut self) -> Option<Point> {
        let i = self.index;
        self.index += 1;
        let mut c = [0.0; MAX_DIM];
        for (k, v) in c.iter_mut().enumerate().take(self.dim) {
            *v = Halton::radical_inverse(i, Halton::BASES[k]);
        }
        Some(Point::new(&c[..self.dim]))
    }
}

/// Centred fractional part: `t - floor(t + 1/2)`, in `[-1/2, 1/2)`.
#[inline]
pub fn centered_frac(t: f64) -> f64 {
    t - (t + 0.5).floor()
}

/// Composite midpoint nodes on `[a, b]` with breakpoints: every piece between
/// consecutive breakpoints gets its own uniform sub-intervals of length at most
/// `h`. Returns `(nodes, weights)`.
pub fn midpoint_nodes(a: f64, b: f64, breaks: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|t| *t > a && *t < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let m = (len / h - 1e-9).ceil().max(1.0) as usize;
        let sub = len / m as f64;
        for i in 0..m {
            nodes.push(w[0] + (i as f64 + 0.5) * sub);
            weights.push(sub);
        }
    }
    (nodes, weights)
}
