//! Two-scale extensions `a(x, y)` of a micro coefficient: Trivial (frozen),
//! Continuous (sliding REV window) and Discrete (one window per partition
//! cell), with closed-form evaluation of `a(x, x/ε)`.
//!
//! All cube and partition memberships are half-open `[lo, hi)`, except that
//! cells touching the upper faces of Ω are closed there, so every `x ∈ Ω̄`
//! has exactly one owner.

use crate::error::{HomogError, Result};
use crate::field::MicroCoefficient;
use crate::geom::{centered_frac, DomainBox, Halton, Point, Tensor};

/// Relative slack used when comparing window sides and box containment.
const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionKind {
    Trivial,
    Continuous,
    Discrete,
}

impl ExtensionKind {
    pub fn name(self) -> &'static str {
        match self {
            ExtensionKind::Trivial => "trivial",
            ExtensionKind::Continuous => "continuous",
            ExtensionKind::Discrete => "discrete",
        }
    }
}

#[derive(Clone, Debug)]
struct UniformLayout {
    origin: Point,
    side: f64,
    counts: Vec<usize>,
}

/// Disjoint boxes `Ω_j` covering Ω, each inside its own ε̄-cube `W_j`.
#[derive(Clone, Debug)]
pub struct Partition {
    omega: DomainBox,
    cells: Vec<DomainBox>,
    windows: Vec<DomainBox>,
    uniform: Option<UniformLayout>,
}

impl Partition {
    pub fn new(omega: DomainBox, cells: Vec<DomainBox>, windows: Vec<DomainBox>) -> Result<Self> {
        if cells.len() != windows.len() || cells.is_empty() {
            return Err(HomogError::Validation(format!(
                "partition needs one window per cell, got {} cells and {} windows",
                cells.len(),
                windows.len()
            )));
        }
        Ok(Partition {
            omega,
            cells,
            windows,
            uniform: None,
        })
    }

    /// Boxes of side `eps_bar` aligned to the lower corner of Ω; the last box
    /// on each axis is clipped to Ω and its window shifted inward to stay in Ω̃.
    pub fn uniform(omega: &DomainBox, omega_tilde: &DomainBox, eps_bar: f64) -> Result<Self> {
        if !(eps_bar > 0.0) {
            return Err(HomogError::Parameter(format!("eps_bar must be positive, got {eps_bar}")));
        }
        let dim = omega.dim();
        let counts: Vec<usize> = (0..dim)
            .map(|k| ((omega.side(k) / eps_bar) - 1e-9).ceil().max(1.0) as usize)
            .collect();
        let total: usize = counts.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut windows = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut lo = omega.lower;
            let mut hi = omega.lower;
            let mut wlo = omega.lower;
            let mut whi = omega.lower;
            for k in (0..dim).rev() {
                let i = rem % counts[k];
                rem /= counts[k];
                let a = omega.lower[k] + i as f64 * eps_bar;
                let b = if i + 1 == counts[k] {
                    omega.upper[k]
                } else {
                    omega.lower[k] + (i + 1) as f64 * eps_bar
                };
                lo[k] = a;
                hi[k] = b;
                let top = (a + eps_bar).min(omega_tilde.upper[k]);
                wlo[k] = top - eps_bar;
                whi[k] = top;
            }
            cells.push(DomainBox { lower: lo, upper: hi });
            windows.push(DomainBox { lower: wlo, upper: whi });
        }
        Ok(Partition {
            omega: *omega,
            cells,
            windows,
            uniform: Some(UniformLayout {
                origin: omega.lower,
                side: eps_bar,
                counts,
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, j: usize) -> &DomainBox {
        &self.cells[j]
    }

    pub fn window(&self, j: usize) -> &DomainBox {
        &self.windows[j]
    }

    pub fn cells(&self) -> &[DomainBox] {
        &self.cells
    }

    pub fn windows(&self) -> &[DomainBox] {
        &self.windows
    }

    /// Centre `x̂ʲ` of the window `W_j`.
    pub fn center(&self, j: usize) -> Point {
        self.windows[j].center()
    }

    /// Index of the cell owning `x`, half-open with Ω's upper faces closed.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        if !self.omega.contains(x) {
            return None;
        }
        if let Some(u) = &self.uniform {
            let mut flat = 0;
            for k in 0..x.dim() {
                let i = ((x[k] - u.origin[k]) / u.side).floor();
                let i = (i.max(0.0) as usize).min(u.counts[k] - 1);
                flat = flat * u.counts[k] + i;
            }
            return Some(flat);
        }
        self.cells.iter().position(|c| {
            (0..x.dim()).all(|k| {
                (x[k] >= c.lower[k] && x[k] < c.upper[k]) || (x[k] == c.upper[k] && c.upper[k] == self.omega.upper[k])
            })
        })
    }

    pub fn validate(&self, omega_tilde: &DomainBox, eps_bar: f64) -> Result<()> {
        let omega = &self.omega;
        let mut covered = 0.0;
        for (j, (c, w)) in self.cells.iter().zip(&self.windows).enumerate() {
            if c.dim() != omega.dim() || w.dim() != omega.dim() {
                return Err(HomogError::Validation(format!("cell {j} has the wrong dimension")));
            }
            for k in 0..omega.dim() {
                if (w.side(k) - eps_bar).abs() > GEOM_TOL * eps_bar.max(1.0) {
                    return Err(HomogError::Validation(format!(
                        "window {j} has side {} on axis {k}, expected eps_bar = {eps_bar}",
                        w.side(k)
                    )));
                }
            }
            if !omega.contains_box(c, GEOM_TOL) {
                return Err(HomogError::Validation(format!("cell {j} leaves Ω")));
            }
            if !w.contains_box(c, GEOM_TOL) {
                return Err(HomogError::Validation(format!("cell {j} is not inside its window")));
            }
            if !omega_tilde.contains_box(w, GEOM_TOL) {
                return Err(HomogError::Validation(format!("window {j} leaves Ω̃")));
            }
            covered += c.volume();
        }
        for i in 0..self.cells.len() {
            for j in (i + 1)..self.cells.len() {
                let (a, b) = (&self.cells[i], &self.cells[j]);
                let overlap = (0..omega.dim()).all(|k| a.lower[k] < b.upper[k] - GEOM_TOL && b.lower[k] < a.upper[k] - GEOM_TOL);
                if overlap {
                    return Err(HomogError::Validation(format!("cells {i} and {j} overlap")));
                }
            }
        }
        if (covered - omega.volume()).abs() > 1e-9 * omega.volume() {
            return Err(HomogError::Validation(format!(
                "cells cover volume {covered}, Ω has volume {}",
                omega.volume()
            )));
        }
        Ok(())
    }
}

/// A two-scale extension `a(x, y)`, Y-periodic in `y`, with `a(x, x/ε̄) = a_M(x)`.
#[derive(Clone, Debug)]
pub struct TwoScaleCoefficient {
    kind: ExtensionKind,
    field: MicroCoefficient,
    eps_bar: f64,
    partition: Option<Partition>,
}

impl TwoScaleCoefficient {
    /// `partition` is only read for the Discrete kind; `None` builds the
    /// uniform partition.
    pub fn build(
        kind: ExtensionKind,
        field: MicroCoefficient,
        eps_bar: f64,
        partition: Option<Partition>,
    ) -> Result<Self> {
        if !(eps_bar > 0.0) || !eps_bar.is_finite() {
            return Err(HomogError::Parameter(format!("eps_bar must be positive, got {eps_bar}")));
        }
        let omega = *field.omega();
        let tilde = *field.omega_tilde();
        let partition = match kind {
            ExtensionKind::Trivial => None,
            ExtensionKind::Continuous => {
                if eps_bar >= omega.min_side() {
                    return Err(HomogError::Construction(format!(
                        "eps_bar = {eps_bar} must be below the smallest side of Ω ({})",
                        omega.min_side()
                    )));
                }
                let need = 0.5 * eps_bar;
                for k in 0..omega.dim() {
                    let margin = (omega.lower[k] - tilde.lower[k]).min(tilde.upper[k] - omega.upper[k]);
                    if margin < need * (1.0 - GEOM_TOL) {
                        return Err(HomogError::Construction(format!(
                            "Ω̃ margin {margin} on axis {k} is below eps_bar/2 = {need}"
                        )));
                    }
                }
                None
            }
            ExtensionKind::Discrete => {
                let p = match partition {
                    Some(p) => p,
                    None => {
                        if eps_bar >= omega.min_side() {
                            return Err(HomogError::Construction(format!(
                                "eps_bar = {eps_bar} must be below the smallest side of Ω ({}) for the uniform partition",
                                omega.min_side()
                            )));
                        }
                        Partition::uniform(&omega, &tilde, eps_bar)?
                    }
                };
                if p.omega != omega {
                    return Err(HomogError::Validation("partition was built for a different Ω".into()));
                }
                p.validate(&tilde, eps_bar).map_err(|e| match e {
                    HomogError::Validation(m) if m.contains("leaves Ω̃") => HomogError::Construction(m),
                    other => other,
                })?;
                Some(p)
            }
        };
        Ok(TwoScaleCoefficient {
            kind,
            field,
            eps_bar,
            partition,
        })
    }

    pub fn trivial(field: MicroCoefficient) -> Result<Self> {
        let eps = field.omega().min_side();
        Self::build(ExtensionKind::Trivial, field, eps, None)
    }

    pub fn continuous(field: MicroCoefficient, eps_bar: f64) -> Result<Self> {
        Self::build(ExtensionKind::Continuous, field, eps_bar, None)
    }

    pub fn discrete(field: MicroCoefficient, eps_bar: f64, partition: Option<Partition>) -> Result<Self> {
        Self::build(ExtensionKind::Discrete, field, eps_bar, partition)
    }

    /// Same construction applied to another field on the same domains.
    pub fn rebuild_with(&self, field: MicroCoefficient) -> Result<Self> {
        Self::build(self.kind, field, self.eps_bar, self.partition.clone())
    }

    pub fn kind(&self) -> ExtensionKind {
        self.kind
    }

    pub fn field(&self) -> &MicroCoefficient {
        &self.field
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_bar
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn omega(&self) -> &DomainBox {
        self.field.omega()
    }

    fn partition_index(&self, x: &Point) -> usize {
        // x has been checked against Ω̄ and the partition covers Ω̄
        self.partition
            .as_ref()
            .and_then(|p| p.locate(x))
            .expect("partition covers the closed domain")
    }

    /// Window centre whose periodisation defines `a(x, ·)`.
    fn anchor(&self, x: &Point) -> Point {
        match self.kind {
            ExtensionKind::Discrete => self.partition.as_ref().unwrap().center(self.partition_index(x)),
            _ => *x,
        }
    }

    /// Lower corner, in `y`, of the unit cell aligned with the grid on which
    /// `a(x, ·)` is pieced together from the window. No cell of a mesh on
    /// `[o, o + 1)^d` straddles that grid.
    pub fn cell_origin(&self, x: &Point) -> Result<Point> {
        self.omega().check(x, "macroscopic point")?;
        Ok(match self.kind {
            ExtensionKind::Trivial => Point::splat(self.dim(), 0.0),
            _ => self.anchor(x).map(|_, v| v / self.eps_bar - 0.5),
        })
    }

    /// `a(x, y)` for `x ∈ Ω̄` and any `y`.
    pub fn eval_xy(&self, x: &Point, y: &Point) -> Result<Tensor> {
        self.omega().check(x, "macroscopic point")?;
        if y.dim() != self.dim() {
            return Err(HomogError::Consistency("y has the wrong dimension".into()));
        }
        Ok(self.eval_xy_unchecked(x, y))
    }

    pub(crate) fn eval_xy_unchecked(&self, x: &Point, y: &Point) -> Tensor {
        match self.kind {
            ExtensionKind::Trivial => self.field.eval_clamped(x),
            _ => {
                let anchor = self.anchor(x);
                let eb = self.eps_bar;
                // z = ε̄ (y - m) with m chosen so that z lies in the window
                let z = y.map(|k, v| {
                    let yr = v - v.floor();
                    let m = (yr - anchor[k] / eb + 0.5).floor();
                    eb * (yr - m)
                });
                self.field.eval_clamped(&z)
            }
        }
    }

    /// `a(x, x/ε)` through the closed-form cube representation.
    pub fn eval_eps(&self, x: &Point, eps: f64) -> Result<Tensor> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(HomogError::Parameter(format!("eps must be positive, got {eps}")));
        }
        self.omega().check(x, "macroscopic point")?;
        Ok(self.eval_eps_unchecked(x, eps))
    }

    pub(crate) fn eval_eps_unchecked(&self, x: &Point, eps: f64) -> Tensor {
        self.field.eval_clamped(&self.eps_point(x, eps))
    }

    /// The point of Ω̃ whose `a_M` value is `a(x, x/ε)`.
    pub fn eps_point(&self, x: &Point, eps: f64) -> Point {
        let eb = self.eps_bar;
        if eps == eb || self.kind == ExtensionKind::Trivial {
            return *x;
        }
        match self.kind {
            ExtensionKind::Continuous => {
                // cubes of side Δ = ε ε̄ / |ε̄ - ε| centred at (ε ε̄ / (ε̄ - ε)) I
                let delta = eps * eb / (eb - eps).abs();
                x.map(|_, v| {
                    let c = nearest_center(v, 0.0, delta);
                    c + (eb / eps) * (v - c)
                })
            }
            ExtensionKind::Discrete => {
                let hat = self.anchor(x);
                x.map(|k, v| {
                    let base = hat[k] * eps / eb;
                    let c = nearest_center(v, base, eps);
                    hat[k] + (eb / eps) * (v - c)
                })
            }
            ExtensionKind::Trivial => unreachable!(),
        }
    }

    /// The REV window `W(x)` (Continuous, Trivial) or `W_{j(x)}` (Discrete).
    pub fn rev_window(&self, x: &Point) -> Result<DomainBox> {
        self.omega().check(x, "macroscopic point")?;
        Ok(match self.kind {
            ExtensionKind::Discrete => *self.partition.as_ref().unwrap().window(self.partition_index(x)),
            _ => DomainBox::cube(x, self.eps_bar),
        })
    }

    /// Cube boundaries of the representation of `a(x, x/ε)` along `axis`
    /// inside Ω (including partition faces for Discrete).
    pub fn eps_breakpoints(&self, eps: f64, axis: usize) -> Vec<f64> {
        let omega = self.omega();
        let (a, b) = (omega.lower[axis], omega.upper[axis]);
        let eb = self.eps_bar;
        let mut out = Vec::new();
        let push_lattice = |base: f64, step: f64, lo: f64, hi: f64, out: &mut Vec<f64>| {
            let i0 = ((lo - base) / step - 0.5).floor() as i64;
            let i1 = ((hi - base) / step + 0.5).ceil() as i64;
            for i in i0..=i1 {
                let t = base + (i as f64 + 0.5) * step;
                if t > lo && t < hi {
                    out.push(t);
                }
            }
        };
        match self.kind {
            ExtensionKind::Trivial => {}
            _ if eps == eb => {
                if let Some(p) = &self.partition {
                    for c in p.cells() {
                        out.push(c.lower[axis]);
                        out.push(c.upper[axis]);
                    }
                }
            }
            ExtensionKind::Continuous => {
                let delta = eps * eb / (eb - eps).abs();
                push_lattice(0.0, delta, a, b, &mut out);
            }
            ExtensionKind::Discrete => {
                let p = self.partition.as_ref().unwrap();
                for j in 0..p.len() {
                    let c = p.cell(j);
                    out.push(c.lower[axis]);
                    out.push(c.upper[axis]);
                    let base = p.center(j)[axis] * eps / eb;
                    push_lattice(base, eps, c.lower[axis], c.upper[axis], &mut out);
                }
            }
        }
        out.retain(|t| *t > a && *t < b);
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup();
        out
    }

    /// Max Frobenius deviation of `a(x, x/ε̄)` from `a_M(x)` over quasi-random
    /// points of Ω. Zero by construction.
    pub fn verify_identity(&self, n_points: usize, seed: u64) -> f64 {
        let omega = *self.omega();
        Halton::new(self.dim(), seed.wrapping_mul(7919))
            .take(n_points.max(1))
            .map(|t| {
                let x = omega.lower.map(|k, lo| lo + t[k] * omega.side(k));
                let exact = self.field.eval_clamped(&x);
                self.eval_eps_unchecked(&x, self.eps_bar).sub(&exact).frobenius()
            })
            .fold(0.0, f64::max)
    }
}

/// Centre of the half-open cell `[c - step/2, c + step/2)` of the lattice
/// `base + i step` that contains `v`.
#[inline]
fn nearest_center(v: f64, base: f64, step: f64) -> f64 {
    let mut i = ((v - base) / step + 0.5).floor();
    // correct the rounded index so that membership is half-open
    loop {
        let c = base + i * step;
        if v < c - 0.5 * step {
            i -= 1.0;
        } else if v >= c + 0.5 * step {
            i += 1.0;
        } else {
            return c;
        }
    }
}

/// `a(x, y)` evaluated via the congruence `z ≡ ε̄ y (mod ε̄)` directly, by
/// centred fractional parts. Independent of [`TwoScaleCoefficient::eval_xy`]'s
/// floor bookkeeping; used as a cross-check.
pub fn congruent_point(center: &Point, y: &Point, eps_bar: f64) -> Point {
    center.map(|k, c| c + eps_bar * centered_frac(y[k] - c / eps_bar))
}
