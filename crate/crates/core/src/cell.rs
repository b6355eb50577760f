//! Periodic unit-cell problems and the averaged tensor `A(x)`.
//!
//! The cell problem is discretised by cell-centred finite volumes on an
//! `n^d` grid with harmonic face coefficients. For the Y-form the grid is laid
//! on `[o, o + 1)^d`, where `o` is the extension's cell origin at `x`, so that
//! no mesh cell straddles a seam of the periodised window and the Y-form and
//! W-form produce the same discrete system up to the change of variables
//! `z = ε̄ y`.

use crate::error::{HomogError, Result};
use crate::extension::TwoScaleCoefficient;
use crate::field::MicroCoefficient;
use crate::geom::{DomainBox, Point, Tensor, MAX_DIM};

/// Off-diagonal entries below this (relative) are treated as zero.
const DIAG_TOL: f64 = 1e-14;

/// Restarts of CG after the recurrence residual drifts from the true one.
const MAX_RESTARTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitCellMesh {
    n: usize,
    dim: usize,
}

impl UnitCellMesh {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        if n < 2 {
            return Err(HomogError::Parameter(format!("cell mesh needs n >= 2, got {n}")));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(HomogError::Parameter(format!("unsupported dimension {dim}")));
        }
        Ok(UnitCellMesh { n, dim })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Multi-index of a flat cell index (last axis fastest).
    pub fn index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim).rev() {
            idx[k] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Cell centres of a grid of spacing `h` starting at `origin`.
    pub fn centers(&self, origin: &Point, h: f64) -> Vec<Point> {
        (0..self.len())
            .map(|c| {
                let idx = self.index(c);
                origin.map(|k, o| o + (idx[k] as f64 + 0.5) * h)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellMethod {
    YForm,
    WForm,
    Harmonic1d,
    /// `A(x) = a_M(x)`: the cell problem of the Trivial extension is solved
    /// by `w ≡ 0`.
    Micro,
}

impl CellMethod {
    pub fn name(self) -> &'static str {
        match self {
            CellMethod::YForm => "y-form",
            CellMethod::WForm => "w-form",
            CellMethod::Harmonic1d => "harmonic-1d",
            CellMethod::Micro => "micro",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AveragedTensor {
    pub a: Tensor,
    pub x: Point,
    pub method: CellMethod,
    /// Per-axis harmonic means of the sampled coefficient (Reuss bound).
    pub harmonic: Vec<f64>,
    /// Per-axis arithmetic means of the sampled coefficient (Voigt bound).
    pub arithmetic: Vec<f64>,
}

impl AveragedTensor {
    /// Largest violation of `harmonic_k <= A_kk <= arithmetic_k`, 0 if none.
    pub fn sandwich_violation(&self) -> f64 {
        (0..self.a.dim())
            .map(|k| {
                let v = self.a.get(k, k);
                (self.harmonic[k] - v).max(v - self.arithmetic[k]).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.a.frobenius();
        if n == 0.0 {
            0.0
        } else {
            self.a.sub(&self.a.transpose()).frobenius() / n
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellSolution {
    pub x: Point,
    pub mesh: UnitCellMesh,
    /// Lower corner of the fundamental domain the mesh covers.
    pub origin: Point,
    /// Zero-mean corrector values at cell centres, one vector per direction.
    pub w: Vec<Vec<f64>>,
    /// Relative residual of the last linear solve.
    pub residual: f64,
    pub iterations: usize,
    system: CellSystem,
}

impl CellSolution {
    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    /// Cellwise gradient `∇_y w_j` at cell `c`, by periodic central differences.
    pub fn gradient(&self, j: usize, c: usize) -> Point {
        let w = &self.w[j];
        let h = self.mesh.spacing();
        Point::new(
            &(0..self.dim())
                .map(|k| (w[self.system.plus[k][c]] - w[self.system.minus[k][c]]) / (2.0 * h))
                .collect::<Vec<_>>(),
        )
    }

    /// `w_j(y)` for any `y`, by periodic multilinear interpolation between
    /// cell centres.
    pub fn corrector_value(&self, j: usize, y: &Point) -> f64 {
        let n = self.mesh.n();
        let dim = self.dim();
        let w = &self.w[j];
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..dim {
            // position in units of cells, measured from the first cell centre
            let t = (y[k] - self.origin[k]) * n as f64 - 0.5;
            let t = t - (t / n as f64).floor() * n as f64;
            let i = (t.floor() as usize).min(n - 1);
            base[k] = i;
            frac[k] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut sum = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut idx = [0usize; MAX_DIM];
            for k in 0..dim {
                let up = (corner >> k) & 1 == 1;
                idx[k] = if up { (base[k] + 1) % n } else { base[k] };
                weight *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if weight != 0.0 {
                sum += weight * w[self.mesh.flat(&idx)];
            }
        }
        sum
    }

    /// `B(w_j, w_j) - L_j(w_j)` relative to `B(w_j, w_j)`; vanishes up to the
    /// solver residual.
    pub fn energy_gap(&self, j: usize) -> f64 {
        let (b, l) = self.system.energy_pair(&self.w[j], j, 1.0);
        if b == 0.0 {
            l.abs()
        } else {
            (b - l).abs() / b
        }
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.w[j].iter().sum::<f64>() / self.w[j].len() as f64
    }
}

/// Discrete periodic operator `-div(κ ∇·)` on a uniform grid of spacing `h`.
#[derive(Clone, Debug)]
struct CellSystem {
    mesh: UnitCellMesh,
    h: f64,
    kappa: Vec<[f64; MAX_DIM]>,
    /// `faces[k][c]`: coefficient on the face between `c` and `c + e_k`.
    faces: Vec<Vec<f64>>,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
    diag: Vec<f64>,
}

fn harmonic2(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl CellSystem {
    fn new(mesh: UnitCellMesh, h: f64, kappa: Vec<[f64; MAX_DIM]>) -> Self {
        let dim = mesh.dim();
        let n = mesh.n();
        let len = mesh.len();
        let mut plus = vec![vec![0; len]; dim];
        let mut minus = vec![vec![0; len]; dim];
        for c in 0..len {
            let idx = mesh.index(c);
            for k in 0..dim {
                let mut p = idx;
                p[k] = (idx[k] + 1) % n;
                plus[k][c] = mesh.flat(&p);
                let mut m = idx;
                m[k] = (idx[k] + n - 1) % n;
                minus[k][c] = mesh.flat(&m);
            }
        }
        let faces: Vec<Vec<f64>> = (0..dim)
            .map(|k| (0..len).map(|c| harmonic2(kappa[c][k], kappa[plus[k][c]][k])).collect())
            .collect();
        let inv_h2 = 1.0 / (h * h);
        let diag = (0..len)
            .map(|c| (0..dim).map(|k| faces[k][c] + faces[k][minus[k][c]]).sum::<f64>() * inv_h2)
            .collect();
        CellSystem {
            mesh,
            h,
            kappa,
            faces,
            plus,
            minus,
            diag,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let inv_h2 = 1.0 / (self.h * self.h);
        for c in 0..x.len() {
            let mut s = 0.0;
            for k in 0..self.mesh.dim() {
                let p = self.plus[k][c];
                let m = self.minus[k][c];
                s += self.faces[k][c] * (x[c] - x[p]) + self.faces[k][m] * (x[c] - x[m]);
            }
            y[c] = s * inv_h2;
        }
    }

    /// Right side for direction `j`, with the gradient scale `g` of the
    /// flux `κ (g ∇w + e_j)`.
    fn rhs(&self, j: usize, g: f64) -> Vec<f64> {
        let f = &self.faces[j];
        (0..self.mesh.len())
            .map(|c| (f[c] - f[self.minus[j][c]]) / (self.h * g))
            .collect()
    }

    fn relative_residual(&self, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            r
        } else {
            r / bnorm
        }
    }

    /// Solve for the corrector in direction `j`; returns zero-mean values,
    /// relative residual and iteration count.
    fn solve(&self, j: usize, g: f64, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
        let b = self.rhs(j, g);
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let len = b.len();
        if bnorm == 0.0 {
            return Ok((vec![0.0; len], 0.0, 0));
        }
        let (mut w, iters) = if self.mesh.dim() == 1 {
            (self.solve_line(j, g), 0)
        } else {
            self.pcg(&b, bnorm, tol, max_iter)?
        };
        let mean = w.iter().sum::<f64>() / len as f64;
        for v in &mut w {
            *v -= mean;
        }
        let res = self.relative_residual(&w, &b, bnorm);
        Ok((w, res, iters))
    }

    /// Exact solution of the 1D system: the flux `κ (g w' + 1)` equals the
    /// harmonic mean of the face coefficients on every face.
    fn solve_line(&self, _j: usize, g: f64) -> Vec<f64> {
        let f = &self.faces[0];
        let len = f.len();
        let mean_inv = f.iter().map(|t| 1.0 / t).sum::<f64>() / len as f64;
        let a = 1.0 / mean_inv;
        let mut w = vec![0.0; len];
        for c in 0..len - 1 {
            w[c + 1] = w[c] + self.h * (a / f[c] - 1.0) / g;
        }
        w
    }

    /// Jacobi-preconditioned CG with unknown 0 pinned to zero.
    fn pcg(&self, b_full: &[f64], bnorm_full: f64, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        let len = b_full.len();
        let mut b = b_full.to_vec();
        b[0] = 0.0;
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(bnorm_full * 1e-300);
        let mut x = vec![0.0; len];
        let mut r = b.clone();
        let mut z = vec![0.0; len];
        let mut p = vec![0.0; len];
        let mut ap = vec![0.0; len];
        let mut total = 0;
        let mut rnorm = bnorm;
        for _restart in 0..=MAX_RESTARTS {
            for c in 1..len {
                z[c] = r[c] / self.diag[c];
            }
            z[0] = 0.0;
            p.copy_from_slice(&z);
            let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            while rnorm > tol * bnorm {
                if total >= max_iter {
                    return Err(HomogError::Numerical {
                        msg: format!("cell CG did not converge in {max_iter} iterations"),
                        residual: rnorm / bnorm,
                    });
                }
                self.apply(&p, &mut ap);
                ap[0] = 0.0;
                let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
                let alpha = rz / pap;
                for c in 1..len {
                    x[c] += alpha * p[c];
                    r[c] -= alpha * ap[c];
                    z[c] = r[c] / self.diag[c];
                }
                let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
                let beta = rz_new / rz;
                rz = rz_new;
                for c in 1..len {
                    p[c] = z[c] + beta * p[c];
                }
                rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                total += 1;
            }
            // recompute the true residual of the pinned system
            self.apply(&x, &mut ap);
            ap[0] = 0.0;
            for c in 0..len {
                r[c] = b[c] - ap[c];
            }
            r[0] = 0.0;
            rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= tol * bnorm {
                return Ok((x, total));
            }
        }
        Err(HomogError::Numerical {
            msg: "cell CG residual drifted after restarts".into(),
            residual: rnorm / bnorm,
        })
    }

    /// Mean over faces normal to `i` of `κ (g D_i w + δ_ij)`.
    fn flux_mean(&self, w: &[f64], i: usize, j: usize, g: f64) -> f64 {
        let f = &self.faces[i];
        let delta = if i == j { 1.0 } else { 0.0 };
        let s: f64 = (0..w.len())
            .map(|c| f[c] * (g * (w[self.plus[i][c]] - w[c]) / self.h + delta))
            .sum();
        s / w.len() as f64
    }

    /// `(B(w, w), L_j(w))` normalised per cell.
    fn energy_pair(&self, w: &[f64], j: usize, g: f64) -> (f64, f64) {
        let len = w.len() as f64;
        let mut bform = 0.0;
        for k in 0..self.mesh.dim() {
            for c in 0..w.len() {
                let d = g * (w[self.plus[k][c]] - w[c]) / self.h;
                bform += self.faces[k][c] * d * d;
            }
        }
        let l: f64 = (0..w.len())
            .map(|c| -self.faces[j][c] * g * (w[self.plus[j][c]] - w[c]) / self.h)
            .sum();
        (bform / len, l / len)
    }

    fn tensor(&self, w: &[Vec<f64>], g: f64) -> Tensor {
        let dim = self.mesh.dim();
        let mut a = Tensor::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a.set(i, j, self.flux_mean(&w[j], i, j, g));
            }
        }
        a
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.mesh.dim();
        let len = self.kappa.len() as f64;
        let harm = (0..dim)
            .map(|k| len / self.kappa.iter().map(|v| 1.0 / v[k]).sum::<f64>())
            .collect();
        let arith = (0..dim).map(|k| self.kappa.iter().map(|v| v[k]).sum::<f64>() / len).collect();
        (harm, arith)
    }
}

/// Diagonal of a sampled tensor, rejecting off-diagonal or non-positive values.
fn diagonal_sample(t: &Tensor, at: &Point) -> Result<[f64; MAX_DIM]> {
    let dim = t.dim();
    let scale = t.frobenius().max(f64::MIN_POSITIVE);
    let mut out = [1.0; MAX_DIM];
    for i in 0..dim {
        for j in 0..dim {
            if i != j && t.get(i, j).abs() > DIAG_TOL * scale {
                return Err(HomogError::Unsupported(format!(
                    "cell problems need a diagonal coefficient, got off-diagonal {} at {at:?}",
                    t.get(i, j)
                )));
            }
        }
        let v = t.get(i, i);
        if !(v > 0.0) || !v.is_finite() {
            return Err(HomogError::Ellipticity(format!("coefficient entry {v} at {at:?}")));
        }
        out[i] = v;
    }
    Ok(out)
}

pub fn default_max_iter(mesh: &UnitCellMesh) -> usize {
    50 * mesh.len()
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(HomogError::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn solve_system(
    system: CellSystem,
    x: Point,
    origin: Point,
    g: f64,
    tol: f64,
) -> Result<(CellSolution, Tensor)> {
    let mesh = system.mesh;
    let max_iter = default_max_iter(&mesh);
    let mut w = Vec::with_capacity(mesh.dim());
    let mut residual: f64 = 0.0;
    let mut iterations = 0;
    for j in 0..mesh.dim() {
        let (wj, res, it) = system.solve(j, g, tol, max_iter)?;
        residual = residual.max(res);
        iterations += it;
        w.push(wj);
    }
    let a = system.tensor(&w, g);
    Ok((
        CellSolution {
            x,
            mesh,
            origin,
            w,
            residual,
            iterations,
            system,
        },
        a,
    ))
}

fn sample_extension(ext: &TwoScaleCoefficient, x: &Point, mesh: &UnitCellMesh) -> Result<(Point, Vec<[f64; MAX_DIM]>)> {
    if mesh.dim() != ext.dim() {
        return Err(HomogError::Consistency(format!(
            "cell mesh has dimension {}, extension has {}",
            mesh.dim(),
            ext.dim()
        )));
    }
    let origin = ext.cell_origin(x)?;
    let kappa = mesh
        .centers(&origin, mesh.spacing())
        .iter()
        .map(|y| diagonal_sample(&ext.eval_xy_unchecked(x, y), y))
        .collect::<Result<Vec<_>>>()?;
    Ok((origin, kappa))
}

/// Periodic correctors of `a(x, ·)` on the unit cell.
pub fn solve_cell(ext: &TwoScaleCoefficient, x: &Point, mesh: &UnitCellMesh, tol: f64) -> Result<CellSolution> {
    check_tol(tol)?;
    let (origin, kappa) = sample_extension(ext, x, mesh)?;
    let system = CellSystem::new(*mesh, mesh.spacing(), kappa);
    solve_system(system, *x, origin, 1.0, tol).map(|(s, _)| s)
}

/// `A_ij = ∫_Y e_iᵀ a(x,y)(∇_y w_j + e_j) dy` from a computed cell solution.
pub fn averaged_tensor(sol: &CellSolution, ext: &TwoScaleCoefficient, x: &Point) -> Result<AveragedTensor> {
    if sol.x.as_slice() != x.as_slice() {
        return Err(HomogError::Consistency(format!(
            "cell solution was computed at {:?}, requested {x:?}",
            sol.x
        )));
    }
    let (origin, kappa) = sample_extension(ext, x, &sol.mesh)?;
    if origin.as_slice() != sol.origin.as_slice() || kappa != sol.system.kappa {
        return Err(HomogError::Consistency(
            "cell solution does not belong to this extension".into(),
        ));
    }
    let (harmonic, arithmetic) = sol.system.bounds();
    Ok(AveragedTensor {
        a: sol.system.tensor(&sol.w, 1.0),
        x: *x,
        method: CellMethod::YForm,
        harmonic,
        arithmetic,
    })
}

/// Cell solve and averaging in one step.
pub fn cell_tensor(ext: &TwoScaleCoefficient, x: &Point, mesh: &UnitCellMesh, tol: f64) -> Result<(CellSolution, AveragedTensor)> {
    check_tol(tol)?;
    let (origin, kappa) = sample_extension(ext, x, mesh)?;
    let system = CellSystem::new(*mesh, mesh.spacing(), kappa);
    let (harmonic, arithmetic) = system.bounds();
    let (sol, a) = solve_system(system, *x, origin, 1.0, tol)?;
    Ok((
        sol,
        AveragedTensor {
            a,
            x: *x,
            method: CellMethod::YForm,
            harmonic,
            arithmetic,
        },
    ))
}

/// The ε̄-periodic problem solved directly on the window `W(x)` of `a_M`.
pub fn averaged_tensor_from_window(
    field: &MicroCoefficient,
    x: &Point,
    eps_bar: f64,
    mesh: &UnitCellMesh,
    tol: f64,
) -> Result<AveragedTensor> {
    check_tol(tol)?;
    if !(eps_bar > 0.0) {
        return Err(HomogError::Parameter(format!("eps_bar must be positive, got {eps_bar}")));
    }
    if mesh.dim() != field.dim() {
        return Err(HomogError::Consistency("cell mesh and field dimensions differ".into()));
    }
    let window = DomainBox::cube(x, eps_bar);
    window_tensor(field, &window, mesh, tol, *x)
}

pub(crate) fn window_tensor(
    field: &MicroCoefficient,
    window: &DomainBox,
    mesh: &UnitCellMesh,
    tol: f64,
    x: Point,
) -> Result<AveragedTensor> {
    let tilde = field.omega_tilde();
    tilde.check(&window.lower, "window corner")?;
    tilde.check(&window.upper, "window corner")?;
    let eps_bar = window.side(0);
    let h = eps_bar / mesh.n() as f64;
    let kappa = mesh
        .centers(&window.lower, h)
        .iter()
        .map(|z| diagonal_sample(&field.eval_clamped(z), z))
        .collect::<Result<Vec<_>>>()?;
    let system = CellSystem::new(*mesh, h, kappa);
    let (harmonic, arithmetic) = system.bounds();
    let origin = window.lower.scale(1.0 / eps_bar);
    let (_, a) = solve_system(system, x, origin, eps_bar, tol)?;
    Ok(AveragedTensor {
        a,
        x,
        method: CellMethod::WForm,
        harmonic,
        arithmetic,
    })
}

/// Closed-form 1D cell solution from midpoint samples of `a` over one period.
#[derive(Clone, Debug)]
pub struct Cell1d {
    pub a: f64,
    /// `w' = A/a - 1` at the samples.
    pub dw: Vec<f64>,
}

pub fn solve_cell_1d(samples: &[f64]) -> Result<Cell1d> {
    if samples.len() < 2 {
        return Err(HomogError::Parameter(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(v) = samples.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(HomogError::Ellipticity(format!("non-positive sample {v}")));
    }
    let mean_inv = samples.iter().map(|v| 1.0 / v).sum::<f64>() / samples.len() as f64;
    let a = 1.0 / mean_inv;
    Ok(Cell1d {
        a,
        dw: samples.iter().map(|v| a / v - 1.0).collect(),
    })
}

/// Midpoint samples of `f` on `quad_n` equal subintervals of `[lo, hi]`.
pub fn midpoint_samples(lo: f64, hi: f64, quad_n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = (hi - lo) / quad_n as f64;
    (0..quad_n).map(|i| f(lo + (i as f64 + 0.5) * h)).collect()
}

/// 1D harmonic-mean tensor of `a(x, ·)` from `quad_n` midpoint samples over
/// the aligned unit cell.
pub fn harmonic_tensor_1d(ext: &TwoScaleCoefficient, x: &Point, quad_n: usize) -> Result<AveragedTensor> {
    if ext.dim() != 1 {
        return Err(HomogError::Unsupported("harmonic closed form is one-dimensional".into()));
    }
    let o = ext.cell_origin(x)?[0];
    let samples = midpoint_samples(o, o + 1.0, quad_n, |y| ext.eval_xy_unchecked(x, &Point::x(y)).get(0, 0));
    let sol = solve_cell_1d(&samples)?;
    let arith = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(AveragedTensor {
        a: Tensor::scalar(1, sol.a),
        x: *x,
        method: CellMethod::Harmonic1d,
        harmonic: vec![sol.a],
        arithmetic: vec![arith],
    })
}

/// `(harmonic mean · I, arithmetic mean · I)` of a scalar field over a box.
pub fn voigt_reuss(field: &MicroCoefficient, window: &DomainBox, quad_n: usize) -> Result<(Tensor, Tensor)> {
    if !field.is_isotropic() {
        return Err(HomogError::Unsupported("Voigt-Reuss bounds need a scalar field".into()));
    }
    if quad_n == 0 {
        return Err(HomogError::Parameter("quad_n must be positive".into()));
    }
    let tilde = field.omega_tilde();
    tilde.check(&window.lower, "window corner")?;
    tilde.check(&window.upper, "window corner")?;
    let dim = field.dim();
    let total = quad_n.pow(dim as u32);
    let (mut inv, mut sum) = (0.0, 0.0);
    for flat in 0..total {
        let mut rem = flat;
        let mut z = window.lower;
        for k in (0..dim).rev() {
            let i = rem % quad_n;
            rem /= quad_n;
            z[k] = window.lower[k] + (i as f64 + 0.5) * window.side(k) / quad_n as f64;
        }
        let v = field.scalar_clamped(&z);
        if !(v > 0.0) {
            return Err(HomogError::Ellipticity(format!("value {v} at {z:?}")));
        }
        inv += 1.0 / v;
        sum += v;
    }
    let n = total as f64;
    Ok((Tensor::scalar(dim, n / inv), Tensor::scalar(dim, sum / n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{synthesize, FieldKind, FieldSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn field(kind: FieldKind, dim: usize) -> MicroCoefficient {
        synthesize(&FieldSpec {
            kind,
            omega: DomainBox::unit(dim),
            margin: 0.05,
        })
        .unwrap()
    }

    #[test]
    fn closed_form_1d() {
        assert_eq!(solve_cell_1d(&[3.0; 8]).unwrap().a, 3.0);
        let s = midpoint_samples(0.0, 1.0, 4096, |t| 2.0 + (2.0 * PI * t).sin());
        assert!((solve_cell_1d(&s).unwrap().a - 3f64.sqrt()).abs() < 1e-6);
        let two = solve_cell_1d(&[1.0, 4.0]).unwrap();
        assert_relative_eq!(two.a, 1.6, max_relative = 1e-15);
        let mean_dw: f64 = s.len() as f64;
        let sol = solve_cell_1d(&s).unwrap();
        assert!(sol.dw.iter().sum::<f64>().abs() / mean_dw < 1e-12);
        assert!(matches!(solve_cell_1d(&[1.0, 0.0]), Err(HomogError::Ellipticity(_))));
    }

    #[test]
    fn constant_cell_has_zero_corrector() {
        let f = field(FieldKind::Constant { value: 2.5 }, 2);
        let ext = TwoScaleCoefficient::continuous(f, 0.1).unwrap();
        let mesh = UnitCellMesh::new(16, 2).unwrap();
        let x = Point::xy(0.3, 0.6);
        let sol = solve_cell(&ext, &x, &mesh, 1e-10).unwrap();
        assert!(sol.w.iter().all(|w| w.iter().all(|v| *v == 0.0)));
        assert_eq!(sol.residual, 0.0);
        let a = averaged_tensor(&sol, &ext, &x).unwrap();
        assert_eq!(a.a, Tensor::scalar(2, 2.5));
    }

    #[test]
    fn laminate_separates() {
        let f = field(
            FieldKind::Laminate2d {
                a1: 1.0,
                a2: 4.0,
                period: 0.1,
                fraction: 0.5,
            },
            2,
        );
        let ext = TwoScaleCoefficient::continuous(f, 0.1).unwrap();
        let mesh = UnitCellMesh::new(32, 2).unwrap();
        let x = Point::xy(0.5, 0.5);
        let (sol, a) = cell_tensor(&ext, &x, &mesh, 1e-12).unwrap();
        assert!(sol.w[1].iter().all(|v| v.abs() < 1e-10));
        assert_relative_eq!(a.a.get(0, 0), 1.6, max_relative = 1e-9);
        assert_relative_eq!(a.a.get(1, 1), 2.5, max_relative = 1e-12);
        assert!(a.a.get(0, 1).abs() < 1e-9);
        // w₁ depends on y₁ only
        let n = mesh.n();
        for c in 0..mesh.len() {
            let idx = mesh.index(c);
            let first = sol.w[0][mesh.flat(&[idx[0], 0])];
            assert!((sol.w[0][c] - first).abs() < 1e-10);
            assert!(idx[1] < n);
        }
    }

    #[test]
    fn y_and_w_forms_agree() {
        let f = field(
            FieldKind::SeededRandom {
                seed: 7,
                contrast: 10.0,
                cell: 0.0125,
            },
            2,
        );
        let ext = TwoScaleCoefficient::continuous(f.clone(), 0.1).unwrap();
        let mesh = UnitCellMesh::new(32, 2).unwrap();
        let x = Point::xy(0.41, 0.73);
        let (_, ya) = cell_tensor(&ext, &x, &mesh, 1e-12).unwrap();
        let wa = averaged_tensor_from_window(&f, &x, 0.1, &mesh, 1e-12).unwrap();
        let rel = ya.a.sub(&wa.a).frobenius() / ya.a.frobenius();
        assert!(rel < 1e-10, "{rel}");
        assert!(ya.sandwich_violation() < 1e-8);
        assert!(ya.asymmetry() < 1e-8);
    }

    #[test]
    fn window_escaping_domain_is_rejected() {
        let f = field(FieldKind::Constant { value: 1.0 }, 1);
        let mesh = UnitCellMesh::new(8, 1).unwrap();
        let r = averaged_tensor_from_window(&f, &Point::x(0.0), 0.2, &mesh, 1e-10);
        assert!(matches!(r, Err(HomogError::Domain { .. })));
    }

    #[test]
    fn voigt_reuss_examples() {
        let f = field(
            FieldKind::PeriodicSinusoid {
                mean: 2.0,
                amplitude: 1.0,
                period: 0.1,
            },
            1,
        );
        let (h, a) = voigt_reuss(&f, &DomainBox::interval(0.3, 0.4).unwrap(), 4096).unwrap();
        assert!((h.get(0, 0) - 3f64.sqrt()).abs() < 1e-6);
        assert!((a.get(0, 0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn corrector_interpolation_hits_centres() {
        let f = field(
            FieldKind::PeriodicSinusoid {
                mean: 2.0,
                amplitude: 1.0,
                period: 0.1,
            },
            2,
        );
        let ext = TwoScaleCoefficient::continuous(f, 0.1).unwrap();
        let mesh = UnitCellMesh::new(16, 2).unwrap();
        let sol = solve_cell(&ext, &Point::xy(0.5, 0.5), &mesh, 1e-12).unwrap();
        let centres = mesh.centers(&sol.origin, mesh.spacing());
        for (c, y) in centres.iter().enumerate() {
            assert!((sol.corrector_value(0, y) - sol.w[0][c]).abs() < 1e-12);
            // periodic
            let shifted = y.add(&Point::xy(3.0, -2.0));
            assert!((sol.corrector_value(0, &shifted) - sol.w[0][c]).abs() < 1e-10);
        }
        assert!(sol.mean(0).abs() < 1e-12);
        assert!(sol.energy_gap(0) < 1e-8);
    }
}
