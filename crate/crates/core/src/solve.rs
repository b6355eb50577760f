//! Dirichlet problems `-div(a ∇u) = f`, `u = 0` on ∂Ω: the semi-analytic 1D
//! solution, finite-volume/Q1 solves on uniform meshes, the first-order
//! corrector and error norms.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::cell::{solve_cell, CellSolution};
use crate::error::{HomogError, Result};
use crate::exec::Exec;
use crate::extension::{ExtensionKind, TwoScaleCoefficient};
use crate::field::MicroCoefficient;
use crate::geom::{DomainBox, Point, Tensor, MAX_DIM};
use crate::linalg::{pcg, thomas, CsrBuilder};
use crate::upscale::{write_csv, AveragedCoefficientField, CellOptions, SampleLattice};

/// Eigenvalue ratio above which a conditioning warning is emitted.
pub const ANISOTROPY_WARN: f64 = 1e3;

pub type Source = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// `amplitude · Π_k sin(frequency · x_k)`.
pub fn sine_source(amplitude: f64, frequency: f64) -> Source {
    Arc::new(move |x: &Point| amplitude * x.as_slice().iter().map(|v| (frequency * v).sin()).product::<f64>())
}

/// Uniform mesh with `n` intervals per axis; nodes include ∂Ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh {
    omega: DomainBox,
    n: usize,
}

impl Mesh {
    pub fn new(omega: DomainBox, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(HomogError::Parameter(format!("mesh needs at least 4 intervals, got {n}")));
        }
        Ok(Mesh { omega, n })
    }

    pub fn omega(&self) -> &DomainBox {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.omega.side(k) / self.n as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        (self.n + 1).pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % (self.n + 1);
            flat /= self.n + 1;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx[..self.dim()].iter().fold(0, |acc, &i| acc * (self.n + 1) + i)
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        if i == self.n {
            self.omega.upper[k]
        } else {
            self.omega.lower[k] + i as f64 * self.spacing(k)
        }
    }

    pub fn node(&self, flat: usize) -> Point {
        let idx = self.index(flat);
        self.omega.lower.map(|k, _| self.coord(k, idx[k]))
    }

    pub fn nodes(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.index(flat);
        (0..self.dim()).any(|k| idx[k] == 0 || idx[k] == self.n)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub mesh: Mesh,
    pub values: Vec<f64>,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl Solution {
    pub fn zeros(mesh: Mesh) -> Self {
        Solution {
            mesh,
            values: vec![0.0; mesh.len()],
            residual: 0.0,
            warnings: Vec::new(),
        }
    }

    /// Writes `x..., u`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let dim = self.mesh.dim();
        let mut header: Vec<String> = (1..=dim).map(|k| if dim == 1 { "x".into() } else { format!("x{k}") }).collect();
        header.push("u".into());
        let rows: Vec<Vec<f64>> = (0..self.mesh.len())
            .map(|i| {
                let mut r = self.mesh.node(i).as_slice().to_vec();
                r.push(self.values[i]);
                r
            })
            .collect();
        write_csv(path, &header, &rows)
    }

    /// Gradient at a node: central differences inside, one-sided on ∂Ω.
    pub fn gradient(&self, flat: usize) -> Point {
        let mesh = &self.mesh;
        let idx = mesh.index(flat);
        let mut g = Point::splat(mesh.dim(), 0.0);
        for k in 0..mesh.dim() {
            let mut lo = idx;
            let mut hi = idx;
            if idx[k] > 0 {
                lo[k] -= 1;
            }
            if idx[k] < mesh.n() {
                hi[k] += 1;
            }
            let span = (hi[k] - lo[k]) as f64 * mesh.spacing(k);
            g[k] = (self.values[mesh.flat(&hi)] - self.values[mesh.flat(&lo)]) / span;
        }
        g
    }

    pub fn max_abs_diff(&self, other: &Solution) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// The coefficient of a Dirichlet problem.
#[derive(Clone)]
pub enum Coefficient {
    Micro(MicroCoefficient),
    /// `a(x, x/ε)` of an extension.
    Oscillating { ext: TwoScaleCoefficient, eps: f64 },
    Averaged(AveragedCoefficientField),
    Function {
        omega: DomainBox,
        eval: Arc<dyn Fn(&Point) -> Tensor + Send + Sync>,
    },
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Micro(m) => write!(f, "Micro({})", m.label()),
            Coefficient::Oscillating { ext, eps } => write!(f, "Oscillating({}, eps={eps})", ext.kind().name()),
            Coefficient::Averaged(a) => write!(f, "Averaged({})", a.mode().name()),
            Coefficient::Function { .. } => write!(f, "Function"),
        }
    }
}

impl Coefficient {
    pub fn scalar_fn(omega: DomainBox, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        let dim = omega.dim();
        Coefficient::Function {
            omega,
            eval: Arc::new(move |x| Tensor::scalar(dim, f(x))),
        }
    }

    pub fn omega(&self) -> &DomainBox {
        match self {
            Coefficient::Micro(m) => m.omega(),
            Coefficient::Oscillating { ext, .. } => ext.omega(),
            Coefficient::Averaged(a) => a.omega(),
            Coefficient::Function { omega, .. } => omega,
        }
    }

    /// Value at `x ∈ Ω̄`; points off Ω̄ by rounding are clamped.
    pub fn eval(&self, x: &Point) -> Result<Tensor> {
        let x = self.omega().clamp(x);
        match self {
            Coefficient::Micro(m) => Ok(m.eval_clamped(&x)),
            Coefficient::Oscillating { ext, eps } => Ok(ext.eval_eps_unchecked(&x, *eps)),
            Coefficient::Averaged(a) => a.eval_unchecked(&x),
            Coefficient::Function { eval, .. } => Ok(eval(&x)),
        }
    }

    fn entry(&self, x: &Point, k: usize) -> Result<f64> {
        let v = self.eval(x)?.get(k, k);
        if !(v > 0.0) || !v.is_finite() {
            return Err(HomogError::Ellipticity(format!("coefficient {v} at {x:?}")));
        }
        Ok(v)
    }

    fn scale(&self) -> Option<f64> {
        match self {
            Coefficient::Oscillating { ext, eps } if ext.kind() != ExtensionKind::Trivial => Some(*eps),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub coefficient: Coefficient,
    pub source: SourceFn,
}

/// Debug-printable wrapper of a source term.
#[derive(Clone)]
pub struct SourceFn(pub Source);

impl fmt::Debug for SourceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SourceFn")
    }
}

impl DirichletProblem {
    pub fn new(coefficient: Coefficient, source: Source) -> Self {
        DirichletProblem {
            coefficient,
            source: SourceFn(source),
        }
    }

    fn f(&self, x: &Point) -> f64 {
        (self.source.0)(x)
    }
}

/// `u(x) = ∫_lo^x (C - F(t)) / a(t) dt`, `F = ∫ f`, with all integrals by the
/// composite midpoint rule on `quad_n` intervals.
pub fn solve_fine_1d(omega: &DomainBox, a: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64, quad_n: usize) -> Result<Solution> {
    if omega.dim() != 1 {
        return Err(HomogError::Unsupported("semi-analytic solve is one-dimensional".into()));
    }
    let mesh = Mesh::new(*omega, quad_n)?;
    let h = mesh.spacing(0);
    let n = quad_n;
    let mut f_nodes = vec![0.0; n + 1];
    let mut inv_a = vec![0.0; n];
    for i in 0..n {
        let t = omega.lower[0] + (i as f64 + 0.5) * h;
        let av = a(t);
        if !(av > 0.0) || !av.is_finite() {
            return Err(HomogError::Ellipticity(format!("coefficient {av} at {t}")));
        }
        inv_a[i] = 1.0 / av;
        f_nodes[i + 1] = f_nodes[i] + h * f(t);
    }
    let f_mid: Vec<f64> = (0..n).map(|i| 0.5 * (f_nodes[i] + f_nodes[i + 1])).collect();
    let num: f64 = (0..n).map(|i| f_mid[i] * inv_a[i]).sum();
    let den: f64 = inv_a.iter().sum();
    let c = num / den;
    let mut u = vec![0.0; n + 1];
    for i in 0..n - 1 {
        u[i + 1] = u[i] + h * (c - f_mid[i]) * inv_a[i];
    }
    u[n] = 0.0;
    Ok(Solution {
        mesh,
        values: u,
        residual: 0.0,
        warnings: Vec::new(),
    })
}

/// [`solve_fine_1d`] for any coefficient kind.
pub fn solve_semi_analytic(problem: &DirichletProblem, mesh: &Mesh) -> Result<Solution> {
    if problem.coefficient.omega() != mesh.omega() {
        return Err(HomogError::Consistency("mesh and coefficient domains differ".into()));
    }
    let coef = &problem.coefficient;
    let err = std::cell::RefCell::new(None);
    let sol = solve_fine_1d(
        mesh.omega(),
        |t| match coef.entry(&Point::x(t), 0) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                1.0
            }
        },
        |t| problem.f(&Point::x(t)),
        mesh.n(),
    )?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(sol),
    }
}

fn harmonic2(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Finite-volume solve (harmonic face averages; Q1 elements when the
/// coefficient has off-diagonal entries) with homogeneous Dirichlet data.
pub fn solve_fd(problem: &DirichletProblem, mesh: &Mesh, tol: f64) -> Result<Solution> {
    if !(tol > 0.0) {
        return Err(HomogError::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    if problem.coefficient.omega() != mesh.omega() {
        return Err(HomogError::Consistency("mesh and coefficient domains differ".into()));
    }
    let mut warnings = Vec::new();
    if let Some(eps) = problem.coefficient.scale() {
        if mesh.max_spacing() > eps / 4.0 {
            let w = format!("mesh spacing {} does not resolve eps = {eps} (needs <= eps/4)", mesh.max_spacing());
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    let mut sol = match mesh.dim() {
        1 => solve_fv_1d(problem, mesh)?,
        2 => solve_2d(problem, mesh, tol, &mut warnings)?,
        d => return Err(HomogError::Unsupported(format!("solves in dimension {d}"))),
    };
    sol.warnings.extend(warnings);
    Ok(sol)
}

fn solve_fv_1d(problem: &DirichletProblem, mesh: &Mesh) -> Result<Solution> {
    let n = mesh.n();
    let h = mesh.spacing(0);
    let coef = &problem.coefficient;
    let faces = (0..n)
        .map(|i| {
            let x = mesh.coord(0, i);
            Ok(harmonic2(
                coef.entry(&Point::x(x + 0.25 * h), 0)?,
                coef.entry(&Point::x(x + 0.75 * h), 0)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = n - 1;
    let inv_h2 = 1.0 / (h * h);
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        let i = r + 1;
        diag[r] = (faces[i - 1] + faces[i]) * inv_h2;
        if r > 0 {
            lower[r] = -faces[i - 1] * inv_h2;
        }
        if r + 1 < m {
            upper[r] = -faces[i] * inv_h2;
        }
        rhs[r] = problem.f(&Point::x(mesh.coord(0, i)));
    }
    let x = thomas(&lower, &diag, &upper, &rhs)?;
    // residual of the tridiagonal system
    let mut res = 0.0;
    for r in 0..m {
        let mut ax = diag[r] * x[r];
        if r > 0 {
            ax += lower[r] * x[r - 1];
        }
        if r + 1 < m {
            ax += upper[r] * x[r + 1];
        }
        res += (rhs[r] - ax) * (rhs[r] - ax);
    }
    let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut values = vec![0.0; n + 1];
    values[1..n].copy_from_slice(&x);
    Ok(Solution {
        mesh: *mesh,
        values,
        residual: if bn > 0.0 { res.sqrt() / bn } else { res.sqrt() },
        warnings: Vec::new(),
    })
}

fn solve_2d(problem: &DirichletProblem, mesh: &Mesh, tol: f64, warnings: &mut Vec<String>) -> Result<Solution> {
    let n = mesh.n();
    let (hx, hy) = (mesh.spacing(0), mesh.spacing(1));
    let coef = &problem.coefficient;
    // scan element centres for off-diagonal entries and anisotropy
    let mut full = false;
    let mut worst: f64 = 1.0;
    for i in 0..n {
        for j in 0..n {
            let c = Point::xy(mesh.coord(0, i) + 0.5 * hx, mesh.coord(1, j) + 0.5 * hy);
            let t = coef.eval(&c)?;
            let off = t.get(0, 1).abs().max(t.get(1, 0).abs());
            if off > 1e-12 * t.frobenius() {
                full = true;
            }
            let ev = t.sym_eigenvalues();
            let (lo, hi) = (ev.iter().cloned().fold(f64::INFINITY, f64::min), ev.iter().cloned().fold(0.0, f64::max));
            if !(lo > 0.0) {
                return Err(HomogError::Ellipticity(format!("coefficient eigenvalue {lo} at {c:?}")));
            }
            worst = worst.max(hi / lo);
        }
    }
    if worst > ANISOTROPY_WARN {
        let w = format!("coefficient eigenvalue ratio {worst:.3e} exceeds {ANISOTROPY_WARN:e}; expect slow convergence");
        log::warn!("{w}");
        warnings.push(w);
    }
    // interior unknowns
    let m = n - 1;
    let unknown = |i: usize, j: usize| -> Option<usize> {
        if i == 0 || j == 0 || i == n || j == n {
            None
        } else {
            Some((i - 1) * m + (j - 1))
        }
    };
    let mut builder = CsrBuilder::new(m * m);
    let mut rhs = vec![0.0; m * m];
    if !full {
        let inv = [1.0 / (hx * hx), 1.0 / (hy * hy)];
        for i in 1..n {
            for j in 1..n {
                let r = unknown(i, j).unwrap();
                let x = Point::xy(mesh.coord(0, i), mesh.coord(1, j));
                rhs[r] = problem.f(&x);
                for k in 0..2 {
                    let h = mesh.spacing(k);
                    for side in [-1.0, 1.0] {
                        // face between the node and its neighbour on `side`
                        let q1 = x.with(k, x[k] + side * 0.25 * h);
                        let q2 = x.with(k, x[k] + side * 0.75 * h);
                        let t = harmonic2(coef.entry(&q1, k)?, coef.entry(&q2, k)?) * inv[k];
                        builder.add(r, r, t);
                        let (ni, nj) = if k == 0 {
                            ((i as isize + side as isize) as usize, j)
                        } else {
                            (i, (j as isize + side as isize) as usize)
                        };
                        if let Some(c) = unknown(ni, nj) {
                            builder.add(r, c, -t);
                        }
                    }
                }
            }
        }
    } else {
        let g = 0.5 / 3f64.sqrt();
        let gauss = [0.5 - g, 0.5 + g];
        for ei in 0..n {
            for ej in 0..n {
                let corners = [(ei, ej), (ei + 1, ej), (ei, ej + 1), (ei + 1, ej + 1)];
                let mut ke = [[0.0; 4]; 4];
                for &s in &gauss {
                    for &t in &gauss {
                        let p = Point::xy(mesh.coord(0, ei) + s * hx, mesh.coord(1, ej) + t * hy);
                        let a = coef.eval(&p)?;
                        let grads = [
                            [-(1.0 - t) / hx, -(1.0 - s) / hy],
                            [(1.0 - t) / hx, -s / hy],
                            [-t / hx, (1.0 - s) / hy],
                            [t / hx, s / hy],
                        ];
                        let w = 0.25 * hx * hy;
                        for (a_i, ga) in grads.iter().enumerate() {
                            let ag = a.apply(ga);
                            for (b_i, gb) in grads.iter().enumerate() {
                                ke[b_i][a_i] += w * (ag[0] * gb[0] + ag[1] * gb[1]);
                            }
                        }
                    }
                }
                for (a_i, &(ai, aj)) in corners.iter().enumerate() {
                    if let Some(r) = unknown(ai, aj) {
                        for (b_i, &(bi, bj)) in corners.iter().enumerate() {
                            if let Some(c) = unknown(bi, bj) {
                                builder.add(r, c, ke[a_i][b_i]);
                            }
                        }
                    }
                }
            }
        }
        for i in 1..n {
            for j in 1..n {
                let x = Point::xy(mesh.coord(0, i), mesh.coord(1, j));
                rhs[unknown(i, j).unwrap()] = problem.f(&x) * hx * hy;
            }
        }
    }
    let a = builder.build();
    let (x, residual, _) = pcg(&a, &rhs, tol, 50 * (m * m).max(100))?;
    let mut values = vec![0.0; mesh.len()];
    for i in 1..n {
        for j in 1..n {
            values[mesh.flat(&[i, j])] = x[unknown(i, j).unwrap()];
        }
    }
    Ok(Solution {
        mesh: *mesh,
        values,
        residual,
        warnings: Vec::new(),
    })
}

/// Source of cell solutions for the corrector. `None` means `w ≡ 0`.
pub trait CellProvider: Sync {
    fn cell_at(&self, x: &Point) -> Result<Option<Arc<CellSolution>>>;
}

/// Solves a fresh cell problem at every requested point.
pub struct OnDemandCells<'a> {
    pub ext: &'a TwoScaleCoefficient,
    pub opts: CellOptions,
}

impl CellProvider for OnDemandCells<'_> {
    fn cell_at(&self, x: &Point) -> Result<Option<Arc<CellSolution>>> {
        if self.ext.kind() == ExtensionKind::Trivial {
            return Ok(None);
        }
        let mesh = self.opts.mesh(self.ext.dim())?;
        solve_cell(self.ext, x, &mesh, self.opts.tol).map(|s| Some(Arc::new(s)))
    }
}

/// One cell solution per partition cell of a Discrete extension.
pub struct PartitionCells<'a> {
    ext: &'a TwoScaleCoefficient,
    sols: Vec<Arc<CellSolution>>,
}

impl<'a> PartitionCells<'a> {
    pub fn new(ext: &'a TwoScaleCoefficient, opts: &CellOptions) -> Result<Self> {
        let p = ext
            .partition()
            .ok_or_else(|| HomogError::Unsupported("partition cells need the discrete extension".into()))?;
        let mesh = opts.mesh(ext.dim())?;
        let jobs: Vec<Point> = (0..p.len()).map(|j| p.cell(j).center()).collect();
        let sols = opts
            .exec
            .try_map(&jobs, |x| solve_cell(ext, x, &mesh, opts.tol).map(Arc::new))?;
        Ok(PartitionCells { ext, sols })
    }
}

impl CellProvider for PartitionCells<'_> {
    fn cell_at(&self, x: &Point) -> Result<Option<Arc<CellSolution>>> {
        let j = self
            .ext
            .partition()
            .and_then(|p| p.locate(x))
            .ok_or_else(|| HomogError::Consistency(format!("{x:?} lies in no partition cell")))?;
        Ok(Some(self.sols[j].clone()))
    }
}

/// Cell solutions on a sample lattice; each query uses the nearest sample.
pub struct LatticeCells {
    lattice: SampleLattice,
    sols: Vec<Arc<CellSolution>>,
}

impl LatticeCells {
    pub fn new(ext: &TwoScaleCoefficient, lattice: &SampleLattice, opts: &CellOptions) -> Result<Self> {
        let mesh = opts.mesh(ext.dim())?;
        let points = lattice.points();
        let sols = opts
            .exec
            .try_map(&points, |x| solve_cell(ext, x, &mesh, opts.tol).map(Arc::new))?;
        Ok(LatticeCells {
            lattice: lattice.clone(),
            sols,
        })
    }
}

impl CellProvider for LatticeCells {
    fn cell_at(&self, x: &Point) -> Result<Option<Arc<CellSolution>>> {
        let l = &self.lattice;
        l.omega.check(x, "corrector point")?;
        let mut flat = 0;
        for k in 0..x.dim() {
            let t = ((x[k] - l.omega.lower[k]) / l.spacing(k)).round();
            let i = (t.max(0.0) as usize).min(l.counts[k] - 1);
            flat = flat * l.counts[k] + i;
        }
        Ok(Some(self.sols[flat].clone()))
    }
}

/// Precomputed solutions at exact points.
#[derive(Default)]
pub struct TableCells {
    entries: Vec<(Point, Arc<CellSolution>)>,
}

impl TableCells {
    pub fn insert(&mut self, sol: CellSolution) {
        self.entries.push((sol.x, Arc::new(sol)));
    }
}

impl CellProvider for TableCells {
    fn cell_at(&self, x: &Point) -> Result<Option<Arc<CellSolution>>> {
        self.entries
            .iter()
            .find(|(p, _)| p.as_slice() == x.as_slice())
            .map(|(_, s)| Some(s.clone()))
            .ok_or_else(|| HomogError::Consistency(format!("no cell solution at {x:?}")))
    }
}

/// `w ≡ 0` everywhere (Trivial extension, constant coefficients).
pub struct NoCells;

impl CellProvider for NoCells {
    fn cell_at(&self, _x: &Point) -> Result<Option<Arc<CellSolution>>> {
        Ok(None)
    }
}

/// `u₁ = u₀ + ε Σ_j w_j(x, x/ε) ∂_j u₀` at interior nodes; boundary nodes
/// keep `u₀ = 0`.
pub fn corrector(u0: &Solution, provider: &dyn CellProvider, eps: f64, exec: Exec) -> Result<Solution> {
    if !(eps > 0.0) {
        return Err(HomogError::Parameter(format!("eps must be positive, got {eps}")));
    }
    let mesh = u0.mesh;
    let idx: Vec<usize> = (0..mesh.len()).collect();
    let values = exec.try_map(&idx, |&i| {
        let u = u0.values[i];
        if mesh.is_boundary(i) {
            return Ok(u);
        }
        let x = mesh.node(i);
        let Some(cell) = provider.cell_at(&x)? else {
            return Ok(u);
        };
        let g = u0.gradient(i);
        let y = x.scale(1.0 / eps);
        let corr: f64 = (0..mesh.dim()).map(|j| cell.corrector_value(j, &y) * g[j]).sum();
        Ok(if corr == 0.0 { u } else { u + eps * corr })
    })?;
    Ok(Solution {
        mesh,
        values,
        residual: u0.residual,
        warnings: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Midpoint-rule `L²` norm and `H¹` seminorm of `u - v`.
pub fn error_norms(u: &Solution, v: &Solution) -> Result<ErrorNorms> {
    if u.mesh != v.mesh {
        return Err(HomogError::Consistency("solutions live on different meshes".into()));
    }
    let mesh = &u.mesh;
    let e: Vec<f64> = u.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
    let n = mesh.n();
    let (l2, h1) = match mesh.dim() {
        1 => {
            let h = mesh.spacing(0);
            let mut l2 = 0.0;
            let mut h1 = 0.0;
            for i in 0..n {
                let mid = 0.5 * (e[i] + e[i + 1]);
                let d = (e[i + 1] - e[i]) / h;
                l2 += h * mid * mid;
                h1 += h * d * d;
            }
            (l2, h1)
        }
        2 => {
            let (hx, hy) = (mesh.spacing(0), mesh.spacing(1));
            let mut l2 = 0.0;
            let mut h1 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let e00 = e[mesh.flat(&[i, j])];
                    let e10 = e[mesh.flat(&[i + 1, j])];
                    let e01 = e[mesh.flat(&[i, j + 1])];
                    let e11 = e[mesh.flat(&[i + 1, j + 1])];
                    let mid = 0.25 * (e00 + e10 + e01 + e11);
                    let dx = 0.5 * ((e10 + e11) - (e00 + e01)) / hx;
                    let dy = 0.5 * ((e01 + e11) - (e00 + e10)) / hy;
                    l2 += hx * hy * mid * mid;
                    h1 += hx * hy * (dx * dx + dy * dy);
                }
            }
            (l2, h1)
        }
        d => return Err(HomogError::Unsupported(format!("norms in dimension {d}"))),
    };
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit1() -> DomainBox {
        DomainBox::unit(1)
    }

    fn unitc(v: f64, dim: usize) -> Coefficient {
        Coefficient::scalar_fn(DomainBox::unit(dim), move |_| v)
    }

    #[test]
    fn semi_analytic_examples() {
        let u = solve_fine_1d(&unit1(), |_| 1.0, |_| 2.0, 4096).unwrap();
        let err = (0..=4096)
            .map(|i| {
                let x = u.mesh.node(i)[0];
                (u.values[i] - x * (1.0 - x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        assert_eq!(u.values[0], 0.0);
        assert_eq!(u.values[4096], 0.0);
        let s = solve_fine_1d(&unit1(), |_| 1.0, |x| PI * PI * (PI * x).sin(), 4096).unwrap();
        let err = (0..=4096)
            .map(|i| (s.values[i] - (PI * s.mesh.node(i)[0]).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn fd_matches_parabola() {
        let p = DirichletProblem::new(unitc(1.0, 1), Arc::new(|_| 2.0));
        let u = solve_fd(&p, &Mesh::new(unit1(), 256).unwrap(), 1e-10).unwrap();
        let err = u.values.iter().enumerate().map(|(i, v)| {
            let x = u.mesh.node(i)[0];
            (v - x * (1.0 - x)).abs()
        });
        assert!(err.fold(0.0, f64::max) <= 1e-4);
    }

    #[test]
    fn fd_2d_separable() {
        let f: Source = Arc::new(|x: &Point| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin());
        let p = DirichletProblem::new(unitc(1.0, 2), f);
        let mesh = Mesh::new(DomainBox::unit(2), 128).unwrap();
        let u = solve_fd(&p, &mesh, 1e-10).unwrap();
        assert!(u.residual <= 1e-10);
        let err = (0..mesh.len())
            .map(|i| {
                let x = mesh.node(i);
                (u.values[i] - (PI * x[0]).sin() * (PI * x[1]).sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn full_tensor_path_matches_diagonal_path() {
        let f: Source = Arc::new(|_| 1.0);
        let diag = DirichletProblem::new(unitc(2.0, 2), f.clone());
        let full = DirichletProblem::new(
            Coefficient::Function {
                omega: DomainBox::unit(2),
                eval: Arc::new(|_| Tensor::from_rows(&[&[2.0, 1e-9], &[1e-9, 2.0]])),
            },
            f,
        );
        let mesh = Mesh::new(DomainBox::unit(2), 64).unwrap();
        let a = solve_fd(&diag, &mesh, 1e-12).unwrap();
        let b = solve_fd(&full, &mesh, 1e-12).unwrap();
        let peak = a.values.iter().cloned().fold(0.0, f64::max);
        assert!(a.max_abs_diff(&b) < 2e-3 * peak);
    }

    #[test]
    fn norms_of_parabola() {
        let mesh = Mesh::new(unit1(), 2048).unwrap();
        let u = Solution {
            mesh,
            values: (0..mesh.len()).map(|i| {
                let x = mesh.node(i)[0];
                x * (1.0 - x)
            }).collect(),
            residual: 0.0,
            warnings: vec![],
        };
        let z = Solution::zeros(mesh);
        let e = error_norms(&u, &z).unwrap();
        assert!((e.l2 - (1.0f64 / 30.0).sqrt()).abs() < 1e-6);
        assert!((e.h1_semi - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
        let same = error_norms(&u, &u).unwrap();
        assert_eq!((same.l2, same.h1_semi), (0.0, 0.0));
        let other = Solution::zeros(Mesh::new(unit1(), 16).unwrap());
        assert!(matches!(error_norms(&u, &other), Err(HomogError::Consistency(_))));
    }

    #[test]
    fn corrector_without_cells_is_identity() {
        let p = DirichletProblem::new(unitc(1.0, 1), Arc::new(|_| 1.0));
        let u0 = solve_fd(&p, &Mesh::new(unit1(), 32).unwrap(), 1e-10).unwrap();
        let u1 = corrector(&u0, &NoCells, 0.1, Exec::Sequential).unwrap();
        assert_eq!(u0.values, u1.values);
        let table = TableCells::default();
        assert!(matches!(
            corrector(&u0, &table, 0.1, Exec::Sequential),
            Err(HomogError::Consistency(_))
        ));
    }
}
