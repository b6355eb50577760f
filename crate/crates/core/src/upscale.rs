//! The averaged coefficient field `A(x)` over Ω: interpolated from sampled
//! cell problems (Continuous), piecewise constant per partition cell
//! (Discrete), equal to `a_M` (Trivial), or one tensor (periodic shortcut).

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cell::{cell_tensor, harmonic_tensor_1d, midpoint_samples, solve_cell_1d, window_tensor, AveragedTensor, CellMethod, UnitCellMesh};
use crate::error::{HomogError, Result};
use crate::exec::Exec;
use crate::extension::{ExtensionKind, Partition, TwoScaleCoefficient};
use crate::field::MicroCoefficient;
use crate::geom::{DomainBox, Point, Tensor, MAX_DIM};

/// Agreement required between the windows of the periodic shortcut.
pub const SHORTCUT_TOL: f64 = 1e-6;

/// Windows checked by the periodic shortcut besides the first.
pub const SHORTCUT_CHECKS: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct CellOptions {
    /// Cells per axis of the unit-cell mesh for `d >= 2`.
    pub n: usize,
    /// Midpoint samples of the 1D closed form.
    pub quad_n: usize,
    pub tol: f64,
    pub exec: Exec,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            n: 128,
            quad_n: 4096,
            tol: 1e-10,
            exec: Exec::default(),
        }
    }
}

impl CellOptions {
    /// Mesh used whenever a full cell solution is needed; 1D uses `quad_n`.
    pub fn mesh(&self, dim: usize) -> Result<UnitCellMesh> {
        UnitCellMesh::new(if dim == 1 { self.quad_n } else { self.n }, dim)
    }
}

/// `A(x)` for one macroscopic point by the method matching the extension.
pub fn tensor_at(ext: &TwoScaleCoefficient, x: &Point, opts: &CellOptions) -> Result<AveragedTensor> {
    if ext.kind() == ExtensionKind::Trivial {
        ext.omega().check(x, "macroscopic point")?;
        let a = ext.field().eval_clamped(x);
        let diag: Vec<f64> = (0..a.dim()).map(|k| a.get(k, k)).collect();
        return Ok(AveragedTensor {
            a,
            x: *x,
            method: CellMethod::Micro,
            harmonic: diag.clone(),
            arithmetic: diag,
        });
    }
    if ext.dim() == 1 {
        harmonic_tensor_1d(ext, x, opts.quad_n)
    } else {
        let mesh = UnitCellMesh::new(opts.n, ext.dim())?;
        cell_tensor(ext, x, &mesh, opts.tol).map(|(_, a)| a)
    }
}

/// Tensor of the ε̄-periodised window of `field`, by the 1D closed form or
/// the W-form.
pub fn window_tensor_any(field: &MicroCoefficient, window: &DomainBox, opts: &CellOptions) -> Result<AveragedTensor> {
    let x = window.center();
    if field.dim() == 1 {
        let tilde = field.omega_tilde();
        tilde.check(&window.lower, "window corner")?;
        tilde.check(&window.upper, "window corner")?;
        let s = midpoint_samples(window.lower[0], window.upper[0], opts.quad_n, |z| {
            field.eval_clamped(&Point::x(z)).get(0, 0)
        });
        let sol = solve_cell_1d(&s)?;
        let arith = s.iter().sum::<f64>() / s.len() as f64;
        return Ok(AveragedTensor {
            a: Tensor::scalar(1, sol.a),
            x,
            method: CellMethod::Harmonic1d,
            harmonic: vec![sol.a],
            arithmetic: vec![arith],
        });
    }
    let mesh = UnitCellMesh::new(opts.n, field.dim())?;
    window_tensor(field, window, &mesh, opts.tol, x)
}

/// Regular lattice of sample points covering Ω̄, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleLattice {
    pub omega: DomainBox,
    pub counts: Vec<usize>,
}

impl SampleLattice {
    pub fn new(omega: DomainBox, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != omega.dim() || counts.iter().any(|&c| c < 2) {
            return Err(HomogError::Parameter(
                "sample lattice needs at least 2 points per axis".into(),
            ));
        }
        Ok(SampleLattice { omega, counts })
    }

    /// Smallest lattice whose spacing does not exceed `spacing`.
    pub fn with_spacing(omega: DomainBox, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(HomogError::Parameter(format!("sample spacing must be positive, got {spacing}")));
        }
        let counts = (0..omega.dim())
            .map(|k| (omega.side(k) / spacing - 1e-9).ceil().max(1.0) as usize + 1)
            .collect();
        Self::new(omega, counts)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.omega.side(k) / (self.counts[k] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.omega.dim()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    fn coord(&self, k: usize, i: usize) -> f64 {
        if i + 1 == self.counts[k] {
            self.omega.upper[k]
        } else {
            self.omega.lower[k] + i as f64 * self.spacing(k)
        }
    }

    pub fn point(&self, mut flat: usize) -> Point {
        let mut p = self.omega.lower;
        for k in (0..self.omega.dim()).rev() {
            let i = flat % self.counts[k];
            flat /= self.counts[k];
            p[k] = self.coord(k, i);
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Lower corner index and weights of the lattice cell containing `x`.
    fn locate(&self, x: &Point) -> ([usize; MAX_DIM], [f64; MAX_DIM]) {
        let mut base = [0; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..self.omega.dim() {
            let m = self.counts[k];
            let t = (x[k] - self.omega.lower[k]) / self.spacing(k);
            let r = t.round();
            if (t - r).abs() <= 1e-9 {
                // on a lattice plane: use the node itself
                let i = (r.max(0.0) as usize).min(m - 1);
                if i == m - 1 {
                    base[k] = m - 2;
                    frac[k] = 1.0;
                } else {
                    base[k] = i;
                    frac[k] = 0.0;
                }
            } else {
                let i = (t.floor().max(0.0) as usize).min(m - 2);
                base[k] = i;
                frac[k] = (t - i as f64).clamp(0.0, 1.0);
            }
        }
        (base, frac)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        (0..self.omega.dim()).fold(0, |acc, k| acc * self.counts[k] + idx[k])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AveragedMode {
    Interpolated,
    PiecewiseConstant,
    Constant,
    Micro,
}

impl AveragedMode {
    pub fn name(self) -> &'static str {
        match self {
            AveragedMode::Interpolated => "interpolated",
            AveragedMode::PiecewiseConstant => "piecewise-constant",
            AveragedMode::Constant => "constant",
            AveragedMode::Micro => "micro",
        }
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Lattice(SampleLattice),
    Partition(Partition),
    Constant,
    Micro(MicroCoefficient),
}

#[derive(Clone, Debug)]
pub struct AveragedCoefficientField {
    omega: DomainBox,
    storage: Storage,
    samples: Vec<AveragedTensor>,
    pub warnings: Vec<String>,
}

impl AveragedCoefficientField {
    pub fn constant(omega: DomainBox, tensor: AveragedTensor) -> Self {
        AveragedCoefficientField {
            omega,
            storage: Storage::Constant,
            samples: vec![tensor],
            warnings: Vec::new(),
        }
    }

    pub fn micro(field: MicroCoefficient) -> Self {
        AveragedCoefficientField {
            omega: *field.omega(),
            storage: Storage::Micro(field),
            samples: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn mode(&self) -> AveragedMode {
        match self.storage {
            Storage::Lattice(_) => AveragedMode::Interpolated,
            Storage::Partition(_) => AveragedMode::PiecewiseConstant,
            Storage::Constant => AveragedMode::Constant,
            Storage::Micro(_) => AveragedMode::Micro,
        }
    }

    pub fn omega(&self) -> &DomainBox {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn samples(&self) -> &[AveragedTensor] {
        &self.samples
    }

    pub fn lattice(&self) -> Option<&SampleLattice> {
        match &self.storage {
            Storage::Lattice(l) => Some(l),
            _ => None,
        }
    }

    pub fn eval(&self, x: &Point) -> Result<Tensor> {
        self.omega.check(x, "macroscopic point")?;
        self.eval_unchecked(x)
    }

    pub(crate) fn eval_unchecked(&self, x: &Point) -> Result<Tensor> {
        match &self.storage {
            Storage::Constant => Ok(self.samples[0].a),
            Storage::Micro(f) => Ok(f.eval_clamped(x)),
            Storage::Partition(p) => {
                let j = p.locate(x).ok_or_else(|| HomogError::Consistency(format!("{x:?} has no partition cell")))?;
                Ok(self.samples[j].a)
            }
            Storage::Lattice(l) => {
                let (base, frac) = l.locate(x);
                let dim = self.dim();
                let mut out = Tensor::zeros(dim);
                let mut only: Option<usize> = None;
                let mut terms = 0;
                for corner in 0..(1usize << dim) {
                    let mut w = 1.0;
                    let mut idx = [0; MAX_DIM];
                    for k in 0..dim {
                        let up = (corner >> k) & 1 == 1;
                        idx[k] = base[k] + up as usize;
                        w *= if up { frac[k] } else { 1.0 - frac[k] };
                    }
                    if w == 0.0 {
                        continue;
                    }
                    let s = l.flat(&idx);
                    terms += 1;
                    only = Some(s);
                    out = out.zip(&self.samples[s].a, |acc, v| acc + w * v);
                }
                if terms == 1 {
                    // exactly on a sample
                    return Ok(self.samples[only.unwrap()].a);
                }
                let min_eig = out.sym_eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
                if !(min_eig > 0.0) {
                    return Err(HomogError::Numerical {
                        msg: format!("interpolated A({x:?}) lost positivity"),
                        residual: min_eig,
                    });
                }
                Ok(out)
            }
        }
    }

    /// The same layout with every tensor replaced by the window's arithmetic
    /// mean (the Voigt baseline).
    pub fn arithmetic_baseline(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.a = Tensor::diag(&s.arithmetic);
        }
        out
    }

    /// Writes `x..., A entries row-major` at the given points.
    pub fn write_csv(&self, path: impl AsRef<Path>, points: &[Point]) -> Result<()> {
        let dim = self.dim();
        let mut header: Vec<String> = (1..=dim).map(|k| if dim == 1 { "x".into() } else { format!("x{k}") }).collect();
        for i in 1..=dim {
            for j in 1..=dim {
                header.push(format!("A{i}{j}"));
            }
        }
        let mut rows = Vec::with_capacity(points.len());
        for p in points {
            let a = self.eval(p)?;
            let mut row: Vec<f64> = p.as_slice().to_vec();
            row.extend(a.entries());
            rows.push(row);
        }
        write_csv(path, &header, &rows)
    }
}

/// Plain numeric CSV; numbers use the shortest round-trip representation.
pub fn write_csv(path: impl AsRef<Path>, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// One cell problem per lattice point, merged in point order.
pub fn sample_a_continuous(ext: &TwoScaleCoefficient, lattice: &SampleLattice, opts: &CellOptions) -> Result<AveragedCoefficientField> {
    if ext.kind() != ExtensionKind::Continuous {
        return Err(HomogError::Unsupported(format!(
            "sampled averaging needs the continuous extension, got {}",
            ext.kind().name()
        )));
    }
    if lattice.omega != *ext.omega() {
        return Err(HomogError::Consistency("sample lattice does not cover Ω".into()));
    }
    let points = lattice.points();
    let samples = opts.exec.try_map(&points, |x| {
        tensor_at(ext, x, opts).map_err(|e| e.at_point(x))
    })?;
    let mut warnings = Vec::new();
    let spacing = lattice.max_spacing();
    if spacing > ext.eps_bar() {
        let w = format!(
            "sample spacing {spacing} exceeds eps_bar {}; A(x) varies on the window scale and is under-sampled",
            ext.eps_bar()
        );
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(AveragedCoefficientField {
        omega: *ext.omega(),
        storage: Storage::Lattice(lattice.clone()),
        samples,
        warnings,
    })
}

/// One cell problem per partition cell.
pub fn assemble_a_discrete(ext: &TwoScaleCoefficient, opts: &CellOptions) -> Result<AveragedCoefficientField> {
    let partition = match (ext.kind(), ext.partition()) {
        (ExtensionKind::Discrete, Some(p)) => p.clone(),
        _ => {
            return Err(HomogError::Unsupported(format!(
                "piecewise averaging needs the discrete extension, got {}",
                ext.kind().name()
            )))
        }
    };
    let jobs: Vec<usize> = (0..partition.len()).collect();
    let samples = opts.exec.try_map(&jobs, |&j| {
        // a(x, ·) is the same for every x in Ω_j; solve at the cell centre
        let at = partition.cell(j).center();
        let mut t = tensor_at(ext, &at, opts).map_err(|e| e.at_point(&partition.center(j)))?;
        t.x = partition.center(j);
        Ok(t)
    })?;
    Ok(AveragedCoefficientField {
        omega: *ext.omega(),
        storage: Storage::Partition(partition),
        samples,
        warnings: Vec::new(),
    })
}

/// The averaged field matching the extension kind: interpolated samples
/// (spacing `sample_spacing`, default ε̄/2), per-partition tensors, or `a_M`.
pub fn averaged_field(ext: &TwoScaleCoefficient, sample_spacing: Option<f64>, opts: &CellOptions) -> Result<AveragedCoefficientField> {
    match ext.kind() {
        ExtensionKind::Trivial => Ok(AveragedCoefficientField::micro(ext.field().clone())),
        ExtensionKind::Continuous => {
            let spacing = sample_spacing.unwrap_or(0.5 * ext.eps_bar());
            let lattice = SampleLattice::with_spacing(*ext.omega(), spacing)?;
            sample_a_continuous(ext, &lattice, opts)
        }
        ExtensionKind::Discrete => assemble_a_discrete(ext, opts),
    }
}

/// A single W-form tensor for an ε̄-periodic `a_M` on `subdomain`, checked
/// against [`SHORTCUT_CHECKS`] further windows inside it.
pub fn periodic_shortcut(
    field: &MicroCoefficient,
    eps_bar: f64,
    subdomain: &DomainBox,
    opts: &CellOptions,
    seed: u64,
) -> Result<AveragedTensor> {
    if !(eps_bar > 0.0) {
        return Err(HomogError::Parameter(format!("eps_bar must be positive, got {eps_bar}")));
    }
    if subdomain.dim() != field.dim() {
        return Err(HomogError::Consistency("subdomain has the wrong dimension".into()));
    }
    if subdomain.min_side() < eps_bar {
        return Err(HomogError::Parameter(format!(
            "subdomain side {} is smaller than eps_bar {eps_bar}",
            subdomain.min_side()
        )));
    }
    let dim = field.dim();
    let first = DomainBox {
        lower: subdomain.lower,
        upper: subdomain.lower.map(|_, v| v + eps_bar),
    };
    let reference = window_tensor_any(field, &first, opts)?;
    // shifts are whole multiples of the window's grid spacing so that a
    // periodic field gives congruent samples
    let n = if dim == 1 { opts.quad_n } else { opts.n };
    let step = eps_bar / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = reference.a.frobenius();
    for check in 0..SHORTCUT_CHECKS {
        let mut lower = subdomain.lower;
        for k in 0..dim {
            let slots = ((subdomain.side(k) - eps_bar) / step).floor() as u64;
            lower[k] += rng.gen_range(0..=slots) as f64 * step;
        }
        let window = DomainBox {
            lower,
            upper: lower.map(|_, v| v + eps_bar),
        };
        let other = window_tensor_any(field, &window, opts)?;
        let rel = reference.a.sub(&other.a).frobenius() / norm;
        if rel > SHORTCUT_TOL {
            return Err(HomogError::Mismatch(format!(
                "window {} at {:?} differs from the first by {rel:e} (relative)",
                check + 1,
                window.lower
            )));
        }
    }
    Ok(reference)
}

#[derive(Clone, Debug)]
pub struct ContinuityReport {
    pub x: Point,
    pub hs: Vec<f64>,
    /// `omega[i][k] = ‖A(x + hs[i] e_k) - A(x)‖_F`.
    pub omega: Vec<Vec<f64>>,
}

impl ContinuityReport {
    /// Largest modulus over directions, per step.
    pub fn max_per_step(&self) -> Vec<f64> {
        self.omega.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect()
    }
}

pub fn continuity_modulus(ext: &TwoScaleCoefficient, x: &Point, hs: &[f64], opts: &CellOptions) -> Result<ContinuityReport> {
    if ext.kind() != ExtensionKind::Continuous {
        return Err(HomogError::Unsupported("the continuity probe needs the continuous extension".into()));
    }
    let omega = ext.omega();
    omega.check(x, "probe point")?;
    let mut points = vec![*x];
    for &h in hs {
        if !(h > 0.0) {
            return Err(HomogError::Parameter(format!("probe step must be positive, got {h}")));
        }
        for k in 0..x.dim() {
            let p = x.with(k, x[k] + h);
            omega.check(&p, "probe step")?;
            points.push(p);
        }
    }
    let tensors = opts.exec.try_map(&points, |p| tensor_at(ext, p, opts))?;
    let base = tensors[0].a;
    let d = x.dim();
    let omega_vals = (0..hs.len())
        .map(|i| (0..d).map(|k| tensors[1 + i * d + k].a.sub(&base).frobenius()).collect())
        .collect();
    Ok(ContinuityReport {
        x: *x,
        hs: hs.to_vec(),
        omega: omega_vals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{synthesize, FieldKind, FieldSpec};

    fn sinusoid(dim: usize, period: f64) -> MicroCoefficient {
        synthesize(&FieldSpec {
            kind: FieldKind::PeriodicSinusoid {
                mean: 2.0,
                amplitude: 1.0,
                period,
            },
            omega: DomainBox::unit(dim),
            margin: 0.1,
        })
        .unwrap()
    }

    #[test]
    fn periodic_field_gives_equal_samples() {
        let ext = TwoScaleCoefficient::continuous(sinusoid(1, 0.1), 0.1).unwrap();
        let lattice = SampleLattice::with_spacing(*ext.omega(), 0.05).unwrap();
        let a = sample_a_continuous(&ext, &lattice, &CellOptions::default()).unwrap();
        assert_eq!(a.samples().len(), 21);
        for s in a.samples() {
            assert!((s.a.get(0, 0) - 3f64.sqrt()).abs() < 1e-8);
        }
        let p = lattice.point(7);
        assert_eq!(a.eval(&p).unwrap(), a.samples()[7].a);
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn discrete_field_is_piecewise_constant() {
        let f = sinusoid(1, 0.25);
        let ext = TwoScaleCoefficient::discrete(f, 0.1, None).unwrap();
        let a = assemble_a_discrete(&ext, &CellOptions::default()).unwrap();
        assert_eq!(a.samples().len(), 10);
        assert_eq!(a.eval(&Point::x(0.31)).unwrap(), a.eval(&Point::x(0.399)).unwrap());
        assert_eq!(a.mode(), AveragedMode::PiecewiseConstant);
    }

    #[test]
    fn shortcut_detects_incommensurate_period() {
        let opts = CellOptions::default();
        let sub = DomainBox::interval(0.0, 1.0).unwrap();
        let good = periodic_shortcut(&sinusoid(1, 0.1), 0.1, &sub, &opts, 1).unwrap();
        assert!((good.a.get(0, 0) - 3f64.sqrt()).abs() < 1e-6);
        let bad = periodic_shortcut(&sinusoid(1, 0.13), 0.1, &sub, &opts, 1);
        assert!(matches!(bad, Err(HomogError::Mismatch(_))));
    }

    #[test]
    fn continuity_on_incommensurate_sinusoid() {
        let ext = TwoScaleCoefficient::continuous(sinusoid(1, 0.25), 0.1).unwrap();
        let rep = continuity_modulus(&ext, &Point::x(0.5), &[1e-2, 1e-3, 1e-4], &CellOptions::default()).unwrap();
        let w = rep.max_per_step();
        assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
        assert!(w[2] <= 0.1 * w[0]);
    }

    #[test]
    fn lattice_spacing() {
        let l = SampleLattice::with_spacing(DomainBox::unit(1), 0.05).unwrap();
        assert_eq!(l.counts, vec![21]);
        assert_eq!(l.point(20)[0], 1.0);
    }
}
