//! Convergence experiments: oscillatory-integral limits of admissible test
//! functions, the `u_ε → u₀` study and the end-to-end pipeline.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{FieldSource, PartitionKind, PipelineConfig};
use crate::error::{HomogError, Result};
use crate::exec::Exec;
use crate::extension::{ExtensionKind, Partition, TwoScaleCoefficient};
use crate::field::{extend_domain, load_grid_field, synthesize, FieldSpec, MicroCoefficient};
use crate::geom::{midpoint_nodes, DomainBox, Point};
use crate::solve::{
    corrector, error_norms, solve_fd, solve_semi_analytic, sine_source, CellProvider, Coefficient, DirichletProblem, ErrorNorms,
    LatticeCells, Mesh, NoCells, PartitionCells, Solution, Source,
};
use crate::upscale::{averaged_field, write_csv, AveragedCoefficientField, CellOptions};

/// Reference quadrature points per axis in `x` and in `y`.
pub fn reference_points(dim: usize) -> usize {
    if dim == 1 {
        512
    } else {
        128
    }
}

/// Tolerance of the solves in the pipeline and the studies.
pub const SOLVE_TOL: f64 = 1e-10;

/// Artifacts written by [`run_pipeline`].
pub const ARTIFACTS: &[&str] = &[
    "field.csv",
    "averaged.csv",
    "u_fine.csv",
    "u0.csv",
    "u0_corrected.csv",
    "report.csv",
    "plot.gp",
];

pub const LOG_FILE: &str = "pipeline.log";
pub const FAILED_MARKER: &str = "FAILED";

/// `ε_n = ε̄ rⁿ`, `n = 0..count`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsSequence {
    pub eps_bar: f64,
    pub ratio: f64,
    pub count: usize,
}

impl EpsSequence {
    pub fn new(eps_bar: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(eps_bar > 0.0) {
            return Err(HomogError::Parameter(format!("eps_bar must be positive, got {eps_bar}")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(HomogError::Parameter(format!("ratio must lie in (0, 1), got {ratio}")));
        }
        if count == 0 {
            return Err(HomogError::Parameter("sequence needs at least one member".into()));
        }
        Ok(EpsSequence { eps_bar, ratio, count })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|n| self.eps_bar * self.ratio.powi(n as i32)).collect()
    }
}

/// One term `coeff · Π x_k^{p_k} · cos|sin(2π Σ m_k y_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub coeff: f64,
    pub x_powers: Vec<u32>,
    pub waves: Vec<i32>,
    pub sine: bool,
}

/// `φ(x, y)`, Y-periodic in `y` by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub name: String,
    pub terms: Vec<TrigTerm>,
}

impl TestFunction {
    /// `one` (φ ≡ 1), `x-cos` (x₁ cos 2πy₁), `cos` (cos 2πy₁).
    pub fn named(name: &str, dim: usize) -> Result<Self> {
        let unit = |k: usize| (0..dim).map(|i| (i == 0) as u32 * k as u32).collect::<Vec<u32>>();
        let wave = |k: i32| (0..dim).map(|i| if i == 0 { k } else { 0 }).collect::<Vec<i32>>();
        let term = match name {
            "one" => TrigTerm {
                coeff: 1.0,
                x_powers: unit(0),
                waves: wave(0),
                sine: false,
            },
            "x-cos" => TrigTerm {
                coeff: 1.0,
                x_powers: unit(1),
                waves: wave(1),
                sine: false,
            },
            "cos" => TrigTerm {
                coeff: 1.0,
                x_powers: unit(0),
                waves: wave(1),
                sine: false,
            },
            other => return Err(HomogError::Parameter(format!("unknown test function `{other}`"))),
        };
        Ok(TestFunction {
            name: name.into(),
            terms: vec![term],
        })
    }

    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let envelope: f64 = t.x_powers.iter().enumerate().map(|(k, &p)| x[k].powi(p as i32)).product();
                let phase = 2.0 * PI * t.waves.iter().enumerate().map(|(k, &m)| m as f64 * y[k]).sum::<f64>();
                t.coeff * envelope * if t.sine { phase.sin() } else { phase.cos() }
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    /// Empty for sequence studies; the quantity name in pipeline reports.
    pub label: String,
    pub eps: f64,
    pub value: f64,
    pub reference: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub meta: Vec<(String, String)>,
}

impl StudyReport {
    pub fn deviations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.deviation).collect()
    }

    pub fn row(&self, label: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let labelled = self.rows.iter().any(|r| !r.label.is_empty());
        let mut s = String::new();
        if labelled {
            s.push_str("quantity,");
        }
        s.push_str("eps,value,reference,deviation\n");
        for r in &self.rows {
            if labelled {
                let _ = write!(s, "{},", r.label);
            }
            let _ = writeln!(s, "{},{},{},{}", r.eps, r.value, r.reference, r.deviation);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn scalar_field(ext: &TwoScaleCoefficient) -> Result<()> {
    if ext.field().is_isotropic() {
        Ok(())
    } else {
        Err(HomogError::Unsupported("oscillatory-integral studies need a scalar field".into()))
    }
}

/// Side of the smallest cell of the representation of `a(x, x/ε)`.
fn cell_scale(ext: &TwoScaleCoefficient, eps: f64) -> f64 {
    let eb = ext.eps_bar();
    match ext.kind() {
        ExtensionKind::Continuous if eps != eb => eps.min(eps * eb / (eb - eps).abs()),
        _ => eps,
    }
}

fn tensor_nodes(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Point>, Vec<f64>) {
    let dim = axes.len();
    let total: usize = axes.iter().map(|a| a.0.len()).product();
    let mut pts = Vec::with_capacity(total);
    let mut wts = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut c = vec![0.0; dim];
        let mut w = 1.0;
        for k in (0..dim).rev() {
            let n = axes[k].0.len();
            let i = rem % n;
            rem /= n;
            c[k] = axes[k].0[i];
            w *= axes[k].1[i];
        }
        pts.push(Point::new(&c));
        wts.push(w);
    }
    (pts, wts)
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    values.for_each(|v| acc.add(v));
    acc.total()
}

/// `∫_Ω a(x, x/ε)^p φ(x, x/ε) dx` by composite midpoint on the cube grid.
fn oscillatory_integral(ext: &TwoScaleCoefficient, phi: &TestFunction, p: i32, eps: f64, quad_n: Option<usize>) -> Result<f64> {
    let omega = *ext.omega();
    let scale = cell_scale(ext, eps);
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..ext.dim())
        .map(|k| {
            let len = omega.side(k);
            let n = quad_n.unwrap_or_else(|| (reference_points(ext.dim()) as f64 * len / scale - 1e-9).ceil() as usize);
            let h = len / n.max(1) as f64;
            let (nodes, weights) = midpoint_nodes(omega.lower[k], omega.upper[k], &ext.eps_breakpoints(eps, k), h);
            let widest = weights.iter().cloned().fold(0.0, f64::max);
            if widest > scale / 8.0 * (1.0 + 1e-9) {
                return Err(HomogError::Resolution(format!(
                    "quadrature spacing {widest:e} exceeds min(eps, delta)/8 = {:e} at eps = {eps}",
                    scale / 8.0
                )));
            }
            Ok((nodes, weights))
        })
        .collect::<Result<_>>()?;
    let (pts, wts) = tensor_nodes(&axes);
    Ok(compensated_sum(pts.iter().zip(&wts).map(|(x, w)| {
        let a = ext.eval_eps_unchecked(x, eps).get(0, 0);
        w * a.powi(p) * phi.eval(x, &x.scale(1.0 / eps))
    })))
}

/// `∫_Ω ∫_Y a(x, y)^p φ(x, y) dy dx` on the fixed reference grid; the `y`
/// grid is aligned with the cell origin at every `x`.
fn two_scale_integral(ext: &TwoScaleCoefficient, phi: &TestFunction, p: i32, exec: Exec) -> Result<f64> {
    let omega = *ext.omega();
    let dim = ext.dim();
    let m = reference_points(dim);
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
        .map(|k| {
            let breaks: Vec<f64> = match ext.partition() {
                Some(part) => part.cells().iter().flat_map(|c| [c.lower[k], c.upper[k]]).collect(),
                None => Vec::new(),
            };
            midpoint_nodes(omega.lower[k], omega.upper[k], &breaks, omega.side(k) / m as f64)
        })
        .collect();
    let (pts, wts) = tensor_nodes(&axes);
    let ny = m.pow(dim as u32);
    let inner = exec.try_map(&pts, |x| {
        let o = ext.cell_origin(x)?;
        let mut s = Neumaier::default();
        for flat in 0..ny {
            let mut rem = flat;
            let mut y = o;
            for k in (0..dim).rev() {
                let i = rem % m;
                rem /= m;
                y[k] = o[k] + (i as f64 + 0.5) / m as f64;
            }
            let a = ext.eval_xy_unchecked(x, &y).get(0, 0);
            s.add(a.powi(p) * phi.eval(x, &y));
        }
        Ok(s.total() / ny as f64)
    })?;
    Ok(compensated_sum(inner.iter().zip(&wts).map(|(v, w)| v * w)))
}

fn study_meta(ext: &TwoScaleCoefficient, phi: &TestFunction, p: i32, seq: &EpsSequence) -> Vec<(String, String)> {
    vec![
        ("field".into(), ext.field().label().into()),
        ("kind".into(), ext.kind().name().into()),
        ("eps_bar".into(), format!("{}", ext.eps_bar())),
        ("phi".into(), phi.name.clone()),
        ("p".into(), p.to_string()),
        ("ratio".into(), format!("{}", seq.ratio)),
        ("count".into(), seq.count.to_string()),
    ]
}

/// Oscillatory-integral limit with integrand `a φ`.
pub fn atf_integral_study(ext: &TwoScaleCoefficient, phi: &TestFunction, seq: &EpsSequence, quad_n: Option<usize>, exec: Exec) -> Result<StudyReport> {
    atf_power_study(ext, phi, 1, seq, quad_n, exec)
}

/// Oscillatory-integral limit with integrand `a^p φ`, `p ∈ {1, 2}`.
/// `quad_n` fixes the intervals per axis for every row; `None` picks, per
/// row, as many points per cube as the reference grid has per window.
pub fn atf_power_study(
    ext: &TwoScaleCoefficient,
    phi: &TestFunction,
    p: i32,
    seq: &EpsSequence,
    quad_n: Option<usize>,
    exec: Exec,
) -> Result<StudyReport> {
    scalar_field(ext)?;
    if !(1..=2).contains(&p) {
        return Err(HomogError::Parameter(format!("power must be 1 or 2, got {p}")));
    }
    if seq.eps_bar != ext.eps_bar() {
        return Err(HomogError::Consistency("sequence and extension disagree on eps_bar".into()));
    }
    let reference = two_scale_integral(ext, phi, p, exec)?;
    let eps = seq.values();
    let values = exec.try_map(&eps, |&e| oscillatory_integral(ext, phi, p, e, quad_n))?;
    Ok(StudyReport {
        rows: eps
            .iter()
            .zip(values)
            .map(|(&e, v)| StudyRow {
                label: String::new(),
                eps: e,
                value: v,
                reference,
                deviation: (v - reference).abs(),
            })
            .collect(),
        meta: study_meta(ext, phi, p, seq),
    })
}

/// Shared mesh of a `u_ε` study: `cells_per_eps` intervals per smallest ε.
pub fn study_mesh(omega: &DomainBox, eps_min: f64, cells_per_eps: usize) -> Result<Mesh> {
    let len = (0..omega.dim()).map(|k| omega.side(k)).fold(0.0, f64::max);
    let n = ((cells_per_eps as f64 * len / eps_min) - 1e-9).ceil() as usize;
    Mesh::new(*omega, n.max(16))
}

/// Solves with the semi-analytic formula in 1D, finite volumes otherwise.
pub fn solve_problem(problem: &DirichletProblem, mesh: &Mesh) -> Result<Solution> {
    if mesh.dim() == 1 {
        solve_semi_analytic(problem, mesh)
    } else {
        solve_fd(problem, mesh, SOLVE_TOL)
    }
}

/// `‖u_{ε_n} - u₀‖_{L²}` along the sequence (rows: value = error,
/// reference = `‖u₀‖_{L²}`, deviation = error / reference).
pub fn u_eps_study(
    ext: &TwoScaleCoefficient,
    a_field: &AveragedCoefficientField,
    f: Source,
    seq: &EpsSequence,
    cells_per_eps: usize,
    exec: Exec,
) -> Result<StudyReport> {
    let eps = seq.values();
    let mesh = study_mesh(ext.omega(), *eps.last().unwrap(), cells_per_eps)?;
    let u0 = solve_problem(&DirichletProblem::new(Coefficient::Averaged(a_field.clone()), f.clone()), &mesh)?;
    let zero = Solution::zeros(mesh);
    let norm0 = error_norms(&u0, &zero)?.l2;
    let errs = exec.try_map(&eps, |&e| {
        let problem = DirichletProblem::new(Coefficient::Oscillating { ext: ext.clone(), eps: e }, f.clone());
        let u = solve_problem(&problem, &mesh)?;
        error_norms(&u, &u0).map(|n| n.l2)
    })?;
    Ok(StudyReport {
        rows: eps
            .iter()
            .zip(errs)
            .map(|(&e, v)| StudyRow {
                label: String::new(),
                eps: e,
                value: v,
                reference: norm0,
                deviation: if norm0 > 0.0 { v / norm0 } else { v },
            })
            .collect(),
        meta: vec![
            ("field".into(), ext.field().label().into()),
            ("kind".into(), ext.kind().name().into()),
            ("eps_bar".into(), format!("{}", ext.eps_bar())),
            ("mesh".into(), mesh.n().to_string()),
        ],
    })
}

pub fn build_field(config: &PipelineConfig) -> Result<MicroCoefficient> {
    match &config.field {
        FieldSource::Synthetic(kind) => synthesize(&FieldSpec {
            kind: kind.clone(),
            omega: config.omega,
            margin: config.margin,
        }),
        FieldSource::File(path) => {
            let f = load_grid_field(path)?;
            let dom = f.omega();
            let same = dom.dim() == config.omega.dim()
                && (0..dom.dim()).all(|k| {
                    (dom.lower[k] - config.omega.lower[k]).abs() <= 1e-12 && (dom.upper[k] - config.omega.upper[k]).abs() <= 1e-12
                });
            if !same {
                return Err(HomogError::Consistency(format!(
                    "grid file covers {:?}..{:?}, config Ω is {:?}..{:?}",
                    dom.lower, dom.upper, config.omega.lower, config.omega.upper
                )));
            }
            extend_domain(&f, config.margin)
        }
    }
}

pub fn build_extension(config: &PipelineConfig, field: MicroCoefficient) -> Result<TwoScaleCoefficient> {
    match config.extension {
        ExtensionKind::Trivial => TwoScaleCoefficient::trivial(field),
        ExtensionKind::Continuous => TwoScaleCoefficient::continuous(field, config.eps_bar),
        ExtensionKind::Discrete => {
            let partition = match config.partition {
                PartitionKind::Uniform => None,
                PartitionKind::Single => {
                    let omega = config.omega;
                    Some(Partition::new(omega, vec![omega], vec![DomainBox::cube(&omega.center(), config.eps_bar)])?)
                }
            };
            TwoScaleCoefficient::discrete(field, config.eps_bar, partition)
        }
    }
}

pub fn cell_options(config: &PipelineConfig, exec: Exec) -> CellOptions {
    CellOptions {
        n: config.cell_n,
        quad_n: config.cell_quad_n,
        tol: config.cell_tol,
        exec,
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub report: StudyReport,
    pub dir: PathBuf,
    pub u: Solution,
    pub u0: Solution,
    pub u1: Solution,
    pub u0_baseline: Solution,
    pub averaged: AveragedCoefficientField,
    pub log: Vec<String>,
}

struct Log(Vec<String>);

impl Log {
    fn line(&mut self, s: impl Into<String>) {
        let s = s.into();
        log::info!("{s}");
        self.0.push(s);
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn norm_rows(label: &str, eps: f64, e: ErrorNorms, reference: ErrorNorms) -> [StudyRow; 2] {
    let rel = |v: f64, r: f64| if r > 0.0 { v / r } else { v };
    [
        StudyRow {
            label: format!("{label}_l2"),
            eps,
            value: e.l2,
            reference: reference.l2,
            deviation: rel(e.l2, reference.l2),
        },
        StudyRow {
            label: format!("{label}_h1"),
            eps,
            value: e.h1_semi,
            reference: reference.h1_semi,
            deviation: rel(e.h1_semi, reference.h1_semi),
        },
    ]
}

fn plot_script(dim: usize) -> String {
    let mut s = String::from("# gnuplot script for the pipeline curves\nset datafile separator ','\n");
    if dim == 1 {
        s.push_str(
            "set terminal pngcairo size 1500,450\n\
             set output 'pipeline.png'\n\
             set multiplot layout 1,3\n\
             set xlabel 'x'\n\
             set title 'micro coefficient'\n\
             plot 'field.csv' every ::1 using 1:2 with lines title 'a_M'\n\
             set title 'averaged coefficient'\n\
             plot 'averaged.csv' every ::1 using 1:2 with lines title 'A'\n\
             set title 'solutions'\n\
             plot 'u_fine.csv' every ::1 using 1:2 with lines title 'u', \\\n\
             \x20    'u0.csv' every ::1 using 1:2 with lines title 'u0', \\\n\
             \x20    'u0_corrected.csv' every ::1 using 1:2 with lines title 'u1'\n\
             unset multiplot\n",
        );
    } else {
        s.push_str(
            "set terminal pngcairo size 1500,450\n\
             set output 'pipeline.png'\n\
             set view map\n\
             set multiplot layout 1,3\n\
             set title 'micro coefficient'\n\
             splot 'field.csv' every ::1 using 1:2:3 with points palette pointsize 0.3 title 'a_M'\n\
             set title 'averaged coefficient A11'\n\
             splot 'averaged.csv' every ::1 using 1:2:3 with points palette pointsize 0.3 title 'A11'\n\
             set title 'upscaled solution'\n\
             splot 'u0.csv' every ::1 using 1:2:3 with points palette pointsize 0.3 title 'u0'\n\
             unset multiplot\n",
        );
    }
    s
}

fn write_field_csv(field: &MicroCoefficient, mesh: &Mesh, path: &Path) -> Result<()> {
    let dim = field.dim();
    let mut header: Vec<String> = (1..=dim).map(|k| if dim == 1 { "x".into() } else { format!("x{k}") }).collect();
    if field.is_isotropic() {
        header.push("a".into());
    } else {
        for i in 1..=dim {
            for j in 1..=dim {
                header.push(format!("a{i}{j}"));
            }
        }
    }
    let rows: Vec<Vec<f64>> = mesh
        .nodes()
        .iter()
        .map(|x| {
            let t = field.eval_clamped(x);
            let mut r = x.as_slice().to_vec();
            if field.is_isotropic() {
                r.push(t.get(0, 0));
            } else {
                r.extend(t.entries());
            }
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn pipeline_body(config: &PipelineConfig, exec: Exec, staging: &Path, log: &mut Log) -> Result<PipelineOutcome> {
    let field = stage("field", build_field(config))?;
    log.line(format!("field {} on Ω̃ with margin {}", field.label(), config.margin));
    let ext = stage("extension", build_extension(config, field.clone()))?;
    log.line(format!("extension {} with eps_bar {}", ext.kind().name(), ext.eps_bar()));
    let opts = cell_options(config, exec);
    let averaged = stage("averaging", averaged_field(&ext, Some(config.sample_spacing), &opts))?;
    log.line(format!(
        "averaged field: {} with {} tensors",
        averaged.mode().name(),
        averaged.samples().len()
    ));
    for w in &averaged.warnings {
        log.line(format!("warning: {w}"));
    }
    let baseline = averaged.arithmetic_baseline();
    let mesh = stage("mesh", Mesh::new(config.omega, config.mesh_n))?;
    let f = sine_source(config.source_amplitude, config.source_frequency);

    let u = stage(
        "fine solve",
        solve_problem(&DirichletProblem::new(Coefficient::Micro(field.clone()), f.clone()), &mesh),
    )?;
    let u0 = stage(
        "upscaled solve",
        solve_problem(&DirichletProblem::new(Coefficient::Averaged(averaged.clone()), f.clone()), &mesh),
    )?;
    let u0_baseline = stage(
        "baseline solve",
        solve_problem(&DirichletProblem::new(Coefficient::Averaged(baseline), f.clone()), &mesh),
    )?;
    for w in u.warnings.iter().chain(&u0.warnings) {
        log.line(format!("warning: {w}"));
    }
    let provider: Box<dyn CellProvider + '_> = stage(
        "corrector",
        match ext.kind() {
            ExtensionKind::Trivial => Ok(Box::new(NoCells) as Box<dyn CellProvider>),
            ExtensionKind::Continuous => {
                let lattice = averaged.lattice().expect("sampled field").clone();
                LatticeCells::new(&ext, &lattice, &opts).map(|p| Box::new(p) as Box<dyn CellProvider>)
            }
            ExtensionKind::Discrete => PartitionCells::new(&ext, &opts).map(|p| Box::new(p) as Box<dyn CellProvider>),
        },
    )?;
    let u1 = stage("corrector", corrector(&u0, provider.as_ref(), ext.eps_bar(), exec))?;

    let zero = Solution::zeros(mesh);
    let norms_u = stage("errors", error_norms(&u, &zero))?;
    let e0 = stage("errors", error_norms(&u0, &u))?;
    let e1 = stage("errors", error_norms(&u1, &u))?;
    let eb = stage("errors", error_norms(&u0_baseline, &u))?;
    let eps = ext.eps_bar();
    let mut rows = Vec::new();
    rows.extend(norm_rows("u0", eps, e0, norms_u));
    rows.extend(norm_rows("u1", eps, e1, norms_u));
    rows.extend(norm_rows("arith", eps, eb, norms_u));
    let report = StudyReport {
        rows,
        meta: vec![
            ("field".into(), field.label().into()),
            ("kind".into(), ext.kind().name().into()),
            ("eps_bar".into(), format!("{eps}")),
            ("mesh".into(), mesh.n().to_string()),
            ("seed".into(), config.seed.to_string()),
        ],
    };
    log.line(format!(
        "relative L2 error of u0: {:.6e}; corrected: {:.6e}; arithmetic baseline: {:.6e}",
        e0.l2 / norms_u.l2,
        e1.l2 / norms_u.l2,
        eb.l2 / norms_u.l2
    ));

    stage("export", write_field_csv(&field, &mesh, &staging.join("field.csv")))?;
    stage("export", averaged.write_csv(staging.join("averaged.csv"), &mesh.nodes()))?;
    stage("export", u.write_csv(staging.join("u_fine.csv")))?;
    stage("export", u0.write_csv(staging.join("u0.csv")))?;
    stage("export", u1.write_csv(staging.join("u0_corrected.csv")))?;
    stage("export", report.write_csv(staging.join("report.csv")))?;
    stage("export", fs::write(staging.join("plot.gp"), plot_script(mesh.dim())).map_err(HomogError::from))?;
    Ok(PipelineOutcome {
        report,
        dir: PathBuf::new(),
        u,
        u0,
        u1,
        u0_baseline,
        averaged,
        log: Vec::new(),
    })
}

/// End-to-end run into `config.output_dir`. Artifacts are staged and only
/// moved into place on success; on failure the directory holds only the
/// `FAILED` marker and the log.
pub fn run_pipeline(config: &PipelineConfig, exec: Exec) -> Result<PipelineOutcome> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let staging = dir.join(".staging");
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    let mut log = Log(Vec::new());
    log.line(format!("pipeline into {}", dir.display()));
    let result = pipeline_body(config, exec, &staging, &mut log);
    match result {
        Ok(mut out) => {
            for name in ARTIFACTS {
                fs::rename(staging.join(name), dir.join(name))?;
            }
            fs::remove_dir_all(&staging)?;
            let marker = dir.join(FAILED_MARKER);
            if marker.exists() {
                fs::remove_file(marker)?;
            }
            log.line("done");
            fs::write(dir.join(LOG_FILE), log.0.join("\n") + "\n")?;
            out.dir = dir;
            out.log = log.0;
            Ok(out)
        }
        Err(e) => {
            log.line(format!("failed: {e}"));
            let _ = fs::remove_dir_all(&staging);
            for name in ARTIFACTS {
                let p = dir.join(name);
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
            fs::write(dir.join(FAILED_MARKER), format!("{e}\n"))?;
            fs::write(dir.join(LOG_FILE), log.0.join("\n") + "\n")?;
            Err(e)
        }
    }
}
