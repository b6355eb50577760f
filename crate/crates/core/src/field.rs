//! The micro-scale coefficient `a_M` on the extended box Ω̃: synthesis of
//! reproducible test fields, grid-file ingestion and domain extension.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HomogError, Result};
use crate::geom::{DomainBox, Point, Tensor};

pub type Evaluator = Arc<dyn Fn(&Point) -> Tensor + Send + Sync>;

/// A symmetric, uniformly elliptic coefficient field known on Ω̃ ⊇ Ω.
#[derive(Clone)]
pub struct MicroCoefficient {
    omega: DomainBox,
    omega_tilde: DomainBox,
    eval: Evaluator,
    alpha: f64,
    beta: f64,
    isotropic: bool,
    label: String,
}

impl fmt::Debug for MicroCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MicroCoefficient")
            .field("label", &self.label)
            .field("omega", &self.omega)
            .field("omega_tilde", &self.omega_tilde)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish()
    }
}

impl MicroCoefficient {
    /// Isotropic field `f(z) I`. `alpha`/`beta` must bound `f` on Ω̃.
    pub fn from_scalar_fn(
        omega: DomainBox,
        omega_tilde: DomainBox,
        alpha: f64,
        beta: f64,
        label: impl Into<String>,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let dim = omega.dim();
        Self::build(omega, omega_tilde, alpha, beta, true, label.into(), Arc::new(move |z| Tensor::scalar(dim, f(z))))
    }

    /// General symmetric tensor field.
    pub fn from_tensor_fn(
        omega: DomainBox,
        omega_tilde: DomainBox,
        alpha: f64,
        beta: f64,
        label: impl Into<String>,
        f: impl Fn(&Point) -> Tensor + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build(omega, omega_tilde, alpha, beta, false, label.into(), Arc::new(f))
    }

    fn build(
        omega: DomainBox,
        omega_tilde: DomainBox,
        alpha: f64,
        beta: f64,
        isotropic: bool,
        label: String,
        eval: Evaluator,
    ) -> Result<Self> {
        if omega.dim() != omega_tilde.dim() {
            return Err(HomogError::Parameter("Ω and Ω̃ differ in dimension".into()));
        }
        if !omega_tilde.contains_box(&omega, 0.0) {
            return Err(HomogError::Parameter("Ω̃ must contain Ω".into()));
        }
        if !(alpha > 0.0) || !(beta >= alpha) || !beta.is_finite() {
            return Err(HomogError::Ellipticity(format!(
                "bounds must satisfy 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(MicroCoefficient {
            omega,
            omega_tilde,
            eval,
            alpha,
            beta,
            isotropic,
            label,
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn omega(&self) -> &DomainBox {
        &self.omega
    }

    pub fn omega_tilde(&self) -> &DomainBox {
        &self.omega_tilde
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `a_M(z)` for `z` in the closed box Ω̃.
    pub fn eval(&self, z: &Point) -> Result<Tensor> {
        self.omega_tilde.check(z, "a_M evaluation point")?;
        Ok((self.eval)(z))
    }

    /// `a_M` at the nearest point of Ω̃. Used by the extensions, whose
    /// evaluation points can leave Ω̃ only through rounding.
    #[inline]
    pub fn eval_clamped(&self, z: &Point) -> Tensor {
        (self.eval)(&self.omega_tilde.clamp(z))
    }

    #[inline]
    pub fn scalar_clamped(&self, z: &Point) -> f64 {
        self.eval_clamped(z).get(0, 0)
    }

    fn require_isotropic(&self, what: &str) -> Result<()> {
        if self.isotropic {
            Ok(())
        } else {
            Err(HomogError::Unsupported(format!("{what} needs a scalar isotropic field")))
        }
    }

    /// Pointwise `c1 a + c2 b` of two scalar fields on the same domains.
    pub fn combine(c1: f64, a: &MicroCoefficient, c2: f64, b: &MicroCoefficient) -> Result<Self> {
        a.require_isotropic("combine")?;
        b.require_isotropic("combine")?;
        if a.omega != b.omega || a.omega_tilde != b.omega_tilde {
            return Err(HomogError::Consistency("combined fields must share Ω and Ω̃".into()));
        }
        if c1 < 0.0 || c2 < 0.0 {
            return Err(HomogError::Parameter("combination weights must be non-negative".into()));
        }
        let (fa, fb) = (a.eval.clone(), b.eval.clone());
        let dim = a.dim();
        Self::build(
            a.omega,
            a.omega_tilde,
            c1 * a.alpha + c2 * b.alpha,
            c1 * a.beta + c2 * b.beta,
            true,
            format!("{c1}*({}) + {c2}*({})", a.label, b.label),
            Arc::new(move |z| Tensor::scalar(dim, c1 * fa(z).get(0, 0) + c2 * fb(z).get(0, 0))),
        )
    }

    /// Pointwise integer power of a scalar field.
    pub fn powi(&self, p: i32) -> Result<Self> {
        self.require_isotropic("powi")?;
        if p < 1 {
            return Err(HomogError::Parameter("power must be >= 1".into()));
        }
        let f = self.eval.clone();
        let dim = self.dim();
        Self::build(
            self.omega,
            self.omega_tilde,
            self.alpha.powi(p),
            self.beta.powi(p),
            true,
            format!("({})^{p}", self.label),
            Arc::new(move |z| Tensor::scalar(dim, f(z).get(0, 0).powi(p))),
        )
    }
}

/// Extends a field known on Ω to Ω̃ = Ω + margin by nearest-point clamping.
pub fn extend_domain(field: &MicroCoefficient, margin: f64) -> Result<MicroCoefficient> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(HomogError::Parameter(format!("margin must be positive, got {margin}")));
    }
    let omega = field.omega;
    let inner = field.eval.clone();
    MicroCoefficient::build(
        omega,
        omega.expand(margin),
        field.alpha,
        field.beta,
        field.isotropic,
        field.label.clone(),
        Arc::new(move |z| inner(&omega.clamp(z))),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    Constant { value: f64 },
    /// `mean + amplitude sin(2π z₁ / period)`.
    Layered1d { mean: f64, amplitude: f64, period: f64 },
    /// `mean + amplitude Π_k sin(2π z_k / period)`.
    PeriodicSinusoid { mean: f64, amplitude: f64, period: f64 },
    /// Tile `(i, j, ..)` takes `a1` when the index sum is even.
    Checkerboard2d { a1: f64, a2: f64, tile: f64 },
    /// `a1` on the first `fraction` of each period along axis 1, else `a2`.
    Laminate2d { a1: f64, a2: f64, period: f64, fraction: f64 },
    /// Log-uniform node values in `[1, contrast]` on a grid of spacing
    /// `cell`, one box-filter pass, multilinear in between.
    SeededRandom { seed: u64, contrast: f64, cell: f64 },
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Constant { .. } => "constant",
            FieldKind::Layered1d { .. } => "layered-1d",
            FieldKind::PeriodicSinusoid { .. } => "periodic-sinusoid",
            FieldKind::Checkerboard2d { .. } => "checkerboard-2d",
            FieldKind::Laminate2d { .. } => "laminate-2d",
            FieldKind::SeededRandom { .. } => "seeded-random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub omega: DomainBox,
    /// Ω̃ = Ω expanded by this margin on every side; the formulas are
    /// evaluated natively there.
    pub margin: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HomogError::Parameter(format!("{name} must be positive, got {v}")))
    }
}

/// Builds the field described by `spec`; `alpha`/`beta` are the exact
/// extrema of the formula.
pub fn synthesize(spec: &FieldSpec) -> Result<MicroCoefficient> {
    if !(spec.margin >= 0.0) || !spec.margin.is_finite() {
        return Err(HomogError::Parameter(format!("margin must be non-negative, got {}", spec.margin)));
    }
    let omega = spec.omega;
    let tilde = omega.expand(spec.margin);
    let dim = omega.dim();
    let label = format!("{:?}", spec.kind);
    match spec.kind {
        FieldKind::Constant { value } => {
            positive("constant value", value)?;
            MicroCoefficient::from_scalar_fn(omega, tilde, value, value, label, move |_| value)
        }
        FieldKind::Layered1d { mean, amplitude, period } => {
            positive("period", period)?;
            positive("contrast (mean - |amplitude|)", mean - amplitude.abs())?;
            let w = 2.0 * std::f64::consts::PI / period;
            MicroCoefficient::from_scalar_fn(
                omega,
                tilde,
                mean - amplitude.abs(),
                mean + amplitude.abs(),
                label,
                move |z| mean + amplitude * (w * z[0]).sin(),
            )
        }
        FieldKind::PeriodicSinusoid { mean, amplitude, period } => {
            positive("period", period)?;
            positive("contrast (mean - |amplitude|)", mean - amplitude.abs())?;
            let w = 2.0 * std::f64::consts::PI / period;
            MicroCoefficient::from_scalar_fn(
                omega,
                tilde,
                mean - amplitude.abs(),
                mean + amplitude.abs(),
                label,
                move |z| {
                    let s: f64 = (0..dim).map(|k| (w * z[k]).sin()).product();
                    mean + amplitude * s
                },
            )
        }
        FieldKind::Checkerboard2d { a1, a2, tile } => {
            positive("a1", a1)?;
            positive("a2", a2)?;
            positive("tile", tile)?;
            let lo = omega.lower;
            MicroCoefficient::from_scalar_fn(omega, tilde, a1.min(a2), a1.max(a2), label, move |z| {
                let parity: i64 = (0..dim).map(|k| ((z[k] - lo[k]) / tile).floor() as i64).sum();
                if parity.rem_euclid(2) == 0 {
                    a1
                } else {
                    a2
                }
            })
        }
        FieldKind::Laminate2d { a1, a2, period, fraction } => {
            positive("a1", a1)?;
            positive("a2", a2)?;
            positive("period", period)?;
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(HomogError::Parameter(format!("fraction must lie in (0,1), got {fraction}")));
            }
            let lo = omega.lower[0];
            MicroCoefficient::from_scalar_fn(omega, tilde, a1.min(a2), a1.max(a2), label, move |z| {
                let t = (z[0] - lo) / period;
                if t - t.floor() < fraction {
                    a1
                } else {
                    a2
                }
            })
        }
        FieldKind::SeededRandom { seed, contrast, cell } => {
            positive("contrast", contrast)?;
            positive("cell", cell)?;
            if contrast > 100.0 {
                return Err(HomogError::Parameter(format!("contrast is capped at 100, got {contrast}")));
            }
            let grid = RandomGrid::generate(&tilde, seed, contrast, cell);
            let (alpha, beta) = grid.extrema();
            let grid = Arc::new(grid);
            MicroCoefficient::from_scalar_fn(omega, tilde, alpha, beta, label, move |z| grid.interpolate(z))
        }
    }
}

/// Node values of the seeded random field.
struct RandomGrid {
    origin: Point,
    spacing: Point,
    counts: Vec<usize>,
    values: Vec<f64>,
}

impl RandomGrid {
    fn generate(tilde: &DomainBox, seed: u64, contrast: f64, cell: f64) -> Self {
        let dim = tilde.dim();
        let counts: Vec<usize> = (0..dim).map(|k| (tilde.side(k) / cell).ceil() as usize + 1).collect();
        let spacing = Point::new(&(0..dim).map(|k| tilde.side(k) / (counts[k] - 1) as f64).collect::<Vec<_>>());
        let total: usize = counts.iter().product();
        let (lo, hi) = (contrast.min(1.0).ln(), contrast.max(1.0).ln());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..total).map(|_| (lo + (hi - lo) * rng.gen::<f64>()).exp()).collect();

        // one pass of a 3^d box filter, truncated at the edges
        let mut values = vec![0.0; total];
        for (flat, out) in values.iter_mut().enumerate() {
            let idx = unflatten(flat, &counts);
            let mut sum = 0.0;
            let mut n = 0usize;
            for off in 0..3usize.pow(dim as u32) {
                let mut nb = Vec::with_capacity(dim);
                let mut o = off;
                let mut inside = true;
                for k in 0..dim {
                    let delta = (o % 3) as isize - 1;
                    o /= 3;
                    let j = idx[k] as isize + delta;
                    if j < 0 || j >= counts[k] as isize {
                        inside = false;
                        break;
                    }
                    nb.push(j as usize);
                }
                if inside {
                    sum += raw[flatten(&nb, &counts)];
                    n += 1;
                }
            }
            *out = sum / n as f64;
        }
        RandomGrid {
            origin: tilde.lower,
            spacing,
            counts,
            values,
        }
    }

    fn extrema(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }

    fn interpolate(&self, z: &Point) -> f64 {
        let dim = self.counts.len();
        let mut base = [0usize; crate::geom::MAX_DIM];
        let mut frac = [0.0f64; crate::geom::MAX_DIM];
        for k in 0..dim {
            let t = ((z[k] - self.origin[k]) / self.spacing[k]).max(0.0);
            let i = (t.floor() as usize).min(self.counts[k] - 2);
            base[k] = i;
            frac[k] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        let mut nb = [0usize; crate::geom::MAX_DIM];
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            for k in 0..dim {
                let up = (corner >> k) & 1;
                nb[k] = base[k] + up;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.values[flatten(&nb[..dim], &self.counts)];
            }
        }
        acc
    }
}

fn flatten(idx: &[usize], counts: &[usize]) -> usize {
    idx.iter().zip(counts).fold(0, |acc, (i, n)| acc * n + i)
}

fn unflatten(mut flat: usize, counts: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; counts.len()];
    for k in (0..counts.len()).rev() {
        idx[k] = flat % counts[k];
        flat /= counts[k];
    }
    idx
}

/// Reads a grid-field file; see [`parse_grid_field`].
pub fn load_grid_field(path: impl AsRef<Path>) -> Result<MicroCoefficient> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_grid_field(&text)
}

/// Parses the plain-text grid-field format:
///
/// ```text
/// # comment
/// d n1 [n2]
/// lower_1 .. lower_d upper_1 .. upper_d
/// v ... (n1 x n2 values, row-major)
/// ```
///
/// The result is piecewise constant over half-open cells, isotropic `v I`.
pub fn parse_grid_field(text: &str) -> Result<MicroCoefficient> {
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content.split_whitespace().map(move |t| (i + 1, t))
    });
    let last_line = text.lines().count().max(1);
    let mut next_num = |what: &str| -> Result<(usize, f64)> {
        let (line, tok) = tokens.next().ok_or_else(|| HomogError::Parse {
            line: last_line,
            msg: format!("unexpected end of file while reading {what}"),
        })?;
        let v: f64 = tok.parse().map_err(|_| HomogError::Parse {
            line,
            msg: format!("cannot parse {what} from `{tok}`"),
        })?;
        Ok((line, v))
    };

    let (line, d) = next_num("dimension")?;
    if d != 1.0 && d != 2.0 {
        return Err(HomogError::Parse {
            line,
            msg: format!("dimension must be 1 or 2, got {d}"),
        });
    }
    let d = d as usize;
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let (line, n) = next_num("cell count")?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(HomogError::Parse {
                line,
                msg: format!("cell count n{} must be a positive integer, got {n}", k + 1),
            });
        }
        counts.push(n as usize);
    }
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for _ in 0..d {
        lower.push(next_num("lower corner")?.1);
    }
    let mut corner_line = 0;
    for _ in 0..d {
        let (l, v) = next_num("upper corner")?;
        corner_line = l;
        upper.push(v);
    }
    let bbox = DomainBox::new(Point::new(&lower), Point::new(&upper)).map_err(|e| HomogError::Parse {
        line: corner_line,
        msg: e.to_string(),
    })?;
    let total: usize = counts.iter().product();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        let (line, v) = next_num("cell value")?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(HomogError::Parse {
                line,
                msg: format!("non-elliptic value {v}"),
            });
        }
        values.push(v);
    }
    if let Some((line, tok)) = tokens.next() {
        return Err(HomogError::Parse {
            line,
            msg: format!("dimension mismatch: more than {total} values (extra `{tok}`)"),
        });
    }
    let (alpha, beta) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let values = Arc::new(values);
    let h: Vec<f64> = (0..d).map(|k| bbox.side(k) / counts[k] as f64).collect();
    let lo = bbox.lower;
    MicroCoefficient::from_scalar_fn(bbox, bbox, alpha, beta, "grid-file", move |z| {
        let idx: Vec<usize> = (0..d)
            .map(|k| {
                let t = ((z[k] - lo[k]) / h[k]).floor();
                (t.max(0.0) as usize).min(counts[k] - 1)
            })
            .collect();
        values[flatten(&idx, &counts)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Halton;

    fn unit1() -> DomainBox {
        DomainBox::interval(0.0, 1.0).unwrap()
    }

    fn spec(kind: FieldKind, omega: DomainBox) -> FieldSpec {
        FieldSpec { kind, omega, margin: 0.05 }
    }

    #[test]
    fn constant_field_evaluates_to_its_value() {
        let f = synthesize(&spec(FieldKind::Constant { value: 3.0 }, unit1())).unwrap();
        assert_eq!(f.eval(&Point::x(0.5)).unwrap(), Tensor::scalar(1, 3.0));
        let f2 = synthesize(&spec(FieldKind::Constant { value: 2.0 }, unit1())).unwrap();
        assert_eq!((f2.alpha(), f2.beta()), (2.0, 2.0));
    }

    #[test]
    fn layered_field_formula() {
        let kind = FieldKind::Layered1d { mean: 2.0, amplitude: 1.0, period: 0.1 };
        let f = synthesize(&spec(kind, unit1())).unwrap();
        let v = f.eval(&Point::x(0.025)).unwrap().get(0, 0);
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_extrema() {
        let kind = FieldKind::PeriodicSinusoid { mean: 2.0, amplitude: 1.0, period: 0.1 };
        let f = synthesize(&spec(kind, unit1())).unwrap();
        assert_eq!((f.alpha(), f.beta()), (1.0, 3.0));
    }

    #[test]
    fn checkerboard_parity() {
        let kind = FieldKind::Checkerboard2d { a1: 1.0, a2: 4.0, tile: 0.05 };
        let f = synthesize(&spec(kind, DomainBox::unit(2))).unwrap();
        assert_eq!(f.eval(&Point::xy(0.01, 0.01)).unwrap(), Tensor::scalar(2, 1.0));
        assert_eq!(f.eval(&Point::xy(0.06, 0.01)).unwrap(), Tensor::scalar(2, 4.0));
        // tile boundaries are half-open
        assert_eq!(f.eval(&Point::xy(0.05, 0.0)).unwrap(), Tensor::scalar(2, 4.0));
    }

    #[test]
    fn out_of_domain_names_coordinate() {
        let f = synthesize(&spec(FieldKind::Constant { value: 1.0 }, DomainBox::unit(2))).unwrap();
        let err = f.eval(&Point::xy(0.5, 1.2)).unwrap_err();
        assert!(matches!(err, HomogError::Domain { axis: 1, .. }), "{err}");
    }

    #[test]
    fn non_positive_contrast_rejected() {
        let bad = [
            FieldKind::Constant { value: 0.0 },
            FieldKind::Layered1d { mean: 1.0, amplitude: 1.0, period: 0.1 },
            FieldKind::Checkerboard2d { a1: -1.0, a2: 4.0, tile: 0.05 },
            FieldKind::SeededRandom { seed: 1, contrast: 0.0, cell: 0.01 },
            FieldKind::SeededRandom { seed: 1, contrast: 1000.0, cell: 0.01 },
        ];
        for kind in bad {
            assert!(matches!(synthesize(&spec(kind, unit1())), Err(HomogError::Parameter(_))));
        }
    }

    #[test]
    fn seeded_random_is_deterministic() {
        let kind = FieldKind::SeededRandom { seed: 42, contrast: 10.0, cell: 0.0125 };
        let a = synthesize(&spec(kind.clone(), DomainBox::unit(2))).unwrap();
        let b = synthesize(&spec(kind, DomainBox::unit(2))).unwrap();
        for p in Halton::new(2, 0).take(500) {
            let p = a.omega().lower.zip(&p, |_, t| t);
            assert_eq!(a.eval(&p).unwrap().get(0, 0).to_bits(), b.eval(&p).unwrap().get(0, 0).to_bits());
        }
    }

    #[test]
    fn extend_domain_clamps() {
        let f = MicroCoefficient::from_scalar_fn(unit1(), unit1(), 1e-3, 1.0, "x", |z| z[0].max(1e-3)).unwrap();
        assert!(matches!(extend_domain(&f, 0.0), Err(HomogError::Parameter(_))));
        let g = extend_domain(&f, 0.05).unwrap();
        assert_eq!(g.omega_tilde().lower[0], -0.05);
        assert_eq!(g.eval(&Point::x(-0.02)).unwrap().get(0, 0), 1e-3);
        assert_eq!(g.eval(&Point::x(1.03)).unwrap().get(0, 0), 1.0);
        assert_eq!(g.eval(&Point::x(0.4)).unwrap().get(0, 0), 0.4);
        assert_eq!((g.alpha(), g.beta()), (f.alpha(), f.beta()));
    }

    #[test]
    fn extend_constant() {
        let f = synthesize(&FieldSpec { kind: FieldKind::Constant { value: 2.5 }, omega: unit1(), margin: 0.0 }).unwrap();
        let g = extend_domain(&f, 0.05).unwrap();
        assert_eq!(g.eval(&Point::x(-0.05)).unwrap().get(0, 0), 2.5);
        assert_eq!(g.eval(&Point::x(1.05)).unwrap().get(0, 0), 2.5);
    }

    #[test]
    fn grid_file_lookup_and_validation() {
        let f = parse_grid_field("1 3\n0 1\n2 2 2\n").unwrap();
        for x in [0.0, 0.3, 0.999, 1.0] {
            assert_eq!(f.eval(&Point::x(x)).unwrap().get(0, 0), 2.0);
        }
        let f = parse_grid_field("# two cells\n1 2\n0 1\n1 4\n").unwrap();
        assert_eq!(f.eval(&Point::x(0.75)).unwrap().get(0, 0), 4.0);
        assert_eq!(f.eval(&Point::x(0.5)).unwrap().get(0, 0), 4.0);
        assert_eq!(f.eval(&Point::x(0.25)).unwrap().get(0, 0), 1.0);

        let err = parse_grid_field("1 2\n0 1\n1\n0\n").unwrap_err();
        match err {
            HomogError::Parse { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("non-elliptic value"));
            }
            other => panic!("{other}"),
        }
        assert!(matches!(parse_grid_field("3 2\n"), Err(HomogError::Parse { line: 1, .. })));
        assert!(matches!(parse_grid_field("1 2\n0 1\n1 2 3\n"), Err(HomogError::Parse { line: 3, .. })));
        assert!(matches!(parse_grid_field("1 2\n0 1\n1\n"), Err(HomogError::Parse { .. })));
    }

    #[test]
    fn grid_file_2d_row_major() {
        let f = parse_grid_field("2 2 3\n0 0 1 1\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(f.eval(&Point::xy(0.1, 0.9)).unwrap().get(0, 0), 3.0);
        assert_eq!(f.eval(&Point::xy(0.9, 0.1)).unwrap().get(0, 0), 4.0);
    }
}
