//! Flat `key = value` configuration files with `#` comments and dotted keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HomogError, Result};
use crate::extension::ExtensionKind;
use crate::field::FieldKind;
use crate::geom::{DomainBox, Point};

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Synthetic(FieldKind),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionKind {
    Uniform,
    /// One cell `Ω` whose window is the ε̄-cube centred on Ω; valid only
    /// when every side of Ω is ε̄.
    Single,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub omega: DomainBox,
    pub field: FieldSource,
    /// Ω̃ = Ω expanded by this margin.
    pub margin: f64,
    pub extension: ExtensionKind,
    pub eps_bar: f64,
    pub partition: PartitionKind,
    pub sample_spacing: f64,
    pub cell_n: usize,
    pub cell_quad_n: usize,
    pub cell_tol: f64,
    pub mesh_n: usize,
    /// `amplitude · Π sin(frequency · x_k)`.
    pub source_amplitude: f64,
    pub source_frequency: f64,
    pub seq_ratio: f64,
    pub seq_count: usize,
    pub study_quad_n: Option<usize>,
    pub study_phi: String,
    pub study_p: i32,
    pub cells_per_eps: usize,
    pub output_dir: PathBuf,
}

pub const KEYS: &[&str] = &[
    "seed",
    "d",
    "omega.lower",
    "omega.upper",
    "field.kind",
    "field.value",
    "field.mean",
    "field.amplitude",
    "field.period",
    "field.a1",
    "field.a2",
    "field.tile",
    "field.fraction",
    "field.contrast",
    "field.cell",
    "field.path",
    "field.margin",
    "extension.kind",
    "eps_bar",
    "partition.kind",
    "sample.spacing",
    "cell.n",
    "cell.quad_n",
    "cell.tol",
    "mesh.n",
    "source.kind",
    "source.amplitude",
    "source.frequency",
    "seq.ratio",
    "seq.count",
    "study.quad_n",
    "study.phi",
    "study.p",
    "ueps.cells_per_eps",
    "output.dir",
];

pub const TEST_FUNCTIONS: &[&str] = &["one", "x-cos", "cos"];

impl PipelineConfig {
    pub fn dim(&self) -> usize {
        self.omega.dim()
    }
}

struct Values {
    map: BTreeMap<String, (String, usize)>,
}

impl Values {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(v, _)| v.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| HomogError::config(key, format!("expected a number, got `{v}`"))),
        }
    }

    fn uint_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| HomogError::config(key, format!("expected a non-negative integer, got `{v}`"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.uint_or(key, default as u64).map(|v| v as usize)
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    fn vector(&self, key: &str, default: &[f64], dim: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self.raw(key) {
            None => default.to_vec(),
            Some(s) => s
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| HomogError::config(key, format!("expected comma-separated numbers, got `{s}`")))
                })
                .collect::<Result<_>>()?,
        };
        match v.len() {
            1 => Ok(vec![v[0]; dim]),
            n if n == dim => Ok(v),
            n => Err(HomogError::config(key, format!("expected {dim} components, got {n}"))),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(HomogError::config(key, format!("{key} must be positive")))
    }
}

fn read_pairs(text: &str, into: &mut BTreeMap<String, (String, usize)>, origin_line: Option<usize>) -> Result<()> {
    for (i, line) in text.lines().enumerate() {
        let line_no = origin_line.unwrap_or(i + 1);
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| HomogError::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = k.trim();
        if !KEYS.contains(&key) {
            return Err(HomogError::config(key, "unknown key"));
        }
        into.insert(key.to_string(), (v.trim().to_string(), line_no));
    }
    Ok(())
}

pub fn parse_config_file(path: impl AsRef<Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text, overrides)
}

/// Parses config text, then applies `key=value` overrides, then validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<PipelineConfig> {
    let mut map = BTreeMap::new();
    read_pairs(text, &mut map, None)?;
    for o in overrides {
        if !o.contains('=') {
            let key = o.trim();
            return Err(HomogError::config(key, "override must look like key=value"));
        }
        read_pairs(o, &mut map, Some(0))?;
    }
    resolve(&Values { map })
}

fn resolve(v: &Values) -> Result<PipelineConfig> {
    let seed = v.uint_or("seed", 0)?;
    let dim = v.usize_or("d", 1)?;
    if !(1..=2).contains(&dim) {
        return Err(HomogError::config("d", format!("dimension must be 1 or 2, got {dim}")));
    }
    let lower = v.vector("omega.lower", &[0.0], dim)?;
    let upper = v.vector("omega.upper", &[1.0], dim)?;
    let omega = DomainBox::new(Point::new(&lower), Point::new(&upper))
        .map_err(|e| HomogError::config("omega.upper", e.to_string()))?;
    let eps_bar = v.f64_or("eps_bar", 0.1)?;
    positive("eps_bar", eps_bar)?;

    let kind = v.str_or("field.kind", "constant");
    let field = match kind {
        "constant" => FieldSource::Synthetic(FieldKind::Constant {
            value: positive("field.value", v.f64_or("field.value", 1.0)?)?,
        }),
        "layered" | "layered-1d" => FieldSource::Synthetic(FieldKind::Layered1d {
            mean: v.f64_or("field.mean", 2.0)?,
            amplitude: v.f64_or("field.amplitude", 1.0)?,
            period: positive("field.period", v.f64_or("field.period", eps_bar)?)?,
        }),
        "sinusoid" | "periodic-sinusoid" => FieldSource::Synthetic(FieldKind::PeriodicSinusoid {
            mean: v.f64_or("field.mean", 2.0)?,
            amplitude: v.f64_or("field.amplitude", 1.0)?,
            period: positive("field.period", v.f64_or("field.period", eps_bar)?)?,
        }),
        "checkerboard" | "checkerboard-2d" => FieldSource::Synthetic(FieldKind::Checkerboard2d {
            a1: positive("field.a1", v.f64_or("field.a1", 1.0)?)?,
            a2: positive("field.a2", v.f64_or("field.a2", 4.0)?)?,
            tile: positive("field.tile", v.f64_or("field.tile", eps_bar / 2.0)?)?,
        }),
        "laminate" | "laminate-2d" => FieldSource::Synthetic(FieldKind::Laminate2d {
            a1: positive("field.a1", v.f64_or("field.a1", 1.0)?)?,
            a2: positive("field.a2", v.f64_or("field.a2", 4.0)?)?,
            period: positive("field.period", v.f64_or("field.period", eps_bar)?)?,
            fraction: v.f64_or("field.fraction", 0.5)?,
        }),
        "random" | "seeded-random" => FieldSource::Synthetic(FieldKind::SeededRandom {
            seed,
            contrast: positive("field.contrast", v.f64_or("field.contrast", 10.0)?)?,
            cell: positive("field.cell", v.f64_or("field.cell", eps_bar / 8.0)?)?,
        }),
        "file" => FieldSource::File(PathBuf::from(
            v.raw("field.path")
                .ok_or_else(|| HomogError::config("field.path", "required when field.kind = file"))?,
        )),
        other => return Err(HomogError::config("field.kind", format!("unknown field kind `{other}`"))),
    };
    if let FieldSource::Synthetic(FieldKind::Checkerboard2d { .. } | FieldKind::Laminate2d { .. }) = field {
        if dim != 2 {
            return Err(HomogError::config("field.kind", format!("{kind} needs d = 2")));
        }
    }
    if let FieldSource::Synthetic(FieldKind::Laminate2d { fraction, .. }) = field {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(HomogError::config("field.fraction", "fraction must lie in (0, 1)"));
        }
    }

    let extension = match v.str_or("extension.kind", "continuous") {
        "trivial" => ExtensionKind::Trivial,
        "continuous" => ExtensionKind::Continuous,
        "discrete" => ExtensionKind::Discrete,
        other => return Err(HomogError::config("extension.kind", format!("unknown extension `{other}`"))),
    };
    let margin = positive("field.margin", v.f64_or("field.margin", eps_bar)?)?;
    if extension == ExtensionKind::Continuous && margin < 0.5 * eps_bar {
        return Err(HomogError::config("field.margin", "margin must be at least eps_bar/2"));
    }
    let partition = match v.str_or("partition.kind", "uniform") {
        "uniform" => PartitionKind::Uniform,
        "single" => PartitionKind::Single,
        other => return Err(HomogError::config("partition.kind", format!("unknown partition `{other}`"))),
    };
    let sample_spacing = positive("sample.spacing", v.f64_or("sample.spacing", eps_bar / 2.0)?)?;
    let cell_n = v.usize_or("cell.n", 128)?;
    if cell_n < 2 {
        return Err(HomogError::config("cell.n", "cell mesh needs at least 2 cells per axis"));
    }
    let cell_quad_n = v.usize_or("cell.quad_n", 4096)?;
    if cell_quad_n < 2 {
        return Err(HomogError::config("cell.quad_n", "need at least 2 quadrature points"));
    }
    let cell_tol = positive("cell.tol", v.f64_or("cell.tol", 1e-10)?)?;
    let mesh_n = v.usize_or("mesh.n", if dim == 1 { 4096 } else { 128 })?;
    if mesh_n < 4 {
        return Err(HomogError::config("mesh.n", "mesh needs at least 4 intervals"));
    }
    match v.str_or("source.kind", "sine") {
        "sine" => {}
        other => return Err(HomogError::config("source.kind", format!("unknown source `{other}`"))),
    }
    let source_amplitude = v.f64_or("source.amplitude", -3.0)?;
    let source_frequency = v.f64_or("source.frequency", 10.0)?;
    let seq_ratio = v.f64_or("seq.ratio", 0.5)?;
    if !(seq_ratio > 0.0 && seq_ratio < 1.0) {
        return Err(HomogError::config("seq.ratio", "ratio must lie in (0, 1)"));
    }
    let seq_count = v.usize_or("seq.count", 7)?;
    if seq_count == 0 {
        return Err(HomogError::config("seq.count", "count must be at least 1"));
    }
    let study_quad_n = v.raw("study.quad_n").map(|_| v.usize_or("study.quad_n", 0)).transpose()?;
    if study_quad_n == Some(0) {
        return Err(HomogError::config("study.quad_n", "must be positive"));
    }
    let study_phi = v.str_or("study.phi", "one").to_string();
    if !TEST_FUNCTIONS.contains(&study_phi.as_str()) {
        return Err(HomogError::config("study.phi", format!("unknown test function `{study_phi}`")));
    }
    let study_p = v.uint_or("study.p", 1)? as i32;
    if !(1..=2).contains(&study_p) {
        return Err(HomogError::config("study.p", "exponent must be 1 or 2"));
    }
    let cells_per_eps = v.usize_or("ueps.cells_per_eps", 8)?;
    if cells_per_eps == 0 {
        return Err(HomogError::config("ueps.cells_per_eps", "must be positive"));
    }
    let output_dir = PathBuf::from(v.str_or("output.dir", "out"));
    Ok(PipelineConfig {
        seed,
        omega,
        field,
        margin,
        extension,
        eps_bar,
        partition,
        sample_spacing,
        cell_n,
        cell_quad_n,
        cell_tol,
        mesh_n,
        source_amplitude,
        source_frequency,
        seq_ratio,
        seq_count,
        study_quad_n,
        study_phi,
        study_p,
        cells_per_eps,
        output_dir,
    })
}

fn join(p: &Point) -> String {
    p.as_slice().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ")
}

/// Serialises every resolved value, so that parsing gives the same config.
pub fn write_config(c: &PipelineConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("seed", c.seed.to_string());
    put("d", c.dim().to_string());
    put("omega.lower", join(&c.omega.lower));
    put("omega.upper", join(&c.omega.upper));
    put("eps_bar", format!("{}", c.eps_bar));
    match &c.field {
        FieldSource::File(p) => {
            put("field.kind", "file".into());
            put("field.path", p.display().to_string());
        }
        FieldSource::Synthetic(kind) => {
            put("field.kind", kind.name().into());
            match *kind {
                FieldKind::Constant { value } => put("field.value", format!("{value}")),
                FieldKind::Layered1d { mean, amplitude, period } | FieldKind::PeriodicSinusoid { mean, amplitude, period } => {
                    put("field.mean", format!("{mean}"));
                    put("field.amplitude", format!("{amplitude}"));
                    put("field.period", format!("{period}"));
                }
                FieldKind::Checkerboard2d { a1, a2, tile } => {
                    put("field.a1", format!("{a1}"));
                    put("field.a2", format!("{a2}"));
                    put("field.tile", format!("{tile}"));
                }
                FieldKind::Laminate2d { a1, a2, period, fraction } => {
                    put("field.a1", format!("{a1}"));
                    put("field.a2", format!("{a2}"));
                    put("field.period", format!("{period}"));
                    put("field.fraction", format!("{fraction}"));
                }
                FieldKind::SeededRandom { contrast, cell, .. } => {
                    put("field.contrast", format!("{contrast}"));
                    put("field.cell", format!("{cell}"));
                }
            }
        }
    }
    put("field.margin", format!("{}", c.margin));
    put("extension.kind", c.extension.name().into());
    put(
        "partition.kind",
        match c.partition {
            PartitionKind::Uniform => "uniform",
            PartitionKind::Single => "single",
        }
        .into(),
    );
    put("sample.spacing", format!("{}", c.sample_spacing));
    put("cell.n", c.cell_n.to_string());
    put("cell.quad_n", c.cell_quad_n.to_string());
    put("cell.tol", format!("{:e}", c.cell_tol));
    put("mesh.n", c.mesh_n.to_string());
    put("source.kind", "sine".into());
    put("source.amplitude", format!("{}", c.source_amplitude));
    put("source.frequency", format!("{}", c.source_frequency));
    put("seq.ratio", format!("{}", c.seq_ratio));
    put("seq.count", c.seq_count.to_string());
    if let Some(q) = c.study_quad_n {
        put("study.quad_n", q.to_string());
    }
    put("study.phi", c.study_phi.clone());
    put("study.p", c.study_p.to_string());
    put("ueps.cells_per_eps", c.cells_per_eps.to_string());
    put("output.dir", c.output_dir.display().to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse_config("d = 1\n", &[]).unwrap();
        assert_eq!(c.eps_bar, 0.1);
        assert_eq!(c.seq_ratio, 0.5);
        assert_eq!(c.seq_count, 7);
        assert_eq!(c.seed, 0);
        assert_eq!(c.extension, ExtensionKind::Continuous);
    }

    #[test]
    fn overrides_win() {
        let c = parse_config("eps_bar = 0.1 # window\n", &["eps_bar=0.2".into()]).unwrap();
        assert_eq!(c.eps_bar, 0.2);
    }

    #[test]
    fn rejections_name_the_key() {
        match parse_config("eps_bar = -1\n", &[]) {
            Err(HomogError::Config { key, msg }) => {
                assert_eq!(key, "eps_bar");
                assert_eq!(msg, "eps_bar must be positive");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("bogus = 1\n", &[]), Err(HomogError::Config { key, .. }) if key == "bogus"));
        assert!(matches!(parse_config("cell.n = many\n", &[]), Err(HomogError::Config { key, .. }) if key == "cell.n"));
        assert!(matches!(parse_config("no equals sign\n", &[]), Err(HomogError::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trip() {
        let text = "d = 2\nfield.kind = random\nseed = 9\nextension.kind = discrete\nstudy.quad_n = 1000\n";
        let c = parse_config(text, &[]).unwrap();
        assert_eq!(parse_config(&write_config(&c), &[]).unwrap(), c);
    }
}
