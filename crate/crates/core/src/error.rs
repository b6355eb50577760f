use thiserror::Error;

pub type Result<T, E = HomogError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HomogError {
    #[error("{what}: coordinate {axis} = {value} outside [{lower}, {upper}]")]
    Domain {
        what: String,
        axis: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("ellipticity violated: {0}")]
    Ellipticity(String),

    #[error("{msg} (residual {residual:e})")]
    Numerical { msg: String, residual: f64 },

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("under-resolved quadrature: {0}")]
    Resolution(String),

    #[error("periodicity mismatch: {0}")]
    Mismatch(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<HomogError>,
    },

    #[error("at {point:?}: {source}")]
    AtPoint {
        point: Vec<f64>,
        #[source]
        source: Box<HomogError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HomogError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        HomogError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        HomogError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn at_point(self, p: &crate::geom::Point) -> Self {
        HomogError::AtPoint {
            point: p.as_slice().to_vec(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            HomogError::Numerical { .. } | HomogError::Mismatch(_) => true,
            HomogError::Stage { source, .. } | HomogError::AtPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
