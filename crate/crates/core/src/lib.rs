//! Numerical homogenization of linear elliptic problems with non-periodic
//! coefficients via two-scale extensions.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod extension;
pub mod field;
pub mod geom;
pub mod cell;
pub mod upscale;
pub mod linalg;
pub mod solve;
pub mod config;
pub mod lab;

pub use error::{HomogError, Result};
pub use exec::Exec;
pub use extension::{ExtensionKind, Partition, TwoScaleCoefficient};
pub use field::{FieldKind, FieldSpec, MicroCoefficient};
pub use geom::{DomainBox, Point, Tensor};
