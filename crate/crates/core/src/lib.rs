//! Angle fields of plane foliations, the degenerate parabolic equation they
//! satisfy, and the curve shortening flow of their leaves.

pub mod catalog;
pub mod crossval;
pub mod csf;
pub mod curve;
pub mod error;
pub mod foliation;
pub mod field;
pub mod geom;
pub mod initial;
pub mod pde;
pub mod source;

pub use catalog::CatalogSolution;
pub use curve::Curve;
pub use error::{Error, Result};
pub use field::{wrap_angle, wrapped_diff, AngleField, Grid2D};
pub use geom::{Sym2, Vec2, Window};
pub use source::AngleSource;
