use thiserror::Error;

use crate::field::AngleField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("node ({i}, {j}) lacks a full stencil")]
    BoundaryNode { i: usize, j: usize },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The evaluation point lies on or near a catalog solution's singular locus.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("curve extinct at t = {t}")]
    Extinction { t: f64 },

    /// A non-finite value appeared; the offending field is attached for diagnosis.
    #[error("non-finite value at node ({i}, {j}) after step {step}")]
    NonFinite {
        i: usize,
        j: usize,
        step: usize,
        snapshot: Box<AngleField>,
    },
}

impl Error {
    pub(crate) fn out_of_domain(p: crate::Vec2) -> Self {
        Error::OutOfDomain { x: p.x, y: p.y }
    }
}
