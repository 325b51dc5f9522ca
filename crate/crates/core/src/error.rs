//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::fv_solver::DensityField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid domain mask: {0}")]
    InvalidMask(String),

    #[error("shape mismatch: expected {expected:?} cells, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{} walkable cell(s) cannot reach any exit", .cells.len())]
    Disconnected { cells: Vec<usize> },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel radius {radius} is under-resolved on a grid with spacing {spacing}; need spacing <= {required}")]
    UnderResolvedKernel {
        radius: f64,
        spacing: f64,
        required: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("population index {index} out of range ({len} populations)")]
    PopulationOutOfRange { index: usize, len: usize },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite density in population {population} at t = {t}")]
    NonFinite {
        t: f64,
        population: usize,
        last_good: Box<DensityField>,
    },

    #[error("fixed-point iteration diverged at t = {t}; contraction factors {factors:?}")]
    PicardDiverged { t: f64, factors: Vec<f64> },

    #[error("population {population} reached the grid edge at t = {t} (relative edge mass {edge_mass:e})")]
    SupportAtEdge {
        t: f64,
        population: usize,
        edge_mass: f64,
    },

    #[error("measures have different masses: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("measure support has {size} atoms; the limit is {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("measure is empty")]
    EmptyMeasure,

    #[error("trajectory is unusable: {0}")]
    InvalidTrajectory(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised while the solver was running (as opposed to bad input).
    pub fn is_solver_abort(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::PicardDiverged { .. }
                | Error::SupportAtEdge { .. }
                | Error::CflViolation { .. }
        )
    }
}
