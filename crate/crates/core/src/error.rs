use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: half-width {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coin at site {site} is not unitary (deviation {deviation:.3e})")]
    NonUnitaryCoin { site: i64, deviation: f64 },

    #[error("nonlinearity matrix is not Hermitian (deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("no discrete eigenvalue found on the {0} branch")]
    NoDiscreteEigenvalue(&'static str),

    #[error("eigenangle {lambda} lies in the essential band |cos| <= {band}")]
    InEssentialBand { lambda: f64, band: f64 },

    #[error("tail is not small from x0 = {x0}: sum of |V| = {sum:.3e}")]
    TailNotSmall { x0: i64, sum: f64 },

    #[error("resolvent is near-singular: distance {0:.3e} to a retained eigenphase")]
    NearSingular(f64),

    #[error("r = {r} is outside the admissible interval [0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },

    #[error("contraction failed at r = {r}: ratio {ratio:.3}")]
    NotContracting { r: f64, ratio: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("interpolation error {0:.3e} exceeds the cache tolerance")]
    InterpolationInaccurate(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("wrap-around contamination: boundary mass {mass:.3e} at t = {t}")]
    WrapContamination { t: usize, mass: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
