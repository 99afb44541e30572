use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid specs differ: {0}")]
    SpecMismatch(String),
    #[error("operand is empty: {0}")]
    EmptyOperand(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("support leakage: L^p mass {mass:.3e} outside the target domain exceeds {tol:.3e}")]
    SupportLeakage { mass: f64, tol: f64 },
    #[error("bump centered at ({x:.4}, {y:.4}) with radius {radius:.4} is not compactly inside the domain")]
    BumpOutsideDomain { x: f64, y: f64, radius: f64 },
    #[error("domain is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("degenerate Jacobian: b = {b:.3e} at x = {x:.4}")]
    DegenerateJacobian { x: f64, b: f64 },
    #[error("chart point ({x:.4}, {y:.4}) has no inside neighbors")]
    NoInsideNeighbors { x: f64, y: f64 },
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("missing limit field")]
    MissingLimit,
    #[error("containment precondition fails: {0}")]
    Containment(String),
    #[error("operation not applicable: {0}")]
    NotApplicable(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
