//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),
    #[error("support error: {0}")]
    Support(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("file format error: {0}")]
    Format(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("symbol error: {0}")]
    Symbol(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("operator precondition violated: {0}")]
    Precondition(String),
    #[error("cost cap exceeded: {0}")]
    CostCap(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("tolerance violated: {0}")]
    Tolerance(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
