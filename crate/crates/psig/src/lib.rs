//! Numerical pseudodifferential operators on model half-spaces and wedges.
//!
//! The crate implements, at desk scale, the operator constructions used in
//! the analysis of elliptic boundary value problems on half-spaces and on
//! intersections of half-spaces: quantization of symbols, residue-calculus
//! actions on boundary distributions `g x delta(rho)`, Volterra actions on
//! half-space functions, Dirichlet-to-Neumann, Poisson and Green operators,
//! and plain/weighted Sobolev norms.  Every Sobolev estimate these
//! constructions satisfy is wired into a verification harness: the
//! [`checks`] registry holds one named check per estimate, each of which
//! drives an operator over a dyadic input family and fits the log-log slope
//! of the norm ratios.
//!
//! Modules map one-to-one onto the toolkit's layers:
//!
//! - [`grid`]: periodic grids, full/partial discrete transforms, extension
//!   by zero, boundary restriction, binary grid-file I/O.
//! - [`expr`]: the small expression grammar used to describe symbols and
//!   operator coefficients in config files.
//! - [`symbol`]: symbol classes with optional meromorphic pole data and the
//!   symbol-level calculus (eta derivative, cutoff, boundary symbol, Lambda
//!   powers, decomposition).
//! - [`halfspace`]: actions of operators on volume and boundary data.
//! - [`sobolev`]: plain, fractional and weighted norms, the extension
//!   ladder, and the estimate-fitting harness.
//! - [`bvp`]: the model second-order elliptic operator and its boundary
//!   machinery.
//! - [`wedge`]: face geometry and the cross-face / self-face operators with
//!   the weighted estimate drivers.
//! - [`checks`]: the named estimate checks behind a common trait, selected
//!   at runtime by the CLI.

pub mod bvp;
pub mod checks;
pub mod error;
pub mod expr;
pub mod grid;
pub mod halfspace;
pub mod report;
pub mod sobolev;
pub mod symbol;
pub mod wedge;

pub use error::{Error, Result};
