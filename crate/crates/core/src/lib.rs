//! Finite-dimensional laboratory for Krylov solvability of inverse linear
//! problems in sequence spaces, with certified resolvent and spectral
//! projection machinery.

pub mod cases;
pub mod error;
pub mod exec;
pub mod krylov;
pub mod linalg;
pub mod operators;
pub mod opmatrix;
pub mod optim;
pub mod report;
pub mod resolvent;
pub mod spaces;
pub mod spectral;

pub use error::{KblError, Result};
pub use exec::Execution;
pub use linalg::{Matrix, C64};
pub use operators::{Operator, OperatorKind, VolterraRule};
pub use opmatrix::OpMatrix;
pub use spaces::{Exponent, Mask, SpaceSpec, Vector};
