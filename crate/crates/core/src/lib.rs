//! Formal Heisenberg symbol calculus with exact residues, cyclic cocycles,
//! index formulas and the Quillen cochain machinery.

pub mod coefficient_backends;
pub mod cyclic_index;
pub mod error;
pub mod exact_scalars;
pub mod form_calculus;
pub mod json;
pub mod quillen_engine;
pub mod rational;
pub mod rng;
pub mod samples;
pub mod symbol_algebra;
pub mod verify;
pub mod wodzicki_residue;
pub mod zeta_laurent;

pub use error::{Error, Result};
pub use exact_scalars::{BigFloatC, GaussianRational, Gr, Period, Rational, Scalar};
