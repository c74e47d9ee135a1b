//! Desk-scale machinery for Grassmann-based PCP constructions over F₂.
//!
//! The crate is layered: [`f2la`] provides subspaces and functionals,
//! [`bilinear`] Fourier analysis on matrix spaces, [`grasstest`] the
//! Grassmann consistency test, [`csp`] and [`reduce`] the constraint
//! satisfaction model and its regularizing reductions, [`outerpcp`] the
//! outer two-prover game and [`composed`] the composed CSP.

pub mod bilinear;
pub mod caps;
pub mod composed;
pub mod csp;
pub mod error;
pub mod f2la;
pub mod grasstest;
pub mod json;
pub mod outerpcp;
pub mod reduce;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use f2la::{F2Matrix, F2Subspace, LinearFunctional, ZoomPair};
pub use bilinear::{BilinearFn, FourierView, MatrixZoom};
pub use scalar::Scalar;

/// Exact rational numbers.
pub type Rational = num_rational::BigRational;

/// Bilinear-scheme table over `f64`.
pub type RealFn = BilinearFn<f64>;

/// Bilinear-scheme table over exact rationals.
pub type ExactFn = BilinearFn<Rational>;
