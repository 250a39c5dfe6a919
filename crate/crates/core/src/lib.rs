//! Wick products, Appell polynomials and Wick integrals for non-Gaussian
//! processes.
//!
//! The symbolic layer ([`combinatorics`], [`cumulants`], [`appell`]) is
//! generic over [`Scalar`] and runs exactly over [`Rational`]. The numeric
//! layer ([`chaos2`], [`integrals`], [`simulate`]) works in `f64`, with the
//! pathwise integral sums also available over rationals.

pub mod appell;
pub mod chaos2;
pub mod combinatorics;
pub mod cumulants;
pub mod error;
pub mod integrals;
pub mod quadrature;
pub mod scalar;
pub mod simulate;

pub use error::{Result, WickError};
pub use scalar::Scalar;

pub use combinatorics::{Multiset, Symbol};

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

/// Polynomial with exact rational coefficients.
pub type ExactPoly = appell::WickPolynomial<Rational>;

/// Polynomial with double-precision coefficients.
pub type FloatPoly = appell::WickPolynomial<f64>;

/// Second-chaos kernel over doubles.
pub type Kernel = chaos2::Chaos2Kernel<f64>;

/// Second-chaos kernel over exact rationals.
pub type ExactKernel = chaos2::Chaos2Kernel<Rational>;
