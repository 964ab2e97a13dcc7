//! Finite-multivalued maps on the unit interval and their transfer
//! operators.
//!
//! A system is a finite list of affine branches over subintervals of `[0, 1]`.
//! Each point has one image per branch whose domain contains it, and images
//! are chosen with uniform or explicit weights. Sets are finite unions of
//! half-open intervals and functions are piecewise constant, so the kernel,
//! pushforward, Koopman and Frobenius–Perron operators are computed exactly
//! over [`Rational`]. Everything is generic over [`Scalar`], so the same code
//! also runs on `f64` and `f32`.
//!
//! ```
//! use mvdyn::{gallery, kernel, IntervalSet, PCFunction, Rational};
//!
//! let sys = gallery::example4::<Rational>();
//! let lebesgue = PCFunction::constant(Rational::from_integer(1.into()));
//! let image = kernel::pushforward(&sys, &lebesgue).unwrap();
//! let left = IntervalSet::parse("0,1/2").unwrap();
//! assert_eq!(image.integral_over(&left), Rational::new(11.into(), 24.into()));
//! ```

pub mod ergodic;
pub mod error;
pub mod exactset;
pub mod finiteoracle;
pub mod fractal;
pub mod gallery;
pub mod kernel;
pub mod mvmap;
pub mod pcfunc;
pub mod scalar;
pub mod transfer;

pub use error::{Error, Result};
pub use finiteoracle::FiniteSystem;
pub use scalar::{Rational, Scalar};

/// Exact interval.
pub type Interval = exactset::Interval<Rational>;
/// Exact interval set.
pub type IntervalSet = exactset::IntervalSet<Rational>;
/// Exact piecewise-constant function.
pub type PCFunction = pcfunc::PCFunction<Rational>;
/// Exact system.
pub type MultiSystem = mvmap::MultiSystem<Rational>;
pub type AffineBranch = mvmap::AffineBranch<Rational>;
pub type UlamMatrix = transfer::UlamMatrix<Rational>;

pub type IntervalSetF64 = exactset::IntervalSet<f64>;
pub type PCFunctionF64 = pcfunc::PCFunction<f64>;
pub type MultiSystemF64 = mvmap::MultiSystem<f64>;
pub type UlamMatrixF64 = transfer::UlamMatrix<f64>;
