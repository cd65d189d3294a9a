//! Modified electromagnetic transmission eigenvalues of a penetrable ball.
//!
//! The crate computes eigenvalues of the interior transmission problem that
//! arises when Maxwell scattering data for a homogeneous unit ball is compared
//! against an artificial, `eta`-dependent auxiliary scattering problem. Two
//! independent routes to the eigenvalues are provided:
//!
//! * **Exact**: separation of variables reduces both problems to per-order
//!   modal systems; eigenvalues are real roots of transcendental determinant
//!   functions ([`spectrum`]).
//! * **From data**: synthetic electric far field operators are assembled by
//!   Mie-type series, perturbed by noise, and probed with the linear sampling
//!   method; solution-norm peaks over an `eta` grid locate the eigenvalues
//!   ([`operator`], [`lsm`]).
//!
//! Supporting layers: complex spherical Bessel/Hankel functions and (vector)
//! spherical harmonics ([`specfun`]), dense complex LU/SVD/Tikhonov kernels
//! ([`linalg`]), and the separation-of-variables solvers ([`modal`]).
//!
//! The `mte` binary wraps the batch pipelines (`eigs`, `sweep`, `operator`,
//! `selftest`); the `examples/` directory demonstrates each capability as a
//! library call.

pub mod linalg;
pub mod modal;
pub mod operator;
pub mod specfun;

pub use num_complex::Complex64;
