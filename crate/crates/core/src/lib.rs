//! Spectral analysis of zonal kernels on the unit sphere of `C^q`.
//!
//! Zonal kernels `K(x, y) = K'(x · y)` are expanded in disc (generalized
//! Zernike) polynomials `R_{m,n}^{q-2}` for `q >= 2` and in the Fourier basis
//! `z^k` on the circle for `q = 1`. In that basis the generalized spherical
//! convolution is diagonal, which makes the convolution square root of an
//! `L^2`-positive definite kernel an entrywise operation on coefficients.
//!
//! Every spectral identity has an independent check next to it:
//!
//! * [`special_fn`] evaluates disc polynomials by a Jacobi recurrence and by
//!   the explicit monomial sum.
//! * [`quadrature`] supplies disc, circle and sphere rules for direct
//!   integration.
//! * [`spectral`] moves between generating functions and coefficient tables.
//! * [`convolution`] convolves spectrally and by sphere quadrature.
//! * [`root`] builds and diagnoses convolution roots.
//! * [`hs_operator`] computes the operator square root through a Nyström
//!   discretization and a Hermitian eigensolver.

pub mod convolution;
pub mod error;
pub mod hs_operator;
pub mod json;
pub mod quadrature;
pub mod root;
pub mod special_fn;
pub mod spectral;
pub mod sum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use quadrature::{QuadratureRule, RuleKind};
pub use spectral::{CoefficientTable, SpectralIndex, ZonalKernel};
