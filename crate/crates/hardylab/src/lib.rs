//! Orthonormal Laguerre, Hermite and Jacobi systems, their Poisson-type
//! kernels, Hardy-space atoms, and numerical checks of the coefficient
//! inequality Σ |⟨f, φ_n⟩|^s / (|n|+1)^E ≲ ‖f‖_{H^p}^s.

pub mod atoms;
pub mod bases;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod hardy;
pub mod kernels;
pub mod numdiff;
pub mod quadrature;
pub mod rational;
pub mod sharpness;
pub mod specfun;

pub use error::{Error, Result};
