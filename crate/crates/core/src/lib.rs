//! Second-order adversarial examples and training, built on a matrix-free
//! Krylov (GMRES) approximation of the Newton direction H⁻¹g.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense `f64` vectors/arrays and the inner-product primitives
//! - [`nn`]: a small feedforward classifier with manual backprop
//! - [`hvp`]: finite-difference Hessian-vector products (no Hessian storage)
//! - [`krylov`]: Arnoldi + Givens GMRES and the approximate Newton direction
//! - [`attacks`]: FGSM, PGD, and the second-order attack built on the solver
//! - [`train`]: standard and adversarial training loops
//! - [`data`]: MNIST IDX ingestion and seeded synthetic datasets
//! - [`metrics`]: accuracy, PSNR, and SSIM

pub mod attacks;
pub mod data;
pub mod error;
pub mod hvp;
pub mod krylov;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
