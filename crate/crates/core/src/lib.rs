//! Low-rank Gibbs states of quantum spin models built from the Schmidt
//! subspace of a tree tensor network ground state.

// Links the system OpenBLAS/LAPACK.
extern crate openblas_src;

pub mod entanglement;
pub mod error;
pub mod gibbs;
pub mod groundstate;
pub mod models;
pub mod network;
pub mod scalar;
pub mod tensor;
pub mod thermal;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use thermal::Beta;

/// Double-precision tensor.
pub type Tensor = tensor::DenseTensor<f64>;
/// Double-precision row-major matrix.
pub type Mat = tensor::Matrix<f64>;
/// Double-precision symmetric matrix.
pub type SymMat = tensor::SymmetricMatrix<f64>;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
