//! Dense real tensor algebra: labeled contraction, orthogonal factorizations
//! and symmetric eigensolvers.

mod dense;
mod lanczos;
mod matrix;
mod ops;

pub use dense::{DenseTensor, Leg};
pub(crate) use dense::transpose_data;
pub use lanczos::{lanczos_lowest, LanczosOptions, LanczosResult};
pub use matrix::{Eigh, Matrix, SymmetricMatrix, SYMMETRY_TOL};
pub use ops::{contract, factorize_qr, factorize_svd, flops, SvdFactors, SVD_CUTOFF};


