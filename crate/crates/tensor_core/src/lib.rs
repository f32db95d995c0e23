//! Dense complex linear algebra shared by the simulator crates.
//!
//! Tensors are stored column-major with the first index fastest. Complex
//! vectors map to real vectors as `[Re z; Im z]`.

pub mod blob;
pub mod error;
pub mod iso;
pub mod matrix;
pub mod par;
pub mod rng;
pub mod tensor;

pub use error::TensorError;
pub use iso::{complex_to_real_score, real_to_complex_score, RealIso};
pub use matrix::{direct_sum, kron, unvec_matrix, vec_matrix, CMatrix, RMatrix};
pub use num_complex::Complex64 as C64;
pub use tensor::CTensor3;
