//! Feature matrices, the LVCF file format, and the SVD-based primitives the
//! fitting code is built from.

mod fsutil;
pub mod linalg;
pub mod lvcf;
mod matrix;

pub use fsutil::{create_dir, write_atomic, Manifest};
pub use linalg::{default_rcond, lstsq, pinv, ridge_solve, svd, svd_thin, SvdResult};
pub use lvcf::{read_matrix, write_matrix};
pub use matrix::FeatureMatrix;
