//! Dense kernels: the matrix type, Cholesky-based SPD inversion, small gate
//! inverses and rank-revealing QR.

mod factor;
mod mat;
mod sparse;

pub use factor::{
    cholesky_in_place, cholesky_solve, invert_lower_in_place, lower_gram, pivoted_qr_rank,
    small_inverse, spd_inverse, NotPositiveDefinite, SmallInverse,
};
pub(crate) use mat::complement;
pub use mat::{axpy, dot, Mat};
pub use sparse::SparseRow;
