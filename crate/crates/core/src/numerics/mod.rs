//! Gaussian primitives and small dense symmetric linear algebra.

mod gaussian;
mod linalg;

pub use gaussian::{erfc, erfcx, gauss_cdf, gauss_pdf, gauss_sf, std_normal_cdf, std_normal_pdf, std_normal_sf};
pub use linalg::{rank_one_downdate, sym_invert, Cholesky, SymMatrix, Vector, MAX_ORDER};
