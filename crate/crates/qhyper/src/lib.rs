//! Numerical basic hypergeometric series and the operators built from them.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Operator kernels take their parameters positionally, as the formulas do.
#![allow(clippy::too_many_arguments)]

pub mod askeywilson;
mod dd;
pub mod error;
pub mod littleqjacobi;
pub mod matrixq;
pub mod qcore;
pub mod qdiffeq;
pub mod series;
pub mod spectral;
pub mod suites;
pub mod transmutation;

pub use error::{QError, Result};
pub use qcore::{Base, ToleranceConfig, TruncatedValue, C64};
